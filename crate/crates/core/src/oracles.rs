//! Independent numeric verification of the quantitative inequalities the
//! iteration analysis rests on: the V-functional line-integral equivalence,
//! the Young-type estimate for V, and the two-sided triangle estimate.
//!
//! These are the property-test backbone of the crate: everything here is
//! checked by quadrature or direct evaluation, never through the code paths
//! it is meant to audit.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::{v_mu, GradMatrix};

const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// ∫₀¹ (μ² + |tξ + (1−t)η|²)^γ dt by adaptive quadrature.
///
/// For γ < 0 the integrand may have an integrable near-singularity where the
/// segment passes closest to the origin; the integral is split there and the
/// singular side is resolved on a geometrically graded dyadic ladder, with an
/// exact power-law tail when the minimum value is exactly zero.
pub fn line_integral(mu: f64, gamma: f64, xi: &GradMatrix, eta: &GradMatrix) -> Result<f64> {
    if gamma <= -0.5 {
        return Err(Error::InvalidArgument(format!(
            "line integral requires gamma > -1/2, got {gamma}"
        )));
    }
    if mu < 0.0 {
        return Err(Error::InvalidArgument("mu must be nonnegative".into()));
    }
    // q(t) = c0 + c1 t + c2 t², the squared modulus along the segment
    let diff = xi.sub(eta);
    let c0 = mu * mu + eta.norm().powi(2);
    let c1 = 2.0 * eta.dot(&diff);
    let c2 = diff.norm().powi(2);

    if c2 == 0.0 {
        if c0 == 0.0 && gamma < 0.0 {
            return Err(Error::InvalidArgument(
                "integrand diverges: mu = 0 and xi = eta = 0 with gamma < 0".into(),
            ));
        }
        return Ok(c0.powf(gamma));
    }

    let tol = 1e-12;
    let tm = (-c1 / (2.0 * c2)).clamp(0.0, 1.0);
    let qmin = (c0 + tm * (c1 + tm * c2)).max(0.0);
    let left = one_sided_power(tm, 0.0, qmin, c1, c2, gamma, tol)?;
    let right = one_sided_power(tm, 1.0, qmin, c1, c2, gamma, tol)?;
    Ok(left + right)
}

/// Integral of (q(tm + dir·u))^γ over the side from the near-minimum point
/// `tm` to `end`. The quadratic is expanded around tm as
/// qmin + slope·u + c2·u² with every term nonnegative, avoiding the
/// cancellation the raw form suffers near its root; the non-smooth point of
/// q^γ (an integrable singularity for γ < 0, a cusp for fractional γ > 0) is
/// resolved on a geometrically graded dyadic ladder with an exact power-law
/// closed form when the minimum value is exactly zero.
fn one_sided_power(
    tm: f64,
    end: f64,
    qmin: f64,
    c1: f64,
    c2: f64,
    gamma: f64,
    tol: f64,
) -> Result<f64> {
    let len = (end - tm).abs();
    if len == 0.0 {
        return Ok(0.0);
    }
    let dir = (end - tm).signum();
    if qmin == 0.0 {
        // the minimum value is zero only where the segment meets the origin,
        // which is a stationary point: q = c2 (t - tm)² exactly, so the whole
        // side has a closed form
        return Ok(c2.powf(gamma) * len.powf(2.0 * gamma + 1.0) / (2.0 * gamma + 1.0));
    }
    // outward slope; analytically >= 0, clamp the roundoff
    let slope = (dir * (c1 + 2.0 * c2 * tm)).max(0.0);
    let f = move |u: f64| (qmin + u * (slope + u * c2)).powf(gamma);
    // q varies by O(1) factors above this scale and is flat below it
    let flat_scale = if c2 > 0.0 { (qmin / c2).sqrt() } else { len };

    let mut total = 0.0;
    let mut hi = len;
    for _ in 0..120 {
        let lo = hi * 0.5;
        if lo <= flat_scale || hi <= 1e-18 * len.max(1.0) {
            total += adaptive_simpson(&f, 0.0, hi, tol)?;
            return Ok(total);
        }
        total += adaptive_simpson(&f, lo, hi, tol)?;
        // remaining mass bound: the integrand is monotone towards tm
        let tail = if gamma < 0.0 {
            let power_tail = c2.powf(gamma) * lo.powf(2.0 * gamma + 1.0) / (2.0 * gamma + 1.0);
            (lo * qmin.powf(gamma)).min(power_tail)
        } else {
            lo * f(lo)
        };
        if tail <= tol * total.abs().max(1e-300) {
            return Ok(total);
        }
        hi = lo;
    }
    Err(Error::QuadratureTolerance {
        tol,
        subdivisions: 120,
    })
}

fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
        h / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &impl Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: usize,
    ) -> Result<f64> {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, m - a);
        let right = simpson(fm, frm, fb, b - m);
        let err = left + right - whole;
        if err.abs() <= 15.0 * tol || (b - a) <= 1e-15 * (a.abs() + b.abs()) {
            return Ok(left + right + err / 15.0);
        }
        if depth == 0 {
            return Err(Error::QuadratureTolerance {
                tol,
                subdivisions: 48,
            });
        }
        Ok(recurse(f, a, m, fa, flm, fm, left, tol * 0.5, depth - 1)?
            + recurse(f, m, b, fm, frm, fb, right, tol * 0.5, depth - 1)?)
    }
    if a == b {
        return Ok(0.0);
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson(fa, fm, fb, b - a);
    recurse(f, a, b, fa, fm, fb, whole, tol.max(1e-14 * whole.abs()), 48)
}

/// Constants of the two-sided line-integral equivalence. Returns
/// `(lower, upper)` multipliers of `(μ² + |η|² + |ξ−η|²)^γ`.
pub fn vfunc_constants(gamma: f64) -> (f64, f64) {
    let mean = 6.0f64.powf(-gamma) / (2.0 * gamma + 1.0);
    let young = 2.0f64.powf(gamma);
    if gamma >= 0.0 {
        (mean, young)
    } else {
        (young, mean)
    }
}

#[derive(Clone, Debug)]
pub struct BoundsReport {
    pub integral: f64,
    /// (μ² + |η|² + |ξ−η|²)^γ
    pub reference: f64,
    pub lower_const: f64,
    pub upper_const: f64,
    pub lower_ok: bool,
    pub upper_ok: bool,
    /// Normalized slack: nonnegative when the bound holds.
    pub lower_slack: f64,
    pub upper_slack: f64,
}

/// Check both sides of the line-integral equivalence on one tuple.
pub fn check_vfunc_equiv(
    mu: f64,
    gamma: f64,
    xi: &GradMatrix,
    eta: &GradMatrix,
) -> Result<BoundsReport> {
    let integral = line_integral(mu, gamma, xi, eta)?;
    let q = mu * mu + eta.norm().powi(2) + xi.sub(eta).norm().powi(2);
    let reference = q.powf(gamma);
    let (lo_c, hi_c) = vfunc_constants(gamma);
    let scale = integral.abs().max(reference.abs()).max(1e-300);
    let lower_slack = (integral - lo_c * reference) / scale;
    let upper_slack = (hi_c * reference - integral) / scale;
    // allow the quadrature tolerance
    let tol = 1e-10;
    Ok(BoundsReport {
        integral,
        reference,
        lower_const: lo_c,
        upper_const: hi_c,
        lower_ok: lower_slack >= -tol,
        upper_ok: upper_slack >= -tol,
        lower_slack,
        upper_slack,
    })
}

/// `C_ε = max(1/(4ε), (p−1)^(p−1) / (p^p ε^(p−1)))`, with 0⁰ = 1 at p = 1.
pub fn young_constant(p: f64, eps: f64) -> f64 {
    debug_assert!(p >= 1.0 && eps > 0.0);
    let a = 1.0 / (4.0 * eps);
    // f64 powf(0,0) is 1, which is the continuous limit used here
    let b = (p - 1.0).powf(p - 1.0) / (p.powf(p) * eps.powf(p - 1.0));
    a.max(b)
}

/// Young-type inequality for the V-functional:
/// `(μ²+|x|²)^((p−2)/2) x·y ≤ ε|V_μ(x)|² + C_ε|V_μ(y)|²`.
pub fn check_v_young(x: &GradMatrix, y: &GradMatrix, mu: f64, p: f64, eps: f64) -> bool {
    let s = mu * mu + x.norm().powi(2);
    let lhs = if s == 0.0 { 0.0 } else { s.powf((p - 2.0) / 2.0) * x.dot(y) };
    let rhs = eps * v_mu(p, mu, x).norm().powi(2)
        + young_constant(p, eps) * v_mu(p, mu, y).norm().powi(2);
    lhs <= rhs + 1e-12 * lhs.abs().max(rhs.abs()).max(1.0)
}

/// Two-sided triangle estimate:
/// `(3−√5)/2 (|a|²+|b|²) ≤ |a|²+|a−b|² ≤ (3+√5)/2 (|a|²+|b|²)`.
pub fn check_triangle_estimate(a: &GradMatrix, b: &GradMatrix) -> bool {
    let mid = a.norm().powi(2) + a.sub(b).norm().powi(2);
    let bracket = a.norm().powi(2) + b.norm().powi(2);
    let lo = (3.0 - 5.0f64.sqrt()) / 2.0 * bracket;
    let hi = (3.0 + 5.0f64.sqrt()) / 2.0 * bracket;
    let slack = 1e-12 * bracket.max(1.0);
    lo - slack <= mid && mid <= hi + slack
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug)]
pub struct SweepConfig {
    pub seed: u64,
    pub samples: usize,
}

#[derive(Clone, Debug, Default)]
pub struct SweepOutcome {
    pub samples: usize,
    pub violations: usize,
    /// Most negative normalized slack observed (positive = margin).
    pub worst_slack: f64,
    pub worst_case: String,
}

impl SweepOutcome {
    fn new() -> Self {
        Self {
            worst_slack: f64::INFINITY,
            ..Default::default()
        }
    }

    fn record(&mut self, slack: f64, desc: impl FnOnce() -> String) {
        self.samples += 1;
        if slack < self.worst_slack {
            self.worst_slack = slack;
            self.worst_case = desc();
        }
        if slack < -1e-10 {
            self.violations += 1;
        }
    }
}

fn random_grad(rng: &mut ChaCha8Rng, n_comp: usize, n_dir: usize, scale: f64) -> GradMatrix {
    let mut g = GradMatrix::zeros(n_comp, n_dir);
    for c in 0..n_comp {
        for d in 0..n_dir {
            g.set(c, d, rng.gen_range(-scale..scale));
        }
    }
    g
}

fn random_shape(rng: &mut ChaCha8Rng) -> (usize, usize) {
    let n_comp = rng.gen_range(1..=3);
    let n_dir = rng.gen_range(2..=3);
    (n_comp, n_dir)
}

/// Monte-Carlo sweep of the line-integral equivalence, both γ regimes plus
/// structured stress cases (collinear-through-origin segments, zero
/// endpoints, small μ).
pub fn sweep_vfunc_equiv(cfg: SweepConfig) -> Result<SweepOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = SweepOutcome::new();
    for k in 0..cfg.samples {
        let (nc, nd) = random_shape(&mut rng);
        let gamma = if k % 2 == 0 {
            rng.gen_range(0.0..=5.0)
        } else {
            rng.gen_range(-0.49..0.0)
        };
        let mu = if k % 7 == 3 {
            rng.gen_range(0.0..0.05)
        } else {
            rng.gen_range(0.0..10.0)
        };
        let eta = random_grad(&mut rng, nc, nd, 10.0);
        let xi = match k % 10 {
            8 => eta.scaled(-rng.gen_range(0.25..4.0)), // near-antipodal
            9 => GradMatrix::zeros(nc, nd),             // endpoint at the origin
            _ => random_grad(&mut rng, nc, nd, 10.0),
        };
        if mu == 0.0 && xi.norm() == 0.0 && eta.norm() == 0.0 {
            continue;
        }
        let rep = check_vfunc_equiv(mu, gamma, &xi, &eta)?;
        let slack = rep.lower_slack.min(rep.upper_slack);
        out.record(slack, || {
            format!("gamma={gamma:.4} mu={mu:.4} |eta|={:.4} |xi-eta|={:.4}", eta.norm(), xi.sub(&eta).norm())
        });
    }
    Ok(out)
}

/// Monte-Carlo sweep of the Young-type inequality.
pub fn sweep_v_young(cfg: SweepConfig) -> SweepOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = SweepOutcome::new();
    for _ in 0..cfg.samples {
        let (nc, nd) = random_shape(&mut rng);
        let x = random_grad(&mut rng, nc, nd, 10.0);
        let y = random_grad(&mut rng, nc, nd, 10.0);
        let mu = rng.gen_range(0.0..10.0);
        let p = rng.gen_range(1.0..8.0);
        let eps = 10f64.powf(rng.gen_range(-3.0..2.0));
        let s = mu * mu + x.norm().powi(2);
        let lhs = if s == 0.0 { 0.0 } else { s.powf((p - 2.0) / 2.0) * x.dot(&y) };
        let rhs = eps * v_mu(p, mu, &x).norm().powi(2)
            + young_constant(p, eps) * v_mu(p, mu, &y).norm().powi(2);
        let slack = (rhs - lhs) / rhs.abs().max(lhs.abs()).max(1e-300);
        out.record(slack, || format!("p={p:.3} eps={eps:.3e} mu={mu:.3}"));
    }
    out
}

/// Monte-Carlo sweep of the triangle estimate.
pub fn sweep_triangle(cfg: SweepConfig) -> SweepOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = SweepOutcome::new();
    for _ in 0..cfg.samples {
        let (nc, nd) = random_shape(&mut rng);
        let a = random_grad(&mut rng, nc, nd, 10.0);
        let b = random_grad(&mut rng, nc, nd, 10.0);
        let mid = a.norm().powi(2) + a.sub(&b).norm().powi(2);
        let bracket = a.norm().powi(2) + b.norm().powi(2);
        if bracket == 0.0 {
            out.record(0.0, String::new);
            continue;
        }
        let lo = (3.0 - 5.0f64.sqrt()) / 2.0;
        let hi = (3.0 + 5.0f64.sqrt()) / 2.0;
        let r = mid / bracket;
        let slack = (r - lo).min(hi - r) / hi;
        out.record(slack, || format!("ratio={r:.6}"));
    }
    out
}

/// Extremes of the ratio (|a|²+|a−b|²)/(|a|²+|b|²) under sampling plus local
/// refinement. The ratio is scale- and rotation-invariant, so the search runs
/// over |b|/|a| and the angle cosine.
pub fn triangle_ratio_extremes(cfg: SweepConfig) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let ratio = |r: f64, c: f64| (1.0 + 1.0 - 2.0 * r * c + r * r) / (1.0 + r * r);

    let mut best_hi = (f64::NEG_INFINITY, 0.0, 0.0);
    let mut best_lo = (f64::INFINITY, 0.0, 0.0);
    for _ in 0..cfg.samples {
        let r = 10f64.powf(rng.gen_range(-2.0..2.0));
        let c = rng.gen_range(-1.0..=1.0);
        let v = ratio(r, c);
        if v > best_hi.0 {
            best_hi = (v, r, c);
        }
        if v < best_lo.0 {
            best_lo = (v, r, c);
        }
    }

    // coordinate-descent refinement with golden-section line searches
    let refine = |start: (f64, f64, f64), maximize: bool| -> f64 {
        let sign = if maximize { 1.0 } else { -1.0 };
        let (mut r, mut c) = (start.1, start.2);
        for _ in 0..60 {
            r = golden_max(|t| sign * ratio(t, c), (r * 0.5).max(1e-6), r * 2.0 + 1.0);
            c = golden_max(|t| sign * ratio(r, t), -1.0, 1.0);
        }
        ratio(r, c)
    };
    (refine(best_lo, false), refine(best_hi, true))
}

/// Golden-section maximizer on [a, b] for a unimodal function.
pub fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - GOLDEN * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + GOLDEN * (b - a);
            fd = f(d);
        }
        if (b - a).abs() < 1e-13 * (a.abs() + b.abs()).max(1.0) {
            break;
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g1(vals: &[f64]) -> GradMatrix {
        GradMatrix::from_row_slice(1, vals.len(), vals)
    }

    #[test]
    fn line_integral_constant_cases() {
        // γ = 0 makes the integrand identically 1
        let v = g1(&[3.0, -2.0]);
        let w = g1(&[0.5, 1.0]);
        assert!((line_integral(1.0, 0.0, &v, &w).unwrap() - 1.0).abs() < 1e-12);
        // ξ = η = (1,0), γ = 1, μ = 0: integrand ≡ 1
        let e = g1(&[1.0, 0.0]);
        assert!((line_integral(0.0, 1.0, &e, &e).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn line_integral_t_squared() {
        // ξ = (1,0), η = 0, γ = 1: ∫ t² dt = 1/3
        let xi = g1(&[1.0, 0.0]);
        let eta = g1(&[0.0, 0.0]);
        let v = line_integral(0.0, 1.0, &xi, &eta).unwrap();
        assert!((v - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn line_integral_singular_antipodal() {
        // μ = 0, ξ = -η: ∫ |1-2t|^{2γ} dt = 1/(2γ+1), exactly resolvable
        let eta = g1(&[1.0, 0.0]);
        let xi = g1(&[-1.0, 0.0]);
        for gamma in [-0.4, -0.2, -0.45, -0.49] {
            let v = line_integral(0.0, gamma, &xi, &eta).unwrap();
            let exact = 1.0 / (2.0 * gamma + 1.0);
            assert!(
                (v - exact).abs() < 1e-10 * exact,
                "gamma {gamma}: {v} vs {exact}"
            );
        }
    }

    #[test]
    fn line_integral_polynomial_closed_forms() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let xi = random_grad(&mut rng, 2, 2, 5.0);
            let eta = random_grad(&mut rng, 2, 2, 5.0);
            let mu = rng.gen_range(0.0..3.0f64);
            let d = xi.sub(&eta);
            let c0 = mu * mu + eta.norm().powi(2);
            let c1 = 2.0 * eta.dot(&d);
            let c2 = d.norm().powi(2);
            // γ = 1: c0 + c1/2 + c2/3
            let exact1 = c0 + c1 / 2.0 + c2 / 3.0;
            let v1 = line_integral(mu, 1.0, &xi, &eta).unwrap();
            assert!((v1 - exact1).abs() <= 1e-11 * exact1.abs().max(1.0));
            // γ = 2: expand (c0 + c1 t + c2 t²)²
            let exact2 = c0 * c0
                + c0 * c1
                + (c1 * c1 + 2.0 * c0 * c2) / 3.0
                + c1 * c2 / 2.0
                + c2 * c2 / 5.0;
            let v2 = line_integral(mu, 2.0, &xi, &eta).unwrap();
            assert!((v2 - exact2).abs() <= 1e-11 * exact2.abs().max(1.0));
        }
    }

    #[test]
    fn line_integral_rejects_bad_gamma() {
        let e = g1(&[1.0, 0.0]);
        assert!(line_integral(0.0, -0.5, &e, &e).is_err());
    }

    #[test]
    fn vfunc_gamma_zero_is_equality() {
        let (lo, hi) = vfunc_constants(0.0);
        assert_eq!((lo, hi), (1.0, 1.0));
        let rep = check_vfunc_equiv(2.0, 0.0, &g1(&[1.0, 2.0]), &g1(&[3.0, -1.0])).unwrap();
        assert!(rep.lower_ok && rep.upper_ok);
        assert!((rep.integral - rep.reference).abs() < 1e-12);
    }

    #[test]
    fn vfunc_third_case() {
        // integral 1/3 must lie in [1/18, 2] for γ=1, μ=0, ξ=(1,0), η=0
        let rep = check_vfunc_equiv(0.0, 1.0, &g1(&[1.0, 0.0]), &g1(&[0.0, 0.0])).unwrap();
        assert!((rep.integral - 1.0 / 3.0).abs() < 1e-11);
        assert!((rep.lower_const - 1.0 / 18.0).abs() < 1e-15);
        assert!((rep.upper_const - 2.0).abs() < 1e-15);
        assert!(rep.lower_ok && rep.upper_ok);
    }

    #[test]
    fn vfunc_sweep_small() {
        let out = sweep_vfunc_equiv(SweepConfig {
            seed: 99,
            samples: 1500,
        })
        .unwrap();
        assert_eq!(out.violations, 0, "worst: {}", out.worst_case);
    }

    #[test]
    fn young_constant_examples() {
        assert!((young_constant(2.0, 1.0) - 0.25).abs() < 1e-15);
        // p = 1: second branch is 0⁰/1 = 1
        assert!((young_constant(1.0, 1.0) - 1.0).abs() < 1e-15);
        // p = 3, ε = 2: max(1/8, 4/(27·4)) = 0.125
        assert!((young_constant(3.0, 2.0) - 0.125).abs() < 1e-15);
    }

    #[test]
    fn v_young_trivial_cases() {
        let zero = GradMatrix::zeros(2, 2);
        let y = g1(&[1.0, 2.0]);
        let y2 = GradMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, -1.0]);
        assert!(check_v_young(&zero, &y2, 0.5, 3.0, 0.7));
        assert!(check_v_young(&g1(&[1.0, -1.0]), &GradMatrix::zeros(1, 2), 0.0, 2.5, 0.3));
        let _ = y;
    }

    #[test]
    fn v_young_sweep_small() {
        let out = sweep_v_young(SweepConfig {
            seed: 4,
            samples: 2000,
        });
        assert_eq!(out.violations, 0, "worst: {}", out.worst_case);
    }

    #[test]
    fn triangle_trivials() {
        let zero = GradMatrix::zeros(1, 2);
        assert!(check_triangle_estimate(&zero, &zero));
        assert!(check_triangle_estimate(&zero, &g1(&[1.0, 0.0])));
    }

    #[test]
    fn triangle_sweep_and_sharpness() {
        let out = sweep_triangle(SweepConfig {
            seed: 8,
            samples: 5000,
        });
        assert_eq!(out.violations, 0);
        let (lo, hi) = triangle_ratio_extremes(SweepConfig {
            seed: 8,
            samples: 20000,
        });
        assert!((lo - (3.0 - 5.0f64.sqrt()) / 2.0).abs() < 1e-3, "{lo}");
        assert!((hi - (3.0 + 5.0f64.sqrt()) / 2.0).abs() < 1e-3, "{hi}");
    }

    use super::random_grad;
}
