//! Spectral constants of the iteration: the relative dispersion K of a field
//! pair, the relaxation parameter γ, the optimal nonsymmetric contraction
//! constant K_γ, and the resulting contraction rate with its admissibility
//! verdict.

use std::fmt;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fields::StructureField;
use crate::oracles::golden_max;
use crate::sampling::SampleSpec;
use crate::tensor::{generalized_eigen_bounds, operator_norm, sym_eigen_bounds, JacobianForm};

/// Optimal symmetric choice: γ = 2/(Λ+λ), K = (Λ−λ)/(Λ+λ).
pub fn gamma_star_symmetric(lambda: f64, lambda_max: f64) -> Result<(f64, f64)> {
    if lambda <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "lower spectral bound must be positive, got {lambda}"
        )));
    }
    if lambda_max < lambda {
        return Err(Error::InvalidArgument(
            "upper spectral bound below lower bound".into(),
        ));
    }
    let gamma = 2.0 / (lambda_max + lambda);
    let k = (lambda_max - lambda) / (lambda_max + lambda);
    Ok((gamma, k))
}

/// Output of the nonsymmetric optimal-γ computation.
#[derive(Clone, Copy, Debug)]
pub struct KoshelevGamma {
    pub k_gamma: f64,
    pub gamma: f64,
    /// Largest eigenvalue of C = A⁺A⁻ − A⁻A⁺ − (A⁻)².
    pub sigma: f64,
    /// Extreme eigenvalues of the symmetric part used as the spectral bounds.
    pub lambda: f64,
    pub lambda_max: f64,
    /// True when σ ≥ λ(Λ−λ)/2 selected the first branch.
    pub skew_dominated: bool,
}

/// Minimize ‖I − γA‖ over γ > 0 for a positive definite A, splitting
/// A = A⁺ + A⁻ into symmetric and skew parts and using the two-case optimum
/// driven by σ, the largest eigenvalue of C = A⁺A⁻ − A⁻A⁺ − (A⁻)².
pub fn koshelev_kgamma(a: &JacobianForm) -> Result<KoshelevGamma> {
    let sym = a.symmetric_part();
    let skew = a.skew_part();
    let (lambda, lambda_max) = sym_eigen_bounds(&sym)?;
    if lambda <= 0.0 {
        return Err(Error::NotSpd);
    }
    let c = sym.inner() * skew.inner() - skew.inner() * sym.inner()
        - skew.inner() * skew.inner();
    let c_form = JacobianForm::new((&c + c.transpose()) * 0.5, a.n_comp(), a.n_dir())?;
    let (_, sigma) = sym_eigen_bounds(&c_form)?;
    let sigma = sigma.max(0.0);

    let skew_dominated = sigma >= lambda * (lambda_max - lambda) / 2.0;
    let (k2, gamma) = if skew_dominated {
        (
            sigma / (sigma + lambda * lambda),
            lambda / (sigma + lambda * lambda),
        )
    } else {
        (
            ((lambda_max - lambda).powi(2) + 4.0 * sigma) / (lambda_max + lambda).powi(2),
            2.0 / (lambda_max + lambda),
        )
    };
    Ok(KoshelevGamma {
        k_gamma: k2.max(0.0).sqrt(),
        gamma,
        sigma,
        lambda,
        lambda_max,
        skew_dominated,
    })
}

/// Contraction rate of the iteration from p, the reference-field ellipticity
/// bounds and the norm-comparison constant K. Admissible iff R < 1.
pub fn contraction_rate(p: f64, lambda_b: f64, lambda_b_max: f64, k: f64) -> (f64, bool) {
    debug_assert!(p > 1.0 && lambda_b > 0.0 && lambda_b_max >= lambda_b && k >= 0.0);
    let ratio = lambda_b_max / lambda_b;
    let r = if p >= 2.0 {
        let base = ratio
            * k
            * ((3.0 + 5.0f64.sqrt()) / 2.0).powf((p - 2.0) / (2.0 * p))
            * 6.0f64.powf(p - 2.0)
            * (p - 1.0);
        base.powf(1.0 / (p - 1.0))
    } else {
        let base = ratio
            * k
            * ((3.0 - 5.0f64.sqrt()) / 2.0).powf((p - 2.0) / 4.0)
            * 2.0f64.powf(2.0 - p)
            / (p - 1.0);
        base.powf(2.0 / p)
    };
    (r, r < 1.0)
}

/// How the constants were obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConstantsMode {
    /// Both fields linear: one exact generalized eigen-solve.
    Analytic,
    /// Sampled suprema over (x, z).
    Sampled,
}

/// How γ and K_γ were chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GammaPath {
    Symmetric,
    NonsymmetricFormula,
    NonsymmetricNumeric,
}

impl fmt::Display for GammaPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GammaPath::Symmetric => write!(f, "symmetric"),
            GammaPath::NonsymmetricFormula => write!(f, "nonsymmetric-formula"),
            GammaPath::NonsymmetricNumeric => write!(f, "nonsymmetric-numeric"),
        }
    }
}

/// Everything the iteration needs to know about a field pair.
#[derive(Clone, Debug)]
pub struct ConstantsReport {
    pub lambda_ab: f64,
    pub lambda_ab_max: f64,
    pub k_ab: f64,
    pub gamma: f64,
    pub sigma: Option<f64>,
    pub k_gamma: f64,
    pub rate: f64,
    pub admissible: bool,
    pub p: f64,
    pub lambda_b: f64,
    pub lambda_b_max: f64,
    pub mode: ConstantsMode,
    pub gamma_path: GammaPath,
    pub samples: usize,
}

impl ConstantsReport {
    /// Constants certified rather than sampled.
    pub fn certified(&self) -> bool {
        self.mode == ConstantsMode::Analytic
    }

    pub fn csv_header() -> &'static str {
        "lambda_ab,Lambda_ab,K_ab,gamma,sigma,K_gamma,rate,admissible,p,lambda_b,Lambda_b,certified,samples"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{},{:.16e},{:.16e},{},{:.16e},{:.16e},{:.16e},{},{}",
            self.lambda_ab,
            self.lambda_ab_max,
            self.k_ab,
            self.gamma,
            self.sigma.map_or(String::new(), |s| format!("{s:.16e}")),
            self.k_gamma,
            self.rate,
            self.admissible,
            self.p,
            self.lambda_b,
            self.lambda_b_max,
            self.certified(),
            self.samples
        )
    }
}

impl fmt::Display for ConstantsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "spectral constants ({} path, {} samples{})",
            self.gamma_path,
            self.samples,
            if self.certified() { ", certified" } else { ", sampled estimate" })?;
        writeln!(f, "  lambda_ab   = {:.5}", self.lambda_ab)?;
        writeln!(f, "  Lambda_ab   = {:.5}", self.lambda_ab_max)?;
        writeln!(f, "  K_ab        = {:.5}", self.k_ab)?;
        writeln!(f, "  gamma       = {:.5}", self.gamma)?;
        if let Some(s) = self.sigma {
            writeln!(f, "  sigma       = {:.5}", s)?;
        }
        writeln!(f, "  K_gamma     = {:.5}", self.k_gamma)?;
        writeln!(f, "  lambda_b    = {:.5}", self.lambda_b)?;
        writeln!(f, "  Lambda_b    = {:.5}", self.lambda_b_max)?;
        writeln!(f, "  rate R      = {:.5}", self.rate)?;
        write!(f, "  admissible  = {}", self.admissible)
    }
}

/// Compute the full constants report for a field pair.
///
/// Linear pairs use one exact generalized eigen-solve; nonlinear pairs sample
/// B⁻¹A over the (x, z) stream. The symmetric path takes γ = 2/(Λ+λ) with
/// K_γ = K_ab; nonsymmetric pairs use the two-case optimal formula where its
/// premises hold and otherwise minimize the sampled sup of ‖I − γB⁻¹A‖ over γ
/// (convex in γ).
pub fn kab_for_fields(
    a: &dyn StructureField,
    b: &dyn StructureField,
    spec: &SampleSpec,
) -> Result<ConstantsReport> {
    let p = a.meta().p;
    let lambda_b = b.meta().lambda_min;
    let lambda_b_max = b.meta().lambda_max;
    if lambda_b <= 0.0 {
        return Err(Error::NotElliptic(
            "reference field has nonpositive lower ellipticity bound".into(),
        ));
    }

    let analytic = a.meta().linear && b.meta().linear;
    let mut lambda_ab = f64::INFINITY;
    let mut lambda_ab_max = f64::NEG_INFINITY;
    let mut pencils: Vec<DMatrix<f64>> = Vec::new();
    let mut samples = 0usize;

    let mut visit = |x: &[f64], z: &crate::tensor::GradMatrix| -> Result<()> {
        let aj = match a.jacobian(x, z) {
            Ok(j) => j,
            Err(Error::SingularJacobian) => return Ok(()),
            Err(e) => return Err(e),
        };
        let bj = match b.jacobian(x, z) {
            Ok(j) => j,
            Err(Error::SingularJacobian) => return Ok(()),
            Err(e) => return Err(e),
        };
        let b_sym = bj.symmetric_part();
        let chol = b_sym.inner().clone().cholesky().ok_or(Error::NotSpd)?;
        // eigen range of the pencil
        if aj.is_symmetric() && bj.is_symmetric() {
            let (lo, hi) = generalized_eigen_bounds(&bj, &aj)?;
            lambda_ab = lambda_ab.min(lo);
            lambda_ab_max = lambda_ab_max.max(hi);
        } else {
            let m = chol.solve(aj.inner());
            let eig = m.complex_eigenvalues();
            for ev in eig.iter() {
                lambda_ab = lambda_ab.min(ev.re);
                lambda_ab_max = lambda_ab_max.max(ev.re);
            }
            // keep B⁻¹A for the γ search
            if pencils.len() < 240 {
                pencils.push(chol.solve(aj.inner()));
            }
        }
        if !(a.meta().symmetric_jacobian && b.meta().symmetric_jacobian) && pencils.len() < 240 {
            // also retained for symmetric-tagged pairs sampled nonsymmetrically
        }
        samples += 1;
        Ok(())
    };

    if analytic {
        let z = crate::tensor::GradMatrix::from_row_slice(
            spec.n_comp,
            spec.n_dir,
            &vec![0.25; spec.n_comp * spec.n_dir],
        );
        visit(&vec![0.5; spec.n_dir], &z)?;
    } else {
        for (x, z) in spec.iter() {
            visit(&x, &z)?;
        }
    }
    if samples == 0 {
        return Err(Error::EmptySampleSet);
    }

    // snap numerically identical spectra (a proportional to b) to zero spread
    let spread = lambda_ab_max - lambda_ab;
    let k_ab = if spread.abs() <= 1e-13 * (lambda_ab.abs() + lambda_ab_max.abs()) {
        lambda_ab = 0.5 * (lambda_ab + lambda_ab_max);
        lambda_ab_max = lambda_ab;
        0.0
    } else {
        spread / (lambda_ab + lambda_ab_max)
    };
    let symmetric_pair = a.meta().symmetric_jacobian && b.meta().symmetric_jacobian;

    let (gamma, k_gamma, sigma, gamma_path) = if symmetric_pair {
        if lambda_ab > 0.0 {
            let (g, k) = gamma_star_symmetric(lambda_ab, lambda_ab_max)?;
            (g, k, None, GammaPath::Symmetric)
        } else {
            (1.0, k_ab.abs().max(1.0), None, GammaPath::Symmetric)
        }
    } else {
        nonsymmetric_gamma(&pencils, lambda_ab, lambda_ab_max)?
    };

    let (rate, admissible) = contraction_rate(p, lambda_b, lambda_b_max, k_gamma);
    Ok(ConstantsReport {
        lambda_ab,
        lambda_ab_max,
        k_ab,
        gamma,
        sigma,
        k_gamma,
        rate,
        admissible: admissible && lambda_ab > 0.0,
        p,
        lambda_b,
        lambda_b_max,
        mode: if analytic {
            ConstantsMode::Analytic
        } else {
            ConstantsMode::Sampled
        },
        gamma_path,
        samples,
    })
}

/// Choose γ for a nonsymmetric pair: the two-case formula per sampled pencil
/// when the symmetric parts are positive definite, refined by a direct
/// minimization of γ ↦ sup ‖I − γM‖ (convex).
fn nonsymmetric_gamma(
    pencils: &[DMatrix<f64>],
    lambda_ab: f64,
    lambda_ab_max: f64,
) -> Result<(f64, f64, Option<f64>, GammaPath)> {
    if pencils.is_empty() {
        return Err(Error::EmptySampleSet);
    }
    let forms: Vec<JacobianForm> = pencils
        .iter()
        .map(|m| JacobianForm::from_matrix(m.clone()))
        .collect::<Result<_>>()?;

    let sup_norm = |gamma: f64| -> f64 {
        forms
            .iter()
            .map(|m| {
                let n = m.size();
                let shifted = DMatrix::identity(n, n) - m.inner() * gamma;
                operator_norm(&JacobianForm::from_matrix(shifted).expect("finite"))
            })
            .fold(0.0f64, f64::max)
    };

    let mut candidates: Vec<f64> = Vec::new();
    let mut sigma_max: f64 = 0.0;
    let mut formula_ok = true;
    for m in &forms {
        match koshelev_kgamma(m) {
            Ok(kg) => {
                candidates.push(kg.gamma);
                sigma_max = sigma_max.max(kg.sigma);
            }
            Err(Error::NotSpd) => {
                formula_ok = false;
                // σ is still well-defined; report it
                let sym = m.symmetric_part();
                let skew = m.skew_part();
                let c = sym.inner() * skew.inner()
                    - skew.inner() * sym.inner()
                    - skew.inner() * skew.inner();
                if let Ok(cf) =
                    JacobianForm::new((&c + c.transpose()) * 0.5, m.n_comp(), m.n_dir())
                {
                    if let Ok((_, s)) = sym_eigen_bounds(&cf) {
                        sigma_max = sigma_max.max(s);
                    }
                }
            }
            Err(e) => return Err(e),
        }
    }
    if lambda_ab > 0.0 {
        candidates.push(2.0 / (lambda_ab + lambda_ab_max));
    }

    // convex 1-D refinement over a bracket covering all candidates
    let hi = candidates
        .iter()
        .fold(0.0f64, |acc, g| acc.max(*g))
        .max(if lambda_ab_max > 0.0 { 2.0 / lambda_ab_max } else { 1.0 })
        * 2.0;
    let refined = golden_max(|g| -sup_norm(g), 1e-9, hi.max(1e-6));
    candidates.push(refined);

    let (mut best_gamma, mut best_k) = candidates
        .iter()
        .map(|&g| (g, sup_norm(g)))
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .unwrap();
    if best_k >= 1.0 && lambda_ab > 0.0 {
        // no norm contraction exists; the infimum degenerates towards
        // gamma -> 0. Report the spectral midpoint instead - the useful
        // relaxation when the run is forced past the admissibility check.
        best_gamma = 2.0 / (lambda_ab + lambda_ab_max);
        best_k = sup_norm(best_gamma);
    }

    let path = if formula_ok {
        GammaPath::NonsymmetricFormula
    } else {
        GammaPath::NonsymmetricNumeric
    };
    Ok((best_gamma, best_k, Some(sigma_max), path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{identity_field, linear_field, p_laplace_field};
    use nalgebra::DVector;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gamma_star_examples() {
        assert_eq!(gamma_star_symmetric(1.0, 1.0).unwrap(), (1.0, 0.0));
        let (g, k) = gamma_star_symmetric(1.0, 2.0).unwrap();
        assert!((g - 2.0 / 3.0).abs() < 1e-15);
        assert!((k - 1.0 / 3.0).abs() < 1e-15);
        assert!(gamma_star_symmetric(0.0, 1.0).is_err());
    }

    #[test]
    fn gamma_star_norm_bound_on_commuting_pairs() {
        // ||B - γ*A|| <= K ||B|| for commuting SPD pairs with generalized
        // spectrum inside [λ, Λ]
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..40 {
            let n = rng.gen_range(2..=5);
            let lambda = rng.gen_range(0.2..1.0);
            let lambda_max = lambda + rng.gen_range(0.1..3.0);
            // shared eigenbasis
            let raw = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0f64));
            let q = raw.qr().q();
            let db = DVector::from_fn(n, |_, _| rng.gen_range(0.5..2.0f64));
            let dm = DVector::from_fn(n, |_, _| rng.gen_range(lambda..lambda_max));
            let b = &q * DMatrix::from_diagonal(&db) * q.transpose();
            let a = &q * DMatrix::from_diagonal(&db.component_mul(&dm)) * q.transpose();
            let (gamma, k) = gamma_star_symmetric(lambda, lambda_max).unwrap();
            let diff = &b - &a * gamma;
            let lhs = operator_norm(&JacobianForm::from_matrix(diff).unwrap());
            let rhs = k * operator_norm(&JacobianForm::from_matrix(b).unwrap());
            assert!(lhs <= rhs + 1e-10, "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn koshelev_identity() {
        let kg = koshelev_kgamma(&JacobianForm::identity(2, 1)).unwrap();
        assert!((kg.k_gamma - 0.0).abs() < 1e-15);
        assert!((kg.gamma - 1.0).abs() < 1e-15);
        assert_eq!(kg.sigma, 0.0);
    }

    #[test]
    fn koshelev_diagonal_reduces_to_symmetric() {
        let d = JacobianForm::from_matrix(DMatrix::from_diagonal(&DVector::from_vec(vec![
            1.0, 2.0,
        ])))
        .unwrap();
        let kg = koshelev_kgamma(&d).unwrap();
        assert!((kg.k_gamma - 1.0 / 3.0).abs() < 1e-14);
        assert!((kg.gamma - 2.0 / 3.0).abs() < 1e-14);
        assert!(!kg.skew_dominated);
    }

    #[test]
    fn koshelev_rejects_indefinite_symmetric_part() {
        let a = JacobianForm::from_matrix(DMatrix::from_row_slice(
            3,
            3,
            &[1., 1., 2., 0., 2., 3., 0., 0., 1.],
        ))
        .unwrap();
        assert!(matches!(koshelev_kgamma(&a), Err(Error::NotSpd)));
    }

    #[test]
    fn koshelev_bound_on_random_pd_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..200 {
            let n = rng.gen_range(2..=6);
            let raw = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0f64));
            let spd = &raw * raw.transpose() + DMatrix::identity(n, n) * 0.4;
            let skew_raw = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-0.6..0.6f64));
            let skew = (&skew_raw - skew_raw.transpose()) * 0.5;
            let a_m = spd + skew;
            let a = JacobianForm::from_matrix(a_m.clone()).unwrap();
            let kg = koshelev_kgamma(&a).unwrap();
            let shifted = DMatrix::identity(n, n) - a_m * kg.gamma;
            let norm = operator_norm(&JacobianForm::from_matrix(shifted).unwrap());
            assert!(norm <= kg.k_gamma + 1e-10, "{norm} vs {}", kg.k_gamma);
        }
    }

    #[test]
    fn contraction_rate_examples() {
        let (r, adm) = contraction_rate(2.0, 1.0, 1.0, 1.0 / 3.0);
        assert!((r - 1.0 / 3.0).abs() < 1e-15 && adm);
        let (r, _) = contraction_rate(2.0, 1.0, 1.0, 0.0);
        assert_eq!(r, 0.0);
        // p=3 closed form
        let k = 0.01;
        let expect = (k * ((3.0 + 5.0f64.sqrt()) / 2.0).powf(1.0 / 6.0) * 6.0 * 2.0).sqrt();
        let (r, adm) = contraction_rate(3.0, 1.0, 1.0, k);
        assert!((r - expect).abs() < 1e-14);
        assert!(adm);
    }

    #[test]
    fn contraction_rate_flips_at_unit_rate() {
        // bisection for the K where R = 1, then check the flag on both sides
        for p in [1.5, 2.0, 3.0, 6.0] {
            let (mut lo, mut hi) = (0.0f64, 10.0f64);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let (r, _) = contraction_rate(p, 1.0, 1.0, mid);
                if r < 1.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let k_star = 0.5 * (lo + hi);
            let (_, adm_below) = contraction_rate(p, 1.0, 1.0, k_star * (1.0 - 1e-9));
            let (_, adm_above) = contraction_rate(p, 1.0, 1.0, k_star * (1.0 + 1e-9));
            assert!(adm_below && !adm_above, "p={p} k*={k_star}");
        }
    }

    #[test]
    fn contraction_rate_monotone() {
        let mut prev = 0.0;
        for i in 1..40 {
            let k = i as f64 * 0.01;
            let (r, _) = contraction_rate(3.0, 1.0, 2.0, k);
            assert!(r > prev);
            prev = r;
        }
        let (r1, _) = contraction_rate(3.0, 1.0, 2.0, 0.05);
        let (r2, _) = contraction_rate(3.0, 1.0, 4.0, 0.05);
        assert!(r2 > r1);
    }

    #[test]
    fn kab_same_field_is_zero() {
        let b = p_laplace_field(3.0, 1.0).unwrap();
        let spec = SampleSpec::new(3, 2, 2, 300).with_mu(1.0);
        let rep = kab_for_fields(&b, &b, &spec).unwrap();
        assert!(rep.k_ab.abs() < 1e-12);
        assert!(rep.rate < 1e-9);
        assert!(rep.admissible);
    }

    #[test]
    fn kab_linear_diag_pair() {
        let a = linear_field(DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0]))).unwrap();
        let b = identity_field(2);
        let spec = SampleSpec::new(3, 2, 2, 10);
        let rep = kab_for_fields(&a, &b, &spec).unwrap();
        assert!((rep.k_ab - 1.0 / 3.0).abs() < 1e-12);
        assert!((rep.gamma - 2.0 / 3.0).abs() < 1e-12);
        assert!((rep.rate - 1.0 / 3.0).abs() < 1e-12);
        assert!(rep.admissible && rep.certified());
    }

    #[test]
    fn kab_proportional_fields() {
        let eps = 0.25;
        let a = linear_field(DMatrix::identity(3, 3) * (1.0 + eps)).unwrap();
        let b = identity_field(3);
        let spec = SampleSpec::new(1, 3, 3, 10);
        let rep = kab_for_fields(&a, &b, &spec).unwrap();
        assert!(rep.k_ab.abs() < 1e-12);
        assert!((rep.gamma - 1.0 / (1.0 + eps)).abs() < 1e-12);
    }

    #[test]
    fn kab_grows_with_perturbation_size() {
        // a = b + eps * bump with recorded eps: the dispersion scales with eps
        use crate::fields::{FieldMeta, PerturbedField};
        use std::sync::Arc;
        let base = Arc::new(p_laplace_field(3.0, 1.0).unwrap());
        let spec = SampleSpec::new(5, 2, 2, 400).with_mu(1.0);
        let mut prev = 0.0;
        for eps in [0.01, 0.05, 0.1] {
            let bump = Arc::new(identity_field(2));
            let meta = FieldMeta {
                lambda_min: base.meta().lambda_min,
                lambda_max: base.meta().lambda_max + eps,
                ..base.meta().clone()
            };
            let a = PerturbedField::new(base.clone(), eps, bump, meta);
            assert_eq!(a.eps, eps);
            let rep = kab_for_fields(&a, base.as_ref(), &spec).unwrap();
            assert!(rep.k_ab > prev, "eps {eps}: K {} vs {prev}", rep.k_ab);
            prev = rep.k_ab;
        }
        // small perturbations stay admissible at p = 3
        assert!(prev < 0.05);
    }

    #[test]
    fn kab_nonsymmetric_experiment_matrix_reports_inadmissible() {
        let a = linear_field(DMatrix::from_row_slice(
            3,
            3,
            &[1., 1., 2., 0., 2., 3., 0., 0., 1.],
        ))
        .unwrap();
        let b = identity_field(3);
        let spec = SampleSpec::new(11, 3, 3, 10);
        let rep = kab_for_fields(&a, &b, &spec).unwrap();
        // eigenvalues of the pencil are {1, 2}: K_ab = 1/3
        assert!((rep.k_ab - 1.0 / 3.0).abs() < 1e-9);
        // no operator-norm contraction exists for this matrix; the reported
        // gamma falls back to the spectral midpoint 2/(1+2)
        assert!(rep.k_gamma >= 1.0 - 1e-6);
        assert!((rep.gamma - 2.0 / 3.0).abs() < 1e-12);
        assert!(!rep.admissible);
        assert!(rep.sigma.is_some());
        assert_eq!(rep.gamma_path, GammaPath::NonsymmetricNumeric);
    }
}
