//! Structure fields a(x, z): the coefficient maps defining quasilinear
//! operators div a(x, Du), together with their z-Jacobians and growth
//! metadata, plus the built-in fields used by the experiments.
//!
//! Matrix-valued fields act on the component index of z: for an N×N matrix A,
//! `(A z)_{αi} = Σ_β A_{αβ} z_{βi}`.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::sampling::SampleSpec;
use crate::tensor::{GradMatrix, JacobianForm};

/// Growth and ellipticity metadata of a structure field.
///
/// `lambda_min`/`lambda_max` are the two-sided ellipticity constants of the
/// z-Jacobian relative to the envelope `(μ² + |z|²)^((p−2)/2)`; `lambda_min`
/// may be nonpositive for fields that are not uniformly elliptic.
#[derive(Clone, Debug)]
pub struct FieldMeta {
    pub p: f64,
    pub mu: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub growth_const: f64,
    pub symmetric_jacobian: bool,
    pub linear: bool,
    pub x_dependent: bool,
}

pub trait StructureField: Send + Sync {
    fn eval(&self, x: &[f64], z: &GradMatrix) -> GradMatrix;
    fn jacobian(&self, x: &[f64], z: &GradMatrix) -> Result<JacobianForm>;
    fn meta(&self) -> &FieldMeta;

    /// The constant component-index coefficient matrix, for linear fields.
    fn linear_matrix(&self) -> Option<&DMatrix<f64>> {
        None
    }
}

fn eig_range_sym(m: &DMatrix<f64>) -> (f64, f64) {
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in eig.eigenvalues.iter() {
        lo = lo.min(*v);
        hi = hi.max(*v);
    }
    (lo, hi)
}

fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.iter().all(|v| *v == 0.0) {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values[0]
}

// ---------------------------------------------------------------------------
// Linear field
// ---------------------------------------------------------------------------

/// z ↦ A·z with a constant N×N matrix acting on the component index.
pub struct LinearField {
    a: DMatrix<f64>,
    meta: FieldMeta,
}

impl LinearField {
    pub fn new(a: DMatrix<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() || a.nrows() == 0 {
            return Err(Error::InvalidArgument("coefficient matrix must be square".into()));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("coefficient matrix has non-finite entries".into()));
        }
        let (lo, hi) = eig_range_sym(&a);
        let symmetric = (&a - a.transpose()).abs().max() <= 1e-14 * a.abs().max().max(1.0);
        let meta = FieldMeta {
            p: 2.0,
            mu: 0.0,
            lambda_min: lo,
            lambda_max: hi,
            growth_const: spectral_norm(&a).max(1e-300),
            symmetric_jacobian: symmetric,
            linear: true,
            x_dependent: false,
        };
        Ok(Self { a, meta })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }
}

/// The reference field b(x, z) = z.
pub fn identity_field(n_comp: usize) -> LinearField {
    LinearField::new(DMatrix::identity(n_comp, n_comp)).expect("identity is valid")
}

pub fn linear_field(a: DMatrix<f64>) -> Result<LinearField> {
    LinearField::new(a)
}

impl StructureField for LinearField {
    fn eval(&self, _x: &[f64], z: &GradMatrix) -> GradMatrix {
        GradMatrix::new(&self.a * z.inner()).expect("finite")
    }

    fn jacobian(&self, _x: &[f64], z: &GradMatrix) -> Result<JacobianForm> {
        let (nc, nd) = (z.n_comp(), z.n_dir());
        let mut j = JacobianForm::zeros(nc, nd);
        for alpha in 0..nc {
            for beta in 0..nc {
                let v = self.a[(alpha, beta)];
                for d in 0..nd {
                    j.set_entry(alpha, d, beta, d, v);
                }
            }
        }
        Ok(j)
    }

    fn meta(&self) -> &FieldMeta {
        &self.meta
    }

    fn linear_matrix(&self) -> Option<&DMatrix<f64>> {
        Some(&self.a)
    }
}

// ---------------------------------------------------------------------------
// p-Laplace field
// ---------------------------------------------------------------------------

/// z ↦ (μ² + |z|²)^((p−2)/2) z.
pub struct PLaplaceField {
    p: f64,
    mu: f64,
    meta: FieldMeta,
}

pub fn p_laplace_field(p: f64, mu: f64) -> Result<PLaplaceField> {
    if p <= 1.0 {
        return Err(Error::InvalidArgument(format!("p must exceed 1, got {p}")));
    }
    if mu < 0.0 {
        return Err(Error::InvalidArgument("mu must be nonnegative".into()));
    }
    let growth = if p >= 2.0 {
        2.0f64.powf(p / 2.0) * mu.powf(p - 2.0).max(1.0)
    } else {
        1.0
    };
    let meta = FieldMeta {
        p,
        mu,
        lambda_min: 1.0f64.min(p - 1.0),
        lambda_max: 1.0f64.max(p - 1.0),
        growth_const: growth,
        symmetric_jacobian: true,
        linear: false,
        x_dependent: false,
    };
    Ok(PLaplaceField { p, mu, meta })
}

impl StructureField for PLaplaceField {
    fn eval(&self, _x: &[f64], z: &GradMatrix) -> GradMatrix {
        let s = self.mu * self.mu + z.norm().powi(2);
        if s == 0.0 {
            // continuous extension at the origin
            return GradMatrix::zeros(z.n_comp(), z.n_dir());
        }
        z.scaled(s.powf((self.p - 2.0) / 2.0))
    }

    fn jacobian(&self, _x: &[f64], z: &GradMatrix) -> Result<JacobianForm> {
        p_growth_jacobian(self.p, self.mu, z, None)
    }

    fn meta(&self) -> &FieldMeta {
        &self.meta
    }
}

/// Shared Jacobian kernel: s^((p−2)/2) M + (p−2) s^((p−4)/2) (Mz) ⊗ z with
/// s = μ² + |z|², M defaulting to the identity on the component index.
fn p_growth_jacobian(
    p: f64,
    mu: f64,
    z: &GradMatrix,
    m: Option<&DMatrix<f64>>,
) -> Result<JacobianForm> {
    let (nc, nd) = (z.n_comp(), z.n_dir());
    let s = mu * mu + z.norm().powi(2);
    if s == 0.0 {
        if p < 2.0 {
            return Err(Error::SingularJacobian);
        }
        if p == 2.0 {
            return apply_component_matrix(nc, nd, m);
        }
        return Ok(JacobianForm::zeros(nc, nd));
    }
    let mut j = apply_component_matrix(nc, nd, m)?;
    let lead = s.powf((p - 2.0) / 2.0);
    j.inner_mut().scale_mut(lead);
    let mz = match m {
        Some(mat) => GradMatrix::new(mat * z.inner()).expect("finite"),
        None => z.clone(),
    };
    let rank1 = (p - 2.0) * s.powf((p - 4.0) / 2.0);
    for a in 0..nc {
        for c in 0..nd {
            for b in 0..nc {
                for d in 0..nd {
                    // grouping keeps the matrix bitwise symmetric when Mz = z
                    let v = j.entry(a, c, b, d) + rank1 * (mz.get(a, c) * z.get(b, d));
                    j.set_entry(a, c, b, d, v);
                }
            }
        }
    }
    Ok(j)
}

fn apply_component_matrix(nc: usize, nd: usize, m: Option<&DMatrix<f64>>) -> Result<JacobianForm> {
    let mut j = JacobianForm::zeros(nc, nd);
    match m {
        None => {
            for a in 0..nc {
                for d in 0..nd {
                    j.set_entry(a, d, a, d, 1.0);
                }
            }
        }
        Some(mat) => {
            if mat.nrows() != nc {
                return Err(Error::InvalidArgument(format!(
                    "coefficient matrix is {}x{} but z has {} components",
                    mat.nrows(),
                    mat.ncols(),
                    nc
                )));
            }
            for a in 0..nc {
                for b in 0..nc {
                    for d in 0..nd {
                        j.set_entry(a, d, b, d, mat[(a, b)]);
                    }
                }
            }
        }
    }
    Ok(j)
}

// ---------------------------------------------------------------------------
// Weighted p-Laplace field
// ---------------------------------------------------------------------------

type WeightFn = dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync;

/// b(x, z) = (B(x) z · z)^((p−2)/2) B(x) z with B(x) a symmetric positive
/// definite form on flattened gradients.
pub struct WeightedPLaplaceField {
    bx: Box<WeightFn>,
    p: f64,
    meta: FieldMeta,
}

pub fn weighted_p_laplace_field(
    bx: Box<WeightFn>,
    p: f64,
    lambda_b: f64,
    lambda_b_max: f64,
) -> Result<WeightedPLaplaceField> {
    if p <= 1.0 {
        return Err(Error::InvalidArgument(format!("p must exceed 1, got {p}")));
    }
    if lambda_b <= 0.0 || lambda_b_max < lambda_b {
        return Err(Error::InvalidArgument(
            "weight bounds must satisfy 0 < lambda <= Lambda".into(),
        ));
    }
    let (lo, hi) = if p >= 2.0 {
        (lambda_b.powf(p / 2.0), (p - 1.0) * lambda_b_max.powf(p / 2.0))
    } else {
        ((p - 1.0) * lambda_b.powf(p / 2.0), lambda_b_max.powf(p / 2.0))
    };
    let meta = FieldMeta {
        p,
        mu: 0.0,
        lambda_min: lo,
        lambda_max: hi,
        growth_const: lambda_b_max.powf(p / 2.0).max(1.0),
        symmetric_jacobian: true,
        linear: false,
        x_dependent: true,
    };
    Ok(WeightedPLaplaceField { bx, p, meta })
}

impl StructureField for WeightedPLaplaceField {
    fn eval(&self, x: &[f64], z: &GradMatrix) -> GradMatrix {
        let b = (self.bx)(x);
        let w = z.flatten();
        let bw = &b * &w;
        let quad = bw.dot(&w);
        if quad <= 0.0 {
            return GradMatrix::zeros(z.n_comp(), z.n_dir());
        }
        let s = quad.powf((self.p - 2.0) / 2.0);
        GradMatrix::from_flat(z.n_comp(), z.n_dir(), &(bw * s))
    }

    fn jacobian(&self, x: &[f64], z: &GradMatrix) -> Result<JacobianForm> {
        let b = (self.bx)(x);
        if b.clone().cholesky().is_none() {
            return Err(Error::NotSpd);
        }
        let w = z.flatten();
        let bw = &b * &w;
        let quad = bw.dot(&w);
        if quad <= 0.0 {
            if self.p < 2.0 {
                return Err(Error::SingularJacobian);
            }
            if self.p == 2.0 {
                return JacobianForm::new(b, z.n_comp(), z.n_dir());
            }
            return Ok(JacobianForm::zeros(z.n_comp(), z.n_dir()));
        }
        let s = quad.powf((self.p - 2.0) / 2.0);
        let rank1 = (self.p - 2.0) * quad.powf((self.p - 4.0) / 2.0);
        let m = b * s + &bw * bw.transpose() * rank1;
        JacobianForm::new(m, z.n_comp(), z.n_dir())
    }

    fn meta(&self) -> &FieldMeta {
        &self.meta
    }
}

// ---------------------------------------------------------------------------
// Quartic field
// ---------------------------------------------------------------------------

/// z ↦ (1 + |z|⁴) A·z; p = 6 growth with a μ = 1 envelope.
pub struct QuarticField {
    a: DMatrix<f64>,
    meta: FieldMeta,
}

pub fn quartic_field(a: DMatrix<f64>) -> Result<QuarticField> {
    if a.nrows() != a.ncols() || a.nrows() == 0 {
        return Err(Error::InvalidArgument("coefficient matrix must be square".into()));
    }
    let n = a.nrows();
    let is_scalar = {
        let c = a[(0, 0)];
        (&a - DMatrix::identity(n, n) * c).abs().max() <= 1e-14 * c.abs().max(1.0)
    };
    let (lo, hi) = if is_scalar {
        // exact envelope constants for A = cI: J eigenvalues are
        // c(1+|z|⁴) and c(1+5|z|⁴) against the envelope (1+|z|²)²
        let c = a[(0, 0)];
        (0.5 * c, 5.0 * c)
    } else {
        estimate_quartic_bounds(&a)
    };
    let meta = FieldMeta {
        p: 6.0,
        mu: 1.0,
        lambda_min: lo,
        lambda_max: hi,
        growth_const: 2.0 * spectral_norm(&a).max(1e-300),
        symmetric_jacobian: is_scalar,
        linear: false,
        x_dependent: false,
    };
    Ok(QuarticField { a, meta })
}

/// Sampled envelope bounds for non-scalar coefficient matrices.
fn estimate_quartic_bounds(a: &DMatrix<f64>) -> (f64, f64) {
    use rand::prelude::*;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x9a_7f);
    let n = a.nrows();
    let field = QuarticField {
        a: a.clone(),
        meta: FieldMeta {
            p: 6.0,
            mu: 1.0,
            lambda_min: 0.0,
            lambda_max: 0.0,
            growth_const: 1.0,
            symmetric_jacobian: false,
            linear: false,
            x_dependent: false,
        },
    };
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for k in 0..2000 {
        let mut z = GradMatrix::zeros(n, 3);
        for c in 0..n {
            for d in 0..3 {
                z.set(c, d, rng.gen_range(-1.0..1.0));
            }
        }
        let mag = 10f64.powf(-3.0 + 6.0 * (k % 40) as f64 / 39.0);
        let nz = z.norm();
        if nz > 0.0 {
            z.scale_mut(mag / nz);
        }
        let j = field.jacobian(&[0.0; 3], &z).expect("regular");
        let sym = j.symmetric_part();
        let eig = sym.inner().clone().symmetric_eigen();
        let env = (1.0 + z.norm().powi(2)).powi(2);
        for v in eig.eigenvalues.iter() {
            lo = lo.min(v / env);
            hi = hi.max(v / env);
        }
    }
    (lo, hi)
}

impl QuarticField {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }
}

impl StructureField for QuarticField {
    fn eval(&self, _x: &[f64], z: &GradMatrix) -> GradMatrix {
        let f = 1.0 + z.norm().powi(4);
        GradMatrix::new((&self.a * z.inner()) * f).expect("finite")
    }

    fn jacobian(&self, _x: &[f64], z: &GradMatrix) -> Result<JacobianForm> {
        let (nc, nd) = (z.n_comp(), z.n_dir());
        let f = 1.0 + z.norm().powi(4);
        let mut j = apply_component_matrix(nc, nd, Some(&self.a))?;
        j.inner_mut().scale_mut(f);
        let az = GradMatrix::new(&self.a * z.inner()).expect("finite");
        let rank1 = 4.0 * z.norm().powi(2);
        for a in 0..nc {
            for c in 0..nd {
                for b in 0..nc {
                    for d in 0..nd {
                        let v = j.entry(a, c, b, d) + rank1 * az.get(a, c) * z.get(b, d);
                        j.set_entry(a, c, b, d, v);
                    }
                }
            }
        }
        Ok(j)
    }

    fn meta(&self) -> &FieldMeta {
        &self.meta
    }
}

// ---------------------------------------------------------------------------
// Perturbation combinator
// ---------------------------------------------------------------------------

/// a = base + ε·bump, for admissibility studies.
pub struct PerturbedField {
    base: Arc<dyn StructureField>,
    bump: Arc<dyn StructureField>,
    pub eps: f64,
    meta: FieldMeta,
}

impl PerturbedField {
    pub fn new(
        base: Arc<dyn StructureField>,
        eps: f64,
        bump: Arc<dyn StructureField>,
        meta: FieldMeta,
    ) -> Self {
        Self {
            base,
            bump,
            eps,
            meta,
        }
    }
}

impl StructureField for PerturbedField {
    fn eval(&self, x: &[f64], z: &GradMatrix) -> GradMatrix {
        let mut out = self.base.eval(x, z);
        out.add_scaled(self.eps, &self.bump.eval(x, z));
        out
    }

    fn jacobian(&self, x: &[f64], z: &GradMatrix) -> Result<JacobianForm> {
        let mut j = self.base.jacobian(x, z)?;
        let jb = self.bump.jacobian(x, z)?;
        let acc = j.inner().clone() + jb.inner() * self.eps;
        *j.inner_mut() = acc;
        Ok(j)
    }

    fn meta(&self) -> &FieldMeta {
        &self.meta
    }
}

// ---------------------------------------------------------------------------
// Field audit
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct CheckFailure {
    pub which: &'static str,
    pub x: Vec<f64>,
    pub z_norm: f64,
    pub detail: f64,
}

#[derive(Clone, Debug)]
pub struct CheckReport {
    pub samples: usize,
    pub ellipticity_ok: bool,
    pub growth_ok: bool,
    pub jacobian_fd_ok: bool,
    /// Worst (most negative) normalized margin of the two-sided ellipticity bound.
    pub worst_ellipticity: f64,
    /// Worst normalized margin of the growth bound.
    pub worst_growth: f64,
    /// Worst relative finite-difference mismatch of the Jacobian.
    pub worst_fd: f64,
    pub failure: Option<CheckFailure>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.ellipticity_ok && self.growth_ok && self.jacobian_fd_ok
    }
}

/// Numeric audit of the ellipticity envelope, the growth bound, and the
/// Jacobian against centered finite differences of eval.
pub fn field_check(field: &dyn StructureField, spec: &SampleSpec) -> CheckReport {
    let meta = field.meta().clone();
    let mut report = CheckReport {
        samples: 0,
        ellipticity_ok: true,
        growth_ok: true,
        jacobian_fd_ok: true,
        worst_ellipticity: f64::INFINITY,
        worst_growth: f64::INFINITY,
        worst_fd: 0.0,
        failure: None,
    };
    // a valid two-sided ellipticity assumption needs a positive lower bound
    if meta.lambda_min <= 0.0 {
        report.ellipticity_ok = false;
        report.worst_ellipticity = meta.lambda_min;
        report.failure = Some(CheckFailure {
            which: "ellipticity (declared lower bound not positive)",
            x: vec![],
            z_norm: 0.0,
            detail: meta.lambda_min,
        });
    }
    let fd_every = (spec.samples / 200).max(1);

    for (k, (x, z)) in spec.iter().enumerate() {
        report.samples += 1;
        let znorm = z.norm();
        let env = (meta.mu * meta.mu + znorm * znorm).powf((meta.p - 2.0) / 2.0);

        // (A2): eigenvalues of the symmetrized Jacobian against the envelope
        if let Ok(j) = field.jacobian(&x, &z) {
            let eig = j.symmetric_part().inner().clone().symmetric_eigen();
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for v in eig.eigenvalues.iter() {
                lo = lo.min(*v);
                hi = hi.max(*v);
            }
            if env > 0.0 {
                let scale = env * meta.lambda_max.abs().max(1.0);
                let margin =
                    ((lo - meta.lambda_min * env) / scale).min((meta.lambda_max * env - hi) / scale);
                if margin < report.worst_ellipticity {
                    report.worst_ellipticity = margin;
                }
                if margin < -1e-9 {
                    report.ellipticity_ok = false;
                    report.failure.get_or_insert(CheckFailure {
                        which: "ellipticity",
                        x: x.clone(),
                        z_norm: znorm,
                        detail: margin,
                    });
                }
            }

            // finite differences on a subsample
            if k % fd_every == 0 && znorm > 1e-6 {
                let fd = jacobian_fd_mismatch(field, &x, &z, &j);
                if fd > report.worst_fd {
                    report.worst_fd = fd;
                }
                if fd > 1e-5 {
                    report.jacobian_fd_ok = false;
                    report.failure.get_or_insert(CheckFailure {
                        which: "jacobian-fd",
                        x: x.clone(),
                        z_norm: znorm,
                        detail: fd,
                    });
                }
            }
        }

        // (A3): |a(x,z)| <= c (1 + |z|^{p-1})
        let bound = meta.growth_const * (1.0 + znorm.powf(meta.p - 1.0));
        let val = field.eval(&x, &z).norm();
        let margin = (bound - val) / bound.max(1.0);
        if margin < report.worst_growth {
            report.worst_growth = margin;
        }
        if margin < -1e-9 {
            report.growth_ok = false;
            report.failure.get_or_insert(CheckFailure {
                which: "growth",
                x: x.clone(),
                z_norm: znorm,
                detail: margin,
            });
        }
    }
    report
}

fn jacobian_fd_mismatch(
    field: &dyn StructureField,
    x: &[f64],
    z: &GradMatrix,
    j: &JacobianForm,
) -> f64 {
    let (nc, nd) = (z.n_comp(), z.n_dir());
    let h = 1e-6 * z.norm().max(1e-3);
    let mut worst: f64 = 0.0;
    let jnorm = j.inner().abs().max().max(1e-12);
    for b in 0..nc {
        for d in 0..nd {
            let mut zp = z.clone();
            zp.set(b, d, z.get(b, d) + h);
            let mut zm = z.clone();
            zm.set(b, d, z.get(b, d) - h);
            let fp = field.eval(x, &zp);
            let fm = field.eval(x, &zm);
            for a in 0..nc {
                for c in 0..nd {
                    let fd = (fp.get(a, c) - fm.get(a, c)) / (2.0 * h);
                    worst = worst.max((fd - j.entry(a, c, b, d)).abs() / jnorm);
                }
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_identity_is_reference_field() {
        let f = identity_field(3);
        let z = GradMatrix::from_row_slice(3, 3, &[1., 2., 3., 4., 5., 6., 7., 8., 9.]);
        assert_eq!(f.eval(&[0.0; 3], &z), z);
        let m = f.meta();
        assert_eq!((m.lambda_min, m.lambda_max), (1.0, 1.0));
        assert!(m.symmetric_jacobian && m.linear);
    }

    #[test]
    fn linear_field_jacobian_is_constant_block_matrix() {
        let a = DMatrix::from_row_slice(3, 3, &[1., 1., 2., 0., 2., 3., 0., 0., 1.]);
        let f = linear_field(a.clone()).unwrap();
        let z1 = GradMatrix::zeros(3, 3);
        let z2 = GradMatrix::from_row_slice(3, 3, &[1., 0., 0., 0., 2., 0., 0., 0., 3.]);
        let j1 = f.jacobian(&[0.1, 0.2, 0.3], &z1).unwrap();
        let j2 = f.jacobian(&[0.9, 0.9, 0.9], &z2).unwrap();
        assert_eq!(j1.inner(), j2.inner());
        for alpha in 0..3 {
            for beta in 0..3 {
                for d in 0..3 {
                    assert_eq!(j1.entry(alpha, d, beta, d), a[(alpha, beta)]);
                }
            }
        }
    }

    #[test]
    fn p_laplace_p2_is_identity() {
        let f = p_laplace_field(2.0, 0.7).unwrap();
        let z = GradMatrix::from_row_slice(2, 2, &[1., -2., 0.5, 4.]);
        assert_eq!(f.eval(&[0.0; 2], &z), z);
    }

    #[test]
    fn p_laplace_p4_scaling() {
        let f = p_laplace_field(4.0, 0.0).unwrap();
        let z = GradMatrix::from_row_slice(1, 2, &[2.0, 0.0]);
        let out = f.eval(&[0.0; 2], &z);
        assert!((out.get(0, 0) - 8.0).abs() < 1e-12); // (|z|²)^1 · z = 4z
    }

    #[test]
    fn p_laplace_jacobian_eigenstructure() {
        // at μ=0 the eigenvalues are s^{(p-2)/2}·{1 (mult Nn-1), p-1}
        let p = 3.0;
        let f = p_laplace_field(p, 0.0).unwrap();
        let z = GradMatrix::from_row_slice(2, 2, &[1., 2., -1., 0.5]);
        let j = f.jacobian(&[0.0; 2], &z).unwrap();
        let eig = j.symmetric_part().inner().clone().symmetric_eigen();
        let s = z.norm().powi(2);
        let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let lead = s.powf((p - 2.0) / 2.0);
        for v in &vals[..3] {
            assert!((v - lead).abs() < 1e-10 * lead);
        }
        assert!((vals[3] - (p - 1.0) * lead).abs() < 1e-10 * lead);
    }

    #[test]
    fn p_laplace_singular_jacobian_flagged() {
        let f = p_laplace_field(1.5, 0.0).unwrap();
        let z = GradMatrix::zeros(2, 2);
        assert_eq!(f.eval(&[0.0; 2], &z).norm(), 0.0);
        assert!(matches!(f.jacobian(&[0.0; 2], &z), Err(Error::SingularJacobian)));
    }

    #[test]
    fn p_laplace_jacobian_symmetric_exactly() {
        let f = p_laplace_field(3.7, 0.2).unwrap();
        let z = GradMatrix::from_row_slice(3, 3, &[1., 2., 3., -4., 5., -6., 7., 8., 9.]);
        let j = f.jacobian(&[0.0; 3], &z).unwrap();
        assert_eq!(j.max_asymmetry(), 0.0);
    }

    #[test]
    fn weighted_identity_reduces_to_p_laplace() {
        let n = 2;
        let nd = 2;
        let bx: Box<WeightFn> = Box::new(move |_x| DMatrix::identity(n * nd, n * nd));
        let w = weighted_p_laplace_field(bx, 3.0, 1.0, 1.0).unwrap();
        let p = p_laplace_field(3.0, 0.0).unwrap();
        let z = GradMatrix::from_row_slice(2, 2, &[1., -1., 2., 0.5]);
        let a = w.eval(&[0.3, 0.4], &z);
        let b = p.eval(&[0.3, 0.4], &z);
        assert!(a.sub(&b).norm() < 1e-13 * b.norm());
    }

    #[test]
    fn weighted_scaled_identity_p2() {
        let bx: Box<WeightFn> = Box::new(move |_x| DMatrix::identity(4, 4) * 2.0);
        let w = weighted_p_laplace_field(bx, 2.0, 2.0, 2.0).unwrap();
        let z = GradMatrix::from_row_slice(2, 2, &[1., 2., 3., 4.]);
        let out = w.eval(&[0.0; 2], &z);
        assert!(out.sub(&z.scaled(2.0)).norm() < 1e-13);
    }

    #[test]
    fn weighted_jacobian_matches_fd() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let bx: Box<WeightFn> = Box::new(move |x| {
            let base = DMatrix::identity(4, 4) * (2.0 + x[0]);
            let mut m = base;
            m[(0, 1)] += 0.3;
            m[(1, 0)] += 0.3;
            m
        });
        let w = weighted_p_laplace_field(bx, 2.6, 1.0, 3.0).unwrap();
        for _ in 0..20 {
            let x = vec![rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
            let mut z = GradMatrix::zeros(2, 2);
            for c in 0..2 {
                for d in 0..2 {
                    z.set(c, d, rng.gen_range(0.2..1.5));
                }
            }
            let j = w.jacobian(&x, &z).unwrap();
            let fd = jacobian_fd_mismatch(&w, &x, &z, &j);
            assert!(fd < 1e-5, "fd mismatch {fd}");
        }
    }

    #[test]
    fn quartic_examples() {
        let f = quartic_field(DMatrix::identity(3, 3)).unwrap();
        let z0 = GradMatrix::zeros(3, 3);
        assert_eq!(f.eval(&[0.0; 3], &z0).norm(), 0.0);
        let mut z1 = GradMatrix::zeros(3, 3);
        z1.set(0, 0, 1.0);
        let out = f.eval(&[0.0; 3], &z1);
        assert!((out.get(0, 0) - 2.0).abs() < 1e-14); // (1+1)·z
        assert_eq!((f.meta().p, f.meta().mu), (6.0, 1.0));
        assert!((f.meta().lambda_min - 0.5).abs() < 1e-14);
        assert!((f.meta().lambda_max - 5.0).abs() < 1e-14);
    }

    #[test]
    fn quartic_matches_scaled_linear() {
        let a = DMatrix::from_row_slice(3, 3, &[1., 3., 5., 0., 2., 4., 0., 0., 1.]);
        let q = quartic_field(a.clone()).unwrap();
        let l = linear_field(a).unwrap();
        let z = GradMatrix::from_row_slice(3, 3, &[1., 2., 0., -1., 0.5, 2., 0., 1., -2.]);
        let scaled = l.eval(&[0.0; 3], &z).scaled(1.0 + z.norm().powi(4));
        assert!(q.eval(&[0.0; 3], &z).sub(&scaled).norm() < 1e-12 * scaled.norm());
    }

    #[test]
    fn builtin_fields_pass_field_check() {
        let spec = SampleSpec::new(123, 2, 2, 2000);
        let plap = p_laplace_field(3.0, 0.0).unwrap();
        let rep = field_check(&plap, &spec.clone().with_mu(1e-4));
        assert!(rep.passed(), "{rep:?}");

        let lin = identity_field(2);
        let rep = field_check(&lin, &spec);
        assert!(rep.passed(), "{rep:?}");

        let quartic = quartic_field(DMatrix::identity(3, 3)).unwrap();
        let spec3 = SampleSpec::new(5, 3, 3, 2000).with_mu(1.0);
        let rep = field_check(&quartic, &spec3);
        assert!(rep.passed(), "{rep:?}");
    }

    #[test]
    fn corrupted_field_fails_with_location() {
        struct Corrupted(PLaplaceField);
        impl StructureField for Corrupted {
            fn eval(&self, x: &[f64], z: &GradMatrix) -> GradMatrix {
                self.0.eval(x, z)
            }
            fn jacobian(&self, x: &[f64], z: &GradMatrix) -> Result<JacobianForm> {
                let mut j = self.0.jacobian(x, z)?;
                j.inner_mut().scale_mut(1.05);
                Ok(j)
            }
            fn meta(&self) -> &FieldMeta {
                self.0.meta()
            }
        }
        let f = Corrupted(p_laplace_field(3.0, 1.0).unwrap());
        let rep = field_check(&f, &SampleSpec::new(9, 2, 2, 500));
        assert!(!rep.passed());
        assert!(rep.failure.is_some());
    }
}
