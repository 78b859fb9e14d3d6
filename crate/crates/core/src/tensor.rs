//! Dense small-matrix algebra on gradient-shaped matrices and the
//! flattened Jacobian forms acting on them.
//!
//! A [`GradMatrix`] has shape N×n with rows indexing solution components and
//! columns indexing space directions; it carries z, ξ, η and Du. A
//! [`JacobianForm`] acts on flattened gradient matrices and has shape
//! (N·n)×(N·n). The flattening convention everywhere in this crate is
//! `index = component * n_dir + direction`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// N×n real matrix; the shape of gradients and field values.
#[derive(Clone, Debug, PartialEq)]
pub struct GradMatrix {
    m: DMatrix<f64>,
}

impl GradMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() == 0 || m.ncols() == 0 {
            return Err(Error::InvalidArgument("empty gradient matrix".into()));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "gradient matrix has non-finite entries".into(),
            ));
        }
        Ok(Self { m })
    }

    pub fn zeros(n_comp: usize, n_dir: usize) -> Self {
        Self {
            m: DMatrix::zeros(n_comp, n_dir),
        }
    }

    /// Row-major construction: `data[comp * n_dir + dir]`.
    pub fn from_row_slice(n_comp: usize, n_dir: usize, data: &[f64]) -> Self {
        Self {
            m: DMatrix::from_row_slice(n_comp, n_dir, data),
        }
    }

    pub fn n_comp(&self) -> usize {
        self.m.nrows()
    }

    pub fn n_dir(&self) -> usize {
        self.m.ncols()
    }

    /// Frobenius norm; the Euclidean norm |z| on R^{N×n}.
    pub fn norm(&self) -> f64 {
        self.m.norm()
    }

    pub fn dot(&self, other: &GradMatrix) -> f64 {
        self.m.dot(&other.m)
    }

    pub fn get(&self, comp: usize, dir: usize) -> f64 {
        self.m[(comp, dir)]
    }

    pub fn set(&mut self, comp: usize, dir: usize, v: f64) {
        self.m[(comp, dir)] = v;
    }

    pub fn fill(&mut self, v: f64) {
        self.m.fill(v);
    }

    pub fn scale_mut(&mut self, s: f64) {
        self.m *= s;
    }

    pub fn scaled(&self, s: f64) -> GradMatrix {
        Self { m: &self.m * s }
    }

    pub fn add_scaled(&mut self, s: f64, other: &GradMatrix) {
        self.m.zip_apply(&other.m, |a, b| *a += s * b);
    }

    pub fn sub(&self, other: &GradMatrix) -> GradMatrix {
        Self {
            m: &self.m - &other.m,
        }
    }

    /// Flattened copy with `index = comp * n_dir + dir`.
    pub fn flatten(&self) -> DVector<f64> {
        let (nc, nd) = (self.n_comp(), self.n_dir());
        DVector::from_fn(nc * nd, |i, _| self.m[(i / nd, i % nd)])
    }

    pub fn from_flat(n_comp: usize, n_dir: usize, v: &DVector<f64>) -> Self {
        Self {
            m: DMatrix::from_fn(n_comp, n_dir, |r, c| v[r * n_dir + c]),
        }
    }

    pub fn inner(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn inner_mut(&mut self) -> &mut DMatrix<f64> {
        &mut self.m
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.m
    }
}

/// Square form on flattened gradient matrices, shape (N·n)×(N·n).
#[derive(Clone, Debug, PartialEq)]
pub struct JacobianForm {
    m: DMatrix<f64>,
    n_comp: usize,
    n_dir: usize,
}

impl JacobianForm {
    pub fn new(m: DMatrix<f64>, n_comp: usize, n_dir: usize) -> Result<Self> {
        if m.nrows() != n_comp * n_dir || m.ncols() != n_comp * n_dir {
            return Err(Error::InvalidArgument(format!(
                "jacobian form must be {s}x{s}, got {r}x{c}",
                s = n_comp * n_dir,
                r = m.nrows(),
                c = m.ncols()
            )));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "jacobian form has non-finite entries".into(),
            ));
        }
        Ok(Self { m, n_comp, n_dir })
    }

    /// Square matrix without gradient-shape bookkeeping (n_comp = size, n_dir = 1).
    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        let n = m.nrows();
        Self::new(m, n, 1)
    }

    pub fn identity(n_comp: usize, n_dir: usize) -> Self {
        let s = n_comp * n_dir;
        Self {
            m: DMatrix::identity(s, s),
            n_comp,
            n_dir,
        }
    }

    pub fn zeros(n_comp: usize, n_dir: usize) -> Self {
        let s = n_comp * n_dir;
        Self {
            m: DMatrix::zeros(s, s),
            n_comp,
            n_dir,
        }
    }

    pub fn size(&self) -> usize {
        self.m.nrows()
    }

    pub fn n_comp(&self) -> usize {
        self.n_comp
    }

    pub fn n_dir(&self) -> usize {
        self.n_dir
    }

    /// Entry in gradient-shaped indexing.
    pub fn entry(&self, comp_i: usize, dir_i: usize, comp_j: usize, dir_j: usize) -> f64 {
        self.m[(comp_i * self.n_dir + dir_i, comp_j * self.n_dir + dir_j)]
    }

    pub fn set_entry(&mut self, comp_i: usize, dir_i: usize, comp_j: usize, dir_j: usize, v: f64) {
        self.m[(comp_i * self.n_dir + dir_i, comp_j * self.n_dir + dir_j)] = v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[(i, j)]
    }

    /// Apply to a gradient matrix: `(J z)` in the flattened sense.
    pub fn apply(&self, z: &GradMatrix) -> GradMatrix {
        let flat = self.m.clone() * z.flatten();
        GradMatrix::from_flat(self.n_comp, self.n_dir, &flat)
    }

    /// Maximum entry-wise asymmetry |M - Mᵀ| relative to the largest entry.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.m.nrows() {
            for j in (i + 1)..self.m.ncols() {
                worst = worst.max((self.m[(i, j)] - self.m[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn is_symmetric(&self) -> bool {
        let scale = self.m.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
        self.max_asymmetry() <= 1e-12 * scale
    }

    pub fn symmetric_part(&self) -> JacobianForm {
        Self {
            m: (&self.m + self.m.transpose()) * 0.5,
            n_comp: self.n_comp,
            n_dir: self.n_dir,
        }
    }

    pub fn skew_part(&self) -> JacobianForm {
        Self {
            m: (&self.m - self.m.transpose()) * 0.5,
            n_comp: self.n_comp,
            n_dir: self.n_dir,
        }
    }

    pub fn transpose(&self) -> JacobianForm {
        Self {
            m: self.m.transpose(),
            n_comp: self.n_comp,
            n_dir: self.n_dir,
        }
    }

    pub fn inner(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn inner_mut(&mut self) -> &mut DMatrix<f64> {
        &mut self.m
    }
}

/// V-functional `V_{μ,p}(v) = (μ² + |v|²)^((p-2)/4) v`.
///
/// Continuously extended by zero at v = 0 when μ = 0 and p < 2.
pub fn v_mu(p: f64, mu: f64, v: &GradMatrix) -> GradMatrix {
    debug_assert!(p > 1.0 && mu >= 0.0);
    let s = mu * mu + v.norm().powi(2);
    if s == 0.0 {
        return GradMatrix::zeros(v.n_comp(), v.n_dir());
    }
    v.scaled(s.powf((p - 2.0) / 4.0))
}

fn require_symmetric(m: &JacobianForm) -> Result<()> {
    let scale = m.inner().iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
    let asym = m.max_asymmetry();
    if asym > 1e-12 * scale {
        return Err(Error::NotSymmetric {
            max_asym: asym,
            tol: 1e-12 * scale,
        });
    }
    Ok(())
}

/// Extreme eigenvalues of a symmetric form.
pub fn sym_eigen_bounds(m: &JacobianForm) -> Result<(f64, f64)> {
    require_symmetric(m)?;
    let sym = m.symmetric_part();
    let eig = sym.inner().clone().symmetric_eigen();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in eig.eigenvalues.iter() {
        lo = lo.min(*v);
        hi = hi.max(*v);
    }
    Ok((lo, hi))
}

/// Operator (spectral) norm: the largest singular value.
pub fn operator_norm(m: &JacobianForm) -> f64 {
    if m.inner().iter().all(|v| *v == 0.0) {
        return 0.0;
    }
    m.inner().clone().svd(false, false).singular_values[0]
}

/// Extreme eigenvalues of B⁻¹A for B symmetric positive definite and A
/// symmetric, via the Cholesky-transformed symmetric problem L⁻¹ A L⁻ᵀ.
pub fn generalized_eigen_bounds(b: &JacobianForm, a: &JacobianForm) -> Result<(f64, f64)> {
    require_symmetric(a)?;
    require_symmetric(b)?;
    let chol = b
        .symmetric_part()
        .into_spd_cholesky()
        .ok_or(Error::NotSpd)?;
    let l = chol.l();
    let x = l
        .solve_lower_triangular(a.symmetric_part().inner())
        .ok_or(Error::NotSpd)?;
    let m = l
        .solve_lower_triangular(&x.transpose())
        .ok_or(Error::NotSpd)?
        .transpose();
    let sym = (&m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in eig.eigenvalues.iter() {
        lo = lo.min(*v);
        hi = hi.max(*v);
    }
    Ok((lo, hi))
}

impl JacobianForm {
    fn into_spd_cholesky(self) -> Option<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
        self.m.cholesky()
    }

    /// Cholesky-based positive definiteness test of the symmetric part.
    pub fn symmetric_part_is_spd(&self) -> bool {
        self.symmetric_part().m.cholesky().is_some()
    }
}
