//! Vector P1 finite elements: interpolation, element gradients, residual and
//! Jacobian assembly for structure fields, and the norms the analysis uses.
//!
//! Degrees of freedom are stored node-major: `dof = node * n_comp + comp`.
//! Homogeneous Dirichlet data only; boundary rows are zeroed in functionals
//! and replaced by identity rows/columns in matrices.

use std::io::Write;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fields::StructureField;
use crate::mesh::SimplicialMesh;
use crate::quadrature::QuadratureRule;
use crate::sparse::CsrMatrix;
use crate::tensor::GradMatrix;

/// Analytic map Ω → R^k written into a caller buffer.
pub type MapRef<'a> = &'a dyn Fn(&[f64], &mut [f64]);
/// Scalar weight on Ω.
pub type WeightFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type WeightRef<'a> = &'a (dyn Fn(&[f64]) -> f64 + Send + Sync);

/// Continuous piecewise-linear vector-valued function on a mesh.
#[derive(Clone, Debug)]
pub struct P1Function {
    mesh: Arc<SimplicialMesh>,
    n_comp: usize,
    values: Vec<f64>,
}

impl P1Function {
    pub fn zeros(mesh: Arc<SimplicialMesh>, n_comp: usize) -> Self {
        let n = mesh.n_vertices() * n_comp;
        Self {
            mesh,
            n_comp,
            values: vec![0.0; n],
        }
    }

    pub fn from_values(mesh: Arc<SimplicialMesh>, n_comp: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.n_vertices() * n_comp {
            return Err(Error::InvalidArgument(format!(
                "dof vector length {} does not match {} vertices x {} components",
                values.len(),
                mesh.n_vertices(),
                n_comp
            )));
        }
        Ok(Self {
            mesh,
            n_comp,
            values,
        })
    }

    pub fn mesh(&self) -> &Arc<SimplicialMesh> {
        &self.mesh
    }

    pub fn n_comp(&self) -> usize {
        self.n_comp
    }

    pub fn n_dof(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn node_value(&self, node: usize, comp: usize) -> f64 {
        self.values[node * self.n_comp + comp]
    }

    /// Euclidean distance of dof vectors.
    pub fn dof_distance(&self, other: &P1Function) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn axpy(&mut self, alpha: f64, other: &P1Function) {
        for (v, o) in self.values.iter_mut().zip(&other.values) {
            *v += alpha * o;
        }
    }

    /// Pointwise evaluation through mesh point location.
    pub fn eval_at(&self, x: &[f64], out: &mut [f64]) {
        let (e, bary) = self.mesh.locate(x);
        let vs = self.mesh.simplex(e);
        for c in 0..self.n_comp {
            let mut acc = 0.0;
            for (k, &b) in bary.iter().enumerate() {
                acc += b * self.node_value(vs[k] as usize, c);
            }
            out[c] = acc;
        }
    }

    /// Zero the boundary dofs (homogeneous Dirichlet data).
    pub fn enforce_boundary(&mut self) {
        for node in 0..self.mesh.n_vertices() {
            if self.mesh.is_boundary(node) {
                for c in 0..self.n_comp {
                    self.values[node * self.n_comp + c] = 0.0;
                }
            }
        }
    }

    /// Plain-text export `x y [z] u1 .. uN`, 17 significant digits.
    pub fn write_table(&self, w: &mut impl Write) -> Result<()> {
        let dim = self.mesh.dim();
        write!(w, "# x y")?;
        if dim == 3 {
            write!(w, " z")?;
        }
        for c in 0..self.n_comp {
            write!(w, " u{}", c + 1)?;
        }
        writeln!(w)?;
        for node in 0..self.mesh.n_vertices() {
            let v = self.mesh.vertex(node);
            let mut parts: Vec<String> = v.iter().map(|c| format!("{c:.16e}")).collect();
            for c in 0..self.n_comp {
                parts.push(format!("{:.16e}", self.node_value(node, c)));
            }
            writeln!(w, "{}", parts.join(" "))?;
        }
        Ok(())
    }
}

/// Nodal interpolation of an analytic map.
pub fn interpolate(
    mesh: Arc<SimplicialMesh>,
    n_comp: usize,
    f: impl Fn(&[f64], &mut [f64]),
) -> P1Function {
    let mut out = P1Function::zeros(mesh.clone(), n_comp);
    let mut buf = vec![0.0; n_comp];
    for node in 0..mesh.n_vertices() {
        f(mesh.vertex(node), &mut buf);
        for c in 0..n_comp {
            out.values[node * n_comp + c] = buf[c];
        }
    }
    out
}

/// Per-element geometry: constant basis gradients and volume.
pub struct ElementGeometry {
    pub grads: [[f64; 3]; 4],
    pub volume: f64,
}

pub fn element_geometry(mesh: &SimplicialMesh, e: usize) -> ElementGeometry {
    let d = mesh.dim();
    let vs = mesh.simplex(e);
    let v0 = mesh.vertex(vs[0] as usize);
    // edge matrix columns x_k - x_0
    let mut m = [[0.0f64; 3]; 3];
    for k in 1..=d {
        let vk = mesh.vertex(vs[k] as usize);
        for r in 0..d {
            m[r][k - 1] = vk[r] - v0[r];
        }
    }
    let (inv, det) = invert_small(&m, d);
    let mut grads = [[0.0f64; 3]; 4];
    // ∇φ_k = row k of E⁻¹ (for k >= 1), ∇φ_0 = -Σ ∇φ_k
    for k in 1..=d {
        for r in 0..d {
            grads[k][r] = inv[k - 1][r];
            grads[0][r] -= inv[k - 1][r];
        }
    }
    ElementGeometry {
        grads,
        volume: det.abs() / factorial(d) as f64,
    }
}

fn factorial(n: usize) -> u64 {
    (1..=n as u64).product::<u64>().max(1)
}

fn invert_small(m: &[[f64; 3]; 3], d: usize) -> ([[f64; 3]; 3], f64) {
    let mut inv = [[0.0f64; 3]; 3];
    match d {
        2 => {
            let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
            inv[0][0] = m[1][1] / det;
            inv[0][1] = -m[0][1] / det;
            inv[1][0] = -m[1][0] / det;
            inv[1][1] = m[0][0] / det;
            (inv, det)
        }
        3 => {
            let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
            let c = |r: usize, cidx: usize| -> f64 {
                let (r1, r2) = match r {
                    0 => (1, 2),
                    1 => (0, 2),
                    _ => (0, 1),
                };
                let (c1, c2) = match cidx {
                    0 => (1, 2),
                    1 => (0, 2),
                    _ => (0, 1),
                };
                let sign = if (r + cidx) % 2 == 0 { 1.0 } else { -1.0 };
                sign * (m[r1][c1] * m[r2][c2] - m[r1][c2] * m[r2][c1])
            };
            for r in 0..3 {
                for cidx in 0..3 {
                    inv[r][cidx] = c(cidx, r) / det;
                }
            }
            (inv, det)
        }
        _ => unreachable!(),
    }
}

/// Constant gradient of each component on each simplex.
pub fn element_gradients(f: &P1Function) -> Vec<GradMatrix> {
    let mesh = f.mesh();
    (0..mesh.n_simplices())
        .map(|e| element_gradient(f, e, &element_geometry(mesh, e)))
        .collect()
}

fn element_gradient(f: &P1Function, e: usize, geom: &ElementGeometry) -> GradMatrix {
    let mesh = f.mesh();
    let d = mesh.dim();
    let vs = mesh.simplex(e);
    let mut g = GradMatrix::zeros(f.n_comp(), d);
    for (k, &vk) in vs.iter().enumerate() {
        for c in 0..f.n_comp() {
            let u = f.node_value(vk as usize, c);
            for r in 0..d {
                let cur = g.get(c, r);
                g.set(c, r, cur + u * geom.grads[k][r]);
            }
        }
    }
    g
}

fn physical_point(mesh: &SimplicialMesh, vs: &[u32], bary: &[f64], out: &mut [f64]) {
    let d = mesh.dim();
    for r in 0..d {
        out[r] = 0.0;
    }
    for (k, &b) in bary.iter().enumerate() {
        let v = mesh.vertex(vs[k] as usize);
        for r in 0..d {
            out[r] += b * v[r];
        }
    }
}

/// ∫ field(x, Dfn)·Dφ_i dx for all dofs, boundary rows zeroed.
///
/// x-independent fields are integrated with one centroid point per element
/// (exact, since Dfn is elementwise constant); x-dependent fields use the
/// supplied rule.
pub fn assemble_field_flux(
    field: &dyn StructureField,
    f: &P1Function,
    quad: &QuadratureRule,
) -> Vec<f64> {
    let mesh = f.mesh().clone();
    let d = mesh.dim();
    let nc = f.n_comp();
    let mut out = vec![0.0; f.n_dof()];
    let centroid = QuadratureRule::centroid(d);
    let rule = if field.meta().x_dependent { quad } else { &centroid };
    let mut x = vec![0.0; d];
    let scale = 1.0 / crate::quadrature::ref_volume(d);
    for e in 0..mesh.n_simplices() {
        let geom = element_geometry(&mesh, e);
        let vs = mesh.simplex(e);
        let grad = element_gradient(f, e, &geom);
        for (bary, w) in rule.iter() {
            physical_point(&mesh, vs, bary, &mut x);
            let val = field.eval(&x, &grad);
            let wphys = w * scale * geom.volume;
            for (k, &vk) in vs.iter().enumerate() {
                for c in 0..nc {
                    let mut acc = 0.0;
                    for r in 0..d {
                        acc += val.get(c, r) * geom.grads[k][r];
                    }
                    out[vk as usize * nc + c] += wphys * acc;
                }
            }
        }
    }
    zero_boundary_rows(&mesh, nc, &mut out);
    out
}

/// ∫ F(x)·Dφ_i dx for an analytic flux F: Ω → R^{N×n} (written row-major
/// into the callback buffer).
pub fn assemble_flux_functional(
    mesh: &Arc<SimplicialMesh>,
    n_comp: usize,
    flux: impl Fn(&[f64], &mut [f64]),
    quad: &QuadratureRule,
) -> Vec<f64> {
    let d = mesh.dim();
    let mut out = vec![0.0; mesh.n_vertices() * n_comp];
    let mut x = vec![0.0; d];
    let mut fbuf = vec![0.0; n_comp * d];
    let scale = 1.0 / crate::quadrature::ref_volume(d);
    for e in 0..mesh.n_simplices() {
        let geom = element_geometry(mesh, e);
        let vs = mesh.simplex(e);
        for (bary, w) in quad.iter() {
            physical_point(mesh, vs, bary, &mut x);
            flux(&x, &mut fbuf);
            let wphys = w * scale * geom.volume;
            for (k, &vk) in vs.iter().enumerate() {
                for c in 0..n_comp {
                    let mut acc = 0.0;
                    for r in 0..d {
                        acc += fbuf[c * d + r] * geom.grads[k][r];
                    }
                    out[vk as usize * n_comp + c] += wphys * acc;
                }
            }
        }
    }
    zero_boundary_rows(mesh, n_comp, &mut out);
    out
}

/// ∫ s(x)·φ_i dx for an analytic source s: Ω → R^N.
pub fn assemble_source_functional(
    mesh: &Arc<SimplicialMesh>,
    n_comp: usize,
    source: impl Fn(&[f64], &mut [f64]),
    quad: &QuadratureRule,
) -> Vec<f64> {
    let d = mesh.dim();
    let mut out = vec![0.0; mesh.n_vertices() * n_comp];
    let mut x = vec![0.0; d];
    let mut sbuf = vec![0.0; n_comp];
    let scale = 1.0 / crate::quadrature::ref_volume(d);
    for e in 0..mesh.n_simplices() {
        let geom = element_geometry(mesh, e);
        let vs = mesh.simplex(e);
        for (bary, w) in quad.iter() {
            physical_point(mesh, vs, bary, &mut x);
            source(&x, &mut sbuf);
            let wphys = w * scale * geom.volume;
            for (k, &vk) in vs.iter().enumerate() {
                let phi = bary[k];
                for c in 0..n_comp {
                    out[vk as usize * n_comp + c] += wphys * phi * sbuf[c];
                }
            }
        }
    }
    zero_boundary_rows(mesh, n_comp, &mut out);
    out
}

/// ∫ |u|^k u · φ_i dx, the lower-order term of the nonlinear experiment.
pub fn assemble_lower_order(f: &P1Function, power: f64, quad: &QuadratureRule) -> Vec<f64> {
    let mesh = f.mesh().clone();
    let d = mesh.dim();
    let nc = f.n_comp();
    let mut out = vec![0.0; f.n_dof()];
    let mut u = vec![0.0; nc];
    let scale = 1.0 / crate::quadrature::ref_volume(d);
    for e in 0..mesh.n_simplices() {
        let geom = element_geometry(&mesh, e);
        let vs = mesh.simplex(e);
        for (bary, w) in quad.iter() {
            for c in 0..nc {
                u[c] = 0.0;
            }
            for (k, &vk) in vs.iter().enumerate() {
                for c in 0..nc {
                    u[c] += bary[k] * f.node_value(vk as usize, c);
                }
            }
            let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
            let fac = if norm == 0.0 { 0.0 } else { norm.powf(power) };
            let wphys = w * scale * geom.volume;
            for (k, &vk) in vs.iter().enumerate() {
                for c in 0..nc {
                    out[vk as usize * nc + c] += wphys * bary[k] * fac * u[c];
                }
            }
        }
    }
    zero_boundary_rows(&mesh, nc, &mut out);
    out
}

/// Jacobian of the lower-order term: ∫ (|u|^k I + k|u|^(k-2) u⊗u) ψ·φ dx.
pub fn assemble_lower_order_jacobian(
    f: &P1Function,
    power: f64,
    quad: &QuadratureRule,
) -> Vec<(u32, u32, f64)> {
    let mesh = f.mesh().clone();
    let d = mesh.dim();
    let nc = f.n_comp();
    let mut triplets = Vec::new();
    let mut u = vec![0.0; nc];
    let scale = 1.0 / crate::quadrature::ref_volume(d);
    for e in 0..mesh.n_simplices() {
        let geom = element_geometry(&mesh, e);
        let vs = mesh.simplex(e);
        for (bary, w) in quad.iter() {
            for c in 0..nc {
                u[c] = 0.0;
            }
            for (k, &vk) in vs.iter().enumerate() {
                for c in 0..nc {
                    u[c] += bary[k] * f.node_value(vk as usize, c);
                }
            }
            let norm2 = u.iter().map(|v| v * v).sum::<f64>();
            let norm = norm2.sqrt();
            if norm == 0.0 {
                continue;
            }
            let iso = norm.powf(power);
            let rank1 = power * norm.powf(power - 2.0);
            let wphys = w * scale * geom.volume;
            for (ki, &vi) in vs.iter().enumerate() {
                for (kj, &vj) in vs.iter().enumerate() {
                    let mass = wphys * bary[ki] * bary[kj];
                    for a in 0..nc {
                        for b in 0..nc {
                            let kernel =
                                if a == b { iso } else { 0.0 } + rank1 * u[a] * u[b];
                            if kernel != 0.0 {
                                triplets.push((
                                    (vi as usize * nc + a) as u32,
                                    (vj as usize * nc + b) as u32,
                                    mass * kernel,
                                ));
                            }
                        }
                    }
                }
            }
        }
    }
    triplets
}

/// Full residual vector per the weak form:
/// ∫ field(x,Dfn)·Dφ − flux·Dφ − source·φ dx, boundary rows zeroed.
pub fn assemble_residual(
    field: &dyn StructureField,
    f: &P1Function,
    flux: Option<MapRef>,
    source: Option<MapRef>,
    quad: &QuadratureRule,
) -> Vec<f64> {
    let mesh = f.mesh();
    let nc = f.n_comp();
    let mut out = assemble_field_flux(field, f, quad);
    if let Some(fl) = flux {
        let g = assemble_flux_functional(mesh, nc, fl, quad);
        for (o, v) in out.iter_mut().zip(g) {
            *o -= v;
        }
    }
    if let Some(sr) = source {
        let g = assemble_source_functional(mesh, nc, sr, quad);
        for (o, v) in out.iter_mut().zip(g) {
            *o -= v;
        }
    }
    out
}

fn zero_boundary_rows(mesh: &SimplicialMesh, n_comp: usize, v: &mut [f64]) {
    for node in 0..mesh.n_vertices() {
        if mesh.is_boundary(node) {
            for c in 0..n_comp {
                v[node * n_comp + c] = 0.0;
            }
        }
    }
}

/// Stiffness matrix ∫ ∂_z field(x,Dfn)[Dφ_j]·Dφ_i dx with Dirichlet rows and
/// columns replaced by the identity.
///
/// A singular Jacobian flag at a quadrature point (p < 2, μ = 0, zero element
/// gradient) is handled by the 1e-14 perturbation policy.
pub fn assemble_jacobian(
    field: &dyn StructureField,
    f: &P1Function,
    quad: &QuadratureRule,
) -> Result<CsrMatrix> {
    let triplets = jacobian_triplets(field, f, quad, true)?;
    Ok(CsrMatrix::from_triplets(f.n_dof(), triplets))
}

/// Same as [`assemble_jacobian`] but without Dirichlet conditioning.
pub fn assemble_jacobian_unconstrained(
    field: &dyn StructureField,
    f: &P1Function,
    quad: &QuadratureRule,
) -> Result<CsrMatrix> {
    let triplets = jacobian_triplets(field, f, quad, false)?;
    Ok(CsrMatrix::from_triplets(f.n_dof(), triplets))
}

pub fn jacobian_triplets(
    field: &dyn StructureField,
    f: &P1Function,
    quad: &QuadratureRule,
    dirichlet: bool,
) -> Result<Vec<(u32, u32, f64)>> {
    let mesh = f.mesh().clone();
    let d = mesh.dim();
    let nc = f.n_comp();
    let centroid = QuadratureRule::centroid(d);
    let rule = if field.meta().x_dependent { quad } else { &centroid };
    let mut x = vec![0.0; d];
    let scale = 1.0 / crate::quadrature::ref_volume(d);
    let mut triplets: Vec<(u32, u32, f64)> =
        Vec::with_capacity(mesh.n_simplices() * (nc * (d + 1)).pow(2));

    let is_free = |node: usize| -> bool { !dirichlet || !mesh.is_boundary(node) };

    for e in 0..mesh.n_simplices() {
        let geom = element_geometry(&mesh, e);
        let vs = mesh.simplex(e);
        let mut grad = element_gradient(f, e, &geom);
        for (bary, w) in rule.iter() {
            physical_point(&mesh, vs, bary, &mut x);
            let jac = match field.jacobian(&x, &grad) {
                Ok(j) => j,
                Err(Error::SingularJacobian) => {
                    // perturbation policy: nudge the gradient off the origin
                    grad.set(0, 0, grad.get(0, 0) + 1e-14);
                    field.jacobian(&x, &grad)?
                }
                Err(e) => return Err(e),
            };
            let wphys = w * scale * geom.volume;
            for (ki, &vi) in vs.iter().enumerate() {
                let ni = vi as usize;
                for (kj, &vj) in vs.iter().enumerate() {
                    let nj = vj as usize;
                    if !is_free(ni) || !is_free(nj) {
                        continue;
                    }
                    for a in 0..nc {
                        for b in 0..nc {
                            let mut acc = 0.0;
                            for c in 0..d {
                                for dd in 0..d {
                                    acc += jac.entry(a, c, b, dd)
                                        * geom.grads[ki][c]
                                        * geom.grads[kj][dd];
                                }
                            }
                            triplets.push((
                                (ni * nc + a) as u32,
                                (nj * nc + b) as u32,
                                wphys * acc,
                            ));
                        }
                    }
                }
            }
        }
    }
    if dirichlet {
        for node in 0..mesh.n_vertices() {
            if mesh.is_boundary(node) {
                for c in 0..nc {
                    let dof = (node * nc + c) as u32;
                    triplets.push((dof, dof, 1.0));
                }
            }
        }
    }
    Ok(triplets)
}

/// Norms on P1 functions.
#[derive(Clone)]
pub enum NormKind {
    Lp(f64),
    W1pSemi(f64),
    W1p(f64),
    H1,
    LqGrad(f64),
    LqGradWeighted(f64, WeightFn),
}

/// Named norm by elementwise quadrature. Gradients are piecewise constant so
/// the seminorm parts are exact; Lp parts use the supplied rule.
pub fn norm(f: &P1Function, kind: &NormKind, quad: &QuadratureRule) -> f64 {
    match kind {
        NormKind::Lp(p) => lp_part(f, *p, quad).powf(1.0 / p),
        NormKind::W1pSemi(p) => grad_part(f, *p, None).powf(1.0 / p),
        NormKind::W1p(p) => {
            (lp_part(f, *p, quad) + grad_part(f, *p, None)).powf(1.0 / p)
        }
        NormKind::H1 => (lp_part(f, 2.0, quad) + grad_part(f, 2.0, None)).sqrt(),
        NormKind::LqGrad(q) => grad_part(f, *q, None).powf(1.0 / q),
        NormKind::LqGradWeighted(q, w) => grad_part(f, *q, Some(w.as_ref())).powf(1.0 / q),
    }
}

fn lp_part(f: &P1Function, p: f64, quad: &QuadratureRule) -> f64 {
    let mesh = f.mesh().clone();
    let d = mesh.dim();
    let nc = f.n_comp();
    let mut total = 0.0;
    let mut u = vec![0.0; nc];
    let scale = 1.0 / crate::quadrature::ref_volume(d);
    for e in 0..mesh.n_simplices() {
        let geom = element_geometry(&mesh, e);
        let vs = mesh.simplex(e);
        for (bary, w) in quad.iter() {
            for c in 0..nc {
                u[c] = 0.0;
            }
            for (k, &vk) in vs.iter().enumerate() {
                for c in 0..nc {
                    u[c] += bary[k] * f.node_value(vk as usize, c);
                }
            }
            let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
            total += w * scale * geom.volume * norm.powf(p);
        }
    }
    total
}

fn grad_part(f: &P1Function, p: f64, weight: Option<WeightRef>) -> f64 {
    let mesh = f.mesh().clone();
    let d = mesh.dim();
    let mut total = 0.0;
    let mut centroid = vec![0.0; d];
    for e in 0..mesh.n_simplices() {
        let geom = element_geometry(&mesh, e);
        let g = element_gradient(f, e, &geom);
        let w = match weight {
            Some(wf) => {
                let vs = mesh.simplex(e);
                let bary = vec![1.0 / (d + 1) as f64; d + 1];
                physical_point(&mesh, vs, &bary, &mut centroid);
                wf(&centroid)
            }
            None => 1.0,
        };
        total += w * geom.volume * g.norm().powf(p);
    }
    total
}

/// H¹ distance to an analytic pair (u, Du) by per-element quadrature of the
/// given degree.
pub fn error_h1(
    f: &P1Function,
    exact: impl Fn(&[f64], &mut [f64]),
    exact_grad: impl Fn(&[f64], &mut [f64]),
    quad_degree: usize,
) -> Result<f64> {
    let mesh = f.mesh().clone();
    let d = mesh.dim();
    let nc = f.n_comp();
    let quad = QuadratureRule::conical(d, quad_degree)?;
    let mut x = vec![0.0; d];
    let mut u = vec![0.0; nc];
    let mut ue = vec![0.0; nc];
    let mut ge = vec![0.0; nc * d];
    let scale = 1.0 / crate::quadrature::ref_volume(d);
    let mut total = 0.0;
    for e in 0..mesh.n_simplices() {
        let geom = element_geometry(&mesh, e);
        let vs = mesh.simplex(e);
        let grad = element_gradient(f, e, &geom);
        for (bary, w) in quad.iter() {
            physical_point(&mesh, vs, bary, &mut x);
            for c in 0..nc {
                u[c] = 0.0;
            }
            for (k, &vk) in vs.iter().enumerate() {
                for c in 0..nc {
                    u[c] += bary[k] * f.node_value(vk as usize, c);
                }
            }
            exact(&x, &mut ue);
            exact_grad(&x, &mut ge);
            let mut val = 0.0;
            for c in 0..nc {
                val += (u[c] - ue[c]).powi(2);
                for r in 0..d {
                    val += (grad.get(c, r) - ge[c * d + r]).powi(2);
                }
            }
            total += w * scale * geom.volume * val;
        }
    }
    Ok(total.sqrt())
}

/// Nodal interpolation from a coarse function onto its refined mesh.
pub fn prolong(coarse: &P1Function, fine_mesh: Arc<SimplicialMesh>) -> Result<P1Function> {
    let cm = coarse.mesh();
    if fine_mesh.dim() != cm.dim() || fine_mesh.level() != cm.level() + 1 {
        return Err(Error::NotNested {
            coarse: cm.level(),
            fine: fine_mesh.level(),
        });
    }
    let nc = coarse.n_comp();
    let mut out = P1Function::zeros(fine_mesh.clone(), nc);
    let mut buf = vec![0.0; nc];
    for node in 0..fine_mesh.n_vertices() {
        coarse.eval_at(fine_mesh.vertex(node), &mut buf);
        for c in 0..nc {
            out.values_mut()[node * nc + c] = buf[c];
        }
    }
    Ok(out)
}
