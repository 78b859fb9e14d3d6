//! Inner solvers: one outer step of the iteration solves
//! ∫ b(x,Du)·Dφ = rhs(φ) — a single linear solve when b is linear, a damped
//! Newton method on the monotone residual otherwise. Also the dense direct
//! Newton solver used as the independent reference for the nonlinear
//! experiment.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fem::{
    assemble_field_flux, assemble_jacobian, assemble_lower_order, assemble_lower_order_jacobian,
    jacobian_triplets, P1Function,
};
use crate::fields::StructureField;
use crate::quadrature::QuadratureRule;
use crate::sparse::CsrMatrix;

#[derive(Clone, Copy, Debug)]
pub struct StepConfig {
    /// Relative residual tolerance of the linear (CG) solves.
    pub linear_tol: f64,
    /// Absolute dof-2-norm tolerance of the Newton residual.
    pub newton_tol: f64,
    pub max_newton: usize,
    /// Backtracking factor of the damped line search.
    pub damping: f64,
    /// Smallest admitted line-search step.
    pub min_step: f64,
    /// CG iteration cap; 0 = automatic (10 n + 2000).
    pub max_cg: usize,
}

impl Default for StepConfig {
    fn default() -> Self {
        Self {
            linear_tol: 1e-12,
            newton_tol: 1e-11,
            max_newton: 50,
            damping: 0.5,
            min_step: (2.0f64).powi(-30),
            max_cg: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct StepStats {
    pub newton_iterations: usize,
    pub cg_iterations: usize,
    pub linear_path: bool,
}

/// Jacobi-preconditioned conjugate gradients for SPD systems.
pub fn solve_linear_spd(
    mat: &CsrMatrix,
    rhs: &[f64],
    x0: Option<&[f64]>,
    cfg: &StepConfig,
) -> Result<(Vec<f64>, usize)> {
    let n = mat.n();
    let rhs_norm = norm2(rhs);
    let mut x = match x0 {
        Some(g) => g.to_vec(),
        None => vec![0.0; n],
    };
    if rhs_norm == 0.0 {
        return Ok((vec![0.0; n], 0));
    }
    let tol = cfg.linear_tol * rhs_norm;
    let max_iter = if cfg.max_cg > 0 { cfg.max_cg } else { 10 * n + 2000 };

    let diag = mat.diagonal();
    let inv_diag: Vec<f64> = diag
        .iter()
        .map(|&d| if d.abs() > 0.0 { 1.0 / d } else { 1.0 })
        .collect();

    let mut r = vec![0.0; n];
    mat.matvec(&x, &mut r);
    for i in 0..n {
        r[i] = rhs[i] - r[i];
    }
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(a, b)| a * b).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];

    for iter in 0..max_iter {
        let rnorm = norm2(&r);
        if rnorm <= tol {
            return Ok((x, iter));
        }
        mat.matvec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::NotSpd);
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::LinearSolve {
        iterations: max_iter,
        residual: norm2(&r),
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solve one reference-field problem: find u with ∫ b(x,Du)·Dφ = rhs(φ) and
/// u = 0 on the boundary.
///
/// `cached_matrix` may carry the pre-assembled stiffness matrix when b is
/// linear.
pub fn solve_step(
    b: &dyn StructureField,
    rhs: &[f64],
    guess: &P1Function,
    cfg: &StepConfig,
    cached_matrix: Option<&CsrMatrix>,
) -> Result<(P1Function, StepStats)> {
    if b.meta().lambda_min <= 0.0 {
        return Err(Error::NotElliptic(
            "reference field must have a positive lower ellipticity bound".into(),
        ));
    }
    let dim = guess.mesh().dim();
    let quad = QuadratureRule::symmetric(dim, 2)?;
    let mut stats = StepStats::default();

    if b.meta().linear {
        stats.linear_path = true;
        let owned;
        let mat = match cached_matrix {
            Some(m) => m,
            None => {
                owned = assemble_jacobian(b, guess, &quad)?;
                &owned
            }
        };
        let (x, iters) = solve_linear_spd(mat, rhs, Some(guess.values()), cfg)?;
        stats.cg_iterations = iters;
        let mut out = P1Function::from_values(guess.mesh().clone(), guess.n_comp(), x)?;
        out.enforce_boundary();
        return Ok((out, stats));
    }

    // damped Newton on R(u) = A_b(u) - rhs
    let mut u = guess.clone();
    u.enforce_boundary();
    let residual = |state: &P1Function| -> Vec<f64> {
        let mut r = assemble_field_flux(b, state, &quad);
        for (ri, gi) in r.iter_mut().zip(rhs) {
            *ri -= gi;
        }
        r
    };
    let mut r = residual(&u);
    let mut rnorm = norm2(&r);

    for newton in 0..cfg.max_newton {
        if rnorm <= cfg.newton_tol {
            stats.newton_iterations = newton;
            return Ok((u, stats));
        }
        let jac = assemble_jacobian(b, &u, &quad)?;
        let neg_r: Vec<f64> = r.iter().map(|v| -v).collect();
        let (dir, cg_iters) = solve_linear_spd(&jac, &neg_r, None, cfg)?;
        stats.cg_iterations += cg_iters;

        // backtracking line search; monotonicity of b makes the full step
        // usually acceptable
        let mut alpha = 1.0;
        loop {
            let mut trial = u.clone();
            for (t, d) in trial.values_mut().iter_mut().zip(&dir) {
                *t += alpha * d;
            }
            trial.enforce_boundary();
            let r_trial = residual(&trial);
            let r_trial_norm = norm2(&r_trial);
            if r_trial_norm < rnorm * (1.0 - 1e-4 * alpha) {
                debug_assert!(r_trial_norm < rnorm);
                u = trial;
                r = r_trial;
                rnorm = r_trial_norm;
                break;
            }
            alpha *= cfg.damping;
            if alpha < cfg.min_step {
                return Err(Error::NewtonStagnation {
                    iteration: newton,
                    residual: rnorm,
                    step: alpha,
                });
            }
        }
    }
    if rnorm <= cfg.newton_tol {
        stats.newton_iterations = cfg.max_newton;
        return Ok((u, stats));
    }
    Err(Error::NewtonStagnation {
        iteration: cfg.max_newton,
        residual: rnorm,
        step: 1.0,
    })
}

const DENSE_NEWTON_DOF_CAP: usize = 4500;

/// Damped Newton on the full problem residual
/// ∫ a(x,Du)·Dφ + ∫ |u|^k u·φ − rhs(φ), solved with dense LU (the problem
/// field may have a nonsymmetric Jacobian). Intended for the moderate-size
/// reference solves; refuses systems beyond a dof cap.
pub fn solve_full_newton(
    a: &dyn StructureField,
    rhs: &[f64],
    lower_order_power: Option<f64>,
    guess: &P1Function,
    cfg: &StepConfig,
) -> Result<(P1Function, StepStats)> {
    let n = guess.n_dof();
    if n > DENSE_NEWTON_DOF_CAP {
        return Err(Error::InvalidArgument(format!(
            "dense direct Newton limited to {DENSE_NEWTON_DOF_CAP} dofs, got {n}"
        )));
    }
    let mesh = guess.mesh().clone();
    let dim = mesh.dim();
    let quad = QuadratureRule::symmetric(dim, 2)?;
    let quad_lo = QuadratureRule::conical(dim, 7)?;
    let mut stats = StepStats::default();

    let residual = |state: &P1Function| -> Vec<f64> {
        let mut r = assemble_field_flux(a, state, &quad);
        if let Some(k) = lower_order_power {
            let lo = assemble_lower_order(state, k, &quad_lo);
            for (ri, li) in r.iter_mut().zip(lo) {
                *ri += li;
            }
        }
        for (ri, gi) in r.iter_mut().zip(rhs) {
            *ri -= gi;
        }
        r
    };

    let mut u = guess.clone();
    u.enforce_boundary();
    let mut r = residual(&u);
    let mut rnorm = norm2(&r);

    for newton in 0..cfg.max_newton {
        if rnorm <= cfg.newton_tol {
            stats.newton_iterations = newton;
            return Ok((u, stats));
        }
        let mut triplets = jacobian_triplets(a, &u, &quad, true)?;
        if let Some(k) = lower_order_power {
            // boundary-filtered mass-like block
            for (row, col, v) in assemble_lower_order_jacobian(&u, k, &quad_lo) {
                let nc = u.n_comp();
                if !mesh.is_boundary(row as usize / nc) && !mesh.is_boundary(col as usize / nc) {
                    triplets.push((row, col, v));
                }
            }
        }
        let jac = CsrMatrix::from_triplets(n, triplets).to_dense();
        let rhs_vec = DVector::from_iterator(n, r.iter().map(|v| -v));
        let dir = lu_solve(jac, rhs_vec)?;
        let mut alpha = 1.0;
        loop {
            let mut trial = u.clone();
            for (i, t) in trial.values_mut().iter_mut().enumerate() {
                *t += alpha * dir[i];
            }
            trial.enforce_boundary();
            let r_trial = residual(&trial);
            let r_trial_norm = norm2(&r_trial);
            if r_trial_norm < rnorm * (1.0 - 1e-4 * alpha) {
                u = trial;
                r = r_trial;
                rnorm = r_trial_norm;
                break;
            }
            alpha *= cfg.damping;
            if alpha < cfg.min_step {
                return Err(Error::NewtonStagnation {
                    iteration: newton,
                    residual: rnorm,
                    step: alpha,
                });
            }
        }
        stats.newton_iterations = newton + 1;
    }
    if rnorm <= cfg.newton_tol {
        return Ok((u, stats));
    }
    Err(Error::NewtonStagnation {
        iteration: cfg.max_newton,
        residual: rnorm,
        step: 1.0,
    })
}

fn lu_solve(m: DMatrix<f64>, rhs: DVector<f64>) -> Result<DVector<f64>> {
    m.lu().solve(&rhs).ok_or(Error::NotSpd)
}
