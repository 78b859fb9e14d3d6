//! The built-in numerical experiments on the unit cube: a linear system with
//! a known trigonometric exact solution, a quartic-growth nonlinear system
//! solved both by the iteration and by a direct Newton method, the identity
//! (Poisson) mesh-convergence study, and the multilevel comparison.

use std::f64::consts::TAU;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::Result;
use crate::fem::{error_h1, P1Function};
use crate::fields::{identity_field, linear_field, quartic_field};
use crate::iteration::{
    iterate, iterate_observed, multilevel, Gamma, IterationTrace, MultilevelRun, Problem, StopRule,
};
use crate::mesh::unit_cube_mesh;
use crate::step::{solve_full_newton, StepConfig};

/// Quadrature degree of the error norms against trigonometric solutions;
/// resolves the sine products to ~1e-7 even on the h = 1/2 mesh.
pub const ERROR_QUAD_DEGREE: usize = 18;

/// Coefficient matrix of the linear example.
pub fn linear_example_matrix() -> DMatrix<f64> {
    DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 2.0, 0.0, 2.0, 3.0, 0.0, 0.0, 1.0])
}

/// Coefficient matrix of the nonlinear (quartic) example.
pub fn nonlinear_example_matrix() -> DMatrix<f64> {
    DMatrix::from_row_slice(3, 3, &[1.0, 3.0, 5.0, 0.0, 2.0, 4.0, 0.0, 0.0, 1.0])
}

fn sine_bubble(x: &[f64]) -> f64 {
    (TAU * x[0]).sin() * (TAU * x[1]).sin() * (TAU * x[2]).sin()
}

fn sine_bubble_grad(x: &[f64], out: &mut [f64; 3]) {
    let (s0, c0) = (TAU * x[0]).sin_cos();
    let (s1, c1) = (TAU * x[1]).sin_cos();
    let (s2, c2) = (TAU * x[2]).sin_cos();
    out[0] = TAU * c0 * s1 * s2;
    out[1] = TAU * s0 * c1 * s2;
    out[2] = TAU * s0 * s1 * c2;
}

/// Exact solution of the linear example: all three components equal the sine
/// product.
pub fn exact_solution(x: &[f64], out: &mut [f64]) {
    out.fill(sine_bubble(x));
}

pub fn exact_gradient(x: &[f64], out: &mut [f64]) {
    let mut g = [0.0; 3];
    sine_bubble_grad(x, &mut g);
    for comp in 0..3 {
        out[comp * 3..comp * 3 + 3].copy_from_slice(&g);
    }
}

/// Manufactured flux F = A·Du for the exact solution: row α carries
/// 2π·(Σ_β A_{αβ})·v with v the gradient direction of the sine product, so
/// div(A Du) = div F holds identically.
pub fn sine_flux(a: &DMatrix<f64>) -> crate::iteration::FluxFn {
    let coeffs: Vec<f64> = (0..a.nrows())
        .map(|r| (0..a.ncols()).map(|c| a[(r, c)]).sum())
        .collect();
    Arc::new(move |x: &[f64], out: &mut [f64]| {
        let mut g = [0.0; 3];
        sine_bubble_grad(x, &mut g);
        for (alpha, coeff) in coeffs.iter().enumerate() {
            for d in 0..3 {
                out[alpha * 3 + d] = coeff * g[d];
            }
        }
    })
}

/// Source term of the nonlinear example: (y, x², z² + x²).
pub fn poly_source() -> crate::iteration::SourceFn {
    Arc::new(|x: &[f64], out: &mut [f64]| {
        out[0] = x[1];
        out[1] = x[0] * x[0];
        out[2] = x[2] * x[2] + x[0] * x[0];
    })
}

/// The linear example at one mesh level.
pub fn linear_problem(level: u32, gamma: Gamma) -> Result<Problem> {
    let mesh = Arc::new(unit_cube_mesh(3, level)?);
    let a = Arc::new(linear_field(linear_example_matrix())?);
    let b = Arc::new(identity_field(3));
    let mut problem = Problem::new(a, b, mesh, 3, 2.0);
    problem.flux = Some(sine_flux(&linear_example_matrix()));
    problem.gamma = gamma;
    problem.allow_inadmissible = true; // spectrum is fine, operator norm is not
    Ok(problem)
}

#[derive(Clone, Debug)]
pub struct LinearLevelResult {
    pub level: u32,
    pub h: f64,
    pub error_h1: f64,
    pub iterations: usize,
    pub trace: IterationTrace,
}

/// Run the linear experiment over the given levels.
pub fn linear_experiment(
    levels: &[u32],
    gamma: f64,
    tol: f64,
    cfg: &StepConfig,
) -> Result<Vec<LinearLevelResult>> {
    let mut out = Vec::new();
    for &level in levels {
        let problem = linear_problem(level, Gamma::Fixed(gamma))?;
        let u0 = P1Function::zeros(problem.mesh.clone(), 3);
        let (u, trace) = iterate(
            &problem,
            u0,
            &StopRule {
                tol,
                max_iter: 500,
            },
            cfg,
        )?;
        let err = error_h1(&u, exact_solution, exact_gradient, ERROR_QUAD_DEGREE)?;
        out.push(LinearLevelResult {
            level,
            h: problem.mesh.h(),
            error_h1: err,
            iterations: trace.iterations(),
            trace,
        });
    }
    Ok(out)
}

/// Tightly converged discrete solution of the linear example, used as the
/// reference for a-posteriori studies.
pub fn linear_reference_solution(level: u32, gamma: f64, tol: f64) -> Result<P1Function> {
    let problem = linear_problem(level, Gamma::Fixed(gamma))?;
    let cfg = StepConfig {
        linear_tol: 1e-15,
        ..Default::default()
    };
    let u0 = P1Function::zeros(problem.mesh.clone(), 3);
    let (u, _trace) = iterate(
        &problem,
        u0,
        &StopRule {
            tol,
            max_iter: 2000,
        },
        &cfg,
    )?;
    Ok(u)
}

/// The nonlinear example at one mesh level: a(z) = (1+|z|⁴)A z against the
/// reference b(z) = (1+|z|⁴)z, with the polynomial source and the |u|⁴u
/// lower-order term.
pub fn nonlinear_problem(level: u32, gamma: Gamma) -> Result<Problem> {
    let mesh = Arc::new(unit_cube_mesh(3, level)?);
    let a = Arc::new(quartic_field(nonlinear_example_matrix())?);
    let b = Arc::new(quartic_field(DMatrix::identity(3, 3))?);
    let mut problem = Problem::new(a, b, mesh, 3, 6.0);
    problem.source = Some(poly_source());
    problem.lower_order_power = Some(4.0);
    problem.gamma = gamma;
    problem.allow_inadmissible = true;
    Ok(problem)
}

#[derive(Clone, Debug)]
pub struct NonlinearLevelResult {
    pub level: u32,
    pub h: f64,
    /// ‖u_dir − u_n‖_{H¹} per outer step.
    pub distances: Vec<f64>,
    pub final_distance: f64,
    pub iterations: usize,
    pub trace: IterationTrace,
}

/// Run the nonlinear experiment: direct damped-Newton solution first, then
/// the iteration with the per-step distance to it.
pub fn nonlinear_experiment(
    levels: &[u32],
    gamma: f64,
    tol: f64,
    cfg: &StepConfig,
) -> Result<Vec<NonlinearLevelResult>> {
    let mut out = Vec::new();
    for &level in levels {
        let problem = nonlinear_problem(level, Gamma::Fixed(gamma))?;
        let u_dir = direct_nonlinear_solution(&problem, cfg)?;
        let mut distances = Vec::new();
        let u0 = P1Function::zeros(problem.mesh.clone(), 3);
        let (_u, trace) = iterate_observed(
            &problem,
            u0,
            &StopRule {
                tol,
                max_iter: 400,
            },
            cfg,
            |_, u_n| {
                let mut diff = u_n.clone();
                diff.axpy(-1.0, &u_dir);
                let quad = crate::quadrature::QuadratureRule::conical(3, 4).expect("rule");
                distances.push(crate::fem::norm(
                    &diff,
                    &crate::fem::NormKind::H1,
                    &quad,
                ));
            },
        )?;
        let final_distance = *distances.last().unwrap();
        out.push(NonlinearLevelResult {
            level,
            h: problem.mesh.h(),
            distances,
            final_distance,
            iterations: trace.iterations(),
            trace,
        });
    }
    Ok(out)
}

/// Independent reference: damped Newton on the full nonlinear residual.
pub fn direct_nonlinear_solution(problem: &Problem, cfg: &StepConfig) -> Result<P1Function> {
    let mesh = problem.mesh.clone();
    let nc = problem.n_comp;
    let quad = crate::quadrature::QuadratureRule::symmetric(3, 5)?;
    let mut rhs = vec![0.0; mesh.n_vertices() * nc];
    if let Some(flux) = &problem.flux {
        let g = crate::fem::assemble_flux_functional(&mesh, nc, |x, out| flux(x, out), &quad);
        for (r, v) in rhs.iter_mut().zip(g) {
            *r += v;
        }
    }
    if let Some(source) = &problem.source {
        let g = crate::fem::assemble_source_functional(&mesh, nc, |x, out| source(x, out), &quad);
        for (r, v) in rhs.iter_mut().zip(g) {
            *r += v;
        }
    }
    let guess = P1Function::zeros(mesh, nc);
    let (u, _stats) = solve_full_newton(
        problem.a.as_ref(),
        &rhs,
        problem.lower_order_power,
        &guess,
        cfg,
    )?;
    Ok(u)
}

/// H¹ errors of the identity-field (Poisson) problem against the exact sine
/// solution over the given levels.
pub fn poisson_errors(levels: &[u32], tol: f64, cfg: &StepConfig) -> Result<Vec<(u32, f64)>> {
    let mut out = Vec::new();
    for &level in levels {
        let mesh = Arc::new(unit_cube_mesh(3, level)?);
        let a = Arc::new(identity_field(3));
        let b = Arc::new(identity_field(3));
        let mut problem = Problem::new(a, b, mesh.clone(), 3, 2.0);
        problem.flux = Some(sine_flux(&DMatrix::identity(3, 3)));
        problem.gamma = Gamma::Fixed(1.0);
        let u0 = P1Function::zeros(mesh, 3);
        let (u, _trace) = iterate(
            &problem,
            u0,
            &StopRule { tol, max_iter: 50 },
            cfg,
        )?;
        let err = error_h1(&u, exact_solution, exact_gradient, ERROR_QUAD_DEGREE)?;
        out.push((level, err));
    }
    Ok(out)
}

/// Least-squares slope of log(error) against log(h): the observed order.
pub fn fitted_order(errors: &[(u32, f64)]) -> f64 {
    let n = errors.len() as f64;
    let xs: Vec<f64> = errors
        .iter()
        .map(|(l, _)| (2.0f64.powi(-(*l as i32))).ln())
        .collect();
    let ys: Vec<f64> = errors.iter().map(|(_, e)| e.ln()).collect();
    let xm = xs.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
    let den: f64 = xs.iter().map(|x| (x - xm) * (x - xm)).sum();
    num / den
}

/// Pairwise observed orders between successive levels.
pub fn pairwise_orders(errors: &[(u32, f64)]) -> Vec<f64> {
    errors
        .windows(2)
        .map(|w| (w[0].1 / w[1].1).log2() / (w[1].0 - w[0].0) as f64)
        .collect()
}

/// Multilevel run of the nonlinear experiment with tolerances 10^{-(i+4)} at
/// level i.
pub fn nonlinear_multilevel(k0: u32, k_max: u32, cfg: &StepConfig) -> Result<MultilevelRun> {
    let problem = nonlinear_problem(k0, Gamma::Fixed(0.65))?;
    let tols: Vec<f64> = (k0..=k_max).map(|i| 10f64.powi(-(i as i32 + 4))).collect();
    multilevel(&problem, k_max, &tols, 400, cfg)
}
