//! The outer fixed-point iteration: each step solves the reference-field
//! problem with right-hand side b(x,Du_n) − γ a(x,Du_n) + γ f, plus
//! termination and rate tracking, the a-posteriori estimator, and the
//! multilevel driver.

use std::fmt::Write as _;
use std::sync::Arc;

use crate::constants::{kab_for_fields, ConstantsReport};
use crate::error::{Error, Result};
use crate::fem::{
    assemble_field_flux, assemble_flux_functional, assemble_jacobian, assemble_lower_order,
    assemble_source_functional, norm, prolong, NormKind, P1Function,
};
use crate::fields::StructureField;
use crate::mesh::{refine, SimplicialMesh};
use crate::quadrature::QuadratureRule;
use crate::sampling::SampleSpec;
use crate::step::{solve_step, StepConfig, StepStats};

pub type FluxFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
pub type SourceFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Gamma {
    /// Derived from the spectral-constants report; refuses inadmissible pairs.
    Auto,
    Fixed(f64),
}

/// A discretized problem instance: find u with
/// ∫ a(x,Du)·Dφ + ∫ |u|^k u·φ = ∫ f·Dφ + ∫ s·φ for all φ, u = 0 on ∂Ω.
#[derive(Clone)]
pub struct Problem {
    pub a: Arc<dyn StructureField>,
    pub b: Arc<dyn StructureField>,
    pub flux: Option<FluxFn>,
    pub source: Option<SourceFn>,
    /// Exponent k of the optional zeroth-order term |u|^k u.
    pub lower_order_power: Option<f64>,
    pub gamma: Gamma,
    pub mesh: Arc<SimplicialMesh>,
    pub n_comp: usize,
    pub p: f64,
    pub allow_inadmissible: bool,
    /// Exponents q of the diagnostic gradient norms recorded per step.
    pub lq_diagnostics: Vec<f64>,
    /// Seed of the constants sampler for gamma = auto.
    pub seed: u64,
}

impl Problem {
    pub fn new(
        a: Arc<dyn StructureField>,
        b: Arc<dyn StructureField>,
        mesh: Arc<SimplicialMesh>,
        n_comp: usize,
        p: f64,
    ) -> Self {
        let mut lq = vec![2.0, p, 2.0 * p];
        lq.dedup_by(|x, y| (*x - *y).abs() < 1e-12);
        Self {
            a,
            b,
            flux: None,
            source: None,
            lower_order_power: None,
            gamma: Gamma::Auto,
            mesh,
            n_comp,
            p,
            allow_inadmissible: false,
            lq_diagnostics: lq,
            seed: 42,
        }
    }

    pub fn with_mesh(&self, mesh: Arc<SimplicialMesh>) -> Self {
        let mut p = self.clone();
        p.mesh = mesh;
        p
    }

    /// Spectral constants for this pair.
    pub fn constants(&self) -> Result<ConstantsReport> {
        let spec = SampleSpec::new(self.seed, self.n_comp, self.mesh.dim(), 2000)
            .with_mu(self.a.meta().mu.max(self.b.meta().mu));
        kab_for_fields(self.a.as_ref(), self.b.as_ref(), &spec)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct StopRule {
    pub tol: f64,
    pub max_iter: usize,
}

#[derive(Clone, Debug)]
pub struct TraceRow {
    pub n: usize,
    pub diff_w1p: f64,
    pub ratio: Option<f64>,
    pub aposteriori: f64,
    pub lq_grad_norms: Vec<f64>,
    pub newton_iterations: usize,
    pub cg_iterations: usize,
}

#[derive(Clone, Debug, Default)]
pub struct IterationTrace {
    pub rows: Vec<TraceRow>,
    pub converged: bool,
    pub gamma: f64,
    pub lq_exponents: Vec<f64>,
    /// Constants report when gamma was derived automatically.
    pub theory: Option<ConstantsReport>,
}

impl IterationTrace {
    pub fn iterations(&self) -> usize {
        self.rows.len()
    }

    pub fn last_diff(&self) -> Option<f64> {
        self.rows.last().map(|r| r.diff_w1p)
    }

    /// CSV per the trace interface: one row per outer step.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str("n,diff_w1p,ratio,aposteriori");
        for q in &self.lq_exponents {
            let _ = write!(out, ",lq_grad_{q}");
        }
        out.push_str(",newton_iterations,cg_iterations\n");
        for row in &self.rows {
            let _ = write!(out, "{},{:.16e},", row.n, row.diff_w1p);
            if let Some(r) = row.ratio {
                let _ = write!(out, "{r:.16e}");
            }
            let _ = write!(out, ",{:.16e}", row.aposteriori);
            for v in &row.lq_grad_norms {
                let _ = write!(out, ",{v:.16e}");
            }
            let _ = writeln!(out, ",{},{}", row.newton_iterations, row.cg_iterations);
        }
        out
    }
}

/// A-posteriori estimator without its unknown constant:
/// ‖D(u_n − u_prev)‖_{L^p}^{2/max(2,p)}. Both iterates must live on the same
/// mesh.
pub fn aposteriori(u_n: &P1Function, u_prev: &P1Function, p: f64) -> f64 {
    assert!(
        u_n.mesh().level() == u_prev.mesh().level() && u_n.mesh().dim() == u_prev.mesh().dim(),
        "a-posteriori estimator needs iterates on the same mesh"
    );
    let mut diff = u_n.clone();
    diff.axpy(-1.0, u_prev);
    let quad = QuadratureRule::centroid(u_n.mesh().dim());
    let semi = norm(&diff, &NormKind::W1pSemi(p), &quad);
    semi.powf(2.0 / p.max(2.0))
}

/// Geometric mean of the successive difference ratios over the tail half of
/// the trace.
pub fn rate_estimate(trace: &IterationTrace) -> Result<f64> {
    let diffs: Vec<f64> = trace.rows.iter().map(|r| r.diff_w1p).collect();
    if diffs.len() < 3 {
        return Err(Error::TraceTooShort { len: diffs.len() });
    }
    let ratios: Vec<f64> = diffs.windows(2).map(|w| w[1] / w[0]).collect();
    let tail = &ratios[ratios.len() / 2..];
    let log_mean = tail.iter().map(|r| r.ln()).sum::<f64>() / tail.len() as f64;
    Ok(log_mean.exp())
}

/// Run the outer iteration from `u0` until ‖u_{n+1} − u_n‖_{W^{1,p}} ≤ tol or
/// the step cap. Returns the last iterate and the full trace (the trace's
/// `converged` flag records which).
pub fn iterate(
    problem: &Problem,
    u0: P1Function,
    stop: &StopRule,
    cfg: &StepConfig,
) -> Result<(P1Function, IterationTrace)> {
    iterate_observed(problem, u0, stop, cfg, |_, _| {})
}

/// [`iterate`] with a per-step observer called as observer(n, u_n) after each
/// outer solve.
pub fn iterate_observed(
    problem: &Problem,
    u0: P1Function,
    stop: &StopRule,
    cfg: &StepConfig,
    mut observer: impl FnMut(usize, &P1Function),
) -> Result<(P1Function, IterationTrace)> {
    let mesh = problem.mesh.clone();
    let dim = mesh.dim();
    let nc = problem.n_comp;
    let p = problem.p;

    let (gamma, theory) = match problem.gamma {
        Gamma::Fixed(g) => {
            if g <= 0.0 {
                return Err(Error::InvalidArgument("gamma must be positive".into()));
            }
            (g, None)
        }
        Gamma::Auto => {
            let report = problem.constants()?;
            if !report.admissible && !problem.allow_inadmissible {
                return Err(Error::Inadmissible { rate: report.rate });
            }
            (report.gamma, Some(report))
        }
    };

    // constant right-hand side parts, assembled once
    let flux_quad = QuadratureRule::symmetric(dim, 5)?;
    let mut rhs_const = vec![0.0; mesh.n_vertices() * nc];
    if let Some(flux) = &problem.flux {
        let g = assemble_flux_functional(&mesh, nc, |x, out| flux(x, out), &flux_quad);
        for (r, v) in rhs_const.iter_mut().zip(g) {
            *r += gamma * v;
        }
    }
    if let Some(source) = &problem.source {
        let g = assemble_source_functional(&mesh, nc, |x, out| source(x, out), &flux_quad);
        for (r, v) in rhs_const.iter_mut().zip(g) {
            *r += gamma * v;
        }
    }

    // cache the stiffness matrix of a linear reference field
    let field_quad = QuadratureRule::symmetric(dim, 2)?;
    let cached = if problem.b.meta().linear {
        Some(assemble_jacobian(
            problem.b.as_ref(),
            &P1Function::zeros(mesh.clone(), nc),
            &field_quad,
        )?)
    } else {
        None
    };
    let lower_quad = QuadratureRule::conical(dim, 7)?;
    let diff_quad = QuadratureRule::conical(dim, (p.ceil() as usize + 2).max(4))?;

    let mut u = u0;
    u.enforce_boundary();
    let mut trace = IterationTrace {
        gamma,
        lq_exponents: problem.lq_diagnostics.clone(),
        theory,
        ..Default::default()
    };
    let mut prev_diff: Option<f64> = None;

    for n in 1..=stop.max_iter {
        // F_n = b(Du_n) − γ a(Du_n) (pointwise) plus the γ-scaled constant part
        let mut rhs = assemble_field_flux(problem.b.as_ref(), &u, &field_quad);
        let a_part = assemble_field_flux(problem.a.as_ref(), &u, &field_quad);
        for (r, av) in rhs.iter_mut().zip(a_part) {
            *r -= gamma * av;
        }
        if let Some(k) = problem.lower_order_power {
            let lo = assemble_lower_order(&u, k, &lower_quad);
            for (r, lv) in rhs.iter_mut().zip(lo) {
                *r -= gamma * lv;
            }
        }
        for (r, cv) in rhs.iter_mut().zip(&rhs_const) {
            *r += cv;
        }

        let (next, stats): (P1Function, StepStats) =
            solve_step(problem.b.as_ref(), &rhs, &u, cfg, cached.as_ref()).map_err(|e| {
                Error::InnerSolve {
                    step: n,
                    source: Box::new(e),
                }
            })?;

        let mut diff = next.clone();
        diff.axpy(-1.0, &u);
        let diff_norm = norm(&diff, &NormKind::W1p(p), &diff_quad);
        let apost = aposteriori(&next, &u, p);
        let lq: Vec<f64> = problem
            .lq_diagnostics
            .iter()
            .map(|&q| norm(&next, &NormKind::LqGrad(q), &diff_quad))
            .collect();
        trace.rows.push(TraceRow {
            n,
            diff_w1p: diff_norm,
            ratio: prev_diff.map(|d| if d > 0.0 { diff_norm / d } else { 0.0 }),
            aposteriori: apost,
            lq_grad_norms: lq,
            newton_iterations: stats.newton_iterations,
            cg_iterations: stats.cg_iterations,
        });
        prev_diff = Some(diff_norm);
        u = next;
        observer(n, &u);

        if diff_norm <= stop.tol {
            trace.converged = true;
            return Ok((u, trace));
        }
    }
    Ok((u, trace))
}

#[derive(Clone, Debug)]
pub struct MultilevelRun {
    pub solution: P1Function,
    pub traces: Vec<IterationTrace>,
    pub levels: Vec<u32>,
}

/// Algorithm: run the iteration on nested meshes, prolonging the last iterate
/// of each level as the next level's start, with tolerances `tols` (one per
/// level, decreasing).
pub fn multilevel(
    problem: &Problem,
    k_max: u32,
    tols: &[f64],
    max_iter: usize,
    cfg: &StepConfig,
) -> Result<MultilevelRun> {
    let k0 = problem.mesh.level();
    if k_max < k0 {
        return Err(Error::InvalidArgument(
            "final level below the starting level".into(),
        ));
    }
    let n_levels = (k_max - k0 + 1) as usize;
    if tols.len() != n_levels {
        return Err(Error::InvalidArgument(format!(
            "need {n_levels} tolerances for levels {k0}..={k_max}, got {}",
            tols.len()
        )));
    }
    if tols.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::InvalidArgument(
            "tolerances must be non-increasing".into(),
        ));
    }

    let mut traces = Vec::new();
    let mut levels = Vec::new();
    let mut current = problem.with_mesh(problem.mesh.clone());
    let mut u = P1Function::zeros(current.mesh.clone(), problem.n_comp);
    for (idx, &tol) in tols.iter().enumerate() {
        let level = k0 + idx as u32;
        if idx > 0 {
            let fine = Arc::new(refine(&current.mesh)?);
            u = prolong(&u, fine.clone())?;
            current = problem.with_mesh(fine);
        }
        let (next, trace) = iterate(
            &current,
            u,
            &StopRule { tol, max_iter },
            cfg,
        )?;
        u = next;
        traces.push(trace);
        levels.push(level);
    }
    Ok(MultilevelRun {
        solution: u,
        traces,
        levels,
    })
}
