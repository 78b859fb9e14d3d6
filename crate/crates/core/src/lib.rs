//! Iterative finite element solver for quasilinear elliptic systems with
//! p-growth.
//!
//! The problem div a(x, Du) = div f is solved by repeatedly solving a
//! tractable reference problem: given the iterate u_n, the next iterate is
//! the solution of
//!
//! ```text
//! div b(x, Du_{n+1}) = div( b(x, Du_n) − γ a(x, Du_n) + γ f )
//! ```
//!
//! which contracts in W^{1,p} whenever the relative spectral dispersion
//! K_{a,b} of the pair (a, b) is small enough; every constant involved —
//! K_{a,b}, the relaxation parameter γ, the nonsymmetric norm bound K_γ and
//! the contraction rate R — is computed explicitly by the [`constants`]
//! module, and the inequalities underlying the rate are independently
//! verified by the [`oracles`] module.
//!
//! The crate ships vector P1 finite elements on structured Kuhn meshes of the
//! unit square/cube ([`mesh`], [`fem`]), inner solvers ([`step`]), the outer
//! iteration with trace/rate/a-posteriori bookkeeping and its multilevel
//! variant ([`iteration`]), and the built-in experiment drivers
//! ([`experiments`]).

// index loops over small fixed-stride buffers are the clearest form for the
// stencil and tensor kernels here
#![allow(clippy::needless_range_loop)]

pub mod constants;
pub mod error;
pub mod experiments;
pub mod fem;
pub mod fields;
pub mod iteration;
pub mod mesh;
pub mod oracles;
pub mod quadrature;
pub mod sampling;
pub mod sparse;
pub mod step;
pub mod tensor;

pub use error::{Error, Result};

/// Requested worker-thread count (`KOSHELEV_THREADS`). All kernels are
/// currently sequential and deterministic; the value is accepted for
/// interface stability and does not change any result.
pub fn thread_count() -> usize {
    static COUNT: std::sync::OnceLock<usize> = std::sync::OnceLock::new();
    *COUNT.get_or_init(|| {
        std::env::var("KOSHELEV_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
            .filter(|&n| n >= 1)
            .unwrap_or(1)
    })
}
