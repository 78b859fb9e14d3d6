//! Flat key=value configuration files.
//!
//! ```text
//! # problem geometry
//! mesh.dim = 3            # 2 or 3
//! mesh.level = 2          # node spacing h = 2^-level
//! components = 3          # N
//! p = 2.0                 # growth exponent for norms and the rate formulas
//!
//! # fields (field.a = problem field, field.b = reference field)
//! field.a.kind = linear   # identity | linear | p_laplace | quartic
//! field.a.matrix = 1 1 2  0 2 3  0 0 1    # row-major N x N
//! field.a.p = 3.0         # p_laplace only
//! field.a.mu = 0.0        # p_laplace only
//! field.b.kind = identity
//!
//! # iteration
//! gamma = auto            # or a positive real
//! stop.tol = 1e-9
//! stop.max_iter = 200
//!
//! # right-hand side
//! rhs.flux = none         # none | sine; row alpha of F is coeffs[alpha] * grad(sine product)
//! rhs.flux.coeffs = 4 5 1 # the linear example uses the row sums of its matrix
//! rhs.source = none       # none | poly ((y, x^2, z^2+x^2))
//! lower_order = 0         # exponent k of |u|^k u; 0 disables
//!
//! # solver knobs
//! solver.newton_tol = 1e-11
//! solver.linear_tol = 1e-12
//! solver.max_newton = 50
//!
//! seed = 42
//! lq = 2 6                # diagnostic gradient-norm exponents
//! export.solution = solution.txt
//! export.trace = trace.csv
//! ```

use std::collections::BTreeMap;
use std::sync::Arc;

use koshelev::fields::{identity_field, linear_field, p_laplace_field, quartic_field, StructureField};
use koshelev::iteration::{Gamma, Problem};
use koshelev::mesh::unit_cube_mesh;

#[derive(Debug)]
pub struct ConfigError {
    pub key: String,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error at `{}`: {}", self.key, self.message)
    }
}

fn err(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError {
        key: key.to_string(),
        message: message.into(),
    }
}

pub struct Config {
    map: BTreeMap<String, String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut map = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(&format!("line {}", lineno + 1), "expected key = value"))?;
            map.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Self { map })
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| err(&path.display().to_string(), e.to_string()))?;
        Self::parse(&text)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(|s| s.as_str())
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        match self.map.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| err(key, "expected a real number")),
        }
    }

    fn usize_or(&self, key: &str, default: usize) -> Result<usize, ConfigError> {
        match self.map.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| err(key, "expected an integer")),
        }
    }

    fn f64_list(&self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        match self.map.get(key) {
            None => Ok(None),
            Some(v) => v
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| err(key, "expected real numbers")))
                .collect::<Result<Vec<f64>, _>>()
                .map(Some),
        }
    }

    fn field(&self, which: &str, n_comp: usize) -> Result<Arc<dyn StructureField>, ConfigError> {
        let kind_key = format!("field.{which}.kind");
        let kind = self
            .get(&kind_key)
            .ok_or_else(|| err(&kind_key, "missing field kind"))?;
        match kind {
            "identity" => Ok(Arc::new(identity_field(n_comp))),
            "linear" | "quartic" => {
                let mkey = format!("field.{which}.matrix");
                let entries = self
                    .f64_list(&mkey)?
                    .ok_or_else(|| err(&mkey, "missing row-major matrix entries"))?;
                if entries.len() != n_comp * n_comp {
                    return Err(err(
                        &mkey,
                        format!("expected {} entries, got {}", n_comp * n_comp, entries.len()),
                    ));
                }
                let m = nalgebra::DMatrix::from_row_slice(n_comp, n_comp, &entries);
                if kind == "linear" {
                    linear_field(m)
                        .map(|f| Arc::new(f) as Arc<dyn StructureField>)
                        .map_err(|e| err(&mkey, e.to_string()))
                } else {
                    quartic_field(m)
                        .map(|f| Arc::new(f) as Arc<dyn StructureField>)
                        .map_err(|e| err(&mkey, e.to_string()))
                }
            }
            "p_laplace" => {
                let p = self.f64_or(&format!("field.{which}.p"), 2.0)?;
                let mu = self.f64_or(&format!("field.{which}.mu"), 0.0)?;
                p_laplace_field(p, mu)
                    .map(|f| Arc::new(f) as Arc<dyn StructureField>)
                    .map_err(|e| err(&kind_key, e.to_string()))
            }
            other => Err(err(&kind_key, format!("unknown field kind `{other}`"))),
        }
    }

    /// Assemble the full problem description.
    pub fn problem(&self) -> Result<Problem, ConfigError> {
        let dim = self.usize_or("mesh.dim", 3)?;
        if dim != 2 && dim != 3 {
            return Err(err("mesh.dim", "mesh dimension must be 2 or 3"));
        }
        let level = self.usize_or("mesh.level", 2)? as u32;
        let n_comp = self.usize_or("components", 3)?;
        let p = self.f64_or("p", 2.0)?;
        let mesh = unit_cube_mesh(dim, level)
            .map_err(|e| err("mesh.level", e.to_string()))?;
        let a = self.field("a", n_comp)?;
        let b = self.field("b", n_comp)?;
        let mut problem = Problem::new(a, b, Arc::new(mesh), n_comp, p);

        problem.gamma = match self.get("gamma") {
            None | Some("auto") => Gamma::Auto,
            Some(v) => Gamma::Fixed(
                v.parse()
                    .map_err(|_| err("gamma", "expected `auto` or a positive real"))?,
            ),
        };
        problem.seed = self.usize_or("seed", 42)? as u64;

        match self.get("rhs.flux") {
            None | Some("none") => {}
            Some("sine") => {
                let coeffs = self
                    .f64_list("rhs.flux.coeffs")?
                    .ok_or_else(|| err("rhs.flux.coeffs", "missing coefficients"))?;
                if coeffs.len() != n_comp {
                    return Err(err(
                        "rhs.flux.coeffs",
                        format!("expected {n_comp} coefficients"),
                    ));
                }
                if dim != 3 {
                    return Err(err("rhs.flux", "sine flux is defined on the unit cube"));
                }
                problem.flux = Some(sine_flux_with_coeffs(coeffs));
            }
            Some(other) => return Err(err("rhs.flux", format!("unknown flux `{other}`"))),
        }
        match self.get("rhs.source") {
            None | Some("none") => {}
            Some("poly") => {
                if dim != 3 || n_comp != 3 {
                    return Err(err("rhs.source", "poly source needs dim = 3, components = 3"));
                }
                problem.source = Some(koshelev::experiments::poly_source());
            }
            Some(other) => return Err(err("rhs.source", format!("unknown source `{other}`"))),
        }
        let lo = self.f64_or("lower_order", 0.0)?;
        if lo > 0.0 {
            problem.lower_order_power = Some(lo);
        }
        if let Some(lq) = self.f64_list("lq")? {
            problem.lq_diagnostics = lq;
        }
        Ok(problem)
    }

    pub fn stop(&self) -> Result<koshelev::iteration::StopRule, ConfigError> {
        Ok(koshelev::iteration::StopRule {
            tol: self.f64_or("stop.tol", 1e-9)?,
            max_iter: self.usize_or("stop.max_iter", 200)?,
        })
    }

    pub fn step_config(&self) -> Result<koshelev::step::StepConfig, ConfigError> {
        let mut cfg = koshelev::step::StepConfig::default();
        cfg.newton_tol = self.f64_or("solver.newton_tol", cfg.newton_tol)?;
        cfg.linear_tol = self.f64_or("solver.linear_tol", cfg.linear_tol)?;
        cfg.max_newton = self.usize_or("solver.max_newton", cfg.max_newton)?;
        Ok(cfg)
    }
}

/// F rows = coeff_alpha * grad(sine product); generalizes the experiment flux
/// to configurable coefficients.
fn sine_fl_grad(x: &[f64], g: &mut [f64; 3]) {
    use std::f64::consts::TAU;
    let (s0, c0) = (TAU * x[0]).sin_cos();
    let (s1, c1) = (TAU * x[1]).sin_cos();
    let (s2, c2) = (TAU * x[2]).sin_cos();
    g[0] = TAU * c0 * s1 * s2;
    g[1] = TAU * s0 * c1 * s2;
    g[2] = TAU * s0 * s1 * c2;
}

fn sine_flux_with_coeffs(coeffs: Vec<f64>) -> koshelev::iteration::FluxFn {
    Arc::new(move |x: &[f64], out: &mut [f64]| {
        let mut g = [0.0; 3];
        sine_fl_grad(x, &mut g);
        for (alpha, c) in coeffs.iter().enumerate() {
            for d in 0..3 {
                out[alpha * 3 + d] = c * g[d];
            }
        }
    })
}
