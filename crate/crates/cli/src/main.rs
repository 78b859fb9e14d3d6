//! Command-line front end: experiment reproduction, constants reporting,
//! inequality verification, and general solves from config files.
//!
//! Exit codes: 0 success, 1 configuration error, 2 inadmissible problem or
//! failed check, 3 non-convergence.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::Config;
use koshelev::experiments;
use koshelev::fem::P1Function;
use koshelev::iteration::iterate;
use koshelev::oracles::{
    sweep_triangle, sweep_v_young, sweep_vfunc_equiv, triangle_ratio_extremes, SweepConfig,
};
use koshelev::sampling::SampleSpec;

#[derive(Parser)]
#[command(name = "koshelev", version, about = "Iterative solver for quasilinear elliptic systems with p-growth", long_about = None)]
#[command(after_help = "Environment: KOSHELEV_THREADS limits worker threads (all kernels are \
currently sequential; results are identical for any value).")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute and print the spectral constants of a configured field pair.
    Constants {
        #[arg(long)]
        config: PathBuf,
        /// Override the sampling seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Write the CSV row to DIR/constants.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve a configured problem; exports solution table and trace CSV.
    Solve {
        #[arg(long)]
        config: PathBuf,
        /// Run even when the automatic constants report is inadmissible.
        #[arg(long)]
        allow_inadmissible: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reproduce the linear unit-cube experiment (errors and counts table).
    ExperimentLinear {
        /// Mesh levels (repeatable). Default 1 2 3 4.
        #[arg(long = "level")]
        levels: Vec<u32>,
        #[arg(long, default_value_t = 2.0 / 3.0)]
        gamma: f64,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reproduce the nonlinear (quartic) experiment against a direct solve.
    ExperimentNonlinear {
        /// Mesh levels (repeatable). Default 1 2.
        #[arg(long = "level")]
        levels: Vec<u32>,
        #[arg(long, default_value_t = 0.65)]
        gamma: f64,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Multilevel variant of a configured problem over nested meshes.
    Multilevel {
        #[arg(long)]
        config: PathBuf,
        /// Finest level; the configured mesh.level is the coarsest.
        #[arg(long)]
        k_max: u32,
        /// Tolerance at the finest level; each coarser level is 10x looser.
        #[arg(long, default_value_t = 1e-7)]
        tol: f64,
        #[arg(long)]
        allow_inadmissible: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Verify the quantitative inequalities by randomized sweeps.
    VerifyLemmas {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        /// Write a worst-slack CSV to DIR/lemma_slack.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Audit a configured field against its declared growth and ellipticity.
    CheckField {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        /// Which field to audit: a or b.
        #[arg(long, default_value = "a")]
        field: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let _ = koshelev::thread_count();
    match run(cli) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("{msg}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, String> {
    match cli.command {
        Command::Constants { config, seed, out } => cmd_constants(&config, seed, out.as_deref()),
        Command::Solve {
            config,
            allow_inadmissible,
            out,
        } => cmd_solve(&config, allow_inadmissible, out.as_deref()),
        Command::ExperimentLinear {
            levels,
            gamma,
            tol,
            out,
        } => cmd_experiment_linear(&levels, gamma, tol, out.as_deref()),
        Command::ExperimentNonlinear {
            levels,
            gamma,
            tol,
            out,
        } => cmd_experiment_nonlinear(&levels, gamma, tol, out.as_deref()),
        Command::Multilevel {
            config,
            k_max,
            tol,
            allow_inadmissible,
            out,
        } => cmd_multilevel(&config, k_max, tol, allow_inadmissible, out.as_deref()),
        Command::VerifyLemmas { seed, samples, out } => cmd_verify_lemmas(seed, samples, out.as_deref()),
        Command::CheckField {
            config,
            seed,
            samples,
            field,
        } => cmd_check_field(&config, seed, samples, &field),
    }
}

fn write_out(dir: Option<&Path>, name: &str, content: &str) -> Result<(), String> {
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir).map_err(|e| e.to_string())?;
        std::fs::write(dir.join(name), content).map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn cmd_constants(path: &Path, seed: Option<u64>, out: Option<&Path>) -> Result<ExitCode, String> {
    let cfg = Config::load(path).map_err(|e| e.to_string())?;
    let mut problem = cfg.problem().map_err(|e| e.to_string())?;
    if let Some(s) = seed {
        problem.seed = s;
    }
    let report = problem.constants().map_err(|e| e.to_string())?;
    println!("{report}");
    let csv = format!(
        "{}\n{}\n",
        koshelev::constants::ConstantsReport::csv_header(),
        report.csv_row()
    );
    print!("{csv}");
    write_out(out, "constants.csv", &csv)?;
    Ok(if report.admissible {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}

fn cmd_solve(path: &Path, allow_inadmissible: bool, out: Option<&Path>) -> Result<ExitCode, String> {
    let cfg = Config::load(path).map_err(|e| e.to_string())?;
    let mut problem = cfg.problem().map_err(|e| e.to_string())?;
    problem.allow_inadmissible |= allow_inadmissible;
    let stop = cfg.stop().map_err(|e| e.to_string())?;
    let step_cfg = cfg.step_config().map_err(|e| e.to_string())?;
    let u0 = P1Function::zeros(problem.mesh.clone(), problem.n_comp);
    let result = iterate(&problem, u0, &stop, &step_cfg);
    let (u, trace) = match result {
        Ok(pair) => pair,
        Err(koshelev::Error::Inadmissible { rate }) => {
            eprintln!("inadmissible problem (theoretical rate {rate:.5}); re-run with --allow-inadmissible or an explicit gamma");
            return Ok(ExitCode::from(2));
        }
        Err(e) => return Err(e.to_string()),
    };
    if matches!(problem.gamma, koshelev::iteration::Gamma::Fixed(_)) {
        if let Ok(report) = problem.constants() {
            if !report.admissible {
                eprintln!(
                    "note: pair is not admissible by the theory (rate {:.5}); proceeding with the requested gamma",
                    report.rate
                );
            }
        }
    }

    let trace_csv = trace.to_csv();
    let mut solution_txt = Vec::new();
    u.write_table(&mut solution_txt).map_err(|e| e.to_string())?;
    let solution_txt = String::from_utf8(solution_txt).expect("ascii");
    let sol_name = cfg.get("export.solution").unwrap_or("solution.txt").to_string();
    let trace_name = cfg.get("export.trace").unwrap_or("trace.csv").to_string();
    write_out(out, &sol_name, &solution_txt)?;
    write_out(out, &trace_name, &trace_csv)?;
    if out.is_none() {
        print!("{trace_csv}");
    }
    println!(
        "iterations {}  final diff {:.5e}  converged {}",
        trace.iterations(),
        trace.last_diff().unwrap_or(f64::NAN),
        trace.converged
    );
    Ok(if trace.converged {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(3)
    })
}

fn cmd_experiment_linear(
    levels: &[u32],
    gamma: f64,
    tol: f64,
    out: Option<&Path>,
) -> Result<ExitCode, String> {
    let levels: Vec<u32> = if levels.is_empty() {
        vec![1, 2, 3, 4]
    } else {
        levels.to_vec()
    };
    let cfg = koshelev::step::StepConfig::default();
    let results = experiments::linear_experiment(&levels, gamma, tol, &cfg).map_err(|e| e.to_string())?;

    println!("linear experiment, gamma = {gamma:.5}, tol = {tol:.1e}");
    println!("{:>6} {:>12} {:>12} {:>11}", "level", "h", "H1 error", "iterations");
    let mut csv = String::from("level,h,error_h1,iterations\n");
    for r in &results {
        println!(
            "{:>6} {:>12} {:>12.5} {:>11}",
            r.level,
            format!("2^-{}", r.level),
            r.error_h1,
            r.iterations
        );
        csv.push_str(&format!(
            "{},{:.16e},{:.16e},{}\n",
            r.level, r.h, r.error_h1, r.iterations
        ));
    }
    write_out(out, "experiment_linear.csv", &csv)?;
    if let Some(dir) = out {
        for r in &results {
            write_out(Some(dir), &format!("trace_level{}.csv", r.level), &r.trace.to_csv())?;
        }
    } else {
        print!("{csv}");
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_experiment_nonlinear(
    levels: &[u32],
    gamma: f64,
    tol: f64,
    out: Option<&Path>,
) -> Result<ExitCode, String> {
    let levels: Vec<u32> = if levels.is_empty() {
        vec![1, 2]
    } else {
        levels.to_vec()
    };
    let cfg = koshelev::step::StepConfig::default();
    let results =
        experiments::nonlinear_experiment(&levels, gamma, tol, &cfg).map_err(|e| e.to_string())?;

    println!("nonlinear experiment, gamma = {gamma:.5}, tol = {tol:.1e}");
    println!(
        "{:>6} {:>11} {:>16} {:>12}",
        "level", "iterations", "final distance", "decaying"
    );
    let mut ok = true;
    for r in &results {
        let decaying = r.distances.first().unwrap() > r.distances.last().unwrap();
        ok &= decaying && r.final_distance < 1e-6;
        println!(
            "{:>6} {:>11} {:>16.5e} {:>12}",
            r.level, r.iterations, r.final_distance, decaying
        );
        let mut csv = String::from("n,distance_h1\n");
        for (i, d) in r.distances.iter().enumerate() {
            csv.push_str(&format!("{},{d:.16e}\n", i + 1));
        }
        write_out(out, &format!("distance_level{}.csv", r.level), &csv)?;
        write_out(out, &format!("trace_level{}.csv", r.level), &r.trace.to_csv())?;
        if out.is_none() {
            print!("{csv}");
        }
    }
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(3) })
}

fn cmd_multilevel(
    path: &Path,
    k_max: u32,
    tol: f64,
    allow_inadmissible: bool,
    out: Option<&Path>,
) -> Result<ExitCode, String> {
    let cfg = Config::load(path).map_err(|e| e.to_string())?;
    let mut problem = cfg.problem().map_err(|e| e.to_string())?;
    problem.allow_inadmissible |= allow_inadmissible;
    let step_cfg = cfg.step_config().map_err(|e| e.to_string())?;
    let k0 = problem.mesh.level();
    if k_max < k0 {
        return Err(format!("k_max {k_max} below the configured mesh.level {k0}"));
    }
    let tols: Vec<f64> = (k0..=k_max)
        .map(|k| tol * 10f64.powi((k_max - k) as i32))
        .collect();
    let run = match koshelev::iteration::multilevel(&problem, k_max, &tols, 500, &step_cfg) {
        Ok(run) => run,
        Err(koshelev::Error::Inadmissible { rate }) => {
            eprintln!("inadmissible problem (theoretical rate {rate:.5})");
            return Ok(ExitCode::from(2));
        }
        Err(e) => return Err(e.to_string()),
    };
    println!("multilevel run, levels {k0}..={k_max}");
    for (lvl, trace) in run.levels.iter().zip(&run.traces) {
        println!(
            "  level {lvl}: {} iterations, final diff {:.5e}",
            trace.iterations(),
            trace.last_diff().unwrap_or(f64::NAN)
        );
    }
    let mut solution_txt = Vec::new();
    run.solution
        .write_table(&mut solution_txt)
        .map_err(|e| e.to_string())?;
    write_out(out, "solution.txt", &String::from_utf8(solution_txt).expect("ascii"))?;
    for (lvl, trace) in run.levels.iter().zip(&run.traces) {
        write_out(out, &format!("trace_level{lvl}.csv"), &trace.to_csv())?;
    }
    let converged = run.traces.last().map(|t| t.converged).unwrap_or(false);
    Ok(if converged {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(3)
    })
}

fn cmd_verify_lemmas(seed: u64, samples: usize, out: Option<&Path>) -> Result<ExitCode, String> {
    let cfg = SweepConfig { seed, samples };
    let t0 = std::time::Instant::now();
    let vfunc = sweep_vfunc_equiv(cfg).map_err(|e| e.to_string())?;
    let young = sweep_v_young(cfg);
    let triangle = sweep_triangle(cfg);
    let (lo, hi) = triangle_ratio_extremes(SweepConfig {
        seed,
        samples: samples.max(20_000),
    });
    let lo_exact = (3.0 - 5.0f64.sqrt()) / 2.0;
    let hi_exact = (3.0 + 5.0f64.sqrt()) / 2.0;
    let sharp_ok = (lo - lo_exact).abs() <= 1e-3 && (hi - hi_exact).abs() <= 1e-3;

    println!("{:<28} {:>9} {:>11} {:>14}", "check", "samples", "violations", "worst slack");
    let mut rows = vec![
        ("line-integral equivalence", vfunc.samples, vfunc.violations, vfunc.worst_slack),
        ("young-type inequality", young.samples, young.violations, young.worst_slack),
        ("triangle estimate", triangle.samples, triangle.violations, triangle.worst_slack),
    ];
    let mut all_ok = sharp_ok;
    for (name, n, viol, worst) in &rows {
        println!("{name:<28} {n:>9} {viol:>11} {worst:>14.3e}");
        all_ok &= *viol == 0;
    }
    println!(
        "{:<28} {:>9} {:>11} {:>14}",
        "triangle sharpness",
        "-",
        if sharp_ok { 0 } else { 1 },
        format!("{:.1e}", (lo - lo_exact).abs().max((hi - hi_exact).abs()))
    );
    println!("elapsed {:?}", t0.elapsed());

    rows.push(("triangle sharpness", 0, usize::from(!sharp_ok), (lo - lo_exact).abs().max((hi - hi_exact).abs())));
    let mut csv = String::from("check,samples,violations,worst_slack\n");
    for (name, n, viol, worst) in &rows {
        csv.push_str(&format!("{name},{n},{viol},{worst:.16e}\n"));
    }
    write_out(out, "lemma_slack.csv", &csv)?;
    Ok(if all_ok { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn cmd_check_field(path: &Path, seed: u64, samples: usize, which: &str) -> Result<ExitCode, String> {
    let cfg = Config::load(path).map_err(|e| e.to_string())?;
    let problem = cfg.problem().map_err(|e| e.to_string())?;
    let field = match which {
        "a" => problem.a.clone(),
        "b" => problem.b.clone(),
        other => return Err(format!("--field must be `a` or `b`, got `{other}`")),
    };
    let spec = SampleSpec::new(seed, problem.n_comp, problem.mesh.dim(), samples)
        .with_mu(field.meta().mu);
    let report = koshelev::fields::field_check(field.as_ref(), &spec);
    println!(
        "field {which}: ellipticity {} (worst margin {:.3e}), growth {} (worst margin {:.3e}), jacobian-fd {} (worst {:.3e})",
        report.ellipticity_ok,
        report.worst_ellipticity,
        report.growth_ok,
        report.worst_growth,
        report.jacobian_fd_ok,
        report.worst_fd
    );
    if let Some(f) = &report.failure {
        println!(
            "first failure: {} at |z| = {:.5e}, x = {:?}, detail {:.5e}",
            f.which, f.z_norm, f.x, f.detail
        );
    }
    Ok(if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}
