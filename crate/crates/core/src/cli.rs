//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage or I/O error, 2 invalid scenario or
//! parameters, 3 solver diverged.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::dispatch::{
    analytic_dispatch, brute_force_dispatch, dual_ascent_solve, dual_contraction_factor,
    mom_contraction_factor, mom_solve, stability_bound_alpha, StopReason,
};
use crate::dynamics::{settling_time, simulate};
use crate::experiments::{
    check_euler_equivalence, compare_convergence, sweep, verify_steady_state_optimality,
    EquivalencePair, SettlingStudy, SweepParam,
};
use crate::model::{ControllerConfig, ControllerKind};
use crate::scenario_file::{parse_scenario_file, FileError, ScenarioFile};
use crate::trace_csv::{write_iteration_csv, write_simulation_csv, write_sweep_csv};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_DIVERGED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "agc-dispatch", version, about = "Economic dispatch and cost-tuned secondary frequency control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse and validate a scenario file.
    Validate { file: PathBuf },
    /// Closed-form economic dispatch.
    Dispatch {
        file: PathBuf,
        /// Also run the exhaustive grid oracle and report the per-coordinate gap.
        #[arg(long)]
        oracle: bool,
        #[arg(long, default_value_t = 0.01)]
        grid_step: f64,
    },
    /// Run dual ascent or the method of multipliers.
    Iterate {
        file: PathBuf,
        #[arg(long, value_enum)]
        method: Method,
        #[arg(long, conflicts_with = "rho")]
        alpha: Option<f64>,
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long)]
        lambda0: Option<f64>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        max_iter: Option<usize>,
        #[arg(long)]
        out_csv: Option<PathBuf>,
    },
    /// Simulate the closed loop.
    Simulate {
        file: PathBuf,
        #[arg(long, value_enum)]
        controller: Option<ControllerArg>,
        #[arg(long)]
        h: Option<f64>,
        #[arg(long)]
        t_end: Option<f64>,
        /// Settling band on |delta_f|, Hz.
        #[arg(long, default_value_t = 1e-4)]
        eps: f64,
        /// Tolerance of the steady-state optimality check.
        #[arg(long, default_value_t = 1e-6)]
        check_tol: f64,
        #[arg(long)]
        out_csv: Option<PathBuf>,
    },
    /// Compare both solvers and both controllers.
    Compare {
        file: PathBuf,
        #[arg(long, default_value_t = 1e-4)]
        eps: f64,
    },
    /// Sweep one parameter.
    Sweep {
        file: PathBuf,
        #[arg(long)]
        param: SweepParam,
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        values: Vec<f64>,
        #[arg(long)]
        out_csv: Option<PathBuf>,
    },
    /// Compare a discrete iteration with forward Euler on its controller (h = tau).
    Equivalence {
        file: PathBuf,
        #[arg(long, value_enum)]
        pair: PairArg,
        #[arg(long, default_value_t = 200)]
        steps: usize,
        #[arg(long)]
        lambda0: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Method {
    Dual,
    Mom,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ControllerArg {
    Integral,
    Pi,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PairArg {
    DualIntegral,
    MomPi,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Invalid(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Invalid(_) => EXIT_INVALID,
        }
    }
}

impl From<crate::Error> for Failure {
    fn from(e: crate::Error) -> Self {
        Failure::Invalid(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Usage(format!("i/o error: {e}"))
    }
}

/// Runs the CLI against the process's stdout/stderr.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let stdout = io::stdout();
    let stderr = io::stderr();
    run(argv, &mut stdout.lock(), &mut stderr.lock())
}

pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                return EXIT_USAGE;
            }
            let _ = write!(out, "{}", e.render());
            return EXIT_OK;
        }
    };
    match execute(cli.command, out) {
        Ok(code) => code,
        Err(f) => {
            let msg = match &f {
                Failure::Usage(m) | Failure::Invalid(m) => m,
            };
            let _ = writeln!(err, "error: {msg}");
            f.code()
        }
    }
}

fn load(path: &Path) -> Result<ScenarioFile, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
    parse_scenario_file(&text).map_err(|e| match e {
        FileError::Invalid(v) => Failure::Invalid(format!("{}: {v}", path.display())),
        other => Failure::Invalid(format!("{}: {other}", path.display())),
    })
}

fn emit(out: &mut dyn Write, value: &impl Serialize) -> Result<(), Failure> {
    serde_json::to_writer_pretty(&mut *out, value).map_err(io::Error::from)?;
    writeln!(out)?;
    Ok(())
}

fn csv_sink(path: &Path) -> Result<BufWriter<File>, Failure> {
    let f = File::create(path)
        .map_err(|e| Failure::Usage(format!("cannot create {}: {e}", path.display())))?;
    Ok(BufWriter::new(f))
}

fn finite_opt(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

fn execute(cmd: Command, out: &mut dyn Write) -> Result<i32, Failure> {
    match cmd {
        Command::Validate { file } => {
            let f = load(&file)?;
            let s = f.scenario();
            emit(
                out,
                &json!({
                    "valid": true,
                    "generators": s.n_generators(),
                    "total_load": s.total_load(),
                }),
            )?;
            Ok(EXIT_OK)
        }

        Command::Dispatch {
            file,
            oracle,
            grid_step,
        } => {
            let s = load(&file)?.scenario();
            let sol = analytic_dispatch(&s);
            let mut summary = json!({
                "lambda_star": sol.lambda_star,
                "p": sol.p,
                "total_cost": sol.total_cost,
            });
            if oracle {
                let bf = brute_force_dispatch(&s, grid_step)?;
                let gap = bf
                    .p
                    .iter()
                    .zip(&sol.p)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                summary["oracle"] = json!({
                    "grid_step": grid_step,
                    "p": bf.p,
                    "lambda_star": bf.lambda_star,
                    "total_cost": bf.total_cost,
                    "max_gap": gap,
                });
            }
            emit(out, &summary)?;
            Ok(EXIT_OK)
        }

        Command::Iterate {
            file,
            method,
            alpha,
            rho,
            lambda0,
            tol,
            max_iter,
            out_csv,
        } => {
            let f = load(&file)?;
            let s = f.scenario();
            let mut opts = f.iter_options();
            if let Some(l) = lambda0 {
                opts.lambda0 = Some(l);
            }
            if let Some(t) = tol {
                opts.tol = t;
            }
            if let Some(m) = max_iter {
                opts.max_iter = m;
            }
            let (name, step, trace, predicted) = match method {
                Method::Dual => {
                    if rho.is_some() {
                        return Err(Failure::Usage("--rho applies to --method mom".into()));
                    }
                    let a = alpha.unwrap_or(f.alpha());
                    let tr = dual_ascent_solve(&s, a, &opts)?;
                    ("dual", a, tr, dual_contraction_factor(&s, a))
                }
                Method::Mom => {
                    if alpha.is_some() {
                        return Err(Failure::Usage("--alpha applies to --method dual".into()));
                    }
                    let r = rho.unwrap_or(f.rho());
                    let tr = mom_solve(&s, r, &opts)?;
                    ("mom", r, tr, mom_contraction_factor(&s, r))
                }
            };
            if let Some(path) = out_csv {
                write_iteration_csv(&trace, s.n_generators(), csv_sink(&path)?)?;
            }
            let mut summary = json!({
                "method": name,
                "step": step,
                "converged": trace.converged,
                "stop_reason": trace.stop_reason,
                "iterations": trace.iterations(),
                "final": trace.last(),
                "empirical_ratio": trace.empirical_ratio(opts.tol),
                "predicted_ratio": predicted,
            });
            if name == "dual" {
                summary["stability_bound_alpha"] = json!(stability_bound_alpha(&s));
            }
            emit(out, &summary)?;
            Ok(if trace.stop_reason == StopReason::Diverged {
                EXIT_DIVERGED
            } else {
                EXIT_OK
            })
        }

        Command::Simulate {
            file,
            controller,
            h,
            t_end,
            eps,
            check_tol,
            out_csv,
        } => {
            let f = load(&file)?;
            let s = f.scenario();
            let mut cfg = f.controller();
            if let Some(c) = controller {
                cfg = ControllerConfig::from_scenario(
                    match c {
                        ControllerArg::Integral => ControllerKind::Integral,
                        ControllerArg::Pi => ControllerKind::ProportionalIntegral,
                    },
                    &s,
                );
            }
            let mut opts = f.sim_options();
            if let Some(h) = h {
                opts.h = h;
            }
            if let Some(t) = t_end {
                opts.t_end = t;
            }
            let model = f.frequency_model();
            let trace = simulate(&s, &cfg, model, &opts, &f.events())?;
            if let Some(path) = out_csv {
                write_simulation_csv(&trace, &s, csv_sink(&path)?)?;
            }
            let report = verify_steady_state_optimality(&trace, &s, check_tol);
            emit(
                out,
                &json!({
                    "controller": cfg,
                    "model": model,
                    "options": opts,
                    "samples": trace.samples.len(),
                    "final": trace.last(),
                    "settling_time": finite_opt(settling_time(&trace, eps)),
                    "eps": eps,
                    "steady_state": report,
                }),
            )?;
            Ok(EXIT_OK)
        }

        Command::Compare { file, eps } => {
            let f = load(&file)?;
            let s = f.scenario();
            let study = study_for(&f, eps);
            let report = compare_convergence(&s, f.alpha(), f.rho(), &f.iter_options(), &study)?;
            emit(out, &report)?;
            Ok(EXIT_OK)
        }

        Command::Sweep {
            file,
            param,
            values,
            out_csv,
        } => {
            let f = load(&file)?;
            let s = f.scenario();
            let explicit = f.simulation.as_ref().is_some_and(|b| !b.events.is_empty());
            let study = explicit.then(|| study_for(&f, 1e-4));
            let rows = sweep(&s, param, &values, &f.iter_options(), study.as_ref())?;
            if let Some(path) = out_csv {
                write_sweep_csv(&rows, csv_sink(&path)?)?;
            }
            emit(out, &json!({ "param": param, "rows": rows }))?;
            Ok(EXIT_OK)
        }

        Command::Equivalence {
            file,
            pair,
            steps,
            lambda0,
        } => {
            let f = load(&file)?;
            let s = f.scenario();
            let pair = match pair {
                PairArg::DualIntegral => EquivalencePair::DualVsIntegral,
                PairArg::MomPi => EquivalencePair::MomVsPi,
            };
            let lambda0 = lambda0.or(f.iter_options().lambda0);
            let report = check_euler_equivalence(&s, pair, steps, lambda0)?;
            emit(out, &report)?;
            Ok(EXIT_OK)
        }
    }
}

/// The file's events and simulation options when it has events, otherwise the default study.
fn study_for(f: &ScenarioFile, eps: f64) -> SettlingStudy {
    let s = f.scenario();
    let mut study = SettlingStudy::default_for(&s);
    let events = f.events();
    if !events.is_empty() {
        study.events = events;
    }
    study.sim = f.sim_options();
    study.eps = eps;
    study
}
