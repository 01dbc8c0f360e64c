//! The `qre` command-line driver.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde_json::{json, Value};

use super::format::{estimation_json, feasibility_json, relaxation_json, round_significant, ProblemFile};
use super::simulate::{simulate_measurements, simulated_problem, SimulationSpec};
use crate::constraints::{default_dep_tol, orthonormalize};
use crate::entropy::{estimate, Relaxation};
use crate::error::{Error, Result};
use crate::feasibility::{
    contraction_factor, default_amplification, relax_isotropic, relax_weighted_problem, solve_min_eigen, Classification,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;

/// Digits kept in printed numbers unless `--raw` is given.
const SIGNIFICANT_DIGITS: usize = 12;

#[derive(Debug, Parser)]
#[command(name = "qre", version, about = "Minimum relative entropy quantum state estimation")]
struct Cli {
    /// Print numbers at full precision instead of 12 significant digits.
    #[arg(long, global = true)]
    raw: bool,
    /// Write the result to this file instead of standard output.
    #[arg(long, global = true, value_name = "PATH")]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Target {
    /// Problem file.
    #[arg(required_unless_present = "batch", conflicts_with = "batch")]
    input: Option<PathBuf>,
    /// Process every `*.json` file in a directory. Parallelism is capped by
    /// QRE_NUM_THREADS (serial when unset).
    #[arg(long, value_name = "DIR")]
    batch: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Decide feasibility of the constraints.
    Feasibility(Target),
    /// Estimate the state.
    Estimate {
        #[command(flatten)]
        target: Target,
        /// Relax infeasible data instead of exiting with status 2.
        #[arg(long)]
        auto_relax: bool,
    },
    /// Print relaxed estimates for infeasible data.
    Relax {
        input: PathBuf,
    },
    /// Simulate measurement data and print a problem file.
    Simulate {
        input: PathBuf,
        /// Attach reliability indexes derived from the sample variances.
        #[arg(long)]
        reliability: bool,
    },
}

/// Result of one command: a document and an exit code.
struct Outcome {
    doc: Value,
    code: i32,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::InvalidConstraints(format!("{}: {e}", path.display())))
}

fn load_problem(path: &Path) -> Result<ProblemFile> {
    ProblemFile::from_json(&read(path)?).map_err(|e| Error::InvalidConstraints(format!("{}: {e}", path.display())))
}

fn run_feasibility(path: &Path) -> Result<Outcome> {
    let pf = load_problem(path)?;
    let cs = pf.constraint_set()?;
    let ob = orthonormalize(&cs, pf.options.dep_tol.unwrap_or_else(|| default_dep_tol(cs.dim())))?;
    let report = solve_min_eigen(&ob, &pf.options.barrier)?;
    let code = if report.classification == Classification::Infeasible {
        EXIT_INFEASIBLE
    } else {
        EXIT_OK
    };
    Ok(Outcome {
        doc: feasibility_json(&report),
        code,
    })
}

fn run_estimate(path: &Path, auto_relax: bool) -> Result<Outcome> {
    let pf = load_problem(path)?;
    let cs = pf.constraint_set()?;
    let prior = pf.prior()?;
    let mut cfg = pf.options;
    cfg.allow_relaxation = auto_relax;
    match estimate(&cs, &prior, &cfg) {
        Ok(res) => Ok(Outcome {
            doc: estimation_json(&res, &cs)?,
            code: EXIT_OK,
        }),
        Err(Error::Infeasible { mu }) => Ok(Outcome {
            doc: json!({
                "classification": "Infeasible",
                "mu": mu,
                "message": "data are infeasible; rerun with --auto-relax to relax them",
            }),
            code: EXIT_INFEASIBLE,
        }),
        Err(e) => Err(e),
    }
}

fn run_relax(path: &Path) -> Result<Outcome> {
    let pf = load_problem(path)?;
    let cs = pf.constraint_set()?;
    let n = cs.dim();
    let cfg = pf.options;
    let ob = orthonormalize(&cs, cfg.dep_tol.unwrap_or_else(|| default_dep_tol(n)))?;
    let report = solve_min_eigen(&ob, &cfg.barrier)?;
    let (relaxed, relaxation) = if report.classification != Classification::Infeasible {
        (ob, Relaxation::None)
    } else if let Some(d) = cs.reliability() {
        let k = cfg.amplification.unwrap_or_else(|| default_amplification(d));
        let w = relax_weighted_problem(&cs, &ob, k, &cfg.barrier)?;
        let r = Relaxation::Weighted {
            factor: w.factor,
            k,
            mu_amplified: w.mu_amplified,
        };
        (w.problem, r)
    } else {
        let relaxed = relax_isotropic(&ob, &report)?;
        (relaxed, Relaxation::Isotropic {
            factor: contraction_factor(n, report.mu),
        })
    };
    let implied = cs.evaluate(relaxed.rho0())?;
    Ok(Outcome {
        doc: json!({
            "mu": report.mu,
            "classification": feasibility_json(&report)["classification"],
            "factor": relaxation.factor().unwrap_or(1.0),
            "relaxation": relaxation_json(&relaxation),
            "relaxed_estimates": &implied[1..],
        }),
        code: EXIT_OK,
    })
}

fn run_simulate(path: &Path, reliability: bool) -> Result<Outcome> {
    let text = read(path)?;
    let spec: SimulationSpec = serde_json::from_str(&text)
        .map_err(|e| Error::InvalidConstraints(format!("{}: simulation file: {e}", path.display())))?;
    let outcome = simulate_measurements(&spec)?;
    let pf = simulated_problem(&spec, &outcome, reliability);
    Ok(Outcome {
        doc: serde_json::to_value(&pf).expect("problem files serialize"),
        code: EXIT_OK,
    })
}

fn batch_threads() -> Option<usize> {
    std::env::var("QRE_NUM_THREADS").ok()?.trim().parse().ok().filter(|n| *n > 0)
}

fn run_batch(dir: &Path, job: impl Fn(&Path) -> Result<Outcome> + Sync) -> Result<Outcome> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::InvalidConstraints(format!("{}: {e}", dir.display())))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();

    let run_one = |p: &PathBuf| {
        let name = p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        match job(p) {
            Ok(o) => (json!({ "file": name, "exit": o.code, "result": o.doc }), o.code),
            Err(e) => (json!({ "file": name, "exit": EXIT_ERROR, "error": e.to_string() }), EXIT_ERROR),
        }
    };
    let results: Vec<(Value, i32)> = match batch_threads() {
        Some(threads) if threads > 1 => rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::DegenerateInput(format!("thread pool: {e}")))?
            .install(|| files.par_iter().map(run_one).collect()),
        _ => files.iter().map(run_one).collect(),
    };
    let code = results
        .iter()
        .map(|(_, c)| *c)
        .max_by_key(|c| match *c {
            EXIT_ERROR => 2,
            EXIT_INFEASIBLE => 1,
            _ => 0,
        })
        .unwrap_or(EXIT_OK);
    Ok(Outcome {
        doc: Value::Array(results.into_iter().map(|(v, _)| v).collect()),
        code,
    })
}

fn dispatch(command: &Command) -> Result<Outcome> {
    match command {
        Command::Feasibility(t) => match (&t.batch, &t.input) {
            (Some(dir), _) => run_batch(dir, run_feasibility),
            (None, Some(p)) => run_feasibility(p),
            (None, None) => unreachable!("clap requires an input"),
        },
        Command::Estimate { target, auto_relax } => {
            let job = |p: &Path| run_estimate(p, *auto_relax);
            match (&target.batch, &target.input) {
                (Some(dir), _) => run_batch(dir, job),
                (None, Some(p)) => job(p),
                (None, None) => unreachable!("clap requires an input"),
            }
        }
        Command::Relax { input } => run_relax(input),
        Command::Simulate { input, reliability } => run_simulate(input, *reliability),
    }
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn run_cli<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(stderr, "{text}")
            } else {
                write!(stdout, "{text}")
            };
            return code;
        }
    };
    let outcome = match dispatch(&cli.command) {
        Ok(o) => o,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return EXIT_ERROR;
        }
    };
    let mut doc = outcome.doc;
    if !cli.raw {
        round_significant(&mut doc, SIGNIFICANT_DIGITS);
    }
    let text = serde_json::to_string_pretty(&doc).expect("JSON values serialize");
    match &cli.output {
        Some(path) => {
            if let Err(e) = fs::write(path, format!("{text}\n")) {
                let _ = writeln!(stderr, "error: {}: {e}", path.display());
                return EXIT_ERROR;
            }
        }
        None => {
            let _ = writeln!(stdout, "{text}");
        }
    }
    if outcome.code == EXIT_INFEASIBLE {
        let _ = writeln!(stderr, "infeasible constraints");
    }
    outcome.code
}
