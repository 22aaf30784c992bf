use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bkm_core::geometry::{bkm_gram, zero_directions, GramMatrix};
use bkm_core::gibbs::{center, gibbs_state, TangentVector};
use bkm_core::io::{load_model, read_json, write_text, BasisFile, MatrixFile, OperatorSpec};
use bkm_core::suites::{default_models, run_suite, Suite, SuiteConfig, SuiteReport};
use bkm_core::{atlas, build_model, Error, Execution, ModelKind, ModelParams};
use clap::{Parser, Subcommand};
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "bkm",
    version,
    about = "Perturbed Gibbs states, the BKM metric and their verification suites"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write an operator spec for a named model.
    Model {
        /// harmonic, dirichlet or custom
        #[arg(long)]
        kind: ModelKind,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        dim: u64,
        #[arg(long, default_value_t = 0.0)]
        beta0: f64,
        /// Box length for the Dirichlet model.
        #[arg(long, default_value_t = std::f64::consts::PI)]
        length: f64,
        /// Matrix file for a custom model.
        #[arg(long)]
        entries: Option<PathBuf>,
        /// Shift a custom matrix up so that its spectrum starts at 1.
        #[arg(long)]
        auto_shift: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a named verification suite, or `all`.
    Verify {
        #[arg(value_name = "SUITE", required_unless_present = "suite")]
        name: Option<String>,
        #[arg(long, conflicts_with = "name")]
        suite: Option<String>,
        /// Operator spec; defaults to harmonic models at dims 2, 4, 8, 16.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Either a value for the suite's primary tolerance or `key=value`; repeatable.
        #[arg(long)]
        tolerance: Vec<String>,
        #[arg(long, default_value_t = bkm_core::quadrature::DEFAULT_NODES)]
        nodes: usize,
        /// Number of cases (default depends on the suite).
        #[arg(long)]
        cases: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Reports are always JSON; accepted for symmetry with the other commands.
        #[arg(long)]
        json: bool,
        /// Include wall time in the report (breaks byte reproducibility).
        #[arg(long)]
        timing: bool,
        #[arg(long)]
        sequential: bool,
    },
    /// Gram matrix of the BKM metric at the model's base state over a basis file.
    BkmGram {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        basis: PathBuf,
        /// CSV destination; metadata goes next to it with a `.json` extension.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print matrix and metadata as one JSON object instead of CSV.
        #[arg(long)]
        json: bool,
    },
    /// Luxemburg seminorm of a matrix relative to a model.
    Luxemburg {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long, visible_alias = "tolerance", default_value_t = 1e-8)]
        tol: f64,
        #[arg(long)]
        json: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Exit 2: bad input or I/O. Exit 1: a check or computation failed.
enum Failure {
    Usage(String),
    Falsified(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        match e {
            Error::Falsified { .. } | Error::Bisection { .. } | Error::NoConvergence { .. } => {
                Failure::Falsified(e.to_string())
            }
            _ => Failure::Usage(e.to_string()),
        }
    }
}

type Outcome = std::result::Result<ExitCode, Failure>;

fn emit(out: Option<&Path>, text: &str) -> std::result::Result<(), Failure> {
    match out {
        Some(p) => write_text(p, text).map_err(Failure::from),
        None => {
            to_stdout(text);
            Ok(())
        }
    }
}

/// Writes to stdout; a closed pipe (e.g. `| head`) is not an error.
fn to_stdout(text: &str) {
    use std::io::Write;
    let mut lock = std::io::stdout().lock();
    let _ = lock.write_all(text.as_bytes()).and_then(|_| lock.flush());
}

fn cmd_model(
    kind: ModelKind,
    dim: usize,
    beta0: f64,
    length: f64,
    entries: Option<&Path>,
    auto_shift: bool,
    out: Option<&Path>,
) -> Outcome {
    let custom = entries
        .map(|p| read_json::<MatrixFile>(p)?.matrix())
        .transpose()?;
    let params = ModelParams {
        beta0,
        length,
        custom,
        auto_shift,
    };
    let model = build_model(kind, dim, &params)?;
    let spec = OperatorSpec::from_model(&model);
    let text = serde_json::to_string_pretty(&spec).expect("spec serializes") + "\n";
    emit(out, &text)?;
    Ok(ExitCode::SUCCESS)
}

fn parse_tolerances(
    suite: Suite,
    raw: &[String],
) -> std::result::Result<BTreeMap<String, f64>, Failure> {
    let mut map = BTreeMap::new();
    for item in raw {
        let (key, value) = match item.split_once('=') {
            Some((k, v)) => (k.trim().to_string(), v.trim()),
            None => (suite.tolerances()[0].0.to_string(), item.trim()),
        };
        let v: f64 = value.parse().map_err(|_| {
            Failure::Usage(format!("tolerance {item:?}: {value:?} is not a number"))
        })?;
        map.insert(key, v);
    }
    Ok(map)
}

#[allow(clippy::too_many_arguments)]
fn cmd_verify(
    name: &str,
    model: Option<&Path>,
    seed: u64,
    tolerance: &[String],
    nodes: usize,
    cases: Option<usize>,
    out: Option<&Path>,
    timing: bool,
    exec: Execution,
) -> Outcome {
    let suites: Vec<Suite> = if name == "all" {
        Suite::ALL.to_vec()
    } else {
        vec![name.parse::<Suite>()?]
    };
    if name == "all" && !tolerance.is_empty() {
        return Err(Failure::Usage(
            "tolerance overrides need a single suite".into(),
        ));
    }
    let models = match model {
        Some(p) => vec![load_model(p)?],
        None => default_models(),
    };
    let mut reports: Vec<SuiteReport> = Vec::new();
    for suite in suites {
        let config = SuiteConfig {
            seed,
            cases,
            nodes,
            tolerances: parse_tolerances(suite, tolerance)?,
            exec,
        };
        let start = std::time::Instant::now();
        let mut r = run_suite(suite, &models, &config)?;
        if timing {
            r.runtime_ms = Some(start.elapsed().as_millis() as u64);
        }
        eprintln!(
            "{}: {} cases, {} checks, {} failures",
            r.suite,
            r.cases,
            r.checks,
            r.failures.len()
        );
        reports.push(r);
    }
    let text = if reports.len() == 1 {
        reports[0].to_json()
    } else {
        serde_json::to_string_pretty(&reports).expect("reports serialize")
    } + "\n";
    emit(out, &text)?;
    Ok(if reports.iter().all(SuiteReport::passed) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn gram_csv(g: &[Vec<f64>]) -> String {
    g.iter()
        .map(|row| {
            row.iter()
                .map(|v| format!("{v:.16e}"))
                .collect::<Vec<_>>()
                .join(",")
        })
        .map(|line| line + "\n")
        .collect()
}

fn cmd_bkm_gram(model: &Path, basis: &Path, out: Option<&Path>, as_json: bool) -> Outcome {
    let model = load_model(model)?;
    let state = gibbs_state(model.h0())?;
    let raw = read_json::<BasisFile>(basis)?.matrices()?;
    let vectors = raw
        .iter()
        .map(|y| center(&state, y))
        .collect::<Result<Vec<TangentVector>, _>>()?;
    let zero = zero_directions(&vectors);
    let (gram, warning) = match bkm_gram(&state, &vectors) {
        Ok(g) => (g, None),
        Err(Error::RankDeficient {
            gram,
            min_eigenvalue,
            null_combination,
        }) => (
            GramMatrix {
                entries: gram,
                min_eigenvalue: Some(min_eigenvalue),
            },
            Some(json!({"rank_deficient": true, "null_combination": null_combination})),
        ),
        Err(e) => return Err(e.into()),
    };
    let meta = json!({
        "dim": model.dim(),
        "basis_size": vectors.len(),
        "min_eigenvalue": gram.min_eigenvalue,
        "centering_means": vectors.iter().map(|v| v.mean).collect::<Vec<_>>(),
        "zero_centered_vectors": zero,
        "note": if zero.is_empty() { None } else {
            Some("vectors listed in zero_centered_vectors are multiples of the identity; their Gram rows and columns are zero")
        },
        "warning": warning,
    });
    if warning.is_some() {
        eprintln!(
            "warning: Gram matrix is rank deficient (min eigenvalue {:e})",
            gram.min_eigenvalue.unwrap_or(0.0)
        );
    }
    if as_json {
        let text = serde_json::to_string_pretty(&json!({"gram": gram.entries, "metadata": meta}))
            .expect("serializes")
            + "\n";
        emit(out, &text)?;
        return Ok(ExitCode::SUCCESS);
    }
    let meta_text = serde_json::to_string_pretty(&meta).expect("serializes") + "\n";
    match out {
        Some(p) => {
            write_text(p, &gram_csv(&gram.entries))?;
            write_text(&p.with_extension("json"), &meta_text)?;
        }
        None => {
            to_stdout(&gram_csv(&gram.entries));
            eprint!("{meta_text}");
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_luxemburg(
    model: &Path,
    matrix: &Path,
    tol: f64,
    as_json: bool,
    out: Option<&Path>,
) -> Outcome {
    let model = load_model(model)?;
    let x = read_json::<MatrixFile>(matrix)?.matrix()?;
    x.check_dim(model.dim())?;
    let r = atlas::luxemburg(&model, &x, tol)?;
    let text = if as_json {
        serde_json::to_string_pretty(&json!({
            "value": r.value,
            "bracket": [r.bracket.0, r.bracket.1],
            "iterations": r.iterations,
            "tol": tol,
        }))
        .expect("serializes")
            + "\n"
    } else {
        format!(
            "r* = {:.16e}\nbracket = [{:.16e}, {:.16e}]\niterations = {}\n",
            r.value, r.bracket.0, r.bracket.1, r.iterations
        )
    };
    emit(out, &text)?;
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Model {
            kind,
            dim,
            beta0,
            length,
            entries,
            auto_shift,
            out,
        } => cmd_model(
            kind,
            dim as usize,
            beta0,
            length,
            entries.as_deref(),
            auto_shift,
            out.as_deref(),
        ),
        Command::Verify {
            name,
            suite,
            model,
            seed,
            tolerance,
            nodes,
            cases,
            out,
            json: _,
            timing,
            sequential,
        } => {
            let name = name.or(suite).expect("clap requires one");
            let exec = if sequential {
                Execution::Sequential
            } else {
                Execution::Parallel
            };
            cmd_verify(
                &name,
                model.as_deref(),
                seed,
                &tolerance,
                nodes,
                cases,
                out.as_deref(),
                timing,
                exec,
            )
        }
        Command::BkmGram {
            model,
            basis,
            out,
            json,
        } => cmd_bkm_gram(&model, &basis, out.as_deref(), json),
        Command::Luxemburg {
            model,
            matrix,
            tol,
            json,
            out,
        } => cmd_luxemburg(&model, &matrix, tol, json, out.as_deref()),
    }
}

fn thread_cap() -> std::result::Result<Option<usize>, Failure> {
    let Ok(raw) = std::env::var("BKM_SUITE_THREADS") else {
        return Ok(None);
    };
    raw.parse()
        .ok()
        .filter(|&n: &usize| n > 0)
        .map(Some)
        .ok_or_else(|| {
            Failure::Usage(format!(
                "BKM_SUITE_THREADS={raw:?} is not a positive integer"
            ))
        })
}

#[cfg(feature = "parallel")]
fn with_thread_cap(cli: Cli) -> Outcome {
    let Some(threads) = thread_cap()? else {
        return run(cli);
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Failure::Usage(format!("thread pool: {e}")))?;
    pool.install(|| run(cli))
}

// sequential build: the cap is validated but everything runs on one thread anyway
#[cfg(not(feature = "parallel"))]
fn with_thread_cap(cli: Cli) -> Outcome {
    thread_cap()?;
    run(cli)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match with_thread_cap(cli) {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Falsified(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
