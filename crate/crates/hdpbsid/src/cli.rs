//! Command-line front end. Exit codes: 0 success, 1 identification or
//! campaign failure, 2 malformed input.

use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use hdpbsid_core::hermite::SampledSignal;
use hdpbsid_core::ident::{identify, IdentResult, LsDiagnostics};
use hdpbsid_core::lti::eigenvalues;
use hdpbsid_core::Error as CoreError;
use nalgebra::Complex;
use serde::Serialize;

use crate::campaign::{write_reports, Campaign};
use crate::check::reconstruction_errors;
use crate::config::ExperimentConfig;
use crate::formats::{create_dir, fmt_f64, read_signal_csv, write_csv, write_model_json, write_text, FormatError, Sig17};

#[derive(Debug, Parser)]
#[command(name = "hdpbsid", version, about = "Continuous-time subspace identification on a Hermite basis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Identify a model from recorded input/output data.
    Identify(IdentifyArgs),
    /// Run a Monte Carlo campaign described by a config file.
    Montecarlo(MonteCarloArgs),
    /// Report reconstruction error of a signal for several expansion orders.
    ReconstructCheck(ReconstructArgs),
}

#[derive(Debug, Args)]
struct IdentifyArgs {
    #[arg(long)]
    config: PathBuf,
    /// Combined CSV whose leading channels are inputs.
    #[arg(long, conflicts_with_all = ["u", "y"])]
    data: Option<PathBuf>,
    /// Number of input channels in `--data` (default: config `n_inputs`, else 1).
    #[arg(long, requires = "data")]
    inputs: Option<usize>,
    #[arg(long, requires = "y")]
    u: Option<PathBuf>,
    #[arg(long, requires = "u")]
    y: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct MonteCarloArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the base seed of the config.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    jobs: Option<usize>,
    /// Count order-mismatched trials in the statistics.
    #[arg(long)]
    include_failures: bool,
}

#[derive(Debug, Args)]
struct ReconstructArgs {
    #[arg(long)]
    data: PathBuf,
    /// Comma-separated expansion orders.
    #[arg(long = "n-max", value_delimiter = ',', required = true)]
    n_max: Vec<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
pub enum Failure {
    Input(String),
    Stage(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Input(_) => 2,
            Failure::Stage(_) => 1,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Input(m) | Failure::Stage(m) => f.write_str(m),
        }
    }
}

impl From<FormatError> for Failure {
    fn from(e: FormatError) -> Self {
        Failure::Input(e.to_string())
    }
}

fn core_failure(context: &str, e: CoreError) -> Failure {
    match e {
        CoreError::MismatchedWindows => Failure::Input(format!(
            "{context}: {e}; both records must span the same window"
        )),
        CoreError::ZeroLengthExperiment
        | CoreError::TooFewSamples { .. }
        | CoreError::BadTimeGrid { .. }
        | CoreError::DimensionMismatch { .. } => Failure::Input(format!("{context}: {e}")),
        other => Failure::Stage(format!("{context}: {other}")),
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let outcome = match cli.command {
        Command::Identify(a) => cmd_identify(a),
        Command::Montecarlo(a) => cmd_montecarlo(a),
        Command::ReconstructCheck(a) => cmd_reconstruct_check(a),
    };
    match outcome {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {f}");
            f.exit_code()
        }
    }
}

fn split_channels(signal: SampledSignal, n_u: usize, path: &Path) -> Result<(SampledSignal, SampledSignal), Failure> {
    let n = signal.n_channels();
    if n_u == 0 || n_u >= n {
        return Err(Failure::Input(format!(
            "{}: {n} channels cannot be split into {n_u} inputs and at least one output",
            path.display()
        )));
    }
    let (times, values) = signal.into_parts();
    let u = SampledSignal::new(times.clone(), values.rows(0, n_u).into_owned());
    let y = SampledSignal::new(times, values.rows(n_u, n - n_u).into_owned());
    match (u, y) {
        (Ok(u), Ok(y)) => Ok((u, y)),
        (Err(e), _) | (_, Err(e)) => Err(core_failure("data", e)),
    }
}

fn cmd_identify(a: IdentifyArgs) -> Result<(), Failure> {
    let cfg = ExperimentConfig::load(&a.config)?;
    let (u, y) = match (&a.data, &a.u, &a.y) {
        (Some(d), _, _) => {
            let n_u = a.inputs.or(cfg.n_inputs).unwrap_or(1);
            split_channels(read_signal_csv(d)?, n_u, d)?
        }
        (None, Some(u), Some(y)) => (read_signal_csv(u)?, read_signal_csv(y)?),
        _ => return Err(Failure::Input("identify needs --data or both --u and --y".into())),
    };
    let result = identify(&u, &y, &cfg.ident_config()).map_err(|e| core_failure("identify", e))?;
    let out = a.out.or(cfg.output_dir).unwrap_or_else(|| PathBuf::from("."));
    write_identification(&out, &result)?;
    for z in eigenvalues(&result.model) {
        println!("{} {}", fmt_f64(z.re), fmt_f64(z.im));
    }
    Ok(())
}

#[derive(Serialize)]
struct LsOut {
    condition: Sig17,
    residual_norm: Sig17,
    rank: usize,
    regressors: usize,
    full_rank: bool,
}

impl From<&LsDiagnostics> for LsOut {
    fn from(d: &LsDiagnostics) -> Self {
        LsOut {
            condition: Sig17(d.condition),
            residual_norm: Sig17(d.residual_norm),
            rank: d.rank,
            regressors: d.regressors,
            full_rank: d.full_rank(),
        }
    }
}

#[derive(Serialize)]
struct DiagnosticsOut {
    order: usize,
    eigenvalues: Vec<[Sig17; 2]>,
    alpha: Sig17,
    operator_condition: Sig17,
    markov: LsOut,
    output: LsOut,
    system: LsOut,
    predictor_eigenvalues: Vec<[Sig17; 2]>,
    predictor_stable: bool,
    truncation_bias: Sig17,
    innovation_identifiable: bool,
    innovation_ratio: Sig17,
}

fn pairs(z: &[Complex<f64>]) -> Vec<[Sig17; 2]> {
    z.iter().map(|z| [Sig17(z.re), Sig17(z.im)]).collect()
}

/// Writes `model.json`, `singular_values.csv` and `diagnostics.json`.
pub fn write_identification(dir: &Path, r: &IdentResult) -> Result<(), FormatError> {
    create_dir(dir)?;
    write_model_json(&dir.join("model.json"), &r.model)?;
    let sv: Vec<Vec<String>> = r
        .singular_values
        .iter()
        .enumerate()
        .map(|(i, s)| vec![i.to_string(), fmt_f64(*s)])
        .collect();
    write_csv(&dir.join("singular_values.csv"), &["index", "singular_value"], &sv)?;
    let d = &r.diagnostics;
    let diag = DiagnosticsOut {
        order: r.model.n_x(),
        eigenvalues: pairs(&eigenvalues(&r.model)),
        alpha: Sig17(d.alpha),
        operator_condition: Sig17(d.operator_condition),
        markov: (&d.markov).into(),
        output: (&d.output).into(),
        system: (&d.system).into(),
        predictor_eigenvalues: pairs(&d.predictor_eigenvalues),
        predictor_stable: d.predictor_stable,
        truncation_bias: Sig17(d.truncation_bias),
        innovation_identifiable: d.innovation_identifiable,
        innovation_ratio: Sig17(d.innovation_ratio),
    };
    let text = serde_json::to_string_pretty(&diag).expect("diagnostics serialization");
    write_text(&dir.join("diagnostics.json"), &(text + "\n"))
}

fn cmd_montecarlo(a: MonteCarloArgs) -> Result<(), Failure> {
    let mut cfg = ExperimentConfig::load(&a.config)?;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    cfg.include_failures |= a.include_failures;
    if a.jobs == Some(0) {
        return Err(Failure::Input("--jobs must be at least 1".into()));
    }
    let out = a
        .out
        .or_else(|| cfg.output_dir.clone())
        .ok_or_else(|| Failure::Input("no output directory: pass --out or set output_dir".into()))?;
    let campaign = Campaign::from_config(&cfg, &a.config)?;
    let reports = campaign
        .run(a.jobs)
        .map_err(|e| Failure::Stage(format!("thread pool: {e}")))?;
    write_reports(&out, &campaign, &reports)?;
    for r in &reports {
        match &r.stats {
            Ok(s) => {
                for (k, e) in s.per_eigenvalue.iter().enumerate() {
                    println!(
                        "{} eig{k} bias {:.6e} std {:.6e} failures {}",
                        r.level, e.bias, e.std, s.failures
                    );
                }
            }
            Err(e) => println!("{} no statistics: {e}", r.level),
        }
    }
    Ok(())
}

fn cmd_reconstruct_check(a: ReconstructArgs) -> Result<(), Failure> {
    let signal = read_signal_csv(&a.data)?;
    let errs = reconstruction_errors(&signal, &a.n_max).map_err(|e| core_failure("reconstruct-check", e))?;
    let rows: Vec<Vec<String>> = errs
        .iter()
        .flat_map(|r| {
            r.per_channel
                .iter()
                .enumerate()
                .map(move |(ch, e)| vec![r.n_max.to_string(), ch.to_string(), fmt_f64(*e)])
        })
        .collect();
    println!("n_max,channel,relative_error");
    for r in &rows {
        println!("{}", r.join(","));
    }
    if let Some(dir) = a.out {
        create_dir(&dir)?;
        write_csv(
            &dir.join("reconstruct_check.csv"),
            &["n_max", "channel", "relative_error"],
            &rows,
        )?;
    }
    Ok(())
}
