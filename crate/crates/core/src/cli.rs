//! The `dpmargin` command line.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::SystemTime;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::data::{
    geometric_margin_oracle, load_dataset, margin_removal_curve, synth_margin_dataset, write_csv, DataFormat,
    Dataset, DEFAULT_ORACLE_TOL,
};
use crate::error::{Error, Result};
use crate::loss::{empirical_risk, LossSpec, RiskMode};
use crate::master::{dp_adaptive_margin, margin_grid, MasterConfig, ModelDocument, Timestamps};
use crate::optimizer::{OutputMode, DEFAULT_T_CAP};
use crate::privacy::{PrivacyLedger, TunerKind};
use crate::rng::entropy_seed;
use crate::tuning::ScoreKind;

/// Environment variable overriding the optimizer iteration cap.
pub const T_CAP_ENV: &str = "DPMARGIN_T_CAP";

/// Largest synthetic set whose clean-subset margin is computed exactly on `synth`.
pub const SYNTH_ORACLE_CAP: usize = 5000;

#[derive(Debug, Parser)]
#[command(name = "dpmargin", version, about = "Differentially private large-margin halfspace learning")]
pub struct Cli {
    /// Print failures as a JSON object on stderr.
    #[arg(long, global = true)]
    pub json_errors: bool,

    /// Worker threads for candidate evaluation (output does not depend on it).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a planted-margin dataset as CSV.
    Synth(SynthArgs),
    /// Train a private classifier.
    Train(TrainArgs),
    /// Report risks of a saved model on a dataset.
    Eval(EvalArgs),
    /// Print the privacy budget split for a configuration.
    PrivacyReport(PrivacyArgs),
    /// Remove low-margin points one at a time and record the best normalized margin.
    MarginCurve(CurveArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TunerArg {
    Iterate,
    PrivTune,
}

impl From<TunerArg> for TunerKind {
    fn from(t: TunerArg) -> Self {
        match t {
            TunerArg::Iterate => TunerKind::Iterate,
            TunerArg::PrivTune => TunerKind::PrivTune,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreArg {
    Empirical,
    Penalized,
}

impl From<ScoreArg> for ScoreKind {
    fn from(s: ScoreArg) -> Self {
        match s {
            ScoreArg::Empirical => ScoreKind::EmpiricalZeroOne,
            ScoreArg::Penalized => ScoreKind::PenalizedPopulation,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeArg {
    Averaged,
    Last,
}

impl From<ModeArg> for OutputMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Averaged => OutputMode::Averaged,
            ModeArg::Last => OutputMode::LastIterate,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Libsvm,
}

impl From<FormatArg> for DataFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => DataFormat::Csv,
            FormatArg::Libsvm => DataFormat::Libsvm,
        }
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub d: usize,
    #[arg(long)]
    pub gamma: f64,
    #[arg(long, default_value_t = 0)]
    pub outliers: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// JSON run configuration; command-line flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, value_enum)]
    pub tuner: Option<TunerArg>,
    #[arg(long, value_enum)]
    pub score: Option<ScoreArg>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Where to write the model JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: FormatArg,
}

#[derive(Debug, Args)]
pub struct PrivacyArgs {
    #[arg(long)]
    pub epsilon: f64,
    #[arg(long)]
    pub delta: f64,
    /// Number of margin candidates.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Dataset size; sets the grid size and the run-count rate.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, value_enum, default_value = "iterate")]
    pub tuner: TunerArg,
    /// Emit the ledger as JSON.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct CurveArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: FormatArg,
    #[arg(long, default_value_t = 20)]
    pub max_removals: usize,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Synthetic data parameters inside a run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub n: usize,
    pub d: usize,
    pub gamma: f64,
    #[serde(default)]
    pub outliers: usize,
    pub seed: u64,
}

/// JSON run configuration for `train --config`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    pub format: Option<DataFormat>,
    pub synth: Option<SynthSpec>,
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    pub tuner: Option<TunerArg>,
    pub score: Option<ScoreArg>,
    pub mode: Option<ModeArg>,
    pub jl_failure_beta: Option<f64>,
    pub c_jl: Option<f64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Domain(format!("invalid run configuration: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    kind: &'a str,
    message: String,
    exit_code: i32,
}

/// Exit code for an error: 2 for argument and precondition failures, else 1.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_usage() {
        2
    } else {
        1
    }
}

/// Parses `args` and runs the command, writing to `out` and `err`. Returns the exit code.
pub fn run<I, T>(args: I, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return 0;
            }
            if args.iter().any(|a| a == "--json-errors") {
                let report = ErrorReport { kind: "usage", message: e.to_string(), exit_code: 2 };
                let _ = writeln!(err, "{}", serde_json::to_string(&report).unwrap());
            } else {
                let _ = write!(err, "{e}");
            }
            return 2;
        }
    };
    let json_errors = cli.json_errors;
    let result = match cli.threads {
        Some(0) => Err(Error::Domain("--threads must be at least 1".into())),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::Resource(e.to_string()))
            .and_then(|pool| pool.install(|| dispatch(cli.command, out, err))),
        None => dispatch(cli.command, out, err),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let code = exit_code(&e);
            if json_errors {
                let report = ErrorReport { kind: e.kind(), message: e.to_string(), exit_code: code };
                let _ = writeln!(err, "{}", serde_json::to_string(&report).unwrap());
            } else {
                let _ = writeln!(err, "error: {e}");
            }
            code
        }
    }
}

fn dispatch(cmd: Command, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> Result<()> {
    match cmd {
        Command::Synth(a) => cmd_synth(a, out, err),
        Command::Train(a) => cmd_train(a, out, err),
        Command::Eval(a) => cmd_eval(a, out),
        Command::PrivacyReport(a) => cmd_privacy_report(a, out),
        Command::MarginCurve(a) => cmd_margin_curve(a, out),
    }
}

fn seed_or_entropy(seed: Option<u64>, err: &mut (dyn Write + Send)) -> Result<u64> {
    Ok(match seed {
        Some(s) => s,
        None => {
            let s = entropy_seed();
            writeln!(err, "seed: {s}")?;
            s
        }
    })
}

/// Iteration cap from `DPMARGIN_T_CAP`, or the default.
pub fn t_cap_from_env() -> Result<u64> {
    match std::env::var(T_CAP_ENV) {
        Ok(v) => v
            .trim()
            .parse::<u64>()
            .ok()
            .filter(|&c| c > 0)
            .ok_or_else(|| Error::Domain(format!("{T_CAP_ENV} must be a positive integer, got {v:?}"))),
        Err(_) => Ok(DEFAULT_T_CAP),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

pub fn cmd_synth(a: SynthArgs, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> Result<()> {
    let seed = seed_or_entropy(a.seed, err)?;
    let sd = synth_margin_dataset(a.n, a.d, a.gamma, a.outliers, seed)?;
    let mut f = create(&a.out)?;
    write_csv(&sd.dataset, &mut f)?;
    f.flush()?;
    writeln!(out, "wrote {} rows to {}", sd.dataset.len(), a.out.display())?;
    if a.n <= SYNTH_ORACLE_CAP && a.n - a.outliers >= 2 {
        let clean = sd.dataset.without(&sd.outliers)?;
        let m = geometric_margin_oracle(&clean, DEFAULT_ORACLE_TOL)?;
        writeln!(out, "clean-subset margin: {m}")?;
    } else {
        writeln!(out, "planted margin: {}", a.gamma)?;
    }
    Ok(())
}

fn risk_line(w: &[f64], s: &Dataset) -> Result<f64> {
    empirical_risk(w, s, LossSpec::ZeroOne, RiskMode::Averaged)
}

pub fn cmd_train(a: TrainArgs, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> Result<()> {
    let rc = match &a.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let epsilon = a.epsilon.or(rc.epsilon).ok_or_else(|| Error::Domain("--epsilon is required".into()))?;
    let delta = a.delta.or(rc.delta).ok_or_else(|| Error::Domain("--delta is required".into()))?;
    let seed = seed_or_entropy(a.seed.or(rc.seed), err)?;
    let mut cfg = MasterConfig::new(epsilon, delta, seed);
    if let Some(t) = a.tuner.or(rc.tuner) {
        cfg.tuner = t.into();
    }
    if let Some(s) = a.score.or(rc.score) {
        cfg.score_kind = s.into();
    }
    cfg.output_mode = a.mode.or(rc.mode).map(Into::into);
    cfg.jl_failure_beta = rc.jl_failure_beta;
    if let Some(c) = rc.c_jl {
        cfg.c_jl = c;
    }
    cfg.t_cap = t_cap_from_env()?;
    let out_path = a.out.clone().or(rc.out.clone());

    let s = match (a.dataset.as_ref().or(rc.dataset.as_ref()), &rc.synth) {
        (Some(path), _) => {
            let fmt = a.format.map(Into::into).or(rc.format).unwrap_or(DataFormat::Csv);
            load_dataset(path, fmt)?
        }
        (None, Some(sp)) => synth_margin_dataset(sp.n, sp.d, sp.gamma, sp.outliers, sp.seed)?.dataset,
        (None, None) => return Err(Error::Domain("a dataset (--dataset or config synth) is required".into())),
    };
    // budget admissibility is checked before any training work
    cfg.ledger(s.len(), s.norm_bound())?;

    let started = SystemTime::now();
    let result = dp_adaptive_margin(&s, &cfg)?;
    let risk = risk_line(&result.model.weights, &s)?;
    writeln!(out, "empirical zero-one risk: {risk}")?;
    writeln!(out, "selected gamma: {} (k = {}, candidates = {})", result.gamma_out, result.k, result.grid.len())?;
    writeln!(out, "privacy: {}", result.ledger.statement())?;
    if let Some(p) = out_path {
        let doc = ModelDocument::new(&result, &cfg, Timestamps::capture(started));
        let mut f = create(&p)?;
        serde_json::to_writer_pretty(&mut f, &doc)?;
        writeln!(f)?;
        f.flush()?;
        writeln!(out, "model written to {}", p.display())?;
    }
    Ok(())
}

pub fn cmd_eval(a: EvalArgs, out: &mut (dyn Write + Send)) -> Result<()> {
    let doc: ModelDocument = serde_json::from_reader(std::io::BufReader::new(File::open(&a.model)?))?;
    let s = load_dataset(&a.dataset, a.format.into())?;
    if s.dim() != doc.d || doc.weights.len() != doc.d {
        return Err(Error::Dimension { expected: doc.d, found: s.dim() });
    }
    let risk = risk_line(&doc.weights, &s)?;
    let c = doc.gamma_out / 3.0;
    let hinge = empirical_risk(&doc.weights, &s, LossSpec::hinge(c)?, RiskMode::Averaged)?;
    writeln!(out, "empirical zero-one risk: {risk}")?;
    writeln!(out, "hinge risk (c = {c}): {hinge}")?;
    Ok(())
}

pub fn cmd_privacy_report(a: PrivacyArgs, out: &mut (dyn Write + Send)) -> Result<()> {
    let grid = match (a.grid, a.n) {
        (Some(g), _) => g,
        (None, Some(n)) => margin_grid(n, 1.0)?.len(),
        (None, None) => return Err(Error::Domain("either --grid or --n is required".into())),
    };
    let ledger = match a.tuner {
        TunerArg::Iterate => PrivacyLedger::iterate(a.epsilon, a.delta, grid, 1.0)?,
        TunerArg::PrivTune => {
            let n = a.n.ok_or_else(|| Error::Domain("--tuner priv-tune needs --n".into()))?;
            PrivacyLedger::priv_tune(a.epsilon, a.delta, grid, n, 1.0)?
        }
    };
    if a.json {
        serde_json::to_writer_pretty(&mut *out, &ledger)?;
        writeln!(out)?;
        return Ok(());
    }
    writeln!(out, "tuner: {}", match ledger.tuner {
        TunerKind::Iterate => "iterate",
        TunerKind::PrivTune => "priv-tune",
    })?;
    writeln!(out, "candidates: {}", ledger.grid_size)?;
    writeln!(out, "mu: {}", ledger.mu_total)?;
    writeln!(out, "base mu per run: {}", ledger.base_mu)?;
    writeln!(out, "score noise sigma: {}", ledger.score_sigma)?;
    if let Some(r) = ledger.r {
        writeln!(out, "run-count rate r: {r}")?;
    }
    writeln!(out, "composed mu: {}", ledger.composed_mu)?;
    writeln!(out, "round trip: {}", if ledger.round_trip_ok() { "OK" } else { "MISMATCH" })?;
    writeln!(out, "guarantee: {}", ledger.statement())?;
    Ok(())
}

pub fn cmd_margin_curve(a: CurveArgs, out: &mut (dyn Write + Send)) -> Result<()> {
    let s = load_dataset(&a.dataset, a.format.into())?;
    let curve = margin_removal_curve(&s, a.max_removals, 1e-10)?;
    let mut text = String::from("removed_count,normalized_margin\n");
    for p in &curve {
        text.push_str(&format!("{},{}\n", p.removed, p.margin));
    }
    match a.out {
        Some(p) => {
            let mut f = create(&p)?;
            f.write_all(text.as_bytes())?;
            f.flush()?;
        }
        None => out.write_all(text.as_bytes())?,
    }
    Ok(())
}
