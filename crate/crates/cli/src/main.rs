use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use gpsens::bounds::SensitivityModel;
use gpsens::coupling::PolicyKind;
use gpsens::data::{load_csv, write_csv, TreatmentKind};
use gpsens::estimators::{estimate_bounds, EstimateConfig};
use gpsens::nuisance::{RegressorMethod, RegressorSpec};
use gpsens::sim::{delta_grid, figure1_grid, simulate, truth_grid, DgpSpec, GridRow};
use gpsens::ErrorKind;
use serde::Serialize;

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser, Debug)]
#[command(name = "gpsens", version, about = "Sensitivity bounds for generalized treatment policies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw a seeded dataset from a named design and write it as CSV
    Simulate(SimulateArgs),
    /// Population bounds by quadrature over a delta grid, as CSV
    Truth(TruthArgs),
    /// Cross-fitted bound estimates with confidence intervals, as JSON
    Estimate(EstimateArgs),
    /// Pure and maximal policy truth grid for the motivating design
    Figure1(OutArgs),
}

#[derive(Args, Debug)]
struct OutArgs {
    /// Output file; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long, default_value = "motivating")]
    design: String,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug, Clone)]
struct ModelArgs {
    #[arg(long, value_enum)]
    model: ModelName,
    #[arg(long, value_enum)]
    policy: PolicyName,
    /// Sensitivity parameter; ignored by the bounded-outcome model
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// Exponent of the Holder-type model
    #[arg(long, default_value_t = 1.0)]
    p: f64,
}

#[derive(Args, Debug)]
struct TruthArgs {
    #[arg(long, default_value = "motivating")]
    design: String,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, conflicts_with = "delta_grid")]
    delta: Option<f64>,
    /// `start:stop:step`, endpoints included
    #[arg(long)]
    delta_grid: Option<String>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct EstimateArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value = "binary")]
    kind: KindName,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    delta: f64,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    #[arg(long, value_enum, default_value = "knn")]
    regressor: RegressorName,
    /// Neighbour count for the k-NN regressor
    #[arg(long)]
    knn_k: Option<usize>,
    /// Kernel bandwidth on the standardized covariate scale
    #[arg(long)]
    bandwidth: Option<f64>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum KindName {
    Binary,
    Continuous,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ModelName {
    Bounded,
    OutcomeGap,
    OutcomeGapHolder,
    OddsRatio,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum PolicyName {
    Pure,
    #[value(alias = "rank-preserving")]
    Monotone,
    Maximal,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum RegressorName {
    Knn,
    Kernel,
}

impl ModelArgs {
    fn resolve(&self) -> (SensitivityModel, PolicyKind) {
        let model = match self.model {
            ModelName::Bounded => SensitivityModel::BoundedOutcome,
            ModelName::OutcomeGap => SensitivityModel::OutcomeGap { gamma: self.gamma },
            ModelName::OutcomeGapHolder => SensitivityModel::OutcomeGapHolder { gamma: self.gamma, p: self.p },
            ModelName::OddsRatio => SensitivityModel::OddsRatio { gamma: self.gamma },
        };
        let policy = match self.policy {
            PolicyName::Pure => PolicyKind::Pure,
            PolicyName::Monotone => PolicyKind::RankPreserving,
            PolicyName::Maximal => PolicyKind::Maximal,
        };
        (model, policy)
    }
}

/// Fixed decimal with 12 significant digits; scientific notation for
/// very large or very small magnitudes.
fn fmt12(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let mag = v.abs().log10().floor() as i32;
    if !(-6..15).contains(&mag) {
        return format!("{v:.11e}");
    }
    format!("{v:.*}", (11 - mag).max(0) as usize)
}

fn open_out(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn meta_lines(config: &impl Serialize) -> Result<Vec<String>> {
    Ok(vec![format!("gpsens {VERSION}"), format!("config {}", serde_json::to_string(config)?)])
}

fn write_grid(out: &mut dyn Write, meta: &[String], rows: &[GridRow], with_policy: bool) -> Result<()> {
    for m in meta {
        writeln!(out, "# {m}")?;
    }
    if with_policy {
        writeln!(out, "delta,gamma,policy,lower,upper,tau")?;
    } else {
        writeln!(out, "delta,gamma,lower,upper,tau")?;
    }
    for r in rows {
        let policy = match r.policy {
            PolicyKind::Pure => "pure,",
            PolicyKind::RankPreserving => "monotone,",
            PolicyKind::Maximal => "maximal,",
        };
        writeln!(
            out,
            "{},{},{}{},{},{}",
            fmt12(r.delta),
            fmt12(r.gamma),
            if with_policy { policy } else { "" },
            fmt12(r.lower),
            fmt12(r.upper),
            fmt12(r.tau)
        )?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct SimulateConfig<'a> {
    command: &'static str,
    design: &'a str,
    n: usize,
    seed: u64,
}

fn cmd_simulate(a: &SimulateArgs) -> Result<()> {
    let spec = DgpSpec::from_name(&a.design, a.n, a.seed)?;
    let ds = simulate(&spec)?;
    let meta = meta_lines(&SimulateConfig { command: "simulate", design: &a.design, n: a.n, seed: a.seed })?;
    let mut out = open_out(&a.out.out)?;
    write_csv(&ds, &mut out, &meta)?;
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct TruthConfig<'a> {
    command: &'static str,
    design: &'a str,
    model: SensitivityModel,
    policy: PolicyKind,
    deltas: &'a [f64],
}

fn cmd_truth(a: &TruthArgs) -> Result<()> {
    let deltas = match (&a.delta, &a.delta_grid) {
        (Some(d), None) => vec![*d],
        (None, Some(g)) => parse_grid(g)?,
        _ => bail!(gpsens::Error::Config("give exactly one of --delta or --delta-grid".into())),
    };
    let spec = DgpSpec::from_name(&a.design, 0, 0)?;
    let (model, policy) = a.model.resolve();
    model.validate()?;
    let rows = truth_grid(&spec, &deltas, &[model.gamma()], &[policy], |_| model)?;
    let meta = meta_lines(&TruthConfig { command: "truth", design: &a.design, model, policy, deltas: &deltas })?;
    write_grid(&mut *open_out(&a.out.out)?, &meta, &rows, false)
}

fn parse_grid(g: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = g.split(':').collect();
    let bad = || gpsens::Error::Config(format!("grid {g:?} is not start:stop:step"));
    if parts.len() != 3 {
        bail!(bad());
    }
    let mut v = [0.0; 3];
    for (slot, p) in v.iter_mut().zip(&parts) {
        *slot = p.trim().parse().map_err(|_| bad())?;
    }
    Ok(delta_grid(v[0], v[1], v[2])?)
}

#[derive(Serialize)]
struct EstimateOutput<'a> {
    version: &'static str,
    data: String,
    config: &'a EstimateConfig,
    report: gpsens::estimators::BoundReport,
}

fn cmd_estimate(a: &EstimateArgs) -> Result<()> {
    let kind = match a.kind {
        KindName::Binary => TreatmentKind::Binary,
        KindName::Continuous => TreatmentKind::Continuous,
    };
    let data = load_csv(&a.data, kind).with_context(|| format!("loading {}", a.data.display()))?;
    let (model, policy) = a.model.resolve();
    let mut regressor = match a.regressor {
        RegressorName::Knn => RegressorSpec::default(),
        RegressorName::Kernel => RegressorSpec::kernel(a.bandwidth),
    };
    if let Some(k) = a.knn_k {
        if regressor.method != RegressorMethod::Knn {
            bail!(gpsens::Error::Config("--knn-k applies to the knn regressor only".into()));
        }
        regressor.k = Some(k);
    }
    let cfg = EstimateConfig { model, policy, delta: a.delta, folds: a.folds, seed: a.seed, level: a.level, regressor };
    let report = estimate_bounds(&data, &cfg)?;
    if let Some(w) = &report.warning {
        eprintln!("warning: {w}");
    }
    let out = EstimateOutput { version: VERSION, data: a.data.display().to_string(), config: &cfg, report };
    let mut w = open_out(&a.out.out)?;
    serde_json::to_writer_pretty(&mut w, &out)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn cmd_figure1(a: &OutArgs) -> Result<()> {
    let rows = figure1_grid()?;
    let meta = meta_lines(&serde_json::json!({
        "command": "figure1",
        "design": "motivating",
        "model": "outcome-gap",
        "delta_grid": "0:3:0.05",
        "gammas": [0.5, 2.0],
        "policies": ["pure", "maximal"],
    }))?;
    write_grid(&mut *open_out(&a.out)?, &meta, &rows, true)
}

fn exit_code(e: &anyhow::Error) -> (u8, &'static str) {
    if let Some(g) = e.downcast_ref::<gpsens::Error>() {
        return match g.kind() {
            ErrorKind::Config => (2, "config"),
            ErrorKind::Data => (3, "data"),
            ErrorKind::Numeric => (4, "numeric"),
        };
    }
    if e.downcast_ref::<io::Error>().is_some() {
        return (3, "data");
    }
    (4, "numeric")
}

/// The error chain joined by `: `, skipping causes already quoted by
/// the message above them.
fn message(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let s = cause.to_string();
        if !out.contains(&s) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&s);
        }
    }
    out
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Truth(a) => cmd_truth(a),
        Command::Estimate(a) => cmd_estimate(a),
        Command::Figure1(a) => cmd_figure1(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (code, kind) = exit_code(&e);
            let body = serde_json::json!({ "error": { "kind": kind, "message": message(&e) } });
            eprintln!("{body}");
            ExitCode::from(code)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_digits() {
        assert_eq!(fmt12(1.0 / 6.0), "0.166666666667");
        assert_eq!(fmt12(-0.5), "-0.500000000000");
        assert_eq!(fmt12(0.0), "0");
        assert_eq!(fmt12(-0.0), "0");
        assert_eq!(fmt12(123.0), "123.000000000");
        assert_eq!(fmt12(1e-9), "1.00000000000e-9");
    }

    #[test]
    fn grids() {
        assert_eq!(parse_grid("0:3:0.05").unwrap().len(), 61);
        assert!(parse_grid("0:3").is_err());
        assert!(parse_grid("a:1:0.1").is_err());
    }
}
