use clap::{Parser, Subcommand};
use evlab::cli::{resolve_threads, run, CliError, ExperimentConfig, ExperimentKind};
use std::path::PathBuf;
use std::process::ExitCode;

/// Numerical laboratory for laws of rare events in expanding circle maps:
/// Monte Carlo, spectral, and closed-form routes to the same quantities.
#[derive(Parser)]
#[command(name = "evlab", version)]
struct Args {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, clap::Args)]
struct Common {
    /// Experiment config (JSON); see the guide for the schema.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for report.json and CSV series.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads (falls back to EVLAB_THREADS, then all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Dump one orbit's observable values and exceedance marks.
    Simulate(Common),
    /// Extremal-index estimators against the classified prediction.
    Ei(Common),
    /// Rare-event point process: cluster sizes, gaps, window counts.
    Repp(Common),
    /// Hitting/return-time laws, their integral relation, Kac, duality.
    Hts(Common),
    /// Discretized-transfer-operator refinement ladder at a two-cell hole.
    Spectral(Common),
    /// Extremal-index table over a list of targets.
    Dichotomy(Common),
    /// Short-return probability of the noisy target vs the union bound.
    ShortReturn(Common),
    /// Exact orbit classification of the target point.
    Classify(Common),
    /// Run the full acceptance suite.
    Verify(Common),
}

fn main() -> ExitCode {
    let args = Args::parse();
    let (kind, common) = match &args.cmd {
        Cmd::Simulate(c) => (ExperimentKind::Simulate, c),
        Cmd::Ei(c) => (ExperimentKind::Ei, c),
        Cmd::Repp(c) => (ExperimentKind::Repp, c),
        Cmd::Hts(c) => (ExperimentKind::Hts, c),
        Cmd::Spectral(c) => (ExperimentKind::Spectral, c),
        Cmd::Dichotomy(c) => (ExperimentKind::Dichotomy, c),
        Cmd::ShortReturn(c) => (ExperimentKind::ShortReturn, c),
        Cmd::Classify(c) => (ExperimentKind::Classify, c),
        Cmd::Verify(c) => (ExperimentKind::Verify, c),
    };
    if let Some(n) = resolve_threads(common.threads) {
        // ignore the error if a pool already exists (e.g. under tests)
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match execute(kind, common) {
        Ok(all_pass) => {
            if all_pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(CliError::Config(msg)) => {
            eprintln!("config error: config.{msg}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn execute(kind: ExperimentKind, common: &Common) -> Result<bool, CliError> {
    let mut config = load_config(kind, common)?;
    config.kind = kind;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }

    if kind == ExperimentKind::Classify {
        // classify prints; it still writes a report for scripting
        let report = run(&config, &common.out)?;
        println!("{}", serde_json::to_string_pretty(&report.results)?);
        if !report.predictions.is_null() {
            println!("{}", serde_json::to_string_pretty(&report.predictions)?);
        }
        return Ok(true);
    }

    let report = run(&config, &common.out)?;
    if kind == ExperimentKind::Verify {
        let criteria: Vec<evlab::verify::CriterionResult> =
            serde_json::from_value(report.results.clone())?;
        for c in &criteria {
            println!("{}", c.summary_line());
            for d in &c.details {
                println!("    {d}");
            }
        }
    } else {
        for v in &report.verdicts {
            println!(
                "{} {} = {} (target {})",
                if v.pass { "PASS" } else { "FAIL" },
                v.name,
                v.value,
                v.target
            );
        }
    }
    println!(
        "report: {} (config {})",
        common.out.join("report.json").display(),
        &report.config_hash[..12]
    );
    Ok(report.all_pass)
}

fn load_config(kind: ExperimentKind, common: &Common) -> Result<ExperimentConfig, CliError> {
    match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            ExperimentConfig::from_json(&text)
        }
        None if kind == ExperimentKind::Verify => {
            // verify needs no map; synthesize a minimal config
            let seed = common.seed.unwrap_or(0);
            let text = format!(
                r#"{{"kind":"verify","map":{{"type":"piecewise_affine","branches":[{{"a":"0","b":"1/2","slope":"2","intercept":"0"}},{{"a":"1/2","b":"1","slope":"2","intercept":"-1"}}],"topology":"circle"}},"seed":{seed}}}"#
            );
            ExperimentConfig::from_json(&text)
        }
        None => Err(CliError::Config("--config is required".into())),
    }
}
