use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use log::{error, info, warn};

use esln::config::{RunConfig, Scenario};
use esln::scenario::run_scenario;
use esln::EslnError;

/// Spin-boson dynamics from exactly thermalised stochastic Liouville-von Neumann ensembles.
#[derive(Parser, Debug)]
#[command(version)]
struct Args {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// correlations, stationary, decay, lz, calibrate or variance-scan.
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-key override, repeatable: --set alpha=0.01
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn build_config(args: &Args) -> Result<RunConfig, EslnError> {
    let text = match &args.config {
        Some(path) => std::fs::read_to_string(path)?,
        None => String::new(),
    };
    let scenario: Scenario = match &args.scenario {
        Some(name) => name.parse()?,
        None => RunConfig::scenario_in(&text)?.unwrap_or(Scenario::Stationary),
    };
    let mut cfg = RunConfig::for_scenario(scenario);
    cfg.apply_text(&text)?;
    for o in &args.overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| EslnError::InvalidConfig { key: o.clone(), reason: "expected KEY=VALUE".into() })?;
        cfg.set(k, v)?;
    }
    cfg.scenario = scenario;
    if let Some(s) = args.samples {
        cfg.samples = s;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(w) = args.workers {
        cfg.workers = w;
    }
    if let Some(o) = &args.out {
        cfg.out = o.clone();
    }
    Ok(cfg)
}

fn exit_code(e: &EslnError) -> u8 {
    match e {
        EslnError::InvalidConfig { .. } | EslnError::UnknownScenario(_) | EslnError::Domain(_) | EslnError::Window(_) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    let cfg = match build_config(&args) {
        Ok(c) => c,
        Err(e) => {
            error!("{e}");
            return ExitCode::from(exit_code(&e));
        }
    };
    info!("running {} with {} samples into {}", cfg.scenario, cfg.samples, cfg.out.display());
    match run_scenario(&cfg) {
        Ok(outcome) => {
            print!("{}", outcome.summary);
            for f in &outcome.files {
                info!("wrote {}", f.display());
            }
            if outcome.unreliable {
                warn!("more than 1% of trajectories were excluded; the result is unreliable");
                ExitCode::from(3)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            error!("{e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
