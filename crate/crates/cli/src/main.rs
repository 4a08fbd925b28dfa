use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fedsim_core::experiment::{prepare_data, DatasetInfo, Plan};
use fedsim_core::report::{emit_partition, emit_report, to_rounded_json};
use fedsim_core::{load_cleveland, run_experiment, Error, ExperimentConfig, Regime, Seeds};
use serde_json::json;

#[derive(Parser, Debug)]
#[command(name = "fedsim", version, about = "Federated heart-disease training simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Load the data file and print row counts
    Ingest(Common),
    /// Build the age-window clients and write membership and heterogeneity
    Partition(Common),
    /// Train the configured regimes over the seed sweep
    Train(Common),
    /// Sweep FedProx over the mu grid
    Ablate(Common),
    /// Run everything: validation, ablation, regimes, tests
    Report(Common),
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// JSON experiment config; defaults are used when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run a single seed instead of the configured sweep
    #[arg(long)]
    seed: Option<u64>,
    /// Fix the FedProx mu (disables validation-based selection)
    #[arg(long)]
    mu: Option<f64>,
    /// Restrict to one regime (centralized, local, fedavg, fedprox)
    #[arg(long)]
    regime: Option<Regime>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Override the data file path
    #[arg(long)]
    data: Option<PathBuf>,
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig, Error> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seeds = Seeds::List(vec![seed]);
        }
        if let Some(mu) = self.mu {
            cfg.fed.mu = mu;
            cfg.select_mu_by_validation = false;
        }
        if let Some(r) = self.regime {
            cfg.regimes = vec![r];
        }
        if let Some(dir) = &self.output_dir {
            cfg.output_dir = dir.to_string_lossy().into_owned();
        }
        if let Some(d) = &self.data {
            cfg.data_path = d.to_string_lossy().into_owned();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn print_written(command: &str, dir: &str, written: &[PathBuf], extra: serde_json::Value) -> Result<(), Error> {
    let mut out = json!({ "command": command, "output_dir": dir, "files_written": written.len() });
    if let (Some(o), serde_json::Value::Object(e)) = (out.as_object_mut(), extra) {
        o.extend(e);
    }
    print!("{}", to_rounded_json(&out)?);
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Ingest(args) => {
            let cfg = args.config()?;
            let raw = load_cleveland(&cfg.data_path)?;
            print!("{}", to_rounded_json(&DatasetInfo::from_raw(&raw))?);
        }
        Command::Partition(args) => {
            let cfg = args.config()?;
            let data = prepare_data(&cfg)?;
            let written = emit_partition(&data, &cfg.output_dir)?;
            print_written(
                "partition",
                &cfg.output_dir,
                &written,
                json!({ "clients": data.summary }),
            )?;
        }
        Command::Train(args) => {
            let cfg = args.config()?;
            let plan = Plan {
                ablation: false,
                ..Plan::full(&cfg)
            };
            execute("train", &cfg, &plan)?;
        }
        Command::Ablate(args) => {
            let mut cfg = args.config()?;
            if let Some(mu) = args.mu {
                cfg.mu_grid = vec![mu];
            }
            let plan = Plan {
                regimes: Vec::new(),
                ablation: true,
                validation: false,
            };
            execute("ablate", &cfg, &plan)?;
        }
        Command::Report(args) => {
            let cfg = args.config()?;
            execute("report", &cfg, &Plan::full(&cfg))?;
        }
    }
    Ok(())
}

fn execute(command: &str, cfg: &ExperimentConfig, plan: &Plan) -> Result<(), Error> {
    log::info!(
        "{command}: {} seeds, regimes {:?}, ablation {}, validation {}",
        cfg.seeds.to_vec().len(),
        plan.regimes,
        plan.ablation,
        plan.validation
    );
    let outcome = run_experiment(cfg, plan)?;
    let written = emit_report(&outcome, &cfg.output_dir)?;
    log::info!("{command}: finished in {:.2}s", outcome.total_seconds);
    let selected_mu = outcome.report.validation.as_ref().map(|v| v.selected_mu);
    print_written(
        command,
        &cfg.output_dir,
        &written,
        json!({ "selected_mu": selected_mu }),
    )
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = json!({ "error": { "kind": e.kind(), "message": e.to_string() } });
            eprintln!("{msg}");
            ExitCode::FAILURE
        }
    }
}
