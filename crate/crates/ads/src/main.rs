use std::path::PathBuf;
use std::process::ExitCode;

use ads_core::harness::{
    generate_network, network_label, run, HarnessError, ScenarioConfig, TopologyKind,
};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "ads",
    version,
    about = "Deterministic edge stream-processing simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment a scenario file describes.
    Run {
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Seeds run concurrently; output order does not depend on it.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Replaces the scenario's base seed.
        #[arg(long)]
        seed_override: Option<u64>,
    },
    /// Parse and validate a scenario file without running it.
    Validate { config: PathBuf },
    /// Write a generated path-planning network as CSV.
    GenTopology {
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long)]
        nodes: usize,
        #[arg(long)]
        links: usize,
        #[arg(long, default_value_t = 50.0)]
        delay_min: f64,
        #[arg(long, default_value_t = 250.0)]
        delay_max: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    GridRoad,
    Ring,
    Random,
}

impl From<Kind> for TopologyKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::GridRoad => TopologyKind::GridRoad,
            Kind::Ring => TopologyKind::Ring,
            Kind::Random => TopologyKind::Random,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ADS_LOG", "warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cmd: Command) -> Result<(), HarnessError> {
    match cmd {
        Command::Run {
            config,
            out,
            jobs,
            seed_override,
        } => {
            let mut cfg = ScenarioConfig::load(&config)?;
            if let Some(s) = seed_override {
                cfg.seed = s;
            }
            let written = run(&cfg, &out, jobs.max(1))?;
            log::info!("{} rows -> {}", written.rows, written.csv.display());
            println!(
                "{}",
                serde_json::json!({
                    "experiment": cfg.experiment.name(),
                    "rows": written.rows,
                    "csv": written.csv,
                    "summary": written.summary,
                })
            );
            Ok(())
        }
        Command::Validate { config } => {
            let cfg = ScenarioConfig::load(&config)?;
            println!(
                "{}",
                serde_json::json!({ "valid": true, "experiment": cfg.experiment.name(), "seeds": cfg.run_seeds() })
            );
            Ok(())
        }
        Command::GenTopology {
            kind,
            nodes,
            links,
            delay_min,
            delay_max,
            seed,
            out,
        } => {
            let delay = (delay_min, delay_max);
            let g = generate_network(
                kind.into(),
                nodes,
                links,
                delay,
                seed,
                &network_label(nodes, links, delay),
            )
            .map_err(|e| HarnessError::Config {
                field: Some("gen-topology".into()),
                message: e.to_string(),
            })?;
            let file = std::fs::File::create(&out)
                .map_err(|e| HarnessError::Io(format!("{}: {e}", out.display())))?;
            g.write_csv(std::io::BufWriter::new(file))
                .map_err(|e| HarnessError::Io(e.to_string()))?;
            log::info!(
                "{} nodes, {} links -> {}",
                g.node_count(),
                g.links().len(),
                out.display()
            );
            Ok(())
        }
    }
}
