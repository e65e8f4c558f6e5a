//! Scenario configuration, experiment drivers and deterministic metric
//! emission.

mod config;
mod experiments;
mod table;

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

pub use config::{
    BanditBlock, DeploymentBlock, ErasureBlock, ExperimentKind, OverlayBlock, PlacementBlock,
    ScalingBlock, ScenarioConfig, SchedulersBlock, TopologyBlock, TopologyKind,
};
pub use experiments::{generate_network, modal_window, model_ratio, network_label};
pub use table::{Aggregate, Cell, SummaryGroup, SummarySpec, Table};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HarnessError {
    #[error("config error{}: {message}", field.as_ref().map(|f| format!(" in {f}")).unwrap_or_default())]
    Config {
        field: Option<String>,
        message: String,
    },
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("run failed: {0}")]
    Runtime(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config { .. } => 2,
            HarnessError::Invariant(_) => 3,
            HarnessError::Runtime(_) | HarnessError::Io(_) => 1,
        }
    }

    /// `{"error": kind, "field": name-or-null, "message": text}`.
    pub fn to_json(&self) -> serde_json::Value {
        let (kind, field, message) = match self {
            HarnessError::Config { field, message } => ("config", field.clone(), message.clone()),
            HarnessError::Invariant(m) => ("invariant", None, m.clone()),
            HarnessError::Runtime(m) => ("runtime", None, m.clone()),
            HarnessError::Io(m) => ("io", None, m.clone()),
        };
        serde_json::json!({ "error": kind, "field": field, "message": message })
    }
}

/// Runs every seed of the scenario. `jobs > 1` runs seeds on a thread pool;
/// rows are still concatenated in seed order.
pub fn execute(cfg: &ScenarioConfig, jobs: usize) -> Result<Table, HarnessError> {
    cfg.validate()?;
    let plan = experiments::plan(cfg)?;
    let seeds = cfg.run_seeds();
    log::info!(
        "{}: {} seeds from {}, {} network(s)",
        cfg.experiment.name(),
        seeds.len(),
        cfg.seed,
        plan.network_count()
    );
    let results: Vec<Result<Vec<Vec<Cell>>, HarnessError>> = if jobs <= 1 {
        seeds.iter().map(|&s| plan.run_seed(s)).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| HarnessError::Runtime(e.to_string()))?;
        pool.install(|| seeds.par_iter().map(|&s| plan.run_seed(s)).collect())
    };
    let (header, summary) = plan.header();
    let mut rows = Vec::new();
    for (seed, r) in seeds.iter().zip(results) {
        let r = r?;
        log::debug!("seed {seed}: {} rows", r.len());
        rows.extend(r);
    }
    Ok(Table {
        header,
        rows,
        summary,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub experiment: &'static str,
    pub scenario_prefix: String,
    pub seeds: Vec<u64>,
    pub rows: usize,
    pub filter: Option<RowFilter>,
    pub groups: Vec<SummaryGroup>,
}

/// Only rows whose `column` renders as `equals` are aggregated.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowFilter {
    pub column: String,
    pub equals: String,
}

pub fn summarize(cfg: &ScenarioConfig, table: &Table) -> Result<Summary, HarnessError> {
    Ok(Summary {
        experiment: cfg.experiment.name(),
        scenario_prefix: cfg.scenario_prefix(),
        seeds: cfg.run_seeds(),
        rows: table.rows.len(),
        filter: table.summary.filter.as_ref().map(|(c, v)| RowFilter {
            column: c.to_string(),
            equals: v.render(),
        }),
        groups: table.summarize()?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub csv: PathBuf,
    pub summary: PathBuf,
    pub rows: usize,
}

/// Writes `<out>/<experiment>.csv` and `<out>/summary.json`.
pub fn run(cfg: &ScenarioConfig, out: &Path, jobs: usize) -> Result<RunOutput, HarnessError> {
    let table = execute(cfg, jobs)?;
    let summary = summarize(cfg, &table)?;
    let io = |e: std::io::Error| HarnessError::Io(format!("{}: {e}", out.display()));
    std::fs::create_dir_all(out).map_err(io)?;
    let csv_path = out.join(format!("{}.csv", cfg.experiment.name()));
    let file = std::fs::File::create(&csv_path).map_err(io)?;
    table.write_csv(std::io::BufWriter::new(file))?;
    let summary_path = out.join("summary.json");
    let mut text =
        serde_json::to_string_pretty(&summary).map_err(|e| HarnessError::Io(e.to_string()))?;
    text.push('\n');
    std::fs::write(&summary_path, text).map_err(io)?;
    Ok(RunOutput {
        csv: csv_path,
        summary: summary_path,
        rows: table.rows.len(),
    })
}
