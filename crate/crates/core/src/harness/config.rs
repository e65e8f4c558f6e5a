use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::banditnet::{BanditConfig, HopLimit, PolicyKind};
use crate::recovery::ErasureConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Placement,
    Schedulers,
    Deployment,
    Scaling,
    Recovery,
    Regret,
    Convergence,
    #[serde(rename = "sweep-C", alias = "sweep-c")]
    SweepC,
}

impl ExperimentKind {
    /// Output file stem.
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Placement => "placement",
            ExperimentKind::Schedulers => "schedulers",
            ExperimentKind::Deployment => "deployment",
            ExperimentKind::Scaling => "scaling",
            ExperimentKind::Recovery => "recovery",
            ExperimentKind::Regret => "regret",
            ExperimentKind::Convergence => "convergence",
            ExperimentKind::SweepC => "sweep-C",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub experiment: ExperimentKind,
    pub seed: u64,
    /// Runs use seeds `seed .. seed + seeds`.
    #[serde(default = "one")]
    pub seeds: u64,
    /// Prefix of every row's scenario id; defaults to the experiment name.
    #[serde(default)]
    pub scenario_id: Option<String>,
    #[serde(default)]
    pub overlay: OverlayBlock,
    #[serde(default)]
    pub placement: PlacementBlock,
    #[serde(default)]
    pub schedulers: SchedulersBlock,
    #[serde(default)]
    pub deployment: DeploymentBlock,
    #[serde(default)]
    pub scaling: ScalingBlock,
    #[serde(default)]
    pub erasure: ErasureBlock,
    #[serde(default)]
    pub bandit: BanditBlock,
    #[serde(default)]
    pub topology: TopologyBlock,
}

fn one() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OverlayBlock {
    pub digit_bits: u32,
    pub leaf_capacity: usize,
    pub zones: u32,
    /// Optional `node_name,zone_id,capacity,x,y` file; replaces generation.
    pub topology_file: Option<PathBuf>,
}

impl Default for OverlayBlock {
    fn default() -> Self {
        Self {
            digit_bits: 4,
            leaf_capacity: 24,
            zones: 20,
            topology_file: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlacementBlock {
    pub nodes: usize,
    pub apps: Vec<usize>,
    pub ops_min: usize,
    pub ops_max: usize,
    pub max_ops_per_node: u32,
}

impl Default for PlacementBlock {
    fn default() -> Self {
        Self {
            nodes: 10_000,
            apps: vec![250, 500, 750, 1000],
            ops_min: 5,
            ops_max: 15,
            max_ops_per_node: crate::dataflow::DEFAULT_MAX_OPS_PER_NODE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SchedulersBlock {
    pub nodes: usize,
    pub apps: Vec<usize>,
    pub apps_per_scheduler: usize,
}

impl Default for SchedulersBlock {
    fn default() -> Self {
        Self {
            nodes: 10_000,
            apps: vec![250, 500, 750, 1000],
            apps_per_scheduler: crate::dataflow::DEFAULT_APPS_PER_SCHEDULER,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeploymentBlock {
    pub nodes: usize,
    /// Applications deployed concurrently.
    pub apps: usize,
    pub ops_min: usize,
    pub ops_max: usize,
}

impl Default for DeploymentBlock {
    fn default() -> Self {
        Self {
            nodes: 10_000,
            apps: 500,
            ops_min: 5,
            ops_max: 15,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScalingBlock {
    pub alpha: f64,
    /// Per-instance rate and queue capacities.
    pub r: f64,
    pub q: f64,
    /// `time_s,op_id,input_rate,queue_size` file; the built-in ramp otherwise.
    pub pressure_file: Option<PathBuf>,
    pub base_rate: f64,
    pub steps: u32,
    pub duration_s: u64,
    pub eval_interval_s: u64,
    pub link_capacity: f64,
    pub initial_instances: u32,
    pub stateful_ops: Vec<String>,
    pub nodes: usize,
}

impl Default for ScalingBlock {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            r: 30.0,
            q: 10.0,
            pressure_file: None,
            base_rate: 300.0,
            steps: 6,
            duration_s: 240,
            eval_interval_s: 5,
            link_capacity: 1_000.0,
            initial_instances: 10,
            stateful_ops: vec!["stage1".into()],
            nodes: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ErasureBlock {
    pub m: Vec<usize>,
    /// Parity counts; 1..=8 unless `n` is given instead.
    pub k: Option<Vec<usize>>,
    /// Total fragment counts, as an alternative to `k`.
    pub n: Option<Vec<usize>>,
    pub state_mb: Vec<f64>,
    pub rate_mbps: f64,
    pub nodes: usize,
}

impl Default for ErasureBlock {
    fn default() -> Self {
        Self {
            m: (1..=8).collect(),
            k: None,
            n: None,
            state_mb: vec![16.0],
            rate_mbps: crate::recovery::DEFAULT_RATE_MBPS,
            nodes: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BanditBlock {
    pub c: f64,
    /// Packets per run.
    pub k: usize,
    /// End-to-end confidence weight; the longest path length when unset.
    pub l: Option<f64>,
    pub policies: Vec<String>,
    /// Lookahead runs once per entry: "all" or a hop count.
    pub hop_limits: Vec<String>,
    /// sweep-C only.
    pub c_values: Vec<f64>,
    pub delay_ranges: Vec<[f64; 2]>,
    /// Regret rows are written every `record_every` packets and at K.
    pub record_every: usize,
}

impl Default for BanditBlock {
    fn default() -> Self {
        Self {
            c: 0.2,
            k: 1000,
            l: None,
            policies: vec!["lookahead".into(), "next-hop".into(), "end-to-end".into()],
            hop_limits: vec!["all".into()],
            c_values: vec![0.001, 0.01, 0.1, 0.2, 0.4, 1.0],
            delay_ranges: vec![[10.0, 100.0], [50.0, 100.0], [100.0, 300.0]],
            record_every: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TopologyKind {
    GridRoad,
    Ring,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TopologyBlock {
    pub kind: TopologyKind,
    /// (nodes, links) pairs; regret runs every size.
    pub sizes: Vec<[usize; 2]>,
    pub delay_min: f64,
    pub delay_max: f64,
    /// Seed of the one shared network; the scenario seed when unset.
    pub seed: Option<u64>,
    /// Draw a fresh network for every run seed instead.
    pub regenerate: bool,
    /// `src,dst,theta,base_delay_ms` file; replaces generation.
    pub file: Option<PathBuf>,
}

impl Default for TopologyBlock {
    fn default() -> Self {
        Self {
            kind: TopologyKind::GridRoad,
            sizes: vec![[25, 32]],
            delay_min: 50.0,
            delay_max: 250.0,
            seed: None,
            regenerate: false,
            file: None,
        }
    }
}

fn bad(field: &str, message: impl Into<String>) -> HarnessError {
    HarnessError::Config {
        field: Some(field.to_string()),
        message: message.into(),
    }
}

fn positive(field: &str, v: f64) -> Result<(), HarnessError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(bad(field, format!("must be a positive number (got {v})")))
    }
}

fn exists(field: &str, p: &Option<PathBuf>) -> Result<(), HarnessError> {
    match p {
        Some(p) if !p.is_file() => Err(bad(field, format!("file {} does not exist", p.display()))),
        _ => Ok(()),
    }
}

impl ScenarioConfig {
    /// Parses TOML; relative file paths resolve against `base_dir`.
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self, HarnessError> {
        let mut cfg: ScenarioConfig = toml::from_str(text).map_err(|e| HarnessError::Config {
            field: None,
            message: e.message().to_string(),
        })?;
        for p in [
            &mut cfg.overlay.topology_file,
            &mut cfg.scaling.pressure_file,
            &mut cfg.topology.file,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base_dir.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Config {
            field: None,
            message: format!("cannot read {}: {e}", path.display()),
        })?;
        let dir = path.parent().unwrap_or(Path::new("."));
        let cfg = Self::from_toml(&text, dir)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn scenario_prefix(&self) -> String {
        self.scenario_id
            .clone()
            .unwrap_or_else(|| self.experiment.name().to_string())
    }

    pub fn run_seeds(&self) -> Vec<u64> {
        (0..self.seeds).map(|i| self.seed.wrapping_add(i)).collect()
    }

    /// Checks every block the chosen experiment reads.
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.seeds == 0 {
            return Err(bad("seeds", "must be at least 1"));
        }
        if let Some(id) = &self.scenario_id {
            if id.is_empty() || id.contains([',', '"', '\n', '\r']) {
                return Err(bad(
                    "scenario_id",
                    "must be non-empty without commas, quotes or newlines",
                ));
            }
        }
        self.overlay_config()?;
        exists("overlay.topology_file", &self.overlay.topology_file)?;
        match self.experiment {
            ExperimentKind::Placement => self.validate_placement(),
            ExperimentKind::Schedulers => self.validate_schedulers(),
            ExperimentKind::Deployment => self.validate_deployment(),
            ExperimentKind::Scaling => self.validate_scaling(),
            ExperimentKind::Recovery => self.validate_erasure(),
            ExperimentKind::Regret | ExperimentKind::Convergence | ExperimentKind::SweepC => {
                self.validate_bandit()
            }
        }
    }

    pub fn overlay_config(&self) -> Result<crate::overlay::OverlayConfig, HarnessError> {
        let cfg = crate::overlay::OverlayConfig {
            digit_bits: self.overlay.digit_bits,
            leaf_capacity: self.overlay.leaf_capacity,
            ..Default::default()
        };
        cfg.validate().map_err(|e| bad("overlay", e.to_string()))?;
        if self.overlay.zones == 0 {
            return Err(bad("overlay.zones", "must be at least 1"));
        }
        Ok(cfg)
    }

    fn validate_placement(&self) -> Result<(), HarnessError> {
        let p = &self.placement;
        if p.nodes == 0 && self.overlay.topology_file.is_none() {
            return Err(bad("placement.nodes", "must be at least 1"));
        }
        if p.apps.is_empty() {
            return Err(bad("placement.apps", "needs at least one app count"));
        }
        if p.ops_min < 3 || p.ops_max < p.ops_min {
            return Err(bad("placement.ops_min", "need 3 <= ops_min <= ops_max"));
        }
        if p.max_ops_per_node == 0 {
            return Err(bad("placement.max_ops_per_node", "must be at least 1"));
        }
        Ok(())
    }

    fn validate_schedulers(&self) -> Result<(), HarnessError> {
        let s = &self.schedulers;
        if s.nodes == 0 && self.overlay.topology_file.is_none() {
            return Err(bad("schedulers.nodes", "must be at least 1"));
        }
        if s.apps.is_empty() {
            return Err(bad("schedulers.apps", "needs at least one app count"));
        }
        if s.apps_per_scheduler == 0 {
            return Err(bad("schedulers.apps_per_scheduler", "must be at least 1"));
        }
        Ok(())
    }

    fn validate_deployment(&self) -> Result<(), HarnessError> {
        let d = &self.deployment;
        if d.nodes == 0 && self.overlay.topology_file.is_none() {
            return Err(bad("deployment.nodes", "must be at least 1"));
        }
        if d.apps == 0 {
            return Err(bad("deployment.apps", "must be at least 1"));
        }
        if d.ops_min < 3 || d.ops_max < d.ops_min {
            return Err(bad("deployment.ops_min", "need 3 <= ops_min <= ops_max"));
        }
        Ok(())
    }

    fn validate_scaling(&self) -> Result<(), HarnessError> {
        let s = &self.scaling;
        if !(0.0..=1.0).contains(&s.alpha) {
            return Err(bad(
                "scaling.alpha",
                format!("must lie in [0, 1] (got {})", s.alpha),
            ));
        }
        positive("scaling.r", s.r)?;
        positive("scaling.q", s.q)?;
        positive("scaling.base_rate", s.base_rate)?;
        positive("scaling.link_capacity", s.link_capacity)?;
        if s.eval_interval_s == 0 {
            return Err(bad("scaling.eval_interval_s", "must be at least 1"));
        }
        if s.initial_instances == 0 {
            return Err(bad("scaling.initial_instances", "must be at least 1"));
        }
        if s.nodes < 2 {
            return Err(bad("scaling.nodes", "must be at least 2"));
        }
        exists("scaling.pressure_file", &s.pressure_file)
    }

    fn validate_erasure(&self) -> Result<(), HarnessError> {
        let e = &self.erasure;
        let limit = e.leaf_limit(self.overlay.leaf_capacity);
        for (m, k) in e.grid()? {
            ErasureConfig::new(m, k).map_err(|err| {
                bad(
                    if m == 0 { "erasure.m" } else { "erasure.k" },
                    err.to_string(),
                )
            })?;
            if m + k > limit {
                return Err(bad(
                    "erasure.k",
                    format!(
                        "m + k = {} exceeds the {} fragment holders a leaf set offers",
                        m + k,
                        limit
                    ),
                ));
            }
        }
        if e.state_mb.is_empty() {
            return Err(bad("erasure.state_mb", "needs at least one state size"));
        }
        for &s in &e.state_mb {
            positive("erasure.state_mb", s)?;
            if s > 1024.0 {
                return Err(bad(
                    "erasure.state_mb",
                    "state sizes above 1024 MB are not supported",
                ));
            }
        }
        positive("erasure.rate_mbps", e.rate_mbps)?;
        if e.nodes < 3 {
            return Err(bad("erasure.nodes", "must be at least 3"));
        }
        Ok(())
    }

    fn validate_bandit(&self) -> Result<(), HarnessError> {
        let b = &self.bandit;
        let c_ok = |field: &str, c: f64| {
            BanditConfig {
                c,
                ..BanditConfig::default()
            }
            .validate()
            .map_err(|e| bad(field, e.to_string()))
        };
        c_ok("bandit.c", b.c)?;
        if b.k == 0 {
            return Err(bad("bandit.k", "must be at least 1"));
        }
        if let Some(l) = b.l {
            positive("bandit.l", l)?;
        }
        if b.record_every == 0 {
            return Err(bad("bandit.record_every", "must be at least 1"));
        }
        self.policies()?;
        self.hop_limits()?;
        if self.experiment == ExperimentKind::SweepC {
            if b.c_values.is_empty() {
                return Err(bad("bandit.c_values", "needs at least one value"));
            }
            for &c in &b.c_values {
                c_ok("bandit.c_values", c)?;
            }
            if b.delay_ranges.is_empty() {
                return Err(bad("bandit.delay_ranges", "needs at least one range"));
            }
            for r in &b.delay_ranges {
                if !(r[0].is_finite() && r[0] > 0.0 && r[1] >= r[0]) {
                    return Err(bad(
                        "bandit.delay_ranges",
                        format!("range {r:?} needs 0 < min <= max"),
                    ));
                }
            }
        }
        let t = &self.topology;
        exists("topology.file", &t.file)?;
        if t.file.is_none() {
            if t.sizes.is_empty() {
                return Err(bad(
                    "topology.sizes",
                    "needs at least one (nodes, links) pair",
                ));
            }
            for &[n, l] in &t.sizes {
                if n < 2 || l < n - 1 || l > n * (n - 1) {
                    return Err(bad(
                        "topology.sizes",
                        format!("({n}, {l}) needs n >= 2 and n-1 <= links <= n(n-1)"),
                    ));
                }
            }
        }
        if !(t.delay_min.is_finite() && t.delay_min > 0.0 && t.delay_max >= t.delay_min) {
            return Err(bad("topology.delay_min", "need 0 < delay_min <= delay_max"));
        }
        Ok(())
    }

    pub fn policies(&self) -> Result<Vec<String>, HarnessError> {
        if self.bandit.policies.is_empty() {
            return Err(bad("bandit.policies", "needs at least one policy"));
        }
        for p in &self.bandit.policies {
            if PolicyKind::parse(p, 1.0).is_none() {
                return Err(bad(
                    "bandit.policies",
                    format!("unknown policy {p:?} (lookahead, next-hop, end-to-end, optimal)"),
                ));
            }
        }
        Ok(self.bandit.policies.clone())
    }

    pub fn hop_limits(&self) -> Result<Vec<HopLimit>, HarnessError> {
        if self.bandit.hop_limits.is_empty() {
            return Err(bad("bandit.hop_limits", "needs at least one entry"));
        }
        self.bandit
            .hop_limits
            .iter()
            .map(|h| {
                HopLimit::parse(h).ok_or_else(|| {
                    bad(
                        "bandit.hop_limits",
                        format!("{h:?} is neither \"all\" nor a positive hop count"),
                    )
                })
            })
            .collect()
    }
}

impl ErasureBlock {
    /// Every (m, k) pair of the grid, m-major.
    pub fn grid(&self) -> Result<Vec<(usize, usize)>, HarnessError> {
        if self.m.is_empty() {
            return Err(bad("erasure.m", "needs at least one value"));
        }
        let mut out = Vec::new();
        match (&self.k, &self.n) {
            (Some(_), Some(_)) => return Err(bad("erasure.n", "give either k or n, not both")),
            (_, Some(ns)) => {
                if ns.is_empty() {
                    return Err(bad("erasure.n", "needs at least one value"));
                }
                for &m in &self.m {
                    for &n in ns {
                        if n <= m {
                            return Err(bad(
                                "erasure.n",
                                format!("n = {n} must exceed m = {m}: m fragments are needed and at least one is parity"),
                            ));
                        }
                        out.push((m, n - m));
                    }
                }
            }
            (k, None) => {
                let ks = k.clone().unwrap_or_else(|| (1..=8).collect());
                if ks.is_empty() {
                    return Err(bad("erasure.k", "needs at least one value"));
                }
                for &m in &self.m {
                    for &k in &ks {
                        out.push((m, k));
                    }
                }
            }
        }
        Ok(out)
    }

    /// Fragments must land on distinct leaf members other than the owner's
    /// replacement.
    fn leaf_limit(&self, leaf_capacity: usize) -> usize {
        leaf_capacity.min(self.nodes.saturating_sub(1))
    }
}
