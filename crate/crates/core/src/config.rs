//! Experiment configuration (TOML) and sweep execution.
//!
//! ```toml
//! seed = 7
//! policies = ["fifo"]
//! mechanisms = ["proportional", "tune"]
//! lambdas = [1.0, 5.0, 9.0]
//! out = "results"
//!
//! [cluster]
//! round_minutes = 5.0
//! [[cluster.servers]]
//! count = 16
//! gpus = 8
//! cpus = 24
//! mem_gb = 500.0
//! storage_bw = 0.5
//!
//! [trace]
//! mode = "dynamic"
//! n_jobs = 3000
//! split = [20, 70, 10]
//! gpu_demand = [[1, 1.0]]
//! ```

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::{ClusterSpec, ServerSpec};
use crate::error::{Result, SimError};
use crate::job::JobClass;
use crate::mechanism::{MechanismKind, OptSettings};
use crate::policy::PolicyKind;
use crate::presets;
use crate::profiler::{DEFAULT_EPS_SAT, DEFAULT_THRESHOLD};
use crate::simulator::{run, write_summary, Monitor, SimSettings, SummaryRow};
use crate::workload::{gen_trace, load_trace, ArrivalMode, Catalog, Trace, TraceSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServerGroup {
    #[serde(default = "one")]
    pub count: usize,
    pub gpus: u32,
    pub cpus: u32,
    pub mem_gb: f64,
    pub storage_bw: f64,
    #[serde(default)]
    pub machine_type: u32,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterConfig {
    #[serde(default = "default_round")]
    pub round_minutes: f64,
    pub servers: Vec<ServerGroup>,
}

fn default_round() -> f64 {
    5.0
}

impl ClusterConfig {
    pub fn to_spec(&self) -> ClusterSpec {
        let servers = self
            .servers
            .iter()
            .flat_map(|g| {
                let s = ServerSpec {
                    gpus: g.gpus,
                    cpus: g.cpus,
                    mem_gb: g.mem_gb,
                    storage_bw: g.storage_bw,
                    machine_type: g.machine_type,
                };
                std::iter::repeat_n(s, g.count)
            })
            .collect();
        ClusterSpec { servers, round_minutes: self.round_minutes }
    }
}

impl Default for ClusterConfig {
    fn default() -> Self {
        let s = ServerSpec::reference();
        ClusterConfig {
            round_minutes: 5.0,
            servers: vec![ServerGroup {
                count: 16,
                gpus: s.gpus,
                cpus: s.cpus,
                mem_gb: s.mem_gb,
                storage_bw: s.storage_bw,
                machine_type: 0,
            }],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Overrides the trace seed when set.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_policies")]
    pub policies: Vec<PolicyKind>,
    #[serde(default = "default_mechanisms")]
    pub mechanisms: Vec<MechanismKind>,
    /// Arrival rates to sweep; empty means the trace's own rate.
    #[serde(default)]
    pub lambdas: Vec<f64>,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default = "yes")]
    pub profiling_in_jct: bool,
    #[serde(default = "default_penalty")]
    pub restart_penalty_s: f64,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default = "default_eps")]
    pub eps_sat: f64,
    /// Number of middle jobs averaged over; 0 means all.
    #[serde(default = "default_monitor")]
    pub monitor: usize,
    /// Search-node budget for the optimal mechanism's integer program.
    #[serde(default)]
    pub opt_node_limit: Option<u64>,
    #[serde(default)]
    pub cluster: ClusterConfig,
    #[serde(default = "default_trace")]
    pub trace: TraceSpec,
    /// Replay this CSV instead of generating a trace.
    #[serde(default)]
    pub trace_path: Option<PathBuf>,
    /// Replaces the built-in model presets.
    #[serde(default)]
    pub classes: Option<Vec<JobClass>>,
}

fn default_policies() -> Vec<PolicyKind> {
    vec![PolicyKind::Fifo]
}
fn default_mechanisms() -> Vec<MechanismKind> {
    vec![MechanismKind::Proportional, MechanismKind::Tune]
}
fn default_out() -> PathBuf {
    PathBuf::from("results")
}
fn yes() -> bool {
    true
}
fn default_penalty() -> f64 {
    30.0
}
fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}
fn default_eps() -> f64 {
    DEFAULT_EPS_SAT
}
fn default_monitor() -> usize {
    1000
}
fn default_trace() -> TraceSpec {
    TraceSpec::dynamic(3000, 5.0, (20, 70, 10), 0).single_gpu()
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        toml::from_str("").expect("every field has a default")
    }
}

/// One simulation of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub label: String,
    pub policy: PolicyKind,
    pub mechanism: MechanismKind,
    pub lambda: Option<f64>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SimError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(SimError::Config(m.to_string()));
        if self.policies.is_empty() || self.mechanisms.is_empty() {
            return bad("at least one policy and one mechanism are required");
        }
        if self.lambdas.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            return bad("arrival rates must be positive");
        }
        if !(self.threshold >= 0.0 && self.threshold < 1.0) {
            return bad("threshold must lie in [0, 1)");
        }
        if !(0.0..=1.0).contains(&self.eps_sat) {
            return bad("eps_sat must lie in [0, 1]");
        }
        if !(self.restart_penalty_s >= 0.0) {
            return bad("restart penalty must be non-negative");
        }
        if self.cluster.servers.is_empty() {
            return bad("cluster has no servers");
        }
        let spec = self.cluster.to_spec();
        spec.validate().map_err(|e| SimError::Config(e.to_string()))?;
        if !spec.is_homogeneous() {
            return bad("simulation requires identical servers");
        }
        if self.trace_path.is_none() {
            self.trace.validate().map_err(|e| SimError::Config(e.to_string()))?;
        }
        if let Some(classes) = &self.classes {
            for c in classes {
                c.validate().map_err(|e| SimError::Config(e.to_string()))?;
            }
        }
        Ok(())
    }

    pub fn catalog(&self) -> Catalog {
        Catalog::new(self.classes.clone().unwrap_or_else(presets::all))
    }

    pub fn trace_spec(&self, lambda: Option<f64>) -> TraceSpec {
        let mut spec = self.trace.clone();
        if let Some(seed) = self.seed {
            spec.seed = seed;
        }
        if let Some(l) = lambda {
            spec.lambda = l;
            spec.mode = ArrivalMode::Dynamic;
        }
        spec
    }

    pub fn build_trace(&self, lambda: Option<f64>) -> Result<Trace> {
        let spec = self.cluster.to_spec();
        let server = spec.reference_server();
        let ts = self.trace_spec(lambda);
        match &self.trace_path {
            Some(p) => load_trace(p, &self.catalog(), server, ts.split, ts.seed),
            None => gen_trace(&ts, &self.catalog(), server),
        }
    }

    pub fn settings(&self, policy: PolicyKind, mechanism: MechanismKind) -> SimSettings {
        SimSettings {
            profiling_in_jct: self.profiling_in_jct,
            restart_penalty_s: self.restart_penalty_s,
            threshold: self.threshold,
            eps_sat: self.eps_sat,
            monitor: if self.monitor == 0 { Monitor::All } else { Monitor::Middle(self.monitor) },
            opt: OptSettings { node_limit: self.opt_node_limit.or(OptSettings::default().node_limit) },
            ..SimSettings::new(self.cluster.to_spec(), policy, mechanism)
        }
    }

    /// Every (rate, policy, mechanism) combination in a fixed order.
    pub fn cells(&self) -> Vec<Cell> {
        let lambdas: Vec<Option<f64>> =
            if self.lambdas.is_empty() || self.trace_path.is_some() { vec![None] } else { self.lambdas.iter().map(|l| Some(*l)).collect() };
        let mut cells = Vec::new();
        for &lambda in &lambdas {
            for &policy in &self.policies {
                for &mechanism in &self.mechanisms {
                    let label = match lambda {
                        Some(l) => format!("lambda{l}_{policy}_{mechanism}"),
                        None => format!("{policy}_{mechanism}"),
                    };
                    cells.push(Cell { label, policy, mechanism, lambda });
                }
            }
        }
        cells
    }

    /// Runs every cell (in parallel), writes per-cell CSVs under `out/<label>/`
    /// and `out/summary.csv`, and returns the summary rows.
    pub fn run_sweep(&self) -> Result<Vec<SummaryRow>> {
        self.validate()?;
        let cells = self.cells();
        let results: Vec<Result<SummaryRow>> = cells
            .par_iter()
            .map(|cell| {
                let trace = self.build_trace(cell.lambda)?;
                let report = run(&trace, &self.settings(cell.policy, cell.mechanism))?;
                report.write_dir(&self.out.join(&cell.label))?;
                Ok(SummaryRow::new(&cell.label, cell.policy.as_str(), cell.mechanism.as_str(), cell.lambda, &report))
            })
            .collect();
        let mut rows = results.into_iter().collect::<Result<Vec<_>>>()?;
        let baselines: Vec<(String, Option<f64>, f64)> = rows
            .iter()
            .filter(|r| r.mechanism == MechanismKind::Proportional.as_str())
            .map(|r| (r.policy.clone(), r.lambda, r.avg_jct))
            .collect();
        for r in &mut rows {
            r.speedup = baselines
                .iter()
                .find(|b| b.0 == r.policy && b.1 == r.lambda)
                .map(|b| if r.avg_jct > 0.0 { b.2 / r.avg_jct } else { 1.0 });
        }
        std::fs::create_dir_all(&self.out)?;
        write_summary(&rows, std::fs::File::create(self.out.join("summary.csv"))?)?;
        Ok(rows)
    }
}
