use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{Result, SimError};

/// Which jobs the averages are taken over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Monitor {
    All,
    /// The `n` jobs in the middle of the trace by id.
    Middle(usize),
}

impl Default for Monitor {
    fn default() -> Self {
        Monitor::Middle(1000)
    }
}

impl Monitor {
    /// Selects from ids sorted ascending.
    pub fn select(&self, sorted_ids: &[u64]) -> Vec<u64> {
        match *self {
            Monitor::All => sorted_ids.to_vec(),
            Monitor::Middle(n) if sorted_ids.len() <= n => sorted_ids.to_vec(),
            Monitor::Middle(n) => {
                let start = (sorted_ids.len() - n) / 2;
                sorted_ids[start..start + n].to_vec()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JobRecord {
    pub job_id: u64,
    pub model: String,
    pub task: String,
    pub gpus: u32,
    pub arrival: f64,
    /// When profiling finished and the job could first be scheduled.
    pub ready: f64,
    pub start: f64,
    pub finish: f64,
    pub jct: f64,
    pub restarts: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundRecord {
    pub round: u64,
    pub time: f64,
    pub gpu_util: f64,
    pub cpu_util: f64,
    pub mem_util: f64,
    pub running: usize,
    pub queued: usize,
    /// Samples the placed jobs complete this round, ignoring restarts.
    pub progress: u64,
    pub opt_objective: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsReport {
    pub jobs: Vec<JobRecord>,
    pub rounds: Vec<RoundRecord>,
    pub total_jobs: usize,
    pub completed: usize,
    pub avg_jct: f64,
    pub p99_jct: f64,
    pub makespan: f64,
}

/// Nearest-rank percentile of an ascending slice.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

impl MetricsReport {
    pub(crate) fn summarize(jobs: Vec<JobRecord>, rounds: Vec<RoundRecord>, total_jobs: usize, completed: usize, makespan: f64) -> Self {
        let mut jcts: Vec<f64> = jobs.iter().map(|j| j.jct).collect();
        jcts.sort_by(f64::total_cmp);
        let avg_jct = if jcts.is_empty() { 0.0 } else { jcts.iter().sum::<f64>() / jcts.len() as f64 };
        let p99_jct = percentile(&jcts, 99.0);
        MetricsReport { jobs, rounds, total_jobs, completed, avg_jct, p99_jct, makespan }
    }

    pub fn mean_utilization(&self) -> (f64, f64, f64) {
        if self.rounds.is_empty() {
            return (0.0, 0.0, 0.0);
        }
        let n = self.rounds.len() as f64;
        let s = self.rounds.iter().fold((0.0, 0.0, 0.0), |a, r| (a.0 + r.gpu_util, a.1 + r.cpu_util, a.2 + r.mem_util));
        (s.0 / n, s.1 / n, s.2 / n)
    }

    pub fn write_metrics<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for j in &self.jobs {
            w.serialize(j)?;
        }
        if self.jobs.is_empty() {
            w.write_record(["job_id", "model", "task", "gpus", "arrival", "ready", "start", "finish", "jct", "restarts"])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_utilization<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rounds {
            w.serialize(r)?;
        }
        if self.rounds.is_empty() {
            w.write_record([
                "round", "time", "gpu_util", "cpu_util", "mem_util", "running", "queued", "progress", "opt_objective",
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `metrics.csv` and `utilization.csv` into `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        self.write_metrics(std::fs::File::create(dir.join("metrics.csv"))?)?;
        self.write_utilization(std::fs::File::create(dir.join("utilization.csv"))?)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub label: String,
    pub policy: String,
    pub mechanism: String,
    pub lambda: Option<f64>,
    pub jobs: usize,
    pub monitored: usize,
    pub completed: usize,
    pub avg_jct: f64,
    pub p99_jct: f64,
    pub makespan: f64,
    pub gpu_util: f64,
    pub cpu_util: f64,
    pub mem_util: f64,
    /// Baseline average JCT over this run's, when a baseline exists.
    pub speedup: Option<f64>,
}

impl SummaryRow {
    pub fn new(label: &str, policy: &str, mechanism: &str, lambda: Option<f64>, r: &MetricsReport) -> Self {
        let (g, c, m) = r.mean_utilization();
        SummaryRow {
            label: label.to_string(),
            policy: policy.to_string(),
            mechanism: mechanism.to_string(),
            lambda,
            jobs: r.total_jobs,
            monitored: r.jobs.len(),
            completed: r.completed,
            avg_jct: r.avg_jct,
            p99_jct: r.p99_jct,
            makespan: r.makespan,
            gpu_util: g,
            cpu_util: c,
            mem_util: m,
            speedup: None,
        }
    }
}

pub fn write_summary<W: Write>(rows: &[SummaryRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_speedups<W: Write>(speedups: &[(u64, f64)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["job_id", "speedup"])?;
    for (id, s) in speedups {
        w.write_record([id.to_string(), s.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Per-job `JCT_baseline / JCT_variant` over the jobs both runs monitored.
pub fn job_speedups(baseline: &MetricsReport, variant: &MetricsReport) -> Result<Vec<(u64, f64)>> {
    let base: BTreeMap<u64, f64> = baseline.jobs.iter().map(|j| (j.job_id, j.jct)).collect();
    let var: BTreeMap<u64, f64> = variant.jobs.iter().map(|j| (j.job_id, j.jct)).collect();
    if base.len() != var.len() || !base.keys().eq(var.keys()) || baseline.total_jobs != variant.total_jobs {
        return Err(SimError::Mismatch("runs were made on different traces".into()));
    }
    Ok(base.iter().map(|(id, b)| (*id, if var[id] > 0.0 { b / var[id] } else { 1.0 })).collect())
}
