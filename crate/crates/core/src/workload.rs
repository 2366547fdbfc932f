//! Synthetic trace generation and CSV trace ingestion.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::cluster::ServerSpec;
use crate::error::{Result, SimError};
use crate::job::{Job, JobClass, Task};
use crate::oracle::oracle_throughput;
use crate::presets;

pub const MAX_GPU_DEMAND: u32 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArrivalMode {
    /// Every job arrives at t = 0.
    Static,
    /// Poisson arrivals at `lambda` jobs/hour.
    Dynamic,
}

/// Job duration `10^x` minutes with `x` uniform on `low` with probability
/// `p_low`, otherwise uniform on `high`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DurationDist {
    pub low: (f64, f64),
    pub high: (f64, f64),
    pub p_low: f64,
}

impl Default for DurationDist {
    fn default() -> Self {
        DurationDist { low: (1.5, 3.0), high: (3.0, 4.0), p_low: 0.8 }
    }
}

impl DurationDist {
    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        let pick: f64 = rng.gen();
        let u: f64 = rng.gen();
        let (a, b) = if pick < self.p_low { self.low } else { self.high };
        10f64.powf(a + (b - a) * u)
    }

    pub fn cdf(&self, minutes: f64) -> f64 {
        let x = minutes.log10();
        let part = |(a, b): (f64, f64)| ((x - a) / (b - a)).clamp(0.0, 1.0);
        self.p_low * part(self.low) + (1.0 - self.p_low) * part(self.high)
    }
}

pub fn default_gpu_demand() -> Vec<(u32, f64)> {
    vec![(1, 0.7), (2, 0.1), (4, 0.1), (8, 0.05), (16, 0.05)]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceSpec {
    pub mode: ArrivalMode,
    pub n_jobs: usize,
    /// Jobs per hour; ignored for static traces.
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    /// Percent of image, language and speech jobs.
    pub split: (u32, u32, u32),
    /// `(gpus, probability)` pairs.
    #[serde(default = "default_gpu_demand")]
    pub gpu_demand: Vec<(u32, f64)>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub duration: DurationDist,
}

fn default_lambda() -> f64 {
    1.0
}

impl TraceSpec {
    pub fn dynamic(n_jobs: usize, lambda: f64, split: (u32, u32, u32), seed: u64) -> Self {
        TraceSpec {
            mode: ArrivalMode::Dynamic,
            n_jobs,
            lambda,
            split,
            gpu_demand: default_gpu_demand(),
            seed,
            duration: DurationDist::default(),
        }
    }

    pub fn single_gpu(mut self) -> Self {
        self.gpu_demand = vec![(1, 1.0)];
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SimError::InvalidSpec(m));
        let (a, b, c) = self.split;
        if a + b + c != 100 {
            return bad(format!("workload split {a}+{b}+{c} does not sum to 100"));
        }
        let total: f64 = self.gpu_demand.iter().map(|p| p.1).sum();
        if self.gpu_demand.is_empty() || (total - 1.0).abs() > 1e-9 || self.gpu_demand.iter().any(|p| p.1 < 0.0) {
            return bad(format!("GPU demand probabilities sum to {total}, not 1"));
        }
        if let Some(&(g, _)) = self.gpu_demand.iter().find(|p| p.0 == 0 || p.0 > MAX_GPU_DEMAND) {
            return bad(format!("GPU demand {g} outside 1..={MAX_GPU_DEMAND}"));
        }
        if self.mode == ArrivalMode::Dynamic && !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return bad(format!("arrival rate must be positive, got {}", self.lambda));
        }
        let d = &self.duration;
        if !(0.0..=1.0).contains(&d.p_low) || d.low.0 > d.low.1 || d.high.0 > d.high.1 {
            return bad("malformed duration distribution".into());
        }
        Ok(())
    }
}

/// The model classes a trace draws from, grouped by task.
#[derive(Debug, Clone, PartialEq)]
pub struct Catalog {
    pub classes: Vec<Arc<JobClass>>,
}

impl Default for Catalog {
    fn default() -> Self {
        Catalog::new(presets::all())
    }
}

impl Catalog {
    pub fn new(classes: Vec<JobClass>) -> Self {
        Catalog { classes: classes.into_iter().map(Arc::new).collect() }
    }

    pub fn by_task(&self, task: Task) -> Vec<Arc<JobClass>> {
        self.classes.iter().filter(|c| c.task == task).cloned().collect()
    }

    pub fn by_name(&self, name: &str) -> Option<Arc<JobClass>> {
        self.classes.iter().find(|c| c.name == name).cloned()
    }

    fn pick<R: Rng>(&self, task: Task, rng: &mut R) -> Result<Arc<JobClass>> {
        let options = self.by_task(task);
        if options.is_empty() {
            return Err(SimError::InvalidSpec(format!("no job class for task {task}")));
        }
        Ok(options[rng.gen_range(0..options.len())].clone())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceJob {
    pub id: u64,
    pub arrival: f64,
    pub gpu_demand: u32,
    /// Run time at the GPU-proportional share.
    pub duration_minutes: f64,
    pub class: Arc<JobClass>,
    pub total_samples: u64,
}

impl TraceJob {
    pub fn to_job(&self) -> Job {
        Job::new(self.id, self.class.clone(), self.gpu_demand, self.arrival, self.total_samples)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    pub jobs: Vec<TraceJob>,
}

/// Work that takes `duration_minutes` at the proportional share of `server`.
pub fn total_samples_for(class: &JobClass, gpus: u32, duration_minutes: f64, server: &ServerSpec) -> u64 {
    let (c, m) = server.proportional_demand(gpus);
    let t = oracle_throughput(class, gpus, c.max(1), m, server.storage_bw);
    ((duration_minutes * 60.0 * t).round() as u64).max(1)
}

fn task_for(split: (u32, u32, u32), u: f64) -> Task {
    let x = u * 100.0;
    if x < split.0 as f64 {
        Task::Image
    } else if x < (split.0 + split.1) as f64 {
        Task::Language
    } else {
        Task::Speech
    }
}

/// Draws a trace. Every job consumes the same sequence of random draws, so
/// traces that differ only in `lambda` differ only in their time scale.
pub fn gen_trace(spec: &TraceSpec, catalog: &Catalog, server: &ServerSpec) -> Result<Trace> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let exp = Exp::new(1.0).expect("unit rate");
    let mut clock = 0.0;
    let mut jobs = Vec::with_capacity(spec.n_jobs);
    for id in 0..spec.n_jobs as u64 {
        let task = task_for(spec.split, rng.gen());
        let class = catalog.pick(task, &mut rng)?;
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut gpus = spec.gpu_demand.last().unwrap().0;
        for &(g, p) in &spec.gpu_demand {
            acc += p;
            if u < acc {
                gpus = g;
                break;
            }
        }
        let duration = spec.duration.sample(&mut rng);
        let gap: f64 = exp.sample(&mut rng);
        let arrival = match spec.mode {
            ArrivalMode::Static => 0.0,
            ArrivalMode::Dynamic => {
                clock += gap;
                clock * 60.0 / spec.lambda
            }
        };
        let total_samples = total_samples_for(&class, gpus, duration, server);
        jobs.push(TraceJob { id, arrival, gpu_demand: gpus, duration_minutes: duration, class, total_samples });
    }
    Ok(Trace { jobs })
}

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    job_id: u64,
    arrival_minutes: f64,
    gpu_demand: u32,
    duration_minutes: f64,
    #[serde(default)]
    task: Option<String>,
    #[serde(default)]
    model: Option<String>,
}

/// Columns `job_id, arrival_minutes, gpu_demand, duration_minutes, task,
/// model`.
pub fn write_trace<W: std::io::Write>(trace: &Trace, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for j in &trace.jobs {
        w.serialize(Row {
            job_id: j.id,
            arrival_minutes: j.arrival,
            gpu_demand: j.gpu_demand,
            duration_minutes: j.duration_minutes,
            task: Some(j.class.task.to_string()),
            model: Some(j.class.name.clone()),
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_trace(trace: &Trace, path: &Path) -> Result<()> {
    write_trace(trace, std::fs::File::create(path)?)
}

/// Parses a trace. Rows without a task get one drawn from `split`; rows
/// without a model get one drawn uniformly within their task.
pub fn read_trace<R: std::io::Read>(
    input: R,
    catalog: &Catalog,
    server: &ServerSpec,
    split: (u32, u32, u32),
    seed: u64,
) -> Result<Trace> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut reader = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(input);
    let headers = reader.headers()?.clone();
    let mut jobs = Vec::new();
    let mut seen = BTreeMap::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| SimError::Trace {
            line: e.position().map_or(0, |p| p.line() as usize),
            msg: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let fail = |msg: String| SimError::Trace { line, msg };
        let row: Row = rec.deserialize(Some(&headers)).map_err(|e| fail(e.to_string()))?;
        if row.gpu_demand == 0 || row.gpu_demand > MAX_GPU_DEMAND {
            return Err(fail(format!("gpu_demand {} outside 1..={MAX_GPU_DEMAND}", row.gpu_demand)));
        }
        if !(row.arrival_minutes >= 0.0 && row.arrival_minutes.is_finite()) {
            return Err(fail(format!("bad arrival {}", row.arrival_minutes)));
        }
        if !(row.duration_minutes > 0.0 && row.duration_minutes.is_finite()) {
            return Err(fail(format!("bad duration {}", row.duration_minutes)));
        }
        if seen.insert(row.job_id, line).is_some() {
            return Err(fail(format!("duplicate job_id {}", row.job_id)));
        }
        let task = match row.task.as_deref().filter(|t| !t.is_empty()) {
            Some(t) => Some(t.parse::<Task>().map_err(|e| fail(e.to_string()))?),
            None => None,
        };
        let class = match row.model.as_deref().filter(|m| !m.is_empty()) {
            Some(name) => {
                let c = catalog.by_name(name).ok_or_else(|| fail(format!("unknown model `{name}`")))?;
                if let Some(t) = task.filter(|t| *t != c.task) {
                    return Err(fail(format!("model `{name}` is not a {t} model")));
                }
                c
            }
            None => {
                let task = task.unwrap_or_else(|| task_for(split, rng.gen()));
                catalog.pick(task, &mut rng).map_err(|e| fail(e.to_string()))?
            }
        };
        let total_samples = total_samples_for(&class, row.gpu_demand, row.duration_minutes, server);
        jobs.push(TraceJob {
            id: row.job_id,
            arrival: row.arrival_minutes,
            gpu_demand: row.gpu_demand,
            duration_minutes: row.duration_minutes,
            class,
            total_samples,
        });
    }
    Ok(Trace { jobs })
}

pub fn load_trace(path: &Path, catalog: &Catalog, server: &ServerSpec, split: (u32, u32, u32), seed: u64) -> Result<Trace> {
    read_trace(std::fs::File::open(path)?, catalog, server, split, seed)
}
