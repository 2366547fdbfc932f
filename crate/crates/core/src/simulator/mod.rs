//! Discrete-event engine: arrivals, profiling, round-based scheduling,
//! deployment with leases, progress and completions.

mod metrics;

pub use metrics::{job_speedups, percentile, write_speedups, write_summary, JobRecord, MetricsReport, Monitor, RoundRecord, SummaryRow};

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap};
use std::sync::Arc;

use rayon::prelude::*;

use crate::cluster::{ClusterSpec, ClusterState};
use crate::error::{Result, SimError};
use crate::job::{Job, JobState};
use crate::mechanism::{plan_round, Layout, MechanismKind, OptSettings, RoundPlan, SchedJob};
use crate::optimizer::progress_units;
use crate::oracle::oracle_throughput;
use crate::policy::{order_queue, PolicyKind, QueueEntry};
use crate::profiler::{JobProfile, DEFAULT_EPS_SAT, DEFAULT_THRESHOLD};
use crate::workload::Trace;

#[derive(Debug, Clone, PartialEq)]
pub struct SimSettings {
    pub cluster: ClusterSpec,
    pub policy: PolicyKind,
    pub mechanism: MechanismKind,
    /// Whether a job waits for its profiling before it can be scheduled.
    pub profiling_in_jct: bool,
    /// Seconds of lost progress when a job resumes on different GPUs.
    pub restart_penalty_s: f64,
    pub threshold: f64,
    pub eps_sat: f64,
    pub monitor: Monitor,
    pub opt: OptSettings,
    /// End the run once every monitored job has finished. Monitored results
    /// are unaffected; later rounds and the makespan are cut short.
    pub stop_when_monitored_done: bool,
}

impl SimSettings {
    pub fn new(cluster: ClusterSpec, policy: PolicyKind, mechanism: MechanismKind) -> Self {
        SimSettings {
            cluster,
            policy,
            mechanism,
            profiling_in_jct: true,
            restart_penalty_s: 30.0,
            threshold: DEFAULT_THRESHOLD,
            eps_sat: DEFAULT_EPS_SAT,
            monitor: Monitor::default(),
            opt: OptSettings::default(),
            stop_when_monitored_done: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    Arrival(usize),
    Ready(usize),
    Round(u64),
    Completion(usize),
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time: f64,
    seq: u64,
    kind: Kind,
}

impl PartialEq for Event {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Event {}
impl PartialOrd for Event {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Event {
    fn cmp(&self, o: &Self) -> Ordering {
        self.time.total_cmp(&o.time).then(self.seq.cmp(&o.seq))
    }
}

struct SimJob {
    job: Job,
    profile: Arc<JobProfile>,
    ready: f64,
    start: Option<f64>,
    finish: Option<f64>,
    restarts: u32,
    has_run: bool,
}

struct Engine<'a> {
    s: &'a SimSettings,
    jobs: Vec<SimJob>,
    heap: BinaryHeap<Reverse<Event>>,
    seq: u64,
    state: ClusterState,
    active: BTreeSet<usize>,
    next_round: Option<u64>,
    last_round: Option<u64>,
    prev_runnable: Vec<u64>,
    prev_plan: Option<RoundPlan>,
    prev_layouts: BTreeMap<u64, Layout>,
    rounds: Vec<metrics::RoundRecord>,
    monitored: BTreeSet<u64>,
    monitored_left: usize,
    index: HashMap<u64, usize>,
}

impl Engine<'_> {
    fn push(&mut self, time: f64, kind: Kind) {
        self.seq += 1;
        self.heap.push(Reverse(Event { time, seq: self.seq, kind }));
    }

    fn round_time(&self, k: u64) -> f64 {
        k as f64 * self.s.cluster.round_minutes
    }

    fn ensure_round(&mut self, now: f64) {
        if self.next_round.is_some() {
            return;
        }
        let mut k = (now / self.s.cluster.round_minutes).ceil() as u64;
        while self.round_time(k) < now {
            k += 1;
        }
        if let Some(last) = self.last_round {
            k = k.max(last + 1);
        }
        self.next_round = Some(k);
        self.push(self.round_time(k), Kind::Round(k));
    }

    fn round(&mut self, k: u64) -> Result<()> {
        let t = self.round_time(k);
        self.next_round = None;
        self.last_round = Some(k);

        let entries: Vec<QueueEntry> = self
            .active
            .iter()
            .map(|&i| QueueEntry::from_job(&self.jobs[i].job, self.jobs[i].profile.prop_throughput))
            .collect();
        let ordered = order_queue(&entries, t, self.s.policy);
        let demands: Vec<u32> = ordered.iter().map(|e| e.gpu_demand).collect();
        let picked = crate::mechanism::select_runnable(&demands, self.s.cluster.total_gpus());
        let runnable: Vec<u64> = picked.iter().map(|&p| ordered[p].id).collect();

        let plan = match &self.prev_plan {
            Some(prev) if runnable == self.prev_runnable => prev.clone(),
            prev => {
                let sched: Vec<SchedJob> =
                    runnable.iter().map(|id| SchedJob::new(*id, self.jobs[self.index[id]].profile.clone())).collect();
                plan_round(self.s.mechanism, &sched, &self.s.cluster, prev.as_ref(), &self.s.opt)?
            }
        };

        // deploy
        let held: Vec<u64> = self.state.running().keys().copied().collect();
        for id in held {
            self.state.release(id)?;
            self.state.clear_lease(id);
        }
        let mut layouts = BTreeMap::new();
        let round_s = self.s.cluster.round_minutes * 60.0;
        let bw = self.s.cluster.reference_server().storage_bw;
        let mut progress = 0u64;
        for alloc in &plan.allocations {
            self.state.apply(alloc).map_err(|e| SimError::Invariant(format!("round {k} at t={t}: {e}")))?;
            let layout = alloc.gpu_layout();
            let idx = self.index[&alloc.job_id];
            let kept = self.prev_layouts.get(&alloc.job_id) == Some(&layout);
            self.state.set_lease(alloc.job_id, kept);
            let sj = &mut self.jobs[idx];
            let penalty = if sj.has_run && !kept {
                sj.restarts += 1;
                self.s.restart_penalty_s.min(round_s)
            } else {
                0.0
            };
            sj.has_run = true;
            sj.start.get_or_insert(t);
            sj.job.state = JobState::Running;

            let tot = alloc.totals();
            let tput = oracle_throughput(&sj.job.class, tot.gpus, tot.cpus, tot.mem_gb, bw);
            progress += progress_units(tput, self.s.cluster.round_minutes);
            let remaining = sj.job.remaining_samples();
            let samples = (tput * (round_s - penalty)).floor() as u64;
            if tput > 0.0 && samples >= remaining {
                let secs = penalty + remaining as f64 / tput;
                sj.job.attained_service += tot.gpus as f64 * secs / 60.0;
                let when = (t + secs / 60.0).min(self.round_time(k + 1));
                self.push(when, Kind::Completion(idx));
            } else {
                sj.job.credit(samples);
                sj.job.attained_service += tot.gpus as f64 * self.s.cluster.round_minutes;
            }
            layouts.insert(alloc.job_id, layout);
        }
        for &i in &self.active {
            if !layouts.contains_key(&self.jobs[i].job.id) {
                self.jobs[i].job.state = JobState::Queued;
            }
        }
        self.state.check_invariants().map_err(|e| SimError::Invariant(format!("round {k} at t={t}: {e}")))?;

        let (g, c, m) = self.state.utilization();
        self.rounds.push(metrics::RoundRecord {
            round: k,
            time: t,
            gpu_util: g,
            cpu_util: c,
            mem_util: m,
            running: plan.allocations.len(),
            queued: self.active.len() - plan.allocations.len(),
            progress,
            opt_objective: plan.opt_objective,
        });
        self.prev_layouts = layouts;
        self.prev_runnable = runnable;
        self.prev_plan = Some(plan);
        if !self.active.is_empty() {
            self.ensure_round(t + self.s.cluster.round_minutes);
        }
        Ok(())
    }

    fn complete(&mut self, idx: usize, now: f64) -> Result<()> {
        let sj = &mut self.jobs[idx];
        let left = sj.job.remaining_samples();
        sj.job.credit(left);
        debug_assert_eq!(sj.job.state, JobState::Finished);
        sj.finish = Some(now);
        let id = sj.job.id;
        self.active.remove(&idx);
        if self.state.allocation(id).is_some() {
            self.state.release(id)?;
            self.state.clear_lease(id);
        }
        if self.monitored.contains(&id) {
            self.monitored_left -= 1;
        }
        Ok(())
    }
}

/// Simulates `trace` to completion.
pub fn run(trace: &Trace, s: &SimSettings) -> Result<MetricsReport> {
    s.cluster.validate()?;
    if !s.cluster.is_homogeneous() {
        return Err(SimError::InvalidSpec("simulation requires identical servers".into()));
    }
    if !(s.restart_penalty_s >= 0.0) {
        return Err(SimError::InvalidSpec("restart penalty must be non-negative".into()));
    }
    let total_gpus = s.cluster.total_gpus();
    let server = s.cluster.reference_server().clone();
    let mut cache: HashMap<(String, u32), Arc<JobProfile>> = HashMap::new();
    let mut jobs = Vec::with_capacity(trace.jobs.len());
    let mut index = HashMap::new();
    for tj in &trace.jobs {
        if tj.gpu_demand == 0 || tj.gpu_demand > total_gpus {
            return Err(SimError::Demand { job: tj.id, gpus: tj.gpu_demand, max: total_gpus });
        }
        if index.insert(tj.id, jobs.len()).is_some() {
            return Err(SimError::InvalidSpec(format!("duplicate job id {}", tj.id)));
        }
        let profile = cache
            .entry((tj.class.name.clone(), tj.gpu_demand))
            .or_insert_with(|| Arc::new(JobProfile::build(&tj.class, tj.gpu_demand, &server, s.threshold, s.eps_sat)))
            .clone();
        jobs.push(SimJob { job: tj.to_job(), profile, ready: tj.arrival, start: None, finish: None, restarts: 0, has_run: false });
    }
    let mut ids: Vec<u64> = trace.jobs.iter().map(|j| j.id).collect();
    ids.sort_unstable();
    let monitored: BTreeSet<u64> = s.monitor.select(&ids).into_iter().collect();

    let mut e = Engine {
        s,
        jobs,
        heap: BinaryHeap::new(),
        seq: 0,
        state: ClusterState::new(&s.cluster),
        active: BTreeSet::new(),
        next_round: None,
        last_round: None,
        prev_runnable: Vec::new(),
        prev_plan: None,
        prev_layouts: BTreeMap::new(),
        rounds: Vec::new(),
        monitored_left: monitored.len(),
        monitored,
        index,
    };
    for i in 0..e.jobs.len() {
        let t = e.jobs[i].job.arrival;
        e.push(t, Kind::Arrival(i));
    }

    while let Some(Reverse(ev)) = e.heap.pop() {
        match ev.kind {
            Kind::Arrival(i) => {
                let delay = if s.profiling_in_jct { e.jobs[i].profile.profiling_minutes } else { 0.0 };
                e.jobs[i].ready = ev.time + delay;
                e.push(ev.time + delay, Kind::Ready(i));
            }
            Kind::Ready(i) => {
                e.active.insert(i);
                e.ensure_round(ev.time);
            }
            Kind::Round(k) => e.round(k)?,
            Kind::Completion(i) => {
                e.complete(i, ev.time)?;
                if s.stop_when_monitored_done && e.monitored_left == 0 {
                    break;
                }
            }
        }
    }

    let completed = e.jobs.iter().filter(|j| j.finish.is_some()).count();
    let first_arrival = e.jobs.iter().map(|j| j.job.arrival).fold(f64::INFINITY, f64::min);
    let makespan = e
        .jobs
        .iter()
        .filter_map(|j| j.finish)
        .fold(None, |a: Option<f64>, f| Some(a.map_or(f, |a| a.max(f))))
        .map_or(0.0, |last| last - first_arrival);
    let mut records: Vec<JobRecord> = e
        .jobs
        .iter()
        .filter(|j| e.monitored.contains(&j.job.id))
        .filter_map(|j| {
            let finish = j.finish?;
            Some(JobRecord {
                job_id: j.job.id,
                model: j.job.class.name.clone(),
                task: j.job.class.task.to_string(),
                gpus: j.job.gpu_demand,
                arrival: j.job.arrival,
                ready: j.ready,
                start: j.start.unwrap_or(finish),
                finish,
                jct: finish - j.job.arrival,
                restarts: j.restarts,
            })
        })
        .collect();
    records.sort_by_key(|r| r.job_id);
    Ok(MetricsReport::summarize(records, e.rounds, trace.jobs.len(), completed, makespan))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub policy: PolicyKind,
    pub mechanism: MechanismKind,
    pub report: MetricsReport,
    /// Against the proportional run with the same policy.
    pub avg_speedup: f64,
    pub p99_speedup: f64,
    pub job_speedups: Vec<(u64, f64)>,
}

/// Runs every `(policy, mechanism)` on the same trace, adding proportional
/// baselines where missing, and reports speedups over those baselines.
pub fn compare(trace: &Trace, base: &SimSettings, runs: &[(PolicyKind, MechanismKind)]) -> Result<Vec<CompareRow>> {
    let mut all: Vec<(PolicyKind, MechanismKind)> = runs.to_vec();
    for &(p, _) in runs {
        if !all.contains(&(p, MechanismKind::Proportional)) {
            all.push((p, MechanismKind::Proportional));
        }
    }
    let reports: Vec<Result<MetricsReport>> = all
        .par_iter()
        .map(|&(policy, mechanism)| run(trace, &SimSettings { policy, mechanism, ..base.clone() }))
        .collect();
    let mut by_key = BTreeMap::new();
    for (k, r) in all.iter().zip(reports) {
        by_key.insert((k.0 as u8, k.1 as u8), r?);
    }
    runs.iter()
        .map(|&(policy, mechanism)| {
            let report = by_key[&(policy as u8, mechanism as u8)].clone();
            let baseline = &by_key[&(policy as u8, MechanismKind::Proportional as u8)];
            let ratio = |a: f64, b: f64| if b > 0.0 { a / b } else { 1.0 };
            Ok(CompareRow {
                policy,
                mechanism,
                avg_speedup: ratio(baseline.avg_jct, report.avg_jct),
                p99_speedup: ratio(baseline.p99_jct, report.p99_jct),
                job_speedups: job_speedups(baseline, &report)?,
                report,
            })
        })
        .collect()
}
