//! Per-round placement: which server(s) each runnable job lands on and how
//! much CPU and memory it receives there.

mod greedy;
mod opt;
pub mod packer;
mod proportional;
mod tune;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::cluster::{Allocation, ClusterSpec};
use crate::error::{Result, SimError};
use crate::profiler::JobProfile;

pub use greedy::place_greedy;
pub use opt::{place_opt, OptSettings};
pub use packer::{split, Fit, Layout, Packer};
pub use proportional::place_proportional;
pub use tune::{place_tune, place_tune_hinted};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MechanismKind {
    Proportional,
    Greedy,
    Tune,
    Opt,
}

impl MechanismKind {
    pub const ALL: [MechanismKind; 4] =
        [MechanismKind::Proportional, MechanismKind::Greedy, MechanismKind::Tune, MechanismKind::Opt];

    pub fn as_str(&self) -> &'static str {
        match self {
            MechanismKind::Proportional => "proportional",
            MechanismKind::Greedy => "greedy",
            MechanismKind::Tune => "tune",
            MechanismKind::Opt => "opt",
        }
    }
}

impl fmt::Display for MechanismKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MechanismKind {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "proportional" | "prop" => Ok(MechanismKind::Proportional),
            "greedy" => Ok(MechanismKind::Greedy),
            "tune" => Ok(MechanismKind::Tune),
            "opt" => Ok(MechanismKind::Opt),
            other => Err(SimError::Config(format!("unknown mechanism `{other}`"))),
        }
    }
}

/// A runnable job as a mechanism sees it.
#[derive(Debug, Clone)]
pub struct SchedJob {
    pub id: u64,
    pub gpus: u32,
    pub profile: Arc<JobProfile>,
}

impl SchedJob {
    pub fn new(id: u64, profile: Arc<JobProfile>) -> Self {
        SchedJob { id, gpus: profile.gpus, profile }
    }

    pub fn prop(&self) -> (u32, f64) {
        (self.profile.prop_cpus, self.profile.prop_mem_gb)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RoundPlan {
    pub allocations: Vec<Allocation>,
    /// Runnable jobs that received nothing this round.
    pub skipped: Vec<u64>,
    /// Jobs pushed below their requested CPU/memory to make room.
    pub downgrades: Vec<u64>,
    /// Ideal-ILP objective in progress units, when the mechanism computes it.
    pub opt_objective: Option<u64>,
    /// Jobs the placement LP split fractionally, when it ran.
    pub fragmented: Option<usize>,
}

impl RoundPlan {
    pub fn allocation(&self, job: u64) -> Option<&Allocation> {
        self.allocations.iter().find(|a| a.job_id == job)
    }

    pub fn layouts(&self) -> BTreeMap<u64, Layout> {
        self.allocations.iter().map(|a| (a.job_id, a.gpu_layout())).collect()
    }

    /// Sum of matrix throughputs of the placed jobs.
    pub fn aggregate_throughput(&self, jobs: &[SchedJob]) -> f64 {
        let by_id: BTreeMap<u64, &SchedJob> = jobs.iter().map(|j| (j.id, j)).collect();
        self.allocations
            .iter()
            .map(|a| {
                let t = a.totals();
                by_id[&a.job_id].profile.throughput(t.cpus, t.mem_gb)
            })
            .sum()
    }

    pub(crate) fn from_packer(packer: &Packer, jobs: &[SchedJob], downgrades: Vec<u64>) -> Self {
        let mut allocations = Vec::new();
        let mut skipped = Vec::new();
        for j in jobs {
            match packer.allocation(j.id) {
                Some(a) => allocations.push(a),
                None => skipped.push(j.id),
            }
        }
        allocations.sort_by_key(|a| a.job_id);
        let mut downgrades = downgrades;
        downgrades.sort();
        downgrades.dedup();
        RoundPlan { allocations, skipped, downgrades, opt_objective: None, fragmented: None }
    }
}

/// Admits jobs in queue order while their GPU demand fits in what is left.
/// Returns indices into `demands`.
pub fn select_runnable(demands: &[u32], free_gpus: u32) -> Vec<usize> {
    let mut left = free_gpus;
    let mut out = Vec::new();
    for (i, &g) in demands.iter().enumerate() {
        if left == 0 {
            break;
        }
        if g <= left {
            out.push(i);
            left -= g;
        }
    }
    out
}

/// Builds a round plan. `jobs` must be in policy order. Jobs that ran in
/// `previous` are offered their old GPUs back; the mechanisms that can
/// reshuffle keep the old layout unless moving yields strictly more
/// aggregate throughput.
pub fn plan_round(
    kind: MechanismKind,
    jobs: &[SchedJob],
    spec: &ClusterSpec,
    previous: Option<&RoundPlan>,
    opt: &OptSettings,
) -> Result<RoundPlan> {
    let pinned: BTreeMap<u64, Layout> = match previous {
        Some(prev) => {
            let old = prev.layouts();
            jobs.iter().filter_map(|j| old.get(&j.id).map(|l| (j.id, l.clone()))).collect()
        }
        None => BTreeMap::new(),
    };
    let none = BTreeMap::new();
    let sticky_or_fresh = |place: &dyn Fn(&BTreeMap<u64, Layout>, &BTreeMap<u64, Layout>) -> Result<RoundPlan>| {
        let fresh = place(&none, &pinned)?;
        if pinned.is_empty() {
            return Ok(fresh);
        }
        let sticky = place(&pinned, &none)?;
        let keep = sticky.skipped.len() <= fresh.skipped.len()
            && sticky.aggregate_throughput(jobs) >= fresh.aggregate_throughput(jobs);
        Ok(if keep { sticky } else { fresh })
    };
    match kind {
        MechanismKind::Proportional => place_proportional(jobs, spec, &pinned),
        MechanismKind::Greedy => sticky_or_fresh(&|p, _| Ok(place_greedy(jobs, spec, p))),
        MechanismKind::Tune => sticky_or_fresh(&|p, h| place_tune_hinted(jobs, spec, p, h)),
        MechanismKind::Opt => {
            let fallback = sticky_or_fresh(&|p, h| place_tune_hinted(jobs, spec, p, h))?;
            place_opt(jobs, spec, opt, fallback)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn admission_examples() {
        assert_eq!(select_runnable(&[4, 4, 4], 8), vec![0, 1]);
        assert_eq!(select_runnable(&[16, 1], 8), vec![1]);
        assert_eq!(select_runnable(&[4, 4, 2, 1], 7), vec![0, 2, 3]);
        assert!(select_runnable(&[1, 1], 0).is_empty());
    }

    #[test]
    fn kind_parsing() {
        for k in MechanismKind::ALL {
            assert_eq!(k.as_str().parse::<MechanismKind>().unwrap(), k);
        }
        assert!("drf".parse::<MechanismKind>().is_err());
    }
}
