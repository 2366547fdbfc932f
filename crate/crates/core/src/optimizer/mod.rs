//! Per-round optimum: the pooled-resource integer program that upper-bounds
//! any mechanism, the placement LP that maps its cells back onto servers, and
//! the multi-type variant.

pub mod bnb;
mod hetero;
mod placement;

pub use hetero::{fair_share_default, refill_unassigned, solve_hetero_ilp, HeteroJob, HeteroSolution, MachineType, Refill};
pub use placement::{solve_placement_lp, PlacementSolution};

use crate::cluster::ServerSpec;
use crate::error::{Result, SimError};
use crate::profiler::SensitivityMatrix;
use bnb::{Choice, Mckp};

/// Samples completed in one round at `throughput` samples/s, rounded down.
/// Every objective and comparison uses these integer units.
pub fn progress_units(throughput: f64, round_minutes: f64) -> u64 {
    (throughput * round_minutes * 60.0).floor() as u64
}

#[derive(Debug, Clone)]
pub struct OptJob<'a> {
    pub id: u64,
    pub gpus: u32,
    pub matrix: &'a SensitivityMatrix,
    /// Proportional-share cell `(C_g, M_g)`.
    pub prop: (u32, f64),
}

impl OptJob<'_> {
    pub fn baseline(&self, round_minutes: f64) -> u64 {
        let w = self.matrix.at(self.prop.0, self.prop.1).expect("proportional cell on the grid");
        progress_units(w, round_minutes)
    }
}

#[derive(Debug, Clone)]
pub struct OptInstance<'a> {
    pub jobs: Vec<OptJob<'a>>,
    pub servers: Vec<ServerSpec>,
    pub round_minutes: f64,
}

impl OptInstance<'_> {
    pub fn total_cpus(&self) -> f64 {
        self.servers.iter().map(|s| s.cpus as f64).sum()
    }

    pub fn total_mem(&self) -> f64 {
        self.servers.iter().map(|s| s.mem_gb).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IlpSolution {
    /// Chosen `(cpus, mem_gb)` per job, in instance order.
    pub cells: Vec<(u32, f64)>,
    pub objective: u64,
    /// Sum of proportional-share progress.
    pub baseline: u64,
    pub proven: bool,
}

/// Cells worth at least `floor` units, as knapsack choices over `dims`
/// dimensions with CPU and memory written at `offset`.
pub(crate) fn cell_choices(
    matrix: &SensitivityMatrix,
    floor: u64,
    round_minutes: f64,
    dims: usize,
    offset: usize,
    extra: &[(usize, f64)],
    bonus: u64,
) -> (Vec<Choice>, Vec<(u32, f64)>) {
    let mut choices = Vec::new();
    let mut cells = Vec::new();
    for (ci, &c) in matrix.cpu_axis.iter().enumerate() {
        for (mi, &m) in matrix.mem_axis.iter().enumerate() {
            let w = progress_units(matrix.get(ci, mi), round_minutes);
            if w < floor {
                continue;
            }
            let mut usage = vec![0.0; dims];
            usage[offset] = c as f64;
            usage[offset + 1] = m;
            for &(d, v) in extra {
                usage[d] = v;
            }
            choices.push(Choice { weight: w + bonus, usage });
            cells.push((c, m));
        }
    }
    (choices, cells)
}

/// Best `(c, m)` cell per job when all CPU and memory is pooled, subject to
/// every job doing at least as well as its proportional share.
pub fn solve_ideal_ilp(instance: &OptInstance, node_limit: Option<u64>) -> Result<IlpSolution> {
    let rm = instance.round_minutes;
    let mut groups = Vec::with_capacity(instance.jobs.len());
    let mut cells = Vec::with_capacity(instance.jobs.len());
    let mut baseline = 0;
    for j in &instance.jobs {
        let b = j.baseline(rm);
        baseline += b;
        let (choices, c) = cell_choices(j.matrix, b, rm, 2, 0, &[], 0);
        groups.push(choices);
        cells.push(c);
    }
    let mckp = Mckp { capacity: vec![instance.total_cpus(), instance.total_mem()], groups };
    let sol = mckp
        .solve(baseline, node_limit)
        .ok_or_else(|| SimError::Invariant("proportional shares exceed the cluster totals".into()))?;
    Ok(IlpSolution {
        cells: sol.picks.iter().enumerate().map(|(j, &i)| cells[j][i]).collect(),
        objective: sol.value,
        baseline,
        proven: sol.proven,
    })
}
