use super::bnb::{Choice, Mckp};
use super::{cell_choices, progress_units};
use crate::cluster::ServerSpec;
use crate::mechanism::select_runnable;
use crate::profiler::SensitivityMatrix;

/// `count` identical servers of one machine type.
#[derive(Debug, Clone, PartialEq)]
pub struct MachineType {
    pub server: ServerSpec,
    pub count: u32,
}

impl MachineType {
    fn capacity(&self) -> [f64; 3] {
        let k = self.count as f64;
        [self.server.gpus as f64 * k, self.server.cpus as f64 * k, self.server.mem_gb * k]
    }
}

#[derive(Debug, Clone)]
pub struct HeteroJob<'a> {
    pub id: u64,
    pub gpus: u32,
    /// One matrix per machine type.
    pub matrices: Vec<&'a SensitivityMatrix>,
    /// Throughput every assignment must at least match, samples/s.
    pub fair: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeteroSolution {
    /// `(type, cpus, mem_gb)` per job, `None` if left out.
    pub assignment: Vec<Option<(usize, u32, f64)>>,
    /// Progress units of the assigned jobs.
    pub objective: u64,
    pub proven: bool,
}

/// Proportional share on whichever type gives the lowest throughput.
pub fn fair_share_default(types: &[MachineType], matrices: &[&SensitivityMatrix], gpus: u32) -> f64 {
    types
        .iter()
        .zip(matrices)
        .filter_map(|(t, m)| {
            let (c, mem) = t.server.proportional_demand(gpus);
            m.at(c.max(1), mem)
        })
        .fold(f64::INFINITY, f64::min)
}

fn solve_with_capacity(caps: &[[f64; 3]], jobs: &[HeteroJob], round_minutes: f64, node_limit: Option<u64>) -> HeteroSolution {
    let dims = 3 * caps.len();
    let big: u64 = 1 + jobs
        .iter()
        .map(|j| j.matrices.iter().map(|m| progress_units(m.peak(), round_minutes)).max().unwrap_or(0))
        .sum::<u64>();
    let mut groups = Vec::with_capacity(jobs.len());
    let mut labels = Vec::with_capacity(jobs.len());
    for j in jobs {
        let floor = progress_units(j.fair, round_minutes);
        let bonus = big * j.gpus as u64;
        let mut choices = Vec::new();
        let mut lab = Vec::new();
        for (k, m) in j.matrices.iter().enumerate() {
            if (j.gpus as f64) > caps[k][0] {
                continue;
            }
            let (c, cells) = cell_choices(m, floor, round_minutes, dims, 3 * k + 1, &[(3 * k, j.gpus as f64)], bonus);
            choices.extend(c);
            lab.extend(cells.into_iter().map(|(c, m)| Some((k, c, m))));
        }
        choices.push(Choice { weight: 0, usage: vec![0.0; dims] });
        lab.push(None);
        groups.push(choices);
        labels.push(lab);
    }
    let capacity: Vec<f64> = caps.iter().flat_map(|c| c.iter().copied()).collect();
    let sol = Mckp { capacity, groups }.solve(0, node_limit).expect("leaving every job out is feasible");
    let assignment: Vec<Option<(usize, u32, f64)>> =
        sol.picks.iter().enumerate().map(|(j, &i)| labels[j][i]).collect();
    let bonus: u64 = jobs.iter().zip(&assignment).filter(|(_, a)| a.is_some()).map(|(j, _)| big * j.gpus as u64).sum();
    HeteroSolution { assignment, objective: sol.value - bonus, proven: sol.proven }
}

/// One cell on one machine type per job, never splitting a job across
/// types. Maximises the GPUs assigned first and progress second; jobs that
/// cannot be assigned are left out.
pub fn solve_hetero_ilp(types: &[MachineType], jobs: &[HeteroJob], round_minutes: f64, node_limit: Option<u64>) -> HeteroSolution {
    let caps: Vec<[f64; 3]> = types.iter().map(|t| t.capacity()).collect();
    solve_with_capacity(&caps, jobs, round_minutes, node_limit)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Refill {
    /// `(job id, type, cpus, mem_gb)` in the order assigned.
    pub added: Vec<(u64, usize, u32, f64)>,
    pub iterations: usize,
}

/// Offers capacity left over by `solution` to queued jobs, re-solving on
/// the remainder until no GPUs or no jobs are left or a pass assigns
/// nothing. Earlier assignments are never revoked.
pub fn refill_unassigned(
    types: &[MachineType],
    jobs: &[HeteroJob],
    solution: &HeteroSolution,
    queue: &[HeteroJob],
    round_minutes: f64,
    node_limit: Option<u64>,
) -> Refill {
    let mut caps: Vec<[f64; 3]> = types.iter().map(|t| t.capacity()).collect();
    for (j, a) in jobs.iter().zip(&solution.assignment) {
        if let Some((k, c, m)) = *a {
            caps[k][0] -= j.gpus as f64;
            caps[k][1] -= c as f64;
            caps[k][2] -= m;
        }
    }
    let mut pool: Vec<&HeteroJob> = queue.iter().collect();
    let mut added = Vec::new();
    let mut iterations = 0;
    loop {
        let max_gpus = caps.iter().map(|c| c[0]).fold(0.0, f64::max).max(0.0) as u32;
        let free_gpus: u32 = caps.iter().map(|c| c[0].max(0.0) as u32).sum();
        pool.retain(|j| j.gpus <= max_gpus);
        if free_gpus == 0 || pool.is_empty() {
            break;
        }
        let demands: Vec<u32> = pool.iter().map(|j| j.gpus).collect();
        let picked = select_runnable(&demands, free_gpus);
        let batch: Vec<HeteroJob> = picked.iter().map(|&i| pool[i].clone()).collect();
        iterations += 1;
        let sol = solve_with_capacity(&caps, &batch, round_minutes, node_limit);
        let mut any = false;
        for (j, a) in batch.iter().zip(&sol.assignment) {
            if let Some((k, c, m)) = *a {
                caps[k][0] -= j.gpus as f64;
                caps[k][1] -= c as f64;
                caps[k][2] -= m;
                added.push((j.id, k, c, m));
                any = true;
            }
        }
        let tried: Vec<u64> = batch.iter().map(|j| j.id).collect();
        pool.retain(|j| !tried.contains(&j.id));
        if !any {
            break;
        }
    }
    Refill { added, iterations }
}
