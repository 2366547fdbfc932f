use crate::cluster::ServerSpec;
use crate::error::{Result, SimError};
use crate::lp::{Cmp, Problem};

const FRAC_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct PlacementSolution {
    /// `x[i][j]`: share of job `j` placed on server `i`.
    pub x: Vec<Vec<f64>>,
    /// Jobs with some `0 < x[i][j] < 1`.
    pub fragmented: Vec<usize>,
}

impl PlacementSolution {
    /// For each job, a server holding all of it, if there is one.
    pub fn integral_servers(&self) -> Option<Vec<usize>> {
        let n = self.x.first().map_or(0, |r| r.len());
        (0..n)
            .map(|j| (0..self.x.len()).find(|&i| self.x[i][j] >= 1.0 - FRAC_TOL))
            .collect()
    }
}

/// Finds a vertex of `{x ≥ 0 : per-server GPU/CPU/memory capacity, every job
/// covered at least once}` for jobs given as `(gpus, cpus, mem_gb)`.
///
/// At a vertex at most `3s + n` variables are positive, so at most `3s` jobs
/// are split; this is checked before returning.
pub fn solve_placement_lp(servers: &[ServerSpec], jobs: &[(u32, u32, f64)]) -> Result<PlacementSolution> {
    let s = servers.len();
    let n = jobs.len();
    let var = |i: usize, j: usize| i * n + j;
    let mut p = Problem::new(s * n);
    for (i, srv) in servers.iter().enumerate() {
        let dims: [(Box<dyn Fn(&(u32, u32, f64)) -> f64>, f64); 3] = [
            (Box::new(|t| t.0 as f64), srv.gpus as f64),
            (Box::new(|t| t.1 as f64), srv.cpus as f64),
            (Box::new(|t| t.2), srv.mem_gb),
        ];
        for (f, cap) in dims.iter() {
            let mut row = vec![0.0; s * n];
            for (j, job) in jobs.iter().enumerate() {
                row[var(i, j)] = f(job);
            }
            p.add(row, Cmp::Le, *cap);
        }
    }
    for j in 0..n {
        let mut row = vec![0.0; s * n];
        for i in 0..s {
            row[var(i, j)] = 1.0;
        }
        p.add(row, Cmp::Ge, 1.0);
    }
    let flat = p
        .feasible_vertex()
        .ok_or_else(|| SimError::Infeasible(format!("{n} jobs do not fit on {s} servers")))?;
    let x: Vec<Vec<f64>> = (0..s).map(|i| (0..n).map(|j| flat[var(i, j)]).collect()).collect();
    let fragmented: Vec<usize> =
        (0..n).filter(|&j| (0..s).any(|i| x[i][j] > FRAC_TOL && x[i][j] < 1.0 - FRAC_TOL)).collect();
    if fragmented.len() > 3 * s {
        return Err(SimError::Invariant(format!(
            "placement vertex splits {} jobs across {s} servers",
            fragmented.len()
        )));
    }
    Ok(PlacementSolution { x, fragmented })
}
