use super::packer::Packer;
use super::{RoundPlan, SchedJob};
use crate::cluster::ClusterSpec;
use crate::error::Result;
use crate::optimizer::{solve_ideal_ilp, solve_placement_lp, OptInstance, OptJob};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OptSettings {
    /// Search-node budget for the per-round integer program.
    pub node_limit: Option<u64>,
}

impl Default for OptSettings {
    fn default() -> Self {
        OptSettings { node_limit: Some(200_000) }
    }
}

/// Solves the pooled optimum and executes it when the placement LP maps
/// every job wholly onto one server; otherwise runs `fallback`. The
/// objective is recorded either way.
pub fn place_opt(jobs: &[SchedJob], spec: &ClusterSpec, settings: &OptSettings, fallback: RoundPlan) -> Result<RoundPlan> {
    if jobs.is_empty() {
        return Ok(fallback);
    }
    let instance = OptInstance {
        jobs: jobs
            .iter()
            .map(|j| OptJob { id: j.id, gpus: j.gpus, matrix: &j.profile.matrix, prop: j.prop() })
            .collect(),
        servers: spec.servers.clone(),
        round_minutes: spec.round_minutes,
    };
    let ilp = solve_ideal_ilp(&instance, settings.node_limit)?;
    let stars: Vec<(u32, u32, f64)> = jobs.iter().zip(&ilp.cells).map(|(j, &(c, m))| (j.gpus, c, m)).collect();
    let mut plan = match solve_placement_lp(&spec.servers, &stars) {
        Ok(placement) => {
            let mut plan = fallback;
            plan.fragmented = Some(placement.fragmented.len());
            if let Some(servers) = placement.integral_servers() {
                let mut packer = Packer::new(spec);
                let mut ok = true;
                for (j, (&s, &(g, c, m))) in jobs.iter().zip(servers.iter().zip(&stars)) {
                    let layout = vec![(s, g)];
                    if packer.fits(&layout, c, m) {
                        packer.commit(j.id, layout, c, m);
                    } else {
                        ok = false;
                        break;
                    }
                }
                if ok {
                    plan = RoundPlan { fragmented: Some(0), ..RoundPlan::from_packer(&packer, jobs, Vec::new()) };
                }
            }
            plan
        }
        Err(_) => fallback,
    };
    plan.opt_objective = Some(ilp.objective);
    Ok(plan)
}
