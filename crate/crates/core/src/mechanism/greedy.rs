use std::collections::BTreeMap;

use super::packer::{Fit, Layout, Packer};
use super::{RoundPlan, SchedJob};
use crate::cluster::ClusterSpec;

/// First-fit on the full demand vector in queue order. A job that fits
/// nowhere is skipped for the round even if GPUs remain free.
pub fn place_greedy(jobs: &[SchedJob], spec: &ClusterSpec, pinned: &BTreeMap<u64, Layout>) -> RoundPlan {
    let mut packer = Packer::new(spec);
    for j in jobs {
        if let Some(layout) = pinned.get(&j.id) {
            packer.commit(j.id, layout.clone(), 0, 0.0);
        }
    }
    for j in jobs {
        let d = &j.profile.demand;
        if pinned.contains_key(&j.id) {
            if !packer.resize(j.id, d.cpus, d.mem_gb) {
                packer.remove(j.id);
            }
        } else if let Some(layout) = packer.find(j.gpus, d.cpus, d.mem_gb, Fit::First) {
            packer.commit(j.id, layout, d.cpus, d.mem_gb);
        }
    }
    RoundPlan::from_packer(&packer, jobs, Vec::new())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::ServerSpec;
    use crate::mechanism::place_proportional;
    use crate::presets;
    use crate::profiler::{derive_demand_vector, JobProfile};
    use std::sync::Arc;

    fn job(id: u64, name: &str, g: u32) -> SchedJob {
        let p = JobProfile::build(&presets::by_name(name).unwrap(), g, &ServerSpec::reference(), 0.1, 0.01);
        SchedJob::new(id, Arc::new(p))
    }

    fn with_demand(mut j: SchedJob, cpus: u32, mem: f64) -> SchedJob {
        let mut p = (*j.profile).clone();
        p.demand = derive_demand_vector(&p.matrix, j.gpus, 0.01);
        p.demand.cpus = cpus;
        p.demand.mem_gb = mem;
        j.profile = Arc::new(p);
        j
    }

    #[test]
    fn memory_hungry_pair_fragments() {
        let spec = ClusterSpec::homogeneous(1, ServerSpec::reference(), 5.0);
        let a = with_demand(job(1, "resnet50", 4), 8, 450.0);
        let b = with_demand(job(2, "resnet50", 4), 8, 450.0);
        let plan = place_greedy(&[a, b], &spec, &BTreeMap::new());
        assert_eq!(plan.allocations.len(), 1);
        assert_eq!(plan.skipped, vec![2]);
    }

    #[test]
    fn language_jobs_never_skip() {
        let spec = ClusterSpec::homogeneous(2, ServerSpec::reference(), 5.0);
        let jobs: Vec<SchedJob> =
            (0..16).map(|i| job(i, ["gnmt", "lstm", "transformer_xl"][i as usize % 3], 1)).collect();
        let g = place_greedy(&jobs, &spec, &BTreeMap::new());
        let p = place_proportional(&jobs, &spec, &BTreeMap::new()).unwrap();
        assert!(g.skipped.is_empty());
        for j in &jobs {
            let tg = g.allocation(j.id).unwrap().totals();
            let tp = p.allocation(j.id).unwrap().totals();
            assert!(j.profile.throughput(tg.cpus, tg.mem_gb) >= j.profile.throughput(tp.cpus, tp.mem_gb));
        }
    }

    #[test]
    fn empty_input() {
        let spec = ClusterSpec::homogeneous(1, ServerSpec::reference(), 5.0);
        assert_eq!(place_greedy(&[], &spec, &BTreeMap::new()), RoundPlan::default());
    }
}
