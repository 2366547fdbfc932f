use std::collections::BTreeMap;

use super::packer::{Fit, Layout, Packer};
use super::{RoundPlan, SchedJob};
use crate::cluster::ClusterSpec;
use crate::error::{Result, SimError};

/// GPU-proportional baseline: every job gets its GPUs' share of the CPU and
/// memory of whichever servers host them. Jobs in `pinned` keep their GPUs.
pub fn place_proportional(jobs: &[SchedJob], spec: &ClusterSpec, pinned: &BTreeMap<u64, Layout>) -> Result<RoundPlan> {
    let mut packer = Packer::new(spec);
    for j in jobs {
        if let Some(layout) = pinned.get(&j.id) {
            let (c, m) = j.prop();
            packer.commit(j.id, layout.clone(), c, m);
        }
    }
    let mut rest: Vec<&SchedJob> = jobs.iter().filter(|j| !pinned.contains_key(&j.id)).collect();
    rest.sort_by(|a, b| b.gpus.cmp(&a.gpus));
    for j in rest {
        let (c, m) = j.prop();
        let layout = packer
            .find(j.gpus, c, m, Fit::Best)
            .or_else(|| packer.find_gpus(j.gpus).filter(|l| packer.fits(l, c, m)))
            .ok_or_else(|| SimError::Invariant(format!("no room for job {} at its proportional share", j.id)))?;
        packer.commit(j.id, layout, c, m);
    }
    Ok(RoundPlan::from_packer(&packer, jobs, Vec::new()))
}
