use std::collections::BTreeMap;

use super::packer::{Fit, Layout, Packer};
use super::{RoundPlan, SchedJob};
use crate::cluster::ClusterSpec;
use crate::error::{Result, SimError};

/// Best-fit packing of requested allocations, largest demands first.
///
/// A job that does not fit is first shrunk to its fallback cell. If even
/// that fails, it takes GPUs wherever they are free and co-located jobs are
/// shrunk to their fallback cells, largest surplus first, until it fits.
/// Fallback cells never lose throughput relative to the proportional share,
/// so no admitted job ends up below it. Leftover CPU and memory then go to
/// whichever job gains the most from one more step.
pub fn place_tune(jobs: &[SchedJob], spec: &ClusterSpec, pinned: &BTreeMap<u64, Layout>) -> Result<RoundPlan> {
    place_tune_hinted(jobs, spec, pinned, &BTreeMap::new())
}

/// As [`place_tune`], but an unpinned job first tries the layout in `hints`
/// before searching for servers.
pub fn place_tune_hinted(
    jobs: &[SchedJob],
    spec: &ClusterSpec,
    pinned: &BTreeMap<u64, Layout>,
    hints: &BTreeMap<u64, Layout>,
) -> Result<RoundPlan> {
    let mut packer = Packer::new(spec);
    for j in jobs {
        if let Some(layout) = pinned.get(&j.id) {
            packer.commit(j.id, layout.clone(), 0, 0.0);
        }
    }
    let by_id: BTreeMap<u64, &SchedJob> = jobs.iter().map(|j| (j.id, j)).collect();

    let mut order: Vec<&SchedJob> = jobs.iter().collect();
    order.sort_by(|a, b| {
        let (ra, rb) = (a.profile.request, b.profile.request);
        b.gpus.cmp(&a.gpus).then(rb.0.cmp(&ra.0)).then(rb.1.total_cmp(&ra.1))
    });

    let mut downgrades = Vec::new();
    for j in order {
        let (rc, rm) = j.profile.request;
        let (fc, fm) = j.profile.fallback;
        let is_pinned = pinned.contains_key(&j.id);
        let attempt = |packer: &mut Packer, c: u32, m: f64| -> bool {
            if is_pinned {
                packer.resize(j.id, c, m)
            } else if let Some(layout) = hints.get(&j.id).filter(|l| packer.fits(l, c, m)) {
                packer.commit(j.id, layout.clone(), c, m);
                true
            } else if let Some(layout) = packer.find(j.gpus, c, m, Fit::Best) {
                packer.commit(j.id, layout, c, m);
                true
            } else {
                false
            }
        };
        if attempt(&mut packer, rc, rm) {
            continue;
        }
        if (rc, rm) != (fc, fm) {
            downgrades.push(j.id);
            if attempt(&mut packer, fc, fm) {
                continue;
            }
        }
        if !is_pinned {
            let layout = packer
                .find_gpus(j.gpus)
                .ok_or_else(|| SimError::Invariant(format!("job {} admitted without free GPUs", j.id)))?;
            packer.commit(j.id, layout, 0, 0.0);
        }
        let servers: Vec<usize> = packer.placed[&j.id].layout.iter().map(|l| l.0).collect();
        while !packer.resize(j.id, fc, fm) {
            let victim = packer
                .residents(&servers)
                .into_iter()
                .filter(|&id| id != j.id)
                .filter_map(|id| {
                    let p = &packer.placed[&id];
                    let (vc, vm) = by_id[&id].profile.fallback;
                    let surplus = (p.cpus.saturating_sub(vc), (p.mem - vm).max(0.0));
                    (surplus.0 > 0 || surplus.1 > 1e-9).then_some((id, surplus))
                })
                .max_by(|a, b| a.1 .0.cmp(&b.1 .0).then(a.1 .1.total_cmp(&b.1 .1)).then(b.0.cmp(&a.0)));
            let Some((victim, _)) = victim else {
                return Err(SimError::Invariant(format!(
                    "job {} cannot reach its fallback allocation even after downgrading neighbours",
                    j.id
                )));
            };
            let (vc, vm) = by_id[&victim].profile.fallback;
            let shrunk = packer.resize(victim, vc, vm);
            debug_assert!(shrunk);
            downgrades.push(victim);
        }
    }

    redistribute(&mut packer, jobs);
    Ok(RoundPlan::from_packer(&packer, jobs, downgrades))
}

#[derive(Debug, Clone, Copy)]
struct Step {
    gain: f64,
    cpus: u32,
    mem: f64,
}

fn best_step(packer: &Packer, j: &SchedJob) -> Option<Step> {
    let p = packer.placed.get(&j.id)?;
    let m = &j.profile.matrix;
    let ci = m.cpu_index(p.cpus)?;
    let mi = m.mem_index(p.mem)?;
    let now = m.get(ci, mi);
    let mut options = Vec::with_capacity(3);
    let more_c = ci + 1 < m.rows();
    let more_m = mi + 1 < m.cols();
    if more_c {
        options.push((ci + 1, mi));
    }
    if more_m {
        options.push((ci, mi + 1));
    }
    if more_c && more_m {
        options.push((ci + 1, mi + 1));
    }
    let mut best: Option<Step> = None;
    for (nc, nm) in options {
        let gain = m.get(nc, nm) - now;
        if gain <= 0.0 || best.is_some_and(|b| gain <= b.gain) {
            continue;
        }
        let (cpus, mem) = (m.cpu_axis[nc], m.mem_axis[nm]);
        let mut trial = packer.free.clone();
        let fits = super::packer::split(&p.layout, p.cpus, p.mem)
            .into_iter()
            .zip(super::packer::split(&p.layout, cpus, mem))
            .all(|((s, old), (_, new))| {
                trial[s].add(&old);
                new.fits_in(&trial[s])
            });
        if fits {
            best = Some(Step { gain, cpus, mem });
        }
    }
    best
}

/// Hands out leftover CPU and memory one grid step at a time to the job with
/// the largest throughput gain.
fn redistribute(packer: &mut Packer, jobs: &[SchedJob]) {
    let mut cache: Vec<Option<Step>> = jobs.iter().map(|j| best_step(packer, j)).collect();
    loop {
        let mut pick: Option<usize> = None;
        for (k, s) in cache.iter().enumerate() {
            if let Some(s) = s {
                if pick.is_none_or(|p| s.gain > cache[p].unwrap().gain) {
                    pick = Some(k);
                }
            }
        }
        let Some(k) = pick else { break };
        let step = cache[k].unwrap();
        let j = &jobs[k];
        let ok = packer.resize(j.id, step.cpus, step.mem);
        debug_assert!(ok);
        let touched: Vec<usize> = packer.placed[&j.id].layout.iter().map(|l| l.0).collect();
        for (i, other) in jobs.iter().enumerate() {
            let shares = packer
                .placed
                .get(&other.id)
                .is_some_and(|p| p.layout.iter().any(|l| touched.contains(&l.0)));
            if i == k || shares {
                cache[i] = best_step(packer, other);
            }
        }
    }
}
