use std::collections::BTreeMap;

use crate::cluster::{Allocation, ClusterSpec, Resources};

/// Where a job's GPUs sit: `(server, gpus)` in ascending server order.
pub type Layout = Vec<(usize, u32)>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fit {
    /// Lowest server index first.
    First,
    /// Fewest free GPUs, then CPUs, then memory.
    Best,
}

/// Splits `(cpus, mem)` over a layout: `floor(cpus/g)` cores per GPU, the
/// remainder one core per GPU in ascending server order, memory in exact
/// proportion with the last server absorbing round-off.
pub fn split(layout: &[(usize, u32)], cpus: u32, mem: f64) -> Vec<(usize, Resources)> {
    let g: u32 = layout.iter().map(|l| l.1).sum();
    if g == 0 {
        return Vec::new();
    }
    let base = cpus / g;
    let mut rem = cpus % g;
    let mut mem_left = mem;
    let mut out = Vec::with_capacity(layout.len());
    for (k, &(s, gi)) in layout.iter().enumerate() {
        let extra = rem.min(gi);
        rem -= extra;
        let m = if k + 1 == layout.len() { mem_left.max(0.0) } else { mem * gi as f64 / g as f64 };
        mem_left -= m;
        out.push((s, Resources::new(gi, base * gi + extra, m)));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Placed {
    pub layout: Layout,
    pub cpus: u32,
    pub mem: f64,
}

/// Scratch cluster state for building one round's plan.
#[derive(Debug, Clone)]
pub struct Packer {
    pub free: Vec<Resources>,
    pub placed: BTreeMap<u64, Placed>,
}

impl Packer {
    pub fn new(spec: &ClusterSpec) -> Self {
        Packer { free: spec.servers.iter().map(|s| s.capacity()).collect(), placed: BTreeMap::new() }
    }

    pub fn fits(&self, layout: &[(usize, u32)], cpus: u32, mem: f64) -> bool {
        split(layout, cpus, mem).iter().all(|(s, r)| r.fits_in(&self.free[*s]))
    }

    pub fn commit(&mut self, job: u64, layout: Layout, cpus: u32, mem: f64) {
        for (s, r) in split(&layout, cpus, mem) {
            self.free[s].sub(&r);
        }
        let prev = self.placed.insert(job, Placed { layout, cpus, mem });
        debug_assert!(prev.is_none());
    }

    pub fn remove(&mut self, job: u64) -> Option<Placed> {
        let p = self.placed.remove(&job)?;
        for (s, r) in split(&p.layout, p.cpus, p.mem) {
            self.free[s].add(&r);
        }
        Some(p)
    }

    /// Changes a placed job's CPU and memory in place. Leaves it untouched
    /// and returns false if the new amount does not fit.
    pub fn resize(&mut self, job: u64, cpus: u32, mem: f64) -> bool {
        let Some(p) = self.remove(job) else { return false };
        if self.fits(&p.layout, cpus, mem) {
            self.commit(job, p.layout, cpus, mem);
            true
        } else {
            self.commit(job, p.layout, p.cpus, p.mem);
            false
        }
    }

    /// A server that holds the whole job, or failing that (only when no
    /// server has `g` free GPUs) the smallest set of servers that does.
    pub fn find(&self, g: u32, cpus: u32, mem: f64, fit: Fit) -> Option<Layout> {
        let whole: Vec<usize> = (0..self.free.len()).filter(|&s| self.free[s].gpus >= g).collect();
        if !whole.is_empty() {
            let fitting = whole.into_iter().filter(|&s| self.fits(&[(s, g)], cpus, mem));
            let pick = match fit {
                Fit::First => fitting.min(),
                Fit::Best => fitting.min_by(|&a, &b| {
                    let (fa, fb) = (&self.free[a], &self.free[b]);
                    fa.gpus
                        .cmp(&fb.gpus)
                        .then(fa.cpus.cmp(&fb.cpus))
                        .then(fa.mem_gb.total_cmp(&fb.mem_gb))
                        .then(a.cmp(&b))
                }),
            };
            return pick.map(|s| vec![(s, g)]);
        }
        let layout = self.minimal_set(g)?;
        self.fits(&layout, cpus, mem).then_some(layout)
    }

    /// GPUs only, ignoring CPU and memory.
    pub fn find_gpus(&self, g: u32) -> Option<Layout> {
        let best = (0..self.free.len()).filter(|&s| self.free[s].gpus >= g).min_by_key(|&s| (self.free[s].gpus, s));
        match best {
            Some(s) => Some(vec![(s, g)]),
            None => self.minimal_set(g),
        }
    }

    /// Fewest servers covering `g` GPUs, preferring servers with the most
    /// free GPUs, then CPUs, then memory.
    fn minimal_set(&self, g: u32) -> Option<Layout> {
        let mut order: Vec<usize> = (0..self.free.len()).filter(|&s| self.free[s].gpus > 0).collect();
        order.sort_by(|&a, &b| {
            let (fa, fb) = (&self.free[a], &self.free[b]);
            fb.gpus
                .cmp(&fa.gpus)
                .then(fb.cpus.cmp(&fa.cpus))
                .then(fb.mem_gb.total_cmp(&fa.mem_gb))
                .then(a.cmp(&b))
        });
        let mut need = g;
        let mut layout = Vec::new();
        for s in order {
            if need == 0 {
                break;
            }
            let take = self.free[s].gpus.min(need);
            layout.push((s, take));
            need -= take;
        }
        if need > 0 {
            return None;
        }
        layout.sort();
        Some(layout)
    }

    pub fn allocation(&self, job: u64) -> Option<Allocation> {
        let p = self.placed.get(&job)?;
        Some(Allocation { job_id: job, per_server: split(&p.layout, p.cpus, p.mem).into_iter().collect() })
    }

    /// Jobs with at least one GPU on `server`.
    pub fn residents(&self, servers: &[usize]) -> Vec<u64> {
        self.placed
            .iter()
            .filter(|(_, p)| p.layout.iter().any(|(s, _)| servers.contains(s)))
            .map(|(&id, _)| id)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::ServerSpec;

    #[test]
    fn split_rounding() {
        let parts = split(&[(0, 1), (3, 2)], 10, 90.0);
        assert_eq!(parts[0].1, Resources::new(1, 4, 30.0));
        assert_eq!(parts[1].1, Resources::new(2, 6, 60.0));
        let single = split(&[(2, 4)], 13, 200.0);
        assert_eq!(single, vec![(2, Resources::new(4, 13, 200.0))]);
    }

    #[test]
    fn split_conserves_totals() {
        for g1 in 1..8u32 {
            for g2 in 1..8u32 {
                for c in 0..60u32 {
                    let parts = split(&[(0, g1), (1, g2)], c, 123.4);
                    let cs: u32 = parts.iter().map(|p| p.1.cpus).sum();
                    let ms: f64 = parts.iter().map(|p| p.1.mem_gb).sum();
                    assert_eq!(cs, c);
                    assert!((ms - 123.4).abs() < 1e-9);
                    // per-GPU shares differ by at most one core
                    let per: Vec<f64> = parts.iter().map(|p| p.1.cpus as f64 / p.1.gpus as f64).collect();
                    assert!((per[0] - per[1]).abs() <= 1.0);
                }
            }
        }
    }

    #[test]
    fn best_fit_prefers_fuller_server() {
        let spec = ClusterSpec::homogeneous(3, ServerSpec::reference(), 5.0);
        let mut p = Packer::new(&spec);
        p.commit(1, vec![(1, 6)], 6, 100.0);
        assert_eq!(p.find(1, 3, 62.5, Fit::Best), Some(vec![(1, 1)]));
        assert_eq!(p.find(1, 3, 62.5, Fit::First), Some(vec![(0, 1)]));
        assert_eq!(p.find(4, 3, 62.5, Fit::Best), Some(vec![(0, 4)]));
    }

    #[test]
    fn minimal_set_for_large_jobs() {
        let spec = ClusterSpec::homogeneous(3, ServerSpec::reference(), 5.0);
        let mut p = Packer::new(&spec);
        p.commit(1, vec![(0, 2)], 6, 125.0);
        let l = p.find(16, 48, 1000.0, Fit::Best).unwrap();
        assert_eq!(l, vec![(1, 8), (2, 8)]);
        assert_eq!(p.find_gpus(20), Some(vec![(0, 4), (1, 8), (2, 8)]));
        assert_eq!(p.find_gpus(23), None);
    }

    #[test]
    fn resize_is_atomic() {
        let spec = ClusterSpec::homogeneous(1, ServerSpec::reference(), 5.0);
        let mut p = Packer::new(&spec);
        p.commit(1, vec![(0, 1)], 20, 400.0);
        p.commit(2, vec![(0, 1)], 3, 62.5);
        assert!(!p.resize(2, 5, 62.5));
        assert_eq!(p.placed[&2].cpus, 3);
        assert!(p.resize(1, 3, 62.5));
        assert!(p.resize(2, 21, 62.5));
        assert_eq!(p.free[0].cpus, 0);
    }
}
