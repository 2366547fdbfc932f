//! Servers, clusters, allocations and free-capacity bookkeeping.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

/// Tolerance used when comparing memory quantities (GB).
pub const MEM_EPS: f64 = 1e-6;

/// Hardware description of one server.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServerSpec {
    pub gpus: u32,
    /// Physical cores.
    pub cpus: u32,
    pub mem_gb: f64,
    /// Local storage read bandwidth in GB/s.
    pub storage_bw: f64,
    #[serde(default)]
    pub machine_type: u32,
}

impl ServerSpec {
    /// The reference SKU: 8 GPUs, 24 cores, 500 GB DRAM.
    pub fn reference() -> Self {
        Self::with_cpu_ratio(3)
    }

    /// An 8-GPU, 500 GB server with `ratio` cores per GPU.
    pub fn with_cpu_ratio(ratio: u32) -> Self {
        ServerSpec { gpus: 8, cpus: 8 * ratio, mem_gb: 500.0, storage_bw: 0.5, machine_type: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.gpus < 1 {
            return Err(SimError::InvalidSpec("server needs at least one GPU".into()));
        }
        if self.cpus < self.gpus {
            return Err(SimError::InvalidSpec(format!(
                "server has {} cores for {} GPUs; need at least one core per GPU",
                self.cpus, self.gpus
            )));
        }
        if !(self.mem_gb > 0.0) || !self.mem_gb.is_finite() {
            return Err(SimError::InvalidSpec("server memory must be positive".into()));
        }
        if !(self.storage_bw > 0.0) || !self.storage_bw.is_finite() {
            return Err(SimError::InvalidSpec("storage bandwidth must be positive".into()));
        }
        Ok(())
    }

    pub fn capacity(&self) -> Resources {
        Resources { gpus: self.gpus, cpus: self.cpus, mem_gb: self.mem_gb }
    }

    /// GPU-proportional CPU and memory for `g` GPUs, without the single-server
    /// range check. Used for job-level baselines of jobs spanning servers.
    pub fn proportional_demand(&self, g: u32) -> (u32, f64) {
        let cpus = (self.cpus as u64 * g as u64 / self.gpus as u64) as u32;
        let mem = self.mem_gb * g as f64 / self.gpus as f64;
        (cpus, mem)
    }
}

/// GPU-proportional share of `server` for a job using `g` of its GPUs:
/// `floor(C/G * g)` cores and `M/G * g` GB.
pub fn proportional_share(server: &ServerSpec, g: u32) -> Result<(u32, f64)> {
    if g < 1 || g > server.gpus {
        return Err(SimError::Demand { job: 0, gpus: g, max: server.gpus });
    }
    Ok(server.proportional_demand(g))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSpec {
    pub servers: Vec<ServerSpec>,
    pub round_minutes: f64,
}

impl ClusterSpec {
    pub fn homogeneous(count: usize, server: ServerSpec, round_minutes: f64) -> Self {
        ClusterSpec { servers: vec![server; count], round_minutes }
    }

    pub fn validate(&self) -> Result<()> {
        if self.servers.is_empty() {
            return Err(SimError::InvalidSpec("cluster has no servers".into()));
        }
        if !(self.round_minutes > 0.0) || !self.round_minutes.is_finite() {
            return Err(SimError::InvalidSpec("round length must be positive".into()));
        }
        for s in &self.servers {
            s.validate()?;
        }
        Ok(())
    }

    pub fn is_homogeneous(&self) -> bool {
        self.servers.windows(2).all(|w| w[0] == w[1])
    }

    /// Server SKU used for profiling and baselines. Clusters are homogeneous
    /// for simulation; this is the first server.
    pub fn reference_server(&self) -> &ServerSpec {
        &self.servers[0]
    }

    pub fn total_gpus(&self) -> u32 {
        self.servers.iter().map(|s| s.gpus).sum()
    }

    pub fn total_cpus(&self) -> u32 {
        self.servers.iter().map(|s| s.cpus).sum()
    }

    pub fn total_mem(&self) -> f64 {
        self.servers.iter().map(|s| s.mem_gb).sum()
    }
}

/// A bundle of the three schedulable resources.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Resources {
    pub gpus: u32,
    pub cpus: u32,
    pub mem_gb: f64,
}

impl Resources {
    pub fn new(gpus: u32, cpus: u32, mem_gb: f64) -> Self {
        Resources { gpus, cpus, mem_gb }
    }

    pub fn fits_in(&self, free: &Resources) -> bool {
        self.gpus <= free.gpus && self.cpus <= free.cpus && self.mem_gb <= free.mem_gb + MEM_EPS
    }

    pub fn add(&mut self, other: &Resources) {
        self.gpus += other.gpus;
        self.cpus += other.cpus;
        self.mem_gb += other.mem_gb;
    }

    /// Subtracts `other`, clamping memory round-off at zero.
    pub fn sub(&mut self, other: &Resources) {
        debug_assert!(other.fits_in(self));
        self.gpus -= other.gpus;
        self.cpus -= other.cpus;
        self.mem_gb -= other.mem_gb;
        if self.mem_gb.abs() < MEM_EPS {
            self.mem_gb = 0.0;
        }
    }
}

impl fmt::Display for Resources {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({} GPU, {} CPU, {:.2} GB)", self.gpus, self.cpus, self.mem_gb)
    }
}

/// Resources granted to one job for one round, keyed by server index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub job_id: u64,
    pub per_server: BTreeMap<usize, Resources>,
}

impl Allocation {
    pub fn single(job_id: u64, server: usize, res: Resources) -> Self {
        let mut per_server = BTreeMap::new();
        per_server.insert(server, res);
        Allocation { job_id, per_server }
    }

    pub fn totals(&self) -> Resources {
        let mut t = Resources::default();
        for r in self.per_server.values() {
            t.add(r);
        }
        t
    }

    /// Server index to GPU count. Two allocations with the same GPU layout
    /// keep the job on the same devices.
    pub fn gpu_layout(&self) -> Vec<(usize, u32)> {
        self.per_server.iter().filter(|(_, r)| r.gpus > 0).map(|(&s, r)| (s, r.gpus)).collect()
    }

    pub fn servers(&self) -> impl Iterator<Item = usize> + '_ {
        self.per_server.keys().copied()
    }
}

/// Free capacity per server plus the allocations currently holding resources.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterState {
    capacity: Vec<Resources>,
    free: Vec<Resources>,
    running: BTreeMap<u64, Allocation>,
    leases: BTreeMap<u64, bool>,
}

impl ClusterState {
    pub fn new(spec: &ClusterSpec) -> Self {
        let capacity: Vec<Resources> = spec.servers.iter().map(ServerSpec::capacity).collect();
        ClusterState {
            free: capacity.clone(),
            capacity,
            running: BTreeMap::new(),
            leases: BTreeMap::new(),
        }
    }

    pub fn num_servers(&self) -> usize {
        self.capacity.len()
    }

    pub fn free(&self, server: usize) -> &Resources {
        &self.free[server]
    }

    pub fn free_all(&self) -> &[Resources] {
        &self.free
    }

    pub fn capacity(&self, server: usize) -> &Resources {
        &self.capacity[server]
    }

    pub fn running(&self) -> &BTreeMap<u64, Allocation> {
        &self.running
    }

    pub fn allocation(&self, job_id: u64) -> Option<&Allocation> {
        self.running.get(&job_id)
    }

    pub fn free_gpus(&self) -> u32 {
        self.free.iter().map(|r| r.gpus).sum()
    }

    pub fn has_lease(&self, job_id: u64) -> bool {
        self.leases.get(&job_id).copied().unwrap_or(false)
    }

    pub fn set_lease(&mut self, job_id: u64, granted: bool) {
        self.leases.insert(job_id, granted);
    }

    pub fn clear_lease(&mut self, job_id: u64) {
        self.leases.remove(&job_id);
    }

    /// Reserves `alloc`. Fails without touching the state if any server lacks
    /// capacity or the job already holds resources.
    pub fn apply(&mut self, alloc: &Allocation) -> Result<()> {
        if self.running.contains_key(&alloc.job_id) {
            return Err(SimError::Placement {
                server: alloc.servers().next().unwrap_or(0),
                detail: format!("job {} already holds resources", alloc.job_id),
            });
        }
        for (&s, r) in &alloc.per_server {
            let free = self.free.get(s).ok_or_else(|| SimError::Placement {
                server: s,
                detail: "no such server".into(),
            })?;
            if !r.fits_in(free) {
                return Err(SimError::Placement {
                    server: s,
                    detail: format!("job {} needs {} but only {} free", alloc.job_id, r, free),
                });
            }
        }
        for (&s, r) in &alloc.per_server {
            self.free[s].sub(r);
        }
        self.running.insert(alloc.job_id, alloc.clone());
        Ok(())
    }

    pub fn release(&mut self, job_id: u64) -> Result<Allocation> {
        let alloc = self.running.remove(&job_id).ok_or_else(|| SimError::Placement {
            server: 0,
            detail: format!("job {job_id} holds no resources"),
        })?;
        for (&s, r) in &alloc.per_server {
            self.free[s].add(r);
            if (self.free[s].mem_gb - self.capacity[s].mem_gb).abs() < MEM_EPS {
                self.free[s].mem_gb = self.capacity[s].mem_gb;
            }
        }
        Ok(alloc)
    }

    /// Checks `free + allocated == capacity` and `free >= 0` on every server.
    pub fn check_invariants(&self) -> Result<()> {
        let mut used = vec![Resources::default(); self.capacity.len()];
        for a in self.running.values() {
            for (&s, r) in &a.per_server {
                used[s].add(r);
            }
        }
        for (s, cap) in self.capacity.iter().enumerate() {
            let f = &self.free[s];
            let u = &used[s];
            if u.gpus + f.gpus != cap.gpus
                || u.cpus + f.cpus != cap.cpus
                || (u.mem_gb + f.mem_gb - cap.mem_gb).abs() > 1e-3
                || f.mem_gb < -MEM_EPS
            {
                return Err(SimError::Invariant(format!(
                    "server {s}: capacity {cap}, free {f}, allocated {u}"
                )));
            }
        }
        Ok(())
    }

    /// Used fraction of (GPU, CPU, memory) across the cluster.
    pub fn utilization(&self) -> (f64, f64, f64) {
        let (mut cg, mut cc, mut cm) = (0u64, 0u64, 0.0);
        let (mut fg, mut fc, mut fm) = (0u64, 0u64, 0.0);
        for (c, f) in self.capacity.iter().zip(&self.free) {
            cg += c.gpus as u64;
            cc += c.cpus as u64;
            cm += c.mem_gb;
            fg += f.gpus as u64;
            fc += f.cpus as u64;
            fm += f.mem_gb;
        }
        let frac = |used: f64, cap: f64| if cap > 0.0 { (used / cap).clamp(0.0, 1.0) } else { 0.0 };
        (
            frac((cg - fg) as f64, cg as f64),
            frac((cc - fc) as f64, cc as f64),
            frac(cm - fm, cm),
        )
    }
}
