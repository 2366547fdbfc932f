//! Optimistic profiling.
//!
//! A job is measured only at a few CPU counts with the whole cache available;
//! every other (CPU, memory) cell of its sensitivity matrix is filled
//! analytically, since the cache hit rate (and therefore the storage fetch
//! rate) is a known function of memory.

use std::collections::BTreeMap;
use std::io::Write;

use crate::cluster::ServerSpec;
use crate::error::Result;
use crate::job::JobClass;
use crate::oracle::{disk_rate, oracle_throughput};

/// Memory is profiled and allocated in multiples of this many GB.
pub const MEM_GRID_GB: f64 = 50.0;
pub const DEFAULT_THRESHOLD: f64 = 0.10;
pub const DEFAULT_EPS_SAT: f64 = 0.01;
/// Simulated wall-clock cost of one empirical measurement.
pub const MINUTES_PER_SAMPLE: f64 = 1.0;

/// What the profiler is allowed to use for a job of `gpus` GPUs: the most
/// cores and memory a job can get when consolidated on the fewest servers.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSetup {
    pub gpus: u32,
    pub max_cpus: u32,
    pub full_mem_gb: f64,
    pub storage_bw: f64,
    /// GPU-proportional share; always measured so the baseline is exact.
    pub prop_cpus: u32,
    pub prop_mem_gb: f64,
}

impl ProfileSetup {
    pub fn for_server(server: &ServerSpec, gpus: u32) -> Self {
        let servers = gpus.div_ceil(server.gpus).max(1);
        let (prop_cpus, prop_mem_gb) = server.proportional_demand(gpus);
        ProfileSetup {
            gpus,
            max_cpus: server.cpus * servers,
            full_mem_gb: server.mem_gb * servers as f64,
            storage_bw: server.storage_bw,
            prop_cpus: prop_cpus.max(1),
            prop_mem_gb,
        }
    }

    pub fn cpu_axis(&self) -> Vec<u32> {
        (1..=self.max_cpus).collect()
    }

    /// 50 GB steps up to the full memory, plus the full memory itself, the
    /// dataset size and the proportional share.
    pub fn mem_axis(&self, class: &JobClass) -> Vec<f64> {
        let mut axis = Vec::new();
        let mut m = MEM_GRID_GB;
        while m <= self.full_mem_gb + 1e-9 {
            axis.push(m);
            m += MEM_GRID_GB;
        }
        axis.push(self.full_mem_gb);
        let d = class.dataset_gb();
        if d < self.full_mem_gb {
            axis.push(d);
        }
        axis.push(self.prop_mem_gb);
        axis.sort_by(f64::total_cmp);
        axis.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        axis
    }
}

/// Empirically measured (cores, samples/s) points, all at full memory.
#[derive(Debug, Clone, PartialEq)]
pub struct CpuProfile {
    pub points: Vec<(u32, f64)>,
    pub minutes: f64,
}

impl CpuProfile {
    pub fn sampled_cpus(&self) -> Vec<u32> {
        self.points.iter().map(|p| p.0).collect()
    }
}

/// Picks CPU counts to measure by bisection from the top of the range.
///
/// On a range `[lo, hi]` whose overall gain is below `threshold` nothing more
/// is measured. Otherwise the midpoint is measured; if the upper half gains
/// less than `threshold` the search continues in the lower half, else in the
/// upper half. Both ends, and the proportional share, are always measured.
/// A zero threshold treats every gain as significant and measures everything.
pub fn profile_cpu_points(class: &JobClass, setup: &ProfileSetup, threshold: f64) -> CpuProfile {
    let mut measured: BTreeMap<u32, f64> = BTreeMap::new();
    let measure = |c: u32, measured: &mut BTreeMap<u32, f64>| -> f64 {
        *measured
            .entry(c)
            .or_insert_with(|| oracle_throughput(class, setup.gpus, c, setup.full_mem_gb, setup.storage_bw))
    };

    let max = setup.max_cpus.max(1);
    if threshold <= 0.0 {
        for c in 1..=max {
            measure(c, &mut measured);
        }
    } else {
        let gain = |a: f64, b: f64| if a > 0.0 { b / a - 1.0 } else { f64::INFINITY };
        let (mut lo, mut hi) = (1u32, max);
        let mut t_lo = measure(lo, &mut measured);
        let mut t_hi = measure(hi, &mut measured);
        while hi - lo > 1 && gain(t_lo, t_hi) >= threshold {
            let mid = (lo + hi) / 2;
            let t_mid = measure(mid, &mut measured);
            if gain(t_mid, t_hi) < threshold {
                hi = mid;
                t_hi = t_mid;
            } else {
                lo = mid;
                t_lo = t_mid;
            }
        }
        measure(setup.prop_cpus.clamp(1, max), &mut measured);
    }

    let points: Vec<(u32, f64)> = measured.into_iter().collect();
    let minutes = points.len() as f64 * MINUTES_PER_SAMPLE;
    CpuProfile { points, minutes }
}

/// Throughput over a CPU x memory grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityMatrix {
    pub gpus: u32,
    /// Contiguous `1..=max`.
    pub cpu_axis: Vec<u32>,
    pub mem_axis: Vec<f64>,
    /// Row-major, one row per CPU count.
    values: Vec<f64>,
    pub sampled_cpus: Vec<u32>,
}

impl SensitivityMatrix {
    pub fn from_values(gpus: u32, cpu_axis: Vec<u32>, mem_axis: Vec<f64>, values: Vec<f64>, sampled_cpus: Vec<u32>) -> Self {
        assert_eq!(values.len(), cpu_axis.len() * mem_axis.len());
        SensitivityMatrix { gpus, cpu_axis, mem_axis, values, sampled_cpus }
    }

    pub fn rows(&self) -> usize {
        self.cpu_axis.len()
    }

    pub fn cols(&self) -> usize {
        self.mem_axis.len()
    }

    pub fn get(&self, ci: usize, mi: usize) -> f64 {
        self.values[ci * self.mem_axis.len() + mi]
    }

    pub fn cpu_index(&self, c: u32) -> Option<usize> {
        self.cpu_axis.binary_search(&c).ok()
    }

    pub fn mem_index(&self, m: f64) -> Option<usize> {
        let i = self.mem_axis.partition_point(|&x| x < m - 1e-6);
        (i < self.mem_axis.len() && (self.mem_axis[i] - m).abs() <= 1e-6).then_some(i)
    }

    /// Value at an on-grid cell.
    pub fn at(&self, c: u32, m: f64) -> Option<f64> {
        Some(self.get(self.cpu_index(c)?, self.mem_index(m)?))
    }

    pub fn max_cpus(&self) -> u32 {
        *self.cpu_axis.last().unwrap()
    }

    pub fn max_mem(&self) -> f64 {
        *self.mem_axis.last().unwrap()
    }

    pub fn peak(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }

    pub fn is_monotone(&self) -> bool {
        for ci in 0..self.rows() {
            for mi in 0..self.cols() {
                let v = self.get(ci, mi);
                if !v.is_finite() || v < 0.0 {
                    return false;
                }
                if ci > 0 && self.get(ci - 1, mi) > v {
                    return false;
                }
                if mi > 0 && self.get(ci, mi - 1) > v {
                    return false;
                }
            }
        }
        true
    }

    /// Rows are core counts, columns memory in GB, cells samples/s.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["cpus".to_string()];
        header.extend(self.mem_axis.iter().map(|m| format!("{m}")));
        w.write_record(&header)?;
        for (ci, c) in self.cpu_axis.iter().enumerate() {
            let mut row = vec![c.to_string()];
            row.extend((0..self.cols()).map(|mi| format!("{:.6}", self.get(ci, mi))));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Piecewise-linear interpolation through sorted knots, clamped flat outside
/// them and made non-decreasing.
fn interpolate(points: &[(u32, f64)], axis: &[u32]) -> Vec<f64> {
    let mut out = Vec::with_capacity(axis.len());
    let mut running = 0.0f64;
    for &c in axis {
        let k = points.partition_point(|p| p.0 < c);
        let v = if k < points.len() && points[k].0 == c {
            points[k].1
        } else if k == 0 {
            points[0].1
        } else if k == points.len() {
            points[k - 1].1
        } else {
            let (c0, v0) = points[k - 1];
            let (c1, v1) = points[k];
            v0 + (v1 - v0) * (c - c0) as f64 / (c1 - c0) as f64
        };
        running = running.max(v);
        out.push(running);
    }
    out
}

/// Completes the matrix: CPU rows are interpolated from the measured points
/// and each cell is then capped by the storage rate the cache size permits.
pub fn fill_matrix_optimistic(class: &JobClass, profile: &CpuProfile, setup: &ProfileSetup) -> SensitivityMatrix {
    assert!(!profile.points.is_empty(), "no profiled points");
    let cpu_axis = setup.cpu_axis();
    let mem_axis = setup.mem_axis(class);
    let cpu_bound = interpolate(&profile.points, &cpu_axis);
    let disk: Vec<f64> = mem_axis.iter().map(|&m| disk_rate(class, m, setup.storage_bw)).collect();
    let mut values = Vec::with_capacity(cpu_axis.len() * mem_axis.len());
    for cb in &cpu_bound {
        for d in &disk {
            values.push(cb.min(*d));
        }
    }
    SensitivityMatrix::from_values(setup.gpus, cpu_axis, mem_axis, values, profile.sampled_cpus())
}

/// Best-case GPU, CPU and memory demand of a job.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemandVector {
    pub gpus: u32,
    pub cpus: u32,
    pub mem_gb: f64,
    pub peak_throughput: f64,
}

/// Smallest CPU count reaching `(1 - eps_sat)` of peak, then the smallest
/// memory reaching it at that CPU count.
pub fn derive_demand_vector(matrix: &SensitivityMatrix, gpus: u32, eps_sat: f64) -> DemandVector {
    let peak = matrix.peak();
    let target = (1.0 - eps_sat) * peak;
    let last = matrix.cols() - 1;
    let ci = (0..matrix.rows()).find(|&ci| matrix.get(ci, last) >= target).unwrap_or(matrix.rows() - 1);
    let mi = (0..matrix.cols()).find(|&mi| matrix.get(ci, mi) >= target).unwrap_or(last);
    DemandVector { gpus, cpus: matrix.cpu_axis[ci], mem_gb: matrix.mem_axis[mi], peak_throughput: peak }
}

/// Everything the scheduler knows about a job after profiling.
#[derive(Debug, Clone, PartialEq)]
pub struct JobProfile {
    pub gpus: u32,
    pub matrix: SensitivityMatrix,
    pub demand: DemandVector,
    pub profiling_minutes: f64,
    pub prop_cpus: u32,
    pub prop_mem_gb: f64,
    /// Matrix value at the proportional cell; equals the oracle there.
    pub prop_throughput: f64,
    /// Demand vector lifted until it is at least as fast as the
    /// proportional share.
    pub request: (u32, f64),
    /// Cheapest cell no larger than proportional in either dimension that is
    /// still as fast as the proportional share.
    pub fallback: (u32, f64),
}

impl JobProfile {
    pub fn build(class: &JobClass, gpus: u32, server: &ServerSpec, threshold: f64, eps_sat: f64) -> Self {
        let setup = ProfileSetup::for_server(server, gpus);
        let profile = profile_cpu_points(class, &setup, threshold);
        let matrix = fill_matrix_optimistic(class, &profile, &setup);
        let demand = derive_demand_vector(&matrix, gpus, eps_sat);
        Self::from_parts(matrix, demand, profile.minutes, setup.prop_cpus, setup.prop_mem_gb)
    }

    pub fn from_parts(matrix: SensitivityMatrix, demand: DemandVector, profiling_minutes: f64, prop_cpus: u32, prop_mem_gb: f64) -> Self {
        let w = |c: u32, m: f64| matrix.at(c, m).expect("cell on the profiling grid");
        let prop_throughput = w(prop_cpus, prop_mem_gb);

        let mems_from = |m0: f64| matrix.mem_axis.iter().cloned().filter(move |&m| m >= m0 - 1e-9);
        let lift = |c: u32| mems_from(demand.mem_gb).find(|&m| w(c, m) >= prop_throughput).map(|m| (c, m));
        let request = lift(demand.cpus)
            .or_else(|| lift(demand.cpus.max(prop_cpus)))
            .unwrap_or((demand.cpus.max(prop_cpus), demand.mem_gb.max(prop_mem_gb)));

        let (rc, rm) = request;
        let low_c = rc.min(prop_cpus);
        let low_m = rm.min(prop_mem_gb);
        let fallback = [(low_c, low_m), (prop_cpus, low_m), (low_c, prop_mem_gb)]
            .into_iter()
            .find(|&(c, m)| w(c, m) >= prop_throughput)
            .unwrap_or((prop_cpus, prop_mem_gb));

        JobProfile {
            gpus: demand.gpus,
            matrix,
            demand,
            profiling_minutes,
            prop_cpus,
            prop_mem_gb,
            prop_throughput,
            request,
            fallback,
        }
    }

    pub fn throughput(&self, cpus: u32, mem_gb: f64) -> f64 {
        self.matrix.at(cpus, mem_gb).unwrap_or_else(|| panic!("({cpus}, {mem_gb}) is off the profiling grid"))
    }
}
