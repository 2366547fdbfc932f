//! Ground-truth throughput model standing in for real training runs.
//!
//! Throughput is the minimum of three bottlenecks: GPU compute, CPU
//! pre-processing, and storage fetches for samples missing from a DNN-aware
//! cache that guarantees a fixed hit fraction `h = m / dataset` per epoch.

use crate::job::JobClass;

/// Samples/s achievable by the storage path with `mem_gb` of cache.
pub fn disk_rate(class: &JobClass, mem_gb: f64, storage_bw: f64) -> f64 {
    let hit = (mem_gb / class.dataset_gb()).clamp(0.0, 1.0);
    if hit >= 1.0 {
        f64::INFINITY
    } else {
        storage_bw * 1000.0 / (class.bytes_per_sample * (1.0 - hit))
    }
}

/// Samples/s for `g` GPUs, `c` cores and `m` GB of memory.
pub fn oracle_throughput(class: &JobClass, g: u32, c: u32, m: f64, storage_bw: f64) -> f64 {
    if g == 0 || c < class.min_cpu {
        return 0.0;
    }
    let gpu = g as f64 * class.gpu_rate;
    let cpu = c as f64 * class.cpu_rate;
    gpu.min(cpu).min(disk_rate(class, m, storage_bw))
}
