//! Queue-ordering policies. Lower keys run first.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::job::Job;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Fifo,
    Srtf,
    Las,
    Ftf,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 4] = [PolicyKind::Fifo, PolicyKind::Srtf, PolicyKind::Las, PolicyKind::Ftf];

    pub fn as_str(&self) -> &'static str {
        match self {
            PolicyKind::Fifo => "fifo",
            PolicyKind::Srtf => "srtf",
            PolicyKind::Las => "las",
            PolicyKind::Ftf => "ftf",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "fifo" => Ok(PolicyKind::Fifo),
            "srtf" => Ok(PolicyKind::Srtf),
            "las" => Ok(PolicyKind::Las),
            "ftf" => Ok(PolicyKind::Ftf),
            other => Err(SimError::Config(format!("unknown policy `{other}`"))),
        }
    }
}

/// The job attributes a policy looks at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueueEntry {
    pub id: u64,
    pub arrival: f64,
    pub gpu_demand: u32,
    pub total_samples: u64,
    pub remaining_samples: u64,
    /// GPU-minutes.
    pub attained_service: f64,
    /// Samples/s at the GPU-proportional share, independent of whatever the
    /// job is currently allocated.
    pub prop_throughput: f64,
}

impl QueueEntry {
    pub fn from_job(job: &Job, prop_throughput: f64) -> Self {
        QueueEntry {
            id: job.id,
            arrival: job.arrival,
            gpu_demand: job.gpu_demand,
            total_samples: job.total_samples,
            remaining_samples: job.remaining_samples(),
            attained_service: job.attained_service,
            prop_throughput,
        }
    }

    fn minutes_at_prop(&self, samples: u64) -> f64 {
        if self.prop_throughput > 0.0 {
            samples as f64 / self.prop_throughput / 60.0
        } else {
            f64::INFINITY
        }
    }
}

pub fn priority(entry: &QueueEntry, now: f64, kind: PolicyKind) -> f64 {
    match kind {
        PolicyKind::Fifo => entry.arrival,
        PolicyKind::Srtf => entry.minutes_at_prop(entry.remaining_samples),
        PolicyKind::Las => entry.attained_service,
        PolicyKind::Ftf => {
            let ideal = entry.minutes_at_prop(entry.total_samples);
            let shared = now - entry.arrival + entry.minutes_at_prop(entry.remaining_samples);
            -(shared / ideal)
        }
    }
}

/// Sorts by priority key, breaking ties by arrival then id.
pub fn order_queue(entries: &[QueueEntry], now: f64, kind: PolicyKind) -> Vec<QueueEntry> {
    let mut keyed: Vec<(f64, QueueEntry)> = entries.iter().map(|e| (priority(e, now, kind), *e)).collect();
    keyed.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then_with(|| a.1.arrival.total_cmp(&b.1.arrival))
            .then_with(|| a.1.id.cmp(&b.1.id))
    });
    keyed.into_iter().map(|(_, e)| e).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn entry(id: u64, arrival: f64, remaining: u64, attained: f64) -> QueueEntry {
        QueueEntry {
            id,
            arrival,
            gpu_demand: 1,
            total_samples: 1000,
            remaining_samples: remaining,
            attained_service: attained,
            prop_throughput: 1.0,
        }
    }

    fn ids(v: &[QueueEntry]) -> Vec<u64> {
        v.iter().map(|e| e.id).collect()
    }

    #[test]
    fn fifo_orders_by_arrival() {
        let q = [entry(2, 10.0, 5, 0.0), entry(1, 0.0, 5, 0.0)];
        assert_eq!(ids(&order_queue(&q, 20.0, PolicyKind::Fifo)), vec![1, 2]);
    }

    #[test]
    fn las_prefers_fresh_jobs() {
        let q = [entry(1, 0.0, 500, 120.0), entry(2, 5.0, 1000, 0.0)];
        assert_eq!(ids(&order_queue(&q, 20.0, PolicyKind::Las)), vec![2, 1]);
    }

    #[test]
    fn srtf_prefers_short_remaining() {
        let q = [entry(1, 0.0, 900, 0.0), entry(2, 1.0, 100, 0.0)];
        assert_eq!(ids(&order_queue(&q, 20.0, PolicyKind::Srtf)), vec![2, 1]);
    }

    #[test]
    fn srtf_matches_brute_force() {
        let q = [
            QueueEntry { prop_throughput: 10.0, ..entry(1, 0.0, 6000, 0.0) },
            QueueEntry { prop_throughput: 2.0, ..entry(2, 1.0, 600, 0.0) },
            QueueEntry { prop_throughput: 5.0, ..entry(3, 2.0, 9000, 0.0) },
            QueueEntry { prop_throughput: 1.0, ..entry(4, 3.0, 30, 0.0) },
            QueueEntry { prop_throughput: 20.0, ..entry(5, 4.0, 6000, 0.0) },
        ];
        let mut expected: Vec<(f64, u64)> =
            q.iter().map(|e| (e.remaining_samples as f64 / e.prop_throughput, e.id)).collect();
        expected.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        let expected: Vec<u64> = expected.into_iter().map(|p| p.1).collect();
        assert_eq!(ids(&order_queue(&q, 0.0, PolicyKind::Srtf)), expected);
    }

    #[test]
    fn ftf_prefers_most_delayed() {
        // both need 1000 s alone; job 1 has waited longer
        let q = [entry(2, 30.0, 1000, 0.0), entry(1, 0.0, 1000, 0.0)];
        assert_eq!(ids(&order_queue(&q, 40.0, PolicyKind::Ftf)), vec![1, 2]);
    }

    #[test]
    fn parse_round_trip() {
        for k in PolicyKind::ALL {
            assert_eq!(k.as_str().parse::<PolicyKind>().unwrap(), k);
        }
        assert!("lottery".parse::<PolicyKind>().is_err());
    }

    fn arb_entries() -> impl Strategy<Value = Vec<QueueEntry>> {
        prop::collection::vec((0u32..5, 0u64..50, 0u32..4, 1u32..4), 0..20).prop_map(|v| {
            v.into_iter()
                .enumerate()
                .map(|(i, (a, r, s, p))| QueueEntry {
                    prop_throughput: p as f64,
                    ..entry(i as u64, a as f64, r, s as f64)
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn ordering_is_canonical(entries in arb_entries(), seed in any::<u64>(), k in 0usize..4) {
            let kind = PolicyKind::ALL[k];
            let base = order_queue(&entries, 100.0, kind);
            let mut shuffled = entries.clone();
            let n = shuffled.len();
            if n > 1 {
                for i in 0..n {
                    shuffled.swap(i, (seed.wrapping_mul(i as u64 + 7) % n as u64) as usize);
                }
            }
            prop_assert_eq!(ids(&order_queue(&shuffled, 100.0, kind)), ids(&base));
            prop_assert_eq!(ids(&order_queue(&base, 100.0, kind)), ids(&base));
            let mut a = ids(&base);
            let mut b = ids(&entries);
            a.sort();
            b.sort();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn equal_priorities_keep_arrival_order(n in 1usize..10) {
            let q: Vec<QueueEntry> = (0..n).rev().map(|i| entry(i as u64, i as f64, 10, 0.0)).collect();
            let out = order_queue(&q, 0.0, PolicyKind::Las);
            prop_assert_eq!(ids(&out), (0..n as u64).collect::<Vec<_>>());
        }
    }
}
