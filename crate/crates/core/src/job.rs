//! Job classes (model archetypes) and per-job runtime state.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Image,
    Language,
    Speech,
}

impl Task {
    pub const ALL: [Task; 3] = [Task::Image, Task::Language, Task::Speech];

    pub fn as_str(&self) -> &'static str {
        match self {
            Task::Image => "image",
            Task::Language => "language",
            Task::Speech => "speech",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "image" => Ok(Task::Image),
            "language" => Ok(Task::Language),
            "speech" => Ok(Task::Speech),
            other => Err(SimError::InvalidSpec(format!("unknown task '{other}'"))),
        }
    }
}

/// Performance parameters of a model archetype, consumed by the throughput
/// oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobClass {
    pub name: String,
    pub task: Task,
    /// Samples/s one GPU can consume.
    pub gpu_rate: f64,
    /// Samples/s one core can pre-process.
    pub cpu_rate: f64,
    pub dataset_samples: u64,
    /// Megabytes per sample.
    pub bytes_per_sample: f64,
    /// Cores below which the job cannot run.
    #[serde(default = "default_min_cpu")]
    pub min_cpu: u32,
}

fn default_min_cpu() -> u32 {
    1
}

impl JobClass {
    pub fn dataset_gb(&self) -> f64 {
        self.dataset_samples as f64 * self.bytes_per_sample / 1000.0
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let ok = self.gpu_rate > 0.0
            && self.cpu_rate > 0.0
            && self.bytes_per_sample > 0.0
            && self.dataset_samples > 0
            && self.min_cpu >= 1
            && self.gpu_rate.is_finite()
            && self.cpu_rate.is_finite();
        if ok {
            Ok(())
        } else {
            Err(SimError::InvalidSpec(format!("job class '{}' has non-positive parameters", self.name)))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobState {
    Queued,
    Running,
    Finished,
}

/// A job as the simulator tracks it.
#[derive(Debug, Clone)]
pub struct Job {
    pub id: u64,
    pub class: Arc<JobClass>,
    pub gpu_demand: u32,
    /// Minutes.
    pub arrival: f64,
    pub total_samples: u64,
    /// GPU-minutes received so far.
    pub attained_service: f64,
    pub samples_done: u64,
    pub state: JobState,
}

impl Job {
    pub fn new(id: u64, class: Arc<JobClass>, gpu_demand: u32, arrival: f64, total_samples: u64) -> Self {
        Job {
            id,
            class,
            gpu_demand,
            arrival,
            total_samples,
            attained_service: 0.0,
            samples_done: 0,
            state: JobState::Queued,
        }
    }

    pub fn remaining_samples(&self) -> u64 {
        self.total_samples - self.samples_done
    }

    /// Credits up to `samples` of work; returns how many were credited.
    pub fn credit(&mut self, samples: u64) -> u64 {
        let credited = samples.min(self.remaining_samples());
        self.samples_done += credited;
        if self.samples_done == self.total_samples {
            self.state = JobState::Finished;
        }
        credited
    }
}
