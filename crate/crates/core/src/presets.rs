//! Ten synthetic model archetypes (5 image, 3 language, 2 speech).
//!
//! Rates are per GPU / per core. Image and speech classes saturate between 4
//! and 12 cores per GPU and some need more than a proportional share of
//! memory; language classes saturate at one or two cores with small datasets.
//! Saturation points sit at whole core counts.

use crate::job::{JobClass, Task};

fn class(name: &str, task: Task, gpu_rate: f64, cpu_rate: f64, dataset_samples: u64, mb_per_sample: f64) -> JobClass {
    JobClass {
        name: name.to_string(),
        task,
        gpu_rate,
        cpu_rate,
        dataset_samples,
        bytes_per_sample: mb_per_sample,
        min_cpu: 1,
    }
}

/// All presets in a fixed order.
pub fn all() -> Vec<JobClass> {
    vec![
        // 9 cores/GPU, 300 GB dataset: needs ~200 GB to stay fed at 9 cores.
        class("resnet18", Task::Image, 900.0, 100.0, 240_000, 1.25),
        class("alexnet", Task::Image, 1800.0, 150.0, 1_281_167, 0.11),
        class("shufflenet", Task::Image, 1440.0, 120.0, 1_281_167, 0.11),
        class("mobilenet_v2", Task::Image, 880.0, 110.0, 1_281_167, 0.11),
        class("resnet50", Task::Image, 360.0, 90.0, 1_281_167, 0.11),
        class("gnmt", Task::Language, 1200.0, 5000.0, 4_500_000, 0.003),
        class("transformer_xl", Task::Language, 2500.0, 3000.0, 1_800_000, 0.0003),
        class("lstm", Task::Language, 800.0, 400.0, 2_000_000, 0.0025),
        // 6 cores/GPU, 250 GB of audio features.
        class("deepspeech", Task::Speech, 240.0, 40.0, 83_333, 3.0),
        class("m5", Task::Speech, 540.0, 60.0, 100_000, 1.0),
    ]
}

pub fn by_name(name: &str) -> Option<JobClass> {
    all().into_iter().find(|c| c.name == name)
}

pub fn by_task(task: Task) -> Vec<JobClass> {
    all().into_iter().filter(|c| c.task == task).collect()
}
