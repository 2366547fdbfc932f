use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use synsim_core::config::ExperimentConfig;
use synsim_core::optimizer::progress_units;
use synsim_core::profiler::{fill_matrix_optimistic, profile_cpu_points, derive_demand_vector, ProfileSetup};
use synsim_core::simulator::{compare, write_speedups, write_summary, SummaryRow};
use synsim_core::workload::{gen_trace, save_trace};
use synsim_core::{MechanismKind, PolicyKind, Result, SimError};

#[derive(Parser)]
#[command(name = "synsim", version, about = "Resource-sensitive GPU cluster scheduling simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (rate, policy, mechanism) cell of an experiment.
    Simulate(Common),
    /// Profile one model class and print its demand vector.
    Profile {
        /// Model class name, e.g. resnet18.
        class: String,
        #[arg(long, default_value_t = 1)]
        gpus: u32,
        /// Write the sensitivity matrix here as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Write a synthetic trace as CSV.
    GenTrace(Common),
    /// Compare mechanisms against the proportional baseline on one trace.
    Compare(Common),
}

#[derive(Args, Clone)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Repeatable; replaces the configured policies.
    #[arg(long = "policy")]
    policies: Vec<PolicyKind>,
    /// Repeatable; replaces the configured mechanisms.
    #[arg(long = "mechanism")]
    mechanisms: Vec<MechanismKind>,
    #[arg(long, env = "SYNSIM_SEED")]
    seed: Option<u64>,
    /// Repeatable; replaces the configured arrival rates (jobs/hour).
    #[arg(long = "lambda")]
    lambdas: Vec<f64>,
    /// Output directory (file for gen-trace).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replay a CSV trace instead of generating one.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    threshold: Option<f64>,
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if !self.policies.is_empty() {
            cfg.policies = self.policies.clone();
        }
        if !self.mechanisms.is_empty() {
            cfg.mechanisms = self.mechanisms.clone();
        }
        if self.seed.is_some() {
            cfg.seed = self.seed;
        }
        if !self.lambdas.is_empty() {
            cfg.lambdas = self.lambdas.clone();
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        if let Some(t) = &self.trace {
            cfg.trace_path = Some(t.clone());
        }
        if let Some(t) = self.threshold {
            cfg.threshold = t;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn simulate(c: &Common) -> Result<()> {
    let cfg = c.config()?;
    let rows = cfg.run_sweep()?;
    for r in &rows {
        println!(
            "{:<40} avg_jct={:.1} p99_jct={:.1} makespan={:.1}{}",
            r.label,
            r.avg_jct,
            r.p99_jct,
            r.makespan,
            r.speedup.map(|s| format!(" speedup={s:.3}")).unwrap_or_default()
        );
    }
    println!("wrote {}", cfg.out.join("summary.csv").display());
    Ok(())
}

fn profile(class: &str, gpus: u32, out: Option<&PathBuf>, threshold: Option<f64>, config: Option<&PathBuf>) -> Result<()> {
    let cfg = match config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let threshold = threshold.unwrap_or(cfg.threshold);
    let spec = cfg.cluster.to_spec();
    let server = spec.reference_server();
    if gpus == 0 || gpus > spec.total_gpus() {
        return Err(SimError::Demand { job: 0, gpus, max: spec.total_gpus() });
    }
    let catalog = cfg.catalog();
    let jc = catalog.by_name(class).ok_or_else(|| SimError::Config(format!("unknown model class `{class}`")))?;
    let setup = ProfileSetup::for_server(server, gpus);
    let points = profile_cpu_points(&jc, &setup, threshold);
    let matrix = fill_matrix_optimistic(&jc, &points, &setup);
    let demand = derive_demand_vector(&matrix, gpus, cfg.eps_sat);
    println!("class: {} ({})", jc.name, jc.task);
    println!("samples: {}", points.points.len());
    println!("sampled_cpus: {:?}", points.sampled_cpus());
    println!("profiling_minutes: {}", points.minutes);
    println!("demand: gpus={} cpus={} mem_gb={} peak={:.3}", demand.gpus, demand.cpus, demand.mem_gb, demand.peak_throughput);
    let prop = matrix.at(setup.prop_cpus, setup.prop_mem_gb).unwrap_or(0.0);
    println!(
        "proportional: cpus={} mem_gb={} throughput={:.3} progress_per_round={}",
        setup.prop_cpus,
        setup.prop_mem_gb,
        prop,
        progress_units(prop, spec.round_minutes)
    );
    if let Some(path) = out {
        matrix.write_csv(std::fs::File::create(path)?)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn gen(c: &Common) -> Result<()> {
    let cfg = c.config()?;
    let spec = cfg.trace_spec(cfg.lambdas.first().copied());
    let cluster = cfg.cluster.to_spec();
    let trace = gen_trace(&spec, &cfg.catalog(), cluster.reference_server())?;
    let path = c.out.clone().unwrap_or_else(|| PathBuf::from("trace.csv"));
    save_trace(&trace, &path)?;
    println!("wrote {} jobs to {}", trace.jobs.len(), path.display());
    Ok(())
}

fn cmp(c: &Common) -> Result<()> {
    let cfg = c.config()?;
    let trace = cfg.build_trace(cfg.lambdas.first().copied())?;
    let base = cfg.settings(cfg.policies[0], MechanismKind::Proportional);
    let runs: Vec<(PolicyKind, MechanismKind)> =
        cfg.policies.iter().flat_map(|&p| cfg.mechanisms.iter().map(move |&m| (p, m))).collect();
    let rows = compare(&trace, &base, &runs)?;
    std::fs::create_dir_all(&cfg.out)?;
    let mut summary = Vec::new();
    for r in &rows {
        let label = format!("{}_{}", r.policy, r.mechanism);
        r.report.write_dir(&cfg.out.join(&label))?;
        write_speedups(&r.job_speedups, std::fs::File::create(cfg.out.join(&label).join("speedups.csv"))?)?;
        let mut row = SummaryRow::new(&label, r.policy.as_str(), r.mechanism.as_str(), cfg.lambdas.first().copied(), &r.report);
        row.speedup = Some(r.avg_speedup);
        println!("{label:<24} avg_jct={:.1} speedup={:.3} p99_speedup={:.3}", r.report.avg_jct, r.avg_speedup, r.p99_speedup);
        summary.push(row);
    }
    write_summary(&summary, std::fs::File::create(cfg.out.join("summary.csv"))?)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(c) => simulate(c),
        Command::Profile { class, gpus, out, threshold, config } => {
            profile(class, *gpus, out.as_ref(), *threshold, config.as_ref())
        }
        Command::GenTrace(c) => gen(c),
        Command::Compare(c) => cmp(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
