//! `bench`: traffic, rounds and wall time of one canned model pass.

use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, ValueEnum};
use serde::Serialize;
use ssperm_core::nn::workload::{job_arch, run_job};
use ssperm_core::runtime::{account_report, JobKind, JobSpec, TrafficReport};
use ssperm_core::{run_local, SessionConfig};

use crate::output::write_json;
use crate::{usage, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    /// Logistic regression `dim-1-sigmoid`.
    Lr,
    /// `100-50-relu-1-sigmoid`.
    Dnn1,
    /// `1000-500-relu-1-sigmoid`.
    Dnn2,
    /// `dim-hidden...-1-sigmoid` from `--dim` and `--hidden`.
    Custom,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_enum)]
    model: Model,
    /// Input width for `lr` and `custom`.
    #[arg(long, default_value_t = 100)]
    dim: usize,
    /// Comma-separated ReLU layer widths for `custom`.
    #[arg(long, value_delimiter = ',')]
    hidden: Vec<usize>,
    #[arg(long, default_value_t = 128)]
    batch: usize,
    /// Measure SGD steps instead of inference.
    #[arg(long, conflicts_with = "infer")]
    train: bool,
    /// Measure inference (the default).
    #[arg(long)]
    infer: bool,
    /// SGD steps when training.
    #[arg(long, default_value_t = 1)]
    steps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
pub struct BenchReport {
    pub model: Model,
    pub arch: String,
    pub job: JobSpec,
    pub wall_seconds: f64,
    pub traffic: TrafficReport,
}

pub fn job_for(args: &BenchArgs) -> CliResult<JobSpec> {
    if args.batch == 0 {
        return Err(usage("--batch must be at least 1"));
    }
    if args.train && args.steps == 0 {
        return Err(usage("--steps must be at least 1"));
    }
    let (dim, hidden) = match args.model {
        Model::Lr => (args.dim, vec![]),
        Model::Dnn1 => (100, vec![50]),
        Model::Dnn2 => (1000, vec![500]),
        Model::Custom => (args.dim, args.hidden.clone()),
    };
    if dim == 0 || hidden.contains(&0) {
        return Err(usage("layer widths must be positive"));
    }
    let kind = match (args.train, args.model) {
        (true, _) => JobKind::DnnTrain,
        (false, Model::Lr) => JobKind::LrInfer,
        (false, _) => JobKind::DnnInfer,
    };
    Ok(JobSpec { kind, dim, batch: args.batch, hidden, steps: if args.train { args.steps } else { 1 } })
}

pub fn run(args: BenchArgs) -> CliResult {
    let job = job_for(&args)?;
    let arch = job_arch(&job)?;
    let cfg = SessionConfig::deterministic(args.seed);
    log::info!("bench {arch} batch {} ({:?})", job.batch, job.kind);
    let t = Instant::now();
    let res = run_local(&cfg, |p| run_job(p, &job, cfg.data_seed))?;
    let wall_seconds = t.elapsed().as_secs_f64();
    let traffic = account_report(&res.accounting);
    let report = BenchReport { model: args.model, arch: arch.to_string(), job, wall_seconds, traffic };
    write_json(args.out.as_deref(), &report)
}
