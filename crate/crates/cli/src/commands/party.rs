//! `party` and `run`: execute the job a session config describes.

use std::path::Path;
use std::time::{Duration, Instant};

use serde::Serialize;
use ssperm_core::nn::workload::{run_job, run_job_plain};
use ssperm_core::runtime::{account_report, run_tcp_party, JobSpec, Mode, TrafficReport};
use ssperm_core::{run_local, PartyId, SessionConfig};

use crate::output::write_json;
use crate::{usage, CliResult};

#[derive(Debug, Serialize)]
pub struct JobResult {
    pub role: Option<String>,
    pub job: JobSpec,
    pub output: Vec<f64>,
    /// Largest deviation from the same job run in double precision.
    pub max_abs_error: f64,
    pub wall_seconds: f64,
    pub traffic: TrafficReport,
}

fn load(path: &Path) -> CliResult<(SessionConfig, JobSpec)> {
    let cfg = SessionConfig::load(path).map_err(|e| usage(e.to_string()))?;
    let job = cfg.job.clone().ok_or_else(|| usage(format!("{} has no [job] section", path.display())))?;
    Ok((cfg, job))
}

fn max_abs_error(got: &[f64], job: &JobSpec, seed: u64) -> CliResult<f64> {
    let want = run_job_plain(job, seed)?;
    Ok(got.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

pub fn run_party(role: PartyId, config: &Path, timeout_secs: u64, out: Option<&Path>) -> CliResult {
    let (cfg, job) = load(config)?;
    if cfg.mode != Mode::Tcp {
        return Err(usage("party mode needs mode = \"tcp\" in the config"));
    }
    log::info!("{role}: connecting for session {}", cfg.session_id);
    let t = Instant::now();
    let (output, acct) = run_tcp_party(&cfg, role, Duration::from_secs(timeout_secs), |p| run_job(p, &job, cfg.data_seed))?;
    let result = JobResult {
        role: Some(role.to_string()),
        max_abs_error: max_abs_error(&output, &job, cfg.data_seed)?,
        wall_seconds: t.elapsed().as_secs_f64(),
        traffic: account_report(&acct),
        job,
        output,
    };
    write_json(out, &result)
}

pub fn run_all(config: &Path, out: Option<&Path>) -> CliResult {
    let (cfg, job) = load(config)?;
    if cfg.mode != Mode::LocalSim {
        log::warn!("running a tcp config with in-process links");
    }
    let t = Instant::now();
    let res = run_local(&cfg, |p| run_job(p, &job, cfg.data_seed))?;
    let [output, _, _] = res.outputs;
    let result = JobResult {
        role: None,
        max_abs_error: max_abs_error(&output, &job, cfg.data_seed)?,
        wall_seconds: t.elapsed().as_secs_f64(),
        traffic: account_report(&res.accounting),
        job,
        output,
    };
    write_json(out, &result)
}
