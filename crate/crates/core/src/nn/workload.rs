//! Canned workloads that every engine can run from a session config alone.
//!
//! Inputs are synthetic and derived from the config's data seed. `P0` owns
//! the features (and labels when training); `P1` owns the model for
//! inference jobs, `P0` for training.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::nn::data::two_gaussians;
use crate::nn::{nn_backprop, nn_infer, reveal_net, share_net, Activation, Arch, PlainNet};
use crate::protocols::share_reals;
use crate::runtime::config::{JobKind, JobSpec};
use crate::runtime::party::Party;
use crate::sharing::PartyId;

/// Learning rate used by the training job.
pub const JOB_LR: f64 = 0.1;

/// Network for a job: `dim-h1-relu-...-1-sigmoid`, or `dim-1-sigmoid` for
/// logistic regression.
pub fn job_arch(job: &JobSpec) -> Result<Arch> {
    let mut layers: Vec<(usize, Activation)> = match job.kind {
        JobKind::LrInfer => Vec::new(),
        _ => job.hidden.iter().map(|&h| (h, Activation::Relu)).collect(),
    };
    layers.push((1, Activation::Sigmoid));
    Arch::new(job.dim, layers)
}

pub fn job_features(job: &JobSpec, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..job.batch * job.dim).map(|_| rng.sample(StandardNormal)).collect()
}

/// Runs the job and returns the revealed result: predictions for inference
/// jobs, flattened parameters after training.
pub fn run_job(p: &mut Party, job: &JobSpec, data_seed: u64) -> Result<Vec<f64>> {
    if job.batch == 0 || job.dim == 0 {
        return Err(Error::Config("job batch and dim must be positive".into()));
    }
    let arch = job_arch(job)?;
    let me = p.role();
    match job.kind {
        JobKind::LrInfer | JobKind::DnnInfer => {
            let model = (me == PartyId::P1).then(|| PlainNet::init(&arch, data_seed ^ 0x5eed));
            let xs = (me == PartyId::P0).then(|| job_features(job, data_seed));
            let net = share_net(p, PartyId::P1, model.as_ref(), &arch)?;
            let x = share_reals(p, PartyId::P0, xs.as_deref(), &[job.batch, job.dim])?;
            let cache = nn_infer(p, &x, &net)?;
            p.reveal(cache.output())
        }
        JobKind::DnnTrain => {
            let model = (me == PartyId::P0).then(|| PlainNet::init(&arch, data_seed ^ 0x5eed));
            let mut net = share_net(p, PartyId::P0, model.as_ref(), &arch)?;
            for step in 0..job.steps {
                let ds = (me == PartyId::P0).then(|| two_gaussians(job.batch, job.dim, 3.0, data_seed.wrapping_add(step as u64)));
                let x = share_reals(p, PartyId::P0, ds.as_ref().map(|d| d.x.as_slice()), &[job.batch, job.dim])?;
                let y = share_reals(p, PartyId::P0, ds.as_ref().map(|d| d.y.as_slice()), &[job.batch, 1])?;
                net = nn_backprop(p, &x, &y, &net, JOB_LR)?;
            }
            Ok(reveal_net(p, &net)?.flat_params())
        }
    }
}

/// The same job evaluated in double precision.
pub fn run_job_plain(job: &JobSpec, data_seed: u64) -> Result<Vec<f64>> {
    let arch = job_arch(job)?;
    let mut net = PlainNet::init(&arch, data_seed ^ 0x5eed);
    match job.kind {
        JobKind::LrInfer | JobKind::DnnInfer => Ok(net.predict(&job_features(job, data_seed), job.batch)),
        JobKind::DnnTrain => {
            for step in 0..job.steps {
                let ds = two_gaussians(job.batch, job.dim, 3.0, data_seed.wrapping_add(step as u64));
                net.sgd_step(&ds.x, &ds.y, job.batch, JOB_LR);
            }
            Ok(net.flat_params())
        }
    }
}
