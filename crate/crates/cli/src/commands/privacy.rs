//! `privacy`: leakage experiments on permuted activations.

use std::path::PathBuf;

use clap::{Args, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use ssperm_core::privacy::{
    attack_demo, flipping_distribution_test, ordering_experiment, perm_error_stats, random_unit_orthogonal, AttackOutcome, DcorEstimate,
    DistributionKind, PermMode, PermutationStats,
};

use crate::output::{write_csv, write_json};
use crate::{usage, CliResult};

#[derive(Debug, Subcommand)]
pub enum PrivacyCommand {
    /// Distance correlation between inputs and permuted or 1-D outputs.
    DcorSim(DcorSimArgs),
    /// Histogram matching attack against leaked hidden layers.
    Attack(AttackArgs),
    /// Statistics of the permutation error term for random data.
    PermStats(PermStatsArgs),
    /// Fraction of negative values after random sign flips.
    FlipTest(FlipArgs),
}

#[derive(Debug, Args)]
pub struct DcorSimArgs {
    /// Comma-separated subset of normal, uniform, sparse, subspace.
    #[arg(long, value_delimiter = ',', default_value = "normal,uniform,sparse,subspace")]
    distributions: Vec<DistributionKind>,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 100)]
    d: usize,
    #[arg(long, default_value_t = 100)]
    h: usize,
    #[arg(long, default_value_t = 200)]
    repeats: usize,
    /// Rows permuted together.
    #[arg(long, default_value_t = 1)]
    batch: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// CSV output; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the full estimates as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct DcorRow {
    distribution: String,
    method: &'static str,
    dcor: f64,
    ci_low: f64,
    ci_high: f64,
}

#[derive(Debug, Serialize)]
struct DcorJson {
    distribution: String,
    estimates: Vec<(&'static str, DcorEstimate)>,
    ordered: bool,
    ordered_corrected: bool,
}

#[derive(Debug, Args)]
pub struct AttackArgs {
    /// Comma-separated batch sizes; `none` leaks the projection unpermuted.
    #[arg(long, value_delimiter = ',', default_value = "none,1,10")]
    batch: Vec<String>,
    #[arg(long, default_value_t = 500)]
    targets: usize,
    #[arg(long, default_value_t = 500)]
    aux: usize,
    #[arg(long, default_value_t = 50)]
    d: usize,
    #[arg(long, default_value_t = 100)]
    h: usize,
    /// Candidates kept per target.
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct AttackRow {
    batch: String,
    same_cluster_rate: f64,
    chance: f64,
    targets: usize,
    k: usize,
}

impl AttackRow {
    fn new(batch: Option<usize>, o: AttackOutcome) -> Self {
        Self { batch: batch.map_or_else(|| "none".into(), |b| b.to_string()), same_cluster_rate: o.same_cluster_rate, chance: o.chance, targets: o.targets, k: o.k }
    }
}

#[derive(Debug, Args)]
pub struct PermStatsArgs {
    #[arg(long, default_value_t = 6)]
    n: usize,
    /// Visit all n! permutations instead of sampling.
    #[arg(long)]
    enumerate: bool,
    /// Permutations drawn when sampling.
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    /// Random (x, y) pairs to evaluate.
    #[arg(long, default_value_t = 10)]
    pairs: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct PermRow {
    pair: usize,
    error_norm: f64,
    mean: f64,
    variance: f64,
    exact_variance: f64,
    approx_variance: f64,
    permutations: u64,
}

impl PermRow {
    fn new(pair: usize, s: PermutationStats) -> Self {
        Self {
            pair,
            error_norm: s.error_norm,
            mean: s.mean,
            variance: s.variance,
            exact_variance: s.exact_variance,
            approx_variance: s.approx_variance,
            permutations: s.permutations,
        }
    }
}

#[derive(Debug, Args)]
pub struct FlipArgs {
    /// Comma-separated values to flip; random normals when absent.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    values: Vec<f64>,
    #[arg(long, default_value_t = 1000)]
    count: usize,
    #[arg(long, default_value_t = 100)]
    rounds: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run(cmd: PrivacyCommand) -> CliResult {
    match cmd {
        PrivacyCommand::DcorSim(a) => dcor_sim(a),
        PrivacyCommand::Attack(a) => attack(a),
        PrivacyCommand::PermStats(a) => perm_stats(a),
        PrivacyCommand::FlipTest(a) => flip_test(a),
    }
}

fn dcor_sim(a: DcorSimArgs) -> CliResult {
    if a.n < 4 || a.d == 0 || a.h == 0 || a.repeats == 0 || a.batch == 0 {
        return Err(usage("need n >= 4 and positive d, h, repeats and batch"));
    }
    let mut rows = Vec::new();
    let mut full = Vec::new();
    for (i, &kind) in a.distributions.iter().enumerate() {
        log::info!("dcor-sim {kind}");
        let r = ordering_experiment(kind, a.n, a.d, a.h, a.repeats, a.batch, a.seed.wrapping_add(i as u64))?;
        let estimates = vec![
            ("permuted", r.permuted),
            ("one_dim", r.one_dim),
            ("permuted_bias_corrected", r.permuted_corrected),
            ("one_dim_bias_corrected", r.one_dim_corrected),
        ];
        for (method, e) in &estimates {
            let (lo, hi) = e.ci95();
            rows.push(DcorRow { distribution: kind.to_string(), method, dcor: e.value, ci_low: lo, ci_high: hi });
        }
        full.push(DcorJson { distribution: kind.to_string(), estimates, ordered: r.ordered(), ordered_corrected: r.ordered_corrected() });
    }
    if let Some(p) = &a.json {
        write_json(Some(p), &full)?;
    }
    write_csv(a.out.as_deref(), &rows)
}

fn attack(a: AttackArgs) -> CliResult {
    let batches = a
        .batch
        .iter()
        .map(|b| match b.trim() {
            "none" => Ok(None),
            s => match s.parse::<usize>() {
                Ok(v) if v > 0 => Ok(Some(v)),
                _ => Err(usage(format!("bad batch {s:?}: expected a positive integer or none"))),
            },
        })
        .collect::<CliResult<Vec<_>>>()?;
    if a.targets == 0 || a.d == 0 || a.h == 0 || a.k == 0 {
        return Err(usage("targets, d, h and k must be positive"));
    }
    let rows = batches
        .into_iter()
        .map(|batch| Ok(AttackRow::new(batch, attack_demo(a.targets, a.aux, a.d, a.h, batch, a.k, a.seed)?)))
        .collect::<CliResult<Vec<_>>>()?;
    write_csv(a.out.as_deref(), &rows)
}

fn perm_stats(a: PermStatsArgs) -> CliResult {
    if a.n < 2 {
        return Err(usage("--n must be at least 2"));
    }
    let mode = if a.enumerate { PermMode::Enumerate } else { PermMode::Sample(a.samples) };
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let mut rows = Vec::with_capacity(a.pairs);
    for pair in 0..a.pairs {
        let x: Vec<f64> = (0..a.n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y = random_unit_orthogonal(a.n, &mut rng);
        let stats = perm_error_stats(&x, &y, mode, rng.random())?;
        rows.push(PermRow::new(pair, stats));
    }
    write_csv(a.out.as_deref(), &rows)
}

fn flip_test(a: FlipArgs) -> CliResult {
    let values = if a.values.is_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
        (0..a.count).map(|_| rng.sample(rand_distr::StandardNormal)).collect()
    } else {
        a.values
    };
    write_json(a.out.as_deref(), &flipping_distribution_test(&values, a.rounds, a.seed))
}
