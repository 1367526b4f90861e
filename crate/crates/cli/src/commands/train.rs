//! `train`: SGD on a CSV dataset with shared parameters.

use std::path::PathBuf;

use clap::Args;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use ssperm_core::nn::data::{load_csv, Dataset};
use ssperm_core::nn::{accuracy, reveal_net, share_net, train_shared, Arch, PlainNet, TrainConfig};
use ssperm_core::protocols::share_reals;
use ssperm_core::{run_local, PartyId, SessionConfig};

use crate::output::write_csv;
use crate::{usage, CliResult};

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// CSV with a header row; all columns but the label are features.
    #[arg(long)]
    data: PathBuf,
    /// Layers such as `20-16-relu-1-sigmoid`. The first width must
    /// equal the number of feature columns.
    #[arg(long)]
    arch: String,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    #[arg(long, default_value_t = 0.1)]
    lr: f64,
    #[arg(long, default_value_t = 64)]
    batch_size: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Label column name; defaults to the last column.
    #[arg(long)]
    label: Option<String>,
    /// Share of rows held out for validation.
    #[arg(long, default_value_t = 0.2)]
    val_fraction: f64,
    /// Also train the float network from the same start and report it.
    #[arg(long)]
    compare_plaintext: bool,
    /// Per-epoch accuracy CSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
pub struct EpochRow {
    pub epoch: usize,
    pub train_accuracy: f64,
    pub val_accuracy: f64,
    pub plain_train_accuracy: Option<f64>,
    pub plain_val_accuracy: Option<f64>,
}

fn shuffled(ds: &Dataset, seed: u64) -> Dataset {
    let mut idx: Vec<usize> = (0..ds.rows).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let x = idx.iter().flat_map(|&r| ds.row(r).iter().copied()).collect();
    let y = idx.iter().map(|&r| ds.y[r]).collect();
    Dataset { x, y, rows: ds.rows, dim: ds.dim }
}

fn accuracies(net: &PlainNet, train: &Dataset, val: &Dataset) -> (f64, f64) {
    let acc = |d: &Dataset| if d.rows == 0 { f64::NAN } else { accuracy(&net.predict(&d.x, d.rows), &d.y) };
    (acc(train), acc(val))
}

pub fn run(args: TrainArgs) -> CliResult {
    let arch: Arch = args.arch.parse().map_err(|e: ssperm_core::Error| usage(e.to_string()))?;
    let cfg = TrainConfig { lr: args.lr, epochs: args.epochs, batch_size: args.batch_size, seed: args.seed };
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    if !(0.0..1.0).contains(&args.val_fraction) {
        return Err(usage("--val-fraction must be in [0, 1)"));
    }
    if arch.output() != 1 {
        return Err(usage("the last layer must have width 1"));
    }
    let data = load_csv(&args.data, args.label.as_deref())?;
    if data.dim != arch.input {
        return Err(usage(format!("architecture expects {} features, data has {}", arch.input, data.dim)));
    }
    let n_train = data.rows - (data.rows as f64 * args.val_fraction).round() as usize;
    if n_train == 0 {
        return Err(usage("no training rows left after the validation split"));
    }
    let (train, val) = shuffled(&data, args.seed).split_at(n_train);
    let init = PlainNet::init(&arch, args.seed);

    let scfg = SessionConfig::deterministic(args.seed);
    let res = run_local(&scfg, |p| {
        let owner = p.role() == PartyId::P0;
        let net = share_net(p, PartyId::P0, owner.then_some(&init), &arch)?;
        let x = share_reals(p, PartyId::P0, owner.then_some(train.x.as_slice()), &[train.rows, train.dim])?;
        let y = share_reals(p, PartyId::P0, owner.then_some(train.y.as_slice()), &[train.rows, 1])?;
        let mut snapshots = Vec::with_capacity(cfg.epochs);
        train_shared(p, &x, &y, net, &cfg, |p, epoch, net| {
            let plain = reveal_net(p, net)?;
            log::info!("epoch {} done", epoch + 1);
            snapshots.push(plain);
            Ok(())
        })?;
        Ok(snapshots)
    })?;
    let [shared, _, _] = res.outputs;

    let mut plain_nets = Vec::new();
    if args.compare_plaintext {
        let mut float = init.clone();
        float.train(&train.x, &train.y, train.rows, &cfg, |_, n| plain_nets.push(n.clone()));
    }
    let mut rows = Vec::with_capacity(cfg.epochs + 1);
    let (t0, v0) = accuracies(&init, &train, &val);
    let start = args.compare_plaintext.then_some((t0, v0));
    rows.push(EpochRow { epoch: 0, train_accuracy: t0, val_accuracy: v0, plain_train_accuracy: start.map(|a| a.0), plain_val_accuracy: start.map(|a| a.1) });
    for (i, net) in shared.iter().enumerate() {
        let (t, v) = accuracies(net, &train, &val);
        let plain = plain_nets.get(i).map(|n| accuracies(n, &train, &val));
        rows.push(EpochRow { epoch: i + 1, train_accuracy: t, val_accuracy: v, plain_train_accuracy: plain.map(|a| a.0), plain_val_accuracy: plain.map(|a| a.1) });
    }
    write_csv(args.out.as_deref(), &rows)
}
