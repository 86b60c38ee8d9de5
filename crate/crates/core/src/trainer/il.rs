use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experts::IlDataset;
use crate::optim::{clip_grad_norm, Adam};
use crate::policy::{accumulate_il, forward, Gradients, NetParams, Workspace};
use crate::vehicle::{ACC_MAX, STEER_MAX};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IlConfig {
    pub epochs: usize,
    pub batch: usize,
    pub learning_rate: f64,
    pub holdout_fraction: f64,
    pub max_grad_norm: Option<f64>,
    pub seed: u64,
}

impl Default for IlConfig {
    fn default() -> Self {
        Self {
            epochs: 12,
            batch: 32,
            learning_rate: 1e-3,
            holdout_fraction: 0.1,
            max_grad_norm: Some(10.0),
            seed: 0,
        }
    }
}

impl IlConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch == 0 || !(self.learning_rate > 0.0) || !(0.0..1.0).contains(&self.holdout_fraction) {
            return Err(Error::Config(format!("IL config {self:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IlReport {
    /// Mean per-row loss of each epoch.
    pub train_loss: Vec<f64>,
    /// Holdout loss after each epoch.
    pub holdout_loss: Vec<f64>,
    /// Final holdout RMSE of (mu_acc, mu_sa).
    pub holdout_rmse: [f64; 2],
    pub n_train: usize,
    pub n_holdout: usize,
}

/// Minibatch regression of the two means onto the expert commands, with Adam.
/// Holdout rows are a seeded random subset.
pub fn il_pretrain(dataset: &IlDataset, init: NetParams, cfg: &IlConfig) -> Result<(NetParams, IlReport)> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::Empty("IL dataset"));
    }
    if let Some(r) = dataset
        .rows
        .iter()
        .find(|r| !(r.target[0].abs() <= ACC_MAX && r.target[1].abs() <= STEER_MAX))
    {
        return Err(Error::Config(format!("IL target {:?} outside the action ranges", r.target)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut idx: Vec<usize> = (0..dataset.len()).collect();
    idx.shuffle(&mut rng);
    let n_hold = if dataset.len() > 1 {
        ((dataset.len() as f64 * cfg.holdout_fraction).round() as usize).min(dataset.len() - 1)
    } else {
        0
    };
    let (train_idx, hold_idx) = idx.split_at(dataset.len() - n_hold);
    let mut train_idx = train_idx.to_vec();

    let mut p = init;
    let mut adam = Adam::new(p.data.len(), cfg.learning_rate);
    let mut g = Gradients::zeros_like(&p);
    let mut ws = Workspace::new(&p.arch);
    let mut report = IlReport {
        n_train: train_idx.len(),
        n_holdout: hold_idx.len(),
        ..Default::default()
    };
    for epoch in 0..cfg.epochs {
        train_idx.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in train_idx.chunks(cfg.batch) {
            g.clear();
            for &i in batch {
                let row = &dataset.rows[i];
                let (out, cache) = forward(&p, &row.obs);
                total += accumulate_il(&p, &row.obs, &out, &cache, row.target, &mut g, &mut ws);
            }
            g.scale(1.0 / batch.len() as f64);
            if let Some(m) = cfg.max_grad_norm {
                clip_grad_norm(&mut g.data, m);
            }
            if !g.is_finite() {
                return Err(Error::Divergence(format!("non-finite IL gradient in epoch {epoch}")));
            }
            adam.step(&mut p.data, &g.data);
        }
        let train_loss = total / train_idx.len() as f64;
        if !train_loss.is_finite() {
            return Err(Error::Divergence(format!("IL loss {train_loss} in epoch {epoch}")));
        }
        report.train_loss.push(train_loss);
        let (loss, rmse) = evaluate_il(&p, dataset, hold_idx);
        report.holdout_loss.push(loss);
        report.holdout_rmse = rmse;
    }
    Ok((p, report))
}

/// Mean loss and per-channel RMSE of the means over the given rows.
pub fn evaluate_il(p: &NetParams, dataset: &IlDataset, rows: &[usize]) -> (f64, [f64; 2]) {
    if rows.is_empty() {
        return (0.0, [0.0; 2]);
    }
    let mut se = [0.0; 2];
    for &i in rows {
        let r = &dataset.rows[i];
        let (out, _) = forward(p, &r.obs);
        se[0] += (out.mu_acc - r.target[0]).powi(2);
        se[1] += (out.mu_sa - r.target[1]).powi(2);
    }
    let n = rows.len() as f64;
    ((se[0] + se[1]) / n, [(se[0] / n).sqrt(), (se[1] / n).sqrt()])
}
