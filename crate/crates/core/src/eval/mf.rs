//! Biased matrix factorization trained by per-rating SGD.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::ingest::{DatasetStats, RatingRecord};
use crate::trainer::dot;
use crate::walker::mix_seed;

#[derive(Debug, Clone, PartialEq)]
pub struct MfHyperparams {
    pub dim: usize,
    pub lambda: f64,
    pub eta: f64,
    pub epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    /// Share of ratings held out for early stopping; 0 disables it.
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for MfHyperparams {
    fn default() -> Self {
        Self {
            dim: 25,
            lambda: 0.1,
            eta: 0.01,
            epochs: 50,
            patience: 3,
            validation_fraction: 0.1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MfParams {
    pub mu: f64,
    pub dim: usize,
    pub user_bias: Vec<f64>,
    pub item_bias: Vec<f64>,
    /// Row-major `users × dim`.
    pub user_vectors: Vec<f64>,
    /// Row-major `items × dim`.
    pub item_vectors: Vec<f64>,
}

impl MfParams {
    fn x(&self, u: usize) -> &[f64] {
        &self.user_vectors[u * self.dim..(u + 1) * self.dim]
    }

    fn y(&self, i: usize) -> &[f64] {
        &self.item_vectors[i * self.dim..(i + 1) * self.dim]
    }

    fn predict(&self, u: Option<usize>, i: Option<usize>) -> f64 {
        let mut p = self.mu;
        if let Some(u) = u {
            p += self.user_bias[u];
        }
        if let Some(i) = i {
            p += self.item_bias[i];
        }
        if let (Some(u), Some(i)) = (u, i) {
            p += dot(self.x(u), self.y(i));
        }
        p
    }
}

#[derive(Debug, Clone)]
pub struct MfModel {
    pub params: MfParams,
    pub stats: DatasetStats,
    users: HashMap<String, usize>,
    items: HashMap<String, usize>,
    /// Epoch of the returned parameters.
    pub best_epoch: usize,
}

impl MfModel {
    /// `μ + b_u + b_i + x_u·y_i`; unknown ids contribute nothing.
    pub fn predict(&self, user: &str, item: &str) -> f64 {
        self.params.predict(self.users.get(user).copied(), self.items.get(item).copied())
    }
}

pub fn predict_mf(model: &MfModel, user: &str, item: &str) -> f64 {
    model.predict(user, item)
}

/// Fit on `ratings`, holding out `validation_fraction` of them for early stopping.
pub fn train_mf(ratings: &[RatingRecord], hp: &MfHyperparams) -> Result<MfModel> {
    if ratings.is_empty() {
        return Err(Error::arg("no ratings to factorize"));
    }
    if hp.dim < 1 || hp.eta.is_nan() || hp.eta <= 0.0 || hp.lambda < 0.0 || !(0.0..1.0).contains(&hp.validation_fraction) {
        return Err(Error::arg("invalid matrix factorization hyperparameters"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[hp.seed, 0x6d66]));
    let mut order: Vec<usize> = (0..ratings.len()).collect();
    order.shuffle(&mut rng);
    let n_val = if ratings.len() > 1 {
        ((ratings.len() as f64 * hp.validation_fraction).round() as usize).min(ratings.len() - 1)
    } else {
        0
    };
    let (val_idx, train_idx) = order.split_at(n_val);
    let train: Vec<&RatingRecord> = train_idx.iter().map(|&k| &ratings[k]).collect();
    let validation: Vec<&RatingRecord> = val_idx.iter().map(|&k| &ratings[k]).collect();

    let train_owned: Vec<RatingRecord> = train.iter().map(|r| (*r).clone()).collect();
    let stats = DatasetStats::from_ratings(&train_owned, 0);
    let mut users = HashMap::new();
    let mut items = HashMap::new();
    let mut triples = Vec::with_capacity(train.len());
    for r in &train {
        let n_users = users.len();
        let u = *users.entry(r.user.clone()).or_insert(n_users);
        let n_items = items.len();
        let i = *items.entry(r.item.clone()).or_insert(n_items);
        triples.push((u, i, r.value));
    }
    let d = hp.dim;
    let scale = 0.5 / (d as f64).sqrt();
    let mut init = |n: usize| (0..n * d).map(|_| rng.gen_range(-scale..=scale)).collect::<Vec<f64>>();
    let mut params = MfParams {
        mu: stats.mu,
        dim: d,
        user_bias: vec![0.0; users.len()],
        item_bias: vec![0.0; items.len()],
        user_vectors: init(users.len()),
        item_vectors: init(items.len()),
    };
    let val: Vec<(Option<usize>, Option<usize>, f64)> = validation
        .iter()
        .map(|r| (users.get(&r.user).copied(), items.get(&r.item).copied(), r.value))
        .collect();
    let val_rmse = |p: &MfParams| {
        let se: f64 = val
            .iter()
            .map(|&(u, i, r)| (stats.clamp(p.predict(u, i)) - r).powi(2))
            .sum();
        (se / val.len() as f64).sqrt()
    };

    let mut best = (f64::INFINITY, 0usize, params.clone());
    let mut stale = 0;
    let mut xu = vec![0.0; d];
    for epoch in 1..=hp.epochs {
        triples.shuffle(&mut rng);
        for &(u, i, r) in &triples {
            let e = r - params.predict(Some(u), Some(i));
            params.user_bias[u] += hp.eta * (e - hp.lambda * params.user_bias[u]);
            params.item_bias[i] += hp.eta * (e - hp.lambda * params.item_bias[i]);
            xu.copy_from_slice(params.x(u));
            for (k, &x) in xu.iter().enumerate() {
                let y = params.item_vectors[i * d + k];
                params.user_vectors[u * d + k] += hp.eta * (e * y - hp.lambda * x);
                params.item_vectors[i * d + k] += hp.eta * (e * x - hp.lambda * y);
            }
        }
        if !params.user_bias.iter().chain(&params.user_vectors).all(|x| x.is_finite()) {
            return Err(Error::Divergence { iteration: epoch, walk: "mf", pair: 0 });
        }
        if val.is_empty() {
            best = (0.0, epoch, params.clone());
            continue;
        }
        let v = val_rmse(&params);
        if v < best.0 {
            best = (v, epoch, params.clone());
            stale = 0;
        } else {
            stale += 1;
            if stale >= hp.patience.max(1) {
                break;
            }
        }
    }
    let (_, best_epoch, params) = best;
    Ok(MfModel { params, stats, users, items, best_epoch })
}
