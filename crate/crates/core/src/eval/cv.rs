use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::knn::KnnModel;
use super::mf::{train_mf, MfHyperparams};
use super::EvalMetrics;
use crate::error::{Error, Result};
use crate::ingest::{DatasetStats, FoldSplit, RatingRecord, SocialEdge};
use crate::model::{TrainedModel, TrainingEdges};
use crate::trainer::{train, Hyperparams, TrainingSet, TrainingTrace};
use crate::walker::mix_seed;

/// Ratings plus the (undirected, deduplicated) social network.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub ratings: Vec<RatingRecord>,
    pub social: Vec<SocialEdge>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    UniWalk,
    Mf,
    Ucf,
    Icf,
    /// Training-fold mean for every prediction.
    Mean,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::UniWalk => "uniwalk",
            Method::Mf => "mf",
            Method::Ucf => "ucf",
            Method::Icf => "icf",
            Method::Mean => "mean",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "uniwalk" => Ok(Method::UniWalk),
            "mf" => Ok(Method::Mf),
            "ucf" => Ok(Method::Ucf),
            "icf" => Ok(Method::Icf),
            "mean" => Ok(Method::Mean),
            other => Err(Error::arg(format!("unknown method {other:?} (expected uniwalk, mf, ucf, icf or mean)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvConfig {
    pub uniwalk: Hyperparams,
    pub mf: MfHyperparams,
    /// Neighborhood size for UCF and ICF.
    pub knn_k: usize,
    pub clamp: bool,
    /// Run folds concurrently.
    pub parallel_folds: bool,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            uniwalk: Hyperparams::default(),
            mf: MfHyperparams::default(),
            knn_k: 50,
            clamp: true,
            parallel_folds: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    /// Method label, e.g. `ucf` or `ucf@20` when several k were run.
    pub method: String,
    pub folds: Vec<EvalMetrics>,
    /// Over the pooled predictions of all folds.
    pub aggregate: EvalMetrics,
    /// UniWalk training traces, one per fold.
    pub traces: Vec<TrainingTrace>,
    /// `(rating index, prediction)` for every test rating.
    pub predictions: Vec<(usize, f64)>,
}

/// Deterministic split of a fold's training indices into (fit, validation).
pub fn validation_holdout(train_idx: &[usize], fraction: f64, seed: u64, fold: usize) -> (Vec<usize>, Vec<usize>) {
    let n_val = ((train_idx.len() as f64) * fraction).round() as usize;
    if n_val == 0 || train_idx.len() < 2 {
        return (train_idx.to_vec(), Vec::new());
    }
    let n_val = n_val.min(train_idx.len() - 1);
    let mut order = train_idx.to_vec();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(mix_seed(&[seed, fold as u64, 0x76616c])));
    let validation = order[..n_val].to_vec();
    let mut fit = order[n_val..].to_vec();
    fit.sort_unstable();
    (fit, validation)
}

fn pick(ratings: &[RatingRecord], idx: &[usize]) -> Vec<RatingRecord> {
    idx.iter().map(|&k| ratings[k].clone()).collect()
}

/// Train UniWalk on `ratings`, holding out `hp.validation_fraction` of them
/// for early stopping. `stream` decorrelates the holdout and the walks of
/// otherwise identical runs (one stream per fold).
pub fn train_uniwalk(
    ratings: &[RatingRecord],
    social: &[SocialEdge],
    hp: &Hyperparams,
    stream: u64,
) -> Result<(TrainedModel, TrainingTrace)> {
    let all: Vec<usize> = (0..ratings.len()).collect();
    let (fit_idx, val_idx) = validation_holdout(&all, hp.validation_fraction, hp.seed, stream as usize);
    let fit = pick(ratings, &fit_idx);
    let val = pick(ratings, &val_idx);
    let set = TrainingSet::build(&fit, social, hp.c)?;
    let resolved = set.resolve(&val);
    let hp = Hyperparams {
        seed: mix_seed(&[hp.seed, stream]),
        ..hp.clone()
    };
    let out = train(&set, &hp, (!resolved.is_empty()).then_some(resolved.as_slice()))?;
    let model = TrainedModel {
        edges: TrainingEdges::from_graph(&set.graph),
        index: set.index,
        params: out.params,
        cooc: out.cooc,
        stats: set.stats,
    };
    Ok((model, out.trace))
}

/// Train UniWalk on every fold except `fold`.
pub fn train_uniwalk_fold(
    data: &Dataset,
    split: &FoldSplit,
    fold: usize,
    hp: &Hyperparams,
) -> Result<(TrainedModel, TrainingTrace)> {
    let train = pick(&data.ratings, &split.train_indices(fold));
    train_uniwalk(&train, &data.social, hp, fold as u64)
}

struct FoldResult {
    predictions: Vec<(usize, f64)>,
    trace: Option<TrainingTrace>,
    seconds: f64,
}

fn run_fold(method: Method, data: &Dataset, split: &FoldSplit, fold: usize, cfg: &CvConfig) -> Result<FoldResult> {
    let started = Instant::now();
    let test_idx = split.test_indices(fold);
    let mut trace = None;
    let predictions: Vec<(usize, f64)> = match method {
        Method::UniWalk => {
            let (model, t) = train_uniwalk_fold(data, split, fold, &cfg.uniwalk)?;
            trace = Some(t);
            test_idx
                .iter()
                .map(|&k| {
                    let r = &data.ratings[k];
                    (k, crate::recommender::predict(&model, &r.user, &r.item, cfg.clamp))
                })
                .collect()
        }
        Method::Mf => {
            let train = pick(&data.ratings, &split.train_indices(fold));
            let hp = MfHyperparams {
                seed: mix_seed(&[cfg.mf.seed, fold as u64]),
                ..cfg.mf.clone()
            };
            let model = train_mf(&train, &hp)?;
            test_idx
                .iter()
                .map(|&k| {
                    let r = &data.ratings[k];
                    let p = model.predict(&r.user, &r.item);
                    (k, if cfg.clamp { model.stats.clamp(p) } else { p })
                })
                .collect()
        }
        Method::Ucf | Method::Icf | Method::Mean => {
            let train = pick(&data.ratings, &split.train_indices(fold));
            let stats = DatasetStats::from_ratings(&train, 0);
            let knn = KnnModel::new(&train);
            test_idx
                .iter()
                .map(|&k| {
                    let r = &data.ratings[k];
                    let p = match method {
                        Method::Ucf => knn.ucf(&r.user, &r.item, cfg.knn_k),
                        Method::Icf => knn.icf(&r.user, &r.item, cfg.knn_k),
                        _ => stats.mu,
                    };
                    (k, if cfg.clamp { stats.clamp(p) } else { p })
                })
                .collect()
        }
    };
    Ok(FoldResult {
        predictions,
        trace,
        seconds: started.elapsed().as_secs_f64(),
    })
}

/// Cross-validate `method`; the aggregate row scores the pooled predictions.
pub fn run_cv(method: Method, data: &Dataset, split: &FoldSplit, cfg: &CvConfig) -> Result<CvReport> {
    if split.assignment.len() != data.ratings.len() {
        return Err(Error::arg(format!(
            "fold split covers {} ratings but the dataset has {}",
            split.assignment.len(),
            data.ratings.len()
        )));
    }
    let label = method.as_str().to_owned();
    let folds: Vec<usize> = (0..split.fold_count).collect();
    let results: Vec<Result<FoldResult>> = if cfg.parallel_folds {
        folds.par_iter().map(|&f| run_fold(method, data, split, f, cfg)).collect()
    } else {
        folds.iter().map(|&f| run_fold(method, data, split, f, cfg)).collect()
    };
    let mut report = CvReport {
        method: label.clone(),
        folds: Vec::new(),
        aggregate: EvalMetrics {
            method: label.clone(),
            fold: None,
            rmse: 0.0,
            mae: 0.0,
            n_predictions: 0,
            seconds: 0.0,
        },
        traces: Vec::new(),
        predictions: Vec::new(),
    };
    let mut seconds = 0.0;
    for (fold, result) in results.into_iter().enumerate() {
        let result = result?;
        let preds: Vec<f64> = result.predictions.iter().map(|p| p.1).collect();
        let truth: Vec<f64> = result.predictions.iter().map(|p| data.ratings[p.0].value).collect();
        report.folds.push(EvalMetrics::score(&label, Some(fold), &preds, &truth, result.seconds)?);
        seconds += result.seconds;
        report.traces.extend(result.trace);
        report.predictions.extend(result.predictions);
    }
    report.predictions.sort_by_key(|p| p.0);
    let preds: Vec<f64> = report.predictions.iter().map(|p| p.1).collect();
    let truth: Vec<f64> = report.predictions.iter().map(|p| data.ratings[p.0].value).collect();
    report.aggregate = EvalMetrics::score(&label, None, &preds, &truth, seconds)?;
    Ok(report)
}
