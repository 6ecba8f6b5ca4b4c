//! Accuracy metrics, baselines and the cross-validation driver.

mod cv;
mod knn;
mod mf;

pub use cv::{run_cv, train_uniwalk, train_uniwalk_fold, validation_holdout, CvConfig, CvReport, Dataset, Method};
pub use knn::{icf_predict, ucf_predict, KnnModel};
pub use mf::{predict_mf, train_mf, MfHyperparams, MfModel, MfParams};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_lengths(preds: &[f64], truth: &[f64]) -> Result<()> {
    if preds.len() != truth.len() {
        return Err(Error::arg(format!(
            "{} predictions for {} ratings",
            preds.len(),
            truth.len()
        )));
    }
    if preds.is_empty() {
        return Err(Error::arg("no predictions to score"));
    }
    Ok(())
}

/// Root mean squared error.
pub fn rmse(preds: &[f64], truth: &[f64]) -> Result<f64> {
    check_lengths(preds, truth)?;
    let se: f64 = preds.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok((se / preds.len() as f64).sqrt())
}

/// Mean absolute error.
pub fn mae(preds: &[f64], truth: &[f64]) -> Result<f64> {
    check_lengths(preds, truth)?;
    let ae: f64 = preds.iter().zip(truth).map(|(p, t)| (p - t).abs()).sum();
    Ok(ae / preds.len() as f64)
}

/// Scores of one method on one fold, or pooled over all folds when `fold` is `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub method: String,
    pub fold: Option<usize>,
    pub rmse: f64,
    pub mae: f64,
    pub n_predictions: usize,
    pub seconds: f64,
}

impl EvalMetrics {
    pub fn score(method: &str, fold: Option<usize>, preds: &[f64], truth: &[f64], seconds: f64) -> Result<Self> {
        Ok(Self {
            method: method.to_owned(),
            fold,
            rmse: rmse(preds, truth)?,
            mae: mae(preds, truth)?,
            n_predictions: preds.len(),
            seconds,
        })
    }
}

/// Aligned text table with one pooled row per report.
pub fn format_table(reports: &[CvReport]) -> String {
    let width = reports.iter().map(|r| r.method.len()).max().unwrap_or(6).max(6);
    let mut out = format!("{:<width$}  {:>7}  {:>7}  {:>8}  {:>9}\n", "method", "RMSE", "MAE", "n", "seconds");
    for r in reports {
        let a = &r.aggregate;
        out.push_str(&format!(
            "{:<width$}  {:>7.4}  {:>7.4}  {:>8}  {:>9.2}\n",
            r.method, a.rmse, a.mae, a.n_predictions, a.seconds
        ));
    }
    out
}

/// Tab-separated rows `method fold rmse mae n_predictions seconds`; pooled rows use fold `all`.
pub fn format_tsv(reports: &[CvReport]) -> String {
    let mut out = String::from("method\tfold\trmse\tmae\tn_predictions\tseconds\n");
    for r in reports {
        for m in r.folds.iter().chain(std::iter::once(&r.aggregate)) {
            let fold = m.fold.map_or_else(|| "all".to_owned(), |f| f.to_string());
            out.push_str(&format!(
                "{}\t{}\t{:.6}\t{:.6}\t{}\t{:.3}\n",
                m.method, fold, m.rmse, m.mae, m.n_predictions, m.seconds
            ));
        }
    }
    out
}
