//! Confusion matrices, ROC/AUC and k-fold cross-validation.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::{argmax, ClassifyError, ModelKind, Standardizer, TrainParams, TrainedModel};
use crate::dataset::{self, DatasetError, Fold};
use crate::label::ClassLabel;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{truth} true labels but {other} predictions or scores")]
    LengthMismatch { truth: usize, other: usize },
    #[error("label {0} is not in the class list")]
    UnknownClass(ClassLabel),
    #[error("ROC needs both positive and negative labels")]
    SingleClassLabels,
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("fold {fold}: {source}")]
    Fold { fold: usize, source: ClassifyError },
}

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<ClassLabel>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..self.classes.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            t => self.correct() as f64 / t as f64,
        }
    }

    pub fn to_text(&self) -> String {
        let width = self
            .classes
            .iter()
            .map(|c| c.as_str().len())
            .max()
            .unwrap_or(0)
            .max(6);
        let mut out = format!("{:>width$}", "true\\pred");
        for c in &self.classes {
            let _ = write!(out, " {:>width$}", c.as_str());
        }
        out.push('\n');
        for (c, row) in self.classes.iter().zip(&self.counts) {
            let _ = write!(out, "{:>width$}", c.as_str());
            for v in row {
                let _ = write!(out, " {v:>width$}");
            }
            out.push('\n');
        }
        out
    }
}

pub fn confusion(
    truth: &[ClassLabel],
    predicted: &[ClassLabel],
    classes: &[ClassLabel],
) -> Result<ConfusionMatrix, EvalError> {
    if truth.len() != predicted.len() {
        return Err(EvalError::LengthMismatch {
            truth: truth.len(),
            other: predicted.len(),
        });
    }
    let index = |l: &ClassLabel| {
        classes
            .iter()
            .position(|c| c == l)
            .ok_or(EvalError::UnknownClass(*l))
    };
    let mut counts = vec![vec![0u64; classes.len()]; classes.len()];
    for (t, p) in truth.iter().zip(predicted) {
        counts[index(t)?][index(p)?] += 1;
    }
    Ok(ConfusionMatrix {
        classes: classes.to_vec(),
        counts,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Averaging {
    Binary,
    MacroOvR,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocReport {
    /// Starts at `(0, 0)` with an infinite threshold; empty for macro reports.
    pub points: Vec<RocPoint>,
    pub auc: f64,
    pub averaging: Averaging,
}

/// Threshold sweep over the distinct scores, highest first. Equal scores
/// form one step, so ties contribute a diagonal segment.
pub fn roc_auc(
    truth: &[ClassLabel],
    scores: &[f64],
    positive: ClassLabel,
) -> Result<RocReport, EvalError> {
    if truth.len() != scores.len() {
        return Err(EvalError::LengthMismatch {
            truth: truth.len(),
            other: scores.len(),
        });
    }
    let flags: Vec<bool> = truth.iter().map(|&l| l == positive).collect();
    roc_from_flags(&flags, scores)
}

fn roc_from_flags(flags: &[bool], scores: &[f64]) -> Result<RocReport, EvalError> {
    let n_pos = flags.iter().filter(|&&f| f).count();
    let n_neg = flags.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(EvalError::SingleClassLabels);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut auc = 0.0;
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        while i < order.len() && scores[order[i]] == threshold {
            if flags[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let prev = *points.last().expect("starts non-empty");
        let p = RocPoint {
            threshold,
            fpr: fp as f64 / n_neg as f64,
            tpr: tp as f64 / n_pos as f64,
        };
        auc += (p.fpr - prev.fpr) * (p.tpr + prev.tpr) / 2.0;
        points.push(p);
    }
    Ok(RocReport {
        points,
        auc,
        averaging: Averaging::Binary,
    })
}

/// Mean of the one-vs-rest AUCs over classes that occur in `truth` (and are
/// not the only class there). `scores[i][c]` scores sample `i` for class `c`.
pub fn macro_roc_auc(
    truth: &[ClassLabel],
    scores: &[Vec<f64>],
    classes: &[ClassLabel],
) -> Result<RocReport, EvalError> {
    if truth.len() != scores.len() {
        return Err(EvalError::LengthMismatch {
            truth: truth.len(),
            other: scores.len(),
        });
    }
    let mut aucs = Vec::new();
    for (c, class) in classes.iter().enumerate() {
        let flags: Vec<bool> = truth.iter().map(|l| l == class).collect();
        let column: Vec<f64> = scores.iter().map(|s| s[c]).collect();
        match roc_from_flags(&flags, &column) {
            Ok(r) => aucs.push(r.auc),
            Err(EvalError::SingleClassLabels) => continue,
            Err(e) => return Err(e),
        }
    }
    if aucs.is_empty() {
        return Err(EvalError::SingleClassLabels);
    }
    Ok(RocReport {
        points: Vec::new(),
        auc: aucs.iter().sum::<f64>() / aucs.len() as f64,
        averaging: Averaging::MacroOvR,
    })
}

/// Binary AUC on the second class's score when there are two classes,
/// macro one-vs-rest otherwise.
pub fn auc_for(
    truth: &[ClassLabel],
    scores: &[Vec<f64>],
    classes: &[ClassLabel],
) -> Result<RocReport, EvalError> {
    if classes.len() == 2 {
        let column: Vec<f64> = scores.iter().map(|s| s[1]).collect();
        roc_auc(truth, &column, classes[1])
    } else {
        macro_roc_auc(truth, scores, classes)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: Fold,
    pub accuracy: f64,
    pub standardizer: Standardizer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvSummary {
    pub kind: ModelKind,
    pub classes: Vec<ClassLabel>,
    pub folds: Vec<FoldResult>,
    pub mean_accuracy: f64,
    pub confusion: ConfusionMatrix,
    pub roc: RocReport,
    /// Out-of-fold prediction per input row.
    pub predictions: Vec<ClassLabel>,
    /// Out-of-fold scores per input row in `classes` order; classes absent
    /// from a fold's training part score `-inf`.
    pub scores: Vec<Vec<f64>>,
}

/// k-fold cross-validation. Each fold fits its own standardizer and model
/// on the training part only; folds run in parallel and are collected in
/// fold order.
pub fn cross_validate(
    kind: ModelKind,
    rows: &[Vec<f64>],
    labels: &[ClassLabel],
    k: usize,
    seed: u64,
    params: &TrainParams,
) -> Result<CvSummary, EvalError> {
    if rows.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            truth: labels.len(),
            other: rows.len(),
        });
    }
    let mut classes = labels.to_vec();
    classes.sort();
    classes.dedup();
    let indices: Vec<usize> = (0..rows.len()).collect();
    let folds = dataset::kfold(&indices, k, seed)?;

    type FoldOut = (FoldResult, Vec<(usize, ClassLabel, Vec<f64>)>);
    let results: Vec<Result<FoldOut, EvalError>> = folds
        .into_par_iter()
        .enumerate()
        .map(|(f, fold)| {
            let train_rows: Vec<Vec<f64>> = fold.train.iter().map(|&i| rows[i].clone()).collect();
            let train_labels: Vec<ClassLabel> = fold.train.iter().map(|&i| labels[i]).collect();
            let model = TrainedModel::train(kind, &train_rows, &train_labels, params, seed)
                .map_err(|source| EvalError::Fold { fold: f, source })?;
            let mut out = Vec::with_capacity(fold.validate.len());
            let mut correct = 0;
            for &i in &fold.validate {
                let local = model
                    .predict_scores(&rows[i])
                    .map_err(|source| EvalError::Fold { fold: f, source })?;
                let mut full = vec![f64::NEG_INFINITY; classes.len()];
                for (c, s) in model.classes.iter().zip(&local) {
                    full[classes.binary_search(c).expect("fold classes are a subset")] = *s;
                }
                let pred = model.classes[argmax(&local)];
                if pred == labels[i] {
                    correct += 1;
                }
                out.push((i, pred, full));
            }
            let result = FoldResult {
                accuracy: correct as f64 / fold.validate.len() as f64,
                standardizer: model.standardizer.clone(),
                fold,
            };
            Ok((result, out))
        })
        .collect();

    let mut fold_results = Vec::new();
    let mut predictions = vec![classes[0]; rows.len()];
    let mut scores = vec![Vec::new(); rows.len()];
    for r in results {
        let (fold, out) = r?;
        for (i, p, s) in out {
            predictions[i] = p;
            scores[i] = s;
        }
        fold_results.push(fold);
    }
    let mean_accuracy =
        fold_results.iter().map(|f| f.accuracy).sum::<f64>() / fold_results.len() as f64;
    let confusion = confusion(labels, &predictions, &classes)?;
    let roc = auc_for(labels, &scores, &classes)?;
    Ok(CvSummary {
        kind,
        classes,
        folds: fold_results,
        mean_accuracy,
        confusion,
        roc,
        predictions,
        scores,
    })
}

impl CvSummary {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (i, f) in self.folds.iter().enumerate() {
            let _ = writeln!(
                out,
                "fold {}: accuracy {:.4} ({} validation rows)",
                i + 1,
                f.accuracy,
                f.fold.validate.len()
            );
        }
        let _ = writeln!(out, "mean accuracy: {:.4}", self.mean_accuracy);
        let mode = match self.roc.averaging {
            Averaging::Binary => format!(
                "binary, positive class {}",
                self.classes[self.classes.len() - 1]
            ),
            Averaging::MacroOvR => "macro one-vs-rest".to_string(),
        };
        let _ = writeln!(out, "AUC ({mode}): {:.4}", self.roc.auc);
        out.push_str("pooled confusion:\n");
        out.push_str(&self.confusion.to_text());
        out
    }

    /// One row per fold plus a `mean` summary row carrying the pooled AUC.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("fold,n_validate,accuracy,auc\n");
        for (i, f) in self.folds.iter().enumerate() {
            let _ = writeln!(out, "{},{},{},", i + 1, f.fold.validate.len(), f.accuracy);
        }
        let n: usize = self.folds.iter().map(|f| f.fold.validate.len()).sum();
        let _ = writeln!(out, "mean,{},{},{}", n, self.mean_accuracy, self.roc.auc);
        out
    }
}
