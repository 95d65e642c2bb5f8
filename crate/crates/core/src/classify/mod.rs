//! Classifier suite over standardized feature rows.
//!
//! Every model is trained on rows z-scored by a [`Standardizer`] fitted on
//! the same training rows. Multi-class SVM and logistic regression reduce to
//! binary machines, one per class pair (default) or one per class.

mod discriminant;
mod knn;
mod logistic;
mod standardize;
mod svm;

use serde::{Deserialize, Serialize};

pub use discriminant::{LdaModel, QdaClass, QdaModel, COVARIANCE_RIDGE};
pub use knn::{KnnModel, MAX_WEIGHT};
pub use logistic::{loss_and_gradient, sigmoid, LogisticModel, LogisticParams};
pub use standardize::{Standardizer, MIN_STD};
pub use svm::{solve as smo_solve, Kernel, SmoSolution, SvmModel, SvmParams};

use crate::label::ClassLabel;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ClassifyError {
    #[error("training labels contain a single class")]
    SingleClass,
    #[error("covariance is singular{}", match .class { Some(c) => format!(" for class index {c}"), None => String::new() })]
    SingularCovariance { class: Option<usize> },
    #[error("expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("need at least 2 rows, got {0}")]
    TooFewRows(usize),
    #[error("{rows} rows but {labels} labels")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("model file: {0}")]
    Format(String),
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.iter().map(|e| e / total).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    Knn,
    Lda,
    Qda,
    Logistic,
    Svm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Multiclass {
    #[default]
    OneVsOne,
    OneVsRest,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainParams {
    pub knn_k: usize,
    pub svm: SvmParams,
    pub logistic: LogisticParams,
    pub multiclass: Multiclass,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            knn_k: 10,
            svm: SvmParams::default(),
            logistic: LogisticParams::default(),
            multiclass: Multiclass::OneVsOne,
        }
    }
}

/// One binary sub-problem. In `Pair(a, b)` class `b` is the positive side;
/// in `Rest(c)` class `c` is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pairing {
    Pair(usize, usize),
    Rest(usize),
}

impl Pairing {
    fn target(self, class: usize) -> Option<bool> {
        match self {
            Pairing::Pair(a, b) => {
                if class == b {
                    Some(true)
                } else if class == a {
                    Some(false)
                } else {
                    None
                }
            }
            Pairing::Rest(c) => Some(class == c),
        }
    }
}

fn pairings(n_classes: usize, scheme: Multiclass) -> Vec<Pairing> {
    if n_classes == 2 {
        return vec![Pairing::Pair(0, 1)];
    }
    match scheme {
        Multiclass::OneVsOne => (0..n_classes)
            .flat_map(|a| (a + 1..n_classes).map(move |b| Pairing::Pair(a, b)))
            .collect(),
        Multiclass::OneVsRest => (0..n_classes).map(Pairing::Rest).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryMachines<M> {
    pub pairings: Vec<Pairing>,
    pub models: Vec<M>,
}

impl<M> BinaryMachines<M> {
    fn fit(
        rows: &[Vec<f64>],
        labels: &[usize],
        n_classes: usize,
        scheme: Multiclass,
        mut fit_one: impl FnMut(&[Vec<f64>], &[bool]) -> M,
    ) -> Self {
        let pairings = pairings(n_classes, scheme);
        let models = pairings
            .iter()
            .map(|p| {
                let (sub_rows, sub_targets): (Vec<Vec<f64>>, Vec<bool>) = rows
                    .iter()
                    .zip(labels)
                    .filter_map(|(r, &l)| p.target(l).map(|t| (r.clone(), t)))
                    .unzip();
                fit_one(&sub_rows, &sub_targets)
            })
            .collect();
        Self { pairings, models }
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }
}

impl BinaryMachines<SvmModel> {
    /// Binary: `[-f, f]`. One-vs-one: votes plus summed margins squashed into
    /// `(-1/3, 1/3)` so they only break ties. One-vs-rest: raw margins.
    fn scores(&self, x: &[f64], n_classes: usize) -> Vec<f64> {
        let margins: Vec<f64> = self.models.iter().map(|m| m.decision(x)).collect();
        if n_classes == 2 {
            return vec![-margins[0], margins[0]];
        }
        let mut votes = vec![0.0; n_classes];
        let mut conf = vec![0.0; n_classes];
        for (p, &f) in self.pairings.iter().zip(&margins) {
            match *p {
                Pairing::Pair(a, b) => {
                    if f > 0.0 {
                        votes[b] += 1.0;
                    } else {
                        votes[a] += 1.0;
                    }
                    conf[b] += f;
                    conf[a] -= f;
                }
                Pairing::Rest(c) => votes[c] = f,
            }
        }
        if self.pairings.iter().all(|p| matches!(p, Pairing::Rest(_))) {
            return votes;
        }
        votes
            .iter()
            .zip(&conf)
            .map(|(v, c)| v + c / (3.0 * (c.abs() + 1.0)))
            .collect()
    }
}

impl BinaryMachines<LogisticModel> {
    /// Per-class probabilities averaged over the machines that involve the
    /// class, renormalized to sum to 1.
    fn scores(&self, x: &[f64], n_classes: usize) -> Vec<f64> {
        let mut acc = vec![0.0; n_classes];
        for (p, m) in self.pairings.iter().zip(&self.models) {
            let prob = m.probability(x);
            match *p {
                Pairing::Pair(a, b) => {
                    acc[b] += prob;
                    acc[a] += 1.0 - prob;
                }
                Pairing::Rest(c) => acc[c] += prob,
            }
        }
        let total: f64 = acc.iter().sum();
        if total > 0.0 {
            acc.iter_mut().for_each(|v| *v /= total);
        } else {
            acc.iter_mut().for_each(|v| *v = 1.0 / n_classes as f64);
        }
        acc
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Fitted {
    Knn(KnnModel),
    Lda(LdaModel),
    Qda(QdaModel),
    Logistic(BinaryMachines<LogisticModel>),
    Svm(BinaryMachines<SvmModel>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub format_version: u32,
    pub kind: ModelKind,
    /// Sorted class list; score vectors follow this order.
    pub classes: Vec<ClassLabel>,
    pub standardizer: Standardizer,
    pub params: TrainParams,
    pub seed: u64,
    pub fitted: Fitted,
}

impl TrainedModel {
    pub fn train(
        kind: ModelKind,
        rows: &[Vec<f64>],
        labels: &[ClassLabel],
        params: &TrainParams,
        seed: u64,
    ) -> Result<Self, ClassifyError> {
        if rows.len() != labels.len() {
            return Err(ClassifyError::LengthMismatch {
                rows: rows.len(),
                labels: labels.len(),
            });
        }
        let mut classes: Vec<ClassLabel> = labels.to_vec();
        classes.sort();
        classes.dedup();
        if classes.len() < 2 {
            return Err(ClassifyError::SingleClass);
        }
        let standardizer = Standardizer::fit(rows)?;
        let z = standardizer.apply_all(rows);
        let idx: Vec<usize> = labels
            .iter()
            .map(|l| classes.binary_search(l).expect("label drawn from classes"))
            .collect();
        let k = classes.len();
        let fitted = match kind {
            ModelKind::Knn => Fitted::Knn(KnnModel::new(params.knn_k, z, idx)),
            ModelKind::Lda => Fitted::Lda(LdaModel::fit(&z, &idx, k)?),
            ModelKind::Qda => Fitted::Qda(QdaModel::fit(&z, &idx, k)?),
            ModelKind::Logistic => Fitted::Logistic(BinaryMachines::fit(
                &z,
                &idx,
                k,
                params.multiclass,
                |r, t| {
                    let targets: Vec<f64> = t.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
                    LogisticModel::fit(r, &targets, &params.logistic)
                },
            )),
            ModelKind::Svm => Fitted::Svm(BinaryMachines::fit(
                &z,
                &idx,
                k,
                params.multiclass,
                |r, t| {
                    let targets: Vec<f64> = t.iter().map(|&b| if b { 1.0 } else { -1.0 }).collect();
                    SvmModel::fit(r, &targets, &params.svm)
                },
            )),
        };
        Ok(Self {
            format_version: MODEL_FORMAT_VERSION,
            kind,
            classes,
            standardizer,
            params: *params,
            seed,
            fitted,
        })
    }

    pub fn dim(&self) -> usize {
        self.standardizer.dim()
    }

    /// Per-class scores in `classes` order.
    pub fn predict_scores(&self, x: &[f64]) -> Result<Vec<f64>, ClassifyError> {
        if x.len() != self.dim() {
            return Err(ClassifyError::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        let z = self.standardizer.apply(x);
        let k = self.classes.len();
        Ok(match &self.fitted {
            Fitted::Knn(m) => m.scores(&z, k),
            Fitted::Lda(m) => m.scores(&z),
            Fitted::Qda(m) => m.scores(&z),
            Fitted::Logistic(m) => m.scores(&z, k),
            Fitted::Svm(m) => m.scores(&z, k),
        })
    }

    /// Argmax of the scores; the earliest class wins ties.
    pub fn predict(&self, x: &[f64]) -> Result<ClassLabel, ClassifyError> {
        let scores = self.predict_scores(x)?;
        Ok(self.classes[argmax(&scores)])
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ClassifyError> {
        let model: Self =
            serde_json::from_str(text).map_err(|e| ClassifyError::Format(e.to_string()))?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(ClassifyError::Format(format!(
                "unsupported format version {}",
                model.format_version
            )));
        }
        Ok(model)
    }
}

pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    use ClassLabel::{Human as A, Synthetic as B};

    fn gaussian_blobs(
        seed: u64,
        n: usize,
        sep: f64,
        dim: usize,
    ) -> (Vec<Vec<f64>>, Vec<ClassLabel>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let (label, shift) = if i % 2 == 0 { (A, 0.0) } else { (B, sep) };
            let mut r: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            r[0] += shift;
            rows.push(r);
            labels.push(label);
        }
        (rows, labels)
    }

    #[test]
    fn softmax_sums_to_one() {
        let s = softmax(&[1000.0, 999.0, -5.0]);
        assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(s[0] > s[1] && s[1] > s[2]);
    }

    #[test]
    fn single_class_rejected() {
        let err = TrainedModel::train(
            ModelKind::Lda,
            &[vec![0.0], vec![1.0]],
            &[A, A],
            &TrainParams::default(),
            0,
        );
        assert_eq!(err.unwrap_err(), ClassifyError::SingleClass);
    }

    #[test]
    fn two_point_linear_svm() {
        let m = TrainedModel::train(
            ModelKind::Svm,
            &[vec![-1.0], vec![1.0]],
            &[A, B],
            &TrainParams::default(),
            0,
        )
        .unwrap();
        assert_eq!(m.predict(&[-0.5]).unwrap(), A);
        assert_eq!(m.predict(&[0.5]).unwrap(), B);
    }

    #[test]
    fn knn_k1_reproduces_training_labels() {
        let (rows, labels) = gaussian_blobs(81, 60, 0.5, 3);
        let params = TrainParams {
            knn_k: 1,
            ..TrainParams::default()
        };
        let m = TrainedModel::train(ModelKind::Knn, &rows, &labels, &params, 0).unwrap();
        for (r, l) in rows.iter().zip(&labels) {
            assert_eq!(m.predict(r).unwrap(), *l);
        }
    }

    #[test]
    fn lda_separates_six_sigma_blobs() {
        let (rows, labels) = gaussian_blobs(82, 200, 6.0, 2);
        let (test_rows, test_labels) = gaussian_blobs(83, 200, 6.0, 2);
        let m = TrainedModel::train(ModelKind::Lda, &rows, &labels, &TrainParams::default(), 0)
            .unwrap();
        let correct = test_rows
            .iter()
            .zip(&test_labels)
            .filter(|(r, l)| m.predict(r).unwrap() == **l)
            .count();
        assert!(correct as f64 / 200.0 >= 0.99);
    }

    #[test]
    fn qda_needs_dim_plus_one_rows_per_class() {
        let rows = vec![
            vec![0.0, 0.0],
            vec![1.0, 0.5],
            vec![5.0, 1.0],
            vec![6.0, 3.0],
            vec![7.0, 2.0],
        ];
        let labels = [A, A, B, B, B];
        let err = TrainedModel::train(ModelKind::Qda, &rows, &labels, &TrainParams::default(), 0)
            .unwrap_err();
        assert_eq!(err, ClassifyError::SingularCovariance { class: Some(0) });
    }

    #[test]
    fn probability_scores_sum_to_one() {
        let (rows, labels) = gaussian_blobs(84, 80, 1.0, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(85);
        for kind in [
            ModelKind::Logistic,
            ModelKind::Lda,
            ModelKind::Qda,
            ModelKind::Knn,
        ] {
            let m = TrainedModel::train(kind, &rows, &labels, &TrainParams::default(), 0).unwrap();
            for _ in 0..50 {
                let x: Vec<f64> = (0..3).map(|_| rng.random_range(-10.0..10.0)).collect();
                let s = m.predict_scores(&x).unwrap();
                assert!((s.iter().sum::<f64>() - 1.0).abs() <= 1e-9, "{kind:?}");
            }
        }
    }

    #[test]
    fn knn_query_on_training_point_wins() {
        let rows = vec![vec![0.0], vec![0.1], vec![0.2], vec![5.0]];
        let labels = [A, A, A, B];
        let m = TrainedModel::train(ModelKind::Knn, &rows, &labels, &TrainParams::default(), 0)
            .unwrap();
        assert_eq!(m.predict(&[5.0]).unwrap(), B);
    }

    #[test]
    fn dimension_mismatch() {
        let (rows, labels) = gaussian_blobs(86, 20, 3.0, 2);
        let m = TrainedModel::train(ModelKind::Lda, &rows, &labels, &TrainParams::default(), 0)
            .unwrap();
        assert_eq!(
            m.predict(&[1.0]).unwrap_err(),
            ClassifyError::DimensionMismatch {
                expected: 2,
                got: 1
            }
        );
    }

    #[test]
    fn one_vs_one_builds_k_choose_2_machines() {
        let mut rng = ChaCha8Rng::seed_from_u64(87);
        let classes = [
            ClassLabel::Human,
            ClassLabel::NaturalReader,
            ClassLabel::SpikAI,
            ClassLabel::Replica,
        ];
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..80 {
            let c = i % 4;
            rows.push(vec![
                c as f64 * 4.0 + rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            ]);
            labels.push(classes[c]);
        }
        for kind in [ModelKind::Svm, ModelKind::Logistic] {
            let m = TrainedModel::train(kind, &rows, &labels, &TrainParams::default(), 0).unwrap();
            let n = match &m.fitted {
                Fitted::Svm(b) => b.len(),
                Fitted::Logistic(b) => b.len(),
                _ => unreachable!(),
            };
            assert_eq!(n, 6);
            let correct = rows
                .iter()
                .zip(&labels)
                .filter(|(r, l)| m.predict(r).unwrap() == **l)
                .count();
            assert!(correct >= 76, "{kind:?} {correct}");
        }
        let ovr = TrainParams {
            multiclass: Multiclass::OneVsRest,
            ..TrainParams::default()
        };
        let m = TrainedModel::train(ModelKind::Svm, &rows, &labels, &ovr, 0).unwrap();
        let Fitted::Svm(b) = &m.fitted else {
            unreachable!()
        };
        assert_eq!(b.len(), 4);
    }

    #[test]
    fn ties_go_to_first_class() {
        assert_eq!(argmax(&[0.5, 0.5]), 0);
        assert_eq!(argmax(&[0.1, 0.7, 0.7]), 1);
    }
}
