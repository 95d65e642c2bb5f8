//! Manifest loading, stratified train/test splits and k-fold partitions.
//!
//! All shuffling is a Fisher-Yates pass driven by `ChaCha8Rng` seeded from
//! the caller's 64-bit seed, so plans are reproducible across platforms.

use std::collections::{BTreeMap, HashSet};
use std::io::Read;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::label::ClassLabel;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("row {row}: unknown label `{label}`")]
    UnknownLabel { row: usize, label: String },
    #[error("row {row}: duplicate path `{path}`")]
    DuplicatePath { row: usize, path: String },
    #[error("manifest has no entries")]
    EmptyManifest,
    #[error("manifest format: {0}")]
    Format(String),
    #[error("class {class} has {count} entries; at least {needed} required")]
    ClassTooSmall {
        class: ClassLabel,
        count: usize,
        needed: usize,
    },
    #[error("{count} samples cannot fill {k} folds")]
    TooFewSamples { count: usize, k: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub label: ClassLabel,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    entries: Vec<ManifestEntry>,
    base_dir: Option<PathBuf>,
}

impl Manifest {
    pub fn new(entries: Vec<ManifestEntry>) -> Result<Self, DatasetError> {
        if entries.is_empty() {
            return Err(DatasetError::EmptyManifest);
        }
        let mut seen = HashSet::new();
        for (i, e) in entries.iter().enumerate() {
            if !seen.insert(e.path.clone()) {
                return Err(DatasetError::DuplicatePath {
                    row: i + 1,
                    path: e.path.display().to_string(),
                });
            }
        }
        Ok(Self {
            entries,
            base_dir: None,
        })
    }

    pub fn with_base_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.base_dir = Some(dir.into());
        self
    }

    pub fn entries(&self) -> &[ManifestEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn labels(&self) -> Vec<ClassLabel> {
        self.entries.iter().map(|e| e.label).collect()
    }

    /// Entry path, resolved against the manifest's directory when relative.
    pub fn resolved_path(&self, index: usize) -> PathBuf {
        let p = &self.entries[index].path;
        match &self.base_dir {
            Some(base) if p.is_relative() => base.join(p),
            _ => p.clone(),
        }
    }

    pub fn class_histogram(&self) -> BTreeMap<ClassLabel, usize> {
        let mut h = BTreeMap::new();
        for e in &self.entries {
            *h.entry(e.label).or_insert(0) += 1;
        }
        h
    }

    /// `path,label` CSV with LF line endings.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("path,label\n");
        for e in &self.entries {
            out.push_str(&format!("{},{}\n", e.path.display(), e.label));
        }
        out
    }
}

/// Reads a `path,label` CSV. Relative paths resolve against the manifest's
/// directory.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest, DatasetError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    let mut manifest = parse_manifest(file)?;
    manifest.base_dir = path.parent().map(Path::to_path_buf);
    Ok(manifest)
}

pub fn parse_manifest<R: Read>(input: R) -> Result<Manifest, DatasetError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(input);
    let header = reader
        .headers()
        .map_err(|e| DatasetError::Format(e.to_string()))?
        .clone();
    if header.iter().map(str::trim).ne(["path", "label"]) {
        return Err(DatasetError::Format("header must be `path,label`".into()));
    }
    let mut entries = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| DatasetError::Format(format!("row {row}: {e}")))?;
        if record.len() != 2 {
            return Err(DatasetError::Format(format!(
                "row {row}: expected 2 fields"
            )));
        }
        let label = record[1].parse().map_err(|_| DatasetError::UnknownLabel {
            row,
            label: record[1].trim().to_string(),
        })?;
        entries.push(ManifestEntry {
            path: PathBuf::from(record[0].trim()),
            label,
        });
    }
    Manifest::new(entries)
}

fn shuffle(indices: &mut [usize], rng: &mut ChaCha8Rng) {
    for i in (1..indices.len()).rev() {
        let j = rng.random_range(0..=i);
        indices.swap(i, j);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub seed: u64,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
}

impl SplitPlan {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("split plan serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, DatasetError> {
        serde_json::from_str(text).map_err(|e| DatasetError::Format(e.to_string()))
    }
}

/// Stratified random split.
///
/// The total test count is `round(test_fraction * n)`, apportioned to classes
/// by largest remainder (ties broken by class order), so each class lands
/// within one sample of its proportional share. Index lists are sorted.
pub fn split(
    labels: &[ClassLabel],
    test_fraction: f64,
    seed: u64,
) -> Result<SplitPlan, DatasetError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(DatasetError::InvalidArgument(format!(
            "test fraction {test_fraction} outside (0, 1)"
        )));
    }
    let mut by_class: BTreeMap<ClassLabel, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    for (&class, members) in &by_class {
        if members.len() < 2 {
            return Err(DatasetError::ClassTooSmall {
                class,
                count: members.len(),
                needed: 2,
            });
        }
    }

    let total = (test_fraction * labels.len() as f64).round() as usize;
    let shares: Vec<f64> = by_class
        .values()
        .map(|m| test_fraction * m.len() as f64)
        .collect();
    let mut counts: Vec<usize> = shares.iter().map(|s| s.floor() as usize).collect();
    let mut order: Vec<usize> = (0..shares.len()).collect();
    order.sort_by(|&a, &b| {
        (shares[b] - shares[b].floor()).total_cmp(&(shares[a] - shares[a].floor()))
    });
    let mut missing = total.saturating_sub(counts.iter().sum());
    for &c in order.iter().cycle().take(order.len() * 2) {
        if missing == 0 {
            break;
        }
        if counts[c] < by_class.values().nth(c).map_or(0, Vec::len) {
            counts[c] += 1;
            missing -= 1;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (members, &n_test) in by_class.values().zip(&counts) {
        let mut shuffled = members.clone();
        shuffle(&mut shuffled, &mut rng);
        test.extend_from_slice(&shuffled[..n_test]);
        train.extend_from_slice(&shuffled[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitPlan {
        seed,
        train_indices: train,
        test_indices: test,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub validate: Vec<usize>,
}

/// Shuffles `indices` and deals them into `k` folds; the first `n % k` folds
/// get one extra element.
pub fn kfold(indices: &[usize], k: usize, seed: u64) -> Result<Vec<Fold>, DatasetError> {
    if k < 2 || indices.len() < k {
        return Err(DatasetError::TooFewSamples {
            count: indices.len(),
            k,
        });
    }
    let mut shuffled = indices.to_vec();
    shuffle(&mut shuffled, &mut ChaCha8Rng::seed_from_u64(seed));
    let (base, extra) = (shuffled.len() / k, shuffled.len() % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        let mut validate = shuffled[start..start + size].to_vec();
        let mut train: Vec<usize> = shuffled[..start]
            .iter()
            .chain(&shuffled[start + size..])
            .copied()
            .collect();
        validate.sort_unstable();
        train.sort_unstable();
        folds.push(Fold { train, validate });
        start += size;
    }
    Ok(folds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn reference_labels() -> Vec<ClassLabel> {
        let mut v = vec![ClassLabel::Human; 250];
        v.extend(vec![ClassLabel::NaturalReader; 79]);
        v.extend(vec![ClassLabel::SpikAI; 230]);
        v.extend(vec![ClassLabel::Replica; 126]);
        v
    }

    #[test]
    fn parses_two_rows() {
        let m = parse_manifest("path,label\na.wav,Human\nb.wav,Replica\n".as_bytes()).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.entries()[1].label, ClassLabel::Replica);
    }

    #[test]
    fn unknown_label_names_row() {
        let err = parse_manifest("path,label\na.wav,Human\nb.wav,Siri\n".as_bytes()).unwrap_err();
        match err {
            DatasetError::UnknownLabel { row, label } => {
                assert_eq!(row, 2);
                assert_eq!(label, "Siri");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicates_and_empty() {
        let err =
            parse_manifest("path,label\na.wav,Human\na.wav,Replica\n".as_bytes()).unwrap_err();
        assert!(matches!(err, DatasetError::DuplicatePath { row: 2, .. }));
        let err = parse_manifest("path,label\n".as_bytes()).unwrap_err();
        assert!(matches!(err, DatasetError::EmptyManifest));
    }

    #[test]
    fn reference_sized_manifest() {
        let text: String = std::iter::once("path,label\n".to_string())
            .chain(
                reference_labels()
                    .iter()
                    .enumerate()
                    .map(|(i, l)| format!("clip_{i}.wav,{l}\n")),
            )
            .collect();
        let m = parse_manifest(text.as_bytes()).unwrap();
        let h = m.class_histogram();
        assert_eq!(h[&ClassLabel::Human], 250);
        assert_eq!(h[&ClassLabel::NaturalReader], 79);
        assert_eq!(h[&ClassLabel::SpikAI], 230);
        assert_eq!(h[&ClassLabel::Replica], 126);
        assert_eq!(parse_manifest(m.to_csv().as_bytes()).unwrap(), m);
    }

    /// The per-class counts sum to 685; the 19 unattributed rows of the
    /// 704 total are padded as Human.
    fn reference_sized_labels() -> Vec<ClassLabel> {
        let mut v = reference_labels();
        v.extend(vec![ClassLabel::Human; 704 - v.len()]);
        v
    }

    #[test]
    fn split_of_704_has_82_test_entries() {
        let labels = reference_sized_labels();
        assert_eq!(labels.len(), 704);
        let fraction = 82.0 / 704.0;
        for seed in [0, 1, 99] {
            let plan = split(&labels, fraction, seed).unwrap();
            assert_eq!(plan.test_indices.len(), 82);
            assert_eq!(plan.train_indices.len(), 622);
            for class in [
                ClassLabel::Human,
                ClassLabel::NaturalReader,
                ClassLabel::SpikAI,
                ClassLabel::Replica,
            ] {
                let size = labels.iter().filter(|&&l| l == class).count() as f64;
                let got = plan
                    .test_indices
                    .iter()
                    .filter(|&&i| labels[i] == class)
                    .count() as f64;
                assert!((got - fraction * size).abs() <= 1.0, "{class}: {got}");
            }
        }
        assert_eq!(
            split(&labels, fraction, 5).unwrap(),
            split(&labels, fraction, 5).unwrap()
        );
        assert_ne!(
            split(&labels, fraction, 5).unwrap(),
            split(&labels, fraction, 6).unwrap()
        );
    }

    #[test]
    fn split_rejects_tiny_class() {
        let labels = [ClassLabel::Human, ClassLabel::Human, ClassLabel::Replica];
        assert!(matches!(
            split(&labels, 0.5, 1),
            Err(DatasetError::ClassTooSmall {
                class: ClassLabel::Replica,
                ..
            })
        ));
    }

    #[test]
    fn split_plan_json_round_trip() {
        let plan = split(&reference_labels(), 0.2, 3).unwrap();
        assert_eq!(SplitPlan::from_json(&plan.to_json()).unwrap(), plan);
    }

    #[test]
    fn kfold_examples() {
        let idx: Vec<usize> = (0..10).collect();
        let folds = kfold(&idx, 5, 1).unwrap();
        assert!(folds.iter().all(|f| f.validate.len() == 2));
        let mut all: Vec<usize> = folds.iter().flat_map(|f| f.validate.clone()).collect();
        all.sort_unstable();
        assert_eq!(all, idx);

        let idx: Vec<usize> = (0..622).collect();
        let sizes: Vec<usize> = kfold(&idx, 5, 2)
            .unwrap()
            .iter()
            .map(|f| f.validate.len())
            .collect();
        assert_eq!(sizes, vec![125, 125, 124, 124, 124]);

        assert!(matches!(
            kfold(&idx[..3], 5, 0),
            Err(DatasetError::TooFewSamples { count: 3, k: 5 })
        ));
        assert!(matches!(
            kfold(&idx, 1, 0),
            Err(DatasetError::TooFewSamples { .. })
        ));
    }

    proptest! {
        #[test]
        fn kfold_partitions(n in 2usize..300, k in 2usize..10, seed in any::<u64>()) {
            prop_assume!(n >= k);
            let idx: Vec<usize> = (0..n).map(|i| i * 3).collect();
            let folds = kfold(&idx, k, seed).unwrap();
            prop_assert_eq!(&folds, &kfold(&idx, k, seed).unwrap());
            let mut seen = Vec::new();
            for f in &folds {
                let v: HashSet<_> = f.validate.iter().collect();
                prop_assert!(f.train.iter().all(|i| !v.contains(i)));
                prop_assert_eq!(f.train.len() + f.validate.len(), n);
                seen.extend(f.validate.iter().copied());
            }
            seen.sort_unstable();
            prop_assert_eq!(seen, idx);
            let sizes: Vec<usize> = folds.iter().map(|f| f.validate.len()).collect();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        }

        #[test]
        fn split_is_a_partition(counts in proptest::collection::vec(2usize..40, 1..5), frac in 0.05f64..0.95, seed in any::<u64>()) {
            let labels: Vec<ClassLabel> = counts
                .iter()
                .zip(ClassLabel::ALL)
                .flat_map(|(&c, l)| std::iter::repeat_n(l, c))
                .collect();
            let plan = split(&labels, frac, seed).unwrap();
            let mut all: Vec<usize> = plan.train_indices.iter().chain(&plan.test_indices).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
            prop_assert_eq!(plan.test_indices.len(), (frac * labels.len() as f64).round() as usize);
        }
    }
}
