use serde::{Deserialize, Serialize};

/// Weight assigned to a neighbor at zero distance (and the cap for `1/d`).
pub const MAX_WEIGHT: f64 = 1e12;

/// Inverse-distance weighted k-nearest-neighbor vote over standardized rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub points: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

impl KnnModel {
    pub fn new(k: usize, points: Vec<Vec<f64>>, labels: Vec<usize>) -> Self {
        Self {
            k: k.max(1),
            points,
            labels,
        }
    }

    /// Normalized per-class weight sums.
    pub fn scores(&self, x: &[f64], n_classes: usize) -> Vec<f64> {
        let mut dist: Vec<(f64, usize)> = self
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let d2: f64 = p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
                (d2.sqrt(), i)
            })
            .collect();
        dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut scores = vec![0.0; n_classes];
        for &(d, i) in dist.iter().take(self.k) {
            let w = if d > 0.0 {
                (1.0 / d).min(MAX_WEIGHT)
            } else {
                MAX_WEIGHT
            };
            scores[self.labels[i]] += w;
        }
        let total: f64 = scores.iter().sum();
        if total > 0.0 {
            scores.iter_mut().for_each(|s| *s /= total);
        }
        scores
    }
}
