//! Binary soft-margin SVM solved by SMO.
//!
//! The dual `min 1/2 a'Qa - e'a, 0 <= a <= C, y'a = 0` with
//! `Q_ij = y_i y_j K(x_i, x_j)` is optimized one pair at a time. The first
//! index is the maximal KKT violator; the second maximizes the second-order
//! decrease. Iteration stops once the violation gap drops below `tolerance`,
//! which bounds `|y f(x) - 1|` on free support vectors by the same amount.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Kernel {
    Linear,
    Polynomial { degree: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub kernel: Kernel,
    /// Inner products are divided by `kernel_scale^2`.
    pub kernel_scale: f64,
    pub box_constraint: f64,
    pub tolerance: f64,
    /// Cap on SMO pair updates.
    pub max_passes: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            kernel: Kernel::Linear,
            kernel_scale: 1.0,
            box_constraint: 1.0,
            tolerance: 1e-3,
            max_passes: 100_000,
        }
    }
}

impl SvmParams {
    pub fn quadratic(kernel_scale: f64) -> Self {
        Self {
            kernel: Kernel::Polynomial { degree: 2 },
            kernel_scale,
            ..Self::default()
        }
    }

    pub fn kernel_value(&self, a: &[f64], b: &[f64]) -> f64 {
        let dot = a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()
            / (self.kernel_scale * self.kernel_scale);
        match self.kernel {
            Kernel::Linear => dot,
            Kernel::Polynomial { degree } => (1.0 + dot).powi(degree as i32),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub params: SvmParams,
    pub support_vectors: Vec<Vec<f64>>,
    /// `alpha_i * y_i` per support vector.
    pub dual_coef: Vec<f64>,
    pub rho: f64,
    pub iterations: usize,
    pub converged: bool,
}

const TAU: f64 = 1e-12;

/// Pins values within rounding distance of a box bound onto the bound, so
/// a multiplier cannot linger just inside and stall the working-set choice.
fn snap(alpha: f64, c: f64) -> f64 {
    let eps = 1e-12 * c;
    if alpha <= eps {
        0.0
    } else if alpha >= c - eps {
        c
    } else {
        alpha
    }
}

/// Dual solution before support-vector extraction; kept for KKT checks.
#[derive(Debug, Clone)]
pub struct SmoSolution {
    pub alpha: Vec<f64>,
    pub rho: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Runs SMO on rows with targets `+1` / `-1`.
pub fn solve(rows: &[Vec<f64>], targets: &[f64], params: &SvmParams) -> SmoSolution {
    let n = rows.len();
    let c = params.box_constraint;
    let mut kmat = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let k = params.kernel_value(&rows[i], &rows[j]);
            kmat[i * n + j] = k;
            kmat[j * n + i] = k;
        }
    }
    let k = |i: usize, j: usize| kmat[i * n + j];
    let y = targets;
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let in_up = |a: f64, yi: f64| (yi > 0.0 && a < c) || (yi < 0.0 && a > 0.0);
    let in_low = |a: f64, yi: f64| (yi > 0.0 && a > 0.0) || (yi < 0.0 && a < c);

    let mut iterations = 0;
    let mut converged = false;
    while iterations < params.max_passes {
        let mut i_sel = None;
        let mut g_max = f64::NEG_INFINITY;
        for t in 0..n {
            if in_up(alpha[t], y[t]) && -y[t] * grad[t] > g_max {
                g_max = -y[t] * grad[t];
                i_sel = Some(t);
            }
        }
        let mut g_min = f64::INFINITY;
        let mut j_sel = None;
        let mut best_obj = f64::INFINITY;
        if let Some(i) = i_sel {
            for t in 0..n {
                if !in_low(alpha[t], y[t]) {
                    continue;
                }
                let v = -y[t] * grad[t];
                g_min = g_min.min(v);
                let b = g_max - v;
                if b > 0.0 {
                    let mut a = k(i, i) + k(t, t) - 2.0 * k(i, t);
                    if a <= 0.0 {
                        a = TAU;
                    }
                    let obj = -(b * b) / a;
                    if obj < best_obj {
                        best_obj = obj;
                        j_sel = Some(t);
                    }
                }
            }
        }
        let (Some(i), Some(j)) = (i_sel, j_sel) else {
            converged = true;
            break;
        };
        if g_max - g_min < params.tolerance {
            converged = true;
            break;
        }

        // Platt's pair update; y_t G_t equals the error E_t up to the bias.
        let mut eta = k(i, i) + k(j, j) - 2.0 * k(i, j);
        if eta <= 0.0 {
            eta = TAU;
        }
        let (ai, aj) = (alpha[i], alpha[j]);
        let (lo, hi) = if y[i] != y[j] {
            ((aj - ai).max(0.0), (c + aj - ai).min(c))
        } else {
            ((ai + aj - c).max(0.0), (ai + aj).min(c))
        };
        let e_diff = y[i] * grad[i] - y[j] * grad[j];
        let aj_new = (aj + y[j] * e_diff / eta).clamp(lo, hi);
        let ai_new = snap(ai + y[i] * y[j] * (aj - aj_new), c);
        let aj_new = snap(aj_new, c);
        let (di, dj) = (ai_new - ai, aj_new - aj);
        alpha[i] = ai_new;
        alpha[j] = aj_new;
        for t in 0..n {
            grad[t] += y[t] * (y[i] * k(t, i) * di + y[j] * k(t, j) * dj);
        }
        iterations += 1;
    }

    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free_sum, mut free_n) = (0.0, 0usize);
    for t in 0..n {
        let yg = y[t] * grad[t];
        let at_upper = alpha[t] >= c;
        let at_lower = alpha[t] <= 0.0;
        if at_upper {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if at_lower {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free_sum += yg;
            free_n += 1;
        }
    }
    let rho = if free_n > 0 {
        free_sum / free_n as f64
    } else {
        (ub + lb) / 2.0
    };
    SmoSolution {
        alpha,
        rho,
        iterations,
        converged,
    }
}

impl SvmModel {
    pub fn fit(rows: &[Vec<f64>], targets: &[f64], params: &SvmParams) -> Self {
        let sol = solve(rows, targets, params);
        let mut support_vectors = Vec::new();
        let mut dual_coef = Vec::new();
        for ((row, &a), &y) in rows.iter().zip(&sol.alpha).zip(targets) {
            if a > 0.0 {
                support_vectors.push(row.clone());
                dual_coef.push(a * y);
            }
        }
        Self {
            params: *params,
            support_vectors,
            dual_coef,
            rho: sol.rho,
            iterations: sol.iterations,
            converged: sol.converged,
        }
    }

    /// Signed margin; positive means the `+1` class.
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.support_vectors
            .iter()
            .zip(&self.dual_coef)
            .map(|(sv, c)| c * self.params.kernel_value(sv, x))
            .sum::<f64>()
            - self.rho
    }
}
