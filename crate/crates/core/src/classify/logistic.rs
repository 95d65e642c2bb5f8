//! Binary logistic regression trained by gradient descent with Armijo
//! backtracking on the L2-penalized mean cross-entropy.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    /// L2 penalty on the weights (not the bias).
    pub l2: f64,
    pub initial_step: f64,
    pub gradient_tolerance: f64,
    pub max_iterations: usize,
}

impl Default for LogisticParams {
    fn default() -> Self {
        Self {
            l2: 1e-3,
            initial_step: 1.0,
            gradient_tolerance: 1e-6,
            max_iterations: 20_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Loss and gradient at `(weights, bias)`; `targets` are 0 or 1. The last
/// gradient entry is the bias derivative.
pub fn loss_and_gradient(
    weights: &[f64],
    bias: f64,
    rows: &[Vec<f64>],
    targets: &[f64],
    l2: f64,
) -> (f64, Vec<f64>) {
    let n = rows.len() as f64;
    let dim = weights.len();
    let mut grad = vec![0.0; dim + 1];
    let mut loss = 0.0;
    for (x, &y) in rows.iter().zip(targets) {
        let z = x.iter().zip(weights).map(|(a, w)| a * w).sum::<f64>() + bias;
        loss += softplus(z) - y * z;
        let r = sigmoid(z) - y;
        for (g, a) in grad.iter_mut().zip(x) {
            *g += r * a;
        }
        grad[dim] += r;
    }
    loss /= n;
    grad.iter_mut().for_each(|g| *g /= n);
    for (g, w) in grad.iter_mut().zip(weights) {
        *g += l2 * w;
    }
    loss += 0.5 * l2 * weights.iter().map(|w| w * w).sum::<f64>();
    (loss, grad)
}

impl LogisticModel {
    pub fn fit(rows: &[Vec<f64>], targets: &[f64], params: &LogisticParams) -> Self {
        let dim = rows[0].len();
        let mut w = vec![0.0; dim];
        let mut b = 0.0;
        let (mut loss, mut grad) = loss_and_gradient(&w, b, rows, targets, params.l2);
        let mut iterations = 0;
        while iterations < params.max_iterations {
            let norm2: f64 = grad.iter().map(|g| g * g).sum();
            if norm2.sqrt() < params.gradient_tolerance {
                break;
            }
            let mut step = params.initial_step;
            loop {
                let w_try: Vec<f64> = w.iter().zip(&grad).map(|(wi, g)| wi - step * g).collect();
                let b_try = b - step * grad[dim];
                let (l_try, g_try) = loss_and_gradient(&w_try, b_try, rows, targets, params.l2);
                if l_try <= loss - 1e-4 * step * norm2 || step < 1e-12 {
                    w = w_try;
                    b = b_try;
                    loss = l_try;
                    grad = g_try;
                    break;
                }
                step *= 0.5;
            }
            iterations += 1;
        }
        Self {
            weights: w,
            bias: b,
            iterations,
        }
    }

    /// Probability of the positive class.
    pub fn probability(&self, x: &[f64]) -> f64 {
        sigmoid(x.iter().zip(&self.weights).map(|(a, w)| a * w).sum::<f64>() + self.bias)
    }
}
