//! Binary soft-margin SVM trained by SMO with maximal-violating-pair selection.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::kernel::{GramMatrix, KernelKind, KernelSpec};
use crate::error::{Error, Result};

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SmoSolution {
    pub alpha: Vec<f64>,
    pub bias: f64,
    /// Dual objective `sum(alpha) - 1/2 alpha' Q alpha`.
    pub objective: f64,
    pub iterations: usize,
    /// Steps taken with a non-positive curvature estimate.
    pub nonconvex_steps: usize,
}

/// Solves the SVM dual on a precomputed kernel matrix. `c` holds one box
/// bound per sample; labels are +1 / -1.
pub fn solve_dual(k: &GramMatrix, y: &[f64], c: &[f64], tol: f64, seed: u64) -> Result<SmoSolution> {
    let n = y.len();
    if k.n != n || c.len() != n {
        return Err(Error::len(n, k.n.min(c.len())));
    }
    if !y.iter().any(|&v| v > 0.0) || !y.iter().any(|&v| v < 0.0) {
        return Err(Error::SingleClassData);
    }
    if c.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::ConfigInvalid("cost C must be positive".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let q = |i: usize, j: usize| y[i] * y[j] * k.get(i, j);
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let max_iter = (100 * n).max(10_000_000);
    let mut iterations = 0;
    let mut nonconvex_steps = 0;

    let is_up = |a: f64, yi: f64, ci: f64| (yi > 0.0 && a < ci) || (yi < 0.0 && a > 0.0);
    let is_low = |a: f64, yi: f64, ci: f64| (yi > 0.0 && a > 0.0) || (yi < 0.0 && a < ci);

    while iterations < max_iter {
        let mut gmax = f64::NEG_INFINITY;
        let mut gmin = f64::INFINITY;
        let (mut i, mut j) = (usize::MAX, usize::MAX);
        for &t in &order {
            let v = -y[t] * grad[t];
            if is_up(alpha[t], y[t], c[t]) && v > gmax {
                gmax = v;
                i = t;
            }
            if is_low(alpha[t], y[t], c[t]) && v < gmin {
                gmin = v;
                j = t;
            }
        }
        if i == usize::MAX || j == usize::MAX || gmax - gmin < tol {
            break;
        }
        iterations += 1;

        let (ci, cj) = (c[i], c[j]);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let (mut ai, mut aj) = (old_i, old_j);
        if y[i] != y[j] {
            let mut quad = q(i, i) + q(j, j) + 2.0 * q(i, j);
            if quad <= 0.0 {
                quad = TAU;
                nonconvex_steps += 1;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > ci - cj {
                if ai > ci {
                    ai = ci;
                    aj = ci - diff;
                }
            } else if aj > cj {
                aj = cj;
                ai = cj + diff;
            }
        } else {
            let mut quad = q(i, i) + q(j, j) - 2.0 * q(i, j);
            if quad <= 0.0 {
                quad = TAU;
                nonconvex_steps += 1;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > ci {
                if ai > ci {
                    ai = ci;
                    aj = sum - ci;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > cj {
                if aj > cj {
                    aj = cj;
                    ai = sum - cj;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
        }
        alpha[i] = ai;
        alpha[j] = aj;
        let (di, dj) = (ai - old_i, aj - old_j);
        let (ki, kj) = (k.row(i), k.row(j));
        for t in 0..n {
            grad[t] += y[t] * (y[i] * ki[t] * di + y[j] * kj[t] * dj);
        }
    }
    if iterations >= max_iter {
        log::warn!("SMO stopped at the iteration cap ({max_iter}) before reaching tolerance {tol}");
    }

    // bias: mean over free vectors, else midpoint of the feasible interval
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum_free, mut n_free) = (0.0, 0usize);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] >= c[t] {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 {
        sum_free / n_free as f64
    } else {
        (ub + lb) / 2.0
    };
    let objective = -0.5 * alpha.iter().zip(&grad).map(|(a, g)| a * (g - 1.0)).sum::<f64>();
    Ok(SmoSolution {
        alpha,
        bias: -rho,
        objective,
        iterations,
        nonconvex_steps,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinarySvm {
    pub kernel: KernelSpec,
    pub c: f64,
    pub support_vectors: Vec<Vec<f64>>,
    /// `alpha_i * y_i` per support vector.
    pub dual_coef: Vec<f64>,
    pub bias: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoConfig {
    pub c: f64,
    pub tol: f64,
    pub seed: u64,
}

impl Default for SmoConfig {
    fn default() -> Self {
        SmoConfig {
            c: 1.0,
            tol: 1e-3,
            seed: 0,
        }
    }
}

fn check_labels(labels: &[f64]) -> Result<()> {
    if labels.iter().any(|&v| v != 1.0 && v != -1.0) {
        return Err(Error::ConfigInvalid("binary labels must be +1 or -1".into()));
    }
    Ok(())
}

pub fn train_binary(
    data: &[Vec<f64>],
    labels: &[f64],
    c: f64,
    spec: &KernelSpec,
    tol: f64,
    seed: u64,
) -> Result<BinarySvm> {
    if data.len() != labels.len() {
        return Err(Error::len(data.len(), labels.len()));
    }
    check_labels(labels)?;
    spec.validate()?;
    if let Some(d) = data.first().map(Vec::len) {
        if let Some(bad) = data.iter().find(|x| x.len() != d) {
            return Err(Error::len(d, bad.len()));
        }
    }
    let k = GramMatrix::compute(spec, data);
    let sol = solve_dual(&k, labels, &vec![c; labels.len()], tol, seed)?;
    if spec.kind == KernelKind::Sigmoid && sol.nonconvex_steps > 0 {
        log::warn!(
            "sigmoid kernel matrix is not positive semidefinite ({} clipped steps)",
            sol.nonconvex_steps
        );
    }
    let (mut sv, mut coef) = (Vec::new(), Vec::new());
    for (t, &a) in sol.alpha.iter().enumerate() {
        if a > 0.0 {
            sv.push(data[t].clone());
            coef.push(a * labels[t]);
        }
    }
    Ok(BinarySvm {
        kernel: *spec,
        c,
        support_vectors: sv,
        dual_coef: coef,
        bias: sol.bias,
        objective: sol.objective,
    })
}

impl BinarySvm {
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.support_vectors
            .iter()
            .zip(&self.dual_coef)
            .map(|(s, a)| a * self.kernel.eval(s, x))
            .sum::<f64>()
            + self.bias
    }

    /// Sign of the decision value; exact zero maps to +1.
    pub fn predict(&self, x: &[f64]) -> f64 {
        if self.decision(x) >= 0.0 {
            1.0
        } else {
            -1.0
        }
    }
}
