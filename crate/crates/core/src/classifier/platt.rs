//! Sigmoid calibration of decision values, `P(y = +1 | f) = 1 / (1 + exp(A f + B))`.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibrator {
    pub a: f64,
    pub b: f64,
}

impl Default for Calibrator {
    /// Fallback when validation data holds a single class.
    fn default() -> Self {
        Calibrator { a: -1.0, b: 0.0 }
    }
}

impl Calibrator {
    pub fn probability(&self, f: f64) -> f64 {
        let z = self.a * f + self.b;
        if z >= 0.0 {
            let e = (-z).exp();
            e / (1.0 + e)
        } else {
            1.0 / (1.0 + z.exp())
        }
    }
}

/// Negative log-likelihood of the smoothed targets.
pub fn platt_objective(dec: &[f64], t: &[f64], a: f64, b: f64) -> f64 {
    dec.iter()
        .zip(t)
        .map(|(f, ti)| {
            let z = f * a + b;
            if z >= 0.0 {
                ti * z + (-z).exp().ln_1p()
            } else {
                (ti - 1.0) * z + z.exp().ln_1p()
            }
        })
        .sum()
}

/// Bayesian-smoothed targets `(N+ + 1)/(N+ + 2)` and `1/(N- + 2)`.
pub fn platt_targets(labels: &[bool]) -> Vec<f64> {
    let pos = labels.iter().filter(|&&l| l).count() as f64;
    let neg = labels.len() as f64 - pos;
    let hi = (pos + 1.0) / (pos + 2.0);
    let lo = 1.0 / (neg + 2.0);
    labels.iter().map(|&l| if l { hi } else { lo }).collect()
}

/// Newton's method with backtracking on the regularized likelihood.
/// Returns the fixed fallback when `labels` holds a single class.
pub fn fit_platt(dec: &[f64], labels: &[bool]) -> Calibrator {
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 || dec.len() != labels.len() {
        return Calibrator::default();
    }
    let t = platt_targets(labels);
    let sigma = 1e-12;
    let mut a = 0.0;
    let mut b = ((neg as f64 + 1.0) / (pos as f64 + 1.0)).ln();
    let mut fval = platt_objective(dec, &t, a, b);
    for _ in 0..200 {
        let (mut h11, mut h22, mut h21, mut g1, mut g2) = (sigma, sigma, 0.0, 0.0, 0.0);
        for (f, ti) in dec.iter().zip(&t) {
            let z = f * a + b;
            let (p, q) = if z >= 0.0 {
                let e = (-z).exp();
                (e / (1.0 + e), 1.0 / (1.0 + e))
            } else {
                let e = z.exp();
                (1.0 / (1.0 + e), e / (1.0 + e))
            };
            let d2 = p * q;
            h11 += f * f * d2;
            h22 += d2;
            h21 += f * d2;
            let d1 = ti - p;
            g1 += f * d1;
            g2 += d1;
        }
        if g1.abs() < 1e-9 && g2.abs() < 1e-9 {
            break;
        }
        let det = h11 * h22 - h21 * h21;
        let da = -(h22 * g1 - h21 * g2) / det;
        let db = -(-h21 * g1 + h11 * g2) / det;
        let gd = g1 * da + g2 * db;
        let mut step = 1.0;
        while step >= 1e-10 {
            let (na, nb) = (a + step * da, b + step * db);
            let nf = platt_objective(dec, &t, na, nb);
            if nf < fval + 1e-4 * step * gd {
                a = na;
                b = nb;
                fval = nf;
                break;
            }
            step /= 2.0;
        }
        if step < 1e-10 {
            break;
        }
    }
    Calibrator { a, b }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    // golden-section over A with an inner 1-d Newton solve for B
    fn oracle(dec: &[f64], labels: &[bool]) -> (f64, f64) {
        let t = platt_targets(labels);
        let best_b = |a: f64| {
            let mut b = 0.0;
            for _ in 0..100 {
                let (mut g, mut h) = (0.0, 0.0);
                for (f, ti) in dec.iter().zip(&t) {
                    let p = 1.0 / (1.0 + (a * f + b).exp());
                    g += ti - p;
                    h += p * (1.0 - p);
                }
                b -= g / h;
                if g.abs() < 1e-13 {
                    break;
                }
            }
            b
        };
        let obj = |a: f64| platt_objective(dec, &t, a, best_b(a));
        let (mut lo, mut hi) = (-50.0, 50.0);
        let r = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let m1 = hi - r * (hi - lo);
            let m2 = lo + r * (hi - lo);
            if obj(m1) < obj(m2) {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        let a = (lo + hi) / 2.0;
        (a, best_b(a))
    }

    #[test]
    fn matches_likelihood_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let n = rng.random_range(20..80);
            let slope = rng.random_range(0.5..3.0);
            let dec: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
            let labels: Vec<bool> = dec
                .iter()
                .map(|f| rng.random::<f64>() < 1.0 / (1.0 + (-slope * f - 0.3).exp()))
                .collect();
            if labels.iter().all(|&l| l) || labels.iter().all(|&l| !l) {
                continue;
            }
            let c = fit_platt(&dec, &labels);
            let (a, b) = oracle(&dec, &labels);
            assert!((c.a - a).abs() < 1e-4 && (c.b - b).abs() < 1e-4, "{c:?} vs {a} {b}");
        }
    }

    #[test]
    fn separated_data_is_monotone_decreasing_in_a() {
        let dec = [-2.0, -1.5, -1.0, 1.0, 1.5, 2.0];
        let labels = [false, false, false, true, true, true];
        let c = fit_platt(&dec, &labels);
        assert!(c.a < 0.0);
        for f in dec {
            assert_eq!(c.probability(f) > 0.5, f > 0.0);
        }
        assert!(c.b.abs() < 1e-9);
    }

    #[test]
    fn single_class_falls_back() {
        let c = fit_platt(&[0.3, 0.4], &[true, true]);
        assert_eq!(c, Calibrator { a: -1.0, b: 0.0 });
        assert_eq!(c.probability(0.0), 0.5);
    }

    #[test]
    fn probability_is_stable_for_large_inputs() {
        let c = Calibrator { a: -5.0, b: 0.0 };
        assert_eq!(c.probability(1e6), 1.0);
        assert_eq!(c.probability(-1e6), 0.0);
    }
}
