//! Diagonal-covariance Gaussian mixtures over RGB, fitted by EM.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::provenance::Provenance;
use crate::raster::Frame;

use super::{MapKind, ProbabilityMap};

const VAR_FLOOR: f64 = 1e-6;
const COLLAPSE_WEIGHT: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColorRole {
    Foreground,
    Background,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianComponent {
    pub weight: f64,
    pub mean: [f64; 3],
    /// Covariance diagonal.
    pub var: [f64; 3],
}

impl GaussianComponent {
    fn log_norm(&self) -> f64 {
        -1.5 * (2.0 * PI).ln() - 0.5 * self.var.iter().map(|v| v.ln()).sum::<f64>()
    }

    fn log_density(&self, x: &[f64; 3]) -> f64 {
        let mut q = 0.0;
        for c in 0..3 {
            let d = x[c] - self.mean[c];
            q += d * d / self.var[c];
        }
        self.log_norm() - 0.5 * q
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColorModel {
    pub role: ColorRole,
    pub components: Vec<GaussianComponent>,
    #[serde(default)]
    pub provenance: Provenance,
}

impl ColorModel {
    pub fn density(&self, x: &[f64; 3]) -> f64 {
        self.components.iter().map(|c| c.weight * c.log_density(x).exp()).sum()
    }

    /// Mixture of each component's density at unit Mahalanobis distance.
    pub fn reference_density(&self) -> f64 {
        self.components
            .iter()
            .map(|c| c.weight * (c.log_norm() - 0.5).exp())
            .sum()
    }

    /// Density squashed to [0, 1] by d / (d + d0).
    pub fn probability(&self, x: &[f64; 3]) -> f64 {
        let d = self.density(x);
        d / (d + self.reference_density())
    }

    pub fn validate(&self) -> Result<()> {
        let total: f64 = self.components.iter().map(|c| c.weight).sum();
        let ok = !self.components.is_empty()
            && (total - 1.0).abs() <= 1e-9
            && self
                .components
                .iter()
                .all(|c| c.weight >= 0.0 && c.var.iter().all(|&v| v >= VAR_FLOOR && v.is_finite()));
        if ok {
            Ok(())
        } else {
            Err(Error::ConfigInvalid("invalid color model".into()))
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GmmConfig {
    pub components: usize,
    pub max_iter: usize,
    /// Stop once the mean per-sample log-likelihood changes by less than this.
    pub tol: f64,
}

impl Default for GmmConfig {
    fn default() -> Self {
        GmmConfig {
            components: 5,
            max_iter: 200,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GmmFit {
    pub model: ColorModel,
    /// Mean per-sample log-likelihood after each EM iteration.
    pub log_likelihood: Vec<f64>,
    pub iterations: usize,
}

fn sq_dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (0..3).map(|c| (a[c] - b[c]).powi(2)).sum()
}

fn kmeans_pp(pixels: &[[f64; 3]], k: usize, rng: &mut ChaCha8Rng) -> Vec<[f64; 3]> {
    let mut centers = vec![pixels[rng.random_range(0..pixels.len())]];
    let mut d2: Vec<f64> = pixels.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total <= 0.0 {
            rng.random_range(0..pixels.len())
        } else {
            let mut t = rng.random::<f64>() * total;
            let mut idx = pixels.len() - 1;
            for (i, &d) in d2.iter().enumerate() {
                if t < d {
                    idx = i;
                    break;
                }
                t -= d;
            }
            idx
        };
        let c = pixels[next];
        for (d, p) in d2.iter_mut().zip(pixels) {
            *d = d.min(sq_dist(p, &c));
        }
        centers.push(c);
    }
    centers
}

fn global_var(pixels: &[[f64; 3]]) -> [f64; 3] {
    let n = pixels.len() as f64;
    let mut mean = [0.0; 3];
    for p in pixels {
        for c in 0..3 {
            mean[c] += p[c] / n;
        }
    }
    let mut var = [0.0; 3];
    for p in pixels {
        for c in 0..3 {
            var[c] += (p[c] - mean[c]).powi(2) / n;
        }
    }
    var.map(|v| v.max(VAR_FLOOR))
}

/// E-step; fills `resp` (row-major n x k) and returns the mean log-likelihood.
fn e_step(pixels: &[[f64; 3]], comps: &[GaussianComponent], resp: &mut [f64]) -> f64 {
    let k = comps.len();
    let mut ll = 0.0;
    let mut logp = vec![0.0; k];
    for (i, p) in pixels.iter().enumerate() {
        let mut max = f64::NEG_INFINITY;
        for (j, c) in comps.iter().enumerate() {
            logp[j] = if c.weight > 0.0 {
                c.weight.ln() + c.log_density(p)
            } else {
                f64::NEG_INFINITY
            };
            max = max.max(logp[j]);
        }
        let s: f64 = logp.iter().map(|l| (l - max).exp()).sum();
        let lse = max + s.ln();
        ll += lse;
        for j in 0..k {
            resp[i * k + j] = (logp[j] - lse).exp();
        }
    }
    ll / pixels.len() as f64
}

fn m_step(pixels: &[[f64; 3]], resp: &[f64], comps: &mut [GaussianComponent]) {
    let k = comps.len();
    let n = pixels.len() as f64;
    for (j, comp) in comps.iter_mut().enumerate() {
        let nk: f64 = (0..pixels.len()).map(|i| resp[i * k + j]).sum();
        comp.weight = nk / n;
        if nk <= 0.0 {
            continue;
        }
        let mut mean = [0.0; 3];
        for (i, p) in pixels.iter().enumerate() {
            let r = resp[i * k + j];
            for c in 0..3 {
                mean[c] += r * p[c];
            }
        }
        mean = mean.map(|m| m / nk);
        let mut var = [0.0; 3];
        for (i, p) in pixels.iter().enumerate() {
            let r = resp[i * k + j];
            for c in 0..3 {
                var[c] += r * (p[c] - mean[c]).powi(2);
            }
        }
        comp.mean = mean;
        comp.var = var.map(|v| (v / nk).max(VAR_FLOOR));
    }
    let total: f64 = comps.iter().map(|c| c.weight).sum();
    for c in comps.iter_mut() {
        c.weight /= total;
    }
}

/// Fits a `cfg.components`-component mixture with k-means++ initialization.
pub fn fit_gmm(pixels: &[[f64; 3]], role: ColorRole, cfg: &GmmConfig, seed: u64) -> Result<GmmFit> {
    let k = cfg.components;
    if k == 0 {
        return Err(Error::ConfigInvalid("mixture needs at least one component".into()));
    }
    if pixels.len() < 10 * k {
        return Err(Error::InsufficientSamples {
            needed: 10 * k,
            got: pixels.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gvar = global_var(pixels);
    let centers = kmeans_pp(pixels, k, &mut rng);

    // hard assignment to the nearest center seeds the first M-step
    let mut resp = vec![0.0; pixels.len() * k];
    for (i, p) in pixels.iter().enumerate() {
        let j = (0..k)
            .min_by(|&a, &b| sq_dist(p, &centers[a]).total_cmp(&sq_dist(p, &centers[b])))
            .unwrap_or(0);
        resp[i * k + j] = 1.0;
    }
    let mut comps: Vec<GaussianComponent> = centers
        .iter()
        .map(|&mean| GaussianComponent {
            weight: 1.0 / k as f64,
            mean,
            var: gvar,
        })
        .collect();
    m_step(pixels, &resp, &mut comps);

    let mut reseeded = vec![false; k];
    let mut history = Vec::new();
    let mut prev = f64::NEG_INFINITY;
    let mut iterations = 0;
    while iterations < cfg.max_iter {
        iterations += 1;
        let ll = e_step(pixels, &comps, &mut resp);
        history.push(ll);
        m_step(pixels, &resp, &mut comps);

        if let Some(j) = comps.iter().position(|c| c.weight < COLLAPSE_WEIGHT) {
            if reseeded[j] {
                return Err(Error::DegenerateComponent(j));
            }
            reseeded[j] = true;
            // restart the component on the worst-explained sample
            let worst = pixels
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    let d: f64 = comps.iter().map(|c| c.weight * c.log_density(p).exp()).sum();
                    (i, d)
                })
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .map(|(i, _)| i)
                .unwrap_or(0);
            comps[j] = GaussianComponent {
                weight: 1.0 / k as f64,
                mean: pixels[worst],
                var: gvar,
            };
            let total: f64 = comps.iter().map(|c| c.weight).sum();
            for c in comps.iter_mut() {
                c.weight /= total;
            }
            prev = f64::NEG_INFINITY;
            continue;
        }
        if (ll - prev).abs() < cfg.tol {
            break;
        }
        prev = ll;
    }
    let model = ColorModel {
        role,
        components: comps,
        provenance: Provenance::default(),
    };
    model.validate()?;
    Ok(GmmFit {
        model,
        log_likelihood: history,
        iterations,
    })
}

/// Squashed mixture density of every pixel.
pub fn gmm_likelihood(model: &ColorModel, f: &Frame) -> ProbabilityMap {
    let d0 = model.reference_density();
    let consts: Vec<(f64, [f64; 3], [f64; 3])> = model
        .components
        .iter()
        .map(|c| (c.weight * c.log_norm().exp(), c.mean, c.var.map(|v| 0.5 / v)))
        .collect();
    let data = f
        .pixels()
        .iter()
        .map(|p| {
            let x = [p[0] as f64, p[1] as f64, p[2] as f64];
            let d: f64 = consts
                .iter()
                .map(|(a, m, iv)| {
                    let q: f64 = (0..3).map(|c| (x[c] - m[c]).powi(2) * iv[c]).sum();
                    a * (-q).exp()
                })
                .sum();
            d / (d + d0)
        })
        .collect();
    ProbabilityMap {
        width: f.width(),
        height: f.height(),
        kind: match model.role {
            ColorRole::Foreground => MapKind::Foreground,
            ColorRole::Background => MapKind::Background,
        },
        data,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    fn sample_gaussian(rng: &mut ChaCha8Rng, n: usize, mean: [f64; 3], sd: f64) -> Vec<[f64; 3]> {
        let nd = Normal::new(0.0, sd).unwrap();
        (0..n).map(|_| [0, 1, 2].map(|c| mean[c] + nd.sample(rng))).collect()
    }

    #[test]
    fn single_component_matches_sample_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let px = sample_gaussian(&mut rng, 500, [0.3, 0.5, 0.7], 0.05);
        let cfg = GmmConfig {
            components: 1,
            ..Default::default()
        };
        let fit = fit_gmm(&px, ColorRole::Foreground, &cfg, 3).unwrap();
        let n = px.len() as f64;
        let c = &fit.model.components[0];
        for ch in 0..3 {
            let mean = px.iter().map(|p| p[ch]).sum::<f64>() / n;
            let var = px.iter().map(|p| (p[ch] - mean).powi(2)).sum::<f64>() / n;
            assert!((c.mean[ch] - mean).abs() < 1e-6);
            assert!((c.var[ch] - var).abs() < 1e-6);
        }
        assert!((c.weight - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_clusters_recover_proportions() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut px = sample_gaussian(&mut rng, 700, [0.1, 0.1, 0.8], 0.03);
        px.extend(sample_gaussian(&mut rng, 300, [0.9, 0.6, 0.1], 0.03));
        let cfg = GmmConfig {
            components: 2,
            ..Default::default()
        };
        let fit = fit_gmm(&px, ColorRole::Background, &cfg, 5).unwrap();
        let mut w: Vec<f64> = fit.model.components.iter().map(|c| c.weight).collect();
        w.sort_by(f64::total_cmp);
        assert!((w[0] - 0.3).abs() < 0.02 && (w[1] - 0.7).abs() < 0.02, "{w:?}");
    }

    #[test]
    fn log_likelihood_is_monotone_and_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut px = sample_gaussian(&mut rng, 200, [0.2, 0.3, 0.4], 0.1);
        px.extend(sample_gaussian(&mut rng, 200, [0.6, 0.3, 0.2], 0.05));
        px.extend((0..100).map(|_| [rng.random(), rng.random(), rng.random()]));
        let cfg = GmmConfig::default();
        let a = fit_gmm(&px, ColorRole::Foreground, &cfg, 9).unwrap();
        for w in a.log_likelihood.windows(2) {
            assert!(w[1] >= w[0] - 1e-12, "{} -> {}", w[0], w[1]);
        }
        let b = fit_gmm(&px, ColorRole::Foreground, &cfg, 9).unwrap();
        assert_eq!(a.model, b.model);
        a.model.validate().unwrap();
    }

    #[test]
    fn too_few_samples() {
        let px = vec![[0.5; 3]; 49];
        assert!(matches!(
            fit_gmm(&px, ColorRole::Foreground, &GmmConfig::default(), 0),
            Err(Error::InsufficientSamples { needed: 50, got: 49 })
        ));
    }

    fn one_component() -> ColorModel {
        ColorModel {
            role: ColorRole::Foreground,
            components: vec![GaussianComponent {
                weight: 1.0,
                mean: [0.5, 0.25, 0.75],
                var: [0.01, 0.02, 0.005],
            }],
            provenance: Provenance::default(),
        }
    }

    #[test]
    fn likelihood_is_monotone_in_density() {
        let m = one_component();
        let at_mean = m.probability(&[0.5, 0.25, 0.75]);
        let far = m.probability(&[0.5 + 0.3, 0.25, 0.75]);
        assert!(at_mean > far);
        // unit Mahalanobis distance gives exactly one half
        let one_sd = m.probability(&[0.5 + 0.1, 0.25, 0.75]);
        assert!((one_sd - 0.5).abs() < 1e-12);
    }

    #[test]
    fn uniform_frame_gives_constant_map() {
        let m = one_component();
        let f = Frame::from_pixels(3, 2, vec![[0.5, 0.25, 0.75]; 6]).unwrap();
        let p = gmm_likelihood(&m, &f);
        assert_eq!(p.kind, MapKind::Foreground);
        assert!(p.data.iter().all(|&v| v == p.data[0]));
    }

    #[test]
    fn map_matches_direct_density() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut px = sample_gaussian(&mut rng, 300, [0.3, 0.3, 0.3], 0.1);
        px.extend(sample_gaussian(&mut rng, 300, [0.7, 0.2, 0.5], 0.1));
        let m = fit_gmm(
            &px,
            ColorRole::Background,
            &GmmConfig {
                components: 3,
                ..Default::default()
            },
            1,
        )
        .unwrap()
        .model;
        let pixels: Vec<[f32; 3]> = (0..40).map(|_| [rng.random(), rng.random(), rng.random()]).collect();
        let f = Frame::from_pixels(8, 5, pixels).unwrap();
        let map = gmm_likelihood(&m, &f);
        let d0: f64 = m
            .components
            .iter()
            .map(|c| c.weight * (-0.5f64).exp() / ((2.0 * PI).powf(1.5) * (c.var[0] * c.var[1] * c.var[2]).sqrt()))
            .sum();
        for (v, p) in map.data.iter().zip(f.pixels()) {
            let mut d = 0.0;
            for c in &m.components {
                let mut e = 0.0;
                for ch in 0..3 {
                    e += (p[ch] as f64 - c.mean[ch]).powi(2) / c.var[ch];
                }
                d += c.weight * (-0.5 * e).exp() / ((2.0 * PI).powf(1.5) * (c.var[0] * c.var[1] * c.var[2]).sqrt());
            }
            assert!((v - d / (d + d0)).abs() < 1e-9);
        }
    }

    #[test]
    fn json_round_trip() {
        let m = one_component();
        let back: ColorModel = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(back, m);
    }
}
