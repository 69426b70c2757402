//! One-vs-rest multiclass SVM with per-class sigmoid calibration.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kernel::{GramMatrix, KernelSpec};
use super::platt::{fit_platt, Calibrator};
use super::smo::{solve_dual, SmoSolution};
use crate::activity::Activity;
use crate::error::{Error, Result};
use crate::features::{assemble, BlockSet, FeatureMask, Layout, Normalizer};
use crate::provenance::Provenance;

/// One annotated training or test instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub id: u64,
    pub tracklet: u32,
    pub label: Activity,
    pub blocks: BlockSet,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub kernel: KernelSpec,
    pub c: f64,
    pub tol: f64,
    /// Per-class costs inverse to class frequency.
    pub class_weights: bool,
    /// Folds used to collect out-of-fold decisions for calibration.
    pub calibration_folds: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            kernel: KernelSpec::rbf(0.5),
            c: 1.0,
            tol: 1e-3,
            class_weights: false,
            calibration_folds: 3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Machine {
    pub class: Activity,
    /// Indices into the model's pooled support vectors.
    pub support: Vec<u32>,
    /// `alpha_i * y_i` aligned with `support`.
    pub dual_coef: Vec<f64>,
    pub bias: f64,
    pub calibrator: Calibrator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MulticlassModel {
    pub classes: Vec<Activity>,
    pub kernel: KernelSpec,
    pub c: f64,
    pub layout: Layout,
    pub layout_hash: String,
    pub normalizer: Normalizer,
    /// Normalized support vectors shared by all machines.
    pub support_vectors: Vec<Vec<f64>>,
    pub machines: Vec<Machine>,
    pub calibration_provenance: Provenance,
    pub training_provenance: Provenance,
}

/// Assigns every sample a fold so that whole groups stay together and each
/// class's groups are spread round-robin over the folds in seeded order.
pub fn stratified_group_folds(labels: &[Activity], groups: &[u32], folds: usize, seed: u64) -> Vec<usize> {
    let mut per_class: Vec<Vec<u32>> = vec![Vec::new(); Activity::COUNT];
    for (l, g) in labels.iter().zip(groups) {
        per_class[l.index()].push(*g);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of = std::collections::BTreeMap::new();
    let mut next = 0;
    for gs in per_class.iter_mut() {
        gs.sort_unstable();
        gs.dedup();
        gs.shuffle(&mut rng);
        for g in gs.iter() {
            fold_of.entry(*g).or_insert_with(|| {
                let f = next % folds.max(1);
                next += 1;
                f
            });
        }
    }
    groups.iter().map(|g| fold_of[g]).collect()
}

pub(crate) fn class_costs(labels: &[bool], c: f64, weighted: bool) -> Vec<f64> {
    if !weighted {
        return vec![c; labels.len()];
    }
    let n = labels.len() as f64;
    let pos = labels.iter().filter(|&&l| l).count() as f64;
    let (cp, cn) = (c * n / (2.0 * pos), c * n / (2.0 * (n - pos)));
    labels.iter().map(|&l| if l { cp } else { cn }).collect()
}

/// One-vs-rest solutions on a kernel matrix; `None` for classes that are
/// absent (or alone) in `labels`.
pub(crate) fn train_ovr(
    k: &GramMatrix,
    labels: &[Activity],
    c: f64,
    weighted: bool,
    tol: f64,
    seed: u64,
) -> Result<Vec<Option<SmoSolution>>> {
    Activity::ALL
        .par_iter()
        .map(|&a| {
            let pos: Vec<bool> = labels.iter().map(|&l| l == a).collect();
            if pos.iter().all(|&p| p) || !pos.iter().any(|&p| p) {
                return Ok(None);
            }
            let y: Vec<f64> = pos.iter().map(|&p| if p { 1.0 } else { -1.0 }).collect();
            let costs = class_costs(&pos, c, weighted);
            solve_dual(k, &y, &costs, tol, seed.wrapping_add(a.index() as u64)).map(Some)
        })
        .collect()
}

/// Decision values of `cross` rows (kernel values against the training
/// samples) for each machine; absent machines give `-inf`.
pub(crate) fn ovr_decisions(
    cross: &[f64],
    n_train: usize,
    labels: &[Activity],
    sols: &[Option<SmoSolution>],
) -> Vec<[f64; Activity::COUNT]> {
    cross
        .chunks(n_train)
        .map(|row| {
            let mut out = [f64::NEG_INFINITY; Activity::COUNT];
            for (a, sol) in sols.iter().enumerate() {
                if let Some(s) = sol {
                    let mut f = s.bias;
                    for (t, al) in s.alpha.iter().enumerate() {
                        if *al > 0.0 {
                            let y = if labels[t].index() == a { 1.0 } else { -1.0 };
                            f += al * y * row[t];
                        }
                    }
                    out[a] = f;
                }
            }
            out
        })
        .collect()
}

/// First maximum in class order.
pub fn argmax_class(v: &[f64; Activity::COUNT]) -> Activity {
    let mut best = 0;
    for i in 1..Activity::COUNT {
        if v[i] > v[best] {
            best = i;
        }
    }
    Activity::ALL[best]
}

pub fn train_multiclass(samples: &[Sample], mask: FeatureMask, cfg: &TrainConfig) -> Result<MulticlassModel> {
    cfg.kernel.validate()?;
    if !(cfg.c > 0.0) {
        return Err(Error::ConfigInvalid("cost C must be positive".into()));
    }
    for a in Activity::ALL {
        if !samples.iter().any(|s| s.label == a) {
            return Err(Error::MissingClass(a.name().to_string()));
        }
    }
    let vectors = samples
        .iter()
        .map(|s| assemble(&s.blocks, mask))
        .collect::<Result<Vec<_>>>()?;
    let layout = vectors[0].layout.clone();
    if let Some(v) = vectors.iter().find(|v| v.layout != layout) {
        return Err(Error::len(layout.len(), v.layout.len()));
    }
    let raw: Vec<&[f64]> = vectors.iter().map(|v| v.values.as_slice()).collect();
    let ids: Vec<u64> = samples.iter().map(|s| s.id).collect();
    let mut normalizer = Normalizer::fit_blocks(&raw, &layout)?;
    normalizer.provenance = Provenance::from_ids(ids.iter().copied());
    let x: Vec<Vec<f64>> = raw.iter().map(|v| normalizer.apply(v)).collect();
    let labels: Vec<Activity> = samples.iter().map(|s| s.label).collect();
    let groups: Vec<u32> = samples.iter().map(|s| s.tracklet).collect();

    let k = GramMatrix::compute(&cfg.kernel, &x);
    let full = train_ovr(&k, &labels, cfg.c, cfg.class_weights, cfg.tol, cfg.seed)?;
    let n = x.len();
    let all: Vec<usize> = (0..n).collect();
    let in_sample = ovr_decisions(&k.select(&all, &all), n, &labels, &full);

    // out-of-fold decisions; a fold whose training part lacks a class falls
    // back to in-sample decisions for that class
    let folds = cfg.calibration_folds.max(2);
    let fold_of = stratified_group_folds(&labels, &groups, folds, cfg.seed);
    let mut oof = in_sample.clone();
    let per_fold: Vec<(Vec<usize>, Vec<[f64; Activity::COUNT]>)> = (0..folds)
        .into_par_iter()
        .map(|f| {
            let tr: Vec<usize> = (0..n).filter(|&i| fold_of[i] != f).collect();
            let va: Vec<usize> = (0..n).filter(|&i| fold_of[i] == f).collect();
            if va.is_empty() || tr.is_empty() {
                return Ok((va, Vec::new()));
            }
            let tl: Vec<Activity> = tr.iter().map(|&i| labels[i]).collect();
            let sols = train_ovr(&k.submatrix(&tr), &tl, cfg.c, cfg.class_weights, cfg.tol, cfg.seed)?;
            let d = ovr_decisions(&k.select(&va, &tr), tr.len(), &tl, &sols);
            Ok((va, d))
        })
        .collect::<Result<_>>()?;
    for (va, d) in per_fold {
        for (i, row) in va.iter().zip(d) {
            for a in 0..Activity::COUNT {
                if row[a].is_finite() {
                    oof[*i][a] = row[a];
                }
            }
        }
    }

    let mut pooled: Vec<usize> = Vec::new();
    let mut slot = vec![u32::MAX; n];
    let mut machines = Vec::with_capacity(Activity::COUNT);
    for a in Activity::ALL {
        let sol = full[a.index()].as_ref().expect("every class is present");
        let (mut support, mut coef) = (Vec::new(), Vec::new());
        for (t, &al) in sol.alpha.iter().enumerate() {
            if al > 0.0 {
                if slot[t] == u32::MAX {
                    slot[t] = pooled.len() as u32;
                    pooled.push(t);
                }
                support.push(slot[t]);
                coef.push(if labels[t] == a { al } else { -al });
            }
        }
        let dec: Vec<f64> = oof.iter().map(|r| r[a.index()]).collect();
        let pos: Vec<bool> = labels.iter().map(|&l| l == a).collect();
        machines.push(Machine {
            class: a,
            support,
            dual_coef: coef,
            bias: sol.bias,
            calibrator: fit_platt(&dec, &pos),
        });
    }
    let provenance = Provenance::from_ids(ids.iter().copied());
    Ok(MulticlassModel {
        classes: Activity::ALL.to_vec(),
        kernel: cfg.kernel,
        c: cfg.c,
        layout_hash: layout.hash(),
        layout,
        normalizer,
        support_vectors: pooled.iter().map(|&t| x[t].clone()).collect(),
        machines,
        calibration_provenance: provenance.clone(),
        training_provenance: provenance,
    })
}

impl MulticlassModel {
    pub fn mask(&self) -> FeatureMask {
        self.layout.mask()
    }

    fn features(&self, blocks: &BlockSet) -> Result<Vec<f64>> {
        let v = assemble(blocks, self.mask())?;
        if v.layout != self.layout {
            return Err(Error::len(self.layout.len(), v.layout.len()));
        }
        Ok(self.normalizer.apply(&v.values))
    }

    /// Raw one-vs-rest decision values of an already normalized vector.
    pub fn decisions_normalized(&self, x: &[f64]) -> [f64; Activity::COUNT] {
        let kv: Vec<f64> = self.support_vectors.iter().map(|s| self.kernel.eval(s, x)).collect();
        let mut out = [0.0; Activity::COUNT];
        for (o, m) in out.iter_mut().zip(&self.machines) {
            *o = m.bias
                + m.support
                    .iter()
                    .zip(&m.dual_coef)
                    .map(|(&i, c)| c * kv[i as usize])
                    .sum::<f64>();
        }
        out
    }

    pub fn decisions(&self, blocks: &BlockSet) -> Result<[f64; Activity::COUNT]> {
        Ok(self.decisions_normalized(&self.features(blocks)?))
    }

    pub fn scores_from_decisions(&self, d: &[f64; Activity::COUNT]) -> [f64; Activity::COUNT] {
        let mut out = [0.0; Activity::COUNT];
        for ((o, m), f) in out.iter_mut().zip(&self.machines).zip(d) {
            *o = m.calibrator.probability(*f);
        }
        out
    }

    /// Calibrated per-class scores in class order.
    pub fn predict_scores(&self, blocks: &BlockSet) -> Result<[f64; Activity::COUNT]> {
        Ok(self.scores_from_decisions(&self.decisions(blocks)?))
    }

    pub fn predict_class(&self, blocks: &BlockSet) -> Result<Activity> {
        Ok(argmax_class(&self.predict_scores(blocks)?))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: MulticlassModel = serde_json::from_str(text)?;
        if m.layout.hash() != m.layout_hash || m.machines.len() != Activity::COUNT {
            return Err(Error::Format("model file is inconsistent".into()));
        }
        Ok(m)
    }
}
