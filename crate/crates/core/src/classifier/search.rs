//! Cross-validated grid search over feature masks, kernels and costs.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kernel::{GramMatrix, KernelKind, KernelSpec};
use super::metrics::ConfusionMatrix;
use super::multiclass::{argmax_class, ovr_decisions, stratified_group_folds, train_ovr, Sample};
use crate::activity::Activity;
use crate::error::{Error, Result};
use crate::features::{BlockKind, BlockSpan, FeatureMask, Layout, Normalizer};
use crate::provenance::Provenance;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaGrid {
    /// Multiples of `1 / (number of blocks in the mask)`.
    Relative(Vec<f64>),
    Absolute(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub masks: Vec<FeatureMask>,
    pub kernels: Vec<KernelKind>,
    pub costs: Vec<f64>,
    pub gammas: GammaGrid,
    pub folds: usize,
    pub tol: f64,
    pub class_weights: bool,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            masks: FeatureMask::stage1_combinations(),
            kernels: KernelKind::ALL.to_vec(),
            costs: vec![0.1, 1.0, 10.0],
            gammas: GammaGrid::Relative(vec![0.25, 1.0, 4.0]),
            folds: 3,
            tol: 1e-3,
            class_weights: false,
        }
    }
}

impl GridSpec {
    fn kernel_specs(&self, mask: FeatureMask) -> Vec<KernelSpec> {
        let blocks = mask.blocks().count().max(1) as f64;
        let gammas: Vec<f64> = match &self.gammas {
            GammaGrid::Relative(g) => g.iter().map(|v| v / blocks).collect(),
            GammaGrid::Absolute(g) => g.clone(),
        };
        let mut out = Vec::new();
        for &kind in &self.kernels {
            if kind.uses_gamma() {
                out.extend(gammas.iter().map(|&g| KernelSpec::family(kind, g)));
            } else {
                out.push(KernelSpec::linear());
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.masks.is_empty() || self.kernels.is_empty() || self.costs.is_empty() {
            return Err(Error::EmptyGrid);
        }
        let gammas = match &self.gammas {
            GammaGrid::Relative(g) | GammaGrid::Absolute(g) => g,
        };
        if gammas.is_empty() && self.kernels.iter().any(|k| k.uses_gamma()) {
            return Err(Error::EmptyGrid);
        }
        if self.masks.iter().any(|m| m.is_empty()) {
            return Err(Error::EmptyMask);
        }
        if self.costs.iter().any(|c| !(*c > 0.0)) || gammas.iter().any(|g| !(*g > 0.0)) {
            return Err(Error::ConfigInvalid("costs and gammas must be positive".into()));
        }
        if self.folds < 2 {
            return Err(Error::ConfigInvalid("cross-validation needs at least 2 folds".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub mask: FeatureMask,
    pub kernel: KernelSpec,
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub kernel: KernelKind,
    pub c: f64,
    pub gamma: f64,
    pub mask: FeatureMask,
    pub fold: usize,
    /// Macro-7 accuracy in percent.
    pub macro_acc: f64,
    pub macro5_acc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigSummary {
    pub config: SearchConfig,
    pub mean_macro7: f64,
    pub mean_macro5: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub rows: Vec<GridRow>,
    /// One entry per configuration, in enumeration order.
    pub summary: Vec<ConfigSummary>,
    pub best: SearchConfig,
    pub best_macro7: f64,
    /// Samples the search saw, across all folds.
    #[serde(default)]
    pub provenance: Provenance,
}

impl GridResult {
    /// `kernel,C,gamma,mask,fold,macro_acc`
    pub fn to_csv(&self) -> String {
        let mut s = String::from("kernel,C,gamma,mask,fold,macro_acc\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{:.6}",
                r.kernel, r.c, r.gamma, r.mask, r.fold, r.macro_acc
            );
        }
        s
    }

    /// Best mean macro-5 among configurations of one kernel family.
    pub fn best_macro5(&self, kind: KernelKind) -> Option<f64> {
        self.summary
            .iter()
            .filter(|s| s.config.kernel.kind == kind)
            .map(|s| s.mean_macro5)
            .max_by(f64::total_cmp)
    }
}

/// Block-balanced z-scored inner-product matrices, one per block.
pub struct BlockGrams {
    grams: BTreeMap<BlockKind, GramMatrix>,
}

impl BlockGrams {
    pub fn new(samples: &[Sample], blocks: &[BlockKind]) -> Result<Self> {
        let mut grams = BTreeMap::new();
        for &b in blocks {
            let rows = samples
                .iter()
                .map(|s| {
                    s.blocks
                        .get(b)
                        .map(Vec::as_slice)
                        .ok_or_else(|| Error::UnknownBlock(b.name().into()))
                })
                .collect::<Result<Vec<_>>>()?;
            let len = rows.first().map_or(0, |r| r.len());
            let layout = Layout(vec![BlockSpan {
                block: b,
                offset: 0,
                len,
            }]);
            let norm = Normalizer::fit_blocks(&rows, &layout)?;
            let x: Vec<Vec<f64>> = rows.iter().map(|r| norm.apply(r)).collect();
            grams.insert(b, GramMatrix::inner(&x));
        }
        Ok(BlockGrams { grams })
    }

    pub fn inner(&self, mask: FeatureMask) -> Result<GramMatrix> {
        let mut out: Option<GramMatrix> = None;
        for b in mask.blocks() {
            let g = self.grams.get(&b).ok_or_else(|| Error::UnknownBlock(b.name().into()))?;
            match out.as_mut() {
                None => out = Some(g.clone()),
                Some(o) => o.add_assign(g),
            }
        }
        out.ok_or(Error::EmptyMask)
    }
}

/// Stratified, tracklet-grouped k-fold search; CV predictions are the argmax
/// of the raw one-vs-rest decisions. The winner is the first configuration
/// with the highest mean macro-7 accuracy.
pub fn grid_search(samples: &[Sample], grid: &GridSpec, seed: u64) -> Result<GridResult> {
    grid.validate()?;
    if samples.is_empty() {
        return Err(Error::InsufficientData("grid search on an empty training set".into()));
    }
    let labels: Vec<Activity> = samples.iter().map(|s| s.label).collect();
    let groups: Vec<u32> = samples.iter().map(|s| s.tracklet).collect();
    let fold_of = stratified_group_folds(&labels, &groups, grid.folds, seed);
    let fold_idx: Vec<(Vec<usize>, Vec<usize>)> = (0..grid.folds)
        .map(|f| {
            let n = samples.len();
            (
                (0..n).filter(|&i| fold_of[i] != f).collect(),
                (0..n).filter(|&i| fold_of[i] == f).collect(),
            )
        })
        .collect();

    let mut used: Vec<BlockKind> = grid.masks.iter().flat_map(|m| m.blocks()).collect();
    used.sort();
    used.dedup();
    let grams = BlockGrams::new(samples, &used)?;

    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for &mask in &grid.masks {
        let inner = grams.inner(mask)?;
        let specs = grid.kernel_specs(mask);
        let per_spec: Vec<Vec<GridRow>> = specs
            .par_iter()
            .map(|spec| {
                let k = inner.kernel_from_inner(spec);
                let mut out = Vec::new();
                for &c in &grid.costs {
                    for (f, (tr, va)) in fold_idx.iter().enumerate() {
                        if tr.is_empty() || va.is_empty() {
                            continue;
                        }
                        let tl: Vec<Activity> = tr.iter().map(|&i| labels[i]).collect();
                        let sols = train_ovr(&k.submatrix(tr), &tl, c, grid.class_weights, grid.tol, seed)?;
                        let dec = ovr_decisions(&k.select(va, tr), tr.len(), &tl, &sols);
                        let pred: Vec<Activity> = dec.iter().map(argmax_class).collect();
                        let truth: Vec<Activity> = va.iter().map(|&i| labels[i]).collect();
                        let cm = ConfusionMatrix::from_pairs(&truth, &pred);
                        out.push(GridRow {
                            kernel: spec.kind,
                            c,
                            gamma: if spec.kind.uses_gamma() { spec.gamma } else { 0.0 },
                            mask,
                            fold: f,
                            macro_acc: cm.macro7(),
                            macro5_acc: cm.macro5(),
                        });
                    }
                }
                Ok(out)
            })
            .collect::<Result<_>>()?;
        for (spec, spec_rows) in specs.iter().zip(per_spec) {
            for &c in &grid.costs {
                let r: Vec<&GridRow> = spec_rows.iter().filter(|r| r.c == c).collect();
                if r.is_empty() {
                    continue;
                }
                let n = r.len() as f64;
                summary.push(ConfigSummary {
                    config: SearchConfig { mask, kernel: *spec, c },
                    mean_macro7: r.iter().map(|x| x.macro_acc).sum::<f64>() / n,
                    mean_macro5: r.iter().map(|x| x.macro5_acc).sum::<f64>() / n,
                });
            }
            rows.extend(spec_rows);
        }
    }
    let best = summary
        .iter()
        .fold(None::<&ConfigSummary>, |acc, s| match acc {
            Some(b) if b.mean_macro7 >= s.mean_macro7 => Some(b),
            _ => Some(s),
        })
        .ok_or(Error::EmptyGrid)?;
    Ok(GridResult {
        best: best.config,
        best_macro7: best.mean_macro7,
        rows,
        summary,
        provenance: Provenance::from_ids(samples.iter().map(|s| s.id)),
    })
}
