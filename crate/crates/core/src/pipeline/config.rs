use serde::{Deserialize, Serialize};

use crate::classifier::{GammaGrid, GridSpec};
use crate::context::PlayerDims;
use crate::error::{Error, Result};
use crate::features::{FlowConfig, HogParams};
use crate::segmentation::{GmmConfig, LocalizeConfig};

/// Every tunable of a pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub seed: u64,
    /// Fraction of each class's tracklets used for training.
    pub split_ratio: f64,
    /// Every n-th interpolated frame of a tracklet becomes a sample.
    pub sample_stride: usize,
    pub hog: HogParams,
    pub flow: FlowConfig,
    pub gmm: GmmConfig,
    /// Pixels drawn for each color model.
    pub gmm_samples: usize,
    /// Training frames scanned for foreground pixels.
    pub gmm_frames: usize,
    /// Minimum dynamic similarity for a box pixel to count as foreground.
    pub dyn_threshold: f64,
    /// Frames entering the median background.
    pub background_frames: usize,
    pub localize: LocalizeConfig,
    pub player: PlayerDims,
    /// Grid-point spacing across and along the court.
    pub grid_spacing_x_m: f64,
    pub grid_spacing_y_m: f64,
    pub grid_bx: usize,
    pub grid_by: usize,
    pub stage1: GridSpec,
    /// Masks are filled in at run time from the stage-1 winner; an empty
    /// kernel list means the stage-1 winner's kernel family.
    pub stage2: GridSpec,
    /// Search every stage-1 mask plus AC instead of only the winner plus AC.
    pub stage2_full_search: bool,
    pub k: usize,
    pub k_sweep: Vec<usize>,
    pub cross_fit_folds: usize,
    pub calibration_folds: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            split_ratio: 0.5,
            sample_stride: 5,
            hog: HogParams {
                patch_w: 32,
                patch_h: 64,
                cell: 8,
                cells_per_block: 2,
                bins: 9,
            },
            flow: FlowConfig::default(),
            gmm: GmmConfig::default(),
            gmm_samples: 20_000,
            gmm_frames: 100,
            dyn_threshold: 0.1,
            background_frames: 61,
            localize: LocalizeConfig::default(),
            player: PlayerDims::default(),
            grid_spacing_x_m: 0.25,
            grid_spacing_y_m: 0.25,
            grid_bx: 11,
            grid_by: 20,
            stage1: GridSpec::default(),
            stage2: GridSpec {
                masks: Vec::new(),
                kernels: Vec::new(),
                costs: vec![0.1, 1.0, 10.0],
                gammas: GammaGrid::Relative(vec![0.25, 1.0, 4.0]),
                ..GridSpec::default()
            },
            stage2_full_search: false,
            k: 40,
            k_sweep: vec![10, 20, 40, 80],
            cross_fit_folds: 2,
            calibration_folds: 3,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::ConfigInvalid(m.into()));
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return bad("split ratio must lie in (0, 1)");
        }
        if self.sample_stride == 0 {
            return bad("sample stride must be >= 1");
        }
        if self.k == 0 || self.k_sweep.contains(&0) {
            return bad("AC window k must be >= 1");
        }
        if self.cross_fit_folds < 2 {
            return bad("cross-fitting needs at least 2 folds");
        }
        if self.background_frames < 3 || self.gmm_frames == 0 || self.gmm_samples == 0 {
            return bad("background and color models need samples");
        }
        self.hog.validate()?;
        let mut s1 = self.stage1.clone();
        s1.validate()?;
        s1 = self.stage2.clone();
        if s1.masks.is_empty() {
            s1.masks = self.stage1.masks.clone();
        }
        if s1.kernels.is_empty() {
            s1.kernels = self.stage1.kernels.clone();
        }
        s1.validate()
    }

    /// Largest AC window any step uses.
    pub fn max_k(&self) -> usize {
        self.k_sweep.iter().copied().chain([self.k]).max().unwrap_or(self.k)
    }
}
