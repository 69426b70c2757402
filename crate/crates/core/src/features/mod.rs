//! Player-centered descriptors (HOG, HOF, RWPC) and feature-vector assembly.

mod flow;
mod hof;
mod hog;
mod vector;

pub use flow::{dense_flow, dense_flow_gray, FlowConfig, FlowField};
pub use hof::{hof, hof_cells, STILL_THRESHOLD};
pub use hog::{hog, hog_cells, HogParams};
pub use vector::{
    assemble, features_csv, BlockKind, BlockSet, BlockSpan, FeatureMask, FeatureVector, Layout, Normalizer,
};

use crate::error::Result;
use crate::geometry::{CourtModel, Homography, ImageRect};
use crate::raster::GrayImage;

/// Normalized court position of the box's bottom-center; not clamped, so
/// airborne players may fall outside [0, 1].
pub fn rwpc(h: &Homography, bbox: &ImageRect, court: &CourtModel) -> Result<[f64; 2]> {
    let q = h.project(bbox.bottom_center())?;
    let (u, v) = court.normalize(q);
    Ok([u, v])
}

/// HOG of `rect` resampled to the configured patch size.
pub fn hog_block(gray: &GrayImage, rect: &ImageRect, p: &HogParams) -> Result<Vec<f64>> {
    let patch = gray.resample(rect, p.patch_w, p.patch_h);
    hog(&patch, p)
}

/// HOF of the flow from `prev` to `cur` inside `rect`. Flow is computed on a
/// padded crop and then resampled to the patch size.
pub fn hof_block(
    prev: &GrayImage,
    cur: &GrayImage,
    rect: &ImageRect,
    p: &HogParams,
    cfg: &FlowConfig,
) -> Result<Vec<f64>> {
    let pad = cfg.window as f64;
    let x0 = (rect.x - pad).floor().max(0.0) as usize;
    let y0 = (rect.y - pad).floor().max(0.0) as usize;
    let x1 = ((rect.x + rect.w + pad).ceil() as usize).min(cur.width).max(x0 + 1);
    let y1 = ((rect.y + rect.h + pad).ceil() as usize).min(cur.height).max(y0 + 1);
    if x0 >= cur.width || y0 >= cur.height {
        return hof(&FlowField::zeros(p.patch_w, p.patch_h), p);
    }
    let crop = |img: &GrayImage| GrayImage::from_fn(x1 - x0, y1 - y0, |x, y| img.get(x + x0, y + y0));
    let flow = dense_flow_gray(&crop(prev), &crop(cur), cfg)?;
    let local = ImageRect::new(rect.x - x0 as f64, rect.y - y0 as f64, rect.w, rect.h);
    hof(&flow.resample(&local, p.patch_w, p.patch_h), p)
}
