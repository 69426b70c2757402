pub mod activity;
pub mod error;
pub mod geometry;
pub mod raster;

pub use activity::Activity;
pub use error::{Error, Result};
pub mod classifier;
pub mod context;
pub mod features;
pub mod pipeline;
pub mod provenance;
pub mod segmentation;
pub mod synthgen;
