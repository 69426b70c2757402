//! Dataset ingestion, the two-stage protocol and evaluation.

mod annotations;
mod config;
mod protocol;
mod report;
mod source;
mod store;

pub use annotations::{
    format_annotations, interpolate, load_annotations, parse_annotations, split_by_tracklet, tracklet_classes,
    write_annotations, AnnotationRecord, Split, ANNOTATION_HEADER,
};
pub use config::PipelineConfig;
pub use protocol::{
    ac_block, analyze, color_model_refs, evaluate_prepared, evaluate_trained, fit_segmenter, prepare, run, score_all,
    score_frames, select_samples, sweep_k, sweep_k_trained, train, train_config, train_stage1, train_stage2, with_ac,
    Analysis, DataSummary, Dataset, Evaluation, FrameData, FrameScores, KSweepRow, Prepared, RunResult, SampleRef,
    Segmenter, Stage1, Stage2, TrainedPipeline, View,
};
pub use report::{evaluate, ClassAccuracy, EvaluationReport};
pub use source::{DirSource, FrameSource};
pub use store::{k_sweep_csv, load_trained, save_trained, write_evaluation, write_k_sweep, write_run};
