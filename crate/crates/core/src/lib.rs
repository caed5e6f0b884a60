//! Simulation of row-drop color-strip attacks on Bayer camera pipelines.

pub mod annotations;
pub mod attack;
pub mod batch;
pub mod cfa;
pub mod drops;
pub mod error;
pub mod ident;
pub mod metrics;
pub mod pnm;
pub mod report;

pub use attack::{apply_attack, simulate_attacked_rgb, Padding, PaddingStrategy};
pub use batch::{run_batch, BatchConfig, BatchOutcome, Sidecar};
pub use cfa::{channel_at, demosaic, mosaic, CfaPattern, Channel, RawImage, RgbImage};
pub use drops::{
    dropped_rows_from_positions, sample_drop_set, strip_count, strip_positions,
    strips_from_positions, validate_drop_set, DropSampler, DropSet, Strip, StripLayout,
};
pub use error::{Error, Result};
pub use report::EvalReport;
pub use ident::{
    detect_strip_edges, identify_dropped_rows, row_difference_profile, EdgeDetection,
    RowDifferenceProfile, ThresholdPolicy,
};
pub use annotations::{
    load_annotations, save_annotations, shift_annotation_set, shift_box, AnnotationSet, BoundingBox,
    DetectionSet, Shifted,
};
pub use metrics::{average_precision, iou, mean_ap, ssim, welch_t_test, MapVariant, SsimParams, TTestResult};
