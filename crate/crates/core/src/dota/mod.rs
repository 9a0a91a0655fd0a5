//! DOTA-v1.0 tooling: annotation files, patch planning, decoding of
//! center-point predictions, multi-scale merging and rotated mAP.

mod annotation;
mod decode;
mod eval;
mod files;
mod patch;

pub use annotation::{parse_annotation, parse_submission_line, DotaAnnotation, DotaCategory, DotaInstance};
pub use decode::{decode_predictions, merge_multiscale, DecodeParams, DecodedDetection, PredictionFields};
pub use eval::{average_precision, evaluate_map, ApInterpolation, EvalResult, ImagePredictions};
pub use files::{load_annotations, load_submissions, submission_category, write_results_csv};
pub use patch::{assign_instances, axis_origins, plan_patches, PatchConfig, PatchWindow, RETAIN_AREA_FRACTION};
