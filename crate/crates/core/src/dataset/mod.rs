//! Dataset curation on precomputed sidecars: shot cuts from color
//! histograms, 5-15 s clip segmentation, skeleton quality rules, square
//! crop geometry and the clip manifest.

mod crop;
mod filter;
mod manifest;
mod shots;

pub use crop::{bbox_track, crop_and_resize, transform_keypoints, BBox, CropTransform, CROP_TARGET};
pub use filter::{filter_clip, FilterRules, RuleVerdict, Verdict, RULE_NAMES};
pub use manifest::{read_clip_manifest, write_clip_manifest, ClipManifest};
pub use shots::{
    chi2_distance, detect_shots, read_histograms, segment_clips, write_histograms, ColorHistogram,
    DEFAULT_SHOT_THRESHOLD, HIST_BINS, MAX_CLIP_SECS, MIN_CLIP_SECS,
};
