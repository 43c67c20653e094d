use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::crop::{bbox_track, crop_and_resize, CropTransform};
use crate::error::{Error, Result};
use crate::real::Real;
use crate::skeleton::{
    shoulder_width, SkeletonSequence, LEFT_ELBOW, LEFT_SHOULDER, LEFT_WRIST, NOSE, RIGHT_ELBOW, RIGHT_SHOULDER,
    RIGHT_WRIST,
};

pub const RULE_NAMES: [&str; 4] = ["upper_body", "frontal_view", "figure_size", "motion"];

const UPPER_BODY: [usize; 7] = [NOSE, LEFT_SHOULDER, RIGHT_SHOULDER, LEFT_ELBOW, RIGHT_ELBOW, LEFT_WRIST, RIGHT_WRIST];

/// What figure height is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FigureReference {
    /// Side of the clip's square crop.
    Crop,
    /// Height of the source frame.
    Frame,
}

/// Thresholds for the clip quality rules (flat TOML, every key optional).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterRules {
    pub upper_body_conf: f64,
    pub upper_body_frame_fraction: f64,
    pub frontal_ratio: f64,
    pub nose_conf: f64,
    pub min_figure_height: f64,
    pub figure_reference: FigureReference,
    pub min_wrist_motion: f64,
    /// Keypoints below this confidence are ignored for boxes.
    pub bbox_conf: f64,
    pub crop_margin: f64,
    pub frame_width: f64,
    pub frame_height: f64,
    pub shot_threshold: f64,
    pub fps: u32,
    pub enabled: Vec<String>,
}

impl Default for FilterRules {
    fn default() -> Self {
        Self {
            upper_body_conf: 0.5,
            upper_body_frame_fraction: 0.95,
            frontal_ratio: 0.15,
            nose_conf: 0.5,
            min_figure_height: 0.3,
            figure_reference: FigureReference::Crop,
            min_wrist_motion: 1e-3,
            bbox_conf: 0.3,
            crop_margin: 0.1,
            frame_width: 1280.0,
            frame_height: 720.0,
            shot_threshold: super::DEFAULT_SHOT_THRESHOLD,
            fps: crate::skeleton::FPS,
            enabled: RULE_NAMES.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl FilterRules {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let rules: Self = toml::from_str(text).map_err(|e| Error::InvalidArgument(format!("filter rules: {e}")))?;
        if let Some(bad) = rules.enabled.iter().find(|r| !RULE_NAMES.contains(&r.as_str())) {
            return Err(Error::InvalidArgument(format!("unknown filter rule {bad:?}")));
        }
        Ok(rules)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("flat rules always serialize")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuleVerdict {
    pub pass: bool,
    pub value: f64,
}

impl RuleVerdict {
    /// Passes when the measured statistic reaches the threshold.
    pub fn at_least(value: f64, threshold: f64) -> Self {
        Self { pass: value >= threshold, value }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub rules: BTreeMap<String, RuleVerdict>,
    pub crop: Option<CropTransform>,
}

impl Verdict {
    pub fn accepted(&self) -> bool {
        self.rules.values().all(|r| r.pass)
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Evaluates the enabled rules. Coordinates are source pixels (any unit
/// works when `frame_width`/`frame_height` use the same one).
pub fn filter_clip<T: Real>(seq: &SkeletonSequence<T>, rules: &FilterRules) -> Verdict {
    let track = bbox_track(seq, rules.bbox_conf);
    let boxes: Vec<_> = track.iter().flatten().copied().collect();
    let crop = crop_and_resize(&boxes, rules.crop_margin, [rules.frame_width, rules.frame_height]).ok();
    let n = seq.len().max(1) as f64;
    let mut out = BTreeMap::new();
    for name in RULE_NAMES.iter().filter(|r| rules.enabled.iter().any(|e| e == *r)) {
        let verdict = match *name {
            "upper_body" => {
                let ok = seq
                    .frames
                    .iter()
                    .filter(|f| {
                        let c: f64 = UPPER_BODY.iter().map(|&i| f.confidence.get(i).map_or(0.0, |c| c.f64())).sum();
                        c / UPPER_BODY.len() as f64 >= rules.upper_body_conf
                    })
                    .count();
                RuleVerdict::at_least(ok as f64 / n, rules.upper_body_frame_fraction)
            }
            "frontal_view" => {
                let ratios: Vec<f64> = seq
                    .frames
                    .iter()
                    .zip(&track)
                    .filter_map(|(f, b)| b.filter(|b| b.height() > 0.0).map(|b| shoulder_width(f).f64() / b.height()))
                    .collect();
                let nose = seq.frames.iter().map(|f| f.confidence[NOSE].f64()).sum::<f64>() / n;
                let mut v = RuleVerdict::at_least(median(ratios), rules.frontal_ratio);
                v.pass &= nose >= rules.nose_conf;
                v
            }
            "figure_size" => {
                let reference = match (rules.figure_reference, &crop) {
                    (FigureReference::Crop, Some(c)) => c.side,
                    (FigureReference::Frame, _) => rules.frame_height,
                    (FigureReference::Crop, None) => f64::INFINITY,
                };
                let heights = track.iter().flatten().map(|b| b.height() / reference).collect();
                RuleVerdict::at_least(median(heights), rules.min_figure_height)
            }
            _ => {
                let motion = match &crop {
                    Some(c) if seq.len() > 1 => {
                        let total: f64 = seq
                            .frames
                            .windows(2)
                            .map(|w| {
                                [LEFT_WRIST, RIGHT_WRIST]
                                    .iter()
                                    .map(|&i| {
                                        let (a, b) = (w[0].coords[i], w[1].coords[i]);
                                        (a[0] - b[0]).f64().hypot((a[1] - b[1]).f64())
                                    })
                                    .sum::<f64>()
                                    / 2.0
                            })
                            .sum();
                        total / (seq.len() - 1) as f64 / c.side
                    }
                    _ => 0.0,
                };
                RuleVerdict::at_least(motion, rules.min_wrist_motion)
            }
        };
        out.insert(name.to_string(), verdict);
    }
    Verdict { rules: out, crop }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skeleton::SkeletonFrame;
    use crate::synthetic::{toy_clip, ToySpeaker};
    use proptest::prelude::*;

    /// Toy speaker placed in a 1280×720 frame.
    fn frontal(width: f64) -> SkeletonSequence<f64> {
        let clip = toy_clip::<f64>("f", &ToySpeaker::new(width), 50, 3);
        SkeletonSequence {
            frames: clip
                .skeleton
                .frames
                .iter()
                .map(|f| SkeletonFrame {
                    coords: f.coords.iter().map(|p| [300.0 + p[0] * 500.0, p[1] * 500.0]).collect(),
                    confidence: f.confidence.clone(),
                })
                .collect(),
            fps: 25,
        }
    }

    #[test]
    fn frontal_speaker_passes_everything() {
        let v = filter_clip(&frontal(0.25), &FilterRules::default());
        assert_eq!(v.rules.len(), 4);
        assert!(v.accepted(), "{v:?}");
    }

    #[test]
    fn zero_confidence_fails_upper_body() {
        let mut seq = frontal(0.25);
        for f in &mut seq.frames {
            f.confidence.iter_mut().for_each(|c| *c = 0.0);
        }
        let v = filter_clip(&seq, &FilterRules::default());
        assert!(!v.rules["upper_body"].pass);
        assert_eq!(v.rules["upper_body"].value, 0.0);
    }

    #[test]
    fn static_clip_fails_motion() {
        let mut seq = frontal(0.25);
        let first = seq.frames[0].clone();
        seq.frames.iter_mut().for_each(|f| *f = first.clone());
        let v = filter_clip(&seq, &FilterRules::default());
        assert!(!v.rules["motion"].pass);
        assert_eq!(v.rules["motion"].value, 0.0);
    }

    #[test]
    fn narrowed_shoulders_flip_frontal_rule() {
        let rules = FilterRules::default();
        let mut seq = frontal(0.25);
        assert!(filter_clip(&seq, &rules).rules["frontal_view"].pass);
        for f in &mut seq.frames {
            let mid = [(f.coords[5][0] + f.coords[6][0]) / 2.0, (f.coords[5][1] + f.coords[6][1]) / 2.0];
            for i in [5, 6] {
                f.coords[i] = [mid[0] + (f.coords[i][0] - mid[0]) / 5.0, mid[1] + (f.coords[i][1] - mid[1]) / 5.0];
            }
        }
        assert!(!filter_clip(&seq, &rules).rules["frontal_view"].pass);
    }

    #[test]
    fn tiny_figure_fails_against_frame_height() {
        let rules = FilterRules { figure_reference: FigureReference::Frame, ..FilterRules::default() };
        let mut seq = frontal(0.25);
        assert!(filter_clip(&seq, &rules).rules["figure_size"].pass);
        for f in &mut seq.frames {
            f.coords.iter_mut().for_each(|p| *p = [p[0] * 0.2, p[1] * 0.2]);
        }
        assert!(!filter_clip(&seq, &rules).rules["figure_size"].pass);
    }

    #[test]
    fn rules_file_parsing() {
        let r = FilterRules::from_toml_str("frontal_ratio = 0.2\nenabled = [\"motion\"]\n").unwrap();
        assert_eq!(r.frontal_ratio, 0.2);
        assert_eq!(filter_clip(&frontal(0.25), &r).rules.keys().collect::<Vec<_>>(), vec!["motion"]);
        assert!(FilterRules::from_toml_str("enabled = [\"bogus\"]").is_err());
        assert!(FilterRules::from_toml_str("nonsense = 1").is_err());
    }

    proptest! {
        #[test]
        fn rules_are_monotone_in_their_statistic(v in -1.0f64..2.0, dv in 0.0f64..1.0, t in -1.0f64..2.0) {
            prop_assert!(!RuleVerdict::at_least(v, t).pass || RuleVerdict::at_least(v + dv, t).pass);
        }

        #[test]
        fn larger_motion_never_flips_motion_rule(gain in 1.0f64..4.0) {
            let rules = FilterRules::default();
            let base = frontal(0.25);
            let mut amplified = base.clone();
            let anchor = base.frames[0].coords.clone();
            for f in &mut amplified.frames {
                for i in [LEFT_WRIST, RIGHT_WRIST] {
                    let p = f.coords[i];
                    f.coords[i] = [anchor[i][0] + gain * (p[0] - anchor[i][0]), anchor[i][1] + gain * (p[1] - anchor[i][1])];
                }
            }
            let a = filter_clip(&base, &rules).rules["motion"];
            let b = filter_clip(&amplified, &rules).rules["motion"];
            prop_assert!(!a.pass || b.pass);
        }
    }
}
