//! Clip manifest: one tab-separated line per clip,
//!
//! ```text
//! clip_id  video_id  track  start  end  fps  accepted  verdicts  crop_x  crop_y  crop_side  crop_target
//! ```
//!
//! where `verdicts` is `rule=pass:value;rule=fail:value;...` and `end` is
//! exclusive. Clips without a crop write `-` in the four crop fields.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::ops::Range;
use std::path::Path;

use super::crop::CropTransform;
use super::filter::{RuleVerdict, Verdict};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ClipManifest {
    pub clip_id: String,
    pub video_id: String,
    /// Person track within the video's skeleton file.
    pub track: usize,
    pub frames: Range<usize>,
    pub fps: u32,
    pub verdict: Verdict,
}

impl ClipManifest {
    pub fn accepted(&self) -> bool {
        self.verdict.accepted()
    }

    fn to_line(&self) -> String {
        let verdicts: Vec<String> = self
            .verdict
            .rules
            .iter()
            .map(|(k, v)| format!("{k}={}:{}", if v.pass { "pass" } else { "fail" }, v.value))
            .collect();
        let crop = match &self.verdict.crop {
            Some(c) => format!("{}\t{}\t{}\t{}", c.origin[0], c.origin[1], c.side, c.target),
            None => "-\t-\t-\t-".into(),
        };
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.clip_id,
            self.video_id,
            self.track,
            self.frames.start,
            self.frames.end,
            self.fps,
            self.accepted(),
            verdicts.join(";"),
            crop
        )
    }

    fn parse(line: &str, path: &Path) -> Result<Self> {
        let bad = |reason: String| Error::format("clip manifest", path, reason);
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 12 {
            return Err(bad(format!("expected 12 fields, found {}", f.len())));
        }
        let track: usize = f[2].parse().map_err(|e| bad(format!("track: {e}")))?;
        let f = [&f[..2], &f[3..]].concat();
        let num = |s: &str, what: &str| s.parse::<f64>().map_err(|e| bad(format!("{what}: {e}")));
        let int = |s: &str, what: &str| s.parse::<usize>().map_err(|e| bad(format!("{what}: {e}")));
        let mut rules = BTreeMap::new();
        for item in f[6].split(';').filter(|s| !s.is_empty()) {
            let (name, rest) = item.split_once('=').ok_or_else(|| bad(format!("verdict {item:?}")))?;
            let (flag, value) = rest.split_once(':').ok_or_else(|| bad(format!("verdict {item:?}")))?;
            let pass = match flag {
                "pass" => true,
                "fail" => false,
                other => return Err(bad(format!("verdict flag {other:?}"))),
            };
            rules.insert(name.to_string(), RuleVerdict { pass, value: num(value, "verdict value")? });
        }
        let crop = if f[7] == "-" {
            None
        } else {
            Some(CropTransform {
                origin: [num(f[7], "crop_x")?, num(f[8], "crop_y")?],
                side: num(f[9], "crop_side")?,
                target: int(f[10], "crop_target")? as u32,
            })
        };
        let m = ClipManifest {
            clip_id: f[0].to_string(),
            video_id: f[1].to_string(),
            track,
            frames: int(f[2], "start")?..int(f[3], "end")?,
            fps: int(f[4], "fps")? as u32,
            verdict: Verdict { rules, crop },
        };
        if f[5] != m.accepted().to_string() {
            return Err(bad(format!("accepted flag {} disagrees with the verdicts", f[5])));
        }
        Ok(m)
    }
}

pub fn write_clip_manifest(path: &Path, clips: &[ClipManifest]) -> Result<()> {
    let mut text = String::new();
    for c in clips {
        let _ = writeln!(text, "{}", c.to_line());
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_clip_manifest(path: &Path) -> Result<Vec<ClipManifest>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines().filter(|l| !l.trim().is_empty()).map(|l| ClipManifest::parse(l, path)).collect()
}
