//! Pose maps: limbs on a black square canvas, COCO-WholeBody edge layout.
//!
//! Coordinates are normalized crop coordinates, so (0, 0) is the top-left
//! pixel corner and (1, 1) the bottom-right one.

use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::real::Real;
use crate::skeleton::{SkeletonFrame, SkeletonSequence, FACE, LEFT_HAND, NUM_KEYPOINTS, RIGHT_HAND};

pub const DEFAULT_CONF_THRESHOLD: f64 = 0.3;

/// Body and feet limbs.
pub const BODY_EDGES: [(usize, usize); 25] = [
    (15, 13),
    (13, 11),
    (16, 14),
    (14, 12),
    (11, 12),
    (5, 11),
    (6, 12),
    (5, 6),
    (5, 7),
    (6, 8),
    (7, 9),
    (8, 10),
    (1, 2),
    (0, 1),
    (0, 2),
    (1, 3),
    (2, 4),
    (3, 5),
    (4, 6),
    (15, 17),
    (15, 18),
    (15, 19),
    (16, 20),
    (16, 21),
    (16, 22),
];

/// Edges within one 21-point hand (0 is the wrist, then four joints per finger).
pub const HAND_EDGES: [(usize, usize); 20] = [
    (0, 1),
    (1, 2),
    (2, 3),
    (3, 4),
    (0, 5),
    (5, 6),
    (6, 7),
    (7, 8),
    (0, 9),
    (9, 10),
    (10, 11),
    (11, 12),
    (0, 13),
    (13, 14),
    (14, 15),
    (15, 16),
    (0, 17),
    (17, 18),
    (18, 19),
    (19, 20),
];

#[derive(Debug, Clone, PartialEq)]
pub struct RenderStyle {
    pub line_width: u32,
    /// Radius of keypoint dots; 0 draws none.
    pub point_radius: u32,
    pub conf_threshold: f64,
    pub background: [u8; 3],
    /// Cycled over body edges; hands use one color per finger from the same list.
    pub palette: Vec<[u8; 3]>,
    pub face_color: [u8; 3],
}

impl Default for RenderStyle {
    fn default() -> Self {
        let palette = (0..18)
            .map(|i| {
                let h = i as f64 / 18.0 * 6.0;
                let x = 1.0 - ((h % 2.0) - 1.0).abs();
                let (r, g, b) = match h as u32 {
                    0 => (1.0, x, 0.0),
                    1 => (x, 1.0, 0.0),
                    2 => (0.0, 1.0, x),
                    3 => (0.0, x, 1.0),
                    4 => (x, 0.0, 1.0),
                    _ => (1.0, 0.0, x),
                };
                [(r * 255.0) as u8, (g * 255.0) as u8, (b * 255.0) as u8]
            })
            .collect();
        Self {
            line_width: 3,
            point_radius: 2,
            conf_threshold: DEFAULT_CONF_THRESHOLD,
            background: [0, 0, 0],
            palette,
            face_color: [255, 255, 255],
        }
    }
}

struct Canvas {
    img: RgbImage,
    size: f64,
}

impl Canvas {
    fn put(&mut self, x: i64, y: i64, c: [u8; 3]) {
        if x >= 0 && y >= 0 && (x as u32) < self.img.width() && (y as u32) < self.img.height() {
            self.img.put_pixel(x as u32, y as u32, Rgb(c));
        }
    }

    fn disc(&mut self, x: f64, y: f64, radius: f64, c: [u8; 3]) {
        if radius <= 0.5 {
            self.put(x.round() as i64, y.round() as i64, c);
            return;
        }
        let r = radius.ceil() as i64;
        let (cx, cy) = (x.round() as i64, y.round() as i64);
        for dy in -r..=r {
            for dx in -r..=r {
                if ((dx * dx + dy * dy) as f64) <= radius * radius {
                    self.put(cx + dx, cy + dy, c);
                }
            }
        }
    }

    /// DDA line: max(|dx|, |dy|) + 1 stamps.
    fn line(&mut self, a: [f64; 2], b: [f64; 2], width: u32, c: [u8; 3]) {
        let (x0, y0) = (a[0] * self.size, a[1] * self.size);
        let (x1, y1) = (b[0] * self.size, b[1] * self.size);
        let n = (x1.round() - x0.round()).abs().max((y1.round() - y0.round()).abs()) as usize;
        let radius = width as f64 / 2.0;
        for i in 0..=n {
            let t = if n == 0 { 0.0 } else { i as f64 / n as f64 };
            let x = x0.round() + (x1.round() - x0.round()) * t;
            let y = y0.round() + (y1.round() - y0.round()) * t;
            self.disc(x, y, radius, c);
        }
    }
}

fn visible<T: Real>(frame: &SkeletonFrame<T>, i: usize, threshold: f64) -> Option<[f64; 2]> {
    let p = frame.coords.get(i)?;
    let c = frame.confidence.get(i)?.f64();
    (c >= threshold && p[0].is_finite() && p[1].is_finite()).then(|| [p[0].f64(), p[1].f64()])
}

/// Draws one frame. Whole-body frames (133 points) get body, hand and face
/// layers; 42-point frames are read as two hands; anything else as dots.
pub fn render_frame<T: Real>(frame: &SkeletonFrame<T>, canvas_size: u32, style: &RenderStyle) -> RgbImage {
    let mut canvas =
        Canvas { img: RgbImage::from_pixel(canvas_size, canvas_size, Rgb(style.background)), size: canvas_size as f64 };
    let th = style.conf_threshold;
    let color = |i: usize| -> [u8; 3] {
        if style.palette.is_empty() {
            [255, 255, 255]
        } else {
            style.palette[i % style.palette.len()]
        }
    };
    let mut edges: Vec<(usize, usize, [u8; 3])> = Vec::new();
    let mut dots: Vec<(usize, [u8; 3])> = Vec::new();
    let hand_bases: Vec<usize> = match frame.num_keypoints() {
        NUM_KEYPOINTS => {
            edges.extend(BODY_EDGES.iter().enumerate().map(|(k, &(a, b))| (a, b, color(k))));
            dots.extend((0..=22).map(|i| (i, color(i))));
            dots.extend(FACE.map(|i| (i, style.face_color)));
            vec![*LEFT_HAND.start(), *RIGHT_HAND.start()]
        }
        42 => vec![0, 21],
        k => {
            dots.extend((0..k).map(|i| (i, color(i))));
            Vec::new()
        }
    };
    for base in hand_bases {
        edges.extend(HAND_EDGES.iter().enumerate().map(|(k, &(a, b))| (base + a, base + b, color(3 * (k / 4)))));
        dots.extend((base..base + 21).map(|i| (i, [0, 0, 255])));
    }
    for (a, b, c) in edges {
        if let (Some(p), Some(q)) = (visible(frame, a, th), visible(frame, b, th)) {
            canvas.line(p, q, style.line_width, c);
        }
    }
    if style.point_radius > 0 {
        for (i, c) in dots {
            if let Some(p) = visible(frame, i, th) {
                canvas.disc(p[0] * canvas.size, p[1] * canvas.size, style.point_radius as f64, c);
            }
        }
    }
    canvas.img
}

pub fn render<T: Real>(seq: &SkeletonSequence<T>, canvas_size: u32, style: &RenderStyle) -> Vec<RgbImage> {
    seq.frames.par_iter().map(|f| render_frame(f, canvas_size, style)).collect()
}

/// Writes `frame_00000.png`, `frame_00001.png`, ... into `dir`.
pub fn write_frames(images: &[RgbImage], dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    images
        .iter()
        .enumerate()
        .map(|(i, img)| {
            let path = dir.join(format!("frame_{i:05}.png"));
            img.save(&path).map_err(|e| Error::Image { path: path.clone(), reason: e.to_string() })?;
            Ok(path)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hidden_frame() -> SkeletonFrame<f64> {
        SkeletonFrame { coords: vec![[0.5, 0.5]; NUM_KEYPOINTS], confidence: vec![0.0; NUM_KEYPOINTS] }
    }

    fn lit(img: &RgbImage) -> usize {
        img.pixels().filter(|p| p.0 != [0, 0, 0]).count()
    }

    #[test]
    fn zero_confidence_gives_blank_canvas() {
        let img = render_frame(&hidden_frame(), 64, &RenderStyle::default());
        assert_eq!(lit(&img), 0);
    }

    #[test]
    fn single_bone_pixel_count_matches_line_length() {
        let style = RenderStyle { line_width: 1, point_radius: 0, ..RenderStyle::default() };
        for (a, b) in [([0.1, 0.2], [0.8, 0.5]), ([0.5, 0.1], [0.45, 0.9]), ([0.2, 0.2], [0.7, 0.7])] {
            let mut f = hidden_frame();
            f.coords[5] = a;
            f.coords[7] = b;
            f.confidence[5] = 0.9;
            f.confidence[7] = 0.9;
            let size = 256.0;
            let expected = ((b[0] - a[0]) * size).abs().max(((b[1] - a[1]) * size).abs()) + 1.0;
            let count = lit(&render_frame(&f, 256, &style)) as f64;
            assert!((count - expected).abs() <= 0.1 * expected, "{count} vs {expected}");
        }
    }

    #[test]
    fn below_threshold_bones_are_omitted_and_rendering_is_deterministic() {
        let mut f = hidden_frame();
        f.coords[5] = [0.1, 0.1];
        f.coords[7] = [0.9, 0.9];
        f.confidence[5] = 0.9;
        f.confidence[7] = 0.29;
        let style = RenderStyle { point_radius: 0, ..RenderStyle::default() };
        assert_eq!(lit(&render_frame(&f, 64, &style)), 0);
        f.confidence[7] = 0.3;
        assert!(lit(&render_frame(&f, 64, &style)) > 0);
        let seq = SkeletonSequence { frames: vec![f.clone(), f], fps: 25 };
        assert_eq!(render(&seq, 64, &style), render(&seq, 64, &style));
    }
}
