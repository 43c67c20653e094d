//! Paired image metrics and skeleton-space error.
//!
//! Images are `height × width × channels` arrays with unit dynamic range.

use std::path::Path;

use ndarray::{Array2, Array3, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::real::Real;
use crate::skeleton::SkeletonSequence;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_C1: f64 = 0.01 * 0.01;
pub const SSIM_C2: f64 = 0.03 * 0.03;
pub const PSNR_CAP: f64 = 100.0;

fn check_pair<T: Real>(a: &Array3<T>, b: &Array3<T>) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::dim("image pair", format!("{:?}", a.dim()), format!("{:?}", b.dim())));
    }
    if let Some(((r, c, ch), _)) = a.indexed_iter().chain(b.indexed_iter()).find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFinite { context: "image", location: format!("({r}, {c}, {ch})") });
    }
    Ok(())
}

fn gaussian_kernel() -> Vec<f64> {
    let r = (SSIM_WINDOW / 2) as f64;
    let w: Vec<f64> = (0..SSIM_WINDOW).map(|i| (-0.5 * ((i as f64 - r) / SSIM_SIGMA).powi(2)).exp()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// Separable filtering keeping only fully covered positions.
fn filter_valid(x: &ArrayView2<f64>, k: &[f64]) -> Array2<f64> {
    let (h, w) = x.dim();
    let n = k.len();
    let rows: Array2<f64> = Array2::from_shape_fn((h, w + 1 - n), |(i, j)| (0..n).map(|t| k[t] * x[[i, j + t]]).sum());
    Array2::from_shape_fn((h + 1 - n, w + 1 - n), |(i, j)| (0..n).map(|t| k[t] * rows[[i + t, j]]).sum())
}

/// Mean SSIM over all fully covered 11×11 Gaussian windows and channels.
pub fn ssim<T: Real>(a: &Array3<T>, b: &Array3<T>) -> Result<f64> {
    check_pair(a, b)?;
    let (h, w, c) = a.dim();
    if h < SSIM_WINDOW || w < SSIM_WINDOW || c == 0 {
        return Err(Error::InvalidArgument(format!(
            "ssim needs images of at least {SSIM_WINDOW}×{SSIM_WINDOW}, got {h}×{w}×{c}"
        )));
    }
    let k = gaussian_kernel();
    let mut total = 0.0;
    for ch in 0..c {
        let x = a.index_axis(Axis(2), ch).mapv(|v| v.f64());
        let y = b.index_axis(Axis(2), ch).mapv(|v| v.f64());
        let mx = filter_valid(&x.view(), &k);
        let my = filter_valid(&y.view(), &k);
        let mxx = filter_valid(&(&x * &x).view(), &k);
        let myy = filter_valid(&(&y * &y).view(), &k);
        let mxy = filter_valid(&(&x * &y).view(), &k);
        let mut sum = 0.0;
        for i in 0..mx.len() {
            let (ux, uy) = (mx.as_slice().unwrap()[i], my.as_slice().unwrap()[i]);
            let vx = mxx.as_slice().unwrap()[i] - ux * ux;
            let vy = myy.as_slice().unwrap()[i] - uy * uy;
            let cxy = mxy.as_slice().unwrap()[i] - ux * uy;
            sum += ((2.0 * ux * uy + SSIM_C1) * (2.0 * cxy + SSIM_C2))
                / ((ux * ux + uy * uy + SSIM_C1) * (vx + vy + SSIM_C2));
        }
        total += sum / mx.len() as f64;
    }
    Ok(total / c as f64)
}

pub fn mse<T: Real>(a: &Array3<T>, b: &Array3<T>) -> Result<f64> {
    check_pair(a, b)?;
    if a.is_empty() {
        return Err(Error::InvalidArgument("empty images".into()));
    }
    Ok(a.iter().zip(b.iter()).map(|(x, y)| (x.f64() - y.f64()).powi(2)).sum::<f64>() / a.len() as f64)
}

/// `10·log10(1 / MSE)`, capped at [`PSNR_CAP`].
pub fn psnr<T: Real>(a: &Array3<T>, b: &Array3<T>) -> Result<f64> {
    Ok(psnr_from_mse(mse(a, b)?))
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse <= 0.0 {
        PSNR_CAP
    } else {
        (10.0 * (1.0 / mse).log10()).min(PSNR_CAP)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointError {
    /// Mean Euclidean error per keypoint over frames.
    pub per_joint: Vec<f64>,
    /// Mean over keypoints.
    pub overall: f64,
}

pub fn pjpe<T: Real>(a: &SkeletonSequence<T>, b: &SkeletonSequence<T>) -> Result<JointError> {
    if a.len() != b.len() {
        return Err(Error::dim("sequence frames", a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(Error::InvalidArgument("pjpe of empty sequences".into()));
    }
    let k = a.num_keypoints();
    if b.num_keypoints() != k {
        return Err(Error::dim("keypoints", k, b.num_keypoints()));
    }
    let mut per_joint = vec![0.0; k];
    for (fa, fb) in a.frames.iter().zip(&b.frames) {
        if fa.coords.len() != k || fb.coords.len() != k {
            return Err(Error::dim("keypoints", k, fa.coords.len().max(fb.coords.len())));
        }
        for (acc, (p, q)) in per_joint.iter_mut().zip(fa.coords.iter().zip(&fb.coords)) {
            *acc += (p[0].f64() - q[0].f64()).hypot(p[1].f64() - q[1].f64());
        }
    }
    let n = a.len() as f64;
    per_joint.iter_mut().for_each(|v| *v /= n);
    let overall = per_joint.iter().sum::<f64>() / k.max(1) as f64;
    Ok(JointError { per_joint, overall })
}

/// Loads a raster as RGB with values in [0, 1].
pub fn load_image(path: &Path) -> Result<Array3<f64>> {
    let img =
        image::open(path).map_err(|e| Error::Image { path: path.to_path_buf(), reason: e.to_string() })?.to_rgb8();
    let (w, h) = img.dimensions();
    Ok(Array3::from_shape_fn((h as usize, w as usize, 3), |(y, x, c)| {
        img.get_pixel(x as u32, y as u32).0[c] as f64 / 255.0
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_is_normalized_and_symmetric() {
        let k = gaussian_kernel();
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        for i in 0..SSIM_WINDOW {
            assert_eq!(k[i], k[SSIM_WINDOW - 1 - i]);
        }
    }

    #[test]
    fn too_small_or_mismatched_images_error() {
        let a = Array3::<f64>::zeros((10, 20, 1));
        assert!(ssim(&a, &a).is_err());
        let b = Array3::<f64>::zeros((12, 12, 1));
        let c = Array3::<f64>::zeros((12, 13, 1));
        assert!(ssim(&b, &c).is_err());
        assert!(psnr(&b, &c).is_err());
    }
}
