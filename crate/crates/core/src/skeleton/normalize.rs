use ndarray::{Array1, Array2, Axis};

use super::{LocalMotionSequence, POSE_DIM};
use crate::error::{Error, Result};
use crate::real::Real;

pub const STD_FLOOR: f64 = 1e-6;

/// Per-dimension corpus statistics of the local motion representation.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationStats<T> {
    pub mean: Array1<T>,
    pub std: Array1<T>,
}

impl<T: Real> NormalizationStats<T> {
    pub fn new(mean: Array1<T>, std: Array1<T>) -> Result<Self> {
        if mean.len() != std.len() {
            return Err(Error::dim("normalization stats", mean.len(), std.len()));
        }
        let floor = T::of(STD_FLOOR);
        Ok(Self { mean, std: std.mapv(|s| s.max(floor)) })
    }

    /// Zero mean, unit std; useful for untrained models.
    pub fn identity(dim: usize) -> Self {
        Self { mean: Array1::zeros(dim), std: Array1::ones(dim) }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn cast<U: Real>(&self) -> NormalizationStats<U> {
        NormalizationStats { mean: self.mean.mapv(|v| U::of(v.f64())), std: self.std.mapv(|v| U::of(v.f64())) }
    }
}

/// Mean and population std over every frame of every sequence.
///
/// Accumulates in `f64` with Welford's update regardless of `T`.
pub fn fit_normalization<T: Real>(corpus: &[LocalMotionSequence<T>]) -> Result<NormalizationStats<T>> {
    if corpus.is_empty() {
        return Err(Error::InvalidArgument("cannot fit normalization on an empty corpus".into()));
    }
    let mut count = 0.0f64;
    let mut mean = vec![0.0f64; POSE_DIM];
    let mut m2 = vec![0.0f64; POSE_DIM];
    for seq in corpus {
        if seq.values.ncols() != POSE_DIM {
            return Err(Error::dim("corpus sequence width", POSE_DIM, seq.values.ncols()));
        }
        for row in seq.values.rows() {
            count += 1.0;
            for (j, v) in row.iter().enumerate() {
                let x = v.f64();
                let delta = x - mean[j];
                mean[j] += delta / count;
                m2[j] += delta * (x - mean[j]);
            }
        }
    }
    let std: Array1<T> = m2.iter().map(|s| T::of((s / count).sqrt())).collect();
    NormalizationStats::new(mean.into_iter().map(T::of).collect(), std)
}

fn check<T: Real>(lm: &LocalMotionSequence<T>, stats: &NormalizationStats<T>) -> Result<()> {
    if lm.values.ncols() != stats.dim() {
        return Err(Error::dim("normalization", stats.dim(), lm.values.ncols()));
    }
    Ok(())
}

pub fn normalize<T: Real>(
    lm: &LocalMotionSequence<T>,
    stats: &NormalizationStats<T>,
) -> Result<LocalMotionSequence<T>> {
    check(lm, stats)?;
    Ok(LocalMotionSequence { values: normalize_rows(&lm.values, stats), root_map: lm.root_map })
}

pub fn denormalize<T: Real>(
    lm: &LocalMotionSequence<T>,
    stats: &NormalizationStats<T>,
) -> Result<LocalMotionSequence<T>> {
    check(lm, stats)?;
    let mut values = lm.values.clone();
    values *= &stats.std.view().insert_axis(Axis(0));
    values += &stats.mean.view().insert_axis(Axis(0));
    Ok(LocalMotionSequence { values, root_map: lm.root_map })
}

pub(crate) fn normalize_rows<T: Real>(values: &Array2<T>, stats: &NormalizationStats<T>) -> Array2<T> {
    let mut out = values - &stats.mean.view().insert_axis(Axis(0));
    out /= &stats.std.view().insert_axis(Axis(0));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skeleton::RootMap;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn lm(values: Array2<f64>) -> LocalMotionSequence<f64> {
        LocalMotionSequence::new(values, RootMap::default()).unwrap()
    }

    fn random_corpus(seed: u64) -> Vec<LocalMotionSequence<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..4)
            .map(|i| {
                lm(Array2::from_shape_fn((10 + i, POSE_DIM), |(_, j)| {
                    rng.random_range(-1.0..1.0) * (1.0 + j as f64 * 0.01) + 3.0
                }))
            })
            .collect()
    }

    #[test]
    fn identical_frames_hit_std_floor() {
        let row = Array2::from_shape_fn((5, POSE_DIM), |(_, j)| j as f64 * 0.1);
        let stats = fit_normalization(&[lm(row.clone())]).unwrap();
        for j in 0..POSE_DIM {
            assert!((stats.mean[j] - row[[0, j]]).abs() < 1e-12);
            assert_eq!(stats.std[j], STD_FLOOR);
        }
    }

    #[test]
    fn two_point_population_std() {
        let mut v = Array2::zeros((2, POSE_DIM));
        v[[1, 0]] = 2.0;
        let stats = fit_normalization(&[lm(v)]).unwrap();
        assert!((stats.mean[0] - 1.0).abs() < 1e-15);
        assert!((stats.std[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn matches_two_pass_oracle() {
        let corpus = random_corpus(3);
        let stats = fit_normalization(&corpus).unwrap();
        let rows: Vec<_> = corpus.iter().flat_map(|s| s.values.rows().into_iter()).collect();
        let n = rows.len() as f64;
        for j in 0..POSE_DIM {
            let mean = rows.iter().map(|r| r[j]).sum::<f64>() / n;
            let var = rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
            assert!((stats.mean[j] - mean).abs() < 1e-9);
            assert!((stats.std[j] - var.sqrt()).abs() < 1e-9);
        }
    }

    #[test]
    fn normalize_examples_and_roundtrip() {
        let corpus = random_corpus(11);
        let stats = fit_normalization(&corpus).unwrap();
        let mean_row = lm(stats.mean.clone().insert_axis(Axis(0)));
        assert!(normalize(&mean_row, &stats).unwrap().values.iter().all(|v| v.abs() < 1e-12));

        let back = denormalize(&normalize(&corpus[2], &stats).unwrap(), &stats).unwrap();
        let err = (&back.values - &corpus[2].values).mapv(f64::abs).fold(0.0, |a: f64, &b| a.max(b));
        assert!(err < 1e-9);

        let stats2 =
            NormalizationStats::new(Array1::from_elem(POSE_DIM, 1.0), Array1::from_elem(POSE_DIM, 2.0)).unwrap();
        let x = lm(Array2::from_elem((1, POSE_DIM), 3.0));
        assert!(normalize(&x, &stats2).unwrap().values.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn errors() {
        assert!(fit_normalization::<f64>(&[]).is_err());
        let stats = NormalizationStats::<f64>::identity(10);
        assert!(normalize(&lm(Array2::zeros((2, POSE_DIM))), &stats).is_err());
    }
}
