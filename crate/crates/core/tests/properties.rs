//! Property tests for the representation, audio, diffusion and metric
//! invariants.

mod common;

use gesture_skel::audio::{align_to_frames, AudioFeatureSequence};
use gesture_skel::diffusion::{cfg_combine, make_schedule, q_sample, standard_normal, x0_loss, ScheduleKind};
use gesture_skel::metrics::{pjpe, psnr_from_mse, ssim};
use gesture_skel::skeleton::{
    denormalize, normalize, smooth, LocalMotionSequence, NormalizationStats, RootMap, SkeletonFrame, SkeletonSequence,
    BODY, FACE, LEFT_HAND, MOUTH, NUM_KEYPOINTS, POSE_DIM, RIGHT_HAND,
};
use gesture_skel::trainer::drop_condition;
use ndarray::{Array1, Array2, Array3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{lcg_image, random_frame, random_sequence};

fn random_matrix(rows: usize, cols: usize, seed: u64, scale: f64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-scale..scale))
}

#[test]
fn every_index_belongs_to_exactly_one_group() {
    let roots = RootMap::default();
    for i in 0..NUM_KEYPOINTS {
        let groups = [BODY.contains(&i), FACE.contains(&i), LEFT_HAND.contains(&i), RIGHT_HAND.contains(&i)];
        assert_eq!(groups.iter().filter(|&&g| g).count(), 1, "keypoint {i}");
        let root = roots.group_root(i);
        assert_eq!(root.is_none(), BODY.contains(&i), "keypoint {i}");
        if let Some(r) = root {
            assert!(BODY.contains(&r), "root {r} of keypoint {i} is not a body keypoint");
        }
    }
}

#[test]
fn dropout_frequency_is_within_one_point_of_p() {
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let flagged = drop_condition(10_000, 0.1, &mut rng).iter().filter(|&&f| f).count();
        let rate = flagged as f64 / 10_000.0;
        assert!((rate - 0.1).abs() <= 0.01, "seed {seed}: rate {rate}");
    }
}

#[test]
fn q_sample_marginals_match_the_closed_form() {
    let sched = make_schedule(ScheduleKind::Cosine, 1000).unwrap();
    let x0 = Array2::from_elem((100, 100), 0.7);
    for (i, t) in [0usize, 250, 500, 999].into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(i as u64);
        let eps = standard_normal::<f64>(&mut rng, x0.dim());
        let xt = q_sample(&x0, t, &eps, &sched).unwrap();
        let mean = xt.mean().unwrap();
        let std = xt.std(0.0);
        let ab = sched.alpha_bar[t];
        assert!((mean - ab.sqrt() * 0.7).abs() < 0.05, "t={t}: mean {mean}");
        assert!((std - (1.0 - ab).sqrt()).abs() < 0.05, "t={t}: std {std}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn smoothing_fixes_constant_sequences(frames in 1usize..30, half in 0usize..6, seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let frame = random_frame(&mut rng);
        let seq = SkeletonSequence::new(vec![frame; frames]).unwrap();
        let out = smooth(&seq, 2 * half + 1, None).unwrap();
        for (a, b) in seq.frames.iter().zip(&out.frames) {
            for (p, q) in a.coords.iter().zip(&b.coords) {
                prop_assert!((p[0] - q[0]).abs() < 1e-12 && (p[1] - q[1]).abs() < 1e-12);
            }
            prop_assert_eq!(&a.confidence, &b.confidence);
        }
    }

    #[test]
    fn smoothing_never_touches_the_mouth(frames in 1usize..30, half in 0usize..6, seed in 0u64..1000) {
        let seq = random_sequence(frames, seed);
        let out = smooth(&seq, 2 * half + 1, None).unwrap();
        for (a, b) in seq.frames.iter().zip(&out.frames) {
            for k in MOUTH {
                prop_assert_eq!(a.coords[k][0].to_bits(), b.coords[k][0].to_bits());
                prop_assert_eq!(a.coords[k][1].to_bits(), b.coords[k][1].to_bits());
            }
        }
    }

    #[test]
    fn normalization_roundtrips(frames in 1usize..20, seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mean = Array1::from_shape_simple_fn(POSE_DIM, || rng.random_range(-2.0..2.0));
        let std = Array1::from_shape_simple_fn(POSE_DIM, || rng.random_range(1e-3..10.0));
        let stats = NormalizationStats::new(mean, std).unwrap();
        let lm = LocalMotionSequence::new(random_matrix(frames, POSE_DIM, seed, 3.0), RootMap::default()).unwrap();
        let back = denormalize(&normalize(&lm, &stats).unwrap(), &stats).unwrap();
        let err = (&back.values - &lm.values).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        prop_assert!(err < 1e-9, "max error {}", err);
    }

    #[test]
    fn alignment_has_requested_length_and_bounded_values(
        rows in 1usize..80,
        frames in 1usize..120,
        rate in prop_oneof![Just(25.0), Just(50.0), 10.0f64..100.0],
        seed in 0u64..1000,
    ) {
        let values = random_matrix(rows, 768, seed, 1.0);
        let feat = AudioFeatureSequence::new(values.clone(), rate).unwrap();
        let out = align_to_frames(&feat, frames).unwrap();
        prop_assert_eq!(out.values.dim(), (frames, 768));
        for (f, row) in out.values.rows().into_iter().enumerate() {
            let pos = (((f as f64 + 0.5) / 25.0) * rate - 0.5).clamp(0.0, (rows - 1) as f64);
            let (lo, hi) = (pos.floor() as usize, (pos.ceil() as usize).min(rows - 1));
            for (c, &v) in row.iter().enumerate() {
                let (a, b) = (values[[lo, c]], values[[hi, c]]);
                prop_assert!(v >= a.min(b) - 1e-12 && v <= a.max(b) + 1e-12);
            }
        }
    }

    #[test]
    fn alignment_of_aligned_features_is_identity(rows in 1usize..80, seed in 0u64..1000) {
        let values = random_matrix(rows, 768, seed, 1.0);
        let feat = AudioFeatureSequence::new(values.clone(), 25.0).unwrap();
        let out = align_to_frames(&feat, rows).unwrap();
        let err = (&out.values - &values).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        prop_assert!(err < 1e-6);
    }

    #[test]
    fn schedules_are_monotone_with_valid_betas(steps in 2usize..3000, linear in any::<bool>()) {
        let kind = if linear { ScheduleKind::Linear } else { ScheduleKind::Cosine };
        let sched = make_schedule(kind, steps).unwrap();
        prop_assert!(sched.beta.iter().all(|&b| b > 0.0 && b < 1.0));
        prop_assert!(sched.alpha_bar.windows(2).all(|w| w[1] < w[0]));
        if !linear && steps >= 100 {
            prop_assert!(sched.satisfies_endpoint_bounds());
        }
    }

    #[test]
    fn guidance_endpoints_are_exact(rows in 1usize..10, cols in 1usize..10, seed in 0u64..1000) {
        let u = random_matrix(rows, cols, seed, 5.0);
        let c = random_matrix(rows, cols, seed + 1, 5.0);
        let at_one = cfg_combine(&u, &c, 1.0).unwrap();
        let at_zero = cfg_combine(&u, &c, 0.0).unwrap();
        for ((a, b), (x, y)) in at_one.iter().zip(&c).zip(at_zero.iter().zip(&u)) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
            prop_assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn loss_is_nonnegative_and_zero_only_on_equal_inputs(
        rows in 1usize..8,
        cols in 1usize..8,
        seed in 0u64..1000,
        at in (0usize..64, 0usize..64),
        delta in prop_oneof![1e-6f64..1.0, -1.0f64..-1e-6],
    ) {
        let a = random_matrix(rows, cols, seed, 2.0);
        prop_assert_eq!(x0_loss(&a, &a).unwrap(), 0.0);
        let mut b = a.clone();
        b[[at.0 % rows, at.1 % cols]] += delta;
        prop_assert!(x0_loss(&a, &b).unwrap() > 0.0);
        let c = random_matrix(rows, cols, seed + 7, 2.0);
        prop_assert!(x0_loss(&a, &c).unwrap() >= 0.0);
    }

    #[test]
    fn ssim_is_symmetric_and_at_most_one(h in 11usize..20, w in 11usize..20, c in 1usize..4, seed in 1u64..1000, mix in 0.0f64..1.0) {
        let a = lcg_image(h, w, c, seed);
        let b: Array3<f64> = &a * mix + &lcg_image(h, w, c, seed + 1000) * (1.0 - mix);
        let ab = ssim(&a, &b).unwrap();
        let ba = ssim(&b, &a).unwrap();
        prop_assert!((ab - ba).abs() < 1e-9);
        prop_assert!(ab <= 1.0 + 1e-12);
        prop_assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn psnr_decreases_strictly_in_mse(a in 1e-9f64..1e3, factor in 1.0001f64..100.0) {
        prop_assert!(psnr_from_mse(a) > psnr_from_mse(a * factor));
    }

    #[test]
    fn pjpe_obeys_the_triangle_inequality(frames in 1usize..6, seed in 0u64..1000) {
        let a = random_sequence(frames, seed);
        let b = random_sequence(frames, seed + 1);
        let c = random_sequence(frames, seed + 2);
        let ac = pjpe(&a, &c).unwrap().overall;
        let ab = pjpe(&a, &b).unwrap().overall;
        let bc = pjpe(&b, &c).unwrap().overall;
        prop_assert!(ac <= ab + bc + 1e-9);
        prop_assert_eq!(pjpe(&a, &a).unwrap().overall, 0.0);
    }

    #[test]
    fn frames_reject_bad_confidence(k in 0usize..NUM_KEYPOINTS, c in prop_oneof![-1.0f64..-1e-9, 1.0f64 + 1e-9..2.0]) {
        let mut frame = SkeletonFrame::<f64>::uniform([0.5, 0.5]);
        frame.confidence[k] = c;
        prop_assert!(frame.validate().is_err());
    }
}
