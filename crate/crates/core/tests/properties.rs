use manhattan_calib::deviation::DeviationMeasure;
use manhattan_calib::eval::{aggregate, fold_pan, pan_error, ErrorRecord};
use manhattan_calib::geometry::{
    fov_to_focal, focal_to_fov, frame_angle_error, vanishing_points, SymmetryGroup,
};
use manhattan_calib::likelihood::{objective, MixtureConfig};
use manhattan_calib::reliability::{
    fit_model, gate, ErrorTargets, FitOptions, ReliabilityCues, TrainingRow, Whitening,
};
use manhattan_calib::{CameraParams, EulerAngles, LineSegment, Rotation};
use nalgebra::{Matrix3, Vector3};
use proptest::collection::vec;
use proptest::prelude::*;

const W: u32 = 640;
const H: u32 = 480;

fn camera() -> impl Strategy<Value = CameraParams> {
    (-60.0..60.0, -20.0..20.0, -40.0..40.0, 40.0..140.0f64)
        .prop_map(|(p, r, t, f)| CameraParams::from_euler(&EulerAngles::new(p, r, t), f, W, H).unwrap())
}

fn segment() -> impl Strategy<Value = LineSegment> {
    (0.0..640.0, 0.0..480.0, 0.0..640.0, 0.0..480.0f64)
        .prop_filter("distinct endpoints", |(a, b, c, d): &(f64, f64, f64, f64)| (a - c).hypot(b - d) > 1.0)
        .prop_map(|(a, b, c, d)| LineSegment::new(a, b, c, d).unwrap())
}

fn measure() -> impl Strategy<Value = DeviationMeasure> {
    (0usize..5).prop_map(|i| DeviationMeasure::ALL[i])
}

fn record() -> impl Strategy<Value = ErrorRecord> {
    (0.0..10.0, 0.0..10.0, 0.0..45.0, 0.0..50.0, 0.0..50.0, 0.0..90.0f64).prop_map(|(a, b, c, d, e, f)| ErrorRecord {
        roll: a,
        tilt: b,
        pan: c,
        focal_pct: d,
        fov_pct: e,
        frame_deg: f,
    })
}

fn cues() -> impl Strategy<Value = ReliabilityCues> {
    (0usize..60, 0.0..3.0, -400.0..-10.0f64).prop_map(|(m, e, l)| ReliabilityCues {
        min_segments: m,
        grid_entropy: e,
        mean_loglik: l,
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 1000, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn fov_focal_round_trip(fov in 1.0..179.0f64, width in 16u32..4000) {
        let f = fov_to_focal(fov, width as f64).unwrap();
        prop_assert!((focal_to_fov(f, width as f64).unwrap() - fov).abs() < 1e-9);
    }

    #[test]
    fn vanishing_points_are_unit_and_consistent(cam in camera()) {
        let k = cam.intrinsics.matrix();
        for vp in vanishing_points(&cam) {
            prop_assert!((vp.homogeneous.norm() - 1.0).abs() < 1e-12);
            let projected = k * vp.direction;
            prop_assert!(projected.normalize().cross(&vp.homogeneous).norm() < 1e-9);
        }
    }

    #[test]
    fn frame_error_ignores_manhattan_relabelling(cam in camera(), pick in 0usize..8) {
        let s = SymmetryGroup::Gravity.elements()[pick];
        let relabelled = Rotation::from_matrix_unchecked(cam.rotation.matrix() * s);
        prop_assert!(frame_angle_error(&relabelled, &cam.rotation) < 1e-6);
    }

    #[test]
    fn frame_error_is_symmetric(a in camera(), b in camera()) {
        let d1 = frame_angle_error(&a.rotation, &b.rotation);
        let d2 = frame_angle_error(&b.rotation, &a.rotation);
        prop_assert!((d1 - d2).abs() < 1e-9);
    }

    #[test]
    fn deviations_ignore_endpoint_order(cam in camera(), seg in segment(), m in measure(), axis in 0usize..3) {
        let vp = vanishing_points(&cam)[axis];
        let a = m.evaluate(&seg, &vp, &cam.intrinsics);
        let b = m.evaluate(&seg.reversed(), &vp, &cam.intrinsics);
        prop_assert!((a.is_infinite() && b.is_infinite()) || (a - b).abs() <= 1e-9 * (1.0 + a.abs()), "{a} vs {b}");
    }

    #[test]
    fn deviations_are_non_negative_and_angles_bounded(cam in camera(), seg in segment(), m in measure(), axis in 0usize..3) {
        let d = m.evaluate(&seg, &vanishing_points(&cam)[axis], &cam.intrinsics);
        prop_assert!(d >= 0.0);
        if m.is_angular() {
            prop_assert!(d <= 90.0 + 1e-9);
        }
    }

    #[test]
    fn objective_ignores_segment_order(cam in camera(), segs in vec(segment(), 1..12), m in measure()) {
        let config = MixtureConfig::for_measure(m);
        let a = objective(&segs, &cam, &config).unwrap();
        let mut rev = segs.clone();
        rev.reverse();
        let b = objective(&rev, &cam, &config).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
    }

    #[test]
    fn pan_fold_is_idempotent_and_bounded(pan in -1000.0..1000.0f64) {
        let f = fold_pan(pan);
        prop_assert!(f > -45.0 && f <= 45.0);
        prop_assert_eq!(fold_pan(f), f);
        prop_assert!(((pan - f) / 90.0 - ((pan - f) / 90.0).round()).abs() < 1e-9);
    }

    #[test]
    fn pan_error_ignores_quarter_turns(a in -180.0..180.0f64, b in -180.0..180.0f64, turns in -4i32..4) {
        let e1 = pan_error(a, b);
        let e2 = pan_error(a + 90.0 * turns as f64, b);
        prop_assert!((e1 - e2).abs() < 1e-9);
        prop_assert!((0.0..=45.0).contains(&e1));
    }

    #[test]
    fn aggregate_is_permutation_invariant(records in vec(record(), 1..40), seed in any::<u64>()) {
        let mut shuffled = records.clone();
        let n = shuffled.len();
        // Deterministic Fisher–Yates driven by the proptest seed.
        let mut s = seed;
        for i in (1..n).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            shuffled.swap(i, (s >> 33) as usize % (i + 1));
        }
        let a = aggregate(&records).unwrap();
        let b = aggregate(&shuffled).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x.summary.mean - y.summary.mean).abs() < 1e-9);
            prop_assert!((x.summary.se - y.summary.se).abs() < 1e-9);
        }
    }

    #[test]
    fn gate_size_and_order(pred in vec(0.0..5.0f64, 1..80), fraction in 0.5..100.0f64) {
        let chosen = gate(&pred, fraction).unwrap();
        let want = ((fraction * pred.len() as f64 / 100.0) - 1e-9).ceil() as usize;
        prop_assert_eq!(chosen.len(), want.max(1));
        prop_assert!(chosen.windows(2).all(|w| w[0] < w[1]));
        let worst_in = chosen.iter().map(|&i| pred[i]).fold(f64::NEG_INFINITY, f64::max);
        let best_out = (0..pred.len()).filter(|i| !chosen.contains(i)).map(|i| pred[i]).fold(f64::INFINITY, f64::min);
        prop_assert!(worst_in <= best_out);
    }

    #[test]
    fn whitening_round_trip_and_moments(samples in vec((0.0..50.0, -5.0..5.0, -300.0..0.0f64), 10..60)) {
        let xs: Vec<[f64; 3]> = samples.iter().map(|&(a, b, c)| [a, b, c]).collect();
        let w = Whitening::fit(&xs).unwrap();
        let zs: Vec<Vector3<f64>> = xs.iter().map(|x| Vector3::from(w.apply(x))).collect();
        for (x, z) in xs.iter().zip(&zs) {
            let back = w.invert(&(*z).into());
            for i in 0..3 {
                prop_assert!((back[i] - x[i]).abs() < 1e-9 * (1.0 + x[i].abs()));
            }
        }
        let n = zs.len() as f64;
        let mean: Vector3<f64> = zs.iter().sum::<Vector3<f64>>() / n;
        let cov: Matrix3<f64> = zs.iter().map(|z| (z - mean) * (z - mean).transpose()).sum::<Matrix3<f64>>() / n;
        prop_assert!(mean.amax() < 1e-6);
        prop_assert!((cov - Matrix3::identity()).amax() < 1e-6);
    }

    #[test]
    fn prediction_invariant_to_affine_cue_maps(
        train in vec((cues(), 0.0..5.0, 0.0..5.0, 0.0..20.0f64), 12..30),
        query in cues(),
        a in prop_oneof![-3.0..-0.3, 0.3..3.0f64],
        b in -2.0..2.0f64,
        shift in -50.0..50.0f64,
    ) {
        // Mix entropy and log-likelihood with an invertible 2×2 map plus offset.
        let map = |c: &ReliabilityCues| ReliabilityCues {
            min_segments: c.min_segments,
            grid_entropy: a * c.grid_entropy + b * c.mean_loglik + shift,
            mean_loglik: c.mean_loglik - shift,
        };
        let rows: Vec<TrainingRow> = train
            .iter()
            .map(|(c, r, t, f)| TrainingRow { cues: *c, errors: ErrorTargets { roll: *r, tilt: *t, focal: *f } })
            .collect();
        let mapped: Vec<TrainingRow> = rows.iter().map(|r| TrainingRow { cues: map(&r.cues), errors: r.errors }).collect();
        let m1 = fit_model(&rows, &FitOptions::default()).unwrap();
        let m2 = fit_model(&mapped, &FitOptions::default()).unwrap();
        let p1 = m1.predict_with_k(&query, [3, 3, 3]).unwrap();
        let p2 = m2.predict_with_k(&map(&query), [3, 3, 3]).unwrap();
        for (x, y) in p1.as_array().iter().zip(p2.as_array()) {
            prop_assert!((x - y).abs() < 1e-9, "{x} vs {y}");
        }
    }
}
