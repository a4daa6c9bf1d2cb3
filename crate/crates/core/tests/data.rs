use proptest::prelude::*;
use stpotr::data::skeleton::{snap_to_grid, FRAME_DIM};
use stpotr::data::*;

fn skeleton_from(values: &[f64]) -> Skeleton {
    Skeleton::from_flat(values).unwrap()
}

fn grid_skeleton() -> impl Strategy<Value = Skeleton> {
    prop::collection::vec(-100.0..100.0f64, FRAME_DIM)
        .prop_map(|v| skeleton_from(&v.into_iter().map(snap_to_grid).collect::<Vec<_>>()))
}

fn any_skeleton() -> impl Strategy<Value = Skeleton> {
    prop::collection::vec(prop::num::f64::NORMAL.prop_map(|v| v % 1e6), FRAME_DIM).prop_map(|v| skeleton_from(&v))
}

fn sequence_of(len: usize) -> MotionSequence {
    let frames = (0..len)
        .map(|k| {
            let mut s = Skeleton::default();
            for (j, p) in s.joints.iter_mut().enumerate() {
                *p = [k as f64, j as f64, 0.5];
            }
            s
        })
        .collect();
    MotionSequence::new(frames, 10.0).unwrap()
}

proptest! {
    #[test]
    fn grid_round_trip_is_bitwise(s in grid_skeleton()) {
        let (pose, traj) = s.decompose();
        let back = Skeleton::compose(&pose, &traj);
        for (a, b) in back.to_flat().iter().zip(s.to_flat()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn round_trip_error_is_within_one_ulp(s in any_skeleton()) {
        let (pose, traj) = s.decompose();
        let back = Skeleton::compose(&pose, &traj);
        for j in 1..NUM_JOINTS {
            for k in 0..3 {
                let offset = pose[3 * (j - 1) + k];
                let ulp = f64::EPSILON * offset.abs().max(traj[k].abs()).max(s.joints[j][k].abs());
                prop_assert!((back.joints[j][k] - s.joints[j][k]).abs() <= ulp);
            }
        }
        prop_assert_eq!(back.hip(), s.hip());
    }

    #[test]
    fn window_count_matches_formula(len in 1usize..120, stride in 1usize..12) {
        let ws = window(&sequence_of(len), stride).unwrap();
        let expected = if len < 25 { 0 } else { (len - 25) / stride + 1 };
        prop_assert_eq!(ws.len(), expected);
    }

    #[test]
    fn windows_are_contiguous_slices(len in 25usize..80, stride in 1usize..7) {
        let seq = sequence_of(len);
        for (i, w) in window(&seq, stride).unwrap().iter().enumerate() {
            let start = i * stride;
            prop_assert_eq!(w.input_frames(), seq.frames[start..start + 5].to_vec());
            prop_assert_eq!(w.target_frames(), seq.frames[start + 5..start + 25].to_vec());
        }
    }

    #[test]
    fn motion_files_round_trip(frames in prop::collection::vec(any_skeleton(), 1..6), rate in 1.0..100.0f64) {
        let seq = MotionSequence::new(frames, rate).unwrap();
        prop_assert_eq!(parse_motion(&format_motion(&seq)).unwrap(), seq);
    }
}

#[test]
fn window_examples() {
    assert_eq!(window(&sequence_of(25), 1).unwrap().len(), 1);
    assert_eq!(window(&sequence_of(26), 1).unwrap().len(), 2);
    assert_eq!(window(&sequence_of(100), 5).unwrap().len(), 16);
    assert!(window(&sequence_of(24), 1).unwrap().is_empty());
    assert!(window(&sequence_of(30), 0).is_err());
}

#[test]
fn noise_has_the_requested_spread() {
    let seq = generate_synthetic(MotionKind::StraightWalk, 8.0, 1).unwrap();
    let clean = window(&seq, 1).unwrap();
    let mut diffs = Vec::new();
    let mut seed = 0;
    while diffs.len() < 100_000 {
        for w in &clean {
            let noisy = w.add_noise(0.01, seed).unwrap();
            seed += 1;
            assert_eq!(noisy.target_pose, w.target_pose);
            assert_eq!(noisy.target_traj, w.target_traj);
            for (a, b) in noisy.input_pose.iter().zip(&w.input_pose) {
                diffs.extend(a.iter().zip(b).map(|(x, y)| x - y));
            }
            for (a, b) in noisy.input_traj.iter().zip(&w.input_traj) {
                diffs.extend(a.iter().zip(b).map(|(x, y)| x - y));
            }
        }
    }
    let n = diffs.len() as f64;
    let mean = diffs.iter().sum::<f64>() / n;
    let std = (diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n).sqrt();
    assert!((std - 0.01).abs() < 0.0002, "std {std}");
    assert!(mean.abs() < 1e-4, "mean {mean}");
}

#[test]
fn noise_is_seeded() {
    let w = &window(&generate_synthetic(MotionKind::SitStand, 4.0, 2).unwrap(), 1).unwrap()[0];
    assert_eq!(w.add_noise(0.0, 5).unwrap(), *w);
    assert_eq!(w.add_noise(0.01, 5).unwrap(), w.add_noise(0.01, 5).unwrap());
    assert_ne!(w.add_noise(0.01, 5).unwrap(), w.add_noise(0.01, 6).unwrap());
    assert!(w.add_noise(-1.0, 5).is_err());
}

#[test]
fn synthetic_generators_are_deterministic_and_finite() {
    for kind in MotionKind::ALL {
        let a = generate_synthetic(kind, 6.0, 11).unwrap();
        assert_eq!(a, generate_synthetic(kind, 6.0, 11).unwrap(), "{kind}");
        assert_eq!(a.frame_rate_hz, 10.0);
        assert!(a.frames.iter().all(Skeleton::is_finite));
    }
}

#[test]
fn straight_walk_covers_ten_meters() {
    let seq = generate_synthetic(MotionKind::StraightWalk, 10.0, 4).unwrap();
    let (a, b) = (seq.frames[0].hip(), seq.frames.last().unwrap().hip());
    let d = (b[0] - a[0]).hypot(b[1] - a[1]);
    assert!((d - 10.0).abs() <= 0.5, "{d}");
}

#[test]
fn u_turn_reverses_heading() {
    let seq = generate_synthetic(MotionKind::UTurnWalk, 14.0, 4).unwrap();
    let h = |i: usize| {
        let (a, b) = (seq.frames[i].hip(), seq.frames[i + 1].hip());
        (b[1] - a[1]).atan2(b[0] - a[0])
    };
    let turn = stpotr::follow::normalize_angle(h(seq.len() - 2) - h(0)).abs();
    assert!((turn - std::f64::consts::PI).abs() < 15f64.to_radians(), "{turn}");
}

#[test]
fn stationary_frames_are_identical() {
    let seq = generate_synthetic(MotionKind::Stationary, 3.0, 8).unwrap();
    assert!(seq.frames.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn resampling_examples() {
    let seq = sequence_of(50);
    let fast = MotionSequence::new(seq.frames.clone(), 50.0).unwrap();
    let slow = fast.resample(10.0).unwrap();
    assert_eq!(slow.len(), 10);
    for (i, f) in slow.frames.iter().enumerate() {
        assert_eq!(*f, fast.frames[5 * i]);
    }
    assert_eq!(seq.resample(10.0).unwrap(), seq);
    assert!(seq.resample(20.0).is_err());
}
