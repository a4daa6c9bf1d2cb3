use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stpotr::data::skeleton::snap_to_grid;
use stpotr::data::{window, MotionSequence, PoseVec, Skeleton, TrajVec};
use stpotr::evaluation::{ade, evaluate, fde, EvalOptions, EvalReport, LastFrameRepeat, LatencyStats};
use stpotr::model::{ModelConfig, Prediction, Predictor, StpotrModel};
use stpotr::{Error, Result};
use stpotr_tensor::Execution;

fn random_frames<const D: usize>(rng: &mut ChaCha8Rng, n: usize) -> Vec<[f64; D]> {
    (0..n).map(|_| std::array::from_fn(|_| rng.random_range(-2.0..2.0))).collect()
}

fn loop_ade(pred: &[f64], truth: &[f64], frames: usize, points: usize) -> (f64, f64) {
    let mut total = 0.0;
    let mut last = 0.0;
    for f in 0..frames {
        for p in 0..points {
            let mut sq = 0.0;
            for c in 0..3 {
                let i = (f * points + p) * 3 + c;
                sq += (pred[i] - truth[i]) * (pred[i] - truth[i]);
            }
            total += sq.sqrt();
            if f == frames - 1 {
                last += sq.sqrt();
            }
        }
    }
    (total / (frames * points) as f64, last / points as f64)
}

#[test]
fn metric_examples() {
    let truth = vec![[0.5; 48]; 20];
    assert_eq!(ade(&truth, &truth).unwrap(), 0.0);
    let shifted: Vec<PoseVec> = truth
        .iter()
        .map(|f| std::array::from_fn(|i| if i % 3 == 0 { f[i] + 0.3 } else { f[i] }))
        .collect();
    assert!((ade(&shifted, &truth).unwrap() - 0.3).abs() < 1e-15);

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut early: Vec<TrajVec> = random_frames(&mut rng, 20);
    let t: Vec<TrajVec> = random_frames(&mut rng, 20);
    early[19] = t[19];
    assert_eq!(fde(&early, &t).unwrap(), 0.0);
    let mut last = t.clone();
    last[19][1] += 0.5;
    assert!((fde(&last, &t).unwrap() - 0.5).abs() < 1e-15);
}

#[test]
fn metrics_match_triple_loops() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..20 {
        let p: Vec<PoseVec> = random_frames(&mut rng, 20);
        let t: Vec<PoseVec> = random_frames(&mut rng, 20);
        let flat = |v: &[PoseVec]| v.iter().flatten().copied().collect::<Vec<f64>>();
        let (a, f) = loop_ade(&flat(&p), &flat(&t), 20, 16);
        assert!((ade(&p, &t).unwrap() - a).abs() < 1e-12);
        assert!((fde(&p, &t).unwrap() - f).abs() < 1e-12);

        let p: Vec<TrajVec> = random_frames(&mut rng, 20);
        let t: Vec<TrajVec> = random_frames(&mut rng, 20);
        let flat = |v: &[TrajVec]| v.iter().flatten().copied().collect::<Vec<f64>>();
        let (a, f) = loop_ade(&flat(&p), &flat(&t), 20, 1);
        assert!((ade(&p, &t).unwrap() - a).abs() < 1e-12);
        assert!((fde(&p, &t).unwrap() - f).abs() < 1e-12);
    }
}

#[test]
fn metrics_are_translation_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        // grid coordinates: sums are exact, so the invariance is bitwise
        let snap = |v: Vec<PoseVec>| -> Vec<PoseVec> { v.into_iter().map(|f| f.map(snap_to_grid)).collect() };
        let p = snap(random_frames(&mut rng, 20));
        let t = snap(random_frames(&mut rng, 20));
        let shift: [f64; 3] = std::array::from_fn(|_| snap_to_grid(rng.random_range(-50.0..50.0)));
        let mv = |v: &[PoseVec]| -> Vec<PoseVec> {
            v.iter().map(|f| std::array::from_fn(|i| f[i] + shift[i % 3])).collect()
        };
        assert_eq!(ade(&mv(&p), &mv(&t)).unwrap(), ade(&p, &t).unwrap());
        assert_eq!(fde(&mv(&p), &mv(&t)).unwrap(), fde(&p, &t).unwrap());

        let p: Vec<PoseVec> = random_frames(&mut rng, 20);
        let t: Vec<PoseVec> = random_frames(&mut rng, 20);
        assert!((ade(&mv(&p), &mv(&t)).unwrap() - ade(&p, &t).unwrap()).abs() < 1e-12);
    }
}

#[test]
fn metric_relations_and_errors() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let p: Vec<PoseVec> = random_frames(&mut rng, 20);
    let t: Vec<PoseVec> = random_frames(&mut rng, 20);
    let worst = (0..20).map(|i| ade(&p[i..=i], &t[i..=i]).unwrap()).fold(0.0, f64::max);
    assert!(ade(&p, &t).unwrap() <= worst);
    assert!(fde(&p, &t).unwrap() >= 0.0);
    assert_eq!(ade(&p[..1], &t[..1]).unwrap(), fde(&p[..1], &t[..1]).unwrap());
    assert!(matches!(ade(&p[..3], &t[..4]), Err(Error::Shape { .. })));
    assert!(ade::<48>(&[], &[]).is_err());
}

/// Hip moving at constant velocity, body fixed.
fn constant_velocity_sequence(v: [f64; 2], frames: usize) -> MotionSequence {
    let frames = (0..frames)
        .map(|k| {
            let t = k as f64 / 10.0;
            let mut s = Skeleton::default();
            for (j, p) in s.joints.iter_mut().enumerate() {
                *p = [v[0] * t + 0.01 * j as f64, v[1] * t, 0.9 + 0.02 * j as f64];
            }
            s
        })
        .collect();
    MotionSequence::new(frames, 10.0).unwrap()
}

struct Perfect<'a> {
    answers: &'a [stpotr::data::MotionWindow],
}

impl Predictor for Perfect<'_> {
    fn predict(&self, input_pose: &[PoseVec], input_traj: &[TrajVec]) -> Result<Prediction> {
        let w = self
            .answers
            .iter()
            .find(|w| w.input_pose == input_pose && w.input_traj == input_traj)
            .unwrap();
        Ok(Prediction {
            pose: w.target_pose.clone(),
            traj: w.target_traj.clone(),
        })
    }
}

#[test]
fn perfect_predictor_scores_zero() {
    let windows = window(&constant_velocity_sequence([1.0, 0.0], 40), 3).unwrap();
    let r = evaluate(&Perfect { answers: &windows }, &windows, &EvalOptions::default()).unwrap();
    assert_eq!((r.ade_pose, r.fde_pose, r.ade_traj, r.fde_traj), (0.0, 0.0, 0.0, 0.0));
    assert_eq!(r.n_windows, windows.len());
}

#[test]
fn repeat_baseline_on_constant_velocity_has_closed_form_error() {
    let windows = window(&constant_velocity_sequence([0.8, 0.6], 60), 5).unwrap();
    let r = evaluate(&LastFrameRepeat::new(20), &windows, &EvalOptions::default()).unwrap();
    // mean over t = 1..20 of |v| * 0.1 * t with |v| = 1
    let expected = (1..=20).map(|t| 0.1 * t as f64).sum::<f64>() / 20.0;
    assert!((r.ade_traj - expected).abs() < 1e-12, "{} vs {expected}", r.ade_traj);
    assert!((r.fde_traj - 2.0).abs() < 1e-12);
    assert!(r.ade_pose < 1e-12);
}

#[test]
fn report_round_trips_and_renders() {
    let windows = window(&constant_velocity_sequence([1.0, 0.0], 40), 2).unwrap();
    let model = StpotrModel::new(ModelConfig::tiny(), 0).unwrap();
    let r = evaluate(&model, &windows, &EvalOptions::default()).unwrap();
    let back: EvalReport = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
    assert_eq!(back, r);
    let l = r.inference_ms;
    assert_eq!(l.samples, 20);
    assert!(l.min_ms >= 0.0 && l.p95_ms >= l.min_ms && l.mean_ms >= l.min_ms);
    let table = r.to_table();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].trim_start().starts_with("ADE_Pose"));
    assert_eq!(lines[0].len(), lines[1].len());

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    r.write_json(&path).unwrap();
    let again: EvalReport = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(again, r);
}

#[test]
fn latency_percentiles() {
    let s = LatencyStats::from_samples(&[5.0, 1.0, 3.0, 2.0, 4.0]);
    assert_eq!((s.min_ms, s.p95_ms, s.mean_ms), (1.0, 5.0, 3.0));
    let many: Vec<f64> = (1..=100).map(f64::from).collect();
    assert_eq!(LatencyStats::from_samples(&many).p95_ms, 95.0);
}

#[test]
fn sequential_and_parallel_agree() {
    let windows = window(&constant_velocity_sequence([0.5, 0.2], 60), 1).unwrap();
    let model = StpotrModel::new(ModelConfig::tiny(), 0).unwrap();
    let run = |execution| {
        let opts = EvalOptions {
            timed: 0,
            execution,
            ..EvalOptions::default()
        };
        evaluate(&model, &windows, &opts).unwrap()
    };
    let (a, b) = (run(Execution::Sequential), run(Execution::Parallel));
    assert_eq!((a.ade_pose, a.ade_traj, a.fde_traj), (b.ade_pose, b.ade_traj, b.fde_traj));
    assert_eq!(a, evaluate(&model, &windows, &EvalOptions { timed: 0, ..EvalOptions::default() }).unwrap());
}

#[test]
fn empty_window_list_is_an_error() {
    assert!(matches!(
        evaluate(&LastFrameRepeat::new(20), &[], &EvalOptions::default()),
        Err(Error::EmptyDataset)
    ));
}

mod properties {
    use proptest::prelude::*;
    use stpotr::data::skeleton::snap_to_grid;
    use stpotr::evaluation::{ade, fde};

    fn frames(n: usize) -> impl Strategy<Value = Vec<[f64; 3]>> {
        prop::collection::vec(prop::array::uniform3((-50.0..50.0f64).prop_map(snap_to_grid)), n)
    }

    fn pair() -> impl Strategy<Value = (Vec<[f64; 3]>, Vec<[f64; 3]>)> {
        (1usize..25).prop_flat_map(|n| (frames(n), frames(n)))
    }

    proptest! {
        #[test]
        fn metrics_are_nonnegative_symmetric_and_zero_on_identity((a, b) in pair()) {
            let d = ade(&a, &b).unwrap();
            prop_assert!(d >= 0.0);
            prop_assert_eq!(d, ade(&b, &a).unwrap());
            prop_assert_eq!(fde(&a, &b).unwrap(), fde(&b, &a).unwrap());
            prop_assert_eq!(ade(&a, &a).unwrap(), 0.0);
        }

        #[test]
        fn grid_translation_leaves_metrics_unchanged((a, b) in pair(), shift in prop::array::uniform3((-20.0..20.0f64).prop_map(snap_to_grid))) {
            let mv = |f: &[[f64; 3]]| -> Vec<[f64; 3]> {
                f.iter().map(|p| [p[0] + shift[0], p[1] + shift[1], p[2] + shift[2]]).collect()
            };
            prop_assert_eq!(ade(&mv(&a), &mv(&b)).unwrap(), ade(&a, &b).unwrap());
            prop_assert_eq!(fde(&mv(&a), &mv(&b)).unwrap(), fde(&a, &b).unwrap());
        }

        #[test]
        fn ade_lies_between_frame_extremes((a, b) in pair()) {
            let per: Vec<f64> = a.iter().zip(&b).map(|(p, q)| fde(&[*p], &[*q]).unwrap()).collect();
            let lo = per.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = per.iter().cloned().fold(0.0, f64::max);
            let d = ade(&a, &b).unwrap();
            prop_assert!(d >= lo - 1e-12 && d <= hi + 1e-12);
        }
    }
}
