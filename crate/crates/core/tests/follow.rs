use std::f64::consts::PI;
use std::sync::atomic::{AtomicUsize, Ordering};

use proptest::prelude::*;
use stpotr::data::{generate_synthetic, joint, MotionKind, PoseVec, Skeleton, TrajVec};
use stpotr::follow::*;
use stpotr::model::{Prediction, Predictor};
use stpotr::Error;
use stpotr_tensor::Execution;

fn prediction_of(frames: &[Skeleton]) -> Prediction {
    let (pose, traj) = frames.iter().map(Skeleton::decompose).unzip();
    Prediction { pose, traj }
}

fn walking_frames(kind: MotionKind, start: usize) -> Vec<Skeleton> {
    let seq = generate_synthetic(kind, 8.0, 3).unwrap();
    seq.frames[start..start + 20].to_vec()
}

fn hips_only(left: [f64; 2], right: [f64; 2]) -> Skeleton {
    let mut s = Skeleton::default();
    s.joints[joint::LEFT_HIP] = [left[0], left[1], 0.9];
    s.joints[joint::RIGHT_HIP] = [right[0], right[1], 0.9];
    s
}

#[test]
fn goal_lies_ahead_of_the_hip_line() {
    let pred = prediction_of(&[hips_only([0.0, 0.2], [0.0, -0.2])]);
    let (goal, source) = goal_from_prediction(&pred, 1.5, None).unwrap();
    assert_eq!(source, GoalSource::HipLine);
    assert!((goal.x - 1.5).abs() < 1e-15 && goal.y.abs() < 1e-15 && goal.theta.abs() < 1e-15);
}

#[test]
fn walking_goal_points_along_the_walk() {
    let pred = prediction_of(&walking_frames(MotionKind::StraightWalk, 10));
    let (goal, _) = goal_from_prediction(&pred, 1.5, None).unwrap();
    let hip = pred.traj[19];
    let heading = (hip[1] - pred.traj[0][1]).atan2(hip[0] - pred.traj[0][0]);
    assert!(normalize_angle(goal.theta - heading).abs() < 0.2, "{goal:?} vs {heading}");
    assert!(((goal.x - hip[0]).hypot(goal.y - hip[1]) - 1.5).abs() < 1e-12);
}

#[test]
fn backward_facing_normal_is_flipped_by_motion() {
    // hips labelled so the raw normal points to -x while the hip moves +x
    let frames: Vec<Skeleton> = (0..10)
        .map(|k| {
            let x = 0.1 * k as f64;
            let mut s = hips_only([x, -0.2], [x, 0.2]);
            s.joints[joint::HIP] = [x, 0.0, 0.9];
            s
        })
        .collect();
    let (goal, _) = goal_from_prediction(&prediction_of(&frames), 1.5, None).unwrap();
    assert!(goal.theta.abs() < 1e-12 && (goal.x - 2.4).abs() < 1e-12);
}

#[test]
fn stationary_human_keeps_previous_orientation() {
    let s = hips_only([0.0, -0.2], [0.0, 0.2]);
    let pred = prediction_of(&[s; 5]);
    let previous = Pose2D::new(1.0, 0.0, 0.1);
    let (goal, source) = goal_from_prediction(&pred, 1.5, Some(&previous)).unwrap();
    assert_eq!(source, GoalSource::HipLine);
    assert!(goal.theta.abs() < 1e-15 && (goal.x - 1.5).abs() < 1e-15);
}

#[test]
fn degenerate_hips_fall_back_then_recover() {
    let mut tracker = GoalTracker::new(1.5);
    // collapsed hips, hip moving along +y
    let moving: Vec<Skeleton> = (0..5)
        .map(|k| {
            let mut s = hips_only([0.0, 0.1 * k as f64], [0.0, 0.1 * k as f64]);
            s.joints[joint::HIP] = [0.0, 0.1 * k as f64, 0.9];
            s
        })
        .collect();
    let (g, src) = tracker.update(&prediction_of(&moving)).unwrap();
    assert_eq!(src, GoalSource::Displacement);
    assert!((g.theta - PI / 2.0).abs() < 1e-12 && (g.y - 1.9).abs() < 1e-12);

    // collapsed and still: reuse the previous goal
    let still = prediction_of(&[hips_only([0.0, 0.0], [0.0, 0.0]); 5]);
    let (g2, src) = tracker.update(&still).unwrap();
    assert_eq!(src, GoalSource::Previous);
    assert_eq!(g2, g);

    // normal hips again
    let (g3, src) = tracker.update(&prediction_of(&[hips_only([0.0, 0.2], [0.0, -0.2])])).unwrap();
    assert_eq!(src, GoalSource::HipLine);
    assert!((g3.x - 1.5).abs() < 1e-15);

    let err = goal_from_prediction(&still, 1.5, None).unwrap_err();
    assert!(matches!(err, Error::DegenerateGoal));
}

#[test]
fn empty_prediction_is_rejected() {
    let pred = Prediction {
        pose: vec![],
        traj: vec![],
    };
    assert!(matches!(goal_from_prediction(&pred, 1.5, None), Err(Error::Shape { .. })));
}

#[test]
fn stationary_goals_repeat() {
    let pred = prediction_of(&[hips_only([0.3, 0.2], [0.3, -0.2]); 20]);
    let mut tracker = GoalTracker::new(1.5);
    let a = tracker.update(&pred).unwrap();
    let b = tracker.update(&pred).unwrap();
    assert_eq!(a, b);
}

#[test]
fn reward_table() {
    let h = Pose2D::new(0.0, 0.0, 0.0);
    assert_eq!(reward(&h, &Pose2D::new(1.5, 0.0, 0.0)), 0.1);
    assert_eq!(reward(&h, &Pose2D::new(-1.5, 0.0, 0.0)), -0.1);
    assert_eq!(reward(&h, &Pose2D::new(0.5, 0.0, 0.0)), -0.3);
    assert!((reward(&h, &Pose2D::new(3.0, 0.0, 0.0)) + 0.05).abs() < 1e-15);
    assert_eq!(reward(&h, &Pose2D::new(10.0, 0.0, 0.0)), -0.1);
    let edge = 24.9f64.to_radians();
    assert_eq!(reward(&h, &Pose2D::new(2.0 * edge.cos(), 2.0 * edge.sin(), 0.0)), 0.1);
}

#[test]
fn controller_holds_at_goal_and_saturates() {
    let mut c = ProportionalController::default();
    let goal = Pose2D::new(0.0, 0.0, 0.3);
    let (v, w) = c.command(&Pose2D::new(0.05, 0.0, 0.3), &goal);
    assert_eq!((v, w), (0.0, 0.0));
    let (v, w) = c.command(&Pose2D::new(-10.0, 0.0, 0.0), &goal);
    assert_eq!(v, c.v_max);
    assert_eq!(w, 0.0);
    let (_, w) = c.command(&Pose2D::new(-10.0, 0.0, PI / 2.0), &goal);
    assert_eq!(w, -c.omega_max);
}

#[test]
fn unicycle_integration_follows_an_arc() {
    let p = integrate(&Pose2D::new(0.0, 0.0, 0.0), 1.0, PI / 2.0, 1.0);
    let r = 2.0 / PI;
    assert!((p.x - r).abs() < 1e-12 && (p.y - r).abs() < 1e-12 && (p.theta - PI / 2.0).abs() < 1e-12);
    let q = integrate(&Pose2D::new(1.0, 2.0, PI), 0.5, 0.0, 2.0);
    assert!((q.x - 0.0).abs() < 1e-12 && (q.y - 2.0).abs() < 1e-12);
}

#[test]
fn scenario_text_round_trips() {
    let cfg = ScenarioConfig {
        human_path: HumanPath::UShaped,
        robot_start: StartSide::Left,
        duration_s: 12.5,
        seed: 9,
        ..ScenarioConfig::default()
    };
    assert_eq!(ScenarioConfig::parse(&cfg.to_text()).unwrap(), cfg);
    let parsed = ScenarioConfig::parse("# comment\nhuman_path = s_shaped\n\nrobot_start=front # inline\n").unwrap();
    assert_eq!(parsed.human_path, HumanPath::SShaped);
    assert_eq!(parsed.robot_start, StartSide::Front);
    assert!(ScenarioConfig::parse("human_path = zigzag").is_err());
    assert!(ScenarioConfig::parse("ahead_distance_m = 0").is_err());
    assert!(ScenarioConfig::parse("speed").is_err());
    assert!(ScenarioConfig::parse("colour = red").is_err());
}

#[test]
fn zero_duration_gives_empty_log() {
    let cfg = ScenarioConfig {
        duration_s: 0.0,
        ..ScenarioConfig::default()
    };
    let r = simulate(&cfg, Forecaster::Oracle, &mut ProportionalController::default()).unwrap();
    assert!(r.log.is_empty());
    assert_eq!(r.total_reward(), 0.0);
}

#[test]
fn log_length_matches_rate() {
    let cfg = ScenarioConfig {
        duration_s: 7.3,
        ..ScenarioConfig::default()
    };
    let r = simulate(&cfg, Forecaster::Oracle, &mut ProportionalController::default()).unwrap();
    assert_eq!(r.log.len(), 73);
    assert_eq!(r.summary.steps, 73);
    let total: f64 = r.log.iter().map(|s| s.reward).sum();
    assert_eq!(total, r.total_reward());
}

#[test]
fn robot_at_goal_of_still_human_stays_put() {
    let cfg = ScenarioConfig {
        human_path: HumanPath::Straight,
        robot_start: StartSide::Front,
        human_speed_mps: 0.0,
        start_distance_m: 1.5,
        duration_s: 20.0,
        ..ScenarioConfig::default()
    };
    let r = simulate(&cfg, Forecaster::Oracle, &mut ProportionalController::default()).unwrap();
    let start = r.log[0].robot;
    let drift = r.log.iter().map(|s| s.robot.distance(&start)).fold(0.0, f64::max);
    assert!(drift < 0.1, "drift {drift}");
}

#[test]
fn oracle_behind_start_reaches_the_cone() {
    let cfg = ScenarioConfig::new(HumanPath::Straight, StartSide::Behind);
    let r = simulate(&cfg, Forecaster::Oracle, &mut ProportionalController::default()).unwrap();
    let rc = RewardConfig::default();
    let first = r.log.iter().position(|s| rc.in_cone(&s.human, &s.robot)).expect("never in cone");
    assert!(r.log[first].t <= 10.0, "entered at {}", r.log[first].t);
    let rest = &r.log[first..];
    let inside = rest.iter().filter(|s| rc.in_cone(&s.human, &s.robot)).count();
    assert!(inside as f64 >= 0.8 * rest.len() as f64);
    assert!(r.total_reward() > 0.0);
}

#[test]
fn oracle_matrix_keeps_distance_and_scores() {
    let cfgs = scenario_matrix(&HumanPath::ALL, &StartSide::ALL, &ScenarioConfig::default());
    assert_eq!(cfgs.len(), 16);
    let results = run_scenarios(&cfgs, Forecaster::Oracle, Execution::default());
    let mut positive = 0;
    for r in results {
        let r = r.unwrap();
        let min = r.summary.scenario.safety_radius_m - 0.2;
        assert!(r.summary.min_separation_m >= min, "{}", r.summary.scenario.name());
        positive += (r.total_reward() > 0.0) as usize;
    }
    assert!(positive >= 15, "{positive}");
}

#[test]
fn scenario_runs_are_deterministic_across_execution() {
    let cfgs = scenario_matrix(&[HumanPath::SShaped], &StartSide::ALL, &ScenarioConfig::default());
    let strip = |rs: Vec<stpotr::Result<ScenarioResult>>| -> Vec<Vec<StepLog>> {
        rs.into_iter().map(|r| r.unwrap().log).collect()
    };
    let a = strip(run_scenarios(&cfgs, Forecaster::Oracle, Execution::Sequential));
    let b = strip(run_scenarios(&cfgs, Forecaster::Oracle, Execution::Parallel));
    assert_eq!(a, b);
}

struct FailsAt(usize, AtomicUsize);

impl Predictor for FailsAt {
    fn predict(&self, pose: &[PoseVec], traj: &[TrajVec]) -> stpotr::Result<Prediction> {
        if self.1.fetch_add(1, Ordering::SeqCst) == self.0 {
            return Err(Error::InvalidConfig("boom".into()));
        }
        Ok(Prediction {
            pose: vec![pose[pose.len() - 1]; 20],
            traj: vec![traj[traj.len() - 1]; 20],
        })
    }
}

#[test]
fn predictor_failure_reports_the_step() {
    let p = FailsAt(7, AtomicUsize::new(0));
    let err = simulate(&ScenarioConfig::default(), Forecaster::Model(&p), &mut ProportionalController::default())
        .unwrap_err();
    assert!(matches!(err, Error::Predictor { step: 7, .. }), "{err}");
}

#[test]
fn results_write_csv_and_json() {
    let cfg = ScenarioConfig {
        duration_s: 1.0,
        ..ScenarioConfig::default()
    };
    let r = simulate(&cfg, Forecaster::Oracle, &mut ProportionalController::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    r.write(dir.path(), "run").unwrap();
    let csv = std::fs::read_to_string(dir.path().join("run.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,hx,hy,htheta,rx,ry,rtheta,gx,gy,gtheta,reward"));
    assert_eq!(lines.count(), 10);
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("run.json")).unwrap()).unwrap();
    assert_eq!(json["steps"], 10);
}

fn skeleton_strategy() -> impl Strategy<Value = (Vec<Skeleton>, f64, [f64; 2])> {
    (0usize..40, prop::sample::select(MotionKind::ALL.to_vec()), -PI..PI, -50.0..50.0f64, -50.0..50.0f64)
        .prop_map(|(start, kind, yaw, sx, sy)| (walking_frames(kind, start), yaw, [sx, sy]))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn goal_is_rigidly_equivariant((frames, yaw, shift) in skeleton_strategy()) {
        let pred = prediction_of(&frames);
        let moved: Vec<Skeleton> = frames.iter().map(|s| s.rigid_transform(yaw, [shift[0], shift[1], 0.0])).collect();
        let (g, _) = goal_from_prediction(&pred, 1.5, None).unwrap();
        let (h, _) = goal_from_prediction(&prediction_of(&moved), 1.5, None).unwrap();
        let expect = g.transformed(yaw, shift);
        prop_assert!(expect.distance(&h) < 1e-9);
        prop_assert!(normalize_angle(expect.theta - h.theta).abs() < 1e-9);
    }

    #[test]
    fn ahead_outscores_behind(d in 0.0..6.0f64, theta in -PI..PI, off in -0.4..0.4f64) {
        let h = Pose2D::new(0.0, 0.0, theta);
        let at = |a: f64| Pose2D::new(d * (theta + a).cos(), d * (theta + a).sin(), 0.0);
        let ahead = reward(&h, &at(off));
        let behind = reward(&h, &at(PI + off));
        if (1.0..=2.5).contains(&d) {
            prop_assert!(ahead > behind);
        } else {
            prop_assert!(ahead >= behind - 1e-12);
        }
    }

    #[test]
    fn normalized_angles_stay_in_range(a in -1e3..1e3f64) {
        let r = normalize_angle(a);
        prop_assert!(r > -PI && r <= PI);
        prop_assert!(((a - r) / (2.0 * PI)).round() * 2.0 * PI - (a - r) < 1e-9);
    }
}
