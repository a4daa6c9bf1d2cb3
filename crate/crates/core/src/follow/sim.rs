use std::io::Write as _;
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use stpotr_tensor::Execution;

use super::controller::{integrate, Controller, ProportionalController};
use super::goal::GoalTracker;
use super::pose2d::Pose2D;
use super::reward::RewardConfig;
use super::scenario::ScenarioConfig;
use crate::data::synthetic::{BodyParams, MotionScript};
use crate::data::Skeleton;
use crate::error::{Error, Result};
use crate::evaluation::LatencyStats;
use crate::model::{Prediction, Predictor};

pub const CONTROL_HZ: f64 = 10.0;
const DT: f64 = 1.0 / CONTROL_HZ;
const OBSERVED: usize = 5;
const FORECAST: usize = 20;
/// Runs from this time on count as steady state.
pub const STEADY_STATE_S: f64 = 10.0;

/// Where forecasts come from.
#[derive(Clone, Copy)]
pub enum Forecaster<'a> {
    Model(&'a dyn Predictor),
    /// Ground-truth future of the scripted human.
    Oracle,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub t: f64,
    pub human: Pose2D,
    pub robot: Pose2D,
    pub goal: Pose2D,
    pub reward: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSummary {
    pub scenario: ScenarioConfig,
    pub steps: usize,
    pub total_reward: f64,
    pub min_separation_m: f64,
    pub in_cone_fraction: f64,
    pub steady_state_in_cone_fraction: f64,
    pub cycle_ms: LatencyStats,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub log: Vec<StepLog>,
    pub summary: ScenarioSummary,
}

impl ScenarioResult {
    pub fn total_reward(&self) -> f64 {
        self.summary.total_reward
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,hx,hy,htheta,rx,ry,rtheta,gx,gy,gtheta,reward\n");
        for s in &self.log {
            out.push_str(&format!(
                "{:.1},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.3}\n",
                s.t, s.human.x, s.human.y, s.human.theta, s.robot.x, s.robot.y, s.robot.theta, s.goal.x, s.goal.y,
                s.goal.theta, s.reward
            ));
        }
        out
    }

    /// Writes `<stem>.csv` and `<stem>.json` into `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        let csv = dir.join(format!("{stem}.csv"));
        let mut f = std::fs::File::create(&csv).map_err(|e| Error::io(&csv, e))?;
        f.write_all(self.to_csv().as_bytes()).map_err(|e| Error::io(&csv, e))?;
        let json = dir.join(format!("{stem}.json"));
        std::fs::write(&json, serde_json::to_string_pretty(&self.summary)?).map_err(|e| Error::io(&json, e))
    }
}

/// Scripted human for a scenario.
pub fn scripted_human(cfg: &ScenarioConfig) -> MotionScript {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let body = BodyParams {
        speed_mps: cfg.human_speed_mps,
        ..BodyParams::sample(&mut rng)
    };
    // paths are laid out a little past the run so turns finish inside it
    MotionScript::new(cfg.human_path.motion_kind(), body, cfg.duration_s)
}

fn human_pose(script: &MotionScript, t: f64) -> Pose2D {
    let g = script.ground_state(t);
    Pose2D::new(g.x, g.y, g.heading)
}

fn oracle_forecast(script: &MotionScript, t: f64) -> Prediction {
    let (pose, traj) = (1..=FORECAST)
        .map(|k| script.skeleton_at(t + k as f64 * DT).decompose())
        .unzip();
    Prediction { pose, traj }
}

fn model_forecast(p: &dyn Predictor, observed: &[Skeleton]) -> Result<Prediction> {
    let (pose, traj): (Vec<_>, Vec<_>) = observed.iter().map(Skeleton::decompose).unzip();
    p.predict(&pose, &traj)
}

/// Point to steer for instead of `goal` so the robot passes the human at
/// `clearance` rather than through them. When the straight line to the goal
/// cuts the clearance circle, the robot heads along the tangent to that
/// circle, out to the goal's range.
fn detour(robot: &Pose2D, goal: &Pose2D, human: &Pose2D, clearance: f64) -> Pose2D {
    let (gx, gy) = (goal.x - robot.x, goal.y - robot.y);
    let len = gx.hypot(gy);
    if len < 1e-9 {
        return *goal;
    }
    let (ux, uy) = (gx / len, gy / len);
    let (hx, hy) = (human.x - robot.x, human.y - robot.y);
    let along = hx * ux + hy * uy;
    let across = -hx * uy + hy * ux;
    // human not between robot and goal, or already clear of the segment
    if along <= 0.0 || along >= len || across.abs() >= clearance {
        return *goal;
    }
    // veer away from the side the human is on
    let side = if across > 0.0 { -1.0 } else { 1.0 };
    let dist = hx.hypot(hy);
    let dir = if dist > clearance {
        let a = hy.atan2(hx) + side * (clearance / dist).asin();
        (a.cos(), a.sin())
    } else {
        // inside the circle: move sideways
        (-uy * side, ux * side)
    };
    Pose2D::new(robot.x + len * dir.0, robot.y + len * dir.1, goal.theta)
}

/// Runs one scenario at 10 Hz.
pub fn simulate(
    cfg: &ScenarioConfig,
    forecaster: Forecaster<'_>,
    controller: &mut dyn Controller,
) -> Result<ScenarioResult> {
    cfg.validate()?;
    let script = scripted_human(cfg);
    let reward_cfg = RewardConfig {
        near_m: cfg.follow_near_m,
        far_m: cfg.follow_far_m,
        ..RewardConfig::default()
    };
    let steps = (cfg.duration_s * CONTROL_HZ).round() as usize;
    let start_human = human_pose(&script, 0.0);
    let b = start_human.theta + cfg.robot_start.bearing();
    let mut robot = Pose2D::new(
        start_human.x + cfg.start_distance_m * b.cos(),
        start_human.y + cfg.start_distance_m * b.sin(),
        start_human.theta,
    );
    let mut tracker = GoalTracker::new(cfg.ahead_distance_m);
    let mut observed: Vec<Skeleton> = (0..OBSERVED)
        .map(|k| script.skeleton_at((k as f64 - OBSERVED as f64) * DT))
        .collect();
    let mut log = Vec::with_capacity(steps);
    let mut cycle_ms = Vec::with_capacity(steps);
    let mut min_sep = f64::INFINITY;

    for step in 0..steps {
        let t = step as f64 * DT;
        observed.remove(0);
        observed.push(script.skeleton_at(t));
        let human = human_pose(&script, t);

        let started = Instant::now();
        let prediction = match forecaster {
            Forecaster::Oracle => oracle_forecast(&script, t),
            Forecaster::Model(p) => model_forecast(p, &observed).map_err(|e| Error::Predictor {
                step,
                source: Box::new(e),
            })?,
        };
        let (goal, _) = tracker.update(&prediction).map_err(|e| Error::Predictor {
            step,
            source: Box::new(e),
        })?;
        cycle_ms.push(started.elapsed().as_secs_f64() * 1e3);

        let sep = human.distance(&robot);
        min_sep = min_sep.min(sep);
        log.push(StepLog {
            t,
            human,
            robot,
            goal,
            reward: reward_cfg.reward(&human, &robot),
        });

        let target = if sep < cfg.safety_radius_m && sep > 1e-9 {
            // back out radially to the clearance circle
            let k = cfg.clearance_m / sep;
            Pose2D::new(
                human.x + k * (robot.x - human.x),
                human.y + k * (robot.y - human.y),
                goal.theta,
            )
        } else {
            detour(&robot, &goal, &human, cfg.clearance_m)
        };
        let (mut v, omega) = controller.command(&robot, &target);
        if sep < cfg.safety_radius_m {
            // no motion toward the person inside the safety radius
            let toward = (human.x - robot.x) * robot.theta.cos() + (human.y - robot.y) * robot.theta.sin();
            if toward > 0.0 {
                v = 0.0;
            }
        }
        robot = integrate(&robot, v, omega, DT);
    }

    let in_cone = |s: &&&StepLog| reward_cfg.in_cone(&s.human, &s.robot);
    let frac = |logs: Vec<&StepLog>| -> f64 {
        if logs.is_empty() {
            0.0
        } else {
            logs.iter().filter(in_cone).count() as f64 / logs.len() as f64
        }
    };
    let summary = ScenarioSummary {
        scenario: cfg.clone(),
        steps: log.len(),
        total_reward: log.iter().map(|s| s.reward).sum(),
        min_separation_m: if log.is_empty() { 0.0 } else { min_sep },
        in_cone_fraction: frac(log.iter().collect()),
        steady_state_in_cone_fraction: frac(log.iter().filter(|s| s.t >= STEADY_STATE_S - 1e-9).collect()),
        cycle_ms: LatencyStats::from_samples(&cycle_ms),
    };
    Ok(ScenarioResult { log, summary })
}

/// Runs every scenario with the default controller.
pub fn run_scenarios(
    configs: &[ScenarioConfig],
    forecaster: Forecaster<'_>,
    execution: Execution,
) -> Vec<Result<ScenarioResult>> {
    let run = |cfg: &ScenarioConfig| simulate(cfg, forecaster, &mut ProportionalController::default());
    match forecaster {
        Forecaster::Oracle => execution.map(configs, run),
        Forecaster::Model(_) => configs.iter().map(run).collect(),
    }
}
