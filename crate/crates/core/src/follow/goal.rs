use super::pose2d::Pose2D;
use crate::data::skeleton::{joint, Skeleton};
use crate::error::{Error, Result};
use crate::model::Prediction;

/// Hip segments and displacements shorter than this are degenerate.
pub const DEGENERATE_M: f64 = 0.01;
/// Frames of predicted hip motion used to orient the hip-line normal.
const DISPLACEMENT_FRAMES: usize = 5;
/// Hip travel over those frames below which the person counts as in place
/// and the normal keeps the previous orientation.
pub const WALKING_M: f64 = 0.15;

/// How a goal was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GoalSource {
    HipLine,
    Displacement,
    Previous,
}

fn unit(v: [f64; 2]) -> Option<[f64; 2]> {
    let n = v[0].hypot(v[1]);
    (n >= DEGENERATE_M).then(|| [v[0] / n, v[1] / n])
}

/// Goal `ahead_m` in front of the final predicted frame.
///
/// The facing direction is the ground-plane normal of the left→right hip
/// segment (the segment rotated by +90°), flipped when it opposes the
/// recent predicted hip motion. Without walking-pace motion the normal
/// closest to the previous goal heading wins.
pub fn goal_from_prediction(pred: &Prediction, ahead_m: f64, previous: Option<&Pose2D>) -> Result<(Pose2D, GoalSource)> {
    let n = pred.pose.len();
    if n == 0 || pred.traj.len() != n {
        return Err(Error::Shape {
            what: "prediction frames",
            expected: vec![n.max(1), n.max(1)],
            got: vec![pred.pose.len(), pred.traj.len()],
        });
    }
    let last = Skeleton::compose(&pred.pose[n - 1], &pred.traj[n - 1]);
    let hip = last.hip();
    let (l, r) = (last.joints[joint::LEFT_HIP], last.joints[joint::RIGHT_HIP]);
    let back = n - 1 - (n - 1).min(DISPLACEMENT_FRAMES);
    let recent = [hip[0] - pred.traj[back][0], hip[1] - pred.traj[back][1]];

    let heading = if let Some([dx, dy]) = unit([r[0] - l[0], r[1] - l[1]]) {
        let mut normal = [-dy, dx];
        let reference = if recent[0].hypot(recent[1]) >= WALKING_M {
            Some(recent)
        } else {
            previous.map(|p| [p.theta.cos(), p.theta.sin()])
        };
        if let Some(d) = reference {
            if normal[0] * d[0] + normal[1] * d[1] < 0.0 {
                normal = [-normal[0], -normal[1]];
            }
        }
        Some((normal, GoalSource::HipLine))
    } else {
        let first = pred.traj[0];
        unit([hip[0] - first[0], hip[1] - first[1]]).map(|d| (d, GoalSource::Displacement))
    };

    match heading {
        Some(([hx, hy], source)) => Ok((
            Pose2D::new(hip[0] + ahead_m * hx, hip[1] + ahead_m * hy, hy.atan2(hx)),
            source,
        )),
        None => previous.map(|p| (*p, GoalSource::Previous)).ok_or(Error::DegenerateGoal),
    }
}

/// Goal computation with memory of the last goal.
#[derive(Clone, Debug)]
pub struct GoalTracker {
    pub ahead_m: f64,
    previous: Option<Pose2D>,
}

impl GoalTracker {
    pub fn new(ahead_m: f64) -> Self {
        Self {
            ahead_m,
            previous: None,
        }
    }

    pub fn previous(&self) -> Option<&Pose2D> {
        self.previous.as_ref()
    }

    pub fn update(&mut self, pred: &Prediction) -> Result<(Pose2D, GoalSource)> {
        let out = goal_from_prediction(pred, self.ahead_m, self.previous.as_ref())?;
        self.previous = Some(out.0);
        Ok(out)
    }
}
