use serde::{Deserialize, Serialize};

use super::pose2d::{normalize_angle, Pose2D};

/// Maps the robot pose and a goal to `(v, ω)`.
pub trait Controller {
    fn command(&mut self, robot: &Pose2D, goal: &Pose2D) -> (f64, f64);
}

/// Turn toward the goal and drive at a speed proportional to the remaining
/// distance; once there, align with the goal heading.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProportionalController {
    pub k_v: f64,
    pub k_omega: f64,
    pub v_max: f64,
    pub omega_max: f64,
    pub arrive_m: f64,
}

impl Default for ProportionalController {
    fn default() -> Self {
        Self {
            k_v: 0.8,
            k_omega: 2.0,
            v_max: 1.5,
            omega_max: 1.5,
            arrive_m: 0.1,
        }
    }
}

impl Controller for ProportionalController {
    fn command(&mut self, robot: &Pose2D, goal: &Pose2D) -> (f64, f64) {
        let dist = robot.distance(goal);
        let (v, err) = if dist < self.arrive_m {
            (0.0, normalize_angle(goal.theta - robot.theta))
        } else {
            let bearing = (goal.y - robot.y).atan2(goal.x - robot.x);
            let err = normalize_angle(bearing - robot.theta);
            ((self.k_v * dist).min(self.v_max) * err.cos().max(0.0), err)
        };
        (v, (self.k_omega * err).clamp(-self.omega_max, self.omega_max))
    }
}

/// Unicycle update over `dt` with constant commands.
pub fn integrate(pose: &Pose2D, v: f64, omega: f64, dt: f64) -> Pose2D {
    if omega.abs() < 1e-12 {
        let (s, c) = pose.theta.sin_cos();
        return Pose2D::new(pose.x + v * dt * c, pose.y + v * dt * s, pose.theta);
    }
    let th1 = pose.theta + omega * dt;
    let r = v / omega;
    Pose2D::new(
        pose.x + r * (th1.sin() - pose.theta.sin()),
        pose.y - r * (th1.cos() - pose.theta.cos()),
        th1,
    )
}
