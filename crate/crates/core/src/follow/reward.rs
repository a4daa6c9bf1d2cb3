use serde::{Deserialize, Serialize};

use super::pose2d::Pose2D;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    pub near_m: f64,
    pub far_m: f64,
    pub cone_half_angle_rad: f64,
    pub in_cone: f64,
    pub out_of_cone: f64,
    pub too_close: f64,
    /// Penalty per meter beyond `far_m`, capped at one meter.
    pub too_far_per_m: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            near_m: 1.0,
            far_m: 2.5,
            cone_half_angle_rad: 25f64.to_radians(),
            in_cone: 0.1,
            out_of_cone: -0.1,
            too_close: -0.3,
            too_far_per_m: -0.1,
        }
    }
}

impl RewardConfig {
    /// Robot within the distance band and inside the frontal cone.
    pub fn in_cone(&self, human: &Pose2D, robot: &Pose2D) -> bool {
        let (x, y) = human.to_local(robot);
        let d = x.hypot(y);
        d >= self.near_m && d <= self.far_m && y.atan2(x).abs() <= self.cone_half_angle_rad
    }

    pub fn reward(&self, human: &Pose2D, robot: &Pose2D) -> f64 {
        let d = human.distance(robot);
        if d < self.near_m {
            self.too_close
        } else if d > self.far_m {
            self.too_far_per_m * (d - self.far_m).min(1.0)
        } else if self.in_cone(human, robot) {
            self.in_cone
        } else {
            self.out_of_cone
        }
    }
}

/// Per-step reward under the default constants.
pub fn reward(human: &Pose2D, robot: &Pose2D) -> f64 {
    RewardConfig::default().reward(human, robot)
}
