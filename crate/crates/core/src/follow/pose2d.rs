use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

/// Wraps an angle to `(-π, π]`.
pub fn normalize_angle(a: f64) -> f64 {
    let mut r = a % TAU;
    if r <= -PI {
        r += TAU;
    } else if r > PI {
        r -= TAU;
    }
    r
}

/// Ground-plane position and heading.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: normalize_angle(theta),
        }
    }

    pub fn distance(&self, other: &Pose2D) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// `other`'s position in this pose's frame (x forward, y left).
    pub fn to_local(&self, other: &Pose2D) -> (f64, f64) {
        let (dx, dy) = (other.x - self.x, other.y - self.y);
        let (s, c) = self.theta.sin_cos();
        (c * dx + s * dy, -s * dx + c * dy)
    }

    /// Rotation by `yaw` about the origin followed by a shift.
    pub fn transformed(&self, yaw: f64, shift: [f64; 2]) -> Self {
        let (s, c) = yaw.sin_cos();
        Self::new(
            c * self.x - s * self.y + shift[0],
            s * self.x + c * self.y + shift[1],
            self.theta + yaw,
        )
    }
}
