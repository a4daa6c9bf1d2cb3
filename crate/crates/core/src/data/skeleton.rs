//! 17-joint skeleton and its pose/trajectory split.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NUM_JOINTS: usize = 17;
/// Flattened frame length (17 joints x 3).
pub const FRAME_DIM: usize = NUM_JOINTS * 3;
/// Hip-relative coordinates of the 16 non-hip joints.
pub const POSE_DIM: usize = (NUM_JOINTS - 1) * 3;
pub const TRAJ_DIM: usize = 3;

/// Joint indices.
pub mod joint {
    pub const HIP: usize = 0;
    pub const RIGHT_HIP: usize = 1;
    pub const RIGHT_KNEE: usize = 2;
    pub const RIGHT_ANKLE: usize = 3;
    pub const LEFT_HIP: usize = 4;
    pub const LEFT_KNEE: usize = 5;
    pub const LEFT_ANKLE: usize = 6;
    pub const SPINE: usize = 7;
    pub const NECK: usize = 8;
    pub const HEAD: usize = 9;
    pub const HEAD_TOP: usize = 10;
    pub const LEFT_SHOULDER: usize = 11;
    pub const LEFT_ELBOW: usize = 12;
    pub const LEFT_WRIST: usize = 13;
    pub const RIGHT_SHOULDER: usize = 14;
    pub const RIGHT_ELBOW: usize = 15;
    pub const RIGHT_WRIST: usize = 16;
}

/// Parent-child bone list of the full skeleton.
pub const BONES: [(usize, usize); 16] = [
    (0, 1),
    (1, 2),
    (2, 3),
    (0, 4),
    (4, 5),
    (5, 6),
    (0, 7),
    (7, 8),
    (8, 9),
    (9, 10),
    (8, 11),
    (11, 12),
    (12, 13),
    (8, 14),
    (14, 15),
    (15, 16),
];

pub type PoseVec = [f64; POSE_DIM];
pub type TrajVec = [f64; TRAJ_DIM];

/// One frame of global joint positions in meters, z up.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Skeleton {
    pub joints: [[f64; 3]; NUM_JOINTS],
}

impl Default for Skeleton {
    fn default() -> Self {
        Self {
            joints: [[0.0; 3]; NUM_JOINTS],
        }
    }
}

impl Skeleton {
    pub fn from_flat(values: &[f64]) -> Result<Self> {
        if values.len() != FRAME_DIM {
            return Err(Error::Shape {
                what: "skeleton",
                expected: vec![FRAME_DIM],
                got: vec![values.len()],
            });
        }
        let mut joints = [[0.0; 3]; NUM_JOINTS];
        for (j, chunk) in values.chunks_exact(3).enumerate() {
            joints[j] = [chunk[0], chunk[1], chunk[2]];
        }
        Ok(Self { joints })
    }

    pub fn to_flat(&self) -> [f64; FRAME_DIM] {
        let mut out = [0.0; FRAME_DIM];
        for (j, p) in self.joints.iter().enumerate() {
            out[3 * j..3 * j + 3].copy_from_slice(p);
        }
        out
    }

    pub fn hip(&self) -> [f64; 3] {
        self.joints[joint::HIP]
    }

    pub fn is_finite(&self) -> bool {
        self.joints.iter().flatten().all(|v| v.is_finite())
    }

    /// Splits into the hip-relative pose of the other 16 joints and the hip
    /// position.
    pub fn decompose(&self) -> (PoseVec, TrajVec) {
        let hip = self.hip();
        let mut pose = [0.0; POSE_DIM];
        for j in 1..NUM_JOINTS {
            for k in 0..3 {
                pose[3 * (j - 1) + k] = self.joints[j][k] - hip[k];
            }
        }
        (pose, hip)
    }

    /// Inverse of [`Skeleton::decompose`].
    ///
    /// The round trip is bitwise exact whenever each `joint - hip`
    /// subtraction is exact, which holds for coordinates on a common dyadic
    /// grid (see [`snap_to_grid`]). For arbitrary floats the error is at most
    /// half an ulp of the hip-relative offset.
    pub fn compose(pose: &PoseVec, traj: &TrajVec) -> Self {
        let mut joints = [[0.0; 3]; NUM_JOINTS];
        joints[joint::HIP] = *traj;
        for j in 1..NUM_JOINTS {
            for k in 0..3 {
                joints[j][k] = pose[3 * (j - 1) + k] + traj[k];
            }
        }
        Self { joints }
    }

    /// Rotates about the vertical axis through the origin, then translates.
    pub fn rigid_transform(&self, yaw: f64, shift: [f64; 3]) -> Self {
        let (s, c) = yaw.sin_cos();
        let mut out = *self;
        for p in out.joints.iter_mut() {
            let (x, y) = (p[0], p[1]);
            *p = [c * x - s * y + shift[0], s * x + c * y + shift[1], p[2] + shift[2]];
        }
        out
    }
}

/// Grid spacing used for generated coordinates: 2^-20 m (about 1 µm).
pub const GRID: f64 = 1.0 / (1u64 << 20) as f64;

/// Rounds to the nearest multiple of [`GRID`]. Sums and differences of
/// snapped values below 2^32 m are exact in `f64`.
pub fn snap_to_grid(v: f64) -> f64 {
    (v / GRID).round() * GRID
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origin_skeleton_decomposes_to_zeros() {
        let (pose, traj) = Skeleton::default().decompose();
        assert!(pose.iter().all(|&v| v == 0.0));
        assert_eq!(traj, [0.0; 3]);
    }

    #[test]
    fn head_offset_is_definitional() {
        let mut s = Skeleton::default();
        for p in s.joints.iter_mut() {
            *p = [1.0, 2.0, 3.0];
        }
        s.joints[joint::HEAD] = [1.0, 2.0, 4.7];
        let (pose, traj) = s.decompose();
        assert_eq!(traj, [1.0, 2.0, 3.0]);
        let h = 3 * (joint::HEAD - 1);
        assert_eq!(pose[h..h + 3], [0.0, 0.0, 4.7 - 3.0]);
        assert!((pose[h + 2] - 1.7).abs() < 1e-15);
        assert_eq!(Skeleton::compose(&pose, &traj), s);
    }

    #[test]
    fn flat_round_trip_and_length_check() {
        let flat: Vec<f64> = (0..FRAME_DIM).map(|i| i as f64 * 0.5).collect();
        let s = Skeleton::from_flat(&flat).unwrap();
        assert_eq!(s.to_flat().to_vec(), flat);
        assert!(Skeleton::from_flat(&flat[..50]).is_err());
    }

    #[test]
    fn bones_cover_every_joint_once_as_child() {
        let mut children: Vec<usize> = BONES.iter().map(|b| b.1).collect();
        children.sort();
        assert_eq!(children, (1..NUM_JOINTS).collect::<Vec<_>>());
    }
}
