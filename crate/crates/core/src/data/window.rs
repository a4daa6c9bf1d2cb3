use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::sequence::MotionSequence;
use super::skeleton::{PoseVec, Skeleton, TrajVec};
use crate::error::{Error, Result};

/// Observed input frames.
pub const INPUT_FRAMES: usize = 5;
/// Predicted output frames.
pub const TARGET_FRAMES: usize = 20;

/// Contiguous (input, target) slice of one sequence, split into hip-relative
/// pose and hip trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotionWindow {
    #[serde(with = "pose_rows")]
    pub input_pose: Vec<PoseVec>,
    pub input_traj: Vec<TrajVec>,
    #[serde(with = "pose_rows")]
    pub target_pose: Vec<PoseVec>,
    pub target_traj: Vec<TrajVec>,
}

impl MotionWindow {
    pub fn from_frames(input: &[Skeleton], target: &[Skeleton]) -> Self {
        let split = |frames: &[Skeleton]| -> (Vec<PoseVec>, Vec<TrajVec>) {
            frames.iter().map(Skeleton::decompose).unzip()
        };
        let (input_pose, input_traj) = split(input);
        let (target_pose, target_traj) = split(target);
        Self {
            input_pose,
            input_traj,
            target_pose,
            target_traj,
        }
    }

    pub fn input_len(&self) -> usize {
        self.input_pose.len()
    }

    pub fn target_len(&self) -> usize {
        self.target_pose.len()
    }

    pub fn input_frames(&self) -> Vec<Skeleton> {
        compose_all(&self.input_pose, &self.input_traj)
    }

    pub fn target_frames(&self) -> Vec<Skeleton> {
        compose_all(&self.target_pose, &self.target_traj)
    }

    /// Adds i.i.d. zero-mean Gaussian noise to the inputs; targets are left
    /// untouched.
    pub fn add_noise(&self, sigma_m: f64, seed: u64) -> Result<MotionWindow> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.add_noise_with(sigma_m, &mut rng)
    }

    pub fn add_noise_with(&self, sigma_m: f64, rng: &mut ChaCha8Rng) -> Result<MotionWindow> {
        if !(sigma_m.is_finite() && sigma_m >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "noise sigma must be >= 0, got {sigma_m}"
            )));
        }
        let mut out = self.clone();
        if sigma_m == 0.0 {
            return Ok(out);
        }
        let normal = Normal::new(0.0, sigma_m).expect("sigma validated");
        for row in out.input_pose.iter_mut() {
            row.iter_mut().for_each(|v| *v += normal.sample(rng));
        }
        for row in out.input_traj.iter_mut() {
            row.iter_mut().for_each(|v| *v += normal.sample(rng));
        }
        Ok(out)
    }
}

pub fn compose_all(pose: &[PoseVec], traj: &[TrajVec]) -> Vec<Skeleton> {
    pose.iter()
        .zip(traj)
        .map(|(p, t)| Skeleton::compose(p, t))
        .collect()
}

/// Sliding windows of `input_len + target_len` frames. Sequences shorter
/// than one window yield nothing.
pub fn window_with(
    seq: &MotionSequence,
    input_len: usize,
    target_len: usize,
    stride: usize,
) -> Result<Vec<MotionWindow>> {
    if stride == 0 || input_len == 0 || target_len == 0 {
        return Err(Error::InvalidConfig(
            "window lengths and stride must be positive".into(),
        ));
    }
    let span = input_len + target_len;
    if seq.len() < span {
        return Ok(Vec::new());
    }
    Ok((0..=seq.len() - span)
        .step_by(stride)
        .map(|start| {
            let frames = &seq.frames[start..start + span];
            MotionWindow::from_frames(&frames[..input_len], &frames[input_len..])
        })
        .collect())
}

/// Windows of 5 input and 20 target frames.
pub fn window(seq: &MotionSequence, stride: usize) -> Result<Vec<MotionWindow>> {
    window_with(seq, INPUT_FRAMES, TARGET_FRAMES, stride)
}

mod pose_rows {
    //! serde for `Vec<[f64; 48]>` (arrays above 32 have no built-in impl).
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use super::PoseVec;

    pub fn serialize<S: Serializer>(rows: &[PoseVec], s: S) -> Result<S::Ok, S::Error> {
        let v: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        v.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<PoseVec>, D::Error> {
        let rows: Vec<Vec<f64>> = Vec::deserialize(d)?;
        rows.into_iter()
            .map(|r| {
                let n = r.len();
                r.try_into()
                    .map_err(|_| D::Error::custom(format!("pose row has {n} values")))
            })
            .collect()
    }
}
