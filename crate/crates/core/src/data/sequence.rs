use serde::{Deserialize, Serialize};

use super::skeleton::Skeleton;
use crate::error::{Error, Result};

/// Uniformly sampled skeleton frames.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotionSequence {
    pub frames: Vec<Skeleton>,
    pub frame_rate_hz: f64,
}

impl MotionSequence {
    pub fn new(frames: Vec<Skeleton>, frame_rate_hz: f64) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::InvalidConfig("motion sequence needs at least one frame".into()));
        }
        if !(frame_rate_hz.is_finite() && frame_rate_hz > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "frame rate must be positive, got {frame_rate_hz}"
            )));
        }
        Ok(Self {
            frames,
            frame_rate_hz,
        })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.frames.len() as f64 / self.frame_rate_hz
    }

    /// Changes the frame rate. Integer ratios keep every k-th frame;
    /// otherwise frames are linearly interpolated at the new sample times.
    pub fn resample(&self, target_hz: f64) -> Result<MotionSequence> {
        if !(target_hz.is_finite() && target_hz > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "target rate must be positive, got {target_hz}"
            )));
        }
        if target_hz > self.frame_rate_hz {
            return Err(Error::UnsupportedUpsampling {
                source_hz: self.frame_rate_hz,
                target_hz,
            });
        }
        let ratio = self.frame_rate_hz / target_hz;
        let step = ratio.round();
        if (ratio - step).abs() < 1e-9 {
            let k = step as usize;
            let frames = self.frames.iter().step_by(k).copied().collect();
            return MotionSequence::new(frames, target_hz);
        }
        let last = (self.frames.len() - 1) as f64;
        let count = (last / ratio).floor() as usize + 1;
        let frames = (0..count)
            .map(|j| {
                let pos = j as f64 * ratio;
                let i = (pos.floor() as usize).min(self.frames.len() - 1);
                let frac = pos - i as f64;
                if frac == 0.0 || i + 1 >= self.frames.len() {
                    return self.frames[i];
                }
                let (a, b) = (&self.frames[i], &self.frames[i + 1]);
                let mut out = *a;
                for (o, (pa, pb)) in out.joints.iter_mut().zip(a.joints.iter().zip(&b.joints)) {
                    for k in 0..3 {
                        o[k] = pa[k] + (pb[k] - pa[k]) * frac;
                    }
                }
                out
            })
            .collect();
        MotionSequence::new(frames, target_hz)
    }
}
