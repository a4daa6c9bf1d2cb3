use serde::{Deserialize, Serialize};

use crate::data::{INPUT_FRAMES, TARGET_FRAMES};
use crate::error::{Error, Result};

/// Network hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub d_pose: usize,
    pub d_traj: usize,
    pub d_ff: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub input_frames: usize,
    pub target_frames: usize,
    /// Per-joint feature width inside the graph convolution.
    pub gcn_features: usize,
    pub dropout_p: f64,
    pub pre_normalized: bool,
    pub use_shared_attention: bool,
    /// Inject trajectory features into the pose memory instead.
    pub shared_attention_pose_side: bool,
    pub use_end_attention: bool,
    /// Express trajectory inputs relative to the last observed hip position
    /// on the ground plane.
    pub center_trajectory: bool,
    pub layer_norm_eps: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl ModelConfig {
    pub fn desk() -> Self {
        Self {
            d_pose: 128,
            d_traj: 32,
            d_ff: 256,
            n_layers: 2,
            n_heads: 4,
            input_frames: INPUT_FRAMES,
            target_frames: TARGET_FRAMES,
            gcn_features: 16,
            dropout_p: 0.1,
            pre_normalized: true,
            use_shared_attention: true,
            shared_attention_pose_side: false,
            use_end_attention: true,
            center_trajectory: true,
            layer_norm_eps: 1e-5,
        }
    }

    pub fn paper() -> Self {
        Self {
            d_pose: 512,
            d_traj: 64,
            d_ff: 2048,
            n_layers: 4,
            n_heads: 8,
            ..Self::desk()
        }
    }

    /// Smallest configuration used for gradient checks.
    pub fn tiny() -> Self {
        Self {
            d_pose: 32,
            d_traj: 16,
            d_ff: 32,
            n_layers: 1,
            n_heads: 2,
            gcn_features: 4,
            ..Self::desk()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        let dims = [
            ("d_pose", self.d_pose),
            ("d_traj", self.d_traj),
            ("d_ff", self.d_ff),
            ("n_layers", self.n_layers),
            ("n_heads", self.n_heads),
            ("input_frames", self.input_frames),
            ("target_frames", self.target_frames),
            ("gcn_features", self.gcn_features),
        ];
        for (name, v) in dims {
            if v == 0 {
                return bad(format!("{name} must be positive"));
            }
        }
        if self.d_pose % self.n_heads != 0 || self.d_traj % self.n_heads != 0 {
            return bad(format!(
                "d_pose ({}) and d_traj ({}) must be divisible by n_heads ({})",
                self.d_pose, self.d_traj, self.n_heads
            ));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return bad(format!("dropout_p must be in [0, 1), got {}", self.dropout_p));
        }
        if !(self.layer_norm_eps > 0.0) {
            return bad("layer_norm_eps must be positive".into());
        }
        Ok(())
    }

    /// Names of fields whose values differ.
    pub fn diff(&self, other: &ModelConfig) -> Vec<String> {
        let a = serde_json::to_value(self).expect("config serializes");
        let b = serde_json::to_value(other).expect("config serializes");
        let (a, b) = (a.as_object().unwrap(), b.as_object().unwrap());
        a.iter()
            .filter(|(k, v)| b.get(*k) != Some(v))
            .map(|(k, _)| k.clone())
            .collect()
    }
}
