//! The dual pose/trajectory transformer and its parameter plumbing.

pub mod checkpoint;
pub mod config;
pub mod layers;
pub mod params;
pub mod stpotr;

pub use checkpoint::{load_checkpoint, load_checkpoint_expecting, read_checkpoint, save_checkpoint, write_checkpoint};
pub use config::ModelConfig;
pub use params::{Ctx, Param, ParamId, ParamStore};
pub use stpotr::{Prediction, Predictor, SharedAttention, StpotrModel};
