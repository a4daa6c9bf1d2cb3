//! Pose and trajectory forecasting for robot follow-ahead.

pub mod data;
pub mod error;
pub mod evaluation;
pub mod follow;
pub mod model;
pub mod training;

pub use error::{Error, Result};
