//! Skeleton frames, motion files, resampling, windowing and synthetic motion.

pub mod motion_file;
pub mod sequence;
pub mod skeleton;
pub mod synthetic;
pub mod window;

pub use motion_file::{format_motion, motion_files, parse_motion, read_motion, write_motion, MOTION_EXT};
pub use sequence::MotionSequence;
pub use skeleton::{joint, PoseVec, Skeleton, TrajVec, BONES, NUM_JOINTS, POSE_DIM, TRAJ_DIM};
pub use synthetic::{generate_synthetic, BodyParams, MotionKind, MotionScript};
pub use window::{window, window_with, MotionWindow, INPUT_FRAMES, TARGET_FRAMES};
