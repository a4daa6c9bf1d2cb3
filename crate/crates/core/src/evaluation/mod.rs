//! Displacement metrics, latency timing and evaluation reports.

pub mod metrics;
pub mod report;

use std::time::Instant;

use stpotr_tensor::Execution;

pub use metrics::{ade, fde};
pub use report::{EvalReport, LatencyStats};

use crate::data::skeleton::{PoseVec, TrajVec};
use crate::data::MotionWindow;
use crate::error::{Error, Result};
use crate::model::{Prediction, Predictor};

/// Repeats the last observed frame for every future frame.
#[derive(Clone, Copy, Debug, Default)]
pub struct LastFrameRepeat {
    pub target_frames: usize,
}

impl LastFrameRepeat {
    pub fn new(target_frames: usize) -> Self {
        Self { target_frames }
    }
}

impl Predictor for LastFrameRepeat {
    fn predict(&self, input_pose: &[PoseVec], input_traj: &[TrajVec]) -> Result<Prediction> {
        let (p, t) = match (input_pose.last(), input_traj.last()) {
            (Some(p), Some(t)) => (*p, *t),
            _ => {
                return Err(Error::InsufficientHistory {
                    needed: 1,
                    available: 0,
                })
            }
        };
        Ok(Prediction {
            pose: vec![p; self.target_frames],
            traj: vec![t; self.target_frames],
        })
    }
}

#[derive(Clone, Copy, Debug)]
pub struct EvalOptions {
    /// Untimed calls before measuring.
    pub warmup: usize,
    /// Timed single-window calls; 0 skips timing.
    pub timed: usize,
    pub execution: Execution,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            warmup: 3,
            timed: 20,
            execution: Execution::default(),
        }
    }
}

/// Metrics of one window: (ade_pose, fde_pose, ade_traj, fde_traj).
pub fn window_metrics(pred: &Prediction, window: &MotionWindow) -> Result<[f64; 4]> {
    Ok([
        ade(&pred.pose, &window.target_pose)?,
        fde(&pred.pose, &window.target_pose)?,
        ade(&pred.traj, &window.target_traj)?,
        fde(&pred.traj, &window.target_traj)?,
    ])
}

/// Averages metrics over `windows` and times single-window forecasts.
pub fn evaluate<P: Predictor + ?Sized>(predictor: &P, windows: &[MotionWindow], opts: &EvalOptions) -> Result<EvalReport> {
    if windows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let per_window = opts.execution.map(windows, |w| {
        let pred = predictor.predict(&w.input_pose, &w.input_traj)?;
        window_metrics(&pred, w)
    });
    let mut sums = [0.0; 4];
    for m in per_window {
        let m = m?;
        sums.iter_mut().zip(m).for_each(|(s, v)| *s += v);
    }
    let n = windows.len() as f64;

    let mut samples = Vec::with_capacity(opts.timed);
    for i in 0..opts.warmup + opts.timed {
        let w = &windows[i % windows.len()];
        let start = Instant::now();
        let out = predictor.predict(&w.input_pose, &w.input_traj)?;
        let ms = start.elapsed().as_secs_f64() * 1e3;
        std::hint::black_box(out);
        if i >= opts.warmup {
            samples.push(ms);
        }
    }

    Ok(EvalReport {
        ade_pose: sums[0] / n,
        fde_pose: sums[1] / n,
        ade_traj: sums[2] / n,
        fde_traj: sums[3] / n,
        inference_ms: LatencyStats::from_samples(&samples),
        n_windows: windows.len(),
    })
}
