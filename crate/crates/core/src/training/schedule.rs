use serde::{Deserialize, Serialize};

/// Linear warm-up from zero, then constant.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WarmupSchedule {
    pub lr_peak: f64,
    pub warmup_steps: usize,
}

impl WarmupSchedule {
    pub fn lr(&self, step: usize) -> f64 {
        if step >= self.warmup_steps {
            self.lr_peak
        } else {
            self.lr_peak * step as f64 / self.warmup_steps as f64
        }
    }
}
