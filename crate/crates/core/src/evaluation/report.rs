use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub mean_ms: f64,
    pub p95_ms: f64,
    pub min_ms: f64,
    pub samples: usize,
}

impl LatencyStats {
    pub fn from_samples(ms: &[f64]) -> Self {
        if ms.is_empty() {
            return Self::default();
        }
        let mut sorted = ms.to_vec();
        sorted.sort_by(f64::total_cmp);
        let rank = ((0.95 * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
        Self {
            mean_ms: sorted.iter().sum::<f64>() / sorted.len() as f64,
            p95_ms: sorted[rank - 1],
            min_ms: sorted[0],
            samples: sorted.len(),
        }
    }
}

/// Metrics in meters, averaged over windows.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub ade_pose: f64,
    pub fde_pose: f64,
    pub ade_traj: f64,
    pub fde_traj: f64,
    pub inference_ms: LatencyStats,
    pub n_windows: usize,
}

impl EvalReport {
    /// Aligned table with one header row and one value row.
    pub fn to_table(&self) -> String {
        let header = ["ADE_Pose", "FDE_Pose", "ADE_Traj", "FDE_Traj", "ID_mean_ms", "ID_p95_ms", "windows"];
        let values = [
            format!("{:.4}", self.ade_pose),
            format!("{:.4}", self.fde_pose),
            format!("{:.4}", self.ade_traj),
            format!("{:.4}", self.fde_traj),
            format!("{:.2}", self.inference_ms.mean_ms),
            format!("{:.2}", self.inference_ms.p95_ms),
            self.n_windows.to_string(),
        ];
        let widths: Vec<usize> = header.iter().zip(&values).map(|(h, v)| h.len().max(v.len())).collect();
        let row = |cells: Vec<String>| -> String {
            cells
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c:>w$}"))
                .collect::<Vec<_>>()
                .join("  ")
        };
        format!(
            "{}\n{}\n",
            row(header.iter().map(|s| s.to_string()).collect()),
            row(values.to_vec())
        )
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}
