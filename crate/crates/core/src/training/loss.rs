use serde::{Deserialize, Serialize};
use stpotr_tensor::Var;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Mean absolute error.
    #[default]
    L1,
    /// Mean squared error.
    Mse,
}

impl std::str::FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l1" => Ok(LossKind::L1),
            "mse" => Ok(LossKind::Mse),
            _ => Err(Error::UnknownKind {
                what: "loss kind",
                name: s.into(),
            }),
        }
    }
}

impl std::fmt::Display for LossKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LossKind::L1 => "l1",
            LossKind::Mse => "mse",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub pose: f64,
    pub traj: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { pose: 1.0, traj: 1.0 }
    }
}

fn term<'g>(pred: Var<'g>, target: Var<'g>, kind: LossKind, what: &'static str) -> Result<Var<'g>> {
    let (ps, ts) = (pred.shape(), target.shape());
    if ps != ts {
        return Err(Error::Shape {
            what,
            expected: ts,
            got: ps,
        });
    }
    let d = pred.sub(&target)?;
    Ok(match kind {
        LossKind::L1 => d.abs().mean(),
        LossKind::Mse => d.mul(&d)?.mean(),
    })
}

/// `w_pose * mean(err(pose)) + w_traj * mean(err(traj))`.
pub fn loss<'g>(
    pred_pose: Var<'g>,
    pred_traj: Var<'g>,
    target_pose: Var<'g>,
    target_traj: Var<'g>,
    kind: LossKind,
    weights: LossWeights,
) -> Result<Var<'g>> {
    let p = term(pred_pose, target_pose, kind, "pose prediction")?;
    let t = term(pred_traj, target_traj, kind, "trajectory prediction")?;
    Ok(p.scale(weights.pose).add(&t.scale(weights.traj))?)
}
