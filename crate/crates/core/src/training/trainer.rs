use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use stpotr_tensor::{Graph, Tensor};

use super::loss::{loss, LossKind, LossWeights};
use super::optim::{AdamW, AdamWConfig};
use super::schedule::WarmupSchedule;
use crate::data::skeleton::{POSE_DIM, TRAJ_DIM};
use crate::data::MotionWindow;
use crate::error::{Error, Result};
use crate::model::{save_checkpoint, Ctx, StpotrModel};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr_peak: f64,
    pub batch_size: usize,
    /// Authoritative training length.
    pub total_steps: usize,
    pub warmup_steps: usize,
    pub weight_decay: f64,
    pub loss_kind: LossKind,
    pub pose_loss_weight: f64,
    pub traj_loss_weight: f64,
    pub seed: u64,
    /// Std of Gaussian noise added to every input coordinate.
    pub noise_sigma_m: f64,
    /// Write a checkpoint every this many steps; 0 disables.
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr_peak: 1e-3,
            batch_size: 16,
            total_steps: 2000,
            warmup_steps: 100,
            weight_decay: 0.01,
            loss_kind: LossKind::L1,
            pose_loss_weight: 1.0,
            traj_loss_weight: 1.0,
            seed: 0,
            noise_sigma_m: 0.0,
            checkpoint_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.batch_size == 0 || self.total_steps == 0 {
            return bad("batch_size and total_steps must be positive".into());
        }
        if self.warmup_steps > self.total_steps {
            return bad(format!(
                "warmup_steps ({}) exceeds total_steps ({})",
                self.warmup_steps, self.total_steps
            ));
        }
        let finite_nonneg = [
            ("lr_peak", self.lr_peak),
            ("weight_decay", self.weight_decay),
            ("pose_loss_weight", self.pose_loss_weight),
            ("traj_loss_weight", self.traj_loss_weight),
            ("noise_sigma_m", self.noise_sigma_m),
        ];
        for (name, v) in finite_nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        Ok(())
    }

    pub fn schedule(&self) -> WarmupSchedule {
        WarmupSchedule {
            lr_peak: self.lr_peak,
            warmup_steps: self.warmup_steps,
        }
    }

    pub fn weights(&self) -> LossWeights {
        LossWeights {
            pose: self.pose_loss_weight,
            traj: self.traj_loss_weight,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub step: usize,
    pub loss: f64,
    pub lr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub losses: Vec<LossRecord>,
    pub checkpoints: Vec<PathBuf>,
    pub wall_time_s: f64,
    pub epochs_completed: usize,
}

impl TrainReport {
    pub fn final_loss(&self) -> f64 {
        self.losses.last().map_or(f64::NAN, |r| r.loss)
    }
}

/// Stacks windows into `[B, M, 48]`, `[B, M, 3]`, `[B, N, 48]`, `[B, N, 3]`.
pub fn stack_windows(windows: &[&MotionWindow]) -> Result<[Tensor; 4]> {
    let first = windows.first().ok_or(Error::EmptyDataset)?;
    let (m, n, b) = (first.input_len(), first.target_len(), windows.len());
    let mut bufs: [Vec<f64>; 4] = Default::default();
    for w in windows {
        if w.input_len() != m || w.target_len() != n || w.input_traj.len() != m || w.target_traj.len() != n {
            return Err(Error::Shape {
                what: "window lengths",
                expected: vec![m, n],
                got: vec![w.input_len(), w.target_len()],
            });
        }
        w.input_pose.iter().for_each(|r| bufs[0].extend_from_slice(r));
        w.input_traj.iter().for_each(|r| bufs[1].extend_from_slice(r));
        w.target_pose.iter().for_each(|r| bufs[2].extend_from_slice(r));
        w.target_traj.iter().for_each(|r| bufs[3].extend_from_slice(r));
    }
    let [a, bt, c, d] = bufs;
    Ok([
        Tensor::new(vec![b, m, POSE_DIM], a)?,
        Tensor::new(vec![b, m, TRAJ_DIM], bt)?,
        Tensor::new(vec![b, n, POSE_DIM], c)?,
        Tensor::new(vec![b, n, TRAJ_DIM], d)?,
    ])
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Mean loss over `windows` in eval mode (no dropout, no noise).
pub fn dataset_loss(model: &StpotrModel, windows: &[MotionWindow], kind: LossKind, weights: LossWeights) -> Result<f64> {
    if windows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut total = 0.0;
    for chunk in windows.chunks(64) {
        let refs: Vec<&MotionWindow> = chunk.iter().collect();
        let [ip, it, tp, tt] = stack_windows(&refs)?;
        let g = Graph::new();
        let ctx = Ctx::eval(&g, model.params());
        let (pp, pt) = model.forward(&ctx, g.constant(ip), g.constant(it))?;
        let l = loss(pp, pt, g.constant(tp), g.constant(tt), kind, weights)?;
        total += l.value().item().unwrap() * chunk.len() as f64;
    }
    Ok(total / windows.len() as f64)
}

/// Optional artifacts written while training.
#[derive(Clone, Debug, Default)]
pub struct TrainOutputs {
    /// Directory for periodic checkpoints.
    pub checkpoint_dir: Option<PathBuf>,
}

/// Runs `config.total_steps` AdamW steps over shuffled mini-batches.
pub fn train(
    model: &mut StpotrModel,
    dataset: &[MotionWindow],
    config: &TrainConfig,
    outputs: &TrainOutputs,
) -> Result<TrainReport> {
    train_with(model, dataset, config, outputs, |_| {})
}

/// [`train`] with a per-step callback.
pub fn train_with(
    model: &mut StpotrModel,
    dataset: &[MotionWindow],
    config: &TrainConfig,
    outputs: &TrainOutputs,
    mut on_step: impl FnMut(&LossRecord),
) -> Result<TrainReport> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let start = Instant::now();
    let schedule = config.schedule();
    let weights = config.weights();
    let mut optimizer = AdamW::new(
        model.params(),
        AdamWConfig {
            weight_decay: config.weight_decay,
            ..AdamWConfig::default()
        },
    );
    let mut shuffle_rng = stream(config.seed, 1);
    let mut noise_rng = stream(config.seed, 2);
    let mut dropout_rng = Some(stream(config.seed, 3));

    let mut order: Vec<usize> = Vec::new();
    let mut cursor = 0;
    let mut epochs = 0;
    let mut report = TrainReport {
        losses: Vec::with_capacity(config.total_steps),
        checkpoints: Vec::new(),
        wall_time_s: 0.0,
        epochs_completed: 0,
    };

    for step in 0..config.total_steps {
        let mut batch = Vec::with_capacity(config.batch_size);
        while batch.len() < config.batch_size {
            if cursor == order.len() {
                if !order.is_empty() {
                    epochs += 1;
                }
                order = (0..dataset.len()).collect();
                order.shuffle(&mut shuffle_rng);
                cursor = 0;
            }
            let w = &dataset[order[cursor]];
            cursor += 1;
            batch.push(if config.noise_sigma_m > 0.0 {
                w.add_noise_with(config.noise_sigma_m, &mut noise_rng)?
            } else {
                w.clone()
            });
        }
        let refs: Vec<&MotionWindow> = batch.iter().collect();
        let [ip, it, tp, tt] = stack_windows(&refs)?;

        let lr = schedule.lr(step + 1);
        let g = Graph::new();
        let ctx = Ctx::new(&g, model.params(), true, dropout_rng.take());
        let (pp, pt) = model.forward(&ctx, g.constant(ip), g.constant(it))?;
        let l = loss(pp, pt, g.constant(tp), g.constant(tt), config.loss_kind, weights)?;
        let value = l.value().item().unwrap();
        if !value.is_finite() {
            return Err(Error::Divergence { step, loss: value });
        }
        g.backward(l)?;
        let grads = ctx.gradients();
        dropout_rng = ctx.into_rng();

        let store = model.params_mut();
        store.zero_grads();
        store.accumulate(grads);
        optimizer.step(store, lr);

        let record = LossRecord { step, loss: value, lr };
        on_step(&record);
        report.losses.push(record);

        if let Some(dir) = &outputs.checkpoint_dir {
            if config.checkpoint_every > 0 && (step + 1) % config.checkpoint_every == 0 {
                let path = dir.join(format!("checkpoint_{:06}.bin", step + 1));
                save_checkpoint(&path, model)?;
                report.checkpoints.push(path);
            }
        }
    }
    report.epochs_completed = epochs;
    report.wall_time_s = start.elapsed().as_secs_f64();
    Ok(report)
}

/// `step,loss,lr` with a header row.
pub fn write_loss_csv(path: &Path, records: &[LossRecord]) -> Result<()> {
    let mut out = String::from("step,loss,lr\n");
    for r in records {
        out.push_str(&format!("{},{:?},{:?}\n", r.step, r.loss, r.lr));
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}
