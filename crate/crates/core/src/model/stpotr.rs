use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stpotr_tensor::{concat, Graph, Tensor, Var};

use super::config::ModelConfig;
use super::layers::{
    positional_encoding, skeleton_adjacency, BlockOptions, DecoderLayer, EncoderLayer, JointEmbedding, Linear,
    MultiHeadAttention, SelfAttentionBlock,
};
use super::params::{Ctx, ParamStore};
use crate::data::skeleton::{PoseVec, TrajVec, POSE_DIM, TRAJ_DIM};
use crate::data::MotionWindow;
use crate::error::{Error, Result};

/// Cross-stream attention that injects one branch's encoder features into
/// the other branch's memory.
#[derive(Clone, Debug)]
pub struct SharedAttention {
    pub project: Linear,
    pub attn: MultiHeadAttention,
    /// Pose memory is the query instead of the trajectory memory.
    pub pose_side: bool,
}

#[derive(Clone, Debug)]
struct OutputHeads {
    pose_hidden: Linear,
    pose_out: Linear,
    traj_out: Linear,
}

/// Dual pose/trajectory transformer with parallel decoding.
#[derive(Clone, Debug)]
pub struct StpotrModel {
    config: ModelConfig,
    params: ParamStore,
    pose_embed: JointEmbedding,
    traj_embed: JointEmbedding,
    traj_query: Linear,
    pose_encoder: Vec<EncoderLayer>,
    traj_encoder: Vec<EncoderLayer>,
    pose_decoder: Vec<DecoderLayer>,
    traj_decoder: Vec<DecoderLayer>,
    shared: Option<SharedAttention>,
    pose_end: Option<SelfAttentionBlock>,
    traj_end: Option<SelfAttentionBlock>,
    heads: OutputHeads,
    pe_pose: Tensor,
    pe_traj: Tensor,
}

/// Forecast for one window.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub pose: Vec<PoseVec>,
    pub traj: Vec<TrajVec>,
}

impl StpotrModel {
    /// Builds a model with freshly initialized weights. Output layers start
    /// at zero, so the untrained model repeats the last observed frame.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rng = &mut rng;
        let mut store = ParamStore::new();
        let c = &config;
        let opts = BlockOptions {
            pre_norm: c.pre_normalized,
            dropout_p: c.dropout_p,
            eps: c.layer_norm_eps,
        };

        let mut pose_adj = skeleton_adjacency();
        let noise = Tensor::uniform(pose_adj.shape(), -0.01, 0.01, rng);
        pose_adj.data_mut().iter_mut().zip(noise.data()).for_each(|(a, n)| *a += n);
        let pose_embed = JointEmbedding::new(&mut store, "pose_embed", pose_adj, 3, c.gcn_features, c.d_pose, rng);
        let traj_embed = JointEmbedding::new(
            &mut store,
            "traj_embed",
            Tensor::ones(&[1, 1]),
            TRAJ_DIM,
            c.gcn_features,
            c.d_traj,
            rng,
        );
        let traj_query = Linear::new(&mut store, "traj_query", TRAJ_DIM, c.d_traj, rng);

        let enc = |store: &mut ParamStore, name: &str, d: usize, rng: &mut ChaCha8Rng| -> Vec<EncoderLayer> {
            (0..c.n_layers)
                .map(|i| EncoderLayer::new(store, &format!("{name}.{i}"), d, c.d_ff, c.n_heads, opts, rng))
                .collect()
        };
        let pose_encoder = enc(&mut store, "pose_encoder", c.d_pose, rng);
        let traj_encoder = enc(&mut store, "traj_encoder", c.d_traj, rng);

        let shared = c.use_shared_attention.then(|| {
            let (from, to) = if c.shared_attention_pose_side {
                (c.d_traj, c.d_pose)
            } else {
                (c.d_pose, c.d_traj)
            };
            SharedAttention {
                project: Linear::new(&mut store, "shared_attention.project", from, to, rng),
                attn: MultiHeadAttention::new(&mut store, "shared_attention.attn", to, c.n_heads, rng),
                pose_side: c.shared_attention_pose_side,
            }
        });

        let dec = |store: &mut ParamStore, name: &str, d: usize, rng: &mut ChaCha8Rng| -> Vec<DecoderLayer> {
            (0..c.n_layers)
                .map(|i| DecoderLayer::new(store, &format!("{name}.{i}"), d, c.d_ff, c.n_heads, opts, rng))
                .collect()
        };
        let pose_decoder = dec(&mut store, "pose_decoder", c.d_pose, rng);
        let traj_decoder = dec(&mut store, "traj_decoder", c.d_traj, rng);

        let (pose_end, traj_end) = if c.use_end_attention {
            (
                Some(SelfAttentionBlock::new(&mut store, "pose_end_attention", c.d_pose, c.n_heads, opts, rng)),
                Some(SelfAttentionBlock::new(&mut store, "traj_end_attention", c.d_traj, c.n_heads, opts, rng)),
            )
        } else {
            (None, None)
        };

        let heads = OutputHeads {
            pose_hidden: Linear::new(&mut store, "pose_head.hidden", c.d_pose, c.d_ff, rng),
            pose_out: Linear::zeros(&mut store, "pose_head.output", c.d_ff, POSE_DIM),
            traj_out: Linear::zeros(&mut store, "traj_head.output", c.d_traj, TRAJ_DIM),
        };

        let frames = c.input_frames + c.target_frames;
        Ok(Self {
            pe_pose: positional_encoding(frames, c.d_pose, 0),
            pe_traj: positional_encoding(frames, c.d_traj, 0),
            config,
            params: store,
            pose_embed,
            traj_embed,
            traj_query,
            pose_encoder,
            traj_encoder,
            pose_decoder,
            traj_decoder,
            shared,
            pose_end,
            traj_end,
            heads,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn num_parameters(&self) -> usize {
        self.params.num_scalars()
    }

    pub fn pose_embedding(&self) -> &JointEmbedding {
        &self.pose_embed
    }

    pub fn pose_encoder_layers(&self) -> &[EncoderLayer] {
        &self.pose_encoder
    }

    pub fn shared_attention(&self) -> Option<&SharedAttention> {
        self.shared.as_ref()
    }

    /// Positional encodings for positions `start..end` of the pose branch.
    pub fn pose_positions(&self, start: usize, end: usize) -> Tensor {
        slice_rows(&self.pe_pose, start, end)
    }

    fn positions<'g>(&self, ctx: &Ctx<'g, '_>, pose_branch: bool, start: usize, end: usize) -> Var<'g> {
        let table = if pose_branch { &self.pe_pose } else { &self.pe_traj };
        ctx.constant(slice_rows(table, start, end))
    }

    /// Pose branch encoder: `[B, M, 48]` → `[B, M, d_pose]`.
    pub fn encode_pose<'g>(&self, ctx: &Ctx<'g, '_>, input_pose: Var<'g>) -> Result<Var<'g>> {
        let m = input_pose.shape()[1];
        let z = self
            .pose_embed
            .forward(ctx, input_pose)?
            .add(&self.positions(ctx, true, 0, m))?;
        let mut z = ctx.dropout(z, self.config.dropout_p)?;
        for layer in &self.pose_encoder {
            z = layer.forward(ctx, z)?;
        }
        Ok(z)
    }

    fn encode_traj<'g>(&self, ctx: &Ctx<'g, '_>, input_traj: Var<'g>) -> Result<Var<'g>> {
        let m = input_traj.shape()[1];
        let z = self
            .traj_embed
            .forward(ctx, input_traj)?
            .add(&self.positions(ctx, false, 0, m))?;
        let mut z = ctx.dropout(z, self.config.dropout_p)?;
        for layer in &self.traj_encoder {
            z = layer.forward(ctx, z)?;
        }
        Ok(z)
    }

    fn check_inputs(&self, pose: &[usize], traj: &[usize]) -> Result<()> {
        let m = self.config.input_frames;
        let ok = pose.len() == 3
            && traj.len() == 3
            && pose[0] == traj[0]
            && pose[0] > 0
            && pose[1..] == [m, POSE_DIM]
            && traj[1..] == [m, TRAJ_DIM];
        if ok {
            Ok(())
        } else {
            Err(Error::Shape {
                what: "model input (pose, trajectory)",
                expected: vec![pose.first().copied().unwrap_or(1), m, POSE_DIM, m, TRAJ_DIM],
                got: pose.iter().chain(traj).copied().collect(),
            })
        }
    }

    /// `[B, M, 48]`, `[B, M, 3]` → `[B, N, 48]`, `[B, N, 3]`.
    pub fn forward<'g>(
        &self,
        ctx: &Ctx<'g, '_>,
        input_pose: Var<'g>,
        input_traj: Var<'g>,
    ) -> Result<(Var<'g>, Var<'g>)> {
        self.check_inputs(&input_pose.shape(), &input_traj.shape())?;
        let c = &self.config;
        let (m, n) = (c.input_frames, c.target_frames);
        let last_pose = input_pose.slice(1, m - 1, m)?;
        let last_traj = input_traj.slice(1, m - 1, m)?;

        // translation on the ground plane is removed from trajectory features
        let anchor = if c.center_trajectory {
            let ground = ctx.constant(Tensor::new(vec![TRAJ_DIM], vec![1.0, 1.0, 0.0])?);
            Some(last_traj.mul(&ground)?)
        } else {
            None
        };
        let centered = |x: Var<'g>| -> Result<Var<'g>> {
            Ok(match anchor {
                Some(a) => x.sub(&a)?,
                None => x,
            })
        };

        let mut pose_memory = self.encode_pose(ctx, input_pose)?;
        let mut traj_memory = self.encode_traj(ctx, centered(input_traj)?)?;

        if let Some(shared) = &self.shared {
            if shared.pose_side {
                let kv = shared.project.forward(ctx, traj_memory)?;
                let z = shared.attn.forward(ctx, pose_memory, kv, kv)?;
                pose_memory = pose_memory.add(&z)?;
            } else {
                let kv = shared.project.forward(ctx, pose_memory)?;
                let z = shared.attn.forward(ctx, traj_memory, kv, kv)?;
                traj_memory = traj_memory.add(&z)?;
            }
        }

        let repeat = |x: Var<'g>, width: usize| -> Result<Var<'g>> {
            Ok(x.add(&ctx.constant(Tensor::zeros(&[n, width])))?)
        };
        let pose_query = repeat(last_pose, POSE_DIM)?;
        let traj_query = repeat(centered(last_traj)?, TRAJ_DIM)?;

        let q = self
            .pose_embed
            .forward(ctx, pose_query)?
            .add(&self.positions(ctx, true, m, m + n))?;
        let mut pose_out = ctx.dropout(q, c.dropout_p)?;
        for layer in &self.pose_decoder {
            pose_out = layer.forward(ctx, pose_out, pose_memory)?;
        }
        let q = self
            .traj_query
            .forward(ctx, traj_query)?
            .add(&self.positions(ctx, false, m, m + n))?;
        let mut traj_out = ctx.dropout(q, c.dropout_p)?;
        for layer in &self.traj_decoder {
            traj_out = layer.forward(ctx, traj_out, traj_memory)?;
        }

        if let (Some(pe), Some(te)) = (&self.pose_end, &self.traj_end) {
            let joined = concat(&[pose_memory, pose_out], 1)?;
            pose_out = pe.forward(ctx, joined)?.slice(1, m, m + n)?;
            let joined = concat(&[traj_memory, traj_out], 1)?;
            traj_out = te.forward(ctx, joined)?.slice(1, m, m + n)?;
        }

        let (pose_offset, traj_offset) = self.output_offsets(ctx, pose_out, traj_out)?;
        Ok((pose_offset.add(&last_pose)?, traj_offset.add(&last_traj)?))
    }

    /// Per-frame output heads: decoder features to coordinate offsets from
    /// the last observed frame.
    pub fn output_offsets<'g>(
        &self,
        ctx: &Ctx<'g, '_>,
        pose_features: Var<'g>,
        traj_features: Var<'g>,
    ) -> Result<(Var<'g>, Var<'g>)> {
        let h = &self.heads;
        let pose = h.pose_out.forward(ctx, h.pose_hidden.forward(ctx, pose_features)?.relu())?;
        Ok((pose, h.traj_out.forward(ctx, traj_features)?))
    }

    /// Eval-mode forecast for a batch of windows' inputs.
    pub fn predict_batch(&self, inputs: &[(&[PoseVec], &[TrajVec])]) -> Result<Vec<Prediction>> {
        if inputs.is_empty() {
            return Ok(Vec::new());
        }
        let (m, n) = (self.config.input_frames, self.config.target_frames);
        let b = inputs.len();
        let mut pose = Vec::with_capacity(b * m * POSE_DIM);
        let mut traj = Vec::with_capacity(b * m * TRAJ_DIM);
        for (p, t) in inputs {
            if p.len() != m || t.len() != m {
                return Err(Error::Shape {
                    what: "input frames",
                    expected: vec![m, m],
                    got: vec![p.len(), t.len()],
                });
            }
            p.iter().for_each(|r| pose.extend_from_slice(r));
            t.iter().for_each(|r| traj.extend_from_slice(r));
        }
        let g = Graph::new();
        let ctx = Ctx::eval(&g, &self.params);
        let (pp, pt) = self.forward(
            &ctx,
            g.constant(Tensor::new(vec![b, m, POSE_DIM], pose)?),
            g.constant(Tensor::new(vec![b, m, TRAJ_DIM], traj)?),
        )?;
        let (pp, pt) = (pp.value(), pt.value());
        Ok((0..b)
            .map(|i| Prediction {
                pose: rows(&pp.data()[i * n * POSE_DIM..(i + 1) * n * POSE_DIM]),
                traj: rows(&pt.data()[i * n * TRAJ_DIM..(i + 1) * n * TRAJ_DIM]),
            })
            .collect())
    }

    pub fn predict_window(&self, window: &MotionWindow) -> Result<Prediction> {
        self.predict(&window.input_pose, &window.input_traj)
    }
}

/// Anything that forecasts the next frames from observed ones.
pub trait Predictor: Sync {
    fn predict(&self, input_pose: &[PoseVec], input_traj: &[TrajVec]) -> Result<Prediction>;
}

impl Predictor for StpotrModel {
    fn predict(&self, input_pose: &[PoseVec], input_traj: &[TrajVec]) -> Result<Prediction> {
        Ok(self.predict_batch(&[(input_pose, input_traj)])?.remove(0))
    }
}

fn rows<const D: usize>(flat: &[f64]) -> Vec<[f64; D]> {
    flat.chunks_exact(D).map(|c| c.try_into().unwrap()).collect()
}

fn slice_rows(t: &Tensor, start: usize, end: usize) -> Tensor {
    let d = t.shape()[1];
    Tensor::new(vec![end - start, d], t.data()[start * d..end * d].to_vec()).expect("rows in range")
}
