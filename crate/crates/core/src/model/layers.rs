//! Building blocks over `[batch, time, features]` tensors.

use rand::Rng;
use stpotr_tensor::{Tensor, Var};

use super::params::{Ctx, ParamId, ParamStore};
use crate::error::Result;

fn xavier(shape: &[usize], fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Tensor {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Tensor::uniform(shape, -limit, limit, rng)
}

#[derive(Clone, Debug)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
    pub d_in: usize,
    pub d_out: usize,
}

impl Linear {
    pub fn new(store: &mut ParamStore, name: &str, d_in: usize, d_out: usize, rng: &mut impl Rng) -> Self {
        let weight = store.add(format!("{name}.weight"), xavier(&[d_in, d_out], d_in, d_out, rng));
        let bias = store.add(format!("{name}.bias"), Tensor::zeros(&[d_out]));
        Self { weight, bias, d_in, d_out }
    }

    /// Zero weight and bias.
    pub fn zeros(store: &mut ParamStore, name: &str, d_in: usize, d_out: usize) -> Self {
        let weight = store.add(format!("{name}.weight"), Tensor::zeros(&[d_in, d_out]));
        let bias = store.add(format!("{name}.bias"), Tensor::zeros(&[d_out]));
        Self { weight, bias, d_in, d_out }
    }

    /// Applies to the last axis of any rank >= 1 input.
    pub fn forward<'g>(&self, ctx: &Ctx<'g, '_>, x: Var<'g>) -> Result<Var<'g>> {
        let shape = x.shape();
        let rows: usize = shape[..shape.len() - 1].iter().product();
        let y = x
            .reshape(&[rows, self.d_in])?
            .matmul(&ctx.p(self.weight))?
            .add(&ctx.p(self.bias))?;
        let mut out = shape;
        *out.last_mut().unwrap() = self.d_out;
        Ok(y.reshape(&out)?)
    }
}

#[derive(Clone, Debug)]
pub struct LayerNorm {
    pub gain: ParamId,
    pub bias: ParamId,
    pub eps: f64,
}

impl LayerNorm {
    pub fn new(store: &mut ParamStore, name: &str, d: usize, eps: f64) -> Self {
        Self {
            gain: store.add(format!("{name}.gain"), Tensor::ones(&[d])),
            bias: store.add(format!("{name}.bias"), Tensor::zeros(&[d])),
            eps,
        }
    }

    pub fn forward<'g>(&self, ctx: &Ctx<'g, '_>, x: Var<'g>) -> Result<Var<'g>> {
        Ok(x.layer_norm(&ctx.p(self.gain), &ctx.p(self.bias), self.eps)?)
    }
}

/// Unmasked scaled dot-product attention over `n_heads` heads.
#[derive(Clone, Debug)]
pub struct MultiHeadAttention {
    pub query: Linear,
    pub key: Linear,
    pub value: Linear,
    pub output: Linear,
    pub n_heads: usize,
    pub d_model: usize,
}

impl MultiHeadAttention {
    pub fn new(store: &mut ParamStore, name: &str, d_model: usize, n_heads: usize, rng: &mut impl Rng) -> Self {
        assert!(d_model % n_heads == 0, "{name}: {d_model} not divisible by {n_heads} heads");
        Self {
            query: Linear::new(store, &format!("{name}.query"), d_model, d_model, rng),
            key: Linear::new(store, &format!("{name}.key"), d_model, d_model, rng),
            value: Linear::new(store, &format!("{name}.value"), d_model, d_model, rng),
            output: Linear::new(store, &format!("{name}.output"), d_model, d_model, rng),
            n_heads,
            d_model,
        }
    }

    fn split_heads<'g>(&self, x: Var<'g>) -> Result<Var<'g>> {
        let s = x.shape();
        let dh = self.d_model / self.n_heads;
        Ok(x.reshape(&[s[0], s[1], self.n_heads, dh])?.permute(&[0, 2, 1, 3])?)
    }

    /// `q: [B, Tq, d]`, `k`, `v: [B, Tk, d]` → `[B, Tq, d]`.
    pub fn forward<'g>(&self, ctx: &Ctx<'g, '_>, q: Var<'g>, k: Var<'g>, v: Var<'g>) -> Result<Var<'g>> {
        let (b, tq) = (q.shape()[0], q.shape()[1]);
        let dh = self.d_model / self.n_heads;
        let qh = self.split_heads(self.query.forward(ctx, q)?)?;
        let kh = self.split_heads(self.key.forward(ctx, k)?)?;
        let vh = self.split_heads(self.value.forward(ctx, v)?)?;
        let weights = qh.matmul_t(&kh)?.scale(1.0 / (dh as f64).sqrt()).softmax(3)?;
        let merged = weights
            .matmul(&vh)?
            .permute(&[0, 2, 1, 3])?
            .reshape(&[b, tq, self.d_model])?;
        self.output.forward(ctx, merged)
    }
}

#[derive(Clone, Debug)]
pub struct FeedForward {
    pub hidden: Linear,
    pub output: Linear,
}

impl FeedForward {
    pub fn new(store: &mut ParamStore, name: &str, d_model: usize, d_ff: usize, rng: &mut impl Rng) -> Self {
        Self {
            hidden: Linear::new(store, &format!("{name}.hidden"), d_model, d_ff, rng),
            output: Linear::new(store, &format!("{name}.output"), d_ff, d_model, rng),
        }
    }

    pub fn forward<'g>(&self, ctx: &Ctx<'g, '_>, x: Var<'g>) -> Result<Var<'g>> {
        let h = self.hidden.forward(ctx, x)?.relu();
        self.output.forward(ctx, h)
    }
}

/// Shared layer options.
#[derive(Clone, Copy, Debug)]
pub struct BlockOptions {
    pub pre_norm: bool,
    pub dropout_p: f64,
    pub eps: f64,
}

/// Residual sub-block around `f`, normalized before `f` (pre-norm) or after
/// the residual sum (post-norm).
fn residual<'g>(
    ctx: &Ctx<'g, '_>,
    opts: BlockOptions,
    norm: &LayerNorm,
    x: Var<'g>,
    f: impl FnOnce(Var<'g>) -> Result<Var<'g>>,
) -> Result<Var<'g>> {
    if opts.pre_norm {
        let y = f(norm.forward(ctx, x)?)?;
        Ok(x.add(&ctx.dropout(y, opts.dropout_p)?)?)
    } else {
        let y = f(x)?;
        norm.forward(ctx, x.add(&ctx.dropout(y, opts.dropout_p)?)?)
    }
}

#[derive(Clone, Debug)]
pub struct EncoderLayer {
    pub attn: MultiHeadAttention,
    pub ff: FeedForward,
    pub norm_attn: LayerNorm,
    pub norm_ff: LayerNorm,
    pub opts: BlockOptions,
}

impl EncoderLayer {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        d_model: usize,
        d_ff: usize,
        n_heads: usize,
        opts: BlockOptions,
        rng: &mut impl Rng,
    ) -> Self {
        Self {
            attn: MultiHeadAttention::new(store, &format!("{name}.self_attn"), d_model, n_heads, rng),
            ff: FeedForward::new(store, &format!("{name}.ff"), d_model, d_ff, rng),
            norm_attn: LayerNorm::new(store, &format!("{name}.norm_attn"), d_model, opts.eps),
            norm_ff: LayerNorm::new(store, &format!("{name}.norm_ff"), d_model, opts.eps),
            opts,
        }
    }

    pub fn forward<'g>(&self, ctx: &Ctx<'g, '_>, x: Var<'g>) -> Result<Var<'g>> {
        let x = residual(ctx, self.opts, &self.norm_attn, x, |h| self.attn.forward(ctx, h, h, h))?;
        residual(ctx, self.opts, &self.norm_ff, x, |h| self.ff.forward(ctx, h))
    }
}

#[derive(Clone, Debug)]
pub struct DecoderLayer {
    pub self_attn: MultiHeadAttention,
    pub cross_attn: MultiHeadAttention,
    pub ff: FeedForward,
    pub norm_self: LayerNorm,
    pub norm_cross: LayerNorm,
    pub norm_ff: LayerNorm,
    pub opts: BlockOptions,
}

impl DecoderLayer {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        d_model: usize,
        d_ff: usize,
        n_heads: usize,
        opts: BlockOptions,
        rng: &mut impl Rng,
    ) -> Self {
        Self {
            self_attn: MultiHeadAttention::new(store, &format!("{name}.self_attn"), d_model, n_heads, rng),
            cross_attn: MultiHeadAttention::new(store, &format!("{name}.cross_attn"), d_model, n_heads, rng),
            ff: FeedForward::new(store, &format!("{name}.ff"), d_model, d_ff, rng),
            norm_self: LayerNorm::new(store, &format!("{name}.norm_self"), d_model, opts.eps),
            norm_cross: LayerNorm::new(store, &format!("{name}.norm_cross"), d_model, opts.eps),
            norm_ff: LayerNorm::new(store, &format!("{name}.norm_ff"), d_model, opts.eps),
            opts,
        }
    }

    pub fn forward<'g>(&self, ctx: &Ctx<'g, '_>, x: Var<'g>, memory: Var<'g>) -> Result<Var<'g>> {
        let x = residual(ctx, self.opts, &self.norm_self, x, |h| self.self_attn.forward(ctx, h, h, h))?;
        let x = residual(ctx, self.opts, &self.norm_cross, x, |h| {
            self.cross_attn.forward(ctx, h, memory, memory)
        })?;
        residual(ctx, self.opts, &self.norm_ff, x, |h| self.ff.forward(ctx, h))
    }
}

/// Single residual self-attention block.
#[derive(Clone, Debug)]
pub struct SelfAttentionBlock {
    pub attn: MultiHeadAttention,
    pub norm: LayerNorm,
    pub opts: BlockOptions,
}

impl SelfAttentionBlock {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        d_model: usize,
        n_heads: usize,
        opts: BlockOptions,
        rng: &mut impl Rng,
    ) -> Self {
        Self {
            attn: MultiHeadAttention::new(store, &format!("{name}.attn"), d_model, n_heads, rng),
            norm: LayerNorm::new(store, &format!("{name}.norm"), d_model, opts.eps),
            opts,
        }
    }

    pub fn forward<'g>(&self, ctx: &Ctx<'g, '_>, x: Var<'g>) -> Result<Var<'g>> {
        residual(ctx, self.opts, &self.norm, x, |h| self.attn.forward(ctx, h, h, h))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
}

/// `act(A · x · W + b)` over a `joints`-node graph with learnable `A`.
#[derive(Clone, Debug)]
pub struct GraphConv {
    pub adjacency: ParamId,
    pub weight: ParamId,
    pub bias: ParamId,
    pub joints: usize,
    pub f_in: usize,
    pub f_out: usize,
    pub activation: Activation,
}

impl GraphConv {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        adjacency: Tensor,
        f_in: usize,
        f_out: usize,
        activation: Activation,
        rng: &mut impl Rng,
    ) -> Self {
        let joints = adjacency.shape()[0];
        assert_eq!(adjacency.shape(), [joints, joints], "{name}: adjacency must be square");
        Self {
            adjacency: store.add(format!("{name}.adjacency"), adjacency),
            weight: store.add(format!("{name}.weight"), xavier(&[f_in, f_out], f_in, f_out, rng)),
            bias: store.add(format!("{name}.bias"), Tensor::zeros(&[f_out])),
            joints,
            f_in,
            f_out,
            activation,
        }
    }

    /// `x: [..., joints, f_in]` → `[..., joints, f_out]`.
    pub fn forward<'g>(&self, ctx: &Ctx<'g, '_>, x: Var<'g>) -> Result<Var<'g>> {
        let shape = x.shape();
        let rank = shape.len();
        let frames: usize = shape[..rank - 2].iter().product();
        // [J, frames*f_in] so aggregation is one product
        let cols = x
            .reshape(&[frames, self.joints, self.f_in])?
            .permute(&[1, 0, 2])?
            .reshape(&[self.joints, frames * self.f_in])?;
        let mixed = ctx
            .p(self.adjacency)
            .matmul(&cols)?
            .reshape(&[self.joints * frames, self.f_in])?
            .matmul(&ctx.p(self.weight))?
            .add(&ctx.p(self.bias))?
            .reshape(&[self.joints, frames, self.f_out])?
            .permute(&[1, 0, 2])?;
        let y = match self.activation {
            Activation::Identity => mixed,
            Activation::Relu => mixed.relu(),
        };
        let mut out = shape;
        out[rank - 1] = self.f_out;
        Ok(y.reshape(&out)?)
    }
}

/// Per-frame embedding: graph convolution over joints, then a linear lift of
/// the flattened joint features.
#[derive(Clone, Debug)]
pub struct JointEmbedding {
    pub gcn: GraphConv,
    pub lift: Linear,
    pub coords: usize,
}

impl JointEmbedding {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        adjacency: Tensor,
        coords: usize,
        features: usize,
        d_model: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let gcn = GraphConv::new(store, &format!("{name}.gcn"), adjacency, coords, features, Activation::Relu, rng);
        let lift = Linear::new(store, &format!("{name}.lift"), gcn.joints * features, d_model, rng);
        Self { gcn, lift, coords }
    }

    /// `x: [B, T, joints*coords]` → `[B, T, d_model]`.
    pub fn forward<'g>(&self, ctx: &Ctx<'g, '_>, x: Var<'g>) -> Result<Var<'g>> {
        let s = x.shape();
        let h = self.gcn.forward(ctx, x.reshape(&[s[0], s[1], self.gcn.joints, self.coords])?)?;
        let h = h.reshape(&[s[0], s[1], self.gcn.joints * self.gcn.f_out])?;
        self.lift.forward(ctx, h)
    }
}

/// Sinusoidal encodings for positions `offset..offset + len`.
pub fn positional_encoding(len: usize, d: usize, offset: usize) -> Tensor {
    Tensor::from_fn(&[len, d], |i| {
        let (pos, k) = ((i / d + offset) as f64, i % d);
        let freq = 10000f64.powf(-((k - k % 2) as f64) / d as f64);
        if k % 2 == 0 {
            (pos * freq).sin()
        } else {
            (pos * freq).cos()
        }
    })
}

/// Symmetric-normalized skeleton graph over the 16 non-hip joints with self
/// loops. Joints attached to the hip are linked to each other.
pub fn skeleton_adjacency() -> Tensor {
    use crate::data::skeleton::{BONES, NUM_JOINTS};
    let j = NUM_JOINTS - 1;
    let mut a = vec![0.0; j * j];
    for i in 0..j {
        a[i * j + i] = 1.0;
    }
    let hip_children: Vec<usize> = BONES.iter().filter(|b| b.0 == 0).map(|b| b.1 - 1).collect();
    let mut link = |p: usize, c: usize| {
        a[p * j + c] = 1.0;
        a[c * j + p] = 1.0;
    };
    for &(p, c) in BONES.iter().filter(|b| b.0 != 0) {
        link(p - 1, c - 1);
    }
    for (n, &p) in hip_children.iter().enumerate() {
        for &c in &hip_children[n + 1..] {
            link(p, c);
        }
    }
    let deg: Vec<f64> = (0..j).map(|r| a[r * j..(r + 1) * j].iter().sum()).collect();
    Tensor::from_fn(&[j, j], |i| a[i] / (deg[i / j] * deg[i % j]).sqrt())
}
