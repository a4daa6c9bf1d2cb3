//! Tape-style computation graph.
//!
//! Every operation appends a node holding its output value and whatever it
//! needs for the backward pass. Nodes are only ever appended, so the node
//! order is a topological order and the backward pass is a single reverse
//! sweep.

use std::cell::RefCell;
use std::fmt;
use std::rc::Rc;

use rand::Rng;

use crate::error::{Result, TensorError};
use crate::exec::for_each_chunk_mut;
use crate::linalg::{gemm, gemm_blocked, MatView};
use crate::shape::{broadcast_shape, numel, strides, BroadcastMap};
use crate::tensor::Tensor;

struct Node {
    value: Rc<Tensor>,
    op: Op,
    /// Some ancestor (or the node itself) is a trainable leaf.
    needs_grad: bool,
    /// Trainable leaf; only these keep a `grad` after backward.
    requires_grad: bool,
    grad: Option<Tensor>,
}

struct MatMulPlan {
    p: usize,
    q: usize,
    r: usize,
    trans_b: bool,
    a_batch: Vec<usize>,
    b_batch: Vec<usize>,
    n_a: usize,
    n_b: usize,
}

enum Op {
    Leaf,
    Add {
        a: usize,
        b: usize,
        ma: BroadcastMap,
        mb: BroadcastMap,
    },
    Sub {
        a: usize,
        b: usize,
        ma: BroadcastMap,
        mb: BroadcastMap,
    },
    Mul {
        a: usize,
        b: usize,
        ma: BroadcastMap,
        mb: BroadcastMap,
    },
    Scale(usize, f64),
    AddScalar(usize),
    Relu(usize),
    Abs(usize),
    MatMul {
        a: usize,
        b: usize,
        plan: MatMulPlan,
    },
    Softmax {
        x: usize,
        outer: usize,
        len: usize,
        inner: usize,
    },
    LayerNorm {
        x: usize,
        gain: usize,
        bias: usize,
        xhat: Vec<f64>,
        inv_std: Vec<f64>,
    },
    /// `map[out_flat] = in_flat`
    Permute {
        x: usize,
        map: Vec<usize>,
    },
    Reshape(usize),
    Concat {
        parts: Vec<usize>,
        outer: usize,
        /// elements per outer slice contributed by each part
        blocks: Vec<usize>,
    },
    Slice {
        x: usize,
        outer: usize,
        in_block: usize,
        start: usize,
        out_block: usize,
    },
    Dropout {
        x: usize,
        mask: Vec<f64>,
    },
    Sum(usize),
    Mean(usize),
}

/// Owner of all nodes recorded during one forward pass.
#[derive(Default)]
pub struct Graph {
    nodes: RefCell<Vec<Node>>,
}

/// Handle to a node of a [`Graph`].
#[derive(Clone, Copy)]
pub struct Var<'g> {
    graph: &'g Graph,
    id: usize,
}

impl fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Var")
            .field("id", &self.id)
            .field("shape", &self.shape())
            .finish()
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Leaf node. `requires_grad` leaves receive gradients on backward.
    pub fn leaf(&self, value: Tensor, requires_grad: bool) -> Var<'_> {
        self.push_node(Node {
            value: Rc::new(value),
            op: Op::Leaf,
            needs_grad: requires_grad,
            requires_grad,
            grad: None,
        })
    }

    pub fn constant(&self, value: Tensor) -> Var<'_> {
        self.leaf(value, false)
    }

    pub fn param(&self, value: Tensor) -> Var<'_> {
        self.leaf(value, true)
    }

    /// Clears every accumulated leaf gradient.
    pub fn zero_grad(&self) {
        for node in self.nodes.borrow_mut().iter_mut() {
            node.grad = None;
        }
    }

    fn push_node(&self, node: Node) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(node);
        Var {
            graph: self,
            id: nodes.len() - 1,
        }
    }

    fn push(&self, value: Tensor, op: Op, inputs: &[usize]) -> Var<'_> {
        let needs_grad = {
            let nodes = self.nodes.borrow();
            inputs.iter().any(|&i| nodes[i].needs_grad)
        };
        let op = if needs_grad { op } else { Op::Leaf };
        self.push_node(Node {
            value: Rc::new(value),
            op,
            needs_grad,
            requires_grad: false,
            grad: None,
        })
    }

    fn value(&self, id: usize) -> Rc<Tensor> {
        Rc::clone(&self.nodes.borrow()[id].value)
    }

    /// Reverse sweep from a scalar root. Gradients are added to whatever the
    /// trainable leaves already hold.
    pub fn backward(&self, root: Var<'_>) -> Result<()> {
        if !std::ptr::eq(root.graph, self) {
            return Err(TensorError::ForeignVar { op: "backward" });
        }
        let mut leaf_grads = Vec::new();
        {
            let nodes = self.nodes.borrow();
            let root_value = &nodes[root.id].value;
            if root_value.numel() != 1 {
                return Err(TensorError::NonScalarRoot {
                    shape: root_value.shape().to_vec(),
                });
            }
            let mut grads: Vec<Option<Vec<f64>>> = vec![None; root.id + 1];
            grads[root.id] = Some(vec![1.0]);
            for id in (0..=root.id).rev() {
                let Some(g) = grads[id].take() else { continue };
                let node = &nodes[id];
                if !node.needs_grad {
                    continue;
                }
                if node.requires_grad {
                    leaf_grads.push((id, g));
                    continue;
                }
                backward_node(&nodes, node, g, &mut grads);
            }
        }
        let mut nodes = self.nodes.borrow_mut();
        for (id, g) in leaf_grads {
            let node = &mut nodes[id];
            match &mut node.grad {
                Some(existing) => existing
                    .data_mut()
                    .iter_mut()
                    .zip(&g)
                    .for_each(|(e, v)| *e += v),
                None => {
                    node.grad = Some(
                        Tensor::new(node.value.shape().to_vec(), g)
                            .expect("gradient matches value shape"),
                    )
                }
            }
        }
        Ok(())
    }
}

fn accumulate(nodes: &[Node], grads: &mut [Option<Vec<f64>>], id: usize, g: Vec<f64>) {
    if !nodes[id].needs_grad {
        return;
    }
    match &mut grads[id] {
        Some(existing) => existing.iter_mut().zip(&g).for_each(|(e, v)| *e += v),
        slot => *slot = Some(g),
    }
}

fn backward_node(nodes: &[Node], node: &Node, g: Vec<f64>, grads: &mut [Option<Vec<f64>>]) {
    let val = |id: usize| -> &Tensor { &nodes[id].value };
    match &node.op {
        Op::Leaf => {}
        Op::Add { a, b, ma, mb } => {
            let ga = ma.reduce(&g, val(*a).numel());
            let gb = mb.reduce(&g, val(*b).numel());
            accumulate(nodes, grads, *a, ga);
            accumulate(nodes, grads, *b, gb);
        }
        Op::Sub { a, b, ma, mb } => {
            let ga = ma.reduce(&g, val(*a).numel());
            let mut gb = mb.reduce(&g, val(*b).numel());
            gb.iter_mut().for_each(|v| *v = -*v);
            accumulate(nodes, grads, *a, ga);
            accumulate(nodes, grads, *b, gb);
        }
        Op::Mul { a, b, ma, mb } => {
            let (av, bv) = (val(*a).data(), val(*b).data());
            if nodes[*a].needs_grad {
                let scaled: Vec<f64> = g
                    .iter()
                    .enumerate()
                    .map(|(i, gi)| gi * bv[mb.at(i)])
                    .collect();
                accumulate(nodes, grads, *a, ma.reduce(&scaled, av.len()));
            }
            if nodes[*b].needs_grad {
                let scaled: Vec<f64> = g
                    .iter()
                    .enumerate()
                    .map(|(i, gi)| gi * av[ma.at(i)])
                    .collect();
                accumulate(nodes, grads, *b, mb.reduce(&scaled, bv.len()));
            }
        }
        Op::Scale(x, c) => {
            accumulate(nodes, grads, *x, g.iter().map(|v| v * c).collect());
        }
        Op::AddScalar(x) | Op::Reshape(x) => accumulate(nodes, grads, *x, g),
        Op::Relu(x) => {
            let xv = val(*x).data();
            let gx = g
                .iter()
                .zip(xv)
                .map(|(gi, &xi)| if xi > 0.0 { *gi } else { 0.0 })
                .collect();
            accumulate(nodes, grads, *x, gx);
        }
        Op::Abs(x) => {
            let xv = val(*x).data();
            let gx = g
                .iter()
                .zip(xv)
                .map(|(gi, &xi)| {
                    if xi > 0.0 {
                        *gi
                    } else if xi < 0.0 {
                        -*gi
                    } else {
                        0.0
                    }
                })
                .collect();
            accumulate(nodes, grads, *x, gx);
        }
        Op::MatMul { a, b, plan } => {
            if nodes[*a].needs_grad {
                let ga = matmul_grad_a(plan, &g, val(*b).data());
                accumulate(nodes, grads, *a, ga);
            }
            if nodes[*b].needs_grad {
                let gb = matmul_grad_b(plan, &g, val(*a).data());
                accumulate(nodes, grads, *b, gb);
            }
        }
        Op::Softmax {
            x,
            outer,
            len,
            inner,
        } => {
            let y = node.value.data();
            let mut gx = vec![0.0; y.len()];
            for o in 0..*outer {
                for i in 0..*inner {
                    let base = o * len * inner + i;
                    let mut dot = 0.0;
                    for k in 0..*len {
                        let j = base + k * inner;
                        dot += g[j] * y[j];
                    }
                    for k in 0..*len {
                        let j = base + k * inner;
                        gx[j] = y[j] * (g[j] - dot);
                    }
                }
            }
            accumulate(nodes, grads, *x, gx);
        }
        Op::LayerNorm {
            x,
            gain,
            bias,
            xhat,
            inv_std,
        } => {
            let gv = val(*gain).data();
            let d = gv.len();
            let mut ggain = vec![0.0; d];
            let mut gbias = vec![0.0; d];
            let mut gx = vec![0.0; g.len()];
            for (row, inv) in inv_std.iter().enumerate() {
                let off = row * d;
                let gr = &g[off..off + d];
                let xr = &xhat[off..off + d];
                let mut sum_dx = 0.0;
                let mut sum_dx_x = 0.0;
                for k in 0..d {
                    let dxhat = gr[k] * gv[k];
                    sum_dx += dxhat;
                    sum_dx_x += dxhat * xr[k];
                    ggain[k] += gr[k] * xr[k];
                    gbias[k] += gr[k];
                }
                let n = d as f64;
                for k in 0..d {
                    let dxhat = gr[k] * gv[k];
                    gx[off + k] = inv / n * (n * dxhat - sum_dx - xr[k] * sum_dx_x);
                }
            }
            accumulate(nodes, grads, *x, gx);
            accumulate(nodes, grads, *gain, ggain);
            accumulate(nodes, grads, *bias, gbias);
        }
        Op::Permute { x, map } => {
            let mut gx = vec![0.0; g.len()];
            for (gi, &j) in g.iter().zip(map) {
                gx[j] = *gi;
            }
            accumulate(nodes, grads, *x, gx);
        }
        Op::Concat {
            parts,
            outer,
            blocks,
        } => {
            let total: usize = blocks.iter().sum();
            let mut offset = 0;
            for (&part, &block) in parts.iter().zip(blocks) {
                if nodes[part].needs_grad {
                    let mut gp = Vec::with_capacity(outer * block);
                    for o in 0..*outer {
                        let start = o * total + offset;
                        gp.extend_from_slice(&g[start..start + block]);
                    }
                    accumulate(nodes, grads, part, gp);
                }
                offset += block;
            }
        }
        Op::Slice {
            x,
            outer,
            in_block,
            start,
            out_block,
        } => {
            let mut gx = vec![0.0; outer * in_block];
            for o in 0..*outer {
                let dst = o * in_block + start;
                gx[dst..dst + out_block].copy_from_slice(&g[o * out_block..(o + 1) * out_block]);
            }
            accumulate(nodes, grads, *x, gx);
        }
        Op::Dropout { x, mask } => {
            let gx = g.iter().zip(mask).map(|(gi, m)| gi * m).collect();
            accumulate(nodes, grads, *x, gx);
        }
        Op::Sum(x) => {
            let n = val(*x).numel();
            accumulate(nodes, grads, *x, vec![g[0]; n]);
        }
        Op::Mean(x) => {
            let n = val(*x).numel();
            accumulate(nodes, grads, *x, vec![g[0] / n as f64; n]);
        }
    }
}

fn b_view<'a>(plan: &MatMulPlan, data: &'a [f64], batch: usize) -> MatView<'a> {
    let off = batch * plan.q * plan.r;
    if plan.trans_b {
        MatView::transposed(data, off, plan.r, plan.q)
    } else {
        MatView::row_major(data, off, plan.q, plan.r)
    }
}

/// `bᵀ` as an `r x q` view.
fn b_view_t<'a>(plan: &MatMulPlan, data: &'a [f64], batch: usize) -> MatView<'a> {
    let off = batch * plan.q * plan.r;
    if plan.trans_b {
        MatView::row_major(data, off, plan.r, plan.q)
    } else {
        MatView::transposed(data, off, plan.q, plan.r)
    }
}

fn matmul_forward(plan: &MatMulPlan, a: &[f64], b: &[f64]) -> Vec<f64> {
    let (p, q, r) = (plan.p, plan.q, plan.r);
    let nb = plan.a_batch.len();
    let mut out = vec![0.0; nb * p * r];
    if out.is_empty() {
        return out;
    }
    if nb == 1 {
        gemm_blocked(
            MatView::row_major(a, plan.a_batch[0] * p * q, p, q),
            b_view(plan, b, plan.b_batch[0]),
            0.0,
            &mut out,
        );
    } else {
        for_each_chunk_mut(&mut out, p * r, |i, c| {
            gemm(
                MatView::row_major(a, plan.a_batch[i] * p * q, p, q),
                b_view(plan, b, plan.b_batch[i]),
                0.0,
                c,
            );
        });
    }
    out
}

fn matmul_grad_a(plan: &MatMulPlan, g: &[f64], b: &[f64]) -> Vec<f64> {
    let (p, q, r) = (plan.p, plan.q, plan.r);
    let nb = plan.a_batch.len();
    let mut ga = vec![0.0; plan.n_a * p * q];
    if ga.is_empty() {
        return ga;
    }
    if plan.n_a == nb {
        // one output batch per slot of `a`
        if nb == 1 {
            gemm_blocked(
                MatView::row_major(g, 0, p, r),
                b_view_t(plan, b, plan.b_batch[0]),
                0.0,
                &mut ga,
            );
        } else {
            // n_a == nb means `a` is not broadcast, so slot i is output batch i
            for_each_chunk_mut(&mut ga, p * q, |i, c| {
                gemm(
                    MatView::row_major(g, i * p * r, p, r),
                    b_view_t(plan, b, plan.b_batch[i]),
                    0.0,
                    c,
                );
            });
        }
    } else {
        for i in 0..nb {
            let slot = plan.a_batch[i];
            gemm(
                MatView::row_major(g, i * p * r, p, r),
                b_view_t(plan, b, plan.b_batch[i]),
                1.0,
                &mut ga[slot * p * q..(slot + 1) * p * q],
            );
        }
    }
    ga
}

fn matmul_grad_b(plan: &MatMulPlan, g: &[f64], a: &[f64]) -> Vec<f64> {
    let (p, q, r) = (plan.p, plan.q, plan.r);
    let nb = plan.b_batch.len();
    let mut gb = vec![0.0; plan.n_b * q * r];
    if gb.is_empty() {
        return gb;
    }
    // contribution of output batch i to its slot of b
    let term = |i: usize, beta: f64, c: &mut [f64]| {
        let a_off = plan.a_batch[i] * p * q;
        if plan.trans_b {
            // (r x q) += gᵀ·a
            gemm(
                MatView::transposed(g, i * p * r, p, r),
                MatView::row_major(a, a_off, p, q),
                beta,
                c,
            );
        } else {
            // (q x r) += aᵀ·g
            gemm(
                MatView::transposed(a, a_off, p, q),
                MatView::row_major(g, i * p * r, p, r),
                beta,
                c,
            );
        }
    };
    if plan.n_b == nb && nb > 1 {
        for_each_chunk_mut(&mut gb, q * r, |i, c| term(i, 0.0, c));
    } else if nb == 1 {
        let slot = plan.b_batch[0];
        let c = &mut gb[slot * q * r..(slot + 1) * q * r];
        // reduction over p rows of `a`; split over the rows of the result
        if plan.trans_b {
            gemm_blocked(
                MatView::transposed(g, 0, p, r),
                MatView::row_major(a, plan.a_batch[0] * p * q, p, q),
                0.0,
                c,
            );
        } else {
            gemm_blocked(
                MatView::transposed(a, plan.a_batch[0] * p * q, p, q),
                MatView::row_major(g, 0, p, r),
                0.0,
                c,
            );
        }
    } else {
        for i in 0..nb {
            let slot = plan.b_batch[i];
            term(i, 1.0, &mut gb[slot * q * r..(slot + 1) * q * r]);
        }
    }
    gb
}

/// Concatenates along `axis`; all other dims must agree.
pub fn concat<'g>(parts: &[Var<'g>], axis: usize) -> Result<Var<'g>> {
    let first = parts.first().ok_or_else(|| TensorError::InvalidShape {
        op: "concat",
        detail: "no inputs".into(),
    })?;
    let graph = first.graph;
    let base = first.shape();
    if axis >= base.len() {
        return Err(TensorError::InvalidAxis {
            op: "concat",
            axis,
            rank: base.len(),
        });
    }
    let mut out_shape = base.clone();
    out_shape[axis] = 0;
    let values: Vec<Rc<Tensor>> = parts.iter().map(|p| p.value()).collect();
    for (part, v) in parts.iter().zip(&values) {
        if !std::ptr::eq(part.graph, graph) {
            return Err(TensorError::ForeignVar { op: "concat" });
        }
        let s = v.shape();
        let compatible = s.len() == base.len()
            && s.iter()
                .zip(&base)
                .enumerate()
                .all(|(k, (x, y))| k == axis || x == y);
        if !compatible {
            return Err(TensorError::ShapeMismatch {
                op: "concat",
                lhs: base.clone(),
                rhs: s.to_vec(),
            });
        }
        out_shape[axis] += s[axis];
    }
    let outer = numel(&base[..axis]);
    let inner = numel(&base[axis + 1..]);
    let blocks: Vec<usize> = values.iter().map(|v| v.shape()[axis] * inner).collect();
    let mut data = Vec::with_capacity(numel(&out_shape));
    for o in 0..outer {
        for (v, &block) in values.iter().zip(&blocks) {
            data.extend_from_slice(&v.data()[o * block..(o + 1) * block]);
        }
    }
    let ids: Vec<usize> = parts.iter().map(|p| p.id).collect();
    let out = Tensor::new(out_shape, data)?;
    Ok(graph.push(
        out,
        Op::Concat {
            parts: ids.clone(),
            outer,
            blocks,
        },
        &ids,
    ))
}

impl<'g> Var<'g> {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn graph(&self) -> &'g Graph {
        self.graph
    }

    pub fn value(&self) -> Rc<Tensor> {
        self.graph.value(self.id)
    }

    pub fn shape(&self) -> Vec<usize> {
        self.graph.nodes.borrow()[self.id].value.shape().to_vec()
    }

    /// Accumulated gradient of a trainable leaf.
    pub fn grad(&self) -> Option<Tensor> {
        self.graph.nodes.borrow()[self.id].grad.clone()
    }

    fn same_graph(&self, other: &Var<'g>, op: &'static str) -> Result<()> {
        if std::ptr::eq(self.graph, other.graph) {
            Ok(())
        } else {
            Err(TensorError::ForeignVar { op })
        }
    }

    fn binary(
        &self,
        other: &Var<'g>,
        op: &'static str,
        f: impl Fn(f64, f64) -> f64,
        make: impl FnOnce(usize, usize, BroadcastMap, BroadcastMap) -> Op,
    ) -> Result<Var<'g>> {
        self.same_graph(other, op)?;
        let (av, bv) = (self.value(), other.value());
        let out_shape =
            broadcast_shape(av.shape(), bv.shape()).ok_or_else(|| TensorError::ShapeMismatch {
                op,
                lhs: av.shape().to_vec(),
                rhs: bv.shape().to_vec(),
            })?;
        let ma = BroadcastMap::new(av.shape(), &out_shape);
        let mb = BroadcastMap::new(bv.shape(), &out_shape);
        let (a, b) = (av.data(), bv.data());
        let n = numel(&out_shape);
        let data: Vec<f64> = match (&ma, &mb) {
            (BroadcastMap::Same, BroadcastMap::Same) => {
                a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect()
            }
            (BroadcastMap::Same, BroadcastMap::Repeat(k)) => a
                .chunks_exact(*k)
                .flat_map(|chunk| chunk.iter().zip(b).map(|(&x, &y)| f(x, y)))
                .collect(),
            _ => (0..n).map(|i| f(a[ma.at(i)], b[mb.at(i)])).collect(),
        };
        let out = Tensor::new(out_shape, data)?;
        Ok(self
            .graph
            .push(out, make(self.id, other.id, ma, mb), &[self.id, other.id]))
    }

    pub fn add(&self, other: &Var<'g>) -> Result<Var<'g>> {
        self.binary(other, "add", |x, y| x + y, |a, b, ma, mb| Op::Add {
            a,
            b,
            ma,
            mb,
        })
    }

    pub fn sub(&self, other: &Var<'g>) -> Result<Var<'g>> {
        self.binary(other, "sub", |x, y| x - y, |a, b, ma, mb| Op::Sub {
            a,
            b,
            ma,
            mb,
        })
    }

    pub fn mul(&self, other: &Var<'g>) -> Result<Var<'g>> {
        self.binary(other, "mul", |x, y| x * y, |a, b, ma, mb| Op::Mul {
            a,
            b,
            ma,
            mb,
        })
    }

    fn unary(&self, f: impl Fn(f64) -> f64, op: Op) -> Var<'g> {
        let v = self.value();
        let data = v.data().iter().map(|&x| f(x)).collect();
        let out = Tensor::new(v.shape().to_vec(), data).expect("same shape");
        self.graph.push(out, op, &[self.id])
    }

    pub fn scale(&self, c: f64) -> Var<'g> {
        self.unary(|x| x * c, Op::Scale(self.id, c))
    }

    pub fn add_scalar(&self, c: f64) -> Var<'g> {
        self.unary(|x| x + c, Op::AddScalar(self.id))
    }

    pub fn relu(&self) -> Var<'g> {
        self.unary(|x| x.max(0.0), Op::Relu(self.id))
    }

    pub fn abs(&self) -> Var<'g> {
        self.unary(f64::abs, Op::Abs(self.id))
    }

    pub fn sum(&self) -> Var<'g> {
        let total = self.value().data().iter().sum();
        self.graph
            .push(Tensor::scalar(total), Op::Sum(self.id), &[self.id])
    }

    pub fn mean(&self) -> Var<'g> {
        let v = self.value();
        let mean = v.data().iter().sum::<f64>() / v.numel() as f64;
        self.graph
            .push(Tensor::scalar(mean), Op::Mean(self.id), &[self.id])
    }

    /// Batched product `[..., p, q] x [..., q, r]` with broadcast batch dims.
    pub fn matmul(&self, other: &Var<'g>) -> Result<Var<'g>> {
        self.matmul_impl(other, false)
    }

    /// `self · otherᵀ` over the last two axes: `[..., p, q] x [..., r, q]`.
    pub fn matmul_t(&self, other: &Var<'g>) -> Result<Var<'g>> {
        self.matmul_impl(other, true)
    }

    fn matmul_impl(&self, other: &Var<'g>, trans_b: bool) -> Result<Var<'g>> {
        let op = if trans_b { "matmul_t" } else { "matmul" };
        self.same_graph(other, op)?;
        let (av, bv) = (self.value(), other.value());
        let (sa, sb) = (av.shape(), bv.shape());
        let mismatch = || TensorError::ShapeMismatch {
            op,
            lhs: sa.to_vec(),
            rhs: sb.to_vec(),
        };
        if sa.len() < 2 || sb.len() < 2 {
            return Err(mismatch());
        }
        let (p, q) = (sa[sa.len() - 2], sa[sa.len() - 1]);
        let (bq, r) = if trans_b {
            (sb[sb.len() - 1], sb[sb.len() - 2])
        } else {
            (sb[sb.len() - 2], sb[sb.len() - 1])
        };
        if q != bq {
            return Err(mismatch());
        }
        let (ba, bb) = (&sa[..sa.len() - 2], &sb[..sb.len() - 2]);
        let batch = broadcast_shape(ba, bb).ok_or_else(mismatch)?;
        let nb = numel(&batch);
        let map_a = BroadcastMap::new(ba, &batch);
        let map_b = BroadcastMap::new(bb, &batch);
        let plan = MatMulPlan {
            p,
            q,
            r,
            trans_b,
            a_batch: (0..nb).map(|i| map_a.at(i)).collect(),
            b_batch: (0..nb).map(|i| map_b.at(i)).collect(),
            n_a: numel(ba),
            n_b: numel(bb),
        };
        let data = matmul_forward(&plan, av.data(), bv.data());
        let mut shape = batch;
        shape.extend([p, r]);
        let out = Tensor::new(shape, data)?;
        Ok(self.graph.push(
            out,
            Op::MatMul {
                a: self.id,
                b: other.id,
                plan,
            },
            &[self.id, other.id],
        ))
    }

    /// Max-shifted softmax along `axis`.
    pub fn softmax(&self, axis: usize) -> Result<Var<'g>> {
        let v = self.value();
        let shape = v.shape();
        if axis >= shape.len() {
            return Err(TensorError::InvalidAxis {
                op: "softmax",
                axis,
                rank: shape.len(),
            });
        }
        let outer = numel(&shape[..axis]);
        let len = shape[axis];
        let inner = numel(&shape[axis + 1..]);
        let x = v.data();
        let mut y = vec![0.0; x.len()];
        for o in 0..outer {
            for i in 0..inner {
                let base = o * len * inner + i;
                let mut max = f64::NEG_INFINITY;
                for k in 0..len {
                    max = max.max(x[base + k * inner]);
                }
                let mut total = 0.0;
                for k in 0..len {
                    let e = (x[base + k * inner] - max).exp();
                    y[base + k * inner] = e;
                    total += e;
                }
                for k in 0..len {
                    y[base + k * inner] /= total;
                }
            }
        }
        let out = Tensor::new(shape.to_vec(), y)?;
        Ok(self.graph.push(
            out,
            Op::Softmax {
                x: self.id,
                outer,
                len,
                inner,
            },
            &[self.id],
        ))
    }

    /// Normalizes over the last axis, then applies `gain` and `bias` (both
    /// shaped like the last axis).
    pub fn layer_norm(&self, gain: &Var<'g>, bias: &Var<'g>, eps: f64) -> Result<Var<'g>> {
        self.same_graph(gain, "layer_norm")?;
        self.same_graph(bias, "layer_norm")?;
        let v = self.value();
        let shape = v.shape();
        let d = *shape.last().ok_or_else(|| TensorError::InvalidShape {
            op: "layer_norm",
            detail: "scalar input".into(),
        })?;
        let (gv, bv) = (gain.value(), bias.value());
        for p in [&gv, &bv] {
            if p.shape() != [d] {
                return Err(TensorError::ShapeMismatch {
                    op: "layer_norm",
                    lhs: shape.to_vec(),
                    rhs: p.shape().to_vec(),
                });
            }
        }
        let x = v.data();
        let rows = if d == 0 { 0 } else { x.len() / d };
        let mut xhat = vec![0.0; x.len()];
        let mut inv_std = Vec::with_capacity(rows);
        let mut y = vec![0.0; x.len()];
        let n = d as f64;
        for row in 0..rows {
            let xr = &x[row * d..(row + 1) * d];
            let mean = xr.iter().sum::<f64>() / n;
            let var = xr.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let inv = 1.0 / (var + eps).sqrt();
            inv_std.push(inv);
            for k in 0..d {
                let h = (xr[k] - mean) * inv;
                xhat[row * d + k] = h;
                y[row * d + k] = h * gv.data()[k] + bv.data()[k];
            }
        }
        let out = Tensor::new(shape.to_vec(), y)?;
        Ok(self.graph.push(
            out,
            Op::LayerNorm {
                x: self.id,
                gain: gain.id,
                bias: bias.id,
                xhat,
                inv_std,
            },
            &[self.id, gain.id, bias.id],
        ))
    }

    /// Reorders axes; output axis `i` is input axis `axes[i]`. Materializes.
    pub fn permute(&self, axes: &[usize]) -> Result<Var<'g>> {
        let v = self.value();
        let shape = v.shape();
        let rank = shape.len();
        let mut seen = vec![false; rank];
        if axes.len() != rank
            || axes
                .iter()
                .any(|&a| a >= rank || std::mem::replace(&mut seen[a], true))
        {
            return Err(TensorError::InvalidShape {
                op: "permute",
                detail: format!("{axes:?} is not a permutation of {rank} axes"),
            });
        }
        let in_strides = strides(shape);
        let out_shape: Vec<usize> = axes.iter().map(|&a| shape[a]).collect();
        let step: Vec<usize> = axes.iter().map(|&a| in_strides[a]).collect();
        let n = v.numel();
        let mut map = Vec::with_capacity(n);
        let mut idx = vec![0usize; rank];
        let mut flat = 0usize;
        for _ in 0..n {
            map.push(flat);
            for k in (0..rank).rev() {
                idx[k] += 1;
                flat += step[k];
                if idx[k] < out_shape[k] {
                    break;
                }
                flat -= step[k] * idx[k];
                idx[k] = 0;
            }
        }
        let x = v.data();
        let data = map.iter().map(|&j| x[j]).collect();
        let out = Tensor::new(out_shape, data)?;
        Ok(self
            .graph
            .push(out, Op::Permute { x: self.id, map }, &[self.id]))
    }

    /// Swaps two axes.
    pub fn transpose(&self, a: usize, b: usize) -> Result<Var<'g>> {
        let rank = self.shape().len();
        if a >= rank || b >= rank {
            return Err(TensorError::InvalidAxis {
                op: "transpose",
                axis: a.max(b),
                rank,
            });
        }
        let mut axes: Vec<usize> = (0..rank).collect();
        axes.swap(a, b);
        self.permute(&axes)
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Var<'g>> {
        let v = self.value();
        if numel(shape) != v.numel() {
            return Err(TensorError::ShapeMismatch {
                op: "reshape",
                lhs: v.shape().to_vec(),
                rhs: shape.to_vec(),
            });
        }
        let out = Tensor::new(shape.to_vec(), v.data().to_vec())?;
        Ok(self.graph.push(out, Op::Reshape(self.id), &[self.id]))
    }

    /// Elements `start..end` along `axis`.
    pub fn slice(&self, axis: usize, start: usize, end: usize) -> Result<Var<'g>> {
        let v = self.value();
        let shape = v.shape();
        if axis >= shape.len() {
            return Err(TensorError::InvalidAxis {
                op: "slice",
                axis,
                rank: shape.len(),
            });
        }
        if start > end || end > shape[axis] {
            return Err(TensorError::InvalidShape {
                op: "slice",
                detail: format!("range {start}..{end} invalid for axis of size {}", shape[axis]),
            });
        }
        let outer = numel(&shape[..axis]);
        let inner = numel(&shape[axis + 1..]);
        let in_block = shape[axis] * inner;
        let out_block = (end - start) * inner;
        let x = v.data();
        let mut data = Vec::with_capacity(outer * out_block);
        for o in 0..outer {
            let s = o * in_block + start * inner;
            data.extend_from_slice(&x[s..s + out_block]);
        }
        let mut out_shape = shape.to_vec();
        out_shape[axis] = end - start;
        let out = Tensor::new(out_shape, data)?;
        Ok(self.graph.push(
            out,
            Op::Slice {
                x: self.id,
                outer,
                in_block,
                start: start * inner,
                out_block,
            },
            &[self.id],
        ))
    }

    /// Inverted dropout: zeroes each element with probability `p_drop` and
    /// rescales survivors by `1 / (1 - p_drop)`. `None` means eval mode.
    pub fn dropout<R: Rng + ?Sized>(&self, p_drop: f64, rng: Option<&mut R>) -> Result<Var<'g>> {
        if !(0.0..1.0).contains(&p_drop) {
            return Err(TensorError::InvalidShape {
                op: "dropout",
                detail: format!("drop probability {p_drop} outside [0, 1)"),
            });
        }
        let Some(rng) = rng else { return Ok(*self) };
        if p_drop == 0.0 {
            return Ok(*self);
        }
        let keep = 1.0 - p_drop;
        let v = self.value();
        let mask: Vec<f64> = (0..v.numel())
            .map(|_| {
                if rng.random::<f64>() < keep {
                    1.0 / keep
                } else {
                    0.0
                }
            })
            .collect();
        let data = v.data().iter().zip(&mask).map(|(x, m)| x * m).collect();
        let out = Tensor::new(v.shape().to_vec(), data)?;
        Ok(self
            .graph
            .push(out, Op::Dropout { x: self.id, mask }, &[self.id]))
    }
}
