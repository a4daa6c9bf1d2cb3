//! Shape arithmetic and broadcasting index maps.

pub fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

pub fn strides(shape: &[usize]) -> Vec<usize> {
    let mut out = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        out[i] = out[i + 1] * shape[i + 1];
    }
    out
}

/// Numpy-style broadcast of two shapes, right-aligned.
pub fn broadcast_shape(a: &[usize], b: &[usize]) -> Option<Vec<usize>> {
    let rank = a.len().max(b.len());
    let mut out = vec![0; rank];
    for i in 0..rank {
        let da = if i + a.len() >= rank { a[i + a.len() - rank] } else { 1 };
        let db = if i + b.len() >= rank { b[i + b.len() - rank] } else { 1 };
        out[i] = match (da, db) {
            (x, y) if x == y => x,
            (1, y) => y,
            (x, 1) => x,
            _ => return None,
        };
    }
    Some(out)
}

/// Maps a flat output index to the flat index of a broadcast source.
#[derive(Clone, Debug)]
pub(crate) enum BroadcastMap {
    /// Source and output have the same number of elements.
    Same,
    /// Source equals the trailing dims of the output; index is `i % n`.
    Repeat(usize),
    Gather(Vec<usize>),
}

impl BroadcastMap {
    pub(crate) fn new(src: &[usize], out: &[usize]) -> Self {
        let n_src = numel(src);
        let n_out = numel(out);
        if n_src == n_out {
            return BroadcastMap::Same;
        }
        let trimmed: Vec<usize> = src.iter().copied().skip_while(|&d| d == 1).collect();
        if trimmed.len() <= out.len() && out[out.len() - trimmed.len()..] == trimmed[..] {
            return BroadcastMap::Repeat(n_src);
        }
        // general case: walk the output multi-index
        let rank = out.len();
        let mut src_strides = vec![0; rank];
        let s = strides(src);
        for k in 0..src.len() {
            let axis = rank - src.len() + k;
            src_strides[axis] = if src[k] == 1 { 0 } else { s[k] };
        }
        let mut map = Vec::with_capacity(n_out);
        let mut idx = vec![0usize; rank];
        let mut flat = 0usize;
        for _ in 0..n_out {
            map.push(flat);
            for axis in (0..rank).rev() {
                idx[axis] += 1;
                flat += src_strides[axis];
                if idx[axis] < out[axis] {
                    break;
                }
                flat -= src_strides[axis] * idx[axis];
                idx[axis] = 0;
            }
        }
        BroadcastMap::Gather(map)
    }

    #[inline]
    pub(crate) fn at(&self, i: usize) -> usize {
        match self {
            BroadcastMap::Same => i,
            BroadcastMap::Repeat(n) => i % n,
            BroadcastMap::Gather(m) => m[i],
        }
    }

    /// Sums `grad` (output-shaped) back onto a source with `n_src` elements.
    pub(crate) fn reduce(&self, grad: &[f64], n_src: usize) -> Vec<f64> {
        match self {
            BroadcastMap::Same => grad.to_vec(),
            BroadcastMap::Repeat(n) => {
                let mut out = vec![0.0; *n];
                for chunk in grad.chunks_exact(*n) {
                    for (o, g) in out.iter_mut().zip(chunk) {
                        *o += g;
                    }
                }
                out
            }
            BroadcastMap::Gather(m) => {
                let mut out = vec![0.0; n_src];
                for (g, &j) in grad.iter().zip(m) {
                    out[j] += g;
                }
                out
            }
        }
    }
}
