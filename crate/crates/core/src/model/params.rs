use std::cell::RefCell;
use std::collections::HashMap;

use rand_chacha::ChaCha8Rng;
use stpotr_tensor::{Graph, Tensor, Var};

use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
    pub grad: Tensor,
}

/// Named parameters in registration order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Param>,
    by_name: HashMap<String, usize>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a parameter. Names must be unique.
    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        let name = name.into();
        let id = self.params.len();
        let previous = self.by_name.insert(name.clone(), id);
        assert!(previous.is_none(), "duplicate parameter name {name}");
        let grad = Tensor::zeros(value.shape());
        self.params.push(Param { name, value, grad });
        ParamId(id)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total number of scalars.
    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.numel()).sum()
    }

    pub fn get(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Param {
        &mut self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].value
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).map(|&i| ParamId(i))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.iter().map(|p| p.name.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Param)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Param> {
        self.params.iter_mut()
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad.data_mut().fill(0.0);
        }
    }

    pub fn accumulate(&mut self, grads: Vec<(ParamId, Tensor)>) {
        for (id, g) in grads {
            let dst = self.params[id.0].grad.data_mut();
            for (d, s) in dst.iter_mut().zip(g.data()) {
                *d += s;
            }
        }
    }
}

/// Binds parameters into one graph on first use and carries the dropout
/// stream. Without a dropout rng every dropout is the identity.
pub struct Ctx<'g, 's> {
    graph: &'g Graph,
    store: &'s ParamStore,
    bound: RefCell<Vec<Option<Var<'g>>>>,
    track_grads: bool,
    dropout_rng: Option<RefCell<ChaCha8Rng>>,
}

impl<'g, 's> Ctx<'g, 's> {
    pub fn new(
        graph: &'g Graph,
        store: &'s ParamStore,
        track_grads: bool,
        dropout_rng: Option<ChaCha8Rng>,
    ) -> Self {
        Self {
            graph,
            store,
            bound: RefCell::new(vec![None; store.len()]),
            track_grads,
            dropout_rng: dropout_rng.map(RefCell::new),
        }
    }

    /// Inference: constants only, no dropout.
    pub fn eval(graph: &'g Graph, store: &'s ParamStore) -> Self {
        Self::new(graph, store, false, None)
    }

    pub fn train(graph: &'g Graph, store: &'s ParamStore, rng: ChaCha8Rng) -> Self {
        Self::new(graph, store, true, Some(rng))
    }

    pub fn graph(&self) -> &'g Graph {
        self.graph
    }

    pub fn store(&self) -> &'s ParamStore {
        self.store
    }

    pub fn is_training(&self) -> bool {
        self.dropout_rng.is_some()
    }

    pub fn p(&self, id: ParamId) -> Var<'g> {
        if let Some(v) = self.bound.borrow()[id.0] {
            return v;
        }
        let value = self.store.value(id).clone();
        let v = self.graph.leaf(value, self.track_grads);
        self.bound.borrow_mut()[id.0] = Some(v);
        v
    }

    pub fn constant(&self, t: Tensor) -> Var<'g> {
        self.graph.constant(t)
    }

    pub fn dropout(&self, x: Var<'g>, p: f64) -> Result<Var<'g>> {
        match &self.dropout_rng {
            Some(rng) if p > 0.0 => Ok(x.dropout(p, Some(&mut *rng.borrow_mut()))?),
            _ => Ok(x),
        }
    }

    /// Gradients of every bound parameter after a backward pass.
    pub fn gradients(&self) -> Vec<(ParamId, Tensor)> {
        self.bound
            .borrow()
            .iter()
            .enumerate()
            .filter_map(|(i, v)| Some((ParamId(i), v.as_ref()?.grad()?)))
            .collect()
    }

    pub fn into_rng(self) -> Option<ChaCha8Rng> {
        self.dropout_rng.map(RefCell::into_inner)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_bind_once_and_return_grads() {
        let mut store = ParamStore::new();
        let a = store.add("a", Tensor::new(vec![2], vec![1.0, 2.0]).unwrap());
        let g = Graph::new();
        let ctx = Ctx::new(&g, &store, true, None);
        let v1 = ctx.p(a);
        let v2 = ctx.p(a);
        assert_eq!(v1.id(), v2.id());
        let loss = v1.mul(&v2).unwrap().sum();
        g.backward(loss).unwrap();
        let grads = ctx.gradients();
        drop(ctx);
        store.accumulate(grads);
        assert_eq!(store.get(a).grad.data(), &[2.0, 4.0]);
        store.zero_grads();
        assert_eq!(store.get(a).grad.data(), &[0.0, 0.0]);
    }

    #[test]
    #[should_panic(expected = "duplicate")]
    fn duplicate_names_panic() {
        let mut store = ParamStore::new();
        store.add("w", Tensor::scalar(1.0));
        store.add("w", Tensor::scalar(2.0));
    }
}
