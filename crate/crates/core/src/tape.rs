//! Reverse-mode automatic differentiation over a Wengert list.
//!
//! A [`Tape`] records one forward pass. Parameters are borrowed from a
//! [`ParamStore`] rather than copied; [`Tape::backward`] replays the list in
//! reverse and returns gradients for every trainable parameter of the store.

use std::borrow::Cow;
use std::collections::HashMap;

use crate::error::{shape_err, CoatError, Result};
use crate::layers::{self, AttentionConfig};
use crate::ops::{self, Activation, LossKind};
use crate::tensor::{Gradients, ParamStore, Real, Tensor};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op<T> {
    Leaf,
    Param,
    Conv { x: Var, kernel: Var, bias: Var },
    Affine { x: Var, weights: Var, bias: Var },
    Relu(Var),
    Add(Var, Var),
    Mul(Var, Var),
    Scale(Var, T),
    Softmax(Var),
    Attention { x: Var, config: AttentionConfig, weights: Vec<T> },
    ConcatChannels(Vec<Var>),
    ConcatFlat(Vec<Var>),
    Gather { x: Var, positions: Vec<(usize, usize)> },
    Sum(Var),
    Mae { pred: Var, target: Tensor<T> },
    CrossEntropy { pred: Var, target: Tensor<T> },
}

#[derive(Debug)]
struct Node<'a, T: Real> {
    value: Cow<'a, Tensor<T>>,
    op: Op<T>,
}

#[derive(Debug)]
pub struct Tape<'a, T: Real> {
    nodes: Vec<Node<'a, T>>,
    params: HashMap<String, Var>,
}

impl<'a, T: Real> Default for Tape<'a, T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<'a, T: Real> Tape<'a, T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            params: HashMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Cow<'a, Tensor<T>>, op: Op<T>) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, var: Var) -> &Tensor<T> {
        &self.nodes[var.0].value
    }

    /// A constant: receives gradients but they are not reported.
    pub fn input(&mut self, tensor: Tensor<T>) -> Var {
        self.push(Cow::Owned(tensor), Op::Leaf)
    }

    pub fn input_ref(&mut self, tensor: &'a Tensor<T>) -> Var {
        self.push(Cow::Borrowed(tensor), Op::Leaf)
    }

    /// Borrow a named parameter; repeated calls return the same node.
    pub fn param(&mut self, store: &'a ParamStore<T>, name: &str) -> Result<Var> {
        if let Some(&v) = self.params.get(name) {
            return Ok(v);
        }
        let tensor = store
            .get(name)
            .ok_or_else(|| CoatError::Config(format!("missing parameter {name}")))?;
        let v = self.push(Cow::Borrowed(tensor), Op::Param);
        self.params.insert(name.to_string(), v);
        Ok(v)
    }

    pub fn conv2d_same(&mut self, x: Var, kernel: Var, bias: Var) -> Result<Var> {
        let out = ops::conv2d_same(self.value(x), self.value(kernel), self.value(bias))?;
        Ok(self.push(Cow::Owned(out), Op::Conv { x, kernel, bias }))
    }

    pub fn affine(&mut self, x: Var, weights: Var, bias: Var) -> Result<Var> {
        let out = ops::affine(self.value(x), self.value(weights), self.value(bias))?;
        Ok(self.push(Cow::Owned(out), Op::Affine { x, weights, bias }))
    }

    pub fn dense(&mut self, x: Var, weights: Var, bias: Var, activation: Activation) -> Result<Var> {
        let z = self.affine(x, weights, bias)?;
        Ok(match activation {
            Activation::Identity => z,
            Activation::Relu => self.relu(z),
            Activation::Softmax => self.softmax(z),
        })
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let out = ops::relu(self.value(x));
        self.push(Cow::Owned(out), Op::Relu(x))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let mut out = self.value(a).clone();
        out.add_assign(self.value(b))?;
        Ok(self.push(Cow::Owned(out), Op::Add(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return shape_err(format!("mul {:?} and {:?}", va.shape(), vb.shape()));
        }
        let data = va.data().iter().zip(vb.data()).map(|(&x, &y)| x * y).collect();
        let out = Tensor::new(va.shape().to_vec(), data)?;
        Ok(self.push(Cow::Owned(out), Op::Mul(a, b)))
    }

    pub fn scale(&mut self, x: Var, factor: T) -> Var {
        let out = self.value(x).map(|v| v * factor);
        self.push(Cow::Owned(out), Op::Scale(x, factor))
    }

    pub fn softmax(&mut self, x: Var) -> Var {
        let out = ops::softmax(self.value(x));
        self.push(Cow::Owned(out), Op::Softmax(x))
    }

    pub fn attention(&mut self, x: Var, config: AttentionConfig) -> Result<Var> {
        let (out, weights) = layers::self_attention_with_weights(self.value(x), config)?;
        Ok(self.push(Cow::Owned(out), Op::Attention { x, config, weights }))
    }

    pub fn concat_channels(&mut self, parts: &[Var]) -> Result<Var> {
        let values: Vec<&Tensor<T>> = parts.iter().map(|&p| self.value(p)).collect();
        let out = ops::concat_channels(&values)?;
        Ok(self.push(Cow::Owned(out), Op::ConcatChannels(parts.to_vec())))
    }

    /// Concatenate the flattened data of several nodes into one vector.
    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let data: Vec<T> = parts
            .iter()
            .flat_map(|&p| self.value(p).data().iter().copied())
            .collect();
        self.push(Cow::Owned(Tensor::vector(data)), Op::ConcatFlat(parts.to_vec()))
    }

    pub fn gather(&mut self, x: Var, positions: &[(usize, usize)]) -> Result<Var> {
        let out = ops::gather_positions(self.value(x), positions)?;
        Ok(self.push(
            Cow::Owned(out),
            Op::Gather {
                x,
                positions: positions.to_vec(),
            },
        ))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let out = Tensor::scalar(self.value(x).sum());
        self.push(Cow::Owned(out), Op::Sum(x))
    }

    pub fn loss(&mut self, kind: LossKind, pred: Var, target: Tensor<T>) -> Result<Var> {
        let value = ops::loss_eval(kind, self.value(pred), &target)?;
        let op = match kind {
            LossKind::Mae => Op::Mae { pred, target },
            LossKind::CategoricalCrossEntropy => Op::CrossEntropy { pred, target },
        };
        Ok(self.push(Cow::Owned(Tensor::scalar(value)), op))
    }

    /// Gradients of the scalar `loss` for every trainable parameter in
    /// `store`. Trainable parameters the loss does not depend on get zeros.
    pub fn backward(&self, loss: Var, store: &ParamStore<T>) -> Result<Gradients<T>> {
        if !self.value(loss).is_scalar() {
            return Err(CoatError::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let mut grads: Vec<Option<Tensor<T>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Tensor::filled(self.value(loss).shape(), T::one()));

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf => {}
                Op::Param => {
                    grads[idx] = Some(g);
                }
                Op::Conv { x, kernel, bias } => {
                    let (dx, dk, db) =
                        ops::conv2d_same_backward(self.value(*x), self.value(*kernel), &g)?;
                    accumulate(&mut grads, *x, dx)?;
                    accumulate(&mut grads, *kernel, dk)?;
                    accumulate(&mut grads, *bias, db)?;
                }
                Op::Affine { x, weights, bias } => {
                    let (dx, dw, db) = ops::affine_backward(self.value(*x), self.value(*weights), &g);
                    let dx = dx.reshape(self.value(*x).shape().to_vec())?;
                    accumulate(&mut grads, *x, dx)?;
                    accumulate(&mut grads, *weights, dw)?;
                    accumulate(&mut grads, *bias, db)?;
                }
                Op::Relu(x) => {
                    let out = &node.value;
                    let data = g
                        .data()
                        .iter()
                        .zip(out.data())
                        .map(|(&gv, &o)| if o > T::zero() { gv } else { T::zero() })
                        .collect();
                    accumulate(&mut grads, *x, Tensor::new(g.shape().to_vec(), data)?)?;
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, g.clone())?;
                    accumulate(&mut grads, *b, g)?;
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (self.value(*a), self.value(*b));
                    let da = g.data().iter().zip(vb.data()).map(|(&x, &y)| x * y).collect();
                    let db = g.data().iter().zip(va.data()).map(|(&x, &y)| x * y).collect();
                    accumulate(&mut grads, *a, Tensor::new(va.shape().to_vec(), da)?)?;
                    accumulate(&mut grads, *b, Tensor::new(vb.shape().to_vec(), db)?)?;
                }
                Op::Scale(x, factor) => {
                    let f = *factor;
                    accumulate(&mut grads, *x, g.map(|v| v * f))?;
                }
                Op::Softmax(x) => {
                    let p = node.value.data();
                    let dot: T = p.iter().zip(g.data()).map(|(&a, &b)| a * b).sum();
                    let data = p.iter().zip(g.data()).map(|(&pv, &gv)| pv * (gv - dot)).collect();
                    accumulate(&mut grads, *x, Tensor::new(g.shape().to_vec(), data)?)?;
                }
                Op::Attention { x, config, weights } => {
                    let dx = layers::self_attention_backward(self.value(*x), *config, weights, &g)?;
                    accumulate(&mut grads, *x, dx)?;
                }
                Op::ConcatChannels(parts) => {
                    let (h, w, total) = g.dims3()?;
                    let widths: Vec<usize> = parts.iter().map(|&p| self.value(p).shape()[2]).collect();
                    let mut offset = 0;
                    for (&part, &c) in parts.iter().zip(&widths) {
                        let mut piece = Vec::with_capacity(h * w * c);
                        for cell in 0..h * w {
                            piece.extend_from_slice(&g.data()[cell * total + offset..cell * total + offset + c]);
                        }
                        offset += c;
                        accumulate(&mut grads, part, Tensor::new(vec![h, w, c], piece)?)?;
                    }
                }
                Op::ConcatFlat(parts) => {
                    let mut offset = 0;
                    for &part in parts {
                        let shape = self.value(part).shape().to_vec();
                        let n = self.value(part).len();
                        let piece = g.data()[offset..offset + n].to_vec();
                        offset += n;
                        accumulate(&mut grads, part, Tensor::new(shape, piece)?)?;
                    }
                }
                Op::Gather { x, positions } => {
                    let src = self.value(*x);
                    let (_, w, c) = src.dims3()?;
                    let mut dx = Tensor::zeros(src.shape());
                    for (i, &(r, col)) in positions.iter().enumerate() {
                        let dst = &mut dx.data_mut()[(r * w + col) * c..(r * w + col + 1) * c];
                        for (d, &gv) in dst.iter_mut().zip(&g.data()[i * c..(i + 1) * c]) {
                            *d += gv;
                        }
                    }
                    accumulate(&mut grads, *x, dx)?;
                }
                Op::Sum(x) => {
                    let gv = g.item();
                    accumulate(&mut grads, *x, Tensor::filled(self.value(*x).shape(), gv))?;
                }
                Op::Mae { pred, target } => {
                    let p = self.value(*pred);
                    let scale = g.item() / T::lit(p.len() as f64);
                    let data = p
                        .data()
                        .iter()
                        .zip(target.data())
                        .map(|(&pv, &tv)| {
                            if pv > tv {
                                scale
                            } else if pv < tv {
                                -scale
                            } else {
                                T::zero()
                            }
                        })
                        .collect();
                    accumulate(&mut grads, *pred, Tensor::new(p.shape().to_vec(), data)?)?;
                }
                Op::CrossEntropy { pred, target } => {
                    let p = self.value(*pred);
                    let gv = g.item();
                    let eps = T::lit(ops::LOG_EPS);
                    let data = p
                        .data()
                        .iter()
                        .zip(target.data())
                        .map(|(&pv, &tv)| -gv * tv / (pv + eps))
                        .collect();
                    accumulate(&mut grads, *pred, Tensor::new(p.shape().to_vec(), data)?)?;
                }
            }
        }

        let mut out = Gradients::new();
        for (name, param) in store.iter() {
            if !param.trainable {
                continue;
            }
            let grad = self
                .params
                .get(name)
                .filter(|v| v.0 < grads.len())
                .and_then(|v| grads[v.0].clone())
                .unwrap_or_else(|| Tensor::zeros(param.tensor.shape()));
            out.insert(name, grad);
        }
        Ok(out)
    }
}

fn accumulate<T: Real>(grads: &mut [Option<Tensor<T>>], var: Var, g: Tensor<T>) -> Result<()> {
    match &mut grads[var.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => {
            *slot = Some(g);
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store_with(name: &str, data: Vec<f64>) -> ParamStore<f64> {
        let mut s = ParamStore::new();
        s.insert(name, Tensor::vector(data), true).unwrap();
        s
    }

    #[test]
    fn sum_gives_ones() {
        let store = store_with("p", vec![0.3, -1.0, 2.0]);
        let mut tape = Tape::new();
        let p = tape.param(&store, "p").unwrap();
        let loss = tape.sum(p);
        let g = tape.backward(loss, &store).unwrap();
        assert_eq!(g.get("p").unwrap().data(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn half_squared_norm_gives_p() {
        let store = store_with("p", vec![0.3, -1.0, 2.0]);
        let mut tape = Tape::new();
        let p = tape.param(&store, "p").unwrap();
        let sq = tape.mul(p, p).unwrap();
        let s = tape.sum(sq);
        let loss = tape.scale(s, 0.5);
        let g = tape.backward(loss, &store).unwrap();
        assert_eq!(g.get("p").unwrap().data(), &[0.3, -1.0, 2.0]);
    }

    #[test]
    fn non_scalar_loss_is_contract_error() {
        let store = store_with("p", vec![1.0, 2.0]);
        let mut tape = Tape::new();
        let p = tape.param(&store, "p").unwrap();
        assert!(matches!(tape.backward(p, &store), Err(CoatError::Contract(_))));
    }

    #[test]
    fn disconnected_and_frozen_params() {
        let mut store = store_with("p", vec![1.0, 2.0]);
        store.insert("unused", Tensor::vector(vec![5.0]), true).unwrap();
        store.insert("frozen", Tensor::vector(vec![1.0, 1.0]), false).unwrap();
        let mut tape = Tape::new();
        let p = tape.param(&store, "p").unwrap();
        let f = tape.param(&store, "frozen").unwrap();
        let m = tape.mul(p, f).unwrap();
        let loss = tape.sum(m);
        let g = tape.backward(loss, &store).unwrap();
        assert_eq!(g.get("unused").unwrap().data(), &[0.0]);
        assert!(!g.contains("frozen"));
        assert_eq!(g.get("p").unwrap().data(), &[1.0, 1.0]);
    }
}
