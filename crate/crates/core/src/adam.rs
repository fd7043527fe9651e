use std::collections::BTreeMap;

use crate::error::{CoatError, Result};
use crate::tensor::{Gradients, ParamStore, Real, Tensor};

/// Moment estimates and step counter of the Adam optimizer.
#[derive(Debug, Clone)]
pub struct AdamState<T> {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    first: BTreeMap<String, Tensor<T>>,
    second: BTreeMap<String, Tensor<T>>,
}

impl<T: Real> Default for AdamState<T> {
    fn default() -> Self {
        Self::new(0.9, 0.999, 1e-8)
    }
}

impl<T: Real> AdamState<T> {
    pub fn new(beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            beta1,
            beta2,
            eps,
            step: 0,
            first: BTreeMap::new(),
            second: BTreeMap::new(),
        }
    }

    pub fn first_moment(&self, name: &str) -> Option<&Tensor<T>> {
        self.first.get(name)
    }

    pub fn second_moment(&self, name: &str) -> Option<&Tensor<T>> {
        self.second.get(name)
    }
}

/// One bias-corrected Adam update of every trainable parameter.
pub fn adam_step<T: Real>(
    params: &mut ParamStore<T>,
    grads: &Gradients<T>,
    state: &mut AdamState<T>,
    lr: f64,
) -> Result<()> {
    if !(lr > 0.0) {
        return Err(CoatError::Contract(format!("learning rate must be positive, got {lr}")));
    }
    for (name, param) in params.iter() {
        if !param.trainable {
            continue;
        }
        match grads.get(name) {
            Some(g) if g.shape() == param.tensor.shape() => {}
            Some(g) => {
                return Err(CoatError::Shape(format!(
                    "gradient for {name} has shape {:?}, parameter {:?}",
                    g.shape(),
                    param.tensor.shape()
                )))
            }
            None => return Err(CoatError::Contract(format!("missing gradient for {name}"))),
        }
    }

    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (T::lit(state.beta1), T::lit(state.beta2));
    let one = T::one();
    let correction1 = T::lit(1.0 - state.beta1.powi(t));
    let correction2 = T::lit(1.0 - state.beta2.powi(t));
    let eps = T::lit(state.eps);
    let lr = T::lit(lr);

    for (name, param) in params.iter_mut() {
        if !param.trainable {
            continue;
        }
        let g = grads.get(name).expect("checked above");
        let shape = param.tensor.shape().to_vec();
        let m = state
            .first
            .entry(name.to_string())
            .or_insert_with(|| Tensor::zeros(&shape));
        let v = state
            .second
            .entry(name.to_string())
            .or_insert_with(|| Tensor::zeros(&shape));
        for (((p, &gv), mv), vv) in param
            .tensor
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(m.data_mut())
            .zip(v.data_mut())
        {
            *mv = b1 * *mv + (one - b1) * gv;
            *vv = b2 * *vv + (one - b2) * gv * gv;
            let m_hat = *mv / correction1;
            let v_hat = *vv / correction2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}
