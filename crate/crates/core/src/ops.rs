//! Forward and backward kernels for the tensor-level primitives. The tape in
//! [`crate::tape`] records calls into these; inference calls them directly.

use std::str::FromStr;

use crate::error::{shape_err, CoatError, Result};
use crate::tensor::{Real, Tensor};

/// Added inside the logarithm of the cross-entropy loss.
pub const LOG_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
    Softmax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    Mae,
    CategoricalCrossEntropy,
}

impl FromStr for LossKind {
    type Err = CoatError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mae" => Ok(Self::Mae),
            "categorical_cross_entropy" | "ce" => Ok(Self::CategoricalCrossEntropy),
            other => Err(CoatError::Usage(format!("unknown loss kind {other:?}"))),
        }
    }
}

fn check_conv<T: Real>(
    x: &Tensor<T>,
    kernel: &Tensor<T>,
    bias: &Tensor<T>,
) -> Result<(usize, usize, usize, usize)> {
    let (h, w, c_in) = x.dims3()?;
    if h == 0 || w == 0 {
        return shape_err("convolution input must have positive spatial dims");
    }
    let c_out = match kernel.shape()[..] {
        [3, 3, ki, ko] if ki == c_in => ko,
        [3, 3, ki, _] => {
            return shape_err(format!("kernel expects {ki} input channels, input has {c_in}"))
        }
        _ => return shape_err(format!("kernel must be 3x3xC_inxC_out, got {:?}", kernel.shape())),
    };
    if bias.shape() != [c_out] {
        return shape_err(format!("bias shape {:?}, expected [{c_out}]", bias.shape()));
    }
    Ok((h, w, c_in, c_out))
}

/// 3x3 cross-correlation with one cell of zero padding on every border.
pub fn conv2d_same<T: Real>(x: &Tensor<T>, kernel: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>> {
    let (h, w, c_in, c_out) = check_conv(x, kernel, bias)?;
    let xd = x.data();
    let kd = kernel.data();
    let mut out = vec![T::zero(); h * w * c_out];
    for row in 0..h {
        for col in 0..w {
            let o = &mut out[(row * w + col) * c_out..(row * w + col + 1) * c_out];
            o.copy_from_slice(bias.data());
            for ky in 0..3 {
                let r = row as isize + ky as isize - 1;
                if r < 0 || r >= h as isize {
                    continue;
                }
                for kx in 0..3 {
                    let c = col as isize + kx as isize - 1;
                    if c < 0 || c >= w as isize {
                        continue;
                    }
                    let xin = &xd[(r as usize * w + c as usize) * c_in..][..c_in];
                    let kbase = (ky * 3 + kx) * c_in * c_out;
                    for (ci, &xv) in xin.iter().enumerate() {
                        if xv == T::zero() {
                            continue;
                        }
                        let krow = &kd[kbase + ci * c_out..kbase + (ci + 1) * c_out];
                        for (ov, &kv) in o.iter_mut().zip(krow) {
                            *ov += xv * kv;
                        }
                    }
                }
            }
        }
    }
    Tensor::new(vec![h, w, c_out], out)
}

/// Returns `(d_input, d_kernel, d_bias)` given the upstream gradient.
pub fn conv2d_same_backward<T: Real>(
    x: &Tensor<T>,
    kernel: &Tensor<T>,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    let (h, w, c_in) = x.dims3()?;
    let c_out = kernel.shape()[3];
    let xd = x.data();
    let kd = kernel.data();
    let gd = grad_out.data();
    let mut dx = vec![T::zero(); h * w * c_in];
    let mut dk = vec![T::zero(); 9 * c_in * c_out];
    let mut db = vec![T::zero(); c_out];
    for row in 0..h {
        for col in 0..w {
            let g = &gd[(row * w + col) * c_out..(row * w + col + 1) * c_out];
            for (b, &gv) in db.iter_mut().zip(g) {
                *b += gv;
            }
            for ky in 0..3 {
                let r = row as isize + ky as isize - 1;
                if r < 0 || r >= h as isize {
                    continue;
                }
                for kx in 0..3 {
                    let c = col as isize + kx as isize - 1;
                    if c < 0 || c >= w as isize {
                        continue;
                    }
                    let xoff = (r as usize * w + c as usize) * c_in;
                    let kbase = (ky * 3 + kx) * c_in * c_out;
                    for ci in 0..c_in {
                        let krow = &kd[kbase + ci * c_out..kbase + (ci + 1) * c_out];
                        let mut acc = T::zero();
                        for (&kv, &gv) in krow.iter().zip(g) {
                            acc += kv * gv;
                        }
                        dx[xoff + ci] += acc;
                        let xv = xd[xoff + ci];
                        if xv != T::zero() {
                            let dkrow = &mut dk[kbase + ci * c_out..kbase + (ci + 1) * c_out];
                            for (dkv, &gv) in dkrow.iter_mut().zip(g) {
                                *dkv += xv * gv;
                            }
                        }
                    }
                }
            }
        }
    }
    Ok((
        Tensor::new(vec![h, w, c_in], dx)?,
        Tensor::new(vec![3, 3, c_in, c_out], dk)?,
        Tensor::new(vec![c_out], db)?,
    ))
}

fn check_affine<T: Real>(x: &Tensor<T>, weights: &Tensor<T>, bias: &Tensor<T>) -> Result<(usize, usize)> {
    let (n, m) = match weights.shape()[..] {
        [n, m] => (n, m),
        _ => return shape_err(format!("dense weights must be rank 2, got {:?}", weights.shape())),
    };
    if x.len() != n {
        return shape_err(format!("dense input has {} entries, weights expect {n}", x.len()));
    }
    if bias.shape() != [m] {
        return shape_err(format!("dense bias shape {:?}, expected [{m}]", bias.shape()));
    }
    Ok((n, m))
}

/// `x · W + b` with `W` of shape `n × m`.
pub fn affine<T: Real>(x: &Tensor<T>, weights: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>> {
    let (_, m) = check_affine(x, weights, bias)?;
    let mut out = bias.data().to_vec();
    let wd = weights.data();
    for (i, &xv) in x.data().iter().enumerate() {
        for (o, &wv) in out.iter_mut().zip(&wd[i * m..(i + 1) * m]) {
            *o += xv * wv;
        }
    }
    Ok(Tensor::vector(out))
}

pub fn affine_backward<T: Real>(
    x: &Tensor<T>,
    weights: &Tensor<T>,
    grad_out: &Tensor<T>,
) -> (Tensor<T>, Tensor<T>, Tensor<T>) {
    let (n, m) = (weights.shape()[0], weights.shape()[1]);
    let wd = weights.data();
    let g = grad_out.data();
    let mut dx = vec![T::zero(); n];
    let mut dw = vec![T::zero(); n * m];
    for (i, &xv) in x.data().iter().enumerate() {
        let row = &wd[i * m..(i + 1) * m];
        dx[i] = row.iter().zip(g).map(|(&a, &b)| a * b).sum();
        for (d, &gv) in dw[i * m..(i + 1) * m].iter_mut().zip(g) {
            *d = xv * gv;
        }
    }
    (
        Tensor::new(x.shape().to_vec(), dx).expect("shape preserved"),
        Tensor::new(vec![n, m], dw).expect("shape preserved"),
        Tensor::vector(g.to_vec()),
    )
}

pub fn dense<T: Real>(
    x: &Tensor<T>,
    weights: &Tensor<T>,
    bias: &Tensor<T>,
    activation: Activation,
) -> Result<Tensor<T>> {
    let z = affine(x, weights, bias)?;
    Ok(match activation {
        Activation::Identity => z,
        Activation::Relu => relu(&z),
        Activation::Softmax => softmax(&z),
    })
}

pub fn relu<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| if v > T::zero() { v } else { T::zero() })
}

/// Softmax over all entries with max subtraction.
pub fn softmax<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    let mut out = x.clone();
    softmax_inplace(out.data_mut());
    out
}

pub(crate) fn softmax_inplace<T: Real>(v: &mut [T]) {
    let max = v.iter().copied().fold(T::neg_infinity(), T::max);
    let mut total = T::zero();
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        total += *x;
    }
    for x in v.iter_mut() {
        *x = *x / total;
    }
}

/// Concatenate rank-3 tensors along the channel axis.
pub fn concat_channels<T: Real>(parts: &[&Tensor<T>]) -> Result<Tensor<T>> {
    let (h, w, _) = parts
        .first()
        .ok_or_else(|| CoatError::Shape("concat of zero tensors".into()))?
        .dims3()?;
    let mut widths = Vec::with_capacity(parts.len());
    for p in parts {
        let (ph, pw, pc) = p.dims3()?;
        if (ph, pw) != (h, w) {
            return shape_err(format!("concat spatial mismatch {h}x{w} vs {ph}x{pw}"));
        }
        widths.push(pc);
    }
    let total: usize = widths.iter().sum();
    let mut out = Vec::with_capacity(h * w * total);
    for cell in 0..h * w {
        for (p, &c) in parts.iter().zip(&widths) {
            out.extend_from_slice(&p.data()[cell * c..(cell + 1) * c]);
        }
    }
    Tensor::new(vec![h, w, total], out)
}

/// Concatenates the hidden vectors at `positions` into one flat vector.
pub fn gather_positions<T: Real>(x: &Tensor<T>, positions: &[(usize, usize)]) -> Result<Tensor<T>> {
    let (h, w, c) = x.dims3()?;
    let mut out = Vec::with_capacity(positions.len() * c);
    for &(r, col) in positions {
        if r >= h || col >= w {
            return Err(CoatError::Contract(format!(
                "position ({r}, {col}) outside {h}x{w} grid"
            )));
        }
        out.extend_from_slice(x.hidden(r, col));
    }
    Ok(Tensor::vector(out))
}

pub fn mae<T: Real>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<T> {
    if pred.len() != target.len() || pred.is_empty() {
        return shape_err(format!("mae shapes {:?} vs {:?}", pred.shape(), target.shape()));
    }
    let total: T = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&p, &t)| (p - t).abs())
        .sum();
    Ok(total / T::lit(pred.len() as f64))
}

pub fn cross_entropy<T: Real>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<T> {
    if pred.len() != target.len() {
        return shape_err(format!("ce shapes {:?} vs {:?}", pred.shape(), target.shape()));
    }
    let eps = T::lit(LOG_EPS);
    Ok(-pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&p, &t)| t * (p + eps).ln())
        .sum::<T>())
}

pub fn loss_eval<T: Real>(kind: LossKind, pred: &Tensor<T>, target: &Tensor<T>) -> Result<T> {
    match kind {
        LossKind::Mae => mae(pred, target),
        LossKind::CategoricalCrossEntropy => cross_entropy(pred, target),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_kernel_is_identity() {
        let x = Tensor::<f64>::from_fn(&[5, 5, 1], |i| i as f64 * 0.5 - 3.0);
        let mut k = Tensor::zeros(&[3, 3, 1, 1]);
        k.data_mut()[4] = 1.0;
        let y = conv2d_same(&x, &k, &Tensor::zeros(&[1])).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn all_ones_padded_counts() {
        let x = Tensor::<f64>::filled(&[3, 3, 1], 1.0);
        let k = Tensor::filled(&[3, 3, 1, 1], 1.0);
        let y = conv2d_same(&x, &k, &Tensor::zeros(&[1])).unwrap();
        assert_eq!(y.at3(1, 1, 0), 9.0);
        assert_eq!(y.at3(0, 1, 0), 6.0);
        assert_eq!(y.at3(1, 0, 0), 6.0);
        assert_eq!(y.at3(0, 0, 0), 4.0);
        assert_eq!(y.at3(2, 2, 0), 4.0);
    }

    #[test]
    fn conv_channel_mismatch_is_shape_error() {
        let x = Tensor::<f32>::zeros(&[4, 4, 2]);
        let k = Tensor::zeros(&[3, 3, 3, 5]);
        assert!(matches!(
            conv2d_same(&x, &k, &Tensor::zeros(&[5])),
            Err(CoatError::Shape(_))
        ));
    }

    #[test]
    fn conv_output_shape() {
        for (h, w) in [(1, 1), (1, 7), (6, 3)] {
            let x = Tensor::<f32>::filled(&[h, w, 2], 0.5);
            let k = Tensor::filled(&[3, 3, 2, 5], 0.1);
            let y = conv2d_same(&x, &k, &Tensor::zeros(&[5])).unwrap();
            assert_eq!(y.shape(), &[h, w, 5]);
        }
    }

    #[test]
    fn dense_identity_and_uniform_softmax() {
        let x = Tensor::<f64>::vector(vec![1.5, -2.0, 0.25]);
        let eye = Tensor::from_fn(&[3, 3], |i| if i % 4 == 0 { 1.0 } else { 0.0 });
        let y = dense(&x, &eye, &Tensor::zeros(&[3]), Activation::Identity).unwrap();
        assert_eq!(y, x);

        let y = dense(&x, &Tensor::zeros(&[3, 2]), &Tensor::zeros(&[2]), Activation::Softmax).unwrap();
        assert_eq!(y.data(), &[0.5, 0.5]);
    }

    #[test]
    fn dense_matches_triple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = Tensor::<f64>::uniform(&[3], 1.0, &mut rng);
        let wts = Tensor::<f64>::uniform(&[3, 3], 1.0, &mut rng);
        let b = Tensor::<f64>::uniform(&[3], 1.0, &mut rng);
        let y = dense(&x, &wts, &b, Activation::Identity).unwrap();
        for j in 0..3 {
            let mut expect = b.data()[j];
            for i in 0..3 {
                expect += x.data()[i] * wts.data()[i * 3 + j];
            }
            assert!((y.data()[j] - expect).abs() < 1e-6);
        }
    }

    #[test]
    fn dense_dimension_mismatch() {
        let x = Tensor::<f32>::zeros(&[4]);
        assert!(dense(&x, &Tensor::zeros(&[3, 2]), &Tensor::zeros(&[2]), Activation::Relu).is_err());
    }

    #[test]
    fn softmax_is_normalized_and_positive() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let x = Tensor::<f32>::from_fn(&[9], |_| rng.gen_range(-20.0..20.0));
            let p = softmax(&x);
            assert!((p.sum() - 1.0).abs() < 1e-6);
            assert!(p.data().iter().all(|&v| v > 0.0));
        }
    }

    #[test]
    fn losses() {
        let a = Tensor::<f64>::vector(vec![1.0, 2.0, 3.0]);
        let b = Tensor::vector(vec![2.0, 2.0, 5.0]);
        assert_eq!(loss_eval(LossKind::Mae, &a, &a).unwrap(), 0.0);
        assert!((loss_eval(LossKind::Mae, &a, &b).unwrap() - 1.0).abs() < 1e-12);
        let onehot = Tensor::vector(vec![0.0, 1.0, 0.0]);
        let ce: f64 = loss_eval(LossKind::CategoricalCrossEntropy, &onehot, &onehot).unwrap();
        assert!(ce.abs() <= 1e-6);
        assert!("hinge".parse::<LossKind>().is_err());
    }
}
