//! Multi-head grid self-attention, harmonic positional encoding, and the
//! composite convolution–attention–position (CoAt) block.
//!
//! Attention treats every grid cell as a token. Each head owns a contiguous
//! channel slice of the input which is itself split into key, query and value
//! thirds, in that order. Logits are raw dot products `q·k` (no `1/√d`
//! scaling) and the softmax runs over all `h·w` positions.

use crate::error::{CoatError, Result};
use crate::ops;
use crate::tensor::{Real, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AttentionConfig {
    pub heads: usize,
    pub input_channels: usize,
}

impl AttentionConfig {
    pub fn new(heads: usize, input_channels: usize) -> Result<Self> {
        let cfg = Self {
            heads,
            input_channels,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.heads == 0 || self.input_channels == 0 {
            return Err(CoatError::Config("attention needs at least one head and channel".into()));
        }
        if self.input_channels % self.heads != 0 {
            return Err(CoatError::Config(format!(
                "{} channels not divisible by {} heads",
                self.input_channels, self.heads
            )));
        }
        if self.head_channels() % 3 != 0 {
            return Err(CoatError::Config(format!(
                "per-head channel count {} not divisible by 3",
                self.head_channels()
            )));
        }
        Ok(())
    }

    pub fn head_channels(&self) -> usize {
        self.input_channels / self.heads
    }

    /// Width of each key, query and value slice.
    pub fn slice_width(&self) -> usize {
        self.head_channels() / 3
    }

    pub fn output_channels(&self) -> usize {
        self.input_channels / 3
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PosEncConfig {
    pub depth: usize,
}

impl PosEncConfig {
    pub fn new(depth: usize) -> Result<Self> {
        if depth == 0 || depth % 4 != 0 {
            return Err(CoatError::Config(format!(
                "positional encoding depth {depth} must be a positive multiple of 4"
            )));
        }
        Ok(Self { depth })
    }
}

/// Frequency of the `p`-th sine/cosine pair: `10000^(-4p/depth)`.
pub fn frequency(p: usize, depth: usize) -> f64 {
    1.0 / 10000f64.powf(4.0 * p as f64 / depth as f64)
}

/// `h × w × depth` tensor; the first half of the channels encodes the row,
/// the second half the column, as interleaved `sin`/`cos` pairs.
pub fn positional_encoding<T: Real>(h: usize, w: usize, config: PosEncConfig) -> Tensor<T> {
    let depth = config.depth;
    let half = depth / 2;
    let mut out = Tensor::zeros(&[h, w, depth]);
    for u in 0..h {
        for v in 0..w {
            for p in 0..depth / 4 {
                let theta = frequency(p, depth);
                let (ru, rv) = (theta * u as f64, theta * v as f64);
                out.set3(u, v, 2 * p, T::lit(ru.sin()));
                out.set3(u, v, 2 * p + 1, T::lit(ru.cos()));
                out.set3(u, v, 2 * p + half, T::lit(rv.sin()));
                out.set3(u, v, 2 * p + 1 + half, T::lit(rv.cos()));
            }
        }
    }
    out
}

fn check_attention<T: Real>(z: &Tensor<T>, config: AttentionConfig) -> Result<(usize, usize, usize)> {
    config.validate()?;
    let (h, w, d) = z.dims3()?;
    if d != config.input_channels {
        return Err(CoatError::Config(format!(
            "attention configured for {} channels, input has {d}",
            config.input_channels
        )));
    }
    Ok((h, w, d))
}

/// Row `a` of one head's logits: `q_a · k_b` for every position `b`.
fn head_logits<T: Real>(data: &[T], d: usize, n: usize, base: usize, m: usize, a: usize, row: &mut [T]) {
    let q = &data[a * d + base + m..a * d + base + 2 * m];
    for (b, slot) in row.iter_mut().enumerate().take(n) {
        let k = &data[b * d + base..b * d + base + m];
        *slot = q.iter().zip(k).map(|(&x, &y)| x * y).sum();
    }
}

/// Streaming evaluation: memory is linear in the number of positions.
pub fn self_attention<T: Real>(z: &Tensor<T>, config: AttentionConfig) -> Result<Tensor<T>> {
    let (h, w, d) = check_attention(z, config)?;
    let n = h * w;
    let hc = config.head_channels();
    let m = config.slice_width();
    let out_c = config.output_channels();
    let data = z.data();
    let mut out = vec![T::zero(); n * out_c];
    let mut row = vec![T::zero(); n];
    for head in 0..config.heads {
        let base = head * hc;
        for a in 0..n {
            head_logits(data, d, n, base, m, a, &mut row);
            ops::softmax_inplace(&mut row);
            let o = &mut out[a * out_c + head * m..a * out_c + (head + 1) * m];
            for (b, &p) in row.iter().enumerate() {
                let v = &data[b * d + base + 2 * m..b * d + base + 3 * m];
                for (ov, &vv) in o.iter_mut().zip(v) {
                    *ov += p * vv;
                }
            }
        }
    }
    Tensor::new(vec![h, w, out_c], out)
}

/// Like [`self_attention`] but also returns the `heads × n × n` attention
/// weights needed by the backward pass.
pub fn self_attention_with_weights<T: Real>(
    z: &Tensor<T>,
    config: AttentionConfig,
) -> Result<(Tensor<T>, Vec<T>)> {
    let (h, w, d) = check_attention(z, config)?;
    let n = h * w;
    let hc = config.head_channels();
    let m = config.slice_width();
    let out_c = config.output_channels();
    let data = z.data();
    let mut out = vec![T::zero(); n * out_c];
    let mut weights = vec![T::zero(); config.heads * n * n];
    for head in 0..config.heads {
        let base = head * hc;
        for a in 0..n {
            let row = &mut weights[(head * n + a) * n..(head * n + a + 1) * n];
            head_logits(data, d, n, base, m, a, row);
            ops::softmax_inplace(row);
            let o = &mut out[a * out_c + head * m..a * out_c + (head + 1) * m];
            for (b, &p) in row.iter().enumerate() {
                let v = &data[b * d + base + 2 * m..b * d + base + 3 * m];
                for (ov, &vv) in o.iter_mut().zip(v) {
                    *ov += p * vv;
                }
            }
        }
    }
    Ok((Tensor::new(vec![h, w, out_c], out)?, weights))
}

/// Gradient of the attention output with respect to its input.
pub fn self_attention_backward<T: Real>(
    z: &Tensor<T>,
    config: AttentionConfig,
    weights: &[T],
    grad_out: &Tensor<T>,
) -> Result<Tensor<T>> {
    let (h, w, d) = check_attention(z, config)?;
    let n = h * w;
    let hc = config.head_channels();
    let m = config.slice_width();
    let out_c = config.output_channels();
    let data = z.data();
    let g = grad_out.data();
    let mut dz = vec![T::zero(); n * d];
    let mut dlogit = vec![T::zero(); n];
    for head in 0..config.heads {
        let base = head * hc;
        for a in 0..n {
            let p = &weights[(head * n + a) * n..(head * n + a + 1) * n];
            let ga = &g[a * out_c + head * m..a * out_c + (head + 1) * m];
            // dP[a][b] = g_a · v_b, then the softmax Jacobian.
            let mut weighted = T::zero();
            for b in 0..n {
                let v = &data[b * d + base + 2 * m..b * d + base + 3 * m];
                let dp: T = ga.iter().zip(v).map(|(&x, &y)| x * y).sum();
                dlogit[b] = dp;
                weighted += p[b] * dp;
            }
            for b in 0..n {
                dlogit[b] = p[b] * (dlogit[b] - weighted);
            }
            for b in 0..n {
                // value gradient
                let pb = p[b];
                let dv = &mut dz[b * d + base + 2 * m..b * d + base + 3 * m];
                for (x, &y) in dv.iter_mut().zip(ga) {
                    *x += pb * y;
                }
                let dl = dlogit[b];
                if dl == T::zero() {
                    continue;
                }
                // dq_a += dl * k_b ; dk_b += dl * q_a
                for j in 0..m {
                    let kb = data[b * d + base + j];
                    let qa = data[a * d + base + m + j];
                    dz[a * d + base + m + j] += dl * kb;
                    dz[b * d + base + j] += dl * qa;
                }
            }
        }
    }
    Tensor::new(vec![h, w, d], dz)
}

/// Parameters of one CoAt block.
#[derive(Debug, Clone, PartialEq)]
pub struct CoAtBlockParams<T> {
    pub kernel: Tensor<T>,
    pub bias: Tensor<T>,
    pub attention: AttentionConfig,
    pub pos_enc: PosEncConfig,
}

impl<T: Real> CoAtBlockParams<T> {
    pub fn input_channels(&self) -> usize {
        self.kernel.shape()[2]
    }

    pub fn filters(&self) -> usize {
        self.kernel.shape()[3]
    }

    pub fn output_channels(&self) -> usize {
        self.attention.output_channels() + self.pos_enc.depth
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernel.shape().len() != 4 || self.kernel.shape()[..2] != [3, 3] {
            return Err(CoatError::Config(format!(
                "block kernel must be 3x3xCinxCout, got {:?}",
                self.kernel.shape()
            )));
        }
        if self.attention.input_channels != self.filters() {
            return Err(CoatError::Config(format!(
                "attention expects {} channels but conv yields {}",
                self.attention.input_channels,
                self.filters()
            )));
        }
        self.attention.validate()
    }
}

/// Convolution + ReLU (with a residual add when the channel count is
/// unchanged), then self-attention, then the positional encoding appended.
pub fn coat_block<T: Real>(z: &Tensor<T>, params: &CoAtBlockParams<T>) -> Result<Tensor<T>> {
    params.validate()?;
    let (h, w, d) = z.dims3()?;
    if d != params.input_channels() {
        return Err(CoatError::Config(format!(
            "block expects {} input channels, got {d}",
            params.input_channels()
        )));
    }
    let mut c = ops::relu(&ops::conv2d_same(z, &params.kernel, &params.bias)?);
    if params.filters() == d {
        c.add_assign(z)?;
    }
    let a = self_attention(&c, params.attention)?;
    let e = positional_encoding(h, w, params.pos_enc);
    ops::concat_channels(&[&a, &e])
}
