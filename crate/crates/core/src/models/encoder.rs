use serde::{Deserialize, Serialize};

use super::{prefixed, Parameters};
use crate::error::{Error, Result};
use crate::numeric::{gelu, gelu_grad, softmax_in_place, xavier_init, Prng, Tensor};

/// Layer-norm epsilon (the BERT value).
const LN_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderConfig {
    pub n_layers: usize,
    pub n_heads: usize,
    pub hidden_dim: usize,
    pub ff_dim: usize,
    pub max_positions: usize,
    pub vocab_size: usize,
    pub cls_index: usize,
}

impl EncoderConfig {
    /// Two layers, two heads, hidden 32, feed-forward 64.
    pub fn desk(vocab_size: usize, cls_index: usize) -> Self {
        EncoderConfig {
            n_layers: 2,
            n_heads: 2,
            hidden_dim: 32,
            ff_dim: 64,
            max_positions: 128,
            vocab_size,
            cls_index,
        }
    }

    /// BERT-base sizes: 12 layers, 12 heads, hidden 768.
    pub fn base(vocab_size: usize, cls_index: usize) -> Self {
        EncoderConfig {
            n_layers: 12,
            n_heads: 12,
            hidden_dim: 768,
            ff_dim: 3072,
            max_positions: 512,
            vocab_size,
            cls_index,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_layers == 0 || self.n_heads == 0 || self.hidden_dim == 0 || self.ff_dim == 0 {
            return bad("encoder sizes must be positive".into());
        }
        if !self.hidden_dim.is_multiple_of(self.n_heads) {
            return bad(format!(
                "hidden_dim {} is not divisible by n_heads {}",
                self.hidden_dim, self.n_heads
            ));
        }
        if self.max_positions < 1 {
            return bad("max_positions must be at least 1".into());
        }
        if self.cls_index >= self.vocab_size {
            return bad(format!("cls_index {} outside vocab_size {}", self.cls_index, self.vocab_size));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.hidden_dim / self.n_heads
    }
}

/// One post-norm transformer block.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderLayer {
    pub wq: Tensor,
    pub bq: Tensor,
    pub wk: Tensor,
    pub bk: Tensor,
    pub wv: Tensor,
    pub bv: Tensor,
    pub wo: Tensor,
    pub bo: Tensor,
    pub ln1_gain: Tensor,
    pub ln1_bias: Tensor,
    pub ff1_w: Tensor,
    pub ff1_b: Tensor,
    pub ff2_w: Tensor,
    pub ff2_b: Tensor,
    pub ln2_gain: Tensor,
    pub ln2_bias: Tensor,
}

impl EncoderLayer {
    fn zeros(h: usize, ff: usize) -> Self {
        EncoderLayer {
            wq: Tensor::zeros(&[h, h]),
            bq: Tensor::zeros(&[h]),
            wk: Tensor::zeros(&[h, h]),
            bk: Tensor::zeros(&[h]),
            wv: Tensor::zeros(&[h, h]),
            bv: Tensor::zeros(&[h]),
            wo: Tensor::zeros(&[h, h]),
            bo: Tensor::zeros(&[h]),
            ln1_gain: Tensor::zeros(&[h]),
            ln1_bias: Tensor::zeros(&[h]),
            ff1_w: Tensor::zeros(&[ff, h]),
            ff1_b: Tensor::zeros(&[ff]),
            ff2_w: Tensor::zeros(&[h, ff]),
            ff2_b: Tensor::zeros(&[h]),
            ln2_gain: Tensor::zeros(&[h]),
            ln2_bias: Tensor::zeros(&[h]),
        }
    }

    fn init(h: usize, ff: usize, prng: &mut Prng) -> Result<Self> {
        let mut l = EncoderLayer::zeros(h, ff);
        l.wq = xavier_init(&[h, h], prng)?;
        l.wk = xavier_init(&[h, h], prng)?;
        l.wv = xavier_init(&[h, h], prng)?;
        l.wo = xavier_init(&[h, h], prng)?;
        l.ff1_w = xavier_init(&[ff, h], prng)?;
        l.ff2_w = xavier_init(&[h, ff], prng)?;
        l.ln1_gain.fill(1.0);
        l.ln2_gain.fill(1.0);
        Ok(l)
    }

    fn tensors(&self) -> Vec<(String, &Tensor)> {
        vec![
            ("wq".into(), &self.wq),
            ("bq".into(), &self.bq),
            ("wk".into(), &self.wk),
            ("bk".into(), &self.bk),
            ("wv".into(), &self.wv),
            ("bv".into(), &self.bv),
            ("wo".into(), &self.wo),
            ("bo".into(), &self.bo),
            ("ln1.gain".into(), &self.ln1_gain),
            ("ln1.bias".into(), &self.ln1_bias),
            ("ff1.w".into(), &self.ff1_w),
            ("ff1.b".into(), &self.ff1_b),
            ("ff2.w".into(), &self.ff2_w),
            ("ff2.b".into(), &self.ff2_b),
            ("ln2.gain".into(), &self.ln2_gain),
            ("ln2.bias".into(), &self.ln2_bias),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        vec![
            &mut self.wq,
            &mut self.bq,
            &mut self.wk,
            &mut self.bk,
            &mut self.wv,
            &mut self.bv,
            &mut self.wo,
            &mut self.bo,
            &mut self.ln1_gain,
            &mut self.ln1_bias,
            &mut self.ff1_w,
            &mut self.ff1_b,
            &mut self.ff2_w,
            &mut self.ff2_b,
            &mut self.ln2_gain,
            &mut self.ln2_bias,
        ]
    }
}

/// Token and position embeddings plus the layer stack.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub token_emb: Tensor,
    pub pos_emb: Tensor,
    pub layers: Vec<EncoderLayer>,
}

impl EncoderParams {
    pub fn zeros(cfg: &EncoderConfig) -> Self {
        EncoderParams {
            token_emb: Tensor::zeros(&[cfg.vocab_size, cfg.hidden_dim]),
            pos_emb: Tensor::zeros(&[cfg.max_positions, cfg.hidden_dim]),
            layers: (0..cfg.n_layers)
                .map(|_| EncoderLayer::zeros(cfg.hidden_dim, cfg.ff_dim))
                .collect(),
        }
    }

    pub fn init(cfg: &EncoderConfig, prng: &mut Prng) -> Result<Self> {
        cfg.validate()?;
        Ok(EncoderParams {
            token_emb: xavier_init(&[cfg.vocab_size, cfg.hidden_dim], prng)?,
            pos_emb: xavier_init(&[cfg.max_positions, cfg.hidden_dim], prng)?,
            layers: (0..cfg.n_layers)
                .map(|_| EncoderLayer::init(cfg.hidden_dim, cfg.ff_dim, prng))
                .collect::<Result<_>>()?,
        })
    }

    /// Checks tensor shapes against `cfg`.
    pub fn check(&self, cfg: &EncoderConfig) -> Result<()> {
        cfg.validate()?;
        let reference = EncoderParams::zeros(cfg);
        let mine = self.tensors();
        let want = reference.tensors();
        if mine.len() != want.len() || mine.iter().zip(&want).any(|(a, b)| a.1.shape() != b.1.shape()) {
            return Err(Error::Shape("encoder parameters do not match the configuration".into()));
        }
        Ok(())
    }
}

impl Parameters for EncoderParams {
    fn tensors(&self) -> Vec<(String, &Tensor)> {
        let mut v = vec![("token_emb".to_string(), &self.token_emb), ("pos_emb".to_string(), &self.pos_emb)];
        for (i, l) in self.layers.iter().enumerate() {
            v.extend(prefixed(&format!("layer{i}"), l.tensors()));
        }
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v = vec![&mut self.token_emb, &mut self.pos_emb];
        for l in &mut self.layers {
            v.extend(l.tensors_mut());
        }
        v
    }
}

/// `y[r] = W x[r] + b` for `rows` rows of `x`.
fn linear(x: &[f64], rows: usize, w: &Tensor, b: &Tensor) -> Vec<f64> {
    let (out_dim, in_dim) = (w.shape()[0], w.shape()[1]);
    let wd = w.data();
    let mut y = Vec::with_capacity(rows * out_dim);
    for r in 0..rows {
        let xr = &x[r * in_dim..(r + 1) * in_dim];
        for o in 0..out_dim {
            let wr = &wd[o * in_dim..(o + 1) * in_dim];
            let mut acc = b.data()[o];
            for (a, c) in wr.iter().zip(xr) {
                acc += a * c;
            }
            y.push(acc);
        }
    }
    y
}

/// Accumulates `dW += dyᵀ x`, `db += Σ dy`, `dx += dy W`.
fn linear_backward(x: &[f64], rows: usize, w: &Tensor, dy: &[f64], gw: &mut Tensor, gb: &mut Tensor, dx: &mut [f64]) {
    let (out_dim, in_dim) = (w.shape()[0], w.shape()[1]);
    let wd = w.data();
    for r in 0..rows {
        let xr = &x[r * in_dim..(r + 1) * in_dim];
        let dyr = &dy[r * out_dim..(r + 1) * out_dim];
        let dxr = &mut dx[r * in_dim..(r + 1) * in_dim];
        for (o, &d) in dyr.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            gb.data_mut()[o] += d;
            let gwr = &mut gw.data_mut()[o * in_dim..(o + 1) * in_dim];
            for (g, xv) in gwr.iter_mut().zip(xr) {
                *g += d * xv;
            }
            let wr = &wd[o * in_dim..(o + 1) * in_dim];
            for (dxv, wv) in dxr.iter_mut().zip(wr) {
                *dxv += d * wv;
            }
        }
    }
}

struct NormCache {
    xhat: Vec<f64>,
    inv_std: Vec<f64>,
}

fn layer_norm(x: &[f64], rows: usize, gain: &Tensor, bias: &Tensor) -> (Vec<f64>, NormCache) {
    let h = gain.len();
    let mut y = vec![0.0; rows * h];
    let mut xhat = vec![0.0; rows * h];
    let mut inv_std = vec![0.0; rows];
    for r in 0..rows {
        let xr = &x[r * h..(r + 1) * h];
        let mean = xr.iter().sum::<f64>() / h as f64;
        let var = xr.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / h as f64;
        let inv = 1.0 / (var + LN_EPS).sqrt();
        inv_std[r] = inv;
        for k in 0..h {
            let n = (xr[k] - mean) * inv;
            xhat[r * h + k] = n;
            y[r * h + k] = gain.data()[k] * n + bias.data()[k];
        }
    }
    (y, NormCache { xhat, inv_std })
}

fn layer_norm_backward(dy: &[f64], cache: &NormCache, gain: &Tensor, gg: &mut Tensor, gb: &mut Tensor) -> Vec<f64> {
    let h = gain.len();
    let rows = cache.inv_std.len();
    let mut dx = vec![0.0; rows * h];
    let mut dxhat = vec![0.0; h];
    for r in 0..rows {
        let xh = &cache.xhat[r * h..(r + 1) * h];
        let dyr = &dy[r * h..(r + 1) * h];
        for k in 0..h {
            dxhat[k] = dyr[k] * gain.data()[k];
            gg.data_mut()[k] += dyr[k] * xh[k];
            gb.data_mut()[k] += dyr[k];
        }
        let mean_d = dxhat.iter().sum::<f64>() / h as f64;
        let mean_dx = dxhat.iter().zip(xh).map(|(a, b)| a * b).sum::<f64>() / h as f64;
        for k in 0..h {
            dx[r * h + k] = cache.inv_std[r] * (dxhat[k] - mean_d - xh[k] * mean_dx);
        }
    }
    dx
}

struct LayerCache {
    x_in: Vec<f64>,
    q: Vec<f64>,
    k: Vec<f64>,
    v: Vec<f64>,
    /// `n_heads × T × T`, zero at masked keys.
    attn: Vec<f64>,
    ctx: Vec<f64>,
    ln1: NormCache,
    x1: Vec<f64>,
    ff_pre: Vec<f64>,
    ff_act: Vec<f64>,
    ln2: NormCache,
}

pub(crate) struct EncoderCache {
    ids: Vec<usize>,
    layers: Vec<LayerCache>,
}

/// Attention maps and pre-gain layer-norm outputs of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderTrace {
    /// Per layer, shape `(n_heads, T, T)`: row `i` holds query `i`'s weights.
    pub attention: Vec<Tensor>,
    /// Per layer, the two normalized `(T × hidden)` activations before gain
    /// and bias.
    pub normalized: Vec<[Tensor; 2]>,
}

fn layer_forward(
    cfg: &EncoderConfig,
    l: &EncoderLayer,
    x: &[f64],
    keymask: &[bool],
) -> (Vec<f64>, LayerCache) {
    let t_len = keymask.len();
    let h = cfg.hidden_dim;
    let dh = cfg.head_dim();
    let scale = 1.0 / (dh as f64).sqrt();
    let q = linear(x, t_len, &l.wq, &l.bq);
    let k = linear(x, t_len, &l.wk, &l.bk);
    let v = linear(x, t_len, &l.wv, &l.bv);
    let mut attn = vec![0.0; cfg.n_heads * t_len * t_len];
    let mut ctx = vec![0.0; t_len * h];
    let keys: Vec<usize> = (0..t_len).filter(|&j| keymask[j]).collect();
    let mut logits = vec![0.0; keys.len()];
    for head in 0..cfg.n_heads {
        let off = head * dh;
        for i in 0..t_len {
            let qi = &q[i * h + off..i * h + off + dh];
            for (slot, &j) in logits.iter_mut().zip(&keys) {
                let kj = &k[j * h + off..j * h + off + dh];
                *slot = qi.iter().zip(kj).map(|(a, b)| a * b).sum::<f64>() * scale;
            }
            softmax_in_place(&mut logits);
            let row = &mut attn[(head * t_len + i) * t_len..(head * t_len + i + 1) * t_len];
            let ci = &mut ctx[i * h + off..i * h + off + dh];
            for (&w, &j) in logits.iter().zip(&keys) {
                row[j] = w;
                let vj = &v[j * h + off..j * h + off + dh];
                for (c, vv) in ci.iter_mut().zip(vj) {
                    *c += w * vv;
                }
            }
        }
    }
    let attn_out = linear(&ctx, t_len, &l.wo, &l.bo);
    let r1: Vec<f64> = x.iter().zip(&attn_out).map(|(a, b)| a + b).collect();
    let (x1, ln1) = layer_norm(&r1, t_len, &l.ln1_gain, &l.ln1_bias);
    let ff_pre = linear(&x1, t_len, &l.ff1_w, &l.ff1_b);
    let ff_act: Vec<f64> = ff_pre.iter().map(|&z| gelu(z)).collect();
    let ff_out = linear(&ff_act, t_len, &l.ff2_w, &l.ff2_b);
    let r2: Vec<f64> = x1.iter().zip(&ff_out).map(|(a, b)| a + b).collect();
    let (x2, ln2) = layer_norm(&r2, t_len, &l.ln2_gain, &l.ln2_bias);
    let cache = LayerCache {
        x_in: x.to_vec(),
        q,
        k,
        v,
        attn,
        ctx,
        ln1,
        x1,
        ff_pre,
        ff_act,
        ln2,
    };
    (x2, cache)
}

fn layer_backward(cfg: &EncoderConfig, l: &EncoderLayer, c: &LayerCache, d_out: &[f64], g: &mut EncoderLayer) -> Vec<f64> {
    let h = cfg.hidden_dim;
    let t_len = c.x_in.len() / h;
    let dh = cfg.head_dim();
    let scale = 1.0 / (dh as f64).sqrt();

    let d_r2 = layer_norm_backward(d_out, &c.ln2, &l.ln2_gain, &mut g.ln2_gain, &mut g.ln2_bias);
    let mut d_x1 = d_r2.clone();
    let mut d_act = vec![0.0; t_len * cfg.ff_dim];
    linear_backward(&c.ff_act, t_len, &l.ff2_w, &d_r2, &mut g.ff2_w, &mut g.ff2_b, &mut d_act);
    let d_pre: Vec<f64> = d_act.iter().zip(&c.ff_pre).map(|(d, &z)| d * gelu_grad(z)).collect();
    linear_backward(&c.x1, t_len, &l.ff1_w, &d_pre, &mut g.ff1_w, &mut g.ff1_b, &mut d_x1);

    let d_r1 = layer_norm_backward(&d_x1, &c.ln1, &l.ln1_gain, &mut g.ln1_gain, &mut g.ln1_bias);
    let mut d_x = d_r1.clone();
    let mut d_ctx = vec![0.0; t_len * h];
    linear_backward(&c.ctx, t_len, &l.wo, &d_r1, &mut g.wo, &mut g.bo, &mut d_ctx);

    let mut d_q = vec![0.0; t_len * h];
    let mut d_k = vec![0.0; t_len * h];
    let mut d_v = vec![0.0; t_len * h];
    let mut d_a = vec![0.0; t_len];
    for head in 0..cfg.n_heads {
        let off = head * dh;
        for i in 0..t_len {
            let a_row = &c.attn[(head * t_len + i) * t_len..(head * t_len + i + 1) * t_len];
            let dci = &d_ctx[i * h + off..i * h + off + dh];
            // dA_ij = dctx_i · v_j ; dV_j += A_ij dctx_i
            let mut dot = 0.0;
            for j in 0..t_len {
                if a_row[j] == 0.0 {
                    d_a[j] = 0.0;
                    continue;
                }
                let vj = &c.v[j * h + off..j * h + off + dh];
                d_a[j] = dci.iter().zip(vj).map(|(a, b)| a * b).sum();
                dot += d_a[j] * a_row[j];
                let dvj = &mut d_v[j * h + off..j * h + off + dh];
                for (dv, dc) in dvj.iter_mut().zip(dci) {
                    *dv += a_row[j] * dc;
                }
            }
            // softmax backward, then the scaled dot product
            for j in 0..t_len {
                if a_row[j] == 0.0 {
                    continue;
                }
                let ds = a_row[j] * (d_a[j] - dot) * scale;
                for d in 0..dh {
                    d_q[i * h + off + d] += ds * c.k[j * h + off + d];
                    d_k[j * h + off + d] += ds * c.q[i * h + off + d];
                }
            }
        }
    }
    linear_backward(&c.x_in, t_len, &l.wq, &d_q, &mut g.wq, &mut g.bq, &mut d_x);
    linear_backward(&c.x_in, t_len, &l.wk, &d_k, &mut g.wk, &mut g.bk, &mut d_x);
    linear_backward(&c.x_in, t_len, &l.wv, &d_v, &mut g.wv, &mut g.bv, &mut d_x);
    d_x
}

impl EncoderParams {
    /// Forward over `ids` (CLS already first) with a key mask. Returns the
    /// `(T × hidden)` output, flattened.
    pub(crate) fn forward_cached(
        &self,
        cfg: &EncoderConfig,
        ids: &[usize],
        keymask: &[bool],
    ) -> Result<(Vec<f64>, EncoderCache)> {
        let t_len = ids.len();
        if t_len > cfg.max_positions {
            return Err(Error::Shape(format!(
                "sequence of {t_len} positions exceeds max_positions {}",
                cfg.max_positions
            )));
        }
        if let Some(&bad) = ids.iter().find(|&&id| id >= cfg.vocab_size) {
            return Err(Error::InvalidArgument(format!(
                "token id {bad} outside vocab_size {}",
                cfg.vocab_size
            )));
        }
        let h = cfg.hidden_dim;
        let mut x = Vec::with_capacity(t_len * h);
        for (t, &id) in ids.iter().enumerate() {
            let tok = self.token_emb.row(id);
            let pos = self.pos_emb.row(t);
            x.extend(tok.iter().zip(pos).map(|(a, b)| a + b));
        }
        let mut layers = Vec::with_capacity(self.layers.len());
        for l in &self.layers {
            let (next, cache) = layer_forward(cfg, l, &x, keymask);
            layers.push(cache);
            x = next;
        }
        Ok((
            x,
            EncoderCache {
                ids: ids.to_vec(),
                layers,
            },
        ))
    }

    pub(crate) fn backward(&self, cfg: &EncoderConfig, cache: &EncoderCache, d_out: &[f64], grads: &mut EncoderParams) {
        let h = cfg.hidden_dim;
        let mut d = d_out.to_vec();
        for (li, l) in self.layers.iter().enumerate().rev() {
            d = layer_backward(cfg, l, &cache.layers[li], &d, &mut grads.layers[li]);
        }
        for (t, &id) in cache.ids.iter().enumerate() {
            let dr = &d[t * h..(t + 1) * h];
            grads.token_emb.row_mut(id).iter_mut().zip(dr).for_each(|(g, v)| *g += v);
            grads.pos_emb.row_mut(t).iter_mut().zip(dr).for_each(|(g, v)| *g += v);
        }
    }
}

fn with_cls(cfg: &EncoderConfig, token_ids: &[usize], mask: &[bool]) -> Result<(Vec<usize>, Vec<bool>)> {
    if token_ids.len() != mask.len() {
        return Err(Error::Shape(format!(
            "{} token ids vs {} mask entries",
            token_ids.len(),
            mask.len()
        )));
    }
    let ids = std::iter::once(cfg.cls_index).chain(token_ids.iter().copied()).collect();
    let keymask = std::iter::once(true).chain(mask.iter().copied()).collect();
    Ok((ids, keymask))
}

/// Prepends the CLS token and returns every position's final hidden vector
/// as a `(len + 1) × hidden` tensor (row 0 is CLS). Masked positions are
/// never attended to.
pub fn encoder_forward(cfg: &EncoderConfig, p: &EncoderParams, token_ids: &[usize], mask: &[bool]) -> Result<Tensor> {
    Ok(encoder_forward_traced(cfg, p, token_ids, mask)?.0)
}

pub fn encoder_forward_traced(
    cfg: &EncoderConfig,
    p: &EncoderParams,
    token_ids: &[usize],
    mask: &[bool],
) -> Result<(Tensor, EncoderTrace)> {
    cfg.validate()?;
    let (ids, keymask) = with_cls(cfg, token_ids, mask)?;
    let (out, cache) = p.forward_cached(cfg, &ids, &keymask)?;
    let t_len = ids.len();
    let h = cfg.hidden_dim;
    let trace = EncoderTrace {
        attention: cache
            .layers
            .iter()
            .map(|c| Tensor::new(vec![cfg.n_heads, t_len, t_len], c.attn.clone()))
            .collect::<Result<_>>()?,
        normalized: cache
            .layers
            .iter()
            .map(|c| {
                Ok([
                    Tensor::new(vec![t_len, h], c.ln1.xhat.clone())?,
                    Tensor::new(vec![t_len, h], c.ln2.xhat.clone())?,
                ])
            })
            .collect::<Result<_>>()?,
    };
    Ok((Tensor::new(vec![t_len, h], out)?, trace))
}
