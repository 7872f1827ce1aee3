use std::str::FromStr;

use super::Tensor;
use crate::error::{Error, Result};

/// Probabilities are clamped into `[BCE_CLAMP, 1 - BCE_CLAMP]` before taking logs.
pub const BCE_CLAMP: f64 = 1e-12;

pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0] {
        return Err(Error::Shape(format!(
            "matmul {:?} x {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let (m, k, n) = (a.shape()[0], a.shape()[1], b.shape()[1]);
    let (ad, bd) = (a.data(), b.data());
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = ad[i * k + p];
            let brow = &bd[p * n..(p + 1) * n];
            for (o, bv) in row.iter_mut().zip(brow) {
                *o += aip * bv;
            }
        }
    }
    Tensor::new(vec![m, n], out)
}

/// `out += w · x` for `w` of shape (out.len() × x.len()).
pub(crate) fn add_matvec(w: &Tensor, x: &[f64], out: &mut [f64]) {
    let cols = x.len();
    debug_assert_eq!(w.shape(), &[out.len(), cols]);
    let wd = w.data();
    for (i, o) in out.iter_mut().enumerate() {
        let row = &wd[i * cols..(i + 1) * cols];
        let mut acc = 0.0;
        for (a, b) in row.iter().zip(x) {
            acc += a * b;
        }
        *o += acc;
    }
}

/// `out += wᵀ · y` for `w` of shape (y.len() × out.len()).
pub(crate) fn add_matvec_t(w: &Tensor, y: &[f64], out: &mut [f64]) {
    let cols = out.len();
    debug_assert_eq!(w.shape(), &[y.len(), cols]);
    let wd = w.data();
    for (i, yi) in y.iter().enumerate() {
        if *yi == 0.0 {
            continue;
        }
        let row = &wd[i * cols..(i + 1) * cols];
        for (o, a) in out.iter_mut().zip(row) {
            *o += yi * a;
        }
    }
}

/// `g += a ⊗ b` for `g` of shape (a.len() × b.len()).
pub(crate) fn add_outer(g: &mut Tensor, a: &[f64], b: &[f64]) {
    let cols = b.len();
    debug_assert_eq!(g.shape(), &[a.len(), cols]);
    let gd = g.data_mut();
    for (i, ai) in a.iter().enumerate() {
        if *ai == 0.0 {
            continue;
        }
        let row = &mut gd[i * cols..(i + 1) * cols];
        for (o, bj) in row.iter_mut().zip(b) {
            *o += ai * bj;
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

/// GELU, tanh approximation.
pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh())
}

pub fn gelu_grad(x: f64) -> f64 {
    let t = (GELU_C * (x + GELU_A * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
}

/// Numerically stable softmax over a slice, in place.
pub fn softmax_in_place(xs: &mut [f64]) {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in xs.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in xs.iter_mut() {
        *x /= sum;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Sigmoid,
    Tanh,
    Relu,
    Gelu,
    SoftmaxRow,
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sigmoid" => Ok(Activation::Sigmoid),
            "tanh" => Ok(Activation::Tanh),
            "relu" => Ok(Activation::Relu),
            "gelu" => Ok(Activation::Gelu),
            "softmax_row" => Ok(Activation::SoftmaxRow),
            other => Err(Error::InvalidArgument(format!("unknown activation {other:?}"))),
        }
    }
}

pub fn activation(kind: Activation, x: &Tensor) -> Result<Tensor> {
    let mut out = x.clone();
    let f: fn(f64) -> f64 = match kind {
        Activation::Sigmoid => sigmoid,
        Activation::Tanh => f64::tanh,
        Activation::Relu => relu,
        Activation::Gelu => gelu,
        Activation::SoftmaxRow => {
            if x.rank() != 2 {
                return Err(Error::Shape(format!("softmax_row needs rank 2, got {:?}", x.shape())));
            }
            for r in 0..x.shape()[0] {
                softmax_in_place(out.row_mut(r));
            }
            return Ok(out);
        }
    };
    out.data_mut().iter_mut().for_each(|v| *v = f(*v));
    Ok(out)
}

/// Mean binary cross-entropy with probabilities clamped to avoid `ln 0`.
pub fn binary_cross_entropy(p: &Tensor, y: &Tensor) -> Result<f64> {
    if p.shape() != y.shape() {
        return Err(Error::Shape(format!("bce {:?} vs {:?}", p.shape(), y.shape())));
    }
    if p.is_empty() {
        return Err(Error::Shape("bce over zero elements".into()));
    }
    let mut total = 0.0;
    for (&pi, &yi) in p.data().iter().zip(y.data()) {
        let pc = pi.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
        total -= yi * pc.ln() + (1.0 - yi) * (1.0 - pc).ln();
    }
    Ok(total / p.len() as f64)
}
