use super::Parameters;
use crate::error::{Error, Result};
use crate::numeric::{add_matvec, add_matvec_t, add_outer, relu, xavier_init, Prng, Tensor};

/// Dense layer with ReLU followed by a single-unit output layer (the logit).
#[derive(Debug, Clone, PartialEq)]
pub struct DenseHead {
    pub dense_w: Tensor,
    pub dense_b: Tensor,
    pub out_w: Tensor,
    pub out_b: Tensor,
}

pub(crate) struct HeadCache {
    input: Vec<f64>,
    pre: Vec<f64>,
    act: Vec<f64>,
}

impl DenseHead {
    pub fn zeros(input_dim: usize, dense_dim: usize) -> Self {
        DenseHead {
            dense_w: Tensor::zeros(&[dense_dim, input_dim]),
            dense_b: Tensor::zeros(&[dense_dim]),
            out_w: Tensor::zeros(&[1, dense_dim]),
            out_b: Tensor::zeros(&[1]),
        }
    }

    pub fn init(input_dim: usize, dense_dim: usize, prng: &mut Prng) -> Result<Self> {
        Ok(DenseHead {
            dense_w: xavier_init(&[dense_dim, input_dim], prng)?,
            dense_b: Tensor::zeros(&[dense_dim]),
            out_w: xavier_init(&[1, dense_dim], prng)?,
            out_b: Tensor::zeros(&[1]),
        })
    }

    pub fn input_dim(&self) -> usize {
        self.dense_w.shape()[1]
    }

    pub fn dense_dim(&self) -> usize {
        self.dense_w.shape()[0]
    }

    pub(crate) fn forward(&self, input: &[f64]) -> Result<(f64, HeadCache)> {
        if input.len() != self.input_dim() {
            return Err(Error::Shape(format!(
                "dense head expects {} features, got {}",
                self.input_dim(),
                input.len()
            )));
        }
        let mut pre = self.dense_b.data().to_vec();
        add_matvec(&self.dense_w, input, &mut pre);
        let act: Vec<f64> = pre.iter().map(|&v| relu(v)).collect();
        let mut logit = [self.out_b.data()[0]];
        add_matvec(&self.out_w, &act, &mut logit);
        Ok((
            logit[0],
            HeadCache {
                input: input.to_vec(),
                pre,
                act,
            },
        ))
    }

    pub(crate) fn relu_margin(&self, input: &[f64]) -> Result<f64> {
        let (_, cache) = self.forward(input)?;
        Ok(cache.pre.iter().map(|z| z.abs()).fold(f64::INFINITY, f64::min))
    }

    /// Returns the gradient with respect to the head's input.
    pub(crate) fn backward(&self, cache: &HeadCache, d_logit: f64, grads: &mut DenseHead) -> Vec<f64> {
        add_outer(&mut grads.out_w, &[d_logit], &cache.act);
        grads.out_b.data_mut()[0] += d_logit;
        let mut d_act = vec![0.0; self.dense_dim()];
        add_matvec_t(&self.out_w, &[d_logit], &mut d_act);
        let d_pre: Vec<f64> = d_act
            .iter()
            .zip(&cache.pre)
            .map(|(d, &z)| if z > 0.0 { *d } else { 0.0 })
            .collect();
        add_outer(&mut grads.dense_w, &d_pre, &cache.input);
        grads
            .dense_b
            .data_mut()
            .iter_mut()
            .zip(&d_pre)
            .for_each(|(b, d)| *b += d);
        let mut d_in = vec![0.0; self.input_dim()];
        add_matvec_t(&self.dense_w, &d_pre, &mut d_in);
        d_in
    }
}

impl Parameters for DenseHead {
    fn tensors(&self) -> Vec<(String, &Tensor)> {
        vec![
            ("dense.w".into(), &self.dense_w),
            ("dense.b".into(), &self.dense_b),
            ("out.w".into(), &self.out_w),
            ("out.b".into(), &self.out_b),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.dense_w, &mut self.dense_b, &mut self.out_w, &mut self.out_b]
    }
}
