use serde::{Deserialize, Serialize};

use super::bilstm::BiCache;
use super::head::HeadCache;
use super::lstm::SequenceCache;
use super::{prefixed, BiLstmParams, Classifier, DenseHead, LstmParams, MergeMode, Parameters};
use crate::error::{Error, Result};
use crate::features::SequenceBatch;
use crate::numeric::{sigmoid, Prng, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecurrentKind {
    Lstm,
    Bilstm,
}

/// A unidirectional or bidirectional recurrent layer.
#[derive(Debug, Clone, PartialEq)]
pub enum Recurrent {
    Lstm(LstmParams),
    BiLstm(BiLstmParams),
}

pub(crate) enum RecurrentCache {
    Lstm(SequenceCache),
    BiLstm(BiCache),
}

impl Recurrent {
    pub fn init(kind: RecurrentKind, input_dim: usize, hidden_dim: usize, prng: &mut Prng) -> Result<Self> {
        Ok(match kind {
            RecurrentKind::Lstm => Recurrent::Lstm(LstmParams::init(input_dim, hidden_dim, prng)?),
            RecurrentKind::Bilstm => {
                Recurrent::BiLstm(BiLstmParams::init(input_dim, hidden_dim, MergeMode::Concat, prng)?)
            }
        })
    }

    pub fn kind(&self) -> RecurrentKind {
        match self {
            Recurrent::Lstm(_) => RecurrentKind::Lstm,
            Recurrent::BiLstm(_) => RecurrentKind::Bilstm,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Recurrent::Lstm(p) => p.input_dim(),
            Recurrent::BiLstm(p) => p.input_dim(),
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            Recurrent::Lstm(p) => p.hidden_dim(),
            Recurrent::BiLstm(p) => p.output_dim(),
        }
    }

    pub fn zeros_like(&self) -> Self {
        match self {
            Recurrent::Lstm(p) => Recurrent::Lstm(LstmParams::zeros(p.input_dim(), p.hidden_dim())),
            Recurrent::BiLstm(p) => Recurrent::BiLstm(p.zeros_like()),
        }
    }

    /// Final (merged) state of an unpadded `(len × input_dim)` sequence.
    pub(crate) fn forward(&self, seq: &Tensor) -> Result<(Vec<f64>, RecurrentCache)> {
        Ok(match self {
            Recurrent::Lstm(p) => {
                let (h, c) = p.final_hidden(seq)?;
                (h, RecurrentCache::Lstm(c))
            }
            Recurrent::BiLstm(p) => {
                let (h, c) = p.final_state(seq)?;
                (h, RecurrentCache::BiLstm(c))
            }
        })
    }

    pub(crate) fn backward(&self, cache: &RecurrentCache, d_out: &[f64], grads: &mut Recurrent) -> Tensor {
        match (self, cache, grads) {
            (Recurrent::Lstm(p), RecurrentCache::Lstm(c), Recurrent::Lstm(g)) => p.backward(c, d_out, g),
            (Recurrent::BiLstm(p), RecurrentCache::BiLstm(c), Recurrent::BiLstm(g)) => {
                p.backward_pass(c, d_out, g)
            }
            _ => unreachable!("gradient container built by zeros_like"),
        }
    }
}

impl Parameters for Recurrent {
    fn tensors(&self) -> Vec<(String, &Tensor)> {
        match self {
            Recurrent::Lstm(p) => prefixed("lstm", p.tensors()),
            Recurrent::BiLstm(p) => prefixed("bilstm", p.tensors()),
        }
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        match self {
            Recurrent::Lstm(p) => p.tensors_mut(),
            Recurrent::BiLstm(p) => p.tensors_mut(),
        }
    }
}

/// Embedded token sequence → recurrent layer → dense ReLU head → sigmoid.
#[derive(Debug, Clone, PartialEq)]
pub struct DeepModel {
    pub recurrent: Recurrent,
    pub head: DenseHead,
}

pub(crate) struct DeepCache {
    rec: RecurrentCache,
    head: HeadCache,
}

impl DeepModel {
    pub fn new(recurrent: Recurrent, head: DenseHead) -> Result<Self> {
        if recurrent.output_dim() != head.input_dim() {
            return Err(Error::Shape(format!(
                "recurrent output {} != head input {}",
                recurrent.output_dim(),
                head.input_dim()
            )));
        }
        Ok(DeepModel { recurrent, head })
    }

    pub fn init(
        kind: RecurrentKind,
        input_dim: usize,
        hidden_dim: usize,
        dense_dim: usize,
        prng: &mut Prng,
    ) -> Result<Self> {
        let recurrent = Recurrent::init(kind, input_dim, hidden_dim, prng)?;
        let head = DenseHead::init(recurrent.output_dim(), dense_dim, prng)?;
        DeepModel::new(recurrent, head)
    }

    fn forward_cached(&self, seq: &Tensor) -> Result<(f64, DeepCache)> {
        let (h, rec) = self.recurrent.forward(seq)?;
        let (z, head) = self.head.forward(&h)?;
        Ok((z, DeepCache { rec, head }))
    }
}

impl Parameters for DeepModel {
    fn tensors(&self) -> Vec<(String, &Tensor)> {
        let mut v = self.recurrent.tensors();
        v.extend(prefixed("head", self.head.tensors()));
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v = self.recurrent.tensors_mut();
        v.extend(self.head.tensors_mut());
        v
    }
}

impl Classifier for DeepModel {
    /// Unpadded `(len × input_dim)` sequence.
    type Input = Tensor;

    fn logit(&self, x: &Tensor) -> Result<f64> {
        Ok(self.forward_cached(x)?.0)
    }

    fn accumulate_gradient(&self, x: &Tensor, target: f64, weight: f64, grads: &mut Self) -> Result<f64> {
        let (z, cache) = self.forward_cached(x)?;
        let p = sigmoid(z);
        let d_feat = self.head.backward(&cache.head, weight * (p - target), &mut grads.head);
        self.recurrent.backward(&cache.rec, &d_feat, &mut grads.recurrent);
        Ok(p)
    }

    fn relu_margin(&self, x: &Tensor) -> Result<f64> {
        self.head.relu_margin(&self.recurrent.forward(x)?.0)
    }

    fn zeros_like(&self) -> Self {
        DeepModel {
            recurrent: self.recurrent.zeros_like(),
            head: DenseHead::zeros(self.head.input_dim(), self.head.dense_dim()),
        }
    }
}

/// Probability per batch row.
pub fn deep_forward(model: &DeepModel, batch: &SequenceBatch) -> Result<Vec<f64>> {
    if batch.dim() != model.recurrent.input_dim() {
        return Err(Error::Shape(format!(
            "model expects input dim {}, batch has {}",
            model.recurrent.input_dim(),
            batch.dim()
        )));
    }
    (0..batch.batch_size())
        .map(|b| model.probability(&batch.sequence(b)))
        .collect()
}
