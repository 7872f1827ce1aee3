use super::Embedder;
use crate::error::{Error, Result};
use crate::numeric::Tensor;
use crate::textproc::TokenSequence;

/// Right-padded embedded sequences with a 1/0 token mask.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceBatch {
    pub data: Tensor,
    pub mask: Tensor,
    pub lengths: Vec<usize>,
}

impl SequenceBatch {
    /// Pads the given `(len_i × dim)` sequences to a common `max_len`.
    pub fn from_sequences(seqs: &[Tensor], max_len: usize, dim: usize) -> Result<Self> {
        let mut data = Tensor::zeros(&[seqs.len(), max_len, dim]);
        let mut mask = Tensor::zeros(&[seqs.len(), max_len]);
        let mut lengths = Vec::with_capacity(seqs.len());
        for (b, s) in seqs.iter().enumerate() {
            let len = if s.is_empty() { 0 } else { s.shape()[0] };
            if len > 0 && (s.rank() != 2 || s.shape()[1] != dim) {
                return Err(Error::Shape(format!("sequence {b} has shape {:?}, dim {dim}", s.shape())));
            }
            let len = len.min(max_len);
            for t in 0..len {
                data.get3_row_mut(b, t).copy_from_slice(s.row(t));
                mask.row_mut(b)[t] = 1.0;
            }
            lengths.push(len);
        }
        Ok(SequenceBatch { data, mask, lengths })
    }

    pub fn batch_size(&self) -> usize {
        self.lengths.len()
    }

    pub fn max_len(&self) -> usize {
        self.data.shape()[1]
    }

    pub fn dim(&self) -> usize {
        self.data.shape()[2]
    }

    /// Unpadded `(len × dim)` view of row `b`.
    pub fn sequence(&self, b: usize) -> Tensor {
        let len = self.lengths[b];
        let mut out = Vec::with_capacity(len * self.dim());
        for t in 0..len {
            out.extend_from_slice(self.data.get3_row(b, t));
        }
        Tensor::new(vec![len, self.dim()], out).expect("consistent batch")
    }

    pub fn sequences(&self) -> Vec<Tensor> {
        (0..self.batch_size()).map(|b| self.sequence(b)).collect()
    }

    /// Same content with extra trailing padding.
    pub fn padded_to(&self, max_len: usize) -> Result<SequenceBatch> {
        if max_len < self.max_len() {
            return Err(Error::Shape("padded_to cannot shrink a batch".into()));
        }
        SequenceBatch::from_sequences(&self.sequences(), max_len, self.dim())
    }
}

/// Embeds each document's tokens in order, truncates to `max_len` and
/// right-pads with zeros.
pub fn encode_batch<E: Embedder + ?Sized>(
    docs: &[TokenSequence],
    embedder: &E,
    max_len: usize,
    dim: usize,
) -> Result<SequenceBatch> {
    if max_len == 0 {
        return Err(Error::InvalidArgument("max_len must be at least 1".into()));
    }
    if embedder.dim() != dim {
        return Err(Error::Shape(format!("embedder dim {} != {dim}", embedder.dim())));
    }
    let seqs = docs
        .iter()
        .map(|doc| {
            let rows: Vec<f64> = doc
                .iter()
                .filter_map(|w| embedder.embed(w))
                .take(max_len)
                .flatten()
                .collect();
            let len = rows.len() / dim;
            Tensor::new(vec![len, dim], rows)
        })
        .collect::<Result<Vec<_>>>()?;
    SequenceBatch::from_sequences(&seqs, max_len, dim)
}
