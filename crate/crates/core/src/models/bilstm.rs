use serde::{Deserialize, Serialize};

use super::lstm::{seq_len, SequenceCache};
use super::{prefixed, LstmParams, Parameters};
use crate::error::{Error, Result};
use crate::features::SequenceBatch;
use crate::numeric::{Prng, Tensor};

/// How the forward and backward final states are combined.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MergeMode {
    #[default]
    Concat,
    Sum,
    Average,
}

/// Two independent LSTMs: one reads the sequence left to right, the other
/// right to left.
#[derive(Debug, Clone, PartialEq)]
pub struct BiLstmParams {
    pub forward: LstmParams,
    pub backward: LstmParams,
    pub merge: MergeMode,
}

pub(crate) struct BiCache {
    fwd: SequenceCache,
    bwd: SequenceCache,
}

fn reversed(seq: &Tensor) -> Tensor {
    let len = seq_len(seq);
    if len == 0 {
        return seq.clone();
    }
    let mut out = Tensor::zeros(seq.shape());
    for t in 0..len {
        out.row_mut(t).copy_from_slice(seq.row(len - 1 - t));
    }
    out
}

impl BiLstmParams {
    pub fn new(forward: LstmParams, backward: LstmParams, merge: MergeMode) -> Result<Self> {
        if forward.hidden_dim() != backward.hidden_dim() || forward.input_dim() != backward.input_dim() {
            return Err(Error::Shape("forward and backward LSTMs differ in shape".into()));
        }
        Ok(BiLstmParams {
            forward,
            backward,
            merge,
        })
    }

    pub fn init(input_dim: usize, hidden_dim: usize, merge: MergeMode, prng: &mut Prng) -> Result<Self> {
        let forward = LstmParams::init(input_dim, hidden_dim, prng)?;
        let backward = LstmParams::init(input_dim, hidden_dim, prng)?;
        BiLstmParams::new(forward, backward, merge)
    }

    pub fn zeros_like(&self) -> Self {
        BiLstmParams {
            forward: LstmParams::zeros(self.input_dim(), self.hidden_dim()),
            backward: LstmParams::zeros(self.input_dim(), self.hidden_dim()),
            merge: self.merge,
        }
    }

    pub fn hidden_dim(&self) -> usize {
        self.forward.hidden_dim()
    }

    pub fn input_dim(&self) -> usize {
        self.forward.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        match self.merge {
            MergeMode::Concat => 2 * self.hidden_dim(),
            MergeMode::Sum | MergeMode::Average => self.hidden_dim(),
        }
    }

    pub(crate) fn final_state(&self, seq: &Tensor) -> Result<(Vec<f64>, BiCache)> {
        let (hf, fwd) = self.forward.final_hidden(seq)?;
        let (hb, bwd) = self.backward.final_hidden(&reversed(seq))?;
        let out = match self.merge {
            MergeMode::Concat => hf.iter().chain(&hb).copied().collect(),
            MergeMode::Sum => hf.iter().zip(&hb).map(|(a, b)| a + b).collect(),
            MergeMode::Average => hf.iter().zip(&hb).map(|(a, b)| 0.5 * (a + b)).collect(),
        };
        Ok((out, BiCache { fwd, bwd }))
    }

    pub(crate) fn backward_pass(&self, cache: &BiCache, d_out: &[f64], grads: &mut BiLstmParams) -> Tensor {
        let n = self.hidden_dim();
        let (df, db): (Vec<f64>, Vec<f64>) = match self.merge {
            MergeMode::Concat => (d_out[..n].to_vec(), d_out[n..].to_vec()),
            MergeMode::Sum => (d_out.to_vec(), d_out.to_vec()),
            MergeMode::Average => {
                let half: Vec<f64> = d_out.iter().map(|d| 0.5 * d).collect();
                (half.clone(), half)
            }
        };
        let mut dx = self.forward.backward(&cache.fwd, &df, &mut grads.forward);
        let dx_rev = self.backward.backward(&cache.bwd, &db, &mut grads.backward);
        let len = seq_len(&dx);
        for t in 0..len {
            let src = dx_rev.row(len - 1 - t).to_vec();
            dx.row_mut(t).iter_mut().zip(src).for_each(|(a, b)| *a += b);
        }
        dx
    }
}

impl Parameters for BiLstmParams {
    fn tensors(&self) -> Vec<(String, &Tensor)> {
        let mut v = prefixed("forward", self.forward.tensors());
        v.extend(prefixed("backward", self.backward.tensors()));
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v = self.forward.tensors_mut();
        v.extend(self.backward.tensors_mut());
        v
    }
}

/// Merged final states of both directions, one row per batch entry.
/// The backward LSTM reads only the unpadded part of each row, reversed.
pub fn bilstm_forward(p: &BiLstmParams, batch: &SequenceBatch) -> Result<Tensor> {
    if batch.dim() != p.input_dim() {
        return Err(Error::Shape(format!(
            "Bi-LSTM expects input dim {}, got {}",
            p.input_dim(),
            batch.dim()
        )));
    }
    let mut out = Tensor::zeros(&[batch.batch_size(), p.output_dim()]);
    for b in 0..batch.batch_size() {
        let (h, _) = p.final_state(&batch.sequence(b))?;
        out.row_mut(b).copy_from_slice(&h);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::lstm_forward;

    fn random_seq(len: usize, dim: usize, rng: &mut Prng) -> Tensor {
        Tensor::new(vec![len, dim], (0..len * dim).map(|_| rng.uniform(-1.0, 1.0)).collect()).unwrap()
    }

    #[test]
    fn equals_two_lstms_concatenated() {
        let mut rng = Prng::new(17);
        let p = BiLstmParams::init(3, 4, MergeMode::Concat, &mut rng).unwrap();
        let seqs: Vec<Tensor> = [0, 1, 3, 5].iter().map(|&l| random_seq(l, 3, &mut rng)).collect();
        let batch = SequenceBatch::from_sequences(&seqs, 6, 3).unwrap();
        let rev: Vec<Tensor> = seqs.iter().map(reversed).collect();
        let rev_batch = SequenceBatch::from_sequences(&rev, 6, 3).unwrap();
        let out = bilstm_forward(&p, &batch).unwrap();
        let (f, _) = lstm_forward(&p.forward, &batch).unwrap();
        let (b, _) = lstm_forward(&p.backward, &rev_batch).unwrap();
        for r in 0..4 {
            assert_eq!(&out.row(r)[..4], f.row(r));
            assert_eq!(&out.row(r)[4..], b.row(r));
        }
    }

    #[test]
    fn palindrome_with_shared_weights_is_symmetric() {
        let mut rng = Prng::new(5);
        let one = LstmParams::init(2, 3, &mut rng).unwrap();
        let p = BiLstmParams::new(one.clone(), one, MergeMode::Concat).unwrap();
        let a = random_seq(1, 2, &mut rng);
        let b = random_seq(1, 2, &mut rng);
        let rows = [a.row(0), b.row(0), a.row(0)].concat();
        let seq = Tensor::new(vec![3, 2], rows).unwrap();
        let (h, _) = p.final_state(&seq).unwrap();
        assert_eq!(h[..3], h[3..]);
    }

    #[test]
    fn merge_modes_and_shapes() {
        let mut rng = Prng::new(6);
        let seq = random_seq(3, 2, &mut rng);
        let concat = BiLstmParams::init(2, 3, MergeMode::Concat, &mut rng).unwrap();
        let mut sum = concat.clone();
        sum.merge = MergeMode::Sum;
        let mut avg = concat.clone();
        avg.merge = MergeMode::Average;
        let (c, _) = concat.final_state(&seq).unwrap();
        let (s, _) = sum.final_state(&seq).unwrap();
        let (a, _) = avg.final_state(&seq).unwrap();
        assert_eq!(c.len(), 6);
        for k in 0..3 {
            assert_eq!(s[k], c[k] + c[k + 3]);
            assert_eq!(a[k], 0.5 * (c[k] + c[k + 3]));
        }
        assert!(BiLstmParams::new(LstmParams::zeros(2, 3), LstmParams::zeros(2, 4), MergeMode::Concat).is_err());
    }
}
