//! Classifiers with hand-derived gradients: LSTM and Bi-LSTM sequence models,
//! a BERT-style encoder, encoder→recurrent hybrids and a logistic-regression
//! baseline, plus the training loop and checkpoints.
//!
//! Every model implements [`Classifier`]: a forward pass to a single logit
//! and an exact backward pass that accumulates parameter gradients. The
//! gradients are verified against central finite differences by
//! [`gradient_check`].

mod bilstm;
mod checkpoint;
mod deep;
mod encoder;
mod head;
mod hybrid;
mod logistic;
mod lstm;
mod train;

pub use bilstm::{bilstm_forward, BiLstmParams, MergeMode};
pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint};
pub use deep::{deep_forward, DeepModel, Recurrent, RecurrentKind};
pub use encoder::{
    encoder_forward, encoder_forward_traced, EncoderConfig, EncoderParams, EncoderTrace,
};
pub use head::DenseHead;
pub use hybrid::{hybrid_forward, EncoderClassifier, HybridModel, TokenInput, CLS_ID, ID_OFFSET, PAD_ID, UNK_ID};
pub use logistic::{train_logistic_baseline, LogisticModel};
pub use lstm::{lstm_cell_forward, lstm_forward, Gate, LstmParams, LstmState};
pub use train::{
    evaluate, predict, train, EarlyStopMetric, Prediction, TrainConfig, TrainReport,
};

use crate::error::{Error, Result};
use crate::numeric::{binary_cross_entropy, finite_diff_grad, max_relative_error, sigmoid, Tensor};

/// Named trainable tensors in a fixed order.
pub trait Parameters {
    fn tensors(&self) -> Vec<(String, &Tensor)>;
    fn tensors_mut(&mut self) -> Vec<&mut Tensor>;

    fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    /// Copies tensor values from `other`, which must have the same layout.
    fn load_from(&mut self, other: &[Tensor]) -> Result<()> {
        let mut mine = self.tensors_mut();
        if mine.len() != other.len() {
            return Err(Error::Shape(format!(
                "expected {} tensors, got {}",
                mine.len(),
                other.len()
            )));
        }
        for (dst, src) in mine.iter_mut().zip(other) {
            if dst.shape() != src.shape() {
                return Err(Error::Shape(format!("tensor {:?} vs {:?}", dst.shape(), src.shape())));
            }
            **dst = src.clone();
        }
        Ok(())
    }
}

pub(crate) fn prefixed<'a>(prefix: &str, items: Vec<(String, &'a Tensor)>) -> Vec<(String, &'a Tensor)> {
    items.into_iter().map(|(n, t)| (format!("{prefix}.{n}"), t)).collect()
}

/// A binary classifier producing one logit per input.
pub trait Classifier: Parameters + Clone {
    type Input;

    fn logit(&self, x: &Self::Input) -> Result<f64>;

    fn probability(&self, x: &Self::Input) -> Result<f64> {
        Ok(sigmoid(self.logit(x)?))
    }

    /// Runs forward, then backpropagates `weight · (σ(z) − target)`, the BCE
    /// gradient at the logit, adding parameter gradients into `grads`.
    /// Returns σ(z).
    fn accumulate_gradient(&self, x: &Self::Input, target: f64, weight: f64, grads: &mut Self)
        -> Result<f64>;

    /// Same architecture with every tensor zeroed.
    fn zeros_like(&self) -> Self;

    /// Smallest |pre-activation| over the ReLU units for input `x`. The
    /// model is smooth in every parameter within this distance of a kink,
    /// which bounds the step a finite-difference check may use.
    fn relu_margin(&self, _x: &Self::Input) -> Result<f64> {
        Ok(f64::INFINITY)
    }
}

/// Mean BCE over `examples` and its gradient with respect to every parameter.
pub fn loss_and_gradient<M: Classifier>(model: &M, examples: &[(&M::Input, u8)]) -> Result<(f64, M)> {
    if examples.is_empty() {
        return Err(Error::InvalidArgument("no examples".into()));
    }
    let n = examples.len() as f64;
    let mut grads = model.zeros_like();
    let mut probs = Vec::with_capacity(examples.len());
    let mut labels = Vec::with_capacity(examples.len());
    for &(x, y) in examples {
        let p = model.accumulate_gradient(x, y as f64, 1.0 / n, &mut grads)?;
        probs.push(p);
        labels.push(y as f64);
    }
    let loss = binary_cross_entropy(&Tensor::vector(probs), &Tensor::vector(labels))?;
    Ok((loss, grads))
}

pub fn mean_loss<M: Classifier>(model: &M, examples: &[(&M::Input, u8)]) -> Result<f64> {
    let mut probs = Vec::with_capacity(examples.len());
    let mut labels = Vec::with_capacity(examples.len());
    for &(x, y) in examples {
        probs.push(model.probability(x)?);
        labels.push(y as f64);
    }
    binary_cross_entropy(&Tensor::vector(probs), &Tensor::vector(labels))
}

/// Worst relative error per parameter tensor between the analytic BCE
/// gradient and central differences with step `eps`.
pub fn gradient_check<M: Classifier>(
    model: &M,
    examples: &[(&M::Input, u8)],
    eps: f64,
) -> Result<Vec<(String, f64)>> {
    let (_, grads) = loss_and_gradient(model, examples)?;
    let names: Vec<String> = model.tensors().into_iter().map(|(n, _)| n).collect();
    let analytic: Vec<Tensor> = grads.tensors().into_iter().map(|(_, t)| t.clone()).collect();
    let mut out = Vec::with_capacity(names.len());
    for (k, name) in names.into_iter().enumerate() {
        let x = model.tensors()[k].1.clone();
        let mut probe = model.clone();
        let numeric = finite_diff_grad(
            |t| {
                *probe.tensors_mut()[k] = t.clone();
                mean_loss(&probe, examples).unwrap_or(f64::NAN)
            },
            &x,
            eps,
        )?;
        out.push((name, max_relative_error(&analytic[k], &numeric)));
    }
    Ok(out)
}
