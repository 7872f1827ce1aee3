use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{loss_and_gradient, Classifier};
use crate::error::{Error, Result};
use crate::eval::EpochRecord;
use crate::numeric::{binary_cross_entropy, AdamState, Prng, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EarlyStopMetric {
    #[default]
    ValAccuracy,
    ValLoss,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Epochs without improvement before stopping; 0 disables early stopping.
    pub early_stop_patience: usize,
    pub early_stop_metric: EarlyStopMetric,
    pub seed: u64,
    /// Share of the training examples held out for validation.
    pub val_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            batch_size: 32,
            lr: 1e-3,
            early_stop_patience: 3,
            early_stop_metric: EarlyStopMetric::ValAccuracy,
            seed: 42,
            val_fraction: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return bad("lr must be a positive number");
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return bad("val_fraction must lie in [0, 1)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub records: Vec<EpochRecord>,
    /// Last epoch that ran (1-based).
    pub stopped_epoch: usize,
    /// Epoch whose parameters were kept.
    pub best_epoch: usize,
    pub wall_time_secs: f64,
}

impl PartialEq for TrainReport {
    fn eq(&self, other: &Self) -> bool {
        self.records == other.records
            && self.stopped_epoch == other.stopped_epoch
            && self.best_epoch == other.best_epoch
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub probability: f64,
    pub label: u8,
}

/// Mean BCE and accuracy at threshold 0.5.
pub fn evaluate<M: Classifier>(model: &M, data: &[(M::Input, u8)]) -> Result<(f64, f64)> {
    let refs: Vec<_> = data.iter().map(|(x, y)| (x, *y)).collect();
    evaluate_refs(model, &refs)
}

fn evaluate_refs<M: Classifier>(model: &M, data: &[(&M::Input, u8)]) -> Result<(f64, f64)> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("nothing to evaluate".into()));
    }
    let mut probs = Vec::with_capacity(data.len());
    let mut correct = 0usize;
    for &(x, y) in data {
        let p = model.probability(x)?;
        if u8::from(p >= 0.5) == y {
            correct += 1;
        }
        probs.push(p);
    }
    let labels = data.iter().map(|&(_, y)| y as f64).collect();
    let loss = binary_cross_entropy(&Tensor::vector(probs), &Tensor::vector(labels))?;
    Ok((loss, correct as f64 / data.len() as f64))
}

/// Label 1 iff the probability reaches `threshold`.
pub fn predict<M: Classifier>(model: &M, inputs: &[M::Input], threshold: f64) -> Result<Vec<Prediction>> {
    inputs
        .iter()
        .map(|x| {
            let probability = model.probability(x)?;
            Ok(Prediction {
                probability,
                label: u8::from(probability >= threshold),
            })
        })
        .collect()
}

/// Mini-batch Adam on mean BCE starting from `init`. A seeded share of
/// `data` is held out for validation; without one, training metrics stand
/// in. With early stopping the best epoch's parameters are returned.
pub fn train<M: Classifier>(init: &M, data: &[(M::Input, u8)], config: &TrainConfig) -> Result<(M, TrainReport)> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let start = Instant::now();
    let mut prng = Prng::new(config.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    prng.shuffle(&mut order);
    let n_val = (config.val_fraction * data.len() as f64 + 1e-9).floor() as usize;
    let (val_idx, train_idx) = order.split_at(n_val);
    let mut train_idx = train_idx.to_vec();
    let val: Vec<(&M::Input, u8)> = val_idx.iter().map(|&i| (&data[i].0, data[i].1)).collect();

    let mut model = init.clone();
    let mut states: Vec<AdamState> = model
        .tensors()
        .iter()
        .map(|(_, t)| AdamState::new(t.shape(), config.lr))
        .collect();
    let mut records = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, usize, M)> = None;
    let mut stopped_epoch = 0;

    for epoch in 1..=config.epochs {
        prng.shuffle(&mut train_idx);
        for chunk in train_idx.chunks(config.batch_size) {
            let batch: Vec<(&M::Input, u8)> = chunk.iter().map(|&i| (&data[i].0, data[i].1)).collect();
            let (loss, grads) = loss_and_gradient(&model, &batch)?;
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!("training loss at epoch {epoch}")));
            }
            for ((param, (_, grad)), state) in model.tensors_mut().into_iter().zip(grads.tensors()).zip(&mut states) {
                state.update(param, grad)?;
            }
        }
        let train_refs: Vec<(&M::Input, u8)> = train_idx.iter().map(|&i| (&data[i].0, data[i].1)).collect();
        let (train_loss, train_acc) = evaluate_refs(&model, &train_refs)?;
        let (val_loss, val_acc) = if val.is_empty() {
            (train_loss, train_acc)
        } else {
            evaluate_refs(&model, &val)?
        };
        if !train_loss.is_finite() {
            return Err(Error::NonFinite(format!("training loss at epoch {epoch}")));
        }
        records.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            train_acc,
            val_acc,
        });
        stopped_epoch = epoch;

        if config.early_stop_patience > 0 {
            let score = match config.early_stop_metric {
                EarlyStopMetric::ValAccuracy => val_acc,
                EarlyStopMetric::ValLoss => -val_loss,
            };
            match &best {
                Some((s, _, _)) if score <= *s => {}
                _ => best = Some((score, epoch, model.clone())),
            }
            let best_epoch = best.as_ref().map_or(epoch, |b| b.1);
            if epoch - best_epoch >= config.early_stop_patience {
                break;
            }
        }
    }

    let (model, best_epoch) = match best {
        Some((_, e, m)) => (m, e),
        None => (model, stopped_epoch),
    };
    let report = TrainReport {
        records,
        stopped_epoch,
        best_epoch,
        wall_time_secs: start.elapsed().as_secs_f64(),
    };
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::SparseVector;
    use crate::models::LogisticModel;

    fn noisy_data() -> Vec<(SparseVector, u8)> {
        let mut rng = Prng::new(9);
        (0..60)
            .map(|_| {
                let y = rng.below(2) as u8;
                let x = SparseVector::new(3, vec![(0, rng.uniform(-1.0, 1.0)), (2, 1.0)]).unwrap();
                (x, y)
            })
            .collect()
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        for c in [
            TrainConfig { epochs: 0, ..Default::default() },
            TrainConfig { batch_size: 0, ..Default::default() },
            TrainConfig { lr: f64::NAN, ..Default::default() },
            TrainConfig { val_fraction: 1.0, ..Default::default() },
        ] {
            assert!(c.validate().is_err());
        }
        let parsed: TrainConfig = serde_json::from_str(r#"{"epochs": 4, "early_stop_metric": "val_loss"}"#).unwrap();
        assert_eq!(parsed.epochs, 4);
        assert_eq!(parsed.early_stop_metric, EarlyStopMetric::ValLoss);
        assert!(serde_json::from_str::<TrainConfig>(r#"{"epoch": 4}"#).is_err());
    }

    #[test]
    fn training_is_deterministic() {
        let data = noisy_data();
        let cfg = TrainConfig { epochs: 5, lr: 0.05, early_stop_patience: 0, ..Default::default() };
        let (a, ra) = train(&LogisticModel::zeros(3), &data, &cfg).unwrap();
        let (b, rb) = train(&LogisticModel::zeros(3), &data, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra, rb);
        assert_eq!(ra.records.len(), 5);
        assert_eq!(ra.stopped_epoch, 5);
    }

    #[test]
    fn early_stopping_restores_best_epoch() {
        let data = noisy_data();
        let cfg = TrainConfig { epochs: 200, lr: 0.5, early_stop_patience: 2, ..Default::default() };
        let (m, r) = train(&LogisticModel::zeros(3), &data, &cfg).unwrap();
        assert!(r.stopped_epoch < 200);
        assert_eq!(r.stopped_epoch - r.best_epoch, 2);
        let best = &r.records[r.best_epoch - 1];
        assert!(r.records.iter().all(|e| e.val_acc <= best.val_acc));
        assert_eq!(m.dim(), 3);
    }

    #[test]
    fn predict_uses_threshold() {
        let m = LogisticModel {
            weights: Tensor::vector(vec![1.0]),
            bias: Tensor::vector(vec![0.0]),
        };
        let xs = vec![
            SparseVector::new(1, vec![(0, 0.0)]).unwrap(),
            SparseVector::new(1, vec![(0, -0.1)]).unwrap(),
        ];
        let p = predict(&m, &xs, 0.5).unwrap();
        assert_eq!(p[0].label, 1);
        assert_eq!(p[1].label, 0);
        assert_eq!(predict(&m, &xs, 0.4).unwrap()[1].label, 1);
    }
}
