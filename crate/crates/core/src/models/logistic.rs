use super::{train, Classifier, Parameters, TrainConfig, TrainReport};
use crate::error::{Error, Result};
use crate::features::SparseVector;
use crate::numeric::{sigmoid, Tensor};

/// `σ(w·x + b)` over sparse TF-IDF vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    pub weights: Tensor,
    pub bias: Tensor,
}

impl LogisticModel {
    pub fn zeros(dim: usize) -> Self {
        LogisticModel {
            weights: Tensor::zeros(&[dim]),
            bias: Tensor::zeros(&[1]),
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    fn check(&self, x: &SparseVector) -> Result<()> {
        if x.dim() != self.dim() {
            return Err(Error::Shape(format!(
                "model has {} features, input has {}",
                self.dim(),
                x.dim()
            )));
        }
        Ok(())
    }
}

impl Parameters for LogisticModel {
    fn tensors(&self) -> Vec<(String, &Tensor)> {
        vec![("weights".into(), &self.weights), ("bias".into(), &self.bias)]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.weights, &mut self.bias]
    }
}

impl Classifier for LogisticModel {
    type Input = SparseVector;

    fn logit(&self, x: &SparseVector) -> Result<f64> {
        self.check(x)?;
        Ok(x.dot(self.weights.data()) + self.bias.data()[0])
    }

    fn accumulate_gradient(&self, x: &SparseVector, target: f64, weight: f64, grads: &mut Self) -> Result<f64> {
        let p = sigmoid(self.logit(x)?);
        let d = weight * (p - target);
        let gw = grads.weights.data_mut();
        for (i, v) in x.iter() {
            gw[i] += d * v;
        }
        grads.bias.data_mut()[0] += d;
        Ok(p)
    }

    fn zeros_like(&self) -> Self {
        LogisticModel::zeros(self.dim())
    }
}

/// Fits a zero-initialized logistic model with mini-batch Adam.
pub fn train_logistic_baseline(
    examples: &[(SparseVector, u8)],
    config: &TrainConfig,
) -> Result<(LogisticModel, TrainReport)> {
    let dim = examples.first().ok_or(Error::EmptyCorpus)?.0.dim();
    train(&LogisticModel::zeros(dim), examples, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::gradient_check;

    #[test]
    fn gradient_is_residual_times_input() {
        let m = LogisticModel {
            weights: Tensor::vector(vec![0.5, -1.0, 2.0]),
            bias: Tensor::vector(vec![0.1]),
        };
        let x = SparseVector::new(3, vec![(0, 1.0), (2, 0.5)]).unwrap();
        let mut g = m.zeros_like();
        let p = m.accumulate_gradient(&x, 1.0, 1.0, &mut g).unwrap();
        assert!((p - sigmoid(1.6)).abs() < 1e-15);
        let r = p - 1.0;
        assert_eq!(g.weights.data(), &[r, 0.0, r * 0.5]);
        assert_eq!(g.bias.data(), &[r]);
        let y = SparseVector::new(2, vec![]).unwrap();
        assert!(m.logit(&y).is_err());
    }

    #[test]
    fn finite_differences_agree() {
        let m = LogisticModel {
            weights: Tensor::vector(vec![0.3, -0.2, 0.7, 0.0]),
            bias: Tensor::vector(vec![-0.4]),
        };
        let a = SparseVector::new(4, vec![(0, 0.6), (3, 0.8)]).unwrap();
        let b = SparseVector::new(4, vec![(1, 1.0)]).unwrap();
        for (name, err) in gradient_check(&m, &[(&a, 1), (&b, 0)], 1e-6).unwrap() {
            assert!(err < 1e-7, "{name}: {err}");
        }
    }

    #[test]
    fn separable_data_is_learned() {
        let mut data = Vec::new();
        for i in 0..40 {
            let y = (i % 2) as u8;
            let x = SparseVector::new(2, vec![(y as usize, 1.0)]).unwrap();
            data.push((x, y));
        }
        let cfg = TrainConfig {
            epochs: 30,
            lr: 0.1,
            early_stop_patience: 0,
            ..TrainConfig::default()
        };
        let (m, report) = train_logistic_baseline(&data, &cfg).unwrap();
        assert!(report.records.last().unwrap().train_acc == 1.0);
        assert!(m.probability(&data[1].0).unwrap() > 0.9);
    }
}
