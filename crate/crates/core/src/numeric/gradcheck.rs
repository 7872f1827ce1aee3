use super::Tensor;
use crate::error::{Error, Result};

/// Central-difference gradient of a scalar function.
pub fn finite_diff_grad<F>(mut f: F, x: &Tensor, eps: f64) -> Result<Tensor>
where
    F: FnMut(&Tensor) -> f64,
{
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    let mut probe = x.clone();
    let mut grad = Tensor::zeros_like(x);
    for i in 0..x.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + eps;
        let up = f(&probe);
        probe.data_mut()[i] = orig - eps;
        let down = f(&probe);
        probe.data_mut()[i] = orig;
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::NonFinite(format!("function value at coordinate {i}")));
        }
        grad.data_mut()[i] = (up - down) / (2.0 * eps);
    }
    Ok(grad)
}

/// `|a − b| / max(1, |a|, |b|)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / 1f64.max(a.abs()).max(b.abs())
}

pub fn max_relative_error(a: &Tensor, b: &Tensor) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| relative_error(*x, *y))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{sigmoid, Prng};

    #[test]
    fn square_at_three() {
        let g = finite_diff_grad(|t| t.data()[0] * t.data()[0], &Tensor::vector(vec![3.0]), 1e-4).unwrap();
        assert!((g.data()[0] - 6.0).abs() < 1e-6);
    }

    #[test]
    fn constant_has_zero_gradient() {
        let g = finite_diff_grad(|_| 4.2, &Tensor::vector(vec![1.0, 2.0, 3.0]), 1e-4).unwrap();
        assert!(g.data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn sum_of_sigmoids() {
        let mut rng = Prng::new(8);
        let x = Tensor::vector((0..10).map(|_| rng.uniform(-3.0, 3.0)).collect());
        let g = finite_diff_grad(|t| t.data().iter().map(|v| sigmoid(*v)).sum(), &x, 1e-4).unwrap();
        for (xi, gi) in x.data().iter().zip(g.data()) {
            let s = sigmoid(*xi);
            assert!((gi - s * (1.0 - s)).abs() < 1e-6);
        }
    }

    #[test]
    fn errors() {
        let x = Tensor::vector(vec![0.0]);
        assert!(finite_diff_grad(|_| 1.0, &x, 0.0).is_err());
        assert!(finite_diff_grad(|t| 1.0 / t.data()[0].abs().min(0.0), &x, 1e-4).is_err());
    }
}
