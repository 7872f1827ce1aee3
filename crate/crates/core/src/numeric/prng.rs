use super::Tensor;
use crate::error::{Error, Result};

/// splitmix64 stream. The same seed yields the same sequence everywhere.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prng {
    state: u64,
}

impl Prng {
    pub fn new(seed: u64) -> Self {
        Prng { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in `[0, n)` via the high half of a 128-bit product.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// Fisher-Yates, walking from the end.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }

    /// Independent child stream seeded from this one.
    pub fn fork(&mut self) -> Prng {
        Prng::new(self.next_u64())
    }
}

/// Uniform Glorot initialization in `±sqrt(6 / (fan_in + fan_out))`.
///
/// A rank-2 shape `(rows, cols)` is read as (fan_out, fan_in). A rank-1 shape
/// `(n)` uses fan_in = 1, fan_out = n.
pub fn xavier_init(shape: &[usize], prng: &mut Prng) -> Result<Tensor> {
    let (fan_out, fan_in) = match *shape {
        [n] => (n, 1),
        [r, c] => (r, c),
        _ => {
            return Err(Error::Shape(format!(
                "xavier_init needs rank 1 or 2, got {shape:?}"
            )))
        }
    };
    if fan_in == 0 || fan_out == 0 {
        return Err(Error::Shape(format!("xavier_init on zero-size shape {shape:?}")));
    }
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let data = (0..fan_in * fan_out).map(|_| prng.uniform(-limit, limit)).collect();
    Tensor::new(shape.to_vec(), data)
}
