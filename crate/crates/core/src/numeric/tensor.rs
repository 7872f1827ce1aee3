use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Dense row-major array of `f64` with rank at most 3.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub const MAX_RANK: usize = 3;

    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.len() > Self::MAX_RANK {
            return Err(Error::Shape(format!("rank {} exceeds {}", shape.len(), Self::MAX_RANK)));
        }
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::Shape(format!(
                "shape {shape:?} needs {expected} values, got {}",
                data.len()
            )));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        assert!(shape.len() <= Self::MAX_RANK, "rank {} exceeds 3", shape.len());
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn zeros_like(other: &Tensor) -> Self {
        Tensor::zeros(&other.shape)
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Tensor {
            shape: vec![data.len()],
            data,
        }
    }

    /// Builds a rank-2 tensor from equally long rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Shape("ragged rows".into()));
        }
        let data = rows.iter().flatten().copied().collect();
        Tensor::new(vec![rows.len(), cols], data)
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Tensor::zeros(&[n, n]);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Length of the innermost axis (1 for a scalar).
    fn inner(&self) -> usize {
        self.shape.last().copied().unwrap_or(1)
    }

    /// Row `i` of a rank-2 tensor, or of the flattened leading axes otherwise.
    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.inner();
        &self.data[i * w..(i + 1) * w]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let w = self.inner();
        &mut self.data[i * w..(i + 1) * w]
    }

    pub fn get2(&self, i: usize, j: usize) -> f64 {
        debug_assert_eq!(self.rank(), 2);
        self.data[i * self.shape[1] + j]
    }

    /// Fiber `[i, j, ..]` of a rank-3 tensor.
    pub fn get3_row(&self, i: usize, j: usize) -> &[f64] {
        debug_assert_eq!(self.rank(), 3);
        let (d1, d2) = (self.shape[1], self.shape[2]);
        let start = (i * d1 + j) * d2;
        &self.data[start..start + d2]
    }

    pub fn get3_row_mut(&mut self, i: usize, j: usize) -> &mut [f64] {
        debug_assert_eq!(self.rank(), 3);
        let (d1, d2) = (self.shape[1], self.shape[2]);
        let start = (i * d1 + j) * d2;
        &mut self.data[start..start + d2]
    }

    pub fn transpose(&self) -> Result<Tensor> {
        if self.rank() != 2 {
            return Err(Error::Shape(format!("transpose needs rank 2, got {:?}", self.shape)));
        }
        let (r, c) = (self.shape[0], self.shape[1]);
        let mut out = Tensor::zeros(&[c, r]);
        for i in 0..r {
            for j in 0..c {
                out.data[j * r + i] = self.data[i * c + j];
            }
        }
        Ok(out)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn fill(&mut self, value: f64) {
        self.data.iter_mut().for_each(|v| *v = value);
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &Tensor, scale: f64) {
        debug_assert_eq!(self.shape, other.shape);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += scale * b;
        }
    }

    /// Text form: header `rank d0 [d1 [d2]]`, then values one innermost row
    /// per line. Values use the shortest representation that parses back to
    /// the same bits.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        write!(s, "{}", self.rank()).unwrap();
        for d in &self.shape {
            write!(s, " {d}").unwrap();
        }
        s.push('\n');
        let w = self.inner().max(1);
        for chunk in self.data.chunks(w) {
            let mut first = true;
            for v in chunk {
                if !first {
                    s.push(' ');
                }
                first = false;
                write!(s, "{v:?}").unwrap();
            }
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Tensor> {
        let mut tokens = text.split_whitespace();
        let t = Tensor::read_tokens(&mut tokens)?;
        if tokens.next().is_some() {
            return Err(Error::Shape("trailing values after tensor".into()));
        }
        Ok(t)
    }

    /// Reads one tensor from a whitespace token stream (header then values).
    pub fn read_tokens<'a, I: Iterator<Item = &'a str>>(tokens: &mut I) -> Result<Tensor> {
        let bad = |m: String| Error::Shape(m);
        let rank: usize = tokens
            .next()
            .ok_or_else(|| bad("missing tensor header".into()))?
            .parse()
            .map_err(|e| bad(format!("bad rank: {e}")))?;
        if rank > Self::MAX_RANK {
            return Err(bad(format!("rank {rank} exceeds 3")));
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            let d: usize = tokens
                .next()
                .ok_or_else(|| bad("truncated tensor header".into()))?
                .parse()
                .map_err(|e| bad(format!("bad dimension: {e}")))?;
            shape.push(d);
        }
        let n: usize = shape.iter().product();
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            let tok = tokens
                .next()
                .ok_or_else(|| bad(format!("expected {n} values, got {}", data.len())))?;
            let v: f64 = tok.parse().map_err(|_| bad(format!("bad value {tok:?}")))?;
            data.push(v);
        }
        Tensor::new(shape, data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_wrong_length_and_rank() {
        assert!(Tensor::new(vec![2, 2], vec![1.0; 3]).is_err());
        assert!(Tensor::new(vec![1, 1, 1, 1], vec![1.0]).is_err());
    }

    #[test]
    fn text_header_layout() {
        let t = Tensor::new(vec![2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.5]).unwrap();
        assert_eq!(t.to_text(), "2 2 3\n1.0 2.0 3.0\n4.0 5.0 6.5\n");
    }

    #[test]
    fn text_round_trip_is_exact() {
        let t = Tensor::new(
            vec![2, 1, 3],
            vec![0.1, -1e-300, 1.0 / 3.0, f64::MAX, 7.0, -0.0],
        )
        .unwrap();
        let back = Tensor::from_text(&t.to_text()).unwrap();
        assert_eq!(t.shape(), back.shape());
        for (a, b) in t.data().iter().zip(back.data()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn scalar_round_trip() {
        let t = Tensor::new(vec![], vec![2.5]).unwrap();
        assert_eq!(Tensor::from_text(&t.to_text()).unwrap(), t);
    }

    #[test]
    fn truncated_text_is_an_error() {
        assert!(Tensor::from_text("2 2 2\n1 2 3").is_err());
        assert!(Tensor::from_text("1 2\n1 x").is_err());
    }
}
