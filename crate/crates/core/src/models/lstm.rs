use super::{prefixed, Parameters};
use crate::error::{Error, Result};
use crate::features::SequenceBatch;
use crate::numeric::{add_matvec, add_matvec_t, add_outer, sigmoid, xavier_init, Prng, Tensor};

/// Weights of one LSTM gate: `W (hidden × input)`, `U (hidden × hidden)`, `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    pub w: Tensor,
    pub u: Tensor,
    pub b: Tensor,
}

impl Gate {
    fn zeros(hidden: usize, input: usize) -> Self {
        Gate {
            w: Tensor::zeros(&[hidden, input]),
            u: Tensor::zeros(&[hidden, hidden]),
            b: Tensor::zeros(&[hidden]),
        }
    }

    fn init(hidden: usize, input: usize, bias: f64, prng: &mut Prng) -> Result<Self> {
        let mut b = Tensor::zeros(&[hidden]);
        b.fill(bias);
        Ok(Gate {
            w: xavier_init(&[hidden, input], prng)?,
            u: xavier_init(&[hidden, hidden], prng)?,
            b,
        })
    }

    /// `W x + U h + b`
    fn preactivation(&self, x: &[f64], h: &[f64]) -> Vec<f64> {
        let mut z = self.b.data().to_vec();
        add_matvec(&self.w, x, &mut z);
        add_matvec(&self.u, h, &mut z);
        z
    }

    fn tensors(&self) -> Vec<(String, &Tensor)> {
        vec![("w".into(), &self.w), ("u".into(), &self.u), ("b".into(), &self.b)]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.w, &mut self.u, &mut self.b]
    }
}

/// Input, forget, output and candidate gates of one LSTM layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub input: Gate,
    pub forget: Gate,
    pub output: Gate,
    pub candidate: Gate,
    hidden_dim: usize,
    input_dim: usize,
}

/// Hidden and cell vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> Self {
        LstmState {
            h: vec![0.0; hidden],
            c: vec![0.0; hidden],
        }
    }
}

/// Per-step activations kept for the backward pass.
#[derive(Debug, Clone)]
pub(crate) struct StepCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    i: Vec<f64>,
    f: Vec<f64>,
    o: Vec<f64>,
    g: Vec<f64>,
    tanh_c: Vec<f64>,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct SequenceCache {
    steps: Vec<StepCache>,
}

impl LstmParams {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        LstmParams {
            input: Gate::zeros(hidden_dim, input_dim),
            forget: Gate::zeros(hidden_dim, input_dim),
            output: Gate::zeros(hidden_dim, input_dim),
            candidate: Gate::zeros(hidden_dim, input_dim),
            hidden_dim,
            input_dim,
        }
    }

    /// Glorot weights, zero biases except the forget gate (1.0).
    pub fn init(input_dim: usize, hidden_dim: usize, prng: &mut Prng) -> Result<Self> {
        Ok(LstmParams {
            input: Gate::init(hidden_dim, input_dim, 0.0, prng)?,
            forget: Gate::init(hidden_dim, input_dim, 1.0, prng)?,
            output: Gate::init(hidden_dim, input_dim, 0.0, prng)?,
            candidate: Gate::init(hidden_dim, input_dim, 0.0, prng)?,
            hidden_dim,
            input_dim,
        })
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn gates(&self) -> [&Gate; 4] {
        [&self.input, &self.forget, &self.output, &self.candidate]
    }

    fn step(&self, x: &[f64], s: &LstmState) -> (LstmState, StepCache) {
        let mut i = self.input.preactivation(x, &s.h);
        let mut f = self.forget.preactivation(x, &s.h);
        let mut o = self.output.preactivation(x, &s.h);
        let mut g = self.candidate.preactivation(x, &s.h);
        i.iter_mut().for_each(|v| *v = sigmoid(*v));
        f.iter_mut().for_each(|v| *v = sigmoid(*v));
        o.iter_mut().for_each(|v| *v = sigmoid(*v));
        g.iter_mut().for_each(|v| *v = v.tanh());
        let n = self.hidden_dim;
        let mut c = vec![0.0; n];
        let mut h = vec![0.0; n];
        let mut tanh_c = vec![0.0; n];
        for k in 0..n {
            c[k] = f[k] * s.c[k] + i[k] * g[k];
            tanh_c[k] = c[k].tanh();
            h[k] = o[k] * tanh_c[k];
        }
        let cache = StepCache {
            x: x.to_vec(),
            h_prev: s.h.clone(),
            c_prev: s.c.clone(),
            i,
            f,
            o,
            g,
            tanh_c,
        };
        (LstmState { h, c }, cache)
    }

    fn check_input(&self, dim: usize) -> Result<()> {
        if dim != self.input_dim {
            return Err(Error::Shape(format!(
                "LSTM expects input dim {}, got {dim}",
                self.input_dim
            )));
        }
        Ok(())
    }

    /// Runs over an unpadded `(len × input_dim)` sequence from a zero state.
    pub(crate) fn run(&self, seq: &Tensor) -> Result<(Vec<Vec<f64>>, SequenceCache)> {
        let len = seq_len(seq);
        if len > 0 {
            self.check_input(seq.shape()[1])?;
        }
        let mut state = LstmState::zeros(self.hidden_dim);
        let mut cache = SequenceCache {
            steps: Vec::with_capacity(len),
        };
        let mut hs = Vec::with_capacity(len);
        for t in 0..len {
            let (next, step) = self.step(seq.row(t), &state);
            cache.steps.push(step);
            hs.push(next.h.clone());
            state = next;
        }
        Ok((hs, cache))
    }

    /// Final hidden state of an unpadded sequence (zeros when empty).
    pub(crate) fn final_hidden(&self, seq: &Tensor) -> Result<(Vec<f64>, SequenceCache)> {
        let (hs, cache) = self.run(seq)?;
        Ok((hs.last().cloned().unwrap_or_else(|| vec![0.0; self.hidden_dim]), cache))
    }

    /// Backpropagates `d_final` (gradient at the last hidden state) through
    /// the cached steps. Adds into `grads`; returns `d_input` with the
    /// sequence's shape.
    pub(crate) fn backward(&self, cache: &SequenceCache, d_final: &[f64], grads: &mut LstmParams) -> Tensor {
        let n = self.hidden_dim;
        let len = cache.steps.len();
        let mut d_input = Tensor::zeros(&[len, self.input_dim]);
        let mut dh = d_final.to_vec();
        let mut dc = vec![0.0; n];
        let mut dz = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        for t in (0..len).rev() {
            let s = &cache.steps[t];
            for k in 0..n {
                let d_o = dh[k] * s.tanh_c[k];
                let d_c = dc[k] + dh[k] * s.o[k] * (1.0 - s.tanh_c[k] * s.tanh_c[k]);
                let d_f = d_c * s.c_prev[k];
                let d_i = d_c * s.g[k];
                let d_g = d_c * s.i[k];
                dc[k] = d_c * s.f[k];
                dz[0][k] = d_i * s.i[k] * (1.0 - s.i[k]);
                dz[1][k] = d_f * s.f[k] * (1.0 - s.f[k]);
                dz[2][k] = d_o * s.o[k] * (1.0 - s.o[k]);
                dz[3][k] = d_g * (1.0 - s.g[k] * s.g[k]);
            }
            let mut dh_prev = vec![0.0; n];
            let dx = d_input.row_mut(t);
            let grad_gates = [&mut grads.input, &mut grads.forget, &mut grads.output, &mut grads.candidate];
            for ((gate, gg), dzg) in self.gates().into_iter().zip(grad_gates).zip(&dz) {
                add_outer(&mut gg.w, dzg, &s.x);
                add_outer(&mut gg.u, dzg, &s.h_prev);
                gg.b.data_mut().iter_mut().zip(dzg).for_each(|(b, d)| *b += d);
                add_matvec_t(&gate.w, dzg, dx);
                add_matvec_t(&gate.u, dzg, &mut dh_prev);
            }
            dh = dh_prev;
        }
        d_input
    }
}

pub(crate) fn seq_len(seq: &Tensor) -> usize {
    if seq.is_empty() {
        0
    } else {
        seq.shape()[0]
    }
}

impl Parameters for LstmParams {
    fn tensors(&self) -> Vec<(String, &Tensor)> {
        let mut v = prefixed("input", self.input.tensors());
        v.extend(prefixed("forget", self.forget.tensors()));
        v.extend(prefixed("output", self.output.tensors()));
        v.extend(prefixed("candidate", self.candidate.tensors()));
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v = self.input.tensors_mut();
        v.extend(self.forget.tensors_mut());
        v.extend(self.output.tensors_mut());
        v.extend(self.candidate.tensors_mut());
        v
    }
}

/// One LSTM step.
pub fn lstm_cell_forward(p: &LstmParams, x: &[f64], s: &LstmState) -> Result<LstmState> {
    p.check_input(x.len())?;
    if s.h.len() != p.hidden_dim || s.c.len() != p.hidden_dim {
        return Err(Error::Shape(format!(
            "state of size {}/{} for hidden {}",
            s.h.len(),
            s.c.len(),
            p.hidden_dim
        )));
    }
    Ok(p.step(x, s).0)
}

/// Left-to-right pass over a padded batch. Padded steps carry the state
/// through unchanged, so `final_h` is the state at each row's true length.
/// Returns `final_h (batch × hidden)` and `all_h (batch × max_len × hidden)`.
pub fn lstm_forward(p: &LstmParams, batch: &SequenceBatch) -> Result<(Tensor, Tensor)> {
    p.check_input(batch.dim())?;
    let (b, l, n) = (batch.batch_size(), batch.max_len(), p.hidden_dim);
    let mut final_h = Tensor::zeros(&[b, n]);
    let mut all_h = Tensor::zeros(&[b, l, n]);
    for row in 0..b {
        let (hs, _) = p.run(&batch.sequence(row))?;
        let mut last = vec![0.0; n];
        for t in 0..l {
            if let Some(h) = hs.get(t) {
                last.clone_from(h);
            }
            all_h.get3_row_mut(row, t).copy_from_slice(&last);
        }
        final_h.row_mut(row).copy_from_slice(&last);
    }
    Ok((final_h, all_h))
}
