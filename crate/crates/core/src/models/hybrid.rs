use super::deep::RecurrentKind;
use super::encoder::EncoderCache;
use super::{prefixed, Classifier, DenseHead, EncoderConfig, EncoderParams, Parameters, Recurrent};
use crate::error::{Error, Result};
use crate::numeric::{sigmoid, Prng, Tensor};
use crate::textproc::Vocabulary;

pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;
pub const CLS_ID: usize = 2;
/// Vocabulary index `i` maps to token id `i + ID_OFFSET`.
pub const ID_OFFSET: usize = 3;

/// Fixed-length token ids with a validity mask (`false` marks padding).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenInput {
    pub ids: Vec<usize>,
    pub mask: Vec<bool>,
}

impl TokenInput {
    pub fn new(ids: Vec<usize>, mask: Vec<bool>) -> Result<Self> {
        if ids.len() != mask.len() {
            return Err(Error::Shape(format!("{} ids vs {} mask entries", ids.len(), mask.len())));
        }
        Ok(TokenInput { ids, mask })
    }

    /// Tokenizes with the vocabulary's normalization, maps unknown words to
    /// the UNK id, truncates to `max_len` and pads with PAD.
    pub fn encode(text: &str, vocab: &Vocabulary, max_len: usize) -> Self {
        let tokens = vocab.analyzer().tokens(text);
        let mut ids: Vec<usize> = tokens
            .iter()
            .take(max_len)
            .map(|t| vocab.get(t).map_or(UNK_ID, |i| i + ID_OFFSET))
            .collect();
        let mut mask = vec![true; ids.len()];
        ids.resize(max_len, PAD_ID);
        mask.resize(max_len, false);
        TokenInput { ids, mask }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Prepends CLS and drops trailing padding, which no real position can
    /// attend to.
    fn with_cls(&self, cls: usize) -> (Vec<usize>, Vec<bool>) {
        let n = self.mask.iter().rposition(|&m| m).map_or(0, |i| i + 1);
        let ids = std::iter::once(cls).chain(self.ids[..n].iter().copied()).collect();
        let mask = std::iter::once(true).chain(self.mask[..n].iter().copied()).collect();
        (ids, mask)
    }
}

/// Encoder → CLS hidden state → dense head.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderClassifier {
    pub config: EncoderConfig,
    pub encoder: EncoderParams,
    pub head: DenseHead,
}

impl EncoderClassifier {
    pub fn init(config: EncoderConfig, dense_dim: usize, prng: &mut Prng) -> Result<Self> {
        let encoder = EncoderParams::init(&config, prng)?;
        let head = DenseHead::init(config.hidden_dim, dense_dim, prng)?;
        Ok(EncoderClassifier { config, encoder, head })
    }

    fn encode(&self, x: &TokenInput) -> Result<(Vec<f64>, EncoderCache)> {
        let (ids, mask) = x.with_cls(self.config.cls_index);
        self.encoder.forward_cached(&self.config, &ids, &mask)
    }
}

impl Parameters for EncoderClassifier {
    fn tensors(&self) -> Vec<(String, &Tensor)> {
        let mut v = prefixed("encoder", self.encoder.tensors());
        v.extend(prefixed("head", self.head.tensors()));
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v = self.encoder.tensors_mut();
        v.extend(self.head.tensors_mut());
        v
    }
}

impl Classifier for EncoderClassifier {
    type Input = TokenInput;

    fn logit(&self, x: &TokenInput) -> Result<f64> {
        let (out, _) = self.encode(x)?;
        Ok(self.head.forward(&out[..self.config.hidden_dim])?.0)
    }

    fn accumulate_gradient(&self, x: &TokenInput, target: f64, weight: f64, grads: &mut Self) -> Result<f64> {
        let h = self.config.hidden_dim;
        let (out, cache) = self.encode(x)?;
        let (z, head_cache) = self.head.forward(&out[..h])?;
        let p = sigmoid(z);
        let d_cls = self.head.backward(&head_cache, weight * (p - target), &mut grads.head);
        let mut d_out = vec![0.0; out.len()];
        d_out[..h].copy_from_slice(&d_cls);
        self.encoder.backward(&self.config, &cache, &d_out, &mut grads.encoder);
        Ok(p)
    }

    fn relu_margin(&self, x: &TokenInput) -> Result<f64> {
        let (out, _) = self.encode(x)?;
        self.head.relu_margin(&out[..self.config.hidden_dim])
    }

    fn zeros_like(&self) -> Self {
        EncoderClassifier {
            config: self.config,
            encoder: EncoderParams::zeros(&self.config),
            head: DenseHead::zeros(self.head.input_dim(), self.head.dense_dim()),
        }
    }
}

/// Encoder → per-token hidden states → LSTM or Bi-LSTM → dense head.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridModel {
    pub config: EncoderConfig,
    pub encoder: EncoderParams,
    pub recurrent: Recurrent,
    pub head: DenseHead,
    /// Feed the CLS state to the recurrent layer as its first step.
    pub include_cls: bool,
}

impl HybridModel {
    pub fn init(
        config: EncoderConfig,
        kind: RecurrentKind,
        hidden_dim: usize,
        dense_dim: usize,
        prng: &mut Prng,
    ) -> Result<Self> {
        let encoder = EncoderParams::init(&config, prng)?;
        let recurrent = Recurrent::init(kind, config.hidden_dim, hidden_dim, prng)?;
        let head = DenseHead::init(recurrent.output_dim(), dense_dim, prng)?;
        Ok(HybridModel {
            config,
            encoder,
            recurrent,
            head,
            include_cls: false,
        })
    }

    /// Encoder output rows fed to the recurrent layer.
    fn positions(&self, x: &TokenInput) -> Vec<usize> {
        let real = x.mask.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i + 1);
        if self.include_cls {
            std::iter::once(0).chain(real).collect()
        } else {
            real.collect()
        }
    }

    /// Recurrent output fed to the dense head.
    fn features(&self, x: &TokenInput) -> Result<Vec<f64>> {
        let (ids, mask) = x.with_cls(self.config.cls_index);
        let (out, _) = self.encoder.forward_cached(&self.config, &ids, &mask)?;
        let seq = self.gather(&out, &self.positions(x))?;
        Ok(self.recurrent.forward(&seq)?.0)
    }

    fn gather(&self, out: &[f64], rows: &[usize]) -> Result<Tensor> {
        let h = self.config.hidden_dim;
        if rows.is_empty() {
            return Ok(Tensor::zeros(&[0, h]));
        }
        let data = rows.iter().flat_map(|&r| out[r * h..(r + 1) * h].iter().copied()).collect();
        Tensor::new(vec![rows.len(), h], data)
    }
}

impl Parameters for HybridModel {
    fn tensors(&self) -> Vec<(String, &Tensor)> {
        let mut v = prefixed("encoder", self.encoder.tensors());
        v.extend(self.recurrent.tensors());
        v.extend(prefixed("head", self.head.tensors()));
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v = self.encoder.tensors_mut();
        v.extend(self.recurrent.tensors_mut());
        v.extend(self.head.tensors_mut());
        v
    }
}

impl Classifier for HybridModel {
    type Input = TokenInput;

    fn logit(&self, x: &TokenInput) -> Result<f64> {
        Ok(self.head.forward(&self.features(x)?)?.0)
    }

    fn relu_margin(&self, x: &TokenInput) -> Result<f64> {
        self.head.relu_margin(&self.features(x)?)
    }

    fn accumulate_gradient(&self, x: &TokenInput, target: f64, weight: f64, grads: &mut Self) -> Result<f64> {
        let h = self.config.hidden_dim;
        let (ids, mask) = x.with_cls(self.config.cls_index);
        let (out, enc_cache) = self.encoder.forward_cached(&self.config, &ids, &mask)?;
        let rows = self.positions(x);
        let seq = self.gather(&out, &rows)?;
        let (feat, rec_cache) = self.recurrent.forward(&seq)?;
        let (z, head_cache) = self.head.forward(&feat)?;
        let p = sigmoid(z);
        let d_feat = self.head.backward(&head_cache, weight * (p - target), &mut grads.head);
        let d_seq = self.recurrent.backward(&rec_cache, &d_feat, &mut grads.recurrent);
        let mut d_out = vec![0.0; out.len()];
        for (k, &r) in rows.iter().enumerate() {
            d_out[r * h..(r + 1) * h].copy_from_slice(d_seq.row(k));
        }
        self.encoder.backward(&self.config, &enc_cache, &d_out, &mut grads.encoder);
        Ok(p)
    }

    fn zeros_like(&self) -> Self {
        HybridModel {
            config: self.config,
            encoder: EncoderParams::zeros(&self.config),
            recurrent: self.recurrent.zeros_like(),
            head: DenseHead::zeros(self.head.input_dim(), self.head.dense_dim()),
            include_cls: self.include_cls,
        }
    }
}

/// Probability that `input` is positive.
pub fn hybrid_forward(model: &HybridModel, input: &TokenInput) -> Result<f64> {
    model.probability(input)
}
