use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Embedder;
use crate::error::{Error, Result};
use crate::numeric::{Prng, Tensor};
use crate::textproc::Vocabulary;

/// What to do with a word that has no row.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OovPolicy {
    /// Emit an all-zero vector so sequence positions stay aligned.
    #[default]
    Zero,
    /// Drop the word from the sequence.
    Skip,
}

/// Word → dense row lookup (GloVe / word2vec style).
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    rows: HashMap<String, usize>,
    matrix: Tensor,
    dim: usize,
    oov_policy: OovPolicy,
}

impl EmbeddingTable {
    /// Builds a table from `(word, vector)` pairs; a repeated word keeps its
    /// last vector.
    pub fn from_pairs<I>(pairs: I, dim: usize, oov_policy: OovPolicy) -> Result<Self>
    where
        I: IntoIterator<Item = (String, Vec<f64>)>,
    {
        if dim == 0 {
            return Err(Error::InvalidArgument("embedding dim must be positive".into()));
        }
        let mut rows: HashMap<String, usize> = HashMap::new();
        let mut data: Vec<f64> = Vec::new();
        for (word, vec) in pairs {
            if vec.len() != dim {
                return Err(Error::Shape(format!(
                    "vector for {word:?} has {} values, expected {dim}",
                    vec.len()
                )));
            }
            if let Some(&r) = rows.get(&word) {
                data[r * dim..(r + 1) * dim].copy_from_slice(&vec);
            } else {
                rows.insert(word, data.len() / dim);
                data.extend(vec);
            }
        }
        let n = data.len() / dim;
        Ok(EmbeddingTable {
            rows,
            matrix: Tensor::new(vec![n, dim], data)?,
            dim,
            oov_policy,
        })
    }

    /// Random uniform rows in `[-1, 1)` for each distinct word, in the order
    /// given. Stands in for a pretrained table at desk scale.
    pub fn random<'a, I>(words: I, dim: usize, prng: &mut Prng) -> Result<Self>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut seen = std::collections::HashSet::new();
        let mut pairs = Vec::new();
        for w in words {
            if seen.insert(w) {
                pairs.push((w.to_owned(), (0..dim).map(|_| prng.uniform(-1.0, 1.0)).collect()));
            }
        }
        EmbeddingTable::from_pairs(pairs, dim, OovPolicy::Zero)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn oov_policy(&self) -> OovPolicy {
        self.oov_policy
    }

    pub fn with_oov_policy(mut self, policy: OovPolicy) -> Self {
        self.oov_policy = policy;
        self
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.rows.get(word).map(|&r| self.matrix.row(r))
    }

    /// Known word → its row; unknown → zeros or `None` depending on policy.
    pub fn embed_word(&self, word: &str) -> Option<Vec<f64>> {
        match (self.get(word), self.oov_policy) {
            (Some(row), _) => Some(row.to_vec()),
            (None, OovPolicy::Zero) => Some(vec![0.0; self.dim]),
            (None, OovPolicy::Skip) => None,
        }
    }

    /// One row per vocabulary index; terms without a vector get zeros.
    pub fn embedding_matrix(&self, vocab: &Vocabulary) -> Tensor {
        let mut m = Tensor::zeros(&[vocab.len(), self.dim]);
        for (i, term) in vocab.terms().iter().enumerate() {
            if let Some(row) = self.get(term) {
                m.row_mut(i).copy_from_slice(row);
            }
        }
        m
    }
}

impl Embedder for EmbeddingTable {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, word: &str) -> Option<Vec<f64>> {
        self.embed_word(word)
    }
}

/// Parses `word v1 … v_dim` lines. Blank lines are ignored.
pub fn parse_embeddings_text(text: &str, dim: usize) -> Result<EmbeddingTable> {
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let mut fields = line.split_whitespace();
        let Some(word) = fields.next() else { continue };
        let values = fields
            .map(|f| {
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::record("embeddings", i + 1, format!("non-numeric value {f:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if values.len() != dim {
            return Err(Error::record(
                "embeddings",
                i + 1,
                format!("expected {dim} values, found {}", values.len()),
            ));
        }
        pairs.push((word.to_owned(), values));
    }
    EmbeddingTable::from_pairs(pairs, dim, OovPolicy::Zero)
}

pub fn load_embeddings_text(path: &Path, dim: usize) -> Result<EmbeddingTable> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_embeddings_text(&text, dim)
}
