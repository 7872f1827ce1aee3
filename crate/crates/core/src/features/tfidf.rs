use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::textproc::{ngrams, TokenSequence, Vocabulary};

/// Sparse vector with strictly increasing indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseVector {
    indices: Vec<usize>,
    values: Vec<f64>,
    dim: usize,
}

impl SparseVector {
    pub fn new(dim: usize, entries: Vec<(usize, f64)>) -> Result<Self> {
        let mut indices = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        for (i, v) in entries {
            if i >= dim {
                return Err(Error::Shape(format!("index {i} out of dimension {dim}")));
            }
            if indices.last().is_some_and(|&last| last >= i) {
                return Err(Error::Shape("sparse indices must be strictly increasing".into()));
            }
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("sparse value at {i}")));
            }
            indices.push(i);
            values.push(v);
        }
        Ok(SparseVector { indices, values, dim })
    }

    pub fn empty(dim: usize) -> Self {
        SparseVector {
            indices: Vec::new(),
            values: Vec::new(),
            dim,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    pub fn get(&self, index: usize) -> f64 {
        self.indices
            .binary_search(&index)
            .map_or(0.0, |pos| self.values[pos])
    }

    pub fn dot(&self, dense: &[f64]) -> f64 {
        self.iter().map(|(i, v)| v * dense[i]).sum()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (i, v) in self.iter() {
            out[i] = v;
        }
        out
    }
}

/// Term-frequency variants. The defaults (raw counts, no row normalization)
/// are the plain TF × IDF product.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TfidfOptions {
    /// Use `1 + ln(count)` instead of the raw count.
    pub sublinear_tf: bool,
    /// Scale each output vector to unit Euclidean norm.
    pub l2_normalize: bool,
}

/// Fitted document frequencies and `idf = ln(n_docs / df) + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TfidfModel {
    vocab: Vocabulary,
    idf: Vec<f64>,
    df: Vec<usize>,
    n_docs: usize,
    options: TfidfOptions,
}

impl TfidfModel {
    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn idf(&self) -> &[f64] {
        &self.idf
    }

    pub fn df(&self) -> &[usize] {
        &self.df
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn dim(&self) -> usize {
        self.vocab.len()
    }

    /// Normalizes and tokenizes raw text with the vocabulary's analyzer, then
    /// transforms it.
    pub fn transform_text(&self, text: &str) -> SparseVector {
        let analyzer = self.vocab.analyzer();
        let tokens = analyzer.tokens(text);
        transform_tfidf(self, &tokens, analyzer.ngram_range).expect("analyzer range is valid")
    }
}

pub fn fit_tfidf(corpus: &Corpus, vocab: &Vocabulary) -> Result<TfidfModel> {
    fit_tfidf_with(corpus, vocab, TfidfOptions::default())
}

pub fn fit_tfidf_with(corpus: &Corpus, vocab: &Vocabulary, options: TfidfOptions) -> Result<TfidfModel> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let analyzer = vocab.analyzer();
    let mut df = vec![0usize; vocab.len()];
    let mut seen = vec![usize::MAX; vocab.len()];
    for (d, text) in corpus.texts().enumerate() {
        for term in analyzer.terms(text) {
            if let Some(t) = vocab.get(&term) {
                if seen[t] != d {
                    seen[t] = d;
                    df[t] += 1;
                }
            }
        }
    }
    if let Some(t) = df.iter().position(|&c| c == 0) {
        return Err(Error::StaleVocabulary(vocab.terms()[t].clone()));
    }
    let n_docs = corpus.len();
    let idf = df
        .iter()
        .map(|&c| (n_docs as f64 / c as f64).ln() + 1.0)
        .collect();
    Ok(TfidfModel {
        vocab: vocab.clone(),
        idf,
        df,
        n_docs,
        options,
    })
}

/// `count(t, d) × idf(t)` for every vocabulary term present in the document.
pub fn transform_tfidf(
    model: &TfidfModel,
    tokens: &TokenSequence,
    ngram_range: (usize, usize),
) -> Result<SparseVector> {
    let mut counts: HashMap<usize, usize> = HashMap::new();
    for term in ngrams(tokens, ngram_range.0, ngram_range.1)? {
        if let Some(t) = model.vocab.get(&term) {
            *counts.entry(t).or_insert(0) += 1;
        }
    }
    let mut entries: Vec<(usize, f64)> = counts
        .into_iter()
        .map(|(t, c)| {
            let tf = if model.options.sublinear_tf {
                1.0 + (c as f64).ln()
            } else {
                c as f64
            };
            (t, tf * model.idf[t])
        })
        .collect();
    entries.sort_by_key(|e| e.0);
    if model.options.l2_normalize {
        let norm = entries.iter().map(|e| e.1 * e.1).sum::<f64>().sqrt();
        if norm > 0.0 {
            entries.iter_mut().for_each(|e| e.1 /= norm);
        }
    }
    SparseVector::new(model.dim(), entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::LabeledPost;
    use crate::textproc::{tokenize, Analyzer, NormalizationConfig};

    fn corpus(texts: &[&str]) -> Corpus {
        Corpus::new(texts.iter().map(|t| LabeledPost::new(*t, 1).unwrap()).collect(), "t")
    }

    fn unigram_vocab(terms: &[&str]) -> Vocabulary {
        let a = Analyzer::new(NormalizationConfig::default(), (1, 1)).unwrap();
        Vocabulary::from_terms(terms.iter().copied(), 100, a).unwrap()
    }

    #[test]
    fn two_doc_example() {
        let m = fit_tfidf(&corpus(&["a b a", "b c"]), &unigram_vocab(&["a", "b"])).unwrap();
        assert_eq!(m.df(), &[1, 2]);
        assert!((m.idf()[0] - (2f64.ln() + 1.0)).abs() < 1e-15);
        assert!((m.idf()[0] - 1.6931).abs() < 1e-4);
        assert_eq!(m.idf()[1], 1.0);

        let v = transform_tfidf(&m, &tokenize("a b a"), (1, 1)).unwrap();
        assert!((v.get(0) - 2.0 * (2f64.ln() + 1.0)).abs() < 1e-15);
        assert!((v.get(0) - 3.3863).abs() < 1e-4);
        assert_eq!(v.get(1), 1.0);
    }

    #[test]
    fn identity_cases() {
        let m = fit_tfidf(&corpus(&["x"]), &unigram_vocab(&["x"])).unwrap();
        assert_eq!(m.idf(), &[1.0]);
        let m = fit_tfidf(&corpus(&["x y", "x", "z x"]), &unigram_vocab(&["x"])).unwrap();
        assert_eq!(m.idf(), &[1.0]);
    }

    #[test]
    fn no_vocab_terms_and_linearity() {
        let m = fit_tfidf(&corpus(&["a b a", "b c"]), &unigram_vocab(&["a", "b"])).unwrap();
        assert!(transform_tfidf(&m, &tokenize("q r"), (1, 1)).unwrap().is_empty());
        let once = transform_tfidf(&m, &tokenize("a b a"), (1, 1)).unwrap();
        let twice = transform_tfidf(&m, &tokenize("a b a").repeated(2), (1, 1)).unwrap();
        for (a, b) in once.iter().zip(twice.iter()) {
            assert_eq!(a.0, b.0);
            assert_eq!(2.0 * a.1, b.1);
        }
    }

    #[test]
    fn stale_vocabulary() {
        let err = fit_tfidf(&corpus(&["a"]), &unigram_vocab(&["a", "zz"])).unwrap_err();
        assert!(matches!(err, Error::StaleVocabulary(t) if t == "zz"));
    }

    #[test]
    fn idf_is_monotone_in_df() {
        let m = fit_tfidf(
            &corpus(&["a b c", "a b", "a", "a d"]),
            &unigram_vocab(&["a", "b", "c", "d"]),
        )
        .unwrap();
        for i in 0..4 {
            for j in 0..4 {
                if m.df()[i] < m.df()[j] {
                    assert!(m.idf()[i] > m.idf()[j]);
                }
            }
        }
    }

    #[test]
    fn options_change_weights() {
        let c = corpus(&["a a a b", "b"]);
        let v = unigram_vocab(&["a", "b"]);
        let opts = TfidfOptions {
            sublinear_tf: true,
            l2_normalize: true,
        };
        let m = fit_tfidf_with(&c, &v, opts).unwrap();
        let x = m.transform_text("a a a b");
        let norm: f64 = x.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
        let raw_a = (1.0 + 3f64.ln()) * (1.0 + 2f64.ln());
        assert!((x.get(0) / x.get(1) - raw_a).abs() < 1e-12);
    }

    #[test]
    fn sparse_vector_validation() {
        assert!(SparseVector::new(3, vec![(0, 1.0), (0, 2.0)]).is_err());
        assert!(SparseVector::new(3, vec![(3, 1.0)]).is_err());
        assert!(SparseVector::new(3, vec![(1, f64::NAN)]).is_err());
        let v = SparseVector::new(3, vec![(0, 1.0), (2, 2.0)]).unwrap();
        assert_eq!(v.to_dense(), vec![1.0, 0.0, 2.0]);
        assert_eq!(v.dot(&[1.0, 5.0, 0.5]), 2.0);
    }
}
