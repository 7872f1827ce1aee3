//! Numeric features: TF-IDF vectors, static word embeddings, hashed subword
//! embeddings and padded sequence batches.

mod batch;
mod embedding;
mod subword;
mod tfidf;

pub use batch::{encode_batch, SequenceBatch};
pub use embedding::{load_embeddings_text, parse_embeddings_text, EmbeddingTable, OovPolicy};
pub use subword::{embed_word_subword, fnv1a64, subword_ngrams, SubwordEmbeddingTable};
pub use tfidf::{fit_tfidf, fit_tfidf_with, transform_tfidf, SparseVector, TfidfModel, TfidfOptions};

/// Maps a word to a dense vector. `None` means the word is dropped from the
/// sequence.
pub trait Embedder {
    fn dim(&self) -> usize;
    fn embed(&self, word: &str) -> Option<Vec<f64>>;
}

/// Static word-embedding route default sequence cap.
pub const STATIC_MAX_LEN: usize = 100;
/// Subword route default sequence cap.
pub const SUBWORD_MAX_LEN: usize = 90;
