//! Binary text classification for Arabic social-media comments.
//!
//! The crate covers the whole pipeline used to detect cyberbullying in short
//! posts: corpus ingestion and annotator agreement ([`corpus`]), text
//! normalization and vocabularies ([`textproc`]), four feature routes
//! ([`features`]), the dense math every model is built on ([`numeric`]),
//! LSTM / Bi-LSTM / transformer-encoder / hybrid classifiers with
//! hand-derived gradients ([`models`]), metrics and reports ([`eval`]) and a
//! command-line runner ([`cli`]).

pub mod cli;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod features;
pub mod models;
pub mod numeric;
pub mod textproc;

pub use error::{Error, Result};
