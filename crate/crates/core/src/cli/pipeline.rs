//! Featurize → train → score for one configuration, plus the run-directory
//! layout.

use std::fmt::Write as _;
use std::path::Path;

use super::config::{FeatureRoute, ModelKind, RunConfig};
use crate::corpus::{split, Corpus, SplitSpec};
use crate::error::{Error, Result};
use crate::eval::{classification_report, emit_curves, roc_auc, LearningCurve, MetricsReport};
use crate::features::{
    fit_tfidf_with, load_embeddings_text, Embedder, EmbeddingTable, SubwordEmbeddingTable, TfidfModel,
};
use crate::models::{
    train, write_checkpoint, Checkpoint, Classifier, DeepModel, EncoderClassifier, EncoderConfig, HybridModel,
    LogisticModel, RecurrentKind, TokenInput, TrainReport, CLS_ID, ID_OFFSET,
};
use crate::numeric::{Prng, Tensor};
use crate::textproc::{build_vocab, Analyzer, Vocabulary};

/// Fitted text → model-input mapping.
#[derive(Debug, Clone)]
pub enum Featurizer {
    Tfidf(TfidfModel),
    Static {
        table: EmbeddingTable,
        analyzer: Analyzer,
        max_len: usize,
    },
    Subword {
        table: SubwordEmbeddingTable,
        analyzer: Analyzer,
        max_len: usize,
    },
    Tokens {
        vocab: Vocabulary,
        max_len: usize,
    },
}

fn embed_sequence<E: Embedder>(table: &E, analyzer: &Analyzer, max_len: usize, text: &str) -> Tensor {
    let dim = table.dim();
    let rows: Vec<f64> = analyzer
        .tokens(text)
        .iter()
        .filter_map(|w| table.embed(w))
        .take(max_len)
        .flatten()
        .collect();
    let len = rows.len() / dim;
    Tensor::new(vec![len, dim], rows).expect("rows are whole vectors")
}

impl Featurizer {
    /// Fits vocabulary, IDF or embedding tables on the training split only.
    pub fn fit(cfg: &RunConfig, train: &Corpus, prng: &mut Prng) -> Result<Self> {
        let unigrams = || build_vocab(train, &cfg.normalization, (1, 1), cfg.max_features);
        let max_len = cfg.max_len();
        Ok(match cfg.feature_route {
            FeatureRoute::Tfidf => {
                let vocab = build_vocab(train, &cfg.normalization, cfg.ngram_range, cfg.max_features)?;
                Featurizer::Tfidf(fit_tfidf_with(train, &vocab, cfg.tfidf)?)
            }
            FeatureRoute::StaticWord => {
                let table = match &cfg.embeddings {
                    Some(path) => load_embeddings_text(path, cfg.embed_dim)?,
                    None => {
                        let vocab = unigrams()?;
                        EmbeddingTable::random(vocab.terms().iter().map(String::as_str), cfg.embed_dim, prng)?
                    }
                };
                Featurizer::Static {
                    table,
                    analyzer: Analyzer::new(cfg.normalization, (1, 1))?,
                    max_len,
                }
            }
            FeatureRoute::Subword => {
                let table = match &cfg.embeddings {
                    Some(path) => {
                        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                        SubwordEmbeddingTable::from_text(&text)?
                    }
                    None => {
                        let vocab = unigrams()?;
                        SubwordEmbeddingTable::random(
                            cfg.embed_dim,
                            cfg.subword_ngrams,
                            cfg.bucket_count,
                            vocab.terms().iter().map(String::as_str),
                            prng,
                        )?
                    }
                };
                Featurizer::Subword {
                    table,
                    analyzer: Analyzer::new(cfg.normalization, (1, 1))?,
                    max_len,
                }
            }
            FeatureRoute::Encoder => Featurizer::Tokens {
                vocab: unigrams()?,
                max_len,
            },
        })
    }

    /// Input width of the features (vector dim, embedding dim or token-id
    /// space).
    pub fn width(&self) -> usize {
        match self {
            Featurizer::Tfidf(m) => m.dim(),
            Featurizer::Static { table, .. } => table.dim(),
            Featurizer::Subword { table, .. } => table.dim(),
            Featurizer::Tokens { vocab, .. } => vocab.len() + ID_OFFSET,
        }
    }

    fn sequence(&self, text: &str) -> Result<Tensor> {
        match self {
            Featurizer::Static { table, analyzer, max_len } => Ok(embed_sequence(table, analyzer, *max_len, text)),
            Featurizer::Subword { table, analyzer, max_len } => Ok(embed_sequence(table, analyzer, *max_len, text)),
            _ => Err(Error::Config("features are not embedding sequences".into())),
        }
    }
}

/// A model of any supported kind.
#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel {
    Logistic(LogisticModel),
    Deep(DeepModel),
    Encoder(EncoderClassifier),
    Hybrid(HybridModel),
}

fn encoder_config(cfg: &RunConfig, vocab_size: usize) -> EncoderConfig {
    EncoderConfig {
        n_layers: cfg.encoder.n_layers,
        n_heads: cfg.encoder.n_heads,
        hidden_dim: cfg.encoder.hidden_dim,
        ff_dim: cfg.encoder.ff_dim,
        max_positions: cfg.max_len() + 1,
        vocab_size,
        cls_index: CLS_ID,
    }
}

impl TrainedModel {
    pub fn init(cfg: &RunConfig, features: &Featurizer, prng: &mut Prng) -> Result<Self> {
        let width = features.width();
        Ok(match cfg.model_kind {
            ModelKind::Logistic => TrainedModel::Logistic(LogisticModel::zeros(width)),
            ModelKind::Lstm | ModelKind::Bilstm => {
                let kind = if cfg.model_kind == ModelKind::Lstm {
                    RecurrentKind::Lstm
                } else {
                    RecurrentKind::Bilstm
                };
                TrainedModel::Deep(DeepModel::init(kind, width, cfg.hidden_dim, cfg.dense_dim, prng)?)
            }
            ModelKind::EncoderOnly => {
                TrainedModel::Encoder(EncoderClassifier::init(encoder_config(cfg, width), cfg.dense_dim, prng)?)
            }
            ModelKind::HybridLstm | ModelKind::HybridBilstm => {
                let kind = if cfg.model_kind == ModelKind::HybridLstm {
                    RecurrentKind::Lstm
                } else {
                    RecurrentKind::Bilstm
                };
                let mut m = HybridModel::init(encoder_config(cfg, width), kind, cfg.hidden_dim, cfg.dense_dim, prng)?;
                m.include_cls = cfg.encoder.include_cls;
                TrainedModel::Hybrid(m)
            }
        })
    }

    pub fn checkpoint(&self, cfg: &RunConfig) -> Checkpoint {
        let config = serde_json::to_value(cfg).expect("config serializes");
        match self {
            TrainedModel::Logistic(m) => Checkpoint::from_model(config, m),
            TrainedModel::Deep(m) => Checkpoint::from_model(config, m),
            TrainedModel::Encoder(m) => Checkpoint::from_model(config, m),
            TrainedModel::Hybrid(m) => Checkpoint::from_model(config, m),
        }
    }

    pub fn load(&mut self, ck: &Checkpoint) -> Result<()> {
        match self {
            TrainedModel::Logistic(m) => ck.load_into(m),
            TrainedModel::Deep(m) => ck.load_into(m),
            TrainedModel::Encoder(m) => ck.load_into(m),
            TrainedModel::Hybrid(m) => ck.load_into(m),
        }
    }

    /// Positive-class probability per text.
    pub fn probabilities<'a, I>(&self, features: &Featurizer, texts: I) -> Result<Vec<f64>>
    where
        I: IntoIterator<Item = &'a str>,
    {
        texts
            .into_iter()
            .map(|t| match (self, features) {
                (TrainedModel::Logistic(m), Featurizer::Tfidf(f)) => m.probability(&f.transform_text(t)),
                (TrainedModel::Deep(m), f) => m.probability(&f.sequence(t)?),
                (TrainedModel::Encoder(m), Featurizer::Tokens { vocab, max_len }) => {
                    m.probability(&TokenInput::encode(t, vocab, *max_len))
                }
                (TrainedModel::Hybrid(m), Featurizer::Tokens { vocab, max_len }) => {
                    m.probability(&TokenInput::encode(t, vocab, *max_len))
                }
                _ => Err(Error::Config("model and features do not match".into())),
            })
            .collect()
    }

    /// Trains from the current parameters.
    fn fit(&self, features: &Featurizer, data: &Corpus, cfg: &RunConfig) -> Result<(Self, TrainReport)> {
        let texts: Vec<&str> = data.texts().collect();
        let labels = data.labels();
        fn go<M: Classifier>(
            m: &M,
            inputs: Vec<M::Input>,
            labels: &[u8],
            cfg: &RunConfig,
        ) -> Result<(M, TrainReport)> {
            let pairs: Vec<(M::Input, u8)> = inputs.into_iter().zip(labels.iter().copied()).collect();
            train(m, &pairs, &cfg.train)
        }
        Ok(match (self, features) {
            (TrainedModel::Logistic(m), Featurizer::Tfidf(f)) => {
                let xs = texts.iter().map(|t| f.transform_text(t)).collect();
                let (m, r) = go(m, xs, &labels, cfg)?;
                (TrainedModel::Logistic(m), r)
            }
            (TrainedModel::Deep(m), f) => {
                let xs = texts.iter().map(|t| f.sequence(t)).collect::<Result<_>>()?;
                let (m, r) = go(m, xs, &labels, cfg)?;
                (TrainedModel::Deep(m), r)
            }
            (TrainedModel::Encoder(m), Featurizer::Tokens { vocab, max_len }) => {
                let xs = texts.iter().map(|t| TokenInput::encode(t, vocab, *max_len)).collect();
                let (m, r) = go(m, xs, &labels, cfg)?;
                (TrainedModel::Encoder(m), r)
            }
            (TrainedModel::Hybrid(m), Featurizer::Tokens { vocab, max_len }) => {
                let xs = texts.iter().map(|t| TokenInput::encode(t, vocab, *max_len)).collect();
                let (m, r) = go(m, xs, &labels, cfg)?;
                (TrainedModel::Hybrid(m), r)
            }
            _ => return Err(Error::Config("model and features do not match".into())),
        })
    }
}

/// Everything produced by one run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub config: RunConfig,
    pub report: MetricsReport,
    /// `None` when the test split holds a single class.
    pub auc: Option<f64>,
    pub curve: LearningCurve,
    pub train_report: TrainReport,
    pub model: TrainedModel,
    pub test_probabilities: Vec<f64>,
}

/// Deterministic pieces shared by training and re-evaluation: the split,
/// the fitted features and the freshly initialized model.
pub struct Prepared {
    pub train: Corpus,
    pub test: Corpus,
    pub features: Featurizer,
    pub model: TrainedModel,
}

/// `cfg` must be resolved.
pub fn prepare(cfg: &RunConfig, corpus: &Corpus) -> Result<Prepared> {
    let seed = cfg.seed.ok_or_else(|| Error::Config("configuration is not resolved".into()))?;
    cfg.validate()?;
    let (train, test) = split(corpus, &SplitSpec::new(cfg.train_fraction, seed, true)?)?;
    let mut root = Prng::new(seed);
    let mut feature_rng = root.fork();
    let mut model_rng = root.fork();
    let features = Featurizer::fit(cfg, &train, &mut feature_rng)?;
    let model = TrainedModel::init(cfg, &features, &mut model_rng)?;
    Ok(Prepared {
        train,
        test,
        features,
        model,
    })
}

/// Test-split report for `model`.
pub fn score(
    cfg: &RunConfig,
    model: &TrainedModel,
    features: &Featurizer,
    test: &Corpus,
) -> Result<(MetricsReport, Option<f64>, Vec<f64>)> {
    let probs = model.probabilities(features, test.texts())?;
    let truth = test.labels();
    let preds: Vec<u8> = probs.iter().map(|&p| u8::from(p >= cfg.threshold)).collect();
    let report = classification_report(&preds, &truth)?;
    let auc = if truth.contains(&0) && truth.contains(&1) {
        Some(roc_auc(&probs, &truth)?.auc)
    } else {
        None
    };
    Ok((report, auc, probs))
}

/// Splits, featurizes, trains and scores. `cfg` is resolved first.
pub fn run_experiment(cfg: &RunConfig, corpus: &Corpus) -> Result<RunOutcome> {
    let cfg = cfg.resolved()?;
    let prepared = prepare(&cfg, corpus)?;
    let (model, train_report) = prepared.model.fit(&prepared.features, &prepared.train, &cfg)?;
    let (report, auc, test_probabilities) = score(&cfg, &model, &prepared.features, &prepared.test)?;
    Ok(RunOutcome {
        curve: LearningCurve {
            records: train_report.records.clone(),
        },
        config: cfg,
        report,
        auc,
        train_report,
        model,
        test_probabilities,
    })
}

pub fn metrics_text(report: &MetricsReport, auc: Option<f64>) -> String {
    let mut s = report.render_text();
    if let Some(a) = auc {
        writeln!(s, "roc auc: {a:.4}").unwrap();
    }
    s
}

pub fn metrics_kv(report: &MetricsReport, auc: Option<f64>) -> String {
    let mut s = report.to_kv();
    if let Some(a) = auc {
        writeln!(s, "auc={a:?}").unwrap();
    }
    s
}

pub const CONFIG_FILE: &str = "config.json";
pub const METRICS_TEXT_FILE: &str = "metrics.txt";
pub const METRICS_KV_FILE: &str = "metrics.kv";
pub const CURVES_FILE: &str = "curves.csv";
pub const CHECKPOINT_FILE: &str = "model.ckpt";

/// Writes the fixed run-directory layout.
pub fn write_run_dir(dir: &Path, outcome: &RunOutcome) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let put = |name: &str, text: String| {
        let p = dir.join(name);
        std::fs::write(&p, text).map_err(|e| Error::io(&p, e))
    };
    put(CONFIG_FILE, outcome.config.to_json() + "\n")?;
    put(METRICS_TEXT_FILE, metrics_text(&outcome.report, outcome.auc))?;
    put(METRICS_KV_FILE, metrics_kv(&outcome.report, outcome.auc))?;
    emit_curves(&outcome.curve, &dir.join(CURVES_FILE))?;
    write_checkpoint(&dir.join(CHECKPOINT_FILE), &outcome.model.checkpoint(&outcome.config))
}

/// Rebuilds features and loads the checkpoint stored in a run directory.
pub fn load_run(dir: &Path, corpus: &Corpus) -> Result<(RunConfig, Prepared)> {
    let cfg = super::config::load_config(&dir.join(CONFIG_FILE))?.resolved()?;
    let ck = crate::models::read_checkpoint(&dir.join(CHECKPOINT_FILE))?;
    let stored: RunConfig =
        serde_json::from_value(ck.config.clone()).map_err(|e| Error::Checkpoint(format!("config block: {e}")))?;
    if stored.feature_route != cfg.feature_route || stored.model_kind != cfg.model_kind {
        return Err(Error::Checkpoint(format!(
            "checkpoint holds a {}/{} model but config.json names {}/{}",
            stored.feature_route, stored.model_kind, cfg.feature_route, cfg.model_kind
        )));
    }
    let mut prepared = prepare(&cfg, corpus)?;
    prepared.model.load(&ck)?;
    Ok((cfg, prepared))
}
