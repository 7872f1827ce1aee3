use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{SubwordEmbeddingTable, TfidfOptions, STATIC_MAX_LEN, SUBWORD_MAX_LEN};
use crate::models::TrainConfig;
use crate::textproc::NormalizationConfig;

/// Environment variable consulted for the seed when neither a flag nor the
/// config provides one.
pub const SEED_ENV: &str = "TEXTGUARD_SEED";
pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureRoute {
    Tfidf,
    StaticWord,
    #[default]
    Subword,
    Encoder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Logistic,
    Lstm,
    #[default]
    Bilstm,
    EncoderOnly,
    HybridLstm,
    HybridBilstm,
}

macro_rules! snake_case_names {
    ($ty:ty { $($variant:ident => $name:literal),+ $(,)? }) => {
        impl $ty {
            pub const ALL: &'static [$ty] = &[$(<$ty>::$variant),+];

            pub fn name(self) -> &'static str {
                match self {
                    $(<$ty>::$variant => $name),+
                }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok(<$ty>::$variant),)+
                    _ => Err(Error::Config(format!(
                        "unknown {} {s:?} (expected one of: {})",
                        stringify!($ty),
                        [$($name),+].join(", ")
                    ))),
                }
            }
        }
    };
}

snake_case_names!(FeatureRoute {
    Tfidf => "tfidf",
    StaticWord => "static_word",
    Subword => "subword",
    Encoder => "encoder",
});

snake_case_names!(ModelKind {
    Logistic => "logistic",
    Lstm => "lstm",
    Bilstm => "bilstm",
    EncoderOnly => "encoder_only",
    HybridLstm => "hybrid_lstm",
    HybridBilstm => "hybrid_bilstm",
});

impl ModelKind {
    pub fn compatible_with(self, route: FeatureRoute) -> bool {
        matches!(
            (route, self),
            (FeatureRoute::Tfidf, ModelKind::Logistic)
                | (FeatureRoute::StaticWord | FeatureRoute::Subword, ModelKind::Lstm | ModelKind::Bilstm)
                | (
                    FeatureRoute::Encoder,
                    ModelKind::EncoderOnly | ModelKind::HybridLstm | ModelKind::HybridBilstm
                )
        )
    }
}

/// Encoder sizes; vocabulary size and positions follow from the data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderSettings {
    pub n_layers: usize,
    pub n_heads: usize,
    pub hidden_dim: usize,
    pub ff_dim: usize,
    /// Feed the CLS state to a hybrid model's recurrent layer.
    pub include_cls: bool,
}

impl Default for EncoderSettings {
    fn default() -> Self {
        EncoderSettings {
            n_layers: 2,
            n_heads: 2,
            hidden_dim: 32,
            ff_dim: 64,
            include_cls: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub corpus: Option<PathBuf>,
    /// Pretrained vectors: word-vector text for `static_word`, a serialized
    /// subword table for `subword`. Random tables are drawn when absent.
    pub embeddings: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub feature_route: FeatureRoute,
    pub model_kind: ModelKind,
    pub normalization: NormalizationConfig,
    /// Word n-gram range of the TF-IDF vocabulary.
    pub ngram_range: (usize, usize),
    pub max_features: usize,
    pub tfidf: TfidfOptions,
    /// Sequence cap; defaults to 100 for static_word and 90 otherwise.
    pub max_len: Option<usize>,
    pub embed_dim: usize,
    pub subword_ngrams: (usize, usize),
    pub bucket_count: usize,
    pub hidden_dim: usize,
    pub dense_dim: usize,
    pub encoder: EncoderSettings,
    pub train_fraction: f64,
    pub threshold: f64,
    pub train: TrainConfig,
    pub seed: Option<u64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            corpus: None,
            embeddings: None,
            output_dir: None,
            feature_route: FeatureRoute::default(),
            model_kind: ModelKind::default(),
            normalization: NormalizationConfig::default(),
            ngram_range: (1, 2),
            max_features: 5000,
            tfidf: TfidfOptions::default(),
            max_len: None,
            embed_dim: 300,
            subword_ngrams: SubwordEmbeddingTable::DEFAULT_NGRAM_RANGE,
            bucket_count: SubwordEmbeddingTable::DEFAULT_BUCKETS,
            hidden_dim: 16,
            dense_dim: 16,
            encoder: EncoderSettings::default(),
            train_fraction: 0.8,
            threshold: 0.5,
            train: TrainConfig::default(),
            seed: None,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn max_len(&self) -> usize {
        self.max_len.unwrap_or(match self.feature_route {
            FeatureRoute::StaticWord => STATIC_MAX_LEN,
            _ => SUBWORD_MAX_LEN,
        })
    }

    /// Seed in effect: the config value, else the environment, else 42.
    pub fn effective_seed(&self) -> Result<u64> {
        if let Some(s) = self.seed {
            return Ok(s);
        }
        match std::env::var(SEED_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
            Err(_) => Ok(DEFAULT_SEED),
        }
    }

    /// Fills route-dependent defaults and the seed, then validates. The
    /// result reloads to itself.
    pub fn resolved(&self) -> Result<Self> {
        let mut c = self.clone();
        c.max_len = Some(self.max_len());
        let seed = self.effective_seed()?;
        c.seed = Some(seed);
        c.train.seed = seed;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !self.model_kind.compatible_with(self.feature_route) {
            return bad(format!(
                "model_kind {} is incompatible with feature_route {}: tfidf requires logistic, \
                 static_word and subword require lstm or bilstm, encoder requires encoder_only, \
                 hybrid_lstm or hybrid_bilstm",
                self.model_kind, self.feature_route
            ));
        }
        if self.max_len() == 0 {
            return bad("max_len must be at least 1".into());
        }
        if self.ngram_range.0 == 0 || self.ngram_range.0 > self.ngram_range.1 {
            return bad(format!("invalid ngram_range {:?}", self.ngram_range));
        }
        if self.subword_ngrams.0 == 0 || self.subword_ngrams.0 > self.subword_ngrams.1 {
            return bad(format!("invalid subword_ngrams {:?}", self.subword_ngrams));
        }
        for (name, v) in [
            ("max_features", self.max_features),
            ("embed_dim", self.embed_dim),
            ("bucket_count", self.bucket_count),
            ("hidden_dim", self.hidden_dim),
            ("dense_dim", self.dense_dim),
        ] {
            if v == 0 {
                return bad(format!("{name} must be at least 1"));
            }
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad(format!("train_fraction {} not in (0, 1)", self.train_fraction));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return bad(format!("threshold {} not in (0, 1)", self.threshold));
        }
        self.train.validate()
    }

    /// Checks that every referenced input file exists.
    pub fn check_paths(&self) -> Result<()> {
        let corpus = self
            .corpus
            .as_ref()
            .ok_or_else(|| Error::Config("no corpus path given".into()))?;
        for p in std::iter::once(corpus).chain(self.embeddings.as_ref()) {
            if !p.exists() {
                return Err(Error::Config(format!("{} does not exist", p.display())));
            }
        }
        Ok(())
    }
}

/// Reads a JSON config; absent keys take their defaults, unknown keys are
/// rejected.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    RunConfig::from_json(&text).map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = RunConfig::from_json(r#"{"corpus": "c.csv", "model_kind": "bilstm", "feature_route": "subword"}"#)
            .unwrap();
        assert_eq!(c.max_len(), 90);
        assert_eq!(c.subword_ngrams, (3, 6));
        let s = RunConfig::from_json(r#"{"feature_route": "static_word", "model_kind": "lstm"}"#).unwrap();
        assert_eq!(s.max_len(), 100);
    }

    #[test]
    fn unknown_key_is_named() {
        let e = RunConfig::from_json(r#"{"dropoutt": 0.1}"#).unwrap_err().to_string();
        assert!(e.contains("dropoutt"), "{e}");
        assert!(RunConfig::from_json(r#"{"hidden_dim": "big"}"#).is_err());
        assert!(RunConfig::from_json(r#"{"train": {"epochz": 3}}"#).is_err());
    }

    #[test]
    fn resolved_config_round_trips() {
        let c = RunConfig {
            seed: Some(5),
            ..RunConfig::default()
        }
        .resolved()
        .unwrap();
        let back = RunConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.resolved().unwrap(), c);
    }

    #[test]
    fn compatibility_matrix() {
        let ok: Vec<(FeatureRoute, ModelKind)> = FeatureRoute::ALL
            .iter()
            .flat_map(|&r| ModelKind::ALL.iter().map(move |&m| (r, m)))
            .filter(|(r, m)| m.compatible_with(*r))
            .collect();
        assert_eq!(ok.len(), 1 + 2 + 2 + 3);
        let c = RunConfig {
            feature_route: FeatureRoute::Tfidf,
            model_kind: ModelKind::Bilstm,
            ..RunConfig::default()
        };
        let e = c.validate().unwrap_err().to_string();
        assert!(e.contains("tfidf requires logistic"), "{e}");
    }

    #[test]
    fn names_parse_back() {
        for &r in FeatureRoute::ALL {
            assert_eq!(r.name().parse::<FeatureRoute>().unwrap(), r);
        }
        for &m in ModelKind::ALL {
            assert_eq!(m.name().parse::<ModelKind>().unwrap(), m);
        }
        assert!("bert".parse::<ModelKind>().is_err());
    }
}
