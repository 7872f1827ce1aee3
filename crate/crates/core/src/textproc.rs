//! Text normalization, tokenization, n-grams and capped vocabularies.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};

const TATWEEL: char = '\u{0640}';
const ALEF: char = '\u{0627}';
const HEH: char = '\u{0647}';
const YEH: char = '\u{064A}';

fn is_diacritic(c: char) -> bool {
    matches!(c, '\u{064B}'..='\u{0652}' | '\u{0670}')
}

/// Independent switches for each cleaning step. All on by default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NormalizationConfig {
    pub strip_diacritics: bool,
    pub strip_tatweel: bool,
    /// أ إ آ → ا and ى → ي
    pub normalize_alef: bool,
    /// ة → ه
    pub normalize_ta_marbuta: bool,
    pub strip_urls_mentions_hashtags: bool,
    pub strip_non_letter: bool,
    pub lowercase_latin: bool,
}

impl Default for NormalizationConfig {
    fn default() -> Self {
        NormalizationConfig {
            strip_diacritics: true,
            strip_tatweel: true,
            normalize_alef: true,
            normalize_ta_marbuta: true,
            strip_urls_mentions_hashtags: true,
            strip_non_letter: true,
            lowercase_latin: true,
        }
    }
}

impl NormalizationConfig {
    pub fn none() -> Self {
        NormalizationConfig {
            strip_diacritics: false,
            strip_tatweel: false,
            normalize_alef: false,
            normalize_ta_marbuta: false,
            strip_urls_mentions_hashtags: false,
            strip_non_letter: false,
            lowercase_latin: false,
        }
    }
}

/// URL, @mention or #hashtag token. The test ignores tatweel, diacritics and
/// ASCII case so that it gives the same answer before and after the later
/// character-level steps.
fn is_link_like(token: &str) -> bool {
    let probe: String = token
        .chars()
        .filter(|&c| c != TATWEEL && !is_diacritic(c))
        .map(|c| c.to_ascii_lowercase())
        .collect();
    probe.starts_with('@')
        || probe.starts_with('#')
        || probe.starts_with("www.")
        || probe.contains("://")
}

fn is_latin(c: char) -> bool {
    (c as u32) < 0x0250
}

/// Applies the enabled transforms in a fixed order: link/mention/hashtag
/// removal, tatweel, diacritics, letter folding, non-letter stripping, then
/// whitespace collapse. The result is a fixed point: normalizing it again
/// changes nothing.
pub fn normalize(text: &str, config: &NormalizationConfig) -> String {
    let mut out = String::with_capacity(text.len());
    for token in text.split_whitespace() {
        if config.strip_urls_mentions_hashtags && is_link_like(token) {
            continue;
        }
        out.push(' ');
        for c in token.chars() {
            if config.strip_tatweel && c == TATWEEL {
                continue;
            }
            if config.strip_diacritics && is_diacritic(c) {
                continue;
            }
            let c = match c {
                '\u{0623}' | '\u{0625}' | '\u{0622}' if config.normalize_alef => ALEF,
                '\u{0649}' if config.normalize_alef => YEH,
                '\u{0629}' if config.normalize_ta_marbuta => HEH,
                other => other,
            };
            if config.lowercase_latin && c.is_uppercase() && is_latin(c) {
                for lc in c.to_lowercase() {
                    push_checked(&mut out, lc, config);
                }
            } else {
                push_checked(&mut out, c, config);
            }
        }
    }
    out.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn push_checked(out: &mut String, c: char, config: &NormalizationConfig) {
    if config.strip_non_letter && !c.is_alphabetic() {
        out.push(' ');
    } else {
        out.push(c);
    }
}

/// Ordered tokens with no empty entries and no inner whitespace.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenSequence {
    pub tokens: Vec<String>,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(String::as_str)
    }

    /// Concatenates `self` with itself.
    pub fn repeated(&self, times: usize) -> TokenSequence {
        TokenSequence {
            tokens: self.tokens.iter().cloned().cycle().take(self.len() * times).collect(),
        }
    }
}

impl<S: Into<String>> FromIterator<S> for TokenSequence {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        TokenSequence {
            tokens: iter.into_iter().map(Into::into).filter(|t: &String| !t.is_empty()).collect(),
        }
    }
}

pub fn tokenize(text: &str) -> TokenSequence {
    TokenSequence {
        tokens: text.split_whitespace().map(str::to_owned).collect(),
    }
}

/// All contiguous n-grams for n in `[n_low, n_high]`, grouped by n and in
/// document order within each group.
pub fn ngrams(tokens: &TokenSequence, n_low: usize, n_high: usize) -> Result<Vec<String>> {
    if n_low == 0 || n_low > n_high {
        return Err(Error::InvalidArgument(format!(
            "invalid n-gram range ({n_low}, {n_high})"
        )));
    }
    let mut out = Vec::new();
    for n in n_low..=n_high {
        if n > tokens.len() {
            break;
        }
        for window in tokens.tokens.windows(n) {
            out.push(window.join(" "));
        }
    }
    Ok(out)
}

/// Turns raw text into terms: normalize, tokenize, n-grams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Analyzer {
    pub normalization: NormalizationConfig,
    pub ngram_range: (usize, usize),
}

impl Default for Analyzer {
    fn default() -> Self {
        Analyzer {
            normalization: NormalizationConfig::default(),
            ngram_range: (1, 2),
        }
    }
}

impl Analyzer {
    pub fn new(normalization: NormalizationConfig, ngram_range: (usize, usize)) -> Result<Self> {
        let a = Analyzer {
            normalization,
            ngram_range,
        };
        a.check()?;
        Ok(a)
    }

    fn check(&self) -> Result<()> {
        ngrams(&TokenSequence::default(), self.ngram_range.0, self.ngram_range.1).map(|_| ())
    }

    pub fn tokens(&self, text: &str) -> TokenSequence {
        tokenize(&normalize(text, &self.normalization))
    }

    pub fn terms_of(&self, tokens: &TokenSequence) -> Vec<String> {
        ngrams(tokens, self.ngram_range.0, self.ngram_range.1).expect("range validated at construction")
    }

    pub fn terms(&self, text: &str) -> Vec<String> {
        self.terms_of(&self.tokens(text))
    }
}

/// Bijective term ↔ index map with contiguous indices in lexicographic term
/// order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    terms: Vec<String>,
    index: HashMap<String, usize>,
    max_features: usize,
    analyzer: Analyzer,
}

impl Vocabulary {
    /// Builds a vocabulary from distinct terms; indices follow sorted order.
    pub fn from_terms<I, S>(terms: I, max_features: usize, analyzer: Analyzer) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut terms: Vec<String> = terms.into_iter().map(Into::into).collect();
        terms.sort();
        terms.dedup();
        if terms.is_empty() {
            return Err(Error::InvalidArgument("empty vocabulary".into()));
        }
        if terms.len() > max_features {
            return Err(Error::InvalidArgument(format!(
                "{} terms exceed max_features {max_features}",
                terms.len()
            )));
        }
        let index = terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Ok(Vocabulary {
            terms,
            index,
            max_features,
            analyzer,
        })
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn max_features(&self) -> usize {
        self.max_features
    }

    pub fn analyzer(&self) -> &Analyzer {
        &self.analyzer
    }

    pub fn get(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn term(&self, index: usize) -> Option<&str> {
        self.terms.get(index).map(String::as_str)
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    /// One `index<TAB>term` line per entry.
    pub fn to_tsv(&self) -> String {
        self.terms
            .iter()
            .enumerate()
            .map(|(i, t)| format!("{i}\t{t}\n"))
            .collect()
    }

    pub fn from_tsv(text: &str, analyzer: Analyzer) -> Result<Self> {
        let mut terms = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let (idx, term) = line
                .split_once('\t')
                .ok_or_else(|| Error::record("vocabulary", lineno + 1, "expected index<TAB>term"))?;
            let idx: usize = idx
                .parse()
                .map_err(|_| Error::record("vocabulary", lineno + 1, format!("bad index {idx:?}")))?;
            if idx != terms.len() {
                return Err(Error::record("vocabulary", lineno + 1, "indices must be contiguous from 0"));
            }
            terms.push(term.to_owned());
        }
        let n = terms.len();
        let vocab = Vocabulary::from_terms(terms.iter().cloned(), n.max(1), analyzer)?;
        if vocab.terms != terms {
            return Err(Error::record("vocabulary", 1, "terms must be distinct and sorted"));
        }
        Ok(vocab)
    }
}

/// Keeps the `max_features` most frequent terms (total occurrences across
/// the corpus). Ties go to the lexicographically smaller term.
pub fn build_vocab(
    corpus: &Corpus,
    normalization: &NormalizationConfig,
    ngram_range: (usize, usize),
    max_features: usize,
) -> Result<Vocabulary> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if max_features == 0 {
        return Err(Error::InvalidArgument("max_features must be at least 1".into()));
    }
    let analyzer = Analyzer::new(*normalization, ngram_range)?;
    let mut counts: HashMap<String, usize> = HashMap::new();
    for post in corpus.posts() {
        for term in analyzer.terms(&post.text) {
            *counts.entry(term).or_insert(0) += 1;
        }
    }
    if counts.is_empty() {
        return Err(Error::InvalidArgument("empty vocabulary after normalization".into()));
    }
    let mut ranked: Vec<(String, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(max_features);
    Vocabulary::from_terms(ranked.into_iter().map(|(t, _)| t), max_features, analyzer)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Corpus, LabeledPost};
    use crate::numeric::Prng;

    fn corpus(texts: &[&str]) -> Corpus {
        Corpus::new(
            texts.iter().map(|t| LabeledPost::new(*t, 0).unwrap()).collect(),
            "test",
        )
    }

    #[test]
    fn normalize_arabic_greeting() {
        assert_eq!(normalize("أَهْلاً", &NormalizationConfig::default()), "اهلا");
        assert_eq!(normalize("", &NormalizationConfig::default()), "");
    }

    #[test]
    fn normalize_folds_and_strips() {
        let cfg = NormalizationConfig::default();
        assert_eq!(normalize("مـــدرسة", &cfg), "مدرسه");
        assert_eq!(normalize("إلى آخر", &cfg), "الي اخر");
        assert_eq!(normalize("@user انت #وسم https://t.co/x غبي!!", &cfg), "انت غبي");
        assert_eq!(normalize("Hello,  WORLD 123", &cfg), "hello world");
    }

    #[test]
    fn flags_are_independent() {
        let mut cfg = NormalizationConfig::none();
        assert_eq!(normalize("  أَهْلاً  ", &cfg), "أَهْلاً");
        cfg.strip_diacritics = true;
        assert_eq!(normalize("أَهْلاً", &cfg), "أهلا");
        cfg.normalize_alef = true;
        assert_eq!(normalize("أَهْلاً", &cfg), "اهلا");
    }

    fn random_text(rng: &mut Prng) -> String {
        const POOL: &[char] = &[
            'ا', 'أ', 'إ', 'آ', 'ى', 'ة', 'ب', 'ت', 'غ', 'ي', '\u{064B}', '\u{064E}', '\u{0652}',
            '\u{0670}', '\u{0640}', 'a', 'B', 'W', 'w', 'h', 't', 'p', 'İ', 'É', '1', '٣', '@', '#',
            ':', '/', '.', '!', ' ', ' ', '\t', '\n', '😀', '\u{00A0}',
        ];
        let len = rng.below(30);
        (0..len).map(|_| POOL[rng.below(POOL.len())]).collect()
    }

    #[test]
    fn normalize_is_idempotent_for_fuzzed_inputs_and_configs() {
        let mut rng = Prng::new(1234);
        for _ in 0..1000 {
            let s = random_text(&mut rng);
            let bits = rng.below(128);
            let cfg = NormalizationConfig {
                strip_diacritics: bits & 1 != 0,
                strip_tatweel: bits & 2 != 0,
                normalize_alef: bits & 4 != 0,
                normalize_ta_marbuta: bits & 8 != 0,
                strip_urls_mentions_hashtags: bits & 16 != 0,
                strip_non_letter: bits & 32 != 0,
                lowercase_latin: bits & 64 != 0,
            };
            let once = normalize(&s, &cfg);
            assert_eq!(normalize(&once, &cfg), once, "input {s:?} cfg {cfg:?}");
        }
    }

    #[test]
    fn normalized_tokens_have_no_stripped_classes() {
        let mut rng = Prng::new(77);
        let cfg = NormalizationConfig::default();
        for _ in 0..500 {
            for tok in tokenize(&normalize(&random_text(&mut rng), &cfg)).iter() {
                assert!(!tok.is_empty());
                for c in tok.chars() {
                    assert!(c != TATWEEL && !is_diacritic(c));
                    assert!(!matches!(c, 'أ' | 'إ' | 'آ' | 'ى' | 'ة'));
                    assert!(c.is_alphabetic() && !c.is_whitespace());
                }
            }
        }
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(tokenize("انت غبي").tokens, vec!["انت", "غبي"]);
        assert_eq!(tokenize("  a   b ").tokens, vec!["a", "b"]);
        assert!(tokenize("").is_empty());
    }

    #[test]
    fn ngram_examples() {
        let t: TokenSequence = ["a", "b", "c"].into_iter().collect();
        assert_eq!(ngrams(&t, 2, 2).unwrap(), vec!["a b", "b c"]);
        assert_eq!(ngrams(&t, 1, 2).unwrap(), vec!["a", "b", "c", "a b", "b c"]);
        let one: TokenSequence = ["a"].into_iter().collect();
        assert!(ngrams(&one, 2, 2).unwrap().is_empty());
        assert!(ngrams(&t, 0, 2).is_err());
        assert!(ngrams(&t, 3, 2).is_err());
    }

    #[test]
    fn ngram_count_formula() {
        let mut rng = Prng::new(4);
        for _ in 0..200 {
            let len = rng.below(8);
            let t: TokenSequence = (0..len).map(|i| format!("t{i}")).collect();
            let lo = 1 + rng.below(4);
            let hi = lo + rng.below(4);
            let expected: usize = (lo..=hi).map(|n| (len + 1).saturating_sub(n)).sum();
            assert_eq!(ngrams(&t, lo, hi).unwrap().len(), expected);
        }
    }

    #[test]
    fn vocab_top_k_by_frequency() {
        let c = corpus(&["a a b c", "a b a", "b a"]);
        let v = build_vocab(&c, &NormalizationConfig::default(), (1, 1), 2).unwrap();
        assert_eq!(v.terms(), &["a", "b"]);
    }

    #[test]
    fn vocab_tie_break_is_lexicographic() {
        let c = corpus(&["b a", "a b"]);
        let v = build_vocab(&c, &NormalizationConfig::default(), (1, 1), 1).unwrap();
        assert_eq!(v.terms(), &["a"]);
    }

    #[test]
    fn vocab_cap_and_index_order() {
        let texts: Vec<String> = (0..150).map(|i| format!("w{i} w{} common", i + 1)).collect();
        let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
        let v = build_vocab(&corpus(&refs), &NormalizationConfig::none(), (1, 2), 100).unwrap();
        assert_eq!(v.len(), 100);
        let mut sorted = v.terms().to_vec();
        sorted.sort();
        assert_eq!(v.terms(), sorted.as_slice());
        for (i, t) in v.terms().iter().enumerate() {
            assert_eq!(v.get(t), Some(i));
        }
    }

    #[test]
    fn vocab_errors() {
        let c = corpus(&["!!! ???"]);
        assert!(build_vocab(&c, &NormalizationConfig::default(), (1, 1), 10).is_err());
        assert!(build_vocab(&corpus(&["a"]), &NormalizationConfig::default(), (1, 1), 0).is_err());
    }

    #[test]
    fn vocab_tsv_round_trip() {
        let c = corpus(&["انت غبي جدا", "يوم جميل"]);
        let v = build_vocab(&c, &NormalizationConfig::default(), (1, 2), 100).unwrap();
        let back = Vocabulary::from_tsv(&v.to_tsv(), *v.analyzer()).unwrap();
        assert_eq!(back.terms(), v.terms());
        assert!(Vocabulary::from_tsv("1\ta\n", Analyzer::default()).is_err());
    }
}
