use std::collections::HashMap;
use std::fmt::Write as _;

use super::Embedder;
use crate::error::{Error, Result};
use crate::numeric::{Prng, Tensor};

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    bytes.iter().fold(OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(PRIME))
}

/// Character n-grams of `<word>` for n in `[n_low, n_high]` (by n, then by
/// position), followed by `<word>` itself unless it was already emitted as
/// the longest n-gram.
pub fn subword_ngrams(word: &str, n_low: usize, n_high: usize) -> Result<Vec<String>> {
    if word.is_empty() {
        return Err(Error::InvalidArgument("empty word".into()));
    }
    if n_low == 0 || n_low > n_high {
        return Err(Error::InvalidArgument(format!(
            "invalid n-gram range ({n_low}, {n_high})"
        )));
    }
    let wrapped: Vec<char> = std::iter::once('<')
        .chain(word.chars())
        .chain(std::iter::once('>'))
        .collect();
    let mut out = Vec::new();
    for n in n_low..=n_high.min(wrapped.len()) {
        for w in wrapped.windows(n) {
            out.push(w.iter().collect::<String>());
        }
    }
    if !(n_low..=n_high).contains(&wrapped.len()) {
        out.push(wrapped.iter().collect());
    }
    Ok(out)
}

/// Hashed character-n-gram embeddings plus optional full-word rows
/// (fastText style). Every word gets a vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SubwordEmbeddingTable {
    dim: usize,
    n_low: usize,
    n_high: usize,
    buckets: Tensor,
    words: HashMap<String, usize>,
    word_matrix: Tensor,
}

impl SubwordEmbeddingTable {
    pub const DEFAULT_BUCKETS: usize = 4096;
    pub const DEFAULT_NGRAM_RANGE: (usize, usize) = (3, 6);

    pub fn new(
        buckets: Tensor,
        n_low: usize,
        n_high: usize,
        words: Vec<(String, Vec<f64>)>,
    ) -> Result<Self> {
        if buckets.rank() != 2 || buckets.shape()[0] == 0 || buckets.shape()[1] == 0 {
            return Err(Error::Shape(format!(
                "bucket matrix must be non-empty rank 2, got {:?}",
                buckets.shape()
            )));
        }
        if n_low == 0 || n_low > n_high {
            return Err(Error::InvalidArgument(format!(
                "invalid n-gram range ({n_low}, {n_high})"
            )));
        }
        let dim = buckets.shape()[1];
        let mut index = HashMap::new();
        let mut data = Vec::new();
        for (w, v) in words {
            if v.len() != dim {
                return Err(Error::Shape(format!("word vector for {w:?} has wrong length")));
            }
            if let Some(&r) = index.get(&w) {
                data[r * dim..(r + 1) * dim].copy_from_slice(&v);
            } else {
                index.insert(w, data.len() / dim);
                data.extend(v);
            }
        }
        let n_words = data.len() / dim;
        Ok(SubwordEmbeddingTable {
            dim,
            n_low,
            n_high,
            buckets,
            words: index,
            word_matrix: Tensor::new(vec![n_words, dim], data)?,
        })
    }

    /// Uniform `[-1, 1)` buckets and full-word rows for `known_words`.
    pub fn random<'a, I>(
        dim: usize,
        ngram_range: (usize, usize),
        bucket_count: usize,
        known_words: I,
        prng: &mut Prng,
    ) -> Result<Self>
    where
        I: IntoIterator<Item = &'a str>,
    {
        if dim == 0 || bucket_count == 0 {
            return Err(Error::InvalidArgument("dim and bucket_count must be positive".into()));
        }
        let buckets = Tensor::new(
            vec![bucket_count, dim],
            (0..bucket_count * dim).map(|_| prng.uniform(-1.0, 1.0)).collect(),
        )?;
        let mut seen = std::collections::HashSet::new();
        let words = known_words
            .into_iter()
            .filter(|w| seen.insert(*w))
            .map(|w| (w.to_owned(), (0..dim).map(|_| prng.uniform(-1.0, 1.0)).collect()))
            .collect();
        SubwordEmbeddingTable::new(buckets, ngram_range.0, ngram_range.1, words)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bucket_count(&self) -> usize {
        self.buckets.shape()[0]
    }

    pub fn ngram_range(&self) -> (usize, usize) {
        (self.n_low, self.n_high)
    }

    pub fn buckets(&self) -> &Tensor {
        &self.buckets
    }

    pub fn bucket_of(&self, ngram: &str) -> usize {
        (fnv1a64(ngram.as_bytes()) % self.bucket_count() as u64) as usize
    }

    pub fn word_row(&self, word: &str) -> Option<&[f64]> {
        self.words.get(word).map(|&r| self.word_matrix.row(r))
    }

    /// Header `dim n_low n_high bucket_count`, then one line per bucket row,
    /// then `word v1 … v_dim` for each known word (sorted).
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "{} {} {} {}\n",
            self.dim,
            self.n_low,
            self.n_high,
            self.bucket_count()
        );
        let write_row = |s: &mut String, row: &[f64]| {
            let parts: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            s.push_str(&parts.join(" "));
            s.push('\n');
        };
        for b in 0..self.bucket_count() {
            write_row(&mut s, self.buckets.row(b));
        }
        let mut words: Vec<&String> = self.words.keys().collect();
        words.sort();
        for w in words {
            write!(s, "{w} ").unwrap();
            write_row(&mut s, self.word_row(w).unwrap());
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let bad = |line: usize, msg: String| Error::record("subword table", line, msg);
        let (_, header) = lines.next().ok_or_else(|| bad(1, "missing header".into()))?;
        let h: Vec<usize> = header
            .split_whitespace()
            .map(|f| f.parse().map_err(|_| bad(1, format!("bad header field {f:?}"))))
            .collect::<Result<_>>()?;
        let [dim, n_low, n_high, bucket_count] = h[..] else {
            return Err(bad(1, "header must be `dim n_low n_high bucket_count`".into()));
        };
        let parse_row = |line: usize, fields: &[&str]| -> Result<Vec<f64>> {
            if fields.len() != dim {
                return Err(bad(line, format!("expected {dim} values, found {}", fields.len())));
            }
            fields
                .iter()
                .map(|f| f.parse::<f64>().map_err(|_| bad(line, format!("bad value {f:?}"))))
                .collect()
        };
        let mut data = Vec::with_capacity(bucket_count * dim);
        for _ in 0..bucket_count {
            let (i, line) = lines.next().ok_or_else(|| bad(0, "truncated bucket rows".into()))?;
            let fields: Vec<&str> = line.split_whitespace().collect();
            data.extend(parse_row(i + 1, &fields)?);
        }
        let mut words = Vec::new();
        for (i, line) in lines {
            let fields: Vec<&str> = line.split_whitespace().collect();
            let Some((w, rest)) = fields.split_first() else { continue };
            words.push((w.to_string(), parse_row(i + 1, rest)?));
        }
        SubwordEmbeddingTable::new(Tensor::new(vec![bucket_count, dim], data)?, n_low, n_high, words)
    }
}

/// Mean of the full-word row (when known) and the bucket row of every
/// subword n-gram.
pub fn embed_word_subword(table: &SubwordEmbeddingTable, word: &str) -> Vec<f64> {
    let mut acc = vec![0.0; table.dim];
    let mut count = 0usize;
    if let Some(row) = table.word_row(word) {
        acc.iter_mut().zip(row).for_each(|(a, v)| *a += v);
        count += 1;
    }
    if let Ok(grams) = subword_ngrams(word, table.n_low, table.n_high) {
        for g in grams {
            let row = table.buckets.row(table.bucket_of(&g));
            acc.iter_mut().zip(row).for_each(|(a, v)| *a += v);
            count += 1;
        }
    }
    if count > 0 {
        let inv = 1.0 / count as f64;
        acc.iter_mut().for_each(|a| *a *= inv);
    }
    acc
}

impl Embedder for SubwordEmbeddingTable {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, word: &str) -> Option<Vec<f64>> {
        Some(embed_word_subword(self, word))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_reference_vectors() {
        assert_eq!(fnv1a64(b""), 0xcbf2_9ce4_8422_2325);
        assert_eq!(fnv1a64(b"a"), 0xaf63_dc4c_8601_ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x8594_4171_f739_67e8);
    }

    #[test]
    fn ngram_examples() {
        assert_eq!(subword_ngrams("ab", 3, 3).unwrap(), vec!["<ab", "ab>", "<ab>"]);
        assert_eq!(subword_ngrams("a", 3, 6).unwrap(), vec!["<a>"]);
        assert_eq!(subword_ngrams("abc", 5, 5).unwrap(), vec!["<abc>"]);
        assert!(subword_ngrams("", 3, 6).is_err());
        assert!(subword_ngrams("ab", 4, 3).is_err());
    }

    #[test]
    fn ngrams_match_window_enumeration() {
        // Brute force: every (start, n) window of the wrapped char array.
        for word in ["غبي", "متخلف", "x", "hello"] {
            let chars: Vec<char> = format!("<{word}>").chars().collect();
            let mut expected = Vec::new();
            for n in 3..=6 {
                for start in 0..chars.len() {
                    if start + n <= chars.len() {
                        expected.push(chars[start..start + n].iter().collect::<String>());
                    }
                }
            }
            let full: String = chars.iter().collect();
            if !expected.contains(&full) {
                expected.push(full);
            }
            assert_eq!(subword_ngrams(word, 3, 6).unwrap(), expected);
        }
    }

    #[test]
    fn zero_buckets_give_zero_vector() {
        let t = SubwordEmbeddingTable::new(Tensor::zeros(&[16, 4]), 3, 6, vec![]).unwrap();
        assert_eq!(embed_word_subword(&t, "كلمة"), vec![0.0; 4]);
    }

    #[test]
    fn single_gram_word_is_its_bucket_row() {
        let t = SubwordEmbeddingTable::random(5, (3, 6), 32, [], &mut Prng::new(1)).unwrap();
        let b = t.bucket_of("<a>");
        assert_eq!(embed_word_subword(&t, "a"), t.buckets().row(b).to_vec());
    }

    #[test]
    fn mean_matches_brute_force() {
        let mut rng = Prng::new(21);
        let t = SubwordEmbeddingTable::random(6, (3, 6), 64, ["غبي"], &mut rng).unwrap();
        for word in ["غبي", "متخلفين", "sunday"] {
            let grams = subword_ngrams(word, 3, 6).unwrap();
            let mut rows: Vec<&[f64]> = grams
                .iter()
                .map(|g| t.buckets().row((fnv1a64(g.as_bytes()) % 64) as usize))
                .collect();
            if let Some(r) = t.word_row(word) {
                rows.push(r);
            }
            let got = embed_word_subword(&t, word);
            for d in 0..6 {
                let mean: f64 = rows.iter().map(|r| r[d]).sum::<f64>() / rows.len() as f64;
                assert!((got[d] - mean).abs() < 1e-12);
            }
        }
        assert_eq!(embed_word_subword(&t, "sunday"), embed_word_subword(&t, "sunday"));
    }

    #[test]
    fn text_round_trip() {
        let t = SubwordEmbeddingTable::random(3, (2, 4), 8, ["ab", "غبي"], &mut Prng::new(3)).unwrap();
        let back = SubwordEmbeddingTable::from_text(&t.to_text()).unwrap();
        assert_eq!(back, t);
        assert!(SubwordEmbeddingTable::from_text("3 2 4\n").is_err());
    }
}
