//! Labeled comment datasets: CSV ingestion, keyword filtering, seeded
//! splitting, annotator agreement and a synthetic stand-in corpus.

use std::fs;
use std::io;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numeric::Prng;
use crate::textproc::{normalize, NormalizationConfig};

/// A comment and its class: 1 = bullying, 0 = not bullying.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LabeledPost {
    pub text: String,
    pub label: u8,
}

impl LabeledPost {
    pub fn new(text: impl Into<String>, label: u8) -> Result<Self> {
        let text = text.into();
        if label > 1 {
            return Err(Error::InvalidArgument(format!("label {label} is not 0 or 1")));
        }
        if text.trim().is_empty() {
            return Err(Error::InvalidArgument("post text is empty".into()));
        }
        Ok(LabeledPost { text, label })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    posts: Vec<LabeledPost>,
    source: String,
}

impl Corpus {
    pub fn new(posts: Vec<LabeledPost>, source: impl Into<String>) -> Self {
        Corpus {
            posts,
            source: source.into(),
        }
    }

    pub fn posts(&self) -> &[LabeledPost] {
        &self.posts
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn len(&self) -> usize {
        self.posts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.posts.is_empty()
    }

    pub fn labels(&self) -> Vec<u8> {
        self.posts.iter().map(|p| p.label).collect()
    }

    pub fn texts(&self) -> impl Iterator<Item = &str> {
        self.posts.iter().map(|p| p.text.as_str())
    }

    /// Writes `text,label` rows under a header line.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(file);
        let to_err = |e: csv::Error| Error::io(path, io::Error::other(e));
        w.write_record(["text", "label"]).map_err(to_err)?;
        for p in &self.posts {
            w.write_record([p.text.as_str(), if p.label == 1 { "1" } else { "0" }])
                .map_err(to_err)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Reads a two-column `text,label` CSV. A first row whose second field is not
/// an integer is taken as a header and skipped.
pub fn load_csv(path: &Path) -> Result<Corpus> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let context = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(bytes.as_slice());
    let mut posts = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::record(&context, line, e.to_string())
        })?;
        let line = record.position().map_or(i + 1, |p| p.line() as usize);
        if record.len() != 2 {
            return Err(Error::record(
                &context,
                line,
                format!("expected 2 fields (text,label), found {}", record.len()),
            ));
        }
        let label_field = record[1].trim();
        if i == 0 && label_field.parse::<i64>().is_err() {
            continue;
        }
        let label = match label_field.parse::<i64>() {
            Ok(0) => 0,
            Ok(1) => 1,
            _ => {
                return Err(Error::record(
                    &context,
                    line,
                    format!("label {label_field:?} is not 0 or 1"),
                ))
            }
        };
        let post = LabeledPost::new(&record[0], label)
            .map_err(|e| Error::record(&context, line, e.to_string()))?;
        posts.push(post);
    }
    if posts.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Ok(Corpus::new(posts, context))
}

/// One term per line, blank lines ignored.
pub fn load_keywords(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_owned)
        .collect())
}

/// Keeps posts whose normalized text contains at least one normalized
/// keyword as a substring.
pub fn keyword_filter(corpus: &Corpus, keywords: &[String]) -> Result<Corpus> {
    keyword_filter_with(corpus, keywords, &NormalizationConfig::default())
}

pub fn keyword_filter_with(
    corpus: &Corpus,
    keywords: &[String],
    config: &NormalizationConfig,
) -> Result<Corpus> {
    let keys: Vec<String> = keywords
        .iter()
        .map(|k| normalize(k, config))
        .filter(|k| !k.is_empty())
        .collect();
    if keys.is_empty() {
        return Err(Error::InvalidArgument("keyword list is empty".into()));
    }
    let posts = corpus
        .posts
        .iter()
        .filter(|p| {
            let text = normalize(&p.text, config);
            keys.iter().any(|k| text.contains(k.as_str()))
        })
        .cloned()
        .collect();
    Ok(Corpus::new(posts, format!("{} | keyword filter", corpus.source)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
    pub shuffle: bool,
}

impl SplitSpec {
    pub fn new(train_fraction: f64, seed: u64, shuffle: bool) -> Result<Self> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "train_fraction {train_fraction} not in (0, 1)"
            )));
        }
        Ok(SplitSpec {
            train_fraction,
            seed,
            shuffle,
        })
    }

    /// Number of training items out of `n`: ⌊fraction·n⌋, so the test side
    /// gets the ceiling (10662 at 0.8 → 8529 / 2133).
    pub fn train_size(&self, n: usize) -> usize {
        (self.train_fraction * n as f64 + 1e-9).floor() as usize
    }
}

/// Seeded train/test partition of a corpus.
pub fn split(corpus: &Corpus, spec: &SplitSpec) -> Result<(Corpus, Corpus)> {
    let spec = SplitSpec::new(spec.train_fraction, spec.seed, spec.shuffle)?;
    let n = corpus.len();
    let n_train = spec.train_size(n);
    if n < 2 || n_train == 0 || n_train >= n {
        return Err(Error::InvalidArgument(format!(
            "corpus of {n} posts is too small for a {}/{} split",
            spec.train_fraction,
            1.0 - spec.train_fraction
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    if spec.shuffle {
        Prng::new(spec.seed).shuffle(&mut order);
    }
    let pick = |idx: &[usize], tag: &str| {
        Corpus::new(
            idx.iter().map(|&i| corpus.posts[i].clone()).collect(),
            format!("{} | {tag}", corpus.source),
        )
    };
    Ok((pick(&order[..n_train], "train"), pick(&order[n_train..], "test")))
}

/// Labels from two annotators over the same items.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotationPair {
    labels_a: Vec<u8>,
    labels_b: Vec<u8>,
}

impl AnnotationPair {
    pub fn new(labels_a: Vec<u8>, labels_b: Vec<u8>) -> Result<Self> {
        if labels_a.len() != labels_b.len() {
            return Err(Error::Shape(format!(
                "annotators labeled {} and {} items",
                labels_a.len(),
                labels_b.len()
            )));
        }
        if labels_a.iter().chain(&labels_b).any(|&l| l > 1) {
            return Err(Error::InvalidArgument("annotation labels must be 0 or 1".into()));
        }
        Ok(AnnotationPair { labels_a, labels_b })
    }

    pub fn swapped(&self) -> AnnotationPair {
        AnnotationPair {
            labels_a: self.labels_b.clone(),
            labels_b: self.labels_a.clone(),
        }
    }

    /// 2×2 table `[[a0b0, a0b1], [a1b0, a1b1]]`.
    pub fn contingency(&self) -> [[usize; 2]; 2] {
        let mut t = [[0; 2]; 2];
        for (&a, &b) in self.labels_a.iter().zip(&self.labels_b) {
            t[a as usize][b as usize] += 1;
        }
        t
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KappaResult {
    pub kappa: f64,
    pub observed_agreement: f64,
    pub expected_agreement: f64,
    pub n_items: usize,
}

/// Cohen's kappa for two binary annotators.
///
/// When both annotators use one identical class throughout, chance agreement
/// is 1 and kappa is defined as 1.0.
pub fn cohen_kappa(pair: &AnnotationPair) -> Result<KappaResult> {
    let n = pair.labels_a.len();
    if n == 0 {
        return Err(Error::InvalidArgument("no annotated items".into()));
    }
    let t = pair.contingency();
    let nf = n as f64;
    let p_o = (t[0][0] + t[1][1]) as f64 / nf;
    let a1 = (t[1][0] + t[1][1]) as f64 / nf;
    let b1 = (t[0][1] + t[1][1]) as f64 / nf;
    let p_e = a1 * b1 + (1.0 - a1) * (1.0 - b1);
    let kappa = if p_e >= 1.0 {
        if p_o == 1.0 {
            1.0
        } else {
            return Err(Error::DegenerateMarginals);
        }
    } else {
        (p_o - p_e) / (1.0 - p_e)
    };
    Ok(KappaResult {
        kappa,
        observed_agreement: p_o,
        expected_agreement: p_e,
        n_items: n,
    })
}

/// Insults used to mark synthetic bullying posts. The first three are the
/// collection keywords of the original dataset.
pub const BULLY_LEXICON: &[&str] = &[
    "متخلف", "مقرف", "غبي", "حقير", "تافه", "فاشل", "وقح", "سخيف",
];

/// Everyday words for synthetic posts. None contains a lexicon entry.
pub const NEUTRAL_WORDS: &[&str] = &[
    "صباح", "الخير", "يوم", "جميل", "شكرا", "في", "المساعده", "مباراه", "رائعه", "الطقس",
    "اليوم", "اهلا", "وسهلا", "كيف", "حالك", "الحمد", "لله", "سعيد", "بلقائك", "القهوه",
    "لذيذه", "الكتاب", "مفيد", "العمل", "ممتع", "نلتقي", "غدا", "مساء", "النور", "الفريق",
    "فاز", "الجو", "معتدل", "احب", "السفر", "البحر", "الطعام", "طيب", "الدرس", "سهل",
    "مبروك", "النجاح", "يحفظك", "تحياتي", "للجميع", "يا", "انت", "هذا", "جدا", "كثيرا",
];

fn round_half_up(x: f64) -> usize {
    (x + 0.5 + 1e-9).floor() as usize
}

/// Deterministic synthetic corpus: `round(n · bully_fraction)` posts carry
/// one or two lexicon insults, the rest are built from neutral words only.
pub fn synth_corpus(seed: u64, n: usize, bully_fraction: f64) -> Result<Corpus> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("n must be at least 2, got {n}")));
    }
    if !(bully_fraction > 0.0 && bully_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "bully_fraction {bully_fraction} not in (0, 1)"
        )));
    }
    let n_bully = round_half_up(n as f64 * bully_fraction).min(n);
    let mut rng = Prng::new(seed);
    let mut labels: Vec<u8> = (0..n).map(|i| u8::from(i < n_bully)).collect();
    rng.shuffle(&mut labels);
    let posts = labels
        .into_iter()
        .map(|label| {
            let len = 3 + rng.below(6);
            let mut words: Vec<&str> = (0..len)
                .map(|_| NEUTRAL_WORDS[rng.below(NEUTRAL_WORDS.len())])
                .collect();
            if label == 1 {
                for _ in 0..1 + rng.below(2) {
                    let insult = BULLY_LEXICON[rng.below(BULLY_LEXICON.len())];
                    let at = rng.below(words.len() + 1);
                    words.insert(at, insult);
                }
            }
            LabeledPost {
                text: words.join(" "),
                label,
            }
        })
        .collect();
    Ok(Corpus::new(
        posts,
        format!("synth(seed={seed},n={n},fraction={bully_fraction})"),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn csv_file(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    fn posts(texts: &[&str]) -> Corpus {
        Corpus::new(texts.iter().map(|t| LabeledPost::new(*t, 0).unwrap()).collect(), "t")
    }

    #[test]
    fn load_two_rows() {
        let f = csv_file("انت غبي,1\nيوم جميل,0\n");
        let c = load_csv(f.path()).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.labels(), vec![1, 0]);
        assert_eq!(c.posts()[0].text, "انت غبي");
    }

    #[test]
    fn load_with_header_and_quotes() {
        let f = csv_file("text,label\n\"hello, \"\"world\"\"\",0\nx,1\n");
        let c = load_csv(f.path()).unwrap();
        assert_eq!(c.posts()[0].text, "hello, \"world\"");
        assert_eq!(c.labels(), vec![0, 1]);
    }

    #[test]
    fn load_errors() {
        assert!(matches!(load_csv(csv_file("").path()), Err(Error::EmptyCorpus)));
        assert!(matches!(load_csv(csv_file("text,label\n").path()), Err(Error::EmptyCorpus)));
        match load_csv(csv_file("a,1\nb,2\n").path()) {
            Err(Error::Record { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        match load_csv(csv_file("a,1\nb,0,extra\n").path()) {
            Err(Error::Record { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(load_csv(csv_file("  ,1\n").path()).is_err());
        assert!(matches!(load_csv(Path::new("/nonexistent/x.csv")), Err(Error::Io { .. })));
    }

    #[test]
    fn csv_round_trip() {
        let c = synth_corpus(3, 20, 0.5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.csv");
        c.write_csv(&p).unwrap();
        assert_eq!(load_csv(&p).unwrap().posts(), c.posts());
    }

    #[test]
    fn keyword_filter_examples() {
        let c = posts(&["انت متخلف", "صباح الخير"]);
        let kept = keyword_filter(&c, &["متخلف".to_string()]).unwrap();
        assert_eq!(kept.len(), 1);
        assert_eq!(kept.posts()[0].text, "انت متخلف");
        assert!(keyword_filter(&c, &["xyz".to_string()]).unwrap().is_empty());
        assert_eq!(keyword_filter(&c, &["صباح الخير".to_string()]).unwrap().len(), 1);
        assert!(keyword_filter(&c, &[]).is_err());
    }

    #[test]
    fn split_sizes() {
        let c = synth_corpus(1, 10, 0.5).unwrap();
        let (tr, te) = split(&c, &SplitSpec::new(0.8, 1, true).unwrap()).unwrap();
        assert_eq!((tr.len(), te.len()), (8, 2));
        let spec = SplitSpec::new(0.8, 0, true).unwrap();
        assert_eq!(10662 - spec.train_size(10662), 2133);
        assert_eq!(spec.train_size(400), 320);
        assert_eq!(SplitSpec::new(0.7, 0, true).unwrap().train_size(10), 7);
    }

    #[test]
    fn split_is_deterministic_and_conserving() {
        let c = synth_corpus(9, 57, 0.4).unwrap();
        let spec = SplitSpec::new(0.8, 42, true).unwrap();
        let a = split(&c, &spec).unwrap();
        let b = split(&c, &spec).unwrap();
        assert_eq!(a, b);
        let mut all: Vec<LabeledPost> = a.0.posts().iter().chain(a.1.posts()).cloned().collect();
        let mut orig = c.posts().to_vec();
        all.sort();
        orig.sort();
        assert_eq!(all, orig);
    }

    #[test]
    fn split_errors() {
        assert!(SplitSpec::new(1.0, 0, true).is_err());
        assert!(SplitSpec::new(0.0, 0, true).is_err());
        let one = posts(&["a"]);
        assert!(split(&one, &SplitSpec::new(0.5, 0, true).unwrap()).is_err());
        let two = posts(&["a", "b"]);
        assert!(split(&two, &SplitSpec::new(0.4, 0, true).unwrap()).is_err());
        assert!(split(&two, &SplitSpec::new(0.9, 0, true).unwrap()).is_ok());
        assert!(split(&two, &SplitSpec::new(0.5, 0, false).unwrap()).is_ok());
    }

    #[test]
    fn kappa_examples() {
        let same = AnnotationPair::new(vec![1, 0, 1, 1], vec![1, 0, 1, 1]).unwrap();
        assert_eq!(cohen_kappa(&same).unwrap().kappa, 1.0);

        let mut a = Vec::new();
        let mut b = Vec::new();
        for (la, lb, count) in [(1, 1, 50), (1, 0, 5), (0, 1, 5), (0, 0, 40)] {
            for _ in 0..count {
                a.push(la);
                b.push(lb);
            }
        }
        let r = cohen_kappa(&AnnotationPair::new(a, b).unwrap()).unwrap();
        assert!((r.observed_agreement - 0.90).abs() < 1e-12);
        assert!((r.expected_agreement - 0.505).abs() < 1e-12);
        assert!((r.kappa - 0.395 / 0.495).abs() < 1e-12);
        assert!((r.kappa - 0.798).abs() < 1e-3);

        let xs = vec![1, 0, 0, 1, 1, 0, 1];
        let inverted: Vec<u8> = xs.iter().map(|x| 1 - x).collect();
        let r = cohen_kappa(&AnnotationPair::new(xs, inverted).unwrap()).unwrap();
        assert_eq!(r.observed_agreement, 0.0);
        assert!(r.kappa < 0.0);
    }

    #[test]
    fn kappa_degenerate_and_errors() {
        let constant = AnnotationPair::new(vec![1; 5], vec![1; 5]).unwrap();
        assert_eq!(cohen_kappa(&constant).unwrap().kappa, 1.0);
        assert!(AnnotationPair::new(vec![1], vec![1, 0]).is_err());
        assert!(AnnotationPair::new(vec![2], vec![1]).is_err());
        assert!(cohen_kappa(&AnnotationPair::new(vec![], vec![]).unwrap()).is_err());
    }

    #[test]
    fn synth_examples() {
        let c = synth_corpus(7, 100, 0.5).unwrap();
        assert_eq!(c.len(), 100);
        assert_eq!(c.labels().iter().filter(|&&l| l == 1).count(), 50);
        for p in c.posts() {
            let has = BULLY_LEXICON.iter().any(|w| p.text.contains(w));
            assert_eq!(has, p.label == 1, "{:?}", p);
        }
        assert_eq!(synth_corpus(7, 100, 0.5).unwrap(), c);
        let small = synth_corpus(1, 10, 0.3).unwrap();
        assert_eq!(small.labels().iter().filter(|&&l| l == 1).count(), 3);
        assert!(synth_corpus(1, 1, 0.5).is_err());
        assert!(synth_corpus(1, 10, 1.0).is_err());
    }

    #[test]
    fn neutral_words_never_contain_insults() {
        let cfg = NormalizationConfig::default();
        for w in NEUTRAL_WORDS {
            assert_eq!(&normalize(w, &cfg), w);
            for b in BULLY_LEXICON {
                assert!(!w.contains(b), "{w} contains {b}");
            }
        }
        for b in BULLY_LEXICON {
            assert_eq!(&normalize(b, &cfg), b);
        }
    }
}
