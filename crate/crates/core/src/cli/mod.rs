//! Command-line front end: data generation, agreement statistics,
//! featurization, training, evaluation, prediction, the published-table
//! consistency check and the experiment grid.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or validation error.

mod config;
mod grid;
mod pipeline;

pub use config::{
    load_config, EncoderSettings, FeatureRoute, ModelKind, RunConfig, DEFAULT_SEED, SEED_ENV,
};
pub use grid::{experiment_grid, GridRow, GridSummary};
pub use pipeline::{
    load_run, metrics_kv, metrics_text, prepare, run_experiment, score, write_run_dir, Featurizer, Prepared,
    RunOutcome, TrainedModel, CHECKPOINT_FILE, CONFIG_FILE, CURVES_FILE, METRICS_KV_FILE, METRICS_TEXT_FILE,
};

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::corpus::{cohen_kappa, load_csv, synth_corpus, AnnotationPair, Corpus};
use crate::error::{Error, Result};
use crate::eval::{parse_table4, render_table4_check, table4_fixture};
use crate::features::Embedder;
use crate::models::TokenInput;
use crate::numeric::Prng;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "textguard", version, about = "Arabic cyberbullying text classification toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a seeded synthetic labeled corpus as CSV.
    Synth {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 200)]
        n: usize,
        /// Share of bullying posts.
        #[arg(long, default_value_t = 0.5)]
        fraction: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cohen's kappa from a two-column CSV of binary labels.
    Kappa {
        file: PathBuf,
    },
    /// Fit features on a corpus and write them out.
    Featurize {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Train one model and write its run directory.
    Train {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Re-score a run directory's checkpoint on its test split.
    Evaluate {
        #[arg(long)]
        run: PathBuf,
        /// Corpus to use instead of the one named in the run's config.
        #[arg(long)]
        corpus: Option<PathBuf>,
    },
    /// Label new texts with a trained run.
    Predict {
        #[arg(long)]
        run: PathBuf,
        /// Text to classify (repeatable).
        #[arg(long = "text")]
        texts: Vec<String>,
        /// File with one text per line.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        threshold: Option<f64>,
        /// Corpus to use instead of the one named in the run's config.
        #[arg(long)]
        corpus: Option<PathBuf>,
    },
    /// Recompute F1 from the published recall/precision and flag rows that
    /// disagree.
    #[command(name = "check-table4")]
    CheckTable4 {
        /// TSV in the bundled fixture's layout; the fixture is used if absent.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Train every compatible route × model pair and print a summary table.
    Grid {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated feature routes.
        #[arg(long, value_delimiter = ',', required = true)]
        routes: Vec<String>,
        /// Comma-separated model kinds.
        #[arg(long, value_delimiter = ',', required = true)]
        models: Vec<String>,
    },
}

/// Flags shared by commands that take a run configuration. Each flag
/// overrides the matching config key.
#[derive(Debug, Args, Default)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    route: Option<String>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    max_len: Option<usize>,
}

impl RunArgs {
    fn config(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => load_config(p)?,
            None => RunConfig::default(),
        };
        if let Some(v) = &self.corpus {
            c.corpus = Some(v.clone());
        }
        if let Some(v) = &self.embeddings {
            c.embeddings = Some(v.clone());
        }
        if let Some(v) = &self.out {
            c.output_dir = Some(v.clone());
        }
        if let Some(v) = &self.route {
            c.feature_route = v.parse()?;
        }
        if let Some(v) = &self.model {
            c.model_kind = v.parse()?;
        }
        if let Some(v) = self.seed {
            c.seed = Some(v);
        }
        if let Some(v) = self.epochs {
            c.train.epochs = v;
        }
        if let Some(v) = self.lr {
            c.train.lr = v;
        }
        if let Some(v) = self.batch_size {
            c.train.batch_size = v;
        }
        if let Some(v) = self.patience {
            c.train.early_stop_patience = v;
        }
        if let Some(v) = self.max_len {
            c.max_len = Some(v);
        }
        c.resolved()
    }
}

/// Runs the command line `args` (without the program name), writing normal
/// output to `out` and diagnostics to `err`. Returns the exit code.
pub fn run_with<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let argv = std::iter::once(std::ffi::OsString::from("textguard")).chain(args.into_iter().map(Into::into));
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                EXIT_USAGE
            } else {
                let _ = write!(out, "{text}");
                EXIT_OK
            };
        }
    };
    match dispatch(cli.command) {
        Ok(text) => {
            let _ = write!(out, "{text}");
            EXIT_OK
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_DATA
        }
    }
}

/// [`run_with`] on the process's standard streams.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    run_with(args, &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}

fn corpus_of(cfg: &RunConfig) -> Result<Corpus> {
    cfg.check_paths()?;
    load_csv(cfg.corpus.as_deref().expect("checked above"))
}

fn dispatch(command: Command) -> Result<String> {
    match command {
        Command::Synth { seed, n, fraction, out } => {
            let seed = RunConfig {
                seed,
                ..RunConfig::default()
            }
            .effective_seed()?;
            let corpus = synth_corpus(seed, n, fraction)?;
            corpus.write_csv(&out)?;
            let bully = corpus.labels().iter().filter(|&&l| l == 1).count();
            Ok(format!("wrote {} posts ({bully} bullying) to {}\n", corpus.len(), out.display()))
        }
        Command::Kappa { file } => {
            let k = cohen_kappa(&read_annotations(&file)?)?;
            Ok(format!(
                "items={}\nobserved_agreement={:.4}\nexpected_agreement={:.4}\nkappa={:.3}\n",
                k.n_items, k.observed_agreement, k.expected_agreement, k.kappa
            ))
        }
        Command::Featurize { run } => featurize(&run.config()?),
        Command::Train { run } => train_command(&run.config()?),
        Command::Evaluate { run, corpus } => {
            let (cfg, prepared) = reload(&run, corpus)?;
            let (report, auc, _) = score(&cfg, &prepared.model, &prepared.features, &prepared.test)?;
            Ok(metrics_text(&report, auc))
        }
        Command::Predict {
            run,
            texts,
            input,
            threshold,
            corpus,
        } => {
            let mut texts = texts;
            if let Some(p) = &input {
                let body = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                texts.extend(body.lines().filter(|l| !l.trim().is_empty()).map(str::to_owned));
            }
            if texts.is_empty() {
                return Err(Error::InvalidArgument("nothing to predict: give --text or --input".into()));
            }
            let (cfg, prepared) = reload(&run, corpus)?;
            let threshold = threshold.unwrap_or(cfg.threshold);
            if !(threshold > 0.0 && threshold < 1.0) {
                return Err(Error::InvalidArgument(format!("threshold {threshold} not in (0, 1)")));
            }
            let probs = prepared.model.probabilities(&prepared.features, texts.iter().map(String::as_str))?;
            let mut s = String::from("label\tprobability\ttext\n");
            for (t, p) in texts.iter().zip(probs) {
                writeln!(s, "{}\t{p:.6}\t{t}", u8::from(p >= threshold)).unwrap();
            }
            Ok(s)
        }
        Command::CheckTable4 { input } => {
            let rows = match input {
                Some(p) => parse_table4(&std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?)?,
                None => table4_fixture(),
            };
            render_table4_check(&rows)
        }
        Command::Grid { run, routes, models } => {
            let cfg = run.config()?;
            let corpus = corpus_of(&cfg)?;
            let routes = routes.iter().map(|r| r.trim().parse()).collect::<Result<Vec<FeatureRoute>>>()?;
            let models = models.iter().map(|m| m.trim().parse()).collect::<Result<Vec<ModelKind>>>()?;
            let summary = experiment_grid(&cfg, &corpus, &routes, &models, cfg.output_dir.as_deref())?;
            Ok(summary.render())
        }
    }
}

fn reload(dir: &Path, corpus: Option<PathBuf>) -> Result<(RunConfig, Prepared)> {
    let mut cfg = load_config(&dir.join(CONFIG_FILE))?;
    if corpus.is_some() {
        cfg.corpus = corpus;
    }
    let data = corpus_of(&cfg)?;
    load_run(dir, &data)
}

fn train_command(cfg: &RunConfig) -> Result<String> {
    let corpus = corpus_of(cfg)?;
    let out_dir = cfg
        .output_dir
        .clone()
        .ok_or_else(|| Error::Config("no output directory given (--out or output_dir)".into()))?;
    let outcome = run_experiment(cfg, &corpus)?;
    write_run_dir(&out_dir, &outcome)?;
    let mut s = format!(
        "{} / {}: {} epochs (best {}), seed {}\n\n",
        cfg.feature_route,
        cfg.model_kind,
        outcome.train_report.stopped_epoch,
        outcome.train_report.best_epoch,
        cfg.seed.unwrap_or_default()
    );
    s.push_str(&metrics_text(&outcome.report, outcome.auc));
    writeln!(s, "run written to {}", out_dir.display()).unwrap();
    Ok(s)
}

/// Fits the route's features on the whole corpus and writes `vocab.tsv`
/// and `features.txt` (one line per post, label first).
fn featurize(cfg: &RunConfig) -> Result<String> {
    let corpus = corpus_of(cfg)?;
    let out_dir = cfg
        .output_dir
        .clone()
        .ok_or_else(|| Error::Config("no output directory given (--out or output_dir)".into()))?;
    std::fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
    let mut rng = Prng::new(cfg.seed.unwrap_or(DEFAULT_SEED));
    let features = Featurizer::fit(cfg, &corpus, &mut rng)?;
    let mut lines = String::new();
    for post in corpus.posts() {
        write!(lines, "{}", post.label).unwrap();
        match &features {
            Featurizer::Tfidf(m) => {
                for (i, v) in m.transform_text(&post.text).iter() {
                    write!(lines, " {i}:{v:?}").unwrap();
                }
            }
            Featurizer::Static { table, analyzer, max_len } => {
                write_sequence(&mut lines, table, &analyzer.tokens(&post.text), *max_len)
            }
            Featurizer::Subword { table, analyzer, max_len } => {
                write_sequence(&mut lines, table, &analyzer.tokens(&post.text), *max_len)
            }
            Featurizer::Tokens { vocab, max_len } => {
                let t = TokenInput::encode(&post.text, vocab, *max_len);
                for (id, m) in t.ids.iter().zip(&t.mask) {
                    if *m {
                        write!(lines, " {id}").unwrap();
                    }
                }
            }
        }
        lines.push('\n');
    }
    let mut written = vec!["features.txt"];
    let put = |name: &str, text: &str| {
        let p = out_dir.join(name);
        std::fs::write(&p, text).map_err(|e| Error::io(&p, e))
    };
    put("features.txt", &lines)?;
    match &features {
        Featurizer::Tfidf(m) => {
            put("vocab.tsv", &m.vocab().to_tsv())?;
            written.push("vocab.tsv");
        }
        Featurizer::Tokens { vocab, .. } => {
            put("vocab.tsv", &vocab.to_tsv())?;
            written.push("vocab.tsv");
        }
        Featurizer::Subword { table, .. } => {
            put("subword_table.txt", &table.to_text())?;
            written.push("subword_table.txt");
        }
        Featurizer::Static { .. } => {}
    }
    Ok(format!(
        "{} features for {} posts (width {}): {} in {}\n",
        cfg.feature_route,
        corpus.len(),
        features.width(),
        written.join(", "),
        out_dir.display()
    ))
}

/// `len v..` with the sequence's vectors flattened row by row.
fn write_sequence<E: Embedder>(s: &mut String, table: &E, tokens: &crate::textproc::TokenSequence, max_len: usize) {
    let rows: Vec<Vec<f64>> = tokens.iter().filter_map(|w| table.embed(w)).take(max_len).collect();
    write!(s, " {}", rows.len()).unwrap();
    for v in rows.iter().flatten() {
        write!(s, " {v:?}").unwrap();
    }
}

/// Two label columns; a first row that does not parse as labels is taken
/// as a header.
fn read_annotations(path: &Path) -> Result<AnnotationPair> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::record(path.display().to_string(), 0, e.to_string()))?;
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for (i, rec) in reader.records().enumerate() {
        let line = i + 1;
        let rec = rec.map_err(|e| Error::record(path.display().to_string(), line, e.to_string()))?;
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        if rec.len() != 2 {
            return Err(Error::record(
                path.display().to_string(),
                line,
                format!("expected 2 columns, found {}", rec.len()),
            ));
        }
        let parsed: Option<(u8, u8)> = rec[0].parse().ok().zip(rec[1].parse().ok());
        match parsed {
            Some((x, y)) => {
                a.push(x);
                b.push(y);
            }
            None if line == 1 => continue,
            None => {
                return Err(Error::record(
                    path.display().to_string(),
                    line,
                    format!("labels must be 0 or 1, got {:?}", rec.iter().collect::<Vec<_>>()),
                ))
            }
        }
    }
    AnnotationPair::new(a, b)
}
