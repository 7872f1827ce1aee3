//! Metrics, reports and curves for binary classifiers (class 1 = bullying is
//! the positive class).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }

    /// The same matrix with classes 0 and 1 swapped.
    pub fn flipped(&self) -> ConfusionMatrix {
        ConfusionMatrix {
            tp: self.tn,
            tn: self.tp,
            fp: self.fn_,
            fn_: self.fp,
        }
    }
}

fn check_labels(preds: &[u8], truth: &[u8]) -> Result<()> {
    if preds.len() != truth.len() {
        return Err(Error::Shape(format!(
            "{} predictions vs {} labels",
            preds.len(),
            truth.len()
        )));
    }
    if preds.is_empty() {
        return Err(Error::InvalidArgument("no predictions".into()));
    }
    if preds.iter().chain(truth).any(|&l| l > 1) {
        return Err(Error::InvalidArgument("labels must be 0 or 1".into()));
    }
    Ok(())
}

pub fn confusion(preds: &[u8], truth: &[u8]) -> Result<ConfusionMatrix> {
    check_labels(preds, truth)?;
    let mut cm = ConfusionMatrix::default();
    for (&p, &t) in preds.iter().zip(truth) {
        match (p, t) {
            (1, 1) => cm.tp += 1,
            (0, 0) => cm.tn += 1,
            (1, 0) => cm.fp += 1,
            _ => cm.fn_ += 1,
        }
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinaryMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Set when some metric hit a zero denominator and was defined as 0.
    pub zero_division: bool,
}

fn ratio(num: usize, den: usize, flag: &mut bool) -> f64 {
    if den == 0 {
        *flag = true;
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Harmonic mean; 0 when both inputs are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Accuracy, precision, recall and F1 for the positive class. Zero
/// denominators give 0 and set `zero_division`.
pub fn binary_metrics(cm: &ConfusionMatrix) -> BinaryMetrics {
    let mut flag = false;
    let accuracy = ratio(cm.tp + cm.tn, cm.total(), &mut flag);
    let precision = ratio(cm.tp, cm.tp + cm.fp, &mut flag);
    let recall = ratio(cm.tp, cm.tp + cm.fn_, &mut flag);
    if precision + recall == 0.0 {
        flag = true;
    }
    BinaryMetrics {
        accuracy,
        precision,
        recall,
        f1: f1_score(precision, recall),
        zero_division: flag,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassRow {
    pub label: u8,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Averages {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Per-class rows plus macro and support-weighted averages.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub classes: [ClassRow; 2],
    pub macro_avg: Averages,
    pub weighted_avg: Averages,
    pub total: usize,
    pub zero_division: bool,
}

pub fn classification_report(preds: &[u8], truth: &[u8]) -> Result<MetricsReport> {
    Ok(report_from_confusion(&confusion(preds, truth)?))
}

pub fn report_from_confusion(cm: &ConfusionMatrix) -> MetricsReport {
    let pos = binary_metrics(cm);
    let neg = binary_metrics(&cm.flipped());
    let classes = [
        ClassRow {
            label: 0,
            precision: neg.precision,
            recall: neg.recall,
            f1: neg.f1,
            support: cm.tn + cm.fp,
        },
        ClassRow {
            label: 1,
            precision: pos.precision,
            recall: pos.recall,
            f1: pos.f1,
            support: cm.tp + cm.fn_,
        },
    ];
    let macro_avg = Averages {
        precision: (classes[0].precision + classes[1].precision) / 2.0,
        recall: (classes[0].recall + classes[1].recall) / 2.0,
        f1: (classes[0].f1 + classes[1].f1) / 2.0,
    };
    let total = cm.total();
    let weighted = |f: fn(&ClassRow) -> f64| {
        classes.iter().map(|c| f(c) * c.support as f64).sum::<f64>() / total.max(1) as f64
    };
    let weighted_avg = Averages {
        precision: weighted(|c| c.precision),
        recall: weighted(|c| c.recall),
        f1: weighted(|c| c.f1),
    };
    MetricsReport {
        confusion: *cm,
        accuracy: pos.accuracy,
        precision: pos.precision,
        recall: pos.recall,
        f1: pos.f1,
        classes,
        macro_avg,
        weighted_avg,
        total,
        zero_division: pos.zero_division || neg.zero_division,
    }
}

impl MetricsReport {
    /// Fixed-width text in the usual classification-report layout.
    pub fn render_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{:>12} {:>10} {:>10} {:>10} {:>10}", "", "precision", "recall", "f1-score", "support").unwrap();
        s.push('\n');
        for c in &self.classes {
            writeln!(
                s,
                "{:>12} {:>10.2} {:>10.2} {:>10.2} {:>10}",
                c.label, c.precision, c.recall, c.f1, c.support
            )
            .unwrap();
        }
        s.push('\n');
        writeln!(s, "{:>12} {:>10} {:>10} {:>10.2} {:>10}", "accuracy", "", "", self.accuracy, self.total).unwrap();
        for (name, a) in [("macro avg", &self.macro_avg), ("weighted avg", &self.weighted_avg)] {
            writeln!(
                s,
                "{:>12} {:>10.2} {:>10.2} {:>10.2} {:>10}",
                name, a.precision, a.recall, a.f1, self.total
            )
            .unwrap();
        }
        s.push('\n');
        let cm = &self.confusion;
        writeln!(s, "confusion matrix (rows = truth, cols = prediction):").unwrap();
        writeln!(s, "{:>12} {:>10} {:>10}", "", "pred 0", "pred 1").unwrap();
        writeln!(s, "{:>12} {:>10} {:>10}", "true 0", cm.tn, cm.fp).unwrap();
        writeln!(s, "{:>12} {:>10} {:>10}", "true 1", cm.fn_, cm.tp).unwrap();
        if self.zero_division {
            writeln!(s, "warning: some metrics had a zero denominator and were set to 0").unwrap();
        }
        s
    }

    /// `key=value` lines at full precision.
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let cm = &self.confusion;
        for (k, v) in [("tp", cm.tp), ("tn", cm.tn), ("fp", cm.fp), ("fn", cm.fn_), ("total", self.total)] {
            writeln!(s, "{k}={v}").unwrap();
        }
        let mut put = |k: &str, v: f64| writeln!(s, "{k}={v:?}").unwrap();
        put("accuracy", self.accuracy);
        put("precision", self.precision);
        put("recall", self.recall);
        put("f1", self.f1);
        for c in &self.classes {
            put(&format!("class{}.precision", c.label), c.precision);
            put(&format!("class{}.recall", c.label), c.recall);
            put(&format!("class{}.f1", c.label), c.f1);
        }
        put("macro.precision", self.macro_avg.precision);
        put("macro.recall", self.macro_avg.recall);
        put("macro.f1", self.macro_avg.f1);
        put("weighted.precision", self.weighted_avg.precision);
        put("weighted.recall", self.weighted_avg.recall);
        put("weighted.f1", self.weighted_avg.f1);
        for c in &self.classes {
            writeln!(s, "class{}.support={}", c.label, c.support).unwrap();
        }
        writeln!(s, "zero_division={}", self.zero_division).unwrap();
        s
    }
}

/// Parses `key=value` lines written by [`MetricsReport::to_kv`].
pub fn parse_kv(text: &str) -> Vec<(String, String)> {
    text.lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim().to_owned(), v.trim().to_owned()))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    /// `(fpr, tpr)` from (0, 0) to (1, 1).
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

/// ROC by sweeping thresholds over distinct scores (descending). Equal scores
/// form a single step, so the trapezoidal AUC equals
/// P(score_pos > score_neg) + ½·P(score_pos = score_neg).
pub fn roc_auc(scores: &[f64], truth: &[u8]) -> Result<RocCurve> {
    if scores.len() != truth.len() {
        return Err(Error::Shape(format!("{} scores vs {} labels", scores.len(), truth.len())));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("ROC score".into()));
    }
    let n_pos = truth.iter().filter(|&&t| t == 1).count();
    let n_neg = truth.iter().filter(|&&t| t == 0).count();
    if n_pos + n_neg != truth.len() {
        return Err(Error::InvalidArgument("labels must be 0 or 1".into()));
    }
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::InvalidArgument("ROC needs both classes present".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut auc = 0.0;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if truth[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let (x0, y0) = *points.last().unwrap();
        let x1 = fp as f64 / n_neg as f64;
        let y1 = tp as f64 / n_pos as f64;
        auc += (x1 - x0) * (y0 + y1) / 2.0;
        points.push((x1, y1));
    }
    Ok(RocCurve { points, auc })
}

/// One row of the published comparison table (percentages).
#[derive(Debug, Clone, PartialEq)]
pub struct Table4Row {
    pub group: String,
    pub model: String,
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
    pub accuracy: f64,
}

/// Largest |published − recomputed| F1 (percentage points) still counted as
/// consistent with the harmonic mean.
pub const F1_TOLERANCE: f64 = 0.15;

const TABLE4_FIXTURE: &str = include_str!("../data/table4.tsv");

/// The 21 published rows shipped with the crate.
pub fn table4_fixture() -> Vec<Table4Row> {
    parse_table4(TABLE4_FIXTURE).expect("bundled fixture parses")
}

pub fn parse_table4(text: &str) -> Result<Vec<Table4Row>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 6 {
            return Err(Error::record("table4", i + 1, "expected 6 tab-separated fields"));
        }
        let num = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::record("table4", i + 1, format!("bad number {s:?}")))
        };
        rows.push(Table4Row {
            group: f[0].to_owned(),
            model: f[1].to_owned(),
            recall: num(f[2])?,
            precision: num(f[3])?,
            f1: num(f[4])?,
            accuracy: num(f[5])?,
        });
    }
    Ok(rows)
}

/// For each `(recall, precision, f1)` row in percent, the absolute gap
/// between the published F1 and the harmonic mean of the other two.
pub fn table4_consistency(rows: &[(f64, f64, f64)]) -> Result<Vec<f64>> {
    rows.iter()
        .enumerate()
        .map(|(i, &(r, p, f1))| {
            if [r, p, f1].iter().any(|v| !(0.0..=100.0).contains(v)) {
                return Err(Error::InvalidArgument(format!("row {i}: values must be in [0, 100]")));
            }
            if r + p == 0.0 {
                return Err(Error::InvalidArgument(format!("row {i}: precision + recall is zero")));
            }
            Ok((f1 - 2.0 * r * p / (r + p)).abs())
        })
        .collect()
}

/// Text table with recomputed F1, deviation and a flag for rows outside
/// [`F1_TOLERANCE`].
pub fn render_table4_check(rows: &[Table4Row]) -> Result<String> {
    let triples: Vec<_> = rows.iter().map(|r| (r.recall, r.precision, r.f1)).collect();
    let devs = table4_consistency(&triples)?;
    let mut s = String::new();
    writeln!(
        s,
        "{:<16} {:<26} {:>7} {:>9} {:>6} {:>10} {:>9}  status",
        "group", "model", "recall", "precision", "f1", "f1(calc)", "deviation"
    )
    .unwrap();
    let mut flagged = 0;
    for (r, d) in rows.iter().zip(&devs) {
        let ok = *d <= F1_TOLERANCE;
        if !ok {
            flagged += 1;
        }
        writeln!(
            s,
            "{:<16} {:<26} {:>7.1} {:>9.1} {:>6.1} {:>10.2} {:>9.2}  {}",
            r.group,
            r.model,
            r.recall,
            r.precision,
            r.f1,
            f1_score(r.precision, r.recall),
            d,
            if ok { "ok" } else { "INCONSISTENT" }
        )
        .unwrap();
    }
    writeln!(s, "{} rows, {} inconsistent (tolerance {F1_TOLERANCE})", rows.len(), flagged).unwrap();
    Ok(s)
}

/// One epoch of a learning curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub train_acc: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LearningCurve {
    pub records: Vec<EpochRecord>,
}

impl LearningCurve {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,val_loss,train_acc,val_acc\n");
        for r in &self.records {
            writeln!(
                s,
                "{},{:?},{:?},{:?},{:?}",
                r.epoch, r.train_loss, r.val_loss, r.train_acc, r.val_acc
            )
            .unwrap();
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 5 {
                return Err(Error::record("curves", i + 1, "expected 5 fields"));
            }
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::record("curves", i + 1, format!("bad number {s:?}")))
            };
            let epoch: usize = f[0]
                .parse()
                .map_err(|_| Error::record("curves", i + 1, "bad epoch"))?;
            if epoch != records.len() + 1 {
                return Err(Error::record("curves", i + 1, "epochs must be contiguous from 1"));
            }
            records.push(EpochRecord {
                epoch,
                train_loss: num(f[1])?,
                val_loss: num(f[2])?,
                train_acc: num(f[3])?,
                val_acc: num(f[4])?,
            });
        }
        Ok(LearningCurve { records })
    }
}

/// Writes `epoch,train_loss,val_loss,train_acc,val_acc` rows.
pub fn emit_curves(curve: &LearningCurve, path: &Path) -> Result<()> {
    if curve.records.is_empty() {
        return Err(Error::InvalidArgument("learning curve has no epochs".into()));
    }
    fs::write(path, curve.to_csv()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::Prng;

    #[test]
    fn confusion_examples() {
        let cm = confusion(&[1, 0, 1], &[1, 0, 1]).unwrap();
        assert_eq!(cm, ConfusionMatrix { tp: 2, tn: 1, fp: 0, fn_: 0 });
        let truth = [1, 0, 0, 1, 1];
        let inv: Vec<u8> = truth.iter().map(|t| 1 - t).collect();
        let cm = confusion(&inv, &truth).unwrap();
        assert_eq!((cm.tp, cm.tn), (0, 0));
        assert!(confusion(&[1], &[1, 0]).is_err());
        assert!(confusion(&[], &[]).is_err());
    }

    #[test]
    fn confusion_matches_counting_loop() {
        let mut rng = Prng::new(50);
        let p: Vec<u8> = (0..50).map(|_| rng.below(2) as u8).collect();
        let t: Vec<u8> = (0..50).map(|_| rng.below(2) as u8).collect();
        let cm = confusion(&p, &t).unwrap();
        let count = |a: u8, b: u8| p.iter().zip(&t).filter(|(x, y)| **x == a && **y == b).count();
        assert_eq!(cm.tp, count(1, 1));
        assert_eq!(cm.tn, count(0, 0));
        assert_eq!(cm.fp, count(1, 0));
        assert_eq!(cm.fn_, count(0, 1));
    }

    #[test]
    fn perfect_metrics() {
        let m = binary_metrics(&ConfusionMatrix { tp: 1, tn: 1, fp: 0, fn_: 0 });
        assert_eq!((m.accuracy, m.precision, m.recall, m.f1), (1.0, 1.0, 1.0, 1.0));
        assert!(!m.zero_division);
    }

    #[test]
    fn zero_denominators_are_zero_and_flagged() {
        let m = binary_metrics(&ConfusionMatrix { tp: 0, tn: 3, fp: 0, fn_: 2 });
        assert_eq!((m.precision, m.recall, m.f1), (0.0, 0.0, 0.0));
        assert!(m.zero_division);
    }

    #[test]
    fn f1_from_published_pr() {
        assert!((f1_score(0.997, 0.965) - 0.981).abs() < 5e-4);
    }

    #[test]
    fn f1_lies_between_p_and_r() {
        let mut rng = Prng::new(6);
        for _ in 0..1000 {
            let (p, r) = (rng.next_f64(), rng.next_f64());
            let f = f1_score(p, r);
            assert!(f >= p.min(r) - 1e-15 && f <= p.max(r) + 1e-15);
        }
        assert!((f1_score(0.4, 0.4) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn report_perfect_and_macro() {
        let truth = [1, 1, 0, 1, 0];
        let r = classification_report(&truth, &truth).unwrap();
        assert_eq!(r.classes[0].support, 2);
        assert_eq!(r.classes[1].support, 3);
        for c in &r.classes {
            assert_eq!((c.precision, c.recall, c.f1), (1.0, 1.0, 1.0));
        }
        let mut rng = Prng::new(2);
        let p: Vec<u8> = (0..40).map(|_| rng.below(2) as u8).collect();
        let t: Vec<u8> = (0..40).map(|_| rng.below(2) as u8).collect();
        let r = classification_report(&p, &t).unwrap();
        assert!((r.macro_avg.f1 - (r.classes[0].f1 + r.classes[1].f1) / 2.0).abs() < 1e-15);
        assert!((r.weighted_avg.recall - r.accuracy).abs() < 1e-15);
    }

    #[test]
    fn render_layout() {
        let r = report_from_confusion(&ConfusionMatrix { tp: 1113, tn: 980, fp: 0, fn_: 40 });
        let text = r.render_text();
        assert!(text.contains("           0       0.96       1.00       0.98        980"), "{text}");
        assert!(text.contains("           1       1.00       0.97       0.98       1153"), "{text}");
        assert!(text.contains("    accuracy                             0.98       2133"), "{text}");
        let kv = parse_kv(&r.to_kv());
        assert!(kv.contains(&("tp".into(), "1113".into())));
    }

    #[test]
    fn roc_examples() {
        let r = roc_auc(&[0.9, 0.8, 0.3, 0.2], &[1, 1, 0, 0]).unwrap();
        assert_eq!(r.auc, 1.0);
        let r = roc_auc(&[0.9, 0.8, 0.3, 0.2], &[1, 0, 1, 0]).unwrap();
        assert!((r.auc - 0.75).abs() < 1e-15);
        let r = roc_auc(&[0.4; 6], &[1, 0, 1, 0, 0, 1]).unwrap();
        assert_eq!(r.auc, 0.5);
        assert_eq!(r.points, vec![(0.0, 0.0), (1.0, 1.0)]);
        assert!(roc_auc(&[0.1, 0.2], &[1, 1]).is_err());
    }

    #[test]
    fn roc_points_monotone() {
        let mut rng = Prng::new(12);
        let s: Vec<f64> = (0..30).map(|_| (rng.next_f64() * 5.0).floor()).collect();
        let t: Vec<u8> = (0..30).map(|i| (i % 3 == 0) as u8).collect();
        let r = roc_auc(&s, &t).unwrap();
        assert_eq!(*r.points.first().unwrap(), (0.0, 0.0));
        assert_eq!(*r.points.last().unwrap(), (1.0, 1.0));
        for w in r.points.windows(2) {
            assert!(w[1].0 >= w[0].0 && w[1].1 >= w[0].1);
        }
    }

    #[test]
    fn table4_examples() {
        let d = table4_consistency(&[(96.5, 99.7, 98.1), (96.6, 97.2, 96.9), (75.9, 80.9, 74.6)]).unwrap();
        assert!(d[0] < 0.1);
        assert!(d[1] < 0.1);
        assert!((d[2] - 3.7).abs() < 0.05);
        assert!(table4_consistency(&[(0.0, 0.0, 0.0)]).is_err());
        assert!(table4_consistency(&[(101.0, 50.0, 60.0)]).is_err());
    }

    #[test]
    fn fixture_rows() {
        let rows = table4_fixture();
        assert_eq!(rows.len(), 21);
        assert_eq!(rows.iter().filter(|r| r.group == "baseline").count(), 5);
        let text = render_table4_check(&rows).unwrap();
        assert_eq!(text.matches("INCONSISTENT").count(), 5);
    }

    #[test]
    fn curves_round_trip() {
        let curve = LearningCurve {
            records: (1..=3)
                .map(|e| EpochRecord {
                    epoch: e,
                    train_loss: 1.0 / e as f64,
                    val_loss: 1.1 / e as f64,
                    train_acc: 0.5 + 0.1 * e as f64,
                    val_acc: 0.45 + 0.1 * e as f64,
                })
                .collect(),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("curves.csv");
        emit_curves(&curve, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("epoch,train_loss,val_loss,train_acc,val_acc\n"));
        assert_eq!(LearningCurve::from_csv(&text).unwrap(), curve);
        assert!(emit_curves(&LearningCurve::default(), &path).is_err());
        assert!(emit_curves(&curve, Path::new("/nonexistent/dir/c.csv")).is_err());
    }
}
