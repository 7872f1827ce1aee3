use std::fmt::Write as _;
use std::path::Path;

use super::config::{FeatureRoute, ModelKind, RunConfig};
use super::pipeline::{run_experiment, write_run_dir, RunOutcome};
use crate::corpus::Corpus;
use crate::error::{Error, Result};

/// One row of the summary: positive-class metrics on the test split.
#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub route: FeatureRoute,
    pub model: ModelKind,
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
    pub accuracy: f64,
    pub stopped_epoch: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GridSummary {
    pub rows: Vec<GridRow>,
}

impl GridSummary {
    /// Percentages with one decimal, in the published table's layout.
    pub fn render(&self) -> String {
        let mut s = String::new();
        writeln!(
            s,
            "{:<12} {:<14} {:>7} {:>9} {:>6} {:>8} {:>7}",
            "route", "model", "recall", "precision", "f1", "accuracy", "epochs"
        )
        .unwrap();
        for r in &self.rows {
            writeln!(
                s,
                "{:<12} {:<14} {:>7.1} {:>9.1} {:>6.1} {:>8.1} {:>7}",
                r.route.name(),
                r.model.name(),
                100.0 * r.recall,
                100.0 * r.precision,
                100.0 * r.f1,
                100.0 * r.accuracy,
                r.stopped_epoch
            )
            .unwrap();
        }
        s
    }

    /// Full-precision tab-separated form.
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("route\tmodel\trecall\tprecision\tf1\taccuracy\tstopped_epoch\n");
        for r in &self.rows {
            writeln!(
                s,
                "{}\t{}\t{:?}\t{:?}\t{:?}\t{:?}\t{}",
                r.route, r.model, r.recall, r.precision, r.f1, r.accuracy, r.stopped_epoch
            )
            .unwrap();
        }
        s
    }
}

fn cell_dir(out: &Path, route: FeatureRoute, model: ModelKind) -> std::path::PathBuf {
    out.join(format!("{route}__{model}"))
}

fn join<T: std::fmt::Display>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(", ")
}

/// Trains every route × model combination with the shared seed, one thread
/// per cell, and optionally writes each run into `out_dir/<route>__<model>`.
/// Incompatible pairs are skipped. Every remaining cell is validated before
/// training starts.
pub fn experiment_grid(
    base: &RunConfig,
    corpus: &Corpus,
    routes: &[FeatureRoute],
    models: &[ModelKind],
    out_dir: Option<&Path>,
) -> Result<GridSummary> {
    if routes.is_empty() || models.is_empty() {
        return Err(Error::Config("the grid needs at least one route and one model".into()));
    }
    let mut cells = Vec::new();
    for &route in routes {
        for &model in models.iter().filter(|m| m.compatible_with(route)) {
            let cfg = RunConfig {
                feature_route: route,
                model_kind: model,
                max_len: None,
                ..base.clone()
            }
            .resolved()?;
            cells.push(cfg);
        }
    }
    if cells.is_empty() {
        return Err(Error::Config(format!(
            "no compatible route/model pair among routes [{}] and models [{}]",
            join(routes),
            join(models)
        )));
    }
    let outcomes: Vec<Result<RunOutcome>> = std::thread::scope(|s| {
        let handles: Vec<_> = cells
            .iter()
            .map(|cfg| s.spawn(move || run_experiment(cfg, corpus)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(Error::Config("a grid cell panicked".into()))))
            .collect()
    });
    let mut summary = GridSummary::default();
    for outcome in outcomes {
        let o = outcome?;
        if let Some(dir) = out_dir {
            write_run_dir(&cell_dir(dir, o.config.feature_route, o.config.model_kind), &o)?;
        }
        summary.rows.push(GridRow {
            route: o.config.feature_route,
            model: o.config.model_kind,
            recall: o.report.recall,
            precision: o.report.precision,
            f1: o.report.f1,
            accuracy: o.report.accuracy,
            stopped_epoch: o.train_report.stopped_epoch,
        });
    }
    if let Some(dir) = out_dir {
        for (name, text) in [("summary.txt", summary.render()), ("summary.tsv", summary.to_tsv())] {
            let p = dir.join(name);
            std::fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
        }
    }
    Ok(summary)
}
