//! Scoring detections against ground truth.
//!
//! A true change point is detected when it falls inside the observation
//! window of a reported event. Matching is one-to-one and greedy in time
//! order. Delays only count for detections at or after the change and no
//! later than `delay_cap_multiplier · W`.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correlation::SeriesFrame;
use crate::detector::{detect_frame, ChangeEvent, DetectorConfig, Threshold};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub window: usize,
    pub delay_cap_multiplier: f64,
}

impl EvalConfig {
    pub fn new(window: usize) -> Self {
        Self {
            window,
            delay_cap_multiplier: 2.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window < 2 {
            return Err(Error::Config(format!("window must be at least 2, got {}", self.window)));
        }
        if !(self.delay_cap_multiplier > 0.0) {
            return Err(Error::Config("delay cap multiplier must be positive".into()));
        }
        Ok(())
    }

    pub fn delay_cap(&self) -> f64 {
        self.delay_cap_multiplier * self.window as f64
    }
}

/// A matched (true change point, event) pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub truth: usize,
    pub tau_hat: usize,
}

impl MatchedPair {
    /// `τ̂ − τ`, negative when the alarm window starts before the change.
    pub fn delay(&self) -> i64 {
        self.tau_hat as i64 - self.truth as i64
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Matching {
    pub pairs: Vec<MatchedPair>,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

/// Greedy one-to-one matching: each true change point, in order, takes the
/// earliest unmatched event whose window contains it.
pub fn match_detections(events: &[ChangeEvent], truth: &[usize]) -> Matching {
    let mut used = vec![false; events.len()];
    let mut pairs = Vec::new();
    for &tau in truth {
        if let Some(k) = (0..events.len()).find(|&k| !used[k] && events[k].contains(tau)) {
            used[k] = true;
            pairs.push(MatchedPair {
                truth: tau,
                tau_hat: events[k].tau_hat,
            });
        }
    }
    let tp = pairs.len();
    Matching {
        pairs,
        true_positives: tp,
        false_positives: events.len() - tp,
        false_negatives: truth.len() - tp,
    }
}

/// Mean of `τ̂ − τ` over pairs with `0 ≤ τ̂ − τ ≤ cap`; `None` if none qualify.
pub fn average_delay(matching: &Matching, cfg: &EvalConfig) -> Option<f64> {
    qualifying_delays(matching, cfg).map(|(sum, n)| sum / n as f64)
}

fn qualifying_delays(matching: &Matching, cfg: &EvalConfig) -> Option<(f64, usize)> {
    let cap = cfg.delay_cap();
    let delays: Vec<f64> = matching
        .pairs
        .iter()
        .map(|p| p.delay() as f64)
        .filter(|d| *d >= 0.0 && *d <= cap)
        .collect();
    if delays.is_empty() {
        None
    } else {
        Some((delays.iter().sum(), delays.len()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct F1Score {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

pub fn f1(tp: usize, fp: usize, fn_: usize) -> F1Score {
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    F1Score {
        precision,
        recall,
        f1,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub average_delay: Option<f64>,
    pub runtime_seconds: f64,
}

impl DetectionReport {
    pub fn from_matching(matching: &Matching, cfg: &EvalConfig, runtime_seconds: f64) -> Self {
        Self::aggregate(std::slice::from_ref(matching), cfg, runtime_seconds)
    }

    /// Pools counts and qualifying delays over several streams.
    pub fn aggregate(matchings: &[Matching], cfg: &EvalConfig, runtime_seconds: f64) -> Self {
        let tp = matchings.iter().map(|m| m.true_positives).sum();
        let fp = matchings.iter().map(|m| m.false_positives).sum();
        let fn_ = matchings.iter().map(|m| m.false_negatives).sum();
        let (sum, n) = matchings
            .iter()
            .filter_map(|m| qualifying_delays(m, cfg))
            .fold((0.0, 0), |(s, c), (ds, dn)| (s + ds, c + dn));
        let score = f1(tp, fp, fn_);
        Self {
            true_positives: tp,
            false_positives: fp,
            false_negatives: fn_,
            precision: score.precision,
            recall: score.recall,
            f1: score.f1,
            average_delay: (n > 0).then(|| sum / n as f64),
            runtime_seconds,
        }
    }
}

/// Documented per-dataset defaults for window size and lag.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetPreset {
    Beedance,
    Hasc,
    Microservice,
    Synthetic,
}

impl DatasetPreset {
    pub fn window(self) -> usize {
        match self {
            DatasetPreset::Beedance => 10,
            DatasetPreset::Hasc | DatasetPreset::Microservice => 20,
            DatasetPreset::Synthetic => 5,
        }
    }

    pub fn lag(self) -> usize {
        match self {
            DatasetPreset::Hasc => 5,
            _ => 1,
        }
    }

    pub fn config(self) -> DetectorConfig {
        DetectorConfig::new(self.window()).with_lag(self.lag())
    }
}

/// One stream of a benchmark dataset. Streams without labels make the
/// whole dataset unscorable.
#[derive(Clone, Debug)]
pub struct BenchmarkStream {
    pub frame: SeriesFrame,
    pub truth: Option<Vec<usize>>,
}

#[derive(Clone, Debug)]
pub struct Dataset {
    pub name: String,
    pub streams: Vec<BenchmarkStream>,
    pub default: DetectorConfig,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub mean: f64,
    pub std: f64,
}

impl Spread {
    fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self { mean: 0.0, std: 0.0 };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Self { mean, std: var.sqrt() }
    }
}

/// Result of running one configuration over all streams of a dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigRun {
    pub threshold: Threshold,
    pub report: DetectionReport,
    /// Spread of the per-stream F1 scores.
    pub per_stream_f1: Spread,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkEntry {
    pub dataset: String,
    pub default: ConfigRun,
    pub best: ConfigRun,
    pub grid: Vec<Threshold>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkOutcome {
    pub entries: Vec<BenchmarkEntry>,
    /// Datasets that could not be scored, with the reason.
    pub skipped: Vec<(String, String)>,
}

/// Runs one configuration over labelled streams in parallel.
pub fn evaluate_config(cfg: &DetectorConfig, streams: &[(&SeriesFrame, &[usize])]) -> Result<ConfigRun> {
    cfg.validate()?;
    let eval_cfg = EvalConfig::new(cfg.window);
    let runs: Vec<(Matching, f64)> = streams
        .par_iter()
        .map(|(frame, truth)| {
            let started = Instant::now();
            let events = detect_frame(cfg, frame)?;
            let elapsed = started.elapsed().as_secs_f64();
            Ok((match_detections(&events, truth), elapsed))
        })
        .collect::<Result<_>>()?;
    let runtime = runs.iter().map(|(_, s)| s).sum();
    let matchings: Vec<Matching> = runs.into_iter().map(|(m, _)| m).collect();
    let per_stream: Vec<f64> = matchings
        .iter()
        .map(|m| f1(m.true_positives, m.false_positives, m.false_negatives).f1)
        .collect();
    Ok(ConfigRun {
        threshold: cfg.threshold,
        report: DetectionReport::aggregate(&matchings, &eval_cfg, runtime),
        per_stream_f1: Spread::of(&per_stream),
    })
}

/// Runs each dataset with its default configuration, then with every
/// threshold in `grid`, and keeps the best-F1 run (the default run is a
/// candidate, so Best never scores below Default).
pub fn run_benchmark(datasets: &[Dataset], grid: &[Threshold]) -> Result<BenchmarkOutcome> {
    let mut outcome = BenchmarkOutcome::default();
    for ds in datasets {
        let labelled: Option<Vec<(&SeriesFrame, &[usize])>> = ds
            .streams
            .iter()
            .map(|s| s.truth.as_deref().map(|t| (&s.frame, t)))
            .collect();
        let Some(labelled) = labelled else {
            outcome
                .skipped
                .push((ds.name.clone(), "missing ground-truth labels".into()));
            continue;
        };
        let default = evaluate_config(&ds.default, &labelled)?;
        let mut best = default.clone();
        for th in grid {
            let run = evaluate_config(&ds.default.clone().with_threshold(*th), &labelled)?;
            if run.report.f1 > best.report.f1 {
                best = run;
            }
        }
        outcome.entries.push(BenchmarkEntry {
            dataset: ds.name.clone(),
            default,
            best,
            grid: grid.to_vec(),
        });
    }
    Ok(outcome)
}

/// `n` fixed thresholds spaced evenly in log scale over `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<Threshold> {
    match n {
        0 => Vec::new(),
        1 => vec![Threshold::Fixed { rho: lo }],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..n)
                .map(|i| Threshold::Fixed {
                    rho: (a + (b - a) * i as f64 / (n - 1) as f64).exp(),
                })
                .collect()
        }
    }
}

/// Ten thresholds from 0.01 to 10.
pub fn default_grid() -> Vec<Threshold> {
    log_grid(0.01, 10.0, 10)
}

fn fmt_delay(d: Option<f64>) -> String {
    d.map_or_else(|| "N.A.".to_string(), |d| format!("{d:.2}"))
}

/// One line of the summary table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub dataset: String,
    pub f1_default: f64,
    pub f1_best: f64,
    pub average_delay: Option<f64>,
    pub runtime_seconds: f64,
}

impl From<&BenchmarkEntry> for TableRow {
    fn from(e: &BenchmarkEntry) -> Self {
        Self {
            dataset: e.dataset.clone(),
            f1_default: e.default.report.f1,
            f1_best: e.best.report.f1,
            average_delay: e.best.report.average_delay,
            runtime_seconds: e.best.report.runtime_seconds,
        }
    }
}

/// Aligned plain-text table: dataset, F1 (default), F1 (best), average
/// delay of the best run, total runtime of the best run.
pub fn render_table(entries: &[BenchmarkEntry]) -> String {
    let rows: Vec<TableRow> = entries.iter().map(TableRow::from).collect();
    render_rows(&rows)
}

pub fn render_rows(rows: &[TableRow]) -> String {
    let header = ["Dataset", "F1 (Default)", "F1 (Best)", "Ave Delay", "Runtime"];
    let rows: Vec<[String; 5]> = rows
        .iter()
        .map(|r| {
            [
                r.dataset.clone(),
                format!("{:.3}", r.f1_default),
                format!("{:.3}", r.f1_best),
                fmt_delay(r.average_delay),
                format!("{:.3}s", r.runtime_seconds),
            ]
        })
        .collect();
    let mut widths: [usize; 5] = header.map(str::len);
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, cells: &[&str]| {
        let parts: Vec<String> = cells
            .iter()
            .zip(widths)
            .enumerate()
            .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect();
        let _ = writeln!(out, "{}", parts.join("  ").trim_end());
    };
    line(&mut out, &header);
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    let _ = writeln!(out, "{}", rule.join("  "));
    for row in &rows {
        let cells: Vec<&str> = row.iter().map(String::as_str).collect();
        line(&mut out, &cells);
    }
    out
}
