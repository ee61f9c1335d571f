//! Online change point detector.
//!
//! Every consumed window yields a correlation matrix `B_t`. Its distance to
//! the Fréchet mean of the matrices seen since the last restart, minus the
//! radius of that history (largest distance of a member to the mean), is the
//! detection score `D(t)`. The score drives a one-sided CUSUM recursion
//! `y(t) = max(y(t−1) + D(t), 0)`; an alarm is raised when `y(t) > ρ`, after
//! which the detector restarts from the next window.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::correlation::{correlation_matrix, CorrelationMatrix, SeriesFrame, WindowedSeries, DEFAULT_JITTER};
use crate::error::{Error, Result};
use crate::manifold::{log_image, mean_from_log_sum, LogImage, MetricKind, SpdMatrix};

/// Floor applied to automatically calibrated thresholds.
pub const MIN_AUTO_THRESHOLD: f64 = 1e-6;

/// Fewest warmup scores accepted by [`auto_threshold`].
pub const MIN_WARMUP_SCORES: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Threshold {
    /// Alarm when the CUSUM statistic strictly exceeds `rho`.
    Fixed { rho: f64 },
    /// Calibrate `rho = mean + k·std` on the first scores after each restart.
    Auto { k: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub window: usize,
    pub lag: usize,
    pub metric: MetricKind,
    pub threshold: Threshold,
    pub jitter: f64,
    pub min_history: usize,
    pub max_history: Option<usize>,
}

impl DetectorConfig {
    pub fn new(window: usize) -> Self {
        Self {
            window,
            lag: 1,
            metric: MetricKind::LogCholesky,
            threshold: Threshold::Auto { k: 3.0 },
            jitter: DEFAULT_JITTER,
            min_history: 2,
            max_history: None,
        }
    }

    pub fn with_lag(mut self, lag: usize) -> Self {
        self.lag = lag;
        self
    }

    pub fn with_metric(mut self, metric: MetricKind) -> Self {
        self.metric = metric;
        self
    }

    pub fn with_threshold(mut self, threshold: Threshold) -> Self {
        self.threshold = threshold;
        self
    }

    pub fn with_jitter(mut self, jitter: f64) -> Self {
        self.jitter = jitter;
        self
    }

    pub fn with_min_history(mut self, min_history: usize) -> Self {
        self.min_history = min_history;
        self
    }

    pub fn with_max_history(mut self, max_history: Option<usize>) -> Self {
        self.max_history = max_history;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.window < 2 {
            return fail(format!("window must be at least 2, got {}", self.window));
        }
        if self.lag < 1 {
            return fail("lag must be at least 1".into());
        }
        match self.threshold {
            Threshold::Fixed { rho } if !(rho > 0.0) => {
                return fail(format!("threshold must be positive, got {rho}"))
            }
            Threshold::Auto { k } if !(k >= 0.0) || !k.is_finite() => {
                return fail(format!("auto-threshold multiplier must be non-negative, got {k}"))
            }
            _ => {}
        }
        if !(self.jitter >= 0.0) || !self.jitter.is_finite() {
            return fail(format!("jitter must be non-negative, got {}", self.jitter));
        }
        if self.min_history < 1 {
            return fail("min_history must be at least 1".into());
        }
        if let Some(cap) = self.max_history {
            if cap < self.min_history {
                return fail(format!(
                    "max_history ({cap}) is below min_history ({})",
                    self.min_history
                ));
            }
        }
        Ok(())
    }

    /// Number of scores collected before an automatic threshold is fixed.
    pub fn warmup_len(&self) -> usize {
        (2 * self.window).max(10)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChangeEvent {
    /// Start index of the window that raised the alarm.
    pub tau_hat: usize,
    pub cusum_value: f64,
    pub score: f64,
    /// Inclusive observation range `[tau_hat, tau_hat + W − 1]`.
    pub window_span: [usize; 2],
}

impl ChangeEvent {
    pub fn contains(&self, t: usize) -> bool {
        self.window_span[0] <= t && t <= self.window_span[1]
    }
}

/// Components of one detection score.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreParts {
    /// `d_t`: distance from `B_t` to the mean of the history.
    pub distance: f64,
    /// `r_{t−1}`: largest distance from a history member to that mean.
    pub radius: f64,
    /// `D(t) = d_t − r_{t−1}`.
    pub score: f64,
}

/// What happened to a scored window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scored {
    pub parts: ScoreParts,
    /// CUSUM value after this window.
    pub cusum: f64,
    /// Threshold in effect, absent while an automatic threshold is warming up.
    pub threshold: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepOutcome {
    pub scored: Option<Scored>,
    pub event: Option<ChangeEvent>,
}

/// `max(y_prev + d, 0)`.
pub fn cusum_update(y_prev: f64, d: f64) -> f64 {
    let y = y_prev + d;
    if y > 0.0 {
        y
    } else {
        0.0
    }
}

/// CUSUM statistic from its definition: the largest suffix sum of the scores
/// up to each `t`, floored at zero. Quadratic; meant as a reference.
pub fn brute_force_cusum(scores: &[f64]) -> Vec<f64> {
    (0..scores.len())
        .map(|t| {
            let mut best = 0.0_f64;
            for i in 0..=t {
                let mut sum = 0.0;
                for d in &scores[i..=t] {
                    sum += d;
                }
                if sum > best {
                    best = sum;
                }
            }
            best
        })
        .collect()
}

/// `mean + k·std` of warmup scores (sample standard deviation), floored at
/// [`MIN_AUTO_THRESHOLD`].
pub fn auto_threshold(warmup_scores: &[f64], k: f64) -> Result<f64> {
    let n = warmup_scores.len();
    if n < MIN_WARMUP_SCORES {
        return Err(Error::Config(format!(
            "automatic threshold needs at least {MIN_WARMUP_SCORES} warmup scores, got {n}; \
             pass an explicit threshold instead"
        )));
    }
    if !(k >= 0.0) {
        return Err(Error::Config(format!("auto-threshold multiplier must be non-negative, got {k}")));
    }
    let mean = warmup_scores.iter().sum::<f64>() / n as f64;
    let var = warmup_scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let rho = mean + k * var.sqrt();
    Ok(if rho > MIN_AUTO_THRESHOLD { rho } else { MIN_AUTO_THRESHOLD })
}

/// Everything the detector carries between windows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorState {
    metric: MetricKind,
    dim: Option<usize>,
    images: VecDeque<LogImage>,
    log_sum: Option<LogImage>,
    y: f64,
    steps_since_restart: usize,
    last_event: Option<ChangeEvent>,
    warmup_scores: Vec<f64>,
    threshold: Option<f64>,
}

impl DetectorState {
    pub fn new(cfg: &DetectorConfig) -> Self {
        Self {
            metric: cfg.metric,
            dim: None,
            images: VecDeque::new(),
            log_sum: None,
            y: 0.0,
            steps_since_restart: 0,
            last_event: None,
            warmup_scores: Vec::new(),
            threshold: fixed_threshold(cfg),
        }
    }

    pub fn metric(&self) -> MetricKind {
        self.metric
    }

    pub fn cusum(&self) -> f64 {
        self.y
    }

    pub fn history_len(&self) -> usize {
        self.images.len()
    }

    pub fn images(&self) -> impl Iterator<Item = &LogImage> {
        self.images.iter()
    }

    pub fn log_sum(&self) -> Option<&LogImage> {
        self.log_sum.as_ref()
    }

    pub fn steps_since_restart(&self) -> usize {
        self.steps_since_restart
    }

    pub fn last_event(&self) -> Option<&ChangeEvent> {
        self.last_event.as_ref()
    }

    /// Threshold currently in effect, if one has been fixed.
    pub fn threshold(&self) -> Option<f64> {
        self.threshold
    }

    fn center(&self) -> Result<LogImage> {
        let sum = self
            .log_sum
            .as_ref()
            .ok_or_else(|| Error::Contract("empty detector history".into()))?;
        Ok(sum.scaled(1.0 / self.images.len() as f64))
    }

    /// Fréchet mean of the retained history.
    pub fn mean(&self) -> Result<SpdMatrix> {
        let sum = self
            .log_sum
            .as_ref()
            .ok_or_else(|| Error::Contract("empty detector history".into()))?;
        mean_from_log_sum(sum, self.images.len())
    }

    fn radius_about(&self, center: &LogImage) -> Result<f64> {
        let mut r = 0.0_f64;
        for img in &self.images {
            r = r.max(img.distance(center)?);
        }
        Ok(r)
    }

    /// Largest distance from a retained matrix to `mean`.
    pub fn radius(&self, mean: &SpdMatrix) -> Result<f64> {
        if self.images.is_empty() {
            return Err(Error::Contract("radius of an empty history".into()));
        }
        self.radius_about(&log_image(self.metric, mean)?)
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        match self.dim {
            Some(expected) if expected != dim => Err(Error::DimensionMismatch { expected, found: dim }),
            _ => Ok(()),
        }
    }

    fn score_image(&self, cfg: &DetectorConfig, image: &LogImage) -> Result<ScoreParts> {
        let have = self.images.len();
        if have < cfg.min_history.max(1) {
            return Err(Error::NotReady {
                have,
                need: cfg.min_history.max(1),
            });
        }
        let center = self.center()?;
        let distance = image.distance(&center)?;
        let radius = self.radius_about(&center)?;
        Ok(ScoreParts {
            distance,
            radius,
            score: distance - radius,
        })
    }

    /// `D(t)` for `b` against the current history, without changing state.
    pub fn detection_score(&self, cfg: &DetectorConfig, b: &CorrelationMatrix) -> Result<ScoreParts> {
        self.check_dim(b.dim())?;
        self.score_image(cfg, &log_image(self.metric, b.matrix())?)
    }

    fn append(&mut self, cfg: &DetectorConfig, image: LogImage) -> Result<()> {
        if let Some(cap) = cfg.max_history {
            while self.images.len() >= cap.max(1) {
                let old = self.images.pop_front().expect("non-empty history");
                if let Some(sum) = self.log_sum.as_mut() {
                    sum.sub_assign(&old)?;
                }
            }
        }
        match self.log_sum.as_mut() {
            Some(sum) => sum.add_assign(&image)?,
            None => self.log_sum = Some(image.clone()),
        }
        self.images.push_back(image);
        Ok(())
    }

    fn restart(&mut self, cfg: &DetectorConfig) {
        self.images.clear();
        self.log_sum = None;
        self.y = 0.0;
        self.steps_since_restart = 0;
        self.warmup_scores.clear();
        self.threshold = fixed_threshold(cfg);
    }

    /// Consumes one correlation matrix.
    ///
    /// Scores `b` against the history (once the history is long enough),
    /// then appends it. While an automatic threshold is calibrating the
    /// CUSUM value stays at zero.
    pub fn step(&mut self, cfg: &DetectorConfig, b: &CorrelationMatrix) -> Result<StepOutcome> {
        if cfg.metric != self.metric {
            return Err(Error::Config("detector state was built for a different metric".into()));
        }
        self.check_dim(b.dim())?;
        self.dim = Some(b.dim());
        let image = log_image(self.metric, b.matrix())?;
        self.steps_since_restart += 1;

        let parts = match self.score_image(cfg, &image) {
            Ok(parts) => parts,
            Err(Error::NotReady { .. }) => {
                self.append(cfg, image)?;
                return Ok(StepOutcome::default());
            }
            Err(e) => return Err(e),
        };

        let rho = match (self.threshold, cfg.threshold) {
            (Some(rho), _) => rho,
            (None, Threshold::Auto { k }) => {
                self.warmup_scores.push(parts.score);
                if self.warmup_scores.len() >= cfg.warmup_len() {
                    self.threshold = Some(auto_threshold(&self.warmup_scores, k)?);
                }
                self.append(cfg, image)?;
                return Ok(StepOutcome {
                    scored: Some(Scored {
                        parts,
                        cusum: self.y,
                        threshold: self.threshold,
                    }),
                    event: None,
                });
            }
            (None, Threshold::Fixed { rho }) => rho,
        };

        self.y = cusum_update(self.y, parts.score);
        self.append(cfg, image)?;
        let scored = Scored {
            parts,
            cusum: self.y,
            threshold: Some(rho),
        };
        if self.y > rho {
            let start = b.start();
            let event = ChangeEvent {
                tau_hat: start,
                cusum_value: self.y,
                score: parts.score,
                window_span: [start, start + cfg.window - 1],
            };
            self.restart(cfg);
            self.last_event = Some(event.clone());
            return Ok(StepOutcome {
                scored: Some(scored),
                event: Some(event),
            });
        }
        Ok(StepOutcome {
            scored: Some(scored),
            event: None,
        })
    }
}

fn fixed_threshold(cfg: &DetectorConfig) -> Option<f64> {
    match cfg.threshold {
        Threshold::Fixed { rho } => Some(rho),
        Threshold::Auto { .. } => None,
    }
}

/// One consumed window, as reported by [`OnlineDetector::push`].
#[derive(Clone, Debug, PartialEq)]
pub struct WindowOutcome {
    pub start: usize,
    pub outcome: StepOutcome,
}

/// Single-pass driver: buffers the last `W` observations, forms a
/// correlation matrix every `L` steps and feeds it to the detector.
///
/// After an alarm at window `τ̂` the next consumed window starts at `τ̂ + 1`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OnlineDetector {
    cfg: DetectorConfig,
    state: DetectorState,
    series: usize,
    buffer: VecDeque<Vec<f64>>,
    seen: usize,
    next_start: usize,
    origin: usize,
}

impl OnlineDetector {
    pub fn new(cfg: DetectorConfig, series: usize) -> Result<Self> {
        Self::with_origin(cfg, series, 0)
    }

    /// A detector whose first observation carries raw index `origin`.
    pub fn with_origin(cfg: DetectorConfig, series: usize, origin: usize) -> Result<Self> {
        cfg.validate()?;
        if series < 2 {
            return Err(Error::Config(format!("need at least 2 series, got {series}")));
        }
        Ok(Self {
            state: DetectorState::new(&cfg),
            buffer: VecDeque::with_capacity(cfg.window),
            cfg,
            series,
            seen: 0,
            next_start: 0,
            origin,
        })
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.cfg
    }

    pub fn state(&self) -> &DetectorState {
        &self.state
    }

    pub fn series_count(&self) -> usize {
        self.series
    }

    /// Raw index the next observation will get.
    pub fn position(&self) -> usize {
        self.origin + self.seen
    }

    pub fn buffered(&self) -> usize {
        self.buffer.len()
    }

    /// Feeds one observation row; returns the outcome if a window was consumed.
    pub fn push(&mut self, obs: &[f64]) -> Result<Option<WindowOutcome>> {
        if obs.len() != self.series {
            return Err(Error::DimensionMismatch {
                expected: self.series,
                found: obs.len(),
            });
        }
        if obs.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        if self.buffer.len() == self.cfg.window {
            let mut recycled = self.buffer.pop_front().expect("full buffer");
            recycled.copy_from_slice(obs);
            self.buffer.push_back(recycled);
        } else {
            self.buffer.push_back(obs.to_vec());
        }
        self.seen += 1;
        if self.seen < self.cfg.window || self.seen - self.cfg.window != self.next_start {
            return Ok(None);
        }
        let start = self.origin + self.next_start;
        let window = WindowedSeries::from_rows(start, self.buffer.iter().map(Vec::as_slice))?;
        let b = correlation_matrix(&window, self.cfg.jitter)?;
        let outcome = self.state.step(&self.cfg, &b)?;
        self.next_start += if outcome.event.is_some() { 1 } else { self.cfg.lag };
        Ok(Some(WindowOutcome { start, outcome }))
    }
}

/// One trace row per scored window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: usize,
    pub distance: f64,
    pub radius: f64,
    pub score: f64,
    pub cusum: f64,
    pub threshold: Option<f64>,
}

impl TraceRow {
    pub fn from_outcome(w: &WindowOutcome) -> Option<Self> {
        w.outcome.scored.map(|s| Self {
            t: w.start,
            distance: s.parts.distance,
            radius: s.parts.radius,
            score: s.parts.score,
            cusum: s.cusum,
            threshold: s.threshold,
        })
    }
}

/// Runs a fresh detector over a whole frame, returning events and the trace.
pub fn run_frame(cfg: &DetectorConfig, frame: &SeriesFrame) -> Result<(Vec<ChangeEvent>, Vec<TraceRow>)> {
    let mut det = OnlineDetector::new(cfg.clone(), frame.series_count())?;
    let mut events = Vec::new();
    let mut trace = Vec::new();
    for row in frame.rows() {
        if let Some(w) = det.push(row)? {
            trace.extend(TraceRow::from_outcome(&w));
            events.extend(w.outcome.event);
        }
    }
    Ok((events, trace))
}

/// Runs a fresh detector over a whole frame and returns its events.
pub fn detect_frame(cfg: &DetectorConfig, frame: &SeriesFrame) -> Result<Vec<ChangeEvent>> {
    let mut det = OnlineDetector::new(cfg.clone(), frame.series_count())?;
    let mut events = Vec::new();
    for row in frame.rows() {
        if let Some(w) = det.push(row)? {
            events.extend(w.outcome.event);
        }
    }
    Ok(events)
}
