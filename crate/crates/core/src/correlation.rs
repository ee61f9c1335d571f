//! Sliding-window Pearson correlation matrices.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::SpdMatrix;

/// Default ridge added to the diagonal of every correlation matrix.
pub const DEFAULT_JITTER: f64 = 1e-6;

/// How many times the jitter is multiplied by ten before giving up.
pub const JITTER_RETRIES: usize = 3;

/// Relative spread below which a series is treated as constant in a window.
const DEGENERATE_STD_RATIO: f64 = 1e-10;

/// A multivariate observation stream, stored row-major (one row per time step).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesFrame {
    m: usize,
    values: Vec<f64>,
    timestamps: Option<Vec<f64>>,
}

impl SeriesFrame {
    pub fn new(m: usize, values: Vec<f64>) -> Result<Self> {
        if m < 2 {
            return Err(Error::Contract(format!("need at least 2 series, got {m}")));
        }
        if values.is_empty() || !values.len().is_multiple_of(m) {
            return Err(Error::Contract(format!(
                "{} values do not form whole rows of width {m}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self {
            m,
            values,
            timestamps: None,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = rows.first().map(Vec::len).unwrap_or(0);
        let mut values = Vec::with_capacity(rows.len() * m);
        for (t, row) in rows.iter().enumerate() {
            if row.len() != m {
                return Err(Error::Contract(format!(
                    "row {t} has {} columns, expected {m}",
                    row.len()
                )));
            }
            values.extend_from_slice(row);
        }
        Self::new(m, values)
    }

    /// Attaches a monotone (non-decreasing) timestamp per row.
    pub fn with_timestamps(mut self, timestamps: Vec<f64>) -> Result<Self> {
        if timestamps.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: timestamps.len(),
            });
        }
        if timestamps.windows(2).any(|w| !(w[0] <= w[1])) {
            return Err(Error::Contract("timestamps are not monotone".into()));
        }
        self.timestamps = Some(timestamps);
        Ok(self)
    }

    pub fn series_count(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.m
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.values[t * self.m..(t + 1) * self.m]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.m)
    }

    pub fn timestamps(&self) -> Option<&[f64]> {
        self.timestamps.as_deref()
    }

    /// Copies rows `start..start + width` into an `m × width` block.
    pub fn window(&self, start: usize, width: usize) -> Result<WindowedSeries> {
        if start + width > self.len() {
            return Err(Error::Contract(format!(
                "window [{start}, {}) exceeds series length {}",
                start + width,
                self.len()
            )));
        }
        WindowedSeries::from_rows(start, (start..start + width).map(|t| self.row(t)))
    }

    /// Rows `from..`, as a new frame (timestamps are carried along).
    pub fn suffix(&self, from: usize) -> Result<Self> {
        let mut out = Self::new(self.m, self.values[from * self.m..].to_vec())?;
        out.timestamps = self.timestamps.as_ref().map(|ts| ts[from..].to_vec());
        Ok(out)
    }
}

/// `W` consecutive observations, laid out as an `m × W` block (one row per series).
#[derive(Clone, Debug, PartialEq)]
pub struct WindowedSeries {
    start: usize,
    block: DMatrix<f64>,
}

impl WindowedSeries {
    pub fn new(start: usize, block: DMatrix<f64>) -> Result<Self> {
        if block.ncols() < 2 {
            return Err(Error::Contract(format!(
                "window width must be at least 2, got {}",
                block.ncols()
            )));
        }
        if block.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { start, block })
    }

    /// Builds a window from time-ordered observation rows.
    pub fn from_rows<'a>(start: usize, rows: impl IntoIterator<Item = &'a [f64]>) -> Result<Self> {
        let rows: Vec<&[f64]> = rows.into_iter().collect();
        let m = rows.first().map(|r| r.len()).unwrap_or(0);
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::Contract("ragged window rows".into()));
        }
        let block = DMatrix::from_fn(m, rows.len(), |i, j| rows[j][i]);
        Self::new(start, block)
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn width(&self) -> usize {
        self.block.ncols()
    }

    pub fn series_count(&self) -> usize {
        self.block.nrows()
    }

    pub fn block(&self) -> &DMatrix<f64> {
        &self.block
    }
}

/// A centred and scaled window; rows with no spread are zeroed and flagged.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedWindow {
    pub values: DMatrix<f64>,
    pub degenerate: Vec<bool>,
}

/// Centres every row and divides it by its sample standard deviation (`W − 1`
/// denominator).
pub fn normalize_window(w: &WindowedSeries) -> NormalizedWindow {
    let width = w.width();
    let mut values = w.block.clone();
    let mut degenerate = vec![false; w.series_count()];
    for (i, flag) in degenerate.iter_mut().enumerate() {
        let mut row = values.row_mut(i);
        let mean = row.sum() / width as f64;
        let scale = row.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        row.add_scalar_mut(-mean);
        let var = row.iter().map(|v| v * v).sum::<f64>() / (width - 1) as f64;
        let std = var.sqrt();
        if std == 0.0 || std <= DEGENERATE_STD_RATIO * scale {
            row.fill(0.0);
            *flag = true;
        } else {
            row /= std;
        }
    }
    NormalizedWindow { values, degenerate }
}

/// Pearson correlation of a window before any jitter; constant rows get unit
/// self-correlation and zero correlation with everything else.
pub fn pearson_matrix(w: &WindowedSeries) -> DMatrix<f64> {
    let norm = normalize_window(w);
    let m = w.series_count();
    let mut b = &norm.values * norm.values.transpose() / (w.width() - 1) as f64;
    for i in 0..m {
        b[(i, i)] = 1.0;
        for j in (i + 1)..m {
            let v = if norm.degenerate[i] || norm.degenerate[j] {
                0.0
            } else {
                (0.5 * (b[(i, j)] + b[(j, i)])).clamp(-1.0, 1.0)
            };
            b[(i, j)] = v;
            b[(j, i)] = v;
        }
    }
    b
}

/// A Pearson correlation matrix of one window, regularised to be SPD.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationMatrix {
    matrix: SpdMatrix,
    jitter_applied: f64,
    start: usize,
}

impl CorrelationMatrix {
    /// Wraps an arbitrary SPD matrix as the window starting at `start`.
    pub fn from_spd(start: usize, matrix: SpdMatrix) -> Self {
        Self {
            matrix,
            jitter_applied: 0.0,
            start,
        }
    }

    pub fn matrix(&self) -> &SpdMatrix {
        &self.matrix
    }

    pub fn jitter_applied(&self) -> f64 {
        self.jitter_applied
    }

    /// Index of the first observation of the window.
    pub fn start(&self) -> usize {
        self.start
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }
}

/// Builds `B = X̃·X̃ᵀ / (W − 1) + jitter·I`, escalating the jitter tenfold
/// (up to [`JITTER_RETRIES`] times) if the result is not positive definite.
pub fn correlation_matrix(w: &WindowedSeries, jitter: f64) -> Result<CorrelationMatrix> {
    if !(jitter >= 0.0) || !jitter.is_finite() {
        return Err(Error::Config(format!("jitter must be non-negative, got {jitter}")));
    }
    let base = pearson_matrix(w);
    let mut current = jitter;
    for attempt in 0..=JITTER_RETRIES {
        if attempt > 0 {
            current = if current == 0.0 { DEFAULT_JITTER } else { current * 10.0 };
        }
        let mut b = base.clone();
        for i in 0..b.nrows() {
            b[(i, i)] += current;
        }
        if let Ok(matrix) = SpdMatrix::new(b) {
            return Ok(CorrelationMatrix {
                matrix,
                jitter_applied: current,
                start: w.start,
            });
        }
    }
    Err(Error::DegenerateWindow {
        start: w.start,
        jitter: current,
    })
}
