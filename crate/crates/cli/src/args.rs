use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use riocpd::detector::{DetectorConfig, Threshold};
use riocpd::eval::DatasetPreset;
use riocpd::manifold::MetricKind;
use riocpd::simulator::{ChangeKind, Feature, ObservationLayout};

use crate::error::CliError;
use crate::io::Delimiter;

#[derive(Debug, Parser)]
#[command(name = "riocpd", version, about = "Online change point detection on correlation structure")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the detector over a CSV/TSV file, one JSON line per event.
    Detect(DetectArgs),
    /// Generate a labelled synthetic stream.
    Simulate(SimulateArgs),
    /// Score detections against labels.
    Eval(EvalArgs),
    /// Turn a detection trace into plot-ready columns.
    ExportPlot(ExportPlotArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    Le,
    Lc,
}

impl From<MetricArg> for MetricKind {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Le => MetricKind::LogEuclidean,
            MetricArg::Lc => MetricKind::LogCholesky,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PresetArg {
    Beedance,
    Hasc,
    Microservice,
    Synthetic,
}

impl From<PresetArg> for DatasetPreset {
    fn from(p: PresetArg) -> Self {
        match p {
            PresetArg::Beedance => DatasetPreset::Beedance,
            PresetArg::Hasc => DatasetPreset::Hasc,
            PresetArg::Microservice => DatasetPreset::Microservice,
            PresetArg::Synthetic => DatasetPreset::Synthetic,
        }
    }
}

/// Window size used when neither `--window` nor `--preset` is given.
pub const DEFAULT_WINDOW: usize = 20;

#[derive(Clone, Debug, Default, Args)]
pub struct DetectorArgs {
    /// Per-dataset defaults for window and lag.
    #[arg(long, value_enum)]
    pub preset: Option<PresetArg>,
    /// Sliding window length W.
    #[arg(long)]
    pub window: Option<usize>,
    /// Consume a window every L steps.
    #[arg(long)]
    pub lag: Option<usize>,
    #[arg(long, value_enum)]
    pub metric: Option<MetricArg>,
    /// Fixed CUSUM threshold ρ.
    #[arg(long, conflicts_with = "auto_threshold")]
    pub threshold: Option<f64>,
    /// Calibrate ρ as mean + k·std of the warmup scores.
    #[arg(long, value_name = "K")]
    pub auto_threshold: Option<f64>,
    /// Diagonal jitter added to each correlation matrix.
    #[arg(long)]
    pub jitter: Option<f64>,
    /// History length required before scoring.
    #[arg(long)]
    pub min_history: Option<usize>,
    /// Cap on retained history (bounds memory on long streams).
    #[arg(long)]
    pub max_history: Option<usize>,
}

impl DetectorArgs {
    pub fn any_set(&self) -> bool {
        self.preset.is_some()
            || self.window.is_some()
            || self.lag.is_some()
            || self.metric.is_some()
            || self.threshold.is_some()
            || self.auto_threshold.is_some()
            || self.jitter.is_some()
            || self.min_history.is_some()
            || self.max_history.is_some()
    }

    pub fn config(&self) -> Result<DetectorConfig, CliError> {
        let mut cfg = match self.preset {
            Some(p) => DatasetPreset::from(p).config(),
            None => DetectorConfig::new(DEFAULT_WINDOW),
        };
        if let Some(w) = self.window {
            cfg.window = w;
        }
        if let Some(l) = self.lag {
            cfg.lag = l;
        }
        if let Some(m) = self.metric {
            cfg.metric = m.into();
        }
        if let Some(rho) = self.threshold {
            cfg.threshold = Threshold::Fixed { rho };
        }
        if let Some(k) = self.auto_threshold {
            cfg.threshold = Threshold::Auto { k };
        }
        if let Some(j) = self.jitter {
            cfg.jitter = j;
        }
        if let Some(h) = self.min_history {
            cfg.min_history = h;
        }
        if self.max_history.is_some() {
            cfg.max_history = self.max_history;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// Input file; `-` reads stdin.
    #[arg(long, short)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t)]
    pub delimiter: Delimiter,
    #[command(flatten)]
    pub detector: DetectorArgs,
    /// Event output (line-delimited JSON); stdout by default.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Write one JSON line per scored window to this file.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Save the detector state here after the last row.
    #[arg(long)]
    pub save_state: Option<PathBuf>,
    /// Continue from a saved state; the input holds the rows that follow.
    #[arg(long)]
    pub resume: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SimKind {
    Connection,
    Speed,
    Location,
    Gaussian,
}

impl SimKind {
    pub fn spring_kind(self) -> Option<ChangeKind> {
        match self {
            SimKind::Connection => Some(ChangeKind::Connection),
            SimKind::Speed => Some(ChangeKind::Speed),
            SimKind::Location => Some(ChangeKind::Location),
            SimKind::Gaussian => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum LayoutArg {
    PerParticle,
    PerCoordinate,
    X,
    Y,
    Vx,
    Vy,
}

impl From<LayoutArg> for ObservationLayout {
    fn from(l: LayoutArg) -> Self {
        match l {
            LayoutArg::PerParticle => ObservationLayout::PerParticle,
            LayoutArg::PerCoordinate => ObservationLayout::PerCoordinate,
            LayoutArg::X => ObservationLayout::Feature(Feature::X),
            LayoutArg::Y => ObservationLayout::Feature(Feature::Y),
            LayoutArg::Vx => ObservationLayout::Feature(Feature::Vx),
            LayoutArg::Vy => ObservationLayout::Feature(Feature::Vy),
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub kind: SimKind,
    #[arg(long, default_value_t = 100)]
    pub length: usize,
    /// Change point indices; defaults to the midpoint for spring streams
    /// and to equal-length segments for gaussian streams.
    #[arg(long, value_delimiter = ',')]
    pub at: Vec<usize>,
    /// Number of gaussian regimes.
    #[arg(long, default_value_t = 2)]
    pub segments: usize,
    /// Number of gaussian series.
    #[arg(long, default_value_t = 3)]
    pub dims: usize,
    /// Off-diagonal correlation of the gaussian regimes.
    #[arg(long, default_value_t = 0.8)]
    pub rho: f64,
    /// Perturbation scale of speed/location changes.
    #[arg(long)]
    pub magnitude: Option<f64>,
    #[arg(long, default_value_t = 5)]
    pub particles: usize,
    #[arg(long, value_enum, default_value_t = LayoutArg::PerParticle)]
    pub layout: LayoutArg,
    #[arg(long, default_value_t = 0, env = "RIOCPD_SEED")]
    pub seed: u64,
    #[arg(long, short)]
    pub output: PathBuf,
    /// Labels file; defaults to `<output stem>.labels.json`.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    pub delimiter: Delimiter,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Series file with a matching `--labels` file.
    #[arg(long, short, conflicts_with = "dir")]
    pub input: Option<PathBuf>,
    #[arg(long, requires = "input")]
    pub labels: Option<PathBuf>,
    /// Directory of series files with `<stem>.labels.json` labels.
    #[arg(long)]
    pub dir: Option<PathBuf>,
    /// Score an existing event file instead of running the detector.
    #[arg(long, requires = "input")]
    pub events: Option<PathBuf>,
    /// Dataset name in the report; defaults to the file or directory name.
    #[arg(long)]
    pub name: Option<String>,
    #[arg(long, value_enum, default_value_t)]
    pub delimiter: Delimiter,
    #[command(flatten)]
    pub detector: DetectorArgs,
    /// Fixed thresholds searched for the best run (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub grid: Vec<f64>,
    /// JSON report path.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportPlotArgs {
    /// Trace written by `detect --trace`.
    #[arg(long)]
    pub trace: PathBuf,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    pub delimiter: Delimiter,
}
