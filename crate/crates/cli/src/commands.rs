use std::io::Write;
use std::path::Path;
use std::time::Instant;

use riocpd::detector::{ChangeEvent, OnlineDetector, Threshold, TraceRow};
use riocpd::eval::{
    default_grid, match_detections, render_rows, run_benchmark, BenchmarkStream, Dataset, DetectionReport,
    EvalConfig, TableRow,
};
use riocpd::simulator::{
    default_magnitude, equicorrelation, flip_first_series, gaussian_regimes, simulate_springs, ChangeSpec,
    GaussianSegment, SpringConfig,
};
use serde::{Deserialize, Serialize};

use crate::args::{DetectArgs, EvalArgs, ExportPlotArgs, SimulateArgs};
use crate::error::CliError;
use crate::io::{self, NamedStream, RowReader};

/// One line of `detect` output per event.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub index: usize,
    pub cusum: f64,
    pub score: f64,
    pub window: [usize; 2],
}

impl From<&ChangeEvent> for EventRecord {
    fn from(e: &ChangeEvent) -> Self {
        Self {
            index: e.tau_hat,
            cusum: e.cusum_value,
            score: e.score,
            window: e.window_span,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub metric: String,
    pub window: usize,
    pub lag: usize,
    /// Threshold in effect at the end of the run (absent while calibrating).
    pub threshold: Option<f64>,
    pub rows: usize,
    pub windows: usize,
    pub events: usize,
    /// Raw index the next row would get.
    pub position: usize,
    pub runtime_seconds: f64,
}

#[derive(Serialize)]
struct SummaryRecord<'a> {
    summary: &'a Summary,
}

fn write_line<T: Serialize>(out: &mut dyn Write, value: &T, path: &Path) -> Result<(), CliError> {
    serde_json::to_writer(&mut *out, value).map_err(|e| CliError::io(path, std::io::Error::other(e)))?;
    out.write_all(b"\n").map_err(|e| CliError::io(path, e))
}

pub fn detect(args: &DetectArgs) -> Result<Summary, CliError> {
    let started = Instant::now();
    let resumed: Option<OnlineDetector> = match &args.resume {
        Some(_) if args.detector.any_set() => {
            return Err(CliError::Config(
                "--resume restores the saved configuration; detector flags cannot be combined with it".into(),
            ))
        }
        Some(p) => Some(io::read_json(p).map_err(|e| match e {
            CliError::Parse { path, message, .. } => {
                CliError::Config(format!("{}: not a saved detector state: {message}", path.display()))
            }
            other => other,
        })?),
        None => None,
    };
    let cfg = match &resumed {
        Some(det) => det.config().clone(),
        None => args.detector.config()?,
    };

    let reader = RowReader::open(&args.input, args.delimiter)?;
    let width = reader.width();
    if width < 2 {
        return Err(CliError::Config(format!(
            "{}: need at least 2 series, found {width}",
            args.input.display()
        )));
    }
    let mut det = match resumed {
        Some(det) if det.series_count() != width => {
            return Err(CliError::Config(format!(
                "saved state has {} series, input has {width}",
                det.series_count()
            )))
        }
        Some(det) => det,
        None => OnlineDetector::new(cfg.clone(), width)?,
    };

    let out_path = args.output.as_deref().unwrap_or(Path::new("-"));
    let mut out = io::create_output(args.output.as_deref())?;
    let mut trace = match &args.trace {
        Some(p) => Some((io::create_output(Some(p))?, p.as_path())),
        None => None,
    };
    let (mut rows, mut windows, mut events) = (0, 0, 0);
    for row in reader {
        let row = row?;
        rows += 1;
        let Some(w) = det.push(&row)? else { continue };
        windows += 1;
        if let (Some((t, path)), Some(r)) = (trace.as_mut(), TraceRow::from_outcome(&w)) {
            write_line(t.as_mut(), &r, path)?;
        }
        if let Some(e) = &w.outcome.event {
            events += 1;
            write_line(out.as_mut(), &EventRecord::from(e), out_path)?;
            out.flush().map_err(|e| CliError::io(out_path, e))?;
        }
    }
    if let Some((mut t, path)) = trace {
        t.flush().map_err(|e| CliError::io(path, e))?;
    }
    let summary = Summary {
        metric: cfg.metric.short_name().to_string(),
        window: cfg.window,
        lag: cfg.lag,
        threshold: det.state().threshold(),
        rows,
        windows,
        events,
        position: det.position(),
        runtime_seconds: started.elapsed().as_secs_f64(),
    };
    write_line(out.as_mut(), &SummaryRecord { summary: &summary }, out_path)?;
    out.flush().map_err(|e| CliError::io(out_path, e))?;
    if let Some(p) = &args.save_state {
        io::write_json(p, &det)?;
    }
    Ok(summary)
}

fn gaussian_boundaries(args: &SimulateArgs) -> Result<Vec<usize>, CliError> {
    let mut cps = if args.at.is_empty() {
        if args.segments == 0 || args.segments > args.length {
            return Err(CliError::Config(format!(
                "cannot split length {} into {} segments",
                args.length, args.segments
            )));
        }
        (1..args.segments).map(|i| i * args.length / args.segments).collect()
    } else {
        args.at.clone()
    };
    cps.sort_unstable();
    cps.dedup();
    if let Some(bad) = cps.iter().find(|&&c| c == 0 || c >= args.length) {
        return Err(CliError::Config(format!(
            "change index {bad} must lie strictly inside (0, {})",
            args.length
        )));
    }
    Ok(cps)
}

pub fn simulate(args: &SimulateArgs) -> Result<Vec<usize>, CliError> {
    let stream = match args.kind.spring_kind() {
        Some(kind) => {
            let cfg = SpringConfig {
                n_particles: args.particles,
                layout: args.layout.into(),
                ..SpringConfig::default()
            };
            let ats = if args.at.is_empty() { vec![args.length / 2] } else { args.at.clone() };
            let changes: Vec<ChangeSpec> = ats
                .iter()
                .map(|&at| ChangeSpec {
                    kind,
                    at,
                    magnitude: args.magnitude.unwrap_or(default_magnitude(kind)),
                })
                .collect();
            simulate_springs(&cfg, args.length, &changes, args.seed)?
        }
        None => {
            let cps = gaussian_boundaries(args)?;
            let a = equicorrelation(args.dims, args.rho);
            let b = flip_first_series(&a);
            let mut edges = vec![0];
            edges.extend(&cps);
            edges.push(args.length);
            let segments: Vec<GaussianSegment> = edges
                .windows(2)
                .enumerate()
                .map(|(i, e)| GaussianSegment {
                    length: e[1] - e[0],
                    correlation: if i % 2 == 0 { a.clone() } else { b.clone() },
                })
                .collect();
            gaussian_regimes(&segments, None, args.seed)?
        }
    };
    io::write_frame(&args.output, &stream.columns, &stream.frame, args.delimiter)?;
    let labels = args
        .labels
        .clone()
        .unwrap_or_else(|| args.output.with_extension("labels.json"));
    io::write_json(&labels, &stream.true_cps)?;
    Ok(stream.true_cps)
}

/// Report for an event file scored against labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventsReport {
    pub dataset: String,
    pub report: DetectionReport,
}

fn dataset_name(args: &EvalArgs) -> String {
    args.name.clone().unwrap_or_else(|| {
        args.input
            .as_deref()
            .or(args.dir.as_deref())
            .and_then(|p| p.file_stem())
            .map_or_else(|| "dataset".into(), |s| s.to_string_lossy().into_owned())
    })
}

fn read_events(path: &Path) -> Result<Vec<ChangeEvent>, CliError> {
    let lines: Vec<serde_json::Value> = io::read_ndjson(path)?;
    lines
        .into_iter()
        .enumerate()
        .filter(|(_, v)| v.get("summary").is_none())
        .map(|(i, v)| {
            let r: EventRecord = serde_json::from_value(v).map_err(|e| CliError::Parse {
                path: path.to_path_buf(),
                row: i as u64 + 1,
                message: e.to_string(),
            })?;
            Ok(ChangeEvent {
                tau_hat: r.index,
                cusum_value: r.cusum,
                score: r.score,
                window_span: r.window,
            })
        })
        .collect()
}

/// Output of `eval`: the JSON value written to `--output` and the table.
pub struct EvalOutput {
    pub json: serde_json::Value,
    pub table: String,
}

pub fn eval(args: &EvalArgs) -> Result<EvalOutput, CliError> {
    let cfg = args.detector.config()?;
    if args.grid.iter().any(|r| !(*r > 0.0)) {
        return Err(CliError::Config("grid thresholds must be positive".into()));
    }
    let name = dataset_name(args);
    let streams: Vec<NamedStream> = match (&args.input, &args.dir) {
        (Some(input), None) => {
            let labels_path = args
                .labels
                .as_deref()
                .ok_or_else(|| CliError::Config("--labels is required with --input".into()))?;
            let (frame, _) = io::read_frame(input, args.delimiter)?;
            let truth = io::read_labels(labels_path)?;
            io::check_labels(&truth, frame.len(), labels_path)?;
            vec![NamedStream {
                name: name.clone(),
                frame,
                truth: Some(truth),
            }]
        }
        (None, Some(dir)) => io::load_dir(dir, args.delimiter)?,
        _ => return Err(CliError::Config("give either --input with --labels, or --dir".into())),
    };

    if let Some(events_path) = &args.events {
        let events = read_events(events_path)?;
        let truth = streams[0].truth.as_deref().unwrap_or_default();
        let window = events
            .first()
            .map_or(cfg.window, |e| e.window_span[1] + 1 - e.window_span[0]);
        let report = DetectionReport::from_matching(&match_detections(&events, truth), &EvalConfig::new(window), 0.0);
        let row = TableRow {
            dataset: name.clone(),
            f1_default: report.f1,
            f1_best: report.f1,
            average_delay: report.average_delay,
            runtime_seconds: report.runtime_seconds,
        };
        let out = EventsReport { dataset: name, report };
        return Ok(EvalOutput {
            json: serde_json::to_value(&out).expect("report serializes"),
            table: render_rows(&[row]),
        });
    }

    let dataset = Dataset {
        name,
        streams: streams
            .into_iter()
            .map(|s| BenchmarkStream {
                frame: s.frame,
                truth: s.truth,
            })
            .collect(),
        default: cfg,
    };
    let grid: Vec<Threshold> = if args.grid.is_empty() {
        default_grid()
    } else {
        args.grid.iter().map(|&rho| Threshold::Fixed { rho }).collect()
    };
    let outcome = run_benchmark(std::slice::from_ref(&dataset), &grid)?;
    for (ds, why) in &outcome.skipped {
        eprintln!("warning: skipped {ds}: {why}");
    }
    let rows: Vec<TableRow> = outcome.entries.iter().map(TableRow::from).collect();
    Ok(EvalOutput {
        json: serde_json::to_value(&outcome).expect("outcome serializes"),
        table: render_rows(&rows),
    })
}

pub fn export_plot(args: &ExportPlotArgs) -> Result<usize, CliError> {
    if !args.trace.is_file() {
        return Err(CliError::Config(format!(
            "trace file {} not found; run `detect --trace` first",
            args.trace.display()
        )));
    }
    let rows: Vec<TraceRow> = io::read_ndjson(&args.trace)?;
    let out_path = args.output.as_deref().unwrap_or(Path::new("-"));
    let mut w = csv::WriterBuilder::new()
        .delimiter(args.delimiter.byte())
        .from_writer(io::create_output(args.output.as_deref())?);
    let err = |e: csv::Error| CliError::io(out_path, std::io::Error::other(e));
    w.write_record(["t", "d_t", "r_prev", "D", "y", "rho"]).map_err(err)?;
    for r in &rows {
        w.write_record([
            r.t.to_string(),
            r.distance.to_string(),
            r.radius.to_string(),
            r.score.to_string(),
            r.cusum.to_string(),
            r.threshold.map_or_else(String::new, |v| v.to_string()),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| CliError::io(out_path, e))?;
    Ok(rows.len())
}
