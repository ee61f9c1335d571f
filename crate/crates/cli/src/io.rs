//! CSV/TSV ingestion, label files and line-delimited JSON.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use riocpd::correlation::SeriesFrame;
use serde::de::DeserializeOwned;

use crate::error::CliError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Delimiter {
    #[default]
    Comma,
    Tab,
}

impl Delimiter {
    pub fn byte(self) -> u8 {
        match self {
            Delimiter::Comma => b',',
            Delimiter::Tab => b'\t',
        }
    }
}

/// Streams numeric rows from a delimited file. A first record in which no
/// cell parses as a number is taken as the header.
pub struct RowReader {
    path: PathBuf,
    records: csv::StringRecordsIntoIter<Box<dyn std::io::Read>>,
    header: Option<Vec<String>>,
    pending: Option<(u64, Vec<f64>)>,
    width: usize,
}

fn parse_number(cell: &str) -> Option<f64> {
    let cell = cell.trim();
    // plain decimal notation only: no "inf"/"nan" spellings
    if cell.is_empty() || cell.bytes().any(|b| b.is_ascii_alphabetic() && b != b'e' && b != b'E') {
        return None;
    }
    cell.parse::<f64>().ok().filter(|v| v.is_finite())
}

impl RowReader {
    /// `-` reads standard input.
    pub fn open(path: &Path, delimiter: Delimiter) -> Result<Self, CliError> {
        let source: Box<dyn std::io::Read> = if path == Path::new("-") {
            Box::new(std::io::stdin())
        } else {
            Box::new(File::open(path).map_err(|e| CliError::io(path, e))?)
        };
        let records = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .delimiter(delimiter.byte())
            .from_reader(source)
            .into_records();
        let mut reader = Self {
            path: path.to_path_buf(),
            records,
            header: None,
            pending: None,
            width: 0,
        };
        if let Some(first) = reader.records.next() {
            let (row, record) = reader.record(first)?;
            if record.iter().all(|c| parse_number(c).is_none()) {
                reader.header = Some(record.iter().map(|c| c.trim().to_string()).collect());
                reader.width = record.len();
            } else {
                reader.width = record.len();
                reader.pending = Some((row, reader.numbers(row, &record)?));
            }
        }
        Ok(reader)
    }

    pub fn header(&self) -> Option<&[String]> {
        self.header.as_deref()
    }

    /// Number of columns, once known.
    pub fn width(&self) -> usize {
        self.width
    }

    fn record(&self, r: csv::Result<csv::StringRecord>) -> Result<(u64, csv::StringRecord), CliError> {
        match r {
            Ok(rec) => Ok((rec.position().map_or(0, |p| p.line()), rec)),
            Err(e) => Err(CliError::Parse {
                path: self.path.clone(),
                row: e.position().map_or(0, |p| p.line()),
                message: e.to_string(),
            }),
        }
    }

    fn numbers(&self, row: u64, record: &csv::StringRecord) -> Result<Vec<f64>, CliError> {
        if record.len() != self.width {
            return Err(CliError::Parse {
                path: self.path.clone(),
                row,
                message: format!("expected {} columns, found {}", self.width, record.len()),
            });
        }
        record
            .iter()
            .enumerate()
            .map(|(col, cell)| {
                parse_number(cell).ok_or_else(|| CliError::Parse {
                    path: self.path.clone(),
                    row,
                    message: format!("column {}: not a finite number: {cell:?}", col + 1),
                })
            })
            .collect()
    }
}

impl Iterator for RowReader {
    type Item = Result<Vec<f64>, CliError>;

    fn next(&mut self) -> Option<Self::Item> {
        if let Some((_, row)) = self.pending.take() {
            return Some(Ok(row));
        }
        let next = self.records.next()?;
        Some(self.record(next).and_then(|(row, rec)| self.numbers(row, &rec)))
    }
}

/// Reads a whole file into a frame, with column names when a header is present.
pub fn read_frame(path: &Path, delimiter: Delimiter) -> Result<(SeriesFrame, Option<Vec<String>>), CliError> {
    let mut reader = RowReader::open(path, delimiter)?;
    let mut values = Vec::new();
    for row in reader.by_ref() {
        values.extend(row?);
    }
    let m = reader.width();
    if m < 2 {
        return Err(CliError::Config(format!(
            "{}: need at least 2 series, found {m}",
            path.display()
        )));
    }
    let frame = SeriesFrame::new(m, values)?;
    Ok((frame, reader.header().map(<[String]>::to_vec)))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_reader(BufReader::new(file)).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        row: e.line() as u64,
        message: e.to_string(),
    })
}

pub fn read_labels(path: &Path) -> Result<Vec<usize>, CliError> {
    read_json(path)
}

/// Parses a line-delimited JSON file, skipping blank lines.
pub fn read_ndjson<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CliError> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| CliError::Parse {
            path: path.to_path_buf(),
            row: i as u64 + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

/// Buffered writer to a file, or stdout for `None` / `-`.
pub fn create_output(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    match path {
        Some(p) if p != Path::new("-") => {
            let file = File::create(p).map_err(|e| CliError::io(p, e))?;
            Ok(Box::new(BufWriter::new(file)))
        }
        _ => Ok(Box::new(BufWriter::new(std::io::stdout()))),
    }
}

pub fn write_frame(path: &Path, columns: &[String], frame: &SeriesFrame, delimiter: Delimiter) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = csv::WriterBuilder::new()
        .delimiter(delimiter.byte())
        .from_writer(BufWriter::new(file));
    let io_err = |e: csv::Error| CliError::io(path, std::io::Error::other(e));
    w.write_record(columns).map_err(io_err)?;
    for row in frame.rows() {
        w.write_record(row.iter().map(|v| v.to_string())).map_err(io_err)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::io(path, std::io::Error::other(e)))?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| CliError::io(path, e))
}

/// One labelled series from a dataset directory.
#[derive(Clone, Debug)]
pub struct NamedStream {
    pub name: String,
    pub frame: SeriesFrame,
    pub truth: Option<Vec<usize>>,
}

/// Loads every `*.csv` (or `*.tsv`) file in `dir`, sorted by name, with
/// labels from `<stem>.labels.json` or `<stem>.json` when present.
pub fn load_dir(dir: &Path, delimiter: Delimiter) -> Result<Vec<NamedStream>, CliError> {
    let ext = match delimiter {
        Delimiter::Comma => "csv",
        Delimiter::Tab => "tsv",
    };
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| CliError::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == ext))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::Config(format!("{}: no .{ext} files found", dir.display())));
    }
    let mut out = Vec::with_capacity(paths.len());
    for path in paths {
        let name = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
        let (frame, _) = read_frame(&path, delimiter)?;
        let truth = [format!("{name}.labels.json"), format!("{name}.json")]
            .iter()
            .map(|f| dir.join(f))
            .find(|p| p.is_file())
            .map(|p| {
                let labels = read_labels(&p)?;
                check_labels(&labels, frame.len(), &p)?;
                Ok::<_, CliError>(labels)
            })
            .transpose()?;
        out.push(NamedStream { name, frame, truth });
    }
    Ok(out)
}

/// Labels must index existing rows.
pub fn check_labels(labels: &[usize], len: usize, path: &Path) -> Result<(), CliError> {
    match labels.iter().find(|&&t| t >= len) {
        Some(t) => Err(CliError::Config(format!(
            "{}: label {t} is beyond the series length {len}",
            path.display()
        ))),
        None => Ok(()),
    }
}
