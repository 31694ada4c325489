//! Time axis, intervals and the multivariate series container.
//!
//! Every interval lives on a shared discrete sample axis and is half-open:
//! `[t_on, t_off)`. Adjacent intervals therefore share no samples.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("empty interval [{t_on}, {t_off})")]
    EmptyInterval { t_on: usize, t_off: usize },
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("non-numeric cell at row {row}, column `{col}`")]
    NonNumericCell { row: usize, col: String },
    #[error("series too short: {0} rows (need at least 2)")]
    TooShort(usize),
    #[error("duplicate channel `{0}`")]
    DuplicateChannel(String),
    #[error("channel `{channel}` has {got} samples, expected {expected}")]
    RaggedChannel {
        channel: String,
        got: usize,
        expected: usize,
    },
    #[error("sample period must be positive and finite, got {0}")]
    BadSamplePeriod(f64),
    #[error("empty event type")]
    EmptyEventType,
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Half-open span `[t_on, t_off)` of sample indices. Never empty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Interval {
    t_on: usize,
    t_off: usize,
}

impl Interval {
    pub fn new(t_on: usize, t_off: usize) -> Result<Self, ModelError> {
        if t_on < t_off {
            Ok(Self { t_on, t_off })
        } else {
            Err(ModelError::EmptyInterval { t_on, t_off })
        }
    }

    /// Panics on an empty span. Meant for literals in tests and fixtures.
    pub fn of(t_on: usize, t_off: usize) -> Self {
        Self::new(t_on, t_off).expect("non-empty interval")
    }

    pub fn t_on(&self) -> usize {
        self.t_on
    }

    pub fn t_off(&self) -> usize {
        self.t_off
    }

    pub fn len(&self) -> usize {
        self.t_off - self.t_on
    }

    /// Always false; present for API symmetry with `len`.
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, other: &Interval) -> bool {
        self.t_on <= other.t_on && other.t_off <= self.t_off
    }

    /// Smallest interval covering both.
    pub fn hull(&self, other: &Interval) -> Interval {
        Interval {
            t_on: self.t_on.min(other.t_on),
            t_off: self.t_off.max(other.t_off),
        }
    }

    pub fn intersection(&self, other: &Interval) -> Option<Interval> {
        Interval::new(self.t_on.max(other.t_on), self.t_off.min(other.t_off)).ok()
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.t_on, self.t_off)
    }
}

impl<'de> Deserialize<'de> for Interval {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            t_on: usize,
            t_off: usize,
        }
        let raw = Raw::deserialize(d)?;
        Interval::new(raw.t_on, raw.t_off).map_err(serde::de::Error::custom)
    }
}

/// Number of samples shared by both intervals.
pub fn interval_intersection_length(a: &Interval, b: &Interval) -> usize {
    a.t_off.min(b.t_off).saturating_sub(a.t_on.max(b.t_on))
}

/// Intersection over union, with the union measured as a set
/// (`|a| + |b| - |a ∩ b|`), not as the covering span.
pub fn iou(a: &Interval, b: &Interval) -> f64 {
    let inter = interval_intersection_length(a, b);
    let union = a.len() + b.len() - inter;
    inter as f64 / union as f64
}

/// Multivariate series with named channels, stored column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesFrame {
    channels: Vec<String>,
    columns: Vec<Vec<f64>>,
    sample_period: f64,
}

impl SeriesFrame {
    pub fn new(
        channels: Vec<String>,
        columns: Vec<Vec<f64>>,
        sample_period: f64,
    ) -> Result<Self, ModelError> {
        if !(sample_period.is_finite() && sample_period > 0.0) {
            return Err(ModelError::BadSamplePeriod(sample_period));
        }
        let mut seen = HashSet::new();
        for name in &channels {
            if !seen.insert(name.as_str()) {
                return Err(ModelError::DuplicateChannel(name.clone()));
            }
        }
        let len = columns.first().map_or(0, Vec::len);
        if len < 2 {
            return Err(ModelError::TooShort(len));
        }
        for (name, col) in channels.iter().zip(&columns) {
            if col.len() != len {
                return Err(ModelError::RaggedChannel {
                    channel: name.clone(),
                    got: col.len(),
                    expected: len,
                });
            }
            if let Some(row) = col.iter().position(|v| !v.is_finite()) {
                return Err(ModelError::NonNumericCell {
                    row: row + 1,
                    col: name.clone(),
                });
            }
        }
        if channels.len() != columns.len() {
            return Err(ModelError::RaggedChannel {
                channel: "<columns>".into(),
                got: columns.len(),
                expected: channels.len(),
            });
        }
        Ok(Self {
            channels,
            columns,
            sample_period,
        })
    }

    /// Number of time steps, `T`.
    pub fn len(&self) -> usize {
        self.columns[0].len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of channels, `C`.
    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn channels(&self) -> &[String] {
        &self.channels
    }

    pub fn sample_period(&self) -> f64 {
        self.sample_period
    }

    pub fn channel_index(&self, name: &str) -> Option<usize> {
        self.channels.iter().position(|c| c == name)
    }

    pub fn channel(&self, name: &str) -> Option<&[f64]> {
        self.channel_index(name).map(|i| self.columns[i].as_slice())
    }

    pub fn column(&self, index: usize) -> &[f64] {
        &self.columns[index]
    }

    pub fn value(&self, t: usize, c: usize) -> f64 {
        self.columns[c][t]
    }

    /// The whole time axis as an interval.
    pub fn span(&self) -> Interval {
        Interval::of(0, self.len())
    }

    /// Applies `x -> a*x + b` to one channel.
    pub fn map_channel(&self, name: &str, f: impl Fn(f64) -> f64) -> Option<SeriesFrame> {
        let idx = self.channel_index(name)?;
        let mut out = self.clone();
        out.columns[idx].iter_mut().for_each(|v| *v = f(*v));
        Some(out)
    }
}

/// A labelled event occurrence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthEvent {
    #[serde(flatten)]
    pub interval: Interval,
    pub event_type: String,
}

impl GroundTruthEvent {
    pub fn new(interval: Interval, event_type: impl Into<String>) -> Result<Self, ModelError> {
        let event_type = event_type.into();
        if event_type.is_empty() {
            return Err(ModelError::EmptyEventType);
        }
        Ok(Self {
            interval,
            event_type,
        })
    }
}

#[derive(Debug, Clone)]
pub struct CsvOptions {
    pub delimiter: u8,
    /// Column holding timestamps. Only used to estimate the sample period.
    pub timestamp_column: Option<String>,
    pub sample_period: f64,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            delimiter: b',',
            timestamp_column: None,
            sample_period: 1.0,
        }
    }
}

/// Loads the named columns of a CSV file with a header row. Rows are kept in
/// file order and map one-to-one onto sample indices; row numbers in errors
/// are 1-based and count data rows only.
pub fn load_csv(
    path: impl AsRef<Path>,
    channel_spec: &[String],
    options: &CsvOptions,
) -> Result<SeriesFrame, ModelError> {
    let file = std::fs::File::open(path)?;
    read_csv(file, channel_spec, options)
}

pub fn read_csv<R: std::io::Read>(
    reader: R,
    channel_spec: &[String],
    options: &CsvOptions,
) -> Result<SeriesFrame, ModelError> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(options.delimiter)
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let indices = channel_spec
        .iter()
        .map(|name| find(name).ok_or_else(|| ModelError::MissingColumn(name.clone())))
        .collect::<Result<Vec<_>, _>>()?;
    let ts_index = match &options.timestamp_column {
        Some(name) => Some(find(name).ok_or_else(|| ModelError::MissingColumn(name.clone()))?),
        None => None,
    };

    let mut columns = vec![Vec::new(); indices.len()];
    let mut stamps = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        for ((col, &idx), name) in columns.iter_mut().zip(&indices).zip(channel_spec) {
            let cell = record.get(idx).unwrap_or("");
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => col.push(v),
                _ => {
                    return Err(ModelError::NonNumericCell {
                        row: row + 1,
                        col: name.clone(),
                    })
                }
            }
        }
        if let Some(idx) = ts_index {
            if let Some(v) = record.get(idx).and_then(|c| c.parse::<f64>().ok()) {
                stamps.push(v);
            }
        }
    }
    let len = columns.first().map_or(0, Vec::len);
    if len < 2 {
        return Err(ModelError::TooShort(len));
    }
    let mut period = options.sample_period;
    if stamps.len() == len {
        let est = (stamps[len - 1] - stamps[0]) / (len - 1) as f64;
        if est.is_finite() && est > 0.0 {
            period = est;
        }
    }
    SeriesFrame::new(channel_spec.to_vec(), columns, period)
}
