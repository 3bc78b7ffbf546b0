//! Parsing and validation of per-modality sensor logs.
//!
//! A trip on disk is a directory with one CSV per modality plus `meta.json`:
//!
//! ```text
//! trip/
//!   meta.json
//!   accelerometer.csv
//!   linear_acceleration.csv
//!   gyroscope.csv
//!   magnetometer.csv
//!   orientation.csv
//!   gps.csv
//! ```
//!
//! Each CSV has a fixed header (see [`Modality::expected_header`]); the match
//! is exact after whitespace trim. Data rows containing cells that do not
//! parse to a finite float are dropped and counted. Rows are ordered by
//! timestamp and duplicate timestamps collapse to the last occurrence, so a
//! parsed stream always has strictly increasing `t_rel`.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("missing file: {0}")]
    MissingFile(String),
    #[error("schema mismatch in {path}: expected columns {expected:?}, found {found:?}")]
    SchemaMismatch {
        path: String,
        expected: Vec<String>,
        found: Vec<String>,
    },
    #[error("no valid data rows in {0}")]
    EmptyStream(String),
    #[error("duplicate modality: {0}")]
    DuplicateModality(Modality),
    #[error("invalid trip metadata: {0}")]
    InvalidMeta(String),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Sensor modalities recorded during a trip.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Accelerometer,
    LinearAcceleration,
    Gyroscope,
    Magnetometer,
    Orientation,
    Gps,
}

impl Modality {
    pub const ALL: [Modality; 6] = [
        Modality::Accelerometer,
        Modality::LinearAcceleration,
        Modality::Gyroscope,
        Modality::Magnetometer,
        Modality::Orientation,
        Modality::Gps,
    ];

    /// Snake-case name; doubles as the CSV file stem inside a trip directory.
    pub fn name(&self) -> &'static str {
        match self {
            Modality::Accelerometer => "accelerometer",
            Modality::LinearAcceleration => "linear_acceleration",
            Modality::Gyroscope => "gyroscope",
            Modality::Magnetometer => "magnetometer",
            Modality::Orientation => "orientation",
            Modality::Gps => "gps",
        }
    }

    /// Exact header row of the modality's CSV, time column first.
    pub fn expected_header(&self) -> Vec<&'static str> {
        let mut h = vec!["Time (s)"];
        h.extend_from_slice(self.channel_names());
        h
    }

    /// Value columns following the time column.
    pub fn channel_names(&self) -> &'static [&'static str] {
        match self {
            Modality::Accelerometer => &[
                "Acceleration x (m/s^2)",
                "Acceleration y (m/s^2)",
                "Acceleration z (m/s^2)",
            ],
            Modality::LinearAcceleration => &[
                "Linear Acceleration x (m/s^2)",
                "Linear Acceleration y (m/s^2)",
                "Linear Acceleration z (m/s^2)",
            ],
            Modality::Gyroscope => &[
                "Gyroscope x (rad/s)",
                "Gyroscope y (rad/s)",
                "Gyroscope z (rad/s)",
            ],
            Modality::Magnetometer => &[
                "Magnetic field x (uT)",
                "Magnetic field y (uT)",
                "Magnetic field z (uT)",
            ],
            Modality::Orientation => &["Pitch (rad)", "Yaw (rad)"],
            Modality::Gps => &[
                "Latitude (deg)",
                "Longitude (deg)",
                "Altitude (m)",
                "Velocity (m/s)",
                "Bearing (deg)",
                "Accuracy (m)",
            ],
        }
    }

    /// Advisory sampling rate used only for the cadence warning in
    /// [`validate_trip`]; the pipeline itself is cadence-agnostic.
    pub fn nominal_hz(&self) -> f64 {
        match self {
            Modality::Gps => 1.0,
            _ => 25.0,
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Road category of a trip.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoadType {
    Secondary,
    Highway,
}

/// Trip-level metadata loaded from `meta.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TripMeta {
    pub trip_id: String,
    /// Trip start as UNIX seconds; every stream's `t_rel` offsets from this.
    pub start_epoch: f64,
    pub road_type: RoadType,
    pub driver_id: String,
    pub vehicle_id: String,
    #[serde(default)]
    pub condition_tags: Vec<String>,
    /// UNIX seconds of video frame 0.
    pub video_start_epoch: f64,
    #[serde(default = "default_fps")]
    pub video_fps: f64,
}

fn default_fps() -> f64 {
    30.0
}

impl TripMeta {
    pub fn validate(&self) -> Result<(), IngestError> {
        if self.trip_id.is_empty() {
            return Err(IngestError::InvalidMeta("trip_id is empty".into()));
        }
        if !(self.start_epoch > 0.0) {
            return Err(IngestError::InvalidMeta(format!(
                "start_epoch must be > 0, got {}",
                self.start_epoch
            )));
        }
        if !(self.video_fps > 0.0) {
            return Err(IngestError::InvalidMeta(format!(
                "video_fps must be > 0, got {}",
                self.video_fps
            )));
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self, IngestError> {
        if !path.is_file() {
            return Err(IngestError::MissingFile(path.display().to_string()));
        }
        let meta: TripMeta = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        meta.validate()?;
        Ok(meta)
    }
}

/// One GPS sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpsFix {
    pub lat: f64,
    pub lon: f64,
    pub alt: f64,
    /// Receiver-reported ground speed in m/s.
    pub velocity: f64,
    pub bearing: f64,
    pub accuracy: f64,
}

impl GpsFix {
    pub fn is_valid(&self) -> bool {
        self.lat.is_finite()
            && self.lon.is_finite()
            && (-90.0..=90.0).contains(&self.lat)
            && (-180.0..=180.0).contains(&self.lon)
            && self.accuracy >= 0.0
    }
}

/// A named value column of a sensor stream.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    pub name: String,
    pub values: Vec<f64>,
}

/// One modality's time series in device-relative seconds.
///
/// Invariants after parsing: `t_rel` strictly increasing, every channel the
/// same length as `t_rel`, all values finite.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSensorStream {
    pub modality: Modality,
    /// Name of the time column; `"Time (s)"` until [`rename_time_columns`].
    pub time_name: String,
    pub t_rel: Vec<f64>,
    pub channels: Vec<Channel>,
    /// Data rows discarded because a cell did not parse to a finite float.
    pub dropped_rows: usize,
}

impl RawSensorStream {
    pub fn len(&self) -> usize {
        self.t_rel.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t_rel.is_empty()
    }

    pub fn channel(&self, name: &str) -> Option<&Channel> {
        self.channels.iter().find(|c| c.name == name)
    }

    /// GPS streams only: view row `i` as a fix.
    pub fn gps_fix(&self, i: usize) -> GpsFix {
        debug_assert_eq!(self.modality, Modality::Gps);
        GpsFix {
            lat: self.channels[0].values[i],
            lon: self.channels[1].values[i],
            alt: self.channels[2].values[i],
            velocity: self.channels[3].values[i],
            bearing: self.channels[4].values[i],
            accuracy: self.channels[5].values[i],
        }
    }
}

/// Parse one modality CSV into a validated stream.
///
/// Rows are sorted by timestamp; duplicate timestamps keep the last
/// occurrence; rows with unparseable or non-finite cells are dropped and
/// counted in `dropped_rows`.
pub fn parse_sensor_log(path: &Path, modality: Modality) -> Result<RawSensorStream, IngestError> {
    if !path.is_file() {
        return Err(IngestError::MissingFile(path.display().to_string()));
    }
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_path(path)?;

    let expected: Vec<String> = modality
        .expected_header()
        .iter()
        .map(|s| s.to_string())
        .collect();
    let found: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if found != expected {
        return Err(IngestError::SchemaMismatch {
            path: path.display().to_string(),
            expected,
            found,
        });
    }

    let width = expected.len();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut dropped = 0usize;
    for record in reader.records() {
        let record = record?;
        if record.len() != width {
            dropped += 1;
            continue;
        }
        let mut row = Vec::with_capacity(width);
        let mut ok = true;
        for cell in record.iter() {
            match cell.trim().parse::<f64>() {
                Ok(v) if v.is_finite() => row.push(v),
                _ => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            rows.push(row);
        } else {
            dropped += 1;
        }
    }

    if rows.is_empty() {
        return Err(IngestError::EmptyStream(path.display().to_string()));
    }

    // Order by time; stable sort keeps file order within equal timestamps so
    // "keep last" below retains the most recent sensor flush.
    rows.sort_by(|a, b| a[0].partial_cmp(&b[0]).unwrap());
    let mut deduped: Vec<Vec<f64>> = Vec::with_capacity(rows.len());
    for row in rows {
        if deduped.last().map(|last| last[0]) == Some(row[0]) {
            *deduped.last_mut().unwrap() = row;
        } else {
            deduped.push(row);
        }
    }

    let t_rel: Vec<f64> = deduped.iter().map(|r| r[0]).collect();
    let channels = modality
        .channel_names()
        .iter()
        .enumerate()
        .map(|(i, name)| Channel {
            name: name.to_string(),
            values: deduped.iter().map(|r| r[i + 1]).collect(),
        })
        .collect();

    Ok(RawSensorStream {
        modality,
        time_name: "Time (s)".to_string(),
        t_rel,
        channels,
        dropped_rows: dropped,
    })
}

/// Re-serialize a stream to the modality CSV format. Float formatting uses
/// the shortest round-trip representation, so parse → write → parse is
/// lossless.
pub fn write_sensor_log(stream: &RawSensorStream, path: &Path) -> Result<(), IngestError> {
    let mut writer = csv::Writer::from_path(path)?;
    let mut header = vec!["Time (s)".to_string()];
    header.extend(stream.modality.channel_names().iter().map(|s| s.to_string()));
    writer.write_record(&header)?;
    for i in 0..stream.len() {
        let mut record = vec![format!("{}", stream.t_rel[i])];
        for ch in &stream.channels {
            record.push(format!("{}", ch.values[i]));
        }
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

/// Tag every stream's time column as `t_<modality>` and prefix channel names
/// that collide across streams.
pub fn rename_time_columns(
    mut streams: Vec<RawSensorStream>,
) -> Result<Vec<RawSensorStream>, IngestError> {
    let mut seen = Vec::new();
    for s in &streams {
        if seen.contains(&s.modality) {
            return Err(IngestError::DuplicateModality(s.modality));
        }
        seen.push(s.modality);
    }

    let mut name_counts = std::collections::HashMap::<String, usize>::new();
    for s in &streams {
        for ch in &s.channels {
            *name_counts.entry(ch.name.clone()).or_default() += 1;
        }
    }

    for s in &mut streams {
        s.time_name = format!("t_{}", s.modality.name());
        for ch in &mut s.channels {
            if name_counts[&ch.name] > 1 {
                ch.name = format!("{}_{}", s.modality.name(), ch.name);
            }
        }
    }
    Ok(streams)
}

/// Per-modality summary inside a [`ValidationReport`].
#[derive(Debug, Clone, Serialize)]
pub struct ModalityReport {
    pub modality: Modality,
    pub rows: usize,
    pub dropped_rows: usize,
    pub span_s: f64,
    pub median_interval_s: f64,
}

/// Report-only trip validation: row counts, spans, cadences, and warnings.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub trip_id: String,
    pub modalities: Vec<ModalityReport>,
    pub warnings: Vec<String>,
}

/// How far the observed span of one modality may fall short of another's
/// before a warning is emitted.
pub const SPAN_MISMATCH_WARN_S: f64 = 5.0;

/// Cadence warning triggers when observed and nominal rate differ by more
/// than this factor either way.
pub const CADENCE_WARN_FACTOR: f64 = 10.0;

pub fn validate_trip(meta: &TripMeta, streams: &[RawSensorStream]) -> ValidationReport {
    let mut warnings = Vec::new();
    if streams.is_empty() {
        warnings.push("trip contains no modality streams".to_string());
    }

    let mut modalities = Vec::new();
    for s in streams {
        let span = if s.len() >= 2 {
            s.t_rel[s.len() - 1] - s.t_rel[0]
        } else {
            0.0
        };
        let median_interval = if s.len() >= 2 {
            let mut dts: Vec<f64> = s.t_rel.windows(2).map(|w| w[1] - w[0]).collect();
            dts.sort_by(|a, b| a.partial_cmp(b).unwrap());
            median_of_sorted(&dts)
        } else {
            0.0
        };
        if median_interval > 0.0 {
            let observed_hz = 1.0 / median_interval;
            let ratio = observed_hz / s.modality.nominal_hz();
            if ratio > CADENCE_WARN_FACTOR || ratio < 1.0 / CADENCE_WARN_FACTOR {
                warnings.push(format!(
                    "{}: observed cadence {:.3} Hz is far from nominal {:.1} Hz",
                    s.modality,
                    observed_hz,
                    s.modality.nominal_hz()
                ));
            }
        }
        modalities.push(ModalityReport {
            modality: s.modality,
            rows: s.len(),
            dropped_rows: s.dropped_rows,
            span_s: span,
            median_interval_s: median_interval,
        });
    }

    if modalities.len() >= 2 {
        let max_span = modalities.iter().map(|m| m.span_s).fold(f64::MIN, f64::max);
        let min_span = modalities.iter().map(|m| m.span_s).fold(f64::MAX, f64::min);
        if max_span - min_span > SPAN_MISMATCH_WARN_S {
            warnings.push(format!(
                "modality time spans differ by {:.1} s (max {:.1} s, min {:.1} s)",
                max_span - min_span,
                max_span,
                min_span
            ));
        }
    }

    ValidationReport {
        trip_id: meta.trip_id.clone(),
        modalities,
        warnings,
    }
}

fn median_of_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return 0.0;
    }
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}
