//! Global timeline construction and multimodal merging.
//!
//! Streams are shifted onto UNIX time by the trip start epoch, merged with a
//! backward-looking asof join (each base row picks the most recent row of
//! every other modality within a bounded tolerance), GPS gaps are imputed in
//! two stages (linear interpolation, then edge filling), and each row is
//! mapped to a video frame index from the video start epoch and frame rate.

use crate::ingest::{GpsFix, Modality, RawSensorStream, TripMeta};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AlignError {
    #[error("stream {0} is not sorted by timestamp")]
    UnsortedInput(Modality),
    #[error("duplicate modality in merge input: {0}")]
    DuplicateModality(Modality),
    #[error("all GPS slots are null; nothing to impute")]
    NoGpsData,
    #[error("need at least {needed} frames, got {got}")]
    TooFewFrames { needed: usize, got: usize },
    #[error("merge tolerance must be > 0, got {0}")]
    BadTolerance(f64),
}

/// One row of the merged multimodal timeline.
///
/// Sensor slots are `None` when no source row fell within the merge
/// tolerance; GPS slots may later be filled by [`impute_gps`], which then
/// sets `gps_imputed`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedFrame {
    /// Global UNIX seconds.
    pub t: f64,
    pub accel: Option<[f64; 3]>,
    pub linacc: Option<[f64; 3]>,
    pub gyro: Option<[f64; 3]>,
    pub mag: Option<[f64; 3]>,
    pub pitch: Option<f64>,
    pub yaw: Option<f64>,
    pub gps: Option<GpsFix>,
    pub gps_imputed: bool,
    pub frame_idx: Option<i64>,
}

impl AlignedFrame {
    fn empty(t: f64) -> Self {
        AlignedFrame {
            t,
            accel: None,
            linacc: None,
            gyro: None,
            mag: None,
            pitch: None,
            yaw: None,
            gps: None,
            gps_imputed: false,
            frame_idx: None,
        }
    }

    fn set_from(&mut self, stream: &RawSensorStream, row: usize) {
        let v = |c: usize| stream.channels[c].values[row];
        match stream.modality {
            Modality::Accelerometer => self.accel = Some([v(0), v(1), v(2)]),
            Modality::LinearAcceleration => self.linacc = Some([v(0), v(1), v(2)]),
            Modality::Gyroscope => self.gyro = Some([v(0), v(1), v(2)]),
            Modality::Magnetometer => self.mag = Some([v(0), v(1), v(2)]),
            Modality::Orientation => {
                self.pitch = Some(v(0));
                self.yaw = Some(v(1));
            }
            Modality::Gps => self.gps = Some(stream.gps_fix(row)),
        }
    }
}

/// Cadence summary of a frame sequence.
#[derive(Debug, Clone, Serialize)]
pub struct DtProfile {
    pub median_dt: f64,
    pub p95_dt: f64,
    /// Count of consecutive gaps larger than the configured threshold.
    pub gap_count: usize,
    pub effective_hz: f64,
}

/// Replace device-relative seconds with `start_epoch + t_rel`.
pub fn globalize_timestamps(mut stream: RawSensorStream, meta: &TripMeta) -> RawSensorStream {
    for t in &mut stream.t_rel {
        *t += meta.start_epoch;
    }
    stream
}

/// Backward-looking asof merge: the output has one frame per base row, and
/// each other modality contributes its most recent row with timestamp at or
/// before the base timestamp, provided the gap is within `tolerance`
/// seconds. Missing contributions leave the slot null.
pub fn asof_merge(
    base: &RawSensorStream,
    others: &[&RawSensorStream],
    tolerance: f64,
) -> Result<Vec<AlignedFrame>, AlignError> {
    if !(tolerance > 0.0) {
        return Err(AlignError::BadTolerance(tolerance));
    }
    let mut seen = vec![base.modality];
    for s in others {
        if seen.contains(&s.modality) {
            return Err(AlignError::DuplicateModality(s.modality));
        }
        seen.push(s.modality);
    }
    for s in std::iter::once(&base).chain(others.iter()) {
        if s.t_rel.windows(2).any(|w| w[1] <= w[0]) {
            return Err(AlignError::UnsortedInput(s.modality));
        }
    }

    let mut frames: Vec<AlignedFrame> = base
        .t_rel
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let mut f = AlignedFrame::empty(t);
            f.set_from(base, i);
            f
        })
        .collect();

    for other in others {
        let mut cursor = 0usize; // index of the next candidate row in `other`
        for frame in frames.iter_mut() {
            while cursor < other.len() && other.t_rel[cursor] <= frame.t {
                cursor += 1;
            }
            if cursor == 0 {
                continue; // no row at or before this frame yet
            }
            let row = cursor - 1;
            if frame.t - other.t_rel[row] <= tolerance {
                frame.set_from(other, row);
            }
        }
    }

    Ok(frames)
}

/// Two-stage GPS gap imputation.
///
/// Stage 1 linearly interpolates every numeric fix field across null runs
/// that sit between two real fixes; stage 2 back-fills leading nulls from
/// the first fix and forward-fills trailing nulls from the last. Frames
/// whose fix was synthesized get `gps_imputed = true`, which makes the
/// operation idempotent: a second pass finds no nulls and changes nothing.
pub fn impute_gps(mut frames: Vec<AlignedFrame>) -> Result<Vec<AlignedFrame>, AlignError> {
    let known: Vec<usize> = frames
        .iter()
        .enumerate()
        .filter(|(_, f)| f.gps.is_some())
        .map(|(i, _)| i)
        .collect();
    if known.is_empty() {
        return Err(AlignError::NoGpsData);
    }

    for pair in known.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if b - a < 2 {
            continue;
        }
        let (fa, fb) = (frames[a].gps.unwrap(), frames[b].gps.unwrap());
        let (ta, tb) = (frames[a].t, frames[b].t);
        for i in a + 1..b {
            let w = if tb > ta { (frames[i].t - ta) / (tb - ta) } else { 0.5 };
            let lerp = |x: f64, y: f64| x + w * (y - x);
            frames[i].gps = Some(GpsFix {
                lat: lerp(fa.lat, fb.lat),
                lon: lerp(fa.lon, fb.lon),
                alt: lerp(fa.alt, fb.alt),
                velocity: lerp(fa.velocity, fb.velocity),
                bearing: lerp(fa.bearing, fb.bearing),
                accuracy: lerp(fa.accuracy, fb.accuracy),
            });
            frames[i].gps_imputed = true;
        }
    }

    let first = *known.first().unwrap();
    let last = *known.last().unwrap();
    let first_fix = frames[first].gps.unwrap();
    for f in frames.iter_mut().take(first) {
        f.gps = Some(first_fix);
        f.gps_imputed = true;
    }
    let last_fix = frames[last].gps.unwrap();
    for f in frames.iter_mut().skip(last + 1) {
        f.gps = Some(last_fix);
        f.gps_imputed = true;
    }
    Ok(frames)
}

/// Assign video frame indices: `round((t − video_start_epoch) · fps)`, with
/// negative results (sensor rows before the video started) left null.
pub fn map_to_video_frames(mut frames: Vec<AlignedFrame>, meta: &TripMeta) -> Vec<AlignedFrame> {
    for f in frames.iter_mut() {
        let idx = ((f.t - meta.video_start_epoch) * meta.video_fps).round();
        f.frame_idx = if idx < 0.0 { None } else { Some(idx as i64) };
    }
    frames
}

/// Summarize consecutive time deltas of a frame sequence.
pub fn dt_profile(frames: &[AlignedFrame], gap_threshold: f64) -> Result<DtProfile, AlignError> {
    if frames.len() < 2 {
        return Err(AlignError::TooFewFrames { needed: 2, got: frames.len() });
    }
    let mut dts: Vec<f64> = frames.windows(2).map(|w| w[1].t - w[0].t).collect();
    let gap_count = dts.iter().filter(|&&dt| dt > gap_threshold).count();
    dts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median_dt = quantile_sorted(&dts, 0.5);
    let p95_dt = quantile_sorted(&dts, 0.95);
    Ok(DtProfile {
        median_dt,
        p95_dt,
        gap_count,
        effective_hz: 1.0 / median_dt,
    })
}

/// Linear-interpolation quantile of a sorted slice.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{Channel, RoadType};

    fn meta() -> TripMeta {
        TripMeta {
            trip_id: "t".into(),
            start_epoch: 1_700_000_000.0,
            road_type: RoadType::Highway,
            driver_id: "d".into(),
            vehicle_id: "v".into(),
            condition_tags: vec![],
            video_start_epoch: 1_700_000_000.0,
            video_fps: 30.0,
        }
    }

    fn stream(modality: Modality, t: Vec<f64>) -> RawSensorStream {
        let n = t.len();
        let channels = modality
            .channel_names()
            .iter()
            .map(|name| Channel { name: name.to_string(), values: vec![1.0; n] })
            .collect();
        RawSensorStream {
            modality,
            time_name: "Time (s)".into(),
            t_rel: t,
            channels,
            dropped_rows: 0,
        }
    }

    fn gps_stream(t: Vec<f64>) -> RawSensorStream {
        stream(Modality::Gps, t)
    }

    #[test]
    fn globalize_offsets_all_timestamps() {
        let s = globalize_timestamps(stream(Modality::Accelerometer, vec![0.0, 0.04]), &meta());
        assert_eq!(s.t_rel, vec![1_700_000_000.00, 1_700_000_000.04]);
        let empty = RawSensorStream {
            modality: Modality::Accelerometer,
            time_name: "Time (s)".into(),
            t_rel: vec![],
            channels: vec![],
            dropped_rows: 0,
        };
        assert!(globalize_timestamps(empty, &meta()).is_empty());
    }

    #[test]
    fn asof_backward_within_tolerance() {
        let base = stream(Modality::Accelerometer, vec![10.00, 10.04]);
        let gps = gps_stream(vec![9.5]);
        let frames = asof_merge(&base, &[&gps], 1.0).unwrap();
        assert_eq!(frames.len(), 2);
        assert!(frames[0].gps.is_some());
        assert!(frames[1].gps.is_some());
    }

    #[test]
    fn asof_excludes_beyond_tolerance() {
        let base = stream(Modality::Accelerometer, vec![10.0]);
        let gps = gps_stream(vec![8.9]);
        let frames = asof_merge(&base, &[&gps], 1.0).unwrap();
        assert!(frames[0].gps.is_none());
    }

    #[test]
    fn asof_exact_match_joins() {
        let base = stream(Modality::Accelerometer, vec![10.0]);
        let gps = gps_stream(vec![10.0]);
        let frames = asof_merge(&base, &[&gps], 1.0).unwrap();
        assert!(frames[0].gps.is_some());
    }

    #[test]
    fn asof_never_borrows_future_rows() {
        let base = stream(Modality::Accelerometer, vec![10.0]);
        let gps = gps_stream(vec![10.01]);
        let frames = asof_merge(&base, &[&gps], 5.0).unwrap();
        assert!(frames[0].gps.is_none());
    }

    #[test]
    fn asof_rejects_unsorted_and_duplicates() {
        let base = stream(Modality::Accelerometer, vec![1.0, 0.5]);
        let gps = gps_stream(vec![0.0]);
        assert!(matches!(
            asof_merge(&base, &[&gps], 1.0),
            Err(AlignError::UnsortedInput(_))
        ));
        let base = stream(Modality::Accelerometer, vec![0.0]);
        let g1 = gps_stream(vec![0.0]);
        let g2 = gps_stream(vec![0.0]);
        assert!(matches!(
            asof_merge(&base, &[&g1, &g2], 1.0),
            Err(AlignError::DuplicateModality(_))
        ));
    }

    fn frame_with_lat(t: f64, lat: Option<f64>) -> AlignedFrame {
        let mut f = AlignedFrame::empty(t);
        f.gps = lat.map(|lat| GpsFix {
            lat,
            lon: 0.0,
            alt: 0.0,
            velocity: 0.0,
            bearing: 0.0,
            accuracy: 1.0,
        });
        f
    }

    #[test]
    fn impute_interpolates_midpoint() {
        let frames = vec![
            frame_with_lat(0.0, Some(33.0)),
            frame_with_lat(1.0, None),
            frame_with_lat(2.0, Some(33.2)),
        ];
        let out = impute_gps(frames).unwrap();
        let lat = out[1].gps.unwrap().lat;
        assert!((lat - 33.1).abs() < 1e-12);
        assert!(out[1].gps_imputed);
        assert!(!out[0].gps_imputed && !out[2].gps_imputed);
    }

    #[test]
    fn impute_edge_fill_and_idempotence() {
        let frames = vec![
            frame_with_lat(0.0, None),
            frame_with_lat(1.0, None),
            frame_with_lat(2.0, None),
            frame_with_lat(3.0, Some(33.5)),
        ];
        let once = impute_gps(frames).unwrap();
        for f in &once[..3] {
            assert_eq!(f.gps.unwrap().lat, 33.5);
            assert!(f.gps_imputed);
        }
        let twice = impute_gps(once.clone()).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn impute_noop_without_nulls() {
        let frames = vec![frame_with_lat(0.0, Some(1.0)), frame_with_lat(1.0, Some(2.0))];
        let out = impute_gps(frames.clone()).unwrap();
        assert_eq!(out, frames);
        assert!(impute_gps(vec![frame_with_lat(0.0, None)]).is_err());
    }

    #[test]
    fn video_frame_mapping() {
        let m = meta();
        let frames = vec![
            AlignedFrame::empty(m.video_start_epoch),
            AlignedFrame::empty(m.video_start_epoch + 1.0),
            AlignedFrame::empty(m.video_start_epoch - 0.5),
        ];
        let out = map_to_video_frames(frames, &m);
        assert_eq!(out[0].frame_idx, Some(0));
        assert_eq!(out[1].frame_idx, Some(30));
        assert_eq!(out[2].frame_idx, None);
    }

    #[test]
    fn dt_profile_stats() {
        let frames: Vec<_> = [0.0, 0.1, 0.2, 0.3].iter().map(|&t| AlignedFrame::empty(t)).collect();
        let p = dt_profile(&frames, 0.5).unwrap();
        assert!((p.median_dt - 0.1).abs() < 1e-12);
        assert!((p.effective_hz - 10.0).abs() < 1e-9);
        assert_eq!(p.gap_count, 0);

        let frames: Vec<_> = [0.0, 0.1, 2.0].iter().map(|&t| AlignedFrame::empty(t)).collect();
        let p = dt_profile(&frames, 0.5).unwrap();
        assert_eq!(p.gap_count, 1);

        let frames: Vec<_> = (0..10).map(|i| AlignedFrame::empty(i as f64 * 0.25)).collect();
        let p = dt_profile(&frames, 0.5).unwrap();
        assert!((p.median_dt - 0.25).abs() < 1e-12);
        assert!((p.p95_dt - 0.25).abs() < 1e-12);

        assert!(dt_profile(&frames[..1], 0.5).is_err());
    }
}
