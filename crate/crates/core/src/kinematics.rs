//! Kinematic feature derivation: geodesic distances and GPS speed, low-pass
//! filtered IMU channels, jerk, curvature proxy, and robust outlier flags.
//!
//! Speed is computed at GPS sample level (distance between consecutive fixes
//! over their time interval, times 3.6) and attached to sensor frames by a
//! backward scan, so each frame carries the speed of its most recent GPS
//! sample. Outlier flags from the Hampel filter are computed on that same
//! GPS-level speed series and propagate to frames the same way.

use crate::align::AlignedFrame;
use crate::ingest::GpsFix;
use crate::scalar::Real;
use num_traits::Float;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum KinematicsError {
    #[error("invalid coordinate: lat {lat}, lon {lon}")]
    InvalidCoordinate { lat: f64, lon: f64 },
    #[error("need at least {needed} GPS fixes, got {got}")]
    TooFewFixes { needed: usize, got: usize },
    #[error("empty series")]
    EmptySeries,
}

/// Mean Earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

/// Speeds over intervals shorter than this carry the previous value instead
/// of dividing by a vanishing Δt.
pub const DEGENERATE_DT_S: f64 = 1e-3;

/// Below this speed the curvature proxy is pinned to zero and flagged.
pub const LOW_SPEED_KMH: f64 = 1.0;

/// Great-circle distance between two (lat, lon) pairs in degrees, on a
/// sphere of radius [`EARTH_RADIUS_M`]. Result in meters.
pub fn haversine_m<T: Real>(lat1: T, lon1: T, lat2: T, lon2: T) -> T {
    let rad = T::of(std::f64::consts::PI / 180.0);
    let (phi1, phi2) = (lat1 * rad, lat2 * rad);
    let dphi = (lat2 - lat1) * rad;
    let dlambda = (lon2 - lon1) * rad;
    let two = T::of(2.0);
    let a = (dphi / two).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / two).sin().powi(2);
    let c = two * a.sqrt().atan2((T::one() - a).sqrt());
    T::of(EARTH_RADIUS_M) * c
}

/// Validated geodesic distance between two fixes, in meters.
pub fn geodesic_distance(a: &GpsFix, b: &GpsFix) -> Result<f64, KinematicsError> {
    for fix in [a, b] {
        if !fix.is_valid() {
            return Err(KinematicsError::InvalidCoordinate { lat: fix.lat, lon: fix.lon });
        }
    }
    Ok(haversine_m(a.lat, a.lon, b.lat, b.lon))
}

/// Speed in km/h from a distance in meters over an interval in seconds.
pub fn eq_speed_kmh(distance_m: f64, dt_s: f64) -> f64 {
    distance_m / dt_s * 3.6
}

/// GPS-level speed series produced by [`compute_speed`].
#[derive(Debug, Clone)]
pub struct SpeedSeries {
    /// Timestamps of the source fixes.
    pub t: Vec<f64>,
    pub kmh: Vec<f64>,
    /// True where Δt fell below [`DEGENERATE_DT_S`] and the previous speed
    /// was carried.
    pub degenerate: Vec<bool>,
    /// Hampel outlier flags; empty until [`flag_speed_outliers`] runs.
    pub outlier: Vec<bool>,
}

/// Instantaneous speeds between consecutive fixes. The first sample
/// back-fills from the second so the series has one entry per fix.
pub fn compute_speed(fixes: &[(f64, GpsFix)]) -> Result<SpeedSeries, KinematicsError> {
    if fixes.len() < 2 {
        return Err(KinematicsError::TooFewFixes { needed: 2, got: fixes.len() });
    }
    let n = fixes.len();
    let mut kmh = vec![0.0; n];
    let mut degenerate = vec![false; n];
    for i in 1..n {
        let dt = fixes[i].0 - fixes[i - 1].0;
        if dt < DEGENERATE_DT_S {
            kmh[i] = kmh[i - 1];
            degenerate[i] = true;
        } else {
            let dist = geodesic_distance(&fixes[i - 1].1, &fixes[i].1)?;
            kmh[i] = eq_speed_kmh(dist, dt);
        }
    }
    kmh[0] = kmh[1];
    degenerate[0] = degenerate[1];
    Ok(SpeedSeries {
        t: fixes.iter().map(|(t, _)| *t).collect(),
        kmh,
        degenerate,
        outlier: Vec::new(),
    })
}

/// Run the Hampel detector over the speed series and store the flags.
pub fn flag_speed_outliers(series: &mut SpeedSeries, window: usize, n_mad: f64) {
    series.outlier = hampel_flag(&series.kmh, window, n_mad);
}

/// Single-pole low-pass filter over an irregularly sampled series:
/// `y[i] = y[i-1] + α (x[i] − y[i-1])` with `α = Δt / (RC + Δt)` and
/// `RC = 1 / (2π · cutoff_hz)`. The first output equals the first input.
pub fn lowpass_filter<T: Real>(series: &[(T, T)], cutoff_hz: T) -> Result<Vec<T>, KinematicsError> {
    assert!(cutoff_hz > T::zero(), "cutoff must be positive");
    if series.is_empty() {
        return Err(KinematicsError::EmptySeries);
    }
    let rc = T::one() / (T::of(2.0 * std::f64::consts::PI) * cutoff_hz);
    let mut out = Vec::with_capacity(series.len());
    out.push(series[0].1);
    for i in 1..series.len() {
        let dt = series[i].0 - series[i - 1].0;
        let prev = out[i - 1];
        let y = if dt > T::zero() {
            let alpha = dt / (rc + dt);
            prev + alpha * (series[i].1 - prev)
        } else {
            prev
        };
        out.push(y);
    }
    Ok(out)
}

/// Backward-difference jerk per axis plus its magnitude. The first frame has
/// zero jerk; non-positive Δt rows (degenerate, excluded by contract) also
/// produce zero.
pub fn compute_jerk(t: &[f64], accel: &[[f64; 3]]) -> (Vec<[f64; 3]>, Vec<f64>) {
    debug_assert_eq!(t.len(), accel.len());
    let n = t.len();
    let mut jerk = vec![[0.0; 3]; n];
    let mut mag = vec![0.0; n];
    for i in 1..n {
        let dt = t[i] - t[i - 1];
        if dt > 0.0 {
            for k in 0..3 {
                jerk[i][k] = (accel[i][k] - accel[i - 1][k]) / dt;
            }
        }
        mag[i] = (jerk[i][0].powi(2) + jerk[i][1].powi(2) + jerk[i][2].powi(2)).sqrt();
    }
    (jerk, mag)
}

/// Curvature proxy κ = yaw_rate / speed, with speed converted to m/s.
/// Below [`LOW_SPEED_KMH`] the proxy is zero and the low-speed flag set.
pub fn curvature_proxy(yaw_rate: f64, speed_kmh: f64) -> (f64, bool) {
    if speed_kmh < LOW_SPEED_KMH {
        (0.0, true)
    } else {
        (yaw_rate / (speed_kmh / 3.6), false)
    }
}

/// Scale factor from MAD to a Gaussian-consistent σ estimate.
const MAD_SCALE: f64 = 1.4826;

/// Hampel outlier flags over a centered window (truncated at the edges).
///
/// A point is flagged when it deviates from the window median by more than
/// `n_mad · 1.4826 · MAD`. When the window MAD is zero the point is flagged
/// iff it differs from the median at all.
pub fn hampel_flag<T: Real>(series: &[T], window: usize, n_mad: T) -> Vec<bool> {
    assert!(window >= 3 && window % 2 == 1, "window must be odd and >= 3");
    let n = series.len();
    let half = window / 2;
    let mut flags = vec![false; n];
    let mut buf: Vec<T> = Vec::with_capacity(window);
    for i in 0..n {
        let start = i.saturating_sub(half);
        let end = (i + half + 1).min(n);
        buf.clear();
        buf.extend_from_slice(&series[start..end]);
        let med = median_inplace(&mut buf);
        buf.clear();
        for &x in &series[start..end] {
            buf.push((x - med).abs());
        }
        let mad = median_inplace(&mut buf);
        let dev = (series[i] - med).abs();
        flags[i] = if mad > T::zero() {
            dev > n_mad * T::of(MAD_SCALE) * mad
        } else {
            dev > T::zero()
        };
    }
    flags
}

fn median_inplace<T: Real>(buf: &mut [T]) -> T {
    buf.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let n = buf.len();
    if n % 2 == 1 {
        buf[n / 2]
    } else {
        (buf[n / 2 - 1] + buf[n / 2]) / T::of(2.0)
    }
}

/// Per-frame derived features.
#[derive(Debug, Clone)]
pub struct KinematicRecord {
    pub t: f64,
    pub calc_speed_kmh: f64,
    pub filt_accel: [f64; 3],
    pub filt_gyro: [f64; 3],
    pub jerk: [f64; 3],
    pub jerk_mag: f64,
    pub curvature: f64,
    pub pitch: f64,
    pub yaw: f64,
    pub speed_outlier: bool,
    pub lowspeed_flag: bool,
    pub speed_degenerate: bool,
}

/// Filter and flag configuration for [`derive_records`].
#[derive(Debug, Clone)]
pub struct KinematicsConfig {
    pub cutoff_hz: f64,
    pub hampel_window: usize,
    pub hampel_nmad: f64,
}

impl Default for KinematicsConfig {
    fn default() -> Self {
        KinematicsConfig { cutoff_hz: 2.0, hampel_window: 7, hampel_nmad: 3.0 }
    }
}

/// Derive one [`KinematicRecord`] per aligned frame.
///
/// `gps_points` is the globalized raw GPS stream (not the per-frame held
/// fixes): speeds are computed between consecutive GPS samples and attached
/// to frames by most-recent-at-or-before timestamp; frames before the first
/// sample back-fill from it.
pub fn derive_records(
    frames: &[AlignedFrame],
    gps_points: &[(f64, GpsFix)],
    cfg: &KinematicsConfig,
) -> Result<Vec<KinematicRecord>, KinematicsError> {
    if frames.is_empty() {
        return Ok(Vec::new());
    }
    let mut speeds = compute_speed(gps_points)?;
    flag_speed_outliers(&mut speeds, cfg.hampel_window, cfg.hampel_nmad);

    let t: Vec<f64> = frames.iter().map(|f| f.t).collect();
    let accel = fill_triplet(frames, |f| f.accel, "accelerometer");
    let gyro = fill_triplet(frames, |f| f.gyro, "gyroscope");
    let pitch = fill_scalar(frames, |f| f.pitch, "pitch");
    let yaw = fill_scalar(frames, |f| f.yaw, "yaw");

    let mut filt_accel = vec![[0.0; 3]; frames.len()];
    let mut filt_gyro = vec![[0.0; 3]; frames.len()];
    for k in 0..3 {
        let series: Vec<(f64, f64)> = t.iter().copied().zip(accel.iter().map(|a| a[k])).collect();
        for (i, y) in lowpass_filter(&series, cfg.cutoff_hz)?.into_iter().enumerate() {
            filt_accel[i][k] = y;
        }
        let series: Vec<(f64, f64)> = t.iter().copied().zip(gyro.iter().map(|g| g[k])).collect();
        for (i, y) in lowpass_filter(&series, cfg.cutoff_hz)?.into_iter().enumerate() {
            filt_gyro[i][k] = y;
        }
    }

    let (jerk, jerk_mag) = compute_jerk(&t, &filt_accel);

    let mut records = Vec::with_capacity(frames.len());
    let mut cursor = 0usize;
    for i in 0..frames.len() {
        while cursor + 1 < speeds.t.len() && speeds.t[cursor + 1] <= t[i] {
            cursor += 1;
        }
        // frames before the first GPS sample borrow its back-filled speed
        let j = if speeds.t[cursor] <= t[i] || cursor == 0 { cursor } else { 0 };
        let speed = speeds.kmh[j];
        let (curvature, lowspeed_flag) = curvature_proxy(filt_gyro[i][1], speed);
        records.push(KinematicRecord {
            t: t[i],
            calc_speed_kmh: speed,
            filt_accel: filt_accel[i],
            filt_gyro: filt_gyro[i],
            jerk: jerk[i],
            jerk_mag: jerk_mag[i],
            curvature,
            pitch: pitch[i],
            yaw: yaw[i],
            speed_outlier: speeds.outlier[j],
            lowspeed_flag,
            speed_degenerate: speeds.degenerate[j],
        });
    }
    Ok(records)
}

/// Comparison of the computed speed against the GPS velocity channel.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CrosscheckReport {
    /// Frames with a GPS fix that entered the comparison.
    pub compared: usize,
    /// Frames skipped from the robust statistics because their speed sample
    /// carried a Hampel outlier flag.
    pub excluded_outliers: usize,
    pub median_kmh: f64,
    pub p95_kmh: f64,
    /// Maximum over all compared frames, outliers included.
    pub max_kmh: f64,
    pub exceed_count: usize,
    pub tolerance_kmh: f64,
    pub warning: Option<String>,
}

/// Per-frame |calc_speed − velocity·3.6| summary. Median, p95, and the
/// exceed count are computed over non-outlier frames; the max keeps every
/// compared frame so spikes stay visible.
pub fn crosscheck_speed(
    frames: &[AlignedFrame],
    records: &[KinematicRecord],
    tolerance_kmh: f64,
) -> CrosscheckReport {
    debug_assert_eq!(frames.len(), records.len());
    let mut kept: Vec<f64> = Vec::new();
    let mut compared = 0usize;
    let mut excluded = 0usize;
    let mut max_kmh = 0.0f64;
    for (f, r) in frames.iter().zip(records) {
        let Some(gps) = f.gps else { continue };
        if !gps.velocity.is_finite() {
            continue;
        }
        compared += 1;
        let diff = (r.calc_speed_kmh - gps.velocity * 3.6).abs();
        max_kmh = max_kmh.max(diff);
        if r.speed_outlier {
            excluded += 1;
        } else {
            kept.push(diff);
        }
    }
    let warning = if compared == 0 {
        Some("no GPS velocity values available for cross-check".to_string())
    } else {
        None
    };
    kept.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q = |p: f64| -> f64 {
        if kept.is_empty() {
            return 0.0;
        }
        let pos = p * (kept.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        kept[lo] + (pos - lo as f64) * (kept[hi] - kept[lo])
    };
    CrosscheckReport {
        compared,
        excluded_outliers: excluded,
        median_kmh: q(0.5),
        p95_kmh: q(0.95),
        max_kmh,
        exceed_count: kept.iter().filter(|&&d| d > tolerance_kmh).count(),
        tolerance_kmh,
        warning,
    }
}

fn fill_triplet(
    frames: &[AlignedFrame],
    get: impl Fn(&AlignedFrame) -> Option<[f64; 3]>,
    what: &str,
) -> Vec<[f64; 3]> {
    fill_series(frames, get, [0.0; 3], what)
}

fn fill_scalar(
    frames: &[AlignedFrame],
    get: impl Fn(&AlignedFrame) -> Option<f64>,
    what: &str,
) -> Vec<f64> {
    fill_series(frames, get, 0.0, what)
}

/// Leading nulls back-fill from the first present value, later nulls
/// forward-fill; a channel with no values at all becomes `default`.
fn fill_series<V: Copy>(
    frames: &[AlignedFrame],
    get: impl Fn(&AlignedFrame) -> Option<V>,
    default: V,
    what: &str,
) -> Vec<V> {
    let first = frames.iter().find_map(&get);
    let Some(first) = first else {
        log::warn!("{what} channel entirely missing; substituting zeros");
        return vec![default; frames.len()];
    };
    let mut last = first;
    frames
        .iter()
        .map(|f| {
            if let Some(v) = get(f) {
                last = v;
            }
            last
        })
        .collect()
}
