//! Two-tier deterministic behaviour labelling.
//!
//! Tier one evaluates eight independent threshold predicates over a
//! kinematic record; tier two maps the detected sub-behaviours onto
//! Normal / Aggressive / Risky with severity resolution
//! Aggressive > Risky > Normal. An empty detection set maps to Unlabelled.
//!
//! Thresholds live in a [`RuleSet`] that serializes to JSON so deployments
//! can adjust per road type; the defaults are the reference values. Jerk
//! thresholds in the event detectors apply to the absolute per-axis value
//! (braking onset produces large negative jerk), "jerk" in the axis-free
//! rows means the jerk magnitude, gyro and pitch thresholds are rad/s and
//! rad, and speed ranges are inclusive on both ends.

use crate::kinematics::KinematicRecord;
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RulesError {
    #[error("non-finite input in field {0}")]
    NonFiniteInput(&'static str),
    #[error("invalid ruleset: {0}")]
    InvalidRuleSet(String),
}

/// Threshold configuration for sub-behaviour detection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RuleSet {
    pub speeding_kmh: f64,
    pub jerk_event: f64,
    pub accel_event: f64,
    pub pitch_event: f64,
    pub drift_gyro_y: f64,
    pub drift_speed_range: [f64; 2],
    pub sharp_turn_gyro: f64,
    pub inconsistent_jerk: f64,
    pub inconsistent_accel_eps: f64,
    pub inconsistent_speed_range: [f64; 2],
    pub steady_speed_range: [f64; 2],
    pub steady_jerk_mag: f64,
    pub idle_speed: f64,
    pub idle_jerk: f64,
}

impl Default for RuleSet {
    fn default() -> Self {
        RuleSet {
            speeding_kmh: 70.0,
            jerk_event: 25.0,
            accel_event: 2.5,
            pitch_event: 0.12,
            drift_gyro_y: 0.6,
            drift_speed_range: [5.0, 60.0],
            sharp_turn_gyro: 1.0,
            inconsistent_jerk: 12.0,
            inconsistent_accel_eps: 0.5,
            inconsistent_speed_range: [10.0, 40.0],
            steady_speed_range: [20.0, 50.0],
            steady_jerk_mag: 7.0,
            idle_speed: 10.0,
            idle_jerk: 3.0,
        }
    }
}

impl RuleSet {
    pub fn from_file(path: &std::path::Path) -> Result<Self, std::io::Error> {
        let text = std::fs::read_to_string(path)?;
        let rules: RuleSet = serde_json::from_str(&text)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
        rules
            .validate()
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e.to_string()))?;
        Ok(rules)
    }

    pub fn validate(&self) -> Result<(), RulesError> {
        let positive = [
            ("speeding_kmh", self.speeding_kmh),
            ("jerk_event", self.jerk_event),
            ("accel_event", self.accel_event),
            ("pitch_event", self.pitch_event),
            ("drift_gyro_y", self.drift_gyro_y),
            ("sharp_turn_gyro", self.sharp_turn_gyro),
            ("inconsistent_jerk", self.inconsistent_jerk),
            ("steady_jerk_mag", self.steady_jerk_mag),
            ("idle_speed", self.idle_speed),
            ("idle_jerk", self.idle_jerk),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(RulesError::InvalidRuleSet(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(self.inconsistent_accel_eps >= 0.0) {
            return Err(RulesError::InvalidRuleSet(format!(
                "inconsistent_accel_eps must be >= 0, got {}",
                self.inconsistent_accel_eps
            )));
        }
        for (name, range) in [
            ("drift_speed_range", self.drift_speed_range),
            ("inconsistent_speed_range", self.inconsistent_speed_range),
            ("steady_speed_range", self.steady_speed_range),
        ] {
            if !(range[0] < range[1]) {
                return Err(RulesError::InvalidRuleSet(format!(
                    "{name} must satisfy low < high, got {range:?}"
                )));
            }
        }
        Ok(())
    }
}

/// Fine-grained threshold-defined driving events.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SubBehaviour {
    Speeding,
    SuddenAcceleration,
    HardBraking,
    LaneDrifting,
    SharpTurn,
    InconsistentSpeed,
    SteadyDriving,
    Idle,
}

impl SubBehaviour {
    pub const ALL: [SubBehaviour; 8] = [
        SubBehaviour::Speeding,
        SubBehaviour::SuddenAcceleration,
        SubBehaviour::HardBraking,
        SubBehaviour::LaneDrifting,
        SubBehaviour::SharpTurn,
        SubBehaviour::InconsistentSpeed,
        SubBehaviour::SteadyDriving,
        SubBehaviour::Idle,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SubBehaviour::Speeding => "Speeding",
            SubBehaviour::SuddenAcceleration => "SuddenAcceleration",
            SubBehaviour::HardBraking => "HardBraking",
            SubBehaviour::LaneDrifting => "LaneDrifting",
            SubBehaviour::SharpTurn => "SharpTurn",
            SubBehaviour::InconsistentSpeed => "InconsistentSpeed",
            SubBehaviour::SteadyDriving => "SteadyDriving",
            SubBehaviour::Idle => "Idle",
        }
    }

    fn bit(&self) -> u8 {
        1 << (*self as u8)
    }
}

impl fmt::Display for SubBehaviour {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Compact set of sub-behaviours. Iteration follows the declaration order
/// of [`SubBehaviour::ALL`]; serialization joins names with semicolons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub struct SubBehaviourSet(u8);

impl SubBehaviourSet {
    pub fn empty() -> Self {
        SubBehaviourSet(0)
    }

    pub fn insert(&mut self, s: SubBehaviour) {
        self.0 |= s.bit();
    }

    pub fn contains(&self, s: SubBehaviour) -> bool {
        self.0 & s.bit() != 0
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn len(&self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn iter(&self) -> impl Iterator<Item = SubBehaviour> + '_ {
        SubBehaviour::ALL.into_iter().filter(|s| self.contains(*s))
    }

    /// All 256 possible sets, for exhaustive enumeration in tests.
    pub fn enumerate_all() -> impl Iterator<Item = SubBehaviourSet> {
        (0u16..256).map(|bits| SubBehaviourSet(bits as u8))
    }

    /// Semicolon-joined names in declaration order; empty string when empty.
    pub fn to_csv_field(&self) -> String {
        self.iter().map(|s| s.name()).collect::<Vec<_>>().join(";")
    }

    pub fn from_csv_field(field: &str) -> Option<Self> {
        let mut set = SubBehaviourSet::empty();
        for part in field.split(';').filter(|p| !p.is_empty()) {
            let sub = SubBehaviour::ALL.into_iter().find(|s| s.name() == part)?;
            set.insert(sub);
        }
        Some(set)
    }
}

impl FromIterator<SubBehaviour> for SubBehaviourSet {
    fn from_iter<I: IntoIterator<Item = SubBehaviour>>(iter: I) -> Self {
        let mut set = SubBehaviourSet::empty();
        for s in iter {
            set.insert(s);
        }
        set
    }
}

/// Coarse behaviour classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PrimaryBehaviour {
    Normal,
    Aggressive,
    Risky,
    Unlabelled,
}

impl PrimaryBehaviour {
    /// The three supervised classes, in the fixed index order used by the
    /// baselines (Normal = 0, Aggressive = 1, Risky = 2).
    pub const CLASSES: [PrimaryBehaviour; 3] = [
        PrimaryBehaviour::Normal,
        PrimaryBehaviour::Aggressive,
        PrimaryBehaviour::Risky,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            PrimaryBehaviour::Normal => "Normal",
            PrimaryBehaviour::Aggressive => "Aggressive",
            PrimaryBehaviour::Risky => "Risky",
            PrimaryBehaviour::Unlabelled => "Unlabelled",
        }
    }

    pub fn class_index(&self) -> Option<usize> {
        match self {
            PrimaryBehaviour::Normal => Some(0),
            PrimaryBehaviour::Aggressive => Some(1),
            PrimaryBehaviour::Risky => Some(2),
            PrimaryBehaviour::Unlabelled => None,
        }
    }
}

impl fmt::Display for PrimaryBehaviour {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[inline]
fn in_range(v: f64, range: [f64; 2]) -> bool {
    v >= range[0] && v <= range[1]
}

/// Evaluate the eight detection predicates independently over one record.
pub fn detect_sub_behaviours(
    record: &KinematicRecord,
    rules: &RuleSet,
) -> Result<SubBehaviourSet, RulesError> {
    let speed = record.calc_speed_kmh;
    let accel_x = record.filt_accel[0];
    let gyro_y = record.filt_gyro[1];
    let gyro_z = record.filt_gyro[2];
    let jerk_x = record.jerk[0];
    let jerk_mag = record.jerk_mag;
    let pitch = record.pitch;
    for (name, v) in [
        ("calc_speed_kmh", speed),
        ("accel_x", accel_x),
        ("gyro_y", gyro_y),
        ("gyro_z", gyro_z),
        ("jerk_x", jerk_x),
        ("jerk_mag", jerk_mag),
        ("pitch", pitch),
    ] {
        if !v.is_finite() {
            return Err(RulesError::NonFiniteInput(name));
        }
    }

    let mut set = SubBehaviourSet::empty();
    if speed > rules.speeding_kmh {
        set.insert(SubBehaviour::Speeding);
    }
    if jerk_x.abs() > rules.jerk_event && accel_x > rules.accel_event && pitch < -rules.pitch_event
    {
        set.insert(SubBehaviour::SuddenAcceleration);
    }
    if jerk_x.abs() > rules.jerk_event && accel_x < -rules.accel_event && pitch > rules.pitch_event
    {
        set.insert(SubBehaviour::HardBraking);
    }
    if gyro_y.abs() > rules.drift_gyro_y && in_range(speed, rules.drift_speed_range) {
        set.insert(SubBehaviour::LaneDrifting);
    }
    if gyro_y.abs() > rules.sharp_turn_gyro || gyro_z.abs() > rules.sharp_turn_gyro {
        set.insert(SubBehaviour::SharpTurn);
    }
    if jerk_mag > rules.inconsistent_jerk
        && accel_x.abs() < rules.inconsistent_accel_eps
        && in_range(speed, rules.inconsistent_speed_range)
    {
        set.insert(SubBehaviour::InconsistentSpeed);
    }
    if in_range(speed, rules.steady_speed_range) && jerk_mag < rules.steady_jerk_mag {
        set.insert(SubBehaviour::SteadyDriving);
    }
    if speed < rules.idle_speed && jerk_mag < rules.idle_jerk {
        set.insert(SubBehaviour::Idle);
    }
    Ok(set)
}

/// Primary class a single sub-behaviour belongs to.
pub fn sub_to_primary(sub: SubBehaviour) -> PrimaryBehaviour {
    match sub {
        SubBehaviour::Speeding
        | SubBehaviour::SuddenAcceleration
        | SubBehaviour::HardBraking
        | SubBehaviour::LaneDrifting => PrimaryBehaviour::Aggressive,
        SubBehaviour::SharpTurn | SubBehaviour::InconsistentSpeed => PrimaryBehaviour::Risky,
        SubBehaviour::SteadyDriving | SubBehaviour::Idle => PrimaryBehaviour::Normal,
    }
}

/// Map a detection set to its primary class with severity resolution
/// Aggressive > Risky > Normal; the empty set is Unlabelled.
pub fn map_primary(subs: SubBehaviourSet) -> PrimaryBehaviour {
    if subs.is_empty() {
        return PrimaryBehaviour::Unlabelled;
    }
    let mut best = PrimaryBehaviour::Normal;
    for sub in subs.iter() {
        let p = sub_to_primary(sub);
        best = match (best, p) {
            (_, PrimaryBehaviour::Aggressive) | (PrimaryBehaviour::Aggressive, _) => {
                PrimaryBehaviour::Aggressive
            }
            (_, PrimaryBehaviour::Risky) | (PrimaryBehaviour::Risky, _) => PrimaryBehaviour::Risky,
            _ => best,
        };
    }
    best
}

/// The highest-severity member of a set, used for the sub-behaviour ×
/// primary contingency in the validation statistics. `None` when empty.
pub fn dominant_sub(subs: SubBehaviourSet) -> Option<SubBehaviour> {
    let primary = map_primary(subs);
    subs.iter().find(|s| sub_to_primary(*s) == primary)
}

/// Stateless per-frame labelling of a whole trip.
pub fn label_trip(
    records: &[KinematicRecord],
    rules: &RuleSet,
) -> Result<Vec<(SubBehaviourSet, PrimaryBehaviour)>, RulesError> {
    records
        .iter()
        .map(|r| {
            let subs = detect_sub_behaviours(r, rules)?;
            Ok((subs, map_primary(subs)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(speed: f64) -> KinematicRecord {
        KinematicRecord {
            t: 0.0,
            calc_speed_kmh: speed,
            filt_accel: [0.0; 3],
            filt_gyro: [0.0; 3],
            jerk: [0.0; 3],
            jerk_mag: 0.0,
            curvature: 0.0,
            pitch: 0.0,
            yaw: 0.0,
            speed_outlier: false,
            lowspeed_flag: false,
            speed_degenerate: false,
        }
    }

    fn detect(r: &KinematicRecord) -> SubBehaviourSet {
        detect_sub_behaviours(r, &RuleSet::default()).unwrap()
    }

    #[test]
    fn speeding_only() {
        let mut r = record(75.0);
        r.jerk_mag = 0.0;
        let subs = detect(&r);
        assert_eq!(subs.iter().collect::<Vec<_>>(), vec![SubBehaviour::Speeding]);
    }

    #[test]
    fn steady_driving() {
        let mut r = record(30.0);
        r.jerk_mag = 5.0;
        let subs = detect(&r);
        assert_eq!(subs.iter().collect::<Vec<_>>(), vec![SubBehaviour::SteadyDriving]);
    }

    #[test]
    fn idle() {
        let mut r = record(8.0);
        r.jerk_mag = 2.0;
        let subs = detect(&r);
        assert_eq!(subs.iter().collect::<Vec<_>>(), vec![SubBehaviour::Idle]);
    }

    #[test]
    fn multiple_conditions_fire() {
        let mut r = record(75.0);
        r.filt_gyro[1] = 1.2;
        let subs = detect(&r);
        assert!(subs.contains(SubBehaviour::Speeding));
        assert!(subs.contains(SubBehaviour::SharpTurn));
        // 75 km/h is outside the drift speed range
        assert!(!subs.contains(SubBehaviour::LaneDrifting));
        assert_eq!(subs.len(), 2);
    }

    #[test]
    fn braking_uses_absolute_jerk() {
        let mut r = record(45.0);
        r.jerk = [-30.0, 0.0, 0.0];
        r.jerk_mag = 30.0;
        r.filt_accel[0] = -3.0;
        r.pitch = 0.2;
        assert!(detect(&r).contains(SubBehaviour::HardBraking));
    }

    #[test]
    fn sudden_acceleration_needs_all_three() {
        let mut r = record(40.0);
        r.jerk = [30.0, 0.0, 0.0];
        r.jerk_mag = 30.0;
        r.filt_accel[0] = 3.0;
        r.pitch = -0.2;
        assert!(detect(&r).contains(SubBehaviour::SuddenAcceleration));
        r.pitch = 0.0;
        assert!(!detect(&r).contains(SubBehaviour::SuddenAcceleration));
    }

    #[test]
    fn non_finite_input_is_an_error() {
        let mut r = record(f64::NAN);
        r.calc_speed_kmh = f64::NAN;
        assert!(matches!(
            detect_sub_behaviours(&r, &RuleSet::default()),
            Err(RulesError::NonFiniteInput(_))
        ));
    }

    #[test]
    fn primary_mapping_and_severity() {
        assert_eq!(
            map_primary([SubBehaviour::Speeding].into_iter().collect()),
            PrimaryBehaviour::Aggressive
        );
        assert_eq!(
            map_primary([SubBehaviour::SharpTurn, SubBehaviour::SteadyDriving].into_iter().collect()),
            PrimaryBehaviour::Risky
        );
        assert_eq!(map_primary(SubBehaviourSet::empty()), PrimaryBehaviour::Unlabelled);
    }

    #[test]
    fn severity_exhaustive_over_all_subsets() {
        // oracle: recompute the expected class from scratch for every one of
        // the 256 subsets
        for set in SubBehaviourSet::enumerate_all() {
            let has = |p: PrimaryBehaviour| set.iter().any(|s| sub_to_primary(s) == p);
            let expected = if set.is_empty() {
                PrimaryBehaviour::Unlabelled
            } else if has(PrimaryBehaviour::Aggressive) {
                PrimaryBehaviour::Aggressive
            } else if has(PrimaryBehaviour::Risky) {
                PrimaryBehaviour::Risky
            } else {
                PrimaryBehaviour::Normal
            };
            assert_eq!(map_primary(set), expected, "set {set:?}");
            if let Some(d) = dominant_sub(set) {
                assert_eq!(sub_to_primary(d), expected);
            }
        }
    }

    #[test]
    fn label_trip_shape_and_determinism() {
        let records: Vec<_> = (0..100).map(|i| record(60.0 + i as f64 * 0.5)).collect();
        let rules = RuleSet::default();
        let a = label_trip(&records, &rules).unwrap();
        let b = label_trip(&records, &rules).unwrap();
        assert_eq!(a.len(), records.len());
        assert_eq!(a, b);
        for (r, (_, primary)) in records.iter().zip(&a) {
            if r.calc_speed_kmh > 70.0 {
                assert_eq!(*primary, PrimaryBehaviour::Aggressive);
            }
        }
    }

    #[test]
    fn raising_speeding_threshold_is_monotone() {
        let records: Vec<_> = (0..200).map(|i| record(i as f64)).collect();
        let mut low = RuleSet::default();
        low.speeding_kmh = 60.0;
        let mut high = RuleSet::default();
        high.speeding_kmh = 90.0;
        let count = |rules: &RuleSet| {
            label_trip(&records, rules)
                .unwrap()
                .iter()
                .filter(|(s, _)| s.contains(SubBehaviour::Speeding))
                .count()
        };
        assert!(count(&high) <= count(&low));
    }

    #[test]
    fn subset_csv_round_trip() {
        let set: SubBehaviourSet =
            [SubBehaviour::Idle, SubBehaviour::Speeding].into_iter().collect();
        let field = set.to_csv_field();
        assert_eq!(field, "Speeding;Idle");
        assert_eq!(SubBehaviourSet::from_csv_field(&field), Some(set));
        assert_eq!(SubBehaviourSet::from_csv_field(""), Some(SubBehaviourSet::empty()));
        assert_eq!(SubBehaviourSet::from_csv_field("Nope"), None);
    }

    #[test]
    fn ruleset_json_round_trip_and_validation() {
        let rules = RuleSet::default();
        let json = serde_json::to_string(&rules).unwrap();
        let back: RuleSet = serde_json::from_str(&json).unwrap();
        assert_eq!(rules, back);
        // partial files fall back to defaults
        let partial: RuleSet = serde_json::from_str(r#"{"speeding_kmh": 50.0}"#).unwrap();
        assert_eq!(partial.speeding_kmh, 50.0);
        assert_eq!(partial.idle_jerk, rules.idle_jerk);

        let mut bad = RuleSet::default();
        bad.steady_speed_range = [50.0, 20.0];
        assert!(bad.validate().is_err());
        bad = RuleSet::default();
        bad.jerk_event = 0.0;
        assert!(bad.validate().is_err());
    }
}
