//! Turn-around time to distance conversion, delay calibration, timestamp
//! quantization and the clock-precision feasibility bound.
//!
//! A measured turn-around time is modelled as `T = alpha + time_prop`, where
//! `alpha` is a distance-independent internal delay and `time_prop = D / c`
//! covers the propagation path of length `D`. In [`RangingMode::RoundTrip`]
//! the path is there and back, so the tower distance is `D / 2`; in
//! [`RangingMode::OneWay`] the whole path is taken as the distance.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Propagation speed used throughout, m/s.
pub const SPEED_OF_LIGHT: f64 = 3.0e8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TimingError {
    #[error("turn-around time {turnaround:e} s is shorter than the fixed delay {alpha:e} s")]
    NegativeInterval { turnaround: f64, alpha: f64 },
    #[error("calibration yields a negative delay ({0:e} s)")]
    NegativeDelay(f64),
    #[error("invalid timing model: {0}")]
    InvalidModel(&'static str),
    #[error("range must be positive, got {0}")]
    NonPositiveRange(f64),
    #[error("percent error is undefined for an actual value of zero")]
    ZeroReference,
    #[error("anchor distance must be non-negative, got {0}")]
    NegativeAnchor(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RangingMode {
    /// Distance is half the propagation path.
    #[default]
    RoundTrip,
    /// Distance is the full propagation path.
    OneWay,
}

impl RangingMode {
    fn path_factor(self) -> f64 {
        match self {
            Self::RoundTrip => 0.5,
            Self::OneWay => 1.0,
        }
    }
}

impl fmt::Display for RangingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::RoundTrip => "round_trip",
            Self::OneWay => "one_way",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimingModel {
    /// Constant internal delay subtracted from every turn-around time, s.
    #[serde(default)]
    pub alpha: f64,
    /// Propagation speed, m/s.
    #[serde(default = "default_speed")]
    pub c: f64,
    #[serde(default)]
    pub mode: RangingMode,
    /// Timestamp resolution in seconds; zero means exact timestamps.
    #[serde(default)]
    pub clock_resolution: f64,
}

fn default_speed() -> f64 {
    SPEED_OF_LIGHT
}

impl Default for TimingModel {
    fn default() -> Self {
        Self { alpha: 0.0, c: SPEED_OF_LIGHT, mode: RangingMode::RoundTrip, clock_resolution: 0.0 }
    }
}

impl TimingModel {
    pub fn new(alpha: f64, c: f64, mode: RangingMode, clock_resolution: f64) -> Result<Self, TimingError> {
        let m = Self { alpha, c, mode, clock_resolution };
        m.validate()?;
        Ok(m)
    }

    pub fn one_way() -> Self {
        Self { mode: RangingMode::OneWay, ..Self::default() }
    }

    pub fn with_alpha(self, alpha: f64) -> Self {
        Self { alpha, ..self }
    }

    pub fn with_resolution(self, clock_resolution: f64) -> Self {
        Self { clock_resolution, ..self }
    }

    pub fn validate(&self) -> Result<(), TimingError> {
        if !(self.c > 0.0) || !self.c.is_finite() {
            return Err(TimingError::InvalidModel("propagation speed must be positive"));
        }
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return Err(TimingError::InvalidModel("delay must be non-negative"));
        }
        if !(self.clock_resolution >= 0.0) || !self.clock_resolution.is_finite() {
            return Err(TimingError::InvalidModel("clock resolution must be non-negative"));
        }
        Ok(())
    }
}

/// Tower distance for a measured turn-around time.
pub fn distance_from_turnaround(turnaround: f64, model: &TimingModel) -> Result<f64, TimingError> {
    if turnaround < model.alpha {
        return Err(TimingError::NegativeInterval { turnaround, alpha: model.alpha });
    }
    Ok((turnaround - model.alpha) * model.c * model.mode.path_factor())
}

/// Fixed delay that maps `anchor_turnaround` onto `anchor_distance` under the
/// model's speed and mode. The model's own `alpha` is ignored.
pub fn calibrate_delay(
    anchor_turnaround: f64,
    anchor_distance: f64,
    model: &TimingModel,
) -> Result<f64, TimingError> {
    if !(anchor_distance >= 0.0) {
        return Err(TimingError::NegativeAnchor(anchor_distance));
    }
    let alpha = anchor_turnaround - anchor_distance / (model.c * model.mode.path_factor());
    if alpha < 0.0 {
        return Err(TimingError::NegativeDelay(alpha));
    }
    Ok(alpha)
}

/// Truncates `t` down to a multiple of `resolution`. A zero resolution leaves
/// `t` untouched.
///
/// The multiple is corrected for rounding in `t / resolution` so that the
/// result never exceeds `t` and re-quantizing is a no-op.
pub fn quantize(t: f64, resolution: f64) -> f64 {
    if resolution == 0.0 {
        return t;
    }
    let mut ticks = (t / resolution).floor();
    if ticks * resolution > t {
        ticks -= 1.0;
    } else if (ticks + 1.0) * resolution <= t {
        ticks += 1.0;
    }
    ticks * resolution
}

/// Whether a clock can resolve the propagation delay over a given range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FeasibilityReport {
    pub range: f64,
    /// `range / c`, the propagation delay that must be resolved, s.
    pub required_precision: f64,
    pub available_precision: f64,
    pub feasible: bool,
}

impl fmt::Display for FeasibilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "range {} m: required {:.3e} s, available {:e} s, {}",
            self.range,
            self.required_precision,
            self.available_precision,
            if self.feasible { "feasible" } else { "NOT feasible" }
        )
    }
}

pub fn required_precision(range: f64, c: f64, available: f64) -> Result<FeasibilityReport, TimingError> {
    if !(range > 0.0) || !range.is_finite() {
        return Err(TimingError::NonPositiveRange(range));
    }
    if !(c > 0.0) {
        return Err(TimingError::InvalidModel("propagation speed must be positive"));
    }
    if !(available >= 0.0) {
        return Err(TimingError::InvalidModel("clock resolution must be non-negative"));
    }
    let required = range / c;
    Ok(FeasibilityReport {
        range,
        required_precision: required,
        available_precision: available,
        feasible: available <= required,
    })
}

/// `(actual - calculated) / actual * 100`.
pub fn percent_error(actual: f64, calculated: f64) -> Result<f64, TimingError> {
    if actual == 0.0 {
        return Err(TimingError::ZeroReference);
    }
    Ok((actual - calculated) / actual * 100.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table_model() -> TimingModel {
        TimingModel::one_way().with_alpha(7.58e-4)
    }

    #[test]
    fn first_table_row() {
        let d = distance_from_turnaround(7.58014e-4, &table_model()).unwrap();
        assert!((d - 4.2).abs() < 1e-6, "{d}");
    }

    #[test]
    fn zero_propagation() {
        for mode in [RangingMode::OneWay, RangingMode::RoundTrip] {
            let m = TimingModel { mode, ..table_model() };
            assert_eq!(distance_from_turnaround(7.58e-4, &m).unwrap(), 0.0);
        }
    }

    #[test]
    fn round_trip_halves() {
        let m = TimingModel { mode: RangingMode::RoundTrip, ..table_model() };
        let d = distance_from_turnaround(7.58e-4 + 2e-8, &m).unwrap();
        assert!((d - 3.0).abs() < 1e-6, "{d}");
    }

    #[test]
    fn turnaround_below_delay_is_error() {
        let err = distance_from_turnaround(7.0e-4, &table_model()).unwrap_err();
        assert!(matches!(err, TimingError::NegativeInterval { .. }));
    }

    #[test]
    fn calibration_examples() {
        let alpha = calibrate_delay(7.58014e-4, 4.2, &TimingModel::one_way()).unwrap();
        assert!((alpha - 7.58e-4).abs() < 1e-18, "{alpha:e}");
        let m = TimingModel::one_way().with_alpha(alpha);
        assert!((distance_from_turnaround(7.58041e-4, &m).unwrap() - 12.3).abs() < 1e-6);
        assert!((distance_from_turnaround(7.58058e-4, &m).unwrap() - 17.4).abs() < 1e-6);
    }

    #[test]
    fn calibration_rejects_negative_delay() {
        let err = calibrate_delay(1e-9, 4.2, &TimingModel::one_way()).unwrap_err();
        assert!(matches!(err, TimingError::NegativeDelay(_)));
        assert!(calibrate_delay(1e-3, -1.0, &TimingModel::one_way()).is_err());
    }

    #[test]
    fn quantize_examples() {
        assert!((quantize(1.2345678e-3, 1e-6) - 1.234e-3).abs() < 1e-15);
        assert_eq!(quantize(0.123, 0.0), 0.123);
        assert_eq!(quantize(0.5833e-6, 1e-6), 0.0);
    }

    #[test]
    fn quantize_exact_multiples_stay_put() {
        for k in 0..2000 {
            let t = f64::from(k) * 1e-6;
            let q = quantize(t, 1e-6);
            assert!(q <= t);
            assert_eq!(quantize(q, 1e-6), q);
        }
    }

    #[test]
    fn feasibility_examples() {
        let r = required_precision(175.0, SPEED_OF_LIGHT, 1e-6).unwrap();
        assert!((r.required_precision - 5.833e-7).abs() < 5e-11);
        assert!(!r.feasible);
        assert!(required_precision(175.0, SPEED_OF_LIGHT, 1e-7).unwrap().feasible);
        let unit = required_precision(3e8, 3e8, 1.0).unwrap();
        assert_eq!(unit.required_precision, 1.0);
        assert!(unit.feasible);
        assert!(matches!(
            required_precision(0.0, SPEED_OF_LIGHT, 1e-6),
            Err(TimingError::NonPositiveRange(_))
        ));
    }

    #[test]
    fn feasibility_display() {
        let r = required_precision(175.0, SPEED_OF_LIGHT, 1e-6).unwrap();
        assert_eq!(r.to_string(), "range 175 m: required 5.833e-7 s, available 1e-6 s, NOT feasible");
    }

    #[test]
    fn percent_error_examples() {
        assert_eq!(format!("{:.2}", percent_error(13.404, 13.2).unwrap()), "1.52");
        assert_eq!(format!("{:.2}", percent_error(17.145, 16.8).unwrap()), "2.01");
        assert_eq!(percent_error(5.0, 5.0).unwrap(), 0.0);
        assert_eq!(percent_error(0.0, 1.0), Err(TimingError::ZeroReference));
    }

    #[test]
    fn model_validation() {
        assert!(TimingModel::new(0.0, 0.0, RangingMode::OneWay, 0.0).is_err());
        assert!(TimingModel::new(-1.0, 3e8, RangingMode::OneWay, 0.0).is_err());
        assert!(TimingModel::new(0.0, 3e8, RangingMode::OneWay, -1e-9).is_err());
        assert!(TimingModel::new(1e-4, 3e8, RangingMode::RoundTrip, 1e-6).is_ok());
    }
}
