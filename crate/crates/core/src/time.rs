//! Time windows over the media timeline, in decimal seconds.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Width of the fallback window returned when clamping empties an interval.
pub const CLAMP_FALLBACK_S: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WindowError {
    #[error("window start {start_s} must be a finite, non-negative number")]
    BadStart { start_s: f64 },
    #[error("window end {end_s} must be finite and greater than start {start_s}")]
    Empty { start_s: f64, end_s: f64 },
}

/// A closed interval `[start_s, end_s]` of positive length on the media timeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawWindow", into = "RawWindow")]
pub struct TimeWindow {
    start_s: f64,
    end_s: f64,
}

/// Unvalidated wire form of a window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawWindow {
    pub start_s: f64,
    pub end_s: f64,
}

impl TimeWindow {
    pub fn new(start_s: f64, end_s: f64) -> Result<Self, WindowError> {
        if !start_s.is_finite() || start_s < 0.0 {
            return Err(WindowError::BadStart { start_s });
        }
        if !end_s.is_finite() || end_s <= start_s {
            return Err(WindowError::Empty { start_s, end_s });
        }
        Ok(Self { start_s, end_s })
    }

    pub fn start_s(&self) -> f64 {
        self.start_s
    }

    pub fn end_s(&self) -> f64 {
        self.end_s
    }

    pub fn duration(&self) -> f64 {
        self.end_s - self.start_s
    }

    /// True when `other` lies entirely inside `self` widened by `pad_s` on both sides.
    pub fn contains_padded(&self, other: &TimeWindow, pad_s: f64) -> bool {
        other.start_s >= self.start_s - pad_s && other.end_s <= self.end_s + pad_s
    }

    pub fn overlaps(&self, other: &TimeWindow) -> bool {
        self.start_s < other.end_s && other.start_s < self.end_s
    }

    /// Widens the window by `pad_s >= 0` on both sides, flooring the start at zero.
    pub fn padded(&self, pad_s: f64) -> TimeWindow {
        debug_assert!(pad_s >= 0.0);
        TimeWindow { start_s: (self.start_s - pad_s).max(0.0), end_s: self.end_s + pad_s }
    }
}

impl TryFrom<RawWindow> for TimeWindow {
    type Error = WindowError;

    fn try_from(raw: RawWindow) -> Result<Self, Self::Error> {
        TimeWindow::new(raw.start_s, raw.end_s)
    }
}

impl From<TimeWindow> for RawWindow {
    fn from(w: TimeWindow) -> Self {
        RawWindow { start_s: w.start_s, end_s: w.end_s }
    }
}

impl fmt::Display for TimeWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}–{}]", fmt_seconds(self.start_s), fmt_seconds(self.end_s))
    }
}

/// Formats seconds with the shortest exact decimal, always keeping one fractional digit.
pub fn fmt_seconds(s: f64) -> String {
    format!("{s:?}")
}

/// Clamps `w` into `[0, duration_s]`.
///
/// When nothing of `w` survives, the last [`CLAMP_FALLBACK_S`] seconds of the media are
/// returned instead so callers always get a usable window.
pub fn clamp_window(w: &TimeWindow, duration_s: f64) -> TimeWindow {
    clamp_bounds(w.start_s, w.end_s, duration_s)
}

/// Same as [`clamp_window`] for raw, possibly invalid bounds (negative starts, overshoot).
pub fn clamp_bounds(start_s: f64, end_s: f64, duration_s: f64) -> TimeWindow {
    debug_assert!(duration_s > 0.0);
    let start = start_s.max(0.0).min(duration_s);
    let end = end_s.min(duration_s);
    if end > start {
        TimeWindow { start_s: start, end_s: end }
    } else {
        TimeWindow { start_s: (duration_s - CLAMP_FALLBACK_S).max(0.0), end_s: duration_s }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn w(a: f64, b: f64) -> TimeWindow {
        TimeWindow::new(a, b).unwrap()
    }

    #[test]
    fn rejects_inverted_and_empty() {
        assert!(TimeWindow::new(3.0, 2.0).is_err());
        assert!(TimeWindow::new(3.0, 3.0).is_err());
        assert!(TimeWindow::new(-0.1, 3.0).is_err());
        assert!(TimeWindow::new(0.0, f64::NAN).is_err());
    }

    #[test]
    fn clamp_examples() {
        assert_eq!(clamp_bounds(-1.0, 10.0, 30.0), w(0.0, 10.0));
        assert_eq!(clamp_window(&w(5.0, 99.0), 30.0), w(5.0, 30.0));
        assert_eq!(clamp_window(&w(50.0, 60.0), 30.0), w(29.5, 30.0));
    }

    #[test]
    fn clamp_fallback_on_tiny_media() {
        assert_eq!(clamp_window(&w(5.0, 6.0), 0.25), w(0.0, 0.25));
    }

    #[test]
    fn display_uses_en_dash() {
        assert_eq!(w(3.0, 5.0).to_string(), "[3.0–5.0]");
        assert_eq!(w(12.25, 15.5).to_string(), "[12.25–15.5]");
    }

    #[test]
    fn serde_rejects_invalid() {
        let err = serde_json::from_str::<TimeWindow>(r#"{"start_s":4.0,"end_s":1.0}"#);
        assert!(err.is_err());
        let ok: TimeWindow = serde_json::from_str(r#"{"start_s":1.0,"end_s":4.0}"#).unwrap();
        assert_eq!(ok, w(1.0, 4.0));
    }

    proptest! {
        #[test]
        fn clamp_is_idempotent_and_in_range(a in -100.0f64..200.0, len in 0.01f64..100.0, d in 0.1f64..120.0) {
            let c = clamp_bounds(a, a + len, d);
            prop_assert!(c.start_s() >= 0.0);
            prop_assert!(c.start_s() < c.end_s());
            prop_assert!(c.end_s() <= d);
            prop_assert_eq!(clamp_window(&c, d), c);
        }
    }
}
