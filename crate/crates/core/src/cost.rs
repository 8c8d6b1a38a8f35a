//! Token and simulated-latency accounting.
//!
//! Every estimate rounds up so cost is never under-reported. Latency is simulated from
//! token counts, never measured, which keeps benchmark reports reproducible.

use std::collections::BTreeMap;
use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::ActionKind;
use crate::time::TimeWindow;

/// Input token counts split by modality.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TokenCost {
    pub visual: u64,
    pub audio: u64,
    pub text: u64,
}

impl TokenCost {
    pub const ZERO: TokenCost = TokenCost { visual: 0, audio: 0, text: 0 };

    pub fn new(visual: u64, audio: u64, text: u64) -> Self {
        Self { visual, audio, text }
    }

    pub fn total(&self) -> u64 {
        self.visual + self.audio + self.text
    }

    /// True when any component of `self` is above the same component of `ceiling`.
    pub fn exceeds(&self, ceiling: &TokenCost) -> bool {
        self.visual > ceiling.visual || self.audio > ceiling.audio || self.text > ceiling.text
    }
}

impl Add for TokenCost {
    type Output = TokenCost;

    fn add(self, rhs: TokenCost) -> TokenCost {
        TokenCost { visual: self.visual + rhs.visual, audio: self.audio + rhs.audio, text: self.text + rhs.text }
    }
}

impl AddAssign for TokenCost {
    fn add_assign(&mut self, rhs: TokenCost) {
        *self = *self + rhs;
    }
}

impl std::iter::Sum for TokenCost {
    fn sum<I: Iterator<Item = TokenCost>>(iter: I) -> Self {
        iter.fold(TokenCost::ZERO, Add::add)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CostModelError {
    #[error("cost model rate '{0}' must be strictly positive")]
    NonPositive(&'static str),
    #[error("cost model has no base latency for {0}")]
    MissingLatency(ActionKind),
}

/// Rates converting media spans and text into tokens and simulated latency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostModel {
    pub tokens_per_frame: u64,
    pub audio_tokens_per_second: u64,
    pub text_chars_per_token: u64,
    pub per_tool_base_latency_ms: BTreeMap<ActionKind, u64>,
    pub per_token_latency_us: u64,
}

impl Default for CostModel {
    fn default() -> Self {
        let per_tool_base_latency_ms = BTreeMap::from([
            (ActionKind::GlobalQa, 900),
            (ActionKind::ClipQa, 1200),
            (ActionKind::Asr, 600),
            (ActionKind::GlobalCaption, 500),
            (ActionKind::AudioQa, 700),
            (ActionKind::EventList, 500),
            (ActionKind::EventLocation, 800),
        ]);
        Self {
            tokens_per_frame: 100,
            audio_tokens_per_second: 25,
            text_chars_per_token: 4,
            per_tool_base_latency_ms,
            per_token_latency_us: 20,
        }
    }
}

impl CostModel {
    pub fn validate(&self) -> Result<(), CostModelError> {
        if self.tokens_per_frame == 0 {
            return Err(CostModelError::NonPositive("tokens_per_frame"));
        }
        if self.audio_tokens_per_second == 0 {
            return Err(CostModelError::NonPositive("audio_tokens_per_second"));
        }
        if self.text_chars_per_token == 0 {
            return Err(CostModelError::NonPositive("text_chars_per_token"));
        }
        if self.per_token_latency_us == 0 {
            return Err(CostModelError::NonPositive("per_token_latency_us"));
        }
        for kind in ActionKind::TOOLS {
            match self.per_tool_base_latency_ms.get(&kind) {
                None => return Err(CostModelError::MissingLatency(kind)),
                Some(0) => return Err(CostModelError::NonPositive("per_tool_base_latency_ms")),
                Some(_) => {}
            }
        }
        Ok(())
    }

    pub fn text_tokens(&self, text: &str) -> u64 {
        (text.chars().count() as u64).div_ceil(self.text_chars_per_token)
    }

    /// Base latency for the tool plus the per-token processing time, rounded up to whole ms.
    pub fn latency_ms(&self, kind: ActionKind, cost: &TokenCost) -> u64 {
        let base = self.per_tool_base_latency_ms.get(&kind).copied().unwrap_or(0);
        base + (cost.total() * self.per_token_latency_us).div_ceil(1000)
    }
}

/// `ceil(fps * duration) * tokens_per_frame`.
pub fn estimate_visual_tokens(fps: f64, window: &TimeWindow, model: &CostModel) -> u64 {
    debug_assert!(fps > 0.0);
    let frames = (fps * window.duration()).ceil() as u64;
    frames * model.tokens_per_frame
}

/// `ceil(duration * audio_tokens_per_second)`.
pub fn estimate_audio_tokens(window: &TimeWindow, model: &CostModel) -> u64 {
    (window.duration() * model.audio_tokens_per_second as f64).ceil() as u64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn w(a: f64, b: f64) -> TimeWindow {
        TimeWindow::new(a, b).unwrap()
    }

    #[test]
    fn visual_token_examples() {
        let m = CostModel::default();
        assert_eq!(estimate_visual_tokens(2.0, &w(0.0, 30.0), &m), 6000);
        assert_eq!(estimate_visual_tokens(5.0, &w(0.0, 30.0), &m), 15000);
        assert_eq!(estimate_visual_tokens(5.0, &w(12.0, 16.0), &m), 2000);
        // 37.5 frames round up to 38.
        assert_eq!(estimate_visual_tokens(5.0, &w(10.0, 17.5), &m), 3800);
    }

    #[test]
    fn audio_token_examples() {
        let m = CostModel::default();
        assert_eq!(estimate_audio_tokens(&w(0.0, 30.0), &m), 750);
        assert_eq!(estimate_audio_tokens(&w(0.0, 60.0), &m), 1500);
        assert_eq!(estimate_audio_tokens(&w(0.0, 0.2), &m), 5);
    }

    #[test]
    fn text_tokens_round_up() {
        let m = CostModel::default();
        assert_eq!(m.text_tokens(""), 0);
        assert_eq!(m.text_tokens("abcd"), 1);
        assert_eq!(m.text_tokens("abcde"), 2);
    }

    #[test]
    fn default_model_is_valid() {
        CostModel::default().validate().unwrap();
        let m = CostModel { tokens_per_frame: 0, ..CostModel::default() };
        assert_eq!(m.validate(), Err(CostModelError::NonPositive("tokens_per_frame")));
        let mut m = CostModel::default();
        m.per_tool_base_latency_ms.remove(&ActionKind::Asr);
        assert_eq!(m.validate(), Err(CostModelError::MissingLatency(ActionKind::Asr)));
    }

    #[test]
    fn latency_is_base_plus_tokens() {
        let m = CostModel::default();
        let c = TokenCost::new(2000, 0, 5);
        // 2005 tokens * 20us = 40.1ms -> 41
        assert_eq!(m.latency_ms(ActionKind::ClipQa, &c), 1241);
    }

    fn cost() -> impl Strategy<Value = TokenCost> {
        (0u64..1 << 40, 0u64..1 << 40, 0u64..1 << 40).prop_map(|(v, a, t)| TokenCost::new(v, a, t))
    }

    proptest! {
        #[test]
        fn addition_commutes_with_zero_identity(a in cost(), b in cost()) {
            prop_assert_eq!(a + b, b + a);
            prop_assert_eq!(a + TokenCost::ZERO, a);
        }

        #[test]
        fn visual_estimate_is_monotone(f1 in 0.1f64..10.0, df in 0.0f64..10.0, s in 0.0f64..50.0, d1 in 0.1f64..50.0, dd in 0.0f64..50.0) {
            let m = CostModel::default();
            let base = estimate_visual_tokens(f1, &w(s, s + d1), &m);
            prop_assert!(estimate_visual_tokens(f1 + df, &w(s, s + d1), &m) >= base);
            prop_assert!(estimate_visual_tokens(f1, &w(s, s + d1 + dd), &m) >= base);
        }
    }
}
