use std::fmt::Write as _;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ToolUsageStats;
use crate::action::choice_letter;
use crate::cost::TokenCost;
use crate::episode::Termination;
use crate::fsutil::write_atomic;

pub const REPORT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeanCost {
    pub visual: f64,
    pub audio: f64,
    pub text: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuestionOutcome {
    pub question_id: String,
    pub scene_id: String,
    pub expected: usize,
    pub predicted: Option<usize>,
    pub correct: bool,
    pub termination: Termination,
    pub tool_calls: usize,
    pub cost: TokenCost,
    pub latency_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlannerReport {
    pub planner: String,
    pub questions: usize,
    pub correct: usize,
    pub accuracy: f64,
    pub mean_cost: MeanCost,
    /// Simulated, from the cost model.
    pub mean_latency_ms: f64,
    pub usage: ToolUsageStats,
    pub outcomes: Vec<QuestionOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchReport {
    pub format_version: u32,
    pub suite_id: String,
    pub planners: Vec<PlannerReport>,
}

pub const REPORT_JSON: &str = "report.json";
pub const REPORT_TXT: &str = "report.txt";
pub const USAGE_CSV: &str = "tool_usage.csv";

impl BenchReport {
    pub fn new(suite_id: impl Into<String>, planners: Vec<PlannerReport>) -> Self {
        Self { format_version: REPORT_FORMAT_VERSION, suite_id: suite_id.into(), planners }
    }

    pub fn planner(&self, name: &str) -> Option<&PlannerReport> {
        self.planners.iter().find(|p| p.planner == name)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports always serialize");
        s.push('\n');
        s
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "suite {}", self.suite_id);
        let _ = writeln!(
            out,
            "{:<12} {:>9} {:>9} {:>12} {:>12} {:>12} {:>14}",
            "planner", "questions", "accuracy", "visual_tok", "audio_tok", "text_tok", "latency_ms"
        );
        for p in &self.planners {
            let _ = writeln!(
                out,
                "{:<12} {:>9} {:>9.4} {:>12.1} {:>12.1} {:>12.1} {:>14.1}",
                p.planner,
                p.questions,
                p.accuracy,
                p.mean_cost.visual,
                p.mean_cost.audio,
                p.mean_cost.text,
                p.mean_latency_ms
            );
        }
        for p in &self.planners {
            let _ = writeln!(out, "\n[{}] tool usage", p.planner);
            let _ = writeln!(out, "{:<16} {:>7} {:>8} {:>10}", "tool", "calls", "ratio", "mean_step");
            for (kind, s) in &p.usage.per_tool {
                let _ = writeln!(
                    out,
                    "{:<16} {:>7} {:>8.4} {:>10.4}",
                    kind.as_str(),
                    s.call_count,
                    s.call_ratio,
                    s.mean_invocation_step
                );
            }
            let _ = writeln!(out, "\n[{}] outcomes", p.planner);
            for o in &p.outcomes {
                let predicted = o.predicted.map_or("-".to_string(), choice_letter);
                let _ = writeln!(
                    out,
                    "{:<24} expected {} predicted {} {}",
                    o.question_id,
                    choice_letter(o.expected),
                    predicted,
                    if o.correct { "ok" } else { "wrong" }
                );
            }
        }
        out
    }

    /// `planner,tool,count,ratio,mean_step` rows: angle and radius data for a polar usage chart.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["planner", "tool", "count", "ratio", "mean_step"]).expect("in-memory write");
        for p in &self.planners {
            for (kind, s) in &p.usage.per_tool {
                w.write_record([
                    p.planner.clone(),
                    kind.as_str().to_string(),
                    s.call_count.to_string(),
                    format!("{:.6}", s.call_ratio),
                    format!("{:.6}", s.mean_invocation_step),
                ])
                .expect("in-memory write");
            }
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
    }

    /// Writes `report.json`, `report.txt` and `tool_usage.csv` into `dir`.
    pub fn write_dir(&self, dir: &Path) -> io::Result<()> {
        std::fs::create_dir_all(dir)?;
        write_atomic(&dir.join(REPORT_JSON), self.to_json().as_bytes())?;
        write_atomic(&dir.join(REPORT_TXT), self.to_text().as_bytes())?;
        write_atomic(&dir.join(USAGE_CSV), self.to_csv().as_bytes())
    }
}
