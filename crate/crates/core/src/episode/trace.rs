//! Line-delimited JSON trace files: one header line, one line per memory entry, one footer.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{EpisodeConfig, Memory, MemoryEntry, Termination, Trace};
use crate::action::{Observation, Query};
use crate::cost::TokenCost;
use crate::planner::{PlannerDecision, ReflectionNote};

pub const TRACE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("trace line {line}: {message}")]
pub struct TraceFormatError {
    /// 1-based line number; one past the last line when the file ends early.
    pub line: usize,
    pub message: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HeaderLine {
    #[serde(rename = "type")]
    kind: String,
    format_version: u32,
    query: Query,
    config: EpisodeConfig,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EntryLine {
    #[serde(rename = "type")]
    kind: String,
    step: usize,
    decision: PlannerDecision,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    observation: Option<Observation>,
    reflection: ReflectionNote,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FooterLine {
    #[serde(rename = "type")]
    kind: String,
    entry_count: usize,
    final_answer: Option<String>,
    termination: Termination,
    planner_error: Option<String>,
    total_cost: TokenCost,
    total_latency_ms: u64,
}

#[derive(Deserialize)]
struct LineKind {
    #[serde(rename = "type")]
    kind: String,
}

fn line<T: Serialize>(out: &mut String, value: &T) {
    out.push_str(&serde_json::to_string(value).expect("trace lines always serialize"));
    out.push('\n');
}

pub fn serialize_trace(t: &Trace) -> String {
    let mut out = String::new();
    line(
        &mut out,
        &HeaderLine {
            kind: "header".into(),
            format_version: TRACE_FORMAT_VERSION,
            query: t.query.clone(),
            config: t.config_snapshot.clone(),
        },
    );
    for e in t.entries.entries() {
        line(
            &mut out,
            &EntryLine {
                kind: "entry".into(),
                step: e.step,
                decision: e.decision.clone(),
                observation: e.observation.clone(),
                reflection: e.reflection.clone(),
            },
        );
    }
    line(
        &mut out,
        &FooterLine {
            kind: "footer".into(),
            entry_count: t.entries.len(),
            final_answer: t.final_answer.clone(),
            termination: t.termination,
            planner_error: t.planner_error.clone(),
            total_cost: t.total_cost,
            total_latency_ms: t.total_latency_ms,
        },
    );
    out
}

fn err(line: usize, message: impl Into<String>) -> TraceFormatError {
    TraceFormatError { line, message: message.into() }
}

fn parse_line<'a, T: Deserialize<'a>>(n: usize, text: &'a str) -> Result<T, TraceFormatError> {
    serde_json::from_str(text).map_err(|e| err(n, e.to_string()))
}

pub fn parse_trace(text: &str) -> Result<Trace, TraceFormatError> {
    let body = text.strip_suffix('\n').ok_or_else(|| err(text.lines().count().max(1), "missing final newline"))?;
    let lines: Vec<&str> = body.split('\n').collect();

    let header: HeaderLine = parse_line(1, lines[0])?;
    if header.kind != "header" {
        return Err(err(1, format!("expected a header line, found '{}'", header.kind)));
    }
    if header.format_version != TRACE_FORMAT_VERSION {
        return Err(err(1, format!("unsupported format_version {}", header.format_version)));
    }

    let mut entries = Memory::new();
    let mut footer = None;
    for (i, text) in lines.iter().enumerate().skip(1) {
        let n = i + 1;
        if footer.is_some() {
            return Err(err(n, "content after footer"));
        }
        match parse_line::<LineKind>(n, text)?.kind.as_str() {
            "entry" => {
                let e: EntryLine = parse_line(n, text)?;
                entries
                    .push(MemoryEntry {
                        step: e.step,
                        decision: e.decision,
                        observation: e.observation,
                        reflection: e.reflection,
                    })
                    .map_err(|m| err(n, m.to_string()))?;
            }
            "footer" => footer = Some((n, parse_line::<FooterLine>(n, text)?)),
            other => return Err(err(n, format!("unexpected line type '{other}'"))),
        }
    }
    let (n, footer) = footer.ok_or_else(|| err(lines.len() + 1, "missing footer"))?;

    if footer.entry_count != entries.len() {
        return Err(err(n, format!("footer counts {} entries, found {}", footer.entry_count, entries.len())));
    }
    let observations = entries.entries().iter().filter_map(|e| e.observation.as_ref());
    let cost: TokenCost = observations.clone().map(|o| o.cost).sum();
    let latency: u64 = observations.map(|o| o.latency_ms).sum();
    if cost != footer.total_cost || latency != footer.total_latency_ms {
        return Err(err(n, "footer totals disagree with the entries"));
    }
    if footer.final_answer.is_some() != (footer.termination == Termination::Answered) {
        return Err(err(n, "final_answer must be present exactly when the episode was answered"));
    }
    Ok(Trace {
        query: header.query,
        entries,
        final_answer: footer.final_answer,
        termination: footer.termination,
        planner_error: footer.planner_error,
        total_cost: footer.total_cost,
        total_latency_ms: footer.total_latency_ms,
        config_snapshot: header.config,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::ActionArgs;
    use crate::cost::CostModel;
    use crate::episode::run_episode;
    use crate::planner::ReplayPlanner;
    use crate::scene::test_support::{kitten, w};
    use crate::tools::ToolRegistry;

    fn sample() -> Trace {
        let scene = kitten();
        let q = Query {
            id: "q1".into(),
            scene_id: scene.id.clone(),
            question: "When the cat meows, what do the characters on the hanging signboard say?".into(),
            choices: vec!["Xi Le".into(), "Fu Lu".into(), "Ping An".into(), "Da Ji".into()],
            duration_s: scene.duration_s,
        };
        let script = vec![
            PlannerDecision::new(ActionArgs::GlobalCaption {}, "context"),
            PlannerDecision::new(ActionArgs::EventLocation { query: "cat meowing".into() }, "locate"),
            PlannerDecision::new(ActionArgs::ClipQa { question: q.question.clone(), window: w(10.1, 17.3) }, ""),
            PlannerDecision::new(ActionArgs::Answer { answer: "B".into() }, "done"),
        ];
        let registry = ToolRegistry::mock(CostModel::default());
        run_episode(&q, &scene, &mut ReplayPlanner::new(script), &registry, &Default::default()).unwrap()
    }

    #[test]
    fn round_trip_is_identity() {
        let t = sample();
        let s = serialize_trace(&t);
        assert_eq!(s.lines().count(), 6);
        let back = parse_trace(&s).unwrap();
        assert_eq!(back, t);
        assert_eq!(serialize_trace(&back), s);
    }

    #[test]
    fn truncated_footer() {
        let s = serialize_trace(&sample());
        let cut: String = s.lines().take(5).map(|l| format!("{l}\n")).collect();
        assert_eq!(parse_trace(&cut).unwrap_err().line, 6);
        let half = &s[..s.len() - 20];
        let e = parse_trace(&format!("{half}\n")).unwrap_err();
        assert_eq!(e.line, 6);
    }

    #[test]
    fn tampered_lines_are_located() {
        let s = serialize_trace(&sample());
        let mut lines: Vec<String> = s.lines().map(String::from).collect();
        lines[2] = lines[2].replace("\"step\":1", "\"step\":5");
        let e = parse_trace(&(lines.join("\n") + "\n")).unwrap_err();
        assert_eq!(e.line, 3);

        let mut lines: Vec<String> = s.lines().map(String::from).collect();
        lines[5] = lines[5].replace("\"total_latency_ms\":", "\"total_latency_ms\":1");
        assert_eq!(parse_trace(&(lines.join("\n") + "\n")).unwrap_err().line, 6);

        assert_eq!(parse_trace("").unwrap_err().line, 1);
        assert_eq!(parse_trace("{}\n").unwrap_err().line, 1);
    }

    #[test]
    fn stable_layout() {
        let s = serialize_trace(&sample());
        let first = s.lines().next().unwrap();
        assert!(first.starts_with(r#"{"type":"header","format_version":1,"query":{"id":"q1""#), "{first}");
        let entry = s.lines().nth(1).unwrap();
        assert!(
            entry.starts_with(
                r#"{"type":"entry","step":0,"decision":{"action":"GLOBAL_CAPTION","args":{},"rationale":"context"}"#
            ),
            "{entry}"
        );
        assert!(s.lines().last().unwrap().starts_with(r#"{"type":"footer","entry_count":4"#));
    }
}
