use std::cmp::Ordering;

use super::{Tool, ToolContext, ToolError};
use crate::action::{ActionArgs, ActionKind, Observation};
use crate::cost::{estimate_audio_tokens, estimate_visual_tokens, TokenCost};
use crate::retrieval::Terms;
use crate::scene::{Granularity, Scene};
use crate::time::{clamp_bounds, TimeWindow};

pub const VISUAL_DETAIL_LOST: &str = "insufficient visual detail at global sampling";
pub const NO_VISUAL_MATCH: &str = "no relevant visual content found";
pub const NO_CLIP_MATCH: &str = "no relevant visual content found in clip";
pub const NO_SPEECH: &str = "no speech detected";
pub const NO_AUDIO_MATCH: &str = "no relevant audio content found";
pub const NO_EVENTS: &str = "no sound events detected";
const EMPTY_CAPTION_WARNING: &str = "[meta] warning: empty global audio summary";

struct Hit<'a> {
    score: f64,
    window: TimeWindow,
    text: &'a str,
    fine: bool,
}

/// Higher score first, then earlier window, then lexicographic text.
fn rank(a: &Hit<'_>, b: &Hit<'_>) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.window.start_s().total_cmp(&b.window.start_s()))
        .then_with(|| a.window.end_s().total_cmp(&b.window.end_s()))
        .then_with(|| a.text.cmp(b.text))
}

fn audio_cost(scene: &Scene, ctx: &ToolContext<'_>, text: Option<&str>) -> TokenCost {
    TokenCost {
        visual: 0,
        audio: estimate_audio_tokens(&scene.full_window(), ctx.cost_model),
        text: text.map_or(0, |t| ctx.cost_model.text_tokens(t)),
    }
}

/// Whole-video question answering at sparse sampling. Only COARSE facts and the visual
/// summary can be reported; if a FINE fact is the best match the detail is "lost".
pub fn global_qa(question: &str, scene: &Scene, ctx: &ToolContext<'_>) -> Observation {
    let full = scene.full_window();
    let q = Terms::new(question);
    let mut hits: Vec<Hit<'_>> = scene
        .visual_facts
        .iter()
        .map(|f| (f.window, f.statement.as_str(), f.granularity == Granularity::Fine))
        .chain(std::iter::once((full, scene.global_visual_summary.as_str(), false)))
        .filter_map(|(window, text, fine)| {
            ctx.retrieval.match_score(&q, &Terms::new(text)).map(|score| Hit { score, window, text, fine })
        })
        .collect();
    hits.sort_by(rank);
    let text = match hits.first() {
        None => NO_VISUAL_MATCH.to_string(),
        Some(best) if best.fine => VISUAL_DETAIL_LOST.to_string(),
        Some(_) => hits.iter().filter(|h| !h.fine).map(|h| h.text).collect::<Vec<_>>().join("\n"),
    };
    let cost = TokenCost {
        visual: estimate_visual_tokens(ctx.limits.global_fps, &full, ctx.cost_model),
        audio: 0,
        text: ctx.cost_model.text_tokens(question),
    };
    ctx.observation(ActionKind::GlobalQa, text, Vec::new(), cost)
}

/// High frame-rate inspection of one window. Fails on windows longer than the clip limit;
/// otherwise the window is clamped to the scene and only facts passing all visibility gates
/// can answer.
pub fn clip_qa(
    question: &str,
    window: &TimeWindow,
    scene: &Scene,
    ctx: &ToolContext<'_>,
) -> Result<Observation, ToolError> {
    if window.duration() > ctx.limits.max_clip_window_s {
        return Err(ToolError::WindowTooLong { duration_s: window.duration(), max_s: ctx.limits.max_clip_window_s });
    }
    let window = clamp_bounds(window.start_s(), window.end_s(), scene.duration_s);
    let q = Terms::new(question);
    let mut hits: Vec<Hit<'_>> = scene
        .visual_facts
        .iter()
        .filter(|f| f.visible_in(&window, ctx.limits.clip_fps, ctx.limits.containment_pad_s))
        .filter_map(|f| {
            ctx.retrieval.match_score(&q, &Terms::new(&f.statement)).map(|score| Hit {
                score,
                window: f.window,
                text: &f.statement,
                fine: f.granularity == Granularity::Fine,
            })
        })
        .collect();
    hits.sort_by(rank);
    let text = if hits.is_empty() {
        NO_CLIP_MATCH.to_string()
    } else {
        hits.iter().map(|h| h.text).collect::<Vec<_>>().join("\n")
    };
    let cost = TokenCost {
        visual: estimate_visual_tokens(ctx.limits.clip_fps, &window, ctx.cost_model),
        audio: 0,
        text: ctx.cost_model.text_tokens(question),
    };
    Ok(ctx.observation(ActionKind::ClipQa, text, Vec::new(), cost))
}

pub fn asr(scene: &Scene, ctx: &ToolContext<'_>) -> Observation {
    let mut segments: Vec<_> = scene.speech_segments.iter().collect();
    segments.sort_by(|a, b| {
        a.window.start_s().total_cmp(&b.window.start_s()).then_with(|| a.transcript.cmp(&b.transcript))
    });
    let text = if segments.is_empty() {
        NO_SPEECH.to_string()
    } else {
        segments.iter().map(|s| format!("{} {}", s.window, s.transcript)).collect::<Vec<_>>().join("\n")
    };
    let windows = segments.iter().map(|s| s.window).collect();
    ctx.observation(ActionKind::Asr, text, windows, audio_cost(scene, ctx, None))
}

pub fn global_audio_caption(scene: &Scene, ctx: &ToolContext<'_>) -> Observation {
    let text = if scene.global_audio_summary.is_empty() {
        EMPTY_CAPTION_WARNING.to_string()
    } else {
        scene.global_audio_summary.clone()
    };
    ctx.observation(ActionKind::GlobalCaption, text, Vec::new(), audio_cost(scene, ctx, None))
}

/// Targeted listening: matching sound events first, then matching speech.
pub fn audio_qa(question: &str, scene: &Scene, ctx: &ToolContext<'_>) -> Observation {
    let q = Terms::new(question);
    let mut events: Vec<(Hit<'_>, String)> = scene
        .audio_events
        .iter()
        .filter_map(|e| {
            let doc = Terms::new(&format!("{} {}", e.label, e.description));
            ctx.retrieval.match_score(&q, &doc).map(|score| {
                let line = format!("event '{}': {}", e.label, e.description);
                (Hit { score, window: e.window, text: &e.label, fine: false }, line)
            })
        })
        .collect();
    events.sort_by(|a, b| rank(&a.0, &b.0));
    let mut speech: Vec<(Hit<'_>, String)> = scene
        .speech_segments
        .iter()
        .filter_map(|s| {
            ctx.retrieval.match_score(&q, &Terms::new(&s.transcript)).map(|score| {
                let line = format!("speech: {}", s.transcript);
                (Hit { score, window: s.window, text: &s.transcript, fine: false }, line)
            })
        })
        .collect();
    speech.sort_by(|a, b| rank(&a.0, &b.0));
    let lines: Vec<String> = events.into_iter().chain(speech).map(|(_, l)| l).collect();
    let text = if lines.is_empty() { NO_AUDIO_MATCH.to_string() } else { lines.join("\n") };
    ctx.observation(ActionKind::AudioQa, text, Vec::new(), audio_cost(scene, ctx, Some(question)))
}

/// Distinct event labels in order of first occurrence, without timestamps.
pub fn event_list(scene: &Scene, ctx: &ToolContext<'_>) -> Observation {
    let mut events: Vec<_> = scene.audio_events.iter().collect();
    events.sort_by(|a, b| a.window.start_s().total_cmp(&b.window.start_s()));
    let mut labels: Vec<&str> = Vec::new();
    for e in events {
        if !labels.contains(&e.label.as_str()) {
            labels.push(&e.label);
        }
    }
    let text = if labels.is_empty() { NO_EVENTS.to_string() } else { labels.join(", ") };
    ctx.observation(ActionKind::EventList, text, Vec::new(), audio_cost(scene, ctx, None))
}

/// Timestamps of every sound event matching `query`, ascending by start.
pub fn event_locate(query: &str, scene: &Scene, ctx: &ToolContext<'_>) -> Result<Observation, ToolError> {
    let q = Terms::new(query);
    let mut found: Vec<_> = scene
        .audio_events
        .iter()
        .filter(|e| ctx.retrieval.matches(&q, &Terms::new(&format!("{} {}", e.label, e.description))))
        .collect();
    if found.is_empty() {
        return Err(ToolError::NoMatch { query: query.to_string() });
    }
    found.sort_by(|a, b| {
        a.window
            .start_s()
            .total_cmp(&b.window.start_s())
            .then_with(|| a.window.end_s().total_cmp(&b.window.end_s()))
            .then_with(|| a.label.cmp(&b.label))
    });
    let text = found.iter().map(|e| format!("event '{}' at {}", e.label, e.window)).collect::<Vec<_>>().join("\n");
    let windows = found.iter().map(|e| e.window).collect();
    Ok(ctx.observation(ActionKind::EventLocation, text, windows, audio_cost(scene, ctx, Some(query))))
}

/// Captions the whole video at the dense frame rate. Captioning cannot resolve FINE
/// detail, so only COARSE facts and the visual summary appear.
pub fn dense_caption(scene: &Scene, ctx: &ToolContext<'_>) -> Observation {
    let full = scene.full_window();
    let mut lines: Vec<&str> = vec![scene.global_visual_summary.as_str()];
    lines.extend(
        scene.visual_facts.iter().filter(|f| f.granularity == Granularity::Coarse).map(|f| f.statement.as_str()),
    );
    lines.retain(|l| !l.is_empty());
    let cost =
        TokenCost { visual: estimate_visual_tokens(ctx.limits.dense_fps, &full, ctx.cost_model), audio: 0, text: 0 };
    ctx.observation(ActionKind::GlobalQa, lines.join("\n"), Vec::new(), cost)
}

/// Scene-backed implementation of every tool kind.
#[derive(Debug, Clone, Copy, Default)]
pub struct MockTool;

impl Tool for MockTool {
    fn call(&self, args: &ActionArgs, scene: &Scene, ctx: &ToolContext<'_>) -> Result<Observation, ToolError> {
        match args {
            ActionArgs::GlobalQa { question } => Ok(global_qa(question, scene, ctx)),
            ActionArgs::ClipQa { question, window } => clip_qa(question, window, scene, ctx),
            ActionArgs::Asr {} => Ok(asr(scene, ctx)),
            ActionArgs::GlobalCaption {} => Ok(global_audio_caption(scene, ctx)),
            ActionArgs::AudioQa { question } => Ok(audio_qa(question, scene, ctx)),
            ActionArgs::EventList {} => Ok(event_list(scene, ctx)),
            ActionArgs::EventLocation { query } => event_locate(query, scene, ctx),
            ActionArgs::Answer { .. } => Err(ToolError::Unbound(ActionKind::Answer)),
        }
    }
}

/// `GLOBAL_QA` backend for the dense-caption baseline: ignores the question and returns
/// the full high frame-rate caption.
#[derive(Debug, Clone, Copy, Default)]
pub struct DenseCaptionTool;

impl Tool for DenseCaptionTool {
    fn call(&self, args: &ActionArgs, scene: &Scene, ctx: &ToolContext<'_>) -> Result<Observation, ToolError> {
        match args {
            ActionArgs::GlobalQa { .. } => Ok(dense_caption(scene, ctx)),
            other => Err(ToolError::WrongArgs { bound: ActionKind::GlobalQa, got: other.kind() }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::CostModel;
    use crate::retrieval::RetrievalConfig;
    use crate::scene::test_support::{kitten, w};
    use crate::scene::{AudioEvent, SpeechSegment};
    use crate::tools::ToolLimits;

    struct Env {
        cost: CostModel,
        retrieval: RetrievalConfig,
        limits: ToolLimits,
    }

    impl Env {
        fn new() -> Self {
            Self { cost: CostModel::default(), retrieval: RetrievalConfig::default(), limits: ToolLimits::default() }
        }
        fn ctx(&self) -> ToolContext<'_> {
            ToolContext { cost_model: &self.cost, retrieval: &self.retrieval, limits: &self.limits }
        }
    }

    fn event(id: &str, label: &str, a: f64, b: f64) -> AudioEvent {
        AudioEvent { id: id.into(), label: label.into(), window: w(a, b), description: String::new() }
    }

    #[test]
    fn global_qa_coarse_answer_and_cost() {
        let env = Env::new();
        let o = global_qa("What animal appears?", &kitten(), &env.ctx());
        assert!(o.text.contains("kitten"), "{}", o.text);
        assert_eq!(o.cost.visual, 6000);
        assert_eq!(o.cost.audio, 0);
        assert!(o.windows.is_empty());
    }

    #[test]
    fn global_qa_fine_detail_is_lost() {
        let env = Env::new();
        let o = global_qa("What do the characters on the signboard say?", &kitten(), &env.ctx());
        assert_eq!(o.text, VISUAL_DETAIL_LOST);
    }

    #[test]
    fn global_qa_no_match() {
        let env = Env::new();
        assert_eq!(global_qa("xqzt blorf?", &kitten(), &env.ctx()).text, NO_VISUAL_MATCH);
    }

    #[test]
    fn clip_qa_reads_sign_in_tight_window() {
        let env = Env::new();
        let o = clip_qa("what does the signboard say?", &w(12.0, 16.0), &kitten(), &env.ctx()).unwrap();
        assert!(o.text.contains("Fu Lu"));
        assert_eq!(o.cost.visual, 2000);
        assert_eq!(o.cost.audio, 0);
    }

    #[test]
    fn clip_qa_full_window_misses_fine_fact() {
        let env = Env::new();
        let o = clip_qa("what does the signboard say?", &w(0.0, 30.0), &kitten(), &env.ctx()).unwrap();
        assert_eq!(o.text, NO_CLIP_MATCH);
        assert_eq!(o.cost.visual, 15000);
    }

    #[test]
    fn clip_qa_rejects_long_windows() {
        let env = Env::new();
        let err = clip_qa("anything", &w(0.0, 31.0), &kitten(), &env.ctx()).unwrap_err();
        assert!(matches!(err, ToolError::WindowTooLong { .. }));
    }

    #[test]
    fn clip_qa_clamps_overshoot() {
        let env = Env::new();
        let o = clip_qa("kitten market", &w(25.0, 40.0), &kitten(), &env.ctx()).unwrap();
        // clamped to [25, 30]: 25 frames
        assert_eq!(o.cost.visual, 2500);
    }

    #[test]
    fn asr_lines_and_windows() {
        let env = Env::new();
        let o = asr(&kitten(), &env.ctx());
        assert_eq!(o.text, "[3.0–5.0] watch the kitten");
        assert_eq!(o.windows, vec![w(3.0, 5.0)]);
        assert_eq!(o.cost.audio, 750);
        assert_eq!(o.cost.visual, 0);
    }

    #[test]
    fn asr_empty_and_sorted() {
        let env = Env::new();
        let mut s = kitten();
        s.speech_segments.clear();
        let o = asr(&s, &env.ctx());
        assert_eq!(o.text, NO_SPEECH);
        assert!(o.windows.is_empty());

        s.speech_segments = vec![
            SpeechSegment { window: w(8.0, 9.0), transcript: "second".into() },
            SpeechSegment { window: w(1.0, 2.0), transcript: "first".into() },
        ];
        let o = asr(&s, &env.ctx());
        assert_eq!(o.text, "[1.0–2.0] first\n[8.0–9.0] second");
        assert_eq!(o.windows, vec![w(1.0, 2.0), w(8.0, 9.0)]);
    }

    #[test]
    fn audio_caption_passthrough_and_warning() {
        let env = Env::new();
        let s = kitten();
        assert_eq!(global_audio_caption(&s, &env.ctx()).text, s.global_audio_summary);
        let mut empty = s.clone();
        empty.global_audio_summary.clear();
        assert!(global_audio_caption(&empty, &env.ctx()).text.contains("warning"));
        let mut long = s;
        long.duration_s = 60.0;
        assert_eq!(global_audio_caption(&long, &env.ctx()).cost.audio, 1500);
    }

    #[test]
    fn audio_qa_matches_event() {
        let env = Env::new();
        let o = audio_qa("is there an animal sound?", &kitten(), &env.ctx());
        assert!(o.text.contains("cat meowing"), "{}", o.text);
        assert_eq!(audio_qa("what music plays?", &kitten(), &env.ctx()).text, NO_AUDIO_MATCH);
    }

    #[test]
    fn audio_qa_events_before_speech() {
        let env = Env::new();
        let mut s = kitten();
        s.speech_segments[0].transcript = "the cat is meowing again".into();
        let o = audio_qa("cat meowing", &s, &env.ctx());
        let lines: Vec<&str> = o.text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].starts_with("event 'cat meowing'"));
        assert!(lines[1].starts_with("speech:"));
    }

    #[test]
    fn event_list_first_occurrence_dedup() {
        let env = Env::new();
        let mut s = kitten();
        s.audio_events = vec![
            event("e0", "traffic", 0.0, 4.0),
            event("e1", "cat meowing", 12.0, 15.5),
            event("e2", "traffic", 20.0, 22.0),
        ];
        assert_eq!(event_list(&s, &env.ctx()).text, "traffic, cat meowing");
        s.audio_events.clear();
        assert_eq!(event_list(&s, &env.ctx()).text, NO_EVENTS);
    }

    #[test]
    fn event_locate_examples() {
        let env = Env::new();
        let s = kitten();
        let o = event_locate("cat meowing", &s, &env.ctx()).unwrap();
        assert_eq!(o.windows, vec![w(12.0, 15.5)]);
        assert_eq!(o.text, "event 'cat meowing' at [12.0–15.5]");
        assert_eq!(event_locate("meowing", &s, &env.ctx()).unwrap().windows, vec![w(12.0, 15.5)]);
        assert_eq!(
            event_locate("thunder", &s, &env.ctx()).unwrap_err(),
            ToolError::NoMatch { query: "thunder".into() }
        );
    }

    #[test]
    fn dense_caption_costs_full_video_at_five_fps() {
        let env = Env::new();
        let o = dense_caption(&kitten(), &env.ctx());
        assert_eq!(o.cost.visual, 15000);
        assert!(o.text.contains("kitten"));
        assert!(!o.text.contains("Fu Lu"));
    }

    #[test]
    fn mock_tools_are_deterministic() {
        let env = Env::new();
        let s = kitten();
        let args = ActionArgs::ClipQa { question: "signboard".into(), window: w(10.0, 17.5) };
        let a = MockTool.call(&args, &s, &env.ctx()).unwrap();
        let b = MockTool.call(&args, &s, &env.ctx()).unwrap();
        assert_eq!(a, b);
    }
}
