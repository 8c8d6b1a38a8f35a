//! Seeded scene/question suite generator.
//!
//! Randomness comes from ChaCha8 keyed by the suite seed, with one stream per scene for
//! layout and a second stream per scene for questions. Only `u32` ranges are sampled so
//! output does not depend on the platform's pointer width. All times are multiples of
//! 0.5 s, which keeps them exact in binary floating point.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::format::{Suite, SuiteManifest, FORMAT_VERSION};
use super::oracle::oracle_answer;
use super::{AudioEvent, Granularity, QuestionItem, Scene, SpeechSegment, VisualFact, CHOICES_PER_QUESTION};
use crate::planner::INSPECT_PAD_S;
use crate::retrieval::{RetrievalConfig, Terms};
use crate::time::{clamp_window, TimeWindow};
use crate::tools::ToolLimits;

const QUESTION_STREAM: u64 = 1 << 32;
const DISTRACTOR_TRIES: usize = 64;

/// Sound-event vocabulary: `(label, description)`. Label terms are unique across entries
/// and never appear in another entry's description.
const SOUNDS: &[(&str, &str)] = &[
    ("dog barking", "a small dog yaps sharply"),
    ("cat meowing", "a kitten mews softly"),
    ("car horn", "a driver honks twice"),
    ("glass shattering", "a bottle smashes on pavement"),
    ("church bells", "bells toll from a steeple"),
    ("baby crying", "an infant wails loudly"),
    ("phone ringing", "a mobile rings insistently"),
    ("thunder rumbling", "thunder rolls overhead"),
    ("crowd cheering", "spectators shout with joy"),
    ("rooster crowing", "a rooster calls at dawn"),
    ("siren wailing", "an ambulance speeds past"),
    ("kettle whistling", "water boils on a stove"),
    ("drum beating", "a street drummer keeps rhythm"),
    ("whistle blowing", "a referee signals a foul"),
    ("engine revving", "a motorbike accelerates hard"),
    ("bird chirping", "sparrows twitter in hedges"),
    ("hammer pounding", "a carpenter strikes nails"),
    ("rain pattering", "raindrops tap an awning"),
    ("applause erupting", "an audience claps enthusiastically"),
    ("piano playing", "someone practices scales on keys"),
    ("laughter bursting", "a group giggles together"),
    ("wind howling", "gusts buffet the microphone"),
];

/// Things that can carry legible text; terms unique across entries.
const OBJECTS: &[&str] = &[
    "shop sign",
    "bus banner",
    "jar label",
    "brass plaque",
    "tram display",
    "menu board",
    "shirt print",
    "cafe chalkboard",
    "parcel sticker",
    "wall poster",
    "taxi lightbox",
    "stall placard",
    "book cover",
    "mug logo",
    "kite pattern",
    "flag emblem",
];

const VALUE_HEADS: &[&str] = &[
    "Amber", "Cobalt", "Crimson", "Golden", "Ivory", "Jade", "Lunar", "Maple", "Misty", "Northern", "Olive", "Quiet",
    "Royal", "Silver", "Solar", "Sunny", "Velvet", "Violet", "Wild", "Winter",
];

const VALUE_TAILS: &[&str] = &[
    "Anchor", "Arrow", "Bakery", "Canyon", "Cedar", "Comet", "Falcon", "Garden", "Harbor", "Lantern", "Meadow",
    "Orchid", "Pepper", "Pine", "River", "Summit", "Tiger", "Willow", "Zephyr", "Badger",
];

const SETTINGS: &[&str] = &[
    "night bazaar",
    "city park",
    "railway platform",
    "beach boardwalk",
    "school courtyard",
    "mountain village",
    "office lobby",
    "farm yard",
    "ferry deck",
    "museum hall",
];

const ACTIVITIES: &[&str] = &[
    "a person walks slowly forward",
    "several people chat in small groups",
    "a cyclist rides by",
    "a vendor arranges fruit",
    "children play nearby",
    "a couple sits on a bench",
];

const PHRASES: &[&str] = &[
    "let us keep walking",
    "look over there",
    "this place is lovely",
    "we should grab lunch soon",
    "hold the camera steady",
    "follow me please",
];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenerationError {
    #[error("n_scenes must be at least 1")]
    NoScenes,
    #[error("invalid generator profile: {0}")]
    InvalidProfile(String),
    #[error("unsatisfiable generator profile: {0}")]
    Unsatisfiable(String),
    #[error("generated item failed verification ({item}): {reason}")]
    Verification { item: String, reason: String },
}

/// Knobs for [`generate_suite`]. Times must be multiples of 0.5 s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeneratorProfile {
    /// Scene durations, cycled by scene index.
    pub durations_s: Vec<f64>,
    pub min_events: u32,
    pub max_events: u32,
    pub min_gap_s: f64,
    /// Silence kept at both ends of the timeline.
    pub edge_margin_s: f64,
    pub event_min_s: f64,
    pub event_max_s: f64,
    pub max_speech_segments: u32,
    /// Extra COARSE-answerable questions per scene.
    pub unimodal_controls_per_scene: u32,
}

impl Default for GeneratorProfile {
    fn default() -> Self {
        Self {
            durations_s: vec![30.0, 60.0],
            min_events: 2,
            max_events: 4,
            min_gap_s: 2.0,
            edge_margin_s: 1.0,
            event_min_s: 1.5,
            event_max_s: 4.0,
            max_speech_segments: 2,
            unimodal_controls_per_scene: 0,
        }
    }
}

fn half_units(field: &str, s: f64) -> Result<u32, GenerationError> {
    let units = s * 2.0;
    if !s.is_finite() || s < 0.0 || units.fract() != 0.0 || units > u32::MAX as f64 {
        return Err(GenerationError::InvalidProfile(format!("{field} = {s} must be a non-negative multiple of 0.5")));
    }
    Ok(units as u32)
}

struct Units {
    durations: Vec<u32>,
    gap: u32,
    margin: u32,
    ev_min: u32,
    ev_max: u32,
}

impl GeneratorProfile {
    fn units(&self) -> Result<Units, GenerationError> {
        if self.durations_s.is_empty() {
            return Err(GenerationError::InvalidProfile("durations_s is empty".into()));
        }
        let durations =
            self.durations_s.iter().map(|d| half_units("durations_s", *d)).collect::<Result<Vec<_>, _>>()?;
        if durations.contains(&0) {
            return Err(GenerationError::InvalidProfile("durations must be positive".into()));
        }
        let u = Units {
            durations,
            gap: half_units("min_gap_s", self.min_gap_s)?,
            margin: half_units("edge_margin_s", self.edge_margin_s)?,
            ev_min: half_units("event_min_s", self.event_min_s)?,
            ev_max: half_units("event_max_s", self.event_max_s)?,
        };
        if self.min_events == 0 || self.min_events > self.max_events {
            return Err(GenerationError::InvalidProfile(format!(
                "need 1 <= min_events <= max_events, got {}..{}",
                self.min_events, self.max_events
            )));
        }
        if u.ev_min == 0 || u.ev_min > u.ev_max {
            return Err(GenerationError::InvalidProfile("need 0 < event_min_s <= event_max_s".into()));
        }
        let max_events = self.max_events as usize;
        if max_events > SOUNDS.len() || max_events > OBJECTS.len() {
            return Err(GenerationError::Unsatisfiable(format!(
                "{} events per scene exceed the {}-label vocabulary",
                self.max_events,
                SOUNDS.len().min(OBJECTS.len())
            )));
        }
        if self.max_speech_segments as usize > PHRASES.len() {
            return Err(GenerationError::Unsatisfiable(format!(
                "{} speech segments exceed the {}-phrase vocabulary",
                self.max_speech_segments,
                PHRASES.len()
            )));
        }
        let worst = self.max_events as u64 * u.ev_max as u64
            + (self.max_events as u64 - 1) * u.gap as u64
            + 2 * u.margin as u64;
        let shortest = *u.durations.iter().min().expect("non-empty");
        if worst > shortest as u64 {
            return Err(GenerationError::Unsatisfiable(format!(
                "{} events of up to {} s with {} s gaps and {} s margins need {} s, shortest scene is {} s",
                self.max_events,
                self.event_max_s,
                self.min_gap_s,
                self.edge_margin_s,
                worst as f64 / 2.0,
                shortest as f64 / 2.0
            )));
        }
        // FINE facts must stay inspectable after localization padding.
        let inspect = self.event_max_s + 2.0 * INSPECT_PAD_S;
        if inspect > FINE_WINDOW_MIN_S {
            return Err(GenerationError::Unsatisfiable(format!(
                "event_max_s {} plus inspection padding exceeds the {FINE_WINDOW_MIN_S} s FINE window",
                self.event_max_s
            )));
        }
        Ok(u)
    }
}

const FINE_WINDOW_MIN_S: f64 = 10.0;
const FINE_WINDOW_MAX_S: f64 = 20.0;

fn below(rng: &mut ChaCha8Rng, n: usize) -> usize {
    debug_assert!(n > 0 && n <= u32::MAX as usize);
    rng.gen_range(0..n as u32) as usize
}

fn inclusive(rng: &mut ChaCha8Rng, lo: u32, hi: u32) -> u32 {
    rng.gen_range(lo..=hi)
}

/// Fisher-Yates over `u32` draws.
fn shuffle<T>(rng: &mut ChaCha8Rng, items: &mut [T]) {
    for i in (1..items.len()).rev() {
        let j = below(rng, i + 1);
        items.swap(i, j);
    }
}

/// `k` distinct indices from `0..n`, in draw order.
fn sample_indices(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    shuffle(rng, &mut idx);
    idx.truncate(k);
    idx
}

fn secs(units: u32) -> f64 {
    units as f64 / 2.0
}

fn window(start: u32, end: u32) -> TimeWindow {
    TimeWindow::new(secs(start), secs(end)).expect("generator windows are non-empty")
}

/// A scene plus the bookkeeping needed to write questions about it.
struct Draft {
    scene: Scene,
    /// `(event index, fine fact index, object, value)` per event.
    probes: Vec<(usize, usize, &'static str, String)>,
    setting: &'static str,
    setting_fact: usize,
}

fn value_terms(value: &str) -> Terms {
    Terms::new(value)
}

fn draft_scene(seed: u64, index: usize, profile: &GeneratorProfile, u: &Units) -> Draft {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);

    let dur = u.durations[index % u.durations.len()];
    let k = inclusive(&mut rng, profile.min_events, profile.max_events) as usize;
    let lens: Vec<u32> = (0..k).map(|_| inclusive(&mut rng, u.ev_min, u.ev_max)).collect();
    let used: u32 = lens.iter().sum::<u32>() + (k as u32 - 1) * u.gap + 2 * u.margin;
    let slack = dur - used;
    // k+1 bins of free time around the events
    let mut cuts: Vec<u32> = (0..k).map(|_| inclusive(&mut rng, 0, slack)).collect();
    cuts.sort_unstable();
    let mut bins = Vec::with_capacity(k + 1);
    let mut prev = 0;
    for c in &cuts {
        bins.push(c - prev);
        prev = *c;
    }
    bins.push(slack - prev);

    let sounds = sample_indices(&mut rng, SOUNDS.len(), k);
    let objects = sample_indices(&mut rng, OBJECTS.len(), k);

    let mut events = Vec::with_capacity(k);
    let mut facts = Vec::new();
    let mut probes = Vec::with_capacity(k);
    let mut used_value_terms = BTreeSet::new();
    let mut t = u.margin + bins[0];
    for i in 0..k {
        let (label, description) = SOUNDS[sounds[i]];
        let (start, end) = (t, t + lens[i]);
        events.push(AudioEvent {
            id: format!("ev{i}"),
            label: label.to_string(),
            window: window(start, end),
            description: description.to_string(),
        });
        let value = loop {
            let v = format!(
                "{} {}",
                VALUE_HEADS[below(&mut rng, VALUE_HEADS.len())],
                VALUE_TAILS[below(&mut rng, VALUE_TAILS.len())]
            );
            let terms = value_terms(&v);
            if terms.iter().all(|t| !used_value_terms.contains(t)) {
                used_value_terms.extend(terms.iter().map(str::to_string));
                break v;
            }
        };
        let fact_len = inclusive(&mut rng, 1, lens[i]);
        let offset = inclusive(&mut rng, 0, lens[i] - fact_len);
        let object = OBJECTS[objects[i]];
        probes.push((i, facts.len(), object, value.clone()));
        facts.push(VisualFact {
            id: format!("vf{i}"),
            window: window(start + offset, start + offset + fact_len),
            statement: format!("the text on the {object} is '{value}'"),
            granularity: Granularity::Fine,
            min_fps: inclusive(&mut rng, 3, 5) as f64,
            max_query_window_s: inclusive(&mut rng, FINE_WINDOW_MIN_S as u32, FINE_WINDOW_MAX_S as u32) as f64,
        });
        t = end + u.gap + bins[i + 1];
    }

    let setting = SETTINGS[below(&mut rng, SETTINGS.len())];
    let activity = ACTIVITIES[below(&mut rng, ACTIVITIES.len())];
    let full = window(0, dur);
    let setting_fact = facts.len();
    facts.push(VisualFact {
        id: "vc0".into(),
        window: full,
        statement: format!("the scene is set in a {setting}"),
        granularity: Granularity::Coarse,
        min_fps: inclusive(&mut rng, 1, 2) as f64,
        max_query_window_s: secs(dur),
    });
    facts.push(VisualFact {
        id: "vc1".into(),
        window: full,
        statement: activity.to_string(),
        granularity: Granularity::Coarse,
        min_fps: inclusive(&mut rng, 1, 2) as f64,
        max_query_window_s: secs(dur),
    });

    let n_speech = inclusive(&mut rng, 0, profile.max_speech_segments) as usize;
    let phrases = sample_indices(&mut rng, PHRASES.len(), n_speech);
    let mut speech: Vec<SpeechSegment> = phrases
        .into_iter()
        .map(|p| {
            let len = inclusive(&mut rng, 3, 6).min(dur);
            let start = inclusive(&mut rng, 0, dur - len);
            SpeechSegment { window: window(start, start + len), transcript: PHRASES[p].to_string() }
        })
        .collect();
    speech.sort_by(|a, b| {
        a.window.start_s().total_cmp(&b.window.start_s()).then_with(|| a.transcript.cmp(&b.transcript))
    });

    let labels: Vec<&str> = events.iter().map(|e| e.label.as_str()).collect();
    let global_audio_summary = match labels.as_slice() {
        [one] => format!("ambient recording with {one}"),
        [init @ .., last] => format!("ambient recording with {} and {last}", init.join(", ")),
        [] => "ambient recording".to_string(),
    };

    let scene = Scene {
        id: format!("s{seed}-{index:04}"),
        duration_s: secs(dur),
        audio_events: events,
        speech_segments: speech,
        visual_facts: facts,
        global_audio_summary,
        global_visual_summary: format!("handheld vlog footage filmed at a {setting}"),
    };
    Draft { scene, probes, setting, setting_fact }
}

fn scene_terms(scene: &Scene) -> Terms {
    let mut all = Terms::default();
    for text in scene.texts() {
        all.extend_text(text);
    }
    all
}

/// Picks `n` distractors from `pool` (then `fallback`) whose terms never occur in the scene.
fn pick_distractors(
    rng: &mut ChaCha8Rng,
    pool: &[String],
    fallback: &[String],
    forbidden: &Terms,
    correct: &str,
    n: usize,
) -> Vec<String> {
    let mut chosen: Vec<String> = Vec::with_capacity(n);
    let ok = |c: &str, chosen: &[String]| {
        c != correct && !chosen.iter().any(|x| x == c) && Terms::new(c).iter().all(|t| !forbidden.contains(t))
    };
    if !pool.is_empty() {
        for _ in 0..DISTRACTOR_TRIES {
            if chosen.len() == n {
                break;
            }
            let c = &pool[below(rng, pool.len())];
            if ok(c, &chosen) {
                chosen.push(c.clone());
            }
        }
    }
    if chosen.len() < n {
        let mut order: Vec<usize> = (0..fallback.len()).collect();
        shuffle(rng, &mut order);
        for i in order {
            if chosen.len() == n {
                break;
            }
            if ok(&fallback[i], &chosen) {
                chosen.push(fallback[i].clone());
            }
        }
    }
    chosen
}

fn assemble_choices(correct: String, distractors: Vec<String>, slot: usize) -> Vec<String> {
    let mut choices = distractors;
    choices.insert(slot, correct);
    choices
}

fn fail(item: &str, reason: impl Into<String>) -> GenerationError {
    GenerationError::Verification { item: item.to_string(), reason: reason.into() }
}

/// Mechanical checks that a cross-modal item is answerable through
/// `EVENT_LOCATION(label) -> CLIP_QA(window)` and not from coarse evidence.
fn verify_cross_modal(
    q: &QuestionItem,
    scene: &Scene,
    event: usize,
    fact: usize,
    value: &str,
    cfg: &RetrievalConfig,
) -> Result<(), GenerationError> {
    let qid = q.id.as_str();
    q.validate(Some(scene)).map_err(|e| fail(qid, e.to_string()))?;
    let key = oracle_answer(q, scene, cfg).map_err(|e| fail(qid, e.to_string()))?;
    if key != q.answer_index {
        return Err(fail(qid, format!("oracle picked {key}, key says {}", q.answer_index)));
    }

    let target = &scene.audio_events[event];
    let label = Terms::new(&target.label);
    let located: Vec<usize> = scene
        .audio_events
        .iter()
        .enumerate()
        .filter(|(_, e)| cfg.matches(&label, &Terms::new(&format!("{} {}", e.label, e.description))))
        .map(|(i, _)| i)
        .collect();
    if located != [event] {
        return Err(fail(qid, format!("label '{}' locates events {located:?}", target.label)));
    }
    let question = Terms::new(&q.question);
    let label_hits: Vec<&str> = scene
        .audio_events
        .iter()
        .filter(|e| cfg.matches(&Terms::new(&e.label), &question))
        .map(|e| e.label.as_str())
        .collect();
    if label_hits != [target.label.as_str()] {
        return Err(fail(qid, format!("question keywords select labels {label_hits:?}")));
    }

    let limits = ToolLimits::default();
    let clip = clamp_window(&target.window.padded(INSPECT_PAD_S), scene.duration_s);
    let f = &scene.visual_facts[fact];
    if !f.visible_in(&clip, limits.clip_fps, limits.containment_pad_s) {
        return Err(fail(qid, format!("fact {} not visible in inspection window {clip}", f.id)));
    }
    for (i, other) in scene.visual_facts.iter().enumerate() {
        let hit = cfg.matches(&question, &Terms::new(&other.statement));
        if (i == fact) != hit {
            return Err(fail(qid, format!("question match on fact {} is {hit}", other.id)));
        }
    }

    let answer = Terms::new(value);
    if answer.iter().any(|t| question.contains(t)) {
        return Err(fail(qid, "question leaks the answer"));
    }
    for (i, other) in scene.visual_facts.iter().enumerate() {
        if i != fact && answer.iter().any(|t| Terms::new(&other.statement).contains(t)) {
            return Err(fail(qid, format!("answer terms appear in fact {}", other.id)));
        }
    }
    let mut audio_side = Terms::default();
    for e in &scene.audio_events {
        audio_side.extend_text(&e.label);
        audio_side.extend_text(&e.description);
    }
    for s in &scene.speech_segments {
        audio_side.extend_text(&s.transcript);
    }
    audio_side.extend_text(&scene.global_audio_summary);
    audio_side.extend_text(&scene.global_visual_summary);
    if answer.iter().any(|t| audio_side.contains(t)) {
        return Err(fail(qid, "answer terms appear outside the target fact"));
    }
    Ok(())
}

fn verify_control(q: &QuestionItem, scene: &Scene, cfg: &RetrievalConfig) -> Result<(), GenerationError> {
    q.validate(Some(scene)).map_err(|e| fail(&q.id, e.to_string()))?;
    let key = oracle_answer(q, scene, cfg).map_err(|e| fail(&q.id, e.to_string()))?;
    if key != q.answer_index {
        return Err(fail(&q.id, format!("oracle picked {key}, key says {}", q.answer_index)));
    }
    Ok(())
}

fn distractor_check(q: &QuestionItem, scene_terms: &Terms) -> Result<(), GenerationError> {
    for (i, c) in q.choices.iter().enumerate() {
        if i != q.answer_index && Terms::new(c).iter().any(|t| scene_terms.contains(t)) {
            return Err(fail(&q.id, format!("distractor '{c}' overlaps scene text")));
        }
    }
    if q.choices.len() != CHOICES_PER_QUESTION {
        return Err(fail(&q.id, "not enough distractors available"));
    }
    Ok(())
}

/// Builds `n_scenes` scenes and their questions from `seed`.
///
/// Every scene gets one cross-modal question about the text on an object visible while
/// one of its sound events plays, plus `unimodal_controls_per_scene` questions about the
/// setting. Distractors come from other scenes' facts; with a single scene the built-in
/// vocabulary fills in.
pub fn generate_suite(
    seed: u64,
    n_scenes: usize,
    profile: &GeneratorProfile,
) -> Result<(Vec<Scene>, Vec<QuestionItem>), GenerationError> {
    if n_scenes == 0 {
        return Err(GenerationError::NoScenes);
    }
    let u = profile.units()?;
    let cfg = RetrievalConfig::default();
    let drafts: Vec<Draft> = (0..n_scenes).map(|i| draft_scene(seed, i, profile, &u)).collect();
    for d in &drafts {
        d.scene.validate().map_err(|e| fail(&d.scene.id, e.to_string()))?;
    }

    let all_values: Vec<(usize, String)> =
        drafts.iter().enumerate().flat_map(|(i, d)| d.probes.iter().map(move |p| (i, p.3.clone()))).collect();
    let all_settings: Vec<(usize, String)> =
        drafts.iter().enumerate().map(|(i, d)| (i, d.setting.to_string())).collect();
    let value_vocab: Vec<String> =
        VALUE_HEADS.iter().flat_map(|h| VALUE_TAILS.iter().map(move |t| format!("{h} {t}"))).collect();
    let setting_vocab: Vec<String> = SETTINGS.iter().map(|s| s.to_string()).collect();

    let mut questions = Vec::new();
    for (i, d) in drafts.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(QUESTION_STREAM | i as u64);
        let scene = &d.scene;
        let forbidden = scene_terms(scene);

        let (event, fact, object, value) = &d.probes[below(&mut rng, d.probes.len())];
        let label = &scene.audio_events[*event].label;
        let pool: Vec<String> = all_values.iter().filter(|(j, _)| *j != i).map(|(_, v)| v.clone()).collect();
        let distractors = pick_distractors(&mut rng, &pool, &value_vocab, &forbidden, value, CHOICES_PER_QUESTION - 1);
        let slot = below(&mut rng, CHOICES_PER_QUESTION);
        let q = QuestionItem {
            id: format!("{}-q0", scene.id),
            scene_id: scene.id.clone(),
            question: format!("What text is on the {object} when the {label} is heard?"),
            choices: assemble_choices(value.clone(), distractors, slot.min(CHOICES_PER_QUESTION - 1)),
            answer_index: slot,
            required_fact_ids: vec![scene.audio_events[*event].id.clone(), scene.visual_facts[*fact].id.clone()],
            requires_cross_modal: true,
        };
        distractor_check(&q, &forbidden)?;
        verify_cross_modal(&q, scene, *event, *fact, value, &cfg)?;
        questions.push(q);

        for c in 0..profile.unimodal_controls_per_scene {
            let pool: Vec<String> = all_settings.iter().filter(|(j, _)| *j != i).map(|(_, v)| v.clone()).collect();
            let distractors =
                pick_distractors(&mut rng, &pool, &setting_vocab, &forbidden, d.setting, CHOICES_PER_QUESTION - 1);
            let slot = below(&mut rng, CHOICES_PER_QUESTION);
            let q = QuestionItem {
                id: format!("{}-c{c}", scene.id),
                scene_id: scene.id.clone(),
                question: "Where is the scene set?".to_string(),
                choices: assemble_choices(d.setting.to_string(), distractors, slot),
                answer_index: slot,
                required_fact_ids: vec![scene.visual_facts[d.setting_fact].id.clone()],
                requires_cross_modal: false,
            };
            distractor_check(&q, &forbidden)?;
            verify_control(&q, scene, &cfg)?;
            questions.push(q);
        }
    }
    let scenes = drafts.into_iter().map(|d| d.scene).collect();
    Ok((scenes, questions))
}

impl Suite {
    /// Generates a suite and its manifest (scene files under `scenes/`).
    pub fn generate(seed: u64, n_scenes: usize, profile: &GeneratorProfile) -> Result<Suite, GenerationError> {
        let (scenes, questions) = generate_suite(seed, n_scenes, profile)?;
        let manifest = SuiteManifest {
            format_version: FORMAT_VERSION,
            suite_id: format!("suite-{seed}-{n_scenes}"),
            seed,
            profile: profile.clone(),
            scenes: scenes.iter().map(|s| format!("scenes/{}.scene.json", s.id)).collect(),
            questions: "questions.json".to_string(),
        };
        Ok(Suite { manifest, scenes, questions })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{questions_to_json, scene_to_json};

    fn bytes(scenes: &[Scene], questions: &[QuestionItem]) -> String {
        let mut out: String = scenes.iter().map(scene_to_json).collect();
        out.push_str(&questions_to_json(questions));
        out
    }

    #[test]
    fn vocabularies_are_term_disjoint() {
        let mut seen = BTreeSet::new();
        let groups: Vec<Vec<String>> = vec![
            SOUNDS.iter().map(|(l, _)| l.to_string()).collect(),
            OBJECTS.iter().map(|s| s.to_string()).collect(),
            VALUE_HEADS.iter().chain(VALUE_TAILS).map(|s| s.to_string()).collect(),
            SETTINGS.iter().map(|s| s.to_string()).collect(),
        ];
        for group in groups {
            for entry in group {
                for t in Terms::new(&entry).iter() {
                    assert!(seen.insert(t.to_string()), "term '{t}' reused ({entry})");
                }
            }
        }
        // descriptions must not mention any label term
        for (label, _) in SOUNDS {
            for (other, desc) in SOUNDS {
                if label == other {
                    continue;
                }
                let d = Terms::new(desc);
                assert!(Terms::new(label).iter().all(|t| !d.contains(t)), "{label} in '{desc}'");
            }
        }
    }

    #[test]
    fn seed_42_single_scene_shape() {
        let (scenes, questions) = generate_suite(42, 1, &GeneratorProfile::default()).unwrap();
        assert_eq!(scenes.len(), 1);
        let s = &scenes[0];
        assert_eq!(s.duration_s, 30.0);
        assert!((2..=4).contains(&s.audio_events.len()));
        let fine = s.visual_facts.iter().filter(|f| f.granularity == Granularity::Fine).count();
        assert_eq!(fine, s.audio_events.len());
        assert_eq!(questions.len(), 1);
        assert!(questions[0].requires_cross_modal);
    }

    #[test]
    fn regeneration_is_byte_identical() {
        let p = GeneratorProfile::default();
        let (a, qa) = generate_suite(42, 5, &p).unwrap();
        let (b, qb) = generate_suite(42, 5, &p).unwrap();
        assert_eq!(bytes(&a, &qa), bytes(&b, &qb));
    }

    #[test]
    fn different_seeds_differ() {
        let p = GeneratorProfile::default();
        let (a, qa) = generate_suite(42, 1, &p).unwrap();
        let (b, qb) = generate_suite(43, 1, &p).unwrap();
        assert_ne!(a[0].id, b[0].id);
        assert_ne!(bytes(&a, &qa).replace("s42", "s43"), bytes(&b, &qb));
    }

    #[test]
    fn zero_scenes_rejected() {
        assert_eq!(generate_suite(1, 0, &GeneratorProfile::default()), Err(GenerationError::NoScenes));
    }

    #[test]
    fn crowded_profile_is_unsatisfiable() {
        let p = GeneratorProfile { min_events: 10, max_events: 12, ..Default::default() };
        assert!(matches!(generate_suite(1, 1, &p), Err(GenerationError::Unsatisfiable(_))));
    }

    #[test]
    fn off_grid_times_rejected() {
        let p = GeneratorProfile { min_gap_s: 0.3, ..Default::default() };
        assert!(matches!(generate_suite(1, 1, &p), Err(GenerationError::InvalidProfile(_))));
    }

    #[test]
    fn controls_are_generated_and_keyed() {
        let p = GeneratorProfile { unimodal_controls_per_scene: 1, ..Default::default() };
        let (scenes, questions) = generate_suite(7, 10, &p).unwrap();
        assert_eq!(questions.len(), 20);
        let cfg = RetrievalConfig::default();
        for q in &questions {
            let s = scenes.iter().find(|s| s.id == q.scene_id).unwrap();
            assert_eq!(oracle_answer(q, s, &cfg).unwrap(), q.answer_index);
        }
    }

    #[test]
    fn hundred_scene_suite_keys_check_out() {
        let (scenes, questions) = generate_suite(42, 100, &GeneratorProfile::default()).unwrap();
        assert_eq!(scenes.len(), 100);
        assert!(questions.len() >= 100);
        let cfg = RetrievalConfig::default();
        for q in &questions {
            let s = scenes.iter().find(|s| s.id == q.scene_id).unwrap();
            assert_eq!(oracle_answer(q, s, &cfg).unwrap(), q.answer_index);
        }
    }

    #[test]
    fn durations_alternate_between_subsets() {
        let (scenes, _) = generate_suite(9, 4, &GeneratorProfile::default()).unwrap();
        let d: Vec<f64> = scenes.iter().map(|s| s.duration_s).collect();
        assert_eq!(d, vec![30.0, 60.0, 30.0, 60.0]);
    }
}
