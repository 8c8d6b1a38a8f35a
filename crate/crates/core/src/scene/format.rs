//! On-disk scene, question and suite files (JSON, `format_version` 1).

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{
    AudioEvent, GeneratorProfile, Granularity, QuestionItem, Scene, SpeechSegment, ValidationError, VisualFact,
};
use crate::time::{RawWindow, TimeWindow};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{origin}:{line}:{column}: parse error: {message}")]
    Parse { origin: String, line: usize, column: usize, message: String },
    #[error("{origin}: invalid {source}")]
    Validation {
        origin: String,
        #[source]
        source: ValidationError,
    },
}

impl SceneError {
    fn parse(origin: &str, err: serde_json::Error) -> Self {
        SceneError::Parse {
            origin: origin.to_string(),
            line: err.line(),
            column: err.column(),
            message: err.to_string(),
        }
    }

    fn invalid(origin: &str, source: ValidationError) -> Self {
        SceneError::Validation { origin: origin.to_string(), source }
    }

    pub fn is_io(&self) -> bool {
        matches!(self, SceneError::Io { .. })
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneDoc {
    format_version: u32,
    id: String,
    duration_s: f64,
    audio_events: Vec<AudioEventDoc>,
    speech_segments: Vec<SpeechSegmentDoc>,
    visual_facts: Vec<VisualFactDoc>,
    global_audio_summary: String,
    global_visual_summary: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AudioEventDoc {
    id: String,
    label: String,
    window: RawWindow,
    description: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpeechSegmentDoc {
    window: RawWindow,
    transcript: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VisualFactDoc {
    id: String,
    window: RawWindow,
    statement: String,
    granularity: Granularity,
    min_fps: f64,
    max_query_window_s: f64,
}

fn window(field: String, raw: RawWindow) -> Result<TimeWindow, ValidationError> {
    TimeWindow::new(raw.start_s, raw.end_s).map_err(|e| ValidationError::new(field, e.to_string()))
}

impl SceneDoc {
    fn into_scene(self) -> Result<Scene, ValidationError> {
        if self.format_version != FORMAT_VERSION {
            return Err(ValidationError::new(
                "format_version",
                format!("unsupported version {}, expected {FORMAT_VERSION}", self.format_version),
            ));
        }
        let audio_events = self
            .audio_events
            .into_iter()
            .enumerate()
            .map(|(i, e)| {
                Ok(AudioEvent {
                    window: window(format!("audio_events[{i}].window"), e.window)?,
                    id: e.id,
                    label: e.label,
                    description: e.description,
                })
            })
            .collect::<Result<_, ValidationError>>()?;
        let speech_segments = self
            .speech_segments
            .into_iter()
            .enumerate()
            .map(|(i, s)| {
                Ok(SpeechSegment {
                    window: window(format!("speech_segments[{i}].window"), s.window)?,
                    transcript: s.transcript,
                })
            })
            .collect::<Result<_, ValidationError>>()?;
        let visual_facts = self
            .visual_facts
            .into_iter()
            .enumerate()
            .map(|(i, f)| {
                Ok(VisualFact {
                    window: window(format!("visual_facts[{i}].window"), f.window)?,
                    id: f.id,
                    statement: f.statement,
                    granularity: f.granularity,
                    min_fps: f.min_fps,
                    max_query_window_s: f.max_query_window_s,
                })
            })
            .collect::<Result<_, ValidationError>>()?;
        let scene = Scene {
            id: self.id,
            duration_s: self.duration_s,
            audio_events,
            speech_segments,
            visual_facts,
            global_audio_summary: self.global_audio_summary,
            global_visual_summary: self.global_visual_summary,
        };
        scene.validate()?;
        Ok(scene)
    }

    fn from_scene(s: &Scene) -> Self {
        SceneDoc {
            format_version: FORMAT_VERSION,
            id: s.id.clone(),
            duration_s: s.duration_s,
            audio_events: s
                .audio_events
                .iter()
                .map(|e| AudioEventDoc {
                    id: e.id.clone(),
                    label: e.label.clone(),
                    window: e.window.into(),
                    description: e.description.clone(),
                })
                .collect(),
            speech_segments: s
                .speech_segments
                .iter()
                .map(|x| SpeechSegmentDoc { window: x.window.into(), transcript: x.transcript.clone() })
                .collect(),
            visual_facts: s
                .visual_facts
                .iter()
                .map(|f| VisualFactDoc {
                    id: f.id.clone(),
                    window: f.window.into(),
                    statement: f.statement.clone(),
                    granularity: f.granularity,
                    min_fps: f.min_fps,
                    max_query_window_s: f.max_query_window_s,
                })
                .collect(),
            global_audio_summary: s.global_audio_summary.clone(),
            global_visual_summary: s.global_visual_summary.clone(),
        }
    }
}

/// Parses and validates a scene document. `origin` names the source in diagnostics.
pub fn parse_scene(text: &str, origin: &str) -> Result<Scene, SceneError> {
    let doc: SceneDoc = serde_json::from_str(text).map_err(|e| SceneError::parse(origin, e))?;
    doc.into_scene().map_err(|e| SceneError::invalid(origin, e))
}

pub fn load_scene(path: &Path) -> Result<Scene, SceneError> {
    let text = read(path)?;
    parse_scene(&text, &path.display().to_string())
}

/// Pretty JSON with a trailing newline; stable field order.
pub fn scene_to_json(scene: &Scene) -> String {
    let mut s = serde_json::to_string_pretty(&SceneDoc::from_scene(scene)).expect("scene serializes");
    s.push('\n');
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuestionsDoc {
    pub format_version: u32,
    pub questions: Vec<QuestionItem>,
}

pub fn parse_questions(text: &str, origin: &str) -> Result<Vec<QuestionItem>, SceneError> {
    let doc: QuestionsDoc = serde_json::from_str(text).map_err(|e| SceneError::parse(origin, e))?;
    if doc.format_version != FORMAT_VERSION {
        return Err(SceneError::invalid(
            origin,
            ValidationError::new("format_version", format!("unsupported version {}", doc.format_version)),
        ));
    }
    for (i, q) in doc.questions.iter().enumerate() {
        q.validate(None).map_err(|e| {
            SceneError::invalid(origin, ValidationError::new(format!("questions[{i}].{}", e.field), e.message))
        })?;
    }
    Ok(doc.questions)
}

pub fn load_questions(path: &Path) -> Result<Vec<QuestionItem>, SceneError> {
    let text = read(path)?;
    parse_questions(&text, &path.display().to_string())
}

pub fn questions_to_json(questions: &[QuestionItem]) -> String {
    let doc = QuestionsDoc { format_version: FORMAT_VERSION, questions: questions.to_vec() };
    let mut s = serde_json::to_string_pretty(&doc).expect("questions serialize");
    s.push('\n');
    s
}

/// Index of a generated suite: which scene files and question file belong together.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteManifest {
    pub format_version: u32,
    pub suite_id: String,
    pub seed: u64,
    pub profile: GeneratorProfile,
    /// Paths relative to the manifest's directory.
    pub scenes: Vec<String>,
    pub questions: String,
}

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq)]
pub struct Suite {
    pub manifest: SuiteManifest,
    pub scenes: Vec<Scene>,
    pub questions: Vec<QuestionItem>,
}

impl Suite {
    pub fn scene(&self, id: &str) -> Option<&Scene> {
        self.scenes.iter().find(|s| s.id == id)
    }
}

pub fn load_suite(dir: &Path) -> Result<Suite, SceneError> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let text = read(&manifest_path)?;
    let origin = manifest_path.display().to_string();
    let manifest: SuiteManifest = serde_json::from_str(&text).map_err(|e| SceneError::parse(&origin, e))?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(SceneError::invalid(
            &origin,
            ValidationError::new("format_version", format!("unsupported version {}", manifest.format_version)),
        ));
    }
    let scenes = manifest.scenes.iter().map(|rel| load_scene(&dir.join(rel))).collect::<Result<Vec<_>, _>>()?;
    let questions_path = dir.join(&manifest.questions);
    let questions = load_questions(&questions_path)?;
    let qorigin = questions_path.display().to_string();
    for (i, q) in questions.iter().enumerate() {
        let scene = scenes.iter().find(|s| s.id == q.scene_id).ok_or_else(|| {
            SceneError::invalid(
                &qorigin,
                ValidationError::new(format!("questions[{i}].scene_id"), format!("unknown scene '{}'", q.scene_id)),
            )
        })?;
        q.validate(Some(scene)).map_err(|e| {
            SceneError::invalid(&qorigin, ValidationError::new(format!("questions[{i}].{}", e.field), e.message))
        })?;
    }
    Ok(Suite { manifest, scenes, questions })
}

/// Writes manifest, scene files and questions file under `dir`, each atomically.
pub fn write_suite(dir: &Path, suite: &Suite) -> Result<(), SceneError> {
    let scenes_dir = dir.join("scenes");
    fs::create_dir_all(&scenes_dir).map_err(|source| SceneError::Io { path: scenes_dir.clone(), source })?;
    for (scene, rel) in suite.scenes.iter().zip(&suite.manifest.scenes) {
        write_atomic(&dir.join(rel), scene_to_json(scene).as_bytes())?;
    }
    write_atomic(&dir.join(&suite.manifest.questions), questions_to_json(&suite.questions).as_bytes())?;
    let mut manifest = serde_json::to_string_pretty(&suite.manifest).expect("manifest serializes");
    manifest.push('\n');
    write_atomic(&dir.join(MANIFEST_FILE), manifest.as_bytes())
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), SceneError> {
    crate::fsutil::write_atomic(path, bytes).map_err(|source| SceneError::Io { path: path.to_path_buf(), source })
}

fn read(path: &Path) -> Result<String, SceneError> {
    fs::read_to_string(path).map_err(|source| SceneError::Io { path: path.to_path_buf(), source })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::test_support::kitten;

    const KITTEN: &str = include_str!("../../../../fixtures/scenes/kitten_vlog.scene.json");

    #[test]
    fn kitten_fixture_contents() {
        let s = kitten();
        assert_eq!(s.audio_events.len(), 1);
        assert_eq!(s.audio_events[0].label, "cat meowing");
        assert_eq!(s.audio_events[0].window, TimeWindow::new(12.0, 15.5).unwrap());
        let fine: Vec<_> = s.visual_facts.iter().filter(|f| f.granularity == Granularity::Fine).collect();
        assert_eq!(fine.len(), 1);
        assert!(fine[0].statement.contains("Fu Lu"));
        assert_eq!(fine[0].window, TimeWindow::new(13.0, 14.0).unwrap());
    }

    #[test]
    fn inverted_window_is_validation_error() {
        let bad = KITTEN.replacen("\"end_s\": 15.5", "\"end_s\": 11.0", 1);
        match parse_scene(&bad, "bad.json") {
            Err(SceneError::Validation { source, .. }) => {
                assert_eq!(source.field, "audio_events[0].window")
            }
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn empty_file_is_parse_error() {
        assert!(matches!(parse_scene("", "empty.json"), Err(SceneError::Parse { .. })));
    }

    #[test]
    fn unknown_field_is_parse_error_with_position() {
        let bad = KITTEN.replacen("\"id\": \"kitten_vlog\"", "\"id\": \"kitten_vlog\", \"colour\": 1", 1);
        match parse_scene(&bad, "x.json") {
            Err(SceneError::Parse { line, message, .. }) => {
                assert!(line > 1);
                assert!(message.contains("colour"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn wrong_version_rejected() {
        let bad = KITTEN.replacen("\"format_version\": 1", "\"format_version\": 2", 1);
        assert!(matches!(parse_scene(&bad, "v.json"), Err(SceneError::Validation { .. })));
    }

    #[test]
    fn scene_round_trips_through_json() {
        let s = kitten();
        let text = scene_to_json(&s);
        assert_eq!(parse_scene(&text, "rt").unwrap(), s);
        assert_eq!(text, KITTEN);
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_scene(Path::new("/nonexistent/nope.scene.json")).unwrap_err();
        assert!(err.is_io());
        assert!(err.to_string().contains("/nonexistent/nope.scene.json"));
    }
}
