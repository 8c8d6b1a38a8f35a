use thiserror::Error;

use super::{QuestionItem, Scene, SceneItem};
use crate::retrieval::{RetrievalConfig, Terms};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("question {question} targets scene {expected}, got {actual}")]
    SceneMismatch { question: String, expected: String, actual: String },
    #[error("question {question} references unknown id '{id}'")]
    MissingId { question: String, id: String },
    #[error("question {question}: no choice matches the referenced ground truth")]
    NoMatch { question: String },
    #[error("question {question}: choices {indices:?} all match the referenced ground truth")]
    Ambiguous { question: String, indices: Vec<usize> },
}

/// Brute-force answer key: the unique choice supported by the statements that the
/// question's `required_fact_ids` point at, under the tools' retrieval rules.
pub fn oracle_answer(q: &QuestionItem, scene: &Scene, cfg: &RetrievalConfig) -> Result<usize, OracleError> {
    if q.scene_id != scene.id {
        return Err(OracleError::SceneMismatch {
            question: q.id.clone(),
            expected: q.scene_id.clone(),
            actual: scene.id.clone(),
        });
    }
    let mut docs = Vec::with_capacity(q.required_fact_ids.len());
    for id in &q.required_fact_ids {
        match scene.find(id) {
            Some(SceneItem::Fact(f)) => docs.push(Terms::new(&f.statement)),
            Some(SceneItem::Event(e)) => docs.push(Terms::new(&format!("{} {}", e.label, e.description))),
            None => return Err(OracleError::MissingId { question: q.id.clone(), id: id.clone() }),
        }
    }
    let supported: Vec<usize> = q
        .choices
        .iter()
        .enumerate()
        .filter(|(_, c)| {
            let terms = Terms::new(c);
            docs.iter().any(|d| cfg.matches(&terms, d))
        })
        .map(|(i, _)| i)
        .collect();
    match supported.as_slice() {
        [] => Err(OracleError::NoMatch { question: q.id.clone() }),
        [one] => Ok(*one),
        _ => Err(OracleError::Ambiguous { question: q.id.clone(), indices: supported }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::parse_questions;
    use crate::scene::test_support::kitten;

    fn questions() -> Vec<QuestionItem> {
        parse_questions(include_str!("../../../../fixtures/scenes/kitten_vlog.questions.json"), "kitten questions")
            .unwrap()
    }

    #[test]
    fn fixture_questions_resolve_to_keys() {
        let scene = kitten();
        let cfg = RetrievalConfig::default();
        for q in questions() {
            let idx = oracle_answer(&q, &scene, &cfg).unwrap();
            assert_eq!(idx, q.answer_index, "{}", q.id);
        }
        let q1 = &questions()[0];
        assert!(q1.choices[oracle_answer(q1, &scene, &cfg).unwrap()].contains("Fu Lu"));
    }

    #[test]
    fn missing_reference_is_error() {
        let mut q = questions().remove(0);
        q.required_fact_ids.push("vf_nowhere".into());
        assert_eq!(
            oracle_answer(&q, &kitten(), &RetrievalConfig::default()),
            Err(OracleError::MissingId { question: "q1".into(), id: "vf_nowhere".into() })
        );
    }

    #[test]
    fn unmatched_choices_is_error() {
        let mut q = questions().remove(0);
        q.choices[1] = "Bao An".into();
        assert!(matches!(oracle_answer(&q, &kitten(), &RetrievalConfig::default()), Err(OracleError::NoMatch { .. })));
    }
}
