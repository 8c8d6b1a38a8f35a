use omniloop_core::analytics::{dense_caption_baseline, is_correct, run_suite, score_suite};
use omniloop_core::episode::EpisodeConfig;
use omniloop_core::planner::PlannerKind;
use omniloop_core::retrieval::RetrievalConfig;
use omniloop_core::scene::{GeneratorProfile, Suite};

#[test]
fn random_control_on_a_thousand_questions() {
    let suite = Suite::generate(1, 1000, &GeneratorProfile::default()).unwrap();
    let cfg = EpisodeConfig { seed: 1, ..EpisodeConfig::default() };
    let traces = run_suite(PlannerKind::Random, &suite, &cfg).unwrap();
    let r = score_suite("random", &traces, &suite.questions, &RetrievalConfig::default()).unwrap();
    assert_eq!(r.questions, 1000);
    assert!((0.20..=0.30).contains(&r.accuracy), "random accuracy {}", r.accuracy);
    assert_eq!(r.accuracy, r.correct as f64 / 1000.0);
    let ratio_sum: f64 = r.usage.per_tool.values().map(|s| s.call_ratio).sum();
    assert!((ratio_sum - 1.0).abs() < 1e-9);
}

#[test]
fn dense_baseline_examples() {
    let profile = GeneratorProfile { unimodal_controls_per_scene: 1, ..GeneratorProfile::default() };
    let suite = Suite::generate(11, 20, &profile).unwrap();
    let retrieval = RetrievalConfig::default();
    let cfg = EpisodeConfig::default();
    let mut controls = 0;
    for item in &suite.questions {
        let scene = suite.scene(&item.scene_id).unwrap();
        let t = dense_caption_baseline(&item.to_query(scene), scene, &cfg).unwrap();
        if scene.duration_s == 30.0 {
            assert_eq!(t.total_cost.visual, 15_000, "{}", item.id);
        }
        let last = t.entries.last().unwrap();
        if item.requires_cross_modal {
            assert!(!last.reflection.sufficient, "{}: captions resolved a FINE question", item.id);
        } else {
            controls += 1;
            assert!(is_correct(&t, item.answer_index, &retrieval), "{}", item.id);
        }
    }
    assert_eq!(controls, 20);
}
