use proptest::prelude::*;

use omniloop_core::action::{ActionArgs, ActionKind};
use omniloop_core::cost::{CostModel, TokenCost};
use omniloop_core::episode::{parse_trace, run_episode, serialize_trace, EpisodeConfig, Termination};
use omniloop_core::planner::{HeuristicConfig, HeuristicPlanner, PlannerDecision, ReplayPlanner};
use omniloop_core::retrieval::RetrievalConfig;
use omniloop_core::scene::{
    oracle_answer, parse_questions, parse_scene, questions_to_json, scene_to_json, GeneratorProfile, Suite,
};
use omniloop_core::time::TimeWindow;
use omniloop_core::tools::ToolRegistry;

fn decision() -> impl Strategy<Value = PlannerDecision> {
    let window = (0u32..60, 1u32..40).prop_map(|(s, d)| TimeWindow::new(s as f64, (s + d) as f64).unwrap());
    let args = prop_oneof![
        Just(ActionArgs::GlobalQa { question: "what is on the sign".into() }),
        window.prop_map(|window| ActionArgs::ClipQa { question: "what does the sign say".into(), window }),
        Just(ActionArgs::Asr {}),
        Just(ActionArgs::GlobalCaption {}),
        Just(ActionArgs::AudioQa { question: "what sound".into() }),
        Just(ActionArgs::EventList {}),
        "[a-z ]{0,12}".prop_map(|query| ActionArgs::EventLocation { query }),
        "[A-Da-z]{1,3}".prop_map(|answer| ActionArgs::Answer { answer }),
    ];
    args.prop_map(|a| PlannerDecision::new(a, "p"))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn replayed_scripts_obey_loop_invariants(
        seed in 0u64..1000,
        script in prop::collection::vec(decision(), 0..45),
        max_steps in 1usize..35,
        budget in prop::option::of(0u64..20_000),
    ) {
        let suite = Suite::generate(seed, 1, &GeneratorProfile::default()).unwrap();
        let q = suite.questions[0].to_query(&suite.scenes[0]);
        let cfg = EpisodeConfig { max_steps, token_budget: budget.map(|v| TokenCost::new(v, v, v)), ..EpisodeConfig::default() };
        let registry = ToolRegistry::mock(CostModel::default());
        let t = run_episode(&q, &suite.scenes[0], &mut ReplayPlanner::new(script.clone()), &registry, &cfg).unwrap();

        prop_assert!(t.entries.tool_calls() <= max_steps);
        let n = t.entries.len();
        prop_assert_eq!(&t.script()[..], &script[..n.min(script.len())]);
        match t.termination {
            Termination::Answered => prop_assert_eq!(t.actions().last().copied(), Some(ActionKind::Answer)),
            Termination::MaxSteps => prop_assert_eq!(t.entries.tool_calls(), max_steps),
            Termination::PlannerFailure => prop_assert_eq!(n, script.len()),
        }
        let sum: TokenCost = t.entries.entries().iter().filter_map(|e| e.observation.as_ref()).map(|o| o.cost).sum();
        prop_assert_eq!(sum, t.total_cost);

        let text = serialize_trace(&t);
        prop_assert_eq!(parse_trace(&text).unwrap(), t);
    }

    #[test]
    fn generated_scenes_round_trip_and_heuristic_matches_oracle(seed in 0u64..10_000) {
        let suite = Suite::generate(seed, 2, &GeneratorProfile::default()).unwrap();
        let retrieval = RetrievalConfig::default();
        for scene in &suite.scenes {
            scene.validate().unwrap();
            let back = parse_scene(&scene_to_json(scene), "mem").unwrap();
            prop_assert_eq!(&back, scene);
        }
        prop_assert_eq!(parse_questions(&questions_to_json(&suite.questions), "mem").unwrap(), suite.questions.clone());
        for item in &suite.questions {
            let scene = suite.scene(&item.scene_id).unwrap();
            prop_assert_eq!(oracle_answer(item, scene, &retrieval).unwrap(), item.answer_index);
            let mut p = HeuristicPlanner::new(HeuristicConfig::default(), retrieval);
            let t = run_episode(&item.to_query(scene), scene, &mut p, &ToolRegistry::mock(CostModel::default()), &EpisodeConfig::default()).unwrap();
            prop_assert_eq!(t.answer_index(&retrieval), Some(item.answer_index), "{}", item.id);
        }
    }
}
