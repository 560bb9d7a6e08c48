use std::collections::HashMap;
use std::sync::Arc;

use pcr_core::structio::{parse_reasoning, PromptSet};
use pcr_core::{DraftStyle, EngineConfig, Label, Sample};
use pcr_engine::pipeline::PipelineError;
use pcr_engine::{Generator, Pipeline, ScriptedBackend};
use serde_json::{json, Value};

const DRAFTS: [&str; 8] = [
    "<think>DRAFT-0 ironic contrast</think><answer>yes</answer>",
    "<think>DRAFT-1 sincere</think><answer>no</answer>",
    "<think>DRAFT-2 mocking tone</think><answer>yes</answer>",
    "<answer>no</answer> DRAFT-3",
    "<think>DRAFT-4 unsure</think><answer>maybe</answer>",
    "<think>DRAFT-5 literal</think><answer>no</answer>",
    "<think>DRAFT-6 exaggeration</think><answer>yes</answer>",
    "<think>DRAFT-7 plain</think><answer>no</answer>",
];

const REVISIONS: [&str; 4] = [
    "<think>revisited, the image contradicts the text</think><answer>yes</answer>",
    "<think>revisited, nothing ironic</think><answer>no</answer>",
    "<answer>yes</answer>",
    "<think>revisited</think><answer>unsure</answer>",
];

fn critique_for(i: usize) -> Vec<&'static str> {
    match i % 4 {
        0 => vec![
            "<feedback>Good cross-modal link.</feedback><score>2</score>",
            "<feedback>Shallow.</feedback><score>1</score>",
        ],
        1 => vec!["<feedback>Missed the visual irony.</feedback><score>0</score>"],
        2 => vec!["<feedback>Partly right.</feedback><score>1</score>", "<score>2</score>"],
        _ => vec!["<feedback>Re-check the image.</feedback><score>high</score>"],
    }
}

fn proposal_script() -> Value {
    json!({"rules": [
        {"contains": "Re-answer the original question", "responses": REVISIONS, "cycle": true},
        {"contains": "Does the composite message", "responses": DRAFTS, "cycle": true}
    ]})
}

fn critic_script() -> Value {
    let rules: Vec<Value> = (0..8)
        .map(|i| json!({"contains": format!("DRAFT-{i}"), "responses": critique_for(i), "cycle": true}))
        .collect();
    json!({"rules": rules})
}

fn samples(n: usize) -> Vec<Sample> {
    (0..n)
        .map(|i| {
            let gold = if i % 2 == 0 { Label::Sarcastic } else { Label::NotSarcastic };
            Sample::new(format!("s{i:02}"), format!("caption number {i}")).unwrap().with_gold(gold)
        })
        .collect()
}

fn pipeline(cfg: EngineConfig) -> Pipeline {
    let proposal = Arc::new(ScriptedBackend::from_value(&proposal_script()).unwrap());
    let critic = Arc::new(ScriptedBackend::from_value(&critic_script()).unwrap());
    Pipeline::new(proposal, critic, PromptSet::default(), cfg)
}

fn cfg() -> EngineConfig {
    EngineConfig { workers: 4, seed: 11, ..EngineConfig::default() }
}

fn read_lines(path: &std::path::Path) -> Vec<Value> {
    std::fs::read_to_string(path).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

#[test]
fn proposal_batch_is_deterministic_and_conserved() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
    let data = samples(20);
    let batch = pipeline(cfg()).generate_proposal_rl_batch(&data, &a).unwrap();
    pipeline(cfg()).generate_proposal_rl_batch(&data, &b).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(batch.groups.len(), 20);
    assert!(batch.summary.skipped.is_empty());

    let lines = read_lines(&a);
    assert_eq!(lines.len(), 20 * 16);
    let mut by_group: HashMap<(String, String, i64), Vec<f64>> = HashMap::new();
    for s in &data {
        let mine: Vec<&Value> = lines.iter().filter(|l| l["sample_id"] == s.id()).collect();
        let drafts: Vec<_> = mine.iter().filter(|l| l["group"] == "draft").collect();
        let revs: Vec<_> = mine.iter().filter(|l| l["group"] == "revise").collect();
        assert_eq!((drafts.len(), revs.len()), (8, 8));
        let idx: Vec<i64> = drafts.iter().map(|l| l["idx"].as_i64().unwrap()).collect();
        assert_eq!(idx, (0..8).collect::<Vec<_>>());
        for r in &revs {
            let p = r["parent_idx"].as_i64().unwrap();
            assert!((0..8).contains(&p));
            let parent = drafts.iter().find(|d| d["idx"] == p).unwrap();
            assert!(!parent["completion"].as_str().unwrap().is_empty());
        }
        for l in &mine {
            let key =
                (s.id().to_string(), l["group"].as_str().unwrap().to_string(), l["parent_idx"].as_i64().unwrap_or(-1));
            by_group.entry(key).or_default().push(l["advantage"].as_f64().unwrap());
            let r = &l["reward"];
            let parts: f64 =
                r.as_object().unwrap().iter().filter(|(k, _)| *k != "total").map(|(_, v)| v.as_f64().unwrap()).sum();
            assert_eq!(parts, r["total"].as_f64().unwrap());
            assert!(l["prompt"].is_array());
        }
    }
    // 20 draft groups + 2 revision groups per sample.
    assert_eq!(by_group.len(), 60);
    for (k, adv) in &by_group {
        let mean = adv.iter().sum::<f64>() / adv.len() as f64;
        assert!(mean.abs() <= 1e-9, "{k:?}: {mean}");
    }
}

#[test]
fn draft_line_shape() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("b.jsonl");
    pipeline(cfg()).generate_proposal_rl_batch(&samples(1), &path).unwrap();
    let lines = read_lines(&path);
    let keys = |v: &Value| v.as_object().unwrap().keys().cloned().collect::<Vec<_>>();
    let mut want = vec!["sample_id", "group", "idx", "prompt", "completion", "reward", "advantage", "pred", "gold"];
    want.sort();
    let mut got = keys(&lines[0]);
    got.sort();
    assert_eq!(got, want);
    assert_eq!(keys(&lines[0]["reward"]), ["acc", "eval", "fmt", "total"]);
    assert_eq!(lines[0]["completion"], DRAFTS[0]);
    assert_eq!(lines[0]["pred"], "yes");
    assert_eq!(lines[0]["gold"], "yes");
    // DRAFT-0: correct, well-formed, score 2 → 3.
    assert_eq!(lines[0]["reward"]["total"], 3.0);
    let rev = &lines[8];
    assert_eq!(rev["group"], "revise");
    assert_eq!(keys(&rev["reward"]), ["acc", "fmt", "imp", "total"]);
    assert!(rev["prompt"].as_array().unwrap().len() == 3);
}

#[test]
fn identical_drafts_have_zero_advantage() {
    let proposal = ScriptedBackend::from_value(&json!({"rules": [
        {"contains": "Re-answer", "responses": REVISIONS, "cycle": true},
        {"contains": "Does the composite", "responses": [DRAFTS[0]], "cycle": true}
    ]}))
    .unwrap();
    // Identical drafts make identical critic requests; one cycled reply keeps
    // their critiques identical too.
    let critic =
        ScriptedBackend::from_value(&json!({"rules": [{"responses": [critique_for(0)[0]], "cycle": true}]})).unwrap();
    let p = Pipeline::new(Arc::new(proposal), Arc::new(critic), PromptSet::default(), cfg());
    let ro = p.proposal_rollout(0, &samples(1)[0]).unwrap();
    assert!(ro.group.draft_advantages().values().iter().all(|&a| a == 0.0));
}

#[test]
fn skip_budget_fails_after_writing() {
    let critic =
        ScriptedBackend::from_value(&json!({"rules": [{"responses": ["<score>1</score>"], "cycle": true}]})).unwrap();
    let proposal = ScriptedBackend::from_value(&proposal_script()).unwrap();
    let p = Pipeline::new(Arc::new(proposal), Arc::new(critic), PromptSet::default(), cfg());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.jsonl");
    let err = p.generate_proposal_rl_batch(&samples(3), &path).unwrap_err();
    assert!(matches!(err, PipelineError::SkipBudget { skipped: 3, total: 3 }));
    assert!(path.exists());
}

#[test]
fn unlabeled_samples_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let s = vec![Sample::new("u", "text").unwrap()];
    let err = pipeline(cfg()).generate_proposal_rl_batch(&s, &dir.path().join("x")).unwrap_err();
    assert!(matches!(err, PipelineError::MissingGold(_)));
}

#[test]
fn critic_batch_scores_every_critique() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.jsonl");
    let summary = pipeline(cfg()).generate_critic_rl_batch(&samples(4), None, &path).unwrap();
    assert_eq!(summary.lines, 32);
    let lines = read_lines(&path);
    for l in &lines {
        assert_eq!(l["group"], "critic");
        let r = l["reward"].as_object().unwrap();
        assert_eq!(r.keys().collect::<Vec<_>>(), ["act", "align", "fmt", "total"]);
    }
    // Sample s00 (gold yes) gets DRAFT-0 (yes): score-2 critique aligns, the
    // probe revision (REVISIONS[0], yes) leaves a correct draft unchanged.
    let first = &lines[0];
    assert_eq!(first["score"], 2);
    assert_eq!(first["reward"]["align"], 1.0);
    assert_eq!(first["reward"]["act"], 0.0);
    assert_eq!(first["probe_pred"], "yes");
    let mean: f64 = lines[..8].iter().map(|l| l["advantage"].as_f64().unwrap()).sum::<f64>() / 8.0;
    assert!(mean.abs() < 1e-9);
}

#[test]
fn critic_fix_earns_actionability() {
    let draft = parse_reasoning("<think>DRAFT-1 sincere</think><answer>no</answer>");
    let s = samples(1).remove(0); // gold yes
    let p = pipeline(EngineConfig { g: 2, ..cfg() });
    let lines = p.critic_rollout(&s, &draft).unwrap();
    // Feedback "Missed the visual irony." probes to REVISIONS[0] (yes): a fix.
    assert_eq!(lines[0].reward.total(), 3.0);
    assert_eq!(serde_json::to_value(&lines[0].reward).unwrap()["act"], 1.0);
}

#[test]
fn empty_feedback_skips_probe() {
    let critic =
        ScriptedBackend::from_value(&json!({"rules": [{"responses": ["<score>oops"], "cycle": true}]})).unwrap();
    let proposal = Arc::new(ScriptedBackend::from_value(&proposal_script()).unwrap());
    let p = Pipeline::new(proposal.clone(), Arc::new(critic), PromptSet::default(), EngineConfig { g: 2, ..cfg() });
    let lines = p.critic_rollout(&samples(1)[0], &parse_reasoning(DRAFTS[1])).unwrap();
    let v = serde_json::to_value(&lines[0]).unwrap();
    assert_eq!(v["reward"], json!({"fmt": 0.0, "align": -1.0, "act": 0.0, "total": -1.0}));
    assert_eq!(v["probe_pred"], Value::Null);
    assert_eq!(v["score"], Value::Null);
    assert!(proposal.requests().is_empty());
}

#[test]
fn draft_file_supplies_critic_drafts() {
    let dir = tempfile::tempdir().unwrap();
    let data = samples(2);
    let results = dir.path().join("dcr.jsonl");
    pipeline(cfg()).run_dcr_file(&data[..1], 0, &results).unwrap();
    let drafts = pcr_engine::load_drafts(&results).unwrap();
    let path = dir.path().join("c.jsonl");
    // s01 is missing from the draft file: skipped, and 1/2 breaks the budget.
    let err = pipeline(cfg()).generate_critic_rl_batch(&data, Some(&drafts), &path).unwrap_err();
    assert!(matches!(err, PipelineError::SkipBudget { skipped: 1, total: 2 }));
    assert_eq!(read_lines(&path).len(), 8);
}

#[test]
fn dcr_rounds() {
    let s = samples(1).remove(0);
    let p = pipeline(cfg());
    let zero = p.run_dcr(&s, 0).unwrap();
    assert!(zero.rounds.is_empty());
    assert!(zero.final_prediction.same_as(zero.draft.prediction()));
    assert_eq!(zero.draft.raw(), pipeline(cfg()).draft(&s).unwrap().raw());

    let critic = ScriptedBackend::from_value(
        &json!({"rules": [{"responses": ["<feedback>f</feedback><score>1</score>"], "cycle": true}]}),
    )
    .unwrap();
    let proposal = ScriptedBackend::from_value(&proposal_script()).unwrap();
    let p = Pipeline::new(Arc::new(proposal), Arc::new(critic), PromptSet::default(), cfg());
    let five = p.run_dcr(&s, 5).unwrap();
    assert_eq!(five.rounds.len(), 5);
    assert!(five.error.is_none());
    assert!(matches!(p.run_dcr(&s, 6), Err(PipelineError::TooManyRounds { .. })));
}

#[test]
fn later_rounds_critique_the_latest_revision() {
    let critic = Arc::new(
        ScriptedBackend::from_value(
            &json!({"rules": [{"responses": ["<feedback>again</feedback><score>1</score>"], "cycle": true}]}),
        )
        .unwrap(),
    );
    let proposal = Arc::new(ScriptedBackend::queue([
        "<think>d</think><answer>no</answer>",
        "<think>rev one</think><answer>yes</answer>",
        "<think>rev two</think><answer>yes</answer>",
    ]));
    let p = Pipeline::new(proposal, critic.clone(), PromptSet::default(), cfg());
    let rec = p.run_dcr(&samples(1)[0], 2).unwrap();
    assert_eq!(rec.final_prediction.label(), Some(Label::Sarcastic));
    let reqs = critic.requests();
    assert!(reqs[0].1[0].text().contains("<think>d</think>"));
    assert!(reqs[1].1[0].text().contains("rev one"));
}

#[test]
fn failed_round_is_recorded() {
    let critic = Arc::new(ScriptedBackend::queue(["<feedback>f</feedback><score>1</score>", "<score>1</score>"]));
    let proposal = Arc::new(ScriptedBackend::queue([
        "<think>d</think><answer>no</answer>",
        "<think>r</think><answer>yes</answer>",
    ]));
    let p = Pipeline::new(proposal, critic, PromptSet::default(), cfg());
    let rec = p.run_dcr(&samples(1)[0], 3).unwrap();
    assert_eq!(rec.rounds.len(), 1);
    assert!(rec.error.as_deref().unwrap().contains("round 2"));
    assert_eq!(rec.final_prediction.label(), Some(Label::Sarcastic));
}

#[test]
fn empty_feedback_is_rejected() {
    let p = pipeline(cfg());
    let s = &samples(1)[0];
    assert!(matches!(p.revise(s, &parse_reasoning("x"), "  "), Err(PipelineError::EmptyFeedback)));
}

#[test]
fn draft_templates_follow_config() {
    for (style, needle) in
        [(DraftStyle::Fixed, "Surface-Level Discrepancy Analysis"), (DraftStyle::Generic, "chain of thought")]
    {
        let proposal = Arc::new(ScriptedBackend::queue(["<think>x</think><answer>no</answer>"]));
        let p = Pipeline::new(
            proposal.clone(),
            Arc::new(ScriptedBackend::queue(Vec::<String>::new())),
            PromptSet::default(),
            EngineConfig { draft_style: style, ..cfg() },
        );
        assert!(p.draft(&samples(1)[0]).unwrap().format_ok());
        let body = serde_json::to_string(&proposal.requests()[0].1).unwrap();
        assert!(body.contains(needle), "{style:?}");
    }
}

#[test]
fn generator_trait_objects_compose() {
    let g: Arc<dyn Generator> = Arc::new(ScriptedBackend::queue(["a"]));
    let wrapped = Arc::new(g);
    assert_eq!(
        wrapped.generate(&[pcr_core::ChatMessage::user("x")], &pcr_core::DecodeParams::proposal()).unwrap(),
        ["a"]
    );
}
