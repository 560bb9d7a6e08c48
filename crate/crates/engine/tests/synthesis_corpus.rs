use pcr_core::structio::{parse_reasoning, PromptSet};
use pcr_core::{EngineConfig, Label, Sample};
use pcr_engine::{synthesize, ScriptedBackend};
use serde_json::{json, Value};

fn step(content: &str, action: &str) -> String {
    json!({"title": "Perspective", "content": content, "next_action": action}).to_string()
}

fn teacher() -> ScriptedBackend {
    ScriptedBackend::from_value(&json!({"rules": [
        {"contains": "Re-answer the original question", "responses": ["<think>the tone is earnest</think><answer>no</answer>"], "cycle": true},
        {"contains": "Text: alpha", "turn": 0, "responses": [step("look at the image", "continue")]},
        {"contains": "Text: alpha", "turn": 1, "responses": [step("ironic, so yes", "final_answer")]},
        {"contains": "Text: beta", "turn": 0, "responses": [step("look at the text", "continue")]},
        {"contains": "Text: beta", "turn": 1, "responses": [step("mocking: yes", "final_answer")]},
        {"contains": "Text: gamma", "responses": ["not json"], "cycle": true}
    ]}))
    .unwrap()
}

fn critic() -> ScriptedBackend {
    ScriptedBackend::from_value(&json!({"rules": [{"responses": ["<feedback>The image is sincere.</feedback><score>0</score>"], "cycle": true}]}))
        .unwrap()
}

fn samples() -> Vec<Sample> {
    vec![
        Sample::new("a", "alpha caption").unwrap().with_gold(Label::Sarcastic).with_image("a.jpg"),
        Sample::new("b", "beta caption").unwrap().with_gold(Label::NotSarcastic),
        Sample::new("c", "gamma caption").unwrap().with_gold(Label::Sarcastic),
    ]
}

fn lines(path: &std::path::Path) -> Vec<Value> {
    std::fs::read_to_string(path).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

#[test]
fn corpus_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = EngineConfig { workers: 3, ..EngineConfig::default() };
    let summary = synthesize(&samples(), &teacher(), &critic(), &PromptSet::default(), &cfg, dir.path()).unwrap();

    let drafts = lines(&dir.path().join("drafts.jsonl"));
    assert_eq!(drafts.len(), 1);
    assert_eq!(drafts[0]["id"], "a");
    assert_eq!(drafts[0]["image"], "a.jpg");
    assert_eq!(drafts[0]["label"], "yes");
    let seq = parse_reasoning(drafts[0]["sequence"].as_str().unwrap());
    assert!(seq.format_ok() && seq.prediction().is(Label::Sarcastic));

    let triples = lines(&dir.path().join("triples.jsonl"));
    assert_eq!(triples.len(), 1);
    assert_eq!(triples[0]["id"], "b");
    assert_eq!(triples[0]["feedback"], "The image is sincere.");
    assert!(parse_reasoning(triples[0]["revision"].as_str().unwrap()).prediction().is(Label::NotSarcastic));
    assert!(parse_reasoning(triples[0]["draft"].as_str().unwrap()).prediction().is(Label::Sarcastic));

    assert_eq!(lines(&dir.path().join("discards.jsonl")), vec![json!({"id": "c", "reason": "step_parse_failure"})]);

    let stats: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("stats.json")).unwrap()).unwrap();
    assert_eq!(stats["histogram"], json!({"2": 2}));
    assert_eq!(stats["by_label"]["all"]["avg_steps"], 2.0);
    assert_eq!(stats["by_label"]["yes"]["total"], 1);
    assert_eq!(stats["discards"]["step_parse_failure"], 1);
    assert_eq!(summary.stats.triples, 1);
    assert_eq!(summary.outputs.len(), 4);
}

#[test]
fn corpus_is_reproducible() {
    let run = || {
        let dir = tempfile::tempdir().unwrap();
        let cfg = EngineConfig { workers: 2, ..EngineConfig::default() };
        synthesize(&samples(), &teacher(), &critic(), &PromptSet::default(), &cfg, dir.path()).unwrap();
        ["drafts.jsonl", "triples.jsonl", "discards.jsonl", "stats.json"]
            .map(|f| std::fs::read(dir.path().join(f)).unwrap())
    };
    assert_eq!(run(), run());
}

#[test]
fn unlabeled_samples_fail() {
    let dir = tempfile::tempdir().unwrap();
    let s = vec![Sample::new("x", "alpha caption").unwrap()];
    assert!(synthesize(&s, &teacher(), &critic(), &PromptSet::default(), &EngineConfig::default(), dir.path()).is_err());
}
