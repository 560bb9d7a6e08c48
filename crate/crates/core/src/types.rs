//! Domain records shared by every stage: labels, samples, rollout steps,
//! parsed model outputs and the per-sample inference record.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::structio;

/// Binary gold label. Positive class is [`Label::Sarcastic`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Sarcastic,
    NotSarcastic,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::Sarcastic, Label::NotSarcastic];

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Sarcastic => "yes",
            Label::NotSarcastic => "no",
        }
    }

    pub fn flip(self) -> Label {
        match self {
            Label::Sarcastic => Label::NotSarcastic,
            Label::NotSarcastic => Label::Sarcastic,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("not a label: {0:?} (expected \"yes\" or \"no\")")]
pub struct BadLabel(pub String);

impl FromStr for Label {
    type Err = BadLabel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "yes" => Ok(Label::Sarcastic),
            "no" => Ok(Label::NotSarcastic),
            other => Err(BadLabel(other.to_string())),
        }
    }
}

impl Serialize for Label {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A model's answer: one of the two labels, or unusable.
///
/// Comparisons go through [`Prediction::same_as`] and [`Prediction::is`]:
/// an invalid prediction is unequal to everything, including another
/// invalid prediction, so a malformed revision can never count as a fix.
#[derive(Debug, Clone)]
pub struct Prediction {
    label: Option<Label>,
    raw: String,
}

impl Prediction {
    pub fn valid(label: Label, raw: impl Into<String>) -> Self {
        Self { label: Some(label), raw: raw.into() }
    }

    pub fn invalid(raw: impl Into<String>) -> Self {
        Self { label: None, raw: raw.into() }
    }

    pub fn of(label: Label) -> Self {
        Self::valid(label, label.as_str())
    }

    pub fn label(&self) -> Option<Label> {
        self.label
    }

    pub fn is_valid(&self) -> bool {
        self.label.is_some()
    }

    pub fn raw(&self) -> &str {
        &self.raw
    }

    /// True iff this prediction is the given label.
    pub fn is(&self, label: Label) -> bool {
        self.label == Some(label)
    }

    /// Three-valued equality: both valid and equal.
    pub fn same_as(&self, other: &Prediction) -> bool {
        matches!((self.label, other.label), (Some(a), Some(b)) if a == b)
    }

    /// Canonical text: "yes", "no" or "invalid".
    pub fn as_str(&self) -> &'static str {
        self.label.map_or("invalid", Label::as_str)
    }
}

impl fmt::Display for Prediction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for Prediction {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Prediction {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ok(match s.parse::<Label>() {
            Ok(l) => Prediction::valid(l, s),
            Err(_) => Prediction::invalid(s),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SampleError {
    #[error("missing field `{0}`")]
    MissingField(&'static str),
    #[error("sample {0:?}: text is empty")]
    EmptyText(String),
    #[error("sample {id:?}: {source}")]
    BadLabel {
        id: String,
        #[source]
        source: BadLabel,
    },
    #[error("duplicate sample id {0:?}")]
    DuplicateId(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// One image-text pair with an optional gold label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Sample {
    id: String,
    #[serde(rename = "image", skip_serializing_if = "Option::is_none")]
    image_ref: Option<String>,
    text: String,
    #[serde(rename = "label", skip_serializing_if = "Option::is_none")]
    gold: Option<Label>,
}

/// A dataset line before validation.
#[derive(Debug, Clone, Default, Deserialize)]
pub struct RawRecord {
    pub id: Option<String>,
    pub text: Option<String>,
    pub image: Option<String>,
    pub label: Option<String>,
}

impl Sample {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Result<Self, SampleError> {
        let id = id.into();
        let text = text.into();
        if id.is_empty() {
            return Err(SampleError::MissingField("id"));
        }
        if text.trim().is_empty() {
            return Err(SampleError::EmptyText(id));
        }
        Ok(Self { id, image_ref: None, text, gold: None })
    }

    pub fn with_gold(mut self, gold: Label) -> Self {
        self.gold = Some(gold);
        self
    }

    pub fn with_image(mut self, image_ref: impl Into<String>) -> Self {
        self.image_ref = Some(image_ref.into());
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn image_ref(&self) -> Option<&str> {
        self.image_ref.as_deref()
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn gold(&self) -> Option<Label> {
        self.gold
    }
}

/// Validate one parsed dataset record.
pub fn validate_sample(raw: RawRecord) -> Result<Sample, SampleError> {
    let id = raw.id.filter(|s| !s.is_empty()).ok_or(SampleError::MissingField("id"))?;
    let text = raw.text.ok_or(SampleError::MissingField("text"))?;
    let mut sample = Sample::new(id, text)?;
    if let Some(label) = raw.label {
        let gold = label.parse().map_err(|source| SampleError::BadLabel { id: sample.id.clone(), source })?;
        sample = sample.with_gold(gold);
    }
    if let Some(image) = raw.image {
        sample = sample.with_image(image);
    }
    Ok(sample)
}

/// Parse a JSON Lines dataset. Blank lines are skipped; ids must be unique.
pub fn parse_dataset(contents: &str) -> Result<Vec<Sample>, SampleError> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, line) in contents.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord =
            serde_json::from_str(line).map_err(|e| SampleError::Parse { line: i + 1, message: e.to_string() })?;
        let sample = validate_sample(raw).map_err(|e| SampleError::Parse { line: i + 1, message: e.to_string() })?;
        if !seen.insert(sample.id.clone()) {
            return Err(SampleError::DuplicateId(sample.id));
        }
        out.push(sample);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NextAction {
    Continue,
    FinalAnswer,
}

/// One role turn of a dynamic-role rollout: perspective title, analysis and
/// the sufficiency judgment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleStep {
    title: String,
    content: String,
    next_action: NextAction,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TrajectoryError {
    #[error("step {0} has an empty title or content")]
    EmptyStep(usize),
    #[error("trajectory has {0} steps, at least 2 are required")]
    TooShort(usize),
    #[error("trajectory has {len} steps, limit is {limit}")]
    TooLong { len: usize, limit: usize },
    #[error("step {0} breaks the continue/final_answer pattern")]
    BadPattern(usize),
}

impl RoleStep {
    pub fn new(
        title: impl Into<String>,
        content: impl Into<String>,
        next_action: NextAction,
    ) -> Result<Self, TrajectoryError> {
        let title = title.into();
        let content = content.into();
        if title.trim().is_empty() || content.trim().is_empty() {
            return Err(TrajectoryError::EmptyStep(0));
        }
        Ok(Self { title, content, next_action })
    }

    pub fn title(&self) -> &str {
        &self.title
    }

    pub fn content(&self) -> &str {
        &self.content
    }

    pub fn next_action(&self) -> NextAction {
        self.next_action
    }

    pub fn with_action(mut self, next_action: NextAction) -> Self {
        self.next_action = next_action;
        self
    }
}

/// A finished rollout: T ≥ 2 steps, all `Continue` except the last.
#[derive(Debug, Clone)]
pub struct Trajectory {
    sample_id: String,
    steps: Vec<RoleStep>,
    final_answer: Prediction,
}

impl Trajectory {
    /// `max_len` bounds T; rollouts pass `max_steps + 1` to admit the forced
    /// final turn.
    pub fn new(
        sample_id: impl Into<String>,
        steps: Vec<RoleStep>,
        final_answer: Prediction,
        max_len: usize,
    ) -> Result<Self, TrajectoryError> {
        let t = steps.len();
        if t < 2 {
            return Err(TrajectoryError::TooShort(t));
        }
        if t > max_len {
            return Err(TrajectoryError::TooLong { len: t, limit: max_len });
        }
        for (i, step) in steps.iter().enumerate() {
            let expected = if i + 1 == t { NextAction::FinalAnswer } else { NextAction::Continue };
            if step.next_action != expected {
                return Err(TrajectoryError::BadPattern(i + 1));
            }
        }
        Ok(Self { sample_id: sample_id.into(), steps, final_answer })
    }

    pub fn sample_id(&self) -> &str {
        &self.sample_id
    }

    pub fn steps(&self) -> &[RoleStep] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn final_answer(&self) -> &Prediction {
        &self.final_answer
    }
}

/// A parsed draft or revision.
#[derive(Debug, Clone)]
pub struct ReasoningOutput {
    pub(crate) think_text: String,
    pub(crate) prediction: Prediction,
    pub(crate) format_ok: bool,
    pub(crate) raw: String,
}

impl ReasoningOutput {
    pub fn think_text(&self) -> &str {
        &self.think_text
    }

    pub fn prediction(&self) -> &Prediction {
        &self.prediction
    }

    pub fn format_ok(&self) -> bool {
        self.format_ok
    }

    pub fn raw(&self) -> &str {
        &self.raw
    }
}

#[derive(Serialize, Deserialize)]
struct OutputRepr {
    raw: String,
    #[serde(default)]
    prediction: Option<String>,
    #[serde(default)]
    format_ok: Option<bool>,
}

impl Serialize for ReasoningOutput {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        OutputRepr {
            raw: self.raw.clone(),
            prediction: Some(self.prediction.as_str().to_string()),
            format_ok: Some(self.format_ok),
        }
        .serialize(s)
    }
}

// Derived fields are recomputed from `raw`; parsing is total and deterministic.
impl<'de> Deserialize<'de> for ReasoningOutput {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let repr = OutputRepr::deserialize(d)?;
        Ok(structio::parse_reasoning(&repr.raw))
    }
}

/// Critic score: 0, 1 or 2 when parseable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Score {
    Valid(u8),
    Invalid,
}

impl Score {
    pub fn value(self) -> Option<u8> {
        match self {
            Score::Valid(s) => Some(s),
            Score::Invalid => None,
        }
    }
}

impl Serialize for Score {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Score::Valid(v) => s.serialize_u8(*v),
            Score::Invalid => s.serialize_none(),
        }
    }
}

/// A parsed critic completion.
#[derive(Debug, Clone)]
pub struct Critique {
    pub(crate) feedback: String,
    pub(crate) score: Score,
    pub(crate) format_ok: bool,
    pub(crate) raw: String,
}

impl Critique {
    pub fn feedback(&self) -> &str {
        &self.feedback
    }

    pub fn score(&self) -> Score {
        self.score
    }

    pub fn format_ok(&self) -> bool {
        self.format_ok
    }

    pub fn raw(&self) -> &str {
        &self.raw
    }
}

#[derive(Serialize, Deserialize)]
struct CritiqueRepr {
    raw: String,
    #[serde(default)]
    feedback: Option<String>,
    #[serde(default)]
    score: Option<Score>,
    #[serde(default)]
    format_ok: Option<bool>,
}

impl<'de> Deserialize<'de> for Score {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = Option::<i64>::deserialize(d)?;
        Ok(match v {
            Some(s @ 0..=2) => Score::Valid(s as u8),
            _ => Score::Invalid,
        })
    }
}

impl Serialize for Critique {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        CritiqueRepr {
            raw: self.raw.clone(),
            feedback: Some(self.feedback.clone()),
            score: Some(self.score),
            format_ok: Some(self.format_ok),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Critique {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let repr = CritiqueRepr::deserialize(d)?;
        Ok(structio::parse_critique(&repr.raw))
    }
}

/// One critique-revise round.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DcrRound {
    pub critique: Critique,
    pub revision: ReasoningOutput,
}

/// Result of draft → (critique → revise)* on one sample.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DcrRecord {
    pub sample_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold: Option<Label>,
    pub draft: ReasoningOutput,
    pub rounds: Vec<DcrRound>,
    pub final_prediction: Prediction,
    /// Set when a round failed and the loop stopped early.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl DcrRecord {
    pub fn new(sample: &Sample, draft: ReasoningOutput) -> Self {
        let final_prediction = draft.prediction.clone();
        Self {
            sample_id: sample.id().to_string(),
            gold: sample.gold(),
            draft,
            rounds: Vec::new(),
            final_prediction,
            error: None,
        }
    }

    pub fn push_round(&mut self, critique: Critique, revision: ReasoningOutput) {
        self.final_prediction = revision.prediction.clone();
        self.rounds.push(DcrRound { critique, revision });
    }

    /// Prediction after `round` revisions; rounds beyond those recorded carry
    /// the last available prediction forward.
    pub fn prediction_at(&self, round: usize) -> &Prediction {
        if round == 0 || self.rounds.is_empty() {
            return self.draft.prediction();
        }
        let idx = round.min(self.rounds.len()) - 1;
        self.rounds[idx].revision.prediction()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(id: &str, text: &str, label: Option<&str>) -> RawRecord {
        RawRecord { id: Some(id.into()), text: Some(text.into()), image: None, label: label.map(Into::into) }
    }

    #[test]
    fn label_round_trip() {
        for l in Label::ALL {
            assert_eq!(l.as_str().parse::<Label>().unwrap(), l);
        }
        assert!("Yes".parse::<Label>().is_err());
    }

    #[test]
    fn validate_maps_gold() {
        let s = validate_sample(raw("a", "what a perfect day", Some("yes"))).unwrap();
        assert_eq!(s.gold(), Some(Label::Sarcastic));
        assert_eq!(s.text(), "what a perfect day");
    }

    #[test]
    fn validate_rejects_blank_text() {
        assert_eq!(validate_sample(raw("b", "   ", None)), Err(SampleError::EmptyText("b".into())));
    }

    #[test]
    fn validate_rejects_bad_label() {
        assert!(matches!(validate_sample(raw("c", "ok", Some("maybe"))), Err(SampleError::BadLabel { .. })));
    }

    #[test]
    fn validate_requires_id_and_text() {
        let mut r = raw("", "t", None);
        assert_eq!(validate_sample(r.clone()), Err(SampleError::MissingField("id")));
        r.id = Some("x".into());
        r.text = None;
        assert_eq!(validate_sample(r), Err(SampleError::MissingField("text")));
    }

    #[test]
    fn dataset_rejects_duplicate_ids() {
        let data = "{\"id\":\"a\",\"text\":\"x\"}\n{\"id\":\"a\",\"text\":\"y\"}\n";
        assert_eq!(parse_dataset(data), Err(SampleError::DuplicateId("a".into())));
    }

    #[test]
    fn dataset_reports_line_numbers() {
        let data = "{\"id\":\"a\",\"text\":\"x\"}\n\n{\"id\":\"b\",\"text\":\"\"}\n";
        match parse_dataset(data) {
            Err(SampleError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn invalid_never_equals_invalid() {
        let a = Prediction::invalid("maybe");
        let b = Prediction::invalid("maybe");
        assert!(!a.same_as(&b));
        assert!(!a.same_as(&Prediction::of(Label::Sarcastic)));
        assert!(Prediction::of(Label::NotSarcastic).same_as(&Prediction::of(Label::NotSarcastic)));
    }

    fn step(a: NextAction) -> RoleStep {
        RoleStep::new("t", "c", a).unwrap()
    }

    #[test]
    fn trajectory_pattern_enforced() {
        use NextAction::*;
        let ans = Prediction::of(Label::Sarcastic);
        assert!(Trajectory::new("s", vec![step(Continue), step(FinalAnswer)], ans.clone(), 6).is_ok());
        assert_eq!(
            Trajectory::new("s", vec![step(FinalAnswer)], ans.clone(), 6).unwrap_err(),
            TrajectoryError::TooShort(1)
        );
        assert_eq!(
            Trajectory::new("s", vec![step(FinalAnswer), step(FinalAnswer)], ans.clone(), 6).unwrap_err(),
            TrajectoryError::BadPattern(1)
        );
        assert_eq!(
            Trajectory::new("s", vec![step(Continue), step(Continue)], ans.clone(), 6).unwrap_err(),
            TrajectoryError::BadPattern(2)
        );
        let long = vec![step(Continue), step(Continue), step(FinalAnswer)];
        assert_eq!(Trajectory::new("s", long, ans, 2).unwrap_err(), TrajectoryError::TooLong { len: 3, limit: 2 });
    }

    #[test]
    fn role_step_rejects_empty() {
        assert!(RoleStep::new("", "c", NextAction::Continue).is_err());
        assert!(RoleStep::new("t", " ", NextAction::Continue).is_err());
    }

    #[test]
    fn dcr_record_round_trips_through_json() {
        let sample = Sample::new("s1", "text").unwrap().with_gold(Label::Sarcastic);
        let mut rec = DcrRecord::new(&sample, structio::parse_reasoning("<think>a</think><answer>no</answer>"));
        rec.push_round(
            structio::parse_critique("<feedback>look again</feedback><score>0</score>"),
            structio::parse_reasoning("<think>b</think><answer>yes</answer>"),
        );
        let line = serde_json::to_string(&rec).unwrap();
        let back: DcrRecord = serde_json::from_str(&line).unwrap();
        assert_eq!(back.rounds.len(), 1);
        assert!(back.final_prediction.is(Label::Sarcastic));
        assert!(back.draft.prediction().is(Label::NotSarcastic));
        assert_eq!(back.rounds[0].critique.score(), Score::Valid(0));
        assert_eq!(serde_json::to_string(&back).unwrap(), line);
    }

    #[test]
    fn prediction_at_carries_forward() {
        let sample = Sample::new("s1", "text").unwrap();
        let mut rec = DcrRecord::new(&sample, structio::parse_reasoning("<think>a</think><answer>no</answer>"));
        rec.push_round(
            structio::parse_critique("<feedback>f</feedback><score>0</score>"),
            structio::parse_reasoning("<think>b</think><answer>yes</answer>"),
        );
        assert!(rec.prediction_at(0).is(Label::NotSarcastic));
        assert!(rec.prediction_at(1).is(Label::Sarcastic));
        assert!(rec.prediction_at(4).is(Label::Sarcastic));
    }
}
