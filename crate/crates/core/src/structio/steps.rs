use std::fmt::Write as _;

use serde_json::Value;
use thiserror::Error;

use crate::types::{NextAction, RoleStep, Trajectory};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StepParseError {
    #[error("no JSON object in completion")]
    NotJson,
    #[error("missing or non-string key `{0}`")]
    MissingKey(&'static str),
    #[error("`{0}` is empty")]
    EmptyField(&'static str),
    #[error("next_action {0:?} is neither \"continue\" nor \"final_answer\"")]
    BadNextAction(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("trajectory answer is invalid; only valid answers can be flattened")]
pub struct InvalidAnswer;

/// Byte range of the first balanced `{...}` object, honouring JSON strings.
fn outermost_object(raw: &str) -> Option<&str> {
    let start = raw.find('{')?;
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, ch) in raw[start..].char_indices() {
        if in_string {
            match ch {
                _ if escaped => escaped = false,
                '\\' => escaped = true,
                '"' => in_string = false,
                _ => {}
            }
            continue;
        }
        match ch {
            '"' => in_string = true,
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(&raw[start..start + i + 1]);
                }
            }
            _ => {}
        }
    }
    None
}

/// Parse one rollout turn. Code fences and prose around the object are
/// ignored.
pub fn parse_role_step(raw: &str) -> Result<RoleStep, StepParseError> {
    let obj = outermost_object(raw).ok_or(StepParseError::NotJson)?;
    let value: Value = serde_json::from_str(obj).map_err(|_| StepParseError::NotJson)?;
    let field = |key: &'static str| -> Result<&str, StepParseError> {
        value.get(key).and_then(Value::as_str).ok_or(StepParseError::MissingKey(key))
    };
    let title = field("title")?;
    let content = field("content")?;
    let action = field("next_action")?;
    let next_action = match action.trim().to_ascii_lowercase().as_str() {
        "continue" => NextAction::Continue,
        "final_answer" => NextAction::FinalAnswer,
        _ => return Err(StepParseError::BadNextAction(action.to_string())),
    };
    if title.trim().is_empty() {
        return Err(StepParseError::EmptyField("title"));
    }
    if content.trim().is_empty() {
        return Err(StepParseError::EmptyField("content"));
    }
    Ok(RoleStep::new(title, content, next_action).expect("fields checked non-empty"))
}

/// Flatten a trajectory into one think/answer sequence:
/// `<think>Step1: h1\nc1\n\nStep2: h2\nc2</think>\n<answer>yes</answer>`.
pub fn flatten_trajectory(traj: &Trajectory) -> Result<String, InvalidAnswer> {
    let label = traj.final_answer().label().ok_or(InvalidAnswer)?;
    let mut out = String::from("<think>");
    for (i, step) in traj.steps().iter().enumerate() {
        if i > 0 {
            out.push_str("\n\n");
        }
        write!(out, "Step{}: {}\n{}", i + 1, step.title(), step.content()).unwrap();
    }
    write!(out, "</think>\n<answer>{label}</answer>").unwrap();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Label, Prediction};

    #[test]
    fn parses_prompt_example() {
        let s = parse_role_step(
            r#"{"title":"Identifying Key Information","content":"To begin…","next_action":"continue"}"#,
        )
        .unwrap();
        assert_eq!(s.title(), "Identifying Key Information");
        assert_eq!(s.next_action(), NextAction::Continue);
    }

    #[test]
    fn strips_code_fence() {
        let s =
            parse_role_step("```json {\"title\":\"t\",\"content\":\"c\",\"next_action\":\"final_answer\"}```").unwrap();
        assert_eq!(s.next_action(), NextAction::FinalAnswer);
    }

    #[test]
    fn braces_inside_strings_do_not_confuse_extraction() {
        let s = parse_role_step(
            "Sure! {\"title\":\"a } b\",\"content\":\"say \\\"{hi}\\\"\",\"next_action\":\"continue\"} done {",
        )
        .unwrap();
        assert_eq!(s.title(), "a } b");
        assert_eq!(s.content(), "say \"{hi}\"");
    }

    #[test]
    fn rejects_bad_action() {
        assert_eq!(
            parse_role_step(r#"{"title":"t","content":"c","next_action":"stop"}"#),
            Err(StepParseError::BadNextAction("stop".into()))
        );
    }

    #[test]
    fn rejects_missing_keys_and_non_json() {
        assert_eq!(
            parse_role_step(r#"{"title":"t","next_action":"continue"}"#),
            Err(StepParseError::MissingKey("content"))
        );
        assert_eq!(parse_role_step("no object here"), Err(StepParseError::NotJson));
        assert_eq!(parse_role_step("{\"title\": \"t\""), Err(StepParseError::NotJson));
        assert_eq!(parse_role_step("{title: t}"), Err(StepParseError::NotJson));
        assert_eq!(
            parse_role_step(r#"{"title":" ","content":"c","next_action":"continue"}"#),
            Err(StepParseError::EmptyField("title"))
        );
    }

    fn traj(titles: &[(&str, &str)], answer: Prediction) -> Trajectory {
        let n = titles.len();
        let steps = titles
            .iter()
            .enumerate()
            .map(|(i, (h, c))| {
                let a = if i + 1 == n { NextAction::FinalAnswer } else { NextAction::Continue };
                RoleStep::new(*h, *c, a).unwrap()
            })
            .collect();
        Trajectory::new("s", steps, answer, 10).unwrap()
    }

    #[test]
    fn flatten_two_steps() {
        let t = traj(&[("A", "a"), ("B", "b")], Prediction::of(Label::Sarcastic));
        assert_eq!(flatten_trajectory(&t).unwrap(), "<think>Step1: A\na\n\nStep2: B\nb</think>\n<answer>yes</answer>");
    }

    #[test]
    fn flatten_numbers_steps_once() {
        let t = traj(&[("A", "a"), ("B", "b"), ("C", "c")], Prediction::of(Label::NotSarcastic));
        let flat = flatten_trajectory(&t).unwrap();
        assert_eq!(flat.matches("Step3: ").count(), 1);
        assert!(flat.ends_with("<answer>no</answer>"));
    }

    #[test]
    fn flatten_rejects_invalid_answer() {
        let t = traj(&[("A", "a"), ("B", "b")], Prediction::invalid("dunno"));
        assert_eq!(flatten_trajectory(&t), Err(InvalidAnswer));
    }
}
