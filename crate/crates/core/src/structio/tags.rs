use crate::types::{Critique, Label, Prediction, ReasoningOutput, Score};

/// A tag pair located in a completion.
#[derive(Debug, Clone, Copy)]
struct TagSpan<'a> {
    open_at: usize,
    close_end: usize,
    inner: &'a str,
}

/// First `<name>…</name>` with the shortest inner content.
fn first_block<'a>(raw: &'a str, name: &str) -> Option<TagSpan<'a>> {
    let open = format!("<{name}>");
    let close = format!("</{name}>");
    let open_at = raw.find(&open)?;
    let inner_start = open_at + open.len();
    let close_rel = raw[inner_start..].find(&close)?;
    let inner_end = inner_start + close_rel;
    Some(TagSpan { open_at, close_end: inner_end + close.len(), inner: &raw[inner_start..inner_end] })
}

/// True when the opening and closing tags each occur exactly once.
fn single(raw: &str, name: &str) -> bool {
    raw.matches(&format!("<{name}>")).count() == 1 && raw.matches(&format!("</{name}>")).count() == 1
}

pub(crate) fn parse_label(text: &str) -> Option<Label> {
    match text.trim().to_lowercase().as_str() {
        "yes" => Some(Label::Sarcastic),
        "no" => Some(Label::NotSarcastic),
        _ => None,
    }
}

/// Parse a draft or revision. Total: malformed input gives `format_ok = false`.
pub fn parse_reasoning(raw: &str) -> ReasoningOutput {
    let think = first_block(raw, "think");
    let answer = first_block(raw, "answer");
    let prediction = match answer {
        Some(a) => match parse_label(a.inner) {
            Some(l) => Prediction::valid(l, a.inner),
            None => Prediction::invalid(a.inner),
        },
        None => Prediction::invalid(""),
    };
    let think_text = think.map_or("", |t| t.inner);
    let format_ok = match (think, answer) {
        (Some(t), Some(a)) => {
            single(raw, "think")
                && single(raw, "answer")
                && t.close_end <= a.open_at
                && !t.inner.trim().is_empty()
                && prediction.is_valid()
        }
        _ => false,
    };
    ReasoningOutput { think_text: think_text.to_string(), prediction, format_ok, raw: raw.to_string() }
}

/// Parse a critic completion. Total.
pub fn parse_critique(raw: &str) -> Critique {
    let feedback = first_block(raw, "feedback");
    let score_block = first_block(raw, "score");
    let score = score_block
        .and_then(|s| s.inner.trim().parse::<i64>().ok())
        .and_then(|v| u8::try_from(v).ok())
        .filter(|v| *v <= 2)
        .map_or(Score::Invalid, Score::Valid);
    let feedback_text = feedback.map_or("", |f| f.inner.trim());
    let format_ok = feedback.is_some()
        && score_block.is_some()
        && single(raw, "feedback")
        && single(raw, "score")
        && !feedback_text.is_empty()
        && score != Score::Invalid;
    Critique { feedback: feedback_text.to_string(), score, format_ok, raw: raw.to_string() }
}

/// Anything carrying a format verdict.
pub trait Formatted {
    fn format_ok(&self) -> bool;
}

impl Formatted for ReasoningOutput {
    fn format_ok(&self) -> bool {
        self.format_ok
    }
}

impl Formatted for Critique {
    fn format_ok(&self) -> bool {
        self.format_ok
    }
}

/// 1 iff the parsed output is well formed.
pub fn format_reward(parsed: &impl Formatted) -> u8 {
    u8::from(parsed.format_ok())
}
