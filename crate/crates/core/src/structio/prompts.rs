use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

use crate::config::DraftStyle;
use crate::types::Sample;

/// Placeholder names recognised in template bodies. Any other `{...}` text
/// (for instance the JSON example in the rollout system prompt) is literal.
pub const PLACEHOLDERS: [&str; 3] = ["text", "reasoning", "feedback"];

/// Instruction for the extra turn once a rollout hits its step limit.
pub const FORCE_FINAL_INSTRUCTION: &str = "You have reached the maximum number of reasoning steps. \
Give the final answer now: return one JSON object with keys title, content, next_action, \
set next_action to final_answer, and state in the content whether the answer is yes or no.";

/// Clarification turn when a final step does not state a single label.
pub const CLARIFY_INSTRUCTION: &str = "Answer with exactly yes or no.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TemplateId {
    RolloutSystem,
    RolloutFollowup,
    RolloutQuestion,
    Draft,
    FixedDraft,
    GenericDraft,
    Critic,
    Revise,
}

impl TemplateId {
    pub const ALL: [TemplateId; 8] = [
        TemplateId::RolloutSystem,
        TemplateId::RolloutFollowup,
        TemplateId::RolloutQuestion,
        TemplateId::Draft,
        TemplateId::FixedDraft,
        TemplateId::GenericDraft,
        TemplateId::Critic,
        TemplateId::Revise,
    ];

    /// Resource name; override files are `<name>.txt`.
    pub fn name(self) -> &'static str {
        match self {
            TemplateId::RolloutSystem => "rollout_system",
            TemplateId::RolloutFollowup => "rollout_followup",
            TemplateId::RolloutQuestion => "rollout_question",
            TemplateId::Draft => "draft",
            TemplateId::FixedDraft => "fixed_draft",
            TemplateId::GenericDraft => "generic_draft",
            TemplateId::Critic => "critic",
            TemplateId::Revise => "revise",
        }
    }

    pub fn for_draft_style(style: DraftStyle) -> Self {
        match style {
            DraftStyle::Dynamic => TemplateId::Draft,
            DraftStyle::Fixed => TemplateId::FixedDraft,
            DraftStyle::Generic => TemplateId::GenericDraft,
        }
    }

    fn builtin(self) -> &'static str {
        match self {
            TemplateId::RolloutSystem => include_str!("../../prompts/rollout_system.txt"),
            TemplateId::RolloutFollowup => include_str!("../../prompts/rollout_followup.txt"),
            TemplateId::RolloutQuestion => include_str!("../../prompts/rollout_question.txt"),
            TemplateId::Draft => include_str!("../../prompts/draft.txt"),
            TemplateId::FixedDraft => include_str!("../../prompts/fixed_draft.txt"),
            TemplateId::GenericDraft => include_str!("../../prompts/generic_draft.txt"),
            TemplateId::Critic => include_str!("../../prompts/critic.txt"),
            TemplateId::Revise => include_str!("../../prompts/revise.txt"),
        }
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub id: TemplateId,
    pub body: String,
}

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("template {template} needs placeholder {{{name}}}, which the context does not supply")]
    MissingPlaceholder { template: TemplateId, name: String },
    #[error("reading prompt override {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

impl PromptTemplate {
    pub fn builtin(id: TemplateId) -> Self {
        Self { id, body: id.builtin().trim_end().to_string() }
    }

    /// Placeholder names the body references, in order of first use.
    pub fn placeholders(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        for seg in Segments::new(&self.body) {
            if let Segment::Slot(name) = seg {
                if !out.contains(&name) {
                    out.push(name);
                }
            }
        }
        out
    }
}

enum Segment<'a> {
    Literal(&'a str),
    Slot(&'static str),
}

/// Splits a body into literal runs and known `{name}` slots.
struct Segments<'a> {
    rest: &'a str,
}

impl<'a> Segments<'a> {
    fn new(body: &'a str) -> Self {
        Self { rest: body }
    }
}

impl<'a> Iterator for Segments<'a> {
    type Item = Segment<'a>;

    fn next(&mut self) -> Option<Segment<'a>> {
        if self.rest.is_empty() {
            return None;
        }
        let mut search_from = 0;
        while let Some(off) = self.rest[search_from..].find('{') {
            let open = search_from + off;
            let tail = &self.rest[open + 1..];
            if let Some(name) = PLACEHOLDERS.iter().find(|p| tail.starts_with(*p) && tail[p.len()..].starts_with('}')) {
                if open > 0 {
                    let lit = &self.rest[..open];
                    self.rest = &self.rest[open..];
                    return Some(Segment::Literal(lit));
                }
                self.rest = &self.rest[name.len() + 2..];
                return Some(Segment::Slot(name));
            }
            search_from = open + 1;
        }
        let lit = self.rest;
        self.rest = "";
        Some(Segment::Literal(lit))
    }
}

/// Substitute placeholders in one pass. `{text}` comes from the sample unless
/// the context overrides it; substituted values are never re-scanned.
pub fn render_prompt(
    template: &PromptTemplate,
    sample: Option<&Sample>,
    context: &BTreeMap<String, String>,
) -> Result<String, RenderError> {
    let mut out = String::with_capacity(template.body.len() + 256);
    for seg in Segments::new(&template.body) {
        match seg {
            Segment::Literal(s) => out.push_str(s),
            Segment::Slot(name) => {
                let value = context
                    .get(name)
                    .map(String::as_str)
                    .or_else(|| (name == "text").then(|| sample.map(Sample::text)).flatten())
                    .ok_or_else(|| RenderError::MissingPlaceholder { template: template.id, name: name.to_string() })?;
                out.push_str(value);
            }
        }
    }
    Ok(out)
}

/// The full set of templates, built-in unless overridden from a directory.
#[derive(Debug, Clone)]
pub struct PromptSet {
    templates: BTreeMap<TemplateId, PromptTemplate>,
}

impl Default for PromptSet {
    fn default() -> Self {
        Self { templates: TemplateId::ALL.iter().map(|&id| (id, PromptTemplate::builtin(id))).collect() }
    }
}

impl PromptSet {
    /// Built-ins, with `<dir>/<template_id>.txt` replacing any template it names.
    pub fn load(dir: Option<&Path>) -> Result<Self, RenderError> {
        let mut set = Self::default();
        if let Some(dir) = dir {
            for id in TemplateId::ALL {
                let path = dir.join(format!("{}.txt", id.name()));
                match fs::read_to_string(&path) {
                    Ok(body) => {
                        set.templates.insert(id, PromptTemplate { id, body: body.trim_end().to_string() });
                    }
                    Err(e) if e.kind() == io::ErrorKind::NotFound => {}
                    Err(source) => return Err(RenderError::Io { path: path.display().to_string(), source }),
                }
            }
        }
        Ok(set)
    }

    pub fn get(&self, id: TemplateId) -> &PromptTemplate {
        &self.templates[&id]
    }

    pub fn render(
        &self,
        id: TemplateId,
        sample: Option<&Sample>,
        context: &[(&str, &str)],
    ) -> Result<String, RenderError> {
        let ctx = context.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        render_prompt(self.get(id), sample, &ctx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(text: &str) -> Sample {
        Sample::new("s", text).unwrap()
    }

    fn ctx(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn critic_substitutes_text_and_reasoning() {
        let t = PromptTemplate::builtin(TemplateId::Critic);
        let out = render_prompt(&t, Some(&sample("t")), &ctx(&[("reasoning", "r")])).unwrap();
        assert!(out.contains("Text: t"));
        assert!(out.contains("Reasoning and answer:\n\nr\n"));
        assert!(!out.contains("{reasoning}") && !out.contains("{text}"));
    }

    #[test]
    fn revise_substitutes_feedback() {
        let t = PromptTemplate::builtin(TemplateId::Revise);
        let out = render_prompt(&t, Some(&sample("x")), &ctx(&[("feedback", "F")])).unwrap();
        assert!(out.ends_with("Feedback: F"));
    }

    #[test]
    fn missing_placeholder_is_an_error() {
        let t = PromptTemplate::builtin(TemplateId::Critic);
        let err = render_prompt(&t, Some(&sample("t")), &BTreeMap::new()).unwrap_err();
        assert!(matches!(err, RenderError::MissingPlaceholder { ref name, .. } if name == "reasoning"));
        let err = render_prompt(&t, None, &ctx(&[("reasoning", "r")])).unwrap_err();
        assert!(matches!(err, RenderError::MissingPlaceholder { ref name, .. } if name == "text"));
    }

    #[test]
    fn values_are_not_rescanned() {
        let t = PromptTemplate::builtin(TemplateId::Revise);
        let out = render_prompt(&t, None, &ctx(&[("feedback", "{text}")])).unwrap();
        assert!(out.ends_with("Feedback: {text}"));
    }

    #[test]
    fn rollout_system_keeps_json_braces_and_min_step_rule() {
        let t = PromptTemplate::builtin(TemplateId::RolloutSystem);
        assert!(t.placeholders().is_empty());
        let out = render_prompt(&t, None, &BTreeMap::new()).unwrap();
        assert!(out.contains("USE AT LEAST 2 STEPS OF REASONING"));
        assert!(out.contains(r#"{"title": "Identifying Key Information","#));
        assert!(out.contains("'title', 'content', and 'next_action'"));
    }

    #[test]
    fn placeholder_sets() {
        let p = |id| PromptTemplate::builtin(id).placeholders();
        assert_eq!(p(TemplateId::Draft), vec!["text"]);
        assert_eq!(p(TemplateId::Critic), vec!["text", "reasoning"]);
        assert_eq!(p(TemplateId::Revise), vec!["feedback"]);
        assert!(p(TemplateId::RolloutFollowup).is_empty());
    }

    #[test]
    fn draft_variants() {
        let set = PromptSet::default();
        let s = sample("hello");
        let fixed = set.render(TemplateId::FixedDraft, Some(&s), &[]).unwrap();
        assert!(fixed.contains("Surface-Level Discrepancy Analysis"));
        let generic = set.render(TemplateId::GenericDraft, Some(&s), &[]).unwrap();
        assert!(generic.contains("with a chain of thought"));
        let dynamic = set.render(TemplateId::Draft, Some(&s), &[]).unwrap();
        assert!(dynamic.contains("Text: hello"));
        assert!(dynamic.contains("<image>"));
    }

    #[test]
    fn directory_overrides() {
        let dir = std::env::temp_dir().join(format!("pcr-prompts-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        fs::write(dir.join("revise.txt"), "Try again. Hint: {feedback}\n").unwrap();
        let set = PromptSet::load(Some(&dir)).unwrap();
        assert_eq!(set.render(TemplateId::Revise, None, &[("feedback", "f")]).unwrap(), "Try again. Hint: f");
        assert_eq!(set.get(TemplateId::Critic), &PromptTemplate::builtin(TemplateId::Critic));
        fs::remove_dir_all(&dir).unwrap();
    }
}
