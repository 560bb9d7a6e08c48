//! Structured text: prompt templates, the rollout step JSON grammar, the
//! think/answer and feedback/score tag grammars, trajectory flattening and
//! the format reward.

mod prompts;
mod steps;
mod tags;

pub use prompts::{
    render_prompt, PromptSet, PromptTemplate, RenderError, TemplateId, CLARIFY_INSTRUCTION, FORCE_FINAL_INSTRUCTION,
    PLACEHOLDERS,
};
pub use steps::{flatten_trajectory, parse_role_step, InvalidAnswer, StepParseError};
pub use tags::{format_reward, parse_critique, parse_reasoning, Formatted};
