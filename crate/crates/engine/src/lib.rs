//! Model-facing machinery: generation backends, trajectory synthesis and the
//! draft/critique/revise batch pipelines.

pub mod backend;
pub mod io;
pub mod pipeline;
mod pool;
pub mod stub;
pub mod synthesis;

pub use backend::{build_backend, request_key, BackendError, Generator, HttpBackend, ScriptedBackend};
pub use pipeline::{
    execute_plan, load_drafts, mutual_refinement_schedule, BatchSummary, Pipeline, PipelineError, ProposalBatch, Stage,
    StageKind, StagePlan,
};
pub use pool::run_ordered;
pub use synthesis::{synthesize, StepStats, SynthesisError, SynthesisOutcome, SynthesisRecord};
