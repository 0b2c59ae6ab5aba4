//! End-to-end captioning: agnostic caption of the query, example retrieval,
//! prompt construction, model call and post-processing, plus the
//! leave-one-out benchmark over a database.

mod captioner;
mod mode;
mod prompt;
mod provider;
mod run;

pub use captioner::{
    agnostic_caption_external, agnostic_caption_rule_based, analyze_shape, render_shape,
    AgnosticCaptioner, CaptionInput, ExternalCaptioner, RuleBasedCaptioner, RuleConfig,
    ShapeClass, ShapeSummary, AGNOSTIC_INSTRUCTION, MIN_CAPTION_LENGTH, RULE_CAPTIONER_TAG,
};
pub use mode::Mode;
pub use prompt::{
    build_icl_prompt, build_zs_prompt, multimodal_instruction, ExamplePair, PromptBundle,
    TEMPLATE_VERSION,
};
pub use provider::{
    post_process, CannedService, CompletionRequest, CompletionService, EchoService, Endpoint,
    HttpCompletionService, OracleService, LLM_API_KEY_ENV, MM_API_KEY_ENV,
};
pub use run::{
    agnostic_captions, build_prompt, generate_caption, multimodal_direct, run_benchmark,
    store_agnostic, write_outputs, AgnosticCaptions, BenchmarkRun, CaptionTrace, ModeRun,
    PipelineConfig, Providers, RunContext,
};
