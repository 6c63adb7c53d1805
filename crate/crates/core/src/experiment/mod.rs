//! Config-driven experiment runs.

mod config;
mod pipeline;
mod structure;

pub use config::{
    AllocationConfig, AllocationMethod, DatasetConfig, DatasetSource, EvaluationConfig,
    ExperimentConfig, ModelConfig, SchemaChoice,
};
pub use pipeline::{
    build_model, evaluate, execute, fit_allocation, load_dataset, load_raw, run, run_with,
    write_json, FittedAllocation, ModelBundle, Outcome, RunProvenance, TrainingTrace,
    ACTIVATION_TRACE_FILE, BUNDLE_FORMAT, CHECKPOINT_FILE, LOSS_TRACE_FILE, METRICS_FILE,
    PROVENANCE_FILE,
};
pub use structure::{parse_structure, Structure};
