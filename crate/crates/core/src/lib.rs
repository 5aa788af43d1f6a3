//! Differential floating-point testing toolkit.
//!
//! Generates seeded random numerical kernel programs, emits them as CUDA,
//! HIP, and portable C, compiles and runs them across compilers and
//! optimization levels, categorizes each result (NaN / Inf / Zero / Number,
//! signed, with a subnormal flag), classifies outcome pairs into seven
//! discrepancy classes, and merges per-platform result metadata into reports.
//! A strict IEEE reference interpreter serves as a compiler-independent
//! oracle for the generated programs.

pub mod ast;
pub mod campaign;
pub mod classify;
pub mod emit;
pub mod error;
pub mod gen;
pub mod harness;
pub mod hexfloat;
pub mod hipify;
pub mod inputs;
pub mod oracle;

pub use ast::{ast_signature, validate_ast, Precision, ProgramAst};
pub use campaign::{
    build_campaign, build_report, concat_shards, execute_campaign, load_metadata, merge_platforms,
    run_campaign, save_metadata, CampaignMetadata, CampaignOptions, ComparisonRecord, MergeOptions,
    MergeResult, Report,
};
pub use classify::{
    compare_outcomes, compare_outcomes_with, parse_outcome, ClassTag, DiscrepancyClass,
    NumberEquality, Outcome, OutcomeTag,
};
pub use emit::{emit_source, emit_source_with, Dialect, EmitOptions, SourceBundle};
pub use error::{Error, Result};
pub use gen::{generate_program, sample_literal, GenConfig};
pub use harness::{
    build_command, default_registry, load_registry, match_compiler, BuildCache, CompilerSpec,
    ExecutionRecord, OptLevel, RunStatus,
};
pub use hipify::{hipify_lite, hipify_with, HipifyOptions};
pub use inputs::{generate_input_vectors, InputConfig, InputVector, ValueClass};
pub use oracle::{interpret, interpret_with, HostMath, MathBackend};
