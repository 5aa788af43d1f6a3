//! Command-line driver: generate test batches, run them against compiler
//! registries, convert CUDA sources to HIP, merge per-platform metadata, and
//! build discrepancy reports.
//!
//! Exit codes: 0 on success, 1 on configuration errors, 2 when the command
//! completed but one or more test-level failures were recorded.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use fpdiff_core::ast::Precision;
use fpdiff_core::campaign::{
    build_campaign, build_report, concat_shards, execute_campaign, load_metadata, merge_platforms,
    render_report_text, save_metadata, CampaignOptions, ExecOptions, MergeOptions, MergeResult,
};
use fpdiff_core::emit::Dialect;
use fpdiff_core::gen::GenConfig;
use fpdiff_core::harness::{default_registry, load_registry, BuildCache, CompilerSpec, OptLevel};
use fpdiff_core::hexfloat::format_hex;
use fpdiff_core::hipify::{hipify_with, HipifyOptions};
use fpdiff_core::inputs::generate_input_vectors;
use fpdiff_core::oracle::interpret;
use fpdiff_core::classify::compare_outcomes;

#[derive(Parser)]
#[command(name = "fpdiff", version, about = "Differential floating-point testing across compilers and GPU dialects")]
struct Cli {
    #[command(subcommand)]
    command: Commands,
}

#[derive(Subcommand)]
enum Commands {
    /// Generate random tests and inputs into a directory
    Generate(GenerateArgs),
    /// Execute a generated directory against a compiler registry
    Run(RunArgs),
    /// Convert CUDA source files to HIP
    Hipify(HipifyArgs),
    /// Combine same-platform metadata shards into one dataset
    Concat(ConcatArgs),
    /// Join two metadata files into comparison records
    Merge(MergeArgs),
    /// Build per-level tables, adjacency matrices, and a summary
    Report(ReportArgs),
    /// Re-run one (test, input) through the oracle and one compiler
    Replay(ReplayArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Output directory for sources and metadata.json
    #[arg(long)]
    out: PathBuf,
    /// Number of test programs
    #[arg(long, default_value_t = 10)]
    count: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// fp64 or fp32
    #[arg(long, default_value = "fp64")]
    precision: String,
    /// Comma-separated: c,cuda,hip
    #[arg(long, default_value = "c,cuda,hip", value_delimiter = ',')]
    dialects: Vec<Dialect>,
    /// Input vectors per test
    #[arg(long = "count-inputs", default_value_t = 10)]
    count_inputs: usize,
    /// Exclude math library calls from generated programs
    #[arg(long = "math-free", default_value_t = false)]
    math_free: bool,
    #[arg(long = "max-loop-nesting")]
    max_loop_nesting: Option<u32>,
    #[arg(long = "max-stmts")]
    max_stmts: Option<u32>,
}

#[derive(Args)]
struct RunArgs {
    /// Directory produced by `generate`
    dir: PathBuf,
    /// Metadata file (default: <dir>/metadata.json)
    #[arg(long)]
    metadata: Option<PathBuf>,
    /// Compiler registry JSON (default: built-in nvcc/hipcc/cc registry)
    #[arg(long)]
    registry: Option<PathBuf>,
    /// Comma-separated levels, e.g. O0,O3_FM (default: all five)
    #[arg(long, value_delimiter = ',')]
    levels: Vec<OptLevel>,
    /// Restrict to these dialects (default: those in the metadata)
    #[arg(long, value_delimiter = ',')]
    dialects: Vec<Dialect>,
    /// Parallel compile/run jobs
    #[arg(long)]
    jobs: Option<usize>,
    /// Per-run timeout in seconds (overrides registry values)
    #[arg(long)]
    timeout: Option<u64>,
    /// Regenerate input vectors with this seed before running
    #[arg(long)]
    seed: Option<u64>,
    /// Regenerate this many input vectors per test (with --seed)
    #[arg(long = "count-inputs")]
    count_inputs: Option<usize>,
    /// Where to write the result metadata (default: the input metadata path)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct HipifyArgs {
    /// CUDA source files
    files: Vec<PathBuf>,
    /// External translation tool to shell out to
    #[arg(long)]
    tool: Option<PathBuf>,
    /// Directory for converted files (default: next to the input)
    #[arg(long = "out-dir")]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ConcatArgs {
    /// Shard files, combined left to right
    shards: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MergeArgs {
    meta_a: PathBuf,
    meta_b: PathBuf,
    #[arg(long, default_value = "comparisons.json")]
    out: PathBuf,
    /// Exploratory cross-level join, e.g. O0,O3_FM
    #[arg(long = "cross-level", value_delimiter = ',')]
    cross_level: Vec<OptLevel>,
}

#[derive(Args)]
struct ReportArgs {
    /// Comparison file written by `merge`
    comparisons: PathBuf,
    /// Emit the report as JSON instead of text
    #[arg(long, default_value_t = false)]
    json: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReplayArgs {
    #[arg(long)]
    metadata: PathBuf,
    /// Test identifier
    #[arg(long)]
    test: String,
    #[arg(long = "input-index", default_value_t = 0)]
    input_index: usize,
    /// Also run this registry compiler and compare against the oracle
    #[arg(long)]
    compiler: Option<String>,
    #[arg(long)]
    registry: Option<PathBuf>,
    #[arg(long, default_value = "O0")]
    level: OptLevel,
    #[arg(long = "work-dir")]
    work_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Usage problems are configuration errors.
            let _ = e.print();
            return if e.exit_code() == 0 {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            };
        }
    };
    let result = match cli.command {
        Commands::Generate(args) => cmd_generate(args),
        Commands::Run(args) => cmd_run(args),
        Commands::Hipify(args) => cmd_hipify(args),
        Commands::Concat(args) => cmd_concat(args),
        Commands::Merge(args) => cmd_merge(args),
        Commands::Report(args) => cmd_report(args),
        Commands::Replay(args) => cmd_replay(args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn parse_precision(s: &str) -> Result<Precision> {
    match s.to_ascii_lowercase().as_str() {
        "fp64" | "f64" | "double" => Ok(Precision::Fp64),
        "fp32" | "f32" | "float" => Ok(Precision::Fp32),
        other => bail!("unknown precision {other:?} (expected fp64 or fp32)"),
    }
}

fn registry_from(path: &Option<PathBuf>) -> Result<Vec<CompilerSpec>> {
    match path {
        Some(p) => load_registry(p).with_context(|| format!("loading registry {}", p.display())),
        None => Ok(default_registry()),
    }
}

fn cmd_generate(args: GenerateArgs) -> Result<ExitCode> {
    let precision = parse_precision(&args.precision)?;
    let mut config = if args.math_free {
        GenConfig::math_free(precision, args.seed)
    } else {
        GenConfig::new(precision, args.seed)
    };
    if let Some(n) = args.max_loop_nesting {
        config.max_loop_nesting = n;
    }
    if let Some(n) = args.max_stmts {
        config.max_stmts_per_block = n;
    }

    let mut options = CampaignOptions::new(config, &args.out);
    options.num_tests = args.count;
    options.dialects = args.dialects.clone();
    options.inputs.count = args.count_inputs;

    let meta = build_campaign(&options)?;
    std::fs::create_dir_all(&args.out)?;
    for test in &meta.tests {
        for (&dialect, source) in &test.sources {
            let path = args
                .out
                .join(format!("{}{}", test.test_id, dialect.file_extension()));
            std::fs::write(path, source)?;
        }
    }
    let meta_path = args.out.join("metadata.json");
    save_metadata(&meta_path, &meta)?;
    println!(
        "generated {} tests x {} inputs ({} dialects) into {}",
        meta.tests.len(),
        options.inputs.count,
        options.dialects.len(),
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_run(args: RunArgs) -> Result<ExitCode> {
    let meta_path = args
        .metadata
        .clone()
        .unwrap_or_else(|| args.dir.join("metadata.json"));
    let mut meta = load_metadata(&meta_path)
        .with_context(|| format!("loading metadata {}", meta_path.display()))?;
    let registry = registry_from(&args.registry)?;

    if args.seed.is_some() || args.count_inputs.is_some() {
        let mut input_config = meta.config.inputs.clone();
        input_config.seed = args.seed.unwrap_or(input_config.seed);
        input_config.int_range = meta.config.gen.loop_bound_range;
        if let Some(count) = args.count_inputs {
            input_config.count = count;
        }
        for test in &mut meta.tests {
            test.inputs = generate_input_vectors(&test.ast, &input_config)?;
        }
        meta.config.inputs = input_config;
    }

    let exec = ExecOptions {
        dialects: if args.dialects.is_empty() {
            meta.config.dialects.clone()
        } else {
            args.dialects.clone()
        },
        levels: if args.levels.is_empty() {
            meta.config.levels.clone()
        } else {
            args.levels.clone()
        },
        jobs: args
            .jobs
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())),
        timeout_secs: args.timeout,
        work_dir: args.dir.join("work"),
    };
    execute_campaign(&mut meta, &registry, &exec)?;
    meta.config.levels = exec.levels.clone();
    meta.config.dialects = exec.dialects.clone();

    let out = args.out.unwrap_or(meta_path);
    save_metadata(&out, &meta)?;
    let failures = meta.failure_count();
    println!(
        "{} runs recorded ({} failures) -> {}",
        meta.runs.len(),
        failures,
        out.display()
    );
    Ok(if failures > 0 {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    })
}

fn cmd_hipify(args: HipifyArgs) -> Result<ExitCode> {
    if args.files.is_empty() {
        bail!("no input files");
    }
    let options = HipifyOptions {
        external_tool: args.tool.clone(),
    };
    let mut failures = 0usize;
    for file in &args.files {
        let source = std::fs::read_to_string(file)
            .with_context(|| format!("reading {}", file.display()))?;
        match hipify_with(&source, &options) {
            Ok(converted) => {
                let mut out = file.with_extension("hip");
                if let Some(dir) = &args.out_dir {
                    std::fs::create_dir_all(dir)?;
                    out = dir.join(out.file_name().expect("file name"));
                }
                std::fs::write(&out, converted)?;
                println!("{} -> {}", file.display(), out.display());
            }
            Err(e) => {
                failures += 1;
                eprintln!("{}: {e}", file.display());
            }
        }
    }
    Ok(if failures > 0 {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    })
}

fn cmd_concat(args: ConcatArgs) -> Result<ExitCode> {
    let mut shards = args.shards.iter();
    let first = shards.next().ok_or_else(|| anyhow!("no shard files given"))?;
    let mut combined = load_metadata(first)?;
    for path in shards {
        let shard = load_metadata(path)?;
        combined = concat_shards(&combined, &shard)?;
    }
    save_metadata(&args.out, &combined)?;
    println!(
        "{} tests, {} runs -> {}",
        combined.tests.len(),
        combined.runs.len(),
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_merge(args: MergeArgs) -> Result<ExitCode> {
    let a = load_metadata(&args.meta_a)?;
    let b = load_metadata(&args.meta_b)?;
    let options = match args.cross_level.as_slice() {
        [] => MergeOptions::default(),
        [la, lb] => MergeOptions {
            cross_level: Some((*la, *lb)),
        },
        other => bail!("--cross-level takes exactly two levels, got {}", other.len()),
    };
    let merged = merge_platforms(&a, &b, &options)?;
    std::fs::write(&args.out, serde_json::to_string_pretty(&merged)?)?;
    println!(
        "{} comparisons ({} unmatched a, {} unmatched b, {} skipped without outcome) -> {}",
        merged.records.len(),
        merged.unmatched_a.len(),
        merged.unmatched_b.len(),
        merged.skipped_no_outcome,
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_report(args: ReportArgs) -> Result<ExitCode> {
    let text = std::fs::read_to_string(&args.comparisons)?;
    let merged: MergeResult = serde_json::from_str(&text)?;
    let report = build_report(&merged.records);
    let rendered = if args.json {
        serde_json::to_string_pretty(&report)?
    } else {
        let attempted = merged.runs_a + merged.runs_b;
        format!(
            "{}Runs attempted: {} (a: {}, b: {}); compared: {}; skipped without outcome: {}\n",
            render_report_text(&report),
            attempted,
            merged.runs_a,
            merged.runs_b,
            report.summary.runs_compared,
            merged.skipped_no_outcome,
        )
    };
    match &args.out {
        Some(path) => std::fs::write(path, rendered)?,
        None => print!("{rendered}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_replay(args: ReplayArgs) -> Result<ExitCode> {
    let meta = load_metadata(&args.metadata)?;
    let test = meta
        .test(&args.test)
        .ok_or_else(|| anyhow!("no test {:?} in metadata", args.test))?;
    let input = test
        .inputs
        .get(args.input_index)
        .ok_or_else(|| anyhow!("test has {} inputs", test.inputs.len()))?;

    let (value, outcome) = interpret(&test.ast, input)?;
    println!("input:  {}", input.argv().join(" "));
    println!("oracle: {} ({:?})", format_hex(value), outcome.tag());

    if let Some(compiler_id) = &args.compiler {
        let registry = registry_from(&args.registry)?;
        let spec = registry
            .iter()
            .find(|s| s.id == *compiler_id)
            .ok_or_else(|| anyhow!("no compiler {compiler_id:?} in registry"))?;
        let dialect = Dialect::ALL
            .into_iter()
            .find(|d| spec.extensions.iter().any(|e| e == d.file_extension()))
            .ok_or_else(|| anyhow!("compiler {compiler_id:?} matches no known dialect"))?;
        let bundle = test
            .bundle(dialect)
            .ok_or_else(|| anyhow!("test has no {dialect} source"))?;
        let work = args
            .work_dir
            .clone()
            .unwrap_or_else(|| std::env::temp_dir().join("fpdiff-replay"));
        let cache = BuildCache::new(work)?;
        let record = cache.compile_and_run(&bundle, spec, args.level, input, args.input_index);
        match &record.outcome {
            Some(compiled) => {
                println!(
                    "{} {}: {} ({:?})",
                    spec.id,
                    args.level,
                    record.raw_stdout.trim(),
                    compiled.tag()
                );
                let class = compare_outcomes(&outcome, compiled);
                println!("class:  {:?}", class.tag);
            }
            None => {
                println!(
                    "{} {}: {:?} {}",
                    spec.id,
                    args.level,
                    record.status,
                    record.diagnostics.as_deref().unwrap_or("")
                );
                return Ok(ExitCode::from(2));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
