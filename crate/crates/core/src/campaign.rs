//! Campaign orchestration: generate → emit → run over a batch of tests,
//! persist the JSON metadata protocol, merge results across platforms, and
//! build reports.
//!
//! The metadata file is the transport between platforms: it carries the
//! tests (ASTs, sources, inputs) and every run's raw and categorized result,
//! so a second machine can recompile and rerun exactly the same batch and the
//! two files can then be joined into per-(test, input, level) comparisons.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::ast::{ast_signature, validate_ast, ProgramAst};
use crate::classify::{compare_outcomes, parse_outcome, ClassTag, DiscrepancyClass, Outcome};
use crate::emit::{emit_source_with, Dialect, EmitOptions, SourceBundle};
use crate::error::{Error, Result};
use crate::gen::{generate_program, GenConfig};
use crate::harness::{
    match_compiler, CompilerSpec, ExecutionRecord, OptLevel, RunStatus,
};
use crate::inputs::{generate_input_vectors, InputConfig, InputVector};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlatformInfo {
    pub hostname: String,
    pub os: String,
    pub compiler_versions: BTreeMap<String, String>,
}

impl PlatformInfo {
    pub fn probe() -> Self {
        let hostname = std::fs::read_to_string("/proc/sys/kernel/hostname")
            .map(|s| s.trim().to_string())
            .or_else(|_| std::env::var("HOSTNAME"))
            .unwrap_or_else(|_| "unknown".to_string());
        let os = std::fs::read_to_string("/etc/os-release")
            .ok()
            .and_then(|text| {
                text.lines()
                    .find_map(|l| l.strip_prefix("PRETTY_NAME=").map(|v| v.trim_matches('"').to_string()))
            })
            .unwrap_or_else(|| std::env::consts::OS.to_string());
        PlatformInfo {
            hostname,
            os,
            compiler_versions: BTreeMap::new(),
        }
    }
}

/// Everything needed to reproduce the batch: generator config plus input
/// settings plus the requested execution matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConfigSnapshot {
    pub gen: GenConfig,
    pub inputs: InputConfig,
    pub dialects: Vec<Dialect>,
    pub levels: Vec<OptLevel>,
}

/// One test: its AST (for replay through the interpreter), its emitted
/// sources, and its input vectors.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestEntry {
    pub test_id: String,
    pub ast: ProgramAst,
    pub dialects: Vec<Dialect>,
    pub sources: BTreeMap<Dialect, String>,
    pub inputs: Vec<InputVector>,
}

impl TestEntry {
    pub fn bundle(&self, dialect: Dialect) -> Option<SourceBundle> {
        self.sources.get(&dialect).map(|text| SourceBundle {
            test_id: self.test_id.clone(),
            dialect,
            source_text: text.clone(),
            precision: self.ast.precision,
        })
    }
}

/// One run's summary inside the metadata file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub test_id: String,
    pub input_index: usize,
    pub compiler_id: String,
    pub opt_level: OptLevel,
    pub status: RunStatus,
    /// Canonical outcome rendering (absent for failed runs).
    pub outcome: Option<String>,
    pub raw_stdout: String,
    pub exit_status: Option<i32>,
    pub wall_time_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<String>,
}

impl From<ExecutionRecord> for RunSummary {
    fn from(r: ExecutionRecord) -> Self {
        RunSummary {
            test_id: r.test_id,
            input_index: r.input_index,
            compiler_id: r.compiler_id,
            opt_level: r.opt_level,
            status: r.status,
            outcome: r.outcome.map(|o| o.render()),
            raw_stdout: r.raw_stdout,
            exit_status: r.exit_status,
            wall_time_ms: r.wall_time_ms,
            diagnostics: r.diagnostics,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CampaignMetadata {
    pub schema_version: u32,
    pub platform: PlatformInfo,
    pub config: ConfigSnapshot,
    pub tests: Vec<TestEntry>,
    pub runs: Vec<RunSummary>,
}

impl CampaignMetadata {
    pub fn test(&self, test_id: &str) -> Option<&TestEntry> {
        self.tests.iter().find(|t| t.test_id == test_id)
    }

    /// Runs that did not complete with a categorized outcome.
    pub fn failure_count(&self) -> usize {
        self.runs
            .iter()
            .filter(|r| r.status != RunStatus::Completed)
            .count()
    }
}

/// Atomic metadata write: serialize to a sibling temp file, then rename.
pub fn save_metadata(path: &Path, meta: &CampaignMetadata) -> Result<()> {
    let json = serde_json::to_string_pretty(meta)?;
    let tmp = path.with_extension("json.tmp");
    std::fs::write(&tmp, &json)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_metadata(path: &Path) -> Result<CampaignMetadata> {
    let text = std::fs::read_to_string(path)?;
    let meta: CampaignMetadata = serde_json::from_str(&text)?;
    if meta.schema_version != SCHEMA_VERSION {
        return Err(Error::SchemaMismatch {
            left: meta.schema_version,
            right: SCHEMA_VERSION,
        });
    }
    Ok(meta)
}

/// Campaign setup: what to generate and how to run it.
#[derive(Debug, Clone)]
pub struct CampaignOptions {
    pub config: GenConfig,
    pub num_tests: usize,
    pub inputs: InputConfig,
    pub dialects: Vec<Dialect>,
    pub levels: Vec<OptLevel>,
    pub jobs: usize,
    /// Override every compiler's per-run timeout.
    pub timeout_secs: Option<u64>,
    pub work_dir: PathBuf,
    pub emit: EmitOptions,
}

impl CampaignOptions {
    pub fn new(config: GenConfig, work_dir: impl Into<PathBuf>) -> Self {
        let inputs = InputConfig {
            int_range: config.loop_bound_range,
            ..InputConfig::new(config.seed)
        };
        let emit = EmitOptions {
            array_len: config.loop_bound_range.1,
            ..EmitOptions::default()
        };
        CampaignOptions {
            config,
            num_tests: 10,
            inputs,
            dialects: vec![Dialect::PortableC],
            levels: OptLevel::ALL.to_vec(),
            jobs: std::thread::available_parallelism().map_or(1, |n| n.get()),
            timeout_secs: None,
            work_dir: work_dir.into(),
            emit,
        }
    }
}

/// Generate the batch: tests, sources, and inputs, with no runs yet.
pub fn build_campaign(options: &CampaignOptions) -> Result<CampaignMetadata> {
    options.config.validate()?;
    if options.dialects.is_empty() {
        return Err(Error::Config("no dialects requested".into()));
    }
    if options.levels.is_empty() {
        return Err(Error::Config("no optimization levels requested".into()));
    }
    let mut tests = Vec::with_capacity(options.num_tests);
    let mut seen = std::collections::HashSet::new();
    // Consecutive seeds occasionally collide on structurally identical tiny
    // programs; keep drawing until the batch holds num_tests distinct tests.
    let mut offset = 0u64;
    while tests.len() < options.num_tests {
        let mut config = options.config.clone();
        config.seed = options.config.seed.wrapping_add(offset);
        offset += 1;
        if offset > options.num_tests as u64 * 10 + 100 {
            return Err(Error::Config(format!(
                "could not reach {} distinct tests (got {})",
                options.num_tests,
                tests.len()
            )));
        }
        let ast = generate_program(&config)?;
        if let Err(errs) = validate_ast(&ast, Some(config.max_loop_nesting)) {
            return Err(Error::Eval(format!(
                "generated AST failed validation (generator bug): {errs:?}"
            )));
        }
        let test_id = ast_signature(&ast);
        if !seen.insert(test_id.clone()) {
            continue;
        }
        let mut sources = BTreeMap::new();
        for &dialect in &options.dialects {
            let bundle = emit_source_with(&ast, dialect, &options.emit);
            sources.insert(dialect, bundle.source_text);
        }
        let inputs = generate_input_vectors(&ast, &options.inputs)?;
        tests.push(TestEntry {
            test_id,
            ast,
            dialects: options.dialects.clone(),
            sources,
            inputs,
        });
    }
    Ok(CampaignMetadata {
        schema_version: SCHEMA_VERSION,
        platform: PlatformInfo::probe(),
        config: ConfigSnapshot {
            gen: options.config.clone(),
            inputs: options.inputs.clone(),
            dialects: options.dialects.clone(),
            levels: options.levels.clone(),
        },
        tests,
        runs: Vec::new(),
    })
}

/// Execution matrix settings for a prepared batch.
#[derive(Debug, Clone)]
pub struct ExecOptions {
    pub dialects: Vec<Dialect>,
    pub levels: Vec<OptLevel>,
    pub jobs: usize,
    pub timeout_secs: Option<u64>,
    pub work_dir: PathBuf,
}

/// Compile and run every (test, input, compiler, level) combination,
/// replacing `meta.runs`. Individual compile/run failures are recorded,
/// never fatal; only configuration problems error out.
pub fn execute_campaign(
    meta: &mut CampaignMetadata,
    registry: &[CompilerSpec],
    opts: &ExecOptions,
) -> Result<()> {
    if opts.levels.is_empty() {
        return Err(Error::Config("no optimization levels requested".into()));
    }
    if opts.dialects.is_empty() {
        return Err(Error::Config("no dialects requested".into()));
    }
    for spec in registry {
        spec.validate()?;
    }
    let mut levels = opts.levels.clone();
    levels.sort();
    levels.dedup();
    // Resolve one compiler per requested dialect up front.
    let mut compilers: BTreeMap<Dialect, CompilerSpec> = BTreeMap::new();
    for &dialect in &opts.dialects {
        let probe = PathBuf::from(format!("probe{}", dialect.file_extension()));
        let spec = match_compiler(&probe, registry).map_err(|_| {
            Error::Config(format!(
                "no compiler registered for dialect {dialect} ({})",
                dialect.file_extension()
            ))
        })?;
        let mut spec = spec.clone();
        if let Some(secs) = opts.timeout_secs {
            spec.timeout_secs = secs;
        }
        compilers.insert(dialect, spec);
    }

    let cache = crate::harness::BuildCache::new(&opts.work_dir)?;

    // Phase 1: compile each (test, dialect, level) once, in parallel.
    let mut compile_jobs: Vec<(SourceBundle, &CompilerSpec, OptLevel)> = Vec::new();
    for test in &meta.tests {
        for (&dialect, spec) in &compilers {
            let Some(bundle) = test.bundle(dialect) else {
                continue;
            };
            for &level in &levels {
                compile_jobs.push((bundle.clone(), spec, level));
            }
        }
    }
    parallel_for_each(opts.jobs, &compile_jobs, |(bundle, spec, level)| {
        let _ = cache.compile(bundle, spec, *level);
    });

    // Phase 2: run every input against every cached binary.
    let mut run_jobs: Vec<(SourceBundle, &CompilerSpec, OptLevel, &InputVector, usize)> =
        Vec::new();
    for test in &meta.tests {
        for (&dialect, spec) in &compilers {
            let Some(bundle) = test.bundle(dialect) else {
                continue;
            };
            for &level in &levels {
                for (idx, input) in test.inputs.iter().enumerate() {
                    run_jobs.push((bundle.clone(), spec, level, input, idx));
                }
            }
        }
    }
    let records: Mutex<Vec<ExecutionRecord>> = Mutex::new(Vec::with_capacity(run_jobs.len()));
    parallel_for_each(opts.jobs, &run_jobs, |(bundle, spec, level, input, idx)| {
        let record = cache.compile_and_run(bundle, spec, *level, input, *idx);
        records.lock().expect("records lock").push(record);
    });

    let mut records = records.into_inner().expect("records lock");
    records.sort_by(|a, b| {
        (&a.test_id, a.input_index, &a.compiler_id, a.opt_level).cmp(&(
            &b.test_id,
            b.input_index,
            &b.compiler_id,
            b.opt_level,
        ))
    });
    meta.runs = records.into_iter().map(RunSummary::from).collect();

    for spec in compilers.values() {
        if let Some(version) = spec.probe_version() {
            meta.platform
                .compiler_versions
                .insert(spec.id.clone(), version);
        }
    }
    Ok(())
}

/// Generate and execute in one step.
pub fn run_campaign(
    options: &CampaignOptions,
    registry: &[CompilerSpec],
) -> Result<CampaignMetadata> {
    let mut meta = build_campaign(options)?;
    let exec = ExecOptions {
        dialects: options.dialects.clone(),
        levels: options.levels.clone(),
        jobs: options.jobs,
        timeout_secs: options.timeout_secs,
        work_dir: options.work_dir.clone(),
    };
    execute_campaign(&mut meta, registry, &exec)?;
    Ok(meta)
}

/// Fixed-size worker pool over a job slice.
fn parallel_for_each<T: Sync, F: Fn(&T) + Sync>(jobs: usize, items: &[T], f: F) {
    let workers = jobs.max(1).min(items.len().max(1));
    if workers <= 1 {
        for item in items {
            f(item);
        }
        return;
    }
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                match items.get(i) {
                    Some(item) => f(item),
                    None => break,
                }
            });
        }
    });
}

/// Combine two same-platform metadata shards (separately executed batches)
/// into one dataset, keyed by test_id. Duplicate tests and runs keep the
/// first occurrence; the result is sorted and mergeable like any other file.
pub fn concat_shards(a: &CampaignMetadata, b: &CampaignMetadata) -> Result<CampaignMetadata> {
    if a.schema_version != b.schema_version {
        return Err(Error::SchemaMismatch {
            left: a.schema_version,
            right: b.schema_version,
        });
    }
    if a.config.gen.precision != b.config.gen.precision {
        return Err(Error::Config(
            "shards disagree on precision; outcomes are not comparable".into(),
        ));
    }
    let mut combined = a.clone();
    let mut test_ids: std::collections::HashSet<String> =
        a.tests.iter().map(|t| t.test_id.clone()).collect();
    for test in &b.tests {
        if test_ids.insert(test.test_id.clone()) {
            combined.tests.push(test.clone());
        }
    }
    combined.tests.sort_by(|x, y| x.test_id.cmp(&y.test_id));

    let mut run_keys: std::collections::HashSet<(String, usize, String, OptLevel)> = a
        .runs
        .iter()
        .map(|r| (r.test_id.clone(), r.input_index, r.compiler_id.clone(), r.opt_level))
        .collect();
    for run in &b.runs {
        let key = (run.test_id.clone(), run.input_index, run.compiler_id.clone(), run.opt_level);
        if run_keys.insert(key) {
            combined.runs.push(run.clone());
        }
    }
    combined.runs.sort_by(|x, y| {
        (&x.test_id, x.input_index, &x.compiler_id, x.opt_level).cmp(&(
            &y.test_id,
            y.input_index,
            &y.compiler_id,
            y.opt_level,
        ))
    });
    for (id, version) in &b.platform.compiler_versions {
        combined
            .platform
            .compiler_versions
            .entry(id.clone())
            .or_insert_with(|| version.clone());
    }
    Ok(combined)
}

/// One cross-platform (or cross-level) comparison.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonRecord {
    pub test_id: String,
    pub input_index: usize,
    pub opt_level: OptLevel,
    /// Side b's level in cross-level mode; absent when both sides share
    /// `opt_level`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub opt_level_b: Option<OptLevel>,
    pub side_a: (String, Outcome),
    pub side_b: (String, Outcome),
    pub class: DiscrepancyClass,
}

/// A run that found no partner on the other side.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UnmatchedRun {
    pub test_id: String,
    pub input_index: usize,
    pub compiler_id: String,
    pub opt_level: OptLevel,
}

#[derive(Debug, Clone, Default)]
pub struct MergeOptions {
    /// Exploratory mode: join side a at `.0` against side b at `.1` instead
    /// of same-level joining. Excluded from standard reports.
    pub cross_level: Option<(OptLevel, OptLevel)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MergeResult {
    pub records: Vec<ComparisonRecord>,
    pub unmatched_a: Vec<UnmatchedRun>,
    pub unmatched_b: Vec<UnmatchedRun>,
    /// Joined pairs skipped because a side had no categorized outcome.
    pub skipped_no_outcome: u64,
    pub runs_a: u64,
    pub runs_b: u64,
}

type JoinKey = (String, usize, Option<OptLevel>);

fn index_runs(
    meta: &CampaignMetadata,
    level_filter: Option<OptLevel>,
    key_level: bool,
) -> BTreeMap<JoinKey, Vec<&RunSummary>> {
    let mut map: BTreeMap<JoinKey, Vec<&RunSummary>> = BTreeMap::new();
    for run in &meta.runs {
        if let Some(level) = level_filter {
            if run.opt_level != level {
                continue;
            }
        }
        let key = (
            run.test_id.clone(),
            run.input_index,
            key_level.then_some(run.opt_level),
        );
        map.entry(key).or_default().push(run);
    }
    map
}

/// Join two metadata files on (test_id, input_index, opt_level) and classify
/// every joined pair. Runs present on only one side land in the unmatched
/// lists; runs without outcomes are counted, not dropped silently.
pub fn merge_platforms(
    a: &CampaignMetadata,
    b: &CampaignMetadata,
    options: &MergeOptions,
) -> Result<MergeResult> {
    if a.schema_version != b.schema_version {
        return Err(Error::SchemaMismatch {
            left: a.schema_version,
            right: b.schema_version,
        });
    }
    let precision_a = a.config.gen.precision;
    let precision_b = b.config.gen.precision;

    let (index_a, index_b) = match options.cross_level {
        None => (index_runs(a, None, true), index_runs(b, None, true)),
        Some((la, lb)) => (index_runs(a, Some(la), false), index_runs(b, Some(lb), false)),
    };

    let mut result = MergeResult {
        records: Vec::new(),
        unmatched_a: Vec::new(),
        unmatched_b: Vec::new(),
        skipped_no_outcome: 0,
        runs_a: a.runs.len() as u64,
        runs_b: b.runs.len() as u64,
    };

    for (key, runs_a) in &index_a {
        let Some(runs_b) = index_b.get(key) else {
            result.unmatched_a.extend(runs_a.iter().map(|r| unmatched(r)));
            continue;
        };
        // When both sides ran the same compiler set (e.g. a self-merge or a
        // shard re-run), pair by compiler id; across platforms the compiler
        // sets differ and every a-run meets every b-run.
        let ids_a: std::collections::BTreeSet<&str> =
            runs_a.iter().map(|r| r.compiler_id.as_str()).collect();
        let ids_b: std::collections::BTreeSet<&str> =
            runs_b.iter().map(|r| r.compiler_id.as_str()).collect();
        let pairs: Vec<(&RunSummary, &RunSummary)> = if ids_a == ids_b {
            runs_a
                .iter()
                .filter_map(|ra| {
                    runs_b
                        .iter()
                        .find(|rb| rb.compiler_id == ra.compiler_id)
                        .map(|rb| (*ra, *rb))
                })
                .collect()
        } else {
            runs_a
                .iter()
                .flat_map(|ra| runs_b.iter().map(move |rb| (*ra, *rb)))
                .collect()
        };

        for (ra, rb) in pairs {
            let (Some(oa), Some(ob)) = (&ra.outcome, &rb.outcome) else {
                result.skipped_no_outcome += 1;
                continue;
            };
            let oa = parse_outcome(oa, precision_a)?;
            let ob = parse_outcome(ob, precision_b)?;
            result.records.push(ComparisonRecord {
                test_id: ra.test_id.clone(),
                input_index: ra.input_index,
                opt_level: ra.opt_level,
                opt_level_b: options.cross_level.map(|(_, lb)| lb),
                side_a: (ra.compiler_id.clone(), oa),
                side_b: (rb.compiler_id.clone(), ob),
                class: compare_outcomes(&oa, &ob),
            });
        }
    }
    for (key, runs_b) in &index_b {
        if !index_a.contains_key(key) {
            result.unmatched_b.extend(runs_b.iter().map(|r| unmatched(r)));
        }
    }
    Ok(result)
}

fn unmatched(run: &RunSummary) -> UnmatchedRun {
    UnmatchedRun {
        test_id: run.test_id.clone(),
        input_index: run.input_index,
        compiler_id: run.compiler_id.clone(),
        opt_level: run.opt_level,
    }
}

/// Per-level report table: class counts and the ordered adjacency matrix
/// over (side a tag, side b tag), counting every compared record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelTable {
    pub compared: u64,
    pub consistent: u64,
    pub discrepancies: u64,
    pub by_class: BTreeMap<ClassTag, u64>,
    pub adjacency: [[u64; 4]; 4],
}

impl LevelTable {
    fn new() -> Self {
        LevelTable {
            compared: 0,
            consistent: 0,
            discrepancies: 0,
            by_class: ClassTag::DISCREPANCIES.iter().map(|c| (*c, 0)).collect(),
            adjacency: [[0; 4]; 4],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub runs_compared: u64,
    pub total_discrepancies: u64,
    /// total_discrepancies / runs_compared, rounded half-up to 2 decimals.
    pub percent: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub per_opt: BTreeMap<OptLevel, LevelTable>,
    pub summary: Summary,
}

/// Percentage text, round-half-up to two decimals (guarded denominator).
pub fn percent_display(discrepancies: u64, runs: u64) -> String {
    if runs == 0 {
        return "0.00%".to_string();
    }
    let pct = discrepancies as f64 / runs as f64 * 100.0;
    let rounded = ((pct * 100.0) + 0.5).floor() / 100.0;
    format!("{rounded:.2}%")
}

/// Aggregate comparison records into per-level tables and the summary.
/// Invariant under record order; class counts per level sum to that level's
/// discrepancy total.
pub fn build_report(records: &[ComparisonRecord]) -> Report {
    let mut per_opt: BTreeMap<OptLevel, LevelTable> = BTreeMap::new();
    for record in records {
        let table = per_opt.entry(record.opt_level).or_insert_with(LevelTable::new);
        table.compared += 1;
        let (ta, tb) = record.class.direction;
        table.adjacency[ta.index()][tb.index()] += 1;
        if record.class.tag == ClassTag::Consistent {
            table.consistent += 1;
        } else {
            table.discrepancies += 1;
            *table.by_class.entry(record.class.tag).or_insert(0) += 1;
        }
    }
    let runs_compared = records.len() as u64;
    let total_discrepancies = per_opt.values().map(|t| t.discrepancies).sum();
    Report {
        per_opt,
        summary: Summary {
            runs_compared,
            total_discrepancies,
            percent: percent_display(total_discrepancies, runs_compared),
        },
    }
}

/// Plain-text rendering: discrepancies per level, adjacency matrices with
/// both directional readings, and the summary line.
pub fn render_report_text(report: &Report) -> String {
    use crate::classify::OutcomeTag;
    let mut out = String::new();
    out.push_str(&format!(
        "{:<8} {:>8} {:>10} {:>10} {:>9} {:>10} {:>9} {:>10} {:>9}\n",
        "Opt", "Disc.", "NaN,Inf", "NaN,Zero", "NaN,Num", "Inf,Zero", "Inf,Num", "Num,Zero", "Num,Num"
    ));
    let mut totals: BTreeMap<ClassTag, u64> = BTreeMap::new();
    let mut total_disc = 0u64;
    for (level, table) in &report.per_opt {
        out.push_str(&format!("{:<8} {:>8}", level.label(), table.discrepancies));
        for class in ClassTag::DISCREPANCIES {
            let n = table.by_class.get(&class).copied().unwrap_or(0);
            *totals.entry(class).or_insert(0) += n;
            out.push_str(&format!(" {n:>10}"));
        }
        out.push('\n');
        total_disc += table.discrepancies;
    }
    out.push_str(&format!("{:<8} {total_disc:>8}", "Total"));
    for class in ClassTag::DISCREPANCIES {
        out.push_str(&format!(" {:>10}", totals.get(&class).copied().unwrap_or(0)));
    }
    out.push('\n');

    for (level, table) in &report.per_opt {
        out.push_str(&format!(
            "\nAdjacency {} (side a rows \\ side b columns; cells: a→b, b→a)\n",
            level.label()
        ));
        out.push_str(&format!("{:<8}", ""));
        for tag in OutcomeTag::ALL {
            out.push_str(&format!("{:>14}", tag.label()));
        }
        out.push('\n');
        for (i, row_tag) in OutcomeTag::ALL.iter().enumerate() {
            out.push_str(&format!("{:<8}", row_tag.label()));
            for j in 0..4 {
                let ab = table.adjacency[i][j];
                let ba = table.adjacency[j][i];
                out.push_str(&format!("{:>14}", format!("{ab}, {ba}")));
            }
            out.push('\n');
        }
    }

    out.push_str(&format!(
        "\nRuns compared: {}\nTotal discrepancies: {} ({})\n",
        report.summary.runs_compared, report.summary.total_discrepancies, report.summary.percent
    ));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::Precision;
    use crate::classify::OutcomeTag;
    use crate::harness::host_cc_spec;

    fn small_options(dir: &Path, seed: u64) -> CampaignOptions {
        let config = GenConfig::math_free(Precision::Fp64, seed);
        let mut options = CampaignOptions::new(config, dir);
        options.num_tests = 3;
        options.inputs.count = 2;
        options.levels = vec![OptLevel::O0];
        options.jobs = 2;
        options
    }

    #[test]
    fn counting_contract_and_exit_semantics() {
        let dir = tempfile::tempdir().unwrap();
        let mut options = small_options(dir.path(), 50);
        options.num_tests = 2;
        let registry = vec![host_cc_spec("cc", "cc")];
        let meta = run_campaign(&options, &registry).unwrap();
        // 2 tests × 2 inputs × 1 level × 1 compiler.
        assert_eq!(meta.runs.len(), 4);
        assert_eq!(meta.failure_count(), 0);
        assert!(meta.platform.compiler_versions.contains_key("cc"));
    }

    #[test]
    fn broken_toolchain_is_recorded_not_fatal() {
        let dir = tempfile::tempdir().unwrap();
        let mut options = small_options(dir.path(), 56);
        options.num_tests = 2;
        let mut broken = host_cc_spec("cc", "/bin/false");
        broken.command = "false".into();
        let meta = run_campaign(&options, &[broken]).unwrap();
        assert_eq!(meta.runs.len(), 4);
        assert_eq!(meta.failure_count(), 4);
        assert!(meta
            .runs
            .iter()
            .all(|r| r.status == RunStatus::CompileError && r.outcome.is_none()));
    }

    #[test]
    fn metadata_round_trips_byte_stably() {
        let dir = tempfile::tempdir().unwrap();
        let options = small_options(dir.path(), 51);
        let registry = vec![host_cc_spec("cc", "cc")];
        let meta = run_campaign(&options, &registry).unwrap();
        let json1 = serde_json::to_string_pretty(&meta).unwrap();
        let parsed: CampaignMetadata = serde_json::from_str(&json1).unwrap();
        let json2 = serde_json::to_string_pretty(&parsed).unwrap();
        assert_eq!(json1, json2);

        let path = dir.path().join("meta.json");
        save_metadata(&path, &meta).unwrap();
        let loaded = load_metadata(&path).unwrap();
        assert_eq!(serde_json::to_string(&loaded).unwrap(), serde_json::to_string(&meta).unwrap());
    }

    #[test]
    fn rerun_with_same_seed_gives_identical_outcomes() {
        let dir1 = tempfile::tempdir().unwrap();
        let dir2 = tempfile::tempdir().unwrap();
        let registry = vec![host_cc_spec("cc", "cc")];
        let meta1 = run_campaign(&small_options(dir1.path(), 52), &registry).unwrap();
        let meta2 = run_campaign(&small_options(dir2.path(), 52), &registry).unwrap();
        let outcomes1: Vec<_> = meta1.runs.iter().map(|r| &r.outcome).collect();
        let outcomes2: Vec<_> = meta2.runs.iter().map(|r| &r.outcome).collect();
        assert_eq!(outcomes1, outcomes2);
    }

    #[test]
    fn self_merge_is_all_consistent() {
        let dir = tempfile::tempdir().unwrap();
        let registry = vec![host_cc_spec("cc", "cc")];
        let meta = run_campaign(&small_options(dir.path(), 53), &registry).unwrap();
        let merged = merge_platforms(&meta, &meta.clone(), &MergeOptions::default()).unwrap();
        assert_eq!(merged.records.len(), meta.runs.len());
        assert!(merged
            .records
            .iter()
            .all(|r| r.class.tag == ClassTag::Consistent));
        assert!(merged.unmatched_a.is_empty() && merged.unmatched_b.is_empty());
    }

    #[test]
    fn one_sided_tests_land_in_unmatched() {
        let dir = tempfile::tempdir().unwrap();
        let registry = vec![host_cc_spec("cc", "cc")];
        let meta_a = run_campaign(&small_options(dir.path(), 54), &registry).unwrap();
        let mut meta_b = meta_a.clone();
        let dropped = meta_b.tests[0].test_id.clone();
        meta_b.runs.retain(|r| r.test_id != dropped);
        let merged = merge_platforms(&meta_a, &meta_b, &MergeOptions::default()).unwrap();
        assert!(merged.unmatched_a.iter().all(|u| u.test_id == dropped));
        assert!(!merged.unmatched_a.is_empty());
        assert!(merged.unmatched_b.is_empty());
    }

    #[test]
    fn shards_concatenate_by_test_id() {
        let dir = tempfile::tempdir().unwrap();
        let registry = vec![host_cc_spec("cc", "cc")];
        let mut options = small_options(dir.path(), 57);
        options.num_tests = 4;
        let full = run_campaign(&options, &registry).unwrap();

        // Split the batch into two shards and recombine.
        let split_id = full.tests[1].test_id.clone();
        let mut shard_a = full.clone();
        let mut shard_b = full.clone();
        shard_a.tests.retain(|t| t.test_id <= split_id);
        shard_a.runs.retain(|r| r.test_id <= split_id);
        shard_b.tests.retain(|t| t.test_id > split_id);
        shard_b.runs.retain(|r| r.test_id > split_id);

        let combined = concat_shards(&shard_a, &shard_b).unwrap();
        assert_eq!(combined.tests.len(), full.tests.len());
        assert_eq!(combined.runs.len(), full.runs.len());
        // The recombined dataset merges cleanly against the original.
        let merged = merge_platforms(&combined, &full, &MergeOptions::default()).unwrap();
        assert_eq!(merged.records.len(), full.runs.len());
        assert!(merged.records.iter().all(|r| r.class.tag == ClassTag::Consistent));
        assert!(merged.unmatched_a.is_empty() && merged.unmatched_b.is_empty());

        // Overlapping shards deduplicate rather than double-count.
        let overlapping = concat_shards(&full, &shard_a).unwrap();
        assert_eq!(overlapping.runs.len(), full.runs.len());
    }

    #[test]
    fn schema_mismatch_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let registry = vec![host_cc_spec("cc", "cc")];
        let meta_a = run_campaign(&small_options(dir.path(), 55), &registry).unwrap();
        let mut meta_b = meta_a.clone();
        meta_b.schema_version = 2;
        assert!(matches!(
            merge_platforms(&meta_a, &meta_b, &MergeOptions::default()),
            Err(Error::SchemaMismatch { .. })
        ));
    }

    fn synthetic_record(level: OptLevel, a: Outcome, b: Outcome, i: usize) -> ComparisonRecord {
        ComparisonRecord {
            test_id: format!("t{i:016x}"),
            input_index: 0,
            opt_level: level,
            opt_level_b: None,
            side_a: ("nvcc".into(), a),
            side_b: ("hipcc".into(), b),
            class: compare_outcomes(&a, &b),
        }
    }

    #[test]
    fn report_reproduces_published_percentages() {
        // 2,426 discrepancies over 247,500 runs → 0.98%.
        assert_eq!(percent_display(2426, 247_500), "0.98%");
        assert_eq!(percent_display(2716, 247_500), "1.10%");
        assert_eq!(percent_display(14_188, 157_600), "9.00%");
        assert_eq!(percent_display(0, 0), "0.00%");
    }

    #[test]
    fn report_conservation_and_order_independence() {
        let num = |v: f64| Outcome::Number { value: v, subnormal: false };
        let mut records = Vec::new();
        for i in 0..40 {
            records.push(synthetic_record(OptLevel::O0, num(1.0), num(1.0), i));
        }
        for i in 0..7 {
            records.push(synthetic_record(OptLevel::O0, num(1.0), num(2.0), 100 + i));
        }
        for i in 0..3 {
            records.push(synthetic_record(
                OptLevel::O0,
                Outcome::Inf { negative: false },
                num(1.0),
                200 + i,
            ));
        }
        records.push(synthetic_record(
            OptLevel::O3Fm,
            Outcome::NaN { negative: true },
            Outcome::Inf { negative: true },
            300,
        ));

        let report = build_report(&records);
        let o0 = &report.per_opt[&OptLevel::O0];
        assert_eq!(o0.compared, 50);
        assert_eq!(o0.discrepancies, 10);
        assert_eq!(o0.consistent, 40);
        assert_eq!(o0.by_class[&ClassTag::NumVsNum], 7);
        assert_eq!(o0.by_class[&ClassTag::InfVsNum], 3);
        // Adjacency holds every compared record, ordered.
        assert_eq!(o0.adjacency[OutcomeTag::Number.index()][OutcomeTag::Number.index()], 47);
        assert_eq!(o0.adjacency[OutcomeTag::Inf.index()][OutcomeTag::Number.index()], 3);
        assert_eq!(o0.adjacency[OutcomeTag::Number.index()][OutcomeTag::Inf.index()], 0);
        for table in report.per_opt.values() {
            let class_sum: u64 = table.by_class.values().sum();
            assert_eq!(class_sum, table.discrepancies);
            let mut off_diag = 0;
            for i in 0..4 {
                for j in 0..4 {
                    if i != j {
                        off_diag += table.adjacency[i][j];
                    }
                }
            }
            assert_eq!(off_diag + table.by_class[&ClassTag::NumVsNum], table.discrepancies);
        }
        assert_eq!(report.summary.total_discrepancies, 11);
        assert_eq!(report.summary.runs_compared, 51);

        // Permuting the records leaves the report unchanged.
        let mut shuffled = records.clone();
        shuffled.reverse();
        shuffled.swap(0, 25);
        let report2 = build_report(&shuffled);
        assert_eq!(
            serde_json::to_string(&report).unwrap(),
            serde_json::to_string(&report2).unwrap()
        );

        let text = render_report_text(&report);
        assert!(text.contains("O0"));
        assert!(text.contains("O3_FM"));
        assert!(text.contains("Total discrepancies: 11"));
    }

    #[test]
    fn empty_report_is_all_zero() {
        let report = build_report(&[]);
        assert_eq!(report.summary.runs_compared, 0);
        assert_eq!(report.summary.total_discrepancies, 0);
        assert_eq!(report.summary.percent, "0.00%");
        assert!(report.per_opt.is_empty());
    }
}
