//! Compiler matching, command construction, and test execution.
//!
//! Compilers are data: a registry of [`CompilerSpec`] entries maps file
//! extensions to toolchains, carries per-level optimization flags, and names
//! the fast-math flag — which is deliberately per-compiler (`--use_fast_math`
//! for nvcc, `-DHIP_FAST_MATH` for hipcc, `-ffast-math` for host compilers).
//! Binaries are cached per (test, compiler, level) so one compilation serves
//! every input vector.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use wait_timeout::ChildExt;

use crate::classify::{parse_outcome, Outcome};
use crate::emit::SourceBundle;
use crate::error::{Error, Result};
use crate::inputs::InputVector;

/// The five optimization configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, Hash)]
pub enum OptLevel {
    O0,
    O1,
    O2,
    O3,
    #[serde(rename = "O3_FM")]
    O3Fm,
}

impl OptLevel {
    pub const ALL: [OptLevel; 5] = [
        OptLevel::O0,
        OptLevel::O1,
        OptLevel::O2,
        OptLevel::O3,
        OptLevel::O3Fm,
    ];

    pub fn label(self) -> &'static str {
        match self {
            OptLevel::O0 => "O0",
            OptLevel::O1 => "O1",
            OptLevel::O2 => "O2",
            OptLevel::O3 => "O3",
            OptLevel::O3Fm => "O3_FM",
        }
    }
}

impl fmt::Display for OptLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for OptLevel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_uppercase().replace('-', "_").as_str() {
            "O0" => Ok(OptLevel::O0),
            "O1" => Ok(OptLevel::O1),
            "O2" => Ok(OptLevel::O2),
            "O3" => Ok(OptLevel::O3),
            "O3_FM" | "O3FM" => Ok(OptLevel::O3Fm),
            other => Err(format!("unknown optimization level {other:?}")),
        }
    }
}

/// One registered toolchain.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompilerSpec {
    pub id: String,
    /// Executable name or path.
    pub command: String,
    /// Arguments placed before the optimization flags.
    #[serde(default)]
    pub extra_args: Vec<String>,
    /// File extensions (with dot) this compiler handles.
    pub extensions: Vec<String>,
    /// Flag appended on top of the O3 flags at O3_FM.
    pub fast_math_flag: String,
    /// Per-level optimization flags; must cover all five levels.
    pub opt_flag_map: BTreeMap<OptLevel, Vec<String>>,
    /// Per-run wall clock limit, seconds.
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
    /// Arguments appended after the source path (link libraries, e.g. -lm).
    #[serde(default)]
    pub link_args: Vec<String>,
}

fn default_timeout_secs() -> u64 {
    10
}

impl CompilerSpec {
    pub fn validate(&self) -> Result<()> {
        for level in OptLevel::ALL {
            if !self.opt_flag_map.contains_key(&level) {
                return Err(Error::Config(format!(
                    "compiler {:?} has no flags for {}",
                    self.id, level
                )));
            }
        }
        if self.extensions.is_empty() {
            return Err(Error::Config(format!(
                "compiler {:?} registers no extensions",
                self.id
            )));
        }
        Ok(())
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs(self.timeout_secs)
    }

    /// First line of `<command> --version`, if the tool runs.
    pub fn probe_version(&self) -> Option<String> {
        let output = Command::new(&self.command).arg("--version").output().ok()?;
        let text = String::from_utf8_lossy(&output.stdout);
        text.lines().next().map(|l| l.trim().to_string())
    }
}

fn standard_opt_map() -> BTreeMap<OptLevel, Vec<String>> {
    [
        (OptLevel::O0, vec!["-O0".to_string()]),
        (OptLevel::O1, vec!["-O1".to_string()]),
        (OptLevel::O2, vec!["-O2".to_string()]),
        (OptLevel::O3, vec!["-O3".to_string()]),
        (OptLevel::O3Fm, vec!["-O3".to_string()]),
    ]
    .into_iter()
    .collect()
}

/// A host C compiler spec (cc/gcc/clang) for desk-scale differential runs.
pub fn host_cc_spec(id: &str, command: &str) -> CompilerSpec {
    CompilerSpec {
        id: id.to_string(),
        command: command.to_string(),
        extra_args: Vec::new(),
        extensions: vec![".c".to_string()],
        fast_math_flag: "-ffast-math".to_string(),
        opt_flag_map: standard_opt_map(),
        timeout_secs: 10,
        link_args: vec!["-lm".to_string()],
    }
}

/// Built-in registry: nvcc for `.cu`, hipcc for `.hip`, the host cc for `.c`.
pub fn default_registry() -> Vec<CompilerSpec> {
    vec![
        CompilerSpec {
            id: "nvcc".to_string(),
            command: "nvcc".to_string(),
            extra_args: Vec::new(),
            extensions: vec![".cu".to_string()],
            fast_math_flag: "--use_fast_math".to_string(),
            opt_flag_map: standard_opt_map(),
            timeout_secs: 10,
            link_args: Vec::new(),
        },
        CompilerSpec {
            id: "hipcc".to_string(),
            command: "hipcc".to_string(),
            extra_args: Vec::new(),
            extensions: vec![".hip".to_string()],
            fast_math_flag: "-DHIP_FAST_MATH".to_string(),
            opt_flag_map: standard_opt_map(),
            timeout_secs: 10,
            link_args: Vec::new(),
        },
        host_cc_spec("cc", "cc"),
    ]
}

/// Load a registry from a JSON file (an array of [`CompilerSpec`] objects).
pub fn load_registry(path: &Path) -> Result<Vec<CompilerSpec>> {
    let text = std::fs::read_to_string(path)?;
    let registry: Vec<CompilerSpec> = serde_json::from_str(&text)?;
    for spec in &registry {
        spec.validate()?;
    }
    Ok(registry)
}

/// First registry entry whose extensions include the file's extension.
pub fn match_compiler<'r>(
    source_path: &Path,
    registry: &'r [CompilerSpec],
) -> Result<&'r CompilerSpec> {
    let ext = source_path
        .extension()
        .map(|e| format!(".{}", e.to_string_lossy()))
        .unwrap_or_default();
    registry
        .iter()
        .find(|spec| spec.extensions.contains(&ext))
        .ok_or(Error::UnmatchedExtension(ext))
}

/// Full compile argv: command, extra args, per-level flags, the fast-math
/// flag only at O3_FM, output/input, then link args.
pub fn build_command(spec: &CompilerSpec, level: OptLevel, src: &Path, out: &Path) -> Vec<String> {
    let mut argv = vec![spec.command.clone()];
    argv.extend(spec.extra_args.iter().cloned());
    argv.extend(spec.opt_flag_map.get(&level).cloned().unwrap_or_default());
    if level == OptLevel::O3Fm {
        argv.push(spec.fast_math_flag.clone());
    }
    argv.push("-o".to_string());
    argv.push(out.to_string_lossy().into_owned());
    argv.push(src.to_string_lossy().into_owned());
    argv.extend(spec.link_args.iter().cloned());
    argv
}

/// Terminal state of one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RunStatus {
    Completed,
    CompileError,
    Timeout,
    RuntimeFailure,
    /// Exit 0 but stdout did not parse as an outcome.
    BadOutput,
}

/// Raw result of one (test, input, compiler, level) execution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExecutionRecord {
    pub test_id: String,
    pub input_index: usize,
    pub compiler_id: String,
    pub opt_level: OptLevel,
    pub status: RunStatus,
    /// Verbatim stdout, kept for replay.
    pub raw_stdout: String,
    pub exit_status: Option<i32>,
    pub wall_time_ms: u64,
    pub outcome: Option<Outcome>,
    /// Compile or runtime diagnostics when something went wrong.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<String>,
}

enum CacheEntry {
    Built(PathBuf),
    Failed(String),
}

/// Compilation cache over a working directory. Keyed on
/// (test_id, compiler_id, level); each key compiles at most once as long as
/// callers do not race the same key.
pub struct BuildCache {
    dir: PathBuf,
    entries: Mutex<HashMap<(String, String, OptLevel), CacheEntry>>,
    compilations: AtomicUsize,
}

impl BuildCache {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(BuildCache {
            dir,
            entries: Mutex::new(HashMap::new()),
            compilations: AtomicUsize::new(0),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Number of compiler invocations so far.
    pub fn compile_count(&self) -> usize {
        self.compilations.load(Ordering::Relaxed)
    }

    /// Compile `bundle` with `spec` at `level`, reusing a cached binary.
    /// Returns the binary path or the captured diagnostics on failure.
    pub fn compile(
        &self,
        bundle: &SourceBundle,
        spec: &CompilerSpec,
        level: OptLevel,
    ) -> std::result::Result<PathBuf, String> {
        let key = (bundle.test_id.clone(), spec.id.clone(), level);
        if let Some(entry) = self.entries.lock().expect("cache lock").get(&key) {
            return match entry {
                CacheEntry::Built(path) => Ok(path.clone()),
                CacheEntry::Failed(diag) => Err(diag.clone()),
            };
        }

        let src = self.dir.join(bundle.file_name());
        let out = self
            .dir
            .join(format!("{}-{}-{}.bin", bundle.test_id, spec.id, level));
        let result = std::fs::write(&src, &bundle.source_text)
            .map_err(|e| format!("writing {}: {e}", src.display()))
            .and_then(|_| self.invoke_compiler(spec, level, &src, &out));

        self.compilations.fetch_add(1, Ordering::Relaxed);
        let mut entries = self.entries.lock().expect("cache lock");
        match &result {
            Ok(path) => entries.insert(key, CacheEntry::Built(path.clone())),
            Err(diag) => entries.insert(key, CacheEntry::Failed(diag.clone())),
        };
        result
    }

    fn invoke_compiler(
        &self,
        spec: &CompilerSpec,
        level: OptLevel,
        src: &Path,
        out: &Path,
    ) -> std::result::Result<PathBuf, String> {
        let argv = build_command(spec, level, src, out);
        let output = Command::new(&argv[0])
            .args(&argv[1..])
            .output()
            .map_err(|e| format!("spawning {:?}: {e}", argv[0]))?;
        if output.status.success() {
            Ok(out.to_path_buf())
        } else {
            Err(format!(
                "{} exited {}\n{}",
                argv.join(" "),
                output.status,
                String::from_utf8_lossy(&output.stderr)
            ))
        }
    }

    /// Compile (cached) and run one input vector through the binary.
    pub fn compile_and_run(
        &self,
        bundle: &SourceBundle,
        spec: &CompilerSpec,
        level: OptLevel,
        input: &InputVector,
        input_index: usize,
    ) -> ExecutionRecord {
        let base = ExecutionRecord {
            test_id: bundle.test_id.clone(),
            input_index,
            compiler_id: spec.id.clone(),
            opt_level: level,
            status: RunStatus::Completed,
            raw_stdout: String::new(),
            exit_status: None,
            wall_time_ms: 0,
            outcome: None,
            diagnostics: None,
        };
        let binary = match self.compile(bundle, spec, level) {
            Ok(path) => path,
            Err(diagnostics) => {
                return ExecutionRecord {
                    status: RunStatus::CompileError,
                    diagnostics: Some(diagnostics),
                    ..base
                }
            }
        };
        run_binary(&binary, &input.argv(), spec.timeout(), bundle.precision, base)
    }
}

/// Execute a compiled test binary and categorize its output.
fn run_binary(
    binary: &Path,
    argv: &[String],
    timeout: Duration,
    precision: crate::ast::Precision,
    base: ExecutionRecord,
) -> ExecutionRecord {
    let start = Instant::now();
    let child = Command::new(binary)
        .args(argv)
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .stdin(Stdio::null())
        .spawn();
    let mut child = match child {
        Ok(c) => c,
        Err(e) => {
            return ExecutionRecord {
                status: RunStatus::RuntimeFailure,
                diagnostics: Some(format!("spawn: {e}")),
                wall_time_ms: ms_since(start),
                ..base
            }
        }
    };

    let status = match child.wait_timeout(timeout) {
        Ok(Some(status)) => status,
        Ok(None) => {
            let _ = child.kill();
            let _ = child.wait();
            return ExecutionRecord {
                status: RunStatus::Timeout,
                wall_time_ms: ms_since(start),
                ..base
            };
        }
        Err(e) => {
            return ExecutionRecord {
                status: RunStatus::RuntimeFailure,
                diagnostics: Some(format!("wait: {e}")),
                wall_time_ms: ms_since(start),
                ..base
            }
        }
    };

    let mut raw_stdout = String::new();
    if let Some(mut pipe) = child.stdout.take() {
        let _ = pipe.read_to_string(&mut raw_stdout);
    }
    let wall_time_ms = ms_since(start);
    let exit_status = status.code();

    if !status.success() {
        let mut stderr = String::new();
        if let Some(mut pipe) = child.stderr.take() {
            let _ = pipe.read_to_string(&mut stderr);
        }
        return ExecutionRecord {
            status: RunStatus::RuntimeFailure,
            raw_stdout,
            exit_status,
            wall_time_ms,
            diagnostics: (!stderr.is_empty()).then_some(stderr),
            ..base
        };
    }

    match parse_outcome(&raw_stdout, precision) {
        Ok(outcome) => ExecutionRecord {
            raw_stdout,
            exit_status,
            wall_time_ms,
            outcome: Some(outcome),
            ..base
        },
        Err(_) => ExecutionRecord {
            status: RunStatus::BadOutput,
            raw_stdout,
            exit_status,
            wall_time_ms,
            ..base
        },
    }
}

fn ms_since(start: Instant) -> u64 {
    start.elapsed().as_millis() as u64
}
