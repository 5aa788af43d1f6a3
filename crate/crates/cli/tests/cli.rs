//! End-to-end flows through the installed binary: generate → run → merge →
//! report, plus hipify and replay.

use std::process::Command;

use fpdiff_core::campaign::load_metadata;

fn fpdiff() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fpdiff"))
}

#[test]
fn generate_run_merge_report_flow() {
    let dir = tempfile::tempdir().unwrap();
    let batch = dir.path().join("batch");

    let status = fpdiff()
        .arg("generate")
        .arg("--out")
        .arg(&batch)
        .args(["--count", "4", "--seed", "9", "--count-inputs", "3", "--dialects", "c,cuda,hip", "--math-free"])
        .status()
        .unwrap();
    assert!(status.success());

    // Sources on disk, one per dialect per test.
    let mut extensions = std::collections::BTreeMap::new();
    for entry in std::fs::read_dir(&batch).unwrap() {
        let name = entry.unwrap().file_name().into_string().unwrap();
        if let Some((_, ext)) = name.rsplit_once('.') {
            *extensions.entry(ext.to_string()).or_insert(0u32) += 1;
        }
    }
    assert_eq!(extensions.get("c"), Some(&4));
    assert_eq!(extensions.get("cu"), Some(&4));
    assert_eq!(extensions.get("hip"), Some(&4));

    let status = fpdiff()
        .arg("run")
        .arg(&batch)
        .args(["--levels", "O0,O3", "--dialects", "c", "--jobs", "2"])
        .status()
        .unwrap();
    assert!(matches!(status.code(), Some(0) | Some(2)));

    let meta_path = batch.join("metadata.json");
    let meta = load_metadata(&meta_path).unwrap();
    assert_eq!(meta.runs.len(), 4 * 3 * 2);

    let cmp = dir.path().join("cmp.json");
    let status = fpdiff()
        .arg("merge")
        .arg(&meta_path)
        .arg(&meta_path)
        .arg("--out")
        .arg(&cmp)
        .status()
        .unwrap();
    assert!(status.success());

    let output = fpdiff().arg("report").arg(&cmp).output().unwrap();
    assert!(output.status.success());
    let text = String::from_utf8(output.stdout).unwrap();
    assert!(text.contains("Total discrepancies: 0"), "self-merge found discrepancies:\n{text}");
    assert!(text.contains("Runs attempted:"));

    let output = fpdiff().arg("report").arg(&cmp).arg("--json").output().unwrap();
    assert!(output.status.success());
    let report: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    assert_eq!(report["summary"]["total_discrepancies"], 0);

    // Replay the first test through the oracle and the host compiler.
    let test_id = meta.tests[0].test_id.clone();
    let output = fpdiff()
        .arg("replay")
        .arg("--metadata")
        .arg(&meta_path)
        .args(["--test", &test_id, "--input-index", "1", "--compiler", "cc", "--level", "O0"])
        .arg("--work-dir")
        .arg(dir.path().join("replay-work"))
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let text = String::from_utf8(output.stdout).unwrap();
    assert!(text.contains("oracle:"));
    assert!(text.contains("class:  Consistent"), "replay disagreed:\n{text}");
}

#[test]
fn hipify_subcommand_converts_files() {
    let dir = tempfile::tempdir().unwrap();
    let batch = dir.path().join("batch");
    let status = fpdiff()
        .arg("generate")
        .arg("--out")
        .arg(&batch)
        .args(["--count", "2", "--seed", "77", "--dialects", "cuda"])
        .status()
        .unwrap();
    assert!(status.success());

    let cu_files: Vec<_> = std::fs::read_dir(&batch)
        .unwrap()
        .filter_map(|e| {
            let path = e.unwrap().path();
            (path.extension().is_some_and(|x| x == "cu")).then_some(path)
        })
        .collect();
    assert_eq!(cu_files.len(), 2);

    let out_dir = dir.path().join("converted");
    let mut cmd = fpdiff();
    cmd.arg("hipify");
    for f in &cu_files {
        cmd.arg(f);
    }
    let status = cmd.arg("--out-dir").arg(&out_dir).status().unwrap();
    assert!(status.success());
    for f in &cu_files {
        let hip = out_dir.join(f.with_extension("hip").file_name().unwrap());
        let text = std::fs::read_to_string(hip).unwrap();
        assert!(text.contains("hipLaunchKernelGGL(compute"));
        assert!(!text.contains("cuda"));
    }
}

#[test]
fn unknown_metadata_is_a_config_error() {
    let status = fpdiff()
        .arg("run")
        .arg("/nonexistent-dir")
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
}
