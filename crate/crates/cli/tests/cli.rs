use std::path::Path;
use std::process::{Command, Output};

fn noteem(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_noteem"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = noteem(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(dir: &Path, args: &[&str]) -> i32 {
    noteem(dir, args).status.code().unwrap()
}

fn synth(dir: &Path, seed: &str, out: &str) {
    ok(dir, &["synth", "--seed", seed, "--pieces", "2", "--notes", "40", "--truth", "--out", out]);
}

fn tree(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().display().to_string();
                files.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    files.sort();
    files
}

#[test]
fn synth_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "3", "a");
    synth(dir.path(), "3", "b");
    synth(dir.path(), "4", "c");
    let a = tree(&dir.path().join("a"));
    assert_eq!(a.len(), 7);
    assert_eq!(a, tree(&dir.path().join("b")));
    assert_ne!(a, tree(&dir.path().join("c")));
}

#[test]
fn align_writes_labels_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "5", "s");
    let stdout = ok(
        dir.path(),
        &[
            "align",
            "--stack",
            "s/piece_000/stack.nem",
            "--midi",
            "s/piece_000/score.mid",
            "--out",
            "p0.nel",
            "--summary",
            "p0.json",
        ],
    );
    let printed: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    let saved: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("p0.json")).unwrap()).unwrap();
    assert_eq!(printed, saved);
    assert!(saved["frames"].as_u64().unwrap() > 0);
    assert_eq!(saved["w"], 3);
    assert_eq!(saved["w_prime"], 100);
    assert_eq!(saved["pseudo_applied"], true);
    assert!(std::fs::metadata(dir.path().join("p0.nel")).unwrap().len() > 0);
}

#[test]
fn eval_of_a_file_against_itself_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "6", "s");
    let midi = "s/piece_001/performance.mid";
    let stdout = ok(
        dir.path(),
        &["eval", "--ref", midi, "--est", midi, "--format", "json", "--offset-sweep"],
    );
    let rep: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(rep["note"]["f1"], 1.0);
    assert_eq!(rep["frame"]["f1"], 1.0);
    assert_eq!(rep["note_with_offset"]["f1"], 1.0);
    let table = ok(dir.path(), &["eval", "--ref", midi, "--est", midi]);
    assert!(!table.trim().is_empty());
}

#[test]
fn em_on_stacks_writes_its_outputs() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "7", "s");
    std::fs::write(
        dir.path().join("run.toml"),
        "manifest = \"s/manifest.json\"\nout = \"run\"\nmax_iterations = 2\n",
    )
    .unwrap();
    ok(dir.path(), &["em", "--config", "run.toml"]);
    let run = dir.path().join("run");
    for f in ["cost_history.csv", "summary.json", "labels/piece_000.nel", "labels/piece_001.nel"] {
        assert!(run.join(f).is_file(), "{f} missing");
    }
    let csv = std::fs::read_to_string(run.join("cost_history.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    assert_eq!(header, "iteration,mean_d,piece_000,piece_001");
}

#[test]
fn exit_codes_classify_failures() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "8", "s");
    let stack = "s/piece_000/stack.nem";
    let score = "s/piece_000/score.mid";
    // unreadable inputs and bad arguments
    assert_eq!(code(dir.path(), &["align", "--stack", "nope.nem", "--midi", score]), 2);
    assert_eq!(code(dir.path(), &["frobnicate"]), 2);
    assert_eq!(code(dir.path(), &["align", "--stack", stack, "--midi", score, "--t-pos", "0.001"]), 2);
    std::fs::write(dir.path().join("bad.toml"), "manifest = \"s/manifest.json\"\nout = \"r\"\nbogus = 1\n").unwrap();
    assert_eq!(code(dir.path(), &["em", "--config", "bad.toml"]), 2);
    // a band too narrow for the two lengths
    assert_eq!(code(dir.path(), &["align", "--stack", stack, "--midi", score, "--band", "0"]), 3);
    // output path below a regular file
    assert_eq!(
        code(dir.path(), &["align", "--stack", stack, "--midi", score, "--out", "s/manifest.json/x.nel"]),
        4
    );
    assert_eq!(code(dir.path(), &["--help"]), 0);
}
