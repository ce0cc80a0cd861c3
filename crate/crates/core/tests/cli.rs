use std::io::Write;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_multitime-qsim"))
}

fn run_text(text: &str, args: &[&str]) -> Output {
    let mut file = tempfile::NamedTempFile::new().unwrap();
    file.write_all(text.as_bytes()).unwrap();
    bin().arg("run").arg(file.path()).args(args).output().unwrap()
}

const PRE_POST: &str = "system S dim 2
state up = [1, 0]
state upx = [0.7071067811865476, 0.7071067811865476]
operator sz = [[1, 0], [0, -1]]
prepare S up
measure S projective sz as z
postselect S upx
";

#[test]
fn pre_post_table_on_both_engines() {
    let out = run_text(PRE_POST, &[]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with("# multitime-qsim report\n"));
    assert!(
        stdout.contains("\n1\t1.000000000\t0.500000000\t1.000000000\n"),
        "{stdout}"
    );
    assert!(stdout.contains("# result: PASS"));
}

#[test]
fn output_is_byte_deterministic() {
    for engine in ["multitime", "oracle", "both"] {
        let a = run_text(PRE_POST, &["--engine", engine]);
        let b = run_text(PRE_POST, &["--engine", engine]);
        assert_eq!(a.stdout, b.stdout);
        assert!(String::from_utf8_lossy(&a.stdout).contains(&format!("# engine: {engine}")));
    }
}

#[test]
fn orthogonal_postselection_exits_with_two() {
    let text = PRE_POST.replace("postselect S upx", "state down = [0, 1]\npostselect S down");
    let out = run_text(&text, &["--engine", "oracle"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("impossible post-selection"));
    assert_eq!(run_text(&text, &["--engine", "multitime"]).status.code(), Some(2));
}

#[test]
fn diagnostics_exit_with_one() {
    let out = run_text("system S dim 2\nstate up = [1, 0]\nprepare X up\nprepare S nope\n", &[]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert_eq!(
        stderr.lines().collect::<Vec<_>>(),
        vec![
            "3:9: UnknownSystem: system 'X' is not declared",
            "4:11: UnknownName: state 'nope' is not defined",
        ]
    );
    assert!(out.stdout.is_empty());
}

#[test]
fn tolerance_is_validated() {
    assert_eq!(run_text(PRE_POST, &["--tolerance", "0.5"]).status.code(), Some(1));
    assert_eq!(run_text(PRE_POST, &["--tolerance", "1e-7"]).status.code(), Some(0));
}

#[test]
fn generated_corpus_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args([
            "corpus",
            "generate",
            "--count",
            "12",
            "--max-dim",
            "3",
            "--seed",
            "9",
            "--out",
        ])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let mut files: Vec<_> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    files.sort();
    assert_eq!(files.len(), 12);
    for f in files {
        let out = bin().arg("run").arg(&f).output().unwrap();
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        assert!(String::from_utf8_lossy(&out.stdout).contains("# result: PASS"));
    }
}

#[test]
fn corpus_to_stdout_is_seeded() {
    let gen = |seed: &str| {
        bin()
            .args(["corpus", "generate", "--count", "3", "--seed", seed])
            .output()
            .unwrap()
            .stdout
    };
    assert_eq!(gen("1"), gen("1"));
    assert_ne!(gen("1"), gen("2"));
}
