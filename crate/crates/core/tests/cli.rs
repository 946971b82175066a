use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use nriqa::synth;

fn nriqa(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nriqa"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(nriqa(dir.path(), &["no-such-command"]).status.code(), Some(2));
    assert_eq!(nriqa(dir.path(), &["distort", "--input", "x.png"]).status.code(), Some(2));
    synth::scene(64, 64, 1).save_png(dir.path().join("a.png")).unwrap();
    let bad_level = nriqa(
        dir.path(),
        &["distort", "--input", "a.png", "--kind", "blur", "--level", "3", "--output", "b.png"],
    );
    assert_eq!(bad_level.status.code(), Some(2));
}

#[test]
fn missing_and_corrupt_data_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let out = nriqa(
        dir.path(),
        &["simcheck", "--ref", "missing.png", "--test", "missing.png"],
    );
    assert_eq!(out.status.code(), Some(3));
    fs::write(dir.path().join("broken.csv"), "path,mos\na.png,0.5\na.png,0.7\n").unwrap();
    let out = nriqa(dir.path(), &["train-low", "--corpus", "broken.csv", "--out", "p.bin"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn simcheck_reports_identity_and_worker_count_does_not_matter() {
    let dir = tempfile::tempdir().unwrap();
    synth::scene(96, 96, 2).save_png(dir.path().join("a.png")).unwrap();
    let out = nriqa(dir.path(), &["simcheck", "--measure", "ssim", "--ref", "a.png", "--test", "a.png"]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "measure,score,weight\nssim,1,1\n");

    let run = |workers: &str, name: &str| {
        let out = nriqa(
            dir.path(),
            &["--workers", workers, "--seed", "3", "distort", "--input", "a.png", "--kind", "noise", "--level", "1", "--output", name],
        );
        assert!(out.status.success());
        fs::read(dir.path().join(name)).unwrap()
    };
    assert_eq!(run("1", "n1.png"), run("4", "n4.png"));
}
