use std::path::PathBuf;

use amalgam_cli::{run, EXIT_CONFIG, EXIT_GUARD, EXIT_INCONCLUSIVE, EXIT_OK};

fn spec(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../specs").join(name).display().to_string()
}

fn amalgam(args: &[&str]) -> i32 {
    run(std::iter::once("amalgam").chain(args.iter().copied()))
}

#[test]
fn validate_reference() {
    assert_eq!(amalgam(&["validate", "--spec", &spec("reference.spec")]), EXIT_OK);
}

#[test]
fn validate_rejects_bad_input() {
    assert_eq!(amalgam(&["validate", "--spec", "/nonexistent.spec"]), EXIT_CONFIG);
    assert_eq!(amalgam(&["validate", "--spec", &spec("reference.spec"), "--n-max", "9"]), EXIT_GUARD);
    assert_eq!(amalgam(&["frobnicate"]), EXIT_CONFIG);
}

#[test]
fn build_writes_two_vertex_graph() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().display().to_string();
    assert_eq!(amalgam(&["build", "--spec", &spec("reference.spec"), "--out", &out]), EXIT_OK);
    let dot = std::fs::read_to_string(dir.path().join("graph_A.dot")).unwrap();
    assert!(dot.starts_with("digraph"));
    let vertices = dot.lines().filter(|l| l.contains("[shape=")).count();
    assert_eq!(vertices, 2, "{dot}");
}

#[test]
fn sample_requires_seed() {
    assert_eq!(amalgam(&["sample", "--spec", &spec("reference.spec")]), EXIT_CONFIG);
}

#[test]
fn sample_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let out = d.path().display().to_string();
        let args = ["sample", "--spec", &spec("reference.spec"), "--seed", "11", "--samples", "200", "--form", "crf", "--out", &out];
        assert_eq!(amalgam(&args), EXIT_OK);
    }
    let x = std::fs::read(a.path().join("samples_crf.txt")).unwrap();
    assert_eq!(x, std::fs::read(b.path().join("samples_crf.txt")).unwrap());
}

#[test]
fn census_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().display().to_string();
    let args = ["census", "--spec", &spec("finite_index.spec"), "--n-max", "3", "--k-max", "3", "--out", &out];
    assert_eq!(amalgam(&args), EXIT_OK);
    let csv = std::fs::read_to_string(dir.path().join("census_ef.csv")).unwrap();
    assert!(csv.starts_with("n,k,total,unstable,unstable_certain,singular\n"));

    let args = ["theorem-b", "--spec", &spec("finite_index.spec"), "--seed", "1", "--out", &out];
    assert_eq!(amalgam(&args), EXIT_INCONCLUSIVE);
    let args = ["theorem-b", "--spec", &spec("reference.spec"), "--seed", "1", "--samples", "2000", "--n-max", "8", "--out", &out];
    assert_eq!(amalgam(&args), EXIT_OK);
    let args = ["theorem-a", "--spec", &spec("finite_index.spec"), "--seed", "1", "--samples", "1000"];
    assert_eq!(amalgam(&args), EXIT_CONFIG);
}
