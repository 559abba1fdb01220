use std::path::PathBuf;
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_debtswap"))
        .args(args)
        .output()
        .expect("spawn debtswap")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn p(path: &PathBuf) -> &str {
    path.to_str().unwrap()
}

#[test]
fn clear_prints_assets() {
    let o = run(&["clear", p(&fixture("ex1.json"))]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["assets"]["v2"], "1");
    assert_eq!(v["assets"]["w2"], "1");
    assert_eq!(v["assets"]["v1"], "0");
}

#[test]
fn reach_identical_and_inconsistent() {
    let ex1 = fixture("ex1.json");
    let o = run(&["reach", p(&ex1), p(&ex1)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("identical networks"));
    let o = run(&["reach", p(&ex1), p(&fixture("ext.json"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("inconsistent"));
}

#[test]
fn reach_then_verify() {
    let dir = tempfile::tempdir().unwrap();
    let (f, g) = (fixture("ex1.json"), fixture("ex1_swapped.json"));
    let o = run(&["reach", p(&f), p(&g)]);
    assert_eq!(o.status.code(), Some(0));
    let seq = dir.path().join("seq.json");
    std::fs::write(&seq, stdout(&o)).unwrap();

    let o = run(&["verify", p(&f), p(&g), p(&seq), "--min-assets", "v2:1"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("true"));

    let o = run(&["verify", p(&f), p(&g), p(&seq), "--v-improving", "v1"]);
    assert_eq!(o.status.code(), Some(0));

    let back = run(&["reach", p(&g), p(&f)]);
    std::fs::write(&seq, stdout(&back)).unwrap();
    let o = run(&["verify", p(&g), p(&f), p(&seq), "--v-improving", "v1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).starts_with("false"));
}

#[test]
fn dynamics_on_exponential_gadget() {
    let expo = fixture("expo8.json");
    let o = run(&["dynamics", p(&expo), "--mode", "v-improving", "--v", "v", "--tie", "min-gain"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["swaps"].as_array().unwrap().len(), 15);
}

#[test]
fn dynamics_on_ex1() {
    let o = run(&["dynamics", p(&fixture("ex1.json")), "--mode", "v-improving", "--v", "v1"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let swaps = v["swaps"].as_array().unwrap();
    assert_eq!(swaps.len(), 1);
    assert_eq!(swaps[0]["kind"], "saturating");
    let o = run(&["dynamics", p(&fixture("ext.json")), "--mode", "staged"]);
    assert_eq!(o.status.code(), Some(0));
    let o = run(&["dynamics", p(&fixture("ex1.json")), "--mode", "local-search"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn swaps_and_classify() {
    let ex1 = fixture("ex1.json");
    let o = run(&["swaps", p(&ex1), "--semi-positive", "--v", "v1"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let list = v.as_array().unwrap();
    assert_eq!(list.len(), 3);
    assert!(list.iter().all(|s| s["semiPositive"] == true && s["kind"] == "saturating"));
    assert_eq!(list[0]["debtor1"], "u1");
    assert_eq!(list[0]["deltaV1"], "2");
    let o = run(&["classify", p(&ex1), "u1", "v1", "u2", "v2"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["semiPositive"], true);
    assert_eq!(v["positive"], false);
    let o = run(&["classify", p(&ex1), "u1", "v1", "v1", "u2"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn export_is_deterministic() {
    let ex1 = fixture("ex1.json");
    let a = run(&["export", p(&ex1), "--dot", "--clear"]);
    let b = run(&["export", p(&ex1), "--dot", "--clear"]);
    assert_eq!(a.stdout, b.stdout);
    assert!(stdout(&a).contains("\"v2\" -> \"w2\" [label=\"1/1\"];"));
}

#[test]
fn gen_every_kind() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("net.json");
    let cases: Vec<Vec<String>> = vec![
        vec!["exponential".into(), "7".into()],
        vec!["max2sat".into(), p(&fixture("max2sat.cnf")).into(), "--assignment".into(), "01".into()],
        vec!["setcover".into(), p(&fixture("setcover.json")).into()],
        vec!["is".into(), p(&fixture("path3.txt")).into()],
        vec!["partition".into(), p(&fixture("partition.txt")).into()],
        vec!["3partition".into(), p(&fixture("3partition.txt")).into()],
    ];
    for case in cases {
        let mut args = vec!["gen"];
        args.extend(case.iter().map(String::as_str));
        args.extend(["-o", p(&out)]);
        let o = run(&args);
        assert_eq!(o.status.code(), Some(0), "{case:?}: {}", String::from_utf8_lossy(&o.stderr));
        let c = run(&["clear", p(&out)]);
        assert_eq!(c.status.code(), Some(0));
    }
    let target = dir.path().join("target.json");
    let o = run(&[
        "gen", "satconn", p(&fixture("satconn.cnf")), "--assignment", "01", "--target", "11",
        "-o", p(&out), "--target-out", p(&target),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "floor 2\n");
    let r = run(&["reach", p(&out), p(&target)]);
    assert_eq!(r.status.code(), Some(0));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(run(&["nonsense"]).status.code(), Some(2));
    assert_eq!(run(&["clear", "/nonexistent.json"]).status.code(), Some(2));
    assert_eq!(run(&["gen", "exponential", "3"]).status.code(), Some(2));
    assert_eq!(run(&["export", p(&fixture("ex1.json"))]).status.code(), Some(2));
}
