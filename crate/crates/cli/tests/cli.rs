use std::path::PathBuf;
use std::process::{Command, Output};

fn medp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_medp")).args(args).output().unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("medp-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn gen(name: &str, family: &str, size: &str, demands: &str, seed: &str) -> String {
    let path = scratch(name);
    let p = path.to_str().unwrap().to_string();
    let out = medp(&["gen", "--family", family, "--size", size, "--demands", demands, "--seed", seed, "--out", &p]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    p
}

fn json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn gen_is_deterministic() {
    let a = gen("a.json", "series-parallel", "14", "4", "9");
    let b = gen("b.json", "series-parallel", "14", "4", "9");
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
}

#[test]
fn report_is_byte_identical_without_timing() {
    let inst = gen("rep.json", "partial-k-tree", "12", "3", "2");
    let run = || medp(&["report", "--instance", &inst, "--omit-timing", "--mode", "generic"]).stdout;
    let (x, y) = (run(), run());
    assert_eq!(x, y);
    let v: serde_json::Value = serde_json::from_slice(&x).unwrap();
    for key in ["fractional", "routed", "congestion", "gamma", "satisfied", "ledger", "ms"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["ms"], 0);
    assert_eq!(v["satisfied"], true);
}

#[test]
fn rounded_routing_revalidates() {
    let inst = gen("r.json", "series-parallel", "20", "6", "3");
    let routing = scratch("routing.json");
    let r = routing.to_str().unwrap();
    let out = medp(&["round", "--instance", &inst, "--out", r]);
    assert!(out.status.success());
    let v = json(&medp(&["validate", "--instance", &inst, "--routing", r, "--congestion-cap", "2"]));
    assert_eq!(v["valid"], true);
}

#[test]
fn grid_gap_from_the_command_line() {
    let inst = gen("grid.json", "grid", "3", "3", "0");
    let v = json(&medp(&["exact", "--instance", &inst, "--lp"]));
    assert_eq!(v["opt"], 2);
    assert_eq!(v["lp"], "3/1");
}

#[test]
fn exit_codes() {
    let inst = gen("codes.json", "series-parallel", "30", "8", "1");
    // epsilon outside (0, 1/4]
    assert_eq!(medp(&["lp", "--instance", &inst, "--epsilon", "1/2"]).status.code(), Some(2));
    // too large for the exhaustive oracle
    assert_eq!(medp(&["exact", "--instance", &inst]).status.code(), Some(4));
    // missing file
    assert_eq!(medp(&["report", "--instance", "/nonexistent.json"]).status.code(), Some(2));
    // routing with a path that is not a walk
    let bad = scratch("bad_routing.json");
    std::fs::write(&bad, r#"{"paths":[{"demand":0,"edges":[0,0,0],"value":"1/1"}]}"#).unwrap();
    assert_eq!(
        medp(&["validate", "--instance", &inst, "--routing", bad.to_str().unwrap()]).status.code(),
        Some(2)
    );
    // decomposition missing an edge
    let decomp = scratch("bad_decomp.json");
    std::fs::write(&decomp, r#"{"bags":[{"id":0,"nodes":[0,1],"degenerate":false}],"tree_edges":[],"root":0,"k":1,"p":1}"#).unwrap();
    assert_eq!(
        medp(&["validate", "--instance", &inst, "--decomp", decomp.to_str().unwrap()]).status.code(),
        Some(2)
    );
    // unknown oracle
    assert_eq!(medp(&["report", "--instance", &inst, "--oracle", "cplex"]).status.code(), Some(2));
}
