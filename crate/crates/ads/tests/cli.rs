use std::path::Path;
use std::process::{Command, Output};

fn ads(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ads"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn error_json(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().expect("error line on stderr");
    serde_json::from_str(line).unwrap_or_else(|e| panic!("{line:?}: {e}"))
}

const REGRET: &str = "experiment = \"regret\"\nseed = 11\nseeds = 2\n\
                      [bandit]\nk = 40\npolicies = [\"lookahead\", \"next-hop\", \"end-to-end\"]\n";

#[test]
fn regret_run_writes_the_documented_schema() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "r.toml", REGRET);
    let out = dir.path().join("out");
    let o = ads(&["run", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("regret.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("seed,scenario_id,policy,packet_k,expected_regret,realized_delay_ms")
    );
    assert_eq!(lines.count(), 2 * 3 * 40);
    assert!(!csv.contains('\r'));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["experiment"], "regret");
    assert_eq!(summary["groups"].as_array().unwrap().len(), 3);
    for key in ["mean", "p50", "p90", "min", "max", "count"] {
        assert!(
            !summary["groups"][0]["metrics"]["expected_regret"][key].is_null(),
            "{key}"
        );
    }
}

#[test]
fn same_config_gives_byte_identical_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "r.toml", REGRET);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(ads(&["run", &cfg, "--out", a.to_str().unwrap()])
        .status
        .success());
    assert!(
        ads(&["run", &cfg, "--out", b.to_str().unwrap(), "--jobs", "2"])
            .status
            .success()
    );
    for f in ["regret.csv", "summary.json"] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn seed_override_replaces_the_base_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "r.toml", REGRET);
    let out = dir.path().join("o");
    let o = ads(&[
        "run",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--seed-override",
        "500",
    ]);
    assert!(o.status.success());
    let csv = std::fs::read_to_string(out.join("regret.csv")).unwrap();
    let seeds: std::collections::BTreeSet<&str> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(seeds.into_iter().collect::<Vec<_>>(), ["500", "501"]);
}

#[test]
fn m_above_n_is_a_field_level_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "bad.toml",
        "experiment = \"recovery\"\nseed = 1\n[erasure]\nm = [6]\nn = [4]\n",
    );
    let out = dir.path().join("x");
    let validate = ads(&["validate", &cfg]);
    let run = ads(&["run", &cfg, "--out", out.to_str().unwrap()]);
    for o in [validate, run] {
        assert_eq!(o.status.code(), Some(2));
        let e = error_json(&o);
        assert_eq!(e["error"], "config");
        assert_eq!(e["field"], "erasure.n");
        assert!(e["message"].as_str().unwrap().contains("m = 6"));
    }
    assert!(!out.exists());
}

#[test]
fn unreadable_or_unknown_config_exits_2() {
    let o = ads(&["validate", "/nonexistent/scenario.toml"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_json(&o)["error"], "config");
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "u.toml",
        "experiment = \"regret\"\nseed = 1\nwat = 1\n",
    );
    assert_eq!(ads(&["validate", &cfg]).status.code(), Some(2));
}

#[test]
fn invariant_violation_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "tiny.toml",
        "experiment = \"recovery\"\nseed = 1\n[erasure]\nm = [2]\nk = [1]\nstate_mb = [0.0001]\n",
    );
    let o = ads(&["run", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(error_json(&o)["error"], "invariant");
}

#[test]
fn validate_reports_the_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "r.toml", REGRET);
    let o = ads(&["validate", &cfg]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["seeds"], serde_json::json!([11, 12]));
}

#[test]
fn generated_topology_feeds_a_run() {
    let dir = tempfile::tempdir().unwrap();
    let net = dir.path().join("net.csv");
    for kind in ["grid-road", "ring", "random"] {
        let links = if kind == "ring" { "40" } else { "32" };
        let o = ads(&[
            "gen-topology",
            "--kind",
            kind,
            "--nodes",
            "16",
            "--links",
            links,
            "--delay-min",
            "50",
            "--delay-max",
            "250",
            "--out",
            net.to_str().unwrap(),
        ]);
        assert!(
            o.status.success(),
            "{kind}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        let text = std::fs::read_to_string(&net).unwrap();
        assert!(text.starts_with("#source="));
        assert_eq!(text.lines().count(), 2 + links.parse::<usize>().unwrap());
    }
    let cfg = write(
        dir.path(),
        "c.toml",
        "experiment = \"convergence\"\nseed = 1\n[bandit]\nk = 30\n[topology]\nfile = \"net.csv\"\n",
    );
    let o = ads(&["run", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let bad = ads(&[
        "gen-topology",
        "--kind",
        "ring",
        "--nodes",
        "16",
        "--links",
        "3",
        "--out",
        net.to_str().unwrap(),
    ]);
    assert_eq!(bad.status.code(), Some(2));
}
