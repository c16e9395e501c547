use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = "[sweep]\nn_alpha = 4\nn_beta = 4\nt_bar = 3.0\n[train]\nepochs = 2\n[scenario]\nreference = false\n";

fn fovguide(config: &Path, out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fovguide"))
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn one_by_one_grid_gives_one_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "[sweep]\nn_alpha = 1\nn_beta = 1\n").unwrap();
    let out = dir.path().join("out");
    let o = fovguide(&cfg, &out, &["sweep"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_slice(&fs::read(out.join("sweep_report.json")).unwrap()).unwrap();
    assert_eq!(report["seeds"].as_array().unwrap().len(), 1);
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let keys: std::collections::BTreeSet<String> =
        csv.lines().skip(1).map(|l| l.split(',').take(2).collect::<Vec<_>>().join(",")).collect();
    assert_eq!(keys.len(), 1);
    assert!(out.join("manifest.sweep.json").exists());
}

#[test]
fn malformed_config_exits_2_naming_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "[train]\nepochs = \"many\"\n").unwrap();
    let o = fovguide(&cfg, &dir.path().join("out"), &["sweep"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("train.epochs"), "{}", stderr(&o));

    fs::write(&cfg, "[scenario]\nspeeed = 3.0\n").unwrap();
    let o = fovguide(&cfg, &dir.path().join("out"), &["sweep"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("speeed"), "{}", stderr(&o));
}

#[test]
fn zero_threads_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, TINY).unwrap();
    let o = fovguide(&cfg, &dir.path().join("out"), &["--threads", "0", "sweep"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_upstream_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, TINY).unwrap();
    let out = dir.path().join("out");
    for cmd in ["dataset", "train", "simulate", "compare", "audit"] {
        let o = fovguide(&cfg, &out, &[cmd]);
        assert_eq!(o.status.code(), Some(3), "{cmd}: {}", stderr(&o));
    }
}

#[test]
fn tampered_upstream_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, TINY).unwrap();
    let out = dir.path().join("out");
    assert!(fovguide(&cfg, &out, &["sweep"]).status.success());
    let mut csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    csv.push('\n');
    fs::write(out.join("sweep.csv"), csv).unwrap();
    let o = fovguide(&cfg, &out, &["dataset"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("digest"), "{}", stderr(&o));
}

fn artifacts(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                files.push((rel, fs::read(&p).unwrap()));
            }
        }
    }
    files.sort();
    files
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, TINY).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for (out, threads) in [(&a, "1"), (&b, "2")] {
        for cmd in ["sweep", "dataset", "train", "simulate", "compare", "audit", "report"] {
            let o = fovguide(&cfg, out, &["--threads", threads, cmd]);
            assert!(o.status.success(), "{cmd}: {}", stderr(&o));
        }
    }
    let (fa, fb) = (artifacts(&a), artifacts(&b));
    assert_eq!(fa.iter().map(|f| &f.0).collect::<Vec<_>>(), fb.iter().map(|f| &f.0).collect::<Vec<_>>());
    let mut compared = 0;
    for ((name, x), (_, y)) in fa.iter().zip(&fb) {
        // manifests carry wall times and report.md the measured latency
        if name.starts_with("manifest.") || name == "report.md" {
            continue;
        }
        assert!(x == y, "{name} differs between runs");
        compared += 1;
    }
    assert!(compared >= 15, "{compared}");

    // every artifact is listed in a manifest with its digest
    let mut listed = std::collections::BTreeSet::new();
    for (name, bytes) in &fa {
        if name.starts_with("manifest.") {
            let m: serde_json::Value = serde_json::from_slice(bytes).unwrap();
            for o in m["outputs"].as_array().unwrap() {
                listed.insert(o["path"].as_str().unwrap().to_string());
                assert_eq!(o["sha256"].as_str().unwrap().len(), 64);
            }
        }
    }
    for (name, _) in &fa {
        assert!(name.starts_with("manifest.") || listed.contains(name), "{name} is in no manifest");
    }
}

#[test]
fn audit_passes_on_a_fresh_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "[sweep]\nn_alpha = 6\nn_beta = 6\n").unwrap();
    let out = dir.path().join("out");
    assert!(fovguide(&cfg, &out, &["sweep"]).status.success());
    let o = fovguide(&cfg, &out, &["audit"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let a: serde_json::Value = serde_json::from_slice(&fs::read(out.join("audit.json")).unwrap()).unwrap();
    assert_eq!(a["pass"], true);
}

#[test]
fn compare_writes_one_row_per_law() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, TINY).unwrap();
    let out = dir.path().join("out");
    for cmd in ["sweep", "dataset", "train", "compare"] {
        let o = fovguide(&cfg, &out, &[cmd]);
        assert!(o.status.success(), "{cmd}: {}", stderr(&o));
    }
    let csv = fs::read_to_string(out.join("comparison.csv")).unwrap();
    let cmp: serde_json::Value = serde_json::from_slice(&fs::read(out.join("comparison.json")).unwrap()).unwrap();
    let rows = cmp["table"]["rows"].as_array().unwrap().len();
    assert_eq!(csv.lines().count(), rows + 1);
    assert!(rows >= 4);
    for f in ["compare_trajectory", "compare_lead_angle", "compare_control"] {
        let svg = fs::read_to_string(out.join(format!("plots/{f}.svg"))).unwrap();
        assert!(svg.starts_with("<svg"));
    }
}
