use std::fs;

use fovguide::formats::{
    load_dataset, load_model, read_history_csv, read_sweep, save_dataset, save_model, sidecar_path,
    write_history_csv, write_sweep_csv, SeedRecord, SweepReport,
};
use fovguide::Error;
use fovguide_core::dataset::{Channel, Dataset, DatasetMeta, NormStats, Provenance, Sample};
use fovguide_core::extremal::{propagate, PropagationConfig, SeedParams, SweepGrid};
use fovguide_core::mlp::MlpModel;
use fovguide_core::simulator::HistoryPoint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn norm() -> NormStats {
    NormStats {
        r: Channel::new(0.0, 4.0).unwrap(),
        sigma: Channel::new(0.0, 1.0).unwrap(),
        t_go: Channel::new(0.0, 4.0).unwrap(),
        u: Channel::new(-3.0, 5.0).unwrap(),
    }
}

fn random_dataset(n: usize) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let samples: Vec<Sample> = (0..n)
        .map(|_| {
            let r = rng.gen_range(0.0..3.0);
            Sample { r, sigma: rng.gen_range(0.0..1.0), t_go: r + rng.gen_range(0.0..1.0), u: rng.gen_range(-3.0..5.0) }
        })
        .collect();
    Dataset {
        norm: norm(),
        meta: DatasetMeta {
            sigma_max: 1.0,
            eps: 1e-4,
            t_bar: 4.0,
            tau0: 1e-3,
            stride: 1,
            grid: "test".into(),
            generator_version: "0".into(),
            provenance: vec![Provenance { alpha: 1.0, beta: 0.5, first: 0, count: n }],
        },
        samples,
    }
}

#[test]
fn dataset_round_trips_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("dataset.csv");
    let ds = random_dataset(1000);
    save_dataset(&path, &ds).unwrap();
    assert!(sidecar_path(&path).ends_with("dataset.meta.json"));
    let back = load_dataset(&path).unwrap();
    assert_eq!(back, ds);
    let text = fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("r,sigma,tgo,u\n"));
}

#[test]
fn truncated_dataset_row_reports_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("dataset.csv");
    save_dataset(&path, &random_dataset(20)).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    // line 8 of the file loses its last field
    let cut = lines[7].rfind(',').unwrap();
    lines[7].truncate(cut);
    fs::write(&path, lines.join("\n") + "\n").unwrap();
    match load_dataset(&path).unwrap_err() {
        Error::Malformed { line, .. } => assert_eq!(line, Some(8)),
        e => panic!("unexpected {e}"),
    }
}

#[test]
fn unparsable_number_reports_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("dataset.csv");
    save_dataset(&path, &random_dataset(20)).unwrap();
    let text = fs::read_to_string(&path).unwrap().replacen("e-1,", "e-1x,", 1);
    fs::write(&path, &text).unwrap();
    let line = text.lines().position(|l| l.contains("e-1x,")).unwrap() as u64 + 1;
    match load_dataset(&path).unwrap_err() {
        Error::Malformed { line: l, .. } => assert_eq!(l, Some(line)),
        e => panic!("unexpected {e}"),
    }
}

#[test]
fn wrong_header_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("dataset.csv");
    save_dataset(&path, &random_dataset(5)).unwrap();
    let text = fs::read_to_string(&path).unwrap().replacen("tgo", "t_go", 1);
    fs::write(&path, text).unwrap();
    assert!(matches!(load_dataset(&path).unwrap_err(), Error::Malformed { line: Some(1), .. }));
}

#[test]
fn missing_sidecar_is_malformed() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("dataset.csv");
    save_dataset(&path, &random_dataset(5)).unwrap();
    fs::remove_file(sidecar_path(&path)).unwrap();
    assert!(matches!(load_dataset(&path).unwrap_err(), Error::Malformed { .. }));
}

#[test]
fn sidecar_count_mismatch_is_malformed() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("dataset.csv");
    save_dataset(&path, &random_dataset(5)).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    let kept: Vec<&str> = text.lines().take(4).collect();
    fs::write(&path, kept.join("\n") + "\n").unwrap();
    assert!(matches!(load_dataset(&path).unwrap_err(), Error::Malformed { .. }));
}

#[test]
fn missing_dataset_is_a_missing_artifact() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(load_dataset(&dir.path().join("nope.csv")).unwrap_err(), Error::MissingArtifact(_)));
}

#[test]
fn model_round_trips_and_checks_version() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    let m = MlpModel::init(3, norm());
    save_model(&path, &m).unwrap();
    assert_eq!(load_model(&path).unwrap(), m);

    let text = fs::read_to_string(&path).unwrap().replacen("\"format_version\": 1", "\"format_version\": 2", 1);
    fs::write(&path, &text).unwrap();
    assert!(matches!(load_model(&path).unwrap_err(), Error::VersionMismatch { found: 2, expected: 1, .. }));
}

#[test]
fn truncated_model_is_malformed() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    save_model(&path, &MlpModel::init(3, norm())).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    fs::write(&path, &text[..text.len() / 2]).unwrap();
    assert!(matches!(load_model(&path).unwrap_err(), Error::Malformed { .. }));
}

#[test]
fn model_with_wrong_weight_count_is_malformed() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    let mut m = MlpModel::init(3, norm());
    m.weights[1].pop();
    save_model(&path, &m).unwrap();
    assert!(matches!(load_model(&path).unwrap_err(), Error::Malformed { .. }));
}

#[test]
fn history_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("history.csv");
    let h: Vec<HistoryPoint> = (0..50)
        .map(|i| {
            let t = i as f64 / 7.0;
            HistoryPoint { t, x: t.sin(), y: t.cos(), theta: 0.1 * t, sigma: -0.3 * t, r: 1e4 / (1.0 + t), a: t.exp() }
        })
        .collect();
    write_history_csv(&path, &h).unwrap();
    assert_eq!(read_history_csv(&path).unwrap(), h);
    assert!(fs::read_to_string(&path).unwrap().starts_with("t,x,y,theta,sigma,r,a\n"));
}

#[test]
fn sweep_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.csv");
    let cfg = PropagationConfig { t_bar: 1.0, ..Default::default() };
    let sigma_max = 1.0;
    let trajs: Vec<_> = [(0.5, 0.3), (2.0, 2.5)]
        .iter()
        .map(|&(a, b)| propagate(&SeedParams::new(a, b, sigma_max).unwrap(), &cfg).unwrap())
        .collect();
    write_sweep_csv(&path, &trajs.iter().collect::<Vec<_>>()).unwrap();
    let report = SweepReport {
        sigma_max,
        grid: SweepGrid { n_alpha: 2, n_beta: 1, ..Default::default() },
        propagation: cfg,
        success_ratio: 1.0,
        seeds: trajs
            .iter()
            .enumerate()
            .map(|(i, t)| SeedRecord {
                alpha_index: i,
                beta_index: 0,
                alpha: t.seed.alpha,
                beta: t.seed.beta,
                termination: t.termination,
                final_tau: t.final_tau(),
                points: t.points.len(),
                stats: t.stats,
                audit: None,
            })
            .collect(),
        failures: vec![],
    };
    assert_eq!(read_sweep(&path, &report).unwrap(), trajs);

    let mut short = report.clone();
    short.seeds.pop();
    assert!(matches!(read_sweep(&path, &short).unwrap_err(), Error::Malformed { .. }));
    let mut long = report;
    long.seeds[1].points += 1;
    assert!(matches!(read_sweep(&path, &long).unwrap_err(), Error::Malformed { .. }));
}
