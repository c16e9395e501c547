//! On-disk formats. Floats in CSV files carry 17 significant digits, which
//! round-trips every `f64` exactly.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use fovguide_core::dataset::{Dataset, DatasetMeta, NormStats, Sample};
use fovguide_core::extremal::{
    AuditReport, ExtremalPoint, ExtremalTrajectory, PropagationConfig, PropagationStats, SeedFailure, SeedParams,
    SweepGrid, Termination,
};
use fovguide_core::mlp::MlpModel;
use fovguide_core::pmp::{AugmentedState, ControlTriple, Costate};
use fovguide_core::simulator::{ComparisonTable, HistoryPoint, Outcome, Scenario, SimResult, TimeBounds};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;

pub const TRAJECTORY_HEADER: [&str; 14] =
    ["tau", "x", "y", "theta", "xi", "px", "py", "ptheta", "pxi", "u", "omega", "mu", "r", "sigma"];
pub const DATASET_HEADER: [&str; 4] = ["r", "sigma", "tgo", "u"];
pub const HISTORY_HEADER: [&str; 7] = ["t", "x", "y", "theta", "sigma", "r", "a"];

pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingArtifact(path.to_path_buf()),
        _ => Error::io(path, e),
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::malformed(path, None, e))?;
    s.push('\n');
    write_bytes(path, s.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = read_bytes(path)?;
    serde_json::from_slice(&bytes).map_err(|e| Error::malformed(path, Some(e.line() as u64), e))
}

type CsvOut = csv::Writer<BufWriter<File>>;

fn csv_writer(path: &Path) -> Result<CsvOut> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(BufWriter::new(file)))
}

fn finish(path: &Path, w: CsvOut) -> Result<()> {
    let mut inner = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    inner.flush().map_err(|e| Error::io(path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line());
    Error::malformed(path, line, e)
}

/// Streams a numeric CSV with the exact `header`, passing each row and its line number to `f`.
fn for_each_row(path: &Path, header: &[&str], mut f: impl FnMut(u64, &[f64]) -> Result<()>) -> Result<()> {
    let file = File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingArtifact(path.to_path_buf()),
        _ => Error::io(path, e),
    })?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(BufReader::new(file));
    let found = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(Error::malformed(path, Some(1), format!("header must be `{}`", header.join(","))));
    }
    let mut rec = csv::StringRecord::new();
    let mut vals = Vec::with_capacity(header.len());
    while rdr.read_record(&mut rec).map_err(|e| csv_err(path, e))? {
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != header.len() {
            return Err(Error::malformed(path, Some(line), format!("expected {} fields, found {}", header.len(), rec.len())));
        }
        vals.clear();
        for field in rec.iter() {
            vals.push(field.trim().parse::<f64>().map_err(|e| Error::malformed(path, Some(line), e))?);
        }
        f(line, &vals)?;
    }
    Ok(())
}

fn point_fields(p: &ExtremalPoint) -> [f64; 14] {
    [
        p.tau, p.z.x, p.z.y, p.z.theta, p.z.xi, p.p.px, p.p.py, p.p.ptheta, p.p.pxi, p.u.u, p.u.omega, p.u.mu, p.r,
        p.sigma,
    ]
}

fn point_from(v: &[f64]) -> ExtremalPoint {
    ExtremalPoint {
        tau: v[0],
        z: AugmentedState { x: v[1], y: v[2], theta: v[3], xi: v[4] },
        p: Costate { px: v[5], py: v[6], ptheta: v[7], pxi: v[8] },
        u: ControlTriple { u: v[9], omega: v[10], mu: v[11] },
        r: v[12],
        sigma: v[13],
    }
}

/// One trajectory per file.
pub fn write_trajectory_csv(path: &Path, traj: &ExtremalTrajectory) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(TRAJECTORY_HEADER).map_err(|e| csv_err(path, e))?;
    for p in &traj.points {
        w.write_record(point_fields(p).map(fmt17)).map_err(|e| csv_err(path, e))?;
    }
    finish(path, w)
}

/// All trajectories of a sweep in one file, keyed by leading `alpha,beta` columns.
pub fn write_sweep_csv(path: &Path, trajs: &[&ExtremalTrajectory]) -> Result<()> {
    let mut w = csv_writer(path)?;
    let header: Vec<&str> = ["alpha", "beta"].into_iter().chain(TRAJECTORY_HEADER).collect();
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for t in trajs {
        let key = [fmt17(t.seed.alpha), fmt17(t.seed.beta)];
        for p in &t.points {
            let row = key.iter().cloned().chain(point_fields(p).map(fmt17));
            w.write_record(row).map_err(|e| csv_err(path, e))?;
        }
    }
    finish(path, w)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub alpha_index: usize,
    pub beta_index: usize,
    pub alpha: f64,
    pub beta: f64,
    pub termination: Termination,
    pub final_tau: f64,
    pub points: usize,
    pub stats: PropagationStats,
    pub audit: Option<AuditReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub sigma_max: f64,
    pub grid: SweepGrid,
    pub propagation: PropagationConfig,
    pub success_ratio: f64,
    pub seeds: Vec<SeedRecord>,
    pub failures: Vec<SeedFailure>,
}

/// Rebuilds the trajectories of a sweep from its CSV and report.
pub fn read_sweep(csv_path: &Path, report: &SweepReport) -> Result<Vec<ExtremalTrajectory>> {
    let header: Vec<&str> = ["alpha", "beta"].into_iter().chain(TRAJECTORY_HEADER).collect();
    let mut out: Vec<ExtremalTrajectory> = Vec::with_capacity(report.seeds.len());
    let mut seeds = report.seeds.iter();
    let mut current: Option<&SeedRecord> = None;
    let mut points = Vec::new();
    let mut flush = |rec: &SeedRecord, points: &mut Vec<ExtremalPoint>| -> Result<()> {
        out.push(ExtremalTrajectory {
            seed: SeedParams::new(rec.alpha, rec.beta, report.sigma_max)?,
            points: std::mem::take(points),
            termination: rec.termination,
            stats: rec.stats,
        });
        Ok(())
    };
    for_each_row(csv_path, &header, |line, v| {
        if current.is_none_or(|c| points.len() == c.points) {
            if let Some(c) = current {
                flush(c, &mut points)?;
            }
            current = Some(seeds.next().ok_or_else(|| {
                Error::malformed(csv_path, Some(line), "rows beyond those listed in the sweep report")
            })?);
        }
        let c = current.expect("set above");
        if v[0] != c.alpha || v[1] != c.beta {
            return Err(Error::malformed(csv_path, Some(line), "row does not belong to the expected seed"));
        }
        points.push(point_from(&v[2..]));
        Ok(())
    })?;
    match current {
        Some(c) if points.len() == c.points => flush(c, &mut points)?,
        None => {}
        Some(_) => return Err(Error::malformed(csv_path, None, "fewer rows than the sweep report lists")),
    }
    if seeds.next().is_some() {
        return Err(Error::malformed(csv_path, None, "fewer rows than the sweep report lists"));
    }
    Ok(out)
}

/// `dataset.csv` -> `dataset.meta.json`.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    let stem = csv_path.file_stem().and_then(|s| s.to_str()).unwrap_or("dataset");
    csv_path.with_file_name(format!("{stem}.meta.json"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct DatasetSidecar {
    samples: usize,
    norm: NormStats,
    meta: DatasetMeta,
}

pub fn save_dataset(csv_path: &Path, ds: &Dataset) -> Result<()> {
    let mut w = csv_writer(csv_path)?;
    w.write_record(DATASET_HEADER).map_err(|e| csv_err(csv_path, e))?;
    for s in &ds.samples {
        w.write_record([s.r, s.sigma, s.t_go, s.u].map(fmt17)).map_err(|e| csv_err(csv_path, e))?;
    }
    finish(csv_path, w)?;
    let side = DatasetSidecar { samples: ds.len(), norm: ds.norm, meta: ds.meta.clone() };
    write_json(&sidecar_path(csv_path), &side)
}

pub fn load_dataset(csv_path: &Path) -> Result<Dataset> {
    let side_path = sidecar_path(csv_path);
    if !side_path.exists() && csv_path.exists() {
        return Err(Error::malformed(&side_path, None, "dataset sidecar is missing"));
    }
    let side: DatasetSidecar = read_json(&side_path)?;
    let mut samples = Vec::with_capacity(side.samples);
    for_each_row(csv_path, &DATASET_HEADER, |_, v| {
        samples.push(Sample { r: v[0], sigma: v[1], t_go: v[2], u: v[3] });
        Ok(())
    })?;
    if side.samples != samples.len() {
        return Err(Error::malformed(
            csv_path,
            None,
            format!("sidecar lists {} samples, file has {}", side.samples, samples.len()),
        ));
    }
    let ds = Dataset { samples, norm: side.norm, meta: side.meta };
    ds.validate().map_err(|e| Error::malformed(csv_path, None, e))?;
    Ok(ds)
}

#[derive(Serialize)]
struct ModelOut<'a> {
    format_version: u32,
    #[serde(flatten)]
    model: &'a MlpModel,
}

#[derive(Deserialize)]
struct ModelIn {
    #[serde(flatten)]
    model: MlpModel,
}

pub fn save_model(path: &Path, m: &MlpModel) -> Result<()> {
    write_json(path, &ModelOut { format_version: MODEL_FORMAT_VERSION, model: m })
}

pub fn load_model(path: &Path) -> Result<MlpModel> {
    let value: serde_json::Value = read_json(path)?;
    let found = value
        .get("format_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::malformed(path, None, "missing format_version"))?;
    if found != MODEL_FORMAT_VERSION as u64 {
        return Err(Error::VersionMismatch { path: path.into(), found: found as u32, expected: MODEL_FORMAT_VERSION });
    }
    let m: ModelIn = serde_json::from_value(value).map_err(|e| Error::malformed(path, None, e))?;
    m.model.validate().map_err(|e| Error::malformed(path, None, e))?;
    Ok(m.model)
}

pub fn write_history_csv(path: &Path, history: &[HistoryPoint]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(HISTORY_HEADER).map_err(|e| csv_err(path, e))?;
    for h in history {
        w.write_record([h.t, h.x, h.y, h.theta, h.sigma, h.r, h.a].map(fmt17)).map_err(|e| csv_err(path, e))?;
    }
    finish(path, w)
}

pub fn read_history_csv(path: &Path) -> Result<Vec<HistoryPoint>> {
    let mut out = Vec::new();
    for_each_row(path, &HISTORY_HEADER, |_, v| {
        out.push(HistoryPoint { t: v[0], x: v[1], y: v[2], theta: v[3], sigma: v[4], r: v[5], a: v[6] });
        Ok(())
    })?;
    Ok(out)
}

/// Per-run summary; the history goes to its own CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub law: String,
    pub scenario: Scenario,
    pub outcome: Outcome,
    pub impact_time: f64,
    pub impact_time_error: f64,
    pub miss_distance: f64,
    pub effort_j: f64,
    pub sigma_peak_deg: f64,
    pub command_peak: f64,
    pub command_smoothness: f64,
    pub speed: f64,
    pub bounds: TimeBounds,
    /// `1/2 int a^2 dt` of the matched extremal, when one was computed.
    pub reference_effort_j: Option<f64>,
}

impl RunSummary {
    pub fn new(sc: &Scenario, r: &SimResult, reference_effort_j: Option<f64>) -> Self {
        Self {
            law: r.law.clone(),
            scenario: *sc,
            outcome: r.outcome,
            impact_time: r.impact_time,
            impact_time_error: r.impact_time_error(sc),
            miss_distance: r.miss_distance,
            effort_j: r.effort_j,
            sigma_peak_deg: r.sigma_peak.to_degrees(),
            command_peak: r.command_peak,
            command_smoothness: r.command_smoothness,
            speed: r.speed,
            bounds: r.bounds,
            reference_effort_j,
        }
    }
}

pub fn write_comparison_csv(path: &Path, table: &ComparisonTable) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record([
        "law",
        "outcome",
        "impact_time",
        "impact_time_error",
        "sigma_peak_deg",
        "effort_j",
        "command_peak",
        "command_smoothness",
    ])
    .map_err(|e| csv_err(path, e))?;
    for row in &table.rows {
        let nums = [
            row.impact_time,
            row.impact_time_error,
            row.sigma_peak.to_degrees(),
            row.effort_j,
            row.command_peak,
            row.command_smoothness,
        ]
        .map(fmt17);
        let rec = [row.law.clone(), format!("{:?}", row.outcome)].into_iter().chain(nums);
        w.write_record(rec).map_err(|e| csv_err(path, e))?;
    }
    finish(path, w)
}
