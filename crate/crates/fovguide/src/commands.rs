//! One function per subcommand. Every command reads its inputs from and writes
//! its outputs to the output directory, and leaves a `manifest.<command>.json`.

use std::path::{Path, PathBuf};
use std::time::Instant;

use fovguide_core::dataset;
use fovguide_core::guidance::{
    nn_command, GuidanceLaw, GuidanceQuery, ImpactTimePn, NeuralLaw, ProportionalNavigation, ScalingParams,
};
use fovguide_core::mlp::{self, MlpModel};
use fovguide_core::simulator::{compare, matched_reference, run, ComparisonTable, HistoryPoint, Outcome, Scenario, SimResult};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::audit::{self, AuditSummary, Check};
use crate::config::Config;
use crate::error::{Error, Result};
use crate::formats::{self, RunSummary, SeedRecord, SweepReport};
use crate::manifest::{verify_upstream, RunManifest};
use crate::parallel;
use crate::plot::{Chart, Series};

pub const SWEEP_CSV: &str = "sweep.csv";
pub const SWEEP_REPORT: &str = "sweep_report.json";
pub const DATASET_CSV: &str = "dataset.csv";
pub const DATASET_META: &str = "dataset.meta.json";
pub const MODEL: &str = "model.json";
pub const TRAIN_REPORT: &str = "train_report.json";
pub const HISTORY: &str = "history.csv";
pub const REFERENCE: &str = "reference.csv";
pub const SUMMARY: &str = "summary.json";
pub const COMPARISON_CSV: &str = "comparison.csv";
pub const COMPARISON_JSON: &str = "comparison.json";
pub const AUDIT: &str = "audit.json";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_MD: &str = "report.md";

/// Points used by the audit command for the two algebraic checks.
pub const AUDIT_JACOBIAN_POINTS: usize = 10_000;
pub const AUDIT_DERIVATIVE_POINTS: usize = 1_000;

#[derive(Debug, Clone)]
pub struct Context {
    pub config: Config,
    pub out: PathBuf,
    pub threads: Option<usize>,
    /// Overrides `train.seed`.
    pub seed: Option<u64>,
}

impl Context {
    pub fn new(config: Config, out: impl Into<PathBuf>) -> Self {
        Self { config, out: out.into(), threads: None, seed: None }
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.out.join(rel)
    }

    fn seed(&self) -> u64 {
        self.seed.unwrap_or(self.config.train.seed)
    }

    fn manifest(&self, command: &str) -> RunManifest {
        let mut m = RunManifest::new(command, &self.config);
        m.seeds.insert("train".into(), self.seed());
        m
    }

    fn finish(&self, mut m: RunManifest, outputs: &[&str]) -> Result<()> {
        for rel in outputs {
            m.add_output(&self.out, rel)?;
        }
        m.write(&self.out)
    }

    fn scaling(&self) -> Result<ScalingParams> {
        self.config.guidance.scaling(self.config.sweep.t_bar)
    }
}

fn elapsed(t: Instant) -> f64 {
    t.elapsed().as_secs_f64()
}

pub fn cmd_sweep(ctx: &Context) -> Result<SweepReport> {
    let s = &ctx.config.sweep;
    let grid = s.grid();
    let prop = s.propagation()?;
    let start = Instant::now();
    let outcome = parallel::with_threads(ctx.threads, || parallel::sweep(&grid, &prop, s.sigma_max()))??;
    let audits = if s.audit {
        parallel::with_threads(ctx.threads, || parallel::audit_all(&outcome, &prop))?
    } else {
        vec![None; outcome.trajectories.len()]
    };
    let report = SweepReport {
        sigma_max: s.sigma_max(),
        grid,
        propagation: prop,
        success_ratio: outcome.success_ratio(),
        seeds: outcome
            .trajectories
            .iter()
            .zip(audits)
            .map(|((i, j, t), audit)| SeedRecord {
                alpha_index: *i,
                beta_index: *j,
                alpha: t.seed.alpha,
                beta: t.seed.beta,
                termination: t.termination,
                final_tau: t.final_tau(),
                points: t.points.len(),
                stats: t.stats,
                audit,
            })
            .collect(),
        failures: outcome.failures.clone(),
    };
    let trajs: Vec<_> = outcome.trajectories.iter().map(|(_, _, t)| t).collect();
    formats::write_sweep_csv(&ctx.path(SWEEP_CSV), &trajs)?;
    formats::write_json(&ctx.path(SWEEP_REPORT), &report)?;
    let mut m = ctx.manifest("sweep");
    m.wall_times.insert("sweep".into(), elapsed(start));
    ctx.finish(m, &[SWEEP_CSV, SWEEP_REPORT])?;
    if report.success_ratio < s.min_success_ratio {
        return Err(Error::AuditFailed(format!(
            "{} of {} seeds succeeded, below sweep.min_success_ratio = {}",
            report.seeds.len(),
            report.seeds.len() + report.failures.len(),
            s.min_success_ratio
        )));
    }
    Ok(report)
}

fn load_sweep(ctx: &Context, into: &mut RunManifest) -> Result<(SweepReport, Vec<fovguide_core::extremal::ExtremalTrajectory>)> {
    verify_upstream(&ctx.out, "sweep", &[SWEEP_CSV, SWEEP_REPORT], into)?;
    let report: SweepReport = formats::read_json(&ctx.path(SWEEP_REPORT))?;
    let trajs = formats::read_sweep(&ctx.path(SWEEP_CSV), &report)?;
    Ok((report, trajs))
}

pub fn cmd_dataset(ctx: &Context) -> Result<dataset::Dataset> {
    let mut m = ctx.manifest("dataset");
    let (report, trajs) = load_sweep(ctx, &mut m)?;
    let start = Instant::now();
    let ds = dataset::build(&trajs, ctx.config.dataset.stride, &report.propagation, &report.grid)?;
    formats::save_dataset(&ctx.path(DATASET_CSV), &ds)?;
    m.wall_times.insert("dataset".into(), elapsed(start));
    ctx.finish(m, &[DATASET_CSV, DATASET_META])?;
    Ok(ds)
}

pub fn cmd_train(ctx: &Context) -> Result<(MlpModel, mlp::TrainReport)> {
    let mut m = ctx.manifest("train");
    verify_upstream(&ctx.out, "dataset", &[DATASET_CSV, DATASET_META], &mut m)?;
    let ds = formats::load_dataset(&ctx.path(DATASET_CSV))?;
    let mut cfg = ctx.config.train.train_config();
    cfg.seed = ctx.seed();
    let start = Instant::now();
    let (model, mut report) = mlp::train(&ds, &cfg)?;
    report.wall_time_s = elapsed(start);
    formats::save_model(&ctx.path(MODEL), &model)?;
    formats::write_json(&ctx.path(TRAIN_REPORT), &report)?;
    m.wall_times.insert("train".into(), report.wall_time_s);
    ctx.finish(m, &[MODEL, TRAIN_REPORT])?;
    Ok((model, report))
}

fn load_model(ctx: &Context, into: &mut RunManifest) -> Result<MlpModel> {
    verify_upstream(&ctx.out, "train", &[MODEL], into)?;
    let model = formats::load_model(&ctx.path(MODEL))?;
    let sc = ctx.config.scenario.scenario();
    if (model.norm.sigma.max - sc.sigma_max).abs() > 1e-9 {
        return Err(Error::config(
            "scenario.sigma_max_deg",
            format!("the model was trained for a FOV limit of {} deg", model.norm.sigma.max.to_degrees()),
        ));
    }
    Ok(model)
}

/// The network law as configured.
pub fn neural_law<'a>(config: &Config, model: &'a MlpModel, sc: &Scenario) -> Result<NeuralLaw<'a>> {
    let g = &config.guidance;
    let mut law = NeuralLaw::new(model, g.scaling(config.sweep.t_bar)?, sc.a_max);
    law.terminal_t_go = g.terminal_t_go;
    law.fallback.gain = g.fallback_gain;
    if let Some(guard) = g.fov_guard(sc.sigma_max)? {
        law = law.with_fov_guard(guard);
    }
    Ok(law)
}

fn profile_charts(runs: &[(&str, &[HistoryPoint], bool)], sigma_max: f64) -> [(String, Chart); 3] {
    let mut traj = Chart::new("Pursuer Trajectories", "x (m)", "y (m)");
    let mut lead = Chart::new("Lead Angle Profiles", "t (s)", "sigma (deg)");
    let mut ctrl = Chart::new("Control Profiles", "t (s)", "a (m/s^2)");
    lead.guides = vec![sigma_max.to_degrees(), -sigma_max.to_degrees()];
    for &(name, h, dashed) in runs {
        let mk = |pts: Vec<(f64, f64)>| {
            let s = Series::new(name, pts);
            if dashed {
                s.dashed()
            } else {
                s
            }
        };
        traj.series.push(mk(h.iter().map(|p| (p.x, p.y)).collect()));
        lead.series.push(mk(h.iter().map(|p| (p.t, p.sigma.to_degrees())).collect()));
        ctrl.series.push(mk(h.iter().map(|p| (p.t, p.a)).collect()));
    }
    [("trajectory".into(), traj), ("lead_angle".into(), lead), ("control".into(), ctrl)]
}

fn write_charts(ctx: &Context, prefix: &str, charts: [(String, Chart); 3], outputs: &mut Vec<String>) -> Result<()> {
    for (name, chart) in charts {
        let rel = format!("plots/{prefix}{name}.svg");
        formats::write_bytes(&ctx.path(&rel), chart.to_svg().as_bytes())?;
        outputs.push(rel);
    }
    Ok(())
}

fn reference(ctx: &Context, sc: &Scenario) -> Option<fovguide_core::simulator::MatchedReference> {
    if !ctx.config.scenario.reference {
        return None;
    }
    let prop = ctx.config.sweep.propagation().ok()?;
    matched_reference(sc, ctx.config.guidance.t_ref, &prop).ok()
}

pub fn cmd_simulate(ctx: &Context) -> Result<RunSummary> {
    let mut m = ctx.manifest("simulate");
    let model = load_model(ctx, &mut m)?;
    let sc = ctx.config.scenario.scenario();
    let start = Instant::now();
    let mut law = neural_law(&ctx.config, &model, &sc)?;
    let res = run(&sc, &mut law)?;
    m.wall_times.insert("simulate".into(), elapsed(start));
    let start = Instant::now();
    let matched = reference(ctx, &sc);
    m.wall_times.insert("reference".into(), elapsed(start));
    let summary = RunSummary::new(&sc, &res, matched.as_ref().map(|r| r.effort_j));

    let mut outputs: Vec<String> = vec![HISTORY.into(), SUMMARY.into()];
    formats::write_history_csv(&ctx.path(HISTORY), &res.history)?;
    formats::write_json(&ctx.path(SUMMARY), &summary)?;
    let mut runs: Vec<(&str, &[HistoryPoint], bool)> = vec![("NN", &res.history, false)];
    if let Some(r) = &matched {
        formats::write_history_csv(&ctx.path(REFERENCE), &r.history)?;
        outputs.push(REFERENCE.into());
        runs.push(("extremal", &r.history, true));
    }
    write_charts(ctx, "", profile_charts(&runs, sc.sigma_max), &mut outputs)?;
    ctx.finish(m, &outputs.iter().map(String::as_str).collect::<Vec<_>>())?;
    Ok(summary)
}

/// One impact-time PN run of the comparison grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRun {
    pub law: String,
    pub outcome: Outcome,
    pub impact_time_error: f64,
    pub sigma_peak_deg: f64,
    pub effort_j: f64,
    /// Intercepts within `guidance.impact_tolerance` of `t_f` inside the FOV.
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub table: ComparisonTable,
    pub reference_effort_j: Option<f64>,
    /// Every impact-time PN run tried; the cheapest feasible one is in `table`.
    pub impact_time_grid: Vec<GridRun>,
}

fn itpn_law(ctx: &Context, sc: &Scenario, gain: f64, bias_gain: f64) -> Result<ImpactTimePn> {
    Ok(ImpactTimePn {
        gain,
        bias_gain,
        a_max: sc.a_max,
        terminal_t_go: 1.0,
        fov_guard: ctx.config.guidance.fov_guard(sc.sigma_max)?,
    })
}

/// Runs the impact-time PN grid and returns it with the cheapest feasible law.
pub fn impact_time_grid(ctx: &Context, sc: &Scenario) -> Result<(Vec<GridRun>, Option<ImpactTimePn>)> {
    let g = &ctx.config.guidance;
    let mut laws = Vec::new();
    for &n in &g.pn_gains {
        for &k in &g.bias_gains {
            laws.push(itpn_law(ctx, sc, n, k)?);
        }
    }
    let results: Vec<fovguide_core::Result<SimResult>> =
        parallel::with_threads(ctx.threads, || laws.par_iter().map(|l| run(sc, &mut l.clone())).collect())?;
    let mut grid = Vec::with_capacity(laws.len());
    let mut best: Option<(f64, usize)> = None;
    for (i, r) in results.into_iter().enumerate() {
        let r = r?;
        let err = r.impact_time_error(sc);
        let feasible = r.outcome == Outcome::Intercept
            && err.abs() <= g.impact_tolerance
            && r.sigma_peak <= sc.sigma_max + 0.1f64.to_radians();
        if feasible && best.is_none_or(|(j, _)| r.effort_j < j) {
            best = Some((r.effort_j, i));
        }
        grid.push(GridRun {
            law: r.law.clone(),
            outcome: r.outcome,
            impact_time_error: err,
            sigma_peak_deg: r.sigma_peak.to_degrees(),
            effort_j: r.effort_j,
            feasible,
        });
    }
    Ok((grid, best.map(|(_, i)| laws[i].clone())))
}

pub fn cmd_compare(ctx: &Context) -> Result<Comparison> {
    let mut m = ctx.manifest("compare");
    let model = load_model(ctx, &mut m)?;
    let sc = ctx.config.scenario.scenario();
    let start = Instant::now();
    let (grid, best) = impact_time_grid(ctx, &sc)?;
    let mut nn = neural_law(&ctx.config, &model, &sc)?;
    let mut pns: Vec<ProportionalNavigation> =
        ctx.config.guidance.pn_gains.iter().map(|&gain| ProportionalNavigation { gain, a_max: sc.a_max }).collect();
    let mut best = best;
    let mut laws: Vec<&mut dyn GuidanceLaw> = vec![&mut nn];
    for p in pns.iter_mut() {
        laws.push(p);
    }
    if let Some(b) = best.as_mut() {
        laws.push(b);
    }
    let table = compare(&sc, &mut laws)?;
    m.wall_times.insert("compare".into(), elapsed(start));
    let matched = reference(ctx, &sc);
    let cmp = Comparison { table, reference_effort_j: matched.as_ref().map(|r| r.effort_j), impact_time_grid: grid };
    formats::write_comparison_csv(&ctx.path(COMPARISON_CSV), &cmp.table)?;
    formats::write_json(&ctx.path(COMPARISON_JSON), &cmp)?;

    // histories for the plots
    let mut histories = vec![("NN".to_string(), run(&sc, &mut neural_law(&ctx.config, &model, &sc)?)?.history)];
    if let Some(p) = pns.first_mut() {
        histories.push((p.name(), run(&sc, p)?.history));
    }
    if let Some(b) = best.as_mut() {
        histories.push((b.name(), run(&sc, b)?.history));
    }
    let mut runs: Vec<(&str, &[HistoryPoint], bool)> = histories.iter().map(|(n, h)| (n.as_str(), h.as_slice(), false)).collect();
    if let Some(r) = &matched {
        runs.push(("extremal", &r.history, true));
    }
    let mut outputs: Vec<String> = vec![COMPARISON_CSV.into(), COMPARISON_JSON.into()];
    write_charts(ctx, "compare_", profile_charts(&runs, sc.sigma_max), &mut outputs)?;
    ctx.finish(m, &outputs.iter().map(String::as_str).collect::<Vec<_>>())?;
    Ok(cmp)
}

pub fn cmd_audit(ctx: &Context) -> Result<AuditSummary> {
    let mut m = ctx.manifest("audit");
    let prop = ctx.config.sweep.propagation()?;
    let seed = ctx.seed();
    m.seeds.insert("audit".into(), seed);
    let start = Instant::now();
    let (jac_err, jac_min) = audit::jacobian_determinant(AUDIT_JACOBIAN_POINTS, seed, prop.eps);
    let deriv = audit::derivative_consistency(AUDIT_DERIVATIVE_POINTS, seed.wrapping_add(1), prop.eps);
    let mut checks = vec![
        Check::at_most("jacobian.closed_form", jac_err, 1e-12),
        Check::at_least("jacobian.min_determinant", jac_min, f64::MIN_POSITIVE),
        Check::at_most("derivatives.max_rel_error", deriv, 1e-6),
    ];

    // the trajectories are re-audited from disk, not taken from the report
    let (mut report, trajs) = load_sweep(ctx, &mut m)?;
    let fresh = parallel::with_threads(ctx.threads, || {
        trajs.par_iter().map(|t| fovguide_core::extremal::audit(t, report.propagation.eps).ok()).collect::<Vec<_>>()
    })?;
    for (rec, a) in report.seeds.iter_mut().zip(fresh) {
        rec.audit = a;
    }
    checks.extend(audit::sweep_checks(&report, ctx.config.sweep.min_success_ratio));

    if ctx.out.join("manifest.dataset.json").exists() {
        verify_upstream(&ctx.out, "dataset", &[DATASET_CSV, DATASET_META], &mut m)?;
        checks.extend(audit::dataset_checks(&formats::load_dataset(&ctx.path(DATASET_CSV))?));
    }
    if ctx.out.join("manifest.train.json").exists() {
        verify_upstream(&ctx.out, "train", &[MODEL], &mut m)?;
        let model = formats::load_model(&ctx.path(MODEL))?;
        checks.push(Check::at_most("model.gradient_check", audit::model_gradient(&model, 100, seed), 1e-6));
    }
    m.wall_times.insert("audit".into(), elapsed(start));
    let summary = AuditSummary::new(checks);
    formats::write_json(&ctx.path(AUDIT), &summary)?;
    ctx.finish(m, &[AUDIT])?;
    if !summary.pass {
        let failed: Vec<&str> = summary.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
        return Err(Error::AuditFailed(failed.join(", ")));
    }
    Ok(summary)
}

/// Median wall time of one `nn_command` call, ms, over `n` queries spread across the envelope.
pub fn command_latency_ms(model: &MlpModel, sp: &ScalingParams, sc: &Scenario, n: usize) -> f64 {
    let mut times = Vec::with_capacity(n);
    let mut acc = 0.0;
    for i in 0..n {
        let f = (i % 97) as f64 / 97.0;
        let q = GuidanceQuery {
            r: sc.r0 * (0.2 + 0.8 * f),
            sigma: sc.sigma_max * (2.0 * f - 1.0),
            t_go: sc.t_f * (0.3 + 0.7 * f),
            speed: sc.speed,
        };
        let t = Instant::now();
        acc += std::hint::black_box(nn_command(model, std::hint::black_box(&q), sp, sc.a_max)).unwrap_or(0.0);
        times.push(t.elapsed().as_secs_f64() * 1e3);
    }
    std::hint::black_box(acc);
    times.sort_by(f64::total_cmp);
    times[times.len() / 2]
}

/// Aggregate of whatever the upstream commands left in the output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub sweep_success_ratio: Option<f64>,
    pub sweep_trajectories: Option<usize>,
    pub dataset_samples: Option<usize>,
    pub held_out_rmse: Option<f64>,
    pub best_epoch: Option<usize>,
    pub simulation: Option<RunSummary>,
    pub comparison: Option<ComparisonTable>,
    pub audit_pass: Option<bool>,
}

fn optional<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Option<T>> {
    if path.exists() {
        formats::read_json(path).map(Some)
    } else {
        Ok(None)
    }
}

/// Writes `report.json` (deterministic) and `report.md`, which also carries the
/// measured command latency.
pub fn cmd_report(ctx: &Context) -> Result<Report> {
    let mut m = ctx.manifest("report");
    let sweep: Option<SweepReport> = optional(&ctx.path(SWEEP_REPORT))?;
    let train: Option<mlp::TrainReport> = optional(&ctx.path(TRAIN_REPORT))?;
    let sim: Option<RunSummary> = optional(&ctx.path(SUMMARY))?;
    let cmp: Option<Comparison> = optional(&ctx.path(COMPARISON_JSON))?;
    let aud: Option<AuditSummary> = optional(&ctx.path(AUDIT))?;
    let samples = if ctx.path(DATASET_META).exists() {
        let v: serde_json::Value = formats::read_json(&ctx.path(DATASET_META))?;
        v.get("samples").and_then(|s| s.as_u64()).map(|s| s as usize)
    } else {
        None
    };
    let report = Report {
        sweep_success_ratio: sweep.as_ref().map(|s| s.success_ratio),
        sweep_trajectories: sweep.as_ref().map(|s| s.seeds.len()),
        dataset_samples: samples,
        held_out_rmse: train.as_ref().map(|t| t.held_out_rmse),
        best_epoch: train.as_ref().map(|t| t.best_epoch),
        simulation: sim,
        comparison: cmp.as_ref().map(|c| c.table.clone()),
        audit_pass: aud.as_ref().map(|a| a.pass),
    };
    let latency = if ctx.path(MODEL).exists() {
        let model = formats::load_model(&ctx.path(MODEL))?;
        let ms = command_latency_ms(&model, &ctx.scaling()?, &ctx.config.scenario.scenario(), 20_000);
        m.wall_times.insert("nn_command_median_ms".into(), ms);
        Some(ms)
    } else {
        None
    };
    formats::write_json(&ctx.path(REPORT_JSON), &report)?;
    formats::write_bytes(&ctx.path(REPORT_MD), markdown(&report, cmp.as_ref(), latency).as_bytes())?;
    ctx.finish(m, &[REPORT_JSON, REPORT_MD])?;
    Ok(report)
}

fn markdown(r: &Report, cmp: Option<&Comparison>, latency: Option<f64>) -> String {
    let mut s = String::from("# Run report\n\n");
    let opt = |v: Option<String>| v.unwrap_or_else(|| "n/a".into());
    s += &format!("- sweep success ratio: {}\n", opt(r.sweep_success_ratio.map(|v| format!("{v:.4}"))));
    s += &format!("- trajectories: {}\n", opt(r.sweep_trajectories.map(|v| v.to_string())));
    s += &format!("- dataset samples: {}\n", opt(r.dataset_samples.map(|v| v.to_string())));
    s += &format!("- held-out RMSE (normalized): {}\n", opt(r.held_out_rmse.map(|v| format!("{v:.3e}"))));
    s += &format!("- median nn_command latency: {}\n", opt(latency.map(|v| format!("{v:.4} ms"))));
    s += &format!("- audit: {}\n", opt(r.audit_pass.map(|p| if p { "pass".into() } else { "FAIL".into() })));
    if let Some(sim) = &r.simulation {
        s += "\n## Simulation\n\n";
        s += &format!(
            "t_f = {} s, sigma_max = {:.1} deg: impact error {:.4} s, sigma peak {:.4} deg, J = {:.1} m^2/s^3",
            sim.scenario.t_f,
            sim.scenario.sigma_max.to_degrees(),
            sim.impact_time_error,
            sim.sigma_peak_deg,
            sim.effort_j
        );
        if let Some(j) = sim.reference_effort_j {
            s += &format!(" (extremal {j:.1}, {:+.2}%)", 100.0 * (sim.effort_j / j - 1.0));
        }
        s += "\n";
    }
    if let Some(c) = cmp {
        s += "\n## Comparison\n\n| law | outcome | impact error (s) | sigma peak (deg) | J (m^2/s^3) |\n|---|---|---|---|---|\n";
        for row in &c.table.rows {
            s += &format!(
                "| {} | {:?} | {:.4} | {:.3} | {:.1} |\n",
                row.law,
                row.outcome,
                row.impact_time_error,
                row.sigma_peak.to_degrees(),
                row.effort_j
            );
        }
        if let Some(j) = c.reference_effort_j {
            s += &format!("\nExtremal reference J = {j:.1} m^2/s^3\n");
        }
    }
    s
}

/// sweep, dataset, train, simulate, compare, audit and report in order.
pub fn cmd_pipeline(ctx: &Context) -> Result<Report> {
    cmd_sweep(ctx)?;
    cmd_dataset(ctx)?;
    cmd_train(ctx)?;
    cmd_simulate(ctx)?;
    cmd_compare(ctx)?;
    cmd_audit(ctx)?;
    cmd_report(ctx)
}
