//! Multi-threaded drivers. Results are assembled by index, so output does not
//! depend on the number of threads or on completion order.

use fovguide_core::extremal::{audit, propagate, AuditReport, PropagationConfig, SweepGrid, SweepOutcome};
use fovguide_core::simulator::{run, Scenario, SimResult};
use fovguide_core::guidance::GuidanceLaw;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Runs `f` on a pool of `threads` workers (all cores when `None`).
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(Error::config("--threads", "must be at least 1"));
        }
        b = b.num_threads(n);
    }
    let pool = b.build().map_err(|e| Error::config("--threads", e))?;
    Ok(pool.install(f))
}

pub fn sweep(grid: &SweepGrid, cfg: &PropagationConfig, sigma_max: f64) -> Result<SweepOutcome> {
    cfg.validate()?;
    let seeds = grid.seeds(sigma_max)?;
    let results = seeds.into_par_iter().map(|(i, j, s)| (i, j, s, propagate(&s, cfg))).collect();
    Ok(SweepOutcome::assemble(results))
}

/// Audit of every successful trajectory, in sweep order.
pub fn audit_all(outcome: &SweepOutcome, cfg: &PropagationConfig) -> Vec<Option<AuditReport>> {
    outcome.trajectories.par_iter().map(|(_, _, t)| audit(t, cfg.eps).ok()).collect()
}

/// Flies every scenario with a fresh law from `make_law`.
pub fn run_all<L, F>(scenarios: &[Scenario], make_law: F) -> Vec<fovguide_core::Result<SimResult>>
where
    L: GuidanceLaw,
    F: Fn() -> L + Sync,
{
    scenarios.par_iter().map(|sc| run(sc, &mut make_law())).collect()
}
