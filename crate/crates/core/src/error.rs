use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("range to target is zero (r = {0:e})")]
    ZeroRange(f64),
    #[error("lead angle {sigma} rad is on or outside the FOV bound {sigma_max} rad")]
    ConstraintActive { sigma: f64, sigma_max: f64 },
    #[error("stationarity Jacobian is singular (det = {0:e})")]
    SingularJacobian(f64),
    #[error("Newton projection did not converge, residual {residual:e} after {iterations} iterations")]
    NoConvergence { residual: f64, iterations: usize },
    #[error("integration failed at tau = {tau}: {reason}")]
    IntegrationFailure { tau: f64, reason: &'static str },
    #[error("trajectory has no samples")]
    EmptyTrajectory,
    #[error("sweep produced no usable trajectory")]
    EmptySweep,
    #[error("infeasible query: range {range} exceeds reachable distance {reach}")]
    InfeasibleQuery { range: f64, reach: f64 },
    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
}
