//! First-order optimality system of the saturation-regularized problem.
//!
//! The lead-angle bound `|sigma| <= sigma_max` is replaced by the equality
//! `S(z) = psi(xi)` with `psi(xi) = -exp(-xi)` and a new state `xi` whose rate
//! `omega` is penalized by `eps * omega^2 / 2`. The Hamiltonian is
//!
//! ```text
//! H = px cos(theta) + py sin(theta) + u ptheta + pxi omega
//!     - u^2 / 2 - eps omega^2 / 2 + mu (dS(z, u) - psi'(xi) omega)
//! ```
//!
//! with `dS = sin(sigma) (sin(sigma) / r - u)`. Every partial below is derived
//! from this expression; `exp(-xi)` appears throughout because `psi' = exp(-xi)`.

use serde::{Deserialize, Serialize};

use crate::geometry::lead_terms;
use crate::math::{cos, det3, exp, sin, solve3};
use crate::{Error, Result};

/// Regularization weight on the saturation-state rate.
pub const DEFAULT_EPS: f64 = 1e-4;

/// Tolerance for [`newton_project`], scaled by the size of the residual terms.
pub const PROJECTION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AugmentedState {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub xi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Costate {
    pub px: f64,
    pub py: f64,
    pub ptheta: f64,
    pub pxi: f64,
}

/// `(u, omega, mu)`: turn rate, saturation-state rate and multiplier.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlTriple {
    pub u: f64,
    pub omega: f64,
    pub mu: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Epsilon(f64);

impl Epsilon {
    pub fn new(eps: f64) -> Result<Self> {
        if eps > 0.0 && eps < 1.0 {
            Ok(Self(eps))
        } else {
            Err(Error::InvalidParameter("eps must lie in (0, 1)"))
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }
}

impl Default for Epsilon {
    fn default() -> Self {
        Self(DEFAULT_EPS)
    }
}

impl AugmentedState {
    pub fn to_array(self) -> [f64; 4] {
        [self.x, self.y, self.theta, self.xi]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self { x: a[0], y: a[1], theta: a[2], xi: a[3] }
    }

    pub fn mirrored(self) -> Self {
        Self { y: -self.y, theta: -self.theta, ..self }
    }
}

impl Costate {
    pub fn to_array(self) -> [f64; 4] {
        [self.px, self.py, self.ptheta, self.pxi]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self { px: a[0], py: a[1], ptheta: a[2], pxi: a[3] }
    }

    pub fn mirrored(self) -> Self {
        Self { py: -self.py, ptheta: -self.ptheta, ..self }
    }
}

impl ControlTriple {
    pub fn to_array(self) -> [f64; 3] {
        [self.u, self.omega, self.mu]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self { u: a[0], omega: a[1], mu: a[2] }
    }

    pub fn mirrored(self) -> Self {
        Self { u: -self.u, ..self }
    }
}

/// Lead-angle sine and its first partials with respect to `(x, y, theta)`.
#[derive(Debug, Clone, Copy)]
struct Lead {
    r: f64,
    s: f64,
    ds: [f64; 3],
    dr: [f64; 3],
}

impl Lead {
    fn of(z: &AugmentedState) -> Result<Self> {
        let (r, s, c) = lead_terms(z.x, z.y, z.theta)?;
        let (st, ct) = (sin(z.theta), cos(z.theta));
        let dr = [z.x / r, z.y / r, 0.0];
        let ds = [(st - s * dr[0]) / r, (-ct - s * dr[1]) / r, -c];
        Ok(Self { r, s, ds, dr })
    }

    /// `dS(z, u)` and its partials with respect to `(x, y, theta)`.
    fn sdot(&self, u: f64) -> (f64, [f64; 3]) {
        let (r, s) = (self.r, self.s);
        let val = s * s / r - u * s;
        let grad = core::array::from_fn(|i| 2.0 * s * self.ds[i] / r - s * s * self.dr[i] / (r * r) - u * self.ds[i]);
        (val, grad)
    }
}

pub fn hamiltonian(z: &AugmentedState, p: &Costate, c: &ControlTriple, eps: Epsilon) -> Result<f64> {
    let lead = Lead::of(z)?;
    let (sdot, _) = lead.sdot(c.u);
    let e = eps.get();
    Ok(p.px * cos(z.theta) + p.py * sin(z.theta) + c.u * p.ptheta + p.pxi * c.omega
        - 0.5 * c.u * c.u
        - 0.5 * e * c.omega * c.omega
        + c.mu * (sdot - exp(-z.xi) * c.omega))
}

/// `dH/dz` for `z = (x, y, theta, xi)`.
pub fn hamiltonian_gradient(z: &AugmentedState, p: &Costate, c: &ControlTriple) -> Result<[f64; 4]> {
    let lead = Lead::of(z)?;
    Ok(h_z(&lead, z, p, c))
}

fn h_z(lead: &Lead, z: &AugmentedState, p: &Costate, c: &ControlTriple) -> [f64; 4] {
    let (_, sd) = lead.sdot(c.u);
    [
        c.mu * sd[0],
        c.mu * sd[1],
        -p.px * sin(z.theta) + p.py * cos(z.theta) + c.mu * sd[2],
        c.mu * exp(-z.xi) * c.omega,
    ]
}

/// Costate dynamics in forward time, `-dH/dz`.
pub fn costate_rhs(z: &AugmentedState, p: &Costate, c: &ControlTriple) -> Result<[f64; 4]> {
    let g = hamiltonian_gradient(z, p, c)?;
    Ok([-g[0], -g[1], -g[2], -g[3]])
}

/// Augmented state dynamics `(cos theta, sin theta, u, omega)`.
#[inline]
pub fn state_rhs(z: &AugmentedState, c: &ControlTriple) -> [f64; 4] {
    [cos(z.theta), sin(z.theta), c.u, c.omega]
}

/// Stationarity residual `g = (dH/du, dH/domega, dH/dmu)`.
pub fn stationarity(z: &AugmentedState, p: &Costate, c: &ControlTriple, eps: Epsilon) -> Result<[f64; 3]> {
    let lead = Lead::of(z)?;
    Ok(residual(&lead, z, p, c, eps.get()))
}

fn residual(lead: &Lead, z: &AugmentedState, p: &Costate, c: &ControlTriple, eps: f64) -> [f64; 3] {
    let s = lead.s;
    let ex = exp(-z.xi);
    [
        p.ptheta - c.u - c.mu * s,
        p.pxi - eps * c.omega - c.mu * ex,
        s * (s / lead.r - c.u) - c.omega * ex,
    ]
}

/// Magnitude of the largest term entering `g`, used to scale residual tolerances.
fn residual_scale(lead: &Lead, z: &AugmentedState, p: &Costate, c: &ControlTriple, eps: f64) -> f64 {
    let s = lead.s;
    let ex = exp(-z.xi);
    [
        p.ptheta,
        c.u,
        c.mu * s,
        p.pxi,
        eps * c.omega,
        c.mu * ex,
        s * s / lead.r,
        c.u * s,
        c.omega * ex,
    ]
    .iter()
    .fold(1.0f64, |m, v| m.max(v.abs()))
}

fn g_u(s: f64, xi: f64, eps: f64) -> [[f64; 3]; 3] {
    let ex = exp(-xi);
    [[-1.0, 0.0, -s], [0.0, -eps, -ex], [-s, -ex, 0.0]]
}

/// `dg/d(u, omega, mu)`; symmetric, with determinant `exp(-2 xi) + eps sin^2(sigma)`.
pub fn jacobian_gu(z: &AugmentedState, eps: Epsilon) -> Result<[[f64; 3]; 3]> {
    let lead = Lead::of(z)?;
    Ok(g_u(lead.s, z.xi, eps.get()))
}

pub fn jacobian_gu_det(z: &AugmentedState, eps: Epsilon) -> Result<f64> {
    Ok(det3(&jacobian_gu(z, eps)?))
}

/// All first-order partials entering the control-rate equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Partials {
    pub h_z: [f64; 4],
    pub g_z: [[f64; 4]; 3],
    pub g_p: [[f64; 4]; 3],
    pub g_u: [[f64; 3]; 3],
}

pub fn partials(z: &AugmentedState, p: &Costate, c: &ControlTriple, eps: Epsilon) -> Result<Partials> {
    let lead = Lead::of(z)?;
    Ok(partials_of(&lead, z, p, c, eps.get()))
}

fn partials_of(lead: &Lead, z: &AugmentedState, p: &Costate, c: &ControlTriple, eps: f64) -> Partials {
    let ex = exp(-z.xi);
    let (_, sd) = lead.sdot(c.u);
    let m = c.mu;
    Partials {
        h_z: h_z(lead, z, p, c),
        g_z: [
            [-m * lead.ds[0], -m * lead.ds[1], -m * lead.ds[2], 0.0],
            [0.0, 0.0, 0.0, m * ex],
            [sd[0], sd[1], sd[2], c.omega * ex],
        ],
        g_p: [[0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0], [0.0; 4]],
        g_u: g_u(lead.s, z.xi, eps),
    }
}

/// Forward-time rate of the control triple that keeps `g = 0` along the flow.
///
/// `dU/dt = -(dg/dU)^-1 (dg/dz f - dg/dp dH/dz)`; `dg/dt` vanishes because the
/// system is autonomous.
pub fn control_rate(z: &AugmentedState, p: &Costate, c: &ControlTriple, eps: Epsilon) -> Result<[f64; 3]> {
    let lead = Lead::of(z)?;
    control_rate_of(&lead, z, p, c, eps.get())
}

fn control_rate_of(lead: &Lead, z: &AugmentedState, p: &Costate, c: &ControlTriple, eps: f64) -> Result<[f64; 3]> {
    let d = partials_of(lead, z, p, c, eps);
    let f = state_rhs(z, c);
    let mut rhs = [0.0; 3];
    for (i, r) in rhs.iter_mut().enumerate() {
        let mut acc = 0.0;
        for j in 0..4 {
            acc += d.g_z[i][j] * f[j] - d.g_p[i][j] * d.h_z[j];
        }
        *r = -acc;
    }
    solve3(d.g_u, rhs, 1e-300).ok_or_else(|| Error::SingularJacobian(det3(&d.g_u)))
}

/// Full forward-time vector field of the coupled `(z, p, U)` system.
pub fn coupled_rhs(z: &AugmentedState, p: &Costate, c: &ControlTriple, eps: Epsilon) -> Result<([f64; 4], [f64; 4], [f64; 3])> {
    let lead = Lead::of(z)?;
    let hz = h_z(&lead, z, p, c);
    let du = control_rate_of(&lead, z, p, c, eps.get())?;
    Ok((state_rhs(z, c), [-hz[0], -hz[1], -hz[2], -hz[3]], du))
}

/// Solves `g(z, p, U) = 0` for `U` by Newton iteration from `guess`.
///
/// `g` is affine in `U`, so one step lands on the root up to rounding; the
/// loop only polishes.
pub fn newton_project(z: &AugmentedState, p: &Costate, guess: &ControlTriple, eps: Epsilon) -> Result<ControlTriple> {
    const MAX_ITER: usize = 50;
    let lead = Lead::of(z)?;
    let e = eps.get();
    let jac = g_u(lead.s, z.xi, e);
    let mut c = *guess;
    let mut res = residual(&lead, z, p, &c, e);
    let mut norm = inf_norm(&res);
    for it in 0..MAX_ITER {
        let tol = PROJECTION_TOL * residual_scale(&lead, z, p, &c, e);
        if norm <= tol {
            return Ok(c);
        }
        let step = solve3(jac, res, 1e-300).ok_or_else(|| Error::SingularJacobian(det3(&jac)))?;
        let next = ControlTriple { u: c.u - step[0], omega: c.omega - step[1], mu: c.mu - step[2] };
        let next_res = residual(&lead, z, p, &next, e);
        let next_norm = inf_norm(&next_res);
        if it > 0 && next_norm >= norm {
            // rounding floor reached
            if norm <= 1e3 * tol {
                return Ok(c);
            }
            return Err(Error::NoConvergence { residual: norm, iterations: it + 1 });
        }
        c = next;
        res = next_res;
        norm = next_norm;
    }
    if norm <= PROJECTION_TOL * residual_scale(&lead, z, p, &c, e) {
        Ok(c)
    } else {
        Err(Error::NoConvergence { residual: norm, iterations: MAX_ITER })
    }
}

fn inf_norm<const N: usize>(v: &[f64; N]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Trapezoidal estimate of `1/2 int (u^2 + eps omega^2) dt` over `(t, u, omega)` samples.
pub fn regularized_cost(samples: &[(f64, f64, f64)], eps: Epsilon) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    let e = eps.get();
    let integrand = |&(_, u, w): &(f64, f64, f64)| u * u + e * w * w;
    Ok(samples
        .windows(2)
        .map(|w| 0.5 * (w[1].0 - w[0].0) * (integrand(&w[0]) + integrand(&w[1])))
        .sum::<f64>()
        * 0.5)
}
