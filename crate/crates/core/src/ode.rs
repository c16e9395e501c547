//! Dormand–Prince 5(4) with Hairer's fourth-order continuous extension.
//!
//! The driver is step-wise: callers advance one accepted step at a time, can
//! evaluate the dense output inside the last step (sampling, event location)
//! and may overwrite the state between steps (projection), which restarts FSAL.

use crate::math::{powf, sqrt};
use crate::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub rel: f64,
    pub abs: f64,
    pub h_max: f64,
    /// Steps below this (relative to |t|) abort the integration.
    pub h_min: f64,
    pub max_steps: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { rel: 1e-10, abs: 1e-12, h_max: f64::INFINITY, h_min: 1e-14, max_steps: 1_000_000 }
    }
}

/// Coefficients of the continuous extension over the last accepted step.
#[derive(Debug, Clone, Copy)]
struct Dense<const N: usize> {
    t0: f64,
    h: f64,
    r: [[f64; N]; 5],
}

impl<const N: usize> Dense<N> {
    fn eval(&self, t: f64) -> [f64; N] {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        core::array::from_fn(|i| {
            let r = &self.r;
            r[0][i] + th * (r[1][i] + th1 * (r[2][i] + th * (r[3][i] + th1 * r[4][i])))
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub evals: usize,
}

#[derive(Debug, Clone)]
pub struct Dopri5<const N: usize> {
    t: f64,
    y: [f64; N],
    k1: [f64; N],
    h: f64,
    tol: Tolerances,
    dense: Option<Dense<N>>,
    stats: Stats,
    last_rejected: bool,
}

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    core::array::from_fn(|i| {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        y[i] + h * acc
    })
}

impl<const N: usize> Dopri5<N> {
    pub fn new<F>(t0: f64, y0: [f64; N], direction_end: f64, tol: Tolerances, f: &mut F) -> Result<Self>
    where
        F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
    {
        let k1 = f(t0, &y0)?;
        let mut s = Self { t: t0, y: y0, k1, h: 0.0, tol, dense: None, stats: Stats { evals: 1, ..Stats::default() }, last_rejected: false };
        s.h = s.initial_step(direction_end, f)?;
        Ok(s)
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn y(&self) -> &[f64; N] {
        &self.y
    }

    pub fn stats(&self) -> Stats {
        self.stats
    }

    /// Time at the start of the last accepted step.
    pub fn last_step_start(&self) -> Option<f64> {
        self.dense.as_ref().map(|d| d.t0)
    }

    /// Dense output inside the last accepted step.
    pub fn interpolate(&self, t: f64) -> [f64; N] {
        match &self.dense {
            Some(d) => d.eval(t),
            None => self.y,
        }
    }

    /// Replaces the current state (e.g. after a projection) and restarts FSAL.
    pub fn reset_state<F>(&mut self, y: [f64; N], f: &mut F) -> Result<()>
    where
        F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
    {
        self.k1 = f(self.t, &y)?;
        self.stats.evals += 1;
        self.y = y;
        Ok(())
    }

    fn err_weight(&self, a: f64, b: f64) -> f64 {
        self.tol.abs + self.tol.rel * a.abs().max(b.abs())
    }

    fn initial_step<F>(&mut self, t_end: f64, f: &mut F) -> Result<f64>
    where
        F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
    {
        let span = (t_end - self.t).abs();
        let mut dnf = 0.0;
        let mut dny = 0.0;
        for i in 0..N {
            let sk = self.err_weight(self.y[i], self.y[i]);
            dnf += (self.k1[i] / sk) * (self.k1[i] / sk);
            dny += (self.y[i] / sk) * (self.y[i] / sk);
        }
        let mut h = if dnf <= 1e-10 || dny <= 1e-10 { 1e-6 } else { sqrt(dny / dnf) * 0.01 };
        h = h.min(self.tol.h_max).min(span);
        let y1 = axpy(&self.y, h, &[(1.0, &self.k1)]);
        let f1 = f(self.t + h, &y1)?;
        self.stats.evals += 1;
        let mut der2 = 0.0;
        for i in 0..N {
            let sk = self.err_weight(self.y[i], self.y[i]);
            let d = (f1[i] - self.k1[i]) / sk;
            der2 += d * d;
        }
        let der2 = sqrt(der2) / h;
        let der12 = der2.max(sqrt(dnf));
        let h1 = if der12 <= 1e-15 { (h * 1e-3).max(1e-6) } else { powf(0.01 / der12, 0.2) };
        Ok((100.0 * h).min(h1).min(self.tol.h_max).min(span).max(1e-12))
    }

    /// Advances by one accepted step without passing `t_end` (forward direction only).
    pub fn step<F>(&mut self, t_end: f64, f: &mut F) -> Result<()>
    where
        F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
    {
        let fail = |t: f64, reason: &'static str| Error::IntegrationFailure { tau: t, reason };
        loop {
            if self.stats.accepted + self.stats.rejected >= self.tol.max_steps {
                return Err(fail(self.t, "step budget exhausted"));
            }
            let mut h = self.h.min(self.tol.h_max);
            let mut last = false;
            if self.t + h >= t_end || (t_end - self.t - h) < 1e-12 * t_end.abs().max(1.0) {
                h = t_end - self.t;
                last = true;
            }
            if h < self.tol.h_min * self.t.abs().max(1.0) && !last {
                return Err(fail(self.t, "step size underflow"));
            }
            let (t, y, k1) = (self.t, &self.y, &self.k1);
            let k2 = f(t + C2 * h, &axpy(y, h, &[(A21, k1)]))?;
            let k3 = f(t + C3 * h, &axpy(y, h, &[(A31, k1), (A32, &k2)]))?;
            let k4 = f(t + C4 * h, &axpy(y, h, &[(A41, k1), (A42, &k2), (A43, &k3)]))?;
            let k5 = f(t + C5 * h, &axpy(y, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]))?;
            let k6 = f(t + h, &axpy(y, h, &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]))?;
            let y1 = axpy(y, h, &[(A71, k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
            let k7 = f(t + h, &y1)?;
            self.stats.evals += 6;

            let mut err = 0.0;
            for i in 0..N {
                let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let sk = self.err_weight(y[i], y1[i]);
                err += (e / sk) * (e / sk);
            }
            let err = sqrt(err / N as f64);
            if !err.is_finite() {
                self.stats.rejected += 1;
                self.h = 0.1 * h;
                self.last_rejected = true;
                continue;
            }
            let fac = (0.9 * powf(err.max(1e-10), -0.2)).clamp(0.2, if self.last_rejected { 1.0 } else { 10.0 });
            if err <= 1.0 {
                let mut r = [[0.0; N]; 5];
                for i in 0..N {
                    let dy = y1[i] - y[i];
                    let bspl = h * k1[i] - dy;
                    r[0][i] = y[i];
                    r[1][i] = dy;
                    r[2][i] = bspl;
                    r[3][i] = dy - h * k7[i] - bspl;
                    r[4][i] = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
                }
                self.dense = Some(Dense { t0: t, h, r });
                self.t = if last { t_end } else { t + h };
                self.y = y1;
                self.k1 = k7;
                self.stats.accepted += 1;
                self.last_rejected = false;
                self.h = h * fac;
                return Ok(());
            }
            self.stats.rejected += 1;
            self.last_rejected = true;
            self.h = h * fac;
        }
    }
}
