//! Small-cost scaling limit: a stochastic-volatility control problem.
//!
//! With costs `kappa / n` the binomial super-replication prices converge to
//!
//! ```text
//! inf_{nu >= sigma} E[ f(S^nu_1) + kappa * int_0^1 g(nu_t^2 / sigma^2) dt ]
//! ```
//!
//! where `S^nu` is the exponential martingale driven by `nu` and `g` linearly
//! interpolates `m -> 1/m` on the positive integers. The value solves
//!
//! ```text
//! V_t + min_{1 <= m <= m_max} [ m * sigma^2 s^2 V_ss / 2 + kappa * g(m) ] = 0,  V(1, s) = f(s)
//! ```
//!
//! [`solve_hjb`] integrates this with a monotone explicit scheme and
//! [`mc_value`] prices a fixed simple-form multiplier schedule by simulation.

mod bs;
mod hjb;
mod mc;
mod rho;

pub use bs::{bs_price, lognormal_expectation};
pub use hjb::{
    hjb_refinement, solve_hjb, solve_hjb_frozen, HJBGrid, LimitSolution, RefinementEstimate,
    DEFAULT_M_MAX,
};
pub use mc::{mc_value, McEstimate};
pub use rho::{RhoRule, RhoSchedule, SpotCurve};

use crate::error::{Error, Result};

/// `g(y)` for `y >= 1` without validation.
pub(crate) fn g(y: f64) -> f64 {
    let m = y.floor();
    (m + 1.0 - y) / m + (y - m) / (m + 1.0)
}

/// Linear interpolation of `m -> 1/m` at integers, evaluated at `y >= 1`.
pub fn g_eval(y: f64) -> Result<f64> {
    if !(y.is_finite() && y >= 1.0) {
        return Err(Error::input(format!("g is defined on [1, inf), got {y}")));
    }
    Ok(g(y))
}

/// Integer `m` in `1..=m_max` minimising `curv * m + kappa * g(m)`; ties go to the smaller `m`.
///
/// The objective is piecewise linear between integers, so an integer minimiser
/// exists; `curv * m + kappa / m` is convex in `m`, so it lies next to `sqrt(kappa / curv)`.
pub fn optimal_multiplier(curv: f64, kappa: f64, m_max: u32) -> u32 {
    let m_max = m_max.max(1);
    let curv = curv.max(0.0);
    let objective = |m: u32| curv * m as f64 + kappa / m as f64;
    let centre = if curv > 0.0 {
        (kappa / curv).sqrt().floor()
    } else {
        f64::INFINITY
    };
    let c = if centre >= m_max as f64 {
        m_max
    } else {
        (centre as u32).max(1)
    };
    let mut candidates = [1, c, (c + 1).min(m_max), m_max];
    candidates.sort_unstable();
    let mut best = candidates[0];
    let mut best_val = objective(best);
    for &m in &candidates[1..] {
        let v = objective(m);
        if v < best_val {
            best = m;
            best_val = v;
        }
    }
    best
}
