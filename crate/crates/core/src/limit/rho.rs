use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::DEFAULT_M_MAX;
use crate::error::{Error, Result};

/// Multiplier as a continuous function of the log price at the interval start:
/// linear interpolation between knots, flat beyond the ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpotCurve {
    pub log_prices: Vec<f64>,
    pub values: Vec<f64>,
}

impl SpotCurve {
    pub fn new(log_prices: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if log_prices.is_empty() || log_prices.len() != values.len() {
            return Err(Error::input(
                "spot curve needs equally many (>= 1) knots and values",
            ));
        }
        if log_prices.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::input("spot curve knots must be strictly increasing"));
        }
        Ok(SpotCurve { log_prices, values })
    }

    pub fn eval(&self, spot: f64) -> f64 {
        let x = spot.ln();
        let xs = &self.log_prices;
        if x <= xs[0] {
            return self.values[0];
        }
        if x >= xs[xs.len() - 1] {
            return self.values[xs.len() - 1];
        }
        let i = xs.partition_point(|&k| k <= x) - 1;
        let w = (x - xs[i]) / (xs[i + 1] - xs[i]);
        (1.0 - w) * self.values[i] + w * self.values[i + 1]
    }

    fn range(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }
}

/// Variance multiplier on one interval of a simple-form schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhoRule {
    Constant(f64),
    /// Depends on the price observed at the start of the interval.
    Spot(SpotCurve),
}

impl RhoRule {
    pub fn eval(&self, spot: f64) -> f64 {
        match self {
            RhoRule::Constant(r) => *r,
            RhoRule::Spot(c) => c.eval(spot),
        }
    }

    pub fn max_value(&self) -> f64 {
        match self {
            RhoRule::Constant(r) => *r,
            RhoRule::Spot(c) => c.range().1,
        }
    }

    fn range(&self) -> (f64, f64) {
        match self {
            RhoRule::Constant(r) => (*r, *r),
            RhoRule::Spot(c) => c.range(),
        }
    }
}

/// Piecewise multiplier schedule `rho_j` on `[t_j, t_{j+1})`, each within `[1, cap]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoSchedule {
    breakpoints: Vec<f64>,
    rules: Vec<RhoRule>,
    cap: f64,
}

impl RhoSchedule {
    /// `breakpoints` runs from 0 to 1 and has one more entry than `rules`.
    pub fn new(breakpoints: Vec<f64>, rules: Vec<RhoRule>, cap: f64) -> Result<Self> {
        let s = RhoSchedule {
            breakpoints,
            rules,
            cap,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn constant(rho: f64, cap: f64) -> Result<Self> {
        RhoSchedule::new(vec![0.0, 1.0], vec![RhoRule::Constant(rho)], cap)
    }

    /// Constant multipliers starting at the given times, e.g. `[(0.0, 1.5), (0.5, 2.0)]`.
    pub fn piecewise_constant(starts: &[(f64, f64)], cap: f64) -> Result<Self> {
        let mut breakpoints: Vec<f64> = starts.iter().map(|p| p.0).collect();
        breakpoints.push(1.0);
        let rules = starts.iter().map(|p| RhoRule::Constant(p.1)).collect();
        RhoSchedule::new(breakpoints, rules, cap)
    }

    pub fn validate(&self) -> Result<()> {
        let bp = &self.breakpoints;
        if self.rules.is_empty() || bp.len() != self.rules.len() + 1 {
            return Err(Error::input(
                "rho schedule needs one more breakpoint than intervals",
            ));
        }
        if bp[0] != 0.0 || bp[bp.len() - 1] != 1.0 {
            return Err(Error::input(
                "rho schedule must start at t = 0 and end at t = 1",
            ));
        }
        if bp.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::input("rho breakpoints must be strictly increasing"));
        }
        if !(self.cap.is_finite() && self.cap >= 1.0) {
            return Err(Error::input(format!(
                "rho cap must be >= 1, got {}",
                self.cap
            )));
        }
        for (j, r) in self.rules.iter().enumerate() {
            let (lo, hi) = r.range();
            if !(lo >= 1.0 && hi <= self.cap) {
                return Err(Error::input(format!(
                    "rho on interval {j} ranges over [{lo}, {hi}], outside [1, {}]",
                    self.cap
                )));
            }
        }
        Ok(())
    }

    pub fn with_cap(mut self, cap: f64) -> Result<Self> {
        self.cap = cap;
        self.validate()?;
        Ok(self)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn rules(&self) -> &[RhoRule] {
        &self.rules
    }

    pub fn cap(&self) -> f64 {
        self.cap
    }

    pub fn intervals(&self) -> usize {
        self.rules.len()
    }

    /// Index of the interval containing `t` (the last one for `t = 1`).
    pub fn interval_of(&self, t: f64) -> usize {
        let j = self.breakpoints.partition_point(|&b| b <= t);
        j.saturating_sub(1).min(self.rules.len() - 1)
    }

    pub fn is_piecewise_constant(&self) -> bool {
        self.rules.iter().all(|r| matches!(r, RhoRule::Constant(_)))
    }

    /// Constant multiplier active at time `t`, if the schedule has no price dependence there.
    pub fn constant_at(&self, t: f64) -> Option<f64> {
        match &self.rules[self.interval_of(t)] {
            RhoRule::Constant(r) => Some(*r),
            RhoRule::Spot(_) => None,
        }
    }
}

impl RhoSchedule {
    /// `"0:1.5,0.5:2"` means 1.5 on `[0, 0.5)` and 2 on `[0.5, 1]`.
    pub fn parse_with_cap(s: &str, cap: f64) -> Result<Self> {
        let mut starts = Vec::new();
        for item in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let (t, r) = item
                .split_once(':')
                .ok_or_else(|| Error::input(format!("rho item '{item}' must be time:value")))?;
            let parse = |v: &str| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::input(format!("rho item '{item}': bad number '{v}'")))
            };
            starts.push((parse(t)?, parse(r)?));
        }
        RhoSchedule::piecewise_constant(&starts, cap)
    }
}

impl FromStr for RhoSchedule {
    type Err = Error;

    /// Same syntax as [`RhoSchedule::parse_with_cap`] with the default cap of 16.
    fn from_str(s: &str) -> Result<Self> {
        RhoSchedule::parse_with_cap(s, DEFAULT_M_MAX as f64)
    }
}
