//! Binomial market, convex payoff families and the closed-form buy-and-hold bound.
//!
//! The n-step lattice is symmetric: one step multiplies the price by
//! `u = exp(sigma / sqrt(n))` or by `d = 1 / u`. Lattice prices are always
//! recomputed from the integer displacement, `s0 * exp(disp * sigma / sqrt(n))`,
//! never by repeated multiplication. There is no interest rate anywhere.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A real number or `+inf`, kept as an explicit variant rather than a float sentinel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtendedReal {
    Finite(f64),
    Infinite,
}

impl ExtendedReal {
    pub fn finite(self) -> Option<f64> {
        match self {
            ExtendedReal::Finite(v) => Some(v),
            ExtendedReal::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, ExtendedReal::Infinite)
    }
}

impl fmt::Display for ExtendedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedReal::Finite(v) => write!(f, "{v}"),
            ExtendedReal::Infinite => write!(f, "inf"),
        }
    }
}

/// Parameters of the n-period binomial model with fixed cost `kappa` per trade.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinomialSpec {
    pub s0: f64,
    pub sigma: f64,
    pub n: usize,
    pub kappa: f64,
}

impl BinomialSpec {
    pub fn new(s0: f64, sigma: f64, n: usize, kappa: f64) -> Result<Self> {
        let spec = BinomialSpec {
            s0,
            sigma,
            n,
            kappa,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s0.is_finite() && self.s0 > 0.0) {
            return Err(Error::input(format!(
                "s0 must be positive, got {}",
                self.s0
            )));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::input(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        if self.n == 0 {
            return Err(Error::input("n must be at least 1"));
        }
        if !(self.kappa.is_finite() && self.kappa >= 0.0) {
            return Err(Error::input(format!(
                "kappa must be nonnegative, got {}",
                self.kappa
            )));
        }
        Ok(())
    }

    /// Same market with a different per-trade cost.
    pub fn with_kappa(&self, kappa: f64) -> Self {
        BinomialSpec { kappa, ..*self }
    }

    /// Log-price increment of a single step, `sigma / sqrt(n)`.
    pub fn log_step(&self) -> f64 {
        self.sigma / (self.n as f64).sqrt()
    }

    pub fn up(&self) -> f64 {
        self.log_step().exp()
    }

    pub fn down(&self) -> f64 {
        (-self.log_step()).exp()
    }

    /// `u^k` for any integer `k` (negative powers are powers of `d`).
    pub fn up_pow(&self, k: i64) -> f64 {
        (k as f64 * self.log_step()).exp()
    }

    /// Lattice price at net displacement `disp`.
    pub fn price(&self, disp: i64) -> f64 {
        self.s0 * self.up_pow(disp)
    }

    /// One-step martingale probability of an up move, `(1 - d) / (u - d)`.
    pub fn one_step_prob(&self) -> f64 {
        let (u, d) = (self.up(), self.down());
        (1.0 - d) / (u - d)
    }
}

/// A breakpoint of a piecewise-linear payoff: `slope` applies on `[x, next x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Knot {
    pub x: f64,
    pub slope: f64,
}

/// Convex payoff families with exact `f(0)` and `f'(inf)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PayoffSpec {
    Call {
        strike: f64,
    },
    Put {
        strike: f64,
    },
    Straddle {
        strike: f64,
    },
    /// `f(s) = f0 + integral of the slope function`, first knot at 0, slopes nondecreasing.
    PiecewiseLinear {
        f0: f64,
        knots: Vec<Knot>,
    },
    /// `s^p` up to `cap`, continued along its tangent beyond `cap`; no cap means pure power.
    PowerCapped {
        exponent: f64,
        cap: Option<f64>,
    },
}

impl PayoffSpec {
    pub fn call(strike: f64) -> Result<Self> {
        Self::checked(PayoffSpec::Call { strike })
    }

    pub fn put(strike: f64) -> Result<Self> {
        Self::checked(PayoffSpec::Put { strike })
    }

    pub fn straddle(strike: f64) -> Result<Self> {
        Self::checked(PayoffSpec::Straddle { strike })
    }

    pub fn piecewise_linear(f0: f64, knots: Vec<Knot>) -> Result<Self> {
        Self::checked(PayoffSpec::PiecewiseLinear { f0, knots })
    }

    pub fn power_capped(exponent: f64, cap: Option<f64>) -> Result<Self> {
        Self::checked(PayoffSpec::PowerCapped { exponent, cap })
    }

    /// `f(s) = intercept + slope * s`.
    pub fn affine(intercept: f64, slope: f64) -> Result<Self> {
        Self::piecewise_linear(intercept, vec![Knot { x: 0.0, slope }])
    }

    fn checked(p: PayoffSpec) -> Result<Self> {
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::input(format!("{name} must be positive, got {v}")))
            }
        };
        match self {
            PayoffSpec::Call { strike }
            | PayoffSpec::Put { strike }
            | PayoffSpec::Straddle { strike } => positive("strike", *strike),
            PayoffSpec::PiecewiseLinear { f0, knots } => {
                if !(f0.is_finite() && *f0 >= 0.0) {
                    return Err(Error::input(format!("f0 must be nonnegative, got {f0}")));
                }
                let first = knots.first().ok_or_else(|| {
                    Error::input("piecewise-linear payoff needs at least one knot")
                })?;
                if first.x != 0.0 {
                    return Err(Error::input(
                        "first piecewise-linear knot must sit at x = 0",
                    ));
                }
                for k in knots {
                    if !(k.x.is_finite() && k.slope.is_finite()) {
                        return Err(Error::input("knots must be finite"));
                    }
                }
                for w in knots.windows(2) {
                    if w[1].x <= w[0].x {
                        return Err(Error::input("knot positions must be strictly increasing"));
                    }
                    if w[1].slope < w[0].slope {
                        return Err(Error::input("slopes must be nondecreasing (convexity)"));
                    }
                }
                if knots.last().map(|k| k.slope).unwrap_or(0.0) < 0.0 {
                    return Err(Error::input("final slope must be nonnegative"));
                }
                // convex + nonnegative final slope: the minimum sits at a knot
                if knots.iter().any(|k| self.eval(k.x) < -1e-12) {
                    return Err(Error::input("piecewise-linear payoff must be nonnegative"));
                }
                Ok(())
            }
            PayoffSpec::PowerCapped { exponent, cap } => {
                if !(exponent.is_finite() && *exponent >= 1.0) {
                    return Err(Error::input(format!(
                        "power exponent must be >= 1, got {exponent}"
                    )));
                }
                if let Some(c) = cap {
                    positive("cap", *c)?;
                }
                Ok(())
            }
        }
    }

    pub fn eval(&self, s: f64) -> f64 {
        match self {
            PayoffSpec::Call { strike } => (s - strike).max(0.0),
            PayoffSpec::Put { strike } => (strike - s).max(0.0),
            PayoffSpec::Straddle { strike } => (s - strike).abs(),
            PayoffSpec::PiecewiseLinear { f0, knots } => {
                let mut v = *f0;
                for (i, k) in knots.iter().enumerate() {
                    if s <= k.x {
                        break;
                    }
                    let right = knots.get(i + 1).map(|nk| nk.x.min(s)).unwrap_or(s);
                    v += k.slope * (right - k.x);
                }
                v
            }
            PayoffSpec::PowerCapped { exponent, cap } => match cap {
                Some(c) if s > *c => {
                    c.powf(*exponent) + exponent * c.powf(exponent - 1.0) * (s - c)
                }
                _ => s.max(0.0).powf(*exponent),
            },
        }
    }

    pub fn f_at_zero(&self) -> f64 {
        self.eval(0.0)
    }

    /// `f'(inf)`, the supremum of the right derivative.
    pub fn slope_at_infinity(&self) -> ExtendedReal {
        match self {
            PayoffSpec::Call { .. } | PayoffSpec::Straddle { .. } => ExtendedReal::Finite(1.0),
            PayoffSpec::Put { .. } => ExtendedReal::Finite(0.0),
            PayoffSpec::PiecewiseLinear { knots, .. } => {
                ExtendedReal::Finite(knots.last().map(|k| k.slope).unwrap_or(0.0))
            }
            PayoffSpec::PowerCapped { exponent, cap } => match cap {
                Some(c) => ExtendedReal::Finite(exponent * c.powf(exponent - 1.0)),
                None if *exponent == 1.0 => ExtendedReal::Finite(1.0),
                None => ExtendedReal::Infinite,
            },
        }
    }

    /// True when `f` is affine on `[0, inf)`.
    pub fn is_affine(&self) -> bool {
        match self {
            PayoffSpec::PiecewiseLinear { knots, .. } => {
                knots.windows(2).all(|w| w[0].slope == w[1].slope)
            }
            PayoffSpec::PowerCapped { exponent, .. } => *exponent == 1.0,
            _ => false,
        }
    }
}

impl fmt::Display for PayoffSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PayoffSpec::Call { strike } => write!(f, "call:{strike}"),
            PayoffSpec::Put { strike } => write!(f, "put:{strike}"),
            PayoffSpec::Straddle { strike } => write!(f, "straddle:{strike}"),
            PayoffSpec::PiecewiseLinear { f0, knots } => {
                write!(f, "pwl:")?;
                if *f0 != 0.0 {
                    write!(f, "f0={f0};")?;
                }
                let parts: Vec<String> = knots
                    .iter()
                    .map(|k| format!("{},{}", k.x, k.slope))
                    .collect();
                write!(f, "{}", parts.join(";"))
            }
            PayoffSpec::PowerCapped { exponent, cap } => match cap {
                Some(c) => write!(f, "power:{exponent},{c}"),
                None => write!(f, "power:{exponent}"),
            },
        }
    }
}

impl FromStr for PayoffSpec {
    type Err = Error;

    /// Accepts `call:K`, `put:K`, `straddle:K`, `pwl:[f0=V;]x0,s0;x1,s1;...`,
    /// `power:p` and `power:p,cap`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| Error::input(format!("payoff '{s}' must look like kind:params")))?;
        let num = |t: &str| -> Result<f64> {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::input(format!("payoff '{s}': cannot parse number '{t}'")))
        };
        match kind.trim() {
            "call" => PayoffSpec::call(num(rest)?),
            "put" => PayoffSpec::put(num(rest)?),
            "straddle" => PayoffSpec::straddle(num(rest)?),
            "pwl" => {
                let mut f0 = 0.0;
                let mut knots = Vec::new();
                for item in rest.split(';').map(str::trim).filter(|t| !t.is_empty()) {
                    if let Some(v) = item.strip_prefix("f0=") {
                        f0 = num(v)?;
                        continue;
                    }
                    let (x, slope) = item.split_once(',').ok_or_else(|| {
                        Error::input(format!("payoff '{s}': knot '{item}' must be x,slope"))
                    })?;
                    knots.push(Knot {
                        x: num(x)?,
                        slope: num(slope)?,
                    });
                }
                PayoffSpec::piecewise_linear(f0, knots)
            }
            "power" => {
                let mut it = rest.split(',');
                let p = num(it.next().unwrap_or(""))?;
                let cap = it.next().map(num).transpose()?;
                if it.next().is_some() {
                    return Err(Error::input(format!(
                        "payoff '{s}': too many power parameters"
                    )));
                }
                PayoffSpec::power_capped(p, cap)
            }
            other => Err(Error::input(format!("unknown payoff kind '{other}'"))),
        }
    }
}

/// A binomial scenario: the sequence of +1/-1 steps.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PathWord {
    steps: Vec<i8>,
}

impl PathWord {
    pub fn new(steps: Vec<i8>) -> Result<Self> {
        if steps.iter().any(|&z| z != 1 && z != -1) {
            return Err(Error::input("path steps must be +1 or -1"));
        }
        Ok(PathWord { steps })
    }

    /// Path `index` among the `2^n` words; bit `i` set means step `i` goes up.
    pub fn from_bits(index: u64, n: usize) -> Self {
        let steps = (0..n)
            .map(|i| if (index >> i) & 1 == 1 { 1 } else { -1 })
            .collect();
        PathWord { steps }
    }

    pub fn steps(&self) -> &[i8] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn displacement(&self) -> i64 {
        self.steps.iter().map(|&z| z as i64).sum()
    }
}

impl fmt::Display for PathWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &z in &self.steps {
            f.write_str(if z > 0 { "+" } else { "-" })?;
        }
        Ok(())
    }
}

impl FromStr for PathWord {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let steps = s
            .chars()
            .map(|c| match c {
                '+' => Ok(1),
                '-' => Ok(-1),
                other => Err(Error::input(format!(
                    "path word: unexpected character '{other}'"
                ))),
            })
            .collect::<Result<Vec<i8>>>()?;
        PathWord::new(steps)
    }
}

pub fn terminal_price(spec: &BinomialSpec, path: &PathWord) -> Result<f64> {
    if path.len() != spec.n {
        return Err(Error::input(format!(
            "path has {} steps but the model has n = {}",
            path.len(),
            spec.n
        )));
    }
    Ok(spec.price(path.displacement()))
}

/// Frictionless binomial price of `f(S_1)` under the one-step martingale measure.
pub fn crr_price(spec: &BinomialSpec, payoff: &PayoffSpec) -> f64 {
    let n = spec.n;
    let p = spec.one_step_prob();
    // values[i] holds the node with i up moves at the current layer
    let mut values: Vec<f64> = (0..=n)
        .map(|i| payoff.eval(spec.price(2 * i as i64 - n as i64)))
        .collect();
    for layer in (0..n).rev() {
        for i in 0..=layer {
            values[i] = p * values[i + 1] + (1.0 - p) * values[i];
        }
    }
    values[0]
}

/// Cost of the buy-and-hold super-hedge, `f(0) + s0 * f'(inf)`.
pub fn buy_and_hold_bound(s0: f64, payoff: &PayoffSpec) -> ExtendedReal {
    match payoff.slope_at_infinity() {
        ExtendedReal::Finite(slope) => ExtendedReal::Finite(payoff.f_at_zero() + s0 * slope),
        ExtendedReal::Infinite => ExtendedReal::Infinite,
    }
}
