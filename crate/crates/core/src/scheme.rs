//! Block-mixing stopping systems and the partition lower-bound checker.
//!
//! To realise a variance multiplier `rho` between consecutive integers the
//! scheme stops after runs of `floor(rho)` steps during the first `lambda`
//! share of every block and after runs of `floor(rho) + 1` steps for the rest,
//! where `lambda floor(rho) + (1 - lambda)(floor(rho) + 1) = rho`. The expected
//! number of interventions per unit time then tends to `g(rho)` times `n`.

use serde::{Deserialize, Serialize};

use crate::dual::{eval_fixed_policy, DualPolicy, DualSolution, DualState, RunChoice};
use crate::error::{Error, Result};
use crate::limit::{g, RhoRule, RhoSchedule};
use crate::market::{BinomialSpec, PayoffSpec};

/// `lambda = 1 + floor(rho) - rho`, the share of short runs.
pub fn mixing_fraction(rho: f64) -> Result<f64> {
    if !(rho.is_finite() && rho >= 1.0) {
        return Err(Error::input(format!("rho must be >= 1, got {rho}")));
    }
    Ok(1.0 + rho.floor() - rho)
}

/// Block layout of one schedule interval on the `n`-step lattice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockPlan {
    pub interval: usize,
    /// Steps `[start, end)` of the lattice covered by the interval.
    pub start: usize,
    pub end: usize,
    pub block_len: usize,
    pub blocks: usize,
    /// Multiplier used for the plan; spot rules are evaluated at `s0`.
    pub rho: f64,
    pub lambda: f64,
    pub short_run: usize,
    /// Share of the interval's steps actually covered by short runs.
    pub realized_lambda: f64,
}

impl BlockPlan {
    /// Block `[b0, b1)` containing step `k` of this interval.
    fn block_of(&self, k: usize) -> (usize, usize) {
        let idx = ((k - self.start) / self.block_len).min(self.blocks - 1);
        let b0 = self.start + idx * self.block_len;
        let b1 = if idx + 1 == self.blocks {
            self.end
        } else {
            b0 + self.block_len
        };
        (b0, b1)
    }

    /// Length of a run starting at step `k` under multiplier `rho`.
    fn run_len(&self, k: usize, rho: f64) -> usize {
        let r = rho.floor() as usize;
        let lambda = 1.0 + rho.floor() - rho;
        let (b0, b1) = self.block_of(k);
        let short_runs = (lambda * (b1 - b0) as f64 / r as f64).ceil() as usize;
        if k - b0 < r * short_runs {
            r
        } else {
            r + 1
        }
    }
}

fn interval_spans(rho: &RhoSchedule, n: usize) -> Vec<(usize, usize)> {
    let bp = rho.breakpoints();
    (0..rho.intervals())
        .map(|j| {
            (
                (n as f64 * bp[j]).floor() as usize,
                (n as f64 * bp[j + 1]).floor() as usize,
            )
        })
        .collect()
}

/// Per-interval block plans; errors when an interval cannot hold one run.
pub fn block_plans(rho: &RhoSchedule, spec: &BinomialSpec) -> Result<Vec<BlockPlan>> {
    spec.validate()?;
    rho.validate()?;
    let n = spec.n;
    let mut plans = Vec::with_capacity(rho.intervals());
    for (j, ((start, end), rule)) in interval_spans(rho, n)
        .into_iter()
        .zip(rho.rules())
        .enumerate()
    {
        let span = end - start;
        let longest = rule.max_value().floor() as usize;
        if span < longest.max(1) {
            return Err(Error::input(format!(
                "interval {j} covers {span} steps at n = {n}, shorter than one run of {} steps",
                longest.max(1)
            )));
        }
        let block_len = ((span as f64).sqrt().ceil() as usize).max(1);
        let blocks = (span / block_len).max(1);
        let r0 = rule.eval(spec.s0);
        let mut plan = BlockPlan {
            interval: j,
            start,
            end,
            block_len,
            blocks,
            rho: r0,
            lambda: 1.0 + r0.floor() - r0,
            short_run: r0.floor() as usize,
            realized_lambda: 0.0,
        };
        plan.realized_lambda = realized_lambda(&plan, n);
        plans.push(plan);
    }
    Ok(plans)
}

/// Walk the runs of a constant-multiplier interval starting at its first step.
fn realized_lambda(plan: &BlockPlan, n: usize) -> f64 {
    let mut k = plan.start;
    let mut short = 0;
    while k < plan.end && k < n {
        let len = plan.run_len(k, plan.rho).min(n - k);
        if len == plan.short_run {
            short += len.min(plan.end - k);
        }
        k += len;
    }
    short as f64 / (plan.end - plan.start) as f64
}

/// Symmetric stopping system realising `rho` on the lattice of `spec`.
///
/// Price-dependent multipliers are read at the price of the current stop, so
/// the result is a Markov policy on the lattice. Runs that would pass the
/// horizon stop at it instead.
pub fn build_scheme(rho: &RhoSchedule, spec: &BinomialSpec) -> Result<DualPolicy> {
    let plans = block_plans(rho, spec)?;
    let n = spec.n;
    let mut owner = vec![0usize; n];
    for p in &plans {
        owner[p.start..p.end]
            .iter_mut()
            .for_each(|o| *o = p.interval);
    }
    let rules = rho.rules();
    Ok(DualPolicy::from_fn(n, |state: DualState| {
        let k = n - state.remaining;
        let j = owner[k];
        let r = match &rules[j] {
            RhoRule::Constant(v) => *v,
            rule => rule.eval(spec.price(state.disp)),
        };
        RunChoice::symmetric(plans[j].run_len(k, r).min(state.remaining))
    }))
}

/// `sum_j (t_{j+1} - t_j) g(rho_j)`, the limiting cost per unit `kappa`.
pub fn scheme_cost_asymptote(rho: &RhoSchedule) -> Result<f64> {
    let bp = rho.breakpoints();
    rho.rules()
        .iter()
        .enumerate()
        .map(|(j, rule)| match rule {
            RhoRule::Constant(r) => Ok((bp[j + 1] - bp[j]) * g(*r)),
            RhoRule::Spot(_) => Err(Error::input(
                "cost asymptote needs a piecewise-constant schedule",
            )),
        })
        .sum()
}

/// Dual value of the block-mixing scheme, an upper bound on the optimal dual value.
pub fn eval_scheme(
    spec: &BinomialSpec,
    payoff: &PayoffSpec,
    rho: &RhoSchedule,
) -> Result<DualSolution> {
    let policy = build_scheme(rho, spec)?;
    eval_fixed_policy(spec, payoff, &policy)
}

/// Grid `0 = t_0 < ... < t_K = 1` with every `n t_k` an integer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeterministicPartition {
    n: usize,
    /// `n t_k` for every grid time.
    ticks: Vec<usize>,
}

impl DeterministicPartition {
    pub fn from_ticks(n: usize, ticks: Vec<usize>) -> Result<Self> {
        let p = DeterministicPartition { n, ticks };
        p.validate()?;
        Ok(p)
    }

    /// Times must be multiples of `1 / n` up to `1e-9`.
    pub fn from_times(n: usize, times: &[f64]) -> Result<Self> {
        let mut ticks = Vec::with_capacity(times.len());
        for &t in times {
            let scaled = t * n as f64;
            let k = scaled.round();
            if !((scaled - k).abs() <= 1e-9 * n.max(1) as f64 && k >= 0.0) {
                return Err(Error::input(format!("time {t} is not a multiple of 1/{n}")));
            }
            ticks.push(k as usize);
        }
        DeterministicPartition::from_ticks(n, ticks)
    }

    /// Repeat the step pattern (in units of `1 / n`) until reaching 1; the last step is cut.
    pub fn from_pattern(n: usize, pattern: &[usize]) -> Result<Self> {
        if pattern.is_empty() || pattern.contains(&0) {
            return Err(Error::input(
                "step pattern must be nonempty with positive steps",
            ));
        }
        let mut ticks = vec![0];
        let mut k = 0;
        for &step in pattern.iter().cycle() {
            if k >= n {
                break;
            }
            k = (k + step).min(n);
            ticks.push(k);
        }
        DeterministicPartition::from_ticks(n, ticks)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::input("partition needs n >= 1"));
        }
        if self.ticks.first() != Some(&0) || self.ticks.last() != Some(&self.n) {
            return Err(Error::input("partition must start at 0 and end at 1"));
        }
        if self.ticks.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::input("partition times must be strictly increasing"));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn ticks(&self) -> &[usize] {
        &self.ticks
    }

    pub fn intervals(&self) -> usize {
        self.ticks.len() - 1
    }

    /// Largest step in units of `1 / n`.
    pub fn max_step(&self) -> usize {
        self.ticks
            .windows(2)
            .map(|w| w[1] - w[0])
            .max()
            .unwrap_or(0)
    }
}

/// Right-continuous step function on `[0, 1]`: `values[i]` on `[breaks[i], breaks[i + 1])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFunction {
    pub breaks: Vec<f64>,
    pub values: Vec<f64>,
}

impl StepFunction {
    pub fn constant(v: f64) -> Self {
        StepFunction {
            breaks: vec![0.0, 1.0],
            values: vec![v],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let b = &self.breaks;
        if self.values.is_empty()
            || b.len() != self.values.len() + 1
            || b[0] != 0.0
            || b[b.len() - 1] != 1.0
        {
            return Err(Error::input(
                "step function needs breaks 0 = b_0 < ... < b_m = 1 and m values",
            ));
        }
        if b.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::input(
                "step function breaks must be strictly increasing",
            ));
        }
        if self.values.iter().any(|v| !(v.is_finite() && *v >= 1.0)) {
            return Err(Error::input("step function values must be >= 1"));
        }
        Ok(())
    }

    /// `int_0^t h(b(s)) ds`.
    fn integral(&self, t: f64, h: impl Fn(f64) -> f64) -> f64 {
        let mut acc = 0.0;
        for (i, &v) in self.values.iter().enumerate() {
            let (lo, hi) = (self.breaks[i], self.breaks[i + 1]);
            if t <= lo {
                break;
            }
            acc += (hi.min(t) - lo) * h(v);
        }
        acc
    }
}

/// Outcome of the partition lower-bound check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionCheck {
    /// Interventions per step, `(K - 1) / n`, with time 0 free.
    pub lhs: f64,
    /// `int 1 / b_n = K / n`.
    pub inv_bn_integral: f64,
    /// `int g(b)`.
    pub rhs: f64,
    pub slack: f64,
    /// `sup_t |int_0^t a_n - int_0^t (b - 1) / 2|`.
    pub hypothesis_gap: f64,
    pub hypothesis_tolerance: f64,
    pub hypothesis_holds: bool,
}

/// `int_0^t a_n` where `a_n(t) = n t_{k+1} - ceil(n t)` on `(t_k, t_{k+1}]`.
fn a_n_integral(part: &DeterministicPartition, t: f64) -> f64 {
    let n = part.n as f64;
    let mut acc = 0.0;
    for w in part.ticks.windows(2) {
        let (k0, k1) = (w[0], w[1]);
        let lo = k0 as f64 / n;
        if t <= lo {
            break;
        }
        // cell i in [k0, k1) carries the value k1 - i - 1
        for i in k0..k1 {
            let c0 = i as f64 / n;
            if t <= c0 {
                break;
            }
            let c1 = ((i + 1) as f64 / n).min(t);
            acc += (c1 - c0) * (k1 - i - 1) as f64;
        }
    }
    acc
}

/// Compare the intervention rate of `part` with `int g(b)`.
///
/// The comparison is only meaningful when `b_n` approaches `b` in the sense
/// that the running integrals of `a_n` and `(b - 1) / 2` agree; this gap is
/// measured at every breakpoint and the check is flagged when it exceeds
/// `2 m / n`, `m` being the largest step.
pub fn partition_lower_bound_check(
    part: &DeterministicPartition,
    b: &StepFunction,
) -> Result<PartitionCheck> {
    part.validate()?;
    b.validate()?;
    let n = part.n as f64;
    let k = part.intervals() as f64;
    let lhs = (k - 1.0) / n;
    let rhs = b.integral(1.0, g);
    let mut points: Vec<f64> = (0..=part.n)
        .map(|i| i as f64 / n)
        .chain(b.breaks.iter().copied())
        .collect();
    points.sort_by(f64::total_cmp);
    let hypothesis_gap = points
        .iter()
        .map(|&t| (a_n_integral(part, t) - b.integral(t, |v| 0.5 * (v - 1.0))).abs())
        .fold(0.0, f64::max);
    let hypothesis_tolerance = 2.0 * part.max_step() as f64 / n;
    Ok(PartitionCheck {
        lhs,
        inv_bn_integral: k / n,
        rhs,
        slack: lhs - rhs,
        hypothesis_gap,
        hypothesis_tolerance,
        hypothesis_holds: hypothesis_gap <= hypothesis_tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn lambda_examples() {
        assert_eq!(mixing_fraction(1.5).unwrap(), 0.5);
        assert_eq!(mixing_fraction(2.0).unwrap(), 1.0);
        assert_eq!(mixing_fraction(2.25).unwrap(), 0.75);
        assert!(mixing_fraction(0.9).is_err());
    }

    #[test]
    fn asymptote_examples() {
        let c = |s: &str| scheme_cost_asymptote(&s.parse().unwrap()).unwrap();
        assert_eq!(c("0:1.5"), 0.75);
        assert_eq!(c("0:1,0.5:2"), 0.75);
        assert_abs_diff_eq!(c("0:3"), 1.0 / 3.0, epsilon = 1e-16);
    }

    #[test]
    fn constant_schemes() {
        let spec = BinomialSpec::new(100.0, 0.2, 64, 0.1).unwrap();
        assert_eq!(
            build_scheme(&"0:1".parse().unwrap(), &spec).unwrap(),
            DualPolicy::finest(64)
        );
        let two = build_scheme(&"0:2".parse().unwrap(), &spec).unwrap();
        assert!(two
            .iter()
            .all(|(s, c)| c == RunChoice::symmetric(2.min(s.remaining))));
        let f = PayoffSpec::call(100.0).unwrap();
        let sol = eval_fixed_policy(&spec, &f, &two).unwrap();
        assert_abs_diff_eq!(sol.expected_interventions, 31.0, epsilon = 1e-9);
    }

    #[test]
    fn short_interval_rejected() {
        let spec = BinomialSpec::new(100.0, 0.2, 8, 0.1).unwrap();
        let rho: RhoSchedule = "0:3,0.9:3".parse().unwrap();
        assert!(build_scheme(&rho, &spec).is_err());
    }

    #[test]
    fn partition_examples() {
        let n = 600;
        let unit = DeterministicPartition::from_pattern(n, &[1]).unwrap();
        let r = partition_lower_bound_check(&unit, &StepFunction::constant(1.0)).unwrap();
        assert_abs_diff_eq!(r.lhs, (n as f64 - 1.0) / n as f64, epsilon = 1e-15);
        assert!(r.hypothesis_holds && r.slack.abs() <= 1.0 / n as f64 + 1e-15);

        let two = DeterministicPartition::from_pattern(n, &[2]).unwrap();
        let r = partition_lower_bound_check(&two, &StepFunction::constant(2.0)).unwrap();
        assert!(r.hypothesis_holds);
        assert_abs_diff_eq!(r.rhs, 0.5, epsilon = 1e-15);
        assert!(r.slack >= -1.0 / n as f64 - 1e-15);

        let alt = DeterministicPartition::from_pattern(n, &[1, 2]).unwrap();
        let r = partition_lower_bound_check(&alt, &StepFunction::constant(1.5)).unwrap();
        assert!(!r.hypothesis_holds, "{r:?}");
        assert_abs_diff_eq!(r.inv_bn_integral, 2.0 / 3.0, epsilon = 1e-12);
        let r = partition_lower_bound_check(&alt, &StepFunction::constant(5.0 / 3.0)).unwrap();
        assert!(r.hypothesis_holds, "{r:?}");
        assert!(r.slack >= -2.0 / n as f64);
    }

    #[test]
    fn bad_partitions() {
        assert!(DeterministicPartition::from_times(4, &[0.0, 0.3, 1.0]).is_err());
        assert!(DeterministicPartition::from_ticks(4, vec![0, 2, 2, 4]).is_err());
        assert!(DeterministicPartition::from_ticks(4, vec![0, 2]).is_err());
    }
}
