//! Exact dual pricing over monotone-run stopping systems.
//!
//! A stopping system is encoded as a Markov policy: at a stop with `remaining`
//! steps to the horizon and net displacement `disp`, the next stop is reached
//! after `a` consecutive up moves or `b` consecutive down moves. Under the
//! induced measure the stopped price is a two-point martingale, so the up
//! probability is `(1 - d^b) / (u^a - d^b)`. Reaching the horizon is free, every
//! other stop costs `kappa`.
//!
//! [`solve_dual`] minimises `E[f(S_1) + kappa * N]` over all such policies by
//! backward induction on `(remaining, disp)`: O(n^2) states, O(j^2) actions at a
//! state with `j` steps left.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{BinomialSpec, PayoffSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DualState {
    pub remaining: usize,
    pub disp: i64,
}

impl DualState {
    pub fn root(n: usize) -> Self {
        DualState {
            remaining: n,
            disp: 0,
        }
    }

    pub fn is_terminal(&self) -> bool {
        self.remaining == 0
    }

    /// Next stop after an up-run of length `a`.
    pub fn up(&self, a: usize) -> Self {
        DualState {
            remaining: self.remaining - a,
            disp: self.disp + a as i64,
        }
    }

    /// Next stop after a down-run of length `b`.
    pub fn down(&self, b: usize) -> Self {
        DualState {
            remaining: self.remaining - b,
            disp: self.disp - b as i64,
        }
    }
}

impl std::fmt::Display for DualState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(remaining={}, disp={})", self.remaining, self.disp)
    }
}

/// Up-run length `a` and down-run length `b` to the next stop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RunChoice {
    pub a: usize,
    pub b: usize,
}

impl RunChoice {
    pub const FINEST: RunChoice = RunChoice { a: 1, b: 1 };

    pub fn symmetric(len: usize) -> Self {
        RunChoice { a: len, b: len }
    }
}

/// Flat record used for the JSON policy export.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyRecord {
    pub remaining: usize,
    pub disp: i64,
    pub a: usize,
    pub b: usize,
}

/// Run choices keyed by lattice state; a stopping system in Markov form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DualPolicy {
    n: usize,
    // layers[remaining][(disp + n - remaining) / 2]
    layers: Vec<Vec<Option<RunChoice>>>,
}

pub(crate) fn slot(n: usize, state: DualState) -> Option<usize> {
    if state.remaining > n {
        return None;
    }
    let k = (n - state.remaining) as i64;
    if state.disp.abs() > k || (state.disp + k) % 2 != 0 {
        return None;
    }
    Some(((state.disp + k) / 2) as usize)
}

pub(crate) fn state_at(n: usize, remaining: usize, idx: usize) -> DualState {
    let k = (n - remaining) as i64;
    DualState {
        remaining,
        disp: 2 * idx as i64 - k,
    }
}

impl DualPolicy {
    pub fn empty(n: usize) -> Self {
        let layers = (0..=n).map(|r| vec![None; n - r + 1]).collect();
        DualPolicy { n, layers }
    }

    /// Policy defined at every non-terminal lattice state by `rule`.
    pub fn from_fn(n: usize, mut rule: impl FnMut(DualState) -> RunChoice) -> Self {
        let mut p = DualPolicy::empty(n);
        for remaining in 1..=n {
            for idx in 0..=(n - remaining) {
                p.layers[remaining][idx] = Some(rule(state_at(n, remaining, idx)));
            }
        }
        p
    }

    /// Stop after every single step.
    pub fn finest(n: usize) -> Self {
        DualPolicy::from_fn(n, |_| RunChoice::FINEST)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, state: DualState) -> Option<RunChoice> {
        slot(self.n, state).and_then(|i| self.layers[state.remaining][i])
    }

    pub fn set(&mut self, state: DualState, choice: RunChoice) -> Result<()> {
        if state.is_terminal() {
            return Err(Error::input(format!(
                "cannot assign a run choice to terminal state {state}"
            )));
        }
        let i = slot(self.n, state).ok_or_else(|| {
            Error::input(format!(
                "state {state} is not on the n = {} lattice",
                self.n
            ))
        })?;
        self.layers[state.remaining][i] = Some(choice);
        Ok(())
    }

    /// All assigned `(state, choice)` pairs, ordered by decreasing `remaining` then `disp`.
    pub fn iter(&self) -> impl Iterator<Item = (DualState, RunChoice)> + '_ {
        (1..=self.n).rev().flat_map(move |r| {
            self.layers[r]
                .iter()
                .enumerate()
                .filter_map(move |(i, c)| c.map(|c| (state_at(self.n, r, i), c)))
        })
    }

    pub fn to_records(&self) -> Vec<PolicyRecord> {
        self.iter()
            .map(|(s, c)| PolicyRecord {
                remaining: s.remaining,
                disp: s.disp,
                a: c.a,
                b: c.b,
            })
            .collect()
    }

    pub fn from_records(n: usize, records: &[PolicyRecord]) -> Result<Self> {
        let mut p = DualPolicy::empty(n);
        for r in records {
            p.set(
                DualState {
                    remaining: r.remaining,
                    disp: r.disp,
                },
                RunChoice { a: r.a, b: r.b },
            )?;
        }
        Ok(p)
    }

    /// States visited with positive probability from the root, by layer.
    pub fn reachable(&self) -> Result<Vec<DualState>> {
        let n = self.n;
        let mut seen: Vec<Vec<bool>> = (0..=n).map(|r| vec![false; n - r + 1]).collect();
        seen[n][0] = true;
        let mut out = Vec::new();
        for remaining in (1..=n).rev() {
            for idx in 0..=(n - remaining) {
                if !seen[remaining][idx] {
                    continue;
                }
                let state = state_at(n, remaining, idx);
                let c = self.checked_choice(state)?;
                seen[remaining - c.a][idx + c.a] = true;
                seen[remaining - c.b][idx] = true;
                out.push(state);
            }
        }
        Ok(out)
    }

    fn checked_choice(&self, state: DualState) -> Result<RunChoice> {
        let c = self
            .get(state)
            .ok_or_else(|| Error::input(format!("policy has no run choice for state {state}")))?;
        if c.a == 0 || c.b == 0 || c.a > state.remaining || c.b > state.remaining {
            return Err(Error::input(format!(
                "run choice (a={}, b={}) at state {state} must satisfy 1 <= a, b <= remaining",
                c.a, c.b
            )));
        }
        Ok(c)
    }
}

/// Powers of the lattice factors, each computed directly from `sigma / sqrt(n)`.
#[derive(Debug, Clone)]
pub(crate) struct Lattice {
    pub spec: BinomialSpec,
    pub upow: Vec<f64>,
    pub dpow: Vec<f64>,
}

impl Lattice {
    pub fn new(spec: &BinomialSpec) -> Self {
        let upow = (0..=spec.n as i64).map(|k| spec.up_pow(k)).collect();
        let dpow = (0..=spec.n as i64).map(|k| spec.up_pow(-k)).collect();
        Lattice {
            spec: *spec,
            upow,
            dpow,
        }
    }

    pub fn prob(&self, c: RunChoice) -> f64 {
        let db = self.dpow[c.b];
        (1.0 - db) / (self.upow[c.a] - db)
    }

    pub fn terminal_layer(&self, payoff: &PayoffSpec) -> Vec<f64> {
        let n = self.spec.n as i64;
        (0..=n)
            .map(|i| payoff.eval(self.spec.price(2 * i - n)))
            .collect()
    }
}

/// The unique `p` with `p * u^a + (1 - p) * d^b = 1`.
pub fn martingale_prob(spec: &BinomialSpec, choice: RunChoice) -> f64 {
    let db = spec.up_pow(-(choice.b as i64));
    (1.0 - db) / (spec.up_pow(choice.a as i64) - db)
}

/// Value of a stopping system and its split into payoff and cost.
#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub value: f64,
    pub payoff_part: f64,
    pub cost_part: f64,
    pub expected_interventions: f64,
    pub policy: DualPolicy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueReport {
    pub value: f64,
    pub payoff_part: f64,
    pub cost_part: f64,
    pub expected_interventions: f64,
}

impl DualSolution {
    pub fn report(&self) -> ValueReport {
        ValueReport {
            value: self.value,
            payoff_part: self.payoff_part,
            cost_part: self.cost_part,
            expected_interventions: self.expected_interventions,
        }
    }
}

fn better(candidate: f64, best: f64) -> bool {
    // candidates arrive in preference order; only a clear improvement displaces the incumbent
    !best.is_finite() || candidate < best - 1e-13 * best.abs().max(1.0)
}

/// Minimal dual value `inf_T E_Q(T)[f(S_1) + kappa * N(T)]` with its argmin policy.
///
/// `run_cap` limits both run lengths; `None` (or a cap of at least `n`) searches
/// every policy. Among equal values the choice with the smallest `(a + b, a)` wins.
pub fn solve_dual(
    spec: &BinomialSpec,
    payoff: &PayoffSpec,
    run_cap: Option<usize>,
) -> Result<DualSolution> {
    spec.validate()?;
    payoff.validate()?;
    if run_cap == Some(0) {
        return Err(Error::input("run_cap must be at least 1"));
    }
    let n = spec.n;
    let cap = run_cap.unwrap_or(n).min(n);
    let kappa = spec.kappa;
    let lat = Lattice::new(spec);

    // w[j][i]: value at the stop with j steps left and i up moves so far
    let mut w: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    w.push(lat.terminal_layer(payoff));
    let mut policy = DualPolicy::empty(n);

    for j in 1..=n {
        let k = n - j;
        let jcap = cap.min(j);
        let layer: Vec<(f64, RunChoice)> = (0..=k)
            .into_par_iter()
            .map(|i| {
                let mut best = f64::INFINITY;
                let mut arg = RunChoice::FINEST;
                for total in 2..=2 * jcap {
                    let lo = total.saturating_sub(jcap).max(1);
                    let hi = jcap.min(total - 1);
                    for a in lo..=hi {
                        let b = total - a;
                        let c = RunChoice { a, b };
                        let p = lat.prob(c);
                        let up = w[j - a][i + a] + if a < j { kappa } else { 0.0 };
                        let down = w[j - b][i] + if b < j { kappa } else { 0.0 };
                        let v = p * up + (1.0 - p) * down;
                        if better(v, best) {
                            best = v;
                            arg = c;
                        }
                    }
                }
                (best, arg)
            })
            .collect();
        let mut values = Vec::with_capacity(k + 1);
        for (i, (v, c)) in layer.into_iter().enumerate() {
            values.push(v);
            policy.layers[j][i] = Some(c);
        }
        w.push(values);
    }

    let value = w[n][0];
    let eval = eval_fixed_policy(spec, payoff, &policy)?;
    Ok(DualSolution { value, ..eval })
}

/// Value, payoff part and expected intervention count of a given policy.
pub fn eval_fixed_policy(
    spec: &BinomialSpec,
    payoff: &PayoffSpec,
    policy: &DualPolicy,
) -> Result<DualSolution> {
    spec.validate()?;
    payoff.validate()?;
    let n = spec.n;
    if policy.n() != n {
        return Err(Error::input(format!(
            "policy is for n = {} but the model has n = {n}",
            policy.n()
        )));
    }
    let reachable = policy.reachable()?;
    let mut active: Vec<Vec<bool>> = (0..=n).map(|r| vec![false; n - r + 1]).collect();
    for s in &reachable {
        active[s.remaining][slot(n, *s).expect("reachable states lie on the lattice")] = true;
    }

    let lat = Lattice::new(spec);
    let kappa = spec.kappa;
    // (value, payoff part, expected interventions)
    let mut layers: Vec<Vec<(f64, f64, f64)>> = Vec::with_capacity(n + 1);
    layers.push(
        lat.terminal_layer(payoff)
            .into_iter()
            .map(|f| (f, f, 0.0))
            .collect(),
    );
    for j in 1..=n {
        let k = n - j;
        let layer: Vec<(f64, f64, f64)> = (0..=k)
            .into_par_iter()
            .map(|i| {
                if !active[j][i] {
                    return (f64::NAN, f64::NAN, f64::NAN);
                }
                let c = policy.layers[j][i].expect("reachable states carry a choice");
                let p = lat.prob(c);
                let (uv, up_pay, un) = layers[j - c.a][i + c.a];
                let (dv, dn_pay, dn) = layers[j - c.b][i];
                let (ui, di) = ((c.a < j) as u8 as f64, (c.b < j) as u8 as f64);
                (
                    p * (uv + kappa * ui) + (1.0 - p) * (dv + kappa * di),
                    p * up_pay + (1.0 - p) * dn_pay,
                    p * (un + ui) + (1.0 - p) * (dn + di),
                )
            })
            .collect();
        layers.push(layer);
    }
    let (value, payoff_part, count) = layers[n][0];
    Ok(DualSolution {
        value,
        payoff_part,
        cost_part: kappa * count,
        expected_interventions: count,
        policy: policy.clone(),
    })
}

/// Splits every run longer than one step into unit steps.
///
/// Each stop of `policy` remains a stop of the result, so the result refines
/// `policy`; splitting every run everywhere leaves the one-step system.
pub fn refine_policy(policy: &DualPolicy, spec: &BinomialSpec) -> DualPolicy {
    debug_assert_eq!(policy.n(), spec.n);
    let mut refined = policy.clone();
    for remaining in 1..=policy.n {
        for c in refined.layers[remaining].iter_mut() {
            *c = Some(RunChoice::FINEST);
        }
    }
    refined
}
