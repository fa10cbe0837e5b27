//! Explicit super-hedges for dual policies.
//!
//! A policy's stopped price process is a complete two-point market, so each stop
//! carries the replicating holding `delta` over the span to the next stop. In
//! the original binomial market the strategy rebalances when the price first
//! moves `a` lattice steps up or `b` steps down from the last stop, and simply
//! holds to the horizon when neither level is reached. Convexity of the payoff
//! makes the held position dominate the claim on those paths.
//!
//! Gains are bounded on a finite tree, so admissibility holds automatically.

mod primal;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use primal::{brute_force_primal, PrimalSolution};

use crate::dual::{slot, solve_dual, DualPolicy, DualState, Lattice, RunChoice};
use crate::error::{Error, Result};
use crate::market::{BinomialSpec, PathWord, PayoffSpec};

/// Where a run from a stop ends: another stop, or the horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Child {
    Node(DualState),
    Terminal { price: f64, payoff: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StopNode {
    pub state: DualState,
    pub price: f64,
    pub choice: RunChoice,
    /// Capital required at this stop after paying for the intervention.
    pub value: f64,
    /// Holding over the span to the next stop.
    pub delta: f64,
    pub up: Child,
    pub down: Child,
    /// Child values plus the fee due on arrival.
    pub up_target: f64,
    pub down_target: f64,
}

#[derive(Debug, Clone)]
pub struct ReplicationTree {
    n: usize,
    kappa: f64,
    nodes: Vec<Vec<Option<StopNode>>>,
}

impl ReplicationTree {
    pub fn root(&self) -> &StopNode {
        self.node(DualState::root(self.n))
            .expect("root node exists")
    }

    pub fn node(&self, state: DualState) -> Option<&StopNode> {
        slot(self.n, state).and_then(|i| self.nodes.get(state.remaining)?.get(i)?.as_ref())
    }

    pub fn nodes(&self) -> impl Iterator<Item = &StopNode> {
        self.nodes.iter().rev().flatten().flatten()
    }

    /// `E_Q[sum of delta * price increments]` over the stopped tree; zero for a martingale.
    pub fn q_expected_gains(&self, spec: &BinomialSpec) -> f64 {
        let lat = Lattice::new(spec);
        let mut memo: std::collections::HashMap<DualState, f64> = Default::default();
        for node in self.nodes.iter().flatten().flatten() {
            let p = lat.prob(node.choice);
            let next = |c: &Child, memo: &std::collections::HashMap<DualState, f64>| match c {
                Child::Node(s) => memo[s],
                Child::Terminal { .. } => 0.0,
            };
            let s_up = node.price * lat.upow[node.choice.a];
            let s_dn = node.price * lat.dpow[node.choice.b];
            let e = p * (node.delta * (s_up - node.price) + next(&node.up, &memo))
                + (1.0 - p) * (node.delta * (s_dn - node.price) + next(&node.down, &memo));
            memo.insert(node.state, e);
        }
        memo[&DualState::root(self.n)]
    }
}

/// Builds replication deltas for every stop reachable under `policy`.
pub fn build_replication(
    spec: &BinomialSpec,
    payoff: &PayoffSpec,
    policy: &DualPolicy,
) -> Result<ReplicationTree> {
    spec.validate()?;
    let n = spec.n;
    if policy.n() != n {
        return Err(Error::input(format!(
            "policy is for n = {} but the model has n = {n}",
            policy.n()
        )));
    }
    let reachable = policy.reachable()?;
    let lat = Lattice::new(spec);
    let kappa = spec.kappa;
    let mut nodes: Vec<Vec<Option<StopNode>>> = (0..=n).map(|r| vec![None; n - r + 1]).collect();

    // reachable is ordered by decreasing remaining; children always come later
    for &state in reachable.iter().rev() {
        let choice = policy.get(state).expect("reachable states carry a choice");
        let price = spec.price(state.disp);
        let child = |next: DualState| -> (Child, f64) {
            if next.is_terminal() {
                let s = spec.price(next.disp);
                let f = payoff.eval(s);
                (
                    Child::Terminal {
                        price: s,
                        payoff: f,
                    },
                    f,
                )
            } else {
                let v = nodes[next.remaining][slot(n, next).unwrap()]
                    .as_ref()
                    .expect("child computed before parent")
                    .value;
                (Child::Node(next), v + kappa)
            }
        };
        let (up, up_target) = child(state.up(choice.a));
        let (down, down_target) = child(state.down(choice.b));
        let p = lat.prob(choice);
        let s_up = price * lat.upow[choice.a];
        let s_dn = price * lat.dpow[choice.b];
        let node = StopNode {
            state,
            price,
            choice,
            value: p * up_target + (1.0 - p) * down_target,
            delta: (up_target - down_target) / (s_up - s_dn),
            up,
            down,
            up_target,
            down_target,
        };
        nodes[state.remaining][slot(n, state).unwrap()] = Some(node);
    }
    Ok(ReplicationTree { n, kappa, nodes })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intervention {
    pub time: usize,
    pub holding: f64,
}

/// Trading record of the level-passage strategy along one path.
#[derive(Debug, Clone, PartialEq)]
pub struct HedgeLedger {
    pub path: PathWord,
    pub interventions: Vec<Intervention>,
    pub gains: f64,
    pub surplus: f64,
}

impl HedgeLedger {
    /// Interventions after time 0, each charged `kappa`.
    pub fn charged_interventions(&self) -> usize {
        self.interventions.len().saturating_sub(1)
    }

    /// Gains rebuilt from the intervention list alone.
    pub fn recompute_gains(&self, spec: &BinomialSpec) -> f64 {
        let mut disp_at = vec![0i64; self.path.len() + 1];
        for (t, &z) in self.path.steps().iter().enumerate() {
            disp_at[t + 1] = disp_at[t] + z as i64;
        }
        let n = self.path.len();
        let mut g = 0.0;
        for (i, iv) in self.interventions.iter().enumerate() {
            let end = self.interventions.get(i + 1).map(|nx| nx.time).unwrap_or(n);
            g += iv.holding * (spec.price(disp_at[end]) - spec.price(disp_at[iv.time]));
        }
        g - spec.kappa * self.charged_interventions() as f64
    }
}

struct Outcome {
    gains: f64,
    terminal_disp: i64,
}

fn simulate(
    spec: &BinomialSpec,
    tree: &ReplicationTree,
    steps: impl Iterator<Item = i8>,
    mut record: Option<&mut Vec<Intervention>>,
) -> Outcome {
    let root = tree.root();
    let mut node = Some(root);
    let mut holding = root.delta;
    if let Some(r) = record.as_deref_mut() {
        r.push(Intervention { time: 0, holding });
    }
    let mut anchor = 0i64;
    let mut disp = 0i64;
    let mut prev_price = spec.s0;
    let mut trading = 0.0;
    let mut charges = 0usize;
    for (t, z) in steps.enumerate() {
        disp += z as i64;
        let price = spec.price(disp);
        trading += holding * (price - prev_price);
        prev_price = price;
        let Some(cur) = node else { continue };
        let moved = disp - anchor;
        let next = if moved == cur.choice.a as i64 {
            Some(cur.up)
        } else if moved == -(cur.choice.b as i64) {
            Some(cur.down)
        } else {
            None
        };
        match next {
            None => {}
            Some(Child::Terminal { .. }) => node = None,
            Some(Child::Node(state)) => {
                // a level passage takes at least as many steps as its run length
                debug_assert!(state.remaining >= spec.n - t - 1);
                let nn = tree.node(state).expect("child stop exists");
                charges += 1;
                holding = nn.delta;
                anchor = disp;
                node = Some(nn);
                if let Some(r) = record.as_deref_mut() {
                    r.push(Intervention {
                        time: t + 1,
                        holding,
                    });
                }
            }
        }
    }
    Outcome {
        gains: trading - tree.kappa * charges as f64,
        terminal_disp: disp,
    }
}

/// Runs the truncated level-passage strategy with initial capital `x` along `path`.
pub fn run_hedge_on_path(
    spec: &BinomialSpec,
    payoff: &PayoffSpec,
    tree: &ReplicationTree,
    path: &PathWord,
    x: f64,
) -> Result<HedgeLedger> {
    if path.len() != spec.n || tree.n != spec.n {
        return Err(Error::input(format!(
            "path length {} does not match n = {}",
            path.len(),
            spec.n
        )));
    }
    let mut interventions = Vec::new();
    let out = simulate(
        spec,
        tree,
        path.steps().iter().copied(),
        Some(&mut interventions),
    );
    let surplus = x + out.gains - payoff.eval(spec.price(out.terminal_disp));
    Ok(HedgeLedger {
        path: path.clone(),
        interventions,
        gains: out.gains,
        surplus,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerifyMode {
    /// All `2^n` paths; requires `n <= 22`.
    Exhaustive,
    /// `count` paths drawn under the fair-coin measure; path `i` uses its own stream.
    Sampled { count: u64, seed: u64 },
}

pub const MAX_EXHAUSTIVE_N: usize = 22;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub min_surplus: f64,
    pub worst_path: String,
    pub paths_checked: u64,
}

fn sampled_path(n: usize, seed: u64, index: u64) -> Vec<i8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    (0..n)
        .map(|_| if rng.random::<bool>() { 1 } else { -1 })
        .collect()
}

/// Checks `x + gains >= f(S_1)` for the optimal dual policy's hedge.
pub fn verify_superreplication(
    spec: &BinomialSpec,
    payoff: &PayoffSpec,
    x: f64,
    mode: VerifyMode,
) -> Result<VerifyReport> {
    if mode == VerifyMode::Exhaustive && spec.n > MAX_EXHAUSTIVE_N {
        return Err(Error::input(format!(
            "exhaustive verification needs n <= {MAX_EXHAUSTIVE_N} (got {}); use sampled mode",
            spec.n
        )));
    }
    let sol = solve_dual(spec, payoff, None)?;
    verify_policy(spec, payoff, &sol.policy, x, mode)
}

/// Same check for an arbitrary policy's hedge.
pub fn verify_policy(
    spec: &BinomialSpec,
    payoff: &PayoffSpec,
    policy: &DualPolicy,
    x: f64,
    mode: VerifyMode,
) -> Result<VerifyReport> {
    let n = spec.n;
    let tree = build_replication(spec, payoff, policy)?;
    let surplus_of = |steps: &[i8]| {
        let out = simulate(spec, &tree, steps.iter().copied(), None);
        x + out.gains - payoff.eval(spec.price(out.terminal_disp))
    };
    // ties go to the smaller index so the report does not depend on scheduling
    let pick = |l: (f64, u64), r: (f64, u64)| {
        if r.0 < l.0 || (r.0 == l.0 && r.1 < l.1) {
            r
        } else {
            l
        }
    };
    let (min_surplus, count, worst_steps) = match mode {
        VerifyMode::Exhaustive => {
            if n > MAX_EXHAUSTIVE_N {
                return Err(Error::input(format!(
                    "exhaustive verification needs n <= {MAX_EXHAUSTIVE_N} (got {n}); use sampled mode"
                )));
            }
            let total = 1u64 << n;
            let (m, idx) = (0..total)
                .into_par_iter()
                .map(|bits| {
                    let steps: Vec<i8> = PathWord::from_bits(bits, n).steps().to_vec();
                    (surplus_of(&steps), bits)
                })
                .reduce(|| (f64::INFINITY, u64::MAX), pick);
            (m, total, PathWord::from_bits(idx, n).steps().to_vec())
        }
        VerifyMode::Sampled { count, seed } => {
            if count == 0 {
                return Err(Error::input("sampled verification needs at least one path"));
            }
            let (m, idx) = (0..count)
                .into_par_iter()
                .map(|i| (surplus_of(&sampled_path(n, seed, i)), i))
                .reduce(|| (f64::INFINITY, u64::MAX), pick);
            (m, count, sampled_path(n, seed, idx))
        }
    };
    Ok(VerifyReport {
        min_surplus,
        worst_path: PathWord::new(worst_steps)?.to_string(),
        paths_checked: count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dual::eval_fixed_policy;
    use crate::market::crr_price;
    use approx::assert_abs_diff_eq;

    fn spec(n: usize, kappa: f64) -> BinomialSpec {
        BinomialSpec::new(100.0, 0.2, n, kappa).unwrap()
    }

    #[test]
    fn affine_single_span_delta_is_one() {
        let affine = PayoffSpec::affine(0.0, 1.0).unwrap();
        let mut p = DualPolicy::empty(5);
        p.set(DualState::root(5), RunChoice::symmetric(5)).unwrap();
        let tree = build_replication(&spec(5, 0.1), &affine, &p).unwrap();
        assert_abs_diff_eq!(tree.root().delta, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(tree.root().value, 100.0, epsilon = 1e-10);
    }

    #[test]
    fn one_step_delta() {
        let s = spec(1, 0.0);
        let call = PayoffSpec::call(100.0).unwrap();
        let tree = build_replication(&s, &call, &DualPolicy::finest(1)).unwrap();
        let expected =
            (call.eval(s.price(1)) - call.eval(s.price(-1))) / (s.price(1) - s.price(-1));
        assert_abs_diff_eq!(tree.root().delta, expected, epsilon = 1e-14);
    }

    #[test]
    fn delta_invariant_and_root_value() {
        let s = spec(3, 0.2);
        let call = PayoffSpec::call(100.0).unwrap();
        let sol = solve_dual(&s, &call, None).unwrap();
        let tree = build_replication(&s, &call, &sol.policy).unwrap();
        assert_abs_diff_eq!(tree.root().value, sol.value, epsilon = 1e-12);
        for node in tree.nodes() {
            let s_up = node.price * s.up_pow(node.choice.a as i64);
            let s_dn = node.price * s.up_pow(-(node.choice.b as i64));
            assert_abs_diff_eq!(
                node.delta * (s_up - s_dn),
                node.up_target - node.down_target,
                epsilon = 1e-10
            );
        }
    }

    #[test]
    fn all_up_path_under_finest_policy() {
        let n = 6;
        let s = spec(n, 0.05);
        let call = PayoffSpec::call(100.0).unwrap();
        let tree = build_replication(&s, &call, &DualPolicy::finest(n)).unwrap();
        let path = PathWord::new(vec![1; n]).unwrap();
        let ledger = run_hedge_on_path(&s, &call, &tree, &path, 0.0).unwrap();
        assert_eq!(ledger.charged_interventions(), n - 1);
        assert_abs_diff_eq!(ledger.gains, ledger.recompute_gains(&s), epsilon = 1e-12);
    }

    #[test]
    fn incomplete_run_holds_to_horizon() {
        let n = 6;
        let s = spec(n, 0.5);
        let call = PayoffSpec::call(100.0).unwrap();
        let mut p = DualPolicy::empty(n);
        p.set(DualState::root(n), RunChoice { a: 3, b: 3 }).unwrap();
        for st in [
            DualState {
                remaining: 3,
                disp: 3,
            },
            DualState {
                remaining: 3,
                disp: -3,
            },
        ] {
            p.set(st, RunChoice::symmetric(3)).unwrap();
        }
        let tree = build_replication(&s, &call, &p).unwrap();
        let path: PathWord = "++-+--".parse().unwrap();
        let ledger = run_hedge_on_path(&s, &call, &tree, &path, tree.root().value).unwrap();
        assert_eq!(ledger.interventions.len(), 1);
        assert_eq!(ledger.charged_interventions(), 0);
        assert!(ledger.surplus >= -1e-12);
    }

    #[test]
    fn dual_capital_super_replicates() {
        let s = spec(10, 0.05);
        let call = PayoffSpec::call(100.0).unwrap();
        let sol = solve_dual(&s, &call, None).unwrap();
        let ok = verify_superreplication(&s, &call, sol.value, VerifyMode::Exhaustive).unwrap();
        assert_eq!(ok.paths_checked, 1024);
        assert!(ok.min_surplus >= -1e-9, "{ok:?}");

        let short =
            verify_superreplication(&s, &call, sol.value - 0.01, VerifyMode::Exhaustive).unwrap();
        assert!(short.min_surplus < 0.0);
        assert_eq!(short.worst_path.len(), 10);
    }

    #[test]
    fn frictionless_replication_is_exact() {
        let s = spec(8, 0.0);
        let put = PayoffSpec::put(100.0).unwrap();
        let x = crr_price(&s, &put);
        let tree = build_replication(&s, &put, &DualPolicy::finest(8)).unwrap();
        for bits in 0..256 {
            let l = run_hedge_on_path(&s, &put, &tree, &PathWord::from_bits(bits, 8), x).unwrap();
            assert_abs_diff_eq!(l.surplus, 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn q_gains_vanish() {
        let s = spec(9, 0.1);
        let straddle = PayoffSpec::straddle(100.0).unwrap();
        let sol = solve_dual(&s, &straddle, None).unwrap();
        let tree = build_replication(&s, &straddle, &sol.policy).unwrap();
        assert_abs_diff_eq!(tree.q_expected_gains(&s), 0.0, epsilon = 1e-10);
        let eval = eval_fixed_policy(&s, &straddle, &sol.policy).unwrap();
        assert_abs_diff_eq!(tree.root().value, eval.value, epsilon = 1e-12);
    }

    #[test]
    fn exhaustive_limit_and_sampled_determinism() {
        let big = spec(23, 0.01);
        let call = PayoffSpec::call(100.0).unwrap();
        let err = verify_superreplication(&big, &call, 10.0, VerifyMode::Exhaustive).unwrap_err();
        assert!(err.to_string().contains("sampled"));

        let s = spec(16, 0.02);
        let sol = solve_dual(&s, &call, None).unwrap();
        let mode = VerifyMode::Sampled {
            count: 500,
            seed: 7,
        };
        let a = verify_policy(&s, &call, &sol.policy, sol.value, mode).unwrap();
        let b = verify_policy(&s, &call, &sol.policy, sol.value, mode).unwrap();
        assert_eq!(a, b);
        assert!(a.min_surplus >= -1e-9);
    }
}
