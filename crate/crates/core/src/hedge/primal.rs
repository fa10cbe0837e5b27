//! Brute-force primal super-replication price for trees with at most 3 steps.
//!
//! Every adapted intervention pattern on the non-recombining tree is tried. For
//! a fixed pattern the cheapest capital solves a small linear program in the
//! capital and one holding per intervention node, with one constraint per
//! scenario. Its optimum sits at a vertex, so the LP is solved by enumerating
//! square subsystems of tight constraints in double-double arithmetic.

use serde::{Deserialize, Serialize};
use twofloat::TwoFloat;

use crate::error::{Error, Result};
use crate::market::{BinomialSpec, PathWord, PayoffSpec};

pub const MAX_PRIMAL_N: usize = 3;

const FEASIBILITY_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimalSolution {
    pub value: f64,
    /// Intervention nodes as path prefixes; the empty word is time 0.
    pub pattern: Vec<String>,
    /// Holding chosen at each intervention node, in `pattern` order.
    pub holdings: Vec<(String, f64)>,
}

/// Decision node `(depth, prefix bits)`; bit `i` set means step `i` went up.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Node {
    depth: usize,
    bits: u32,
}

impl Node {
    fn word(&self) -> String {
        (0..self.depth)
            .map(|i| if (self.bits >> i) & 1 == 1 { '+' } else { '-' })
            .collect()
    }
}

fn decision_nodes(n: usize) -> Vec<Node> {
    (0..n)
        .flat_map(|depth| (0..(1u32 << depth)).map(move |bits| Node { depth, bits }))
        .collect()
}

/// Minimal capital for one pattern, with the holdings attaining it.
fn solve_pattern(
    spec: &BinomialSpec,
    payoff: &PayoffSpec,
    nodes: &[Node],
    active: &[bool],
) -> Option<(f64, Vec<f64>)> {
    let n = spec.n;
    let vars: Vec<usize> = (0..nodes.len()).filter(|&i| active[i]).collect();
    let nv = vars.len() + 1;
    let var_of = |node_idx: usize| vars.iter().position(|&v| v == node_idx);

    // rows: x + sum_v h_v * (price increments while v is the latest intervention) >= rhs
    let mut rows: Vec<Vec<TwoFloat>> = Vec::new();
    let mut rhs: Vec<TwoFloat> = Vec::new();
    for leaf in 0..(1u32 << n) {
        let mut row = vec![TwoFloat::from(0.0); nv];
        row[0] = TwoFloat::from(1.0);
        let mut charges = 0usize;
        let mut current = 0usize;
        let mut disp = 0i64;
        for step in 0..n {
            let prefix = leaf & ((1u32 << step) - 1);
            let idx = nodes
                .iter()
                .position(|nd| nd.depth == step && nd.bits == prefix)
                .unwrap();
            if active[idx] {
                current = var_of(idx).unwrap();
                if step > 0 {
                    charges += 1;
                }
            }
            let before = spec.price(disp);
            disp += if (leaf >> step) & 1 == 1 { 1 } else { -1 };
            let inc = spec.price(disp) - before;
            row[current + 1] += TwoFloat::from(inc);
        }
        rows.push(row);
        rhs.push(
            TwoFloat::from(payoff.eval(spec.price(disp)))
                + TwoFloat::from(spec.kappa * charges as f64),
        );
    }

    let m = rows.len();
    let mut best: Option<(TwoFloat, Vec<TwoFloat>)> = None;
    for subset in combinations(m, nv) {
        let a: Vec<Vec<TwoFloat>> = subset.iter().map(|&r| rows[r].clone()).collect();
        let b: Vec<TwoFloat> = subset.iter().map(|&r| rhs[r]).collect();
        let Some(z) = solve_square(a, b) else {
            continue;
        };
        let feasible = rows.iter().zip(&rhs).all(|(row, &r)| {
            let lhs = row
                .iter()
                .zip(&z)
                .fold(TwoFloat::from(0.0), |acc, (c, v)| acc + *c * *v);
            f64::from(lhs - r) >= -FEASIBILITY_SLACK
        });
        if feasible && best.as_ref().is_none_or(|(bx, _)| z[0] < *bx) {
            best = Some((z[0], z));
        }
    }
    best.map(|(x, z)| (f64::from(x), z[1..].iter().map(|v| f64::from(*v)).collect()))
}

fn combinations(m: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, m: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..m {
            if m - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, m, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, m, k, &mut Vec::with_capacity(k), &mut out);
    out
}

/// Gaussian elimination with partial pivoting; `None` when singular.
fn solve_square(mut a: Vec<Vec<TwoFloat>>, mut b: Vec<TwoFloat>) -> Option<Vec<TwoFloat>> {
    let k = b.len();
    let scale = a
        .iter()
        .flatten()
        .map(|v| f64::from(*v).abs())
        .fold(0.0f64, f64::max)
        .max(1.0);
    for col in 0..k {
        let piv = (col..k).max_by(|&i, &j| {
            f64::from(a[i][col])
                .abs()
                .partial_cmp(&f64::from(a[j][col]).abs())
                .unwrap()
        })?;
        if f64::from(a[piv][col]).abs() <= 1e-12 * scale {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in (col + 1)..k {
            let factor = a[r][col] / a[col][col];
            if f64::from(factor) == 0.0 {
                continue;
            }
            for c in col..k {
                let delta = factor * a[col][c];
                a[r][c] -= delta;
            }
            let delta = factor * b[col];
            b[r] -= delta;
        }
    }
    let mut z = vec![TwoFloat::from(0.0); k];
    for r in (0..k).rev() {
        let mut acc = b[r];
        for c in (r + 1)..k {
            acc -= a[r][c] * z[c];
        }
        z[r] = acc / a[r][r];
    }
    Some(z)
}

/// Cheapest super-replicating capital over all adapted intervention patterns.
pub fn brute_force_primal(spec: &BinomialSpec, payoff: &PayoffSpec) -> Result<PrimalSolution> {
    spec.validate()?;
    payoff.validate()?;
    if spec.n > MAX_PRIMAL_N {
        return Err(Error::input(format!(
            "brute-force primal supports n <= {MAX_PRIMAL_N}, got n = {}",
            spec.n
        )));
    }
    let nodes = decision_nodes(spec.n);
    // the time-0 trade is free, so the root always intervenes
    let optional = nodes.len() - 1;
    let mut best: Option<(f64, Vec<bool>, Vec<f64>)> = None;
    for mask in 0u32..(1u32 << optional) {
        let mut active = vec![true; nodes.len()];
        for (i, flag) in active.iter_mut().enumerate().skip(1) {
            *flag = (mask >> (i - 1)) & 1 == 1;
        }
        let Some((x, h)) = solve_pattern(spec, payoff, &nodes, &active) else {
            return Err(Error::Internal(format!(
                "no vertex found for intervention pattern {mask:#b}"
            )));
        };
        if best.as_ref().is_none_or(|(bx, _, _)| x < *bx) {
            best = Some((x, active, h));
        }
    }
    let (value, active, holdings) = best.expect("at least one pattern");
    let words: Vec<String> = nodes
        .iter()
        .zip(&active)
        .filter(|(_, &on)| on)
        .map(|(nd, _)| nd.word())
        .collect();
    Ok(PrimalSolution {
        value,
        holdings: words.iter().cloned().zip(holdings).collect(),
        pattern: words,
    })
}

impl PrimalSolution {
    /// Terminal wealth minus payoff along `path`, replaying the optimal pattern.
    pub fn surplus(&self, spec: &BinomialSpec, payoff: &PayoffSpec, path: &PathWord) -> f64 {
        let mut wealth = self.value;
        let mut holding = 0.0;
        let mut disp = 0i64;
        let word = path.to_string();
        for step in 0..path.len() {
            if let Some((_, h)) = self.holdings.iter().find(|(w, _)| *w == word[..step]) {
                holding = *h;
                if step > 0 {
                    wealth -= spec.kappa;
                }
            }
            let before = spec.price(disp);
            disp += path.steps()[step] as i64;
            wealth += holding * (spec.price(disp) - before);
        }
        wealth - payoff.eval(spec.price(disp))
    }
}
