use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{g, RhoSchedule};
use crate::error::{Error, Result};
use crate::market::PayoffSpec;

/// Paths per random stream; chunk `c` draws from stream `c` of the seeded generator.
const CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub payoff_mean: f64,
    pub cost_mean: f64,
    pub paths: usize,
}

#[derive(Clone, Copy, Default)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
    payoff: f64,
    cost: f64,
}

impl Moments {
    fn push(&mut self, payoff: f64, cost: f64) {
        let v = payoff + cost;
        self.n += 1.0;
        let d = v - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (v - self.mean);
        self.payoff += payoff;
        self.cost += cost;
    }

    fn merge(self, o: Moments) -> Moments {
        if o.n == 0.0 {
            return self;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        Moments {
            n,
            mean: self.mean + d * o.n / n,
            m2: self.m2 + o.m2 + d * d * self.n * o.n / n,
            payoff: self.payoff + o.payoff,
            cost: self.cost + o.cost,
        }
    }
}

/// Monte Carlo value of `f(S_1) + kappa sum_j dt_j g(rho_j)` under the simple-form
/// multiplier schedule `rho`, where `S` has volatility `sigma sqrt(rho_j)` on interval `j`.
///
/// Each interval is split into `steps` exact lognormal increments. Results are
/// identical for a given seed whatever the thread count.
#[allow(clippy::too_many_arguments)]
pub fn mc_value(
    s0: f64,
    sigma: f64,
    kappa: f64,
    payoff: &PayoffSpec,
    rho: &RhoSchedule,
    paths: usize,
    steps: usize,
    seed: u64,
) -> Result<McEstimate> {
    if paths == 0 || steps == 0 {
        return Err(Error::input("mc needs paths >= 1 and steps >= 1"));
    }
    if !(s0 > 0.0 && sigma > 0.0 && kappa >= 0.0) {
        return Err(Error::input("mc needs s0 > 0, sigma > 0, kappa >= 0"));
    }
    payoff.validate()?;
    rho.validate()?;
    let bp = rho.breakpoints();
    let rules = rho.rules();
    let chunks = paths.div_ceil(CHUNK);
    let total = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let count = CHUNK.min(paths - c * CHUNK);
            let mut acc = Moments::default();
            for _ in 0..count {
                let mut log_s = s0.ln();
                let mut cost = 0.0;
                for (j, rule) in rules.iter().enumerate() {
                    let r = rule.eval(log_s.exp());
                    let len = bp[j + 1] - bp[j];
                    let var = sigma * sigma * r * len / steps as f64;
                    let sd = var.sqrt();
                    for _ in 0..steps {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        log_s += sd * z - 0.5 * var;
                    }
                    cost += len * g(r);
                }
                acc.push(payoff.eval(log_s.exp()), kappa * cost);
            }
            acc
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(Moments::default(), Moments::merge);
    let var = if total.n > 1.0 {
        total.m2 / (total.n - 1.0)
    } else {
        0.0
    };
    Ok(McEstimate {
        estimate: total.mean,
        std_error: (var / total.n).sqrt(),
        payoff_mean: total.payoff / total.n,
        cost_mean: total.cost / total.n,
        paths,
    })
}
