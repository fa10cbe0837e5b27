use statrs::distribution::{ContinuousCDF, Normal};

use crate::market::PayoffSpec;

fn std_normal_cdf(z: f64) -> f64 {
    Normal::new(0.0, 1.0).expect("unit normal").cdf(z)
}

/// Zero-rate call price at horizon 1.
fn call(s0: f64, sigma: f64, strike: f64) -> f64 {
    if strike <= 0.0 {
        return s0 - strike;
    }
    if sigma == 0.0 {
        return (s0 - strike).max(0.0);
    }
    let d1 = ((s0 / strike).ln() + 0.5 * sigma * sigma) / sigma;
    s0 * std_normal_cdf(d1) - strike * std_normal_cdf(d1 - sigma)
}

/// Frictionless price `E[f(S_1)]` with `S` a driftless geometric Brownian motion.
///
/// Calls, puts and straddles use the closed form, piecewise-linear payoffs are
/// decomposed into calls, and capped powers use the truncated lognormal moments.
pub fn bs_price(s0: f64, sigma: f64, payoff: &PayoffSpec) -> f64 {
    match payoff {
        PayoffSpec::Call { strike } => call(s0, sigma, *strike),
        PayoffSpec::Put { strike } => call(s0, sigma, *strike) - s0 + strike,
        PayoffSpec::Straddle { strike } => 2.0 * call(s0, sigma, *strike) - s0 + strike,
        PayoffSpec::PiecewiseLinear { f0, knots } => {
            let mut prev = 0.0;
            let mut v = *f0;
            for k in knots {
                v += (k.slope - prev) * call(s0, sigma, k.x);
                prev = k.slope;
            }
            v
        }
        PayoffSpec::PowerCapped { exponent: p, cap } => {
            let moment = s0.powf(*p) * (0.5 * sigma * sigma * p * (p - 1.0)).exp();
            let Some(c) = cap else { return moment };
            if sigma == 0.0 {
                return payoff.eval(s0);
            }
            let z = ((c / s0).ln() + 0.5 * sigma * sigma) / sigma;
            let below = moment * std_normal_cdf(z - p * sigma);
            let above_prob = std_normal_cdf(-z);
            let above_mean = s0 * std_normal_cdf(sigma - z);
            let slope = p * c.powf(p - 1.0);
            below + (c.powf(*p) - slope * c) * above_prob + slope * above_mean
        }
    }
}

/// `E[h(S_1)]` by composite Simpson quadrature in the standard normal variable over `[-10, 10]`.
pub fn lognormal_expectation(s0: f64, sigma: f64, h: impl Fn(f64) -> f64, panels: usize) -> f64 {
    let panels = panels.max(2) + panels % 2;
    let (a, b) = (-10.0, 10.0);
    let dz = (b - a) / panels as f64;
    let density = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let integrand = |z: f64| h(s0 * (sigma * z - 0.5 * sigma * sigma).exp()) * density(z);
    let mut acc = integrand(a) + integrand(b);
    for i in 1..panels {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * integrand(a + i as f64 * dz);
    }
    acc * dz / 3.0
}
