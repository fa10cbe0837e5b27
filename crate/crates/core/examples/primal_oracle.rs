//! Brute-force primal LP for tiny lattices, compared with the dual recursion.
//!
//! cargo run --example primal_oracle

use superhedge::{brute_force_primal, solve_dual, BinomialSpec, PayoffSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let payoff = PayoffSpec::call(100.0)?;
    for n in 1..=3 {
        for kappa in [0.0, 0.3, 3.0] {
            let spec = BinomialSpec::new(100.0, 0.3, n, kappa)?;
            let primal = brute_force_primal(&spec, &payoff)?;
            let dual = solve_dual(&spec, &payoff, None)?;
            println!(
                "n {n} kappa {kappa:<4} primal {:.10} dual {:.10} pattern {:?}",
                primal.value, dual.value, primal.pattern
            );
        }
    }
    Ok(())
}
