//! Super-replication price of a call on the n-step lattice, with and without costs.
//!
//! cargo run --example binomial_price

use superhedge::{buy_and_hold_bound, crr_price, solve_dual, BinomialSpec, PayoffSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let call = PayoffSpec::call(100.0)?;
    println!(
        "{:>5} {:>8} {:>10} {:>10} {:>10} {:>8}",
        "n", "kappa", "price", "crr", "cost part", "E[N]"
    );
    for n in [8, 32, 128, 512] {
        for kappa in [0.0, 0.5 / n as f64, 0.5] {
            let spec = BinomialSpec::new(100.0, 0.2, n, kappa)?;
            let sol = solve_dual(&spec, &call, None)?;
            println!(
                "{n:>5} {kappa:>8.5} {:>10.5} {:>10.5} {:>10.5} {:>8.3}",
                sol.value,
                crr_price(&spec, &call),
                sol.cost_part,
                sol.expected_interventions
            );
        }
    }
    println!("buy-and-hold bound: {:?}", buy_and_hold_bound(100.0, &call));
    Ok(())
}
