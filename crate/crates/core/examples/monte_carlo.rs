//! Monte Carlo value of a fixed multiplier schedule against the frozen-policy PDE.
//!
//! cargo run --release --example monte_carlo

use superhedge::limit::solve_hjb_frozen;
use superhedge::{mc_value, HJBGrid, PayoffSpec, RhoSchedule};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (s0, sigma, kappa) = (100.0, 0.2, 0.5);
    let call = PayoffSpec::call(100.0)?;
    let rho: RhoSchedule = "0:1,0.25:2.5,0.75:4".parse()?;

    for seed in [1, 2, 3] {
        let est = mc_value(s0, sigma, kappa, &call, &rho, 400_000, 4, seed)?;
        println!(
            "seed {seed}: {:.5} +- {:.5} (payoff {:.5}, cost {:.5})",
            est.estimate, est.std_error, est.payoff_mean, est.cost_mean
        );
    }
    let pde = solve_hjb_frozen(
        s0,
        sigma,
        kappa,
        &call,
        HJBGrid::centered(s0, sigma, 4, 801),
        |t, _| rho.constant_at(t).unwrap(),
    )?;
    println!("frozen PDE: {:.5}", pde.value_at_s0);
    Ok(())
}
