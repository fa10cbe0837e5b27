//! Turn a multiplier schedule into a discrete stopping system and price it.
//!
//! cargo run --release --example block_scheme

use superhedge::limit::solve_hjb_frozen;
use superhedge::{
    eval_scheme, mixing_fraction, scheme_cost_asymptote, solve_dual, BinomialSpec, HJBGrid,
    PayoffSpec, RhoSchedule,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let rho: RhoSchedule = "0:1.5,0.5:2.5".parse()?;
    let call = PayoffSpec::call(100.0)?;
    println!(
        "short-run shares: {:.2} then {:.2}",
        mixing_fraction(1.5)?,
        mixing_fraction(2.5)?
    );
    println!(
        "limiting interventions per step: {:.4}",
        scheme_cost_asymptote(&rho)?
    );
    let limit = solve_hjb_frozen(
        100.0,
        0.2,
        0.5,
        &call,
        HJBGrid::centered(100.0, 0.2, 4, 401),
        |t, _| rho.constant_at(t).unwrap(),
    )?;
    println!("limit of this schedule: {:.5}", limit.value_at_s0);
    println!(
        "{:>5} {:>10} {:>10} {:>10}",
        "n", "N/n", "scheme", "optimal"
    );
    for n in [32, 64, 128, 256] {
        let spec = BinomialSpec::new(100.0, 0.2, n, 0.5 / n as f64)?;
        let s = eval_scheme(&spec, &call, &rho)?;
        let d = solve_dual(&spec, &call, None)?;
        println!(
            "{n:>5} {:>10.4} {:>10.5} {:>10.5}",
            (s.expected_interventions + 1.0) / n as f64,
            s.value,
            d.value
        );
    }
    Ok(())
}
