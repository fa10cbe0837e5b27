//! Optimal stopping system: which run lengths the dual picks, and how run caps change the price.
//!
//! cargo run --example dual_policy

use superhedge::{martingale_prob, solve_dual, BinomialSpec, DualState, PayoffSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n = 24;
    let spec = BinomialSpec::new(100.0, 0.2, n, 0.02)?;
    let payoff: PayoffSpec = "straddle:100".parse()?;
    let sol = solve_dual(&spec, &payoff, None)?;

    println!(
        "value {:.6}  (payoff {:.6} + cost {:.6})",
        sol.value, sol.payoff_part, sol.cost_part
    );
    let root = sol.policy.get(DualState::root(n)).expect("root choice");
    println!(
        "root runs: up {} / down {}, Q(up) = {:.6}",
        root.a,
        root.b,
        martingale_prob(&spec, root)
    );

    println!("reachable stops and their runs:");
    for st in sol.policy.reachable()?.into_iter().take(12) {
        let c = sol.policy.get(st).unwrap();
        println!(
            "  remaining {:>2}  disp {:>3}  price {:>8.3}  a {:>2}  b {:>2}",
            st.remaining,
            st.disp,
            spec.price(st.disp),
            c.a,
            c.b
        );
    }

    for cap in [1, 2, 4, n] {
        println!(
            "run cap {cap:>2}: {:.6}",
            solve_dual(&spec, &payoff, Some(cap))?.value
        );
    }
    Ok(())
}
