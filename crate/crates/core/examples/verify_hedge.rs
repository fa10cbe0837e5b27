//! Build the hedge behind the dual price and check it on every path.
//!
//! cargo run --example verify_hedge

use superhedge::{
    build_replication, run_hedge_on_path, solve_dual, verify_superreplication, BinomialSpec,
    PathWord, PayoffSpec, VerifyMode,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = BinomialSpec::new(100.0, 0.2, 16, 0.05)?;
    let payoff: PayoffSpec = "pwl:f0=45;0,-0.5;80,0;110,1.5".parse()?;
    let sol = solve_dual(&spec, &payoff, None)?;

    let rep = verify_superreplication(&spec, &payoff, sol.value, VerifyMode::Exhaustive)?;
    println!(
        "capital {:.6}: {} paths, min surplus {:.3e} on {}",
        sol.value, rep.paths_checked, rep.min_surplus, rep.worst_path
    );

    let short = verify_superreplication(&spec, &payoff, sol.value - 0.05, VerifyMode::Exhaustive)?;
    println!(
        "capital {:.6}: min surplus {:.4} on {}",
        sol.value - 0.05,
        short.min_surplus,
        short.worst_path
    );

    let tree = build_replication(&spec, &payoff, &sol.policy)?;
    let path: PathWord = "++-+--++-+++--+-".parse()?;
    let ledger = run_hedge_on_path(&spec, &payoff, &tree, &path, sol.value)?;
    println!(
        "path {path}: gains {:.6}, surplus {:.6}",
        ledger.gains, ledger.surplus
    );
    for iv in &ledger.interventions {
        println!("  t = {:>2}/16  hold {:+.5}", iv.time, iv.holding);
    }
    Ok(())
}
