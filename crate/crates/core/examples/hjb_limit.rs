//! Scaling-limit price from the HJB equation and its optimal multiplier field.
//!
//! cargo run --release --example hjb_limit [policy.csv]

use superhedge::lab::{emit_report, Format, PolicyFieldRow};
use superhedge::limit::hjb_refinement;
use superhedge::{bs_price, solve_hjb, HJBGrid, PayoffSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (s0, sigma) = (100.0, 0.2);
    let call = PayoffSpec::call(100.0)?;
    let grid = HJBGrid::centered(s0, sigma, 16, 401);

    for kappa in [0.0, 0.1, 0.5, 2.0] {
        let v = solve_hjb(s0, sigma, kappa, &call, grid)?.value_at_s0;
        println!("kappa {kappa:<4} value {v:.6}");
    }
    println!("black-scholes   {:.6}", bs_price(s0, sigma, &call));

    let est = hjb_refinement(s0, sigma, 0.5, &call, grid)?;
    println!(
        "refinement: fine {:.6} coarse {:.6} tolerance {:.2e}",
        est.fine, est.coarse, est.tolerance
    );

    let sol = solve_hjb(s0, sigma, 0.5, &call, grid)?;
    let sched = sol.multiplier_schedule(4)?;
    println!("multiplier at s0 per quarter: {:?}", sched.rules());

    if let Some(path) = std::env::args().nth(1) {
        let rows: Vec<PolicyFieldRow> = sol
            .policy_rows()
            .map(|(t, x, m)| PolicyFieldRow { t, x, m })
            .collect();
        emit_report(&rows, Format::Csv, path.as_ref())?;
        println!("wrote {} rows to {path}", rows.len());
    }
    Ok(())
}
