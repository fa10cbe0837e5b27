//! With a fixed cost per trade the binomial price tends to the buy-and-hold bound.
//!
//! cargo run --release --example fixed_kappa_sweep

use superhedge::lab::{run_fixed_kappa_sweep, ExperimentConfig, Mode};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = ExperimentConfig::new(Mode::FixedKappaSweep);
    cfg.market.kappa = 0.05;
    cfg.params.n_list = vec![4, 16, 64, 256, 1024];
    for row in run_fixed_kappa_sweep(&cfg)? {
        println!(
            "n {:>5}  price {:.5}  crr {:.5}  bound {:?}  ratio {:.4}",
            row.n,
            row.dual_value,
            row.crr_price,
            row.bound,
            row.ratio.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
