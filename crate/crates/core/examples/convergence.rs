//! Binomial prices with costs kappa/n converging to the HJB value; writes CSV and JSON tables.
//!
//! cargo run --release --example convergence [out-dir]

use superhedge::lab::{run_experiment, ExperimentConfig, Mode};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = ExperimentConfig::new(Mode::Converge);
    cfg.params.n_list = vec![16, 32, 64, 128, 256];
    cfg.params.nx = 401;
    cfg.params.parallel = true;
    let out = run_experiment(&cfg)?;
    println!("{}", serde_json::to_string_pretty(&out.document())?);
    if let Some(dir) = std::env::args().nth(1) {
        for p in out.write(dir.as_ref())? {
            println!("wrote {}", p.display());
        }
    }
    Ok(())
}
