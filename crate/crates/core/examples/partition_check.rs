//! Intervention rate of deterministic partitions against the lower bound.
//!
//! cargo run --example partition_check

use superhedge::scheme::StepFunction;
use superhedge::{partition_lower_bound_check, DeterministicPartition};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n = 600;
    for pattern in [vec![1], vec![2], vec![1, 2], vec![1, 3], vec![2, 2, 5]] {
        let part = DeterministicPartition::from_pattern(n, &pattern)?;
        let total: usize = pattern.iter().sum();
        let sq: usize = pattern.iter().map(|l| l * l).sum();
        let b = StepFunction::constant(sq as f64 / total as f64);
        let chk = partition_lower_bound_check(&part, &b)?;
        println!(
            "steps {pattern:?}: rate {:.4}  bound {:.4}  slack {:+.4}  hypothesis gap {:.1e} ({})",
            chk.lhs,
            chk.rhs,
            chk.slack,
            chk.hypothesis_gap,
            if chk.hypothesis_holds {
                "holds"
            } else {
                "fails"
            }
        );
    }
    let mixed = DeterministicPartition::from_times(8, &[0.0, 0.125, 0.5, 0.75, 1.0])?;
    let chk = partition_lower_bound_check(&mixed, &StepFunction::constant(2.0))?;
    println!(
        "irregular grid against b = 2: hypothesis {}",
        if chk.hypothesis_holds {
            "holds"
        } else {
            "fails"
        }
    );
    Ok(())
}
