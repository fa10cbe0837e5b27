//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use superhedge::limit::{
    bs_price, hjb_refinement, mc_value, solve_hjb, solve_hjb_frozen, HJBGrid, RhoSchedule,
};
use superhedge::scheme::{
    eval_scheme, partition_lower_bound_check, DeterministicPartition, StepFunction,
};
use superhedge::{
    brute_force_primal, buy_and_hold_bound, crr_price, eval_fixed_policy, g_eval, refine_policy,
    solve_dual, verify_superreplication, BinomialSpec, DualPolicy, PayoffSpec, RunChoice,
    VerifyMode,
};

const S0: f64 = 100.0;
const SIGMA: f64 = 0.2;
const KAPPAS: [f64; 5] = [0.0, 0.01, 0.1, 1.0, 10.0];

type Check = Result<String, String>;

fn spec(n: usize, kappa: f64) -> BinomialSpec {
    BinomialSpec::new(S0, SIGMA, n, kappa).unwrap()
}

fn vanillas() -> Vec<(&'static str, PayoffSpec)> {
    vec![
        ("call", PayoffSpec::call(100.0).unwrap()),
        ("put", PayoffSpec::put(100.0).unwrap()),
        ("straddle", PayoffSpec::straddle(100.0).unwrap()),
    ]
}

fn within_budget(start: Instant, budget: Duration, detail: String) -> Check {
    let took = start.elapsed();
    if took <= budget {
        Ok(detail)
    } else {
        Err(format!(
            "{detail}; runtime {took:.1?} over budget {budget:?}"
        ))
    }
}

fn duality_equality() -> Check {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for n in 1..=3 {
        for (name, f) in vanillas() {
            for kappa in KAPPAS {
                let s = spec(n, kappa);
                let primal = brute_force_primal(&s, &f).map_err(|e| e.to_string())?.value;
                let dual = solve_dual(&s, &f, None).map_err(|e| e.to_string())?.value;
                let gap = (primal - dual).abs();
                worst = worst.max(gap);
                if gap > 1e-8 {
                    return Err(format!(
                        "n={n} {name} kappa={kappa}: primal {primal} vs dual {dual}"
                    ));
                }
            }
        }
    }
    within_budget(
        start,
        Duration::from_secs(60),
        format!("45 cases, max |primal - dual| = {worst:.2e}"),
    )
}

fn pathwise_superreplication() -> Check {
    let start = Instant::now();
    let call = PayoffSpec::call(100.0).unwrap();
    let mut worst = f64::INFINITY;
    for n in [8, 10, 12, 14] {
        for kappa in [0.01, 0.1] {
            let s = spec(n, kappa);
            let x = solve_dual(&s, &call, None)
                .map_err(|e| e.to_string())?
                .value;
            let r = verify_superreplication(&s, &call, x, VerifyMode::Exhaustive)
                .map_err(|e| e.to_string())?;
            if r.paths_checked != 1u64 << n {
                return Err(format!("n={n}: checked {} paths", r.paths_checked));
            }
            worst = worst.min(r.min_surplus);
            if r.min_surplus < -1e-9 {
                return Err(format!(
                    "n={n} kappa={kappa}: surplus {} on {}",
                    r.min_surplus, r.worst_path
                ));
            }
        }
    }
    within_budget(
        start,
        Duration::from_secs(120),
        format!("min surplus over all paths = {worst:.2e}"),
    )
}

fn frictionless_consistency() -> Check {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for n in [1, 2, 3, 5, 8, 16, 32, 64] {
        for (name, f) in vanillas() {
            let s = spec(n, 0.0);
            let d = solve_dual(&s, &f, None).map_err(|e| e.to_string())?.value;
            let gap = (d - crr_price(&s, &f)).abs();
            worst = worst.max(gap);
            if gap > 1e-10 {
                return Err(format!(
                    "n={n} {name}: dual {d} vs crr {}",
                    crr_price(&s, &f)
                ));
            }
        }
    }
    let call = PayoffSpec::call(100.0).unwrap();
    let crr = crr_price(&spec(512, 0.0), &call);
    let bs = bs_price(S0, SIGMA, &call);
    if (crr - bs).abs() > 0.05 {
        return Err(format!("crr(512) = {crr} vs bs = {bs}"));
    }
    within_budget(
        start,
        Duration::from_secs(60),
        format!(
            "max |dual - crr| = {worst:.2e}; |crr(512) - bs| = {:.2e}",
            (crr - bs).abs()
        ),
    )
}

fn bounds() -> Check {
    let mut cases = 0;
    let payoffs = {
        let mut v = vanillas();
        v.push(("pwl", "pwl:f0=45;0,-0.5;80,0;110,1.5".parse().unwrap()));
        v.push(("power", PayoffSpec::power_capped(1.5, Some(150.0)).unwrap()));
        v
    };
    for n in [1, 2, 3, 5, 8, 16, 32] {
        for (name, f) in &payoffs {
            let bound = buy_and_hold_bound(S0, f)
                .finite()
                .ok_or("finite bound expected")?;
            let mut prev = f64::NEG_INFINITY;
            for kappa in KAPPAS {
                let s = spec(n, kappa);
                let v = solve_dual(&s, f, None).map_err(|e| e.to_string())?.value;
                let crr = crr_price(&s, f);
                if v < crr - 1e-12 || v > bound + 1e-12 {
                    return Err(format!(
                        "n={n} {name} kappa={kappa}: {crr} <= {v} <= {bound} fails"
                    ));
                }
                if v < prev {
                    return Err(format!("n={n} {name}: value decreases at kappa={kappa}"));
                }
                prev = v;
                cases += 1;
            }
        }
    }
    Ok(format!(
        "{cases} (n, kappa, payoff) cases inside [crr, buy-and-hold], nondecreasing in kappa"
    ))
}

fn sandwich() -> Check {
    let grid = HJBGrid::centered(S0, SIGMA, 16, 801);
    let call = PayoffSpec::call(100.0).unwrap();
    let affine = PayoffSpec::affine(0.0, 1.0).unwrap();
    let bs = bs_price(S0, SIGMA, &call);
    let mut notes = Vec::new();
    for kappa in [0.1, 0.5, 2.0] {
        let v = solve_hjb(S0, SIGMA, kappa, &call, grid)
            .map_err(|e| e.to_string())?
            .value_at_s0;
        let tol = hjb_refinement(S0, SIGMA, kappa, &call, grid)
            .map_err(|e| e.to_string())?
            .tolerance;
        if !(v >= bs - tol && v <= bs + kappa + tol) {
            return Err(format!(
                "kappa={kappa}: {v} outside [{bs} - {tol}, {bs} + {kappa} + {tol}]"
            ));
        }
        let va = solve_hjb(S0, SIGMA, kappa, &affine, grid)
            .map_err(|e| e.to_string())?
            .value_at_s0;
        let ra = hjb_refinement(S0, SIGMA, kappa, &affine, grid).map_err(|e| e.to_string())?;
        let err = (va - (S0 + kappa / 16.0)).abs();
        if err > 10.0 * ra.tolerance {
            return Err(format!(
                "kappa={kappa}: affine error {err:.3e} above 10 x tol = {:.3e}",
                10.0 * ra.tolerance
            ));
        }
        notes.push(format!("k={kappa}: {:.4} in [bs, bs+k] tol {tol:.1e}", v));
    }
    Ok(notes.join("; "))
}

fn scaling_limit() -> Check {
    let start = Instant::now();
    let call = PayoffSpec::call(100.0).unwrap();
    let kappa = 0.5;
    let hjb = solve_hjb(
        S0,
        SIGMA,
        kappa,
        &call,
        HJBGrid::centered(S0, SIGMA, 16, 801),
    )
    .map_err(|e| e.to_string())?
    .value_at_s0;
    let mut gaps = Vec::new();
    for n in [16, 32, 64, 128] {
        let d = solve_dual(&spec(n, kappa / n as f64), &call, None)
            .map_err(|e| e.to_string())?
            .value;
        gaps.push((d - hjb).abs() / hjb);
    }
    let listing = gaps
        .iter()
        .map(|g| format!("{:.3}%", 100.0 * g))
        .collect::<Vec<_>>()
        .join(" > ");
    if gaps.windows(2).any(|w| w[1] >= w[0]) {
        return Err(format!("relative gaps not strictly decreasing: {listing}"));
    }
    if gaps[3] > 0.05 {
        return Err(format!("gap at n=128 is {:.3}%", 100.0 * gaps[3]));
    }
    within_budget(
        start,
        Duration::from_secs(600),
        format!("rel gap {listing}"),
    )
}

fn constructive_upper_bound() -> Check {
    let call = PayoffSpec::call(100.0).unwrap();
    let kappa = 0.5;
    let sol = solve_hjb(
        S0,
        SIGMA,
        kappa,
        &call,
        HJBGrid::centered(S0, SIGMA, 16, 801),
    )
    .map_err(|e| e.to_string())?;
    let rho = sol.multiplier_schedule(8).map_err(|e| e.to_string())?;
    let s = spec(128, kappa / 128.0);
    let scheme = eval_scheme(&s, &call, &rho)
        .map_err(|e| e.to_string())?
        .value;
    let dual = solve_dual(&s, &call, None)
        .map_err(|e| e.to_string())?
        .value;
    let rel = (scheme - sol.value_at_s0).abs() / sol.value_at_s0;
    if scheme < dual - 1e-12 {
        return Err(format!("scheme {scheme} below dual {dual}"));
    }
    if rel > 0.05 {
        return Err(format!(
            "scheme {scheme} is {:.2}% from hjb {}",
            100.0 * rel,
            sol.value_at_s0
        ));
    }
    let mut worst = 0.0f64;
    for r in [1.5, 2.0, 3.0] {
        for n in [64usize, 256] {
            let sched = RhoSchedule::constant(r, 16.0).unwrap();
            let count = eval_scheme(&spec(n, 0.1), &call, &sched)
                .map_err(|e| e.to_string())?
                .expected_interventions;
            let err = (count / n as f64 - g_eval(r).unwrap()).abs();
            worst = worst.max(err * (n as f64).sqrt());
            if err > 3.0 / (n as f64).sqrt() {
                return Err(format!(
                    "rho={r} n={n}: N/n = {} vs g = {}",
                    count / n as f64,
                    g_eval(r).unwrap()
                ));
            }
        }
    }
    Ok(format!(
        "scheme - dual = {:.2e}, |scheme - hjb| = {:.2}%; max sqrt(n)|N/n - g| = {worst:.2}",
        scheme - dual,
        100.0 * rel
    ))
}

fn random_policy(n: usize, rng: &mut ChaCha8Rng) -> DualPolicy {
    DualPolicy::from_fn(n, |st| RunChoice {
        a: rng.random_range(1..=st.remaining),
        b: rng.random_range(1..=st.remaining),
    })
}

fn refinement_monotonicity() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let payoffs = {
        let mut v = vanillas();
        v.push(("pwl", "pwl:f0=45;0,-0.5;80,0;110,1.5".parse().unwrap()));
        v.push(("power", PayoffSpec::power_capped(2.0, Some(140.0)).unwrap()));
        v
    };
    let s = spec(8, 0.1);
    let mut worst = f64::NEG_INFINITY;
    for i in 0..100 {
        let p = random_policy(8, &mut rng);
        let fine = refine_policy(&p, &s);
        for (name, f) in &payoffs {
            let orig = eval_fixed_policy(&s, f, &p)
                .map_err(|e| e.to_string())?
                .payoff_part;
            let refined = eval_fixed_policy(&s, f, &fine)
                .map_err(|e| e.to_string())?
                .payoff_part;
            worst = worst.max(refined - orig);
            if refined > orig + 1e-12 {
                return Err(format!(
                    "policy {i} {name}: refined {refined} > original {orig}"
                ));
            }
        }
    }
    Ok(format!(
        "100 policies x 5 payoffs, max(refined - original) = {worst:.2e}"
    ))
}

fn mc_hjb_crosscheck() -> Check {
    let call = PayoffSpec::call(100.0).unwrap();
    let kappa = 0.5;
    let grid = HJBGrid::centered(S0, SIGMA, 16, 801);
    let coarse = HJBGrid::centered(S0, SIGMA, 16, 401);
    let mut notes = Vec::new();
    for r in [1.0, 2.0, 4.0] {
        let fine = solve_hjb_frozen(S0, SIGMA, kappa, &call, grid, |_, _| r)
            .map_err(|e| e.to_string())?
            .value_at_s0;
        let half = solve_hjb_frozen(S0, SIGMA, kappa, &call, coarse, |_, _| r)
            .map_err(|e| e.to_string())?
            .value_at_s0;
        let tol = 2.0 * (fine - half).abs();
        let sched = RhoSchedule::constant(r, 16.0).unwrap();
        let mc = mc_value(S0, SIGMA, kappa, &call, &sched, 1_000_000, 1, 99)
            .map_err(|e| e.to_string())?;
        let diff = (mc.estimate - fine).abs();
        if diff > 3.0 * mc.std_error + tol {
            return Err(format!(
                "rho={r}: mc {} (se {}) vs hjb {fine} (tol {tol})",
                mc.estimate, mc.std_error
            ));
        }
        notes.push(format!(
            "rho={r}: |diff| {diff:.4} <= {:.4}",
            3.0 * mc.std_error + tol
        ));
    }
    Ok(notes.join("; "))
}

fn partition_checker() -> Check {
    let mut notes = Vec::new();
    for step in [1usize, 2, 3] {
        let mut scaled = Vec::new();
        for n in [120, 240, 480, 960] {
            let part =
                DeterministicPartition::from_pattern(n, &[step]).map_err(|e| e.to_string())?;
            let r = partition_lower_bound_check(&part, &StepFunction::constant(step as f64))
                .map_err(|e| e.to_string())?;
            if !r.hypothesis_holds {
                return Err(format!(
                    "constant steps {step} at n={n} flagged: gap {}",
                    r.hypothesis_gap
                ));
            }
            scaled.push(r.slack.abs() * n as f64);
        }
        let bounded = scaled.iter().all(|&v| v <= 1.0 + 1e-9);
        if !bounded {
            return Err(format!("steps {step}: n |slack| = {scaled:?} not O(1)"));
        }
        notes.push(format!(
            "b_n={step}: n|slack| <= {:.3}",
            scaled.iter().cloned().fold(0.0, f64::max)
        ));
    }
    for (pattern, b) in [(vec![1usize, 2], 1.5), (vec![1, 3], 2.0), (vec![2, 4], 3.0)] {
        let part =
            DeterministicPartition::from_pattern(960, &pattern).map_err(|e| e.to_string())?;
        let r = partition_lower_bound_check(&part, &StepFunction::constant(b))
            .map_err(|e| e.to_string())?;
        if r.hypothesis_holds {
            return Err(format!(
                "pattern {pattern:?} with b={b} not flagged (gap {})",
                r.hypothesis_gap
            ));
        }
    }
    notes.push("3 mismatched partitions flagged".into());
    Ok(notes.join("; "))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 10] = [
        ("duality equality", duality_equality),
        ("pathwise super-replication", pathwise_superreplication),
        ("frictionless consistency", frictionless_consistency),
        ("price bounds", bounds),
        ("limit sandwich", sandwich),
        ("scaling-limit convergence", scaling_limit),
        ("constructive upper bound", constructive_upper_bound),
        ("refinement monotonicity", refinement_monotonicity),
        ("mc / hjb cross-check", mc_hjb_crosscheck),
        ("partition checker", partition_checker),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome =
            catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| Err("panicked".into()));
        let took = start.elapsed();
        match outcome {
            Ok(detail) => println!(
                "criterion {:>2} {name:<28} PASS  [{took:.1?}] {detail}",
                i + 1
            ),
            Err(detail) => {
                failed += 1;
                println!(
                    "criterion {:>2} {name:<28} FAIL  [{took:.1?}] {detail}",
                    i + 1
                )
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
