//! Continuous-time limit: HJB solver properties, closed forms and Monte Carlo.

use proptest::prelude::*;
use superhedge::limit::{hjb_refinement, solve_hjb_frozen};
use superhedge::{bs_price, mc_value, solve_hjb, HJBGrid, PayoffSpec, RhoSchedule};

const S0: f64 = 100.0;
const SIGMA: f64 = 0.2;

fn call() -> PayoffSpec {
    PayoffSpec::call(100.0).unwrap()
}

#[test]
fn value_nondecreasing_in_kappa() {
    let grid = HJBGrid::centered(S0, SIGMA, 8, 201);
    let mut prev = f64::NEG_INFINITY;
    for kappa in [0.0, 0.05, 0.2, 0.5, 1.0, 3.0] {
        let v = solve_hjb(S0, SIGMA, kappa, &call(), grid)
            .unwrap()
            .value_at_s0;
        assert!(v >= prev - 1e-12, "kappa {kappa}: {v} < {prev}");
        prev = v;
    }
}

#[test]
fn value_nonincreasing_in_m_max_on_shared_grid() {
    let wide = HJBGrid::centered(S0, SIGMA, 16, 201);
    let mut prev = f64::INFINITY;
    for m_max in [1u32, 2, 4, 8, 16] {
        let grid = HJBGrid { m_max, ..wide };
        let v = solve_hjb(S0, SIGMA, 0.5, &call(), grid)
            .unwrap()
            .value_at_s0;
        assert!(v <= prev + 1e-12, "m_max {m_max}: {v} > {prev}");
        prev = v;
    }
}

#[test]
fn grid_refinement_converges() {
    let values: Vec<f64> = [101, 201, 401]
        .iter()
        .map(|&nx| {
            solve_hjb(
                S0,
                SIGMA,
                0.5,
                &call(),
                HJBGrid::centered(S0, SIGMA, 16, nx),
            )
            .unwrap()
            .value_at_s0
        })
        .collect();
    let (d1, d2) = ((values[1] - values[0]).abs(), (values[2] - values[1]).abs());
    assert!(d1 / d2 >= 2.0, "diffs {d1} then {d2}");

    let est = hjb_refinement(
        S0,
        SIGMA,
        0.5,
        &call(),
        HJBGrid::centered(S0, SIGMA, 16, 401),
    )
    .unwrap();
    assert_eq!(est.fine, values[2]);
    assert!((est.coarse - values[1]).abs() < 0.2 * d1);
    assert!(est.tolerance > 0.0);
}

#[test]
fn affine_payoff_is_exact() {
    let f = PayoffSpec::affine(3.0, 0.7).unwrap();
    for kappa in [0.0, 1.0] {
        let sol = solve_hjb(S0, SIGMA, kappa, &f, HJBGrid::centered(S0, SIGMA, 16, 101)).unwrap();
        // zero curvature everywhere, so the largest multiplier is optimal
        let expected = 3.0 + 0.7 * S0 + kappa / 16.0;
        assert!(
            (sol.value_at_s0 - expected).abs() < 1e-9,
            "{} vs {expected}",
            sol.value_at_s0
        );
    }
}

#[test]
fn policy_field_is_in_range() {
    let sol = solve_hjb(
        S0,
        SIGMA,
        0.5,
        &call(),
        HJBGrid::centered(S0, SIGMA, 8, 101),
    )
    .unwrap();
    assert!(sol
        .policy_rows()
        .all(|(t, _, m)| (1..=8).contains(&m) && (0.0..1.0).contains(&t)));
    assert_eq!(sol.policy_at_s0.len(), sol.grid.nt);
    let sched = sol.multiplier_schedule(4).unwrap();
    assert_eq!(sched.intervals(), 4);
    assert_eq!(sched.cap(), 8.0);
}

#[test]
fn monte_carlo_affine_and_scaled_volatility() {
    let f = PayoffSpec::affine(2.0, 1.0).unwrap();
    let rho = RhoSchedule::constant(4.0, 16.0).unwrap();
    let est = mc_value(S0, SIGMA, 0.8, &f, &rho, 40_000, 4, 3).unwrap();
    let exact = 2.0 + S0 + 0.8 / 4.0;
    assert!((est.estimate - exact).abs() < 4.0 * est.std_error + 1e-9);
    assert!((est.cost_mean - 0.2).abs() < 1e-12);

    // constant rho = 4 doubles the volatility
    let est = mc_value(S0, SIGMA, 0.8, &call(), &rho, 200_000, 1, 5).unwrap();
    let exact = bs_price(S0, 2.0 * SIGMA, &call()) + 0.2;
    assert!(
        (est.estimate - exact).abs() < 4.0 * est.std_error,
        "{} vs {exact} (se {})",
        est.estimate,
        est.std_error
    );
}

#[test]
fn frozen_schedule_matches_monte_carlo() {
    let rho: RhoSchedule = "0:1,0.5:3".parse().unwrap();
    let kappa = 0.5;
    let frozen = |nx| {
        let r = rho.clone();
        solve_hjb_frozen(
            S0,
            SIGMA,
            kappa,
            &call(),
            HJBGrid::centered(S0, SIGMA, 4, nx),
            move |t, _| r.constant_at(t).unwrap(),
        )
        .unwrap()
        .value_at_s0
    };
    let (fine, coarse) = (frozen(801), frozen(401));
    let mc = mc_value(S0, SIGMA, kappa, &call(), &rho, 200_000, 2, 9).unwrap();
    let cost = kappa * (0.5 * 1.0 + 0.5 / 3.0);
    assert!((mc.cost_mean - cost).abs() < 1e-12);
    let tol = 4.0 * mc.std_error + 2.0 * (fine - coarse).abs();
    assert!(
        (fine - mc.estimate).abs() < tol,
        "hjb {fine} mc {} tol {tol}",
        mc.estimate
    );
    // same variance budget as a constant multiplier of 2
    let exact = bs_price(S0, SIGMA * 2f64.sqrt(), &call()) + cost;
    assert!((fine - exact).abs() < 2.0 * (fine - coarse).abs() + 1e-3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn limit_value_is_sandwiched(
        strike in 80.0f64..120.0,
        sigma in 0.1f64..0.4,
        kappa in 0.0f64..2.0,
        put in any::<bool>(),
    ) {
        let f = if put { PayoffSpec::put(strike).unwrap() } else { PayoffSpec::call(strike).unwrap() };
        let v = solve_hjb(S0, sigma, kappa, &f, HJBGrid::centered(S0, sigma, 4, 201)).unwrap().value_at_s0;
        let bs = bs_price(S0, sigma, &f);
        let tol = 0.02 * (1.0 + bs);
        prop_assert!(v >= bs - tol, "{v} < bs {bs}");
        prop_assert!(v <= bs + kappa + tol, "{v} > bs + kappa {}", bs + kappa);
    }
}
