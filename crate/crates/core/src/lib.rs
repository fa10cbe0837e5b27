//! Super-replication of convex European claims under fixed transaction costs.
//!
//! * [`market`]: symmetric binomial lattice, convex payoff families, the
//!   frictionless binomial price and the buy-and-hold bound `f(0) + s0 f'(inf)`.
//! * [`dual`]: exact super-replication prices in the n-step model as a minimum
//!   over monotone-run stopping systems, solved by backward induction.
//! * [`hedge`]: the explicit super-hedge behind a dual policy, pathwise
//!   verification, and a brute-force primal oracle for tiny trees.
//! * [`limit`]: the small-cost scaling limit, a stochastic-volatility control
//!   problem solved by a monotone explicit HJB scheme and by Monte Carlo.
//! * [`scheme`]: block-mixing stopping systems that realise a target variance
//!   multiplier, and the partition lower-bound checker.
//! * [`lab`]: experiment configuration, sweeps and CSV/JSON reports behind the
//!   `superhedge` command-line tool.

pub mod dual;
pub mod error;
pub mod hedge;
pub mod lab;
pub mod limit;
pub mod market;
pub mod scheme;

pub use dual::{
    eval_fixed_policy, martingale_prob, refine_policy, solve_dual, DualPolicy, DualSolution,
    DualState, RunChoice,
};
pub use error::{Error, Result};
pub use hedge::{
    brute_force_primal, build_replication, run_hedge_on_path, verify_superreplication, HedgeLedger,
    ReplicationTree, VerifyMode, VerifyReport,
};
pub use limit::{
    bs_price, g_eval, mc_value, optimal_multiplier, solve_hjb, HJBGrid, LimitSolution, RhoRule,
    RhoSchedule,
};
pub use market::{
    buy_and_hold_bound, crr_price, terminal_price, BinomialSpec, ExtendedReal, PathWord, PayoffSpec,
};
pub use scheme::{
    build_scheme, eval_scheme, mixing_fraction, partition_lower_bound_check, scheme_cost_asymptote,
    DeterministicPartition,
};
