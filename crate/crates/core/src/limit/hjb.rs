use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{g, optimal_multiplier, RhoSchedule};
use crate::error::{Error, Result};
use crate::market::PayoffSpec;

pub const DEFAULT_M_MAX: u32 = 16;

/// Stored time slices are thinned to roughly this many.
const MAX_SLICES: usize = 256;

/// Uniform log-price grid on `[x_min, x_max]` with `nt` explicit time steps over `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HJBGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub nt: usize,
    pub m_max: u32,
}

impl HJBGrid {
    /// `ln s0 +- 5 sigma sqrt(m_max)` with the smallest stable `nt`.
    pub fn centered(s0: f64, sigma: f64, m_max: u32, nx: usize) -> Self {
        let half = 5.0 * sigma * (m_max.max(1) as f64).sqrt();
        let mut grid = HJBGrid {
            x_min: s0.ln() - half,
            x_max: s0.ln() + half,
            nx,
            nt: 1,
            m_max,
        };
        grid.nt = grid.min_nt(sigma);
        grid
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.nx - 1) as f64
    }

    /// Smallest `nt` with `sigma^2 m_max dt <= dx^2`.
    pub fn min_nt(&self, sigma: f64) -> usize {
        let width = self.x_max - self.x_min;
        let n = (self.nx.max(2) - 1) as f64;
        let bound = sigma * sigma * self.m_max as f64 * n * n / (width * width);
        // shave rounding noise so an exact integer bound is not bumped up by one
        ((bound * (1.0 - 1e-12)).ceil() as usize).max(1)
    }

    pub fn with_nt(mut self, nt: usize) -> Self {
        self.nt = nt;
        self
    }

    pub fn validate(&self, s0: f64, sigma: f64) -> Result<()> {
        if self.nx < 3 {
            return Err(Error::input(format!("grid needs nx >= 3, got {}", self.nx)));
        }
        if self.m_max < 1 {
            return Err(Error::input("m_max must be >= 1"));
        }
        if !(self.x_min.is_finite()
            && self.x_max.is_finite()
            && self.x_min < s0.ln()
            && s0.ln() < self.x_max)
        {
            return Err(Error::input(format!(
                "grid [{}, {}] must contain ln s0 = {} strictly inside",
                self.x_min,
                self.x_max,
                s0.ln()
            )));
        }
        let min_nt = self.min_nt(sigma);
        if self.nt < min_nt {
            return Err(Error::input(format!(
                "nt = {} violates the stability bound; the minimal admissible nt is {min_nt}",
                self.nt
            )));
        }
        Ok(())
    }
}

/// HJB solution: value at `s0`, thinned value and multiplier slices, and the
/// multiplier at the grid node nearest `ln s0` for every time step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitSolution {
    pub value_at_s0: f64,
    pub grid: HJBGrid,
    pub x: Vec<f64>,
    /// Time-step indices `k` (time `k / nt`) of the stored value slices, ascending.
    pub value_steps: Vec<usize>,
    pub value_grid: Vec<Vec<f64>>,
    /// Time-step indices of the stored multiplier slices; `m` on `[t_k, t_{k+1})`.
    pub policy_steps: Vec<usize>,
    pub policy_field: Vec<Vec<u16>>,
    pub policy_at_s0: Vec<u16>,
}

impl LimitSolution {
    pub fn dt(&self) -> f64 {
        1.0 / self.grid.nt as f64
    }

    pub fn initial_slice(&self) -> &[f64] {
        &self.value_grid[0]
    }

    pub fn terminal_slice(&self) -> &[f64] {
        self.value_grid.last().expect("terminal slice stored")
    }

    /// `(t, x, m)` rows of the stored multiplier field.
    pub fn policy_rows(&self) -> impl Iterator<Item = (f64, f64, u16)> + '_ {
        let dt = self.dt();
        self.policy_steps
            .iter()
            .zip(&self.policy_field)
            .flat_map(move |(&k, row)| {
                self.x
                    .iter()
                    .zip(row)
                    .map(move |(&x, &m)| (k as f64 * dt, x, m))
            })
    }

    /// Average optimal multiplier at `ln s0` over the time steps starting in `[t0, t1)`.
    pub fn mean_multiplier_at_s0(&self, t0: f64, t1: f64) -> f64 {
        let nt = self.grid.nt as f64;
        let k0 = ((t0 * nt).ceil() as usize).min(self.policy_at_s0.len());
        let k1 = ((t1 * nt).ceil() as usize).min(self.policy_at_s0.len());
        if k1 <= k0 {
            return self.policy_at_s0[k0.min(self.policy_at_s0.len() - 1)] as f64;
        }
        self.policy_at_s0[k0..k1]
            .iter()
            .map(|&m| m as f64)
            .sum::<f64>()
            / (k1 - k0) as f64
    }

    /// Piecewise-constant schedule on `intervals` equal intervals, each carrying
    /// the mean optimal multiplier at `ln s0` over its time steps.
    pub fn multiplier_schedule(&self, intervals: usize) -> Result<RhoSchedule> {
        if intervals == 0 {
            return Err(Error::input("need at least one interval"));
        }
        let starts: Vec<(f64, f64)> = (0..intervals)
            .map(|j| {
                let (t0, t1) = (
                    j as f64 / intervals as f64,
                    (j + 1) as f64 / intervals as f64,
                );
                (t0, self.mean_multiplier_at_s0(t0, t1))
            })
            .collect();
        RhoSchedule::piecewise_constant(&starts, self.grid.m_max as f64)
    }
}

/// Agreement between a grid and its half-resolution counterpart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefinementEstimate {
    pub fine: f64,
    pub coarse: f64,
    pub delta: f64,
    pub tolerance: f64,
}

enum Control<'a> {
    Optimal,
    Frozen(&'a (dyn Fn(f64, f64) -> f64 + Sync)),
}

struct Run {
    value_at_s0: f64,
    value_steps: Vec<usize>,
    value_grid: Vec<Vec<f64>>,
    policy_steps: Vec<usize>,
    policy_field: Vec<Vec<u16>>,
    policy_at_s0: Vec<u16>,
    x: Vec<f64>,
}

fn check_inputs(
    s0: f64,
    sigma: f64,
    kappa: f64,
    payoff: &PayoffSpec,
    grid: &HJBGrid,
) -> Result<()> {
    if !(s0.is_finite() && s0 > 0.0) {
        return Err(Error::input(format!("s0 must be positive, got {s0}")));
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::input(format!("sigma must be positive, got {sigma}")));
    }
    if !(kappa.is_finite() && kappa >= 0.0) {
        return Err(Error::input(format!(
            "kappa must be nonnegative, got {kappa}"
        )));
    }
    payoff.validate()?;
    grid.validate(s0, sigma)
}

fn run(
    s0: f64,
    sigma: f64,
    kappa: f64,
    payoff: &PayoffSpec,
    grid: &HJBGrid,
    control: Control<'_>,
    record: bool,
) -> Run {
    let nx = grid.nx;
    let nt = grid.nt;
    let h = grid.dx();
    let dt = 1.0 / nt as f64;
    let half_var = 0.5 * sigma * sigma;
    let x: Vec<f64> = (0..nx).map(|i| grid.x_min + i as f64 * h).collect();
    let s: Vec<f64> = x.iter().map(|v| v.exp()).collect();
    // s^2 V_ss on the nonuniform price grid; both weights are positive
    let weights: Vec<(f64, f64)> = (0..nx)
        .map(|i| {
            if i == 0 || i == nx - 1 {
                return (0.0, 0.0);
            }
            let (sl, sc, sr) = (s[i - 1], s[i], s[i + 1]);
            let span = sr - sl;
            (
                2.0 * sc * sc / ((sr - sc) * span),
                2.0 * sc * sc / ((sc - sl) * span),
            )
        })
        .collect();

    let mut u: Vec<f64> = s.iter().map(|&v| payoff.eval(v)).collect();
    let mut next = vec![0.0; nx];
    let mut m_row = vec![0u16; nx];
    let stride = nt.div_ceil(MAX_SLICES).max(1);
    let centre = (((s0.ln() - grid.x_min) / h).round() as usize).min(nx - 1);

    let mut value_steps = Vec::new();
    let mut value_grid = Vec::new();
    let mut policy_steps = Vec::new();
    let mut policy_field = Vec::new();
    let mut policy_at_s0 = vec![0u16; if record { nt } else { 0 }];
    if record {
        value_steps.push(nt);
        value_grid.push(u.clone());
    }

    let m_max = grid.m_max;
    let boundary_cost = kappa * g(m_max as f64);
    for k in (0..nt).rev() {
        let t_mid = (k as f64 + 0.5) * dt;
        next.par_iter_mut()
            .zip(m_row.par_iter_mut())
            .enumerate()
            .with_min_len(256)
            .for_each(|(i, (out, m_out))| {
                let curv = if i == 0 || i == nx - 1 {
                    0.0
                } else {
                    let (wp, wm) = weights[i];
                    wp * (u[i + 1] - u[i]) + wm * (u[i - 1] - u[i])
                };
                let (m, rate) = match control {
                    Control::Optimal => {
                        if i == 0 || i == nx - 1 {
                            (m_max, boundary_cost)
                        } else {
                            let m = optimal_multiplier(half_var * curv.max(0.0), kappa, m_max);
                            (m, half_var * m as f64 * curv + kappa * g(m as f64))
                        }
                    }
                    Control::Frozen(rho) => {
                        let r = rho(t_mid, x[i]);
                        (r.round() as u32, half_var * r * curv + kappa * g(r))
                    }
                };
                *out = u[i] + dt * rate;
                *m_out = m as u16;
            });
        std::mem::swap(&mut u, &mut next);
        if record {
            policy_at_s0[k] = m_row[centre];
            if k % stride == 0 {
                policy_steps.push(k);
                policy_field.push(m_row.clone());
            }
            if k % stride == 0 {
                value_steps.push(k);
                value_grid.push(u.clone());
            }
        }
    }
    value_steps.reverse();
    value_grid.reverse();
    policy_steps.reverse();
    policy_field.reverse();

    let pos = (s0.ln() - grid.x_min) / h;
    let i = (pos.floor() as usize).min(nx - 2);
    let w = pos - i as f64;
    let value_at_s0 = (1.0 - w) * u[i] + w * u[i + 1];
    Run {
        value_at_s0,
        value_steps,
        value_grid,
        policy_steps,
        policy_field,
        policy_at_s0,
        x,
    }
}

fn into_solution(r: Run, grid: HJBGrid) -> LimitSolution {
    LimitSolution {
        value_at_s0: r.value_at_s0,
        grid,
        x: r.x,
        value_steps: r.value_steps,
        value_grid: r.value_grid,
        policy_steps: r.policy_steps,
        policy_field: r.policy_field,
        policy_at_s0: r.policy_at_s0,
    }
}

/// Value of the scaling-limit control problem by a monotone explicit scheme.
///
/// The spatial operator is the three-point second difference of `V` in the
/// price variable on the exponential node set, which keeps both neighbour
/// weights positive and is exact for affine payoffs. Boundary nodes carry zero
/// curvature, so only the cost term `kappa g(m_max)` acts there.
pub fn solve_hjb(
    s0: f64,
    sigma: f64,
    kappa: f64,
    payoff: &PayoffSpec,
    grid: HJBGrid,
) -> Result<LimitSolution> {
    check_inputs(s0, sigma, kappa, payoff, &grid)?;
    Ok(into_solution(
        run(s0, sigma, kappa, payoff, &grid, Control::Optimal, true),
        grid,
    ))
}

/// Policy evaluation: the multiplier is fixed to `rho(t, x)` instead of optimised.
///
/// `rho` is sampled at the midpoint of each time step and must stay in
/// `[1, m_max]`. The stored multiplier field holds `rho` rounded to an integer.
pub fn solve_hjb_frozen(
    s0: f64,
    sigma: f64,
    kappa: f64,
    payoff: &PayoffSpec,
    grid: HJBGrid,
    rho: impl Fn(f64, f64) -> f64 + Sync,
) -> Result<LimitSolution> {
    check_inputs(s0, sigma, kappa, payoff, &grid)?;
    let dt = 1.0 / grid.nt as f64;
    let h = grid.dx();
    for k in 0..grid.nt {
        for i in 0..grid.nx {
            let r = rho((k as f64 + 0.5) * dt, grid.x_min + i as f64 * h);
            if !(r >= 1.0 && r <= grid.m_max as f64) {
                return Err(Error::input(format!(
                    "frozen multiplier {r} outside [1, {}] at step {k}, node {i}",
                    grid.m_max
                )));
            }
        }
    }
    Ok(into_solution(
        run(s0, sigma, kappa, payoff, &grid, Control::Frozen(&rho), true),
        grid,
    ))
}

/// Solve on `grid` and on the grid with half the space points, reporting
/// `tolerance = 2 |fine - coarse|` as the discretisation error estimate.
pub fn hjb_refinement(
    s0: f64,
    sigma: f64,
    kappa: f64,
    payoff: &PayoffSpec,
    grid: HJBGrid,
) -> Result<RefinementEstimate> {
    check_inputs(s0, sigma, kappa, payoff, &grid)?;
    let mut coarse_grid = HJBGrid {
        nx: (grid.nx - 1) / 2 + 1,
        ..grid
    };
    if coarse_grid.nx < 3 {
        return Err(Error::input("grid too small to refine"));
    }
    coarse_grid.nt = coarse_grid.min_nt(sigma).max(grid.nt.div_ceil(4));
    let fine = run(s0, sigma, kappa, payoff, &grid, Control::Optimal, false).value_at_s0;
    let coarse = run(
        s0,
        sigma,
        kappa,
        payoff,
        &coarse_grid,
        Control::Optimal,
        false,
    )
    .value_at_s0;
    let delta = (fine - coarse).abs();
    Ok(RefinementEstimate {
        fine,
        coarse,
        delta,
        tolerance: 2.0 * delta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::limit::bs_price;
    use approx::assert_abs_diff_eq;

    fn grid(m_max: u32, nx: usize) -> HJBGrid {
        HJBGrid::centered(100.0, 0.2, m_max, nx)
    }

    #[test]
    fn cfl_error_names_minimal_nt() {
        let g = grid(16, 201);
        let err = solve_hjb(
            100.0,
            0.2,
            0.5,
            &PayoffSpec::call(100.0).unwrap(),
            g.with_nt(g.nt - 1),
        )
        .unwrap_err();
        assert!(err.to_string().contains(&g.nt.to_string()), "{err}");
        assert!(err.is_validation());
    }

    #[test]
    fn zero_cost_is_black_scholes() {
        let call = PayoffSpec::call(100.0).unwrap();
        let sol = solve_hjb(100.0, 0.2, 0.0, &call, grid(16, 801)).unwrap();
        assert_abs_diff_eq!(sol.value_at_s0, bs_price(100.0, 0.2, &call), epsilon = 0.01);
        assert!(sol.policy_at_s0.iter().all(|&m| m == 1));
    }

    #[test]
    fn affine_is_exact() {
        let f = PayoffSpec::affine(0.0, 1.0).unwrap();
        let sol = solve_hjb(100.0, 0.2, 0.5, &f, grid(16, 201)).unwrap();
        assert_abs_diff_eq!(sol.value_at_s0, 100.0 + 0.5 / 16.0, epsilon = 1e-9);
        assert!(sol.policy_field.iter().flatten().all(|&m| m == 16));
        for (a, b) in sol.terminal_slice().iter().zip(&sol.x) {
            assert_abs_diff_eq!(*a, b.exp(), epsilon = 1e-12);
        }
    }

    #[test]
    fn call_sandwich() {
        let call = PayoffSpec::call(100.0).unwrap();
        let sol = solve_hjb(100.0, 0.2, 0.5, &call, grid(16, 401)).unwrap();
        let bs = bs_price(100.0, 0.2, &call);
        assert!(
            sol.value_at_s0 >= bs - 0.01 && sol.value_at_s0 <= bs + 0.5 + 0.01,
            "{}",
            sol.value_at_s0
        );
    }

    #[test]
    fn frozen_constant_rho() {
        let call = PayoffSpec::call(100.0).unwrap();
        let sol = solve_hjb_frozen(100.0, 0.2, 0.3, &call, grid(4, 401), |_, _| 4.0).unwrap();
        assert_abs_diff_eq!(
            sol.value_at_s0,
            bs_price(100.0, 0.4, &call) + 0.3 * 0.25,
            epsilon = 0.01
        );
        assert!(solve_hjb_frozen(100.0, 0.2, 0.3, &call, grid(4, 101), |_, _| 5.0).is_err());
    }
}
