//! Experiment harness: JSON configs, sweeps and file reports.

mod config;
mod tables;

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

pub use config::{ExperimentConfig, MarketConfig, Mode, Params};
pub use tables::{
    emit_report, read_partition_times, read_report, ConvergenceRow, Format, PolicyFieldRow, Row,
    SweepRow,
};

use crate::dual::{solve_dual, RunChoice, ValueReport};
use crate::error::{Error, Result};
use crate::hedge::{
    brute_force_primal, verify_superreplication, PrimalSolution, VerifyMode, VerifyReport,
};
use crate::limit::{
    bs_price, hjb_refinement, mc_value, solve_hjb, HJBGrid, LimitSolution, McEstimate,
    RefinementEstimate, RhoSchedule,
};
use crate::market::{buy_and_hold_bound, crr_price, ExtendedReal};
use crate::scheme::{
    block_plans, eval_scheme, partition_lower_bound_check, scheme_cost_asymptote, BlockPlan,
    DeterministicPartition, PartitionCheck, StepFunction,
};

/// Result of one experiment: a JSON document plus an optional table.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub config: ExperimentConfig,
    pub result: Value,
    pub table: Option<Table>,
    pub policy_field: Option<Vec<PolicyFieldRow>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Table {
    Convergence(Vec<ConvergenceRow>),
    Sweep(Vec<SweepRow>),
}

#[derive(Debug, Clone, Serialize)]
pub struct BinomialResult {
    pub n: usize,
    pub kappa: f64,
    #[serde(flatten)]
    pub value: ValueReport,
    pub crr_price: f64,
    pub buy_and_hold_bound: ExtendedReal,
    pub root_choice: RunChoice,
}

#[derive(Debug, Clone, Serialize)]
pub struct LimitResult {
    pub value: f64,
    pub bs_price: f64,
    pub refinement: RefinementEstimate,
    pub grid: HJBGrid,
    pub multiplier_at_s0_t0: u16,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyResult {
    pub n: usize,
    pub kappa: f64,
    pub dual_value: f64,
    pub capital: f64,
    pub mode: VerifyMode,
    #[serde(flatten)]
    pub report: VerifyReport,
    pub super_replicates: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SchemeResult {
    pub n: usize,
    pub kappa: f64,
    pub rho: RhoSchedule,
    pub scheme: ValueReport,
    pub dual: ValueReport,
    pub interventions_per_step: f64,
    pub cost_asymptote: Option<f64>,
    pub plans: Vec<BlockPlan>,
    pub hjb_value: Option<f64>,
    pub mc: Option<McEstimate>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PrimalResult {
    pub n: usize,
    pub kappa: f64,
    pub primal: PrimalSolution,
    pub dual_value: f64,
    pub abs_gap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PartitionResult {
    pub n: usize,
    pub intervals: usize,
    pub max_step: usize,
    #[serde(flatten)]
    pub check: PartitionCheck,
}

fn elapsed_ms(start: Instant, timing: bool) -> u64 {
    if timing {
        start.elapsed().as_millis() as u64
    } else {
        0
    }
}

fn hjb_grid(cfg: &ExperimentConfig) -> HJBGrid {
    let p = &cfg.params;
    let grid = HJBGrid::centered(cfg.market.s0, cfg.market.sigma, p.m_max, p.nx);
    match p.nt {
        Some(nt) => grid.with_nt(nt),
        None => grid,
    }
}

fn hjb_solution(cfg: &ExperimentConfig) -> Result<LimitSolution> {
    let m = &cfg.market;
    solve_hjb(m.s0, m.sigma, m.kappa, &cfg.payoff, hjb_grid(cfg))
}

/// Binomial prices with costs `kappa / n` against one HJB reference value.
pub fn run_converge(cfg: &ExperimentConfig) -> Result<Vec<ConvergenceRow>> {
    cfg.validate()?;
    let hjb = hjb_solution(cfg)?.value_at_s0;
    let kappa = cfg.market.kappa;
    let row = |n: usize| -> Result<ConvergenceRow> {
        let start = Instant::now();
        let spec = cfg.spec(n, kappa / n as f64)?;
        let sol = solve_dual(&spec, &cfg.payoff, cfg.params.run_cap)
            .map_err(|e| e.context(format!("n = {n}")))?;
        let abs_gap = (sol.value - hjb).abs();
        Ok(ConvergenceRow {
            n,
            kappa_over_n: spec.kappa,
            dual_value: sol.value,
            payoff_part: sol.payoff_part,
            cost_part: sol.cost_part,
            hjb_value: hjb,
            abs_gap,
            rel_gap: abs_gap / hjb.abs(),
            runtime_ms: elapsed_ms(start, cfg.params.timing),
        })
    };
    if cfg.params.parallel {
        cfg.params.n_list.par_iter().map(|&n| row(n)).collect()
    } else {
        cfg.params.n_list.iter().map(|&n| row(n)).collect()
    }
}

/// Binomial prices at a fixed (unscaled) cost against the buy-and-hold bound.
pub fn run_fixed_kappa_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let bound = buy_and_hold_bound(cfg.market.s0, &cfg.payoff).finite();
    let row = |n: usize| -> Result<SweepRow> {
        let start = Instant::now();
        let spec = cfg.spec(n, cfg.market.kappa)?;
        let sol = solve_dual(&spec, &cfg.payoff, cfg.params.run_cap)
            .map_err(|e| e.context(format!("n = {n}")))?;
        Ok(SweepRow {
            n,
            kappa: spec.kappa,
            dual_value: sol.value,
            crr_price: crr_price(&spec, &cfg.payoff),
            bound,
            ratio: bound.map(|b| sol.value / b),
            runtime_ms: elapsed_ms(start, cfg.params.timing),
        })
    };
    if cfg.params.parallel {
        cfg.params.n_list.par_iter().map(|&n| row(n)).collect()
    } else {
        cfg.params.n_list.iter().map(|&n| row(n)).collect()
    }
}

fn scheme_rho(cfg: &ExperimentConfig, hjb: Option<&LimitSolution>) -> Result<RhoSchedule> {
    match (cfg.params.rho.as_deref(), hjb) {
        (Some("hjb"), Some(sol)) => sol.multiplier_schedule(cfg.params.rho_intervals),
        (Some(text), _) => RhoSchedule::parse_with_cap(text, cfg.params.m_max as f64),
        (None, _) => Err(Error::input(
            "scheme mode needs params.rho (a schedule or \"hjb\")",
        )),
    }
}

fn partition(cfg: &ExperimentConfig) -> Result<DeterministicPartition> {
    let p = &cfg.params;
    match (&p.pattern, &p.partition_csv) {
        (Some(pattern), None) => DeterministicPartition::from_pattern(p.n, pattern),
        (None, Some(path)) => DeterministicPartition::from_times(p.n, &read_partition_times(path)?),
        _ => Err(Error::input(
            "partition_check needs exactly one of params.pattern and params.partition_csv",
        )),
    }
}

fn target_intensity(cfg: &ExperimentConfig) -> Result<StepFunction> {
    let text = cfg
        .params
        .b
        .as_deref()
        .ok_or_else(|| Error::input("partition_check needs params.b"))?;
    let sched = RhoSchedule::parse_with_cap(text, f64::MAX)?;
    let values = sched.rules().iter().map(|r| r.max_value()).collect();
    let b = StepFunction {
        breaks: sched.breakpoints().to_vec(),
        values,
    };
    b.validate()?;
    Ok(b)
}

fn to_value<T: Serialize>(v: &T) -> Result<Value> {
    Ok(serde_json::to_value(v)?)
}

/// Run the experiment described by `cfg`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Outcome> {
    cfg.validate()?;
    let m = cfg.market;
    let p = &cfg.params;
    let mut table = None;
    let mut policy_field = None;
    let result = match cfg.mode {
        Mode::PriceBinomial => {
            let spec = cfg.spec(p.n, m.kappa)?;
            let sol = solve_dual(&spec, &cfg.payoff, p.run_cap)?;
            let root = sol
                .policy
                .get(crate::dual::DualState::root(p.n))
                .expect("root choice");
            to_value(&BinomialResult {
                n: p.n,
                kappa: m.kappa,
                value: sol.report(),
                crr_price: crr_price(&spec, &cfg.payoff),
                buy_and_hold_bound: buy_and_hold_bound(m.s0, &cfg.payoff),
                root_choice: root,
            })?
        }
        Mode::PriceLimit => {
            let sol = hjb_solution(cfg)?;
            let refinement = hjb_refinement(m.s0, m.sigma, m.kappa, &cfg.payoff, sol.grid)?;
            if p.policy_out.is_some() {
                policy_field = Some(
                    sol.policy_rows()
                        .map(|(t, x, m)| PolicyFieldRow { t, x, m })
                        .collect(),
                );
            }
            to_value(&LimitResult {
                value: sol.value_at_s0,
                bs_price: bs_price(m.s0, m.sigma, &cfg.payoff),
                refinement,
                grid: sol.grid,
                multiplier_at_s0_t0: sol.policy_at_s0[0],
            })?
        }
        Mode::Converge => {
            let rows = run_converge(cfg)?;
            let summary = json!({
                "hjb_value": rows.first().map(|r| r.hjb_value),
                "rows": rows.len(),
                "final_rel_gap": rows.last().map(|r| r.rel_gap),
            });
            table = Some(Table::Convergence(rows));
            summary
        }
        Mode::FixedKappaSweep => {
            let rows = run_fixed_kappa_sweep(cfg)?;
            let summary = json!({
                "rows": rows.len(),
                "all_below_bound": rows.iter().all(|r| r.bound.is_none_or(|b| r.dual_value <= b + 1e-12)),
            });
            table = Some(Table::Sweep(rows));
            summary
        }
        Mode::VerifyHedge => {
            let spec = cfg.spec(p.n, m.kappa)?;
            let dual_value = solve_dual(&spec, &cfg.payoff, None)?.value;
            let capital = p.capital.unwrap_or(dual_value);
            let mode = match p.samples {
                Some(count) => VerifyMode::Sampled {
                    count: count as u64,
                    seed: cfg.seed,
                },
                None => VerifyMode::Exhaustive,
            };
            let report = verify_superreplication(&spec, &cfg.payoff, capital, mode)?;
            to_value(&VerifyResult {
                n: p.n,
                kappa: m.kappa,
                dual_value,
                capital,
                mode,
                super_replicates: report.min_surplus >= -1e-9,
                report,
            })?
        }
        Mode::Scheme => {
            let spec = cfg.spec(p.n, m.kappa / p.n as f64)?;
            let hjb = if p.rho.as_deref() == Some("hjb") {
                Some(hjb_solution(cfg)?)
            } else {
                None
            };
            let rho = scheme_rho(cfg, hjb.as_ref())?;
            let scheme = eval_scheme(&spec, &cfg.payoff, &rho)?;
            let dual = solve_dual(&spec, &cfg.payoff, p.run_cap)?;
            let mc = if p.paths > 0 {
                Some(mc_value(
                    m.s0,
                    m.sigma,
                    m.kappa,
                    &cfg.payoff,
                    &rho,
                    p.paths,
                    p.mc_steps,
                    cfg.seed,
                )?)
            } else {
                None
            };
            to_value(&SchemeResult {
                n: p.n,
                kappa: m.kappa,
                plans: block_plans(&rho, &spec)?,
                cost_asymptote: scheme_cost_asymptote(&rho).ok(),
                interventions_per_step: scheme.expected_interventions / p.n as f64,
                scheme: scheme.report(),
                dual: dual.report(),
                hjb_value: hjb.map(|h| h.value_at_s0),
                rho,
                mc,
            })?
        }
        Mode::OraclePrimal => {
            let spec = cfg.spec(p.n, m.kappa)?;
            let primal = brute_force_primal(&spec, &cfg.payoff)?;
            let dual_value = solve_dual(&spec, &cfg.payoff, None)?.value;
            to_value(&PrimalResult {
                n: p.n,
                kappa: m.kappa,
                abs_gap: (primal.value - dual_value).abs(),
                dual_value,
                primal,
            })?
        }
        Mode::PartitionCheck => {
            let part = partition(cfg)?;
            let check = partition_lower_bound_check(&part, &target_intensity(cfg)?)?;
            to_value(&PartitionResult {
                n: part.n(),
                intervals: part.intervals(),
                max_step: part.max_step(),
                check,
            })?
        }
    };
    Ok(Outcome {
        config: cfg.clone(),
        result,
        table,
        policy_field,
    })
}

impl Outcome {
    /// `{"mode", "config", "result"}`, the document printed and saved as `report.json`.
    pub fn document(&self) -> Value {
        json!({
            "mode": self.config.mode.name(),
            "config": self.config,
            "result": self.result,
        })
    }

    /// Write `config.json`, `report.json` and any table (CSV and JSON) under `dir`,
    /// plus the multiplier field at `params.policy_out`. Returns the files written.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let mut written = Vec::new();
        let mut put = |name: &str, value: &Value| -> Result<()> {
            let path = dir.join(name);
            let text = serde_json::to_string_pretty(value)? + "\n";
            std::fs::write(&path, text).map_err(|source| Error::Io {
                path: path.clone(),
                source,
            })?;
            written.push(path);
            Ok(())
        };
        put("config.json", &serde_json::to_value(&self.config)?)?;
        put("report.json", &self.document())?;
        let stem = self.config.mode.name();
        match &self.table {
            Some(Table::Convergence(rows)) => write_table(rows, dir, stem, &mut written)?,
            Some(Table::Sweep(rows)) => write_table(rows, dir, stem, &mut written)?,
            None => {}
        }
        if let (Some(rows), Some(path)) = (&self.policy_field, &self.config.params.policy_out) {
            let path = if path.is_absolute() {
                path.clone()
            } else {
                dir.join(path)
            };
            emit_report(rows, Format::Csv, &path)?;
            written.push(path);
        }
        Ok(written)
    }
}

fn write_table<R: Row>(
    rows: &[R],
    dir: &Path,
    stem: &str,
    written: &mut Vec<PathBuf>,
) -> Result<()> {
    for (fmt, ext) in [(Format::Csv, "csv"), (Format::Json, "json")] {
        let path = dir.join(format!("{stem}.{ext}"));
        emit_report(rows, fmt, &path)?;
        written.push(path);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(mode: Mode) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(mode);
        cfg.params.n = 8;
        cfg.params.n_list = vec![4, 8];
        cfg.params.nx = 101;
        cfg.params.m_max = 4;
        cfg
    }

    #[test]
    fn every_mode_runs() {
        for mode in [
            Mode::PriceBinomial,
            Mode::PriceLimit,
            Mode::Converge,
            Mode::VerifyHedge,
            Mode::Scheme,
            Mode::OraclePrimal,
            Mode::PartitionCheck,
            Mode::FixedKappaSweep,
        ] {
            let mut cfg = small(mode);
            match mode {
                Mode::Scheme => cfg.params.rho = Some("0:1.5,0.5:2".into()),
                Mode::OraclePrimal => cfg.params.n = 2,
                Mode::PartitionCheck => {
                    cfg.params.pattern = Some(vec![2]);
                    cfg.params.b = Some("0:2".into());
                }
                _ => {}
            }
            let out = run_experiment(&cfg).unwrap_or_else(|e| panic!("{mode:?}: {e}"));
            assert!(out.result.is_object(), "{mode:?}");
        }
    }

    #[test]
    fn scheme_needs_rho() {
        assert!(run_experiment(&small(Mode::Scheme))
            .unwrap_err()
            .is_validation());
    }

    #[test]
    fn converge_affine_gap_is_cap_artifact() {
        let mut cfg = small(Mode::Converge);
        cfg.payoff = crate::market::PayoffSpec::affine(0.0, 1.0).unwrap();
        for r in run_converge(&cfg).unwrap() {
            assert!((r.dual_value - 100.0).abs() < 1e-10);
            assert!((r.abs_gap - 0.5 / 4.0).abs() < 1e-9, "{r:?}");
        }
    }
}
