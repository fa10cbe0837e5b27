use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::limit::DEFAULT_M_MAX;
use crate::market::{BinomialSpec, PayoffSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    PriceBinomial,
    PriceLimit,
    Converge,
    VerifyHedge,
    Scheme,
    OraclePrimal,
    PartitionCheck,
    FixedKappaSweep,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::PriceBinomial => "price_binomial",
            Mode::PriceLimit => "price_limit",
            Mode::Converge => "converge",
            Mode::VerifyHedge => "verify_hedge",
            Mode::Scheme => "scheme",
            Mode::OraclePrimal => "oracle_primal",
            Mode::PartitionCheck => "partition_check",
            Mode::FixedKappaSweep => "fixed_kappa_sweep",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketConfig {
    pub s0: f64,
    pub sigma: f64,
    pub kappa: f64,
}

impl Default for MarketConfig {
    fn default() -> Self {
        MarketConfig {
            s0: 100.0,
            sigma: 0.2,
            kappa: 0.5,
        }
    }
}

/// Mode-specific knobs; every field has a default so partial configs work.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    /// Steps of the binomial model for single-model modes.
    pub n: usize,
    /// Step counts for sweeps, strictly increasing.
    pub n_list: Vec<usize>,
    pub run_cap: Option<usize>,
    pub m_max: u32,
    pub nx: usize,
    /// Time steps of the HJB grid; the smallest stable value when absent.
    pub nt: Option<usize>,
    /// Multiplier schedule such as `"0:1.5,0.5:2"`, or `"hjb"` to read it off the HJB policy.
    pub rho: Option<String>,
    /// Intervals used when the schedule is read off the HJB policy.
    pub rho_intervals: usize,
    /// Monte Carlo paths for the scheme cross-check; 0 disables it.
    pub paths: usize,
    pub mc_steps: usize,
    /// Capital tested by `verify_hedge`; the dual value when absent.
    pub capital: Option<f64>,
    /// Sampled paths for `verify_hedge`; exhaustive when absent.
    pub samples: Option<usize>,
    /// Partition step pattern in units of `1 / n`.
    pub pattern: Option<Vec<usize>>,
    /// CSV with the partition times in its last column.
    pub partition_csv: Option<PathBuf>,
    /// Target intensity `b` for the partition check, as a schedule string.
    pub b: Option<String>,
    /// Where `price_limit` writes the multiplier field as `t,x,m` rows.
    pub policy_out: Option<PathBuf>,
    /// Evaluate sweep rows in parallel.
    pub parallel: bool,
    /// Record wall-clock runtimes; off keeps outputs byte-identical across runs.
    pub timing: bool,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            n: 64,
            n_list: vec![16, 32, 64, 128],
            run_cap: None,
            m_max: DEFAULT_M_MAX,
            nx: 801,
            nt: None,
            rho: None,
            rho_intervals: 8,
            paths: 0,
            mc_steps: 1,
            capital: None,
            samples: None,
            pattern: None,
            partition_csv: None,
            b: None,
            policy_out: None,
            parallel: false,
            timing: false,
        }
    }
}

/// One experiment, read from a single JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    #[serde(default)]
    pub market: MarketConfig,
    #[serde(
        default = "default_payoff",
        serialize_with = "payoff_out",
        deserialize_with = "payoff_in"
    )]
    pub payoff: PayoffSpec,
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

fn default_payoff() -> PayoffSpec {
    PayoffSpec::Call { strike: 100.0 }
}

fn payoff_out<S: Serializer>(p: &PayoffSpec, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&p.to_string())
}

/// Accepts the short text form (`"call:100"`) or the tagged object form.
fn payoff_in<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<PayoffSpec, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Either {
        Text(String),
        Spec(PayoffSpec),
    }
    match Either::deserialize(d)? {
        Either::Text(t) => t.parse().map_err(serde::de::Error::custom),
        Either::Spec(p) => Ok(p),
    }
}

impl ExperimentConfig {
    pub fn new(mode: Mode) -> Self {
        ExperimentConfig {
            mode,
            market: MarketConfig::default(),
            payoff: default_payoff(),
            params: Params::default(),
            seed: 0,
            out: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        ExperimentConfig::from_json(&text)
            .map_err(|e| e.context(format!("config {}", path.display())))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn spec(&self, n: usize, kappa: f64) -> Result<BinomialSpec> {
        BinomialSpec::new(self.market.s0, self.market.sigma, n, kappa)
    }

    pub fn validate(&self) -> Result<()> {
        self.spec(self.params.n.max(1), self.market.kappa)?;
        self.payoff.validate()?;
        let p = &self.params;
        if matches!(self.mode, Mode::Converge | Mode::FixedKappaSweep) {
            if p.n_list.is_empty() || p.n_list.contains(&0) {
                return Err(Error::input("n_list must hold positive step counts"));
            }
            if p.n_list.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::input("n_list must be strictly increasing"));
            }
        } else if p.n == 0 {
            return Err(Error::input("n must be positive"));
        }
        if p.m_max == 0 || p.m_max > u16::MAX as u32 {
            return Err(Error::input(format!(
                "m_max must lie in 1..=65535, got {}",
                p.m_max
            )));
        }
        if p.mc_steps == 0 {
            return Err(Error::input("mc_steps must be positive"));
        }
        Ok(())
    }
}
