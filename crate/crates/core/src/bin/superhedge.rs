use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use superhedge::lab::{run_experiment, ExperimentConfig, Mode};
use superhedge::{Error, PayoffSpec};

#[derive(Parser)]
#[command(
    name = "superhedge",
    version,
    about = "Super-replication prices under fixed transaction costs"
)]
struct Cli {
    /// JSON experiment config; command-line flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for config.json, report.json and tables.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact super-replication price in the n-step binomial model.
    PriceBinomial(Overrides),
    /// Scaling-limit price from the HJB equation.
    PriceLimit(Overrides),
    /// Binomial prices with costs kappa/n against the HJB value.
    Converge(Overrides),
    /// Check the dual hedge pathwise.
    VerifyHedge(Overrides),
    /// Block-mixing scheme for a multiplier schedule.
    Scheme(Overrides),
    /// Brute-force primal price for n <= 3.
    OraclePrimal(Overrides),
    /// Partition lower-bound check.
    PartitionCheck(Overrides),
    /// Binomial prices at fixed cost against the buy-and-hold bound.
    FixedKappaSweep(Overrides),
}

#[derive(Args, Default)]
struct Overrides {
    #[arg(long)]
    s0: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
    /// e.g. call:100, put:90, straddle:100, pwl:0,0;100,1, power:2,150
    #[arg(long)]
    payoff: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    /// Comma-separated step counts for sweeps.
    #[arg(long, value_delimiter = ',')]
    ns: Option<Vec<usize>>,
    #[arg(long)]
    run_cap: Option<usize>,
    #[arg(long)]
    mmax: Option<u32>,
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    nt: Option<usize>,
    /// Multiplier schedule "t0:rho0,t1:rho1,..." or "hjb".
    #[arg(long)]
    rho: Option<String>,
    #[arg(long)]
    rho_intervals: Option<usize>,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    mc_steps: Option<usize>,
    #[arg(long)]
    capital: Option<f64>,
    /// Sampled verification with this many paths.
    #[arg(long, conflicts_with = "exhaustive")]
    samples: Option<usize>,
    /// Check all 2^n paths (the default when --samples is absent).
    #[arg(long)]
    exhaustive: bool,
    /// Comma-separated partition steps in units of 1/n.
    #[arg(long, value_delimiter = ',')]
    pattern: Option<Vec<usize>>,
    #[arg(long)]
    partition_csv: Option<PathBuf>,
    /// Target intensity as a schedule, e.g. "0:1.5".
    #[arg(long)]
    b: Option<String>,
    #[arg(long)]
    policy_out: Option<PathBuf>,
    #[arg(long)]
    parallel: bool,
    #[arg(long)]
    timing: bool,
}

impl Command {
    fn split(self) -> (Mode, Overrides) {
        match self {
            Command::PriceBinomial(o) => (Mode::PriceBinomial, o),
            Command::PriceLimit(o) => (Mode::PriceLimit, o),
            Command::Converge(o) => (Mode::Converge, o),
            Command::VerifyHedge(o) => (Mode::VerifyHedge, o),
            Command::Scheme(o) => (Mode::Scheme, o),
            Command::OraclePrimal(o) => (Mode::OraclePrimal, o),
            Command::PartitionCheck(o) => (Mode::PartitionCheck, o),
            Command::FixedKappaSweep(o) => (Mode::FixedKappaSweep, o),
        }
    }
}

fn build_config(cli: Cli) -> Result<ExperimentConfig, Error> {
    let (mode, o) = cli.cmd.split();
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::new(mode),
    };
    cfg.mode = mode;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if cli.out.is_some() {
        cfg.out = cli.out;
    }
    let m = &mut cfg.market;
    m.s0 = o.s0.unwrap_or(m.s0);
    m.sigma = o.sigma.unwrap_or(m.sigma);
    m.kappa = o.kappa.unwrap_or(m.kappa);
    if let Some(text) = o.payoff {
        cfg.payoff = text.parse::<PayoffSpec>()?;
    }
    let p = &mut cfg.params;
    p.n = o.n.unwrap_or(p.n);
    if let Some(ns) = o.ns {
        p.n_list = ns;
    }
    p.run_cap = o.run_cap.or(p.run_cap);
    p.m_max = o.mmax.unwrap_or(p.m_max);
    p.nx = o.nx.unwrap_or(p.nx);
    p.nt = o.nt.or(p.nt);
    p.rho = o.rho.or(p.rho.take());
    p.rho_intervals = o.rho_intervals.unwrap_or(p.rho_intervals);
    p.paths = o.paths.unwrap_or(p.paths);
    p.mc_steps = o.mc_steps.unwrap_or(p.mc_steps);
    p.capital = o.capital.or(p.capital);
    p.samples = if o.exhaustive { None } else { o.samples.or(p.samples) };
    p.pattern = o.pattern.or(p.pattern.take());
    p.partition_csv = o.partition_csv.or(p.partition_csv.take());
    p.b = o.b.or(p.b.take());
    p.policy_out = o.policy_out.or(p.policy_out.take());
    p.parallel |= o.parallel;
    p.timing |= o.timing;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Error> {
    let cfg = build_config(cli)?;
    let outcome = run_experiment(&cfg)?;
    match &cfg.out {
        Some(dir) => {
            outcome.write(dir)?;
        }
        None if cfg.params.policy_out.is_some() => {
            outcome.write(&PathBuf::from("."))?;
        }
        None => {}
    }
    let text = serde_json::to_string_pretty(&outcome.document())?;
    // a closed pipe downstream is not an error of ours
    let _ = writeln!(std::io::stdout().lock(), "{text}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let detail = e.to_string();
            let first = detail
                .lines()
                .next()
                .unwrap_or_default()
                .trim_start_matches("error: ");
            let line = serde_json::json!({ "error": "usage", "message": first });
            eprintln!("{line}");
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{line}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
