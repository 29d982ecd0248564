//! Command-line experiment runner. Every subcommand writes one CSV table
//! with a header row; floats carry 12 significant digits so reruns with the
//! same flags are byte-identical.

use std::fmt::Write as _;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use greencoin::analytics::{
    bound_constants, distribution, expected_mined_explicit, expected_mined_implicit, log_grid, survivor_set_mean,
    tail_bound, upper_bound_explicit, upper_bound_implicit, Scheme, DEFAULT_TRUNCATION,
};
use greencoin::chain::Variant;
use greencoin::nursing::{loss_asymptote, loss_probability_exact_with, loss_probability_simulated_with};
use greencoin::params::parse_count;
use greencoin::simulator::{
    simulate_contention, simulate_contention_by_level, simulate_leader_election, simulate_network, NetworkConfig,
    SimConfig,
};
use greencoin::{AnalyticsError, NursingError, ParamsError, ProtocolParams, SimError};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Invalid parameters or grid; exit code 2.
    #[error("{0}")]
    InvalidInput(String),
    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::InvalidInput(_) => 2,
            CliError::Io(_) => 1,
        }
    }
}

macro_rules! spec_error {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::InvalidInput(e.to_string())
            }
        }
    )*};
}
spec_error!(ParamsError, AnalyticsError, SimError, NursingError);

fn count(text: &str) -> Result<u64, String> {
    parse_count(text).map_err(|e| e.to_string())
}

#[derive(Parser, Debug)]
#[command(name = "greencoin", version, about = "Nonce-free mining staircase experiments (CSV output)")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Write the table here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<std::path::PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct StaircaseArgs {
    /// Staircase steps.
    #[arg(long, default_value = "8", value_parser = count)]
    pub k: u64,
    /// Contender bound; `2^32` syntax accepted.
    #[arg(long = "N", default_value = "2^32", value_parser = count)]
    pub big_n: u64,
    /// Hash width in bits.
    #[arg(long = "H", default_value = "256", value_parser = count)]
    pub hash_bits: u64,
}

impl StaircaseArgs {
    pub fn params(&self) -> Result<ProtocolParams, CliError> {
        let k = u32::try_from(self.k).map_err(|_| CliError::InvalidInput(format!("k too large: {}", self.k)))?;
        let h =
            u32::try_from(self.hash_bits).map_err(|_| CliError::InvalidInput(format!("H too large: {}", self.hash_bits)))?;
        Ok(ProtocolParams::new(k, self.big_n, h)?)
    }
}

#[derive(Args, Debug, Clone)]
pub struct GridArgs {
    /// Single contender count; overrides the grid.
    #[arg(long, value_parser = count)]
    pub n: Option<u64>,
    #[arg(long, default_value = "1", value_parser = count)]
    pub n_min: u64,
    #[arg(long, default_value = "2^20", value_parser = count)]
    pub n_max: u64,
    #[arg(long, default_value = "16")]
    pub points_per_decade: u32,
}

impl GridArgs {
    pub fn values(&self) -> Result<Vec<u64>, CliError> {
        if let Some(n) = self.n {
            return Ok(vec![n]);
        }
        if self.n_min == 0 || self.n_min > self.n_max || self.points_per_decade == 0 {
            return Err(CliError::InvalidInput(format!(
                "bad grid: n-min={} n-max={} points-per-decade={}",
                self.n_min, self.n_max, self.points_per_decade
            )));
        }
        Ok(log_grid(self.n_min, self.n_max, self.points_per_decade))
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum SchemeArg {
    Explicit,
    Implicit,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Explicit => Scheme::Explicit,
            SchemeArg::Implicit => Scheme::Implicit,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum NetworkVariant {
    Implicit,
    TimeModerated,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Staircase table: probabilities and call values per level.
    Params(StaircaseArgs),
    /// Exact expected number of simultaneously mined blocks with its bounds.
    Expected {
        #[command(flatten)]
        staircase: StaircaseArgs,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Monte Carlo contests: mean, standard error and full histogram.
    Simulate {
        #[command(flatten)]
        staircase: StaircaseArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, default_value = "1000", value_parser = count)]
        trials: u64,
        #[arg(long, default_value = "0")]
        seed: u64,
        #[arg(long, value_enum, default_value = "explicit")]
        scheme: SchemeArg,
        /// Sample per-level pass counts instead of individual hashes.
        #[arg(long)]
        by_level: bool,
    },
    /// Exact law of the mined count at one `n`, with tail and tail bound.
    Distribution {
        #[command(flatten)]
        staircase: StaircaseArgs,
        #[arg(long, default_value = "10000", value_parser = count)]
        n: u64,
        #[arg(long, value_enum, default_value = "explicit")]
        scheme: SchemeArg,
    },
    /// Explicit against implicit expectations.
    Compare {
        #[command(flatten)]
        staircase: StaircaseArgs,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Loss probability of a nurse holding `x` times the opponent's blocks.
    Nursing {
        #[command(flatten)]
        staircase: StaircaseArgs,
        /// Single ratio; otherwise a log grid over [x-min, x-max].
        #[arg(long)]
        x: Option<f64>,
        #[arg(long, default_value = "0.01")]
        x_min: f64,
        #[arg(long, default_value = "100")]
        x_max: f64,
        #[arg(long, default_value = "10")]
        points_per_decade: u32,
        /// Single row with `A` nursing `m` blocks against 100 (`x = m / 100`).
        #[arg(long, value_parser = count)]
        m: Option<u64>,
        #[arg(long, default_value = "10000", value_parser = count)]
        trials: u64,
        #[arg(long, default_value = "0")]
        seed: u64,
        #[arg(long, value_enum, default_value = "explicit")]
        scheme: SchemeArg,
    },
    /// Discrete-event run of several block servers.
    Network {
        #[command(flatten)]
        staircase: StaircaseArgs,
        #[arg(long, value_enum, default_value = "implicit")]
        variant: NetworkVariant,
        #[arg(long, default_value = "10")]
        nodes: usize,
        /// Transaction batches per node per second.
        #[arg(long, default_value = "0.1")]
        rate: f64,
        /// Minimal gap time, seconds.
        #[arg(long, default_value = "60")]
        mgt: f64,
        /// Clock offset bound, seconds.
        #[arg(long, default_value = "0")]
        drift: f64,
        /// One-way latency bound, seconds.
        #[arg(long, default_value = "0")]
        latency: f64,
        /// Simulated seconds.
        #[arg(long, default_value = "3600")]
        duration: f64,
        #[arg(long, default_value = "0")]
        seed: u64,
        /// Skip slot gating (implicit control run).
        #[arg(long)]
        ungated: bool,
        #[arg(long, default_value = "1")]
        empty_miners: usize,
    },
    /// Coin-tossing leader election: last non-empty survivor set.
    Election {
        /// Head probability.
        #[arg(long, default_value = "0.5")]
        p: f64,
        #[arg(long, default_value = "2^20", value_parser = count)]
        n: u64,
        #[arg(long, default_value = "10000", value_parser = count)]
        trials: u64,
        #[arg(long, default_value = "0")]
        seed: u64,
    },
}

/// `%.12g`-style formatting.
pub fn g12(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific notation");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if (-5..12).contains(&exp) {
        trim(&format!("{:.*}", (11 - exp).max(0) as usize, x))
    } else {
        format!("{}e{}", trim(mantissa), exp)
    }
}

/// `2^e` for exact powers of two, else the 12-digit value.
fn pow2_or_g12(x: f64) -> String {
    let e = x.log2();
    if e.fract() == 0.0 && 2f64.powi(e as i32) == x {
        if e == 0.0 {
            "1".into()
        } else {
            format!("2^{e}")
        }
    } else {
        g12(x)
    }
}

pub fn params_table(params: &ProtocolParams) -> String {
    let mut out = String::from("level,probability,call_value,call_value_hex\n");
    for (level, (prob, call)) in params.probabilities().iter().zip(params.call_schedule().values()).enumerate() {
        let next = call + 1u8;
        let form = if next.count_ones() == 1 { format!("2^{}-1", next.bits() - 1) } else { call.to_str_radix(10) };
        let _ = writeln!(out, "{level},{},{form},{}", pow2_or_g12(*prob), call.to_str_radix(16));
    }
    out
}

pub fn expected_table(params: &ProtocolParams, grid: &[u64]) -> Result<String, CliError> {
    let constants = bound_constants(params, DEFAULT_TRUNCATION)?;
    let mut out = String::from("n,expected_explicit,expected_implicit,upper_bound,upper_bound_implicit\n");
    for &n in grid {
        let _ = writeln!(
            out,
            "{n},{},{},{},{}",
            g12(expected_mined_explicit(params, n)?),
            g12(expected_mined_implicit(params, n)?),
            g12(upper_bound_explicit(params, n, &constants)),
            g12(upper_bound_implicit(params, n, &constants)),
        );
    }
    Ok(out)
}

pub struct SimulateRun {
    pub trials: u64,
    pub seed: u64,
    pub scheme: Scheme,
    pub by_level: bool,
}

pub fn simulate_table(params: &ProtocolParams, grid: &[u64], run: &SimulateRun) -> Result<String, CliError> {
    let mut out = String::from("n,trials,mean,stderr,exact_mean,histogram\n");
    let (trials, scheme) = (run.trials, run.scheme);
    for &n in grid {
        let config = SimConfig { params: params.clone(), n, trials, master_seed: run.seed, scheme };
        let empirical =
            if run.by_level { simulate_contention_by_level(&config)? } else { simulate_contention(&config)? };
        let exact = match scheme {
            Scheme::Explicit => expected_mined_explicit(params, n)?,
            Scheme::Implicit => expected_mined_implicit(params, n)?,
        };
        let histogram: Vec<String> = empirical.counts().iter().map(|(m, c)| format!("{m}:{c}")).collect();
        let _ = writeln!(
            out,
            "{n},{trials},{},{},{},{}",
            g12(empirical.mean()),
            g12(empirical.std_error()),
            g12(exact),
            histogram.join(";")
        );
    }
    Ok(out)
}

pub fn distribution_table(params: &ProtocolParams, n: u64, scheme: Scheme) -> Result<String, CliError> {
    let dist = distribution(params, n, scheme)?;
    let mut out = String::from("m,pmf,tail,tail_bound\n");
    for (m, (pmf, tail)) in dist.pmf().iter().zip(dist.tails()).enumerate() {
        // Every contest mines at least one block, so no bound is needed at m = 0.
        let bound = if m == 0 { 1.0 } else { tail_bound(params, m as u64)? };
        let _ = writeln!(out, "{m},{},{},{}", g12(*pmf), g12(tail), g12(bound));
    }
    Ok(out)
}

pub fn compare_table(params: &ProtocolParams, grid: &[u64]) -> Result<String, CliError> {
    let mut out = String::from("n,expected_explicit,expected_implicit,difference\n");
    for &n in grid {
        let (e, i) = (expected_mined_explicit(params, n)?, expected_mined_implicit(params, n)?);
        let _ = writeln!(out, "{n},{},{},{}", g12(e), g12(i), g12(e - i));
    }
    Ok(out)
}

pub struct NursingRun {
    pub xs: Vec<f64>,
    pub trials: u64,
    pub seed: u64,
    pub scheme: Scheme,
}

pub fn nursing_table(params: &ProtocolParams, run: &NursingRun) -> Result<String, CliError> {
    let mut out = String::from("x,L_asymptote,L_exact_n100,L_exact_n10000,L_mc\n");
    let scaled = |x: f64, n: u64| (x * n as f64).round() as u64;
    for (row, &x) in run.xs.iter().enumerate() {
        let asymptote = loss_asymptote(params.p(), x)?;
        let small = loss_probability_exact_with(params, scaled(x, 100), 100, run.scheme)?;
        let large = loss_probability_exact_with(params, scaled(x, 10_000), 10_000, run.scheme)?;
        let seed = run.seed.wrapping_add(row as u64);
        let mc = loss_probability_simulated_with(params, scaled(x, 100), 100, run.trials, seed, run.scheme)?;
        let _ =
            writeln!(out, "{},{},{},{},{}", g12(x), g12(asymptote), g12(small), g12(large), g12(mc.loss_probability));
    }
    Ok(out)
}

fn x_grid(x_min: f64, x_max: f64, per_decade: u32) -> Result<Vec<f64>, CliError> {
    if !(x_min > 0.0 && x_min <= x_max && x_max.is_finite() && per_decade > 0) {
        return Err(CliError::InvalidInput(format!("bad x grid: [{x_min}, {x_max}] with {per_decade} points per decade")));
    }
    let decades = (x_max / x_min).log10();
    let steps = (decades * f64::from(per_decade)).round() as u32;
    Ok((0..=steps).map(|i| x_min * 10f64.powf(f64::from(i) / f64::from(per_decade))).collect())
}

/// Runs one subcommand and returns the CSV text.
pub fn run(command: &Command) -> Result<String, CliError> {
    match command {
        Command::Params(staircase) => Ok(params_table(&staircase.params()?)),
        Command::Expected { staircase, grid } => expected_table(&staircase.params()?, &grid.values()?),
        Command::Simulate { staircase, grid, trials, seed, scheme, by_level } => {
            let run = SimulateRun { trials: *trials, seed: *seed, scheme: (*scheme).into(), by_level: *by_level };
            simulate_table(&staircase.params()?, &grid.values()?, &run)
        }
        Command::Distribution { staircase, n, scheme } => {
            distribution_table(&staircase.params()?, *n, (*scheme).into())
        }
        Command::Compare { staircase, grid } => compare_table(&staircase.params()?, &grid.values()?),
        Command::Nursing { staircase, x, x_min, x_max, points_per_decade, m, trials, seed, scheme } => {
            let xs = match (x, m) {
                (Some(x), _) => vec![*x],
                (None, Some(m)) => vec![*m as f64 / 100.0],
                (None, None) => x_grid(*x_min, *x_max, *points_per_decade)?,
            };
            let run = NursingRun { xs, trials: *trials, seed: *seed, scheme: (*scheme).into() };
            nursing_table(&staircase.params()?, &run)
        }
        Command::Network {
            staircase,
            variant,
            nodes,
            rate,
            mgt,
            drift,
            latency,
            duration,
            seed,
            ungated,
            empty_miners,
        } => {
            let variant = match variant {
                NetworkVariant::Implicit => Variant::Implicit,
                NetworkVariant::TimeModerated => Variant::TimeModerated,
            };
            let config = NetworkConfig {
                node_count: *nodes,
                candidate_rate: *rate,
                mgt: *mgt,
                clock_drift_bound: *drift,
                latency_bound: *latency,
                duration: *duration,
                seed: *seed,
                slot_gating: !ungated,
                empty_miners: *empty_miners,
                ..NetworkConfig::new(Arc::new(staircase.params()?), variant)
            };
            let report = simulate_network(&config)?;
            let mut out = String::from("metric,value\n");
            for line in report.to_string().lines() {
                let (key, value) = line.split_once('=').expect("key=value report");
                let value = if value.contains(',') { format!("\"{value}\"") } else { value.to_string() };
                let _ = writeln!(out, "{key},{value}");
            }
            let _ = writeln!(out, "fork_rate_per_hour,{}", g12(report.fork_rate()));
            let _ = writeln!(out, "forks_per_block,{}", g12(report.forks_per_block()));
            Ok(out)
        }
        Command::Election { p, n, trials, seed } => {
            let stats = simulate_leader_election(*p, *n, *trials, *seed)?;
            let expected = survivor_set_mean(*p)?;
            let log_n = (*n as f64).ln() / (1.0 / p).ln();
            Ok(format!(
                "p,n,trials,mean_survivors,survivors_stderr,expected_survivors,mean_rounds,rounds_stderr,log_n\n{},{n},{trials},{},{},{},{},{},{}\n",
                g12(*p),
                g12(stats.mean_survivors),
                g12(stats.survivors_std_error),
                g12(expected),
                g12(stats.mean_rounds),
                g12(stats.rounds_std_error),
                g12(log_n),
            ))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(g12(1.0), "1");
        assert_eq!(g12(0.5), "0.5");
        assert_eq!(g12(1.0 / 3.0), "0.333333333333");
        assert_eq!(g12(2.8741190267709817), "2.87411902677");
        assert_eq!(g12(9.99999999999951), "10");
        assert_eq!(g12(2f64.powi(-32)), "2.32830643654e-10");
        assert_eq!(g12(1e15), "1e15");
        assert_eq!(g12(-0.25), "-0.25");
    }

    #[test]
    fn powers_of_two() {
        assert_eq!(pow2_or_g12(2f64.powi(-32)), "2^-32");
        assert_eq!(pow2_or_g12(1.0), "1");
        assert_eq!(pow2_or_g12(0.3), "0.3");
    }

    #[test]
    fn bad_grids_are_spec_errors() {
        let grid = GridArgs { n: None, n_min: 10, n_max: 5, points_per_decade: 4 };
        assert_eq!(grid.values().unwrap_err().exit_code(), 2);
        assert!(x_grid(0.0, 1.0, 3).is_err());
        assert_eq!(x_grid(0.01, 100.0, 1).unwrap().len(), 5);
    }
}
