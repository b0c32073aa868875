//! Command-line surface of `brwldp`: rate tables, exact oracle runs,
//! dominance checks and Monte Carlo summaries.

pub mod commands;
pub mod error;
pub mod grid;
pub mod output;

use std::hash::{BuildHasher, Hasher};
use std::path::{Path, PathBuf};

use brwldp_core::exact::{Direction, RateMode};
use brwldp_core::mc::{BrwSampler, Quantity, SimOptions, DEFAULT_BUDGET, DEFAULT_CONFIDENCE, MIN_REPLICATES};
use brwldp_core::Model;
use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};

use crate::commands::simulate::{Mode, SimulateConfig};
pub use crate::error::{CliError, CliResult};
use crate::grid::Grid;

pub const THREADS_ENV: &str = "BRWLDP_THREADS";

#[derive(Debug, Parser)]
#[command(name = "brwldp", version, about = "Large deviations of branching random walk maxima")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rate functions I, I_ind, I_brw and the optimal time fraction over an x-grid.
    Rates(RatesArgs),
    /// Exact lattice probabilities of M_n and M~_n with finite-n decay rates.
    Exact(ExactArgs),
    /// Exact CDF tables of M_n and M~_n.
    Cdf(CdfArgs),
    /// Exact Galton–Watson lower-deviation probabilities.
    Gw(GwArgs),
    /// Check that M_n is stochastically dominated by M~_n.
    Dominance(DominanceArgs),
    /// Monte Carlo estimates with confidence intervals.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
pub struct RatesArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// LO:HI:STEP
    #[arg(long)]
    pub xgrid: Grid,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Add the speed x* to the grid.
    #[arg(long)]
    pub with_speed: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum RateModeArg {
    Successive,
    Slope,
}

impl From<RateModeArg> for RateMode {
    fn from(m: RateModeArg) -> Self {
        match m {
            RateModeArg::Successive => RateMode::Successive,
            RateModeArg::Slope => RateMode::Slope,
        }
    }
}

#[derive(Debug, Args)]
pub struct ExactArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub xgrid: Grid,
    /// Generations, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub n: Vec<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Condition on {Z_n > 0}.
    #[arg(long, default_value_t = true, action = ArgAction::Set)]
    pub conditioned: bool,
    #[arg(long, value_enum, default_value_t = RateModeArg::Successive)]
    pub rate_mode: RateModeArg,
}

#[derive(Debug, Args)]
pub struct CdfArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, value_delimiter = ',', required = true)]
    pub n: Vec<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GwArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Grid of x in [0, log m]; the event is {Z_n <= e^{xn}}.
    #[arg(long)]
    pub xgrid: Grid,
    #[arg(long, value_delimiter = ',', required = true)]
    pub n: Vec<usize>,
    /// Largest population count the truncated pmf may track.
    #[arg(long)]
    pub kcap: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = RateModeArg::Successive)]
    pub rate_mode: RateModeArg,
}

#[derive(Debug, Args)]
pub struct DominanceArgs {
    #[arg(long, required_unless_present = "from_csv")]
    pub model: Option<PathBuf>,
    /// Largest generation checked.
    #[arg(long)]
    pub n: usize,
    /// Check a CDF table written by `cdf` instead of recomputing it.
    #[arg(long)]
    pub from_csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum QuantityArg {
    BrwMax,
    IndMax,
    GwCount,
}

impl From<QuantityArg> for Quantity {
    fn from(q: QuantityArg) -> Self {
        match q {
            QuantityArg::BrwMax => Quantity::BrwMax,
            QuantityArg::IndMax => Quantity::IndMax,
            QuantityArg::GwCount => Quantity::GwCount,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DirectionArg {
    AtMost,
    AtLeast,
}

impl From<DirectionArg> for Direction {
    fn from(d: DirectionArg) -> Self {
        match d {
            DirectionArg::AtMost => Direction::AtMost,
            DirectionArg::AtLeast => Direction::AtLeast,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SamplerArg {
    /// One position per particle.
    Particles,
    /// Particle counts per lattice site; lattice models only.
    Occupation,
}

impl From<SamplerArg> for BrwSampler {
    fn from(s: SamplerArg) -> Self {
        match s {
            SamplerArg::Particles => BrwSampler::Particles,
            SamplerArg::Occupation => BrwSampler::Occupation,
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, value_enum)]
    pub mode: Mode,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 10_000)]
    pub replicates: u64,
    /// Generated and echoed on stderr when absent.
    #[arg(long)]
    pub seed: Option<u64>,
    /// JSON summary path (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-replicate CSV.
    #[arg(long)]
    pub snapshots: Option<PathBuf>,
    /// Particle-steps per replicate before it is censored.
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    pub budget: u64,
    #[arg(long, default_value_t = DEFAULT_CONFIDENCE)]
    pub confidence: f64,
    /// Branching random walk sampler.
    #[arg(long, value_enum, default_value_t = SamplerArg::Particles)]
    pub sampler: SamplerArg,
    #[arg(long, default_value_t = true, action = ArgAction::Set)]
    pub conditioned: bool,
    /// Tilted-tail level.
    #[arg(long, allow_hyphen_values = true)]
    pub x: Option<f64>,
    #[arg(long, value_enum, default_value_t = QuantityArg::BrwMax)]
    pub quantity: QuantityArg,
    #[arg(long, value_enum, default_value_t = DirectionArg::AtMost)]
    pub direction: DirectionArg,
    #[arg(long, allow_hyphen_values = true)]
    pub threshold: Option<f64>,
}

pub fn load_model(path: &Path) -> CliResult<Model> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::io(path.display().to_string(), e))?;
    Ok(Model::from_json_str(&text)?)
}

/// Caps the global worker pool from `BRWLDP_THREADS`.
pub fn configure_threads() -> CliResult<()> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| CliError::config(format!("{THREADS_ENV} must be a positive integer, got `{value}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::config(format!("cannot configure thread pool: {e}")))
}

fn fresh_seed() -> u64 {
    let mut h = std::collections::hash_map::RandomState::new().build_hasher();
    h.write_u128(
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_nanos())
            .unwrap_or_default(),
    );
    h.finish()
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Rates(a) => {
            let model = load_model(&a.model)?;
            commands::rates::run(&model, &a.xgrid.points(), a.with_speed, a.out.as_deref())
        }
        Command::Exact(a) => {
            let model = load_model(&a.model)?;
            commands::exact::run(
                &model,
                &a.xgrid.points(),
                &a.n,
                a.conditioned,
                a.rate_mode.into(),
                a.out.as_deref(),
            )
        }
        Command::Cdf(a) => {
            let model = load_model(&a.model)?;
            commands::cdf::run(&model, &a.n, a.out.as_deref())
        }
        Command::Gw(a) => {
            let model = load_model(&a.model)?;
            commands::gw::run(
                &model,
                &a.xgrid.points(),
                &a.n,
                a.kcap,
                a.rate_mode.into(),
                a.out.as_deref(),
            )
        }
        Command::Dominance(a) => match (&a.from_csv, &a.model) {
            (Some(csv), _) => commands::dominance::run_csv(csv, a.n),
            (None, Some(m)) => commands::dominance::run(&load_model(m)?, a.n),
            (None, None) => Err(CliError::config("--model or --from-csv is required")),
        },
        Command::Simulate(a) => {
            if a.replicates < MIN_REPLICATES {
                return Err(CliError::config(format!(
                    "--replicates must be at least {MIN_REPLICATES}, got {}",
                    a.replicates
                )));
            }
            if !(0.0 < a.confidence && a.confidence < 1.0) {
                return Err(CliError::config(format!(
                    "--confidence must lie in (0, 1), got {}",
                    a.confidence
                )));
            }
            let model = load_model(&a.model)?;
            let seed = a.seed.unwrap_or_else(|| {
                let s = fresh_seed();
                eprintln!("seed: {s}");
                s
            });
            let cfg = SimulateConfig {
                mode: a.mode,
                n: a.n,
                replicates: a.replicates,
                seed,
                opts: SimOptions {
                    budget: a.budget,
                    confidence: a.confidence,
                    sampler: a.sampler.into(),
                },
                conditioned: a.conditioned,
                x: a.x,
                quantity: a.quantity.into(),
                direction: a.direction.into(),
                threshold: a.threshold,
            };
            commands::simulate::run(&model, &cfg, a.out.as_deref(), a.snapshots.as_deref())
                .map(|_| ())
        }
    }
}
