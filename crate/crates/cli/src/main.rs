//! `ransom`: command-line front end for demand estimation, ransom pricing,
//! bargaining and campaign simulation.
//!
//! Exit status is 0 on success, 1 on a domain or I/O error (reported as JSON
//! on stderr) and 2 on a usage error.

mod commands;
mod error;
mod input;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "ransom", version, about = "Ransom pricing, bargaining and campaign simulation")]
#[command(
    after_help = "Units: money in GBP, shares and rates as fractions in [0, 1], discount factors per bargaining period."
)]
pub struct Cli {
    /// Add a Unix timestamp (seconds) to JSON reports; output is otherwise byte-reproducible
    #[arg(long, global = true)]
    pub timestamp: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Survey CSV analysis (`id,form,wtp,wta,gender,age`)
    #[command(subcommand)]
    Survey(SurveyCommand),
    /// Least-squares polynomial inverse demand from a `quantity,price` CSV
    Fit(FitArgs),
    /// Profit-maximizing ransom for a demand curve
    Optimize(OptimizeArgs),
    /// Arc elasticity between two observations and the Lerner pricing direction
    Elasticity(ElasticityArgs),
    /// Trial-and-error price search against a demand oracle; trajectory CSV on stdout
    Learn(LearnArgs),
    /// Bargaining games between criminal and victim
    #[command(subcommand)]
    Bargain(BargainCommand),
    /// Seeded campaign simulation from a TOML scenario; JSON lines on stdout
    Simulate(SimulateArgs),
}

#[derive(Debug, Subcommand)]
pub enum SurveyCommand {
    /// Means (GBP), WTA/WTP disparity factor, gender means and age correlation
    Summarize(SurveyArgs),
    /// Rank-sum test of form A against form B for both WTP and WTA
    Ranksum(SurveyArgs),
}

#[derive(Debug, Args)]
pub struct SurveyArgs {
    /// Survey CSV file
    #[arg(long)]
    pub input: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// CSV with header `quantity,price` (quantity as a fraction, price in GBP)
    #[arg(long)]
    pub input: PathBuf,
    /// Polynomial degree
    #[arg(long, default_value_t = 5)]
    pub degree: usize,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("demand").required(true).args(["poly", "valuations", "segments"])))]
pub struct OptimizeArgs {
    /// Inverse demand: `paper` for the built-in survey curve, or a JSON file `{"coefficients":[c0,c1,...]}` (GBP)
    #[arg(long)]
    pub poly: Option<String>,
    /// Valuations CSV with a `valuation` column (GBP); optimized on the empirical step curve
    #[arg(long)]
    pub valuations: Option<PathBuf>,
    /// TOML file of `[[segment]]` tables with `label`, `share` (fraction) and `valuations` (CSV path) or `coefficients`
    #[arg(long)]
    pub segments: Option<PathBuf>,
    /// Marginal cost per paying victim (GBP)
    #[arg(long)]
    pub cost: f64,
    /// Fixed campaign cost (GBP)
    #[arg(long, default_value_t = 0.0)]
    pub fixed_cost: f64,
    /// Number of victims attacked (count)
    #[arg(long, default_value_t = 1)]
    pub population: u64,
    /// Evaluate this ransom (GBP) instead of optimizing
    #[arg(long, conflicts_with_all = ["segments", "perfect"])]
    pub price: Option<f64>,
    /// With --valuations: fit a polynomial of this degree and optimize it
    #[arg(long, requires = "valuations", conflicts_with = "perfect")]
    pub degree: Option<usize>,
    /// With --valuations: charge every victim individually
    #[arg(long, requires = "valuations")]
    pub perfect: bool,
    /// With --perfect: amount left to each victim below their valuation (GBP)
    #[arg(long, default_value_t = 0.0, requires = "perfect")]
    pub margin: f64,
}

#[derive(Debug, Args)]
pub struct ElasticityArgs {
    /// First price (GBP)
    #[arg(long, allow_negative_numbers = true)]
    pub p1: f64,
    /// Paying fraction at the first price
    #[arg(long, allow_negative_numbers = true)]
    pub q1: f64,
    /// Second price (GBP)
    #[arg(long, allow_negative_numbers = true)]
    pub p2: f64,
    /// Paying fraction at the second price
    #[arg(long, allow_negative_numbers = true)]
    pub q2: f64,
    /// Marginal cost per paying victim (GBP)
    #[arg(long, default_value_t = 0.0)]
    pub cost: f64,
}

#[derive(Debug, Args)]
pub struct LearnArgs {
    /// Demand oracle: `paper`, a polynomial JSON file (`.json`), or a valuations CSV
    #[arg(long)]
    pub demand: String,
    /// Opening ransom (GBP)
    #[arg(long)]
    pub start: f64,
    /// Initial price step (GBP)
    #[arg(long)]
    pub step: f64,
    /// RNG seed for sampled probes
    #[arg(long)]
    pub seed: u64,
    /// Victims observed per probe (count); omit for noiseless probes
    #[arg(long)]
    pub sample_size: Option<u64>,
    /// Marginal cost per paying victim (GBP)
    #[arg(long, default_value_t = 0.0)]
    pub cost: f64,
    /// Probe budget (count)
    #[arg(long, default_value_t = 200)]
    pub max_probes: usize,
    /// Stop once the step falls below this (GBP)
    #[arg(long, default_value_t = 1.0)]
    pub tolerance: f64,
    /// Write the trajectory CSV here instead of stdout
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Write a JSON summary (final price, convergence, input digest) here
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum BargainCommand {
    /// Alternating-offers equilibrium ransom
    Rubinstein(RubinsteinArgs),
    /// Profit of a committed price against an anticipated declining path
    Coase(CoaseArgs),
    /// Take-it-or-leave-it offer under a rejection threshold
    Ultimatum(UltimatumArgs),
}

#[derive(Debug, Args)]
pub struct RubinsteinArgs {
    /// Victim valuation (GBP)
    #[arg(long)]
    pub value: f64,
    /// Marginal cost of releasing the files (GBP)
    #[arg(long, default_value_t = 0.0)]
    pub cost: f64,
    /// Criminal discount factor per period, in [0, 1]
    #[arg(long)]
    pub da: f64,
    /// Victim discount factor per period, in [0, 1]
    #[arg(long)]
    pub db: f64,
}

#[derive(Debug, Args)]
pub struct CoaseArgs {
    /// Valuations CSV with a `valuation` column (GBP)
    #[arg(long)]
    pub values: PathBuf,
    /// Declining ransom path, one price per period, comma-separated (GBP)
    #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
    pub path: Vec<f64>,
    /// Committed uniform ransom (GBP)
    #[arg(long)]
    pub commit: f64,
    /// Victim discount factor per period, in (0, 1]
    #[arg(long)]
    pub db: f64,
    /// Marginal cost per paying victim (GBP)
    #[arg(long, default_value_t = 0.0)]
    pub cost: f64,
}

#[derive(Debug, Args)]
pub struct UltimatumArgs {
    /// Victim valuation (GBP)
    #[arg(long)]
    pub value: f64,
    /// Marginal cost per paying victim (GBP)
    #[arg(long, default_value_t = 0.0)]
    pub cost: f64,
    /// Victims reject offers above this fraction of their valuation
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Fraction shaved off the acceptable ceiling
    #[arg(long, default_value_t = 0.0)]
    pub margin: f64,
    /// Make this offer (GBP) instead of the computed one
    #[arg(long)]
    pub offer: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario TOML: population, costs, strategy, optional sweep and replications
    #[arg(long)]
    pub config: PathBuf,
    /// Base seed; replication r uses seed + r
    #[arg(long)]
    pub seed: u64,
    /// Cap on worker threads (count); 0 or absent uses every core
    #[arg(long)]
    pub threads: Option<usize>,
    /// Write JSON lines here instead of stdout
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Write the per-grid-point CSV summary here
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let mut body = serde_json::Map::new();
            body.insert("error".into(), e.to_string().into());
            body.insert("kind".into(), e.kind().into());
            if let Some(path) = e.path() {
                body.insert("path".into(), path.display().to_string().into());
            }
            eprintln!("{}", serde_json::Value::Object(body));
            ExitCode::from(1)
        }
    }
}
