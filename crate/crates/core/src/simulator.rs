//! Seeded Monte Carlo extortion campaigns.
//!
//! Money is kept in whole pence here so campaign accounting is exact and runs
//! are bit-for-bit reproducible. Every victim consumes the same four random
//! draws whatever the rates, which gives common random numbers across a sweep:
//! raising a rate only ever adds backed-up or refusing victims.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::exec::Execution;
use crate::money::Money;
use crate::pricing::CostModel;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("population size must be at least 1")]
    EmptyPopulation,
    #[error("{name} = {value} must lie in [0, 1]")]
    RateOutOfRange { name: &'static str, value: f64 },
    #[error("backup/valuation correlation {0} must lie in [-1, 1]")]
    InvalidCorrelation(f64),
    #[error("frame multiplier {0} must be finite and non-negative")]
    InvalidFrame(f64),
    #[error("invalid valuation distribution: {0}")]
    InvalidDistribution(String),
    #[error("invalid file-count model: {0}")]
    InvalidFileCount(String),
    #[error("sweep grid is empty")]
    EmptyGrid,
    #[error("replications must be at least 1")]
    NoReplications,
    #[error("invalid scenario: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ValuationDistribution {
    /// Valuations in pounds are `exp(meanlog + sdlog Z)`.
    Lognormal { meanlog: f64, sdlog: f64 },
    /// Resamples the given valuations (pounds) by quantile.
    Empirical { samples: Vec<f64> },
}

/// Expected file count `base + per_pound * valuation`, plus Gaussian noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FileCountModel {
    pub base: f64,
    pub per_pound: f64,
    pub noise_sd: f64,
}

impl Default for FileCountModel {
    fn default() -> Self {
        FileCountModel { base: 50.0, per_pound: 1.0, noise_sd: 25.0 }
    }
}

fn default_frame() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationSpec {
    pub size: usize,
    pub valuation: ValuationDistribution,
    #[serde(default)]
    pub backup_rate: f64,
    #[serde(default)]
    pub refusal_rate: f64,
    /// Positive values make high-valuation victims more likely to hold backups.
    #[serde(default)]
    pub backup_valuation_correlation: f64,
    #[serde(default = "default_frame")]
    pub frame_multiplier: f64,
    #[serde(default)]
    pub file_count: FileCountModel,
}

impl PopulationSpec {
    pub fn lognormal(size: usize, meanlog: f64, sdlog: f64) -> Self {
        PopulationSpec {
            size,
            valuation: ValuationDistribution::Lognormal { meanlog, sdlog },
            backup_rate: 0.0,
            refusal_rate: 0.0,
            backup_valuation_correlation: 0.0,
            frame_multiplier: 1.0,
            file_count: FileCountModel::default(),
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.size == 0 {
            return Err(SimError::EmptyPopulation);
        }
        for (name, value) in [("backup_rate", self.backup_rate), ("refusal_rate", self.refusal_rate)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(SimError::RateOutOfRange { name, value });
            }
        }
        if !(-1.0..=1.0).contains(&self.backup_valuation_correlation) {
            return Err(SimError::InvalidCorrelation(self.backup_valuation_correlation));
        }
        if !(self.frame_multiplier.is_finite() && self.frame_multiplier >= 0.0) {
            return Err(SimError::InvalidFrame(self.frame_multiplier));
        }
        match &self.valuation {
            ValuationDistribution::Lognormal { meanlog, sdlog } => {
                if !meanlog.is_finite() || !(sdlog.is_finite() && *sdlog >= 0.0) {
                    return Err(SimError::InvalidDistribution(format!("lognormal({meanlog}, {sdlog})")));
                }
            }
            ValuationDistribution::Empirical { samples } => {
                if samples.is_empty() {
                    return Err(SimError::InvalidDistribution("no empirical samples".into()));
                }
                if let Some(bad) = samples.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
                    return Err(SimError::InvalidDistribution(format!("sample {bad}")));
                }
            }
        }
        let fc = &self.file_count;
        if ![fc.base, fc.per_pound, fc.noise_sd].iter().all(|x| x.is_finite())
            || fc.per_pound < 0.0
            || fc.noise_sd < 0.0
        {
            return Err(SimError::InvalidFileCount(format!("{fc:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Victim {
    pub valuation: Money,
    pub file_count: u32,
    pub backed_up: bool,
    pub refuses: bool,
    pub frame_multiplier: f64,
}

impl Victim {
    /// Valuation after framing, rounded down to the penny; zero when backed up.
    pub fn effective_valuation(&self) -> Money {
        if self.backed_up {
            return Money::ZERO;
        }
        if self.frame_multiplier == 1.0 {
            return self.valuation;
        }
        Money::from_pence((self.valuation.pence() as f64 * self.frame_multiplier).floor() as i64)
    }

    pub fn pays(&self, price: Money) -> bool {
        !self.refuses && price <= self.effective_valuation()
    }
}

pub fn generate_population(spec: &PopulationSpec, seed: u64) -> Result<Vec<Victim>, SimError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::standard();
    let rho = spec.backup_valuation_correlation;
    let orthogonal = (1.0 - rho * rho).max(0.0).sqrt();
    let sorted_samples = match &spec.valuation {
        ValuationDistribution::Empirical { samples } => {
            let mut s = samples.clone();
            s.sort_by(f64::total_cmp);
            s
        }
        ValuationDistribution::Lognormal { .. } => Vec::new(),
    };

    let victims = (0..spec.size)
        .map(|_| {
            let z_value: f64 = rng.sample(StandardNormal);
            let z_backup: f64 = rng.sample(StandardNormal);
            let u_refuse: f64 = rng.random();
            let z_files: f64 = rng.sample(StandardNormal);

            let pounds = match &spec.valuation {
                ValuationDistribution::Lognormal { meanlog, sdlog } => (meanlog + sdlog * z_value).exp(),
                ValuationDistribution::Empirical { .. } => {
                    let u = normal.cdf(z_value);
                    let idx = ((u * sorted_samples.len() as f64) as usize).min(sorted_samples.len() - 1);
                    sorted_samples[idx]
                }
            };
            let valuation = Money::from_f64(pounds);

            // Gaussian copula between valuation and the backup latent
            let latent = rho * z_value + orthogonal * z_backup;
            let backed_up = normal.cdf(latent) > 1.0 - spec.backup_rate;
            let refuses = u_refuse < spec.refusal_rate;

            let fc = &spec.file_count;
            let files = fc.base + fc.per_pound * pounds + fc.noise_sd * z_files;
            let file_count = files.round().clamp(0.0, u32::MAX as f64) as u32;

            Victim { valuation, file_count, backed_up, refuses, frame_multiplier: spec.frame_multiplier }
        })
        .collect();
    Ok(victims)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CampaignCosts {
    pub marginal_cost: Money,
    pub fixed_cost: Money,
}

impl From<&CostModel> for CampaignCosts {
    fn from(c: &CostModel) -> Self {
        CampaignCosts { marginal_cost: Money::from_f64(c.marginal_cost), fixed_cost: Money::from_f64(c.fixed_cost) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Strategy {
    Uniform {
        price: Money,
    },
    /// Victims with at least `threshold` files are charged `large_price`.
    Segmented {
        threshold: u32,
        large_price: Money,
        small_price: Money,
    },
    /// Charges each victim `max(v - margin, 0)`; no ransom where that does not cover `c`.
    Perfect {
        margin: Money,
    },
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::Uniform { price } => write!(f, "uniform({price})"),
            Strategy::Segmented { threshold, large_price, small_price } => {
                write!(f, "segmented(files>={threshold}: {large_price}, else {small_price})")
            }
            Strategy::Perfect { margin } => write!(f, "perfect(margin {margin})"),
        }
    }
}

impl Strategy {
    fn segment_of(&self, victim: &Victim) -> usize {
        match self {
            Strategy::Segmented { threshold, .. } if victim.file_count < *threshold => 1,
            _ => 0,
        }
    }

    fn segment_labels(&self) -> &'static [&'static str] {
        match self {
            Strategy::Uniform { .. } => &["all"],
            Strategy::Segmented { .. } => &["large-files", "small-files"],
            Strategy::Perfect { .. } => &["personalized"],
        }
    }

    /// Ransom demanded from `victim`, `None` if none is issued.
    pub fn price_for(&self, victim: &Victim, costs: &CampaignCosts) -> Option<Money> {
        match *self {
            Strategy::Uniform { price } => Some(price),
            Strategy::Segmented { threshold, large_price, small_price } => {
                Some(if victim.file_count >= threshold { large_price } else { small_price })
            }
            Strategy::Perfect { margin } => {
                let p = (victim.effective_valuation() - margin).max(Money::ZERO);
                (p > costs.marginal_cost).then_some(p)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SegmentBreakdown {
    pub label: String,
    pub victims: usize,
    pub payers: usize,
    pub revenue: Money,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CampaignReport {
    pub strategy: String,
    pub victims: usize,
    pub payers: usize,
    pub revenue: Money,
    pub profit: Money,
    /// Mean ransom over victims who were sent one.
    pub mean_demanded: Option<f64>,
    pub per_segment: Vec<SegmentBreakdown>,
    pub seed: Option<u64>,
}

/// Plays `strategy` against every victim: a victim pays iff the ransom is at
/// most their effective valuation and they do not refuse on principle.
pub fn run_campaign(population: &[Victim], strategy: &Strategy, costs: &CampaignCosts) -> CampaignReport {
    let mut segments: Vec<SegmentBreakdown> = strategy
        .segment_labels()
        .iter()
        .map(|l| SegmentBreakdown { label: l.to_string(), victims: 0, payers: 0, revenue: Money::ZERO })
        .collect();
    let mut demanded = (0i128, 0usize);
    for victim in population {
        let seg = &mut segments[strategy.segment_of(victim)];
        seg.victims += 1;
        let Some(price) = strategy.price_for(victim, costs) else { continue };
        demanded.0 += price.pence() as i128;
        demanded.1 += 1;
        if victim.pays(price) {
            seg.payers += 1;
            seg.revenue += price;
        }
    }
    let payers: usize = segments.iter().map(|s| s.payers).sum();
    let revenue: Money = segments.iter().map(|s| s.revenue).sum();
    let profit = revenue - costs.marginal_cost * payers as i64 - costs.fixed_cost;
    CampaignReport {
        strategy: strategy.to_string(),
        victims: population.len(),
        payers,
        revenue,
        profit,
        mean_demanded: (demanded.1 > 0).then(|| demanded.0 as f64 / demanded.1 as f64 / 100.0),
        per_segment: segments,
        seed: None,
    }
}

/// Exact best uniform price over the victims' effective valuations.
///
/// Returns a price one penny above every valuation (nobody pays) when no price
/// earns a positive margin. Ties keep the higher price.
pub fn best_uniform_price<'a>(victims: impl IntoIterator<Item = &'a Victim>, costs: &CampaignCosts) -> Money {
    let mut values: Vec<Money> = Vec::new();
    let mut ceiling = Money::ZERO;
    for v in victims {
        let e = v.effective_valuation();
        ceiling = ceiling.max(e);
        if !v.refuses {
            values.push(e);
        }
    }
    values.sort_unstable_by(|a, b| b.cmp(a));
    let c = costs.marginal_cost.pence() as i128;
    let mut best = (ceiling + Money::from_pence(1), 0i128);
    let mut k = 0;
    while k < values.len() {
        let price = values[k];
        while k < values.len() && values[k] == price {
            k += 1;
        }
        let margin = (price.pence() as i128 - c) * k as i128;
        if margin > best.1 {
            best = (price, margin);
        }
    }
    best.0
}

/// How the criminals pick their strategy on each realized population.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrategyOptimizer {
    Uniform,
    Segmented { threshold: u32 },
    Perfect { margin: Money },
    Fixed(Strategy),
}

impl StrategyOptimizer {
    pub fn optimize(&self, population: &[Victim], costs: &CampaignCosts) -> Strategy {
        match *self {
            StrategyOptimizer::Uniform => Strategy::Uniform { price: best_uniform_price(population, costs) },
            StrategyOptimizer::Segmented { threshold } => Strategy::Segmented {
                threshold,
                large_price: best_uniform_price(population.iter().filter(|v| v.file_count >= threshold), costs),
                small_price: best_uniform_price(population.iter().filter(|v| v.file_count < threshold), costs),
            },
            StrategyOptimizer::Perfect { margin } => Strategy::Perfect { margin },
            StrategyOptimizer::Fixed(s) => s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub backup_rates: Vec<f64>,
    pub refusal_rates: Vec<f64>,
}

impl SweepGrid {
    pub fn single(backup_rate: f64, refusal_rate: f64) -> Self {
        SweepGrid { backup_rates: vec![backup_rate], refusal_rates: vec![refusal_rate] }
    }

    /// Grid points, backup rate varying slowest.
    pub fn points(&self) -> Vec<(f64, f64)> {
        self.backup_rates.iter().flat_map(|&b| self.refusal_rates.iter().map(move |&r| (b, r))).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationRun {
    pub grid_index: usize,
    pub backup_rate: f64,
    pub refusal_rate: f64,
    pub replication: usize,
    pub seed: u64,
    pub report: CampaignReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub backup_rate: f64,
    pub refusal_rate: f64,
    pub mean_price: f64,
    pub mean_profit: f64,
    pub mean_payers: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepOutcome {
    pub points: Vec<SweepPoint>,
    pub runs: Vec<ReplicationRun>,
}

/// Re-optimizes the strategy on fresh populations at every grid point.
///
/// Replication `r` uses seed `seed + r` at every grid point, so grid points are
/// compared on common random numbers.
pub fn externality_sweep(
    spec: &PopulationSpec,
    optimizer: &StrategyOptimizer,
    grid: &SweepGrid,
    replications: usize,
    seed: u64,
    costs: &CampaignCosts,
    exec: Execution,
) -> Result<SweepOutcome, SimError> {
    let points = grid.points();
    if points.is_empty() {
        return Err(SimError::EmptyGrid);
    }
    if replications == 0 {
        return Err(SimError::NoReplications);
    }
    let specs: Vec<PopulationSpec> = points
        .iter()
        .map(|&(backup_rate, refusal_rate)| PopulationSpec { backup_rate, refusal_rate, ..spec.clone() })
        .collect();
    for s in &specs {
        s.validate()?;
    }

    let runs: Vec<ReplicationRun> = exec.map_indexed(points.len() * replications, |i| {
        let (grid_index, replication) = (i / replications, i % replications);
        let run_seed = seed.wrapping_add(replication as u64);
        let population = generate_population(&specs[grid_index], run_seed).expect("validated spec");
        let strategy = optimizer.optimize(&population, costs);
        let mut report = run_campaign(&population, &strategy, costs);
        report.seed = Some(run_seed);
        ReplicationRun {
            grid_index,
            backup_rate: points[grid_index].0,
            refusal_rate: points[grid_index].1,
            replication,
            seed: run_seed,
            report,
        }
    });

    let summary = points
        .iter()
        .enumerate()
        .map(|(g, &(backup_rate, refusal_rate))| {
            let block = &runs[g * replications..(g + 1) * replications];
            let n = replications as f64;
            SweepPoint {
                backup_rate,
                refusal_rate,
                mean_price: block.iter().map(|r| r.report.mean_demanded.unwrap_or(0.0)).sum::<f64>() / n,
                mean_profit: block.iter().map(|r| r.report.profit.to_f64()).sum::<f64>() / n,
                mean_payers: block.iter().map(|r| r.report.payers as f64).sum::<f64>() / n,
            }
        })
        .collect();
    Ok(SweepOutcome { points: summary, runs })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StrategySpec {
    /// Re-optimized per draw unless `price` is given.
    Uniform {
        price: Option<f64>,
    },
    Segmented {
        threshold: u32,
        large_price: Option<f64>,
        small_price: Option<f64>,
    },
    Perfect {
        #[serde(default)]
        margin: f64,
    },
}

impl StrategySpec {
    pub fn optimizer(&self) -> Result<StrategyOptimizer, SimError> {
        let money = |x: f64, name: &str| {
            if x.is_finite() && x >= 0.0 {
                Ok(Money::from_f64(x))
            } else {
                Err(SimError::Config(format!("{name} must be a non-negative amount")))
            }
        };
        Ok(match *self {
            StrategySpec::Uniform { price: None } => StrategyOptimizer::Uniform,
            StrategySpec::Uniform { price: Some(p) } => {
                StrategyOptimizer::Fixed(Strategy::Uniform { price: money(p, "price")? })
            }
            StrategySpec::Segmented { threshold, large_price: None, small_price: None } => {
                StrategyOptimizer::Segmented { threshold }
            }
            StrategySpec::Segmented { threshold, large_price: Some(l), small_price: Some(s) } => {
                StrategyOptimizer::Fixed(Strategy::Segmented {
                    threshold,
                    large_price: money(l, "large_price")?,
                    small_price: money(s, "small_price")?,
                })
            }
            StrategySpec::Segmented { .. } => {
                return Err(SimError::Config("give both segment prices or neither".into()))
            }
            StrategySpec::Perfect { margin } => StrategyOptimizer::Perfect { margin: money(margin, "margin")? },
        })
    }
}

fn default_replications() -> usize {
    1
}

/// Scenario file contents (TOML).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub population: PopulationSpec,
    pub costs: CostModel,
    pub strategy: StrategySpec,
    pub sweep: Option<SweepGrid>,
    #[serde(default = "default_replications")]
    pub replications: usize,
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, SimError> {
        let config: ScenarioConfig = toml::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
        config.population.validate()?;
        CostModel::new(config.costs.marginal_cost, config.costs.fixed_cost)
            .map_err(|e| SimError::Config(e.to_string()))?;
        config.strategy.optimizer()?;
        Ok(config)
    }

    pub fn grid(&self) -> SweepGrid {
        self.sweep
            .clone()
            .unwrap_or_else(|| SweepGrid::single(self.population.backup_rate, self.population.refusal_rate))
    }

    pub fn run(&self, seed: u64, exec: Execution) -> Result<SweepOutcome, SimError> {
        externality_sweep(
            &self.population,
            &self.strategy.optimizer()?,
            &self.grid(),
            self.replications,
            seed,
            &CampaignCosts::from(&self.costs),
            exec,
        )
    }
}
