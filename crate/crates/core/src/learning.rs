//! Adaptive ransom search from observed payment rates.
//!
//! The learner probes a price and a slightly higher one, estimates arc
//! elasticity between them, and steps in the direction the Lerner condition
//! indicates. The step halves whenever the direction reverses.

use std::io::Write;

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::Serialize;
use thiserror::Error;

use crate::demand::{fraction_paying, DemandCurve, Polynomial};
use crate::pricing::{arc_elasticity, lerner_direction, CostModel, Direction, PricingError};

pub const DEFAULT_TOLERANCE: f64 = 1.0;

#[derive(Debug, Error, PartialEq)]
pub enum LearningError {
    #[error("start price must be positive, got {0}")]
    InvalidStart(f64),
    #[error("step must be positive, got {0}")]
    InvalidStep(f64),
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error("max_iters must be at least 2, got {0}")]
    TooFewIterations(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarketProbe {
    pub price: f64,
    pub observed_fraction: f64,
    pub sample_size: u64,
}

/// Anything that reports the share of victims paying a given ransom.
pub trait DemandOracle {
    fn probe(&mut self, price: f64) -> MarketProbe;
}

/// Noiseless oracle backed by an empirical step curve.
pub struct CurveOracle<'a>(pub &'a DemandCurve);

impl DemandOracle for CurveOracle<'_> {
    fn probe(&mut self, price: f64) -> MarketProbe {
        MarketProbe { price, observed_fraction: self.0.quantity_at(price).min(1.0), sample_size: self.0.len() as u64 }
    }
}

/// Noiseless oracle backed by a polynomial inverse demand.
pub struct InverseDemandOracle<'a>(pub &'a Polynomial);

impl DemandOracle for InverseDemandOracle<'_> {
    fn probe(&mut self, price: f64) -> MarketProbe {
        MarketProbe { price, observed_fraction: fraction_paying(self.0, price), sample_size: u64::MAX }
    }
}

/// Observes `sample_size` victims per probe; each pays independently with the
/// inner oracle's probability.
pub struct SampledOracle<'r, O, R> {
    inner: O,
    sample_size: u64,
    rng: &'r mut R,
}

impl<'r, O: DemandOracle, R: Rng> SampledOracle<'r, O, R> {
    pub fn new(inner: O, sample_size: u64, rng: &'r mut R) -> Self {
        assert!(sample_size >= 1, "sample size must be at least 1");
        SampledOracle { inner, sample_size, rng }
    }
}

impl<O: DemandOracle, R: Rng> DemandOracle for SampledOracle<'_, O, R> {
    fn probe(&mut self, price: f64) -> MarketProbe {
        let p = self.inner.probe(price).observed_fraction.clamp(0.0, 1.0);
        let paid = Binomial::new(self.sample_size, p).expect("probability in [0, 1]").sample(self.rng);
        MarketProbe { price, observed_fraction: paid as f64 / self.sample_size as f64, sample_size: self.sample_size }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnConfig {
    pub start_price: f64,
    pub step: f64,
    /// Probe budget; every iteration spends two.
    pub max_iters: usize,
    pub tolerance: f64,
}

impl LearnConfig {
    pub fn new(start_price: f64, step: f64) -> Self {
        LearnConfig { start_price, step, max_iters: 200, tolerance: DEFAULT_TOLERANCE }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StepDecision {
    Lower,
    Raise,
    AtOptimum,
    /// No payers at either probe.
    NoDemand,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LearningStep {
    pub iteration: usize,
    pub price: f64,
    pub fraction: f64,
    pub eta: Option<f64>,
    pub direction: StepDecision,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LearningTrajectory {
    pub probes: Vec<MarketProbe>,
    pub steps: Vec<LearningStep>,
    /// Probed price with the best observed profit.
    pub final_price: f64,
    pub converged: bool,
    pub diagnostic: Option<String>,
}

fn observed_profit(probe: &MarketProbe, costs: &CostModel) -> f64 {
    (probe.price - costs.marginal_cost) * probe.observed_fraction
}

pub fn learn_price<O: DemandOracle>(
    market: &mut O,
    config: &LearnConfig,
    costs: &CostModel,
) -> Result<LearningTrajectory, LearningError> {
    if !(config.start_price > 0.0 && config.start_price.is_finite()) {
        return Err(LearningError::InvalidStart(config.start_price));
    }
    if !(config.step > 0.0 && config.step.is_finite()) {
        return Err(LearningError::InvalidStep(config.step));
    }
    if config.tolerance.is_nan() || config.tolerance <= 0.0 {
        return Err(LearningError::InvalidTolerance(config.tolerance));
    }
    if config.max_iters < 2 {
        return Err(LearningError::TooFewIterations(config.max_iters));
    }

    let mut probes: Vec<MarketProbe> = Vec::new();
    let mut steps = Vec::new();
    let mut price = config.start_price;
    let mut step = config.step;
    let mut previous: Option<Direction> = None;
    let mut converged = false;
    let mut diagnostic = None;

    while probes.len() + 2 <= config.max_iters {
        let base = market.probe(price);
        let ahead = market.probe(price + step);
        probes.extend([base, ahead]);
        let iteration = steps.len();

        if base.observed_fraction == 0.0 && ahead.observed_fraction == 0.0 {
            steps.push(LearningStep {
                iteration,
                price,
                fraction: 0.0,
                eta: None,
                direction: StepDecision::NoDemand,
                step,
            });
            diagnostic = Some(format!("no victims paid at {price} or {}", price + step));
            break;
        }

        let (eta, direction) = if base.observed_fraction == 0.0 {
            // only sampling noise can produce this; nobody pays here, so go down
            (None, Direction::Lower)
        } else {
            let estimate = arc_elasticity(price, base.observed_fraction, price + step, ahead.observed_fraction)
                .expect("distinct prices and positive base fraction");
            let dir = match lerner_direction(price, costs, &estimate) {
                Ok(d) => d,
                Err(PricingError::PerfectlyInelastic) => Direction::Raise,
                // sampling noise can make demand look upward sloping
                Err(PricingError::PositiveElasticity(_)) => Direction::Raise,
                Err(e) => unreachable!("validated inputs: {e}"),
            };
            (Some(estimate.eta), dir)
        };

        steps.push(LearningStep {
            iteration,
            price,
            fraction: base.observed_fraction,
            eta,
            direction: match direction {
                Direction::Lower => StepDecision::Lower,
                Direction::Raise => StepDecision::Raise,
                Direction::AtOptimum => StepDecision::AtOptimum,
            },
            step,
        });

        if direction == Direction::AtOptimum {
            converged = true;
            break;
        }
        if previous.is_some_and(|p| p != direction) {
            step /= 2.0;
            if step < config.tolerance {
                converged = true;
                break;
            }
        }
        previous = Some(direction);
        match direction {
            Direction::Raise => price += step,
            Direction::Lower => {
                while price - step <= 0.0 {
                    step /= 2.0;
                }
                price -= step;
            }
            Direction::AtOptimum => unreachable!(),
        }
    }

    let final_price = probes
        .iter()
        .fold(None::<&MarketProbe>, |best, p| match best {
            Some(b) if observed_profit(b, costs) >= observed_profit(p, costs) => Some(b),
            _ => Some(p),
        })
        .map(|p| p.price)
        .unwrap_or(config.start_price);

    Ok(LearningTrajectory { probes, steps, final_price, converged, diagnostic })
}

/// Writes the trajectory as `iteration,price,fraction,eta,direction,step`.
pub fn write_trajectory_csv<W: Write>(trajectory: &LearningTrajectory, sink: W) -> csv::Result<()> {
    let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(sink);
    writer.write_record(["iteration", "price", "fraction", "eta", "direction", "step"])?;
    for s in &trajectory.steps {
        let direction = match s.direction {
            StepDecision::Lower => "Lower",
            StepDecision::Raise => "Raise",
            StepDecision::AtOptimum => "AtOptimum",
            StepDecision::NoDemand => "NoDemand",
        };
        writer.write_record([
            s.iteration.to_string(),
            s.price.to_string(),
            s.fraction.to_string(),
            s.eta.map(|e| e.to_string()).unwrap_or_default(),
            direction.to_string(),
            s.step.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}
