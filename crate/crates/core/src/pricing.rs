//! Ransom profit evaluation and optimization.
//!
//! Uniform pricing works on either an empirical step curve (exhaustive search
//! over valuations) or a polynomial inverse demand (marginal revenue set equal
//! to marginal cost). Elasticity arithmetic runs on exact rationals built from
//! the decimal form of the inputs.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::demand::{
    fit_polynomial, fraction_paying, inverse_demand_points, mr_roots, DemandCurve, DemandError, Polynomial,
    DEFAULT_ROOT_GRID,
};
use crate::exec::Execution;

/// Margin and Lerner target closer than this count as equal.
pub const LERNER_TOLERANCE: f64 = 1e-9;

/// Segment shares must sum to one within this tolerance.
pub const SHARE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum PricingError {
    #[error("cost {0} must be finite and non-negative")]
    InvalidCost(f64),
    #[error("elasticity needs two distinct prices")]
    EqualPrices,
    #[error("elasticity needs a positive base quantity, got {0}")]
    NonPositiveQuantity(f64),
    #[error("price {0} must be positive")]
    NonPositivePrice(f64),
    #[error("input {0} is not finite")]
    NonFinite(f64),
    #[error("elasticity {0} is positive; demand must be weakly decreasing")]
    PositiveElasticity(f64),
    #[error("demand is perfectly inelastic (eta = 0); the Lerner target is unbounded")]
    PerfectlyInelastic,
    #[error("no segments supplied")]
    NoSegments,
    #[error("segment `{label}` has share {share} outside [0, 1]")]
    InvalidShare { label: String, share: f64 },
    #[error("segment shares sum to {0}, not 1")]
    SharesDoNotSumToOne(f64),
    #[error("margin {0} must be non-negative")]
    NegativeMargin(f64),
    #[error(transparent)]
    Demand(#[from] DemandError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub marginal_cost: f64,
    pub fixed_cost: f64,
}

impl CostModel {
    pub fn new(marginal_cost: f64, fixed_cost: f64) -> Result<Self, PricingError> {
        for c in [marginal_cost, fixed_cost] {
            if !c.is_finite() || c < 0.0 {
                return Err(PricingError::InvalidCost(c));
            }
        }
        Ok(CostModel { marginal_cost, fixed_cost })
    }

    pub fn marginal(marginal_cost: f64) -> Self {
        CostModel::new(marginal_cost, 0.0).expect("valid marginal cost")
    }

    pub fn zero() -> Self {
        CostModel { marginal_cost: 0.0, fixed_cost: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PricingMethod {
    MarginalRevenue,
    Grid,
    FittedPolynomial,
    FixedPrice,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PricingOutcome {
    pub price: f64,
    pub paying_fraction: f64,
    pub profit_per_victim: f64,
    pub total_profit: f64,
    pub method: PricingMethod,
    /// Set when no interior optimum exists or no price is profitable.
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub degenerate: bool,
}

impl PricingOutcome {
    fn new(
        price: f64,
        paying_fraction: f64,
        profit_per_victim: f64,
        costs: &CostModel,
        population: f64,
        method: PricingMethod,
        degenerate: bool,
    ) -> Self {
        PricingOutcome {
            price,
            paying_fraction,
            profit_per_victim,
            total_profit: profit_per_victim * population - costs.fixed_cost,
            method,
            degenerate,
        }
    }
}

/// Total profit `(p - c) Q(p) N - F` on a step demand curve.
pub fn profit_uniform(curve: &DemandCurve, price: f64, costs: &CostModel, population: u64) -> f64 {
    let payers = curve.payers_at(price) as f64;
    (price - costs.marginal_cost) * payers * (population as f64 / curve.len() as f64) * curve.scale() - costs.fixed_cost
}

/// Total profit when a share `quantity` of `population` pays `poly(quantity)`.
pub fn profit_at_quantity(poly: &Polynomial, quantity: f64, costs: &CostModel, population: u64) -> f64 {
    (poly.eval(quantity) - costs.marginal_cost) * quantity * population as f64 - costs.fixed_cost
}

/// Profit-maximizing uniform ransom for a polynomial inverse demand.
///
/// Candidates are every root of `MR(q) = c` on `[0, 1]` plus both endpoints;
/// the winner is the candidate with the largest `(p(q) - c) q`. Ties go to the
/// smaller paying fraction.
pub fn optimize_uniform(inverse_demand: &Polynomial, costs: &CostModel, population: u64) -> PricingOutcome {
    optimize_uniform_inner(inverse_demand, costs, population as f64)
}

fn optimize_uniform_inner(poly: &Polynomial, costs: &CostModel, population: f64) -> PricingOutcome {
    let c = costs.marginal_cost;
    let roots = mr_roots(poly, c, 0.0, 1.0, DEFAULT_ROOT_GRID);
    let profit = |q: f64| (poly.eval(q) - c) * q;

    let mut best: Option<(f64, f64, bool)> = None;
    let endpoints = [(0.0, true), (1.0, true)];
    for (q, is_endpoint) in roots.iter().map(|&q| (q, false)).chain(endpoints) {
        let price = poly.eval(q);
        if !price.is_finite() || price < 0.0 {
            continue;
        }
        let value = profit(q);
        let better = match best {
            None => true,
            Some((bq, bv, _)) => value > bv || (value == bv && q < bq),
        };
        if better {
            best = Some((q, value, is_endpoint));
        }
    }

    match best {
        Some((q, value, is_endpoint)) => PricingOutcome::new(
            poly.eval(q),
            q,
            value,
            costs,
            population,
            PricingMethod::MarginalRevenue,
            is_endpoint || value <= 0.0,
        ),
        None => PricingOutcome::new(0.0, 0.0, 0.0, costs, population, PricingMethod::MarginalRevenue, true),
    }
}

/// Evaluates a fixed ransom against a polynomial inverse demand.
pub fn evaluate_price(poly: &Polynomial, price: f64, costs: &CostModel, population: u64) -> PricingOutcome {
    let fraction = fraction_paying(poly, price);
    let per_victim = (price - costs.marginal_cost) * fraction;
    PricingOutcome::new(
        price,
        fraction,
        per_victim,
        costs,
        population as f64,
        PricingMethod::FixedPrice,
        per_victim <= 0.0,
    )
}

/// Best (price, payers) over valuation candidates, maximizing `(v - c) k`.
/// Ties keep the higher price.
fn best_valuation_price(curve: &DemandCurve, marginal_cost: f64) -> (f64, usize, f64) {
    let vals = curve.sorted_valuations();
    let mut best = (vals[0], 0usize, f64::NEG_INFINITY);
    let mut k = 0;
    while k < vals.len() {
        let price = vals[k];
        // everybody tied at this valuation pays too
        while k < vals.len() && vals[k] == price {
            k += 1;
        }
        let unit = (price - marginal_cost) * k as f64;
        if unit > best.2 {
            best = (price, k, unit);
        }
    }
    best
}

/// Exhaustive uniform optimum on a step demand curve.
///
/// Only the valuations themselves can be optimal, so this is exact.
pub fn optimize_uniform_grid(curve: &DemandCurve, costs: &CostModel, population: u64) -> PricingOutcome {
    optimize_grid_inner(curve, costs, population as f64)
}

fn optimize_grid_inner(curve: &DemandCurve, costs: &CostModel, population: f64) -> PricingOutcome {
    let n = curve.len() as f64;
    let (price, payers, unit) = best_valuation_price(curve, costs.marginal_cost);
    // scale last so that alpha * Q scales profit by exactly alpha
    let per_victim = unit / n * curve.scale();
    PricingOutcome::new(
        price,
        payers as f64 / n * curve.scale(),
        per_victim,
        costs,
        population,
        PricingMethod::Grid,
        unit <= 0.0,
    )
}

/// Polynomial-guided optimum realized on the step curve.
///
/// Fits a polynomial of the given degree to the inverse demand points, takes
/// every stationary point of `MR - c` (and the full market), and charges the
/// valuation at the neighbouring ranks, keeping whichever earns most on the
/// empirical curve.
pub fn optimize_fitted(
    curve: &DemandCurve,
    degree: usize,
    costs: &CostModel,
    population: u64,
) -> Result<PricingOutcome, PricingError> {
    let fit = fit_polynomial(&inverse_demand_points(curve), degree)?;
    let c = costs.marginal_cost;
    let vals = curve.sorted_valuations();
    let n = vals.len();

    let mut candidates = mr_roots(&fit.polynomial, c, 0.0, 1.0, DEFAULT_ROOT_GRID);
    candidates.push(1.0);
    let mut best: Option<(f64, usize, f64)> = None;
    for q in candidates {
        let rank = q / curve.scale() * n as f64;
        for k in [rank.floor(), rank.ceil()] {
            let idx = (k as usize).clamp(1, n) - 1;
            let price = vals[idx];
            let payers = curve.payers_at(price);
            let unit = (price - c) * payers as f64;
            if best.is_none_or(|(bp, _, bu)| unit > bu || (unit == bu && price > bp)) {
                best = Some((price, payers, unit));
            }
        }
    }
    let (price, payers, unit) = best.expect("at least one candidate");
    Ok(PricingOutcome::new(
        price,
        payers as f64 / n as f64 * curve.scale(),
        unit / n as f64 * curve.scale(),
        costs,
        population as f64,
        PricingMethod::FittedPolynomial,
        unit <= 0.0,
    ))
}

/// Exact decimal value of the shortest representation of `x`.
fn decimal_rational(x: f64) -> Result<BigRational, PricingError> {
    if !x.is_finite() {
        return Err(PricingError::NonFinite(x));
    }
    let text = format!("{x}");
    let (negative, body) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text.as_str()),
    };
    let (whole, frac) = body.split_once('.').unwrap_or((body, ""));
    let digits: BigInt = format!("{whole}{frac}").parse().expect("decimal digits");
    let denom = num_traits::pow(BigInt::from(10), frac.len());
    let value = BigRational::new(digits, denom);
    Ok(if negative { -value } else { value })
}

fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ElasticityEstimate {
    pub price: f64,
    pub eta: f64,
    #[serde(skip)]
    exact: BigRational,
}

impl ElasticityEstimate {
    /// Wraps an externally supplied elasticity.
    pub fn new(price: f64, eta: f64) -> Result<Self, PricingError> {
        Ok(ElasticityEstimate { price, eta, exact: decimal_rational(eta)? })
    }
}

/// Arc elasticity evaluated at the base point:
/// `eta = (p1 / q1) (q2 - q1) / (p2 - p1)`.
pub fn arc_elasticity(p1: f64, q1: f64, p2: f64, q2: f64) -> Result<ElasticityEstimate, PricingError> {
    let (rp1, rq1, rp2, rq2) =
        (decimal_rational(p1)?, decimal_rational(q1)?, decimal_rational(p2)?, decimal_rational(q2)?);
    if rp1 == rp2 {
        return Err(PricingError::EqualPrices);
    }
    if !rq1.is_positive() {
        return Err(PricingError::NonPositiveQuantity(q1));
    }
    let exact = (&rp1 / &rq1) * ((rq2 - &rq1) / (rp2 - &rp1));
    Ok(ElasticityEstimate { price: p1, eta: to_f64(&exact), exact })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Direction {
    /// Demand is too elastic at this price.
    Lower,
    /// Demand is too inelastic at this price.
    Raise,
    AtOptimum,
}

/// Compares the margin `(p - c) / p` with the Lerner target `-1 / eta`.
pub fn lerner_direction(price: f64, costs: &CostModel, eta: &ElasticityEstimate) -> Result<Direction, PricingError> {
    if price.is_nan() || price <= 0.0 {
        return Err(PricingError::NonPositivePrice(price));
    }
    if eta.exact.is_positive() {
        return Err(PricingError::PositiveElasticity(eta.eta));
    }
    if eta.exact.is_zero() {
        return Err(PricingError::PerfectlyInelastic);
    }
    let p = decimal_rational(price)?;
    let c = decimal_rational(costs.marginal_cost)?;
    let margin = (&p - c) / &p;
    let target = -eta.exact.recip();
    let gap = margin - target;
    let tol = BigRational::new(BigInt::from(1), BigInt::from(1_000_000_000u64));
    Ok(if gap.abs() <= tol {
        Direction::AtOptimum
    } else if gap.is_positive() {
        Direction::Lower
    } else {
        Direction::Raise
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum SegmentDemand {
    Curve(DemandCurve),
    Inverse(Polynomial),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub label: String,
    pub share: f64,
    pub demand: SegmentDemand,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentOutcome {
    pub label: String,
    pub share: f64,
    #[serde(flatten)]
    pub outcome: PricingOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentedOutcome {
    pub segments: Vec<SegmentOutcome>,
    /// Share-weighted profit per victim across all segments.
    pub profit_per_victim: f64,
    pub total_profit: f64,
}

/// Third-degree discrimination: each segment priced by its own demand.
///
/// Segment outcomes carry that segment's slice of the population and no fixed
/// cost; the fixed cost is charged once on the blended total.
pub fn optimize_segmented(
    segments: &[Segment],
    costs: &CostModel,
    population: u64,
) -> Result<SegmentedOutcome, PricingError> {
    optimize_segmented_with(segments, costs, population, Execution::default())
}

pub fn optimize_segmented_with(
    segments: &[Segment],
    costs: &CostModel,
    population: u64,
    exec: Execution,
) -> Result<SegmentedOutcome, PricingError> {
    if segments.is_empty() {
        return Err(PricingError::NoSegments);
    }
    for s in segments {
        if !(0.0..=1.0).contains(&s.share) {
            return Err(PricingError::InvalidShare { label: s.label.clone(), share: s.share });
        }
    }
    let total_share: f64 = segments.iter().map(|s| s.share).sum();
    if (total_share - 1.0).abs() > SHARE_TOLERANCE {
        return Err(PricingError::SharesDoNotSumToOne(total_share));
    }

    let variable = CostModel { fixed_cost: 0.0, ..*costs };
    let outcomes = exec.map_slice(segments, |s| {
        let slice = s.share * population as f64;
        let outcome = match &s.demand {
            SegmentDemand::Curve(curve) => optimize_grid_inner(curve, &variable, slice),
            SegmentDemand::Inverse(poly) => optimize_uniform_inner(poly, &variable, slice),
        };
        SegmentOutcome { label: s.label.clone(), share: s.share, outcome }
    });
    let profit_per_victim: f64 = outcomes.iter().map(|o| o.share * o.outcome.profit_per_victim).sum();
    Ok(SegmentedOutcome {
        segments: outcomes,
        profit_per_victim,
        total_profit: profit_per_victim * population as f64 - costs.fixed_cost,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerfectOutcome {
    /// Personalized ransom per victim, `None` where it would not cover `c`.
    pub prices: Vec<Option<f64>>,
    pub payers: usize,
    pub revenue: f64,
    pub total_profit: f64,
}

/// First-degree discrimination: each victim is charged `max(v - margin, 0)`.
pub fn perfect_discrimination(
    valuations: &[f64],
    costs: &CostModel,
    margin: f64,
) -> Result<PerfectOutcome, PricingError> {
    if margin.is_nan() || margin < 0.0 {
        return Err(PricingError::NegativeMargin(margin));
    }
    let prices: Vec<Option<f64>> = valuations
        .iter()
        .map(|&v| {
            let p = (v - margin).max(0.0);
            (p > costs.marginal_cost && p <= v).then_some(p)
        })
        .collect();
    let issued: Vec<f64> = prices.iter().flatten().copied().collect();
    let revenue: f64 = issued.iter().sum();
    let variable: f64 = issued.iter().map(|p| p - costs.marginal_cost).sum();
    Ok(PerfectOutcome { payers: issued.len(), revenue, total_profit: variable - costs.fixed_cost, prices })
}
