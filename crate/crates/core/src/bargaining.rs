//! Bargaining between criminals and a victim whose valuation is known.

use serde::Serialize;
use thiserror::Error;

use crate::exec::Execution;
use crate::pricing::CostModel;

#[derive(Debug, Error, PartialEq)]
pub enum BargainingError {
    #[error("discount factor {0} must lie in [0, 1]")]
    InvalidDiscount(f64),
    #[error("valuation {0} must be finite and non-negative")]
    InvalidValuation(f64),
    #[error("valuation {valuation} is below the handling cost {cost}; no profitable agreement")]
    NoAgreement { valuation: f64, cost: f64 },
    #[error("fairness threshold {0} must lie in [0, 1]")]
    InvalidThreshold(f64),
    #[error("safety margin {0} must lie in [0, 1)")]
    InvalidMargin(f64),
    #[error("price path is empty")]
    EmptyPath,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BargainingParams {
    pub valuation: f64,
    pub marginal_cost: f64,
    pub delta_criminal: f64,
    pub delta_victim: f64,
}

/// Subgame-perfect price of alternating-offers bargaining with the criminals
/// moving first: `((1 - dB) / (1 - dA dB)) (v - c) + c`.
///
/// At `dA = dB = 1` the factor is taken as its limit along `dA -> 1` first,
/// which is 1, so the price is `v`.
pub fn rubinstein_price(params: &BargainingParams) -> Result<f64, BargainingError> {
    let BargainingParams { valuation: v, marginal_cost: c, delta_criminal: da, delta_victim: db } = *params;
    for d in [da, db] {
        if !(0.0..=1.0).contains(&d) {
            return Err(BargainingError::InvalidDiscount(d));
        }
    }
    if !(v.is_finite() && v >= 0.0) {
        return Err(BargainingError::InvalidValuation(v));
    }
    if v < c {
        return Err(BargainingError::NoAgreement { valuation: v, cost: c });
    }
    let denom = 1.0 - da * db;
    let share = if denom == 0.0 { 1.0 } else { (1.0 - db) / denom };
    Ok(share * (v - c) + c)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RejectionModel {
    Never,
    /// Offers asking more than this share of the valuation are rejected.
    Threshold(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UltimatumOutcome {
    pub offer: f64,
    pub accepted: bool,
    pub expected_profit: f64,
}

/// Take-it-or-leave-it ransom under a deterministic rejection rule.
///
/// `override_offer` replaces the computed offer, so the rule can be probed at
/// arbitrary prices.
pub fn ultimatum_offer(
    valuation: f64,
    costs: &CostModel,
    rejection: RejectionModel,
    safety_margin: f64,
    override_offer: Option<f64>,
) -> Result<UltimatumOutcome, BargainingError> {
    if !(valuation.is_finite() && valuation >= 0.0) {
        return Err(BargainingError::InvalidValuation(valuation));
    }
    if !(0.0..1.0).contains(&safety_margin) {
        return Err(BargainingError::InvalidMargin(safety_margin));
    }
    let ceiling = match rejection {
        RejectionModel::Never => valuation,
        RejectionModel::Threshold(t) => {
            if !(0.0..=1.0).contains(&t) {
                return Err(BargainingError::InvalidThreshold(t));
            }
            valuation.min(t * valuation)
        }
    };
    let offer = override_offer.unwrap_or(ceiling * (1.0 - safety_margin));
    let accepted = offer <= ceiling;
    let expected_profit = if accepted { offer - costs.marginal_cost } else { 0.0 };
    Ok(UltimatumOutcome { offer, accepted, expected_profit })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PricePath {
    prices: Vec<f64>,
}

impl PricePath {
    pub fn new(prices: Vec<f64>) -> Result<Self, BargainingError> {
        if prices.is_empty() {
            return Err(BargainingError::EmptyPath);
        }
        Ok(PricePath { prices })
    }

    pub fn horizon(&self) -> usize {
        self.prices.len()
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoaseComparison {
    pub commitment_profit: f64,
    pub declining_profit: f64,
    pub commitment_payers: usize,
    pub declining_payers: usize,
}

/// Period at which a forward-looking victim pays, maximizing
/// `dB^t (v - p_t)` over affordable periods; earliest period wins ties.
pub fn payment_period(valuation: f64, delta_victim: f64, path: &PricePath) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    let mut discount = 1.0;
    for (t, &p) in path.prices.iter().enumerate() {
        if valuation >= p {
            let surplus = discount * (valuation - p);
            if best.is_none_or(|(_, s)| surplus > s) {
                best = Some((t, surplus));
            }
        }
        discount *= delta_victim;
    }
    best.map(|(t, _)| t)
}

/// Profits from a committed constant ransom versus an exogenous price path
/// that victims see coming. The criminals do not discount.
pub fn coase_compare(
    valuations: &[f64],
    costs: &CostModel,
    delta_victim: f64,
    declining_path: &PricePath,
    commitment_price: f64,
) -> Result<CoaseComparison, BargainingError> {
    coase_compare_with(valuations, costs, delta_victim, declining_path, commitment_price, Execution::default())
}

pub fn coase_compare_with(
    valuations: &[f64],
    costs: &CostModel,
    delta_victim: f64,
    declining_path: &PricePath,
    commitment_price: f64,
    exec: Execution,
) -> Result<CoaseComparison, BargainingError> {
    if !(delta_victim > 0.0 && delta_victim <= 1.0) {
        return Err(BargainingError::InvalidDiscount(delta_victim));
    }
    if let Some(&bad) = valuations.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(BargainingError::InvalidValuation(bad));
    }
    let payments: Vec<Option<f64>> = exec
        .map_slice(valuations, |&v| payment_period(v, delta_victim, declining_path).map(|t| declining_path.prices[t]));

    let c = costs.marginal_cost;
    let (mut declining, mut declining_payers) = (0.0, 0);
    for p in payments.into_iter().flatten() {
        declining += p - c;
        declining_payers += 1;
    }
    let (mut commitment, mut commitment_payers) = (0.0, 0);
    for &v in valuations {
        if v >= commitment_price {
            commitment += commitment_price - c;
            commitment_payers += 1;
        }
    }
    Ok(CoaseComparison {
        commitment_profit: commitment - costs.fixed_cost,
        declining_profit: declining - costs.fixed_cost,
        commitment_payers,
        declining_payers,
    })
}
