//! Empirical demand curves, polynomial inverse demand and marginal revenue.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Cells used when isolating marginal-revenue roots on `[0, 1]`.
pub const DEFAULT_ROOT_GRID: usize = 10_000;

/// Bisection stops once the bracket is this narrow.
pub const ROOT_TOLERANCE: f64 = 1e-10;

/// Degree-5 inverse demand fitted to the willingness-to-accept survey
/// responses, ascending powers of the paying fraction.
pub const REFERENCE_WTA_COEFFICIENTS: [f64; 6] = [2472.1, -21367.0, 77678.0, -137561.0, 116699.0, -37950.0];

#[derive(Debug, Error, PartialEq)]
pub enum DemandError {
    #[error("no valuations supplied")]
    Empty,
    #[error("valuation {0} is negative or not finite")]
    InvalidValuation(f64),
    #[error("polynomial degree must be at least 1")]
    InvalidDegree,
    #[error("fit needs at least {required} distinct quantities, found {distinct}")]
    RankDeficient { distinct: usize, required: usize },
    #[error("design matrix is numerically rank deficient")]
    NumericallyRankDeficient,
    #[error("demand point ({quantity}, {price}) is invalid")]
    InvalidPoint { quantity: f64, price: f64 },
}

/// Normalized step-function demand: the share of victims whose valuation is
/// at least a given price.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandCurve {
    sorted_valuations: Vec<f64>,
    scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DemandPoint {
    pub quantity: f64,
    pub price: f64,
}

/// Real polynomial, `coefficients[k]` multiplies `q^k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    pub coefficients: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialFit {
    pub polynomial: Polynomial,
    pub residual_sum_squares: f64,
}

pub fn empirical_demand(valuations: &[f64]) -> Result<DemandCurve, DemandError> {
    DemandCurve::new(valuations.to_vec())
}

impl DemandCurve {
    pub fn new(mut valuations: Vec<f64>) -> Result<Self, DemandError> {
        if valuations.is_empty() {
            return Err(DemandError::Empty);
        }
        if let Some(&bad) = valuations.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(DemandError::InvalidValuation(bad));
        }
        valuations.sort_by(|a, b| b.total_cmp(a));
        Ok(DemandCurve { sorted_valuations: valuations, scale: 1.0 })
    }

    /// The same curve with total demand multiplied by `alpha`.
    pub fn scaled(&self, alpha: f64) -> Self {
        DemandCurve { sorted_valuations: self.sorted_valuations.clone(), scale: self.scale * alpha }
    }

    pub fn sorted_valuations(&self) -> &[f64] {
        &self.sorted_valuations
    }

    pub fn len(&self) -> usize {
        self.sorted_valuations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted_valuations.is_empty()
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn max_valuation(&self) -> f64 {
        self.sorted_valuations[0]
    }

    /// Number of victims with valuation at least `price` (equality pays).
    pub fn payers_at(&self, price: f64) -> usize {
        self.sorted_valuations.partition_point(|&v| v >= price)
    }

    /// Q(p).
    pub fn quantity_at(&self, price: f64) -> f64 {
        self.payers_at(price) as f64 / self.len() as f64 * self.scale
    }
}

/// Points `(k/n, v_(k))` of the inverse demand curve, `v_(k)` the k-th largest
/// valuation.
pub fn inverse_demand_points(curve: &DemandCurve) -> Vec<DemandPoint> {
    let n = curve.len() as f64;
    curve
        .sorted_valuations
        .iter()
        .enumerate()
        .map(|(k, &price)| DemandPoint { quantity: (k + 1) as f64 / n * curve.scale, price })
        .collect()
}

impl Polynomial {
    pub fn new(coefficients: Vec<f64>) -> Self {
        assert!(!coefficients.is_empty(), "polynomial needs at least one coefficient");
        Polynomial { coefficients }
    }

    pub fn reference_wta() -> Self {
        Polynomial::new(REFERENCE_WTA_COEFFICIENTS.to_vec())
    }

    /// `p(q) = a - b q`.
    pub fn linear(intercept: f64, slope: f64) -> Self {
        Polynomial::new(vec![intercept, -slope])
    }

    /// Degree after dropping trailing zero coefficients.
    pub fn degree(&self) -> usize {
        self.coefficients.iter().rposition(|&c| c != 0.0).unwrap_or(0)
    }

    pub fn eval(&self, q: f64) -> f64 {
        self.coefficients.iter().rev().fold(0.0, |acc, &c| acc * q + c)
    }

    pub fn derivative(&self) -> Polynomial {
        if self.coefficients.len() == 1 {
            return Polynomial::new(vec![0.0]);
        }
        Polynomial::new(self.coefficients.iter().enumerate().skip(1).map(|(k, &c)| k as f64 * c).collect())
    }
}

/// MR(q) = p'(q) q + p(q), which collapses to coefficients `(k + 1) c_k`.
pub fn marginal_revenue(poly: &Polynomial) -> Polynomial {
    Polynomial::new(poly.coefficients.iter().enumerate().map(|(k, &c)| (k + 1) as f64 * c).collect())
}

/// Least-squares fit of price on quantity.
///
/// Solved through a Householder QR factorization of the column-equilibrated
/// Vandermonde matrix.
pub fn fit_polynomial(points: &[DemandPoint], degree: usize) -> Result<PolynomialFit, DemandError> {
    if degree < 1 {
        return Err(DemandError::InvalidDegree);
    }
    if let Some(p) = points.iter().find(|p| !p.quantity.is_finite() || !p.price.is_finite()) {
        return Err(DemandError::InvalidPoint { quantity: p.quantity, price: p.price });
    }
    let required = degree + 1;
    let mut quantities: Vec<f64> = points.iter().map(|p| p.quantity).collect();
    quantities.sort_by(f64::total_cmp);
    quantities.dedup();
    if quantities.len() < required {
        return Err(DemandError::RankDeficient { distinct: quantities.len(), required });
    }

    let rows = points.len();
    let mut design = DMatrix::from_fn(rows, required, |i, k| points[i].quantity.powi(k as i32));
    let norms: Vec<f64> = (0..required).map(|k| design.column(k).norm()).collect();
    for (k, &norm) in norms.iter().enumerate() {
        if norm == 0.0 {
            return Err(DemandError::NumericallyRankDeficient);
        }
        design.column_mut(k).unscale_mut(norm);
    }
    let prices = DVector::from_iterator(rows, points.iter().map(|p| p.price));

    let qr = design.clone().qr();
    let r = qr.r();
    let max_diag = (0..required).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if (0..required).any(|i| r[(i, i)].abs() <= max_diag * 1e-13) {
        return Err(DemandError::NumericallyRankDeficient);
    }
    let qt_b = qr.q().transpose() * &prices;
    let scaled = r.solve_upper_triangular(&qt_b).ok_or(DemandError::NumericallyRankDeficient)?;

    let coefficients: Vec<f64> = scaled.iter().zip(&norms).map(|(c, n)| c / n).collect();
    let residual = &design * &scaled - &prices;
    Ok(PolynomialFit { polynomial: Polynomial::new(coefficients), residual_sum_squares: residual.norm_squared() })
}

/// All `q` in `[lo, hi]` with `MR(q) = marginal_cost`, ascending.
///
/// Sign changes are isolated on `grid` equal cells and refined by bisection.
/// Tangential roots that do not change sign are not reported.
pub fn mr_roots(poly: &Polynomial, marginal_cost: f64, lo: f64, hi: f64, grid: usize) -> Vec<f64> {
    assert!(lo < hi, "empty interval");
    assert!(grid >= 2, "grid needs at least two cells");
    let mr = marginal_revenue(poly);
    let f = |q: f64| mr.eval(q) - marginal_cost;
    let node = |i: usize| lo + (hi - lo) * i as f64 / grid as f64;

    let mut roots = Vec::new();
    let mut a = lo;
    let mut fa = f(a);
    for i in 1..=grid {
        let b = node(i);
        let fb = f(b);
        if fa == 0.0 {
            roots.push(a);
        } else if fb != 0.0 && (fa < 0.0) != (fb < 0.0) {
            roots.push(bisect(&f, a, b, fa));
        }
        a = b;
        fa = fb;
    }
    if fa == 0.0 {
        roots.push(a);
    }
    roots
}

fn bisect(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, mut fa: f64) -> f64 {
    while b - a > ROOT_TOLERANCE {
        let mid = 0.5 * (a + b);
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (fa < 0.0) {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

/// Measure of `{q in [0, 1] : p(q) >= price}`: the share of victims whose
/// fitted valuation covers `price`.
pub fn fraction_paying(poly: &Polynomial, price: f64) -> f64 {
    let f = |q: f64| poly.eval(q) - price;
    let grid = DEFAULT_ROOT_GRID;
    let mut covered = 0.0;
    let mut a = 0.0;
    let mut fa = f(a);
    for i in 1..=grid {
        let b = i as f64 / grid as f64;
        let fb = f(b);
        covered += match (fa >= 0.0, fb >= 0.0) {
            (true, true) => b - a,
            (false, false) => 0.0,
            (true, false) => bisect(&f, a, b, fa) - a,
            (false, true) => b - bisect(&f, a, b, fa),
        };
        a = b;
        fa = fb;
    }
    covered.clamp(0.0, 1.0)
}
