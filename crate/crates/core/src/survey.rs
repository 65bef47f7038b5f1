//! Contingent-valuation survey ingestion and summary statistics.
//!
//! Respondents answered one of two question orderings. Form A asks the
//! willingness-to-pay question first, form B asks willingness-to-accept first;
//! [`rank_sum_test`] checks that the ordering did not shift the answers.

use std::collections::{BTreeMap, HashSet};
use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::money::Money;

pub const CSV_HEADER: [&str; 6] = ["id", "form", "wtp", "wta", "gender", "age"];

/// Largest pooled sample size handled by exact enumeration.
pub const EXACT_RANK_SUM_LIMIT: usize = 16;

#[derive(Debug, Error)]
pub enum SurveyError {
    #[error("malformed header: expected `{expected}`, found `{found}`")]
    MalformedHeader { expected: String, found: String },
    #[error("unknown form {form} at row {row}")]
    UnknownForm { form: String, row: usize },
    #[error("non-numeric {field} `{value}` at row {row}")]
    NonNumeric { field: &'static str, value: String, row: usize },
    #[error("negative {field} at row {row}")]
    Negative { field: &'static str, row: usize },
    #[error("duplicate id `{id}` at row {row}")]
    DuplicateId { id: String, row: usize },
    #[error("wrong number of fields at row {row}: expected 6, found {found}")]
    FieldCount { row: usize, found: usize },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("dataset is empty")]
    Empty,
    #[error("rank-sum test needs two non-empty samples")]
    EmptySample,
    #[error("sample contains a non-finite value")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Form {
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Female,
    Male,
    Other,
    Unspecified,
}

impl Gender {
    fn parse(s: &str) -> Gender {
        match s.trim().to_ascii_lowercase().as_str() {
            "female" | "f" | "woman" => Gender::Female,
            "male" | "m" | "man" => Gender::Male,
            "other" => Gender::Other,
            _ => Gender::Unspecified,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            Gender::Female => "female",
            Gender::Male => "male",
            Gender::Other => "other",
            Gender::Unspecified => "",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SurveyRecord {
    pub id: String,
    pub form: Form,
    pub wtp: Money,
    pub wta: Money,
    pub gender: Gender,
    pub age: Option<u32>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SurveyDataset {
    pub records: Vec<SurveyRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Measure {
    Wtp,
    Wta,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurveySummary {
    pub mean_wtp: f64,
    pub mean_wta: f64,
    /// `None` when nobody states a positive willingness to pay.
    pub disparity_factor: Option<f64>,
    pub group_means: BTreeMap<Gender, f64>,
    pub age_wtp_correlation: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RankSumMethod {
    Exact,
    NormalApproximation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RankSumResult {
    /// U statistic of the first sample: pairs where `a` exceeds `b`, ties count one half.
    pub u_statistic: f64,
    pub p_value: f64,
    pub method: RankSumMethod,
}

impl SurveyDataset {
    pub fn new(records: Vec<SurveyRecord>) -> Self {
        SurveyDataset { records }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn measure(&self, measure: Measure, form: Option<Form>) -> Vec<Money> {
        self.records
            .iter()
            .filter(|r| form.is_none_or(|f| r.form == f))
            .map(|r| match measure {
                Measure::Wtp => r.wtp,
                Measure::Wta => r.wta,
            })
            .collect()
    }
}

pub fn parse_survey_csv<R: Read>(source: R) -> Result<SurveyDataset, SurveyError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(source);

    let header = reader.headers()?.clone();
    let found: Vec<&str> = header.iter().map(str::trim).collect();
    if found != CSV_HEADER {
        return Err(SurveyError::MalformedHeader { expected: CSV_HEADER.join(","), found: found.join(",") });
    }

    let mut seen = HashSet::new();
    let mut records = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row_no = i + 1;
        let row = row?;
        if row.len() != CSV_HEADER.len() {
            return Err(SurveyError::FieldCount { row: row_no, found: row.len() });
        }
        let id = row[0].trim().to_string();
        let form = match row[1].trim() {
            "A" | "a" => Form::A,
            "B" | "b" => Form::B,
            other => return Err(SurveyError::UnknownForm { form: other.to_string(), row: row_no }),
        };
        let money = |field: &'static str, raw: &str| -> Result<Money, SurveyError> {
            let m: Money =
                raw.parse().map_err(|_| SurveyError::NonNumeric { field, value: raw.to_string(), row: row_no })?;
            if m.is_negative() {
                return Err(SurveyError::Negative { field, row: row_no });
            }
            Ok(m)
        };
        let wtp = money("wtp", &row[2])?;
        let wta = money("wta", &row[3])?;
        let gender = Gender::parse(&row[4]);
        let age = row[5].trim().parse::<u32>().ok();

        if !seen.insert(id.clone()) {
            return Err(SurveyError::DuplicateId { id, row: row_no });
        }
        records.push(SurveyRecord { id, form, wtp, wta, gender, age });
    }
    Ok(SurveyDataset { records })
}

pub fn write_survey_csv<W: Write>(dataset: &SurveyDataset, sink: W) -> Result<(), SurveyError> {
    let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(sink);
    writer.write_record(CSV_HEADER)?;
    for r in &dataset.records {
        let form = match r.form {
            Form::A => "A",
            Form::B => "B",
        };
        let age = r.age.map(|a| a.to_string()).unwrap_or_default();
        writer.write_record([r.id.as_str(), form, &r.wtp.to_string(), &r.wta.to_string(), r.gender.as_str(), &age])?;
    }
    writer.flush().map_err(csv::Error::from)?;
    Ok(())
}

fn mean_of(values: impl Iterator<Item = Money>) -> Option<f64> {
    let (sum, n) = values.fold((0i128, 0usize), |(s, n), m| (s + m.pence() as i128, n + 1));
    (n > 0).then(|| sum as f64 / n as f64 / 100.0)
}

pub fn summarize(dataset: &SurveyDataset) -> Result<SurveySummary, SurveyError> {
    if dataset.is_empty() {
        return Err(SurveyError::Empty);
    }
    let mean_wtp = mean_of(dataset.records.iter().map(|r| r.wtp)).unwrap();
    let mean_wta = mean_of(dataset.records.iter().map(|r| r.wta)).unwrap();
    let disparity_factor = (mean_wtp > 0.0).then(|| mean_wta / mean_wtp);

    let mut group_means = BTreeMap::new();
    for gender in [Gender::Female, Gender::Male, Gender::Other] {
        let group = dataset.records.iter().filter(|r| r.gender == gender).map(|r| r.wtp);
        if let Some(m) = mean_of(group) {
            group_means.insert(gender, m);
        }
    }

    let (ages, wtps): (Vec<f64>, Vec<f64>) =
        dataset.records.iter().filter_map(|r| r.age.map(|a| (a as f64, r.wtp.to_f64()))).unzip();
    let age_wtp_correlation = pearson(&ages, &wtps);

    Ok(SurveySummary { mean_wtp, mean_wta, disparity_factor, group_means, age_wtp_correlation })
}

/// Pearson correlation; `None` for fewer than two points or zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    if n < 2 || n != y.len() {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

pub fn dataset_to_valuations(dataset: &SurveyDataset, measure: Measure) -> Result<Vec<Money>, SurveyError> {
    if dataset.is_empty() {
        return Err(SurveyError::Empty);
    }
    Ok(dataset.measure(measure, None))
}

/// Mid-ranks of the pooled sample, doubled so they stay integral.
fn doubled_midranks(pooled: &[f64]) -> (Vec<u64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    order.sort_by(|&i, &j| pooled[i].total_cmp(&pooled[j]));
    let mut ranks = vec![0u64; pooled.len()];
    let mut tie_sizes = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && pooled[order[end]] == pooled[order[start]] {
            end += 1;
        }
        // ranks start..end (1-based start+1..=end) share (start+1+end)/2
        let doubled = (start + 1 + end) as u64;
        for &idx in &order[start..end] {
            ranks[idx] = doubled;
        }
        tie_sizes.push(end - start);
        start = end;
    }
    (ranks, tie_sizes)
}

/// Two-sided Mann-Whitney U (Wilcoxon rank-sum) test.
///
/// Pooled samples of at most [`EXACT_RANK_SUM_LIMIT`] values are enumerated
/// exactly over all label assignments; larger samples use the normal
/// approximation with tie and continuity corrections.
pub fn rank_sum_test(a: &[f64], b: &[f64]) -> Result<RankSumResult, SurveyError> {
    if a.is_empty() || b.is_empty() {
        return Err(SurveyError::EmptySample);
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(SurveyError::NonFinite);
    }
    let (na, nb) = (a.len(), b.len());
    let n = na + nb;
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, tie_sizes) = doubled_midranks(&pooled);

    // 2U = 2R_a - na(na+1)
    let offset = (na * (na + 1)) as i64;
    let twice_u = |rank_sum2: u64| rank_sum2 as i64 - offset;
    let observed2 = twice_u(ranks[..na].iter().sum());
    let u_statistic = observed2 as f64 / 2.0;
    // |2U - na*nb| compared against the observed deviation
    let center2 = (na * nb) as i64;
    let observed_dev = (observed2 - center2).abs();

    if n <= EXACT_RANK_SUM_LIMIT {
        let mut extreme = 0u64;
        let mut total = 0u64;
        for_each_subset(n, na, |mask| {
            let sum: u64 = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| ranks[i]).sum();
            total += 1;
            if (twice_u(sum) - center2).abs() >= observed_dev {
                extreme += 1;
            }
        });
        return Ok(RankSumResult { u_statistic, p_value: extreme as f64 / total as f64, method: RankSumMethod::Exact });
    }

    let (naf, nbf, nf) = (na as f64, nb as f64, n as f64);
    let tie_term: f64 = tie_sizes.iter().map(|&t| (t * t * t - t) as f64).sum();
    let variance = naf * nbf / 12.0 * ((nf + 1.0) - tie_term / (nf * (nf - 1.0)));
    let p_value = if variance <= 0.0 {
        1.0
    } else {
        let deviation = (observed_dev as f64 / 2.0 - 0.5).max(0.0);
        let z = deviation / variance.sqrt();
        let normal = Normal::standard();
        (2.0 * normal.sf(z)).clamp(0.0, 1.0)
    };
    Ok(RankSumResult { u_statistic, p_value, method: RankSumMethod::NormalApproximation })
}

/// Visits every `k`-element subset of `0..n` as a bitmask (Gosper's hack).
fn for_each_subset(n: usize, k: usize, mut visit: impl FnMut(u32)) {
    if k == 0 {
        visit(0);
        return;
    }
    let limit = 1u32 << n;
    let mut mask: u32 = (1 << k) - 1;
    while mask < limit {
        visit(mask);
        let c = mask & mask.wrapping_neg();
        let r = mask + c;
        mask = (((r ^ mask) >> 2) / c) | r;
    }
}

/// Builds a clearly synthetic survey whose WTP and WTA means are pinned to the
/// given targets (to the penny, when `n` divides evenly).
///
/// Values are lognormal draws rescaled to the target means; the rounding
/// residual is absorbed by the largest response.
pub fn synthetic_fixture(n: usize, mean_wtp: Money, mean_wta: Money, seed: u64) -> SurveyDataset {
    assert!(n > 0, "fixture needs at least one respondent");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = LogNormal::new(0.0, 1.0).expect("valid lognormal");

    let draw_column = |target: Money, rng: &mut ChaCha8Rng| -> Vec<Money> {
        let raw: Vec<f64> = (0..n).map(|_| shape.sample(rng)).collect();
        let total_target = target.pence() * n as i64;
        let raw_sum: f64 = raw.iter().sum();
        let mut pence: Vec<i64> = raw.iter().map(|r| (r / raw_sum * total_target as f64).round() as i64).collect();
        let residual = total_target - pence.iter().sum::<i64>();
        let largest = (0..n).max_by_key(|&i| pence[i]).unwrap();
        pence[largest] += residual;
        pence.into_iter().map(|p| Money::from_pence(p.max(0))).collect()
    };
    let wtp = draw_column(mean_wtp, &mut rng);
    let wta = draw_column(mean_wta, &mut rng);

    let records = (0..n)
        .map(|i| {
            let gender = match rng.random_range(0..10) {
                0..=4 => Gender::Female,
                5..=8 => Gender::Male,
                _ => Gender::Unspecified,
            };
            let age = (rng.random_range(0..10) != 0).then(|| rng.random_range(18..75));
            SurveyRecord {
                id: format!("synthetic-{}", i + 1),
                form: if i % 2 == 0 { Form::A } else { Form::B },
                wtp: wtp[i],
                wta: wta[i],
                gender,
                age,
            }
        })
        .collect();
    SurveyDataset { records }
}
