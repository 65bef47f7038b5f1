use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ransom_core::bargaining::{
    coase_compare, rubinstein_price, ultimatum_offer, BargainingParams, PricePath, RejectionModel,
};
use ransom_core::demand::{empirical_demand, fit_polynomial, Polynomial};
use ransom_core::exec::{with_thread_cap, Execution};
use ransom_core::learning::{
    learn_price, write_trajectory_csv, CurveOracle, DemandOracle, InverseDemandOracle, LearnConfig, LearningTrajectory,
    SampledOracle,
};
use ransom_core::pricing::{
    arc_elasticity, evaluate_price, lerner_direction, optimize_fitted, optimize_segmented, optimize_uniform,
    optimize_uniform_grid, perfect_discrimination, profit_uniform, CostModel, PricingMethod, PricingOutcome, Segment,
    SegmentDemand,
};
use ransom_core::simulator::ScenarioConfig;
use ransom_core::survey::{parse_survey_csv, rank_sum_test, summarize, Form, Measure};
use serde::Deserialize;
use serde_json::{json, Map, Value};

use crate::error::CliError;
use crate::input::{parse_points, parse_polynomial, parse_valuations, InputFile, PolySource};
use crate::{
    BargainCommand, Cli, CoaseArgs, Command, ElasticityArgs, FitArgs, LearnArgs, OptimizeArgs, RubinsteinArgs,
    SimulateArgs, SurveyArgs, SurveyCommand, UltimatumArgs,
};

pub fn dispatch(cli: &Cli) -> Result<(), CliError> {
    let report = Reporter { timestamp: cli.timestamp };
    match &cli.command {
        Command::Survey(SurveyCommand::Summarize(a)) => survey_summarize(a, report),
        Command::Survey(SurveyCommand::Ranksum(a)) => survey_ranksum(a, report),
        Command::Fit(a) => fit(a, report),
        Command::Optimize(a) => optimize(a, report),
        Command::Elasticity(a) => elasticity(a, report),
        Command::Learn(a) => learn(a, report),
        Command::Bargain(BargainCommand::Rubinstein(a)) => rubinstein(a, report),
        Command::Bargain(BargainCommand::Coase(a)) => coase(a, report),
        Command::Bargain(BargainCommand::Ultimatum(a)) => ultimatum(a, report),
        Command::Simulate(a) => simulate(a, report),
    }
}

#[derive(Clone, Copy)]
struct Reporter {
    timestamp: bool,
}

impl Reporter {
    /// Appends input digests (and the timestamp, if asked) to a JSON object.
    fn finish(self, value: impl serde::Serialize, digests: &[(&str, &str)]) -> Result<String, CliError> {
        let mut value = serde_json::to_value(value).map_err(CliError::domain)?;
        if let Value::Object(map) = &mut value {
            for (key, digest) in digests {
                map.insert((*key).to_owned(), Value::String((*digest).to_owned()));
            }
            if self.timestamp {
                let now = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
                map.insert("timestamp".into(), now.into());
            }
        }
        serde_json::to_string(&value).map_err(CliError::domain)
    }

    fn print(self, value: impl serde::Serialize, digests: &[(&str, &str)]) -> Result<(), CliError> {
        println!("{}", self.finish(value, digests)?);
        Ok(())
    }
}

fn costs(marginal: f64, fixed: f64) -> Result<CostModel, CliError> {
    CostModel::new(marginal, fixed).map_err(CliError::domain)
}

fn write_target(target: Option<&PathBuf>, bytes: &[u8]) -> Result<(), CliError> {
    match target {
        Some(path) => fs::write(path, bytes).map_err(|source| CliError::Write { path: path.clone(), source }),
        None => {
            std::io::stdout().write_all(bytes).map_err(|source| CliError::Write { path: "<stdout>".into(), source })
        }
    }
}

fn survey_summarize(args: &SurveyArgs, report: Reporter) -> Result<(), CliError> {
    let file = InputFile::read(&args.input)?;
    let data = parse_survey_csv(file.bytes.as_slice()).map_err(|e| file.invalid(e))?;
    let summary = summarize(&data).map_err(|e| file.invalid(e))?;
    report.print(summary, &[("input_sha256", &file.sha256)])
}

fn survey_ranksum(args: &SurveyArgs, report: Reporter) -> Result<(), CliError> {
    let file = InputFile::read(&args.input)?;
    let data = parse_survey_csv(file.bytes.as_slice()).map_err(|e| file.invalid(e))?;
    let test = |measure| {
        let pounds = |form| data.measure(measure, Some(form)).iter().map(|m| m.to_f64()).collect::<Vec<_>>();
        rank_sum_test(&pounds(Form::A), &pounds(Form::B)).map_err(|e| file.invalid(e))
    };
    let body = json!({ "wtp": test(Measure::Wtp)?, "wta": test(Measure::Wta)? });
    report.print(body, &[("input_sha256", &file.sha256)])
}

fn fit(args: &FitArgs, report: Reporter) -> Result<(), CliError> {
    let file = InputFile::read(&args.input)?;
    let points = parse_points(&file)?;
    let fit = fit_polynomial(&points, args.degree).map_err(CliError::domain)?;
    let body = json!({
        "coefficients": fit.polynomial.coefficients,
        "residual_sum_squares": fit.residual_sum_squares,
    });
    report.print(body, &[("input_sha256", &file.sha256)])
}

fn optimize(args: &OptimizeArgs, report: Reporter) -> Result<(), CliError> {
    let costs = costs(args.cost, args.fixed_cost)?;
    if let Some(price) = args.price {
        if !(price.is_finite() && price >= 0.0) {
            return Err(CliError::Domain(format!("price {price} must be finite and non-negative")));
        }
    }
    if let Some(poly_arg) = &args.poly {
        let (poly, source) = PolySource::resolve(poly_arg)?;
        let outcome = match args.price {
            Some(p) => evaluate_price(&poly, p, &costs, args.population),
            None => optimize_uniform(&poly, &costs, args.population),
        };
        let digests: Vec<(&str, &str)> = source.digest().map(|d| ("poly_sha256", d)).into_iter().collect();
        return report.print(outcome, &digests);
    }
    if let Some(path) = &args.valuations {
        let file = InputFile::read(path)?;
        let values = parse_valuations(&file)?;
        let digests = [("valuations_sha256", file.sha256.as_str())];
        if args.perfect {
            let out = perfect_discrimination(&values, &costs, args.margin).map_err(CliError::domain)?;
            let body = json!({
                "payers": out.payers,
                "revenue": out.revenue,
                "total_profit": out.total_profit,
                "method": "perfect",
            });
            return report.print(body, &digests);
        }
        let curve = empirical_demand(&values).map_err(CliError::domain)?;
        let outcome = match (args.price, args.degree) {
            (Some(p), _) => {
                let n = curve.len() as f64;
                let profit = profit_uniform(&curve, p, &costs, args.population);
                PricingOutcome {
                    price: p,
                    paying_fraction: curve.quantity_at(p),
                    profit_per_victim: (p - costs.marginal_cost) * curve.payers_at(p) as f64 / n,
                    total_profit: profit,
                    method: PricingMethod::FixedPrice,
                    degenerate: false,
                }
            }
            (None, Some(degree)) => {
                optimize_fitted(&curve, degree, &costs, args.population).map_err(CliError::domain)?
            }
            (None, None) => optimize_uniform_grid(&curve, &costs, args.population),
        };
        return report.print(outcome, &digests);
    }
    let path = args.segments.as_ref().expect("clap requires one demand source");
    optimize_segments(path, &costs, args.population, report)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SegmentFile {
    segment: Vec<SegmentEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SegmentEntry {
    label: String,
    share: f64,
    valuations: Option<PathBuf>,
    coefficients: Option<Vec<f64>>,
}

fn optimize_segments(path: &Path, costs: &CostModel, population: u64, report: Reporter) -> Result<(), CliError> {
    let file = InputFile::read(path)?;
    let spec: SegmentFile = toml::from_str(file.text()?).map_err(|e| file.invalid(e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut segments = Vec::new();
    let mut sources = Vec::new();
    for entry in spec.segment {
        let demand = match (&entry.valuations, entry.coefficients) {
            (Some(csv), None) => {
                let source = InputFile::read(&base.join(csv))?;
                let values = parse_valuations(&source)?;
                sources.push(source.sha256);
                SegmentDemand::Curve(empirical_demand(&values).map_err(CliError::domain)?)
            }
            (None, Some(coefficients)) => SegmentDemand::Inverse(Polynomial::new(coefficients)),
            _ => {
                return Err(file
                    .invalid(format!("segment `{}` needs exactly one of `valuations` or `coefficients`", entry.label)))
            }
        };
        segments.push(Segment { label: entry.label, share: entry.share, demand });
    }
    let outcome = optimize_segmented(&segments, costs, population).map_err(CliError::domain)?;
    let mut body = report.finish(outcome, &[("segments_sha256", &file.sha256)])?;
    if !sources.is_empty() {
        let mut value: Map<String, Value> = serde_json::from_str(&body).map_err(CliError::domain)?;
        value.insert("segment_sources_sha256".into(), json!(sources));
        body = Value::Object(value).to_string();
    }
    println!("{body}");
    Ok(())
}

fn elasticity(args: &ElasticityArgs, report: Reporter) -> Result<(), CliError> {
    let estimate = arc_elasticity(args.p1, args.q1, args.p2, args.q2).map_err(CliError::domain)?;
    let direction = lerner_direction(estimate.price, &costs(args.cost, 0.0)?, &estimate).map_err(CliError::domain)?;
    report.print(json!({ "eta": estimate.eta, "direction": direction }), &[])
}

fn learn(args: &LearnArgs, report: Reporter) -> Result<(), CliError> {
    let costs = costs(args.cost, 0.0)?;
    let config =
        LearnConfig { start_price: args.start, step: args.step, max_iters: args.max_probes, tolerance: args.tolerance };
    if args.sample_size == Some(0) {
        return Err(CliError::Domain("sample size must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);

    let (trajectory, digest) = if args.demand == "paper" || args.demand.ends_with(".json") {
        let (poly, source) = if args.demand == "paper" {
            (Polynomial::reference_wta(), None)
        } else {
            let file = InputFile::read(Path::new(&args.demand))?;
            (parse_polynomial(&file)?, Some(file.sha256))
        };
        let t = search(InverseDemandOracle(&poly), args.sample_size, &mut rng, &config, &costs)?;
        (t, source)
    } else {
        let file = InputFile::read(Path::new(&args.demand))?;
        let curve = empirical_demand(&parse_valuations(&file)?).map_err(CliError::domain)?;
        let t = search(CurveOracle(&curve), args.sample_size, &mut rng, &config, &costs)?;
        (t, Some(file.sha256))
    };

    let mut csv = Vec::new();
    write_trajectory_csv(&trajectory, &mut csv).map_err(CliError::domain)?;
    write_target(args.output.as_ref(), &csv)?;
    if let Some(path) = &args.report {
        let body = json!({
            "final_price": trajectory.final_price,
            "converged": trajectory.converged,
            "probes": trajectory.probes.len(),
            "diagnostic": trajectory.diagnostic,
            "seed": args.seed,
        });
        let digests: Vec<(&str, &str)> = digest.as_deref().map(|d| ("demand_sha256", d)).into_iter().collect();
        let mut text = report.finish(body, &digests)?;
        text.push('\n');
        write_target(Some(path), text.as_bytes())?;
    }
    Ok(())
}

fn search<O: DemandOracle>(
    oracle: O,
    sample_size: Option<u64>,
    rng: &mut ChaCha8Rng,
    config: &LearnConfig,
    costs: &CostModel,
) -> Result<LearningTrajectory, CliError> {
    match sample_size {
        Some(n) => learn_price(&mut SampledOracle::new(oracle, n, rng), config, costs),
        None => {
            let mut oracle = oracle;
            learn_price(&mut oracle, config, costs)
        }
    }
    .map_err(CliError::domain)
}

fn rubinstein(args: &RubinsteinArgs, report: Reporter) -> Result<(), CliError> {
    let params = BargainingParams {
        valuation: args.value,
        marginal_cost: args.cost,
        delta_criminal: args.da,
        delta_victim: args.db,
    };
    let price = rubinstein_price(&params).map_err(CliError::domain)?;
    report.print(json!({ "rubinstein_price": price }), &[])
}

fn coase(args: &CoaseArgs, report: Reporter) -> Result<(), CliError> {
    let file = InputFile::read(&args.values)?;
    let values = parse_valuations(&file)?;
    let path = PricePath::new(args.path.clone()).map_err(CliError::domain)?;
    let out = coase_compare(&values, &costs(args.cost, 0.0)?, args.db, &path, args.commit).map_err(CliError::domain)?;
    report.print(out, &[("values_sha256", &file.sha256)])
}

fn ultimatum(args: &UltimatumArgs, report: Reporter) -> Result<(), CliError> {
    let rejection = args.threshold.map_or(RejectionModel::Never, RejectionModel::Threshold);
    let out = ultimatum_offer(args.value, &costs(args.cost, 0.0)?, rejection, args.margin, args.offer)
        .map_err(CliError::domain)?;
    report.print(out, &[])
}

fn simulate(args: &SimulateArgs, report: Reporter) -> Result<(), CliError> {
    let file = InputFile::read(&args.config)?;
    let config = ScenarioConfig::from_toml_str(file.text()?).map_err(|e| file.invalid(e))?;
    let outcome =
        with_thread_cap(args.threads, || config.run(args.seed, Execution::default())).map_err(CliError::domain)?;

    let mut lines = String::new();
    for run in &outcome.runs {
        lines.push_str(&report.finish(run, &[("config_sha256", &file.sha256)])?);
        lines.push('\n');
    }
    write_target(args.output.as_ref(), lines.as_bytes())?;

    if let Some(path) = &args.summary {
        let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        writer
            .write_record(["backup_rate", "refusal_rate", "mean_price", "mean_profit", "mean_payers"])
            .map_err(CliError::domain)?;
        for p in &outcome.points {
            writer
                .write_record(
                    [p.backup_rate, p.refusal_rate, p.mean_price, p.mean_profit, p.mean_payers].map(|x| x.to_string()),
                )
                .map_err(CliError::domain)?;
        }
        let bytes = writer.into_inner().map_err(|e| CliError::domain(e.error()))?;
        write_target(Some(path), &bytes)?;
    }
    Ok(())
}
