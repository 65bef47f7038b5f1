use proptest::prelude::*;
use proptest::strategy::Strategy as PropStrategy;
use ransom_core::exec::Execution;
use ransom_core::money::Money;
use ransom_core::simulator::{
    best_uniform_price, externality_sweep, generate_population, run_campaign, CampaignCosts, FileCountModel,
    PopulationSpec, Strategy, StrategyOptimizer, SweepGrid, Victim,
};

fn costs(c: i64, f: i64) -> CampaignCosts {
    CampaignCosts { marginal_cost: Money::from_pounds(c), fixed_cost: Money::from_pounds(f) }
}

fn spec(size: usize) -> PopulationSpec {
    PopulationSpec::lognormal(size, 5.5, 1.0)
}

#[test]
fn uncorrelated_backups_hit_the_rate() {
    let s = PopulationSpec { backup_rate: 0.3, ..spec(10_000) };
    let pop = generate_population(&s, 2024).unwrap();
    let share = pop.iter().filter(|v| v.backed_up).count() as f64 / pop.len() as f64;
    // binomial sd is about 0.0046, so 0.03 is a ~6.5 sigma band
    assert!((share - 0.3).abs() <= 0.03, "{share}");
}

#[test]
fn correlation_steers_backups_toward_high_valuations() {
    let mean_backed = |rho: f64| {
        let s = PopulationSpec { backup_rate: 0.3, backup_valuation_correlation: rho, ..spec(20_000) };
        let pop = generate_population(&s, 5).unwrap();
        let backed: Vec<f64> = pop.iter().filter(|v| v.backed_up).map(|v| v.valuation.to_f64()).collect();
        backed.iter().sum::<f64>() / backed.len() as f64
    };
    assert!(mean_backed(0.8) > mean_backed(0.0));
    assert!(mean_backed(-0.8) < mean_backed(0.0));
}

#[test]
fn sweep_is_identical_across_execution_modes() {
    let grid = SweepGrid { backup_rates: vec![0.0, 0.2, 0.5], refusal_rates: vec![0.0, 0.1] };
    let run = |exec| {
        externality_sweep(&spec(2000), &StrategyOptimizer::Uniform, &grid, 4, 77, &costs(5, 1000), exec).unwrap()
    };
    let seq = run(Execution::Sequential);
    let par = run(Execution::Parallel);
    assert_eq!(seq, par);
    assert_eq!(seq.runs.len(), 24);
    for r in &seq.runs {
        let rep = &r.report;
        assert_eq!(
            rep.profit,
            rep.revenue - costs(5, 1000).marginal_cost * rep.payers as i64 - costs(5, 1000).fixed_cost
        );
        assert!(rep.payers <= rep.victims);
        assert_eq!(r.seed, 77 + r.replication as u64);
    }
}

#[test]
fn profit_falls_as_backups_spread() {
    let rates: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
    let grid = SweepGrid { backup_rates: rates, refusal_rates: vec![0.0] };
    let out =
        externality_sweep(&spec(3000), &StrategyOptimizer::Uniform, &grid, 5, 9, &costs(0, 0), Execution::default())
            .unwrap();
    // paired draws: replication r shares its seed across grid points
    for rep in 0..5 {
        let profits: Vec<Money> = out.runs.iter().filter(|r| r.replication == rep).map(|r| r.report.profit).collect();
        assert!(profits.windows(2).all(|w| w[1] <= w[0]), "{profits:?}");
    }
    assert!(out.points.windows(2).all(|w| w[1].mean_profit <= w[0].mean_profit));
}

#[test]
fn uncorrelated_backups_leave_the_price_flat() {
    let grid = SweepGrid { backup_rates: vec![0.0, 0.3, 0.6], refusal_rates: vec![0.0] };
    let out =
        externality_sweep(&spec(4000), &StrategyOptimizer::Uniform, &grid, 30, 1, &costs(0, 0), Execution::default())
            .unwrap();
    let prices: Vec<f64> = out.points.iter().map(|p| p.mean_price).collect();
    let base = prices[0];
    for p in &prices {
        // lognormal(5.5, 1) revenue optimum sits near exp(6.5) ~ 665
        assert!((p - base).abs() / base < 0.15, "{prices:?}");
    }
    // correlated backups remove the top of the market, so the price drops
    let correlated = PopulationSpec { backup_valuation_correlation: 0.9, ..spec(4000) };
    let out =
        externality_sweep(&correlated, &StrategyOptimizer::Uniform, &grid, 30, 1, &costs(0, 0), Execution::default())
            .unwrap();
    assert!(out.points[2].mean_price < 0.85 * out.points[0].mean_price);
}

#[test]
fn segmented_beats_uniform_when_files_track_value() {
    let s = PopulationSpec { file_count: FileCountModel { base: 0.0, per_pound: 10.0, noise_sd: 0.0 }, ..spec(3000) };
    let pop = generate_population(&s, 3).unwrap();
    let c = costs(2, 100);
    let uniform = run_campaign(&pop, &StrategyOptimizer::Uniform.optimize(&pop, &c), &c);
    for threshold in [500, 2000, 6000, 20000] {
        let strategy = StrategyOptimizer::Segmented { threshold }.optimize(&pop, &c);
        if let Strategy::Segmented { large_price, small_price, .. } = strategy {
            assert!(large_price >= small_price);
        }
        let seg = run_campaign(&pop, &strategy, &c);
        assert!(seg.profit >= uniform.profit);
    }
}

fn population_strategy() -> impl PropStrategy<Value = Vec<Victim>> {
    prop::collection::vec((0i64..200_000, 0u32..500, prop::bool::weighted(0.1), prop::bool::weighted(0.1)), 1..80)
        .prop_map(|rows| {
            rows.into_iter()
                .map(|(pence, files, backed_up, refuses)| Victim {
                    valuation: Money::from_pence(pence),
                    file_count: files,
                    backed_up,
                    refuses,
                    frame_multiplier: 1.0,
                })
                .collect()
        })
}

proptest! {
    #[test]
    fn accounting_identity_holds(pop in population_strategy(), price in 0i64..200_000, c in 0i64..5000, f in 0i64..100_000) {
        let costs = CampaignCosts { marginal_cost: Money::from_pence(c), fixed_cost: Money::from_pence(f) };
        for strategy in [
            Strategy::Uniform { price: Money::from_pence(price) },
            Strategy::Segmented { threshold: 250, large_price: Money::from_pence(price), small_price: Money::from_pence(price / 2) },
            Strategy::Perfect { margin: Money::from_pence(price / 10) },
        ] {
            let r = run_campaign(&pop, &strategy, &costs);
            prop_assert_eq!(r.profit, r.revenue - costs.marginal_cost * r.payers as i64 - costs.fixed_cost);
            prop_assert!(r.payers <= pop.len());
            prop_assert_eq!(r.per_segment.iter().map(|s| s.victims).sum::<usize>(), pop.len());
        }
    }

    #[test]
    fn discrimination_orders_campaign_profit(pop in population_strategy(), threshold in 0u32..500, c in 0i64..2000) {
        let costs = CampaignCosts { marginal_cost: Money::from_pence(c), fixed_cost: Money::ZERO };
        let uniform = run_campaign(&pop, &StrategyOptimizer::Uniform.optimize(&pop, &costs), &costs);
        let seg = run_campaign(&pop, &StrategyOptimizer::Segmented { threshold }.optimize(&pop, &costs), &costs);
        let perfect = run_campaign(&pop, &Strategy::Perfect { margin: Money::ZERO }, &costs);
        prop_assert!(seg.profit >= uniform.profit);
        // perfect discrimination also charges refusers, who never pay
        prop_assert!(perfect.profit >= seg.profit);
    }

    #[test]
    fn more_refusal_never_raises_profit(seed in any::<u64>(), lo in 0.0f64..1.0, gap in 0.0f64..0.5, backup in 0.0f64..0.5) {
        let hi = (lo + gap).min(1.0);
        let c = costs(3, 50);
        let profit_at = |rate: f64| {
            let s = PopulationSpec { refusal_rate: rate, backup_rate: backup, ..spec(300) };
            let pop = generate_population(&s, seed).unwrap();
            run_campaign(&pop, &StrategyOptimizer::Uniform.optimize(&pop, &c), &c).profit
        };
        prop_assert!(profit_at(hi) <= profit_at(lo));
    }

    #[test]
    fn framing_rescales_the_payer_set(pop in population_strategy(), quote in 0i64..200_000, k in 1i64..6) {
        let framed: Vec<Victim> = pop.iter().map(|v| Victim { frame_multiplier: k as f64, ..*v }).collect();
        let at = |victims: &[Victim], price: i64| -> Vec<bool> {
            victims.iter().map(|v| v.pays(Money::from_pence(price))).collect()
        };
        prop_assert_eq!(at(&framed, quote * k), at(&pop, quote));

        let halved: Vec<Victim> = pop.iter().map(|v| Victim { frame_multiplier: 0.5, ..*v }).collect();
        let even = quote - quote % 2;
        prop_assert_eq!(at(&halved, even / 2), at(&pop, even));
    }

    #[test]
    fn best_uniform_price_is_exhaustive(pop in population_strategy(), c in 0i64..5000) {
        let costs = CampaignCosts { marginal_cost: Money::from_pence(c), fixed_cost: Money::ZERO };
        let chosen = run_campaign(&pop, &Strategy::Uniform { price: best_uniform_price(&pop, &costs) }, &costs).profit;
        for v in &pop {
            let alt = run_campaign(&pop, &Strategy::Uniform { price: v.effective_valuation() }, &costs).profit;
            prop_assert!(chosen >= alt);
        }
        prop_assert!(chosen >= Money::ZERO);
    }
}
