use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ransom_core::demand::{empirical_demand, Polynomial};
use ransom_core::learning::{learn_price, CurveOracle, InverseDemandOracle, LearnConfig, SampledOracle};
use ransom_core::pricing::{optimize_uniform, profit_uniform, CostModel};

#[test]
fn reference_curve_converges_near_marginal_revenue_optimum() {
    let poly = Polynomial::reference_wta();
    let costs = CostModel::zero();
    let target = optimize_uniform(&poly, &costs, 1).price;
    let config = LearnConfig::new(300.0, 50.0);
    let t = learn_price(&mut InverseDemandOracle(&poly), &config, &costs).unwrap();
    assert!(t.probes.len() <= 200);
    assert!((t.final_price - target).abs() <= 25.0, "{} vs {}", t.final_price, target);
    assert!(t.converged);
}

#[test]
fn larger_samples_land_closer_to_noiseless_answer() {
    let poly = Polynomial::linear(1000.0, 1000.0);
    let costs = CostModel::zero();
    let config = LearnConfig::new(300.0, 50.0);
    let noiseless = learn_price(&mut InverseDemandOracle(&poly), &config, &costs).unwrap().final_price;

    let mean_error = |sample_size: u64| -> f64 {
        let errors: Vec<f64> = (0..40u64)
            .map(|seed| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut oracle = SampledOracle::new(InverseDemandOracle(&poly), sample_size, &mut rng);
                let t = learn_price(&mut oracle, &config, &costs).unwrap();
                (t.final_price - noiseless).abs()
            })
            .collect();
        errors.iter().sum::<f64>() / errors.len() as f64
    };
    let small = mean_error(100);
    let large = mean_error(100_000);
    assert!(large < small, "n=1e5 error {large} should beat n=1e2 error {small}");
    assert!(large < 10.0, "{large}");
}

proptest! {
    #[test]
    fn search_never_ends_worse_than_it_started(
        vals in prop::collection::vec(1.0f64..2000.0, 5..200),
        start in 10.0f64..1500.0,
        step in 5.0f64..200.0,
        cost in 0.0f64..20.0,
    ) {
        let curve = empirical_demand(&vals).unwrap();
        let costs = CostModel::marginal(cost);
        let config = LearnConfig::new(start, step);
        let t = learn_price(&mut CurveOracle(&curve), &config, &costs).unwrap();
        prop_assert!(t.probes.len() <= config.max_iters);
        prop_assert_eq!(t.probes[0].price, start);
        let n = curve.len() as u64;
        prop_assert!(profit_uniform(&curve, t.final_price, &costs, n) >= profit_uniform(&curve, start, &costs, n));
    }
}
