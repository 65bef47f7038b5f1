use proptest::prelude::*;
use ransom_core::bargaining::{coase_compare, rubinstein_price, BargainingParams, PricePath};
use ransom_core::demand::empirical_demand;
use ransom_core::pricing::{optimize_uniform_grid, CostModel};

fn price(v: f64, c: f64, da: f64, db: f64) -> f64 {
    rubinstein_price(&BargainingParams { valuation: v, marginal_cost: c, delta_criminal: da, delta_victim: db })
        .unwrap()
}

proptest! {
    #[test]
    fn price_stays_between_cost_and_valuation(
        c in 0.0f64..500.0, extra in 0.0f64..5000.0, da in 0.0f64..=1.0, db in 0.0f64..=1.0,
    ) {
        let v = c + extra;
        let p = price(v, c, da, db);
        prop_assert!(p >= c - 1e-9 && p <= v + 1e-9, "{} not in [{}, {}]", p, c, v);
    }

    #[test]
    fn patience_moves_price_the_right_way(
        v in 100.0f64..5000.0,
        da in 0.0f64..0.999, db in 0.0f64..0.999,
        bump in 0.0f64..0.001,
    ) {
        let base = price(v, 10.0, da, db);
        prop_assert!(price(v, 10.0, da + bump, db) >= base - 1e-9);
        prop_assert!(price(v, 10.0, da, db + bump) <= base + 1e-9);
    }

    #[test]
    fn fully_patient_criminals_ignore_victim_patience(v in 10.0f64..5000.0, db in 0.0f64..0.999) {
        prop_assert_eq!(price(v, 10.0, 1.0, db), v);
    }

    #[test]
    fn commitment_beats_anticipated_discounts(
        vals in prop::collection::vec((0u32..1000).prop_map(f64::from), 1..60),
        mut path in prop::collection::vec((1u32..1200).prop_map(f64::from), 1..6),
    ) {
        path.sort_by(|a, b| b.total_cmp(a));
        let costs = CostModel::zero();
        let best = optimize_uniform_grid(&empirical_demand(&vals).unwrap(), &costs, vals.len() as u64);
        let out = coase_compare(&vals, &costs, 1.0, &PricePath::new(path).unwrap(), best.price).unwrap();
        prop_assert!(out.commitment_profit >= out.declining_profit);
    }
}

#[test]
fn patient_victims_all_wait_for_the_floor() {
    let path = PricePath::new(vec![900.0, 600.0, 300.0]).unwrap();
    let vals = [100.0, 350.0, 700.0, 1000.0];
    let out = coase_compare(&vals, &CostModel::zero(), 1.0, &path, 700.0).unwrap();
    assert_eq!(out.declining_payers, 3);
    assert_eq!(out.declining_profit, 900.0);
    assert_eq!(out.commitment_profit, 1400.0);
}
