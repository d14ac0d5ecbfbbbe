use parisian_core::montecarlo::{estimate_functional, Functional, SimConfig};
use parisian_core::parisian::{compute, Parisian, Precision, Quantity, RuinQuery};
use parisian_core::LevyModel;
use proptest::prelude::*;

fn models() -> impl Strategy<Value = LevyModel> {
    prop_oneof![
        (0.3f64..2.0, 0.5f64..1.5).prop_map(|(c, sigma)| LevyModel::BrownianRisk { c, sigma }),
        (1.0f64..3.0, 0.2f64..1.0, 0.5f64..2.0).prop_map(|(c, eta, alpha)| LevyModel::CramerLundbergExp { c, eta, alpha }),
    ]
}

/// Compound Poisson models with positive safety loading.
fn profitable(m: &LevyModel) -> bool {
    m.net_profit()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn ruin_probability_is_ordered(m in models(), x in 0.0f64..3.0, r in 0.1f64..3.0, q in 0.05f64..2.0) {
        prop_assume!(profitable(&m));
        let an = Parisian::new(&m);
        let mixed = an.ruin_prob_mixed(x, r, q).unwrap();
        let det = an.ruin_prob_det_delay(x, r).unwrap();
        let exp = an.ruin_prob_exp_delay(x, q).unwrap();
        let classical = an.ruin_prob_classical(x);
        prop_assert!(det.max(exp) <= mixed + 1e-9, "{det} {exp} {mixed}");
        prop_assert!(mixed <= classical + 1e-9, "{mixed} {classical}");
        prop_assert!(an.ruin_prob_mixed(x + 0.5, r, q).unwrap() <= mixed + 1e-9);
        prop_assert!(an.ruin_prob_mixed(x, r * 1.5, q).unwrap() <= mixed + 1e-9);
        prop_assert!(an.ruin_prob_mixed(x, r, q * 1.5).unwrap() >= mixed - 1e-9);
    }

    #[test]
    fn exit_and_ruin_partition_without_discount(
        m in models(), x in -0.5f64..2.0, gap in 0.5f64..2.0, r in 0.2f64..2.0, q in 0.0f64..1.5
    ) {
        let an = Parisian::new(&m);
        let query = RuinQuery::new(x, r, q).with_barrier(x.max(0.0) + gap);
        let total = an.exit_lt(&query).unwrap() + an.lt_ruin_two_sided(&query).unwrap();
        prop_assert!((total - 1.0).abs() < 1e-7, "{total}");
    }

    #[test]
    fn race_outcomes_partition(m in models(), x in -2.0f64..0.0, r in 0.2f64..2.0, q in 0.0f64..1.5) {
        let (up, clock) = Parisian::new(&m).race_lemma(x, 0.0, 0.0, q, r).unwrap();
        prop_assert!((up + clock - 1.0).abs() < 1e-8, "{up} {clock}");
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&up));
    }

    #[test]
    fn discounting_shrinks_transforms(m in models(), x in 0.0f64..2.0, p in 0.0f64..1.0, lambda in 0.0f64..0.5) {
        let query = RuinQuery::new(x, 1.0, 0.5).with_barrier(x + 2.0).with_tilt(lambda);
        let prec = Precision::default();
        let at = |p: f64| compute(&m, Quantity::JointLt, &query.with_discount(p), prec).unwrap().value;
        prop_assert!(at(p + 0.3) <= at(p) + 1e-9);
        prop_assert!(at(p) >= -1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 6, ..ProptestConfig::default() })]

    #[test]
    fn simulation_depends_only_on_seed(seed in any::<u64>(), x in 0.0f64..2.0) {
        let m = LevyModel::CramerLundbergExp { c: 2.0, eta: 1.0, alpha: 1.0 };
        let cfg = SimConfig { n_paths: 5_000, seed, ..SimConfig::default() };
        let query = RuinQuery::new(x, 1.0, 0.5);
        let a = estimate_functional(&m, &query, Functional::RuinProb, &cfg).unwrap();
        let b = estimate_functional(&m, &query, Functional::RuinProb, &cfg).unwrap();
        prop_assert_eq!(a, b);
    }
}
