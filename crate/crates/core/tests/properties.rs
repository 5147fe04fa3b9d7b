use num_traits::ToPrimitive;
use osd::adversary::{gen_metric, gen_random, RandomParams};
use osd::instance::{parse_instance, serialize_instance, ClairvoyanceMode};
use osd::kosd::Kosd;
use osd::metric_hst::{frt_embed, round_edges_down, validate_hst};
use osd::oracle::{offline_opt, Ball, OracleConfig};
use osd::ps::Ps;
use osd::sim::{run, Horizon};
use osd::{ApproxInstance, ExactInstance, Rational};
use proptest::prelude::*;

fn mode() -> impl Strategy<Value = ClairvoyanceMode> {
    prop_oneof![Just(ClairvoyanceMode::Clairvoyant), Just(ClairvoyanceMode::Nonclairvoyant)]
}

fn params(servers: usize) -> impl Strategy<Value = RandomParams> {
    (1usize..=8, 1usize..=3, 1usize..=10, 0.0f64..=0.5).prop_map(move |(leaves, depth, requests, dl)| RandomParams {
        leaves,
        depth,
        requests,
        servers,
        deadline_probability: dl,
        ..RandomParams::default()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ps_keeps_its_invariants(seed in any::<u64>(), p in params(1), m in mode()) {
        let inst: ExactInstance = gen_random(seed, &p).unwrap();
        let tree = inst.to_tree(0).unwrap();
        let (rep, _) = run(&tree, Ps::new(), m, Horizon::Completion).unwrap();
        prop_assert!(rep.violations.is_empty(), "{:?}", rep.violations);
        prop_assert!(rep.unserved.is_empty());
        prop_assert_eq!(rep.deadline_misses, 0);
        prop_assert!(rep.delay_penalty <= rep.service_cost);
        // Each request is served in exactly one phase.
        let served: usize = rep.phases.iter().map(|ph| ph.served.len()).sum();
        prop_assert_eq!(served, inst.requests.len());
    }

    #[test]
    fn kosd_keeps_its_invariants(seed in any::<u64>(), p in params(2), m in mode()) {
        let inst: ExactInstance = gen_random(seed, &p).unwrap();
        let tree = inst.to_tree(0).unwrap();
        let (rep, _) = run(&tree, Kosd::new(), m, Horizon::Completion).unwrap();
        prop_assert!(rep.violations.is_empty(), "{:?}", rep.violations);
        prop_assert!(rep.unserved.is_empty());
        prop_assert!(rep.delay_penalty <= rep.service_cost);
    }

    #[test]
    fn the_optimum_is_a_lower_bound(seed in any::<u64>(), requests in 1usize..=6) {
        let p = RandomParams { leaves: 4, depth: 2, requests, ..RandomParams::default() };
        let inst: ExactInstance = gen_random(seed, &p).unwrap();
        let tree = inst.to_tree(0).unwrap();
        let opt = offline_opt(&inst, &OracleConfig::default()).unwrap().opt_cost;
        for rep in [
            run(&tree, Ps::new(), ClairvoyanceMode::Clairvoyant, Horizon::Completion).unwrap().0,
            run(&tree, Ball::default(), ClairvoyanceMode::Clairvoyant, Horizon::Completion).unwrap().0,
        ] {
            prop_assert!(rep.total() >= opt, "{} below {}", rep.algorithm, opt);
        }
    }

    #[test]
    fn instances_round_trip_through_json(seed in any::<u64>(), p in params(1)) {
        let inst: ExactInstance = gen_random(seed, &p).unwrap();
        let back: ExactInstance = parse_instance(&serialize_instance(&inst)).unwrap();
        prop_assert_eq!(back, inst);
    }

    #[test]
    fn embeddings_dominate_and_are_valid(seed in any::<u64>(), n in 2usize..10, w in 1usize..30) {
        let metric = gen_metric::<Rational>(seed, n, w).unwrap();
        let e = frt_embed(&metric, seed).unwrap();
        prop_assert!(e.dominates());
        prop_assert!(validate_hst(&e.hst).is_empty());
        prop_assert_eq!(e.hst.leaves().len(), n);
        let again = round_edges_down(&e.hst.to_weighted_tree::<Rational>()).unwrap();
        prop_assert_eq!(again.len_exps(), e.hst.len_exps());
    }

    #[test]
    fn floats_track_exact_costs(seed in any::<u64>(), p in params(1)) {
        let exact: ExactInstance = gen_random(seed, &p).unwrap();
        let approx: ApproxInstance = gen_random(seed, &p).unwrap();
        let m = ClairvoyanceMode::Clairvoyant;
        let (e, _) = run(&exact.to_tree(0).unwrap(), Ps::new(), m, Horizon::Completion).unwrap();
        let (a, _) = run(&approx.to_tree(0).unwrap(), Ps::new(), m, Horizon::Completion).unwrap();
        let want = e.total().to_f64().unwrap();
        prop_assert!((a.total() - want).abs() <= 1e-6 * want.max(1.0), "{} vs {}", a.total(), want);
        prop_assert_eq!(a.phases.len(), e.phases.len());
    }
}
