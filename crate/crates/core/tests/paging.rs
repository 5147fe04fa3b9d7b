use osd::instance::{ClairvoyanceMode, Instance, PenaltyFn, Request, Space};
use osd::kosd::Kosd;
use osd::oracle::{offline_opt, Ball, OracleConfig, Threshold};
use osd::paging::{classical_paging, cold_start_instance, paging_with_delay, reduce_stream, weighted_star_instance, Policy};
use osd::ps::Ps;
use osd::sim::{run, Horizon};
use osd::{Extended, Rational, Scalar};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn q(n: i64, d: i64) -> Rational {
    Rational::new(n.into(), d.into())
}

fn random_pages(seed: u64, n: usize, k: usize, count: usize) -> Instance<Rational> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut times: Vec<i64> = (0..count).map(|_| rng.gen_range(0..4 * count as i64)).collect();
    times.sort_unstable();
    let requests = times
        .into_iter()
        .enumerate()
        .map(|(id, t)| {
            let slope = q(1, 1 << rng.gen_range(0..3));
            let mut penalty = PenaltyFn::linear(slope);
            if rng.gen_bool(0.25) {
                penalty.set_deadline(Some(q(rng.gen_range(1..6), 2))).unwrap();
            }
            Request { id, loc: rng.gen_range(0..n), arrival: q(t, 2), penalty }
        })
        .collect();
    Instance::new(Space::Pages(n), k, vec![0; k], requests).unwrap()
}

const POLICIES: [Policy; 4] = [Policy::MarkingDet, Policy::Lru, Policy::MarkingRand(11), Policy::Belady];

#[test]
fn delay_costs_at_most_the_swaps() {
    for seed in 0..200 {
        let inst = random_pages(seed, 6, 2, 10);
        for p in POLICIES {
            let rep = paging_with_delay(&inst, p).unwrap();
            let two = rep.alg_i_prime.clone() + rep.alg_i_prime.clone();
            assert!(rep.alg_i <= two, "seed {seed} {}: {} > 2 * {}", p.name(), rep.alg_i, rep.alg_i_prime);
        }
    }
}

#[test]
fn belady_is_a_lower_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..300 {
        let stream: Vec<usize> = (0..rng.gen_range(1..30)).map(|_| rng.gen_range(0..5)).collect();
        let k = rng.gen_range(1..4);
        let opt = classical_paging(&stream, k, Policy::Belady).unwrap().faults();
        for p in POLICIES {
            assert!(classical_paging(&stream, k, p).unwrap().faults() >= opt, "{stream:?} k={k} {}", p.name());
        }
        let marking = classical_paging(&stream, 3, Policy::MarkingDet).unwrap().faults();
        let belady = classical_paging(&stream, 3, Policy::Belady).unwrap().faults();
        assert!(marking <= 3 * belady + 3);
    }
}

#[test]
fn cache_never_overflows() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..100 {
        let stream: Vec<usize> = (0..20).map(|_| rng.gen_range(0..6)).collect();
        for p in POLICIES {
            let r = classical_paging(&stream, 2, p).unwrap();
            assert!(r.cache.iter().zip(&stream).all(|(c, page)| c.len() <= 2 && c.contains(page)));
        }
    }
}

#[test]
fn randomized_marking_is_deterministic_per_seed() {
    let stream: Vec<usize> = (0..40).map(|i| (i * 7 + i / 3) % 5).collect();
    let a = classical_paging(&stream, 2, Policy::MarkingRand(4)).unwrap();
    let b = classical_paging(&stream, 2, Policy::MarkingRand(4)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn optimum_with_delay_bounds_the_reduced_optimum() {
    let cfg = OracleConfig::default();
    for seed in 0..40 {
        let inst = random_pages(seed, 4, 2, 6);
        let opt_i = offline_opt(&cold_start_instance(&inst).unwrap(), &cfg).unwrap().opt_cost;
        let stream = reduce_stream(&inst).unwrap();
        let opt_ip = classical_paging(&stream.pages(), 2, Policy::Belady).unwrap().faults();
        assert!(Rational::of_usize(opt_ip) <= q(3, 1) * opt_i.clone() + q(1, 1), "seed {seed}: {opt_ip} vs {opt_i}");
        // Any schedule on the reduced stream is also feasible with delay.
        let rep = paging_with_delay(&inst, Policy::Belady).unwrap();
        assert!(opt_i <= rep.alg_i);
    }
}

#[test]
fn marking_chain_on_a_random_instance() {
    let inst = random_pages(77, 5, 2, 12);
    let marking = paging_with_delay(&inst, Policy::MarkingDet).unwrap();
    let belady = paging_with_delay(&inst, Policy::Belady).unwrap();
    assert!(marking.alg_i <= q(12, 1) * belady.alg_i_prime);
}

fn alternating(w: i64, rounds: i64) -> Instance<Rational> {
    // Penalty equal to the weight after unit delay, requests alternating at
    // unit intervals, one cache slot.
    let requests = (0..2 * rounds)
        .map(|i| {
            let page = (i % 2) as usize;
            let slope = if page == 0 { w } else { 1 };
            Request { id: i as usize, loc: page, arrival: q(i, 1), penalty: PenaltyFn::linear(q(slope, 1)) }
        })
        .collect();
    weighted_star_instance(&[q(w, 1), q(1, 1)], requests, 1).unwrap()
}

#[test]
fn weighted_pages_keep_the_heavy_page() {
    let mode = ClairvoyanceMode::Clairvoyant;
    let mut gaps = Vec::new();
    for w in [8, 64] {
        let tree = alternating(w, 32).to_tree(0).unwrap();
        let (ps, _) = run(&tree, Ps::default(), mode, Horizon::Completion).unwrap();
        let (naive, _) = run(&tree, Ball::new(Threshold::LeafWeight), mode, Horizon::Completion).unwrap();
        assert!(ps.violations.is_empty() && ps.unserved.is_empty());
        // Light requests are batched, so the server crosses far fewer edges.
        assert!(ps.service_cost.clone() * q(2, 1) < naive.service_cost, "{} vs {}", ps.service_cost, naive.service_cost);
        gaps.push((naive.total() / ps.total(), w));
    }
    assert!(gaps[0].0 > q(3, 2), "gap {} at w=8", gaps[0].0);
    assert!(gaps[1].0 > q(5, 2), "gap {} at w=64", gaps[1].0);
}

#[test]
fn kosd_on_a_weighted_star_returns_to_the_center() {
    let tree = alternating(8, 8).to_tree(0).unwrap();
    let (rep, _) = run(&tree, Kosd::new(), ClairvoyanceMode::Clairvoyant, Horizon::Completion).unwrap();
    assert!(rep.violations.is_empty() && rep.unserved.is_empty());
    // Each phase walks a leaf edge there and back.
    for p in &rep.phases {
        assert_eq!(p.edges.len(), 2);
        assert_eq!(p.edges[0], p.edges[1]);
    }
}

/// Emission times by direct integration: between consecutive candidate
/// instants the open interval's penalty is linear, so the crossing is found by
/// interpolation.
fn integrate(inst: &Instance<Rational>) -> Vec<(usize, Rational)> {
    let Space::Pages(n) = inst.space else { unreachable!() };
    let mut out = Vec::new();
    for page in 0..n {
        let reqs: Vec<&Request<Rational>> = inst.requests.iter().filter(|r| r.loc == page).collect();
        let Some(first) = reqs.first() else { continue };
        let mut open: Vec<&Request<Rational>> = Vec::new();
        let mut next = 0;
        let mut t = first.arrival.clone();
        let value = |open: &[&Request<Rational>], t: &Rational| -> Extended<Rational> {
            let mut v = q(0, 1);
            for r in open {
                match r.penalty.penalty_at(&(t.clone() - r.arrival.clone())).unwrap() {
                    Extended::Finite(x) => v += x,
                    Extended::Infinite => return Extended::Infinite,
                }
            }
            Extended::Finite(v)
        };
        let left = |open: &[&Request<Rational>], t: &Rational| -> Rational {
            open.iter().map(|r| r.penalty.finite_value(&(t.clone() - r.arrival.clone()))).fold(q(0, 1), |a, b| a + b)
        };
        loop {
            if !open.is_empty() && value(&open, &t) >= Extended::Finite(q(1, 1)) {
                out.push((page, t.clone()));
                open.clear();
            }
            while next < reqs.len() && reqs[next].arrival == t {
                open.push(reqs[next]);
                next += 1;
            }
            let mut cands: Vec<Rational> = reqs[next..].iter().map(|r| r.arrival.clone()).take(1).collect();
            for r in &open {
                if let Some(b) = r.penalty.next_breakpoint_after(&(t.clone() - r.arrival.clone())) {
                    cands.push(r.arrival.clone() + b);
                }
            }
            let v0 = left(&open, &t);
            let Some(t1) = cands.into_iter().min_by(|a, b| a.partial_cmp(b).unwrap()) else {
                let slope: Rational = open.iter().map(|r| r.penalty.segments().last().unwrap().1.clone()).fold(q(0, 1), |a, b| a + b);
                if !open.is_empty() && slope > q(0, 1) {
                    out.push((page, t.clone() + (q(1, 1) - v0) / slope));
                } else if !open.is_empty() {
                    out.push((page, Rational::from_integer((-1).into())));
                }
                break;
            };
            let v1 = left(&open, &t1);
            if !open.is_empty() && v1 >= q(1, 1) && v0 < q(1, 1) {
                let hit = t.clone() + (q(1, 1) - v0.clone()) / (v1 - v0) * (t1.clone() - t.clone());
                if hit < t1 {
                    out.push((page, hit));
                    open.clear();
                }
            }
            t = t1;
        }
    }
    out
}

fn arb_instance() -> impl Strategy<Value = Instance<Rational>> {
    let req = (0..3usize, 0..12i64, 1..5i64, proptest::option::of(1..8i64), proptest::option::of((1..4i64, 0..5i64)));
    proptest::collection::vec(req, 1..7).prop_map(|mut rs| {
        rs.sort_by_key(|r| r.1);
        let requests = rs
            .into_iter()
            .enumerate()
            .map(|(id, (loc, t, s, dl, seg))| {
                let mut segs = vec![(q(0, 1), q(s, 4))];
                if let Some((at, s2)) = seg {
                    segs.push((q(at, 2), q(s2, 4)));
                }
                let penalty = PenaltyFn::new(segs, dl.map(|d| q(d, 2))).unwrap();
                Request { id, loc, arrival: q(t, 2), penalty }
            })
            .collect();
        Instance::new(Space::Pages(3), 1, vec![0], requests).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn emissions_match_direct_integration(inst in arb_instance()) {
        let stream = reduce_stream(&inst).unwrap();
        let mut expected = integrate(&inst);
        let flush = stream.requests.iter().map(|r| r.time.clone()).chain(inst.requests.iter().map(|r| r.arrival.clone())).fold(q(0, 1), Rational::max_of);
        for e in &mut expected {
            if e.1 < q(0, 1) {
                e.1 = flush.clone();
            }
        }
        let mut got: Vec<(usize, Rational)> = stream.requests.iter().map(|r| (r.page, r.time.clone())).collect();
        got.sort();
        expected.sort();
        prop_assert_eq!(got, expected);
        // Every original request is covered exactly once.
        let mut covered: Vec<usize> = stream.requests.iter().flat_map(|r| r.covers.clone()).collect();
        covered.sort_unstable();
        prop_assert_eq!(covered, (0..inst.requests.len()).collect::<Vec<_>>());
    }

    #[test]
    fn reduction_bound_holds(inst in arb_instance(), k in 1usize..3) {
        let inst = Instance::new(inst.space.clone(), k, vec![0; k], inst.requests.clone()).unwrap();
        for p in POLICIES {
            let rep = paging_with_delay(&inst, p).unwrap();
            prop_assert!(rep.alg_i <= rep.alg_i_prime.clone() + rep.alg_i_prime.clone());
        }
    }
}
