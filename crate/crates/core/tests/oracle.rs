use osd::adversary::{gen_random, RandomParams};
use osd::instance::{ClairvoyanceMode, Instance, Space};
use osd::kosd::Kosd;
use osd::oracle::{offline_opt, replay_witness, Grid, OracleConfig};
use osd::ps::Ps;
use osd::sim::{run, Horizon};
use osd::{Rational, Scalar};

/// Exhaustive search: at every arrival time, any subset of pending requests is
/// served by a walk over their locations in any order.
fn brute(inst: &Instance<Rational>) -> Rational {
    let mut times: Vec<Rational> = inst.requests.iter().map(|r| r.arrival.clone()).collect();
    times.dedup();
    fn perms(v: &[usize]) -> Vec<Vec<usize>> {
        if v.is_empty() {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for i in 0..v.len() {
            let mut rest = v.to_vec();
            let x = rest.remove(i);
            for mut p in perms(&rest) {
                p.insert(0, x);
                out.push(p);
            }
        }
        out
    }
    fn go(inst: &Instance<Rational>, times: &[Rational], ei: usize, pos: usize, served: u32) -> Option<Rational> {
        let n = inst.requests.len();
        if ei == times.len() {
            return (served.count_ones() as usize == n).then(|| Rational::from_integer(0.into()));
        }
        let t = &times[ei];
        let pending: Vec<usize> = (0..n).filter(|&i| served >> i & 1 == 0 && inst.requests[i].arrival <= *t).collect();
        let mut best: Option<Rational> = None;
        for sub in 0u32..1 << pending.len() {
            let chosen: Vec<usize> = (0..pending.len()).filter(|j| sub >> j & 1 == 1).map(|j| pending[j]).collect();
            let left_ok = pending.iter().filter(|r| !chosen.contains(r)).all(|&r| {
                let req = &inst.requests[r];
                match (times.get(ei + 1), req.penalty.deadline()) {
                    (None, _) => false,
                    (Some(nx), Some(d)) => *nx <= req.arrival.clone() + d.clone(),
                    _ => true,
                }
            });
            if !left_ok {
                continue;
            }
            let pen = chosen.iter().fold(Rational::from_integer(0.into()), |a, &r| {
                a + inst.requests[r].penalty.finite_value(&(t.clone() - inst.requests[r].arrival.clone()))
            });
            let mut locs: Vec<usize> = chosen.iter().map(|&r| inst.requests[r].loc).collect();
            locs.sort_unstable();
            locs.dedup();
            let mask = chosen.iter().fold(served, |m, &r| m | 1 << r);
            for p in perms(&locs) {
                let mut at = pos;
                let mut walk = Rational::from_integer(0.into());
                for &v in &p {
                    walk += inst.space.distance(at, v);
                    at = v;
                }
                if let Some(rest) = go(inst, times, ei + 1, at, mask) {
                    let c = walk + pen.clone() + rest;
                    if best.as_ref().is_none_or(|b| c < *b) {
                        best = Some(c);
                    }
                }
            }
        }
        best
    }
    go(inst, &times, 0, inst.start[0], 0).expect("feasible")
}

#[test]
fn dp_matches_exhaustive_search() {
    let p = RandomParams { leaves: 4, depth: 2, requests: 4, ..RandomParams::default() };
    for seed in 0..60 {
        let inst = gen_random::<Rational>(seed, &p).unwrap();
        let r = offline_opt(&inst, &OracleConfig::default()).unwrap();
        assert_eq!(r.opt_cost, brute(&inst), "seed {seed}");
    }
}

#[test]
fn full_grid_gives_the_same_optimum() {
    let p = RandomParams { requests: 6, ..RandomParams::default() };
    for seed in 0..40 {
        let inst = gen_random::<Rational>(seed, &p).unwrap();
        let a = offline_opt(&inst, &OracleConfig::default()).unwrap();
        let b = offline_opt(&inst, &OracleConfig { grid: Grid::Full, ..OracleConfig::default() }).unwrap();
        assert_eq!(a.opt_cost, b.opt_cost, "seed {seed}");
    }
}

#[test]
fn witness_replays_to_the_reported_cost() {
    for (servers, seeds) in [(1, 0..40), (2, 100..130)] {
        let p = RandomParams { requests: 6, servers, ..RandomParams::default() };
        for seed in seeds {
            let inst = gen_random::<Rational>(seed, &p).unwrap();
            let r = offline_opt(&inst, &OracleConfig::default()).unwrap();
            assert_eq!(replay_witness(&inst, &r).unwrap(), r.opt_cost, "seed {seed}");
            assert_eq!(r.service_cost.clone() + r.delay_penalty.clone(), r.opt_cost);
        }
    }
}

#[test]
fn online_algorithms_never_beat_the_optimum() {
    for servers in [1, 2] {
        let p = RandomParams { requests: 6, depth: 2, servers, ..RandomParams::default() };
        for seed in 0..40 {
            let inst = gen_random::<Rational>(seed, &p).unwrap();
            let opt = offline_opt(&inst, &OracleConfig::default()).unwrap().opt_cost;
            let tree = inst.to_tree(0).unwrap();
            let (k, _) = run(&tree, Kosd::new(), ClairvoyanceMode::Clairvoyant, Horizon::Completion).unwrap();
            assert!(k.total() >= opt, "seed {seed}");
            if servers == 1 {
                let (ps, _) = run(&tree, Ps::new(), ClairvoyanceMode::Clairvoyant, Horizon::Completion).unwrap();
                assert!(ps.total() >= opt, "seed {seed}");
            }
        }
    }
}

#[test]
fn pages_space_is_uniform() {
    let inst = osd::instance::parse_instance::<Rational>(
        r#"{"space": {"pages": 3}, "k": 1, "start": [0], "requests": [
            {"id": 0, "leaf": 1, "arrival": "0", "segments": [["0", "1"]]},
            {"id": 1, "leaf": 2, "arrival": "0", "segments": [["0", "1"]]}
        ]}"#,
    );
    let inst = inst.unwrap();
    assert!(matches!(inst.space, Space::Pages(3)));
    let r = offline_opt(&inst, &OracleConfig::default()).unwrap();
    assert_eq!(r.opt_cost, Rational::parse_decimal("2").unwrap());
}
