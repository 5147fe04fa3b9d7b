use std::collections::{BTreeMap, BTreeSet};

use osd::adversary::{gen_random, gen_spatial, gen_star_rates, RandomParams};
use osd::instance::{ClairvoyanceMode, Instance, PenaltyFn, Request, Space};
use osd::metric_hst::Hst;
use osd::oracle::Ball;
use osd::ps::{key_edges, Counter, Elem, Ps, Scope, Track};
use osd::sim::{run, Horizon, Position, Simulation};
use osd::Rational;

fn q(n: i64, d: i64) -> Rational {
    Rational::new(n.into(), d.into())
}

fn req(id: usize, loc: usize, at: Rational, penalty: PenaltyFn<Rational>) -> Request<Rational> {
    Request { id, loc, arrival: at, penalty }
}

fn tree(parent: &[Option<usize>], exps: &[u32]) -> Hst {
    Hst::new(parent.to_vec(), exps.to_vec(), BTreeMap::new()).unwrap()
}

fn ps_run(inst: &Instance<Rational>) -> osd::sim::CostReport<Rational> {
    let tree = inst.to_tree(0).unwrap();
    run(&tree, Ps::new(), ClairvoyanceMode::Clairvoyant, Horizon::Completion).unwrap().0
}

fn saturated(hst: &Hst, edges: &[usize]) -> Track<Rational> {
    let mut t = Track::new(q(0, 1));
    for &e in edges {
        let cap = hst.len::<Rational>(e);
        let mut c = Counter::new(cap.clone());
        c.w = cap;
        c.sat = true;
        t.counters.insert(Elem::whole(e), c);
    }
    t
}

#[test]
fn relevant_subtree_of_a_star_leaf() {
    let h = Hst::star(&[1, 1, 1]);
    let s = Scope::<Rational>::for_major(&h, &Position::Node(0), Elem::whole(2), q(2, 1));
    assert_eq!(s.nodes, BTreeSet::from([2]));
}

#[test]
fn server_inside_the_major_edge_subtree() {
    // root 0: edges 1 (8, holds the server at 4), 2 (8), 3 (4); 1 -> 4 (2).
    let h = tree(&[None, Some(0), Some(0), Some(0), Some(1)], &[0, 3, 3, 2, 1]);
    let s = Scope::<Rational>::for_major(&h, &Position::Node(4), Elem::whole(1), q(8, 1));
    assert_eq!(s.x, 0);
    // The equal-length sibling stays out; the shorter one is in.
    assert_eq!(s.first_layer, vec![3]);
    assert_eq!(s.nodes, BTreeSet::from([0, 3]));
}

#[test]
fn key_edges_prefer_the_deeper_cut_on_ties() {
    // 1 (4) with children 2, 3 (2 each); 2 has children 4, 5 (1 each).
    let h = tree(&[None, Some(0), Some(1), Some(1), Some(2), Some(2)], &[0, 2, 1, 1, 0, 0]);
    let s = Scope::<Rational>::below(&h, 1);
    let (k, total) = key_edges(&h, &s, &BTreeSet::from([2, 3]));
    assert_eq!((k, total.clone()), (vec![Elem::whole(2), Elem::whole(3)], q(4, 1)));
    let (k, total) = key_edges(&h, &s, &BTreeSet::from([2, 3, 4, 5]));
    assert_eq!(k, vec![Elem::whole(4), Elem::whole(5), Elem::whole(3)]);
    assert_eq!(total, q(4, 1));
    let (k, _) = key_edges(&h, &s, &BTreeSet::new());
    assert_eq!(k, vec![Elem::whole(1)]);
}

#[test]
fn f_values() {
    // 1 (4) with children 2, 3 (2 each) and 4 (1).
    let h = tree(&[None, Some(0), Some(1), Some(1), Some(1)], &[0, 2, 1, 1, 0]);
    let s = Scope::<Rational>::below(&h, 1);
    assert_eq!(s.f_value(&h, &saturated(&h, &[2, 3, 4]), None), q(0, 1));
    let t = saturated(&h, &[1, 2, 3, 4]);
    assert_eq!(s.f_value(&h, &t, Some(4)), q(1, 1));
    assert_eq!(s.f_value(&h, &t, None), q(5, 1));
    assert!(s.over_by_children(&h, &t, None));
    let t = saturated(&h, &[1, 2]);
    assert_eq!(s.f_value(&h, &t, None), q(4, 1));
    assert!(!s.over_by_children(&h, &t, None));
}

#[test]
fn lone_request_is_served_along_its_path() {
    let inst = Instance::new(Space::Hst(Hst::star(&[1])), 1, vec![0], vec![req(0, 1, q(0, 1), PenaltyFn::linear(q(1, 1)))]).unwrap();
    let rep = ps_run(&inst);
    assert_eq!(rep.phases.len(), 1);
    let p = &rep.phases[0];
    assert_eq!((p.time.clone(), p.served.clone(), p.cost.clone(), p.edges.clone()), (q(2, 1), vec![0], q(2, 1), vec![1]));
    assert_eq!(p.key_edges, vec![1]);
    assert_eq!(rep.total(), q(4, 1));
}

#[test]
fn deadline_triggers_on_time() {
    // 1 (4) above leaves 2, 3 (1); a deadline request and a free one.
    let h = tree(&[None, Some(0), Some(1), Some(1)], &[0, 2, 0, 0]);
    let reqs = vec![req(0, 2, q(0, 1), PenaltyFn::deadline_only(q(1, 1))), req(1, 3, q(0, 1), PenaltyFn::linear(q(0, 1)))];
    let tree = Instance::new(Space::Hst(h), 1, vec![0], reqs).unwrap().to_tree(0).unwrap();
    let (rep, _) = run(&tree, Ps::new(), ClairvoyanceMode::Clairvoyant, Horizon::At(q(5, 1))).unwrap();
    assert_eq!(rep.phases[0].time, q(1, 1));
    assert!(rep.phases[0].served.contains(&0));
    assert_eq!(rep.deadline_misses, 0);
}

#[test]
fn time_forwarding_pulls_in_a_slow_leaf() {
    // Star with edges 4, 1, 1; the server sits at the long leaf. The fast
    // request becomes critical at 5, the slow one only at 8.
    let reqs = vec![req(0, 2, q(0, 1), PenaltyFn::linear(q(1, 1))), req(1, 3, q(0, 1), PenaltyFn::linear(q(1, 8)))];
    let inst = Instance::new(Space::Hst(Hst::star(&[2, 0, 0])), 1, vec![1], reqs).unwrap();
    let rep = ps_run(&inst);
    assert_eq!(rep.phases.len(), 1);
    assert_eq!(rep.phases[0].time, q(5, 1));
    assert_eq!(rep.phases[0].served, vec![0, 1]);
    assert_eq!(rep.phases[0].cost, q(8, 1));
}

#[test]
fn sibling_subtrees_walk_cost() {
    // Down the 4-edge, then each unit leaf and back: 4 + 2 + 2.
    let h = tree(&[None, Some(0), Some(1), Some(1)], &[0, 2, 0, 0]);
    let reqs = vec![req(0, 2, q(0, 1), PenaltyFn::deadline_only(q(1, 1))), req(1, 3, q(0, 1), PenaltyFn::deadline_only(q(1, 1)))];
    let inst = Instance::new(Space::Hst(h), 1, vec![0], reqs).unwrap();
    let tree = inst.to_tree(0).unwrap();
    let mut sim = Simulation::new(&tree, Ps::new(), ClairvoyanceMode::Clairvoyant).unwrap();
    sim.run(Horizon::Completion).unwrap();
    let rep = sim.report();
    assert_eq!(rep.phases[0].cost, q(8, 1));
    assert_eq!(rep.phases[0].edges, vec![1, 2, 2, 3, 3]);
    // Traversed counters are reset.
    assert!(sim.algorithm().track().counters.values().all(|c| c.w == q(0, 1)));
}

#[test]
fn spatial_locality_serves_whole_subtrees() {
    let inst = gen_spatial::<Rational>(2).unwrap();
    let rep = ps_run(&inst);
    let subtree = |r: usize| inst.requests[r].loc;
    let tree = inst.to_tree(0).unwrap();
    for p in &rep.phases {
        let tops: BTreeSet<usize> = p.served.iter().map(|&r| tree.hst.parent(subtree(r)).unwrap()).collect();
        assert_eq!(tops.len(), 1, "phase at {} mixes subtrees", p.time);
        assert_eq!(p.served.len(), 2);
    }
}

#[test]
fn preemption_beats_ball_growing_on_rates() {
    let inst = gen_star_rates::<Rational>(5, 4).unwrap();
    let rep = ps_run(&inst);
    let lights: BTreeSet<usize> = inst.requests.iter().filter(|r| r.loc != 1).map(|r| r.id).collect();
    // One phase serves several light leaves before they are critical.
    assert!(rep.phases.iter().any(|p| p.served.iter().filter(|r| lights.contains(r)).count() >= 3));
    let tree = inst.to_tree(0).unwrap();
    let (ball, _) = run(&tree, Ball::default(), ClairvoyanceMode::Clairvoyant, Horizon::Completion).unwrap();
    assert!(ball.total() > rep.total() + rep.total());
}

#[test]
fn random_instances_keep_every_invariant() {
    for (params, seeds) in
        [(RandomParams::default(), 150), (RandomParams { leaves: 10, depth: 4, requests: 14, ..RandomParams::default() }, 60)]
    {
        for seed in 0..seeds {
            let inst = gen_random::<Rational>(seed, &params).unwrap();
            let tree = inst.to_tree(0).unwrap();
            for mode in [ClairvoyanceMode::Clairvoyant, ClairvoyanceMode::Nonclairvoyant] {
                let (rep, _) = run(&tree, Ps::new(), mode, Horizon::Completion).unwrap();
                assert!(rep.violations.is_empty(), "seed {seed} {mode:?}: {:?}", rep.violations);
                assert!(rep.unserved.is_empty(), "seed {seed}");
                assert_eq!(rep.deadline_misses, 0, "seed {seed}");
            }
        }
    }
}

#[test]
fn runs_are_deterministic() {
    let inst = gen_random::<Rational>(7, &RandomParams::default()).unwrap();
    let tree = inst.to_tree(0).unwrap();
    let a = run(&tree, Ps::new(), ClairvoyanceMode::Clairvoyant, Horizon::Completion).unwrap();
    let b = run(&tree, Ps::new(), ClairvoyanceMode::Clairvoyant, Horizon::Completion).unwrap();
    assert_eq!(a.1.to_jsonl(), b.1.to_jsonl());
    assert_eq!(a.0.to_json().to_string(), b.0.to_json().to_string());
}
