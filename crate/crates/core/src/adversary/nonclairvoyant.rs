use std::collections::BTreeSet;

use serde_json::{json, Value};

use super::generators::{heavy_star, immediate};
use crate::error::{OsdError, Result};
use crate::instance::{ClairvoyanceMode, Instance, PenaltyFn, Space, TreeInstance};
use crate::metric_hst::NodeId;
use crate::oracle::{replay_witness, EpochStep, OracleResult, Tour};
use crate::scalar::Scalar;
use crate::sim::{CostReport, Horizon, OnlineAlgorithm, Simulation};

/// The heavy page.
const P0: NodeId = 1;

fn light(i: usize) -> NodeId {
    i + 2
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdversaryPhase<T> {
    pub start: T,
    /// Light pages made critical, in order.
    pub critical: Vec<usize>,
    /// Distinct light pages whose request from this phase the algorithm served
    /// before the phase ended.
    pub lights_served: usize,
    /// Distinct instants at which the algorithm served the heavy page.
    pub heavy_serves: usize,
    pub algorithm_cost: T,
    pub witness_cost: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdversaryReport<T> {
    pub w: usize,
    pub lights: usize,
    pub epsilon: T,
    pub phases: Vec<AdversaryPhase<T>>,
    pub report: CostReport<T>,
    /// Offline schedule: per phase, the critical pages at its start and the
    /// heavy page right after; every remaining light page at the end.
    pub witness: OracleResult<T>,
    /// The requests as finally revealed, deadlines included.
    pub instance: Instance<T>,
    /// Failed proof properties, empty when all hold.
    pub violations: Vec<String>,
}

impl<T: Scalar> AdversaryReport<T> {
    pub fn algorithm_cost(&self) -> T {
        self.report.total()
    }

    pub fn ratio(&self) -> Option<T> {
        let w = &self.witness.opt_cost;
        (w.is_positive()).then(|| self.algorithm_cost() / w.clone())
    }

    /// The ratio the proof guarantees in the limit.
    pub fn target(&self) -> T {
        T::of_usize(self.w) / T::of_usize(2)
    }

    pub fn to_json(&self) -> Value {
        let s = |v: &T| Value::String(v.to_decimal_string());
        json!({
            "W": self.w,
            "lights": self.lights,
            "epsilon": s(&self.epsilon),
            "algorithm": self.report.algorithm,
            "algorithm_cost": s(&self.algorithm_cost()),
            "witness_cost": s(&self.witness.opt_cost),
            "ratio": self.ratio().map_or(Value::Null, |r| s(&r)),
            "target": s(&self.target()),
            "deadline_misses": self.report.deadline_misses,
            "phases": self.phases.iter().map(|p| json!({
                "start": s(&p.start),
                "critical": p.critical,
                "lights_served": p.lights_served,
                "heavy_serves": p.heavy_serves,
                "algorithm_cost": s(&p.algorithm_cost),
                "witness_cost": s(&p.witness_cost),
            })).collect::<Vec<_>>(),
            "violations": self.violations,
        })
    }
}

fn walk<T: Scalar>(inst: &TreeInstance<T>, path: &[NodeId]) -> T {
    path.windows(2).fold(T::zero(), |a, w| a + inst.hst.distance::<T>(w[0], w[1]))
}

/// Adaptive lower-bound construction on a star with one heavy page of weight
/// `w` and `w²` unit pages, against an algorithm that cannot see future
/// penalties. Each phase requests every light page with zero penalty, then
/// for `t = 1..=w` makes one still unserved light page critical at time `t`
/// and requests the heavy page urgently just after.
pub fn nonclairvoyant_adversary<T: Scalar, A: OnlineAlgorithm<T>>(
    w: usize,
    phases: usize,
    alg: A,
    mode: ClairvoyanceMode,
) -> Result<AdversaryReport<T>> {
    if mode == ClairvoyanceMode::Clairvoyant {
        return Err(OsdError::ClairvoyantAlgorithm);
    }
    if w < 2 || phases == 0 {
        return Err(OsdError::BadParams("the adversary needs W >= 2 and at least one phase".into()));
    }
    let n = w * w;
    let eps = T::pow2(-2);
    let urgent = || PenaltyFn::deadline_only(immediate::<T>());
    let tree = TreeInstance::from_hst(heavy_star(n + 1, w), 1, vec![P0], vec![])?;
    let mut sim = Simulation::new(&tree, alg, mode)?;

    let mut log = Vec::new();
    let mut witness: Vec<EpochStep<T>> = Vec::new();
    let mut at = P0;
    let mut start = T::zero();
    let mut heavy_rids: Vec<Vec<usize>> = Vec::new();
    let mut light_rids: Vec<Vec<usize>> = Vec::new();
    for _ in 0..phases {
        sim.run_until(start.clone())?;
        let lights: Vec<usize> =
            (0..n).map(|i| sim.add_request(light(i), start.clone(), PenaltyFn::linear(T::zero()))).collect::<Result<_>>()?;
        let mut heavy = vec![sim.add_request(P0, start.clone() + eps.clone(), urgent())?];
        let mut critical = Vec::new();
        for t in 1..=w {
            let now = start.clone() + T::of_usize(t);
            sim.run_until(now.clone())?;
            let Some(i) = (0..n).find(|&i| sim.served_at(lights[i]).is_none()) else { break };
            sim.set_deadline(lights[i], now.clone())?;
            critical.push(i);
            heavy.push(sim.add_request(P0, now + eps.clone(), urgent())?);
        }
        if !critical.is_empty() {
            let mut path = vec![at];
            path.extend(critical.iter().map(|&i| light(i)));
            let served = critical.iter().map(|&i| lights[i]).chain(prior_pending(&light_rids, &critical, &witness)).collect();
            let cost = walk(&tree, &path);
            at = light(*critical.last().expect("nonempty"));
            witness.push(EpochStep { time: start.clone(), tours: vec![Tour { server: 0, path, served, cost }] });
        }
        // The server then camps at the heavy page for the rest of the phase.
        for &r in &heavy {
            let path = if at == P0 { vec![P0] } else { vec![at, P0] };
            let cost = walk(&tree, &path);
            at = P0;
            let time = sim.request(r).expect("known").arrival.clone();
            witness.push(EpochStep { time, tours: vec![Tour { server: 0, path, served: vec![r], cost }] });
        }
        log.push(AdversaryPhase {
            start: start.clone(),
            critical,
            lights_served: 0,
            heavy_serves: 0,
            algorithm_cost: T::zero(),
            witness_cost: T::zero(),
        });
        heavy_rids.push(heavy);
        light_rids.push(lights);
        start = start + T::of_usize(w + 1);
    }
    sim.run(Horizon::At(start.clone()))?;

    // Final sweep over every light page with a pending request.
    let done: BTreeSet<usize> = witness.iter().flat_map(|s| s.tours.iter().flat_map(|t| t.served.iter().copied())).collect();
    let pending: Vec<usize> = light_rids.iter().flatten().copied().filter(|r| !done.contains(r)).collect();
    if !pending.is_empty() {
        let mut pages: Vec<NodeId> = pending.iter().map(|&r| sim.request(r).expect("known").loc).collect();
        pages.sort_unstable();
        pages.dedup();
        let mut path = vec![at];
        path.extend(pages);
        let cost = walk(&tree, &path);
        witness.push(EpochStep { time: start.clone(), tours: vec![Tour { server: 0, path, served: pending, cost }] });
    }

    // Per-phase bookkeeping from the transcript.
    let report = sim.report();
    let width = T::of_usize(w + 1);
    for (k, p) in log.iter_mut().enumerate() {
        let end = p.start.clone() + width.clone();
        let inside = |t: &T| *t >= p.start && *t < end;
        p.lights_served = light_rids[k].iter().filter(|&&r| sim.served_at(r).is_some_and(|t| t < &end)).count();
        let mut times: Vec<T> = heavy_rids[k].iter().filter_map(|&r| sim.served_at(r).cloned()).filter(|t| inside(t)).collect();
        times.sort_by(|a, b| a.partial_cmp(b).expect("ordered"));
        times.dedup();
        p.heavy_serves = times.len();
        p.algorithm_cost = report.phases.iter().filter(|r| inside(&r.time)).fold(T::zero(), |a, r| a + r.cost.clone());
        p.witness_cost = witness.iter().filter(|s| inside(&s.time)).flat_map(|s| s.tours.iter()).fold(T::zero(), |a, t| a + t.cost.clone());
    }

    let instance = Instance::new(
        Space::Hst((*tree.hst).clone()),
        1,
        vec![P0],
        (0..sim.request_count()).map(|r| sim.request(r).expect("known").clone()).collect(),
    )?;
    let service = witness.iter().flat_map(|s| s.tours.iter()).fold(T::zero(), |a, t| a + t.cost.clone());
    let oracle = OracleResult { opt_cost: service.clone(), service_cost: service, delay_penalty: T::zero(), witness };
    let mut violations = Vec::new();
    match replay_witness(&instance, &oracle) {
        Ok(c) if c == oracle.opt_cost => {}
        Ok(c) => {
            violations.push(format!("witness replays to {} instead of {}", c.to_decimal_string(), oracle.opt_cost.to_decimal_string()))
        }
        Err(e) => violations.push(format!("witness is infeasible: {e}")),
    }
    for (k, p) in log.iter().enumerate() {
        if light_rids[k].len() != n {
            violations.push(format!("phase {k}: {} light requests at its start", light_rids[k].len()));
        }
        if p.lights_served < n && p.heavy_serves < w {
            violations.push(format!(
                "phase {k}: the algorithm served {} of {n} light pages and the heavy page {} times",
                p.lights_served, p.heavy_serves
            ));
        }
        if p.critical.len() > w {
            violations.push(format!("phase {k}: the witness serves {} light pages", p.critical.len()));
        }
    }
    Ok(AdversaryReport { w, lights: n, epsilon: eps, phases: log, report, witness: oracle, instance, violations })
}

/// Requests from earlier phases at the pages made critical now: the witness
/// visit serves them too.
fn prior_pending<T>(light_rids: &[Vec<usize>], critical: &[usize], witness: &[EpochStep<T>]) -> Vec<usize> {
    let done: BTreeSet<usize> = witness.iter().flat_map(|s| s.tours.iter().flat_map(|t| t.served.iter().copied())).collect();
    light_rids.iter().flat_map(|phase| critical.iter().map(move |&i| phase[i])).filter(|r| !done.contains(r)).collect()
}
