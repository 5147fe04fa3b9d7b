use serde_json::{json, Value};

use super::policies::{classical_paging, PagingRun, Policy};
use super::reduce::{reduce_stream, ReducedStream};
use crate::error::{OsdError, Result};
use crate::instance::{Instance, Space};
use crate::metric_hst::Metric;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct DelayPagingReport<T> {
    pub policy: String,
    pub stream: ReducedStream<T>,
    pub run: PagingRun,
    /// Serving time of each original request.
    pub served_at: Vec<T>,
    pub faults: usize,
    pub delay: T,
    /// Cost on the instance with delay: faults plus delay penalty.
    pub alg_i: T,
    /// Cost on the reduced classical stream: faults.
    pub alg_i_prime: T,
}

impl<T: Scalar> DelayPagingReport<T> {
    pub fn to_json(&self) -> Value {
        let s = |v: &T| Value::String(v.to_decimal_string());
        json!({
            "policy": self.policy,
            "classical_requests": self.stream.requests.len(),
            "faults": self.faults,
            "delay": s(&self.delay),
            "alg_I": s(&self.alg_i),
            "alg_I_prime": s(&self.alg_i_prime),
        })
    }
}

/// Runs `policy` on the reduced stream and replays its cache on the original
/// requests. A request for a resident page is served on arrival; any other
/// request waits for the next classical request for its page. At equal times
/// classical requests come first.
pub fn paging_with_delay<T: Scalar>(inst: &Instance<T>, policy: Policy) -> Result<DelayPagingReport<T>> {
    let Space::Pages(_) = inst.space else {
        return Err(OsdError::NonUniformMetric);
    };
    let stream = reduce_stream(inst)?;
    let mut order: Vec<usize> = (0..stream.requests.len()).collect();
    order.sort_by(|&a, &b| stream.requests[a].time.partial_cmp(&stream.requests[b].time).expect("times are ordered").then(a.cmp(&b)));
    let sorted: Vec<usize> = order.iter().map(|&i| stream.requests[i].page).collect();
    let run = classical_paging(&sorted, inst.k, policy)?;

    let mut served_at: Vec<Option<T>> = vec![None; inst.requests.len()];
    let mut pending: Vec<Vec<usize>> = vec![Vec::new(); inst.space.location_count()];
    let mut resident = std::collections::BTreeSet::new();
    let mut next = 0;
    for r in &inst.requests {
        while next < order.len() && stream.requests[order[next]].time <= r.arrival {
            let c = &stream.requests[order[next]];
            for rid in pending[c.page].drain(..) {
                served_at[rid] = Some(c.time.clone());
            }
            resident = run.cache[next].clone();
            next += 1;
        }
        if resident.contains(&r.loc) {
            served_at[r.id] = Some(r.arrival.clone());
        } else {
            pending[r.loc].push(r.id);
        }
    }
    for &i in &order[next..] {
        let c = &stream.requests[i];
        for rid in pending[c.page].drain(..) {
            served_at[rid] = Some(c.time.clone());
        }
    }
    let served_at: Vec<T> = served_at
        .into_iter()
        .enumerate()
        .map(|(i, s)| s.ok_or_else(|| OsdError::Internal(format!("request {i} never served"))))
        .collect::<Result<_>>()?;
    let mut delay = T::zero();
    for r in &inst.requests {
        delay = delay + r.penalty.finite_value(&(served_at[r.id].clone() - r.arrival.clone()));
    }
    let faults = run.faults();
    let alg_i_prime: T = T::of_usize(faults);
    Ok(DelayPagingReport {
        policy: policy.name(),
        stream,
        run,
        served_at,
        faults,
        alg_i: alg_i_prime.clone() + delay.clone(),
        delay,
        alg_i_prime,
    })
}

/// The same requests on `n` unit-spaced pages plus an empty slot where all
/// servers start, so that every page load costs one. Feed this to the offline
/// oracle to compare against a cold cache.
pub fn cold_start_instance<T: Scalar>(inst: &Instance<T>) -> Result<Instance<T>> {
    let Space::Pages(n) = inst.space else {
        return Err(OsdError::NonUniformMetric);
    };
    let metric = Metric::uniform(n + 1, T::one())?;
    Instance::new(Space::Metric(metric), inst.k, vec![n; inst.k], inst.requests.clone())
}
