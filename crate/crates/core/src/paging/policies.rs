use std::collections::BTreeSet;

use rand::seq::IteratorRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{OsdError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Policy {
    /// Marking, evicting the smallest unmarked page.
    MarkingDet,
    Lru,
    /// Marking, evicting a uniformly random unmarked page.
    MarkingRand(u64),
    /// Offline: evict the page requested farthest in the future.
    Belady,
}

impl Policy {
    pub fn name(&self) -> String {
        match self {
            Policy::MarkingDet => "marking".into(),
            Policy::Lru => "lru".into(),
            Policy::MarkingRand(s) => format!("marking-rand({s})"),
            Policy::Belady => "belady".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Access {
    Hit,
    Fault { evicted: Option<usize> },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PagingRun {
    pub accesses: Vec<Access>,
    /// Cache contents after each access.
    pub cache: Vec<BTreeSet<usize>>,
}

impl PagingRun {
    /// Cost of the run: every fault loads a page, starting from an empty cache.
    pub fn faults(&self) -> usize {
        self.accesses.iter().filter(|a| matches!(a, Access::Fault { .. })).count()
    }

    pub fn evictions(&self) -> usize {
        self.accesses.iter().filter(|a| matches!(a, Access::Fault { evicted: Some(_) })).count()
    }
}

/// Serves a classical request sequence with a cache of `k` pages, starting empty.
pub fn classical_paging(pages: &[usize], k: usize, policy: Policy) -> Result<PagingRun> {
    if k == 0 {
        return Err(OsdError::CapacityZero);
    }
    let mut cache: BTreeSet<usize> = BTreeSet::new();
    let mut marked: BTreeSet<usize> = BTreeSet::new();
    let mut last_use: Vec<(usize, usize)> = Vec::new();
    let mut rng = match policy {
        Policy::MarkingRand(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
        _ => None,
    };
    let mut run = PagingRun { accesses: Vec::new(), cache: Vec::new() };
    for (i, &p) in pages.iter().enumerate() {
        let access = if cache.contains(&p) {
            Access::Hit
        } else if cache.len() < k {
            cache.insert(p);
            Access::Fault { evicted: None }
        } else {
            let victim = match policy {
                Policy::Lru => {
                    *cache.iter().min_by_key(|q| last_use.iter().rev().find(|(pq, _)| pq == *q).map(|(_, t)| *t)).expect("cache is full")
                }
                Policy::Belady => *cache
                    .iter()
                    .max_by_key(|q| {
                        let next = pages[i + 1..].iter().position(|x| x == *q).unwrap_or(usize::MAX);
                        (next, std::cmp::Reverse(**q))
                    })
                    .expect("cache is full"),
                Policy::MarkingDet | Policy::MarkingRand(_) => {
                    if cache.iter().all(|q| marked.contains(q)) {
                        marked.clear();
                    }
                    let unmarked = cache.iter().filter(|q| !marked.contains(q));
                    match rng.as_mut() {
                        Some(r) => *unmarked.choose(r).expect("a phase leaves an unmarked page"),
                        None => *unmarked.min().expect("a phase leaves an unmarked page"),
                    }
                }
            };
            cache.remove(&victim);
            cache.insert(p);
            Access::Fault { evicted: Some(victim) }
        };
        marked.insert(p);
        last_use.push((p, i));
        run.accesses.push(access);
        run.cache.push(cache.clone());
    }
    Ok(run)
}
