use crate::error::{OsdError, Result};
use crate::instance::{Instance, Request, Space};
use crate::metric_hst::Hst;
use crate::scalar::Scalar;

/// Weighted paging with delay as a star: page `i` is leaf `i + 1`, on an edge
/// of length `weights[i]` rounded down to a power of two. Requests name pages;
/// all `k` servers start at the center.
pub fn weighted_star_instance<T: Scalar>(weights: &[T], requests: Vec<Request<T>>, k: usize) -> Result<Instance<T>> {
    let mut exps = Vec::with_capacity(weights.len());
    for (i, w) in weights.iter().enumerate() {
        if !w.is_positive() {
            return Err(OsdError::ZeroWeight(i));
        }
        if *w < T::one() {
            return Err(OsdError::BadParams(format!("page {i}: weight {} is below 1", w.to_decimal_string())));
        }
        exps.push(w.floor_log2().expect("weights are positive") as u32);
    }
    let leaf_map = (0..weights.len()).map(|p| (p.to_string(), p + 1)).collect();
    let star = Hst::star(&exps).with_leaf_map(leaf_map);
    let mut moved = Vec::with_capacity(requests.len());
    for r in requests {
        if r.loc >= weights.len() {
            return Err(OsdError::UnknownNode(r.loc));
        }
        moved.push(Request { loc: r.loc + 1, ..r });
    }
    Instance::new(Space::Hst(star), k, vec![0; k], moved)
}
