//! Exact-sum selection from powers of two.

use crate::error::{OsdError, Result};
use crate::scalar::Scalar;

/// Picks indices of `lengths` summing to exactly `target`.
///
/// Every length must be a power of two strictly below `target`, which must be
/// a power of two itself. Elements are taken in decreasing order wherever the
/// construction leaves the choice open.
pub fn subset_exact<T: Scalar>(lengths: &[T], target: &T) -> Result<Vec<usize>> {
    let j = exponent_of(target)?;
    let mut items = Vec::with_capacity(lengths.len());
    for (i, l) in lengths.iter().enumerate() {
        let e = exponent_of(l)?;
        if e >= j {
            return Err(OsdError::NonPowerOfTwo(l.to_decimal_string()));
        }
        items.push((i, e));
    }
    let total: T = lengths.iter().cloned().fold(T::zero(), |a, b| a + b);
    if total < *target {
        return Err(OsdError::InsufficientSum { target: target.to_decimal_string(), total: total.to_decimal_string() });
    }
    // Work in units of the smallest element so sums are integers.
    let base = items.iter().map(|&(_, e)| e).min().unwrap_or(j);
    if j - base > 120 {
        return Err(OsdError::TooLarge("length exponents span more than 120".into()));
    }
    let mut scaled: Vec<(usize, u128)> = items.iter().map(|&(i, e)| (i, 1u128 << (e - base))).collect();
    scaled.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut out = solve(scaled, (j - base) as u32);
    out.sort_unstable();
    Ok(out)
}

fn exponent_of<T: Scalar>(x: &T) -> Result<i32> {
    match x.floor_log2() {
        Some(e) if T::pow2(e) == *x => Ok(e),
        _ => Err(OsdError::NonPowerOfTwo(x.to_decimal_string())),
    }
}

fn sum(items: &[(usize, u128)]) -> u128 {
    items.iter().map(|&(_, v)| v).sum()
}

/// Drops the smallest elements until the sum is below 1.5 times `2^j`.
fn trim(mut items: Vec<(usize, u128)>, j: u32) -> Vec<(usize, u128)> {
    let target = 1u128 << j;
    while 2 * sum(&items) >= 3 * target {
        items.pop();
    }
    items
}

/// `items` sorted by decreasing value, each below `2^j`, summing to at least `2^j`.
fn solve(items: Vec<(usize, u128)>, j: u32) -> Vec<usize> {
    let items = trim(items, j);
    let half = 1u128 << (j - 1);
    if j == 1 {
        return items.iter().take(2).map(|&(i, _)| i).collect();
    }
    let big: Vec<usize> = items.iter().filter(|&&(_, v)| v == half).map(|&(i, _)| i).collect();
    if big.len() >= 2 {
        return big[..2].to_vec();
    }
    if big.len() == 1 {
        let rest: Vec<(usize, u128)> = items.iter().filter(|&&(i, _)| i != big[0]).copied().collect();
        let mut out = vec![big[0]];
        out.extend(solve(rest, j - 1));
        return out;
    }
    let mut groups: Vec<Vec<(usize, u128)>> = Vec::new();
    let mut iter = items.into_iter();
    for _ in 0..2 {
        let mut g = Vec::new();
        for it in iter.by_ref() {
            g.push(it);
            if sum(&g) >= half {
                break;
            }
        }
        groups.push(g);
    }
    let mut out = Vec::new();
    for g in groups {
        if g.len() == 1 {
            out.push(g[0].0);
        } else {
            out.extend(solve(g, j - 1));
        }
    }
    out
}
