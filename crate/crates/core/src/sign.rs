//! Koszul sign bookkeeping for permutations of graded symbols.
//!
//! Degrees throughout the engine are the shifted ones: the Lie bracket has
//! degree zero and the cup product degree one. Signs are computed from
//! products over inversions, so they compose multiplicatively.

use crate::error::{EngineError, Result};

/// Sign of permuting graded symbols.
///
/// `perm[k]` is the original index of the symbol standing at position `k`
/// after the permutation, and `degrees[i]` is the degree of original symbol
/// `i`. The sign is the product over inversions `(a, b)` (positions `a < b`
/// with `perm[a] > perm[b]`) of `(-1)^(degrees[perm[a]] * degrees[perm[b]])`.
pub fn koszul_sign(perm: &[usize], degrees: &[i64]) -> Result<i32> {
    if perm.len() != degrees.len() {
        return Err(EngineError::argument(format!(
            "permutation length {} does not match degree list length {}",
            perm.len(),
            degrees.len()
        )));
    }
    let mut seen = vec![false; perm.len()];
    for &p in perm {
        if p >= perm.len() || seen[p] {
            return Err(EngineError::argument("not a permutation"));
        }
        seen[p] = true;
    }
    let mut sign = 1i32;
    for a in 0..perm.len() {
        for b in (a + 1)..perm.len() {
            if perm[a] > perm[b] && (degrees[perm[a]] * degrees[perm[b]]) % 2 != 0 {
                sign = -sign;
            }
        }
    }
    Ok(sign)
}

/// Sign accumulated while stably sorting `items` by key, treating each item
/// as a symbol of the given parity (degree mod 2). Returns the sorted list
/// and the Koszul sign of the rearrangement. Used to bring wedge factors and
/// symmetric words into canonical order.
pub fn sort_graded_by_key<T, K: Ord>(
    items: Vec<(T, i64)>,
    key: impl Fn(&T) -> K,
) -> (Vec<T>, i32) {
    // insertion sort; counts transpositions of odd pairs exactly
    let mut out: Vec<(T, i64)> = Vec::with_capacity(items.len());
    let mut sign = 1i32;
    for (item, deg) in items {
        let k = key(&item);
        // find insertion point from the right, moving past larger keys
        let mut pos = out.len();
        while pos > 0 && key(&out[pos - 1].0) > k {
            if (out[pos - 1].1 % 2 != 0) && (deg % 2 != 0) {
                sign = -sign;
            }
            pos -= 1;
        }
        out.insert(pos, (item, deg));
    }
    (out.into_iter().map(|(t, _)| t).collect(), sign)
}

/// `(-1)^n` as an `i32`.
pub fn neg_one_pow(n: i64) -> i32 {
    if n % 2 == 0 {
        1
    } else {
        -1
    }
}
