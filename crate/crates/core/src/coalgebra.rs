//! Cofree tensor and Lie coalgebra combinatorics over a declared graded
//! alphabet, plus the symmetric-coalgebra machinery shared by the homotopy
//! transfer and twisting modules.
//!
//! Tensor words carry deconcatenation and the shuffle product; the cofree
//! Lie coalgebra is realized as the quotient of non-empty words by the
//! span of proper shuffles, with canonical representatives computed by
//! exact row reduction per multidegree block. The cobracket is
//! deconcatenation minus its Koszul flip, descended to the quotient.
//!
//! The symmetric side works over suspended letters: `SymExpr` is a formal
//! sum of sorted words in letters with Koszul signs from their suspended
//! degrees (odd letters square to zero). Coderivations and coalgebra
//! morphisms are applied through their Taylor coefficients; a degree -1
//! cobracket on letters extends to a bicoderivation by the rule
//!
//! ```text
//! db(g_1..g_n) = sum_i (-1)^{|g_1|+..+|g_{i-1}|+i-1}
//!                D(g_1)..D(g_{i-1}) db(g_i) D(g_{i+1})..D(g_n)
//! ```
//!
//! with unshifted degrees in the exponent and the coshuffle coproduct `D`.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{EngineError, Result};
use crate::scalar::{Rat, Scalar};
use crate::sign::neg_one_pow;

// ---------------------------------------------------------------------------
// Tensor coalgebra over a graded alphabet
// ---------------------------------------------------------------------------

/// Declared alphabet: letter names with integer degrees.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet {
    pub names: Vec<String>,
    pub degrees: Vec<i64>,
}

impl Alphabet {
    pub fn new(letters: &[(&str, i64)]) -> Self {
        Alphabet {
            names: letters.iter().map(|(n, _)| n.to_string()).collect(),
            degrees: letters.iter().map(|(_, d)| *d).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn degree(&self, l: usize) -> i64 {
        self.degrees[l]
    }

    pub fn word_degree(&self, w: &[usize]) -> i64 {
        w.iter().map(|&l| self.degrees[l]).sum()
    }
}

/// Formal sum of tensor words (letters referenced by alphabet index).
pub type TensorExpr = BTreeMap<Vec<usize>, Rat>;

pub fn tensor_add(expr: &mut TensorExpr, word: Vec<usize>, c: Rat) {
    if num_traits::Zero::is_zero(&c) {
        return;
    }
    let slot = expr.entry(word).or_insert_with(|| Rat::from_integer(0.into()));
    *slot += c;
    if num_traits::Zero::is_zero(slot) {
        // leave removal to normalize to keep borrow simple
    }
}

pub fn tensor_normalize(expr: &mut TensorExpr) {
    expr.retain(|_, c| !num_traits::Zero::is_zero(c));
}

/// All splittings of a word into (prefix, suffix), including the empty
/// sides. Coassociative by construction.
pub fn deconcat(word: &[usize]) -> Vec<(Vec<usize>, Vec<usize>)> {
    (0..=word.len())
        .map(|i| (word[..i].to_vec(), word[i..].to_vec()))
        .collect()
}

/// Shuffle product of two words with Koszul signs from letter degrees.
pub fn shuffle(alphabet: &Alphabet, w1: &[usize], w2: &[usize]) -> TensorExpr {
    let mut out = TensorExpr::new();
    // recursive interleaving; taking the leading letter of w2 moves it
    // across the whole remaining w1
    fn rec(
        alphabet: &Alphabet,
        w1: &[usize],
        w2: &[usize],
        acc: &mut Vec<usize>,
        sign: i32,
        out: &mut TensorExpr,
    ) {
        if w1.is_empty() && w2.is_empty() {
            let c = if sign < 0 {
                -Rat::from_integer(1.into())
            } else {
                Rat::from_integer(1.into())
            };
            tensor_add(out, acc.clone(), c);
            return;
        }
        if !w1.is_empty() {
            acc.push(w1[0]);
            rec(alphabet, &w1[1..], w2, acc, sign, out);
            acc.pop();
        }
        if !w2.is_empty() {
            let crossing = alphabet.word_degree(w1) * alphabet.degree(w2[0]);
            let s = sign * neg_one_pow(crossing);
            acc.push(w2[0]);
            rec(alphabet, w1, &w2[1..], acc, s, out);
            acc.pop();
        }
    }
    rec(alphabet, w1, w2, &mut Vec::new(), 1, &mut out);
    tensor_normalize(&mut out);
    out
}

/// Multiset key of a word (sorted letters): the multidegree block.
fn block_key(word: &[usize]) -> Vec<usize> {
    let mut k = word.to_vec();
    k.sort_unstable();
    k
}

/// All distinct words with the given letter multiset.
fn block_words(key: &[usize]) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut items = key.to_vec();
    fn rec(items: &mut Vec<usize>, acc: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if items.is_empty() {
            out.push(acc.clone());
            return;
        }
        let mut last: Option<usize> = None;
        for i in 0..items.len() {
            let l = items[i];
            if last == Some(l) {
                continue;
            }
            last = Some(l);
            items.remove(i);
            acc.push(l);
            rec(items, acc, out);
            acc.pop();
            items.insert(i, l);
        }
    }
    rec(&mut items, &mut Vec::new(), &mut out);
    out.sort();
    out
}

/// Row-reduced basis of the proper-shuffle subspace at one block, together
/// with the block's word list. Rows are reduced row echelon vectors in the
/// word-coordinate order.
pub struct ShuffleBlock {
    pub words: Vec<Vec<usize>>,
    /// (pivot column, reduced row) pairs.
    pub rows: Vec<(usize, Vec<Rat>)>,
}

impl ShuffleBlock {
    pub fn build(alphabet: &Alphabet, key: &[usize]) -> Self {
        let words = block_words(key);
        let index: BTreeMap<&Vec<usize>, usize> =
            words.iter().enumerate().map(|(i, w)| (w, i)).collect();
        let mut rows_raw: Vec<Vec<Rat>> = Vec::new();
        // all proper splits of the multiset into two nonempty parts, all
        // orderings of each part
        let n = key.len();
        if n >= 2 {
            for mask in 1..(1u32 << n) - 1 {
                let mut part1 = Vec::new();
                let mut part2 = Vec::new();
                for (i, &l) in key.iter().enumerate() {
                    if mask & (1 << i) != 0 {
                        part1.push(l);
                    } else {
                        part2.push(l);
                    }
                }
                for u in block_words(&part1) {
                    for v in block_words(&part2) {
                        let sh = shuffle(alphabet, &u, &v);
                        let mut row = vec![Rat::from_integer(0.into()); words.len()];
                        for (w, c) in &sh {
                            row[index[w]] += c;
                        }
                        if row.iter().any(|c| !num_traits::Zero::is_zero(c)) {
                            rows_raw.push(row);
                        }
                    }
                }
            }
        }
        // exact row reduction with leftmost-lowest pivoting
        let mut rows: Vec<(usize, Vec<Rat>)> = Vec::new();
        for mut row in rows_raw {
            for (pc, prow) in &rows {
                let f = row[*pc].clone();
                if !num_traits::Zero::is_zero(&f) {
                    for (x, y) in row.iter_mut().zip(prow) {
                        *x -= &f * y;
                    }
                }
            }
            if let Some(pc) = row.iter().position(|c| !num_traits::Zero::is_zero(c)) {
                let inv = row[pc].clone().recip();
                for x in row.iter_mut() {
                    *x *= &inv;
                }
                // back-substitute into existing rows
                for (_, prow) in rows.iter_mut() {
                    let f = prow[pc].clone();
                    if !num_traits::Zero::is_zero(&f) {
                        for (x, y) in prow.iter_mut().zip(&row) {
                            *x -= &f * y;
                        }
                    }
                }
                rows.push((pc, row));
                rows.sort_by_key(|(c, _)| *c);
            }
        }
        ShuffleBlock { words, rows }
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    /// Canonical representative: eliminate every pivot coordinate.
    pub fn reduce(&self, expr: &TensorExpr) -> TensorExpr {
        let index: BTreeMap<&Vec<usize>, usize> =
            self.words.iter().enumerate().map(|(i, w)| (w, i)).collect();
        let mut coords = vec![Rat::from_integer(0.into()); self.words.len()];
        for (w, c) in expr {
            coords[index[w]] += c;
        }
        for (pc, row) in &self.rows {
            let f = coords[*pc].clone();
            if !num_traits::Zero::is_zero(&f) {
                for (x, y) in coords.iter_mut().zip(row) {
                    *x -= &f * y;
                }
            }
        }
        let mut out = TensorExpr::new();
        for (i, c) in coords.into_iter().enumerate() {
            tensor_add(&mut out, self.words[i].clone(), c);
        }
        tensor_normalize(&mut out);
        out
    }
}

/// Canonical representative in the cofree Lie coalgebra: the input reduced
/// modulo the span of proper shuffles, blockwise. An empty-word component
/// is an argument error.
pub fn lie_project(alphabet: &Alphabet, expr: &TensorExpr) -> Result<TensorExpr> {
    let mut by_block: BTreeMap<Vec<usize>, TensorExpr> = BTreeMap::new();
    for (w, c) in expr {
        if w.is_empty() {
            return Err(EngineError::argument(
                "lie_project: empty-word component present",
            ));
        }
        let e = by_block.entry(block_key(w)).or_default();
        tensor_add(e, w.clone(), c.clone());
    }
    let mut out = TensorExpr::new();
    for (key, e) in by_block {
        let block = ShuffleBlock::build(alphabet, &key);
        for (w, c) in block.reduce(&e) {
            tensor_add(&mut out, w, c);
        }
    }
    tensor_normalize(&mut out);
    Ok(out)
}

/// Cobracket on the quotient: proper deconcatenations minus their Koszul
/// flips, with both tensor factors reduced to canonical representatives.
pub fn cobracket(alphabet: &Alphabet, expr: &TensorExpr) -> Result<BTreeMap<(Vec<usize>, Vec<usize>), Rat>> {
    let mut pairs: BTreeMap<(Vec<usize>, Vec<usize>), Rat> = BTreeMap::new();
    let mut add = |u: TensorExpr, v: TensorExpr, c: &Rat| {
        for (wu, cu) in &u {
            for (wv, cv) in &v {
                let val = c * cu * cv;
                if num_traits::Zero::is_zero(&val) {
                    continue;
                }
                *pairs
                    .entry((wu.clone(), wv.clone()))
                    .or_insert_with(|| Rat::from_integer(0.into())) += val;
            }
        }
    };
    for (w, c) in expr {
        for (u, v) in deconcat(w) {
            if u.is_empty() || v.is_empty() {
                continue;
            }
            let sign = neg_one_pow(alphabet.word_degree(&u) * alphabet.word_degree(&v));
            let mut ue = TensorExpr::new();
            tensor_add(&mut ue, u.clone(), Rat::from_integer(1.into()));
            let mut ve = TensorExpr::new();
            tensor_add(&mut ve, v.clone(), Rat::from_integer(1.into()));
            let ur = lie_project(alphabet, &ue)?;
            let vr = lie_project(alphabet, &ve)?;
            // u (x) v
            add(ur.clone(), vr.clone(), c);
            // minus the flip with the Koszul sign
            let flip_c = if sign < 0 { c.clone() } else { -c.clone() };
            add(vr, ur, &flip_c);
        }
    }
    pairs.retain(|_, v| !num_traits::Zero::is_zero(v));
    Ok(pairs)
}

// ---------------------------------------------------------------------------
// Symmetric coalgebra over suspended letters
// ---------------------------------------------------------------------------

/// Letter of a symmetric coalgebra; `suspended_degree` drives the Koszul
/// signs (odd letters anticommute and square to zero).
pub trait SymLetter: Clone + Ord + fmt::Debug {
    fn suspended_degree(&self) -> i64;
}

/// Formal sum of sorted symmetric words.
#[derive(Clone, PartialEq)]
pub struct SymExpr<L: SymLetter, S: Scalar> {
    pub terms: BTreeMap<Vec<L>, S>,
}

impl<L: SymLetter, S: Scalar> fmt::Debug for SymExpr<L, S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Sym{{{} words}}", self.terms.len())
    }
}

/// Sorts letters into canonical order, returning the Koszul sign; `None`
/// when an odd letter repeats.
pub fn sym_normalize<L: SymLetter>(letters: &mut Vec<L>) -> Option<i32> {
    let mut sign = 1i32;
    for i in 1..letters.len() {
        let mut j = i;
        while j > 0 && letters[j - 1] > letters[j] {
            if letters[j - 1].suspended_degree() % 2 != 0 && letters[j].suspended_degree() % 2 != 0
            {
                sign = -sign;
            }
            letters.swap(j - 1, j);
            j -= 1;
        }
    }
    for w in letters.windows(2) {
        if w[0] == w[1] && w[0].suspended_degree() % 2 != 0 {
            return None;
        }
    }
    Some(sign)
}

impl<L: SymLetter, S: Scalar> Default for SymExpr<L, S> {
    fn default() -> Self {
        Self::zero()
    }
}

impl<L: SymLetter, S: Scalar> SymExpr<L, S> {
    pub fn zero() -> Self {
        SymExpr {
            terms: BTreeMap::new(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Adds `c` times the (unsorted) word.
    pub fn add_word(&mut self, mut letters: Vec<L>, c: S) {
        if c.is_zero() {
            return;
        }
        let Some(sign) = sym_normalize(&mut letters) else {
            return;
        };
        let c = if sign < 0 { c.neg_ref() } else { c };
        match self.terms.remove(&letters) {
            Some(old) => {
                let sum = old.add_ref(&c);
                if !sum.is_zero() {
                    self.terms.insert(letters, sum);
                }
            }
            None => {
                self.terms.insert(letters, c);
            }
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (w, c) in &other.terms {
            out.add_word(w.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (w, c) in &other.terms {
            out.add_word(w.clone(), c.neg_ref());
        }
        out
    }

    pub fn scale(&self, r: &Rat) -> Self {
        let mut out = Self::zero();
        for (w, c) in &self.terms {
            out.add_word(w.clone(), c.scale(r));
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero();
        for (w1, c1) in &self.terms {
            for (w2, c2) in &other.terms {
                let mut w = w1.clone();
                w.extend(w2.iter().cloned());
                out.add_word(w, c1.mul_ref(c2));
            }
        }
        out
    }

    /// Projection onto the single-letter component.
    pub fn project_letters(&self) -> Vec<(L, S)> {
        self.terms
            .iter()
            .filter(|(w, _)| w.len() == 1)
            .map(|(w, c)| (w[0].clone(), c.clone()))
            .collect()
    }
}

/// Koszul sign for extracting the letters at `positions` (sorted) to the
/// front of the word, preserving relative order.
pub fn extract_sign<L: SymLetter>(word: &[L], positions: &[usize]) -> i64 {
    let mut sign = 0i64;
    for (k, &i) in positions.iter().enumerate() {
        // letters before i not among the already-extracted ones
        let passed: i64 = (0..i)
            .filter(|j| !positions[..k].contains(j))
            .map(|j| word[j].suspended_degree())
            .sum();
        sign += word[i].suspended_degree() * passed;
    }
    sign
}

fn subsets_of_size(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(n: usize, k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(n, k, i + 1, cur, out);
            cur.pop();
        }
    }
    rec(n, k, 0, &mut cur, &mut out);
    out
}

/// Applies the coderivation with the given Taylor coefficients: on each
/// word, sum over subsets of the letters, feed them to the Taylor family
/// and multiply the output back into the remaining letters.
///
/// `taylor(args)` receives letters in canonical sorted order and must
/// return the value of the corresponding Taylor coefficient on that sorted
/// tuple.
pub fn coderivation_apply<L: SymLetter, S: Scalar>(
    expr: &SymExpr<L, S>,
    max_arity: usize,
    taylor: &mut dyn FnMut(&[L]) -> Result<Vec<(L, S)>>,
) -> Result<SymExpr<L, S>> {
    let mut out = SymExpr::zero();
    for (word, c) in &expr.terms {
        let n = word.len();
        for k in 1..=n.min(max_arity) {
            for positions in subsets_of_size(n, k) {
                let sign = extract_sign(word, &positions);
                let args: Vec<L> = positions.iter().map(|&i| word[i].clone()).collect();
                // the word is sorted, so the extracted tuple stays sorted
                let rest: Vec<L> = (0..n)
                    .filter(|i| !positions.contains(i))
                    .map(|i| word[i].clone())
                    .collect();
                let values = taylor(&args)?;
                for (l, v) in values {
                    let mut w = Vec::with_capacity(rest.len() + 1);
                    w.push(l);
                    w.extend(rest.iter().cloned());
                    let mut coeff = c.mul_ref(&v);
                    if neg_one_pow(sign) < 0 {
                        coeff = coeff.neg_ref();
                    }
                    out.add_word(w, coeff);
                }
            }
        }
    }
    Ok(out)
}

fn set_partitions(n: usize) -> Vec<Vec<Vec<usize>>> {
    // partitions of {0..n-1}; blocks ordered by minimal element
    let mut out = Vec::new();
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    fn rec(n: usize, i: usize, blocks: &mut Vec<Vec<usize>>, out: &mut Vec<Vec<Vec<usize>>>) {
        if i == n {
            out.push(blocks.clone());
            return;
        }
        for b in 0..blocks.len() {
            blocks[b].push(i);
            rec(n, i + 1, blocks, out);
            blocks[b].pop();
        }
        blocks.push(vec![i]);
        rec(n, i + 1, blocks, out);
        blocks.pop();
    }
    rec(n, 0, &mut blocks, &mut out);
    out
}

/// Applies the coalgebra morphism with the given Taylor coefficients: sum
/// over unordered partitions of each word into blocks, multiplying the
/// per-block outputs.
pub fn morphism_apply<L1: SymLetter, L2: SymLetter, S: Scalar>(
    expr: &SymExpr<L1, S>,
    taylor: &mut dyn FnMut(&[L1]) -> Result<Vec<(L2, S)>>,
) -> Result<SymExpr<L2, S>> {
    let mut out = SymExpr::zero();
    for (word, c) in &expr.terms {
        let n = word.len();
        if n == 0 {
            continue;
        }
        for partition in set_partitions(n) {
            // Koszul sign of regrouping the word into block order
            let flat: Vec<usize> = partition.iter().flatten().copied().collect();
            let sign = extract_sign(word, &sorted_to_extraction(&flat));
            // evaluate each block and multiply
            let mut acc: Vec<(Vec<L2>, S)> = vec![(Vec::new(), c.clone())];
            for block in &partition {
                let args: Vec<L1> = block.iter().map(|&i| word[i].clone()).collect();
                let values = taylor(&args)?;
                let mut next: Vec<(Vec<L2>, S)> = Vec::new();
                for (w, coeff) in &acc {
                    for (l, v) in &values {
                        let mut w2 = w.clone();
                        w2.push(l.clone());
                        next.push((w2, coeff.mul_ref(v)));
                    }
                }
                acc = next;
                if acc.is_empty() {
                    break;
                }
            }
            for (w, coeff) in acc {
                let coeff = if neg_one_pow(sign) < 0 {
                    coeff.neg_ref()
                } else {
                    coeff
                };
                out.add_word(w, coeff);
            }
        }
    }
    Ok(out)
}

/// Extraction positions that realize the permutation sending the sorted
/// word to the order given by `flat` (a permutation of 0..n).
fn sorted_to_extraction(flat: &[usize]) -> Vec<usize> {
    // extracting letters one by one in the order of `flat` is exactly the
    // reordering; extract_sign expects the positions of successive picks
    // in the ORIGINAL word, in pick order, and tracks crossings itself
    flat.to_vec()
}

// ---------------------------------------------------------------------------
// Bicoderivation extension of a cobracket and the compatibility predicate
// ---------------------------------------------------------------------------

/// Formal sum on the tensor square of the symmetric coalgebra.
pub type SymPair<L, S> = BTreeMap<(Vec<L>, Vec<L>), S>;

pub fn sym_pair_add<L: SymLetter, S: Scalar>(
    out: &mut SymPair<L, S>,
    mut left: Vec<L>,
    mut right: Vec<L>,
    c: S,
) {
    if c.is_zero() {
        return;
    }
    let Some(s1) = sym_normalize(&mut left) else {
        return;
    };
    let Some(s2) = sym_normalize(&mut right) else {
        return;
    };
    let c = if s1 * s2 < 0 { c.neg_ref() } else { c };
    match out.remove(&(left.clone(), right.clone())) {
        Some(old) => {
            let sum = old.add_ref(&c);
            if !sum.is_zero() {
                out.insert((left, right), sum);
            }
        }
        None => {
            out.insert((left, right), c);
        }
    }
}

/// Letter-level cobracket: returns the pairs of `delta-bar(g)`, i.e. the
/// suspended cobracket including its sign `(-1)^{|g_(1)|}` with unshifted
/// degrees.
pub type LetterCobracket<'a, L, S> = dyn Fn(&L) -> Vec<(L, L, S)> + 'a;

/// Extends the suspended cobracket to a bicoderivation on the symmetric
/// coalgebra:
/// `db(g_1..g_n) = sum_i (-1)^{|g_1|+...+|g_{i-1}|+i-1} D(g_1)...db(g_i)...D(g_n)`
/// where `|g|` denotes the unshifted degree (suspended degree plus one)
/// and `D(g) = g (x) 1 + 1 (x) g`.
pub fn extend_cobracket<L: SymLetter, S: Scalar>(
    word: &[L],
    coeff: &S,
    delta_bar: &LetterCobracket<L, S>,
) -> SymPair<L, S> {
    let mut out = SymPair::new();
    let n = word.len();
    for i in 0..n {
        let unshifted_prefix: i64 = word[..i]
            .iter()
            .map(|g| g.suspended_degree() + 1)
            .sum::<i64>()
            + i as i64;
        let lead = neg_one_pow(unshifted_prefix);
        for (g1, g2, c) in delta_bar(&word[i]) {
            // distribute the remaining letters over the two tensor
            // factors. Walking the factors of
            // D(g_1)..db(g_i)..D(g_n) in product order, every piece of
            // left content crosses the right content accumulated so far;
            // the db factor contributes g1 to the left and g2 to the
            // right simultaneously.
            let rest: Vec<&L> = word
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, l)| l)
                .collect();
            let m = rest.len();
            for mask in 0..(1u32 << m) {
                let mut left: Vec<L> = Vec::with_capacity(m + 1);
                let mut right: Vec<L> = Vec::with_capacity(m + 1);
                let mut sign = 0i64;
                let mut right_prefix = 0i64;
                let mut k = 0usize; // index into rest
                for pos in 0..word.len() {
                    if pos == i {
                        sign += g1.suspended_degree() * right_prefix;
                        left.push(g1.clone());
                        right_prefix += g2.suspended_degree();
                        right.push(g2.clone());
                    } else {
                        let l = rest[k];
                        let deg = l.suspended_degree();
                        if mask & (1 << k) != 0 {
                            sign += deg * right_prefix;
                            left.push(l.clone());
                        } else {
                            right_prefix += deg;
                            right.push(l.clone());
                        }
                        k += 1;
                    }
                }
                let mut v = coeff.mul_ref(&c);
                if lead * neg_one_pow(sign) < 0 {
                    v = v.neg_ref();
                }
                sym_pair_add(&mut out, left, right, v);
            }
        }
    }
    out
}

/// Coshuffle coproduct on the symmetric coalgebra (both sides may be
/// empty).
pub fn coshuffle<L: SymLetter, S: Scalar>(word: &[L], coeff: &S) -> SymPair<L, S> {
    let mut out = SymPair::new();
    let n = word.len();
    for mask in 0..(1u64 << n) {
        let mut left = Vec::new();
        let mut right = Vec::new();
        let mut sign = 0i64;
        let mut right_prefix = 0i64;
        for (k, l) in word.iter().enumerate() {
            if mask & (1 << k) != 0 {
                sign += l.suspended_degree() * right_prefix;
                left.push(l.clone());
            } else {
                right_prefix += l.suspended_degree();
                right.push(l.clone());
            }
        }
        let mut v = coeff.clone();
        if neg_one_pow(sign) < 0 {
            v = v.neg_ref();
        }
        sym_pair_add(&mut out, left, right, v);
    }
    out
}

/// Verifies the compatibility of a coderivation with the extended
/// cobracket, `db . Q + (Q (x) id + id (x) Q) . db = 0`, on every basis
/// word over the given letters up to the arity bound. The letters must
/// carry suspended degrees; `delta_bar` is the suspended letter cobracket
/// and `taylor` the Taylor family of `Q`.
pub fn cshlb_check<L: SymLetter, S: Scalar>(
    letters: &[L],
    max_word_len: usize,
    max_arity: usize,
    delta_bar: &LetterCobracket<L, S>,
    taylor: &mut dyn FnMut(&[L]) -> Result<Vec<(L, S)>>,
    one: &S,
) -> Result<bool> {
    for len in 1..=max_word_len {
        for word in words_up_to(letters, len) {
            let mut expr: SymExpr<L, S> = SymExpr::zero();
            expr.add_word(word.clone(), one.clone());
            if expr.is_zero() {
                continue;
            }
            // db(Q(word))
            let q = coderivation_apply(&expr, max_arity, taylor)?;
            let mut lhs: SymPair<L, S> = SymPair::new();
            for (w, c) in &q.terms {
                for ((l, r), v) in extend_cobracket(w, c, delta_bar) {
                    sym_pair_add(&mut lhs, l, r, v);
                }
            }
            // (Q (x) id + id (x) Q)(db(word))
            for ((l, r), v) in extend_cobracket(&word, one, delta_bar) {
                // Q on the left factor
                let mut le: SymExpr<L, S> = SymExpr::zero();
                le.add_word(l.clone(), v.clone());
                let ql = coderivation_apply(&le, max_arity, taylor)?;
                for (w, c) in &ql.terms {
                    sym_pair_add(&mut lhs, w.clone(), r.clone(), c.clone());
                }
                // Q on the right factor crosses the left one (Q has
                // degree one)
                let ldeg: i64 = l.iter().map(|x| x.suspended_degree()).sum();
                let mut re: SymExpr<L, S> = SymExpr::zero();
                re.add_word(r.clone(), v.clone());
                let qr = coderivation_apply(&re, max_arity, taylor)?;
                for (w, c) in &qr.terms {
                    let c2 = if neg_one_pow(ldeg) < 0 {
                        c.neg_ref()
                    } else {
                        c.clone()
                    };
                    sym_pair_add(&mut lhs, l.clone(), w.clone(), c2);
                }
            }
            if !lhs.is_empty() {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

fn words_up_to<L: SymLetter>(letters: &[L], len: usize) -> Vec<Vec<L>> {
    // multisets of the given size (sorted words)
    let mut out = Vec::new();
    fn rec<L: SymLetter>(
        letters: &[L],
        len: usize,
        start: usize,
        cur: &mut Vec<L>,
        out: &mut Vec<Vec<L>>,
    ) {
        if cur.len() == len {
            out.push(cur.clone());
            return;
        }
        for i in start..letters.len() {
            cur.push(letters[i].clone());
            rec(letters, len, i, cur, out);
            cur.pop();
        }
    }
    rec(letters, len, 0, &mut Vec::new(), &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{rat, rat_int};

    fn expr(words: &[(&[usize], i64)]) -> TensorExpr {
        let mut e = TensorExpr::new();
        for (w, c) in words {
            tensor_add(&mut e, w.to_vec(), rat_int(*c));
        }
        tensor_normalize(&mut e);
        e
    }

    #[test]
    fn deconcat_cases() {
        assert_eq!(deconcat(&[]), vec![(vec![], vec![])]);
        assert_eq!(
            deconcat(&[0]),
            vec![(vec![], vec![0]), (vec![0], vec![])]
        );
        assert_eq!(
            deconcat(&[0, 1]),
            vec![
                (vec![], vec![0, 1]),
                (vec![0], vec![1]),
                (vec![0, 1], vec![])
            ]
        );
    }

    #[test]
    fn shuffle_sign_cases() {
        let odd = Alphabet::new(&[("a", 1), ("b", 1)]);
        // odd letters: a sh b = ab - ba
        assert_eq!(
            shuffle(&odd, &[0], &[1]),
            expr(&[(&[0, 1], 1), (&[1, 0], -1)])
        );
        let even = Alphabet::new(&[("a", 0), ("b", 0), ("c", 2)]);
        assert_eq!(
            shuffle(&even, &[0], &[1]),
            expr(&[(&[0, 1], 1), (&[1, 0], 1)])
        );
        // (a|b) sh (c) with all even: three shuffles
        assert_eq!(
            shuffle(&even, &[0, 1], &[2]),
            expr(&[(&[0, 1, 2], 1), (&[0, 2, 1], 1), (&[2, 0, 1], 1)])
        );
    }

    #[test]
    fn shuffle_bialgebra_axioms() {
        // associativity, graded commutativity and compatibility with
        // deconcatenation on small words over a mixed alphabet
        let al = Alphabet::new(&[("a", 0), ("b", 1), ("c", 1), ("d", 2)]);
        let words: Vec<Vec<usize>> = vec![vec![0], vec![1], vec![2, 3], vec![1, 0]];
        for x in &words {
            for y in &words {
                // commutativity: x sh y = (-1)^{|x||y|} y sh x
                let xy = shuffle(&al, x, y);
                let yx = shuffle(&al, y, x);
                let sign = neg_one_pow(al.word_degree(x) * al.word_degree(y));
                let mut flipped = TensorExpr::new();
                for (w, c) in &yx {
                    tensor_add(
                        &mut flipped,
                        w.clone(),
                        if sign < 0 { -c.clone() } else { c.clone() },
                    );
                }
                tensor_normalize(&mut flipped);
                assert_eq!(xy, flipped);
                for z in &words {
                    // associativity
                    let mut lhs = TensorExpr::new();
                    for (w, c) in &shuffle(&al, x, y) {
                        for (w2, c2) in &shuffle(&al, w, z) {
                            tensor_add(&mut lhs, w2.clone(), c * c2);
                        }
                    }
                    tensor_normalize(&mut lhs);
                    let mut rhs = TensorExpr::new();
                    for (w, c) in &shuffle(&al, y, z) {
                        for (w2, c2) in &shuffle(&al, x, w) {
                            tensor_add(&mut rhs, w2.clone(), c * c2);
                        }
                    }
                    tensor_normalize(&mut rhs);
                    assert_eq!(lhs, rhs);
                }
            }
        }
        // Delta is an algebra morphism for the shuffle: check on a pair
        type Pair = BTreeMap<(Vec<usize>, Vec<usize>), Rat>;
        let deconcat_expr = |e: &TensorExpr| -> Pair {
            let mut out = Pair::new();
            for (w, c) in e {
                for (u, v) in deconcat(w) {
                    *out.entry((u, v)).or_insert_with(|| rat_int(0)) += c;
                }
            }
            out.retain(|_, c| !num_traits::Zero::is_zero(c));
            out
        };
        for x in &words {
            for y in &words {
                let lhs = deconcat_expr(&shuffle(&al, x, y));
                let mut rhs = Pair::new();
                for (x1, x2) in deconcat(x) {
                    for (y1, y2) in deconcat(y) {
                        let sign =
                            neg_one_pow(al.word_degree(&x2) * al.word_degree(&y1));
                        for (u, cu) in &shuffle(&al, &x1, &y1) {
                            for (v, cv) in &shuffle(&al, &x2, &y2) {
                                let val = cu * cv * rat_int(sign as i64);
                                *rhs.entry((u.clone(), v.clone()))
                                    .or_insert_with(|| rat_int(0)) += val;
                            }
                        }
                    }
                }
                rhs.retain(|_, c| !num_traits::Zero::is_zero(c));
                assert_eq!(lhs, rhs);
            }
        }
    }

    #[test]
    fn lie_project_cases() {
        let al = Alphabet::new(&[("a", 0), ("b", 0), ("c", 0)]);
        // shuffles die
        let sh = expr(&[(&[0, 1], 1), (&[1, 0], 1)]);
        assert!(lie_project(&al, &sh).unwrap().is_empty());
        // single letters are untouched
        let single = expr(&[(&[0], 1)]);
        assert_eq!(lie_project(&al, &single).unwrap(), single);
        // idempotent
        let w = expr(&[(&[0, 1], 1)]);
        let once = lie_project(&al, &w).unwrap();
        let twice = lie_project(&al, &once).unwrap();
        assert_eq!(once, twice);
        // empty-word component rejected
        let bad = expr(&[(&[], 1)]);
        assert!(lie_project(&al, &bad).is_err());
        // quotient dimensions: multilinear block {a,b} has dim 1,
        // {a,b,c} has dim 2 = (3-1)!
        let b2 = ShuffleBlock::build(&al, &[0, 1]);
        assert_eq!(b2.words.len() - b2.rank(), 1);
        let b3 = ShuffleBlock::build(&al, &[0, 1, 2]);
        assert_eq!(b3.words.len() - b3.rank(), 2);
    }

    #[test]
    fn lie_quotient_dimensions_graded() {
        // for an odd letter x the square block {x,x}: words xx; shuffle
        // x sh x = xx + (-1)^{1} xx = 0... for degree-1 letters the
        // shuffle x sh x = xx - xx = 0, so the quotient keeps xx
        let al = Alphabet::new(&[("x", 1)]);
        let b = ShuffleBlock::build(&al, &[0, 0]);
        assert_eq!(b.words.len() - b.rank(), 1);
        // for an even letter the shuffle is 2 xx, so xx dies
        let al2 = Alphabet::new(&[("x", 0)]);
        let b2 = ShuffleBlock::build(&al2, &[0, 0]);
        assert_eq!(b2.words.len() - b2.rank(), 0);
    }

    #[test]
    fn cobracket_cases() {
        let al = Alphabet::new(&[("a", 0), ("b", 0)]);
        // single letters have zero cobracket
        let single = expr(&[(&[0], 1)]);
        assert!(cobracket(&al, &single).unwrap().is_empty());
        // delta(ab) = a(x)b - b(x)a for even letters, after projection
        let w = lie_project(&al, &expr(&[(&[0, 1], 1)])).unwrap();
        let cb = cobracket(&al, &w).unwrap();
        let mut expect: BTreeMap<(Vec<usize>, Vec<usize>), Rat> = BTreeMap::new();
        // the canonical representative of ab is ab - (1/2)(ab + ba)
        // = (ab - ba)/2; its cobracket is a(x)b - b(x)a
        expect.insert((vec![0], vec![1]), rat_int(1));
        expect.insert((vec![1], vec![0]), rat_int(-1));
        assert_eq!(cb, expect);
        // well-definedness: adding a shuffle does not change the result
        let mut with_shuffle = expr(&[(&[0, 1], 1), (&[1, 0], 1)]);
        for (w2, c) in &w {
            tensor_add(&mut with_shuffle, w2.clone(), c.clone());
        }
        tensor_normalize(&mut with_shuffle);
        let cb2 = cobracket(&al, &with_shuffle).unwrap();
        assert_eq!(cb2, cb);
    }

    // --- symmetric side ---

    #[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
    struct TL {
        name: u8,
        sus_deg: i64,
    }

    impl SymLetter for TL {
        fn suspended_degree(&self) -> i64 {
            self.sus_deg
        }
    }

    fn tl(name: u8, sus: i64) -> TL {
        TL {
            name,
            sus_deg: sus,
        }
    }

    #[test]
    fn sym_word_normalization() {
        let mut e: SymExpr<TL, Rat> = SymExpr::zero();
        // odd letters anticommute
        e.add_word(vec![tl(2, 1), tl(1, 1)], rat_int(1));
        let mut f: SymExpr<TL, Rat> = SymExpr::zero();
        f.add_word(vec![tl(1, 1), tl(2, 1)], rat_int(-1));
        assert_eq!(e, f);
        // odd square dies
        let mut g: SymExpr<TL, Rat> = SymExpr::zero();
        g.add_word(vec![tl(1, 1), tl(1, 1)], rat_int(5));
        assert!(g.is_zero());
        // even letters commute and repeat freely
        let mut h: SymExpr<TL, Rat> = SymExpr::zero();
        h.add_word(vec![tl(3, 0), tl(3, 0)], rat_int(1));
        assert!(!h.is_zero());
    }

    #[test]
    fn coshuffle_counts() {
        let w = vec![tl(1, 0), tl(2, 0)];
        let cs = coshuffle(&w, &rat_int(1));
        // four splits: (12|), (1|2), (2|1), (|12)
        assert_eq!(cs.len(), 4);
    }

    /// The extension rule on a product of a cobracket-free even letter
    /// with an arbitrary word: db(w^n g) = D(w^n) db(g).
    #[test]
    fn extend_cobracket_group_like_factorization() {
        // w: even letter with zero cobracket (unshifted degree 1),
        // g: odd letter with db(g) = a (x) b
        let w = tl(0, 0);
        let g = tl(1, 1);
        let a = tl(2, 1);
        let b = tl(3, 1);
        let delta = move |l: &TL| -> Vec<(TL, TL, Rat)> {
            if l.name == 1 {
                vec![(a.clone(), b.clone(), rat_int(1))]
            } else {
                vec![]
            }
        };
        for n in 1..=3usize {
            let mut word = vec![w.clone(); n];
            word.push(g.clone());
            word.sort();
            let lhs = extend_cobracket(&word, &rat_int(1), &delta);
            // rhs: D(w^n) db(g) with db(g) expanded by the same rule on
            // the single letter g
            let g_word = vec![g.clone()];
            let dbg = extend_cobracket(&g_word, &rat_int(1), &delta);
            let wn = vec![w.clone(); n];
            let dwn = coshuffle(&wn, &rat_int(1));
            let mut rhs: SymPair<TL, Rat> = SymPair::new();
            for ((l1, r1), c1) in &dwn {
                for ((l2, r2), c2) in &dbg {
                    // (l1 (x) r1)(l2 (x) r2) with the middle Koszul sign;
                    // all the l/r here are even (w) or the db outputs
                    let cross: i64 = r1.iter().map(|x| x.suspended_degree()).sum::<i64>()
                        * l2.iter().map(|x| x.suspended_degree()).sum::<i64>();
                    let mut left = l1.clone();
                    left.extend(l2.iter().cloned());
                    let mut right = r1.clone();
                    right.extend(r2.iter().cloned());
                    let mut v = c1.mul_ref(c2);
                    if neg_one_pow(cross) < 0 {
                        v = v.neg_ref();
                    }
                    sym_pair_add(&mut rhs, left, right, v);
                }
            }
            let mut diff = lhs.clone();
            for ((l, r), c) in rhs {
                sym_pair_add(&mut diff, l, r, c.neg_ref());
            }
            assert!(diff.is_empty(), "n = {n}: {lhs:?}");
        }
    }

    /// Hand expansion of the extension rule on a two-factor word with
    /// only the first factor carrying a cobracket:
    /// db(g1 g2) = db(g1) D(g2) (the i=2 term dies), where the product
    /// distributes g2 over the two tensor factors with Koszul signs.
    #[test]
    fn extend_cobracket_two_factor_hand_expansion() {
        // g1 odd (unshifted degree 2, suspended 1) with db(g1) = a (x) b,
        // g2 even (unshifted degree 1, suspended 0), db(g2) = 0
        let g1 = tl(0, 1);
        let g2 = tl(1, 0);
        let a = tl(2, 0);
        let b = tl(3, 1);
        let (ac, bc) = (a.clone(), b.clone());
        let delta = move |l: &TL| -> Vec<(TL, TL, Rat)> {
            if l.name == 0 {
                vec![(ac.clone(), bc.clone(), rat_int(1))]
            } else {
                vec![]
            }
        };
        let got = extend_cobracket(&[g1.clone(), g2.clone()], &rat_int(1), &delta);
        // by hand: the i=1 term has lead sign (-1)^{0} = +1 and equals
        // (a (x) b)(g2 (x) 1 + 1 (x) g2)
        //   = (a g2) (x) b + (-1)^{|b||g2|} a (x) (b g2);
        // suspended degrees: |b| = 1, |g2| = 0, so both signs are +1
        let mut expect: SymPair<TL, Rat> = SymPair::new();
        sym_pair_add(&mut expect, vec![a.clone(), g2.clone()], vec![b.clone()], rat_int(1));
        sym_pair_add(&mut expect, vec![a.clone()], vec![b.clone(), g2.clone()], rat_int(1));
        assert_eq!(got, expect);
        // single factor with vanishing cobracket gives zero
        let got = extend_cobracket(&[g2.clone()], &rat_int(1), &delta);
        assert!(got.is_empty());
    }

    /// CSHLB compatibility for the two-dimensional Lie bialgebra
    /// ([x, y] = y, delta(y) = x (x) y - y (x) x, delta(x) = 0), whose
    /// induced structure is compatible; and a negative control.
    #[test]
    fn cshlb_check_toy_bialgebra() {
        // letters of g[1]: x, y have g-degree 0, suspended degree -1
        let x = tl(0, -1);
        let y = tl(1, -1);
        let letters = vec![x.clone(), y.clone()];
        // suspended cobracket: db(g) = (-1)^{|g_(1)|} g_(1) (x) g_(2)
        // with |g_(1)| = 0 here, so no extra sign
        let y2 = y.clone();
        let x2 = x.clone();
        let delta = move |l: &TL| -> Vec<(TL, TL, Rat)> {
            if l.name == 1 {
                vec![
                    (x2.clone(), y2.clone(), rat_int(1)),
                    (y2.clone(), x2.clone(), rat_int(-1)),
                ]
            } else {
                vec![]
            }
        };
        // Q from the bracket [x,y] = y: Q^2(sx.sy) = (-1)^{|x|} s[x,y]
        let xq = x.clone();
        let yq = y.clone();
        let mut taylor = move |args: &[TL]| -> Result<Vec<(TL, Rat)>> {
            if args.len() != 2 {
                return Ok(vec![]);
            }
            // sorted args; bracket table on (x,y)
            let (a, b) = (&args[0], &args[1]);
            if a == &xq && b == &yq {
                // [x, y] = y, |x| = 0 so no sign
                Ok(vec![(yq.clone(), rat_int(1))])
            } else {
                Ok(vec![])
            }
        };
        assert!(cshlb_check(&letters, 3, 2, &delta, &mut taylor, &rat_int(1)).unwrap());

        // zero Q is always compatible
        let mut zero_taylor = |_: &[TL]| -> Result<Vec<(TL, Rat)>> { Ok(vec![]) };
        assert!(cshlb_check(&letters, 3, 2, &delta, &mut zero_taylor, &rat_int(1)).unwrap());

        // negative control: add a unary term Q^1(x) = y; then
        // db(Q(x)) = db(y) is nonzero while db(x) = 0, so the
        // compatibility fails on the single-letter word x
        let xq = x.clone();
        let yq = y.clone();
        let mut bad_taylor = move |args: &[TL]| -> Result<Vec<(TL, Rat)>> {
            match args.len() {
                1 if args[0] == xq => Ok(vec![(yq.clone(), rat_int(1))]),
                2 if args[0] == xq && args[1] == yq => Ok(vec![(yq.clone(), rat_int(1))]),
                _ => Ok(vec![]),
            }
        };
        assert!(!cshlb_check(&letters, 3, 2, &delta, &mut bad_taylor, &rat_int(1)).unwrap());
    }

    #[test]
    fn coderivation_square_zero_for_dg_lie() {
        // d(x) = y on letters x (g-degree 0), y (g-degree 1):
        // suspended degrees -1 and 0
        let x = tl(0, -1);
        let y = tl(1, 0);
        let xq = x.clone();
        let yq = y.clone();
        let mut taylor = move |args: &[TL]| -> Result<Vec<(TL, Rat)>> {
            if args.len() == 1 && args[0] == xq {
                // Q^1(sx) = -s(dx)
                Ok(vec![(yq.clone(), rat_int(-1))])
            } else {
                Ok(vec![])
            }
        };
        let mut e: SymExpr<TL, Rat> = SymExpr::zero();
        e.add_word(vec![x.clone(), x.clone()], rat_int(1));
        // x odd: x.x = 0, use x.y instead
        let mut e2: SymExpr<TL, Rat> = SymExpr::zero();
        e2.add_word(vec![x.clone(), y.clone()], rat_int(1));
        let q1 = coderivation_apply(&e2, 2, &mut taylor).unwrap();
        let q2 = coderivation_apply(&q1, 2, &mut taylor).unwrap();
        assert!(q2.is_zero());
        let _ = e;
        let _ = rat(1, 2);
    }
}
