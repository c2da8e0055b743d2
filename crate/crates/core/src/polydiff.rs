//! Poly-differential operators on `k[t_1..t_d]` as an inner brace algebra.
//!
//! A term is a monomial coefficient times a word of constant-coefficient
//! slots `D^{a_1} (x) ... (x) D^{a_n}` (each slot a multi-index power of the
//! partial derivatives); polynomial coefficients are normal-ordered to the
//! leftmost position. A word of length `n` has shifted degree `n - 1`; the
//! empty word carries the scalar part of the ring in degree -1.
//!
//! The brace `D{E_1,..,E_n}` distributes the arguments over the slots of
//! `D` by iterated binomial coproducts (equivalently, by the Leibniz rule
//! when the insertions are read as operator substitutions), with the sign
//! `(-1)^e`, `e = sum_s (|E_s| - 1) i_s`, where `|E_s|` is the word length
//! of the argument and `i_s` counts the argument positions standing before
//! its insertion point. The differential is `[mu, -]` for `mu = 1 (x) 1`
//! and the cup product is the second Taylor coefficient of `[mu, -]`,
//! which is word concatenation up to the sign `(-1)^{(|E|-1)|D|}`.

use num_bigint::BigInt;
use num_traits::One;
use std::collections::BTreeMap;
use std::fmt;

use crate::error::{EngineError, Result};
use crate::polyvector::Monomial;
use crate::scalar::{Rat, Scalar};
use crate::sign::neg_one_pow;

/// Word of derivation multi-indices; may be empty (scalar part).
pub type DiffWord = Vec<Monomial>;

/// Basis term of a poly-differential operator.
pub type PdTerm = (Monomial, DiffWord);

/// Finite sum of poly-differential operator terms.
#[derive(Clone, PartialEq)]
pub struct PolyDiffOp<S: Scalar> {
    d: usize,
    terms: BTreeMap<PdTerm, S>,
}

impl<S: Scalar> fmt::Debug for PolyDiffOp<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for ((mono, word), c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({c:?})")?;
            for (i, e) in mono.0.iter().enumerate() {
                if *e > 0 {
                    write!(f, " t{}^{}", i + 1, e)?;
                }
            }
            write!(f, " [")?;
            for (k, slot) in word.iter().enumerate() {
                if k > 0 {
                    write!(f, "|")?;
                }
                write!(f, "{:?}", slot.0)?;
            }
            write!(f, "]")?;
        }
        Ok(())
    }
}

impl<S: Scalar> PolyDiffOp<S> {
    pub fn zero(d: usize) -> Self {
        PolyDiffOp {
            d,
            terms: BTreeMap::new(),
        }
    }

    pub fn dimension(&self) -> usize {
        self.d
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&PdTerm, &S)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn add_term(&mut self, mono: Monomial, word: DiffWord, coeff: S) {
        assert_eq!(mono.0.len(), self.d, "coefficient dimension mismatch");
        for slot in &word {
            assert_eq!(slot.0.len(), self.d, "slot dimension mismatch");
        }
        if coeff.is_zero() {
            return;
        }
        let key = (mono, word);
        match self.terms.remove(&key) {
            Some(old) => {
                let sum = old.add_ref(&coeff);
                if !sum.is_zero() {
                    self.terms.insert(key, sum);
                }
            }
            None => {
                self.terms.insert(key, coeff);
            }
        }
    }

    pub fn from_terms(d: usize, terms: Vec<(Monomial, DiffWord, S)>) -> Self {
        let mut out = Self::zero(d);
        for (m, w, c) in terms {
            out.add_term(m, w, c);
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.d, other.d, "dimension mismatch");
        let mut out = self.clone();
        for ((m, w), c) in &other.terms {
            out.add_term(m.clone(), w.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        PolyDiffOp {
            d: self.d,
            terms: self
                .terms
                .iter()
                .map(|(k, v)| (k.clone(), v.neg_ref()))
                .collect(),
        }
    }

    pub fn scale(&self, c: &Rat) -> Self {
        let mut out = Self::zero(self.d);
        for ((m, w), v) in &self.terms {
            out.add_term(m.clone(), w.clone(), v.scale(c));
        }
        out
    }

    pub fn scale_scalar(&self, c: &S) -> Self {
        let mut out = Self::zero(self.d);
        for ((m, w), v) in &self.terms {
            out.add_term(m.clone(), w.clone(), v.mul_ref(c));
        }
        out
    }

    /// Shifted degree when homogeneous (word length - 1), `None` otherwise.
    pub fn homogeneous_degree(&self) -> Option<i64> {
        let mut deg = None;
        for (_, w) in self.terms.keys() {
            let t = w.len() as i64 - 1;
            match deg {
                None => deg = Some(t),
                Some(dd) if dd == t => {}
                _ => return None,
            }
        }
        deg
    }

    /// One term as a standalone operator.
    pub fn single(d: usize, term: PdTerm, c: S) -> Self {
        PolyDiffOp {
            d,
            terms: BTreeMap::from([(term, c)]),
        }
    }
}

impl PolyDiffOp<Rat> {
    /// The distinguished square-zero element `mu = 1 (x) 1` of degree 1.
    pub fn mu(d: usize) -> Self {
        mu_with_unit(d, Rat::one())
    }

    /// The unit slot word `1` (identity operator on one argument).
    pub fn unit_word(d: usize) -> Self {
        Self::from_terms(
            d,
            vec![(Monomial::one(d), vec![Monomial::one(d)], Rat::one())],
        )
    }

    /// A single derivation as a one-slot word.
    pub fn derivation(d: usize, k: usize) -> Self {
        let mut slot = Monomial::one(d);
        slot.0[k] = 1;
        Self::from_terms(d, vec![(Monomial::one(d), vec![slot], Rat::one())])
    }

    /// A polynomial `t^alpha` as the degree -1 empty word.
    pub fn function(d: usize, mono: Monomial) -> Self {
        Self::from_terms(d, vec![(mono, vec![], Rat::one())])
    }
}

/// Full binomial splitting of the coproduct on the enveloping algebra:
/// `Delta(D^a) = sum_b C(a, b) D^b (x) D^{a-b}`.
pub fn ul_coproduct(alpha: &Monomial) -> Vec<(Monomial, Monomial, BigInt)> {
    multi_splits(alpha, 2)
        .into_iter()
        .map(|(parts, c)| {
            let mut it = parts.into_iter();
            (it.next().unwrap(), it.next().unwrap(), c)
        })
        .collect()
}

/// All ways to write `n` as an ordered sum of `k` non-negative integers.
fn compositions(n: u32, k: usize) -> Vec<Vec<u32>> {
    if k == 0 {
        return if n == 0 { vec![vec![]] } else { vec![] };
    }
    if k == 1 {
        return vec![vec![n]];
    }
    let mut out = Vec::new();
    for first in 0..=n {
        for rest in compositions(n - first, k - 1) {
            let mut v = Vec::with_capacity(k);
            v.push(first);
            v.extend(rest);
            out.push(v);
        }
    }
    out
}

fn binomial_big(n: u32, k: u32) -> BigInt {
    let mut num = BigInt::one();
    let mut den = BigInt::one();
    for i in 0..k {
        num *= BigInt::from(n - i);
        den *= BigInt::from(i + 1);
    }
    num / den
}

/// Splits a multi-index into `k` ordered parts together with the
/// multinomial coefficient (product over coordinates).
pub fn multi_splits(beta: &Monomial, k: usize) -> Vec<(Vec<Monomial>, BigInt)> {
    let d = beta.0.len();
    let mut acc: Vec<(Vec<Vec<u32>>, BigInt)> = vec![(vec![vec![]; k], BigInt::one())];
    for c in 0..d {
        let n = beta.0[c];
        let comps = compositions(n, k);
        let mut next = Vec::with_capacity(acc.len() * comps.len());
        for (parts, coeff) in &acc {
            for comp in &comps {
                // multinomial for this coordinate: n! / prod(comp_i!)
                let mut m = BigInt::one();
                let mut rem = n;
                for &c_i in comp {
                    m *= binomial_big(rem, c_i);
                    rem -= c_i;
                }
                let mut parts2 = parts.clone();
                for (part, &c_i) in parts2.iter_mut().zip(comp) {
                    part.push(c_i);
                }
                next.push((parts2, coeff * m));
            }
        }
        acc = next;
    }
    acc.into_iter()
        .map(|(parts, c)| (parts.into_iter().map(Monomial).collect(), c))
        .collect()
}

/// `D^delta (t^gamma)` as (integer factor, remaining monomial); `None` when
/// it vanishes.
fn mono_deriv_multi(gamma: &Monomial, delta: &Monomial) -> Option<(BigInt, Monomial)> {
    let mut factor = BigInt::one();
    let mut out = gamma.0.clone();
    for c in 0..gamma.0.len() {
        let g = gamma.0[c];
        let dl = delta.0[c];
        if dl > g {
            return None;
        }
        for i in 0..dl {
            factor *= BigInt::from(g - i);
        }
        out[c] = g - dl;
    }
    Some((factor, Monomial(out)))
}

/// Brace of a basis term against basis-term arguments, accumulated into
/// `out`. `args` are (term, scalar) pairs in insertion order.
fn brace_term<S: Scalar>(
    out: &mut PolyDiffOp<S>,
    d_mono: &Monomial,
    d_word: &[Monomial],
    d_coeff: &S,
    args: &[(&PdTerm, &S)],
) {
    let p = d_word.len();
    let n = args.len();
    if n > p {
        return; // not enough slots
    }
    if n == 0 {
        out.add_term(d_mono.clone(), d_word.to_vec(), d_coeff.clone());
        return;
    }
    // iterate over strictly increasing insertion-slot tuples
    let mut slots: Vec<usize> = (0..n).collect();
    loop {
        distribute_into_slots(out, d_mono, d_word, d_coeff, args, &slots);
        // next combination
        let mut i = n;
        let mut advanced = false;
        while i > 0 {
            i -= 1;
            if slots[i] < p - (n - i) {
                slots[i] += 1;
                for j in (i + 1)..n {
                    slots[j] = slots[j - 1] + 1;
                }
                advanced = true;
                break;
            }
        }
        if !advanced {
            return;
        }
    }
}

fn distribute_into_slots<S: Scalar>(
    out: &mut PolyDiffOp<S>,
    d_mono: &Monomial,
    d_word: &[Monomial],
    d_coeff: &S,
    args: &[(&PdTerm, &S)],
    slots: &[usize],
) {
    let n = args.len();
    // Koszul sign: for each argument, (|E_s| - 1) times the number of
    // argument positions standing before its insertion point.
    let mut sign_exp: i64 = 0;
    {
        let mut args_before: i64 = 0;
        let mut prev_slot = 0usize;
        for (s, &j) in slots.iter().enumerate() {
            args_before += (j - prev_slot) as i64;
            let q = args[s].0 .1.len() as i64;
            sign_exp += (q - 1) * args_before;
            args_before += q;
            prev_slot = j + 1;
        }
    }
    let base_sign = neg_one_pow(sign_exp);

    // each insertion at slot j with argument word length q splits
    // d_word[j] into q+1 parts: the coefficient derivative plus q slot
    // partners
    let per_arg: Vec<Vec<(Vec<Monomial>, BigInt)>> = slots
        .iter()
        .zip(args)
        .map(|(&j, ((_e_mono, e_word), _))| multi_splits(&d_word[j], e_word.len() + 1))
        .collect();

    let arg_at_slot: BTreeMap<usize, usize> =
        slots.iter().enumerate().map(|(s, &j)| (j, s)).collect();

    // cartesian product over the split choices
    let mut idx = vec![0usize; n];
    'outer: loop {
        let mut mono = d_mono.clone();
        let mut scalar = d_coeff.clone();
        let mut int_factor = BigInt::one();
        let mut word: DiffWord = Vec::with_capacity(d_word.len() + 4);
        let mut ok = true;
        for (j, slot) in d_word.iter().enumerate() {
            match arg_at_slot.get(&j) {
                None => word.push(slot.clone()),
                Some(&s) => {
                    let ((e_mono, e_word), e_coeff) = args[s];
                    let (parts, mult) = &per_arg[s][idx[s]];
                    // parts[0] differentiates the argument's coefficient
                    match mono_deriv_multi(e_mono, &parts[0]) {
                        None => {
                            ok = false;
                            break;
                        }
                        Some((fact, m2)) => {
                            int_factor *= mult * fact;
                            mono = mono.mul(&m2);
                            scalar = scalar.mul_ref(e_coeff);
                            for (r, eps) in e_word.iter().enumerate() {
                                word.push(parts[r + 1].mul(eps));
                            }
                        }
                    }
                }
            }
        }
        if ok {
            let mut c = scalar.scale(&Rat::from_integer(int_factor));
            if base_sign < 0 {
                c = c.neg_ref();
            }
            out.add_term(mono, word, c);
        }
        // advance cartesian index
        for s in 0..n {
            idx[s] += 1;
            if idx[s] < per_arg[s].len() {
                continue 'outer;
            }
            idx[s] = 0;
        }
        return;
    }
}

/// Brace with an explicitly allowed empty argument list (returns `D`).
pub(crate) fn brace_unchecked<S: Scalar>(
    d_op: &PolyDiffOp<S>,
    args: &[PolyDiffOp<S>],
) -> PolyDiffOp<S> {
    if args.is_empty() {
        return d_op.clone();
    }
    let mut out = PolyDiffOp::zero(d_op.d);
    fn rec<'a, S: Scalar>(
        out: &mut PolyDiffOp<S>,
        d_op: &PolyDiffOp<S>,
        args: &'a [PolyDiffOp<S>],
        chosen: &mut Vec<(&'a PdTerm, &'a S)>,
    ) {
        if chosen.len() == args.len() {
            for ((m, w), c) in &d_op.terms {
                brace_term(out, m, w, c, chosen);
            }
            return;
        }
        let k = chosen.len();
        for (term, coeff) in args[k].terms() {
            chosen.push((term, coeff));
            rec(out, d_op, args, chosen);
            chosen.pop();
        }
    }
    rec(&mut out, d_op, args, &mut Vec::new());
    out
}

/// The brace operation `D{E_1,...,E_n}`. Zero when `D` has fewer slots than
/// there are arguments.
pub fn brace<S: Scalar>(d_op: &PolyDiffOp<S>, args: &[PolyDiffOp<S>]) -> Result<PolyDiffOp<S>> {
    if args.is_empty() {
        return Err(EngineError::argument("brace: argument list is empty"));
    }
    for e in args {
        if e.d != d_op.d {
            return Err(EngineError::argument(format!(
                "brace: dimension mismatch {} vs {}",
                d_op.d, e.d
            )));
        }
    }
    Ok(brace_unchecked(d_op, args))
}

/// Cup product: signed word concatenation (degree one). The sign is fixed
/// so that the cup equals the second Taylor coefficient of `[mu, -]`:
/// `(-1)^{(|E|-1)|D|}` on words of lengths `|D|`, `|E|`.
pub fn cup<S: Scalar>(a: &PolyDiffOp<S>, b: &PolyDiffOp<S>) -> Result<PolyDiffOp<S>> {
    if a.d != b.d {
        return Err(EngineError::argument(format!(
            "cup: dimension mismatch {} vs {}",
            a.d, b.d
        )));
    }
    let mut out = PolyDiffOp::zero(a.d);
    for ((ma, wa), ca) in &a.terms {
        for ((mb, wb), cb) in &b.terms {
            let sign = neg_one_pow((wb.len() as i64 - 1) * wa.len() as i64);
            let mut word = wa.clone();
            word.extend(wb.iter().cloned());
            let mut c = ca.mul_ref(cb);
            if sign < 0 {
                c = c.neg_ref();
            }
            out.add_term(ma.mul(mb), word, c);
        }
    }
    Ok(out)
}

/// Gerstenhaber bracket `[a, b] = a{b} - (-1)^{|a||b|} b{a}` (degree 0).
pub fn g_bracket<S: Scalar>(a: &PolyDiffOp<S>, b: &PolyDiffOp<S>) -> Result<PolyDiffOp<S>> {
    if a.d != b.d {
        return Err(EngineError::argument(format!(
            "g_bracket: dimension mismatch {} vs {}",
            a.d, b.d
        )));
    }
    let mut out = PolyDiffOp::zero(a.d);
    for (ta, ca) in &a.terms {
        let da = ta.1.len() as i64 - 1;
        for (tb, cb) in &b.terms {
            let db = tb.1.len() as i64 - 1;
            brace_term(&mut out, &ta.0, &ta.1, ca, &[(tb, cb)]);
            let flip = -neg_one_pow(da * db);
            let cb_signed = if flip < 0 { cb.neg_ref() } else { cb.clone() };
            brace_term(&mut out, &tb.0, &tb.1, &cb_signed, &[(ta, ca)]);
        }
    }
    Ok(out)
}

/// Hochschild differential `Q^1 = [mu, -]`: raises word length by one and
/// squares to zero.
pub fn hochschild_d<S: Scalar>(d_op: &PolyDiffOp<S>) -> PolyDiffOp<S> {
    let d = d_op.d;
    let one = match d_op.terms.values().next() {
        Some(c) => c.one_like(),
        None => return PolyDiffOp::zero(d),
    };
    let mu = mu_with_unit(d, one);
    let mu_term: Vec<(&PdTerm, &S)> = mu.terms.iter().collect();
    let mut out = PolyDiffOp::zero(d);
    for (t, c) in &d_op.terms {
        let deg = t.1.len() as i64 - 1;
        // mu{D} - (-1)^{|D|} D{mu}
        brace_term(&mut out, &mu_term[0].0 .0, &mu_term[0].0 .1, mu_term[0].1, &[(t, c)]);
        let c_signed = if neg_one_pow(deg) < 0 {
            c.clone()
        } else {
            c.neg_ref()
        };
        brace_term(&mut out, &t.0, &t.1, &c_signed, &[(mu_term[0].0, mu_term[0].1)]);
    }
    out
}

/// `mu` over an arbitrary scalar ring, given its unit.
pub fn mu_with_unit<S: Scalar>(d: usize, one: S) -> PolyDiffOp<S> {
    PolyDiffOp::from_terms(
        d,
        vec![(
            Monomial::one(d),
            vec![Monomial::one(d), Monomial::one(d)],
            one,
        )],
    )
}

// ---------------------------------------------------------------------------
// Tensor-coalgebra level: words of operator terms, deconcatenation, and the
// full product determined by the braces.
// ---------------------------------------------------------------------------

/// Element of the cofree tensor coalgebra on the operator space: a formal
/// sum of words whose letters are basis terms.
#[derive(Clone, PartialEq)]
pub struct TcElement<S: Scalar> {
    d: usize,
    terms: BTreeMap<Vec<PdTerm>, S>,
}

impl<S: Scalar> fmt::Debug for TcElement<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tc{{{} words}}", self.terms.len())
    }
}

impl<S: Scalar> TcElement<S> {
    pub fn zero(d: usize) -> Self {
        TcElement {
            d,
            terms: BTreeMap::new(),
        }
    }

    /// The empty word with the given coefficient (the coalgebra unit).
    pub fn unit(d: usize, c: S) -> Self {
        let mut t = Self::zero(d);
        t.add_word(vec![], c);
        t
    }

    pub fn dimension(&self) -> usize {
        self.d
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn words(&self) -> impl Iterator<Item = (&Vec<PdTerm>, &S)> {
        self.terms.iter()
    }

    pub fn add_word(&mut self, word: Vec<PdTerm>, c: S) {
        if c.is_zero() {
            return;
        }
        match self.terms.remove(&word) {
            Some(old) => {
                let sum = old.add_ref(&c);
                if !sum.is_zero() {
                    self.terms.insert(word, sum);
                }
            }
            None => {
                self.terms.insert(word, c);
            }
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.d, other.d);
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

    /// Single-letter words from every term of an operator.
    pub fn from_op(op: &PolyDiffOp<S>) -> Self {
        let mut t = Self::zero(op.d);
        for (term, c) in op.terms() {
            t.add_word(vec![term.clone()], c.clone());
        }
        t
    }

    /// Word of operators, expanded multilinearly into basis words.
    pub fn from_ops(d: usize, ops: &[PolyDiffOp<S>]) -> Self {
        let mut t = Self::zero(d);
        if ops.is_empty() {
            return t;
        }
        fn rec<S: Scalar>(
            t: &mut TcElement<S>,
            ops: &[PolyDiffOp<S>],
            word: &mut Vec<PdTerm>,
            coeff: Option<S>,
        ) {
            let k = word.len();
            if k == ops.len() {
                t.add_word(word.clone(), coeff.unwrap());
                return;
            }
            for (term, c) in ops[k].terms() {
                word.push(term.clone());
                let next = match &coeff {
                    None => c.clone(),
                    Some(acc) => acc.mul_ref(c),
                };
                rec(t, ops, word, Some(next));
                word.pop();
            }
        }
        rec(&mut t, ops, &mut Vec::new(), None);
        t
    }

    /// Projection onto single-letter words, as an operator.
    pub fn project_op(&self) -> PolyDiffOp<S> {
        let mut out = PolyDiffOp::zero(self.d);
        for (w, c) in &self.terms {
            if w.len() == 1 {
                out.add_term(w[0].0.clone(), w[0].1.clone(), c.clone());
            }
        }
        out
    }
}

pub(crate) fn word_degree(word: &[PdTerm]) -> i64 {
    word.iter().map(|(_, w)| w.len() as i64 - 1).sum()
}

/// Full multiplication on the tensor coalgebra determined by the braces:
/// interleave the letters of `x` into the letters of `y`, letting each
/// `x`-letter swallow a consecutive run of `y`-letters as brace arguments,
/// with the Koszul sign of moving `x`-letters across `y`-letters.
pub fn m_product<S: Scalar>(x: &TcElement<S>, y: &TcElement<S>) -> TcElement<S> {
    assert_eq!(x.d, y.d, "dimension mismatch");
    let d = x.d;
    let mut out = TcElement::zero(d);
    for (xa, cx) in &x.terms {
        for (yb, cy) in &y.terms {
            m_product_words(&mut out, d, xa, yb, &cx.mul_ref(cy));
        }
    }
    out
}

fn m_product_words<S: Scalar>(
    out: &mut TcElement<S>,
    d: usize,
    a_word: &[PdTerm],
    b_word: &[PdTerm],
    coeff: &S,
) {
    // choose 0 <= i_1 <= j_1 <= i_2 <= ... <= i_p <= j_p <= q; the s-th
    // a-letter is inserted after b_{i_s} and swallows b_{i_s+1..j_s}
    fn rec<S: Scalar>(
        out: &mut TcElement<S>,
        d: usize,
        a_word: &[PdTerm],
        b_word: &[PdTerm],
        coeff: &S,
        s: usize,
        start: usize,
        bounds: &mut Vec<(usize, usize)>,
    ) {
        let p = a_word.len();
        let q = b_word.len();
        if s == p {
            emit_interleaving(out, d, a_word, b_word, coeff, bounds);
            return;
        }
        for i in start..=q {
            for j in i..=q {
                bounds.push((i, j));
                rec(out, d, a_word, b_word, coeff, s + 1, j, bounds);
                bounds.pop();
            }
        }
    }
    rec(out, d, a_word, b_word, coeff, 0, 0, &mut Vec::new());
}

fn emit_interleaving<S: Scalar>(
    out: &mut TcElement<S>,
    d: usize,
    a_word: &[PdTerm],
    b_word: &[PdTerm],
    coeff: &S,
    bounds: &[(usize, usize)],
) {
    // Koszul sign: a_s moves across b_1..b_{i_s}
    let mut prefix_at = vec![0i64; b_word.len() + 1];
    for (k, b) in b_word.iter().enumerate() {
        prefix_at[k + 1] = prefix_at[k] + (b.1.len() as i64 - 1);
    }
    let mut sign_exp = 0i64;
    for (s, &(i, _)) in bounds.iter().enumerate() {
        sign_exp += (a_word[s].1.len() as i64 - 1) * prefix_at[i];
    }
    let sign = neg_one_pow(sign_exp);

    // assemble the word: run of b-letters, then a_s{swallowed}, repeating;
    // brace values are operator sums, so expand block by block
    let one = coeff.one_like();
    let mut blocks: Vec<TcElement<S>> = Vec::new();
    let mut cursor = 0usize;
    for (s, &(i, j)) in bounds.iter().enumerate() {
        for b in &b_word[cursor..i] {
            let mut t = TcElement::zero(d);
            t.add_word(vec![b.clone()], one.clone());
            blocks.push(t);
        }
        let a_op = PolyDiffOp::single(d, a_word[s].clone(), one.clone());
        let args: Vec<PolyDiffOp<S>> = b_word[i..j]
            .iter()
            .map(|t| PolyDiffOp::single(d, t.clone(), one.clone()))
            .collect();
        blocks.push(TcElement::from_op(&brace_unchecked(&a_op, &args)));
        cursor = j;
    }
    for b in &b_word[cursor..] {
        let mut t = TcElement::zero(d);
        t.add_word(vec![b.clone()], one.clone());
        blocks.push(t);
    }

    // concatenate the blocks (tensor product of words)
    let mut acc = TcElement::unit(d, if sign < 0 { coeff.neg_ref() } else { coeff.clone() });
    for block in blocks {
        let mut next = TcElement::zero(d);
        for (w1, c1) in &acc.terms {
            for (w2, c2) in &block.terms {
                let mut w = w1.clone();
                w.extend(w2.iter().cloned());
                next.add_word(w, c1.mul_ref(c2));
            }
        }
        acc = next;
    }
    for (w, c) in acc.terms {
        out.add_word(w, c);
    }
}

/// Taylor coefficient `Q^n` of the inner coderivation `[mu, -]`, evaluated
/// on a word of operators: project `m((mu), x) - (-1)^{|x|} m(x, (mu))`
/// onto single letters. `Q^1` is the Hochschild differential, `Q^2` the cup
/// product, and `Q^n = 0` for `n > 2`.
pub fn q_taylor<S: Scalar>(letters: &[PolyDiffOp<S>]) -> Result<PolyDiffOp<S>> {
    if letters.is_empty() {
        return Err(EngineError::argument("q_taylor: empty input word"));
    }
    let d = letters[0].d;
    let one = match letters[0].terms.values().next() {
        Some(c) => c.one_like(),
        None => return Ok(PolyDiffOp::zero(d)),
    };
    let mu = TcElement::from_op(&mu_with_unit(d, one));
    let x = TcElement::from_ops(d, letters);
    let mut out = m_product(&mu, &x).project_op();
    for (w, c) in &x.terms {
        let sign = -neg_one_pow(word_degree(w));
        let mut single = TcElement::zero(d);
        single.add_word(w.clone(), if sign < 0 { c.neg_ref() } else { c.clone() });
        out = out.add(&m_product(&single, &mu).project_op());
    }
    Ok(out)
}

/// Right-hand side of the brace associativity identity:
/// `a{b_1..b_q}{c_1..c_r} = sum (+-) a{c_1,..,b_1{c_..},..,c_r}` over all
/// order-preserving insertions of the `b`-blocks into the `c`-list, with
/// the sign from moving `b`-letters across `c`-letters.
pub fn brace_assoc_rhs<S: Scalar>(
    a: &PolyDiffOp<S>,
    bs: &[PolyDiffOp<S>],
    cs: &[PolyDiffOp<S>],
) -> Result<PolyDiffOp<S>> {
    for x in bs.iter().chain(cs) {
        if x.homogeneous_degree().is_none() && !x.is_zero() {
            return Err(EngineError::argument(
                "brace_assoc_rhs: arguments must be homogeneous",
            ));
        }
    }
    let d = a.d;
    let r = cs.len();
    let c_degs: Vec<i64> = cs
        .iter()
        .map(|c| c.homogeneous_degree().unwrap_or(0))
        .collect();
    let mut c_prefix = vec![0i64; r + 1];
    for k in 0..r {
        c_prefix[k + 1] = c_prefix[k] + c_degs[k];
    }
    let mut out = PolyDiffOp::zero(d);
    fn rec<S: Scalar>(
        out: &mut PolyDiffOp<S>,
        a: &PolyDiffOp<S>,
        bs: &[PolyDiffOp<S>],
        cs: &[PolyDiffOp<S>],
        c_prefix: &[i64],
        s: usize,
        start: usize,
        bounds: &mut Vec<(usize, usize)>,
    ) {
        let q = bs.len();
        let r = cs.len();
        if s == q {
            let mut args: Vec<PolyDiffOp<S>> = Vec::new();
            let mut cursor = 0usize;
            let mut sign_exp = 0i64;
            for (s2, &(i, j)) in bounds.iter().enumerate() {
                for c in &cs[cursor..i] {
                    args.push(c.clone());
                }
                let b_deg = bs[s2].homogeneous_degree().unwrap_or(0);
                sign_exp += b_deg * c_prefix[i];
                args.push(brace_unchecked(&bs[s2], &cs[i..j]));
                cursor = j;
            }
            for c in &cs[cursor..] {
                args.push(c.clone());
            }
            let inner = brace_unchecked(a, &args);
            *out = if neg_one_pow(sign_exp) < 0 {
                out.sub(&inner)
            } else {
                out.add(&inner)
            };
            return;
        }
        for i in start..=r {
            for j in i..=r {
                bounds.push((i, j));
                rec(out, a, bs, cs, c_prefix, s + 1, j, bounds);
                bounds.pop();
            }
        }
    }
    rec(&mut out, a, bs, cs, &c_prefix, 0, 0, &mut Vec::new());
    Ok(out)
}

// ---------------------------------------------------------------------------
// Pointwise evaluation (test oracle): apply an operator to polynomials.
// ---------------------------------------------------------------------------

/// A polynomial as a map monomial -> coefficient.
pub type Poly = BTreeMap<Monomial, Rat>;

pub fn poly_from_monomial(m: Monomial) -> Poly {
    BTreeMap::from([(m, Rat::one())])
}

pub fn poly_mul(a: &Poly, b: &Poly) -> Poly {
    let mut out = Poly::new();
    for (ma, ca) in a {
        for (mb, cb) in b {
            let m = ma.mul(mb);
            let c = ca * cb;
            *out.entry(m).or_insert_with(num_traits::Zero::zero) += c;
        }
    }
    out.retain(|_, c| !num_traits::Zero::is_zero(c));
    out
}

fn poly_deriv(p: &Poly, delta: &Monomial) -> Poly {
    let mut out = Poly::new();
    for (m, c) in p {
        if let Some((fact, m2)) = mono_deriv_multi(m, delta) {
            *out.entry(m2).or_insert_with(num_traits::Zero::zero) += c * Rat::from_integer(fact);
        }
    }
    out.retain(|_, c| !num_traits::Zero::is_zero(c));
    out
}

/// Apply a rational-coefficient operator to polynomials, one per word slot.
/// Every term must have exactly as many slots as there are arguments; the
/// empty word applies to zero arguments and returns its coefficient.
pub fn apply_to_polys(op: &PolyDiffOp<Rat>, args: &[Poly]) -> Result<Poly> {
    let mut out = Poly::new();
    for ((mono, word), c) in &op.terms {
        if word.len() != args.len() {
            return Err(EngineError::argument(format!(
                "apply: operator term has {} slots but {} arguments given",
                word.len(),
                args.len()
            )));
        }
        let mut acc = poly_from_monomial(mono.clone());
        for (slot, f) in word.iter().zip(args) {
            acc = poly_mul(&acc, &poly_deriv(f, slot));
        }
        for (m, v) in acc {
            *out.entry(m).or_insert_with(num_traits::Zero::zero) += v * c;
        }
    }
    out.retain(|_, c| !num_traits::Zero::is_zero(c));
    Ok(out)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::scalar::{rat, rat_int};
    use num_traits::Zero;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn pd(d: usize, terms: &[(&[u32], &[&[u32]], i64)]) -> PolyDiffOp<Rat> {
        PolyDiffOp::from_terms(
            d,
            terms
                .iter()
                .map(|(m, w, c)| {
                    (
                        Monomial(m.to_vec()),
                        w.iter().map(|s| Monomial(s.to_vec())).collect(),
                        rat_int(*c),
                    )
                })
                .collect(),
        )
    }

    pub(crate) fn random_pd(
        rng: &mut impl Rng,
        d: usize,
        max_deg: u32,
        max_word: usize,
        max_order: u32,
        nterms: usize,
    ) -> PolyDiffOp<Rat> {
        let mut out = PolyDiffOp::zero(d);
        for _ in 0..nterms {
            let mono = Monomial((0..d).map(|_| rng.gen_range(0..=max_deg)).collect());
            let len = rng.gen_range(0..=max_word);
            let word: DiffWord = (0..len)
                .map(|_| Monomial((0..d).map(|_| rng.gen_range(0..=max_order)).collect()))
                .collect();
            out.add_term(mono, word, rat(rng.gen_range(-3..=3), 1));
        }
        out
    }

    /// Random operator whose every term has the same word length.
    pub(crate) fn random_pd_homog(
        rng: &mut impl Rng,
        d: usize,
        max_deg: u32,
        word_len: usize,
        max_order: u32,
        nterms: usize,
    ) -> PolyDiffOp<Rat> {
        let mut out = PolyDiffOp::zero(d);
        for _ in 0..nterms {
            let mono = Monomial((0..d).map(|_| rng.gen_range(0..=max_deg)).collect());
            let word: DiffWord = (0..word_len)
                .map(|_| Monomial((0..d).map(|_| rng.gen_range(0..=max_order)).collect()))
                .collect();
            out.add_term(mono, word, rat(rng.gen_range(-3..=3), 1));
        }
        out
    }

    #[test]
    fn coproduct_cases() {
        let d = 2;
        // Delta(1) = 1 (x) 1
        let one = Monomial::one(d);
        let sp = ul_coproduct(&one);
        assert_eq!(sp, vec![(one.clone(), one.clone(), BigInt::one())]);
        // Delta(d1) = d1 (x) 1 + 1 (x) d1
        let d1 = Monomial(vec![1, 0]);
        let sp = ul_coproduct(&d1);
        assert_eq!(sp.len(), 2);
        assert!(sp.contains(&(d1.clone(), one.clone(), BigInt::one())));
        assert!(sp.contains(&(one.clone(), d1.clone(), BigInt::one())));
        // Delta(d1^2) = d1^2 (x) 1 + 2 d1 (x) d1 + 1 (x) d1^2
        let d1sq = Monomial(vec![2, 0]);
        let sp = ul_coproduct(&d1sq);
        assert_eq!(sp.len(), 3);
        assert!(sp.contains(&(d1.clone(), d1.clone(), BigInt::from(2))));
    }

    #[test]
    fn brace_simple_cases() {
        let d = 2;
        let d1 = PolyDiffOp::derivation(d, 0);
        let d2 = PolyDiffOp::derivation(d, 1);
        // d1{d2} = the one-slot word d1 d2 (composition)
        let got = brace(&d1, &[d2.clone()]).unwrap();
        assert_eq!(got, pd(d, &[(&[0, 0], &[&[1, 1]], 1)]));
        // one slot cannot host two inserts
        let got = brace(&d1, &[d2.clone(), d2.clone()]).unwrap();
        assert!(got.is_zero());
        // mu{d1} distributes d1 over both slots; for a one-letter argument
        // the brace sign vanishes, so both insertions come with +
        let mu = PolyDiffOp::mu(d);
        let got = brace(&mu, &[d1.clone()]).unwrap();
        assert_eq!(
            got,
            pd(
                d,
                &[
                    (&[0, 0], &[&[1, 0], &[0, 0]], 1),
                    (&[0, 0], &[&[0, 0], &[1, 0]], 1)
                ]
            )
        );
        // empty argument list is an argument error
        assert!(brace(&mu, &[]).is_err());
    }

    /// Pointwise oracle: D{E}(f, ...) agrees with nested operator
    /// application summed over insertion positions.
    #[test]
    fn brace_matches_pointwise_insertion() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let d = 2;
        for _ in 0..40 {
            let alen = rng.gen_range(1..=2);
            let a = random_pd_homog(&mut rng, d, 1, alen, 2, 2);
            let blen = rng.gen_range(0..=2);
            let b = random_pd_homog(&mut rng, d, 1, blen, 2, 2);
            if a.is_zero() || b.is_zero() {
                continue;
            }
            let p = alen as i64;
            let q = blen as i64;
            let braced = brace(&a, &[b.clone()]).unwrap();
            let m = (p - 1 + q) as usize;
            for _ in 0..3 {
                let args: Vec<Poly> = (0..m)
                    .map(|_| {
                        poly_from_monomial(Monomial(
                            (0..d).map(|_| rng.gen_range(0..=2)).collect(),
                        ))
                    })
                    .collect();
                let lhs = apply_to_polys(&braced, &args).unwrap();
                // sum over insertion positions with sign (-1)^{(q-1) i}
                let mut rhs = Poly::new();
                for i in 0..p as usize {
                    let inner = apply_to_polys(&b, &args[i..i + q as usize]).unwrap();
                    let mut outer_args: Vec<Poly> = Vec::new();
                    outer_args.extend_from_slice(&args[..i]);
                    outer_args.push(inner);
                    outer_args.extend_from_slice(&args[i + q as usize..]);
                    let v = apply_to_polys(&a, &outer_args).unwrap();
                    let sign = neg_one_pow((q - 1) * i as i64);
                    for (mono, c) in v {
                        let slot = rhs.entry(mono).or_insert_with(Rat::zero);
                        if sign < 0 {
                            *slot -= c;
                        } else {
                            *slot += c;
                        }
                    }
                }
                rhs.retain(|_, c| !num_traits::Zero::is_zero(c));
                assert_eq!(lhs, rhs);
            }
        }
    }

    #[test]
    fn hochschild_differential_cases() {
        let d = 2;
        // d(mu) = 0 since [mu, mu] = 0
        let mu = PolyDiffOp::mu(d);
        assert!(hochschild_d(&mu).is_zero());
        // derivations are 1-cocycles
        let d1 = PolyDiffOp::derivation(d, 0);
        assert!(hochschild_d(&d1).is_zero());
        // multiplication by t1: d gives the 2-word t1 (1 (x) 1)
        let t1_op = pd(d, &[(&[1, 0], &[&[0, 0]], 1)]);
        assert_eq!(
            hochschild_d(&t1_op),
            pd(d, &[(&[1, 0], &[&[0, 0], &[0, 0]], 1)])
        );
        // functions (empty words) are cocycles of degree -1
        let f = PolyDiffOp::function(d, Monomial(vec![2, 1]));
        assert!(hochschild_d(&f).is_zero());
        // the unit one-slot word is not a cocycle: pointwise
        // (du)(a,b) = a u(b) - u(ab) + u(a) b = ab, so d(1) = mu
        let unit = PolyDiffOp::unit_word(d);
        assert_eq!(hochschild_d(&unit), mu);
    }

    #[test]
    fn hochschild_d_squares_to_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..60 {
            let d = rng.gen_range(1..=2);
            let x = random_pd(&mut rng, d, 2, 3, 2, 3);
            assert!(hochschild_d(&hochschild_d(&x)).is_zero());
        }
    }

    /// Pointwise oracle for the differential on 1-words:
    /// (dD)(a,b) = a D(b) - D(ab) + D(a) b.
    #[test]
    fn hochschild_d_matches_pointwise_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let d = 2;
        for _ in 0..30 {
            let op = random_pd_homog(&mut rng, d, 2, 1, 2, 2);
            let dd = hochschild_d(&op);
            for _ in 0..3 {
                let fa =
                    poly_from_monomial(Monomial((0..d).map(|_| rng.gen_range(0..=2)).collect()));
                let fb =
                    poly_from_monomial(Monomial((0..d).map(|_| rng.gen_range(0..=2)).collect()));
                let lhs = apply_to_polys(&dd, &[fa.clone(), fb.clone()]).unwrap();
                let mut rhs = poly_mul(&fa, &apply_to_polys(&op, &[fb.clone()]).unwrap());
                for (m, c) in apply_to_polys(&op, &[poly_mul(&fa, &fb)]).unwrap() {
                    *rhs.entry(m).or_insert_with(Rat::zero) -= c;
                }
                for (m, c) in poly_mul(&apply_to_polys(&op, &[fa.clone()]).unwrap(), &fb) {
                    *rhs.entry(m).or_insert_with(Rat::zero) += c;
                }
                rhs.retain(|_, c| !num_traits::Zero::is_zero(c));
                assert_eq!(lhs, rhs);
            }
        }
    }

    #[test]
    fn g_bracket_cases() {
        let d = 2;
        let d1 = PolyDiffOp::derivation(d, 0);
        let d2 = PolyDiffOp::derivation(d, 1);
        // commuting derivations
        assert!(g_bracket(&d1, &d2).unwrap().is_zero());
        // operator commutator on 1-words: [d1, t1 d1] = d1
        let t1d1 = pd(d, &[(&[1, 0], &[&[1, 0]], 1)]);
        assert_eq!(g_bracket(&d1, &t1d1).unwrap(), d1);
        // even shifted degree: self bracket vanishes
        assert!(g_bracket(&t1d1, &t1d1).unwrap().is_zero());
    }

    /// The operator bracket of an inner brace algebra satisfies the
    /// graded Jacobi identity on the nose (the braces are pre-Lie).
    #[test]
    fn g_bracket_graded_jacobi_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(163);
        let d = 2;
        for _ in 0..20 {
            let la = rng.gen_range(0..=2);
            let lb = rng.gen_range(0..=2);
            let lc = rng.gen_range(0..=2);
            let a = random_pd_homog(&mut rng, d, 1, la, 1, 2);
            let b = random_pd_homog(&mut rng, d, 1, lb, 1, 2);
            let c = random_pd_homog(&mut rng, d, 1, lc, 1, 2);
            if a.is_zero() || b.is_zero() || c.is_zero() {
                continue;
            }
            let (da, db) = (la as i64 - 1, lb as i64 - 1);
            let lhs = g_bracket(&a, &g_bracket(&b, &c).unwrap()).unwrap();
            let r1 = g_bracket(&g_bracket(&a, &b).unwrap(), &c).unwrap();
            let r2 = g_bracket(&b, &g_bracket(&a, &c).unwrap()).unwrap();
            let r2 = if (da * db) % 2 == 0 { r2 } else { r2.neg() };
            assert_eq!(lhs, r1.add(&r2));
        }
    }

    #[test]
    fn g_bracket_restricted_to_one_words_is_commutator() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let d = 2;
        for _ in 0..25 {
            let a = random_pd_homog(&mut rng, d, 2, 1, 2, 2);
            let b = random_pd_homog(&mut rng, d, 2, 1, 2, 2);
            let br = g_bracket(&a, &b).unwrap();
            for _ in 0..3 {
                let f =
                    poly_from_monomial(Monomial((0..d).map(|_| rng.gen_range(0..=3)).collect()));
                let lhs = apply_to_polys(&br, &[f.clone()]).unwrap();
                let ab =
                    apply_to_polys(&a, &[apply_to_polys(&b, &[f.clone()]).unwrap()]).unwrap();
                let ba =
                    apply_to_polys(&b, &[apply_to_polys(&a, &[f.clone()]).unwrap()]).unwrap();
                let mut rhs = ab;
                for (m, c) in ba {
                    *rhs.entry(m).or_insert_with(Rat::zero) -= c;
                }
                rhs.retain(|_, c| !num_traits::Zero::is_zero(c));
                assert_eq!(lhs, rhs);
            }
        }
    }

    #[test]
    fn cup_is_q2_of_inner_coderivation() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let d = 2;
        for _ in 0..20 {
            let la = rng.gen_range(0..=2);
            let lb = rng.gen_range(0..=2);
            let a = random_pd_homog(&mut rng, d, 1, la, 1, 2);
            let b = random_pd_homog(&mut rng, d, 1, lb, 1, 2);
            let lhs = cup(&a, &b).unwrap();
            let rhs = q_taylor(&[a.clone(), b.clone()]).unwrap();
            assert_eq!(lhs, rhs);
        }
        // cup with zero
        let a = pd(d, &[(&[0, 0], &[&[1, 0]], 1)]);
        assert!(cup(&a, &PolyDiffOp::zero(d)).unwrap().is_zero());
        // cup(d1, d2) = +(d1 (x) d2) under the fixed sign
        let d1 = PolyDiffOp::derivation(d, 0);
        let d2 = PolyDiffOp::derivation(d, 1);
        assert_eq!(
            cup(&d1, &d2).unwrap(),
            pd(d, &[(&[0, 0], &[&[1, 0], &[0, 1]], 1)])
        );
        // cup of two functions multiplies them into an empty word
        let f = PolyDiffOp::function(d, Monomial(vec![1, 0]));
        let g = PolyDiffOp::function(d, Monomial(vec![0, 1]));
        assert_eq!(cup(&f, &g).unwrap(), pd(d, &[(&[1, 1], &[], 1)]));
    }

    #[test]
    fn q_taylor_vanishes_above_two() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let d = 2;
        for n in 3..=4usize {
            for _ in 0..8 {
                let letters: Vec<PolyDiffOp<Rat>> = (0..n)
                    .map(|_| {
                        let len = rng.gen_range(1..=2);
                        random_pd_homog(&mut rng, d, 1, len, 1, 1)
                    })
                    .collect();
                assert!(q_taylor(&letters).unwrap().is_zero());
            }
        }
    }

    #[test]
    fn q_taylor_one_is_hochschild_d() {
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        let d = 2;
        for _ in 0..20 {
            let a = random_pd(&mut rng, d, 2, 2, 2, 2);
            if a.is_zero() {
                continue;
            }
            assert_eq!(q_taylor(std::slice::from_ref(&a)).unwrap(), hochschild_d(&a));
        }
    }

    #[test]
    fn mu_squares_to_zero_under_m11() {
        let d = 2;
        let mu = PolyDiffOp::mu(d);
        // m^{1,1}(mu, mu) = mu{mu}
        assert!(brace(&mu, &[mu.clone()]).unwrap().is_zero());
    }

    #[test]
    fn brace_associativity_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        let d = 2;
        for _ in 0..30 {
            let alen = rng.gen_range(1..=2);
            let a = random_pd_homog(&mut rng, d, 1, alen, 2, 2);
            let nb = rng.gen_range(1..=2);
            let nc = rng.gen_range(1..=2);
            let bs: Vec<PolyDiffOp<Rat>> = (0..nb)
                .map(|_| {
                    let len = rng.gen_range(0..=2);
                    random_pd_homog(&mut rng, d, 1, len, 2, 1)
                })
                .collect();
            let cs: Vec<PolyDiffOp<Rat>> = (0..nc)
                .map(|_| {
                    let len = rng.gen_range(0..=2);
                    random_pd_homog(&mut rng, d, 1, len, 2, 1)
                })
                .collect();
            let lhs = brace_unchecked(&brace_unchecked(&a, &bs), &cs);
            let rhs = brace_assoc_rhs(&a, &bs, &cs).unwrap();
            assert_eq!(lhs, rhs);
        }
    }

    /// Expansion of the full product on single-letter words:
    /// m((a),(b)) = (a|b) + (-1)^{|a||b|}(b|a) + (a{b}).
    #[test]
    fn m_product_single_letters_expansion() {
        let mut rng = ChaCha8Rng::seed_from_u64(149);
        let d = 2;
        for _ in 0..12 {
            let la = rng.gen_range(1..=2);
            let lb = rng.gen_range(1..=2);
            let a = random_pd_homog(&mut rng, d, 1, la, 1, 1);
            let b = random_pd_homog(&mut rng, d, 1, lb, 1, 1);
            if a.is_zero() || b.is_zero() {
                continue;
            }
            let got = m_product(&TcElement::from_op(&a), &TcElement::from_op(&b));
            let mut expect = TcElement::from_ops(d, &[a.clone(), b.clone()]);
            let sign = neg_one_pow((la as i64 - 1) * (lb as i64 - 1));
            let ba = TcElement::from_ops(d, &[b.clone(), a.clone()]);
            expect = if sign < 0 {
                expect.sub(&ba)
            } else {
                expect.add(&ba)
            };
            expect = expect.add(&TcElement::from_op(&brace(&a, &[b.clone()]).unwrap()));
            assert_eq!(got, expect);
        }
    }

    #[test]
    fn m_product_unit_and_associativity() {
        let mut rng = ChaCha8Rng::seed_from_u64(59);
        let d = 2;
        // unit axiom
        let a = random_pd_homog(&mut rng, d, 1, 1, 1, 2);
        let b = random_pd_homog(&mut rng, d, 1, 2, 1, 1);
        let word = TcElement::from_ops(d, &[a, b]);
        let unit = TcElement::unit(d, Rat::one());
        assert_eq!(m_product(&unit, &word), word);
        assert_eq!(m_product(&word, &unit), word);
        // associativity on small words
        for _ in 0..10 {
            let mk = |rng: &mut ChaCha8Rng| {
                let len = rng.gen_range(1..=2);
                let ops: Vec<PolyDiffOp<Rat>> = (0..len)
                    .map(|_| {
                        let wl = rng.gen_range(1..=2);
                        random_pd_homog(rng, d, 1, wl, 1, 1)
                    })
                    .collect();
                TcElement::from_ops(d, &ops)
            };
            let x = mk(&mut rng);
            let y = mk(&mut rng);
            let z = mk(&mut rng);
            let xy_z = m_product(&m_product(&x, &y), &z);
            let x_yz = m_product(&x, &m_product(&y, &z));
            assert_eq!(xy_z, x_yz);
        }
    }

    /// Bialgebra axiom: deconcatenation is a morphism for the product.
    #[test]
    fn m_product_compatible_with_deconcatenation() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let d = 2;
        type Pair = BTreeMap<(Vec<PdTerm>, Vec<PdTerm>), Rat>;
        fn add_pair(m: &mut Pair, k: (Vec<PdTerm>, Vec<PdTerm>), v: Rat) {
            if num_traits::Zero::is_zero(&v) {
                return;
            }
            *m.entry(k).or_insert_with(Rat::zero) += v;
        }
        fn deconcat(x: &TcElement<Rat>) -> Pair {
            let mut out = Pair::new();
            for (w, c) in x.words() {
                for i in 0..=w.len() {
                    add_pair(&mut out, (w[..i].to_vec(), w[i..].to_vec()), c.clone());
                }
            }
            out.retain(|_, v| !num_traits::Zero::is_zero(v));
            out
        }
        for _ in 0..8 {
            let mk = |rng: &mut ChaCha8Rng| {
                let len = rng.gen_range(1..=2);
                let ops: Vec<PolyDiffOp<Rat>> = (0..len)
                    .map(|_| {
                        let wl = rng.gen_range(1..=2);
                        random_pd_homog(rng, d, 1, wl, 1, 1)
                    })
                    .collect();
                TcElement::from_ops(d, &ops)
            };
            let x = mk(&mut rng);
            let y = mk(&mut rng);
            let lhs = deconcat(&m_product(&x, &y));
            // rhs: (m (x) m) after Delta (x) Delta with the middle flip
            let dx = deconcat(&x);
            let dy = deconcat(&y);
            let mut rhs = Pair::new();
            for ((x1, x2), cx) in &dx {
                for ((y1, y2), cy) in &dy {
                    let sign = neg_one_pow(word_degree(x2) * word_degree(y1));
                    let mut lx = TcElement::zero(d);
                    lx.add_word(x1.clone(), Rat::one());
                    let mut rx = TcElement::zero(d);
                    rx.add_word(x2.clone(), Rat::one());
                    let mut ly = TcElement::zero(d);
                    ly.add_word(y1.clone(), Rat::one());
                    let mut ry = TcElement::zero(d);
                    ry.add_word(y2.clone(), Rat::one());
                    let m1 = m_product(&lx, &ly);
                    let m2 = m_product(&rx, &ry);
                    for (w1, c1) in m1.words() {
                        for (w2, c2) in m2.words() {
                            let mut v = cx * cy * c1 * c2;
                            if sign < 0 {
                                v = -v;
                            }
                            add_pair(&mut rhs, (w1.clone(), w2.clone()), v);
                        }
                    }
                }
            }
            rhs.retain(|_, v| !num_traits::Zero::is_zero(v));
            assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn brace_vanishing_for_one_words() {
        let mut rng = ChaCha8Rng::seed_from_u64(67);
        let d = 2;
        for _ in 0..40 {
            let w = random_pd_homog(&mut rng, d, 2, 1, 2, 2);
            let n = rng.gen_range(2..=3);
            let args: Vec<PolyDiffOp<Rat>> = (0..n)
                .map(|_| random_pd(&mut rng, d, 1, 2, 1, 1))
                .collect();
            assert!(brace(&w, &args).unwrap().is_zero());
        }
    }
}
