//! Poly-vector fields on the polynomial ring `k[t_1..t_d]` with wedge
//! product and Schouten-Nijenhuis bracket.
//!
//! A term is a monomial coefficient times a wedge `d_{s_1} ^ ... ^ d_{s_n}`
//! of distinct derivations, stored with strictly increasing indices. The
//! grading is shifted: such a term has degree `n - 1`, the bracket has
//! degree 0 and the wedge degree 1. In particular functions have degree -1
//! and vector fields degree 0.
//!
//! Sign convention for the bracket: on terms `a`, `b` of wedge degrees
//! `p`, `q`,
//!
//! ```text
//! [a, b] = -(-1)^{|a||b|} { (-1)^p sum_k (da/dxi_k)(db/dt_k)
//!                           + sum_k (da/dt_k)(db/dxi_k) }
//! ```
//!
//! with `|a| = p - 1`, `|b| = q - 1` the shifted degrees and `xi_k` the odd
//! generator representing `d/dt_k`. This normalization restricts to the
//! commutator on vector fields, gives `[X, f] = X(f)`, and is graded
//! antisymmetric with graded Jacobi. The Leibniz rule takes the form
//!
//! ```text
//! [a, b ^ c] = (-1)^{|a|(|c|+1)} [a,b] ^ c + b ^ [a,c]
//! ```
//!
//! which is the variant compatible with the Gerstenhaber bracket of
//! poly-differential operators under the antisymmetrization map (the
//! projection of the operator bracket onto wedges reproduces exactly this
//! bracket; the homotopy-transfer suite checks the identification).

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{EngineError, Result};
use crate::scalar::{Rat, Scalar};
use crate::sign::neg_one_pow;

/// Exponent multi-index of a monomial in `t_1..t_d`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Monomial(pub Vec<u32>);

impl Monomial {
    pub fn one(d: usize) -> Self {
        Monomial(vec![0; d])
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        Monomial(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }

    /// Derivative in direction `k`: returns `(alpha_k, alpha - e_k)` or
    /// `None` when the exponent is zero.
    pub fn deriv(&self, k: usize) -> Option<(u32, Monomial)> {
        if self.0[k] == 0 {
            return None;
        }
        let mut out = self.0.clone();
        out[k] -= 1;
        Some((self.0[k], Monomial(out)))
    }
}

/// Strictly increasing list of derivation indices (0-based).
pub type WedgeSet = Vec<usize>;

/// Key of a poly-vector term in canonical order: lexicographic on
/// (exponents, index set).
pub type PvTerm = (Monomial, WedgeSet);

/// Finite sum of poly-vector terms over an exact scalar ring.
#[derive(Clone, PartialEq)]
pub struct PolyVector<S: Scalar> {
    d: usize,
    terms: BTreeMap<PvTerm, S>,
}

impl<S: Scalar> fmt::Debug for PolyVector<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for ((mono, wedge), c) in &self.terms {
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
            for s in wedge {
                write!(f, " d{}", s + 1)?;
            }
        }
        Ok(())
    }
}

impl<S: Scalar> PolyVector<S> {
    pub fn zero(d: usize) -> Self {
        PolyVector {
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

    pub fn terms(&self) -> impl Iterator<Item = (&PvTerm, &S)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn add_term(&mut self, mono: Monomial, wedge: WedgeSet, coeff: S) {
        assert_eq!(mono.0.len(), self.d, "monomial dimension mismatch");
        debug_assert!(wedge.windows(2).all(|w| w[0] < w[1]), "wedge not sorted");
        assert!(
            wedge.iter().all(|s| *s < self.d),
            "wedge index out of range"
        );
        if coeff.is_zero() {
            return;
        }
        let key = (mono, wedge);
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

    pub fn from_terms(d: usize, terms: Vec<(Monomial, WedgeSet, S)>) -> Self {
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
        PolyVector {
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

    /// Shifted degree when homogeneous, `None` otherwise (zero counts as
    /// homogeneous of any degree).
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
}

/// Multiplies two wedge monomials, returning the merged index set and the
/// Koszul sign of sorting the concatenation, or `None` on a repeated index.
fn merge_wedges(a: &[usize], b: &[usize]) -> Option<(WedgeSet, i32)> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let mut sign = 1i32;
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        if a[i] == b[j] {
            return None;
        }
        if a[i] < b[j] {
            out.push(a[i]);
            i += 1;
        } else {
            // b[j] moves past the remaining a[i..]
            if (a.len() - i) % 2 == 1 {
                sign = -sign;
            }
            out.push(b[j]);
            j += 1;
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    Some((out, sign))
}

/// Left odd derivative d/dxi_k of a wedge set: position sign and the set
/// with `k` removed, or `None` when `k` is absent.
fn wedge_deriv(wedge: &[usize], k: usize) -> Option<(i32, WedgeSet)> {
    let pos = wedge.iter().position(|&s| s == k)?;
    let mut out = wedge.to_vec();
    out.remove(pos);
    Some((neg_one_pow(pos as i64), out))
}

/// Graded-commutative exterior product (degree one in the shifted grading).
pub fn wedge<S: Scalar>(a: &PolyVector<S>, b: &PolyVector<S>) -> Result<PolyVector<S>> {
    if a.d != b.d {
        return Err(EngineError::argument(format!(
            "wedge: dimension mismatch {} vs {}",
            a.d, b.d
        )));
    }
    let mut out = PolyVector::zero(a.d);
    for ((ma, wa), ca) in &a.terms {
        for ((mb, wb), cb) in &b.terms {
            if let Some((w, sign)) = merge_wedges(wa, wb) {
                let mut c = ca.mul_ref(cb);
                if sign < 0 {
                    c = c.neg_ref();
                }
                out.add_term(ma.mul(mb), w, c);
            }
        }
    }
    Ok(out)
}

/// One summand bucket of the bracket: `sum_k (da/dxi_k)(db/dt_k)` on a pair
/// of terms, accumulated into `out` with an overall sign.
fn accumulate_xi_t<S: Scalar>(
    out: &mut PolyVector<S>,
    overall: i32,
    ma: &Monomial,
    wa: &[usize],
    ca: &S,
    mb: &Monomial,
    wb: &[usize],
    cb: &S,
) {
    for pos in 0..wa.len() {
        let k = wa[pos];
        let Some((e, mb2)) = mb.deriv(k) else { continue };
        let (dsign, wa2) = wedge_deriv(wa, k).expect("index present");
        let Some((wmerge, msign)) = merge_wedges(&wa2, wb) else {
            continue;
        };
        let sign = overall * dsign * msign;
        let mut c = ca.mul_ref(cb).scale(&Rat::from_integer(e.into()));
        if sign < 0 {
            c = c.neg_ref();
        }
        out.add_term(ma.mul(&mb2), wmerge, c);
    }
}

/// Schouten-Nijenhuis bracket (degree 0 in the shifted grading).
pub fn schouten<S: Scalar>(a: &PolyVector<S>, b: &PolyVector<S>) -> Result<PolyVector<S>> {
    if a.d != b.d {
        return Err(EngineError::argument(format!(
            "schouten: dimension mismatch {} vs {}",
            a.d, b.d
        )));
    }
    let mut out = PolyVector::zero(a.d);
    for ((ma, wa), ca) in &a.terms {
        for ((mb, wb), cb) in &b.terms {
            let p = wa.len() as i64;
            let q = wb.len() as i64;
            // global twist -(-1)^{|a||b|} with |a| = p-1, |b| = q-1
            let twist = -neg_one_pow((p - 1) * (q - 1));
            // (-1)^p (da/dxi)(db/dt)
            accumulate_xi_t(&mut out, twist * neg_one_pow(p), ma, wa, ca, mb, wb, cb);
            // (da/dt_k)(db/dxi_k): commute the even factor da/dt_k with
            // nothing; take the xi-derivative of b and multiply on the right
            for pos in 0..wb.len() {
                let k = wb[pos];
                let Some((e, ma2)) = ma.deriv(k) else { continue };
                let (dsign, wb2) = wedge_deriv(wb, k).expect("index present");
                let Some((wmerge, msign)) = merge_wedges(wa, &wb2) else {
                    continue;
                };
                let sign = twist * dsign * msign;
                let mut c = ca.mul_ref(cb).scale(&Rat::from_integer(e.into()));
                if sign < 0 {
                    c = c.neg_ref();
                }
                out.add_term(ma2.mul(mb), wmerge, c);
            }
        }
    }
    Ok(out)
}

/// True iff a homogeneous degree-1 element (a bivector field) satisfies
/// `[pi, pi] = 0` exactly, i.e. is a Poisson structure.
pub fn poisson_check<S: Scalar>(pi: &PolyVector<S>) -> Result<bool> {
    if pi.is_zero() {
        return Ok(true);
    }
    match pi.homogeneous_degree() {
        Some(1) => Ok(schouten(pi, pi)?.is_zero()),
        Some(deg) => Err(EngineError::argument(format!(
            "poisson_check: expected shifted degree 1, got {deg}"
        ))),
        None => Err(EngineError::argument(
            "poisson_check: input is not homogeneous",
        )),
    }
}

/// Convenience constructors over the rationals, used widely in tests and
/// the CLI.
impl PolyVector<Rat> {
    /// The coordinate function `t_{k+1}` (0-based index).
    pub fn coordinate(d: usize, k: usize) -> Self {
        let mut mono = Monomial::one(d);
        mono.0[k] = 1;
        Self::from_terms(d, vec![(mono, vec![], Rat::from_integer(1.into()))])
    }

    /// The derivation `d_{k+1}` (0-based index).
    pub fn derivation(d: usize, k: usize) -> Self {
        Self::from_terms(
            d,
            vec![(Monomial::one(d), vec![k], Rat::from_integer(1.into()))],
        )
    }
}
