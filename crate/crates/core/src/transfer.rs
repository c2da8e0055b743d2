//! Homotopy transfer of the operator structure onto poly-vector fields:
//! minimal models built by the recursion
//!
//! ```text
//! psi^1 = i,   Q1^1 = 0,
//! psi^n = H P Q2 psi^{<n} I_n,   Q1^n = p P Q2 psi^{<n} I_n
//! ```
//!
//! evaluated on the symmetric coalgebra of the suspended operator space.
//! The structure being transferred is the differential graded Lie algebra
//! of poly-differential operators: the Taylor family of its codifferential
//! has the Hochschild differential in arity one, the operator bracket in
//! arity two and nothing above. On suspensions the conventions are
//!
//! ```text
//! Q2^1(s x) = -s(d x),   Q2^2(s x . s y) = (-1)^{|x|} s [x, y],
//! H-bar(s x) = -s(H x),
//! ```
//!
//! which make `Q2^1 H + H Q2^1 = i p - id` hold on the suspended complex.
//!
//! The same Taylor coefficients admit an expansion over planar rooted
//! trees with leaves `1..n` and internal arities at least two: decorate
//! leaves with `i`, vertices with the Taylor family, internal edges (and
//! the root, for `psi`) with the homotopy, weight each tree by the inverse
//! product of its vertex-arity factorials, and symmetrize over the inputs
//! with Koszul signs. The planar sum is implemented as a cross-check
//! oracle for low arities; the recursion is the production path. Trees
//! with a vertex of arity three or more contribute nothing here because
//! the bracket is the top operation.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::fmt;

use crate::coalgebra::{coderivation_apply, morphism_apply, SymExpr, SymLetter};
use crate::error::{EngineError, Result};
use crate::hkr::{hkr_i, hkr_p, HomotopyTable};
use crate::polydiff::{g_bracket, hochschild_d, PdTerm, PolyDiffOp};
use crate::polyvector::{PolyVector, PvTerm};
use crate::scalar::{factorial, Rat};
use crate::sign::neg_one_pow;

// ---------------------------------------------------------------------------
// Planar trees
// ---------------------------------------------------------------------------

/// Rooted planar tree with leaves indexed 1..n in planar order; internal
/// vertices have at least two children.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum PlanarTree {
    Leaf(usize),
    Node(Vec<PlanarTree>),
}

impl fmt::Debug for PlanarTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlanarTree::Leaf(i) => write!(f, "{i}"),
            PlanarTree::Node(children) => {
                write!(f, "(")?;
                for c in children {
                    write!(f, "{c:?}")?;
                }
                write!(f, ")")
            }
        }
    }
}

impl PlanarTree {
    pub fn leaf_count(&self) -> usize {
        match self {
            PlanarTree::Leaf(_) => 1,
            PlanarTree::Node(children) => children.iter().map(|c| c.leaf_count()).sum(),
        }
    }

    pub fn is_binary(&self) -> bool {
        match self {
            PlanarTree::Leaf(_) => true,
            PlanarTree::Node(children) => children.len() == 2 && children.iter().all(|c| c.is_binary()),
        }
    }
}

/// Complete duplicate-free enumeration of the planar rooted trees on `n`
/// leaves with internal arities at least two.
pub fn enumerate_trees(n: usize, bound: usize) -> Result<Vec<PlanarTree>> {
    if n == 0 {
        return Err(EngineError::argument("enumerate_trees: need n >= 1"));
    }
    if n > bound {
        return Err(EngineError::resource(format!(
            "enumerate_trees: n = {n} exceeds the configured bound {bound}"
        )));
    }
    Ok(trees_on(1, n))
}

/// Trees whose leaves are `start..start+count` in planar order.
fn trees_on(start: usize, count: usize) -> Vec<PlanarTree> {
    if count == 1 {
        return vec![PlanarTree::Leaf(start)];
    }
    let mut out = Vec::new();
    // compositions of `count` into m >= 2 parts
    fn compositions(count: usize, min_parts: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        fn rec(rem: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if rem == 0 {
                out.push(cur.clone());
                return;
            }
            for first in 1..=rem {
                cur.push(first);
                rec(rem - first, cur, out);
                cur.pop();
            }
        }
        rec(count, &mut Vec::new(), &mut out);
        out.retain(|c| c.len() >= min_parts);
        out
    }
    for comp in compositions(count, 2) {
        // cartesian product of subtree choices per segment
        let mut segments: Vec<Vec<PlanarTree>> = Vec::new();
        let mut pos = start;
        for len in &comp {
            segments.push(trees_on(pos, *len));
            pos += len;
        }
        let mut acc: Vec<Vec<PlanarTree>> = vec![vec![]];
        for seg in segments {
            let mut next = Vec::new();
            for prefix in &acc {
                for t in &seg {
                    let mut p = prefix.clone();
                    p.push(t.clone());
                    next.push(p);
                }
            }
            acc = next;
        }
        for children in acc {
            out.push(PlanarTree::Node(children));
        }
    }
    out
}

/// Product over internal vertices of (arity factorial).
pub fn tree_weight(t: &PlanarTree) -> num_bigint::BigInt {
    match t {
        PlanarTree::Leaf(_) => 1.into(),
        PlanarTree::Node(children) => {
            let mut w = factorial(children.len());
            for c in children {
                w *= tree_weight(c);
            }
            w
        }
    }
}

// ---------------------------------------------------------------------------
// Suspended letters
// ---------------------------------------------------------------------------

/// Basis term of the poly-vector side, viewed in the suspended space.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct HLetter(pub PvTerm);

impl SymLetter for HLetter {
    fn suspended_degree(&self) -> i64 {
        self.0 .1.len() as i64 - 2
    }
}

impl HLetter {
    /// Shifted degree in the unsuspended space.
    pub fn shifted_degree(&self) -> i64 {
        self.0 .1.len() as i64 - 1
    }
}

/// Basis term of the operator side, viewed in the suspended space.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct VLetter(pub PdTerm);

impl SymLetter for VLetter {
    fn suspended_degree(&self) -> i64 {
        self.0 .1.len() as i64 - 2
    }
}

pub fn polyvector_letters(a: &PolyVector<Rat>) -> Vec<(HLetter, Rat)> {
    a.terms()
        .map(|(t, c)| (HLetter(t.clone()), c.clone()))
        .collect()
}

pub fn op_from_vletters(d: usize, letters: &[(VLetter, Rat)]) -> PolyDiffOp<Rat> {
    let mut out = PolyDiffOp::zero(d);
    for (l, c) in letters {
        out.add_term(l.0 .0.clone(), l.0 .1.clone(), c.clone());
    }
    out
}

pub fn polyvector_from_hletters(d: usize, letters: &[(HLetter, Rat)]) -> PolyVector<Rat> {
    let mut out = PolyVector::zero(d);
    for (l, c) in letters {
        out.add_term(l.0 .0.clone(), l.0 .1.clone(), c.clone());
    }
    out
}

fn op_to_vletters(op: &PolyDiffOp<Rat>) -> Vec<(VLetter, Rat)> {
    op.terms()
        .map(|(t, c)| (VLetter(t.clone()), c.clone()))
        .collect()
}

// ---------------------------------------------------------------------------
// Transfer context
// ---------------------------------------------------------------------------

/// Report of the transfer identity checks at one arity.
#[derive(Debug, Clone)]
pub struct TransferReport {
    pub arity: usize,
    pub samples: usize,
    /// Residual count of `P Q2 psi I_n - P psi Q1 I_n` over the samples.
    pub morphism_failures: usize,
    /// Residual count of `P Q1 Q1 I_{n+1}` over the samples.
    pub square_failures: usize,
    /// True when no sample provided any coverage.
    pub no_coverage: bool,
}

impl TransferReport {
    pub fn passed(&self) -> bool {
        self.morphism_failures == 0 && self.square_failures == 0
    }
}

/// Evaluation context for the transfer: the homotopy data plus memo
/// stores for the Taylor coefficients, keyed by sorted letter tuples.
///
/// Structure axioms of the operator side (square-zero differential,
/// derivation rule over the bracket, Jacobi) are spot-checked on small
/// samples at creation; failures surface as argument errors.
pub struct TransferContext<'a> {
    table: &'a HomotopyTable,
    arity_bound: usize,
    psi_memo: RefCell<BTreeMap<Vec<HLetter>, Vec<(VLetter, Rat)>>>,
    q1_memo: RefCell<BTreeMap<Vec<HLetter>, Vec<(HLetter, Rat)>>>,
}

impl<'a> TransferContext<'a> {
    pub fn new(table: &'a HomotopyTable, arity_bound: usize) -> Result<Self> {
        let ctx = TransferContext {
            table,
            arity_bound,
            psi_memo: RefCell::new(BTreeMap::new()),
            q1_memo: RefCell::new(BTreeMap::new()),
        };
        ctx.validate_structure()?;
        Ok(ctx)
    }

    pub fn dimension(&self) -> usize {
        self.table.dimension()
    }

    /// Spot-check the differential graded Lie axioms through the
    /// coderivation: its square must kill small words.
    fn validate_structure(&self) -> Result<()> {
        let d = self.dimension();
        let mut letters: Vec<VLetter> = Vec::new();
        let probe = [
            PolyDiffOp::derivation(d, 0),
            PolyDiffOp::unit_word(d),
            PolyDiffOp::mu(d),
        ];
        for op in &probe {
            letters.extend(op_to_vletters(op).into_iter().map(|(l, _)| l));
        }
        for a in &letters {
            for b in &letters {
                let mut e: SymExpr<VLetter, Rat> = SymExpr::zero();
                e.add_word(vec![a.clone(), b.clone()], Rat::from_integer(1.into()));
                if e.is_zero() {
                    continue;
                }
                let q1 = self.apply_q2(&e)?;
                let q2 = self.apply_q2(&q1)?;
                if !q2.is_zero() {
                    return Err(EngineError::argument(
                        "transfer context: the structure coderivation does not square to zero",
                    ));
                }
            }
        }
        Ok(())
    }

    /// Taylor family of the structure codifferential on suspensions.
    pub fn q2_taylor(&self, args: &[VLetter]) -> Result<Vec<(VLetter, Rat)>> {
        let d = self.dimension();
        match args.len() {
            1 => {
                let op = op_from_vletters(d, &[(args[0].clone(), Rat::from_integer(1.into()))]);
                let dd = hochschild_d(&op);
                Ok(op_to_vletters(&dd.neg()))
            }
            2 => {
                let x = op_from_vletters(d, &[(args[0].clone(), Rat::from_integer(1.into()))]);
                let y = op_from_vletters(d, &[(args[1].clone(), Rat::from_integer(1.into()))]);
                let br = g_bracket(&x, &y)?;
                let sign = neg_one_pow(args[0].0 .1.len() as i64 - 1);
                Ok(op_to_vletters(&if sign < 0 { br.neg() } else { br }))
            }
            _ => Ok(vec![]),
        }
    }

    fn apply_q2(&self, e: &SymExpr<VLetter, Rat>) -> Result<SymExpr<VLetter, Rat>> {
        coderivation_apply(e, 2, &mut |args| self.q2_taylor(args))
    }

    /// Suspended homotopy: `-s H x` letterwise.
    fn h_bar(&self, letters: &[(VLetter, Rat)]) -> Result<Vec<(VLetter, Rat)>> {
        let d = self.dimension();
        let op = op_from_vletters(d, letters);
        let h = self.table.h_apply(&op)?;
        Ok(op_to_vletters(&h.neg()))
    }

    /// Taylor coefficient of the transfer morphism on a sorted tuple.
    pub fn psi_taylor(&self, args: &[HLetter]) -> Result<Vec<(VLetter, Rat)>> {
        let n = args.len();
        if n == 0 {
            return Err(EngineError::argument("psi: empty input"));
        }
        if n > self.arity_bound {
            return Err(EngineError::resource(format!(
                "psi arity {n} exceeds the configured bound {}",
                self.arity_bound
            )));
        }
        if n == 1 {
            let d = self.dimension();
            let a = polyvector_from_hletters(d, &[(args[0].clone(), Rat::from_integer(1.into()))]);
            return Ok(op_to_vletters(&hkr_i(&a)));
        }
        let key = args.to_vec();
        if let Some(v) = self.psi_memo.borrow().get(&key) {
            return Ok(v.clone());
        }
        let singles = self.pq2_psi_lower(args)?;
        let result = self.h_bar(&singles)?;
        self.psi_memo.borrow_mut().insert(key, result.clone());
        Ok(result)
    }

    /// `P Q2 psi^{<n} I_n` on a sorted tuple: the letter component of the
    /// codifferential applied to the image of the truncated morphism.
    fn pq2_psi_lower(&self, args: &[HLetter]) -> Result<Vec<(VLetter, Rat)>> {
        let n = args.len();
        let mut word: SymExpr<HLetter, Rat> = SymExpr::zero();
        word.add_word(args.to_vec(), Rat::from_integer(1.into()));
        let image = morphism_apply(&word, &mut |sub: &[HLetter]| {
            if sub.len() >= n {
                Ok(vec![])
            } else {
                self.psi_taylor(sub)
            }
        })?;
        let q = self.apply_q2(&image)?;
        let mut acc: BTreeMap<VLetter, Rat> = BTreeMap::new();
        for (l, c) in q.project_letters() {
            let slot = acc.entry(l).or_insert_with(|| Rat::from_integer(0.into()));
            *slot += c;
        }
        acc.retain(|_, c| !num_traits::Zero::is_zero(c));
        Ok(acc.into_iter().collect())
    }

    /// Taylor coefficient of the transferred structure on a sorted tuple
    /// (zero in arity one: the transferred differential vanishes).
    pub fn q1_taylor(&self, args: &[HLetter]) -> Result<Vec<(HLetter, Rat)>> {
        let n = args.len();
        if n == 0 {
            return Err(EngineError::argument("q1: empty input"));
        }
        if n > self.arity_bound {
            return Err(EngineError::resource(format!(
                "q1 arity {n} exceeds the configured bound {}",
                self.arity_bound
            )));
        }
        if n == 1 {
            return Ok(vec![]);
        }
        let key = args.to_vec();
        if let Some(v) = self.q1_memo.borrow().get(&key) {
            return Ok(v.clone());
        }
        let singles = self.pq2_psi_lower(args)?;
        let d = self.dimension();
        let op = op_from_vletters(d, &singles);
        let pv = hkr_p(&op);
        let result = polyvector_letters(&pv);
        self.q1_memo.borrow_mut().insert(key, result.clone());
        Ok(result)
    }

    /// Evaluate the n-th Taylor coefficient of the transfer morphism on
    /// ordered poly-vector inputs (multilinear expansion with Koszul
    /// reordering).
    pub fn psi_eval(&self, n: usize, inputs: &[PolyVector<Rat>]) -> Result<PolyDiffOp<Rat>> {
        if inputs.len() != n {
            return Err(EngineError::argument(format!(
                "psi_eval: expected {n} inputs, got {}",
                inputs.len()
            )));
        }
        let d = self.dimension();
        let mut word: SymExpr<HLetter, Rat> = SymExpr::zero();
        word.add_word(vec![], Rat::from_integer(1.into()));
        for a in inputs {
            let mut letter_expr: SymExpr<HLetter, Rat> = SymExpr::zero();
            for (l, c) in polyvector_letters(a) {
                letter_expr.add_word(vec![l], c);
            }
            word = word.mul(&letter_expr);
        }
        let mut out = PolyDiffOp::zero(d);
        for (w, c) in &word.terms {
            for (l, v) in self.psi_taylor(w)? {
                out.add_term(l.0 .0.clone(), l.0 .1.clone(), c * &v);
            }
        }
        Ok(out)
    }

    /// Evaluate the n-th Taylor coefficient of the transferred minimal
    /// structure in the bracket normalization
    /// `l^n(a_1..a_n) = (-1)^{n + (n-1)|a_1| + ... + |a_{n-1}|} Q1^n(s a_1 ... s a_n)`,
    /// so that arity two reproduces the Schouten bracket exactly.
    pub fn q1_eval(&self, n: usize, inputs: &[PolyVector<Rat>]) -> Result<PolyVector<Rat>> {
        if inputs.len() != n {
            return Err(EngineError::argument(format!(
                "q1_eval: expected {n} inputs, got {}",
                inputs.len()
            )));
        }
        let d = self.dimension();
        let letter_lists: Vec<Vec<(HLetter, Rat)>> =
            inputs.iter().map(polyvector_letters).collect();
        let mut out = PolyVector::zero(d);
        let mut tuple: Vec<(HLetter, Rat)> = Vec::with_capacity(n);
        self.q1_eval_rec(n, &letter_lists, &mut tuple, &mut out)?;
        Ok(out)
    }

    fn q1_eval_rec(
        &self,
        n: usize,
        letter_lists: &[Vec<(HLetter, Rat)>],
        tuple: &mut Vec<(HLetter, Rat)>,
        out: &mut PolyVector<Rat>,
    ) -> Result<()> {
        if tuple.len() == n {
            // decalage sign over the ordered tuple
            let mut exp = n as i64;
            for (k, (l, _)) in tuple.iter().enumerate() {
                exp += (n as i64 - 1 - k as i64) * l.shifted_degree();
            }
            let mut word: SymExpr<HLetter, Rat> = SymExpr::zero();
            let mut coeff = Rat::from_integer(1.into());
            for (_, c) in tuple.iter() {
                coeff *= c;
            }
            if neg_one_pow(exp) < 0 {
                coeff = -coeff;
            }
            word.add_word(tuple.iter().map(|(l, _)| l.clone()).collect(), coeff);
            for (w, c) in &word.terms {
                for (l, v) in self.q1_taylor(w)? {
                    out.add_term(l.0 .0.clone(), l.0 .1.clone(), c * &v);
                }
            }
            return Ok(());
        }
        let k = tuple.len();
        for (l, c) in &letter_lists[k] {
            tuple.push((l.clone(), c.clone()));
            self.q1_eval_rec(n, letter_lists, tuple, out)?;
            tuple.pop();
        }
        Ok(())
    }

    /// Verify the transfer identities at one arity over the given sample
    /// tuples: the morphism identity `P Q2 psi I_n = P psi Q1 I_n` and the
    /// square `P Q1 Q1 I_{n+1} = 0` (fed with (n+1)-tuples built from the
    /// samples by repeating the last letter family).
    pub fn check_transfer(&self, n: usize, samples: &[Vec<HLetter>]) -> Result<TransferReport> {
        let mut report = TransferReport {
            arity: n,
            samples: samples.len(),
            morphism_failures: 0,
            square_failures: 0,
            no_coverage: samples.is_empty(),
        };
        for tuple in samples {
            if tuple.len() != n + 1 && tuple.len() != n {
                return Err(EngineError::argument(format!(
                    "check_transfer: sample has {} letters, expected {n} or {}",
                    tuple.len(),
                    n + 1
                )));
            }
        }
        for tuple in samples.iter().filter(|t| t.len() == n) {
            if !self.morphism_identity_holds(tuple)? {
                report.morphism_failures += 1;
            }
        }
        for tuple in samples.iter().filter(|t| t.len() == n + 1) {
            if !self.square_identity_holds(tuple)? {
                report.square_failures += 1;
            }
        }
        Ok(report)
    }

    /// `P Q2 psi I_n = P psi Q1 I_n` on one letter tuple.
    pub fn morphism_identity_holds(&self, tuple: &[HLetter]) -> Result<bool> {
        let n = tuple.len();
        let mut word: SymExpr<HLetter, Rat> = SymExpr::zero();
        word.add_word(tuple.to_vec(), Rat::from_integer(1.into()));
        if word.is_zero() {
            return Ok(true);
        }
        // left side: full psi (Taylor up to n), then Q2, project
        let image = morphism_apply(&word, &mut |sub: &[HLetter]| self.psi_taylor(sub))?;
        let q = self.apply_q2(&image)?;
        let mut lhs: BTreeMap<VLetter, Rat> = BTreeMap::new();
        for (l, c) in q.project_letters() {
            *lhs.entry(l).or_insert_with(|| Rat::from_integer(0.into())) += c;
        }
        // right side: Q1 as coderivation, then psi, project
        let q1d = coderivation_apply(&word, n, &mut |args| self.q1_taylor(args))?;
        let psi_q1 = morphism_apply(&q1d, &mut |sub: &[HLetter]| self.psi_taylor(sub))?;
        for (l, c) in psi_q1.project_letters() {
            *lhs.entry(l).or_insert_with(|| Rat::from_integer(0.into())) -= c;
        }
        Ok(lhs.values().all(num_traits::Zero::is_zero))
    }

    /// `P Q1 Q1 I_{n+1} = 0` on one letter tuple.
    pub fn square_identity_holds(&self, tuple: &[HLetter]) -> Result<bool> {
        let max_arity = tuple.len().saturating_sub(1).max(2);
        let mut word: SymExpr<HLetter, Rat> = SymExpr::zero();
        word.add_word(tuple.to_vec(), Rat::from_integer(1.into()));
        if word.is_zero() {
            return Ok(true);
        }
        let once = coderivation_apply(&word, max_arity, &mut |args| self.q1_taylor(args))?;
        let twice = coderivation_apply(&once, max_arity, &mut |args| self.q1_taylor(args))?;
        let mut acc: BTreeMap<HLetter, Rat> = BTreeMap::new();
        for (l, c) in twice.project_letters() {
            *acc.entry(l).or_insert_with(|| Rat::from_integer(0.into())) += c;
        }
        Ok(acc.values().all(num_traits::Zero::is_zero))
    }

    // -----------------------------------------------------------------
    // Planar tree expansion (cross-check oracle)
    // -----------------------------------------------------------------

    /// Evaluate one planar tree on letters in leaf order: `i` at the
    /// leaves, the Taylor family at the vertices, the suspended homotopy
    /// on internal edges. The root is left open (no homotopy applied);
    /// callers close it with the homotopy (psi) or the projection (Q1).
    fn tree_eval_open(&self, tree: &PlanarTree, letters: &[HLetter]) -> Result<Vec<(VLetter, Rat)>> {
        match tree {
            PlanarTree::Leaf(idx) => {
                let d = self.dimension();
                let a = polyvector_from_hletters(
                    d,
                    &[(letters[*idx - 1].clone(), Rat::from_integer(1.into()))],
                );
                Ok(op_to_vletters(&hkr_i(&a)))
            }
            PlanarTree::Node(children) => {
                if children.len() != 2 {
                    // vertices of arity three and higher carry the zero
                    // operation for this structure
                    return Ok(vec![]);
                }
                let left = self.tree_eval_closed(&children[0], letters)?;
                let right = self.tree_eval_closed(&children[1], letters)?;
                let mut acc: BTreeMap<VLetter, Rat> = BTreeMap::new();
                for (l1, c1) in &left {
                    for (l2, c2) in &right {
                        // feed the ordered pair through the symmetric word
                        let mut e: SymExpr<VLetter, Rat> = SymExpr::zero();
                        e.add_word(vec![l1.clone(), l2.clone()], c1 * c2);
                        for (w, c) in &e.terms {
                            for (l, v) in self.q2_taylor(w)? {
                                *acc.entry(l).or_insert_with(|| Rat::from_integer(0.into())) +=
                                    c * &v;
                            }
                        }
                    }
                }
                acc.retain(|_, c| !num_traits::Zero::is_zero(c));
                Ok(acc.into_iter().collect())
            }
        }
    }

    /// Tree value with the homotopy applied at the root (the form used on
    /// internal edges and for the psi-decorated trees).
    fn tree_eval_closed(&self, tree: &PlanarTree, letters: &[HLetter]) -> Result<Vec<(VLetter, Rat)>> {
        match tree {
            PlanarTree::Leaf(_) => self.tree_eval_open(tree, letters),
            PlanarTree::Node(_) => {
                let open = self.tree_eval_open(tree, letters)?;
                self.h_bar(&open)
            }
        }
    }

    /// Tree-sum evaluation of `psi^n` (cross-check): symmetrize over the
    /// inputs with Koszul signs, weight each planar tree by `1/w_T`.
    pub fn psi_tree_sum(
        &self,
        n: usize,
        letters: &[HLetter],
        binary_only: bool,
        tree_bound: usize,
    ) -> Result<Vec<(VLetter, Rat)>> {
        let trees = enumerate_trees(n, tree_bound)?;
        let mut acc: BTreeMap<VLetter, Rat> = BTreeMap::new();
        let perms = permutations_with_koszul(letters);
        for tree in &trees {
            if binary_only && !tree.is_binary() {
                continue;
            }
            if matches!(tree, PlanarTree::Leaf(_)) && n > 1 {
                continue;
            }
            let weight = Rat::new(1.into(), tree_weight(tree));
            for (perm_letters, sign) in &perms {
                let value = if n == 1 {
                    self.tree_eval_open(tree, perm_letters)?
                } else {
                    self.tree_eval_closed(tree, perm_letters)?
                };
                for (l, c) in value {
                    let mut v = c * &weight;
                    if *sign < 0 {
                        v = -v;
                    }
                    *acc.entry(l).or_insert_with(|| Rat::from_integer(0.into())) += v;
                }
            }
        }
        acc.retain(|_, c| !num_traits::Zero::is_zero(c));
        Ok(acc.into_iter().collect())
    }
}

/// Vanishing report for insertions of vector fields: evaluates the
/// transfer coefficient on each tuple and counts the exactly-zero
/// outcomes. The arity-two case with a vector field among the inputs is
/// guaranteed (the operator bracket against the lift of a vector field is
/// the lift of the bracket, which the homotopy kills); higher arities
/// depend on equivariance properties of the homotopy that are not
/// enforced, so the outcome is reported rather than asserted.
#[derive(Debug, Clone)]
pub struct InsertionReport {
    pub arity: usize,
    pub vanished: usize,
    pub total: usize,
}

impl TransferContext<'_> {
    pub fn derivation_insertion_report(
        &self,
        n: usize,
        tuples: &[Vec<PolyVector<Rat>>],
    ) -> Result<InsertionReport> {
        let mut vanished = 0usize;
        for tuple in tuples {
            if self.psi_eval(n, tuple)?.is_zero() {
                vanished += 1;
            }
        }
        Ok(InsertionReport {
            arity: n,
            vanished,
            total: tuples.len(),
        })
    }
}

/// All permutations of the letters with the Koszul sign of the
/// rearrangement (suspended degrees).
fn permutations_with_koszul(letters: &[HLetter]) -> Vec<(Vec<HLetter>, i32)> {
    let n = letters.len();
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..n).collect();
    loop {
        // Koszul sign of reordering letters into idx order
        let mut sign = 0i64;
        for a in 0..n {
            for b in (a + 1)..n {
                if idx[a] > idx[b] {
                    sign += letters[idx[a]].suspended_degree() * letters[idx[b]].suspended_degree();
                }
            }
        }
        out.push((
            idx.iter().map(|&i| letters[i].clone()).collect(),
            neg_one_pow(sign),
        ));
        // next permutation in lexicographic order
        let mut i = n.wrapping_sub(1);
        while i > 0 && idx[i - 1] >= idx[i] {
            i -= 1;
        }
        if i == 0 {
            break;
        }
        let mut j = n - 1;
        while idx[j] <= idx[i - 1] {
            j -= 1;
        }
        idx.swap(i - 1, j);
        idx[i..].reverse();
    }
    out
}
