//! The antisymmetrization quasi-isomorphism between poly-vector fields and
//! poly-differential operators, its one-sided inverse, and an explicit
//! chain homotopy.
//!
//! The maps are built on the constant-coefficient subcomplex (words with
//! trivial polynomial coefficient) and extended linearly over the
//! coefficient ring; the Hochschild differential does not touch the left
//! coefficient, so the extension is a chain map for free.
//!
//! The constant-coefficient complex splits into finite-dimensional blocks
//! indexed by word length and the total multi-index of the slots. On each
//! block the homotopy is produced by exact linear solves with a fixed
//! pivot rule, so repeated runs give identical tables. Blocks refine the
//! total order by multidegree, which makes the homotopy equivariant for
//! the torus action automatically; full linear-group equivariance of `H`
//! is not enforced.
//!
//! Identities maintained (exactly, per block):
//! `p i = id`, `H i = 0`, `p Q^1 = 0`, `i p - id = Q^1 H + H Q^1`.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::rc::Rc;

use crate::error::{EngineError, Result};
use crate::linalg::SparseMat;
use crate::polydiff::{hochschild_d, DiffWord, PolyDiffOp};
use crate::polyvector::{Monomial, PolyVector};
use crate::scalar::{inv_factorial, Rat, Scalar};

/// Block address in the constant-coefficient complex: word length and
/// total order of the slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Bidegree {
    pub word_length: usize,
    pub total_order: u32,
}

/// Antisymmetrization map: `f d_{s_1}^...^d_{s_n}` goes to
/// `f (1/n!) sum_s sgn(s) d_{s(1)} (x) ... (x) d_{s(n)}`. A chain map into
/// the Hochschild complex (derivation words are cocycles), with `p i = id`.
pub fn hkr_i<S: Scalar>(a: &PolyVector<S>) -> PolyDiffOp<S> {
    let d = a.dimension();
    let mut out = PolyDiffOp::zero(d);
    for ((mono, wedge), c) in a.terms() {
        let n = wedge.len();
        let norm = inv_factorial(n);
        permute_with_sign(wedge, &mut |perm, sign| {
            let word: DiffWord = perm
                .iter()
                .map(|&s| {
                    let mut slot = Monomial::one(d);
                    slot.0[s] = 1;
                    slot
                })
                .collect();
            let mut coeff = c.scale(&norm);
            if sign < 0 {
                coeff = coeff.neg_ref();
            }
            out.add_term(mono.clone(), word, coeff);
        });
    }
    out
}

/// Projection onto wedges: kills every word containing a slot of order
/// other than one, and wedges the surviving slot indices (zero on repeats).
pub fn hkr_p<S: Scalar>(op: &PolyDiffOp<S>) -> PolyVector<S> {
    let d = op.dimension();
    let mut out = PolyVector::zero(d);
    'terms: for ((mono, word), c) in op.terms() {
        let mut indices = Vec::with_capacity(word.len());
        for slot in word {
            if slot.degree() != 1 {
                continue 'terms;
            }
            indices.push(slot.0.iter().position(|&e| e == 1).unwrap());
        }
        // sort with sign; repeated index kills the term
        let mut sign = 1i32;
        let mut sorted = indices.clone();
        for i in 1..sorted.len() {
            let mut j = i;
            while j > 0 && sorted[j - 1] > sorted[j] {
                sorted.swap(j - 1, j);
                sign = -sign;
                j -= 1;
            }
        }
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            continue;
        }
        let coeff = if sign < 0 { c.neg_ref() } else { c.clone() };
        out.add_term(mono.clone(), sorted, coeff);
    }
    out
}

fn permute_with_sign(items: &[usize], f: &mut impl FnMut(&[usize], i32)) {
    let mut perm: Vec<usize> = items.to_vec();
    fn rec(perm: &mut Vec<usize>, k: usize, sign: i32, f: &mut impl FnMut(&[usize], i32)) {
        if k == perm.len() {
            f(perm, sign);
            return;
        }
        for i in k..perm.len() {
            let s = if i == k { sign } else { -sign };
            perm.swap(k, i);
            rec(perm, k + 1, s, f);
            perm.swap(k, i);
        }
    }
    rec(&mut perm, 0, 1, f);
}

/// Per-block data of the memoized homotopy.
struct BlockData {
    basis: Rc<Vec<DiffWord>>,
    /// Differential out of this block, in word coordinates.
    d_mat: Rc<SparseMat>,
    /// Basis of ker(p) on this block, one column per kernel vector.
    kerp: Rc<SparseMat>,
    /// Indices (into the kerp columns) spanning a complement of
    /// ker(d) inside ker(p).
    v_cols: Rc<Vec<usize>>,
    /// Homotopy block: matrix from this block to word length minus one.
    h_mat: Rc<SparseMat>,
}

/// Memoized blockwise homotopy table for a fixed dimension and bounds.
///
/// The cache is not synchronized: either precompute the blocks you need
/// (`build_block`) before sharing, or keep one table per thread.
pub struct HomotopyTable {
    d: usize,
    max_word_length: usize,
    max_total_order: u32,
    blocks: RefCell<BTreeMap<(usize, Monomial), Rc<BlockData>>>,
}

impl HomotopyTable {
    pub fn new(d: usize, max_word_length: usize, max_total_order: u32) -> Self {
        HomotopyTable {
            d,
            max_word_length,
            max_total_order,
            blocks: RefCell::new(BTreeMap::new()),
        }
    }

    pub fn dimension(&self) -> usize {
        self.d
    }

    fn check_bounds(&self, n: usize, u: &Monomial) -> Result<()> {
        if n > self.max_word_length + 1 || u.degree() > self.max_total_order {
            return Err(EngineError::resource(format!(
                "homotopy block (n={n}, |u|={}) outside configured bounds (word length <= {}, total order <= {})",
                u.degree(),
                self.max_word_length,
                self.max_total_order
            )));
        }
        Ok(())
    }

    /// Basis words of the block: all ordered splittings of the multidegree
    /// into `n` slots.
    pub fn block_basis(&self, n: usize, u: &Monomial) -> Vec<DiffWord> {
        block_basis_words(n, u)
    }

    fn block(&self, n: usize, u: &Monomial) -> Result<Rc<BlockData>> {
        self.check_bounds(n, u)?;
        if let Some(b) = self.blocks.borrow().get(&(n, u.clone())) {
            return Ok(b.clone());
        }
        let data = Rc::new(self.build_block_data(n, u)?);
        self.blocks
            .borrow_mut()
            .insert((n, u.clone()), data.clone());
        Ok(data)
    }

    fn build_block_data(&self, n: usize, u: &Monomial) -> Result<BlockData> {
        let d = self.d;
        let basis = Rc::new(block_basis_words(n, u));
        let target = block_basis_words(n + 1, u);
        let mut d_mat = SparseMat::zero(target.len(), basis.len());
        for (j, w) in basis.iter().enumerate() {
            let op = PolyDiffOp::single(d, (Monomial::one(d), w.clone()), Rat::from_integer(1.into()));
            let dd = hochschild_d(&op);
            for ((mono, word), c) in dd.terms() {
                debug_assert_eq!(mono, &Monomial::one(d));
                let i = target
                    .binary_search(word)
                    .expect("differential leaves the column");
                d_mat.add_to(i, j, c);
            }
        }
        // ker(p) on this block
        let mut p_rows: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
        let mut p_entries: Vec<(usize, usize, Rat)> = Vec::new();
        for (j, w) in basis.iter().enumerate() {
            let op = PolyDiffOp::single(d, (Monomial::one(d), w.clone()), Rat::from_integer(1.into()));
            let pv = hkr_p(&op);
            for ((_, wedge), c) in pv.terms() {
                let next = p_rows.len();
                let row = *p_rows.entry(wedge.clone()).or_insert(next);
                p_entries.push((row, j, c.clone()));
            }
        }
        let p_mat = SparseMat::from_rows(p_rows.len(), basis.len(), &p_entries);
        let kerp_vecs = p_mat.kernel_basis();
        let mut kerp = SparseMat::zero(basis.len(), kerp_vecs.len());
        for (j, v) in kerp_vecs.iter().enumerate() {
            for (i, x) in v.iter().enumerate() {
                kerp.set(i, j, x.clone());
            }
        }
        // complement of ker(d) inside ker(p): pivot columns of d
        // restricted to the kernel coordinates
        let d_on_k = d_mat.mul_mat(&kerp);
        let v_cols = {
            let mut m = d_on_k.clone();
            m.rref_in_place()
        };

        // homotopy into word length n-1 (zero when n = 0)
        let h_mat = if n == 0 {
            SparseMat::zero(0, basis.len())
        } else {
            self.solve_h_block(n, u, &basis, &kerp, &v_cols)?
        };

        Ok(BlockData {
            basis,
            d_mat: Rc::new(d_mat),
            kerp: Rc::new(kerp),
            v_cols: Rc::new(v_cols),
            h_mat: Rc::new(h_mat),
        })
    }

    /// Solve for the homotopy on one block: `H = -h (id - i p)` where `h`
    /// inverts the differential of the exact complex ker(p).
    fn solve_h_block(
        &self,
        n: usize,
        u: &Monomial,
        basis: &[DiffWord],
        kerp: &SparseMat,
        v_cols: &[usize],
    ) -> Result<SparseMat> {
        let d = self.d;
        let below = self.block(n - 1, u)?;
        let basis_below = below.basis.clone();
        let d_below = below.d_mat.clone();
        let kerp_below = below.kerp.clone();
        let v_below = below.v_cols.clone();

        // columns: d(K_{n-1} V-columns) then (K_n V-columns); every vector
        // of ker(p) at block n decomposes uniquely along them
        let dkv = d_below.mul_mat(&kerp_below);
        let mut sys = SparseMat::zero(basis.len(), v_below.len() + v_cols.len());
        for (col, &kv) in v_below.iter().enumerate() {
            for i in 0..basis.len() {
                let val = dkv.get(i, kv);
                sys.set(i, col, val);
            }
        }
        for (col, &kv) in v_cols.iter().enumerate() {
            for i in 0..basis.len() {
                let val = kerp.get(i, kv);
                sys.set(i, v_below.len() + col, val);
            }
        }

        // all right-hand sides at once: r_j = (id - i p)(e_j)
        let one = Rat::from_integer(1.into());
        let rhs_cols: Vec<Vec<Rat>> = basis
            .iter()
            .enumerate()
            .map(|(j, w)| {
                let op = PolyDiffOp::single(d, (Monomial::one(d), w.clone()), one.clone());
                let ip = hkr_i(&hkr_p(&op));
                let mut r = vec![Rat::from_integer(0.into()); basis.len()];
                r[j] = one.clone();
                for ((mono, word), c) in ip.terms() {
                    debug_assert_eq!(mono, &Monomial::one(d));
                    let i = basis.binary_search(word).expect("i p stays in the block");
                    r[i] = &r[i] - c;
                }
                r
            })
            .collect();
        let sols = crate::linalg::solve_columns(&sys, &rhs_cols)?.ok_or_else(|| {
            EngineError::Argument(format!(
                "homotopy block (n={n}, u={:?}): decomposition failed; \
                 the block does not satisfy the expected exactness",
                u.0
            ))
        })?;
        // H e_j = -(K_{n-1} V-part of the solution column)
        let mut h = SparseMat::zero(basis_below.len(), basis.len());
        for j in 0..basis.len() {
            for (col, &kv) in v_below.iter().enumerate() {
                let z = sols.get(col, j);
                if num_traits::Zero::is_zero(&z) {
                    continue;
                }
                for i in 0..basis_below.len() {
                    let val = kerp_below.get(i, kv);
                    if !num_traits::Zero::is_zero(&val) {
                        h.add_to(i, j, &(-(&val * &z)));
                    }
                }
            }
        }
        Ok(h)
    }

    /// Force construction of one block (useful to precompute before
    /// sharing the table). Returns the block dimensions
    /// (rows of `H`, columns of `H`).
    pub fn build_block(&self, n: usize, u: &Monomial) -> Result<(usize, usize)> {
        let b = self.block(n, u)?;
        Ok((b.h_mat.rows(), b.h_mat.cols()))
    }

    /// Apply the homotopy to an operator, block by block.
    pub fn h_apply<S: Scalar>(&self, op: &PolyDiffOp<S>) -> Result<PolyDiffOp<S>> {
        let d = self.d;
        let mut out = PolyDiffOp::zero(d);
        for ((mono, word), c) in op.terms() {
            let n = word.len();
            if n == 0 {
                continue; // H vanishes on the scalar part
            }
            let u = word_multidegree(word, d);
            let block = self.block(n, &u)?;
            let j = block
                .basis
                .binary_search(word)
                .expect("word is a basis element of its block");
            let below = self.block(n - 1, &u)?;
            for i in 0..below.basis.len() {
                let v = block.h_mat.get(i, j);
                if num_traits::Zero::is_zero(&v) {
                    continue;
                }
                out.add_term(mono.clone(), below.basis[i].clone(), c.scale(&v));
            }
        }
        Ok(out)
    }

    /// Exact residuals of the defining identities on one block; all three
    /// must be zero matrices. Returns (pi - id, H i, (ip - id) - (dH + Hd)).
    pub fn block_identity_residuals(
        &self,
        n: usize,
        u: &Monomial,
    ) -> Result<(SparseMat, SparseMat, SparseMat)> {
        let d = self.d;
        let block = self.block(n, u)?;
        let basis = block.basis.clone();

        // p then i on the block, in word coordinates
        let mut ip = SparseMat::zero(basis.len(), basis.len());
        // wedge-coordinate images for pi - id on the wedge side
        for (j, w) in basis.iter().enumerate() {
            let op = PolyDiffOp::single(d, (Monomial::one(d), w.clone()), Rat::from_integer(1.into()));
            let v = hkr_i(&hkr_p(&op));
            for ((_, word), c) in v.terms() {
                let i = basis.binary_search(word).unwrap();
                ip.add_to(i, j, c);
            }
        }

        // pi - id on the wedge block of the same bidegree
        let wedges = wedge_basis(d, n, u);
        let mut pi_minus_id = SparseMat::zero(wedges.len(), wedges.len());
        for (j, wset) in wedges.iter().enumerate() {
            let a: PolyVector<Rat> = PolyVector::from_terms(
                d,
                vec![(Monomial::one(d), wset.clone(), Rat::from_integer(1.into()))],
            );
            let back = hkr_p(&hkr_i(&a));
            for ((_, wset2), c) in back.terms() {
                let i = wedges.iter().position(|x| x == wset2).unwrap();
                pi_minus_id.add_to(i, j, c);
            }
            pi_minus_id.add_to(j, j, &-Rat::from_integer(1.into()));
        }

        // H i on the wedge block
        let below_len = block_basis_words(n.wrapping_sub(1).min(n), u).len();
        let mut hi = SparseMat::zero(if n == 0 { 0 } else { below_len }, wedges.len());
        if n > 0 {
            for (j, wset) in wedges.iter().enumerate() {
                let a: PolyVector<Rat> = PolyVector::from_terms(
                    d,
                    vec![(Monomial::one(d), wset.clone(), Rat::from_integer(1.into()))],
                );
                let v = self.h_apply(&hkr_i(&a))?;
                for ((_, word), c) in v.terms() {
                    let below = self.block(n - 1, u)?;
                    let i = below.basis.binary_search(word).unwrap();
                    hi.add_to(i, j, c);
                }
            }
        }

        // (ip - id) - (dH + Hd)
        let mut homotopy_res = ip;
        for j in 0..basis.len() {
            homotopy_res.add_to(j, j, &-Rat::from_integer(1.into()));
        }
        // minus d H
        if n > 0 {
            let below = self.block(n - 1, u)?;
            let dh = below.d_mat.mul_mat(&block.h_mat);
            homotopy_res = homotopy_res.add_mat(&dh.scale(&-Rat::from_integer(1.into())));
        }
        // minus H d
        let above = self.block(n + 1, u)?;
        let hd = above.h_mat.mul_mat(&block.d_mat);
        homotopy_res = homotopy_res.add_mat(&hd.scale(&-Rat::from_integer(1.into())));

        Ok((pi_minus_id, hi, homotopy_res))
    }

    /// Exact cohomology dimension of the constant-coefficient block at
    /// word length `n` and total order `w` (summed over all multidegrees
    /// of that order).
    pub fn cohomology_dims(&self, n: usize, w: u32) -> Result<usize> {
        let mut total = 0usize;
        for u in multidegrees_of_order(self.d, w) {
            let block = self.block(n, &u)?;
            let dim = block.basis.len();
            let rank_out = block.d_mat.rank();
            let rank_in = if n == 0 {
                0
            } else {
                self.block(n - 1, &u)?.d_mat.rank()
            };
            total += dim - rank_out - rank_in;
        }
        Ok(total)
    }

    /// Export every built block's homotopy matrix (dense, as `p/q`
    /// strings) for golden-file comparisons.
    pub fn export_blocks(&self) -> Vec<((usize, Vec<u32>), Vec<Vec<String>>)> {
        self.blocks
            .borrow()
            .iter()
            .map(|((n, u), b)| {
                let dense = b
                    .h_mat
                    .to_dense()
                    .into_iter()
                    .map(|row| row.into_iter().map(|x| crate::scalar::rat_to_string(&x)).collect())
                    .collect();
                ((*n, u.0.clone()), dense)
            })
            .collect()
    }
}

/// All words of length `n` with the given total multidegree, sorted.
fn block_basis_words(n: usize, u: &Monomial) -> Vec<DiffWord> {
    let mut words: Vec<DiffWord> = crate::polydiff::multi_splits(u, n)
        .into_iter()
        .map(|(parts, _)| parts)
        .collect();
    words.sort();
    words.dedup();
    words
}

fn word_multidegree(word: &DiffWord, d: usize) -> Monomial {
    let mut u = Monomial::one(d);
    for slot in word {
        u = u.mul(slot);
    }
    u
}

/// Wedge sets of size `n` whose index multiset matches the multidegree
/// (at most one; requires `u` to be square-free of total order `n`).
fn wedge_basis(d: usize, n: usize, u: &Monomial) -> Vec<Vec<usize>> {
    let _ = d;
    if u.degree() as usize != n || u.0.iter().any(|&e| e > 1) {
        return Vec::new();
    }
    let set: Vec<usize> = u
        .0
        .iter()
        .enumerate()
        .filter_map(|(i, &e)| (e == 1).then_some(i))
        .collect();
    vec![set]
}

/// All multidegrees of the given total order.
fn multidegrees_of_order(d: usize, w: u32) -> Vec<Monomial> {
    fn rec(d: usize, w: u32, prefix: &mut Vec<u32>, out: &mut Vec<Monomial>) {
        if prefix.len() == d - 1 {
            let mut v = prefix.clone();
            v.push(w);
            out.push(Monomial(v));
            return;
        }
        for e in 0..=w {
            prefix.push(e);
            rec(d, w - e, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if d == 0 {
        return out;
    }
    rec(d, w, &mut Vec::new(), &mut out);
    out
}

/// Expected cohomology dimension under the antisymmetrization theorem:
/// the exterior-power block `C(d, n)` in weight `w = n`, zero otherwise.
pub fn expected_exterior_dim(d: usize, n: usize, w: u32) -> usize {
    if w as usize != n || n > d {
        return 0;
    }
    let mut num = 1usize;
    let mut den = 1usize;
    for i in 0..n {
        num *= d - i;
        den *= i + 1;
    }
    num / den
}
