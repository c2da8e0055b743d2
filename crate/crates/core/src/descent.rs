//! Descent along derivation actions on finitely-truncated graded modules.
//!
//! An action is a family of degree -1 operators `i_s`; each induces
//! `L_s = d i_s + i_s d`, and the fixed subspace is the joint kernel
//! `V^S = { v : i_s v = L_s v = 0 for all s }`, computed blockwise by
//! exact kernels. The returned subspace is checked to be closed under the
//! declared operations. Only finite truncations are supported, so every
//! kernel is an exact finite computation.

use std::collections::BTreeMap;

use crate::error::{EngineError, Result};
use crate::linalg::{solve_columns, SparseMat};
use crate::scalar::Rat;
use crate::sign::neg_one_pow;

/// Dimensions of a graded module, block by block (missing blocks are
/// zero).
#[derive(Debug, Clone, PartialEq)]
pub struct GradedModule {
    pub dims: BTreeMap<i64, usize>,
}

impl GradedModule {
    pub fn dim(&self, q: i64) -> usize {
        self.dims.get(&q).copied().unwrap_or(0)
    }

    pub fn degrees(&self) -> impl Iterator<Item = i64> + '_ {
        self.dims.keys().copied()
    }
}

/// Homogeneous block operator of a fixed degree shift: one exact matrix
/// per source block.
#[derive(Debug, Clone)]
pub struct BlockOperator {
    pub shift: i64,
    pub mats: BTreeMap<i64, SparseMat>,
}

impl BlockOperator {
    pub fn zero(shift: i64) -> Self {
        BlockOperator {
            shift,
            mats: BTreeMap::new(),
        }
    }

    pub fn block(&self, q: i64, module: &GradedModule) -> SparseMat {
        match self.mats.get(&q) {
            Some(m) => m.clone(),
            None => SparseMat::zero(module.dim(q + self.shift), module.dim(q)),
        }
    }

    /// Composition `self . other` (apply `other` first).
    pub fn compose(&self, other: &BlockOperator, module: &GradedModule) -> BlockOperator {
        let mut mats = BTreeMap::new();
        for q in module.degrees() {
            let first = other.block(q, module);
            let second = self.block(q + other.shift, module);
            let prod = second.mul_mat(&first);
            if !prod.is_zero() {
                mats.insert(q, prod);
            }
        }
        BlockOperator {
            shift: self.shift + other.shift,
            mats,
        }
    }

    pub fn add(&self, other: &BlockOperator, module: &GradedModule) -> BlockOperator {
        assert_eq!(self.shift, other.shift, "shift mismatch");
        let mut mats = BTreeMap::new();
        for q in module.degrees() {
            let sum = self.block(q, module).add_mat(&other.block(q, module));
            if !sum.is_zero() {
                mats.insert(q, sum);
            }
        }
        BlockOperator {
            shift: self.shift,
            mats,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.mats.values().all(SparseMat::is_zero)
    }
}

/// `L_s = d i_s + i_s d` as exact block matrices.
pub fn lie_operator(
    i_s: &BlockOperator,
    differential: &BlockOperator,
    module: &GradedModule,
) -> Result<BlockOperator> {
    if i_s.shift != -1 || differential.shift != 1 {
        return Err(EngineError::argument(
            "lie_operator: contraction must have degree -1 and the differential degree +1",
        ));
    }
    Ok(differential
        .compose(i_s, module)
        .add(&i_s.compose(differential, module), module))
}

/// Per-degree bases of the fixed subspace `V^S`.
pub type FixedBasis = BTreeMap<i64, Vec<Vec<Rat>>>;

/// Joint kernel of all contractions and their induced operators.
pub fn fixed_subspace(
    module: &GradedModule,
    actions: &[BlockOperator],
    differential: &BlockOperator,
) -> Result<FixedBasis> {
    let mut lies = Vec::with_capacity(actions.len());
    for a in actions {
        lies.push(lie_operator(a, differential, module)?);
    }
    let mut out = FixedBasis::new();
    for q in module.degrees() {
        let dim = module.dim(q);
        if dim == 0 {
            continue;
        }
        // stack i_s and L_s blocks vertically
        let mut rows = 0usize;
        let mut stacked_parts: Vec<SparseMat> = Vec::new();
        for (a, l) in actions.iter().zip(&lies) {
            let ab = a.block(q, module);
            let lb = l.block(q, module);
            rows += ab.rows() + lb.rows();
            stacked_parts.push(ab);
            stacked_parts.push(lb);
        }
        let mut stacked = SparseMat::zero(rows, dim);
        let mut offset = 0usize;
        for part in stacked_parts {
            for r in 0..part.rows() {
                for (c, v) in part.row(r) {
                    stacked.set(offset + r, *c, v.clone());
                }
            }
            offset += part.rows();
        }
        let kernel = if actions.is_empty() {
            SparseMat::identity(dim)
                .to_dense()
                .into_iter()
                .collect::<Vec<_>>()
        } else {
            stacked.kernel_basis()
        };
        out.insert(q, kernel);
    }
    Ok(out)
}

/// True when the vector lies in the span of the basis (exact solve).
pub fn in_span(basis: &[Vec<Rat>], v: &[Rat]) -> Result<bool> {
    if v.iter().all(num_traits::Zero::is_zero) {
        return Ok(true);
    }
    if basis.is_empty() {
        return Ok(false);
    }
    let dim = v.len();
    let mut m = SparseMat::zero(dim, basis.len());
    for (j, b) in basis.iter().enumerate() {
        for (i, x) in b.iter().enumerate() {
            m.set(i, j, x.clone());
        }
    }
    Ok(solve_columns(&m, &[v.to_vec()])?.is_some())
}

// ---------------------------------------------------------------------------
// Toy example: the differential forms of a matrix algebra acting on a
// truncated polynomial module, with contractions by algebra elements.
// ---------------------------------------------------------------------------

/// Chevalley-Eilenberg type complex `Wedge(g*) (x) M` for a finite
/// dimensional Lie algebra with structure constants `c[i][j] = [e_i, e_j]`
/// and a module action `rho[i]`, together with the contractions by basis
/// elements. Degrees run 0..=dim(g).
pub struct CartanComplex {
    pub lie_dim: usize,
    pub module_dim: usize,
    pub bracket: Vec<Vec<Vec<Rat>>>,
    pub action: Vec<SparseMat>,
}

impl CartanComplex {
    pub fn module(&self) -> GradedModule {
        let mut dims = BTreeMap::new();
        for q in 0..=self.lie_dim {
            dims.insert(q as i64, binomial(self.lie_dim, q) * self.module_dim);
        }
        GradedModule { dims }
    }

    /// Sorted index subsets of size `q`.
    fn subsets(&self, q: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        fn rec(n: usize, q: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if cur.len() == q {
                out.push(cur.clone());
                return;
            }
            for i in start..n {
                cur.push(i);
                rec(n, q, i + 1, cur, out);
                cur.pop();
            }
        }
        rec(self.lie_dim, q, 0, &mut Vec::new(), &mut out);
        out
    }

    fn index_of(&self, subsets: &[Vec<usize>], set: &[usize], m: usize) -> usize {
        let pos = subsets
            .iter()
            .position(|s| s.as_slice() == set)
            .expect("subset present");
        pos * self.module_dim + m
    }

    /// The differential: for a form `xi_S (x) v`,
    /// `d(xi_S (x) v)(x_{t_0},..,x_{t_q}) = sum_i (-1)^i rho(x_{t_i}) (..)
    ///  + sum_{i<j} (-1)^{i+j} (xi_S (x) v)([x_{t_i}, x_{t_j}], ..)`.
    pub fn differential(&self) -> BlockOperator {
        let mut mats = BTreeMap::new();
        for q in 0..self.lie_dim {
            let src = self.subsets(q);
            let dst = self.subsets(q + 1);
            let rows = dst.len() * self.module_dim;
            let cols = src.len() * self.module_dim;
            let mut mat = SparseMat::zero(rows, cols);
            for t_set in &dst {
                // action part
                for (i, &ti) in t_set.iter().enumerate() {
                    let rest: Vec<usize> = t_set
                        .iter()
                        .enumerate()
                        .filter(|(k, _)| *k != i)
                        .map(|(_, &x)| x)
                        .collect();
                    if let Some(pos) = src.iter().position(|s| *s == rest) {
                        let sign = neg_one_pow(i as i64);
                        for m in 0..self.module_dim {
                            for mm in 0..self.module_dim {
                                let v = self.action[ti].get(mm, m);
                                if num_traits::Zero::is_zero(&v) {
                                    continue;
                                }
                                let val = if sign < 0 { -v } else { v };
                                let row = self.index_of(&dst, t_set, mm);
                                let col = pos * self.module_dim + m;
                                mat.add_to(row, col, &val);
                            }
                        }
                    }
                }
                // bracket part
                for i in 0..t_set.len() {
                    for j in (i + 1)..t_set.len() {
                        let (ti, tj) = (t_set[i], t_set[j]);
                        let rest: Vec<usize> = t_set
                            .iter()
                            .enumerate()
                            .filter(|(k, _)| *k != i && *k != j)
                            .map(|(_, &x)| x)
                            .collect();
                        for (k, ck) in self.bracket[ti][tj].iter().enumerate() {
                            if num_traits::Zero::is_zero(ck) {
                                continue;
                            }
                            // evaluate xi_S on (e_k, rest): sort k into rest
                            let mut full = vec![k];
                            full.extend(&rest);
                            let mut sign = neg_one_pow((i + j) as i64);
                            // insertion sort with sign
                            let mut arr = full.clone();
                            for a in 1..arr.len() {
                                let mut b = a;
                                while b > 0 && arr[b - 1] > arr[b] {
                                    arr.swap(b - 1, b);
                                    sign = -sign;
                                    b -= 1;
                                }
                            }
                            if arr.windows(2).any(|w| w[0] == w[1]) {
                                continue;
                            }
                            if let Some(pos) = src.iter().position(|s| *s == arr) {
                                for m in 0..self.module_dim {
                                    let row = self.index_of(&dst, t_set, m);
                                    let col = pos * self.module_dim + m;
                                    let val = if sign < 0 { -ck.clone() } else { ck.clone() };
                                    mat.add_to(row, col, &val);
                                }
                            }
                        }
                    }
                }
            }
            if !mat.is_zero() {
                mats.insert(q as i64, mat);
            }
        }
        BlockOperator { shift: 1, mats }
    }

    /// Contraction by the `s`-th basis element (degree -1; a derivation
    /// for the wedge on forms).
    pub fn contraction(&self, s: usize) -> BlockOperator {
        let mut mats = BTreeMap::new();
        for q in 1..=self.lie_dim {
            let src = self.subsets(q);
            let dst = self.subsets(q - 1);
            let mut mat = SparseMat::zero(dst.len() * self.module_dim, src.len() * self.module_dim);
            for (pos, set) in src.iter().enumerate() {
                if let Some(i) = set.iter().position(|&x| x == s) {
                    let rest: Vec<usize> = set
                        .iter()
                        .filter(|&&x| x != s)
                        .copied()
                        .collect();
                    let dpos = dst.iter().position(|x| *x == rest).unwrap();
                    let sign = neg_one_pow(i as i64);
                    for m in 0..self.module_dim {
                        mat.set(
                            dpos * self.module_dim + m,
                            pos * self.module_dim + m,
                            if sign < 0 {
                                -Rat::from_integer(1.into())
                            } else {
                                Rat::from_integer(1.into())
                            },
                        );
                    }
                }
            }
            if !mat.is_zero() {
                mats.insert(q as i64, mat);
            }
        }
        BlockOperator { shift: -1, mats }
    }

    /// Product of basis elements `(xi_S (x) v_m) (xi_T (x) v_mm)` given a
    /// module multiplication table; returns block coordinates.
    pub fn product(
        &self,
        q1: usize,
        idx1: usize,
        q2: usize,
        idx2: usize,
        module_mul: &dyn Fn(usize, usize) -> Vec<(usize, Rat)>,
    ) -> Option<(usize, Vec<Rat>)> {
        let s1 = self.subsets(q1);
        let s2 = self.subsets(q2);
        let (set1, m1) = (&s1[idx1 / self.module_dim], idx1 % self.module_dim);
        let (set2, m2) = (&s2[idx2 / self.module_dim], idx2 % self.module_dim);
        // wedge the subsets with sign
        let mut merged = set1.clone();
        merged.extend(set2.iter().copied());
        let mut sign = 1i32;
        for a in 1..merged.len() {
            let mut b = a;
            while b > 0 && merged[b - 1] > merged[b] {
                merged.swap(b - 1, b);
                sign = -sign;
                b -= 1;
            }
        }
        if merged.windows(2).any(|w| w[0] == w[1]) {
            return None;
        }
        let q = q1 + q2;
        let target = self.subsets(q);
        let pos = target.iter().position(|s| *s == merged)?;
        let mut out = vec![Rat::from_integer(0.into()); target.len() * self.module_dim];
        for (m, c) in module_mul(m1, m2) {
            let v = if sign < 0 { -c } else { c };
            out[pos * self.module_dim + m] += v;
        }
        Some((q, out))
    }
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let mut num = 1usize;
    let mut den = 1usize;
    for i in 0..k {
        num *= n - i;
        den *= i + 1;
    }
    num / den
}

/// The standard toy: the general linear algebra of size `d` acting on
/// polynomials in `d` variables truncated at total degree `max_deg`
/// (`e_{ij} t_k = delta_{jk} t_i`, extended as a derivation).
pub fn gl_poly_toy(d: usize, max_deg: u32) -> CartanComplex {
    use crate::polyvector::Monomial;
    // module basis: monomials of degree <= max_deg
    let mut monos: Vec<Monomial> = Vec::new();
    fn rec(d: usize, max: u32, cur: &mut Vec<u32>, out: &mut Vec<crate::polyvector::Monomial>) {
        if cur.len() == d {
            out.push(crate::polyvector::Monomial(cur.clone()));
            return;
        }
        let used: u32 = cur.iter().sum();
        for e in 0..=(max - used) {
            cur.push(e);
            rec(d, max, cur, out);
            cur.pop();
        }
    }
    rec(d, max_deg, &mut Vec::new(), &mut monos);
    monos.sort();
    let module_dim = monos.len();
    let lie_dim = d * d;
    // gl basis: e_{ij} at index i*d + j
    let mut action = Vec::with_capacity(lie_dim);
    for i in 0..d {
        for j in 0..d {
            let mut mat = SparseMat::zero(module_dim, module_dim);
            for (col, mono) in monos.iter().enumerate() {
                // e_{ij} acts as t_i d/dt_j
                if mono.0[j] > 0 {
                    let mut target = mono.0.clone();
                    target[j] -= 1;
                    target[i] += 1;
                    let coeff = Rat::from_integer((mono.0[j] as i64).into());
                    let row = monos
                        .binary_search(&Monomial(target))
                        .expect("degree preserved");
                    mat.add_to(row, col, &coeff);
                }
            }
            action.push(mat);
        }
    }
    // structure constants [e_{ij}, e_{kl}] = delta_{jk} e_{il} - delta_{li} e_{kj}
    let mut bracket = vec![vec![vec![Rat::from_integer(0.into()); lie_dim]; lie_dim]; lie_dim];
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                for l in 0..d {
                    let a = i * d + j;
                    let b = k * d + l;
                    if j == k {
                        bracket[a][b][i * d + l] += Rat::from_integer(1.into());
                    }
                    if l == i {
                        bracket[a][b][k * d + j] -= Rat::from_integer(1.into());
                    }
                }
            }
        }
    }
    CartanComplex {
        lie_dim,
        module_dim,
        bracket,
        action,
    }
}

/// Monomial multiplication table for the toy module, truncating products
/// that overflow the degree bound.
pub fn gl_poly_mul(d: usize, max_deg: u32) -> impl Fn(usize, usize) -> Vec<(usize, Rat)> {
    use crate::polyvector::Monomial;
    let mut monos: Vec<Monomial> = Vec::new();
    fn rec(d: usize, max: u32, cur: &mut Vec<u32>, out: &mut Vec<crate::polyvector::Monomial>) {
        if cur.len() == d {
            out.push(crate::polyvector::Monomial(cur.clone()));
            return;
        }
        let used: u32 = cur.iter().sum();
        for e in 0..=(max - used) {
            cur.push(e);
            rec(d, max, cur, out);
            cur.pop();
        }
    }
    rec(d, max_deg, &mut Vec::new(), &mut monos);
    monos.sort();
    move |a: usize, b: usize| {
        let prod = monos[a].mul(&monos[b]);
        match monos.binary_search(&prod) {
            Ok(i) => vec![(i, Rat::from_integer(1.into()))],
            Err(_) => vec![], // truncated away
        }
    }
}
