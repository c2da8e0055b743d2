//! Sparse exact linear algebra over the rationals.
//!
//! Backs the homotopy construction (block solves), the shuffle-quotient
//! reduction and the rank comparisons for admissible-graph spans. Pivoting
//! is deterministic (leftmost column, then lowest row index) so that all
//! derived data is reproducible run to run.

use num_traits::{One, Zero};
use std::collections::BTreeMap;

use crate::error::{EngineError, Result};
use crate::scalar::Rat;

/// Sparse matrix over the rationals, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMat {
    rows: usize,
    cols: usize,
    entries: Vec<BTreeMap<usize, Rat>>,
}

/// Result of a linear solve: a particular solution when the system is
/// consistent, plus the rank and a basis of the kernel of the matrix.
#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub solution: Option<Vec<Rat>>,
    pub rank: usize,
    pub kernel: Vec<Vec<Rat>>,
}

impl SparseMat {
    pub fn zero(rows: usize, cols: usize) -> Self {
        SparseMat {
            rows,
            cols,
            entries: vec![BTreeMap::new(); rows],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zero(n, n);
        for i in 0..n {
            m.set(i, i, Rat::one());
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn set(&mut self, r: usize, c: usize, v: Rat) {
        assert!(r < self.rows && c < self.cols, "index out of range");
        if v.is_zero() {
            self.entries[r].remove(&c);
        } else {
            self.entries[r].insert(c, v);
        }
    }

    pub fn add_to(&mut self, r: usize, c: usize, v: &Rat) {
        if v.is_zero() {
            return;
        }
        let slot = self.entries[r].entry(c).or_insert_with(Rat::zero);
        *slot += v;
        if slot.is_zero() {
            self.entries[r].remove(&c);
        }
    }

    pub fn get(&self, r: usize, c: usize) -> Rat {
        self.entries[r].get(&c).cloned().unwrap_or_else(Rat::zero)
    }

    pub fn row(&self, r: usize) -> &BTreeMap<usize, Rat> {
        &self.entries[r]
    }

    pub fn from_rows(rows: usize, cols: usize, data: &[(usize, usize, Rat)]) -> Self {
        let mut m = Self::zero(rows, cols);
        for (r, c, v) in data {
            m.add_to(*r, *c, v);
        }
        m
    }

    pub fn transpose(&self) -> SparseMat {
        let mut t = SparseMat::zero(self.cols, self.rows);
        for (r, row) in self.entries.iter().enumerate() {
            for (c, v) in row {
                t.set(*c, r, v.clone());
            }
        }
        t
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, x: &[Rat]) -> Vec<Rat> {
        assert_eq!(x.len(), self.cols, "vector length mismatch");
        self.entries
            .iter()
            .map(|row| {
                let mut acc = Rat::zero();
                for (c, v) in row {
                    if !x[*c].is_zero() {
                        acc += v * &x[*c];
                    }
                }
                acc
            })
            .collect()
    }

    /// Matrix product `self * other`.
    pub fn mul_mat(&self, other: &SparseMat) -> SparseMat {
        assert_eq!(self.cols, other.rows, "dimension mismatch in product");
        let mut out = SparseMat::zero(self.rows, other.cols);
        for (r, row) in self.entries.iter().enumerate() {
            for (k, v) in row {
                for (c, w) in &other.entries[*k] {
                    out.add_to(r, *c, &(v * w));
                }
            }
        }
        out
    }

    pub fn add_mat(&self, other: &SparseMat) -> SparseMat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (r, row) in other.entries.iter().enumerate() {
            for (c, v) in row {
                out.add_to(r, *c, v);
            }
        }
        out
    }

    pub fn scale(&self, c: &Rat) -> SparseMat {
        let mut out = SparseMat::zero(self.rows, self.cols);
        for (r, row) in self.entries.iter().enumerate() {
            for (col, v) in row {
                out.set(r, *col, v * c);
            }
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|row| row.is_empty())
    }

    /// Row-reduce in place to reduced row echelon form.
    ///
    /// Pivot rule: scan columns left to right; among the not-yet-pivoted rows
    /// with a nonzero entry in the current column, take the one with the
    /// lowest index. Returns the pivot columns in order.
    pub fn rref_in_place(&mut self) -> Vec<usize> {
        let mut pivots = Vec::new();
        let mut next_row = 0usize;
        for col in 0..self.cols {
            if next_row >= self.rows {
                break;
            }
            let pivot_row = (next_row..self.rows).find(|&r| {
                self.entries[r]
                    .get(&col)
                    .map(|v| !v.is_zero())
                    .unwrap_or(false)
            });
            let Some(pr) = pivot_row else { continue };
            self.entries.swap(next_row, pr);
            // normalize pivot row
            let inv = {
                let p = self.entries[next_row].get(&col).unwrap().clone();
                p.recip()
            };
            if !inv.is_one() {
                let row = std::mem::take(&mut self.entries[next_row]);
                self.entries[next_row] = row.into_iter().map(|(c, v)| (c, v * &inv)).collect();
            }
            // eliminate the column everywhere else
            let pivot_row_data: Vec<(usize, Rat)> = self.entries[next_row]
                .iter()
                .map(|(c, v)| (*c, v.clone()))
                .collect();
            for r in 0..self.rows {
                if r == next_row {
                    continue;
                }
                let factor = match self.entries[r].get(&col) {
                    Some(v) if !v.is_zero() => v.clone(),
                    _ => continue,
                };
                for (c, v) in &pivot_row_data {
                    let delta = -(v * &factor);
                    self.add_to(r, *c, &delta);
                }
            }
            pivots.push(col);
            next_row += 1;
        }
        pivots
    }

    pub fn rank(&self) -> usize {
        let mut m = self.clone();
        m.rref_in_place().len()
    }

    /// Basis of the kernel, one vector per free column, in column order.
    /// The free coordinate of each basis vector is set to 1.
    pub fn kernel_basis(&self) -> Vec<Vec<Rat>> {
        let mut m = self.clone();
        let pivots = m.rref_in_place();
        let pivot_set: BTreeMap<usize, usize> = pivots
            .iter()
            .enumerate()
            .map(|(row, col)| (*col, row))
            .collect();
        let mut basis = Vec::new();
        for free in 0..self.cols {
            if pivot_set.contains_key(&free) {
                continue;
            }
            let mut v = vec![Rat::zero(); self.cols];
            v[free] = Rat::one();
            for (col, row) in &pivot_set {
                let coeff = m.get(*row, free);
                if !coeff.is_zero() {
                    v[*col] = -coeff;
                }
            }
            basis.push(v);
        }
        basis
    }

    /// Solve `self * x = rhs`.
    ///
    /// Always reports the rank and a kernel basis; `solution` is `None` when
    /// the system is inconsistent (never a panic).
    pub fn solve(&self, rhs: &[Rat]) -> Result<SolveOutcome> {
        if rhs.len() != self.rows {
            return Err(EngineError::argument(format!(
                "rhs length {} does not match row count {}",
                rhs.len(),
                self.rows
            )));
        }
        // augment with the rhs as an extra column
        let mut aug = SparseMat::zero(self.rows, self.cols + 1);
        for (r, row) in self.entries.iter().enumerate() {
            for (c, v) in row {
                aug.set(r, *c, v.clone());
            }
        }
        for (r, v) in rhs.iter().enumerate() {
            aug.set(r, self.cols, v.clone());
        }
        let pivots = aug.rref_in_place();
        let rank_aug = pivots.len();
        let inconsistent = pivots.last().map(|&c| c == self.cols).unwrap_or(false);
        let rank = if inconsistent { rank_aug - 1 } else { rank_aug };

        let solution = if inconsistent {
            None
        } else {
            let mut x = vec![Rat::zero(); self.cols];
            for (row, &col) in pivots.iter().enumerate() {
                x[col] = aug.get(row, self.cols);
            }
            Some(x)
        };
        Ok(SolveOutcome {
            solution,
            rank,
            kernel: self.kernel_basis(),
        })
    }

    /// Dense rows for golden files and JSON export.
    pub fn to_dense(&self) -> Vec<Vec<Rat>> {
        (0..self.rows)
            .map(|r| (0..self.cols).map(|c| self.get(r, c)).collect())
            .collect()
    }
}

/// Solve several systems with the same matrix: `self * X = B` columnwise,
/// with a single row reduction of the augmented matrix. Returns `None` if
/// any column is inconsistent.
pub fn solve_columns(mat: &SparseMat, rhs_cols: &[Vec<Rat>]) -> Result<Option<SparseMat>> {
    let ncols = mat.cols();
    let k = rhs_cols.len();
    let mut aug = SparseMat::zero(mat.rows(), ncols + k);
    for (r, row) in mat.entries.iter().enumerate() {
        for (c, v) in row {
            aug.set(r, *c, v.clone());
        }
    }
    for (j, col) in rhs_cols.iter().enumerate() {
        if col.len() != mat.rows() {
            return Err(EngineError::argument(format!(
                "rhs length {} does not match row count {}",
                col.len(),
                mat.rows()
            )));
        }
        for (r, v) in col.iter().enumerate() {
            aug.set(r, ncols + j, v.clone());
        }
    }
    // reduce only over the matrix columns; the rhs columns ride along
    let pivots = {
        let mut pivots = Vec::new();
        let mut next_row = 0usize;
        for col in 0..ncols {
            if next_row >= aug.rows {
                break;
            }
            let pivot_row = (next_row..aug.rows).find(|&r| {
                aug.entries[r]
                    .get(&col)
                    .map(|v| !v.is_zero())
                    .unwrap_or(false)
            });
            let Some(pr) = pivot_row else { continue };
            aug.entries.swap(next_row, pr);
            let inv = aug.entries[next_row].get(&col).unwrap().clone().recip();
            if !inv.is_one() {
                let row = std::mem::take(&mut aug.entries[next_row]);
                aug.entries[next_row] = row.into_iter().map(|(c, v)| (c, v * &inv)).collect();
            }
            let pivot_row_data: Vec<(usize, Rat)> = aug.entries[next_row]
                .iter()
                .map(|(c, v)| (*c, v.clone()))
                .collect();
            for r in 0..aug.rows {
                if r == next_row {
                    continue;
                }
                let factor = match aug.entries[r].get(&col) {
                    Some(v) if !v.is_zero() => v.clone(),
                    _ => continue,
                };
                for (c, v) in &pivot_row_data {
                    let delta = -(v * &factor);
                    aug.add_to(r, *c, &delta);
                }
            }
            pivots.push((col, next_row));
            next_row += 1;
        }
        pivots
    };
    let rank = pivots.len();
    // rows below the rank must have zero rhs entries, else inconsistent
    for r in rank..aug.rows {
        if !aug.entries[r].is_empty() {
            return Ok(None);
        }
    }
    let mut out = SparseMat::zero(ncols, k);
    for (col, row) in &pivots {
        for j in 0..k {
            let v = aug.get(*row, ncols + j);
            if !v.is_zero() {
                out.set(*col, j, v);
            }
        }
    }
    Ok(Some(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{rat, rat_int};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_solve_returns_rhs() {
        let m = SparseMat::identity(3);
        let rhs = vec![rat_int(4), rat(1, 2), rat_int(-7)];
        let out = m.solve(&rhs).unwrap();
        assert_eq!(out.solution.unwrap(), rhs);
        assert_eq!(out.rank, 3);
        assert!(out.kernel.is_empty());
    }

    #[test]
    fn zero_matrix_kernel_is_everything() {
        let m = SparseMat::zero(2, 3);
        let out = m.solve(&[rat_int(0), rat_int(0)]).unwrap();
        assert_eq!(out.rank, 0);
        assert_eq!(out.kernel.len(), 3);
        assert!(out.solution.unwrap().iter().all(|v| v.is_zero()));
    }

    /// Hand row-reduction oracle for [[1,1],[1,1]] x = (1,1):
    /// R2 <- R2 - R1 gives [[1,1],[0,0]], rhs (1,0): rank 1, x1 free,
    /// particular solution (1,0), kernel spanned by (-1,1).
    #[test]
    fn rank_deficient_family() {
        let m = SparseMat::from_rows(
            2,
            2,
            &[
                (0, 0, rat_int(1)),
                (0, 1, rat_int(1)),
                (1, 0, rat_int(1)),
                (1, 1, rat_int(1)),
            ],
        );
        let out = m.solve(&[rat_int(1), rat_int(1)]).unwrap();
        assert_eq!(out.rank, 1);
        let x = out.solution.unwrap();
        assert_eq!(x, vec![rat_int(1), rat_int(0)]);
        assert_eq!(out.kernel, vec![vec![rat_int(-1), rat_int(1)]]);
    }

    #[test]
    fn inconsistent_system_reports_no_solution() {
        let m = SparseMat::from_rows(2, 1, &[(0, 0, rat_int(1)), (1, 0, rat_int(1))]);
        let out = m.solve(&[rat_int(0), rat_int(1)]).unwrap();
        assert!(out.solution.is_none());
        assert_eq!(out.rank, 1);
    }

    #[test]
    fn random_solutions_verify_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..30 {
            let rows = rng.gen_range(1..6);
            let cols = rng.gen_range(1..6);
            let mut m = SparseMat::zero(rows, cols);
            for r in 0..rows {
                for c in 0..cols {
                    if rng.gen_bool(0.6) {
                        m.set(r, c, rat(rng.gen_range(-3..=3), 1));
                    }
                }
            }
            // build a consistent rhs from a random x
            let x: Vec<Rat> = (0..cols).map(|_| rat(rng.gen_range(-3..=3), 1)).collect();
            let rhs = m.mul_vec(&x);
            let out = m.solve(&rhs).unwrap();
            let sol = out.solution.expect("consistent by construction");
            assert_eq!(m.mul_vec(&sol), rhs);
            // rank + nullity = column count
            assert_eq!(out.rank + out.kernel.len(), cols);
            // kernel vectors are actual kernel vectors
            for k in &out.kernel {
                assert!(m.mul_vec(k).iter().all(|v| v.is_zero()));
            }
        }
    }
}
