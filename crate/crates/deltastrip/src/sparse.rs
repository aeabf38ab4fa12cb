//! Compressed sparse row storage and a symmetric LDLᵀ factorization.
//!
//! Everything downstream (assembly, eigensolvers, resolvent probes, inertia
//! counts) runs on the two types in this module. The implementation is
//! deliberately small: square matrices, `f64` entries, deterministic assembly
//! order. Determinism matters because the test suite asserts bitwise-identical
//! results for identical inputs, so the triplet-to-CSR reduction uses a stable
//! sort and accumulates duplicates in insertion order.

use crate::error::{Error, Result};

/// Triplet (COO) accumulator used during finite-element assembly.
///
/// Entries may repeat; [`Coo::into_csr`] merges them. Assembly pushes the
/// `(i, j)` and `(j, i)` contributions of each element with the same value in
/// the same relative order, which makes the merged matrix symmetric down to
/// the last bit.
#[derive(Clone, Debug)]
pub struct Coo {
    n: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl Coo {
    pub fn new(n: usize) -> Self {
        Coo { n, entries: Vec::new() }
    }

    pub fn with_capacity(n: usize, cap: usize) -> Self {
        Coo { n, entries: Vec::with_capacity(cap) }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Adds `v` to entry `(i, j)`.
    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.n && j < self.n);
        self.entries.push((i, j, v));
    }

    /// Merges duplicate triplets into CSR form.
    ///
    /// The sort is stable, so duplicates for a given position are summed in
    /// insertion order and the result is reproducible.
    pub fn into_csr(mut self) -> Csr {
        self.entries.sort_by_key(|e| (e.0, e.1));
        let n = self.n;
        let mut row_counts = vec![0usize; n];
        let mut col_idx: Vec<usize> = Vec::with_capacity(self.entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for &(i, j, v) in &self.entries {
            if last == Some((i, j)) {
                *values.last_mut().expect("merge target") += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_counts[i] += 1;
                last = Some((i, j));
            }
        }
        let mut row_ptr = vec![0usize; n + 1];
        for i in 0..n {
            row_ptr[i + 1] = row_ptr[i] + row_counts[i];
        }
        Csr { n, row_ptr, col_idx, values }
    }
}

/// Square sparse matrix in compressed sparse row form, columns sorted per row.
#[derive(Clone, Debug, PartialEq)]
pub struct Csr {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl Csr {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Zero matrix of size `n`.
    pub fn zeros(n: usize) -> Self {
        Csr { n, row_ptr: vec![0; n + 1], col_idx: Vec::new(), values: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        Csr {
            n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        (&self.col_idx[lo..hi], &self.values[lo..hi])
    }

    /// Entry lookup by binary search; zero when the position is not stored.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(p) => vals[p],
            Err(_) => 0.0,
        }
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            let mut acc = 0.0;
            for (c, v) in cols.iter().zip(vals) {
                acc += v * x[*c];
            }
            y[i] = acc;
        }
    }

    pub fn matvec_alloc(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec(x, &mut y);
        y
    }

    /// `xᵀ A y` without forming intermediates.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            let mut row_acc = 0.0;
            for (c, v) in cols.iter().zip(vals) {
                row_acc += v * y[*c];
            }
            acc += x[i] * row_acc;
        }
        acc
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// Checks `A[i][j] == A[j][i]` bitwise for every stored entry.
    pub fn is_symmetric_bitwise(&self) -> bool {
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                if self.get(*c, i).to_bits() != v.to_bits() {
                    return false;
                }
            }
        }
        true
    }

    /// Union-pattern linear combination `Σ coefₖ · Aₖ`.
    ///
    /// All terms must share the size. Entries are combined column-by-column in
    /// term order, so the result is deterministic.
    pub fn linear_combination(terms: &[(f64, &Csr)]) -> Csr {
        assert!(!terms.is_empty());
        let n = terms[0].1.n;
        assert!(terms.iter().all(|(_, a)| a.n == n));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        // merge the sorted rows of every term
        let mut cursors = vec![0usize; terms.len()];
        for i in 0..n {
            for (t, (_, a)) in terms.iter().enumerate() {
                cursors[t] = a.row_ptr[i];
            }
            loop {
                let mut next_col = usize::MAX;
                for (t, (_, a)) in terms.iter().enumerate() {
                    if cursors[t] < a.row_ptr[i + 1] {
                        next_col = next_col.min(a.col_idx[cursors[t]]);
                    }
                }
                if next_col == usize::MAX {
                    break;
                }
                let mut acc = 0.0;
                for (t, (coef, a)) in terms.iter().enumerate() {
                    if cursors[t] < a.row_ptr[i + 1] && a.col_idx[cursors[t]] == next_col {
                        acc += coef * a.values[cursors[t]];
                        cursors[t] += 1;
                    }
                }
                col_idx.push(next_col);
                values.push(acc);
            }
            row_ptr[i + 1] = col_idx.len();
        }
        Csr { n, row_ptr, col_idx, values }
    }

    /// Rebuilds the matrix under an index map (used to identify periodic
    /// partner nodes). `map[i]` is the new index of old row/column `i`; the
    /// result has size `n_new` and sums folded entries deterministically.
    pub fn fold(&self, map: &[usize], n_new: usize) -> Csr {
        let mut coo = Coo::with_capacity(n_new, self.nnz());
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                coo.push(map[i], map[*c], *v);
            }
        }
        coo.into_csr()
    }

    /// Extracts the principal submatrix of the retained indices.
    /// `keep[i] = Some(new_index)` keeps old index `i`.
    pub fn restrict(&self, keep: &[Option<usize>], n_new: usize) -> Csr {
        let mut coo = Coo::with_capacity(n_new, self.nnz());
        for i in 0..self.n {
            let Some(ni) = keep[i] else { continue };
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                if let Some(nc) = keep[*c] {
                    coo.push(ni, nc, *v);
                }
            }
        }
        coo.into_csr()
    }

    /// Upper-triangle compressed sparse column view (including the diagonal),
    /// valid for symmetric matrices. Column `j` of the upper triangle equals
    /// the leading entries of CSR row `j`, which keeps this allocation-cheap.
    pub fn upper_csc(&self) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
        let n = self.n;
        let mut col_ptr = vec![0usize; n + 1];
        let mut row_idx = Vec::new();
        let mut vals = Vec::new();
        for j in 0..n {
            let (cols, v) = self.row(j);
            for (c, x) in cols.iter().zip(v) {
                if *c <= j {
                    row_idx.push(*c);
                    vals.push(*x);
                }
            }
            col_ptr[j + 1] = row_idx.len();
        }
        (col_ptr, row_idx, vals)
    }

    /// Dense copy, for the reference eigensolver and small tests.
    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                m[(i, *c)] += v;
            }
        }
        m
    }

    /// Largest absolute diagonal entry; scale reference for pivot thresholds.
    pub fn max_abs_diag(&self) -> f64 {
        self.diagonal().iter().fold(0.0f64, |m, d| m.max(d.abs()))
    }
}

/// Sign counts of the pivots of an LDLᵀ factorization. By Sylvester's law of
/// inertia these are the eigenvalue counts of the factored matrix below,
/// numerically at, and above zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Inertia {
    pub negative: usize,
    pub zero: usize,
    pub positive: usize,
}

/// LDLᵀ factorization of a symmetric matrix, without pivoting.
///
/// The elimination follows the up-looking algorithm: an elimination-tree pass
/// sizes the factor, a numeric pass fills it. No fill-reducing permutation is
/// applied; the strip grids are numbered transverse-direction-fastest, which
/// already keeps the profile narrow.
pub struct LdlFactor {
    n: usize,
    l_colptr: Vec<usize>,
    l_rowidx: Vec<usize>,
    l_values: Vec<f64>,
    d: Vec<f64>,
    /// Relative threshold below which a pivot counts as numerically zero.
    zero_tol: f64,
}

impl LdlFactor {
    /// Factors a symmetric `Csr`. Fails only on structurally empty columns
    /// that would divide by an exactly zero pivot mid-elimination.
    pub fn new(a: &Csr) -> Result<LdlFactor> {
        let n = a.n();
        let (ap, ai, ax) = a.upper_csc();

        // --- symbolic: elimination tree and column counts ---
        let mut parent = vec![usize::MAX; n];
        let mut flag = vec![usize::MAX; n];
        let mut lnz = vec![0usize; n];
        for k in 0..n {
            flag[k] = k;
            for p in ap[k]..ap[k + 1] {
                let mut i = ai[p];
                if i >= k {
                    continue; // diagonal handled numerically
                }
                while flag[i] != k {
                    if parent[i] == usize::MAX {
                        parent[i] = k;
                    }
                    lnz[i] += 1;
                    flag[i] = k;
                    i = parent[i];
                }
            }
        }
        let mut l_colptr = vec![0usize; n + 1];
        for k in 0..n {
            l_colptr[k + 1] = l_colptr[k] + lnz[k];
        }

        // --- numeric (up-looking; pattern array holds a scratch stack at its
        // low end and the final row pattern from `top` upward) ---
        let nnz_l = l_colptr[n];
        let mut l_rowidx = vec![0usize; nnz_l];
        let mut l_values = vec![0.0f64; nnz_l];
        let mut d = vec![0.0f64; n];
        let mut y = vec![0.0f64; n];
        let mut pattern = vec![0usize; n];
        let mut next = l_colptr[..n].to_vec(); // next free slot per factor column
        let mut flag = vec![usize::MAX; n];
        let scale = a.max_abs_diag().max(f64::MIN_POSITIVE);

        for k in 0..n {
            let mut top = n;
            flag[k] = k;
            y[k] = 0.0;
            for p in ap[k]..ap[k + 1] {
                let mut i = ai[p];
                if i > k {
                    continue;
                }
                y[i] += ax[p];
                let mut len = 0usize;
                while flag[i] != k {
                    pattern[len] = i;
                    len += 1;
                    flag[i] = k;
                    i = parent[i];
                }
                // pop the freshly walked path onto the pattern region so each
                // path is stored descendants-first
                while len > 0 {
                    len -= 1;
                    top -= 1;
                    pattern[top] = pattern[len];
                }
            }
            d[k] = y[k];
            y[k] = 0.0;
            for s in top..n {
                let i = pattern[s];
                let yi = y[i];
                y[i] = 0.0;
                let p2 = next[i];
                for p in l_colptr[i]..p2 {
                    y[l_rowidx[p]] -= l_values[p] * yi;
                }
                if d[i] == 0.0 {
                    return Err(Error::SingularPivot { index: i });
                }
                let lki = yi / d[i];
                d[k] -= lki * yi;
                l_rowidx[p2] = k;
                l_values[p2] = lki;
                next[i] = p2 + 1;
            }
        }
        Ok(LdlFactor {
            n,
            l_colptr,
            l_rowidx,
            l_values,
            d,
            zero_tol: 1e-14 * scale,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn pivots(&self) -> &[f64] {
        &self.d
    }

    /// Pivot sign census. `zero` uses a relative threshold tied to the
    /// diagonal scale of the factored matrix.
    pub fn inertia(&self) -> Inertia {
        let mut out = Inertia { negative: 0, zero: 0, positive: 0 };
        for &p in &self.d {
            if p.abs() <= self.zero_tol {
                out.zero += 1;
            } else if p < 0.0 {
                out.negative += 1;
            } else {
                out.positive += 1;
            }
        }
        out
    }

    /// Smallest pivot magnitude relative to the largest; a conditioning probe
    /// used to reject shifts that sit numerically on an eigenvalue.
    pub fn min_rel_pivot(&self) -> f64 {
        let max = self.d.iter().fold(0.0f64, |m, p| m.max(p.abs()));
        if max == 0.0 {
            return 0.0;
        }
        self.d.iter().fold(f64::INFINITY, |m, p| m.min(p.abs())) / max
    }

    /// Solves `L D Lᵀ x = b` in place.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        for j in 0..self.n {
            let xj = x[j];
            for p in self.l_colptr[j]..self.l_colptr[j + 1] {
                x[self.l_rowidx[p]] -= self.l_values[p] * xj;
            }
        }
        for j in 0..self.n {
            x[j] /= self.d[j];
        }
        for j in (0..self.n).rev() {
            let mut acc = x[j];
            for p in self.l_colptr[j]..self.l_colptr[j + 1] {
                acc -= self.l_values[p] * x[self.l_rowidx[p]];
            }
            x[j] = acc;
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sample_sym() -> Csr {
        // 4x4 symmetric, indefinite
        let mut coo = Coo::new(4);
        let entries = [
            (0, 0, 4.0),
            (1, 1, -2.0),
            (2, 2, 3.0),
            (3, 3, 1.0),
            (0, 1, 1.0),
            (1, 0, 1.0),
            (1, 2, 0.5),
            (2, 1, 0.5),
            (0, 3, -0.25),
            (3, 0, -0.25),
        ];
        for (i, j, v) in entries {
            coo.push(i, j, v);
        }
        coo.into_csr()
    }

    #[test]
    fn coo_merges_duplicates_in_order() {
        let mut coo = Coo::new(2);
        coo.push(0, 0, 1.0);
        coo.push(0, 0, 2.0);
        coo.push(1, 0, 3.0);
        coo.push(0, 1, 3.0);
        let a = coo.into_csr();
        assert_eq!(a.nnz(), 3);
        assert_eq!(a.get(0, 0), 3.0);
        assert!(a.is_symmetric_bitwise());
    }

    #[test]
    fn matvec_matches_dense() {
        let a = sample_sym();
        let d = a.to_dense();
        let x = vec![1.0, -2.0, 0.5, 3.0];
        let y = a.matvec_alloc(&x);
        let yd = d * nalgebra::DVector::from_vec(x);
        for i in 0..4 {
            assert_relative_eq!(y[i], yd[i], epsilon = 1e-15);
        }
    }

    #[test]
    fn linear_combination_merges_patterns() {
        let a = sample_sym();
        let id = Csr::identity(4);
        let c = Csr::linear_combination(&[(2.0, &a), (-3.0, &id)]);
        for i in 0..4 {
            for j in 0..4 {
                let expect = 2.0 * a.get(i, j) - if i == j { 3.0 } else { 0.0 };
                assert_relative_eq!(c.get(i, j), expect, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn fold_identifies_indices() {
        // wrap index 3 onto index 0 (periodic pair)
        let a = sample_sym();
        let map = [0usize, 1, 2, 0];
        let f = a.fold(&map, 3);
        assert_relative_eq!(f.get(0, 0), 4.0 + 1.0 - 0.25 - 0.25, epsilon = 1e-15);
        assert!(f.is_symmetric_bitwise());
    }

    #[test]
    fn restrict_takes_principal_block() {
        let a = sample_sym();
        let keep = [Some(0), None, Some(1), None];
        let r = a.restrict(&keep, 2);
        assert_eq!(r.n(), 2);
        assert_eq!(r.get(0, 0), 4.0);
        assert_eq!(r.get(1, 1), 3.0);
        assert_eq!(r.get(0, 1), 0.0);
    }

    #[test]
    fn ldl_reproduces_inverse_and_inertia() {
        let a = sample_sym();
        let f = LdlFactor::new(&a).unwrap();
        // solve against dense reference
        let b = vec![1.0, 2.0, -1.0, 0.5];
        let x = f.solve(&b);
        let dense = a.to_dense();
        let xd = dense.clone().lu().solve(&nalgebra::DVector::from_vec(b)).unwrap();
        for i in 0..4 {
            assert_relative_eq!(x[i], xd[i], epsilon = 1e-12);
        }
        // inertia against dense eigenvalues
        let eig = nalgebra::SymmetricEigen::new(dense);
        let neg = eig.eigenvalues.iter().filter(|&&e| e < 0.0).count();
        assert_eq!(f.inertia().negative, neg);
        assert_eq!(f.inertia().zero, 0);
    }

    #[test]
    fn ldl_detects_near_singular_shift() {
        // A - lambda*I with lambda equal to an eigenvalue of A
        let a = sample_sym();
        let dense = a.to_dense();
        let eig = nalgebra::SymmetricEigen::new(dense);
        let lam = eig.eigenvalues.min();
        let id = Csr::identity(4);
        let shifted = Csr::linear_combination(&[(1.0, &a), (-lam, &id)]);
        let f = LdlFactor::new(&shifted).unwrap();
        assert!(f.min_rel_pivot() < 1e-10);
    }
}
