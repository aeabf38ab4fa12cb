//! Preconditioning for the block eigensolver: zero-fill incomplete Cholesky
//! on a positively shifted copy of the form matrix, with a Jacobi fallback.
//!
//! The preconditioner only steers iteration counts — correctness is gated by
//! residual checks and inertia certificates in the callers — so the shift
//! selection here may be heuristic.

use crate::sparse::Csr;

pub(crate) enum Preconditioner {
    Ic0(Ic0),
    Jacobi(Vec<f64>),
}

impl Preconditioner {
    /// Builds a preconditioner for the pencil `(a, m)`. The matrix is
    /// shifted by `σ·M` with `σ` picked from a lumped Gershgorin estimate so
    /// the factored matrix is (close to) positive definite; if the
    /// incomplete factorization still breaks down after a few shift
    /// increases, a clamped Jacobi diagonal takes over.
    pub(crate) fn build(a: &Csr, m: &Csr) -> Preconditioner {
        let est = lower_bound_estimate(a, m);
        let scale = 1.0 + est.abs();
        let mut sigma = if est < 0.0 { -est + 0.01 * scale } else { 0.0 };
        for _ in 0..4 {
            let shifted = if sigma == 0.0 {
                a.clone()
            } else {
                Csr::linear_combination(&[(1.0, a), (sigma, m)])
            };
            if let Some(ic) = Ic0::factor(&shifted) {
                return Preconditioner::Ic0(ic);
            }
            sigma = 2.0 * sigma + 0.1 * scale;
        }
        let shifted = Csr::linear_combination(&[(1.0, a), (sigma, m)]);
        let floor = 1e-12 * shifted.max_abs_diag().max(1.0);
        let diag = shifted.diagonal().iter().map(|d| d.max(floor)).collect();
        Preconditioner::Jacobi(diag)
    }

    pub(crate) fn apply(&self, r: &[f64], out: &mut [f64]) {
        match self {
            Preconditioner::Ic0(ic) => ic.solve(r, out),
            Preconditioner::Jacobi(d) => {
                for ((o, ri), di) in out.iter_mut().zip(r).zip(d) {
                    *o = ri / di;
                }
            }
        }
    }
}

/// Cheap lower estimate for the smallest pencil eigenvalue: row-wise
/// Gershgorin on the form matrix against the lumped (row-sum) mass. Not a
/// certificate — see the module docs.
pub(crate) fn lower_bound_estimate(a: &Csr, m: &Csr) -> f64 {
    let n = a.n();
    let mut est = f64::INFINITY;
    for i in 0..n {
        let (cols, vals) = a.row(i);
        let mut diag = 0.0;
        let mut off = 0.0;
        for (c, v) in cols.iter().zip(vals) {
            if *c == i {
                diag = *v;
            } else {
                off += v.abs();
            }
        }
        let (_, mvals) = m.row(i);
        let lumped: f64 = mvals.iter().sum();
        if lumped > 0.0 {
            est = est.min((diag - off) / lumped);
        }
    }
    if est.is_finite() {
        est
    } else {
        0.0
    }
}

/// Zero-fill incomplete Cholesky: `L` lives on the lower-triangular pattern
/// of the input matrix, `A ≈ LLᵀ`.
pub(crate) struct Ic0 {
    n: usize,
    /// Lower-triangular rows (column indices ascending, diagonal last).
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    /// Column-major copy of the strictly-lower part for the backward sweep.
    colt_ptr: Vec<usize>,
    colt_row: Vec<usize>,
    colt_val: Vec<f64>,
}

impl Ic0 {
    /// Returns `None` when a pivot is not safely positive.
    fn factor(a: &Csr) -> Option<Ic0> {
        let n = a.n();
        let tiny = 1e-12 * a.max_abs_diag().max(f64::MIN_POSITIVE);
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for i in 0..n {
            let (cols, vals) = a.row(i);
            for (c, v) in cols.iter().zip(vals) {
                if *c <= i {
                    col_idx.push(*c);
                    values.push(*v);
                }
            }
            if *col_idx.last()? != i {
                return None; // structurally missing diagonal
            }
            row_ptr.push(col_idx.len());
        }
        // up-looking factorization restricted to the existing pattern
        for i in 0..n {
            let (start, end) = (row_ptr[i], row_ptr[i + 1]);
            for idx in start..end {
                let j = col_idx[idx];
                // dot of rows i and j over shared columns < j
                let mut s = values[idx];
                let (mut pi, mut pj) = (start, row_ptr[j]);
                let (ei, ej) = (end, row_ptr[j + 1]);
                while pi < ei && pj < ej {
                    let (ci, cj) = (col_idx[pi], col_idx[pj]);
                    if ci >= j || cj >= j {
                        break;
                    }
                    match ci.cmp(&cj) {
                        std::cmp::Ordering::Less => pi += 1,
                        std::cmp::Ordering::Greater => pj += 1,
                        std::cmp::Ordering::Equal => {
                            s -= values[pi] * values[pj];
                            pi += 1;
                            pj += 1;
                        }
                    }
                }
                if j < i {
                    let ljj = values[row_ptr[j + 1] - 1];
                    values[idx] = s / ljj;
                } else {
                    if s <= tiny {
                        return None;
                    }
                    values[idx] = s.sqrt();
                }
            }
        }
        // strictly-lower transpose for the Lᵀ sweep
        let mut counts = vec![0usize; n];
        for i in 0..n {
            for idx in row_ptr[i]..row_ptr[i + 1] - 1 {
                counts[col_idx[idx]] += 1;
            }
        }
        let mut colt_ptr = vec![0usize; n + 1];
        for j in 0..n {
            colt_ptr[j + 1] = colt_ptr[j] + counts[j];
        }
        let mut cursor = colt_ptr.clone();
        let mut colt_row = vec![0usize; colt_ptr[n]];
        let mut colt_val = vec![0.0; colt_ptr[n]];
        for i in 0..n {
            for idx in row_ptr[i]..row_ptr[i + 1] - 1 {
                let j = col_idx[idx];
                colt_row[cursor[j]] = i;
                colt_val[cursor[j]] = values[idx];
                cursor[j] += 1;
            }
        }
        Some(Ic0 { n, row_ptr, col_idx, values, colt_ptr, colt_row, colt_val })
    }

    /// `out = (LLᵀ)⁻¹ r`.
    fn solve(&self, r: &[f64], out: &mut [f64]) {
        out.copy_from_slice(r);
        // forward: L y = r
        for i in 0..self.n {
            let end = self.row_ptr[i + 1];
            let mut s = out[i];
            for idx in self.row_ptr[i]..end - 1 {
                s -= self.values[idx] * out[self.col_idx[idx]];
            }
            out[i] = s / self.values[end - 1];
        }
        // backward: Lᵀ x = y
        for i in (0..self.n).rev() {
            let mut s = out[i];
            for idx in self.colt_ptr[i]..self.colt_ptr[i + 1] {
                s -= self.colt_val[idx] * out[self.colt_row[idx]];
            }
            out[i] = s / self.values[self.row_ptr[i + 1] - 1];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::Coo;

    fn spd_tridiag(n: usize) -> Csr {
        let mut coo = Coo::new(n);
        for i in 0..n {
            coo.push(i, i, 2.5);
            if i + 1 < n {
                coo.push(i, i + 1, -1.0);
                coo.push(i + 1, i, -1.0);
            }
        }
        coo.into_csr()
    }

    #[test]
    fn ic0_is_exact_on_tridiagonal_spd() {
        // zero fill-in: for a tridiagonal matrix IC(0) IS the Cholesky
        // factor, so the solve must reproduce the exact inverse action
        let a = spd_tridiag(40);
        let ic = Ic0::factor(&a).expect("tridiagonal SPD factors");
        let x: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37).sin()).collect();
        let b = a.matvec_alloc(&x);
        let mut got = vec![0.0; 40];
        ic.solve(&b, &mut got);
        for (g, e) in got.iter().zip(&x) {
            assert!((g - e).abs() < 1e-10, "{g} vs {e}");
        }
    }

    #[test]
    fn build_falls_back_gracefully_on_indefinite_input() {
        // strongly indefinite diagonal: IC(0) on the raw matrix must fail,
        // the builder must still hand back something usable
        let n = 10;
        let mut coo = Coo::new(n);
        for i in 0..n {
            coo.push(i, i, if i % 2 == 0 { 1.0 } else { -3.0 });
        }
        let a = coo.into_csr();
        let m = Csr::identity(n);
        let p = Preconditioner::build(&a, &m);
        let r = vec![1.0; n];
        let mut out = vec![0.0; n];
        p.apply(&r, &mut out);
        assert!(out.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn lower_bound_estimate_is_below_true_minimum() {
        let a = spd_tridiag(30);
        let m = Csr::identity(30);
        let est = lower_bound_estimate(&a, &m);
        // true λ_min = 2.5 − 2cos(π/31) > 0.5; Gershgorin gives 0.5
        assert!(est <= 0.5 + 1e-12 && est > 0.0);
    }
}
