//! Locally optimal block preconditioned iteration for the lowest eigenpairs
//! of a symmetric pencil `A u = λ M u`.
//!
//! Each sweep performs a Rayleigh–Ritz extraction over the subspace spanned
//! by the current block `X`, the preconditioned residuals `W`, and the
//! previous search directions `P`. The basis is M-orthonormalized from
//! scratch every sweep (near-dependent columns are dropped), which trades a
//! few matrix–vector products for unconditional numerical stability — block
//! sizes are small here, so the extra work is negligible against solver
//! robustness.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::precond::Preconditioner;
use super::{axpy, dense_generalized_small, dot, norm2, EigenResult};
use crate::error::{Error, Result};
use crate::sparse::Csr;

/// Column provenance inside the trial basis.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Tag {
    X,
    Aux, // W or P
}

/// Ratio below which a basis column is considered linearly dependent and
/// dropped (squared M-norm relative to its pre-orthogonalization value).
const DROP_RATIO: f64 = 1e-24;

/// Sweeps without a 10% improvement of the worst tracked residual before
/// the iteration is declared stalled.
const STALL_LIMIT: usize = 60;

pub(crate) fn run(
    a: &Csr,
    m: &Csr,
    k: usize,
    block: usize,
    tol: f64,
    seed: u64,
    max_iters: usize,
) -> Result<EigenResult> {
    let n = a.n();
    let p = block.min(n).max(k);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut x: Vec<Vec<f64>> = (0..p)
        .map(|_| (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect())
        .collect();
    let mut dir: Vec<Vec<f64>> = Vec::new();
    let mut w: Vec<Vec<f64>> = Vec::new();
    let pre = Preconditioner::build(a, m);

    let mut best_worst = f64::INFINITY;
    let mut since_best = 0usize;

    for iter in 1..=max_iters {
        // --- assemble the trial basis [X | W | P] --------------------------
        let mut z: Vec<Vec<f64>> = Vec::with_capacity(x.len() + w.len() + dir.len());
        let mut tags: Vec<Tag> = Vec::with_capacity(z.capacity());
        for c in x.drain(..) {
            z.push(c);
            tags.push(Tag::X);
        }
        for c in w.drain(..) {
            z.push(c);
            tags.push(Tag::Aux);
        }
        for c in dir.drain(..) {
            z.push(c);
            tags.push(Tag::Aux);
        }

        // --- M-orthonormalize, dropping dependent columns ------------------
        let mut mz: Vec<Vec<f64>> = Vec::with_capacity(z.len());
        let mut kept_tags: Vec<Tag> = Vec::with_capacity(z.len());
        let mut kept: Vec<Vec<f64>> = Vec::with_capacity(z.len());
        for (col, tag) in z.into_iter().zip(tags) {
            let mut v = col;
            let mv0 = m.matvec_alloc(&v);
            let orig = dot(&v, &mv0);
            if !(orig > 0.0) {
                continue; // zero or non-finite column
            }
            for _pass in 0..2 {
                for (u, mu) in kept.iter().zip(&mz) {
                    let c = dot(mu, &v);
                    if c != 0.0 {
                        axpy(-c, u, &mut v);
                    }
                }
            }
            let mut mv = m.matvec_alloc(&v);
            let nrm2 = dot(&v, &mv);
            if !(nrm2 > DROP_RATIO * orig) {
                continue;
            }
            let s = 1.0 / nrm2.sqrt();
            for (vi, mvi) in v.iter_mut().zip(mv.iter_mut()) {
                *vi *= s;
                *mvi *= s;
            }
            kept.push(v);
            mz.push(mv);
            kept_tags.push(tag);
        }
        // refill with fresh random directions if the basis collapsed below k
        while kept.len() < k.min(n) {
            let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            for _pass in 0..2 {
                for (u, mu) in kept.iter().zip(&mz) {
                    let c = dot(mu, &v);
                    axpy(-c, u, &mut v);
                }
            }
            let mv = m.matvec_alloc(&v);
            let nrm2 = dot(&v, &mv);
            if nrm2 > 0.0 {
                let s = 1.0 / nrm2.sqrt();
                let v: Vec<f64> = v.into_iter().map(|t| t * s).collect();
                mz.push(m.matvec_alloc(&v));
                kept.push(v);
                kept_tags.push(Tag::Aux);
            }
        }
        let q = kept.len();

        // --- Rayleigh–Ritz ---------------------------------------------------
        let az: Vec<Vec<f64>> = kept.iter().map(|c| a.matvec_alloc(c)).collect();
        let mut ga = DMatrix::zeros(q, q);
        let mut gm = DMatrix::zeros(q, q);
        for i in 0..q {
            for j in i..q {
                let va = dot(&kept[i], &az[j]);
                ga[(i, j)] = va;
                ga[(j, i)] = va;
                let vm = dot(&kept[i], &mz[j]);
                gm[(i, j)] = vm;
                gm[(j, i)] = vm;
            }
        }
        let (vals, c) = dense_generalized_small(&ga, &gm)?;

        let p_take = p.min(q);
        let mut x_new: Vec<Vec<f64>> = Vec::with_capacity(p_take);
        let mut dir_new: Vec<Vec<f64>> = Vec::with_capacity(p_take);
        for i in 0..p_take {
            let mut xi = vec![0.0; n];
            let mut di = vec![0.0; n];
            for (j, zj) in kept.iter().enumerate() {
                let cj = c[(j, i)];
                if cj != 0.0 {
                    axpy(cj, zj, &mut xi);
                    if kept_tags[j] == Tag::Aux {
                        axpy(cj, zj, &mut di);
                    }
                }
            }
            x_new.push(xi);
            if iter > 1 {
                dir_new.push(di);
            }
        }
        let theta = &vals[..p_take];

        // --- fresh residuals ------------------------------------------------
        let mut residuals = Vec::with_capacity(p_take);
        let mut resid_vecs: Vec<Vec<f64>> = Vec::with_capacity(p_take);
        for (i, xi) in x_new.iter().enumerate() {
            let mut r = a.matvec_alloc(xi);
            let mxi = m.matvec_alloc(xi);
            axpy(-theta[i], &mxi, &mut r);
            residuals.push(norm2(&r));
            resid_vecs.push(r);
        }

        let worst = residuals.iter().take(k).cloned().fold(0.0, f64::max);
        if residuals.iter().take(k).all(|r| *r <= tol) && p_take >= k {
            return Ok(EigenResult {
                eigenvalues: theta.to_vec(),
                eigenvectors: x_new,
                residuals,
                iterations: iter,
            });
        }
        if worst < 0.9 * best_worst {
            best_worst = worst;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best > STALL_LIMIT {
                return Err(Error::NoConvergence { max_iters: iter, worst_residual: worst });
            }
        }

        // --- preconditioned residuals for the next sweep ---------------------
        w = resid_vecs
            .iter()
            .map(|r| {
                let mut out = vec![0.0; n];
                pre.apply(r, &mut out);
                out
            })
            .collect();
        x = x_new;
        dir = dir_new;
    }
    Err(Error::NoConvergence {
        max_iters,
        worst_residual: best_worst.min(f64::MAX),
    })
}
