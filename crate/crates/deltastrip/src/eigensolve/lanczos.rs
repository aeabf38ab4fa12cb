//! Shift-invert Lanczos fallback with deflation.
//!
//! A shift `σ` strictly below the whole spectrum is found by decreasing a
//! Gershgorin-style estimate until the `LDLᵀ` inertia of `A − σM` certifies
//! zero eigenvalues below it. The operator `(A − σM)⁻¹M` is then symmetric
//! positive definite in the M-inner product and its largest Ritz values map
//! to the lowest pencil eigenvalues through `λ = σ + 1/μ`.
//!
//! Multiplicities are handled by *deflation*: once a pair converges, later
//! sweeps are re-orthogonalized against it, so repeated eigenvalues surface
//! one copy per sweep instead of being invisible to a single Krylov space.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::precond::lower_bound_estimate;
use super::{axpy, dot, norm2, EigenResult};
use crate::error::{Error, Result};
use crate::sparse::{Csr, LdlFactor};

/// Maximum deflation rounds (fresh Krylov sweeps).
const MAX_ROUNDS: usize = 8;

pub(crate) fn shift_invert_lowest(
    a: &Csr,
    m: &Csr,
    k: usize,
    tol: f64,
    seed: u64,
) -> Result<EigenResult> {
    let n = a.n();
    let k = k.min(n);

    // --- certified sub-spectrum shift -----------------------------------
    let est = lower_bound_estimate(a, m);
    let mut sigma = est - 0.01 * (1.0 + est.abs());
    let mut fact = None;
    for j in 0..40 {
        let shifted = Csr::linear_combination(&[(1.0, a), (-sigma, m)]);
        if let Ok(f) = LdlFactor::new(&shifted) {
            let inertia = f.inertia();
            if inertia.negative == 0 && inertia.zero == 0 {
                fact = Some(f);
                break;
            }
        }
        sigma -= (1.0 + sigma.abs()) * 2.0_f64.powi(j);
    }
    let fact = fact.ok_or(Error::NoConvergence { max_iters: 40, worst_residual: f64::NAN })?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5111_c0de);
    let mut found_vals: Vec<f64> = Vec::new();
    let mut found_vecs: Vec<Vec<f64>> = Vec::new();
    let mut found_mvecs: Vec<Vec<f64>> = Vec::new();
    let mut steps = (6 * k).max(60).min(n);
    let mut rounds = 0;
    let mut worst_residual = f64::INFINITY;

    while found_vals.len() < k {
        rounds += 1;
        if rounds > MAX_ROUNDS {
            return Err(Error::NoConvergence { max_iters: rounds, worst_residual });
        }

        // --- one deflated Lanczos sweep -----------------------------------
        let mut vs: Vec<Vec<f64>> = Vec::with_capacity(steps);
        let mut mvs: Vec<Vec<f64>> = Vec::with_capacity(steps);
        let mut alphas: Vec<f64> = Vec::new();
        let mut betas: Vec<f64> = Vec::new();

        let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        deflate(&mut v, &found_vecs, &found_mvecs);
        let mv = m.matvec_alloc(&v);
        let nrm = dot(&v, &mv).sqrt();
        if !(nrm > 0.0) {
            continue;
        }
        for t in v.iter_mut() {
            *t /= nrm;
        }
        vs.push(v);
        mvs.push(m.matvec_alloc(&vs[0]));

        for step in 0..steps {
            // u = (A − σM)⁻¹ M v_step
            let mut u = fact.solve(&mvs[step]);
            let alpha = {
                let mu = m.matvec_alloc(&u);
                dot(&vs[step], &mu)
            };
            axpy(-alpha, &vs[step], &mut u);
            if step > 0 {
                axpy(-betas[step - 1], &vs[step - 1], &mut u);
            }
            // full re-orthogonalization (two passes) + deflation
            for _pass in 0..2 {
                deflate(&mut u, &found_vecs, &found_mvecs);
                for (vj, mvj) in vs.iter().zip(&mvs) {
                    let c = dot(mvj, &u);
                    if c != 0.0 {
                        axpy(-c, vj, &mut u);
                    }
                }
            }
            alphas.push(alpha);
            let mu = m.matvec_alloc(&u);
            let beta = dot(&u, &mu).sqrt();
            let scale = alphas.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()));
            if !(beta > 1e-13 * scale.max(1.0)) {
                break; // Krylov space exhausted
            }
            betas.push(beta);
            for t in u.iter_mut() {
                *t /= beta;
            }
            mvs.push(m.matvec_alloc(&u));
            vs.push(u);
        }

        // --- Ritz extraction from the tridiagonal -------------------------
        let q = alphas.len();
        if q == 0 {
            continue;
        }
        let mut tri = DMatrix::zeros(q, q);
        for i in 0..q {
            tri[(i, i)] = alphas[i];
            if i + 1 < q {
                tri[(i, i + 1)] = betas[i];
                tri[(i + 1, i)] = betas[i];
            }
        }
        let eig = nalgebra::linalg::SymmetricEigen::new(tri);
        let mut order: Vec<usize> = (0..q).collect();
        // largest μ first — closest eigenvalues above σ
        order.sort_by(|&i, &j| {
            eig.eigenvalues[j].partial_cmp(&eig.eigenvalues[i]).expect("finite Ritz values")
        });

        let mut converged_any = false;
        for &idx in &order {
            let mu = eig.eigenvalues[idx];
            if mu <= 0.0 {
                break; // beyond the positive branch: no more usable pairs
            }
            let lam = sigma + 1.0 / mu;
            let mut u = vec![0.0; n];
            for (j, vj) in vs.iter().enumerate().take(q) {
                axpy(eig.eigenvectors[(j, idx)], vj, &mut u);
            }
            // deflate once more and M-normalize before the residual check
            deflate(&mut u, &found_vecs, &found_mvecs);
            let mu_vec = m.matvec_alloc(&u);
            let nrm = dot(&u, &mu_vec).sqrt();
            if !(nrm > 1e-8) {
                continue; // fully inside the deflated space — duplicate
            }
            for t in u.iter_mut() {
                *t /= nrm;
            }
            let au = a.matvec_alloc(&u);
            let mu_vec = m.matvec_alloc(&u);
            let mut r = au;
            axpy(-lam, &mu_vec, &mut r);
            let res = norm2(&r);
            worst_residual = worst_residual.min(res);
            if res <= tol {
                found_vals.push(lam);
                found_mvecs.push(m.matvec_alloc(&u));
                found_vecs.push(u);
                converged_any = true;
                if found_vals.len() >= k + 2 {
                    break;
                }
            } else {
                break; // ascending λ: later pairs are even less converged
            }
        }
        if !converged_any {
            steps = (steps * 2).min(n).max(steps + 1);
        }
    }

    // --- sort, truncate, final certificates ------------------------------
    let mut order: Vec<usize> = (0..found_vals.len()).collect();
    order.sort_by(|&i, &j| found_vals[i].partial_cmp(&found_vals[j]).expect("finite"));
    let mut eigenvalues = Vec::with_capacity(k);
    let mut eigenvectors = Vec::with_capacity(k);
    let mut residuals = Vec::with_capacity(k);
    for &i in order.iter().take(k) {
        let u = found_vecs[i].clone();
        let au = a.matvec_alloc(&u);
        let mu = m.matvec_alloc(&u);
        let mut r = au;
        axpy(-found_vals[i], &mu, &mut r);
        eigenvalues.push(found_vals[i]);
        residuals.push(norm2(&r));
        eigenvectors.push(u);
    }
    Ok(EigenResult { eigenvalues, eigenvectors, residuals, iterations: rounds })
}

/// Removes the M-orthogonal projection onto the found eigenvectors.
fn deflate(v: &mut [f64], vecs: &[Vec<f64>], mvecs: &[Vec<f64>]) {
    for (u, mu) in vecs.iter().zip(mvecs) {
        let c = dot(mu, v);
        if c != 0.0 {
            axpy(-c, u, v);
        }
    }
}
