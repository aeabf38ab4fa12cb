//! Independent one-dimensional reference for a horizontal coupled line.
//!
//! A horizontal line at height `h₀` across the whole cell separates the
//! two-dimensional problem: the ground energy equals the lowest eigenvalue
//! of `−v'' − σ δ(x₂ − h₀)` on `(0, d)` with Dirichlet ends, which solves a
//! transcendental dispersion relation. This module finds that root by plain
//! bisection and knows nothing about grids or finite elements, so it serves
//! as an external check on the 2-D solver.
//!
//! Dispersion relations (ground branch, `σ_c = 1/h₀ + 1/(d−h₀)`):
//! * `σ < σ_c`: `Λ = k²` with `k(cot(k h₀) + cot(k(d−h₀))) = σ`,
//!   `k ∈ (0, π/max(h₀, d−h₀))`.
//! * `σ = σ_c`: `Λ = 0`.
//! * `σ > σ_c`: `Λ = −β²` with `β(coth(β h₀) + coth(β(d−h₀))) = σ`.

use crate::error::{Error, Result};

/// Bisection iteration count (more than enough to exhaust an `f64`).
const BISECT_ITERS: usize = 200;

/// Coupling strength at which the ground energy crosses zero.
pub fn critical_coupling(d: f64, h0: f64) -> Result<f64> {
    validate(d, h0)?;
    Ok(1.0 / h0 + 1.0 / (d - h0))
}

/// Ground energy of the Dirichlet interval with a point coupling `σ` at
/// `h₀`, via bisection on the dispersion relation.
pub fn separable_line_lambda(d: f64, h0: f64, sigma: f64) -> Result<f64> {
    validate(d, h0)?;
    let sigma_c = 1.0 / h0 + 1.0 / (d - h0);
    if sigma == sigma_c {
        return Ok(0.0);
    }
    if sigma < sigma_c {
        // positive branch: g is strictly decreasing from σ_c to −∞ on the
        // bracket, so the sign change encloses the unique nodeless root
        let g = |k: f64| k * (1.0 / (k * h0).tan() + 1.0 / (k * (d - h0)).tan()) - sigma;
        let pole = std::f64::consts::PI / h0.max(d - h0);
        let lo = 1e-9 * pole;
        let hi = pole * (1.0 - 1e-12);
        let k = bisect(g, lo, hi);
        Ok(k * k)
    } else {
        // negative branch: G is strictly increasing from σ_c to ∞ and
        // G(β) > 2β, so β = σ already overshoots
        let g = |b: f64| {
            b * (1.0 / (b * h0).tanh() + 1.0 / (b * (d - h0)).tanh()) - sigma
        };
        let lo = 1e-12;
        let hi = sigma.max(1.0);
        let b = bisect(g, lo, hi);
        Ok(-b * b)
    }
}

fn validate(d: f64, h0: f64) -> Result<()> {
    if !(d > 0.0) || !(h0 > 0.0) || !(h0 < d) {
        return Err(Error::InvalidGeometry(format!(
            "line height must satisfy 0 < h0 < d, got h0 = {h0}, d = {d}"
        )));
    }
    Ok(())
}

/// Plain bisection on a sign change; `f(lo)` and `f(hi)` must differ in sign.
fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    debug_assert!(flo * f(hi) <= 0.0, "bisection bracket must straddle the root");
    let lo_positive = flo > 0.0;
    for _ in 0..BISECT_ITERS {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if (f(mid) > 0.0) == lo_positive {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use std::f64::consts::PI;

    #[test]
    fn zero_coupling_recovers_the_dirichlet_ground_energy() {
        for d in [1.0, 2.5] {
            let lam = separable_line_lambda(d, d / 3.0, 0.0).unwrap();
            assert_relative_eq!(lam, (PI / d) * (PI / d), epsilon = 1e-10);
        }
    }

    #[test]
    fn critical_coupling_gives_zero_energy() {
        let d = 1.0;
        let h0 = 1.0 / 3.0;
        let sc = critical_coupling(d, h0).unwrap();
        assert_relative_eq!(sc, 4.5, epsilon = 1e-14);
        assert!(separable_line_lambda(d, h0, sc).unwrap().abs() < 1e-12);
    }

    #[test]
    fn rejects_line_outside_the_interval() {
        assert!(separable_line_lambda(1.0, 1.0, 0.5).is_err());
        assert!(separable_line_lambda(1.0, 0.0, 0.5).is_err());
        assert!(separable_line_lambda(-1.0, 0.3, 0.5).is_err());
    }

    /// Independent cross-check: a second-order finite-difference matrix for
    /// the same interval problem, solved densely, must agree with the
    /// bisection root on both branches.
    #[test]
    fn roots_match_a_dense_finite_difference_solve() {
        let d = 1.0;
        let n = 600; // intervals; h0 = d/3 is then exactly on a grid node
        let h = d / n as f64;
        let i0 = n / 3 - 1; // interior index of the node at height h0
        for sigma in [-1.0, 0.5, 2.0, 6.0] {
            let dim = n - 1;
            let mut a = DMatrix::zeros(dim, dim);
            for i in 0..dim {
                a[(i, i)] = 2.0 / (h * h);
                if i + 1 < dim {
                    a[(i, i + 1)] = -1.0 / (h * h);
                    a[(i + 1, i)] = -1.0 / (h * h);
                }
            }
            a[(i0, i0)] -= sigma / h;
            let eig = nalgebra::linalg::SymmetricEigen::new(a);
            let fd = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
            let lam = separable_line_lambda(d, d / 3.0, sigma).unwrap();
            assert!(
                (fd - lam).abs() <= 2e-4 * (1.0 + lam.abs()),
                "sigma {sigma}: fd {fd} vs dispersion {lam}"
            );
        }
    }
}
