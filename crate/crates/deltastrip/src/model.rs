//! Continuum model data for a planar strip with a lattice of interaction
//! curves.
//!
//! The strip is `R × (0, d)` with Dirichlet or Neumann conditions on the two
//! horizontal faces, chosen independently. A closed curve sits inside the
//! period cell `(0, ℓ) × (0, d)` and repeats with period `ℓ` along the strip;
//! cell `k` carries the coupling `ε·ω_k`, where the `ω_k` are i.i.d. draws
//! from a compactly supported density on `[a, 1]`, `−1 ≤ a < 1`.
//!
//! This module owns the model types plus the scalar quantities the rest of
//! the crate keeps asking for:
//!
//! * the transverse ground mode `(Λ₀, Ψ₀)` of the cross-section problem,
//! * the first-order coefficient `Λ₁ = ∫ f(y, 0) Ψ₀²(x₂(y)) dy` over the
//!   curve,
//! * the extremal coupling `ε*` at which the periodic cell energy over the
//!   coupling support is smallest,
//! * deterministic, stream-addressable disorder sampling.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Condition imposed on a horizontal face of the strip.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundaryCondition {
    Dirichlet,
    Neumann,
}

/// Strip cross-section and lattice data. With one unbounded direction the
/// lattice is spanned by a single vector of length `cell_length`, so the
/// transverse cell `□′` has volume `cell_length`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerGeometry {
    /// Strip width `d` (the bounded direction runs over `(0, d)`).
    pub d: f64,
    /// Lattice period `ℓ` along the strip.
    pub cell_length: f64,
    pub bc_bottom: BoundaryCondition,
    pub bc_top: BoundaryCondition,
}

impl LayerGeometry {
    pub fn new(
        d: f64,
        cell_length: f64,
        bc_bottom: BoundaryCondition,
        bc_top: BoundaryCondition,
    ) -> Result<Self> {
        if !(d.is_finite() && d > 0.0) {
            return Err(Error::InvalidGeometry(format!("strip width d = {d} must be positive")));
        }
        if !(cell_length.is_finite() && cell_length > 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "cell length {cell_length} must be positive"
            )));
        }
        Ok(LayerGeometry { d, cell_length, bc_bottom, bc_top })
    }

    /// Volume of the transverse period cell (`|□′| = ℓ` in two dimensions).
    pub fn cell_volume_prime(&self) -> f64 {
        self.cell_length
    }
}

/// Shape of the interaction manifold inside the period cell.
///
/// `Circle` is the shipped production instance. `SeparableLine` is a
/// horizontal line across the cell: it touches the lateral cell boundary and
/// makes the cell problem separable, which is exactly why it exists — it
/// admits a transcendental-equation oracle — and why production configs
/// reject it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ManifoldKind {
    Circle { center: [f64; 2], radius: f64 },
    SeparableLine { height: f64 },
}

/// Interaction curve, parametrized by arclength-compatible parameter `y`:
/// the circle by its angle, the line by the lateral coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifold {
    pub kind: ManifoldKind,
}

impl Manifold {
    pub fn circle(center_x: f64, center_y: f64, radius: f64) -> Self {
        Manifold { kind: ManifoldKind::Circle { center: [center_x, center_y], radius } }
    }

    pub fn separable_line(height: f64) -> Self {
        Manifold { kind: ManifoldKind::SeparableLine { height } }
    }

    /// Length of the parameter interval `[0, L_param)`.
    pub fn param_len(&self, geom: &LayerGeometry) -> f64 {
        match self.kind {
            ManifoldKind::Circle { .. } => std::f64::consts::TAU,
            ManifoldKind::SeparableLine { .. } => geom.cell_length,
        }
    }

    /// Point on the curve for parameter `y` (curve of the base cell `k = 0`).
    pub fn point(&self, y: f64) -> [f64; 2] {
        match self.kind {
            ManifoldKind::Circle { center, radius } => {
                [center[0] + radius * y.cos(), center[1] + radius * y.sin()]
            }
            ManifoldKind::SeparableLine { height } => [y, height],
        }
    }

    /// Unit normal at parameter `y` (outward for the circle, upward for the
    /// line).
    pub fn normal(&self, y: f64) -> [f64; 2] {
        match self.kind {
            ManifoldKind::Circle { .. } => [y.cos(), y.sin()],
            ManifoldKind::SeparableLine { .. } => [0.0, 1.0],
        }
    }

    /// Arclength weight `|x′(y)|` of the parametrization.
    pub fn arclength_weight(&self, y: f64) -> f64 {
        match self.kind {
            ManifoldKind::Circle { radius, .. } => radius,
            ManifoldKind::SeparableLine { .. } => {
                let _ = y;
                1.0
            }
        }
    }

    /// Total curve length.
    pub fn length(&self, geom: &LayerGeometry) -> f64 {
        match self.kind {
            ManifoldKind::Circle { radius, .. } => std::f64::consts::TAU * radius,
            ManifoldKind::SeparableLine { .. } => geom.cell_length,
        }
    }

    /// `true` for the separable oracle shape that production configs refuse.
    pub fn is_oracle_only(&self) -> bool {
        matches!(self.kind, ManifoldKind::SeparableLine { .. })
    }

    /// Checks that the curve stays strictly inside the period cell (circle)
    /// or strictly between the horizontal faces (line).
    pub fn validate(&self, geom: &LayerGeometry) -> Result<()> {
        match self.kind {
            ManifoldKind::Circle { center, radius } => {
                if !(radius.is_finite() && radius > 0.0) {
                    return Err(Error::InvalidGeometry(format!(
                        "circle radius {radius} must be positive"
                    )));
                }
                let margin = [
                    center[0] - radius,
                    geom.cell_length - center[0] - radius,
                    center[1] - radius,
                    geom.d - center[1] - radius,
                ];
                if margin.iter().any(|m| !(*m > 0.0)) {
                    return Err(Error::InvalidGeometry(format!(
                        "circle (center ({}, {}), radius {radius}) must stay strictly inside the cell (0, {}) x (0, {})",
                        center[0], center[1], geom.cell_length, geom.d
                    )));
                }
                Ok(())
            }
            ManifoldKind::SeparableLine { height } => {
                if height > 0.0 && height < geom.d {
                    Ok(())
                } else {
                    Err(Error::InvalidGeometry(format!(
                        "line height {height} must lie strictly inside (0, {})",
                        geom.d
                    )))
                }
            }
        }
    }
}

type ProfileFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Coupling strength `f(y, t)` along the curve; `y` is the curve parameter,
/// `t` the local coupling `ε·ω_k`. `t0` bounds the coupling values for which
/// the model data is declared valid, and assembly rejects anything larger.
#[derive(Clone)]
pub struct CouplingFunction {
    kind: CouplingKind,
    t0: f64,
}

#[derive(Clone)]
enum CouplingKind {
    Constant(f64),
    /// `f(y)`, independent of the coupling value.
    Profile(ProfileFn),
    /// `f(y, t) = Σ cᵢ(y) tⁱ`.
    PolynomialInT(Vec<ProfileFn>),
}

impl CouplingFunction {
    pub fn constant(c: f64, t0: f64) -> Result<Self> {
        Self::build(CouplingKind::Constant(c), t0)
    }

    pub fn profile(f: impl Fn(f64) -> f64 + Send + Sync + 'static, t0: f64) -> Result<Self> {
        Self::build(CouplingKind::Profile(Arc::new(f)), t0)
    }

    pub fn polynomial_in_t(coeffs: Vec<ProfileFn>, t0: f64) -> Result<Self> {
        Self::build(CouplingKind::PolynomialInT(coeffs), t0)
    }

    fn build(kind: CouplingKind, t0: f64) -> Result<Self> {
        if !(t0.is_finite() && t0 > 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "coupling validity radius t0 = {t0} must be positive"
            )));
        }
        Ok(CouplingFunction { kind, t0 })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn eval(&self, y: f64, t: f64) -> f64 {
        match &self.kind {
            CouplingKind::Constant(c) => *c,
            CouplingKind::Profile(f) => f(y),
            CouplingKind::PolynomialInT(coeffs) => {
                let mut acc = 0.0;
                let mut tp = 1.0;
                for c in coeffs {
                    acc += c(y) * tp;
                    tp *= t;
                }
                acc
            }
        }
    }

    /// Whether `f` ignores the coupling value, i.e. the interaction enters
    /// the operator linearly.
    pub fn is_t_independent(&self) -> bool {
        match &self.kind {
            CouplingKind::Constant(_) => true,
            CouplingKind::Profile(_) => true,
            CouplingKind::PolynomialInT(coeffs) => coeffs.len() <= 1,
        }
    }
}

impl fmt::Debug for CouplingFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            CouplingKind::Constant(c) => write!(f, "CouplingFunction::Constant({c})"),
            CouplingKind::Profile(_) => write!(f, "CouplingFunction::Profile(..)"),
            CouplingKind::PolynomialInT(c) => {
                write!(f, "CouplingFunction::PolynomialInT(degree {})", c.len().saturating_sub(1))
            }
        }
    }
}

/// Named density shapes for the disorder table. All of them are piecewise
/// linear, so the tabulated representation is exact.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DensityKind {
    /// Flat on `[a, 1]`.
    Uniform,
    /// Flat plateau with linear tapers to zero over the outer tenth of the
    /// support on each side.
    SmoothedUniform,
    /// Tent peaked at the midpoint of the support, zero at both ends.
    Triangular,
}

/// Number of table intervals for the density and its inverse CDF (2¹²).
pub const DENSITY_TABLE_INTERVALS: usize = 1 << 12;

/// Single-site disorder: a piecewise-linear probability density on `[a, 1]`
/// with deterministic inverse-CDF sampling.
///
/// Draws are a pure function of `(seed, stream_id, index)`: every stream is
/// an independent counter-mode RNG stream, so trials can be generated in any
/// order, on any number of threads, with identical results.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Disorder {
    a: f64,
    seed: u64,
    /// Support nodes `a = x₀ < … < x_K = 1`, uniformly spaced.
    nodes: Vec<f64>,
    /// Density values at the nodes, normalized to unit total mass.
    dens: Vec<f64>,
    /// CDF at the nodes; `cdf[0] = 0`, `cdf[K] = 1` exactly.
    cdf: Vec<f64>,
    w11: f64,
    mean: f64,
    mean_abs: f64,
}

impl Disorder {
    pub fn new(kind: DensityKind, a: f64, seed: u64) -> Result<Self> {
        let nodes = support_nodes(a)?;
        let raw: Vec<f64> = match kind {
            DensityKind::Uniform => nodes.iter().map(|_| 1.0).collect(),
            DensityKind::SmoothedUniform => {
                let w = 0.1 * (1.0 - a);
                nodes
                    .iter()
                    .map(|&x| ((x - a) / w).min((1.0 - x) / w).min(1.0).max(0.0))
                    .collect()
            }
            DensityKind::Triangular => {
                let mid = 0.5 * (a + 1.0);
                let half = 0.5 * (1.0 - a);
                nodes.iter().map(|&x| (1.0 - (x - mid).abs() / half).max(0.0)).collect()
            }
        };
        Self::from_node_values(a, raw, seed)
    }

    /// Builds a disorder from raw density values at uniformly spaced nodes on
    /// `[a, 1]` (values are renormalized to unit mass). The node count must
    /// match [`DENSITY_TABLE_INTERVALS`]` + 1`.
    pub fn from_node_values(a: f64, raw: Vec<f64>, seed: u64) -> Result<Self> {
        let nodes = support_nodes(a)?;
        if raw.len() != nodes.len() {
            return Err(Error::InvalidDensity(format!(
                "expected {} node values, got {}",
                nodes.len(),
                raw.len()
            )));
        }
        if raw.iter().any(|h| !h.is_finite() || *h < 0.0) {
            return Err(Error::InvalidDensity(
                "density values must be finite and nonnegative".into(),
            ));
        }
        let step = (1.0 - a) / DENSITY_TABLE_INTERVALS as f64;
        let mass: f64 =
            raw.windows(2).map(|w| 0.5 * (w[0] + w[1]) * step).sum();
        if mass <= 0.0 {
            return Err(Error::InvalidDensity("density has zero total mass".into()));
        }
        let dens: Vec<f64> = raw.iter().map(|h| h / mass).collect();

        // cumulative trapezoid; pin the endpoint to 1 exactly so the sampler
        // never sees a gap at the top
        let mut cdf = Vec::with_capacity(dens.len());
        cdf.push(0.0);
        let mut acc = 0.0;
        for w in dens.windows(2) {
            acc += 0.5 * (w[0] + w[1]) * step;
            cdf.push(acc);
        }
        let total = *cdf.last().expect("nonempty cdf");
        for c in cdf.iter_mut() {
            *c /= total;
        }

        // Moments, exactly per linear segment.
        let mut mean = 0.0;
        let mut mean_abs = 0.0;
        for (i, w) in dens.windows(2).enumerate() {
            let x0 = nodes[i];
            mean += segment_first_moment(x0, step, w[0], w[1], false);
            mean_abs += segment_first_moment(x0, step, w[0], w[1], true);
        }

        // Bounded-variation norm of the extension by zero: total mass, total
        // slope variation, and the two edge jumps. This equals the Sobolev
        // W^{1,1}(R) norm whenever the table vanishes at the support edges.
        let var: f64 = dens.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
        let w11 = 1.0 + var + dens[0] + dens[dens.len() - 1];

        Ok(Disorder { a, seed, nodes, dens, cdf, w11, mean, mean_abs })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `∫|h| + ∫|h′| + |h(a)| + |h(1)|`; see the constructor note.
    pub fn w11_norm(&self) -> f64 {
        self.w11
    }

    /// `E[ω]`, exact for the tabulated density.
    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// `E|ω|`, exact for the tabulated density.
    pub fn mean_abs(&self) -> f64 {
        self.mean_abs
    }

    /// Piecewise-linear density value at `t` (zero outside the support).
    pub fn density(&self, t: f64) -> f64 {
        if t < self.a || t > 1.0 {
            return 0.0;
        }
        let (i, s) = self.locate(t);
        self.dens[i] + (self.dens[i + 1] - self.dens[i]) * s
    }

    /// CDF at `t`, exact for the tabulated density.
    pub fn cdf(&self, t: f64) -> f64 {
        if t <= self.a {
            return 0.0;
        }
        if t >= 1.0 {
            return 1.0;
        }
        let (i, s) = self.locate(t);
        let step = self.step();
        let h0 = self.dens[i];
        let h1 = self.dens[i + 1];
        self.cdf[i] + step * s * (h0 + 0.5 * (h1 - h0) * s)
    }

    fn step(&self) -> f64 {
        (1.0 - self.a) / DENSITY_TABLE_INTERVALS as f64
    }

    fn locate(&self, t: f64) -> (usize, f64) {
        let step = self.step();
        let raw = ((t - self.a) / step).floor();
        let i = (raw as usize).min(DENSITY_TABLE_INTERVALS - 1);
        ((i), ((t - self.nodes[i]) / step).clamp(0.0, 1.0))
    }

    /// Inverse CDF with take-the-left tie-breaking on table plateaus.
    pub fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        // greatest i with cdf[i] <= u
        let i = match self.cdf.binary_search_by(|c| c.partial_cmp(&u).expect("finite cdf")) {
            Ok(mut hit) => {
                // walk left over exact ties so plateaus resolve to their left node
                while hit > 0 && self.cdf[hit - 1] == u {
                    hit -= 1;
                }
                hit
            }
            Err(ins) => ins.saturating_sub(1),
        };
        if i >= DENSITY_TABLE_INTERVALS {
            return 1.0;
        }
        let q = u - self.cdf[i];
        if q <= 0.0 {
            return self.nodes[i];
        }
        let step = self.step();
        let h0 = self.dens[i];
        let h1 = self.dens[i + 1];
        let alpha = 0.5 * (h1 - h0) / step;
        // stable root of alpha s^2 + h0 s - q = 0 with s in [0, step]
        let disc = (h0 * h0 + 4.0 * alpha * q).max(0.0).sqrt();
        let denom = h0 + disc;
        let s = if denom > 0.0 { 2.0 * q / denom } else { 0.0 };
        (self.nodes[i] + s.min(step)).min(1.0)
    }

    /// Draws `count` i.i.d. values; fully determined by `(seed, stream_id)`.
    pub fn sample(&self, count: usize, stream_id: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream_id);
        (0..count).map(|_| self.quantile(rng.random::<f64>())).collect()
    }

    /// Exact integral of the tabulated density over `[lo, hi]`.
    pub fn mass_between(&self, lo: f64, hi: f64) -> f64 {
        self.cdf(hi) - self.cdf(lo)
    }
}

fn support_nodes(a: f64) -> Result<Vec<f64>> {
    if !(a.is_finite() && (-1.0..1.0).contains(&a)) {
        return Err(Error::InvalidDensity(format!(
            "support minimum a = {a} must satisfy -1 <= a < 1"
        )));
    }
    let step = (1.0 - a) / DENSITY_TABLE_INTERVALS as f64;
    let mut nodes: Vec<f64> =
        (0..=DENSITY_TABLE_INTERVALS).map(|i| a + step * i as f64).collect();
    *nodes.last_mut().expect("nonempty") = 1.0;
    Ok(nodes)
}

/// `∫ t·h(t) dt` (or `∫ |t|·h(t) dt`) over one linear segment, splitting at
/// zero when the segment straddles it.
fn segment_first_moment(x0: f64, w: f64, h0: f64, h1: f64, absolute: bool) -> f64 {
    let x1 = x0 + w;
    if absolute && x0 < 0.0 && x1 > 0.0 {
        let s = -x0;
        let h_mid = h0 + (h1 - h0) * s / w;
        return segment_first_moment(x0, s, h0, h_mid, true)
            + segment_first_moment(0.0, w - s, h_mid, h1, true);
    }
    let sign = if absolute && x1 <= 0.0 { -1.0 } else { 1.0 };
    // ∫_0^w (x0 + s)(h0 + (h1-h0)s/w) ds
    let dh = h1 - h0;
    sign * (x0 * w * 0.5 * (h0 + h1) + w * w * (h0 / 2.0 + dh / 3.0))
}

/// Tiles a coupling pattern cyclically over `box_cells` cells.
///
/// The pattern length must equal the stated period, and every value must lie
/// in the disorder support `[a, 1]`.
pub fn periodic_configuration(
    value_pattern: &[f64],
    period: usize,
    box_cells: usize,
    a: f64,
) -> Result<Vec<f64>> {
    if value_pattern.is_empty() || value_pattern.len() != period {
        return Err(Error::InvalidArgument(format!(
            "pattern length {} must equal the period {period} and be nonzero",
            value_pattern.len()
        )));
    }
    for &v in value_pattern {
        if !(v.is_finite() && v >= a && v <= 1.0) {
            return Err(Error::ValueOutOfSupport { value: v, a });
        }
    }
    Ok((0..box_cells).map(|k| value_pattern[k % period]).collect())
}

/// Ground transverse mode of `−d²/dx²` on `(0, d)` with the strip's
/// horizontal boundary conditions, normalized to `‖Ψ₀‖_{L²(0,d)} = 1/√|□′|`
/// (unit mass over the full period cell).
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TransverseMode {
    /// Ground transverse eigenvalue `Λ₀`.
    pub lambda0: f64,
    amp: f64,
    wavenumber: f64,
    shape: ModeShape,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
enum ModeShape {
    Sine,
    Cosine,
    Constant,
}

impl TransverseMode {
    /// `Ψ₀(x₂)`, strictly positive on the open interval.
    pub fn psi0(&self, x2: f64) -> f64 {
        match self.shape {
            ModeShape::Sine => self.amp * (self.wavenumber * x2).sin(),
            ModeShape::Cosine => self.amp * (self.wavenumber * x2).cos(),
            ModeShape::Constant => self.amp,
        }
    }
}

/// Solves the transverse cross-section problem in closed form.
pub fn transverse_mode(geom: &LayerGeometry) -> TransverseMode {
    use BoundaryCondition::{Dirichlet, Neumann};
    let d = geom.d;
    let vol = geom.cell_volume_prime();
    let amp_half = (2.0 / (d * vol)).sqrt(); // L²(□)-normalized sin/cos amplitude
    match (geom.bc_bottom, geom.bc_top) {
        (Dirichlet, Dirichlet) => {
            let k = std::f64::consts::PI / d;
            TransverseMode { lambda0: k * k, amp: amp_half, wavenumber: k, shape: ModeShape::Sine }
        }
        (Neumann, Neumann) => TransverseMode {
            lambda0: 0.0,
            amp: 1.0 / (d * vol).sqrt(),
            wavenumber: 0.0,
            shape: ModeShape::Constant,
        },
        (Dirichlet, Neumann) => {
            let k = std::f64::consts::PI / (2.0 * d);
            TransverseMode { lambda0: k * k, amp: amp_half, wavenumber: k, shape: ModeShape::Sine }
        }
        (Neumann, Dirichlet) => {
            let k = std::f64::consts::PI / (2.0 * d);
            TransverseMode {
                lambda0: k * k,
                amp: amp_half,
                wavenumber: k,
                shape: ModeShape::Cosine,
            }
        }
    }
}

/// Relative tolerance for the order-doubling convergence check in
/// [`lambda1`].
const LAMBDA1_DOUBLING_TOL: f64 = 1e-8;

/// First-order coefficient `Λ₁ = ∫_{M₀} f(y, 0) Ψ₀²(x₂(y)) dy` (arclength
/// measure on the curve).
///
/// Composite midpoint quadrature in the curve parameter at `order` nodes; the
/// value is accepted only if doubling the order moves it by at most `1e-8`
/// relative, and the doubled-order value is returned.
pub fn lambda1(
    geom: &LayerGeometry,
    manifold: &Manifold,
    f: &CouplingFunction,
    mode: &TransverseMode,
    order: usize,
) -> Result<f64> {
    let order = order.max(8);
    let coarse = lambda1_at_order(geom, manifold, f, mode, order);
    let fine = lambda1_at_order(geom, manifold, f, mode, 2 * order);
    let scale = fine.abs().max(1e-300);
    let rel_change = (fine - coarse).abs() / scale;
    if rel_change > LAMBDA1_DOUBLING_TOL && (fine - coarse).abs() > 1e-14 {
        return Err(Error::QuadratureNotConverged { order, rel_change });
    }
    Ok(fine)
}

fn lambda1_at_order(
    geom: &LayerGeometry,
    manifold: &Manifold,
    f: &CouplingFunction,
    mode: &TransverseMode,
    order: usize,
) -> f64 {
    let l = manifold.param_len(geom);
    let step = l / order as f64;
    let mut acc = 0.0;
    for q in 0..order {
        let y = (q as f64 + 0.5) * step;
        let x = manifold.point(y);
        let psi = mode.psi0(x[1]);
        acc += f.eval(y, 0.0) * psi * psi * manifold.arclength_weight(y) * step;
    }
    acc
}

/// Default threshold below which `|Λ₁|` counts as a violated main assumption.
pub const LAMBDA1_THRESHOLD: f64 = 1e-8;

/// Extremal coupling `ε*`: the endpoint of the coupling support `[εa, ε]` at
/// which the periodic cell ground energy is smallest.
///
/// The cell energy is concave in the coupling with slope `−Λ₁` at zero, so
/// for small `ε` the minimum sits at `ε` when `Λ₁ > 0` and at `ε·a` when
/// `Λ₁ < 0`. A vanishing `Λ₁` leaves no first-order selection and is
/// rejected.
pub fn epsilon_star(lambda1: f64, eps: f64, a: f64) -> Result<f64> {
    epsilon_star_with_threshold(lambda1, eps, a, LAMBDA1_THRESHOLD)
}

pub fn epsilon_star_with_threshold(
    lambda1: f64,
    eps: f64,
    a: f64,
    threshold: f64,
) -> Result<f64> {
    if lambda1.abs() < threshold {
        return Err(Error::MainAssumptionViolated { lambda1_abs: lambda1.abs(), threshold });
    }
    Ok(if lambda1 > 0.0 { eps } else { eps * a })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use std::f64::consts::PI;

    fn geom(d: f64, bc: (BoundaryCondition, BoundaryCondition)) -> LayerGeometry {
        LayerGeometry::new(d, 1.0, bc.0, bc.1).unwrap()
    }

    use BoundaryCondition::{Dirichlet, Neumann};

    #[test]
    fn transverse_mode_dirichlet_dirichlet() {
        let g = geom(PI, (Dirichlet, Dirichlet));
        let m = transverse_mode(&g);
        assert_relative_eq!(m.lambda0, 1.0, epsilon = 1e-14);
        // Ψ₀ = sqrt(2/π)·sin(x)
        assert_relative_eq!(m.psi0(PI / 2.0), (2.0 / PI).sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn transverse_mode_neumann_neumann() {
        let g = geom(2.0, (Neumann, Neumann));
        let m = transverse_mode(&g);
        assert_abs_diff_eq!(m.lambda0, 0.0);
        assert_relative_eq!(m.psi0(0.77), 1.0 / 2.0f64.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn transverse_mode_mixed() {
        let g = geom(1.0, (Dirichlet, Neumann));
        let m = transverse_mode(&g);
        assert_relative_eq!(m.lambda0, PI * PI / 4.0, epsilon = 1e-14);
        assert_relative_eq!(m.psi0(0.5), 2.0f64.sqrt() * (PI / 4.0).sin(), epsilon = 1e-14);
        // mirrored variant peaks at the bottom instead
        let g2 = geom(1.0, (Neumann, Dirichlet));
        let m2 = transverse_mode(&g2);
        assert_relative_eq!(m2.lambda0, PI * PI / 4.0, epsilon = 1e-14);
        assert_relative_eq!(m2.psi0(0.5), m.psi0(0.5), epsilon = 1e-14);
        assert_relative_eq!(m2.psi0(0.1), m.psi0(0.9), epsilon = 1e-12);
    }

    #[test]
    fn mode_normalization_unit_cell_mass() {
        // ∫_cell Ψ₀² = |□′|·∫_0^d Ψ₀² = 1 for every boundary combination
        for bc in [
            (Dirichlet, Dirichlet),
            (Neumann, Neumann),
            (Dirichlet, Neumann),
            (Neumann, Dirichlet),
        ] {
            let g = LayerGeometry::new(1.7, 0.9, bc.0, bc.1).unwrap();
            let m = transverse_mode(&g);
            let n = 20_000;
            let h = g.d / n as f64;
            let mut norm = 0.0;
            for i in 0..n {
                let x = (i as f64 + 0.5) * h;
                norm += m.psi0(x).powi(2) * h;
            }
            assert_relative_eq!(norm * g.cell_volume_prime(), 1.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn lambda1_neumann_circle_closed_form() {
        // Ψ₀² is constant 1/(d·ℓ), so Λ₁ = c·2πr/(d·ℓ)
        let g = LayerGeometry::new(2.0, 1.5, Neumann, Neumann).unwrap();
        let mode = transverse_mode(&g);
        let mf = Manifold::circle(0.7, 1.0, 0.35);
        let f = CouplingFunction::constant(1.3, 1.0).unwrap();
        let got = lambda1(&g, &mf, &f, &mode, 64).unwrap();
        let expect = 1.3 * std::f64::consts::TAU * 0.35 / (2.0 * 1.5);
        assert_relative_eq!(got, expect, epsilon = 1e-12);
    }

    #[test]
    fn lambda1_dirichlet_circle_matches_bessel_value() {
        // d = π, circle center (1/2, π/2), radius 1/4, f ≡ 1:
        //   Λ₁ = (2/π)·(1/4)·∫_0^{2π} cos²((1/4)·sin θ) dθ = (1 + J₀(1/2))/2,
        // evaluated independently from the Bessel series
        //   J₀(x) = Σ (−1)^m (x²/4)^m / (m!)².
        let g = LayerGeometry::new(PI, 1.0, Dirichlet, Dirichlet).unwrap();
        let mode = transverse_mode(&g);
        let mf = Manifold::circle(0.5, PI / 2.0, 0.25);
        let f = CouplingFunction::constant(1.0, 1.0).unwrap();
        let got = lambda1(&g, &mf, &f, &mode, 256).unwrap();
        let mut j0 = 0.0;
        let mut term: f64 = 1.0;
        let q = 0.0625; // (x/2)² at x = 1/2
        for m in 0..20 {
            j0 += term;
            let mm = (m + 1) as f64;
            term *= -q / (mm * mm);
        }
        let expect = 0.5 * (1.0 + j0);
        assert_relative_eq!(expect, 0.969_234_903_620_406_6, epsilon = 1e-14);
        assert_relative_eq!(got, expect, epsilon = 1e-10);
    }

    #[test]
    fn lambda1_is_linear_in_f() {
        let g = LayerGeometry::new(PI, 1.0, Dirichlet, Dirichlet).unwrap();
        let mode = transverse_mode(&g);
        let mf = Manifold::circle(0.5, 1.3, 0.3);
        let f1 = CouplingFunction::profile(|y: f64| 1.0 + 0.5 * y.cos(), 1.0).unwrap();
        let f2 = CouplingFunction::profile(|y: f64| y.sin().powi(2), 1.0).unwrap();
        let combo =
            CouplingFunction::profile(|y: f64| 2.0 * (1.0 + 0.5 * y.cos()) - 0.7 * y.sin().powi(2), 1.0)
                .unwrap();
        let v1 = lambda1(&g, &mf, &f1, &mode, 128).unwrap();
        let v2 = lambda1(&g, &mf, &f2, &mode, 128).unwrap();
        let vc = lambda1(&g, &mf, &combo, &mode, 128).unwrap();
        assert_abs_diff_eq!(vc, 2.0 * v1 - 0.7 * v2, epsilon = 1e-10);
    }

    #[test]
    fn lambda1_separable_line_closed_form() {
        // line at height h₀: Λ₁ = ℓ·Ψ₀²(h₀)
        let g = LayerGeometry::new(1.0, 1.0, Dirichlet, Dirichlet).unwrap();
        let mode = transverse_mode(&g);
        let mf = Manifold::separable_line(1.0 / 3.0);
        let f = CouplingFunction::constant(1.0, 1.0).unwrap();
        let got = lambda1(&g, &mf, &f, &mode, 64).unwrap();
        let expect = 2.0 * (PI / 3.0).sin().powi(2);
        assert_relative_eq!(got, expect, epsilon = 1e-12);
    }

    #[test]
    fn epsilon_star_picks_the_energy_minimizing_endpoint() {
        // The cell energy moves as Λ₀ − ηΛ₁ to first order, so positive Λ₁
        // selects the right endpoint ε and negative Λ₁ the left endpoint εa.
        assert_relative_eq!(epsilon_star(0.3, 0.01, -1.0).unwrap(), 0.01);
        assert_relative_eq!(epsilon_star(-0.3, 0.01, -1.0).unwrap(), -0.01);
        assert_relative_eq!(epsilon_star(-0.3, 0.01, 0.5).unwrap(), 0.005);
        let err = epsilon_star(1e-9, 0.01, -1.0).unwrap_err();
        assert!(matches!(err, Error::MainAssumptionViolated { .. }));
    }

    #[test]
    fn periodic_configuration_truncates_cyclically() {
        let got = periodic_configuration(&[0.5, -0.5, 0.25], 3, 7, -1.0).unwrap();
        assert_eq!(got, vec![0.5, -0.5, 0.25, 0.5, -0.5, 0.25, 0.5]);
        let err = periodic_configuration(&[2.0], 1, 3, -1.0).unwrap_err();
        assert!(matches!(err, Error::ValueOutOfSupport { .. }));
        // values below the support minimum are rejected too
        let err = periodic_configuration(&[-0.9], 1, 3, -0.5).unwrap_err();
        assert!(matches!(err, Error::ValueOutOfSupport { .. }));
    }

    #[test]
    fn disorder_tables_are_normalized() {
        for kind in [DensityKind::Uniform, DensityKind::SmoothedUniform, DensityKind::Triangular] {
            let dis = Disorder::new(kind, -1.0, 7).unwrap();
            assert_relative_eq!(dis.cdf(1.0), 1.0, epsilon = 1e-10);
            assert_relative_eq!(dis.mass_between(-1.0, 1.0), 1.0, epsilon = 1e-10);
            assert!(dis.density(0.0) > 0.0);
        }
    }

    #[test]
    fn disorder_sampling_is_deterministic_and_stream_addressed() {
        let dis = Disorder::new(DensityKind::SmoothedUniform, -1.0, 42).unwrap();
        let s1 = dis.sample(100, 3);
        let s2 = dis.sample(100, 3);
        assert_eq!(s1, s2);
        let s3 = dis.sample(100, 4);
        assert_ne!(s1, s3);
        // samples never leave the support and reach near its bottom edge
        let many = dis.sample(100_000, 0);
        let min = many.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(min >= -1.0);
        assert!(min < -0.99, "min sample {min} should approach the support edge");
    }

    #[test]
    fn disorder_sample_mean_matches_table_mean() {
        let dis = Disorder::new(DensityKind::Triangular, -0.5, 11).unwrap();
        let n = 100_000;
        let draws = dis.sample(n, 1);
        let emp_mean: f64 = draws.iter().sum::<f64>() / n as f64;
        // second moment for the standard error, independently via Simpson
        let mut m2 = 0.0;
        let steps = 100_000;
        let h = (1.0 - dis.a()) / steps as f64;
        for i in 0..steps {
            let t = dis.a() + (i as f64 + 0.5) * h;
            m2 += t * t * dis.density(t) * h;
        }
        let sd = (m2 - dis.mean() * dis.mean()).sqrt();
        let se = sd / (n as f64).sqrt();
        assert!(
            (emp_mean - dis.mean()).abs() < 3.0 * se,
            "empirical mean {emp_mean} vs table mean {} (3 SE = {})",
            dis.mean(),
            3.0 * se
        );
        // triangular on [-1/2, 1] has mean at the midpoint 1/4
        assert_relative_eq!(dis.mean(), 0.25, epsilon = 1e-10);
    }

    #[test]
    fn disorder_samples_pass_chi_square_goodness_of_fit() {
        let dis = Disorder::new(DensityKind::SmoothedUniform, -1.0, 5).unwrap();
        let n = 100_000;
        let draws = dis.sample(n, 2);
        let bins = 50;
        let mut observed = vec![0usize; bins];
        for &x in &draws {
            let b = (((x - dis.a()) / (1.0 - dis.a()) * bins as f64) as usize).min(bins - 1);
            observed[b] += 1;
        }
        let mut stat = 0.0;
        for (b, &obs) in observed.iter().enumerate() {
            let lo = dis.a() + (1.0 - dis.a()) * b as f64 / bins as f64;
            let hi = dis.a() + (1.0 - dis.a()) * (b + 1) as f64 / bins as f64;
            let expect = dis.mass_between(lo, hi) * n as f64;
            assert!(expect > 5.0, "bin {b} expectation too small for the test");
            let diff = obs as f64 - expect;
            stat += diff * diff / expect;
        }
        // 0.99 quantile of chi-square with 49 degrees of freedom
        assert!(stat < 74.9195, "chi-square statistic {stat} exceeds the 1% critical value");
    }

    #[test]
    fn quantile_and_cdf_are_mutually_inverse() {
        let dis = Disorder::new(DensityKind::SmoothedUniform, -0.25, 1).unwrap();
        for &u in &[0.0, 1e-6, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0 - 1e-9, 1.0] {
            let t = dis.quantile(u);
            assert!(t >= dis.a() && t <= 1.0);
            assert_abs_diff_eq!(dis.cdf(t), u, epsilon = 1e-9);
        }
    }

    #[test]
    fn w11_norm_uniform_closed_form() {
        // h = 1/(1−a) flat: mass 1, no interior variation, two edge jumps
        let a = -1.0;
        let dis = Disorder::new(DensityKind::Uniform, a, 0).unwrap();
        assert_relative_eq!(dis.w11_norm(), 1.0 + 2.0 / (1.0 - a), epsilon = 1e-10);
    }

    #[test]
    fn manifold_geometry_checks() {
        let g = LayerGeometry::new(1.0, 1.0, Neumann, Neumann).unwrap();
        assert!(Manifold::circle(0.5, 0.5, 0.3).validate(&g).is_ok());
        assert!(Manifold::circle(0.5, 0.5, 0.5).validate(&g).is_err());
        assert!(Manifold::circle(0.2, 0.5, 0.3).validate(&g).is_err());
        assert!(Manifold::separable_line(0.33).validate(&g).is_ok());
        assert!(Manifold::separable_line(1.0).validate(&g).is_err());
        assert!(Manifold::circle(0.5, 0.5, 0.3).validate(&g).is_ok());
        // unit normal and arclength weight on the circle
        let mf = Manifold::circle(0.5, 0.5, 0.25);
        for q in 0..8 {
            let y = q as f64 * std::f64::consts::TAU / 8.0;
            let nr = mf.normal(y);
            assert_relative_eq!(nr[0].hypot(nr[1]), 1.0, epsilon = 1e-14);
            assert_relative_eq!(mf.arclength_weight(y), 0.25, epsilon = 1e-15);
        }
    }

    #[test]
    fn coupling_polynomial_in_t() {
        let f = CouplingFunction::polynomial_in_t(
            vec![Arc::new(|_| 1.0), Arc::new(|y: f64| y)],
            2.0,
        )
        .unwrap();
        assert!(!f.is_t_independent());
        assert_relative_eq!(f.eval(3.0, 0.5), 1.0 + 3.0 * 0.5);
        let c = CouplingFunction::constant(2.0, 1.0).unwrap();
        assert!(c.is_t_independent());
        assert_relative_eq!(c.eval(9.9, -0.3), 2.0);
    }
}
