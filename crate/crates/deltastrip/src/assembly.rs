//! Bilinear finite elements for the strip: bulk stiffness/mass, the curve
//! (delta-interaction) surface term, and boundary-condition application.
//!
//! The quadratic form being discretized is
//!
//! ```text
//!   u ↦ ∫ |∇u|² − Σ_k t_k ∫_{M_k} f(y, t_k) |u|² ds,     t_k = ε·ω_k,
//! ```
//!
//! on a box of `cells` period cells, against the mass form `∫ u²`. The grid
//! is a tensor grid that is *cell-conforming* (every lattice cell boundary is
//! a grid line) while the curve is *unfitted*: curve quadrature nodes are
//! pushed through the element shape functions, so the curve geometry is
//! exact to quadrature order and no boundary-layer meshing is needed.
//!
//! Assembly is deterministic down to the bit: element contributions are
//! accumulated in a fixed order and every symmetric pair of entries is
//! computed from the identical product expression, so `A = Aᵀ` holds exactly
//! and a translated cell produces bitwise-identical values.

use crate::error::{Error, Result};
use crate::model::{BoundaryCondition, CouplingFunction, LayerGeometry, Manifold, ManifoldKind};
use crate::sparse::{Coo, Csr};

/// Minimum admissible x-resolution per period cell.
pub const MIN_NODES_PER_CELL: usize = 8;

/// Quadrature nodes per curve arc between grid-line crossings.
const NODES_PER_ARC: usize = 8;

/// Cell-conforming tensor grid over a box of `cells` period cells.
///
/// The x-spacing is `ℓ / nodes_per_cell` exactly; the y-direction uses
/// `⌈nodes_per_cell · d / ℓ⌉` intervals so the aspect ratio of the elements
/// stays close to one.
#[derive(Clone, Copy, Debug)]
pub struct Grid {
    pub geom: LayerGeometry,
    pub cells: usize,
    pub nodes_per_cell: usize,
    /// Node counts per axis (including both boundary lines).
    pub nx: usize,
    pub ny: usize,
    pub hx: f64,
    pub hy: f64,
}

impl Grid {
    pub fn n_nodes(&self) -> usize {
        self.nx * self.ny
    }

    /// Flat index of node `(i, j)`; the y-index varies fastest, keeping the
    /// matrix bandwidth at `O(ny)`.
    pub fn node_index(&self, i: usize, j: usize) -> usize {
        i * self.ny + j
    }

    pub fn node_xy(&self, i: usize, j: usize) -> (f64, f64) {
        (i as f64 * self.hx, j as f64 * self.hy)
    }

    /// Lattice cell containing the node (nodes on a shared cell boundary
    /// belong to the left cell, except the final boundary which belongs to
    /// the last cell).
    pub fn cell_of_node(&self, node: usize) -> usize {
        let i = node / self.ny;
        (i / self.nodes_per_cell).min(self.cells - 1)
    }

    /// Box length along the strip.
    pub fn x_len(&self) -> f64 {
        self.cells as f64 * self.geom.cell_length
    }
}

/// Builds a cell-conforming tensor grid with `nodes_per_cell` x-intervals
/// per period cell.
pub fn build_grid(geom: &LayerGeometry, cells: usize, nodes_per_cell: usize) -> Result<Grid> {
    if nodes_per_cell < MIN_NODES_PER_CELL {
        return Err(Error::GridTooCoarse { nodes_per_cell });
    }
    if cells == 0 {
        return Err(Error::InvalidArgument("box must contain at least one cell".into()));
    }
    let hx = geom.cell_length / nodes_per_cell as f64;
    let ny_intervals =
        (nodes_per_cell as f64 * geom.d / geom.cell_length).ceil().max(1.0) as usize;
    Ok(Grid {
        geom: *geom,
        cells,
        nodes_per_cell,
        nx: cells * nodes_per_cell + 1,
        ny: ny_intervals + 1,
        hx,
        hy: geom.d / ny_intervals as f64,
    })
}

/// Assembles the bulk stiffness `∫∇u·∇v` and mass `∫uv` matrices with
/// bilinear tensor-product elements, before any boundary constraints.
pub fn assemble_bulk(grid: &Grid) -> (Csr, Csr) {
    let (hx, hy) = (grid.hx, grid.hy);
    let kx = [[1.0 / hx, -1.0 / hx], [-1.0 / hx, 1.0 / hx]];
    let mx = [[hx / 3.0, hx / 6.0], [hx / 6.0, hx / 3.0]];
    let ky = [[1.0 / hy, -1.0 / hy], [-1.0 / hy, 1.0 / hy]];
    let my = [[hy / 3.0, hy / 6.0], [hy / 6.0, hy / 3.0]];

    let n = grid.n_nodes();
    let n_elem = (grid.nx - 1) * (grid.ny - 1);
    let mut kcoo = Coo::with_capacity(n, 16 * n_elem);
    let mut mcoo = Coo::with_capacity(n, 16 * n_elem);
    for ex in 0..grid.nx - 1 {
        for ey in 0..grid.ny - 1 {
            for a in 0..2 {
                for b in 0..2 {
                    let r = grid.node_index(ex + a, ey + b);
                    for a2 in 0..2 {
                        for b2 in 0..2 {
                            let c = grid.node_index(ex + a2, ey + b2);
                            // symmetric because the 1D blocks are stored
                            // symmetric, so (a,b)↔(a2,b2) reads identical values
                            kcoo.push(r, c, kx[a][a2] * my[b][b2] + mx[a][a2] * ky[b][b2]);
                            mcoo.push(r, c, mx[a][a2] * my[b][b2]);
                        }
                    }
                }
            }
        }
    }
    (kcoo.into_csr(), mcoo.into_csr())
}

/// One curve quadrature node in cell-local element coordinates.
#[derive(Clone, Copy, Debug)]
struct SurfacePoint {
    /// Element column within the cell (`0..nodes_per_cell`).
    ex: usize,
    /// Element row (`0..ny-1`).
    ey: usize,
    /// Local coordinates within the element, in `[0, 1]`.
    xi: f64,
    eta: f64,
    /// Arclength weight.
    weight: f64,
    /// Curve parameter of the node (angle for the circle, x for the line).
    param: f64,
}

/// Curve quadrature rule for the base cell: the parameter interval is split
/// at every grid-line crossing and each arc gets a composite midpoint rule,
/// so no quadrature interval straddles an element boundary.
fn surface_points(grid: &Grid, manifold: &Manifold) -> Result<Vec<SurfacePoint>> {
    manifold.validate(&grid.geom)?;
    let mut pts = Vec::new();
    match manifold.kind {
        ManifoldKind::Circle { center: [cx, cy], radius: r } => {
            let tau = std::f64::consts::TAU;
            let mut cuts: Vec<f64> = Vec::new();
            for i in 0..=grid.nodes_per_cell {
                let t = (i as f64 * grid.hx - cx) / r;
                if t > -1.0 && t < 1.0 {
                    let a = t.acos();
                    cuts.push(a);
                    cuts.push(tau - a);
                }
            }
            for j in 0..grid.ny {
                let s = (j as f64 * grid.hy - cy) / r;
                if s > -1.0 && s < 1.0 {
                    let a = s.asin();
                    cuts.push(a.rem_euclid(tau));
                    cuts.push((std::f64::consts::PI - a).rem_euclid(tau));
                }
            }
            cuts.sort_by(|p, q| p.partial_cmp(q).expect("finite angles"));
            cuts.dedup_by(|p, q| (*p - *q).abs() < 1e-12);
            let arcs: Vec<(f64, f64)> = if cuts.is_empty() {
                vec![(0.0, tau)]
            } else {
                let mut arcs: Vec<(f64, f64)> =
                    cuts.windows(2).map(|w| (w[0], w[1])).collect();
                arcs.push((cuts[cuts.len() - 1], cuts[0] + tau));
                arcs
            };
            for (lo, hi) in arcs {
                let dt = (hi - lo) / NODES_PER_ARC as f64;
                if dt <= 0.0 {
                    continue;
                }
                for q in 0..NODES_PER_ARC {
                    let theta = lo + (q as f64 + 0.5) * dt;
                    let x = cx + r * theta.cos();
                    let y = cy + r * theta.sin();
                    pts.push(local_point(grid, x, y, r * dt, theta));
                }
            }
        }
        ManifoldKind::SeparableLine { height } => {
            let dt = grid.hx / NODES_PER_ARC as f64;
            for col in 0..grid.nodes_per_cell {
                for q in 0..NODES_PER_ARC {
                    let x = col as f64 * grid.hx + (q as f64 + 0.5) * dt;
                    pts.push(local_point(grid, x, height, dt, x));
                }
            }
        }
    }
    Ok(pts)
}

fn local_point(grid: &Grid, x: f64, y: f64, weight: f64, param: f64) -> SurfacePoint {
    let fx = x / grid.hx;
    let fy = y / grid.hy;
    let ex = (fx.floor() as usize).min(grid.nodes_per_cell - 1);
    let ey = (fy.floor() as usize).min(grid.ny - 2);
    SurfacePoint { ex, ey, xi: fx - ex as f64, eta: fy - ey as f64, weight, param }
}

/// Assembles the surface matrix `S = Σ_k t_k · Q_k(t_k)` where `Q_k(t)` is
/// the quadrature matrix of `∫_{M_k} f(y, t) u v ds`. Couplings are given as
/// `(cell index, value)` pairs; omitted cells contribute nothing.
///
/// Quadrature nodes are computed once in cell-local coordinates and reused
/// for every cell, so translated cells produce bitwise-identical blocks.
pub fn assemble_surface(
    grid: &Grid,
    manifold: &Manifold,
    f: &CouplingFunction,
    couplings: &[(usize, f64)],
) -> Result<Csr> {
    let pts = surface_points(grid, manifold)?;
    let ny = grid.ny;
    let mut seen = vec![false; grid.cells];
    let mut coo = Coo::with_capacity(grid.n_nodes(), 16 * pts.len() * couplings.len().max(1));
    for &(k, t) in couplings {
        if k >= grid.cells {
            return Err(Error::InvalidArgument(format!(
                "coupling refers to cell {k}, but the box has {} cells",
                grid.cells
            )));
        }
        if seen[k] {
            return Err(Error::InvalidArgument(format!("cell {k} given two coupling values")));
        }
        seen[k] = true;
        if !t.is_finite() || t.abs() > f.t0() {
            return Err(Error::CouplingOutOfRange { value: t, t0: f.t0() });
        }
        if t == 0.0 {
            continue;
        }
        let off = k * grid.nodes_per_cell;
        for p in &pts {
            let base = t * f.eval(p.param, t) * p.weight;
            let sx = [1.0 - p.xi, p.xi];
            let sy = [1.0 - p.eta, p.eta];
            let w = [sx[0] * sy[0], sx[0] * sy[1], sx[1] * sy[0], sx[1] * sy[1]];
            let nodes = [
                (off + p.ex) * ny + p.ey,
                (off + p.ex) * ny + p.ey + 1,
                (off + p.ex + 1) * ny + p.ey,
                (off + p.ex + 1) * ny + p.ey + 1,
            ];
            for a in 0..4 {
                for b in 0..4 {
                    // w[a]*w[b] first: commutative, so the (b,a) entry is
                    // computed from the bitwise-identical expression
                    let pair = w[a] * w[b];
                    coo.push(nodes[a], nodes[b], base * pair);
                }
            }
        }
    }
    Ok(coo.into_csr())
}

/// Boundary condition requested on one face of the box.
#[derive(Clone, Debug, PartialEq)]
pub enum FaceCondition {
    Dirichlet,
    Neumann,
    /// Lateral faces only; must be requested on both.
    Periodic,
    /// Lateral faces only; carries the trace values `ρ` at the face's `ny`
    /// nodes. The form gains `−∫_γ ρ u v ds`.
    Robin(Vec<f64>),
}

/// Conditions for all four faces of the box.
#[derive(Clone, Debug)]
pub struct BcSpec {
    pub bottom: FaceCondition,
    pub top: FaceCondition,
    pub left: FaceCondition,
    pub right: FaceCondition,
}

impl BcSpec {
    /// Horizontal faces from the strip geometry, both lateral faces periodic
    /// (the single-cell problem).
    pub fn periodic_cell(geom: &LayerGeometry) -> Self {
        BcSpec {
            bottom: horizontal(geom.bc_bottom),
            top: horizontal(geom.bc_top),
            left: FaceCondition::Periodic,
            right: FaceCondition::Periodic,
        }
    }

    /// Horizontal faces from the strip geometry, lateral faces Robin with
    /// the given traces.
    pub fn robin_box(geom: &LayerGeometry, rho_left: Vec<f64>, rho_right: Vec<f64>) -> Self {
        BcSpec {
            bottom: horizontal(geom.bc_bottom),
            top: horizontal(geom.bc_top),
            left: FaceCondition::Robin(rho_left),
            right: FaceCondition::Robin(rho_right),
        }
    }
}

fn horizontal(bc: BoundaryCondition) -> FaceCondition {
    match bc {
        BoundaryCondition::Dirichlet => FaceCondition::Dirichlet,
        BoundaryCondition::Neumann => FaceCondition::Neumann,
    }
}

/// What was applied on each face (condition kind only).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AppliedBc {
    /// No constraint applied yet (raw assembly).
    Unconstrained,
    Dirichlet,
    Neumann,
    Periodic,
    Robin,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BcMeta {
    pub bottom: AppliedBc,
    pub top: AppliedBc,
    pub left: AppliedBc,
    pub right: AppliedBc,
}

impl BcMeta {
    fn unconstrained() -> Self {
        BcMeta {
            bottom: AppliedBc::Unconstrained,
            top: AppliedBc::Unconstrained,
            left: AppliedBc::Unconstrained,
            right: AppliedBc::Unconstrained,
        }
    }

    pub fn is_constrained(&self) -> bool {
        self.bottom != AppliedBc::Unconstrained
    }
}

/// Bookkeeping from grid nodes to constrained degrees of freedom.
#[derive(Clone, Debug)]
pub struct DofMap {
    pub n_dofs: usize,
    /// Per grid node: its degree of freedom, or `None` if eliminated.
    pub dof_of_node: Vec<Option<usize>>,
    /// One representative grid node per degree of freedom (the smallest).
    pub node_of_dof: Vec<usize>,
}

impl DofMap {
    fn identity(n: usize) -> Self {
        DofMap {
            n_dofs: n,
            dof_of_node: (0..n).map(Some).collect(),
            node_of_dof: (0..n).collect(),
        }
    }

    /// Scatters a dof vector to grid-node values (eliminated nodes get 0).
    pub fn node_values(&self, dof_vec: &[f64]) -> Vec<f64> {
        self.dof_of_node
            .iter()
            .map(|d| d.map(|k| dof_vec[k]).unwrap_or(0.0))
            .collect()
    }
}

/// The assembled generalized eigenproblem: the operator's bilinear form is
/// `uᵀ(K − S)u` against `uᵀMu`.
#[derive(Clone, Debug)]
pub struct DiscreteOperator {
    pub stiffness: Csr,
    pub mass: Csr,
    pub surface: Csr,
    pub bc_meta: BcMeta,
    pub dofs: DofMap,
}

impl DiscreteOperator {
    /// Bundles raw (unconstrained) assembly output.
    pub fn unconstrained(stiffness: Csr, mass: Csr, surface: Csr) -> Result<Self> {
        let n = stiffness.n();
        if mass.n() != n || surface.n() != n {
            return Err(Error::InvalidArgument(format!(
                "matrix sizes disagree: stiffness {n}, mass {}, surface {}",
                mass.n(),
                surface.n()
            )));
        }
        Ok(DiscreteOperator {
            stiffness,
            mass,
            surface,
            bc_meta: BcMeta::unconstrained(),
            dofs: DofMap::identity(n),
        })
    }

    /// `A = K − S`, the matrix of the full form.
    pub fn form_matrix(&self) -> Csr {
        Csr::linear_combination(&[(1.0, &self.stiffness), (-1.0, &self.surface)])
    }

    pub fn n_dofs(&self) -> usize {
        self.stiffness.n()
    }
}

/// Lumped boundary-mass matrix `∫_γ ρ u v ds` on the vertical face at column
/// `i_col`, with `ρ` piecewise linear through the given nodal values.
/// Two-point Gauss per edge element (exact: the integrand is cubic).
fn edge_mass(grid: &Grid, rho: &[f64], i_col: usize) -> Csr {
    let ny = grid.ny;
    let hy = grid.hy;
    let gauss = 0.5 / 3.0_f64.sqrt();
    let mut coo = Coo::new(grid.n_nodes());
    for e in 0..ny - 1 {
        for gp in [0.5 - gauss, 0.5 + gauss] {
            let rg = rho[e] + (rho[e + 1] - rho[e]) * gp;
            let c = 0.5 * hy * rg;
            if c == 0.0 {
                continue;
            }
            let sh = [1.0 - gp, gp];
            for a in 0..2 {
                for b in 0..2 {
                    let pair = sh[a] * sh[b];
                    coo.push(i_col * ny + e + a, i_col * ny + e + b, c * pair);
                }
            }
        }
    }
    coo.into_csr()
}

/// Applies the per-face conditions to a raw operator: periodic lateral pairs
/// are identified, Robin terms are subtracted from the stiffness, and
/// Dirichlet rows/columns are eliminated (never penalized), in that order.
pub fn apply_boundary_conditions(
    op: &DiscreteOperator,
    grid: &Grid,
    spec: &BcSpec,
) -> Result<DiscreteOperator> {
    if op.bc_meta.is_constrained() {
        return Err(Error::InvalidArgument(
            "boundary conditions were already applied to this operator".into(),
        ));
    }
    if op.n_dofs() != grid.n_nodes() {
        return Err(Error::InvalidArgument(format!(
            "operator has {} dofs but the grid has {} nodes",
            op.n_dofs(),
            grid.n_nodes()
        )));
    }
    for (name, face) in [("bottom", &spec.bottom), ("top", &spec.top)] {
        if !matches!(face, FaceCondition::Dirichlet | FaceCondition::Neumann) {
            return Err(Error::InvalidArgument(format!(
                "{name} face only admits Dirichlet or Neumann conditions"
            )));
        }
    }
    let periodic = match (&spec.left, &spec.right) {
        (FaceCondition::Periodic, FaceCondition::Periodic) => true,
        (FaceCondition::Periodic, _) | (_, FaceCondition::Periodic) => {
            return Err(Error::InvalidArgument(
                "periodic conditions must be requested on both lateral faces".into(),
            ));
        }
        _ => false,
    };
    for face in [&spec.left, &spec.right] {
        if let FaceCondition::Robin(rho) = face {
            if rho.len() != grid.ny {
                return Err(Error::MissingRobinData { got: rho.len(), expected: grid.ny });
            }
        }
    }

    let (nx, ny) = (grid.nx, grid.ny);
    let n = nx * ny;

    // Stage 1: periodic identification of the lateral node pairs.
    let (mut k, mut m, mut s, cur): (Csr, Csr, Csr, Vec<usize>) = if periodic {
        let mut map = vec![0usize; n];
        for i in 0..nx {
            for j in 0..ny {
                map[i * ny + j] = if i == nx - 1 { j } else { i * ny + j };
            }
        }
        let n_new = (nx - 1) * ny;
        (
            op.stiffness.fold(&map, n_new),
            op.mass.fold(&map, n_new),
            op.surface.fold(&map, n_new),
            map,
        )
    } else {
        (op.stiffness.clone(), op.mass.clone(), op.surface.clone(), (0..n).collect())
    };

    // Stage 2: Robin boundary mass, subtracted from the stiffness. Without a
    // fold the node numbering is unchanged, so the face columns are valid.
    let mut robin_terms: Vec<Csr> = Vec::new();
    if let FaceCondition::Robin(rho) = &spec.left {
        robin_terms.push(edge_mass(grid, rho, 0));
    }
    if let FaceCondition::Robin(rho) = &spec.right {
        robin_terms.push(edge_mass(grid, rho, nx - 1));
    }
    if !robin_terms.is_empty() {
        let mut terms: Vec<(f64, &Csr)> = vec![(1.0, &k)];
        for e in &robin_terms {
            terms.push((-1.0, e));
        }
        k = Csr::linear_combination(&terms);
    }

    // Stage 3: Dirichlet elimination.
    let mut keep_node = vec![true; n];
    if spec.bottom == FaceCondition::Dirichlet {
        for i in 0..nx {
            keep_node[i * ny] = false;
        }
    }
    if spec.top == FaceCondition::Dirichlet {
        for i in 0..nx {
            keep_node[i * ny + ny - 1] = false;
        }
    }
    if spec.left == FaceCondition::Dirichlet {
        for j in 0..ny {
            keep_node[j] = false;
        }
    }
    if spec.right == FaceCondition::Dirichlet {
        for j in 0..ny {
            keep_node[(nx - 1) * ny + j] = false;
        }
    }
    let n_cur = k.n();
    let mut flags = vec![true; n_cur];
    for node in 0..n {
        if !keep_node[node] {
            flags[cur[node]] = false;
        }
    }
    let mut keep: Vec<Option<usize>> = vec![None; n_cur];
    let mut n_dofs = 0;
    for (slot, &f) in flags.iter().enumerate() {
        if f {
            keep[slot] = Some(n_dofs);
            n_dofs += 1;
        }
    }
    if n_dofs < n_cur {
        k = k.restrict(&keep, n_dofs);
        m = m.restrict(&keep, n_dofs);
        s = s.restrict(&keep, n_dofs);
    }

    let mut dof_of_node = vec![None; n];
    let mut node_of_dof = vec![usize::MAX; n_dofs];
    for node in 0..n {
        if let Some(d) = keep[cur[node]] {
            dof_of_node[node] = Some(d);
            if node_of_dof[d] == usize::MAX {
                node_of_dof[d] = node;
            }
        }
    }

    let applied = |f: &FaceCondition| match f {
        FaceCondition::Dirichlet => AppliedBc::Dirichlet,
        FaceCondition::Neumann => AppliedBc::Neumann,
        FaceCondition::Periodic => AppliedBc::Periodic,
        FaceCondition::Robin(_) => AppliedBc::Robin,
    };
    Ok(DiscreteOperator {
        stiffness: k,
        mass: m,
        surface: s,
        bc_meta: BcMeta {
            bottom: applied(&spec.bottom),
            top: applied(&spec.top),
            left: applied(&spec.left),
            right: applied(&spec.right),
        },
        dofs: DofMap { n_dofs, dof_of_node, node_of_dof },
    })
}
