//! Plain-text run configuration.
//!
//! The format is sectioned `key = value` text (`#` starts a comment):
//!
//! ```text
//! [geometry]
//! d = 1.0
//! cell_length = 1.0
//! ```
//!
//! Parsing is strict about structure (a malformed line is a hard error with
//! its line number) but collects *all* value and cross-field violations
//! before reporting, so one round of editing fixes everything.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    transverse_mode, BoundaryCondition, CouplingFunction, DensityKind, Disorder, LayerGeometry,
    Manifold,
};

/// Everything a run needs: the model, the numerics, the experiment
/// parameters, and the output root. Serializable so reports can embed the
/// exact configuration they were produced from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub geometry: GeometrySection,
    pub manifold: ManifoldSection,
    pub coupling: CouplingSection,
    pub disorder: DisorderSection,
    pub numerics: NumericsSection,
    pub experiment: ExperimentSection,
    pub output: OutputSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometrySection {
    pub d: f64,
    pub cell_length: f64,
    pub bc_bottom: String,
    pub bc_top: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifoldSection {
    /// `circle` or `separable-line`.
    pub kind: String,
    pub center_x: f64,
    pub center_y: f64,
    pub radius: f64,
    /// Height of the separable line (ignored for circles).
    pub height: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingSection {
    /// Profile kind; `constant` is the only file-selectable profile
    /// (position- and coupling-dependent profiles are API-only).
    pub f_kind: String,
    /// Value of the constant coupling profile `f ≡ c` (key `f_const`).
    pub constant: f64,
    /// Validity radius: assembled couplings must satisfy `|t| ≤ t0`.
    pub t0: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisorderSection {
    /// `uniform`, `smoothed-uniform`, or `triangular`.
    pub density: String,
    /// Left end of the support `[a, 1]`; must lie in `[-1, 1)`.
    pub a: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NumericsSection {
    pub nodes_per_cell: usize,
    pub solver_tol: f64,
    pub quadrature_order: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSection {
    /// Disorder coupling scale ε.
    pub eps: f64,
    pub n_list: Vec<usize>,
    pub kappa_list: Vec<f64>,
    /// Energy probed by the spectral-window experiment; derived from the
    /// model when absent.
    pub energy: Option<f64>,
    pub tau: u32,
    pub c0: f64,
    pub c2: f64,
    pub trials: usize,
    pub seed: u64,
    /// Threshold multipliers for the length-scale event (nested flags).
    pub delta_multipliers: Vec<f64>,
    /// Offsets below the spectral minimum probed by the decay experiment.
    pub lambda_offsets: Vec<f64>,
    /// Block distances (in cells) probed by the decay experiment.
    pub distances: Vec<usize>,
    /// Band width multiplier for the band-population probe.
    pub band_multiplier: f64,
    /// Fail instead of flagging when the length-scale window is empty.
    pub strict_window: bool,
    /// Couplings for the standalone transcendental oracle.
    pub sigma_list: Vec<f64>,
    /// Points in the coupling sweep of the `cell` command.
    pub eta_points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputSection {
    /// Root directory that run directories are created under.
    pub dir: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            geometry: GeometrySection {
                d: 1.0,
                cell_length: 1.0,
                bc_bottom: "dirichlet".into(),
                bc_top: "dirichlet".into(),
            },
            manifold: ManifoldSection {
                kind: "circle".into(),
                center_x: 0.5,
                center_y: 0.5,
                radius: 0.25,
                height: 1.0 / 3.0,
            },
            coupling: CouplingSection { f_kind: "constant".into(), constant: 1.0, t0: 2.0 },
            disorder: DisorderSection { density: "uniform".into(), a: -0.5 },
            numerics: NumericsSection {
                nodes_per_cell: 24,
                solver_tol: 1e-10,
                quadrature_order: 1024,
            },
            experiment: ExperimentSection {
                eps: 0.01,
                n_list: vec![4, 8, 16],
                kappa_list: vec![0.001, 0.002, 0.005, 0.01],
                energy: None,
                tau: 5,
                c0: 1.0,
                c2: 1.0,
                trials: 400,
                seed: 1,
                delta_multipliers: vec![0.5, 1.0, 2.0],
                lambda_offsets: vec![0.2, 0.4],
                distances: vec![2, 3, 4, 5, 6],
                band_multiplier: 5.0,
                strict_window: false,
                sigma_list: vec![-1.0, 0.5, 2.0],
                eta_points: 9,
            },
            output: OutputSection { dir: "runs".into() },
        }
    }
}

impl RunConfig {
    /// Builds the validated strip geometry.
    pub fn geometry_obj(&self) -> Result<LayerGeometry> {
        LayerGeometry::new(
            self.geometry.d,
            self.geometry.cell_length,
            parse_bc(&self.geometry.bc_bottom)?,
            parse_bc(&self.geometry.bc_top)?,
        )
    }

    /// Builds the interaction manifold (not yet validated against the cell).
    pub fn manifold_obj(&self) -> Result<Manifold> {
        match self.manifold.kind.as_str() {
            "circle" => Ok(Manifold::circle(
                self.manifold.center_x,
                self.manifold.center_y,
                self.manifold.radius,
            )),
            "separable-line" => Ok(Manifold::separable_line(self.manifold.height)),
            other => Err(Error::InvalidArgument(format!(
                "unknown manifold kind '{other}' (expected 'circle' or 'separable-line')"
            ))),
        }
    }

    /// Builds the constant coupling profile.
    pub fn coupling_obj(&self) -> Result<CouplingFunction> {
        if self.coupling.f_kind != "constant" {
            return Err(Error::ConfigInvalid {
                violations: vec![format!(
                    "coupling.f_kind = {:?} (only \"constant\" can be selected from a file)",
                    self.coupling.f_kind
                )],
            });
        }
        CouplingFunction::constant(self.coupling.constant, self.coupling.t0)
    }

    /// Builds the single-site disorder with the run's global seed.
    pub fn disorder_obj(&self) -> Result<Disorder> {
        let kind = match self.disorder.density.as_str() {
            "uniform" => DensityKind::Uniform,
            "smoothed-uniform" => DensityKind::SmoothedUniform,
            "triangular" => DensityKind::Triangular,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown density '{other}' (expected 'uniform', 'smoothed-uniform', or 'triangular')"
                )))
            }
        };
        Disorder::new(kind, self.disorder.a, self.experiment.seed)
    }

    /// Collects every violation; empty means the configuration is valid.
    pub fn validate(&self) -> Result<()> {
        let mut v: Vec<String> = Vec::new();
        let g = &self.geometry;
        if !(g.d.is_finite() && g.d > 0.0) {
            v.push(format!("geometry.d = {} must be a positive width", g.d));
        }
        if !(g.cell_length.is_finite() && g.cell_length > 0.0) {
            v.push(format!("geometry.cell_length = {} must be a positive period", g.cell_length));
        }
        for (key, val) in [("bc_bottom", &g.bc_bottom), ("bc_top", &g.bc_top)] {
            if parse_bc(val).is_err() {
                v.push(format!(
                    "geometry.{key} = '{val}' (expected 'dirichlet' or 'neumann')"
                ));
            }
        }
        let geom = self.geometry_obj().ok();

        match self.manifold_obj() {
            Err(e) => v.push(e.to_string()),
            Ok(man) => {
                if let Some(geom) = &geom {
                    if let Err(e) = man.validate(geom) {
                        v.push(e.to_string());
                    }
                }
            }
        }

        if self.coupling.f_kind != "constant" {
            v.push(format!(
                "coupling.f_kind = {:?} (only \"constant\" can be selected from a file)",
                self.coupling.f_kind
            ));
        }
        if !(self.coupling.constant.is_finite()) {
            v.push(format!("coupling.f_const = {} must be finite", self.coupling.constant));
        }
        if !(self.coupling.t0.is_finite() && self.coupling.t0 > 0.0) {
            v.push(format!("coupling.t0 = {} must be a positive radius", self.coupling.t0));
        }

        if !(-1.0..1.0).contains(&self.disorder.a) {
            v.push(format!(
                "disorder.a = {} must lie in [-1, 1): the support [a, 1] needs a below 1 and no heavier tail than [-1, 1]",
                self.disorder.a
            ));
        }
        if self.disorder_obj().is_err() && (-1.0..1.0).contains(&self.disorder.a) {
            v.push(format!("disorder.density = '{}' is not a known density", self.disorder.density));
        }

        let n = &self.numerics;
        if n.nodes_per_cell < 8 {
            v.push(format!("numerics.nodes_per_cell = {} (minimum 8)", n.nodes_per_cell));
        }
        if !(n.solver_tol.is_finite() && n.solver_tol > 0.0 && n.solver_tol <= 1e-2) {
            v.push(format!("numerics.solver_tol = {} must lie in (0, 1e-2]", n.solver_tol));
        }
        if n.quadrature_order < 8 {
            v.push(format!("numerics.quadrature_order = {} (minimum 8)", n.quadrature_order));
        }

        let e = &self.experiment;
        if !(e.eps.is_finite() && e.eps >= 0.0) {
            v.push(format!("experiment.eps = {} must be finite and nonnegative", e.eps));
        }
        if e.eps > self.coupling.t0 {
            v.push(format!(
                "experiment.eps = {} exceeds the coupling validity radius t0 = {}: couplings εω live in [-ε, ε]",
                e.eps, self.coupling.t0
            ));
        }
        if e.n_list.is_empty() || e.n_list.iter().any(|&n| n == 0) {
            v.push("experiment.n_list must contain at least one positive box size".into());
        }
        if e.kappa_list.is_empty() || e.kappa_list.iter().any(|&k| !(k.is_finite() && k > 0.0)) {
            v.push("experiment.kappa_list must contain positive half-widths".into());
        }
        if e.tau < 5 {
            v.push(format!("experiment.tau = {} (the length-scale exponent needs tau >= 5)", e.tau));
        }
        if !(e.c0.is_finite() && e.c0 > 0.0) {
            v.push(format!("experiment.c0 = {} must be positive", e.c0));
        }
        if !(e.c2.is_finite() && e.c2 >= 0.0) {
            v.push(format!("experiment.c2 = {} must be nonnegative", e.c2));
        }
        if e.trials == 0 {
            v.push("experiment.trials must be at least 1".into());
        }
        if e.delta_multipliers.is_empty()
            || e.delta_multipliers.iter().any(|&m| !(m.is_finite() && m > 0.0))
        {
            v.push("experiment.delta_multipliers must contain positive multipliers".into());
        }
        if e.lambda_offsets.is_empty()
            || e.lambda_offsets.iter().any(|&o| !(o.is_finite() && o > 0.0))
        {
            v.push("experiment.lambda_offsets must contain positive offsets".into());
        }
        if e.distances.len() < 2 {
            v.push("experiment.distances needs at least two block distances".into());
        }
        if !(e.band_multiplier.is_finite() && e.band_multiplier > 0.0) {
            v.push(format!("experiment.band_multiplier = {} must be positive", e.band_multiplier));
        }
        if e.eta_points < 2 {
            v.push("experiment.eta_points must be at least 2".into());
        }

        // spectral-window hygiene: the window must keep a security distance
        // to the unperturbed minimum
        if let (Some(geom), Some(&energy)) = (&geom, e.energy.as_ref()) {
            let lambda0 = transverse_mode(geom).lambda0;
            if energy >= lambda0 {
                v.push(format!(
                    "experiment.energy = {energy} must sit below the unperturbed minimum {lambda0}"
                ));
            } else {
                let max_kappa = e.kappa_list.iter().cloned().fold(0.0, f64::max);
                let quarter = 0.25 * (lambda0 - energy).abs();
                if max_kappa > quarter {
                    v.push(format!(
                        "max kappa = {max_kappa} exceeds a quarter of the distance to the unperturbed minimum ({quarter:.6}); shrink the window or move energy down"
                    ));
                }
                if energy > lambda0 - e.c2 * e.eps * e.eps {
                    v.push(format!(
                        "experiment.energy = {energy} is inside the security zone: it must satisfy energy <= {lambda0} - c2·eps² = {}",
                        lambda0 - e.c2 * e.eps * e.eps
                    ));
                }
            }
        }

        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::ConfigInvalid { violations: v })
        }
    }
}

fn parse_bc(s: &str) -> Result<BoundaryCondition> {
    match s {
        "dirichlet" => Ok(BoundaryCondition::Dirichlet),
        "neumann" => Ok(BoundaryCondition::Neumann),
        other => Err(Error::InvalidArgument(format!("unknown boundary condition '{other}'"))),
    }
}

/// Reads and validates a configuration file.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config_str(&text)
}

/// Parses configuration text; see the module docs for the format.
/// Structural problems fail fast with a line number; value and cross-field
/// problems are collected and reported together.
pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    let mut violations: Vec<String> = Vec::new();
    let mut section = String::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = strip_comment(raw).trim().to_string();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name.strip_suffix(']').ok_or(Error::ConfigParse {
                line: line_no,
                message: "unterminated section header".into(),
            })?;
            section = name.trim().to_string();
            if !matches!(
                section.as_str(),
                "geometry" | "manifold" | "coupling" | "disorder" | "numerics" | "experiment"
                    | "output"
            ) {
                violations.push(format!("line {line_no}: unknown section [{section}]"));
            }
            continue;
        }
        let (key, value) = line.split_once('=').ok_or(Error::ConfigParse {
            line: line_no,
            message: format!("expected 'key = value', got '{line}'"),
        })?;
        let key = key.trim();
        let value = value.trim();
        if value.is_empty() {
            violations.push(format!("line {line_no}: empty value for '{key}'"));
            continue;
        }
        if let Err(msg) = assign(&mut cfg, &section, key, value) {
            violations.push(format!("line {line_no}: {msg}"));
        }
    }

    if !violations.is_empty() {
        // validation may add more; run it and merge so one pass reports all
        let mut all = violations;
        if let Err(Error::ConfigInvalid { violations: more }) = cfg.validate() {
            all.extend(more);
        }
        return Err(Error::ConfigInvalid { violations: all });
    }
    cfg.validate()?;
    Ok(cfg)
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

fn assign(cfg: &mut RunConfig, section: &str, key: &str, value: &str) -> std::result::Result<(), String> {
    let bad = |what: &str| format!("'{value}' is not a valid {what} for {section}.{key}");
    let f64v = || value.parse::<f64>().map_err(|_| bad("number"));
    let usizev = || value.parse::<usize>().map_err(|_| bad("count"));
    match (section, key) {
        ("geometry", "d") => cfg.geometry.d = f64v()?,
        ("geometry", "cell_length") => cfg.geometry.cell_length = f64v()?,
        ("geometry", "bc_bottom") => cfg.geometry.bc_bottom = value.to_string(),
        ("geometry", "bc_top") => cfg.geometry.bc_top = value.to_string(),
        ("manifold", "kind") => cfg.manifold.kind = value.to_string(),
        ("manifold", "center_x") => cfg.manifold.center_x = f64v()?,
        ("manifold", "center_y") => cfg.manifold.center_y = f64v()?,
        ("manifold", "radius") => cfg.manifold.radius = f64v()?,
        ("manifold", "height") => cfg.manifold.height = f64v()?,
        ("coupling", "f_kind") => cfg.coupling.f_kind = value.to_string(),
        ("coupling", "f_const") => cfg.coupling.constant = f64v()?,
        ("coupling", "t0") => cfg.coupling.t0 = f64v()?,
        ("disorder", "density") => cfg.disorder.density = value.to_string(),
        ("disorder", "a") => cfg.disorder.a = f64v()?,
        // the disorder stream and the experiment share one master seed
        ("disorder", "seed") => {
            cfg.experiment.seed = value.parse::<u64>().map_err(|_| bad("seed"))?
        }
        ("numerics", "nodes_per_cell") => cfg.numerics.nodes_per_cell = usizev()?,
        ("numerics", "solver_tol") => cfg.numerics.solver_tol = f64v()?,
        ("numerics", "quadrature_order") => cfg.numerics.quadrature_order = usizev()?,
        ("experiment", "eps") => cfg.experiment.eps = f64v()?,
        ("experiment", "n_list") => cfg.experiment.n_list = parse_list(value, usize_item)?,
        ("experiment", "kappa_list") => cfg.experiment.kappa_list = parse_list(value, f64_item)?,
        ("experiment", "energy") => cfg.experiment.energy = Some(f64v()?),
        ("experiment", "tau") => {
            cfg.experiment.tau = value.parse::<u32>().map_err(|_| bad("integer"))?
        }
        ("experiment", "c0") => cfg.experiment.c0 = f64v()?,
        ("experiment", "c2") => cfg.experiment.c2 = f64v()?,
        ("experiment", "trials") => cfg.experiment.trials = usizev()?,
        ("experiment", "seed") => {
            cfg.experiment.seed = value.parse::<u64>().map_err(|_| bad("seed"))?
        }
        ("experiment", "delta_multipliers") => {
            cfg.experiment.delta_multipliers = parse_list(value, f64_item)?
        }
        ("experiment", "lambda_offsets") => {
            cfg.experiment.lambda_offsets = parse_list(value, f64_item)?
        }
        ("experiment", "distances") => cfg.experiment.distances = parse_list(value, usize_item)?,
        ("experiment", "band_multiplier") => cfg.experiment.band_multiplier = f64v()?,
        ("experiment", "strict_window") => {
            cfg.experiment.strict_window = match value {
                "true" => true,
                "false" => false,
                _ => return Err(bad("boolean ('true' or 'false')")),
            }
        }
        ("experiment", "sigma_list") => cfg.experiment.sigma_list = parse_list(value, f64_item)?,
        ("experiment", "eta_points") => cfg.experiment.eta_points = usizev()?,
        ("output", "dir") => cfg.output.dir = value.to_string(),
        ("", _) => return Err(format!("key '{key}' appears before any [section]")),
        _ => return Err(format!("unknown key '{key}' in section [{section}]")),
    }
    Ok(())
}

fn f64_item(s: &str) -> std::result::Result<f64, String> {
    s.parse::<f64>().map_err(|_| format!("'{s}' is not a number"))
}

fn usize_item(s: &str) -> std::result::Result<usize, String> {
    s.parse::<usize>().map_err(|_| format!("'{s}' is not a count"))
}

fn parse_list<T>(
    value: &str,
    item: fn(&str) -> std::result::Result<T, String>,
) -> std::result::Result<Vec<T>, String> {
    value.split(',').map(|s| item(s.trim())).collect()
}
