//! Seeded Monte Carlo experiments over random boxes.
//!
//! Every experiment follows the same recipe: resolve the model from the run
//! configuration, compute the extremal cell quantities that calibrate events
//! and lateral boundary data, run independent trials in parallel (each trial
//! a pure function of the global seed and its own index), and reduce the
//! outcomes into a serializable report with Wilson intervals and scaling
//! fits. Reports embed the full configuration, so any report can reproduce
//! its own raw data byte for byte.

pub mod ct;
pub mod ilse;
pub mod min_spectrum;
pub mod sigma_band;
pub mod wegner;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::{build_grid, DiscreteOperator, Grid};
use crate::boxop::{assemble_box, BoxSpec};
use crate::cell::{robin_trace, solve_cell, RobinTrace};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::model::{
    epsilon_star, lambda1, transverse_mode, CouplingFunction, Disorder, LayerGeometry, Manifold,
};
use crate::stats::{LineFit, Proportion};

/// The resolved parameter values an experiment actually used (the embedded
/// [`RunConfig`] remains the authoritative reproduction input).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Parameters {
    pub eps: f64,
    pub n_list: Vec<usize>,
    pub kappa_list: Vec<f64>,
    pub energy: Option<f64>,
    pub tau: u32,
    pub c0: f64,
    pub trials: usize,
    pub seed: u64,
}

/// One estimated probability, keyed by its series label, box size and the
/// swept parameter value (window width, threshold multiplier, ...).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityRecord {
    pub label: String,
    pub n_cells: usize,
    pub parameter: f64,
    pub p: Proportion,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub label: String,
    pub fit: LineFit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scalar {
    pub label: String,
    pub value: f64,
}

/// A named pass/fail observation (monotonicity across box sizes, window
/// non-emptiness, ...). Checks record what the data showed; they never gate
/// report generation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub label: String,
    pub passed: bool,
}

/// A named (x, y) series for plotting and downstream fits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

/// One Monte Carlo trial: its index, the RNG root it drew from, the box it
/// solved, and the boolean event outcomes (0/1 per flag name).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub trial: usize,
    pub seed: u64,
    pub n_cells: usize,
    pub eps: f64,
    pub lambda_1: f64,
    pub flags: Vec<u8>,
}

/// What it takes to trust and rerun the numbers: resolution, tolerances,
/// and the seeding rule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub nodes_per_cell: usize,
    pub solver_tol: f64,
    pub quadrature_order: usize,
    /// How per-trial randomness derives from the global seed.
    pub stream_rule: String,
}

/// Complete experiment outcome. Contains no clocks or machine identity:
/// serializing twice from the same config and seed gives identical bytes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub config: RunConfig,
    pub parameters: Parameters,
    pub scalars: Vec<Scalar>,
    pub probabilities: Vec<ProbabilityRecord>,
    pub fits: Vec<FitRecord>,
    pub checks: Vec<Check>,
    pub curves: Vec<Curve>,
    pub flag_names: Vec<String>,
    pub trials: Vec<TrialRow>,
    pub provenance: Provenance,
}

impl ExperimentReport {
    /// Formats one float with 17 significant digits, '.' decimal separator.
    pub fn fmt_float(x: f64) -> String {
        format!("{x:.16e}")
    }

    /// The per-trial table as CSV text: header
    /// `trial,seed,N,eps,lambda_1,<flag names...>`, '\n' line endings,
    /// floats at 17 significant digits.
    pub fn raw_csv(&self) -> String {
        let mut out = String::from("trial,seed,N,eps,lambda_1");
        for name in &self.flag_names {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for row in &self.trials {
            out.push_str(&format!(
                "{},{},{},{},{}",
                row.trial,
                row.seed,
                row.n_cells,
                Self::fmt_float(row.eps),
                Self::fmt_float(row.lambda_1)
            ));
            for &f in &row.flags {
                out.push(',');
                out.push_str(if f != 0 { "1" } else { "0" });
            }
            out.push('\n');
        }
        out
    }

    pub fn scalar(&self, label: &str) -> Option<f64> {
        self.scalars.iter().find(|s| s.label == label).map(|s| s.value)
    }

    pub fn fit(&self, label: &str) -> Option<&LineFit> {
        self.fits.iter().find(|f| f.label == label).map(|f| &f.fit)
    }

    pub fn check(&self, label: &str) -> Option<bool> {
        self.checks.iter().find(|c| c.label == label).map(|c| c.passed)
    }

    pub fn probabilities_for(&self, label: &str) -> Vec<&ProbabilityRecord> {
        self.probabilities.iter().filter(|p| p.label == label).collect()
    }
}

/// The model and numerics resolved from a configuration, shared by all
/// experiment drivers.
#[derive(Debug)]
pub(crate) struct Scenario {
    pub geom: LayerGeometry,
    pub manifold: Manifold,
    pub coupling: CouplingFunction,
    pub disorder: Disorder,
    pub nodes_per_cell: usize,
    pub solver_tol: f64,
    pub quadrature_order: usize,
    /// First-order coupling coefficient of the cell ground energy.
    pub lambda1: f64,
}

/// Extremal-cell bundle: the coupling minimizing the cell ground energy,
/// the resulting energy and lateral trace, and the grid-error budget.
pub(crate) struct Extremal {
    pub eps_star: f64,
    pub lambda_star: f64,
    pub trace: RobinTrace,
    /// Four times the observed movement of the cell ground value under one
    /// grid refinement: a conservative bound on the discretization error.
    pub delta_grid: f64,
}

impl Scenario {
    pub fn from_config(cfg: &RunConfig) -> Result<Self> {
        cfg.validate()?;
        let geom = cfg.geometry_obj()?;
        let manifold = cfg.manifold_obj()?;
        if manifold.is_oracle_only() {
            return Err(Error::ConfigInvalid {
                violations: vec![
                    "manifold kind 'separable-line' is reserved for the transcendental oracle and the cell cross-checks; experiments need an immersed manifold (circle)"
                        .into(),
                ],
            });
        }
        let coupling = cfg.coupling_obj()?;
        let disorder = cfg.disorder_obj()?;
        let mode = transverse_mode(&geom);
        let lambda1 =
            lambda1(&geom, &manifold, &coupling, &mode, cfg.numerics.quadrature_order)?;
        Ok(Scenario {
            geom,
            manifold,
            coupling,
            disorder,
            nodes_per_cell: cfg.numerics.nodes_per_cell,
            solver_tol: cfg.numerics.solver_tol,
            quadrature_order: cfg.numerics.quadrature_order,
            lambda1,
        })
    }

    /// Echo of the resolved parameters for the report.
    pub fn parameters(&self, cfg: &RunConfig, eps: f64) -> Parameters {
        Parameters {
            eps,
            n_list: cfg.experiment.n_list.clone(),
            kappa_list: cfg.experiment.kappa_list.clone(),
            energy: cfg.experiment.energy,
            tau: cfg.experiment.tau,
            c0: cfg.experiment.c0,
            trials: cfg.experiment.trials,
            seed: cfg.experiment.seed,
        }
    }

    pub fn provenance(&self) -> Provenance {
        Provenance {
            nodes_per_cell: self.nodes_per_cell,
            solver_tol: self.solver_tol,
            quadrature_order: self.quadrature_order,
            stream_rule: "trial t draws from RNG stream t of the global seed".into(),
        }
    }

    pub fn grid(&self, cells: usize) -> Result<Grid> {
        build_grid(&self.geom, cells, self.nodes_per_cell)
    }

    /// Ground value of the single cell at coupling `eta` on the production
    /// grid.
    pub fn cell_ground(&self, eta: f64) -> Result<f64> {
        let grid = self.grid(1)?;
        Ok(solve_cell(&self.geom, &self.manifold, &self.coupling, eta, &grid)?.lambda_eta)
    }

    /// Extremal coupling, cell energy, lateral trace, and grid budget for
    /// the disorder scale `eps`.
    pub fn extremal(&self, eps: f64) -> Result<Extremal> {
        let eps_star = epsilon_star(self.lambda1, eps, self.disorder.a())?;
        let grid = self.grid(1)?;
        let cell = solve_cell(&self.geom, &self.manifold, &self.coupling, eps_star, &grid)?;
        let trace = robin_trace(&cell)?;
        let fine_grid = build_grid(&self.geom, 1, 2 * self.nodes_per_cell)?;
        let fine = solve_cell(&self.geom, &self.manifold, &self.coupling, eps_star, &fine_grid)?;
        let delta_grid = 4.0 * (cell.lambda_eta - fine.lambda_eta).abs();
        Ok(Extremal { eps_star, lambda_star: cell.lambda_eta, trace, delta_grid })
    }

    /// The disorder values of one trial: first `n` draws of stream `trial`.
    pub fn sample(&self, n: usize, trial: usize) -> Vec<f64> {
        self.disorder.sample(n, trial as u64)
    }

    /// Assembles the box pencil for one trial configuration.
    pub fn assemble(
        &self,
        grid: &Grid,
        eps: f64,
        omega: Vec<f64>,
        trace: &RobinTrace,
    ) -> Result<DiscreteOperator> {
        let spec = BoxSpec::new(*grid, eps, omega, trace.clone(), self.disorder.a())?;
        assemble_box(&spec, &self.geom, &self.manifold, &self.coupling)
    }

    /// Ground value of one trial box.
    pub fn box_ground(
        &self,
        grid: &Grid,
        eps: f64,
        omega: Vec<f64>,
        trace: &RobinTrace,
    ) -> Result<f64> {
        crate::boxop::lowest_eigenvalue(&self.assemble(grid, eps, omega, trace)?)
    }
}

/// Runs `trials` independent tasks in parallel and collects their results
/// in trial order (the aggregation is deterministic regardless of thread
/// count).
pub(crate) fn run_trials<T: Send>(
    trials: usize,
    task: impl Fn(usize) -> Result<T> + Sync + Send,
) -> Result<Vec<T>> {
    (0..trials).into_par_iter().map(task).collect()
}

/// Wilson record helper.
pub(crate) fn probability(
    label: &str,
    n_cells: usize,
    parameter: f64,
    successes: usize,
    trials: usize,
) -> Result<ProbabilityRecord> {
    Ok(ProbabilityRecord {
        label: label.to_string(),
        n_cells,
        parameter,
        p: crate::stats::wilson(successes, trials)?,
    })
}

/// "Non-increasing within Wilson intervals" across an ordered series: each
/// step must either decrease the point estimate or keep overlapping
/// intervals (and symmetrically for non-decreasing).
pub(crate) fn monotone_within_wilson(series: &[&ProbabilityRecord], decreasing: bool) -> bool {
    series.windows(2).all(|w| {
        let (a, b) = (&w[0].p, &w[1].p);
        if decreasing {
            b.estimate <= a.estimate || b.lower <= a.upper
        } else {
            b.estimate >= a.estimate || b.upper >= a.lower
        }
    })
}

#[cfg(test)]
pub(crate) mod test_support {
    use crate::config::RunConfig;

    /// A configuration small enough for unit tests: coarse grid, few trials.
    pub fn tiny_config() -> RunConfig {
        let mut cfg = RunConfig::default();
        cfg.numerics.nodes_per_cell = 12;
        cfg.experiment.trials = 12;
        cfg.experiment.n_list = vec![2];
        cfg.experiment.eps = 0.02;
        cfg.experiment.seed = 11;
        cfg
    }
}
