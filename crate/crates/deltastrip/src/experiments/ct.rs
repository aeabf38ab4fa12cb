//! Combes–Thomas resolvent decay.
//!
//! For an energy strictly below the bottom of the spectrum the resolvent,
//! compressed between two cell blocks, decays exponentially in the
//! distance between the blocks, with a rate that grows as the energy
//! moves further below the spectrum. The experiment measures operator
//! norms of such compressions across a ladder of distances and energies,
//! fits the decay rate per energy, and compares rates across energies.

use crate::boxop::{lowest_eigenvalue, resolvent_block_norm, BlockSelector, DEFAULT_PROBES};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::experiments::{
    run_trials, Check, Curve, ExperimentReport, FitRecord, Scalar, Scenario, TrialRow,
};
use crate::stats::fit_line;

pub fn ct_experiment(cfg: &RunConfig) -> Result<ExperimentReport> {
    let scn = Scenario::from_config(cfg)?;
    let trials = cfg.experiment.trials;
    let eps = cfg.experiment.eps;
    let n_box = *cfg.experiment.n_list.last().expect("validated non-empty");
    let distances = cfg.experiment.distances.clone();
    let offsets = cfg.experiment.lambda_offsets.clone();

    let mut violations = Vec::new();
    for &dist in &distances {
        if dist + 2 > n_box {
            violations.push(format!(
                "block distance {dist} does not fit into a box of {n_box} cells (needs {} cells)",
                dist + 2
            ));
        }
    }
    if distances.len() < 2 {
        violations.push("at least two block distances are needed for a decay fit".into());
    }
    if !violations.is_empty() {
        return Err(Error::ConfigInvalid { violations });
    }

    let ext = scn.extremal(eps)?;
    let grid = scn.grid(n_box)?;

    let mut report = ExperimentReport {
        name: "ct".into(),
        config: cfg.clone(),
        parameters: scn.parameters(cfg, eps),
        scalars: vec![
            Scalar { label: "lambda_star".into(), value: ext.lambda_star },
            Scalar { label: "eps_star".into(), value: ext.eps_star },
        ],
        probabilities: vec![],
        fits: vec![],
        checks: vec![],
        curves: vec![],
        flag_names: vec![],
        trials: vec![],
        provenance: scn.provenance(),
    };

    // per trial: ground value, then for every energy offset the block-norm
    // ladder over distances plus the whole-box norm
    struct TrialNorms {
        trial: usize,
        lambda_1: f64,
        per_offset: Vec<(Vec<f64>, f64)>,
    }
    let outcomes: Vec<TrialNorms> = run_trials(trials, |t| {
        let omega = scn.sample(n_box, t);
        let op = scn.assemble(&grid, eps, omega, &ext.trace)?;
        let lambda_1 = lowest_eigenvalue(&op)?;
        let mut per_offset = Vec::with_capacity(offsets.len());
        for &offset in &offsets {
            let lambda = ext.lambda_star - offset;
            let source = BlockSelector { first_cell: 0, span: 1 };
            let ladder = distances
                .iter()
                .map(|&dist| {
                    let target = BlockSelector { first_cell: dist + 1, span: 1 };
                    resolvent_block_norm(&op, &grid, lambda, source, target, DEFAULT_PROBES)
                })
                .collect::<Result<Vec<f64>>>()?;
            let whole = BlockSelector { first_cell: 0, span: n_box };
            let whole_norm =
                resolvent_block_norm(&op, &grid, lambda, whole, whole, DEFAULT_PROBES)?;
            per_offset.push((ladder, whole_norm));
        }
        Ok(TrialNorms { trial: t, lambda_1, per_offset })
    })?;

    for out in &outcomes {
        report.trials.push(TrialRow {
            trial: out.trial,
            seed: scn.disorder.seed(),
            n_cells: n_box,
            eps,
            lambda_1: out.lambda_1,
            flags: vec![],
        });
    }

    let xs: Vec<f64> = distances.iter().map(|&d| d as f64).collect();
    let mut rates: Vec<(f64, f64)> = Vec::new();
    let mut blocks_contained = true;
    for (j, &offset) in offsets.iter().enumerate() {
        let mut means = vec![0.0_f64; distances.len()];
        let mut whole_mean = 0.0_f64;
        for out in &outcomes {
            let (ladder, whole) = &out.per_offset[j];
            for (acc, &v) in means.iter_mut().zip(ladder) {
                *acc += v;
            }
            whole_mean += whole;
            // the power-iteration estimate approaches each norm from below,
            // so allow it a small relative slack against the whole-box run
            blocks_contained &= ladder.iter().all(|&v| v <= whole * (1.0 + 1e-6));
        }
        for acc in &mut means {
            *acc /= trials as f64;
        }
        whole_mean /= trials as f64;

        let log_means: Vec<f64> = means.iter().map(|&v| v.ln()).collect();
        let fit = fit_line(&xs, &log_means, None)?;
        let rate = -fit.slope;
        rates.push((offset, rate));
        report.scalars.extend([
            Scalar { label: format!("decay_rate(offset={offset})"), value: rate },
            Scalar { label: format!("whole_box_norm(offset={offset})"), value: whole_mean },
        ]);
        report.checks.push(Check {
            label: format!("block norms decay with distance (offset={offset})"),
            passed: fit.slope < 0.0,
        });
        report.curves.push(Curve {
            label: format!("mean block norm vs distance (offset={offset})"),
            x: xs.clone(),
            y: means,
        });
        report.fits.push(FitRecord {
            label: format!("log block norm vs distance (offset={offset})"),
            fit,
        });
    }

    report.checks.push(Check {
        label: "block norms bounded by the whole-box norm".into(),
        passed: blocks_contained,
    });
    if rates.len() >= 2 {
        rates.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("validated finite"));
        let increasing = rates.windows(2).all(|w| w[1].1 > w[0].1);
        report.checks.push(Check {
            label: "decay rate grows with the distance below the spectrum".into(),
            passed: increasing,
        });
    }
    Ok(report)
}
