//! Bracketing of the spectral minimum.
//!
//! The almost-sure spectral minimum equals the extremal cell ground energy.
//! At finite size this shows up as a two-sided bracket: with the extremal
//! lateral data every box ground value stays above the cell value (up to
//! grid error), and the extremal periodic configuration attains it. The
//! experiment samples random boxes, adds both extremal periodic
//! configurations as designated trials, and records how the minimum over
//! all trials brackets the cell value within the grid budget.

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::experiments::{
    probability, run_trials, Check, Curve, ExperimentReport, Scalar, Scenario, TrialRow,
};
use crate::model::periodic_configuration;

/// Minimum trial count for a meaningful minimum-over-trials statistic.
pub const MIN_TRIALS: usize = 100;

pub fn min_spectrum_experiment(cfg: &RunConfig) -> Result<ExperimentReport> {
    let scn = Scenario::from_config(cfg)?;
    let trials = cfg.experiment.trials;
    if trials < MIN_TRIALS {
        return Err(Error::ConfigInvalid {
            violations: vec![format!(
                "experiment.trials = {trials}: the spectral-minimum experiment needs at least {MIN_TRIALS} trials"
            )],
        });
    }
    let eps = cfg.experiment.eps;
    let ext = scn.extremal(eps)?;
    let a = scn.disorder.a();
    // the coupling value whose periodic tiling attains the minimum, and the
    // opposite end of the support
    let attaining = if eps > 0.0 { ext.eps_star / eps } else { 1.0 };
    let other = if attaining == 1.0 { a } else { 1.0 };

    let mut report = ExperimentReport {
        name: "min-spectrum".into(),
        config: cfg.clone(),
        parameters: scn.parameters(cfg, eps),
        scalars: vec![
            Scalar { label: "eps_star".into(), value: ext.eps_star },
            Scalar { label: "lambda_star".into(), value: ext.lambda_star },
            Scalar { label: "delta_grid".into(), value: ext.delta_grid },
        ],
        probabilities: vec![],
        fits: vec![],
        checks: vec![],
        curves: vec![],
        flag_names: vec!["ge_lower".into(), "in_band".into(), "extremal".into()],
        trials: vec![],
        provenance: scn.provenance(),
    };

    let lower = ext.lambda_star - ext.delta_grid;
    let upper = ext.lambda_star + 2.0 * ext.delta_grid;

    for &n in &cfg.experiment.n_list {
        let grid = scn.grid(n)?;
        let mut outcomes: Vec<(usize, f64, bool)> = run_trials(trials, |t| {
            let omega = scn.sample(n, t);
            Ok((t, scn.box_ground(&grid, eps, omega, &ext.trace)?, false))
        })?;
        for (offset, value) in [(0usize, attaining), (1usize, other)] {
            let omega = periodic_configuration(&[value], 1, n, a)?;
            outcomes.push((trials + offset, scn.box_ground(&grid, eps, omega, &ext.trace)?, true));
        }

        let mut ge_count = 0usize;
        let mut band_count = 0usize;
        for &(t, lam, extremal) in &outcomes {
            let ge = lam >= lower;
            let band = ge && lam <= upper;
            if !extremal {
                ge_count += usize::from(ge);
                band_count += usize::from(band);
            }
            report.trials.push(TrialRow {
                trial: t,
                seed: scn.disorder.seed(),
                n_cells: n,
                eps,
                lambda_1: lam,
                flags: vec![u8::from(ge), u8::from(band), u8::from(extremal)],
            });
        }

        let min = outcomes.iter().map(|o| o.1).fold(f64::INFINITY, f64::min);
        let max = outcomes.iter().map(|o| o.1).fold(f64::NEG_INFINITY, f64::max);
        let lam_attaining = outcomes[outcomes.len() - 2].1;
        report.scalars.extend([
            Scalar { label: format!("min_lambda_1(N={n})"), value: min },
            Scalar { label: format!("max_lambda_1(N={n})"), value: max },
            Scalar {
                label: format!("extremal_gap(N={n})"),
                value: lam_attaining - ext.lambda_star,
            },
        ]);
        report.probabilities.push(probability(
            "lambda_1 above lower edge",
            n,
            0.0,
            ge_count,
            trials,
        )?);
        report.probabilities.push(probability(
            "lambda_1 inside bracket",
            n,
            0.0,
            band_count,
            trials,
        )?);
        report.checks.extend([
            Check {
                label: format!("minimum over trials inside the bracket (N={n})"),
                passed: min >= lower && min <= upper,
            },
            Check {
                label: format!("every trial above the lower edge (N={n})"),
                passed: outcomes.iter().all(|o| o.1 >= lower),
            },
            Check {
                label: format!("extremal periodic configuration attains the minimum (N={n})"),
                passed: (lam_attaining - ext.lambda_star).abs() <= ext.delta_grid.max(1e-9),
            },
        ]);

        let mut sorted: Vec<f64> = outcomes.iter().map(|o| o.1).collect();
        sorted.sort_by(|x, y| x.partial_cmp(y).expect("finite eigenvalues"));
        report.curves.push(Curve {
            label: format!("sorted lambda_1 (N={n})"),
            x: (0..sorted.len()).map(|i| i as f64).collect(),
            y: sorted,
        });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::test_support::tiny_config;

    fn base_config() -> RunConfig {
        let mut cfg = tiny_config();
        cfg.experiment.trials = MIN_TRIALS;
        cfg
    }

    #[test]
    fn bracketing_holds_and_the_extremal_trial_attains_the_minimum() {
        let report = min_spectrum_experiment(&base_config()).unwrap();
        for check in &report.checks {
            assert!(check.passed, "failed: {}", check.label);
        }
        let p = &report.probabilities_for("lambda_1 above lower edge")[0].p;
        assert_eq!(p.successes, p.trials, "no random trial may undershoot the lower edge");
        // the designated extremal rows carry the flag and bracket the rest
        let ext_rows: Vec<_> =
            report.trials.iter().filter(|r| r.flags[2] == 1).collect();
        assert_eq!(ext_rows.len(), 2);
        let min_random = report
            .trials
            .iter()
            .filter(|r| r.flags[2] == 0)
            .map(|r| r.lambda_1)
            .fold(f64::INFINITY, f64::min);
        assert!(ext_rows[0].lambda_1 <= min_random + 1e-9);
    }

    #[test]
    fn negative_slope_swaps_the_attaining_configuration() {
        let mut cfg = base_config();
        cfg.coupling.constant = -1.0;
        let report = min_spectrum_experiment(&cfg).unwrap();
        for check in &report.checks {
            assert!(check.passed, "failed: {}", check.label);
        }
        // repulsive mean coupling: the minimum sits at the bottom of the
        // support, so eps_star = eps * a < 0
        let star = report.scalar("eps_star").unwrap();
        assert!(star < 0.0, "eps_star = {star}");
    }

    #[test]
    fn zero_eps_makes_every_trial_identical() {
        let mut cfg = base_config();
        cfg.experiment.eps = 0.0;
        let report = min_spectrum_experiment(&cfg).unwrap();
        let first = report.trials[0].lambda_1;
        for row in &report.trials {
            assert_eq!(row.lambda_1, first, "couplings vanish, so the pencil is ω-independent");
        }
    }

    #[test]
    fn too_few_trials_is_a_validation_error() {
        let mut cfg = base_config();
        cfg.experiment.trials = 10;
        assert!(matches!(
            min_spectrum_experiment(&cfg),
            Err(Error::ConfigInvalid { .. })
        ));
    }

    #[test]
    fn reports_are_reproducible() {
        let cfg = base_config();
        let a = min_spectrum_experiment(&cfg).unwrap();
        let b = min_spectrum_experiment(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.raw_csv(), b.raw_csv());
    }
}
