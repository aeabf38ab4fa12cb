//! Wegner-type estimate for the expected number of eigenvalues near a
//! fixed energy below the unperturbed cell ground value.
//!
//! For an energy `E` a safety margin below the unperturbed cell ground
//! value and window half-widths `kappa` no larger than a quarter of that
//! distance, the probability of finding an eigenvalue within `kappa` of
//! `E` is bounded by a constant times `kappa * d * N^2` (times the density
//! seminorm over the gap). The experiment measures event probabilities on
//! a ladder of window widths and box sizes, fits the scaling in both
//! directions, and estimates the bound constant by least squares.

use crate::boxop::{count_eigenvalues_near, lowest_eigenvalue};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::experiments::{
    monotone_within_wilson, probability, run_trials, Check, Curve, ExperimentReport, FitRecord,
    Scalar, Scenario, TrialRow,
};
use crate::stats::{fit_line, fit_log_log};

/// Minimum pooled event count at the smallest window width for the fits
/// to mean anything.
pub const MIN_EVENTS: usize = 10;

/// The bound shape `kappa * d * N^2 * w11 / gap`; the experiment fits the
/// constant in front of it.
pub fn bound_shape(kappa: f64, d: f64, n: usize, w11: f64, gap: f64) -> f64 {
    kappa * d * (n * n) as f64 * w11 / gap
}

pub fn wegner_experiment(cfg: &RunConfig) -> Result<ExperimentReport> {
    let scn = Scenario::from_config(cfg)?;
    let trials = cfg.experiment.trials;
    let eps = cfg.experiment.eps;
    let c2 = cfg.experiment.c2;
    let kappas = cfg.experiment.kappa_list.clone();
    let kappa_max = kappas.iter().copied().fold(0.0_f64, f64::max);
    let kappa_min = kappas.iter().copied().fold(f64::INFINITY, f64::min);

    let lambda_zero = scn.cell_ground(0.0)?;
    let ext = scn.extremal(eps)?;
    // Energy below the unperturbed ground value. The distance must cover
    // the quarter-width rule for the largest window and the eps^2 safety
    // margin; the default also keeps E inside the reachable fluctuation
    // band so that events actually occur.
    let energy = match cfg.experiment.energy {
        Some(e) => {
            let mut violations = Vec::new();
            if e > lambda_zero - c2 * eps * eps {
                violations.push(format!(
                    "experiment.energy = {e}: must stay at least c2*eps^2 = {} below the unperturbed ground value {lambda_zero}",
                    c2 * eps * eps
                ));
            }
            if kappa_max > 0.25 * (lambda_zero - e) {
                violations.push(format!(
                    "largest window width {kappa_max} exceeds a quarter of the distance {} from the energy to the unperturbed ground value",
                    lambda_zero - e
                ));
            }
            if !violations.is_empty() {
                return Err(Error::ConfigInvalid { violations });
            }
            e
        }
        None => {
            let band = lambda_zero - ext.lambda_star;
            lambda_zero - (4.0 * kappa_max).max(c2 * eps * eps).max(0.35 * band)
        }
    };
    let gap = lambda_zero - energy;
    let w11 = scn.disorder.w11_norm();

    let mut report = ExperimentReport {
        name: "wegner".into(),
        config: cfg.clone(),
        parameters: scn.parameters(cfg, eps),
        scalars: vec![
            Scalar { label: "energy".into(), value: energy },
            Scalar { label: "lambda_zero".into(), value: lambda_zero },
            Scalar { label: "lambda_star".into(), value: ext.lambda_star },
            Scalar { label: "gap_to_lambda_zero".into(), value: gap },
            Scalar { label: "density_seminorm".into(), value: w11 },
        ],
        probabilities: vec![],
        fits: vec![],
        checks: vec![],
        curves: vec![],
        flag_names: kappas.iter().map(|k| format!("hit_kappa_{k}")).collect(),
        trials: vec![],
        provenance: scn.provenance(),
    };

    let mut hits_by_n: Vec<(usize, Vec<usize>)> = Vec::new();
    for &n in &cfg.experiment.n_list {
        let grid = scn.grid(n)?;
        // trust the discretization up to a fixed fraction of the largest
        // resolvable transverse energy
        let ceiling = 0.25 * (std::f64::consts::PI / grid.hy).powi(2);
        if energy + kappa_max > ceiling {
            return Err(Error::ConfigInvalid {
                violations: vec![format!(
                    "window top {} exceeds the resolvable-energy ceiling {ceiling}; refine the grid",
                    energy + kappa_max
                )],
            });
        }
        let outcomes: Vec<(usize, f64, Vec<usize>)> = run_trials(trials, |t| {
            let omega = scn.sample(n, t);
            let op = scn.assemble(&grid, eps, omega, &ext.trace)?;
            let lam = lowest_eigenvalue(&op)?;
            let counts = kappas
                .iter()
                .map(|&k| count_eigenvalues_near(&op, energy, k, ceiling))
                .collect::<Result<Vec<usize>>>()?;
            Ok((t, lam, counts))
        })?;

        let mut hits = vec![0usize; kappas.len()];
        for (t, lam, counts) in &outcomes {
            let flags: Vec<u8> = counts.iter().map(|&c| u8::from(c >= 1)).collect();
            for (total, &f) in hits.iter_mut().zip(&flags) {
                *total += usize::from(f);
            }
            report.trials.push(TrialRow {
                trial: *t,
                seed: scn.disorder.seed(),
                n_cells: n,
                eps,
                lambda_1: *lam,
                flags,
            });
        }
        for (&k, &count) in kappas.iter().zip(&hits) {
            report
                .probabilities
                .push(probability("eigenvalue within kappa of energy", n, k, count, trials)?);
        }
        report.curves.push(Curve {
            label: format!("event probability vs kappa (N={n})"),
            x: kappas.clone(),
            y: hits.iter().map(|&h| h as f64 / trials as f64).collect(),
        });
        hits_by_n.push((n, hits));
    }

    let smallest_idx = kappas
        .iter()
        .position(|&k| k == kappa_min)
        .expect("kappa_min is an element of the list");
    let events_at_smallest: usize = hits_by_n.iter().map(|(_, h)| h[smallest_idx]).sum();
    let any_events = hits_by_n.iter().any(|(_, h)| h.iter().any(|&c| c > 0));
    report.checks.push(Check {
        label: "any events observed".into(),
        passed: any_events,
    });

    if any_events {
        if events_at_smallest < MIN_EVENTS {
            return Err(Error::InsufficientEvents {
                events: events_at_smallest,
                min: MIN_EVENTS,
            });
        }

        // per-size window-width scaling, weighted by Wilson precision
        let mut slope_acc = 0.0;
        let mut weight_acc = 0.0;
        for (n, hits) in &hits_by_n {
            let pts: Vec<(f64, f64, f64)> = kappas
                .iter()
                .zip(hits)
                .filter(|(_, &h)| h > 0)
                .map(|(&k, &h)| {
                    let p = h as f64 / trials as f64;
                    let rec = report
                        .probabilities
                        .iter()
                        .find(|r| r.n_cells == *n && r.parameter == k)
                        .expect("recorded above");
                    let width = (rec.p.upper - rec.p.lower).max(1e-12);
                    (k, p, (p / width).powi(2))
                })
                .collect();
            if pts.len() >= 2 {
                let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
                let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
                let ws: Vec<f64> = pts.iter().map(|p| p.2).collect();
                let fit = fit_log_log(&xs, &ys, Some(&ws))?;
                let events: usize = hits.iter().sum();
                slope_acc += fit.slope * events as f64;
                weight_acc += events as f64;
                report.fits.push(FitRecord {
                    label: format!("log event probability vs log kappa (N={n})"),
                    fit,
                });
            }
        }
        if weight_acc > 0.0 {
            report.scalars.push(Scalar {
                label: "kappa_slope".into(),
                value: slope_acc / weight_acc,
            });
        }

        // size scaling at the widest window
        let max_idx = kappas
            .iter()
            .position(|&k| k == kappa_max)
            .expect("kappa_max is an element of the list");
        if hits_by_n.len() >= 2 {
            let xs: Vec<f64> = hits_by_n.iter().map(|(n, _)| (*n * *n) as f64).collect();
            let ys: Vec<f64> = hits_by_n
                .iter()
                .map(|(_, h)| h[max_idx] as f64 / trials as f64)
                .collect();
            report.fits.push(FitRecord {
                label: "event probability vs squared box size at kappa_max".into(),
                fit: fit_line(&xs, &ys, None)?,
            });
        }

        // least-squares constant in front of the bound shape
        let mut num = 0.0;
        let mut den = 0.0;
        for (n, hits) in &hits_by_n {
            for (&k, &h) in kappas.iter().zip(hits) {
                let s = bound_shape(k, scn.geom.d, *n, w11, gap);
                num += (h as f64 / trials as f64) * s;
                den += s * s;
            }
        }
        if den > 0.0 {
            report.scalars.push(Scalar { label: "fitted_C".into(), value: num / den });
        }
    }

    for &k in &kappas {
        let series: Vec<_> = report
            .probabilities
            .iter()
            .filter(|p| p.parameter == k)
            .collect();
        report.checks.push(Check {
            label: format!(
                "event probability non-decreasing in box size (kappa={k}, within Wilson overlap)"
            ),
            passed: monotone_within_wilson(&series, false),
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
        cfg.numerics.nodes_per_cell = 10;
        cfg.experiment.eps = 0.15;
        cfg.experiment.trials = 200;
        cfg.experiment.n_list = vec![2];
        cfg.experiment.kappa_list = vec![0.02, 0.05];
        cfg
    }

    #[test]
    fn window_events_are_nested_and_probabilities_grow_with_kappa() {
        let report = wegner_experiment(&base_config()).unwrap();
        for row in &report.trials {
            assert!(
                row.flags[0] <= row.flags[1],
                "a hit in the narrow window implies a hit in the wide one"
            );
        }
        let probs = report.probabilities_for("eigenvalue within kappa of energy");
        assert!(probs[0].p.estimate <= probs[1].p.estimate);
        assert!(probs[0].p.successes >= MIN_EVENTS, "the test scenario must produce events");
        assert!(report.check("any events observed").unwrap());
        assert!(report.scalar("fitted_C").is_some());
    }

    #[test]
    fn energy_far_below_the_spectrum_yields_a_degenerate_zero_report() {
        let mut cfg = base_config();
        cfg.experiment.trials = 30;
        cfg.experiment.energy = Some(5.0);
        cfg.experiment.kappa_list = vec![0.02, 0.05];
        let report = wegner_experiment(&cfg).unwrap();
        assert!(!report.check("any events observed").unwrap());
        assert!(report.fits.is_empty());
        for p in &report.probabilities {
            assert_eq!(p.p.successes, 0);
        }
    }

    #[test]
    fn sparse_events_at_the_smallest_window_are_an_error() {
        let mut cfg = base_config();
        cfg.experiment.kappa_list = vec![1e-4, 0.05];
        let result = wegner_experiment(&cfg);
        assert!(matches!(result, Err(Error::InsufficientEvents { .. })), "{result:?}");
    }

    #[test]
    fn explicit_energy_violating_the_quarter_rule_is_rejected() {
        let mut cfg = base_config();
        cfg.experiment.energy = Some(9.7);
        cfg.experiment.kappa_list = vec![0.02, 0.2];
        assert!(matches!(
            wegner_experiment(&cfg),
            Err(Error::ConfigInvalid { .. })
        ));
    }

    #[test]
    fn degenerate_reports_are_reproducible() {
        let mut cfg = base_config();
        cfg.experiment.trials = 30;
        cfg.experiment.energy = Some(5.0);
        let a = wegner_experiment(&cfg).unwrap();
        let b = wegner_experiment(&cfg).unwrap();
        assert_eq!(a, b);
    }
}
