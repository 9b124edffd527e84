//! Monte-Carlo harness: seeded trials, MSD learning curves, steady-state
//! estimates, step-size sweeps and the five reference experiments.
//!
//! Within a trial every filter consumes the same input and noise sequences,
//! so comparisons between filters are paired. Trials run in parallel and are
//! reduced in trial order, which keeps results bit-stable.

mod config;
mod io;
mod monte_carlo;
mod presets;

pub use config::{
    rho0_from_intensity, AlgorithmSpec, Experiment, ExperimentConfig, NoiseSetting, SystemSpec,
    ATTRACTION_GAIN, CALIBRATION_SAMPLES,
};
pub use io::{
    curve_rows, read_curves_csv, read_sweep_csv, write_curves_csv, write_sweep_csv, CurveRow,
    Source,
};
pub use monte_carlo::{
    estimate_steady_state, paired_tail_difference, pilot_sbar, run_filter, run_monte_carlo,
    run_monte_carlo_per_filter, run_monte_carlo_trials, run_trial, run_trial_all, MsdCurve,
    PairedDifference, SteadyStateEstimate, TrialSignals, DIVERGENCE_LIMIT,
};
pub use presets::{linspace, preset, DEFAULT_SEED};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One `(μ, filter)` point of a step-size sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub mu: f64,
    pub algorithm: String,
    pub msd_ss_db: f64,
    pub std_db: f64,
    pub diverged: bool,
}

/// Runs the experiment once per grid value with that step size applied to
/// every filter. Divergent points are marked, not fatal.
pub fn step_size_sweep(base: &ExperimentConfig, mu_grid: &[f64]) -> Result<Vec<SweepRow>> {
    if mu_grid.is_empty() {
        return Err(Error::InvalidInput("empty step-size grid".into()));
    }
    let mut rows = Vec::with_capacity(mu_grid.len() * base.algorithms.len());
    for &mu in mu_grid {
        let exp = Experiment::prepare(&base.with_shared_mu(mu))?;
        for (name, outcome) in run_monte_carlo_per_filter(&exp) {
            match outcome {
                Ok(curve) => {
                    let ss = estimate_steady_state(&curve, base.steady_state_window)?;
                    rows.push(SweepRow {
                        mu,
                        algorithm: name,
                        msd_ss_db: ss.msd_db,
                        std_db: ss.std_across_trials,
                        diverged: false,
                    });
                }
                Err(Error::Diverged { .. }) => rows.push(SweepRow {
                    mu,
                    algorithm: name,
                    msd_ss_db: f64::NAN,
                    std_db: f64::NAN,
                    diverged: true,
                }),
                Err(other) => return Err(other),
            }
        }
    }
    Ok(rows)
}

/// Lowest steady-state MSD of one filter over a sweep, ignoring divergent points.
pub fn sweep_minimum(rows: &[SweepRow], algorithm: &str) -> Option<(f64, f64)> {
    rows.iter()
        .filter(|r| r.algorithm == algorithm && !r.diverged)
        .map(|r| (r.mu, r.msd_ss_db))
        .min_by(|a, b| a.1.total_cmp(&b.1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filters::Algorithm;
    use crate::signal_model::InputSpec;
    use crate::theory::db;

    fn small_config() -> ExperimentConfig {
        ExperimentConfig {
            name: "small".into(),
            n_iters: 400,
            n_trials: 6,
            master_seed: 99,
            steady_state_window: 100,
            theory_overlay: false,
            pilot_trials: 2,
            mu_grid: vec![],
            system: SystemSpec {
                taps: 16,
                blocks: vec![(2, 2), (9, 2)],
                normalize: true,
            },
            input: InputSpec::White { variance: 1.0 },
            noise: NoiseSetting::Snr { snr_db: 30.0 },
            algorithms: vec![
                AlgorithmSpec::lms(0.02),
                AlgorithmSpec::rza(0.02, 0.08, 0.02),
                AlgorithmSpec::ddsaf(0.02, 0.28, 0.02, 2.0, 0.97, 20),
            ],
        }
    }

    #[test]
    fn first_entry_is_system_energy() {
        let exp = Experiment::prepare(&small_config()).unwrap();
        let curves = run_monte_carlo(&exp).unwrap();
        for c in &curves {
            assert_eq!(c.len(), 400);
            assert!(c.msd_db[0].abs() < 1e-12, "{}", c.msd_db[0]);
            assert!(c.msd_db.iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn trials_are_reproducible() {
        let exp = Experiment::prepare(&small_config()).unwrap();
        let a = run_trial(&exp, 2, 3).unwrap();
        let b = run_trial(&exp, 2, 3).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, run_trial(&exp, 2, 4).unwrap());
        // the all-filter path sees the same signals
        assert_eq!(run_trial_all(&exp, 3)[2].as_ref().unwrap(), &a);
    }

    #[test]
    fn single_trial_curve_is_that_trial() {
        let mut cfg = small_config();
        cfg.n_trials = 1;
        let exp = Experiment::prepare(&cfg).unwrap();
        let curves = run_monte_carlo(&exp).unwrap();
        let trial = run_trial(&exp, 0, 0).unwrap();
        for (d, t) in curves[0].msd_db.iter().zip(&trial) {
            assert_eq!(*d, db(*t));
        }
    }

    #[test]
    fn averaging_is_linear_over_disjoint_trials() {
        let mut cfg = small_config();
        cfg.n_trials = 8;
        let exp = Experiment::prepare(&cfg).unwrap();
        let all = run_monte_carlo_trials(&exp, 0..8);
        let lo = run_monte_carlo_trials(&exp, 0..4);
        let hi = run_monte_carlo_trials(&exp, 4..8);
        for k in 0..3 {
            let (a, l, h) = (
                all[k].1.as_ref().unwrap(),
                lo[k].1.as_ref().unwrap(),
                hi[k].1.as_ref().unwrap(),
            );
            for n in 0..a.len() {
                let combined = 0.5 * (l.msd_linear(n) + h.msd_linear(n));
                assert!((a.msd_linear(n) - combined).abs() <= 1e-14 * a.msd_linear(n));
            }
        }
    }

    #[test]
    fn divergence_is_reported_with_trial() {
        let mut cfg = small_config();
        cfg.algorithms = vec![AlgorithmSpec::lms(0.5), AlgorithmSpec::lms(0.01)];
        cfg.algorithms[1].name = "LMS-slow".into();
        let exp = Experiment::prepare(&cfg).unwrap();
        let outcomes = run_monte_carlo_per_filter(&exp);
        match &outcomes[0].1 {
            Err(Error::Diverged {
                algorithm,
                trial,
                iteration,
            }) => {
                assert_eq!(algorithm.as_deref(), Some("LMS"));
                assert_eq!(*trial, Some(0));
                assert!(*iteration < 400);
            }
            other => panic!("expected divergence, got {other:?}"),
        }
        assert!(outcomes[1].1.is_ok());
        assert!(run_monte_carlo(&exp).is_err());
    }

    #[test]
    fn steady_state_uses_linear_mean() {
        let curve = MsdCurve {
            algorithm: "x".into(),
            msd_db: vec![-30.0; 10],
            n_trials: 1,
            fingerprint: String::new(),
            trial_sq_dev: vec![vec![1e-3; 10]],
        };
        let ss = estimate_steady_state(&curve, 4).unwrap();
        assert!((ss.msd_db + 30.0).abs() < 1e-12);
        assert_eq!(ss.window, (6, 10));
        assert!(estimate_steady_state(&curve, 11).is_err());

        // two-level tail: 1e-2 and 1e-4 -> linear mean 5.05e-3, not the dB mean
        let mut tail = vec![1e-2; 5];
        tail.extend(vec![1e-4; 5]);
        let curve = MsdCurve {
            trial_sq_dev: vec![tail.clone()],
            msd_db: tail.iter().map(|v| db(*v)).collect(),
            ..curve
        };
        let ss = estimate_steady_state(&curve, 10).unwrap();
        assert!((ss.msd_db - db(5.05e-3)).abs() < 1e-12);
        let db_mean = curve.msd_db.iter().sum::<f64>() / 10.0;
        assert!((ss.msd_db - db_mean).abs() > 5.0);
    }

    #[test]
    fn paired_difference_stats() {
        let mk = |vals: Vec<f64>| MsdCurve {
            algorithm: "x".into(),
            msd_db: vec![0.0; 2],
            n_trials: vals.len(),
            fingerprint: String::new(),
            trial_sq_dev: vals.into_iter().map(|v| vec![9.0, v]).collect(),
        };
        let a = mk(vec![3.0, 4.0, 5.0]);
        let b = mk(vec![1.0, 1.0, 1.0]);
        let d = paired_tail_difference(&a, &b, 1).unwrap();
        assert!((d.mean - 3.0).abs() < 1e-15);
        assert!((d.std_error - (1.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!(d.z() > 5.0);
    }

    #[test]
    fn single_point_sweep_matches_run() {
        let cfg = small_config();
        let rows = step_size_sweep(&cfg, &[0.02]).unwrap();
        let exp = Experiment::prepare(&cfg).unwrap();
        let curves = run_monte_carlo(&exp).unwrap();
        assert_eq!(rows.len(), 3);
        for (row, curve) in rows.iter().zip(&curves) {
            let ss = estimate_steady_state(curve, cfg.steady_state_window).unwrap();
            assert_eq!(row.msd_ss_db, ss.msd_db);
            assert_eq!(row.std_db, ss.std_across_trials);
            assert!(!row.diverged);
        }
        assert!(step_size_sweep(&cfg, &[]).is_err());
    }

    #[test]
    fn sweep_marks_divergent_points() {
        let cfg = small_config();
        let rows = step_size_sweep(&cfg, &[0.02, 1.5]).unwrap();
        assert_eq!(rows.len(), 6);
        assert!(rows[..3].iter().all(|r| !r.diverged));
        assert!(rows[3..].iter().all(|r| r.diverged && r.msd_ss_db.is_nan()));
        let (mu, _) = sweep_minimum(&rows, "DD-SAF").unwrap();
        assert_eq!(mu, 0.02);
    }

    #[test]
    fn pilot_weights_in_unit_interval() {
        let exp = Experiment::prepare(&small_config()).unwrap();
        let idx = exp.filter_index("DD-SAF").unwrap();
        let sbar = pilot_sbar(&exp, idx).unwrap();
        assert_eq!(sbar.len(), 4);
        assert!(sbar.iter().all(|s| *s > 0.0 && *s <= 1.0));
        let lms = exp.filter_index("lms").unwrap();
        assert_eq!(exp.filters[lms].1.algorithm, Algorithm::Lms);
        assert_eq!(pilot_sbar(&exp, lms).unwrap(), vec![1.0; 4]);
    }
}
