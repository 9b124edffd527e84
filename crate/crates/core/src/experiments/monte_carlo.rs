use std::ops::Range;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::filters::{AlgorithmConfig, FilterState};
use crate::signal_model::{
    desired_output, next_noise, InputProcess, SparseSystem, StreamPurpose, TapDelayLine,
    TrialStream,
};
use crate::theory::{db, estimate_sbar_from_tail};

use super::config::Experiment;

/// Any coefficient beyond this magnitude counts as divergence.
pub const DIVERGENCE_LIMIT: f64 = 1e10;

/// Input and noise sequences of one trial, shared by every filter.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialSignals {
    pub input: Vec<f64>,
    pub noise: Vec<f64>,
}

impl TrialSignals {
    pub fn generate(exp: &Experiment, trial: u64) -> Self {
        Self::generate_for(exp, trial, StreamPurpose::Input, StreamPurpose::Noise)
    }

    fn generate_for(
        exp: &Experiment,
        trial: u64,
        input: StreamPurpose,
        noise: StreamPurpose,
    ) -> Self {
        let n = exp.config.n_iters;
        let seed = exp.config.master_seed;
        let mut in_stream = TrialStream::for_purpose(seed, trial, input);
        let mut noise_stream = TrialStream::for_purpose(seed, trial, noise);
        let mut process = InputProcess::new(exp.config.input);
        let input = (0..n)
            .map(|_| process.next_sample(&mut in_stream))
            .collect();
        let noise = (0..n)
            .map(|_| next_noise(&exp.noise, &mut noise_stream))
            .collect();
        Self { input, noise }
    }
}

/// Runs one filter over a trial's signals and returns `‖w_o − w(n)‖²` for
/// `n = 0..N`. `observe` sees the state before every step.
pub fn run_filter<F>(
    system: &SparseSystem,
    config: &AlgorithmConfig,
    signals: &TrialSignals,
    mut observe: F,
) -> Result<Vec<f64>>
where
    F: FnMut(&FilterState),
{
    let m = system.taps();
    let mut state = FilterState::new(m);
    let mut line = TapDelayLine::new(m);
    let mut sq_dev = Vec::with_capacity(signals.input.len());
    for (n, (&x, &v)) in signals.input.iter().zip(&signals.noise).enumerate() {
        sq_dev.push(system.squared_deviation(state.weights()));
        line.push(x);
        let d = desired_output(system, line.regressor(), v)?;
        observe(&state);
        state.step(config, line.regressor(), d)?;
        if state
            .weights()
            .iter()
            .any(|w| !(w.abs() <= DIVERGENCE_LIMIT))
        {
            return Err(Error::Diverged {
                algorithm: None,
                trial: None,
                iteration: n,
            });
        }
    }
    Ok(sq_dev)
}

fn tag_divergence(err: Error, name: &str, trial: u64) -> Error {
    match err {
        Error::Diverged { iteration, .. } => Error::Diverged {
            algorithm: Some(name.to_string()),
            trial: Some(trial),
            iteration,
        },
        other => other,
    }
}

/// Squared-deviation curve of one filter in one trial.
pub fn run_trial(exp: &Experiment, filter_index: usize, trial: u64) -> Result<Vec<f64>> {
    let (name, config) = exp
        .filters
        .get(filter_index)
        .ok_or_else(|| Error::InvalidInput(format!("no filter #{filter_index}")))?;
    let signals = TrialSignals::generate(exp, trial);
    run_filter(&exp.system, config, &signals, |_| {}).map_err(|e| tag_divergence(e, name, trial))
}

/// Every filter of the experiment over the same trial signals.
pub fn run_trial_all(exp: &Experiment, trial: u64) -> Vec<Result<Vec<f64>>> {
    let signals = TrialSignals::generate(exp, trial);
    exp.filters
        .iter()
        .map(|(name, config)| {
            run_filter(&exp.system, config, &signals, |_| {})
                .map_err(|e| tag_divergence(e, name, trial))
        })
        .collect()
}

/// Monte-Carlo learning curve of one filter.
#[derive(Debug, Clone, PartialEq)]
pub struct MsdCurve {
    pub algorithm: String,
    /// `10 log10` of the trial-averaged squared deviation, one entry per iteration.
    pub msd_db: Vec<f64>,
    pub n_trials: usize,
    pub fingerprint: String,
    /// Per-trial squared deviations, in trial order.
    pub trial_sq_dev: Vec<Vec<f64>>,
}

impl MsdCurve {
    fn from_trials(algorithm: &str, fingerprint: &str, trials: Vec<Vec<f64>>) -> Self {
        let n = trials.first().map_or(0, Vec::len);
        let mut sum = vec![0.0; n];
        // fixed trial order keeps the reduction bit-stable
        for t in &trials {
            for (s, v) in sum.iter_mut().zip(t) {
                *s += v;
            }
        }
        let count = trials.len() as f64;
        Self {
            algorithm: algorithm.to_string(),
            msd_db: sum.iter().map(|s| db(s / count)).collect(),
            n_trials: trials.len(),
            fingerprint: fingerprint.to_string(),
            trial_sq_dev: trials,
        }
    }

    pub fn len(&self) -> usize {
        self.msd_db.len()
    }

    pub fn is_empty(&self) -> bool {
        self.msd_db.is_empty()
    }

    /// Trial-averaged squared deviation (linear) at iteration `n`.
    pub fn msd_linear(&self, n: usize) -> f64 {
        self.trial_sq_dev.iter().map(|t| t[n]).sum::<f64>() / self.n_trials as f64
    }

    /// Per-trial mean of the last `window` iterations.
    pub fn trial_tail_means(&self, window: usize) -> Vec<f64> {
        let n = self.len();
        self.trial_sq_dev
            .iter()
            .map(|t| t[n - window..].iter().sum::<f64>() / window as f64)
            .collect()
    }
}

/// Outcome per configured filter; a divergence in one filter does not hide
/// the others.
pub fn run_monte_carlo_per_filter(exp: &Experiment) -> Vec<(String, Result<MsdCurve>)> {
    run_monte_carlo_trials(exp, 0..exp.config.n_trials as u64)
}

pub fn run_monte_carlo_trials(
    exp: &Experiment,
    trials: Range<u64>,
) -> Vec<(String, Result<MsdCurve>)> {
    let per_trial: Vec<Vec<Result<Vec<f64>>>> = trials
        .into_par_iter()
        .map(|t| run_trial_all(exp, t))
        .collect();
    exp.filters
        .iter()
        .enumerate()
        .map(|(k, (name, _))| {
            let mut curves = Vec::with_capacity(per_trial.len());
            for trial in &per_trial {
                match &trial[k] {
                    Ok(c) => curves.push(c.clone()),
                    Err(e) => return (name.clone(), Err(e.clone())),
                }
            }
            (
                name.clone(),
                Ok(MsdCurve::from_trials(name, exp.fingerprint(), curves)),
            )
        })
        .collect()
}

/// All filters' curves, or the first divergence (lowest filter, lowest trial).
pub fn run_monte_carlo(exp: &Experiment) -> Result<Vec<MsdCurve>> {
    run_monte_carlo_per_filter(exp)
        .into_iter()
        .map(|(_, r)| r)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyStateEstimate {
    pub msd_db: f64,
    pub msd_linear: f64,
    /// `(start, end)` iteration range, end exclusive.
    pub window: (usize, usize),
    /// Cross-trial standard deviation of the per-trial tail mean, in dB.
    pub std_across_trials: f64,
    /// Standard error of the linear tail mean.
    pub std_error_linear: f64,
}

/// Tail average of a curve, in the linear domain and then converted to dB.
pub fn estimate_steady_state(curve: &MsdCurve, window: usize) -> Result<SteadyStateEstimate> {
    let n = curve.len();
    if window == 0 || window > n {
        return Err(Error::InvalidInput(format!(
            "window {window} for a curve of {n} iterations"
        )));
    }
    let tails = curve.trial_tail_means(window);
    let count = tails.len() as f64;
    let mean = tails.iter().sum::<f64>() / count;
    let tails_db: Vec<f64> = tails.iter().map(|t| db(*t)).collect();
    let (std_db, std_lin) = if tails.len() > 1 {
        let mean_db = tails_db.iter().sum::<f64>() / count;
        let var_db = tails_db.iter().map(|t| (t - mean_db).powi(2)).sum::<f64>() / (count - 1.0);
        let var_lin = tails.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (count - 1.0);
        (var_db.sqrt(), (var_lin / count).sqrt())
    } else {
        (0.0, 0.0)
    };
    Ok(SteadyStateEstimate {
        msd_db: db(mean),
        msd_linear: mean,
        window: (n - window, n),
        std_across_trials: std_db,
        std_error_linear: std_lin,
    })
}

/// Paired per-trial comparison of two curves over their last `window`
/// iterations: mean and standard error of `tail(a) − tail(b)`, linear units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedDifference {
    pub mean: f64,
    pub std_error: f64,
}

impl PairedDifference {
    /// Mean difference in standard errors.
    pub fn z(&self) -> f64 {
        if self.std_error > 0.0 {
            self.mean / self.std_error
        } else if self.mean == 0.0 {
            0.0
        } else {
            self.mean.signum() * f64::INFINITY
        }
    }
}

pub fn paired_tail_difference(
    a: &MsdCurve,
    b: &MsdCurve,
    window: usize,
) -> Result<PairedDifference> {
    if a.n_trials != b.n_trials || a.len() != b.len() {
        return Err(Error::InvalidComparison(
            "curves must come from the same trials".into(),
        ));
    }
    if window == 0 || window > a.len() {
        return Err(Error::InvalidInput(format!("window {window}")));
    }
    let diffs: Vec<f64> = a
        .trial_tail_means(window)
        .iter()
        .zip(b.trial_tail_means(window))
        .map(|(x, y)| x - y)
        .collect();
    let n = diffs.len() as f64;
    let mean = diffs.iter().sum::<f64>() / n;
    let std_error = if diffs.len() > 1 {
        (diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
    } else {
        0.0
    };
    Ok(PairedDifference { mean, std_error })
}

/// Steady-state penalty weights of the active taps for one filter, from
/// pilot trials on streams independent of the Monte-Carlo trials.
pub fn pilot_sbar(exp: &Experiment, filter_index: usize) -> Result<Vec<f64>> {
    let (_, config) = exp
        .filters
        .get(filter_index)
        .ok_or_else(|| Error::InvalidInput(format!("no filter #{filter_index}")))?;
    let active = exp.system.active_set().to_vec();
    let window = exp.config.steady_state_window;
    let pilots = exp.config.pilot_trials.max(1) as u64;
    let per_trial: Vec<Result<Vec<f64>>> = (0..pilots)
        .into_par_iter()
        .map(|t| {
            let signals = TrialSignals::generate_for(
                exp,
                t,
                StreamPurpose::PilotInput,
                StreamPurpose::PilotNoise,
            );
            let mut trace = Vec::with_capacity(signals.input.len());
            run_filter(&exp.system, config, &signals, |st| {
                trace.push(
                    active
                        .iter()
                        .map(|&i| st.penalty_weight(config, i))
                        .collect(),
                );
            })?;
            estimate_sbar_from_tail(&trace, window)
        })
        .collect();
    let mut mean = vec![0.0; active.len()];
    for r in per_trial {
        for (m, s) in mean.iter_mut().zip(r?) {
            *m += s;
        }
    }
    mean.iter_mut().for_each(|m| *m /= pilots as f64);
    Ok(mean)
}
