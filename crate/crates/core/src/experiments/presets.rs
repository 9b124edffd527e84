use crate::error::{Error, Result};
use crate::signal_model::InputSpec;

use super::config::{AlgorithmSpec, ExperimentConfig, NoiseSetting, SystemSpec};

pub const DEFAULT_SEED: u64 = 42;

const TAPS: usize = 128;
const BLOCKS: [(usize, usize); 2] = [(20, 4), (70, 4)];
const SNR_DB: f64 = 35.0;
const TRIALS: usize = 50;

const RZA_EPSILON: f64 = 0.02;
const RZA_INTENSITY: f64 = 0.08;
const DD_BETA_W: f64 = 0.02;
const DD_BETA_Q: f64 = 2.0;
const DD_INTENSITY: f64 = 0.28;
const DD_GAMMA_Q: f64 = 0.97;
const DD_N_WARM: u64 = 200;

/// `count` evenly spaced values from `start` to `end` inclusive.
pub fn linspace(start: f64, end: f64, count: usize) -> Vec<f64> {
    match count {
        0 => vec![],
        1 => vec![start],
        _ => {
            let step = (end - start) / (count - 1) as f64;
            (0..count)
                .map(|i| {
                    if i + 1 == count {
                        end
                    } else {
                        start + step * i as f64
                    }
                })
                .collect()
        }
    }
}

fn filters(mu_lms: f64, mu_rza: f64, mu_dd: f64) -> Vec<AlgorithmSpec> {
    vec![
        AlgorithmSpec::lms(mu_lms),
        AlgorithmSpec::rza(mu_rza, RZA_INTENSITY, RZA_EPSILON),
        AlgorithmSpec::ddsaf(
            mu_dd,
            DD_INTENSITY,
            DD_BETA_W,
            DD_BETA_Q,
            DD_GAMMA_Q,
            DD_N_WARM,
        ),
    ]
}

fn base(name: &str, n_iters: usize, window: usize) -> ExperimentConfig {
    ExperimentConfig {
        name: name.into(),
        n_iters,
        n_trials: TRIALS,
        master_seed: DEFAULT_SEED,
        steady_state_window: window,
        theory_overlay: false,
        pilot_trials: 10,
        mu_grid: vec![],
        system: SystemSpec {
            taps: TAPS,
            blocks: BLOCKS.to_vec(),
            normalize: true,
        },
        input: InputSpec::White { variance: 1.0 },
        noise: NoiseSetting::Snr { snr_db: SNR_DB },
        algorithms: vec![],
    }
}

/// Configuration of reference experiment `id` (1 to 5).
///
/// 1. white input, tuned step sizes, theory overlay
/// 2. steady-state MSD over a 10-point step-size grid
/// 3. one shared step size
/// 4. AR(1) input at 25 dB SNR
/// 5. Bernoulli-Gaussian impulsive noise, rescaled to the 35 dB SNR of the others
pub fn preset(id: u32) -> Result<ExperimentConfig> {
    let cfg = match id {
        1 => ExperimentConfig {
            theory_overlay: true,
            algorithms: filters(0.006, 0.008, 0.01),
            ..base("experiment-1", 2000, 500)
        },
        2 => ExperimentConfig {
            mu_grid: linspace(0.0005, 0.010, 10),
            algorithms: filters(0.0026, 0.0026, 0.0026),
            ..base("experiment-2", 4000, 1000)
        },
        3 => ExperimentConfig {
            algorithms: filters(0.0026, 0.0026, 0.0026),
            ..base("experiment-3", 4000, 1000)
        },
        4 => ExperimentConfig {
            input: InputSpec::Ar1 {
                rho: 0.85,
                innovation_variance: 0.7,
            },
            noise: NoiseSetting::Snr { snr_db: 25.0 },
            algorithms: filters(0.002, 0.002, 0.002),
            ..base("experiment-4", 8000, 2000)
        },
        5 => ExperimentConfig {
            noise: NoiseSetting::BernoulliGaussianSnr {
                spike_probability: 0.2,
                spike_variance_scale: 100.0,
                snr_db: SNR_DB,
            },
            algorithms: filters(0.0039, 0.0042, 0.005),
            ..base("experiment-5", 2000, 500)
        },
        other => {
            return Err(Error::InvalidInput(format!(
                "unknown experiment {other}; expected 1 to 5"
            )))
        }
    };
    Ok(cfg)
}
