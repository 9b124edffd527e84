//! Experiment configuration: the serializable description of a Monte-Carlo
//! run and its resolution into concrete systems, noise processes and filter
//! parameters.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::filters::{Algorithm, AlgorithmConfig};
use crate::signal_model::{
    generate_sparse_system, measure_signal_power, snr_to_noise_variance, InputSpec, NoiseSpec,
    SparseSystem, StreamPurpose, TrialStream,
};

/// Samples of clean output used to estimate signal power under correlated input.
pub const CALIBRATION_SAMPLES: usize = 100_000;

/// Zero-attraction strength as a multiple of the gradient step: a filter with
/// step size `μ` and intensity `γ` gets `ρ₀ = γ · μ · (μσ_x²) · ATTRACTION_GAIN`.
pub const ATTRACTION_GAIN: f64 = 1.15;

/// Resolves a zero-attraction intensity into `ρ₀`.
pub fn rho0_from_intensity(intensity: f64, mu: f64, sigma_x2: f64) -> f64 {
    intensity * mu * (mu * sigma_x2) * ATTRACTION_GAIN
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub taps: usize,
    /// `(start, length)` of each nonzero block.
    pub blocks: Vec<(usize, usize)>,
    pub normalize: bool,
}

/// Measurement-noise setting. `Snr` derives a Gaussian variance from the
/// clean-output power; `BernoulliGaussianSnr` rescales a unit-background
/// mixture so that its total variance meets the same target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseSetting {
    Snr {
        snr_db: f64,
    },
    Gaussian {
        variance: f64,
    },
    BernoulliGaussian {
        spike_probability: f64,
        background_variance: f64,
        spike_variance_scale: f64,
        #[serde(default = "one")]
        global_scale: f64,
    },
    BernoulliGaussianSnr {
        spike_probability: f64,
        spike_variance_scale: f64,
        snr_db: f64,
    },
}

fn one() -> f64 {
    1.0
}

/// One filter in an experiment. `rho0`, when present, wins over `attraction`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSpec {
    pub name: String,
    pub algorithm: Algorithm,
    pub mu: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho0: Option<f64>,
    /// Intensity resolved through [`rho0_from_intensity`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attraction: Option<f64>,
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default)]
    pub beta_w: f64,
    #[serde(default)]
    pub beta_q: f64,
    #[serde(default = "default_gamma_q")]
    pub gamma_q: f64,
    #[serde(default)]
    pub n_warm: u64,
}

fn default_gamma_q() -> f64 {
    0.97
}

impl AlgorithmSpec {
    pub fn lms(mu: f64) -> Self {
        Self {
            name: Algorithm::Lms.label().into(),
            algorithm: Algorithm::Lms,
            mu,
            rho0: None,
            attraction: None,
            epsilon: 0.0,
            beta_w: 0.0,
            beta_q: 0.0,
            gamma_q: default_gamma_q(),
            n_warm: 0,
        }
    }

    pub fn rza(mu: f64, attraction: f64, epsilon: f64) -> Self {
        Self {
            name: Algorithm::Rza.label().into(),
            algorithm: Algorithm::Rza,
            attraction: Some(attraction),
            epsilon,
            ..Self::lms(mu)
        }
    }

    pub fn ddsaf(
        mu: f64,
        attraction: f64,
        beta_w: f64,
        beta_q: f64,
        gamma_q: f64,
        n_warm: u64,
    ) -> Self {
        Self {
            name: Algorithm::DdSaf.label().into(),
            algorithm: Algorithm::DdSaf,
            attraction: Some(attraction),
            beta_w,
            beta_q,
            gamma_q,
            n_warm,
            ..Self::lms(mu)
        }
    }

    pub fn resolve_rho0(&self, sigma_x2: f64) -> f64 {
        if self.algorithm == Algorithm::Lms {
            return 0.0;
        }
        match (self.rho0, self.attraction) {
            (Some(r), _) => r,
            (None, Some(g)) => rho0_from_intensity(g, self.mu, sigma_x2),
            (None, None) => 0.0,
        }
    }

    pub fn resolve(&self, sigma_x2: f64) -> AlgorithmConfig {
        AlgorithmConfig {
            algorithm: self.algorithm,
            mu: self.mu,
            rho0: self.resolve_rho0(sigma_x2),
            epsilon: self.epsilon,
            beta_w: self.beta_w,
            beta_q: self.beta_q,
            gamma_q: self.gamma_q,
            n_warm: self.n_warm,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub n_iters: usize,
    pub n_trials: usize,
    pub master_seed: u64,
    pub steady_state_window: usize,
    pub theory_overlay: bool,
    /// Trials used to estimate steady-state penalty weights for the theory overlay.
    #[serde(default = "default_pilot_trials")]
    pub pilot_trials: usize,
    /// Step sizes for a sweep; empty for plain runs.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub mu_grid: Vec<f64>,
    pub system: SystemSpec,
    pub input: InputSpec,
    pub noise: NoiseSetting,
    pub algorithms: Vec<AlgorithmSpec>,
}

fn default_pilot_trials() -> usize {
    10
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trials == 0 {
            return Err(Error::InvalidConfig("need at least one trial".into()));
        }
        if self.steady_state_window == 0 || self.steady_state_window > self.n_iters {
            return Err(Error::InvalidConfig(format!(
                "steady-state window {} must lie in 1..={}",
                self.steady_state_window, self.n_iters
            )));
        }
        if self.algorithms.is_empty() {
            return Err(Error::InvalidConfig("no algorithms configured".into()));
        }
        self.input.validate()?;
        let sx2 = self.input.stationary_variance();
        for spec in &self.algorithms {
            spec.resolve(sx2).validate()?;
        }
        if self.mu_grid.iter().any(|mu| !(*mu > 0.0)) {
            return Err(Error::InvalidConfig(
                "step-size grid must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Short hex digest of the canonical serialized configuration.
    pub fn fingerprint(&self) -> String {
        let canonical = toml::to_string(self).expect("experiment config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        hex::encode(&digest[..8])
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("experiment config serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self =
            toml::from_str(text).map_err(|e| Error::InvalidConfig(format!("config file: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Same configuration with every filter's step size set to `mu`.
    pub fn with_shared_mu(&self, mu: f64) -> Self {
        let mut cfg = self.clone();
        for spec in &mut cfg.algorithms {
            spec.mu = mu;
        }
        cfg
    }

    pub fn algorithm_mut(&mut self, key: &str) -> Option<&mut AlgorithmSpec> {
        let parsed = key.parse::<Algorithm>().ok();
        self.algorithms
            .iter_mut()
            .find(|s| s.name.eq_ignore_ascii_case(key) || Some(s.algorithm) == parsed)
    }
}

fn snr_noise_variance(snr_db: f64, signal_power: f64) -> Result<f64> {
    if !(signal_power > 0.0) {
        return Err(Error::InvalidConfig(
            "SNR-calibrated noise needs a nonzero system".into(),
        ));
    }
    Ok(snr_to_noise_variance(snr_db, signal_power))
}

/// A configuration with its random system drawn and its noise resolved.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub system: SparseSystem,
    pub noise: NoiseSpec,
    pub signal_power: f64,
    pub filters: Vec<(String, AlgorithmConfig)>,
    fingerprint: String,
}

impl Experiment {
    pub fn prepare(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let mut stream = TrialStream::for_purpose(config.master_seed, 0, StreamPurpose::System);
        let system = generate_sparse_system(
            config.system.taps,
            &config.system.blocks,
            &mut stream,
            config.system.normalize,
        )?;

        let signal_power = match config.input {
            InputSpec::White { variance } => variance * system.norm_squared(),
            InputSpec::Ar1 { .. } => {
                let mut cal =
                    TrialStream::for_purpose(config.master_seed, 0, StreamPurpose::Calibration);
                measure_signal_power(&system, &config.input, &mut cal, CALIBRATION_SAMPLES)
            }
        };

        let noise = match config.noise {
            NoiseSetting::Snr { snr_db } => NoiseSpec::Gaussian {
                variance: snr_noise_variance(snr_db, signal_power)?,
            },
            NoiseSetting::BernoulliGaussianSnr {
                spike_probability,
                spike_variance_scale,
                snr_db,
            } => {
                let unit = NoiseSpec::BernoulliGaussian {
                    spike_probability,
                    background_variance: 1.0,
                    spike_variance_scale,
                    global_scale: 1.0,
                };
                let target = snr_noise_variance(snr_db, signal_power)?;
                NoiseSpec::BernoulliGaussian {
                    spike_probability,
                    background_variance: 1.0,
                    spike_variance_scale,
                    global_scale: (target / unit.variance()).sqrt(),
                }
            }
            NoiseSetting::Gaussian { variance } => NoiseSpec::Gaussian { variance },
            NoiseSetting::BernoulliGaussian {
                spike_probability,
                background_variance,
                spike_variance_scale,
                global_scale,
            } => NoiseSpec::BernoulliGaussian {
                spike_probability,
                background_variance,
                spike_variance_scale,
                global_scale,
            },
        };
        noise.validate()?;

        let sx2 = config.input.stationary_variance();
        let filters = config
            .algorithms
            .iter()
            .map(|s| (s.name.clone(), s.resolve(sx2)))
            .collect();

        Ok(Self {
            config: config.clone(),
            system,
            noise,
            signal_power,
            filters,
            fingerprint: config.fingerprint(),
        })
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn sigma_x2(&self) -> f64 {
        self.config.input.stationary_variance()
    }

    pub fn filter_index(&self, key: &str) -> Option<usize> {
        let parsed = key.parse::<Algorithm>().ok();
        self.filters
            .iter()
            .position(|(name, cfg)| name.eq_ignore_ascii_case(key) || Some(cfg.algorithm) == parsed)
    }
}
