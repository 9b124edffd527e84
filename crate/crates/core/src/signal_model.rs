//! Ground-truth systems, input processes, noise processes and the observation
//! model `d(n) = w_o^T x(n) + v(n)`.
//!
//! Every random quantity is drawn from a [`TrialStream`], a ChaCha8 stream
//! keyed by `(master_seed, purpose, trial_index)`. Regenerating a stream from
//! the same key reproduces its samples bit for bit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// What a stream is used for. Each purpose gets its own key so that, e.g.,
/// the input and noise sequences of one trial are independent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StreamPurpose {
    System,
    Input,
    Noise,
    Calibration,
    PilotInput,
    PilotNoise,
}

impl StreamPurpose {
    fn tag(self) -> u64 {
        match self {
            StreamPurpose::System => 0x5359_5354,
            StreamPurpose::Input => 0x494e_5055,
            StreamPurpose::Noise => 0x4e4f_4953,
            StreamPurpose::Calibration => 0x4341_4c49,
            StreamPurpose::PilotInput => 0x5049_4c49,
            StreamPurpose::PilotNoise => 0x5049_4c4e,
        }
    }
}

/// A reproducible random stream for one Monte-Carlo trial.
///
/// Not `Sync`-shared: each execution context owns its own stream.
#[derive(Debug, Clone)]
pub struct TrialStream {
    master_seed: u64,
    trial_index: u64,
    purpose: StreamPurpose,
    rng: ChaCha8Rng,
}

impl TrialStream {
    pub fn new(master_seed: u64, trial_index: u64) -> Self {
        Self::for_purpose(master_seed, trial_index, StreamPurpose::Input)
    }

    pub fn for_purpose(master_seed: u64, trial_index: u64, purpose: StreamPurpose) -> Self {
        // splitmix-style mixing keeps (seed, purpose) pairs from colliding
        let mut key = master_seed ^ purpose.tag().wrapping_mul(0x9e37_79b9_7f4a_7c15);
        key = (key ^ (key >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        key = (key ^ (key >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        key ^= key >> 31;
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        rng.set_stream(trial_index);
        Self {
            master_seed,
            trial_index,
            purpose,
            rng,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn trial_index(&self) -> u64 {
        self.trial_index
    }

    pub fn purpose(&self) -> StreamPurpose {
        self.purpose
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }
}

/// Ground-truth coefficient vector `w_o` with its active index set.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSystem {
    coefficients: Vec<f64>,
    active_set: Vec<usize>,
}

impl SparseSystem {
    /// Wraps an explicit coefficient vector; the active set is every nonzero tap.
    pub fn from_coefficients(coefficients: Vec<f64>) -> Self {
        let active_set = coefficients
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(i, _)| i)
            .collect();
        Self {
            coefficients,
            active_set,
        }
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn active_set(&self) -> &[usize] {
        &self.active_set
    }

    pub fn taps(&self) -> usize {
        self.coefficients.len()
    }

    pub fn sparsity(&self) -> usize {
        self.active_set.len()
    }

    pub fn norm_squared(&self) -> f64 {
        self.coefficients.iter().map(|c| c * c).sum()
    }

    /// `‖w_o − w‖²`.
    pub fn squared_deviation(&self, estimate: &[f64]) -> f64 {
        self.coefficients
            .iter()
            .zip(estimate)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }
}

/// Draws a block-sparse system. `blocks` holds `(start, length)` pairs; the
/// nonzero values are standard normal, optionally rescaled to unit norm.
pub fn generate_sparse_system(
    taps: usize,
    blocks: &[(usize, usize)],
    values: &mut TrialStream,
    normalize: bool,
) -> Result<SparseSystem> {
    let mut occupied = vec![false; taps];
    for &(start, len) in blocks {
        let end = start
            .checked_add(len)
            .filter(|&end| end <= taps)
            .ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "block ({start}, {len}) does not fit in {taps} taps"
                ))
            })?;
        for slot in &mut occupied[start..end] {
            if *slot {
                return Err(Error::InvalidConfig(format!(
                    "block ({start}, {len}) overlaps another block"
                )));
            }
            *slot = true;
        }
    }

    let mut coefficients = vec![0.0; taps];
    let mut active_set: Vec<usize> = blocks
        .iter()
        .flat_map(|&(start, len)| start..start + len)
        .collect();
    for &i in &active_set {
        coefficients[i] = values.standard_normal();
    }
    active_set.sort_unstable();

    if normalize {
        let norm = coefficients.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm > 0.0 {
            coefficients.iter_mut().for_each(|c| *c /= norm);
        }
    }

    Ok(SparseSystem {
        coefficients,
        active_set,
    })
}

/// Scalar input process feeding the tapped delay line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InputSpec {
    White { variance: f64 },
    Ar1 { rho: f64, innovation_variance: f64 },
}

impl InputSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            InputSpec::White { variance } if variance > 0.0 => Ok(()),
            InputSpec::Ar1 {
                rho,
                innovation_variance,
            } if innovation_variance > 0.0 && rho.abs() < 1.0 => Ok(()),
            other => Err(Error::InvalidConfig(format!("bad input process {other:?}"))),
        }
    }

    /// Marginal variance of the stationary process.
    pub fn stationary_variance(&self) -> f64 {
        match *self {
            InputSpec::White { variance } => variance,
            InputSpec::Ar1 {
                rho,
                innovation_variance,
            } => innovation_variance / (1.0 - rho * rho),
        }
    }

    pub fn is_white(&self) -> bool {
        matches!(self, InputSpec::White { .. })
    }
}

/// One draw of the input process. `previous` is `x(n−1)` (0 at `n = 0`) and is
/// ignored for white input.
pub fn next_input(spec: &InputSpec, previous: f64, stream: &mut TrialStream) -> f64 {
    match *spec {
        InputSpec::White { variance } => variance.sqrt() * stream.standard_normal(),
        InputSpec::Ar1 {
            rho,
            innovation_variance,
        } => rho * previous + innovation_variance.sqrt() * stream.standard_normal(),
    }
}

/// Stateful wrapper around [`next_input`].
#[derive(Debug, Clone)]
pub struct InputProcess {
    spec: InputSpec,
    previous: f64,
}

impl InputProcess {
    pub fn new(spec: InputSpec) -> Self {
        Self {
            spec,
            previous: 0.0,
        }
    }

    pub fn next_sample(&mut self, stream: &mut TrialStream) -> f64 {
        let x = next_input(&self.spec, self.previous, stream);
        self.previous = x;
        x
    }
}

/// Measurement noise model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseSpec {
    Gaussian {
        variance: f64,
    },
    /// With probability `spike_probability` the sample is drawn with variance
    /// `spike_variance_scale · background_variance`, otherwise with
    /// `background_variance`; the sample is then multiplied by `global_scale`.
    BernoulliGaussian {
        spike_probability: f64,
        background_variance: f64,
        spike_variance_scale: f64,
        #[serde(default = "unit_scale")]
        global_scale: f64,
    },
}

fn unit_scale() -> f64 {
    1.0
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            NoiseSpec::Gaussian { variance } => variance > 0.0,
            NoiseSpec::BernoulliGaussian {
                spike_probability,
                background_variance,
                spike_variance_scale,
                global_scale,
            } => {
                (0.0..=1.0).contains(&spike_probability)
                    && background_variance > 0.0
                    && spike_variance_scale > 0.0
                    && global_scale > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("bad noise process {self:?}")))
        }
    }

    /// Overall variance of one noise sample.
    pub fn variance(&self) -> f64 {
        match *self {
            NoiseSpec::Gaussian { variance } => variance,
            NoiseSpec::BernoulliGaussian {
                spike_probability: p,
                background_variance: bg,
                spike_variance_scale: kappa,
                global_scale,
            } => global_scale * global_scale * ((1.0 - p) * bg + p * kappa * bg),
        }
    }
}

pub fn next_noise(spec: &NoiseSpec, stream: &mut TrialStream) -> f64 {
    match *spec {
        NoiseSpec::Gaussian { variance } => variance.sqrt() * stream.standard_normal(),
        NoiseSpec::BernoulliGaussian {
            spike_probability,
            background_variance,
            spike_variance_scale,
            global_scale,
        } => {
            let spike = stream.uniform() < spike_probability;
            let variance = if spike {
                spike_variance_scale * background_variance
            } else {
                background_variance
            };
            global_scale * variance.sqrt() * stream.standard_normal()
        }
    }
}

pub fn snr_to_noise_variance(snr_db: f64, signal_power: f64) -> f64 {
    debug_assert!(signal_power > 0.0);
    signal_power / 10f64.powf(snr_db / 10.0)
}

/// `w_o^T x + v`.
pub fn desired_output(system: &SparseSystem, regressor: &[f64], noise_sample: f64) -> Result<f64> {
    if regressor.len() != system.taps() {
        return Err(Error::InvalidInput(format!(
            "regressor has {} entries, system has {} taps",
            regressor.len(),
            system.taps()
        )));
    }
    Ok(dot(system.coefficients(), regressor) + noise_sample)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Sliding regressor `[x(n), x(n−1), …, x(n−M+1)]`, zero before the first
/// sample.
#[derive(Debug, Clone)]
pub struct TapDelayLine {
    taps: Vec<f64>,
}

impl TapDelayLine {
    pub fn new(len: usize) -> Self {
        Self {
            taps: vec![0.0; len],
        }
    }

    pub fn push(&mut self, sample: f64) {
        let len = self.taps.len();
        if len == 0 {
            return;
        }
        self.taps.copy_within(0..len - 1, 1);
        self.taps[0] = sample;
    }

    pub fn regressor(&self) -> &[f64] {
        &self.taps
    }
}

/// Sample variance of the clean output `w_o^T x(n)` over `samples` draws of
/// the input process.
pub fn measure_signal_power(
    system: &SparseSystem,
    input: &InputSpec,
    stream: &mut TrialStream,
    samples: usize,
) -> f64 {
    let mut process = InputProcess::new(*input);
    let mut line = TapDelayLine::new(system.taps());
    // fill the delay line so the pre-run starts from a stationary window
    for _ in 0..system.taps() {
        line.push(process.next_sample(stream));
    }
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..samples {
        line.push(process.next_sample(stream));
        let y = dot(system.coefficients(), line.regressor());
        sum += y;
        sum_sq += y * y;
    }
    let n = samples as f64;
    let mean = sum / n;
    (sum_sq / n - mean * mean) * n / (n - 1.0)
}
