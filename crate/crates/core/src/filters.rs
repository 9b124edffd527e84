//! LMS, RZA-LMS and DD-SAF as single-step state machines.
//!
//! All three share one update kernel,
//!
//! ```text
//! e(n)   = d(n) − w(n)ᵀx(n)
//! w(n+1) = w(n) + μ e(n) x(n) − ρ(n) s(n) ⊙ sgn(w(n))
//! ```
//!
//! and differ only in the penalty weight `s(n)` and the attraction schedule
//! `ρ(n)`. DD-SAF additionally keeps the error memory
//! `q(n+1) = γ_q q(n) + e(n) x(n)` and weights taps by
//! `1 / (1 + β_w|w_i| + β_q|q_i|)`; zero attraction is switched off for the
//! first `N_warm` iterations.
//!
//! Because the kernel is shared, the reductions DD-SAF(β_q = 0, N_warm = 0) →
//! RZA-LMS and ρ₀ = 0 → LMS hold bit for bit, not just approximately.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal_model::dot;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "LMS", alias = "lms")]
    Lms,
    #[serde(rename = "RZA-LMS", alias = "rza", alias = "RZA")]
    Rza,
    #[serde(rename = "DD-SAF", alias = "ddsaf", alias = "dd")]
    DdSaf,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Lms, Algorithm::Rza, Algorithm::DdSaf];

    pub fn label(self) -> &'static str {
        match self {
            Algorithm::Lms => "LMS",
            Algorithm::Rza => "RZA-LMS",
            Algorithm::DdSaf => "DD-SAF",
        }
    }

    /// Multiplications per iteration in units of `M`.
    pub fn mults_per_tap(self) -> u64 {
        match self {
            Algorithm::Lms => 2,
            Algorithm::Rza => 4,
            Algorithm::DdSaf => 6,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lms" => Ok(Algorithm::Lms),
            "rza" | "rza-lms" | "rzalms" => Ok(Algorithm::Rza),
            "dd" | "ddsaf" | "dd-saf" => Ok(Algorithm::DdSaf),
            _ => Err(Error::InvalidInput(format!("unknown algorithm '{s}'"))),
        }
    }
}

/// Parameters of one update rule. LMS reads only `mu`; RZA-LMS reads `mu`,
/// `rho0` and `epsilon`; DD-SAF reads everything except `epsilon`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlgorithmConfig {
    pub algorithm: Algorithm,
    pub mu: f64,
    pub rho0: f64,
    pub epsilon: f64,
    pub beta_w: f64,
    pub beta_q: f64,
    pub gamma_q: f64,
    pub n_warm: u64,
}

impl AlgorithmConfig {
    pub fn lms(mu: f64) -> Self {
        Self {
            algorithm: Algorithm::Lms,
            mu,
            rho0: 0.0,
            epsilon: 0.0,
            beta_w: 0.0,
            beta_q: 0.0,
            gamma_q: 0.5,
            n_warm: 0,
        }
    }

    pub fn rza(mu: f64, rho0: f64, epsilon: f64) -> Self {
        Self {
            algorithm: Algorithm::Rza,
            rho0,
            epsilon,
            ..Self::lms(mu)
        }
    }

    pub fn ddsaf(mu: f64, rho0: f64, beta_w: f64, beta_q: f64, gamma_q: f64, n_warm: u64) -> Self {
        Self {
            algorithm: Algorithm::DdSaf,
            mu,
            rho0,
            epsilon: beta_w,
            beta_w,
            beta_q,
            gamma_q,
            n_warm,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfig(format!("{}: {what}", self.algorithm)));
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return bad("step size must be positive");
        }
        if self.algorithm == Algorithm::Lms {
            return Ok(());
        }
        if !(self.rho0 >= 0.0 && self.rho0.is_finite()) {
            return bad("zero attraction must be non-negative");
        }
        match self.algorithm {
            Algorithm::Rza if !(self.epsilon >= 0.0) => bad("epsilon must be non-negative"),
            Algorithm::DdSaf if !(self.beta_w >= 0.0 && self.beta_q >= 0.0) => {
                bad("shape parameters must be non-negative")
            }
            Algorithm::DdSaf if !(self.gamma_q > 0.0 && self.gamma_q < 1.0) => {
                bad("forgetting factor must lie in (0, 1)")
            }
            _ => Ok(()),
        }
    }
}

/// RZA-LMS weight `1 / (1 + ε|w_i|)`.
pub fn rza_weight(w: f64, epsilon: f64) -> f64 {
    1.0 / (1.0 + epsilon * w.abs())
}

/// Dual-domain weight `1 / (1 + β_w|w_i| + β_q|q_i|)`.
pub fn dd_weight(w: f64, q: f64, beta_w: f64, beta_q: f64) -> f64 {
    1.0 / (1.0 + beta_w * w.abs() + beta_q * q.abs())
}

/// Attraction schedule: off while `n ≤ n_warm`.
pub fn warm_start_rho(n: u64, rho0: f64, n_warm: u64) -> f64 {
    if n <= n_warm {
        0.0
    } else {
        rho0
    }
}

/// Strict sign with `sgn(0) = 0`.
pub fn sgn(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

pub fn sgn_vec(v: &[f64]) -> Vec<f64> {
    v.iter().copied().map(sgn).collect()
}

/// `γ q + e x`, element-wise.
pub fn error_memory_update(
    q: &[f64],
    e_prev: f64,
    x_prev: &[f64],
    gamma_q: f64,
) -> Result<Vec<f64>> {
    if q.len() != x_prev.len() {
        return Err(Error::InvalidInput(format!(
            "error memory has {} entries, regressor {}",
            q.len(),
            x_prev.len()
        )));
    }
    Ok(q.iter()
        .zip(x_prev)
        .map(|(qi, xi)| gamma_q * qi + e_prev * xi)
        .collect())
}

/// Coefficient estimate, error memory, iteration counter and multiplication tally.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    w: Vec<f64>,
    q: Vec<f64>,
    n: u64,
    mult_count: u64,
}

impl FilterState {
    pub fn new(taps: usize) -> Self {
        Self {
            w: vec![0.0; taps],
            q: vec![0.0; taps],
            n: 0,
            mult_count: 0,
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn error_memory(&self) -> &[f64] {
        &self.q
    }

    pub fn iteration(&self) -> u64 {
        self.n
    }

    pub fn mult_count(&self) -> u64 {
        self.mult_count
    }

    pub fn taps(&self) -> usize {
        self.w.len()
    }

    /// Penalty weight `s_i(n)` the next call to [`step`](Self::step) will
    /// apply to tap `i`. LMS reports 1.
    pub fn penalty_weight(&self, config: &AlgorithmConfig, i: usize) -> f64 {
        match config.algorithm {
            Algorithm::Lms => 1.0,
            Algorithm::Rza => rza_weight(self.w[i], config.epsilon),
            Algorithm::DdSaf => dd_weight(self.w[i], self.q[i], config.beta_w, config.beta_q),
        }
    }

    /// Advances one iteration and returns the a-priori error `e(n)`.
    pub fn step(&mut self, config: &AlgorithmConfig, x: &[f64], d: f64) -> Result<f64> {
        self.step_with_sign(config, x, d, sgn)
    }

    /// [`step`](Self::step) with a replaceable sign function. Only meant for
    /// mutation checks of the validation suite.
    #[doc(hidden)]
    pub fn step_with_sign(
        &mut self,
        config: &AlgorithmConfig,
        x: &[f64],
        d: f64,
        sign: fn(f64) -> f64,
    ) -> Result<f64> {
        let m = self.w.len();
        if x.len() != m {
            return Err(Error::InvalidInput(format!(
                "regressor has {} entries, filter has {m} taps",
                x.len()
            )));
        }
        let e = d - dot(&self.w, x);
        let mu_e = config.mu * e;
        match config.algorithm {
            Algorithm::Lms => {
                for (wi, xi) in self.w.iter_mut().zip(x) {
                    *wi += mu_e * xi;
                }
            }
            Algorithm::Rza => {
                let rho = config.rho0;
                for (wi, xi) in self.w.iter_mut().zip(x) {
                    let s = rza_weight(*wi, config.epsilon);
                    let penalty = rho * s * sign(*wi);
                    *wi = *wi + mu_e * xi - penalty;
                }
            }
            Algorithm::DdSaf => {
                let rho = warm_start_rho(self.n, config.rho0, config.n_warm);
                for ((wi, qi), xi) in self.w.iter_mut().zip(self.q.iter_mut()).zip(x) {
                    // weight from w(n), q(n) before either is advanced
                    let s = dd_weight(*wi, *qi, config.beta_w, config.beta_q);
                    let penalty = rho * s * sign(*wi);
                    *wi = *wi + mu_e * xi - penalty;
                    *qi = config.gamma_q * *qi + e * xi;
                }
            }
        }
        self.mult_count += config.algorithm.mults_per_tap() * m as u64;
        self.n += 1;
        Ok(e)
    }
}

/// Per-iteration `(n, e, w, q)` rows for trace-level fixtures.
#[derive(Debug, Clone, Default)]
pub struct FilterTrace {
    rows: Vec<(u64, f64, Vec<f64>, Vec<f64>)>,
}

impl FilterTrace {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records the state after a step together with the error that step produced.
    pub fn record(&mut self, state: &FilterState, e: f64) {
        self.rows
            .push((state.iteration(), e, state.w.clone(), state.q.clone()));
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Comma-delimited dump: `n,e,w0..w{M-1},q0..q{M-1}`.
    pub fn write_delimited<W: Write>(&self, mut out: W) -> io::Result<()> {
        let m = self.rows.first().map_or(0, |r| r.2.len());
        let mut header = vec!["n".to_string(), "e".to_string()];
        header.extend((0..m).map(|i| format!("w{i}")));
        header.extend((0..m).map(|i| format!("q{i}")));
        writeln!(out, "{}", header.join(","))?;
        for (n, e, w, q) in &self.rows {
            write!(out, "{n},{e}")?;
            for v in w.iter().chain(q) {
                write!(out, ",{v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rza_weight_examples() {
        assert_eq!(rza_weight(0.0, 0.02), 1.0);
        assert!((rza_weight(50.0, 0.02) - 0.5).abs() < 1e-15);
        assert!((rza_weight(-50.0, 0.02) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn dd_weight_examples() {
        assert_eq!(dd_weight(0.0, 0.0, 3.0, 7.0), 1.0);
        assert!((dd_weight(0.5, 0.1, 0.02, 2.0) - 1.0 / 1.21).abs() < 1e-15);
        assert!((dd_weight(0.5, 0.1, 0.02, 2.0) - 0.82645).abs() < 1e-5);
        for w in [-3.0, -0.1, 0.0, 0.4, 12.0] {
            assert_eq!(dd_weight(w, 5.0, 0.02, 0.0), rza_weight(w, 0.02));
        }
    }

    #[test]
    fn warm_start_schedule() {
        assert_eq!(warm_start_rho(200, 0.0028, 200), 0.0);
        assert_eq!(warm_start_rho(201, 0.0028, 200), 0.0028);
        assert_eq!(warm_start_rho(5000, 0.0, 10), 0.0);
    }

    #[test]
    fn sign_convention() {
        assert_eq!(sgn(0.0), 0.0);
        assert_eq!(sgn(-0.0), 0.0);
        assert_eq!(sgn(-3.2), -1.0);
        assert_eq!(sgn(1e-300), 1.0);
        assert_eq!(sgn_vec(&[-1.0, 0.0, 2.0]), vec![-1.0, 0.0, 1.0]);
    }

    #[test]
    fn error_memory_examples() {
        assert_eq!(
            error_memory_update(&[0.0, 0.0], 1.5, &[2.0, -1.0], 0.9).unwrap(),
            vec![3.0, -1.5]
        );
        let q = error_memory_update(&[1.0, 0.0], 2.0, &[0.5, 1.0], 0.97).unwrap();
        assert!((q[0] - 1.97).abs() < 1e-15 && (q[1] - 2.0).abs() < 1e-15);
        let q = error_memory_update(&[1.0, -4.0], 0.0, &[9.0, 9.0], 0.97).unwrap();
        assert_eq!(q, vec![0.97, -4.0 * 0.97]);
        assert!(error_memory_update(&[0.0], 1.0, &[1.0, 2.0], 0.5).is_err());
    }

    #[test]
    fn first_lms_step() {
        let mut st = FilterState::new(3);
        let x = [0.5, -2.0, 1.0];
        let e = st.step(&AlgorithmConfig::lms(0.1), &x, 0.3).unwrap();
        assert_eq!(e, 0.3);
        for (w, xi) in st.weights().iter().zip(x) {
            assert_eq!(*w, 0.1 * 0.3 * xi);
        }
        assert!(st.error_memory().iter().all(|q| *q == 0.0));
    }

    #[test]
    fn step_rejects_wrong_length() {
        let mut st = FilterState::new(4);
        assert!(matches!(
            st.step(&AlgorithmConfig::lms(0.1), &[1.0; 3], 0.0),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn mult_counts_per_algorithm() {
        for m in [8usize, 128] {
            for (cfg, per) in [
                (AlgorithmConfig::lms(0.01), 2),
                (AlgorithmConfig::rza(0.01, 1e-4, 0.02), 4),
                (AlgorithmConfig::ddsaf(0.01, 1e-4, 0.02, 2.0, 0.97, 3), 6),
            ] {
                let mut st = FilterState::new(m);
                let x = vec![0.1; m];
                for _ in 0..7 {
                    st.step(&cfg, &x, 1.0).unwrap();
                }
                assert_eq!(st.mult_count(), 7 * per * m as u64);
            }
        }
    }

    #[test]
    fn config_validation() {
        assert!(AlgorithmConfig::lms(0.0).validate().is_err());
        assert!(AlgorithmConfig::rza(0.01, -1.0, 0.02).validate().is_err());
        assert!(AlgorithmConfig::ddsaf(0.01, 1e-3, 0.02, 2.0, 1.0, 0)
            .validate()
            .is_err());
        assert!(AlgorithmConfig::ddsaf(0.01, 1e-3, 0.02, 2.0, 0.97, 200)
            .validate()
            .is_ok());
        // LMS ignores the sparsity fields
        let mut lms = AlgorithmConfig::lms(0.01);
        lms.gamma_q = 7.0;
        assert!(lms.validate().is_ok());
    }

    #[test]
    fn parse_algorithm_names() {
        assert_eq!("DD-SAF".parse::<Algorithm>().unwrap(), Algorithm::DdSaf);
        assert_eq!("rza".parse::<Algorithm>().unwrap(), Algorithm::Rza);
        assert_eq!("LMS".parse::<Algorithm>().unwrap(), Algorithm::Lms);
        assert!("nlms".parse::<Algorithm>().is_err());
    }

    #[test]
    fn trace_dump_layout() {
        let mut st = FilterState::new(2);
        let cfg = AlgorithmConfig::ddsaf(0.5, 0.0, 0.0, 0.0, 0.5, 0);
        let mut trace = FilterTrace::new();
        let e = st.step(&cfg, &[1.0, 0.0], 2.0).unwrap();
        trace.record(&st, e);
        let mut buf = Vec::new();
        trace.write_delimited(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "n,e,w0,w1,q0,q1\n1,2,1,0,2,0\n");
    }

    /// Zero attraction moves a tap by at most ρ s toward zero and leaves zero taps alone.
    #[test]
    fn attraction_direction() {
        let cfg = AlgorithmConfig::rza(1e-9, 0.01, 0.02);
        let mut st = FilterState::new(3);
        st.w = vec![0.5, -0.5, 0.0];
        let before = st.w.clone();
        // x = 0 isolates the attraction term
        st.step(&cfg, &[0.0; 3], 0.0).unwrap();
        for (b, a) in before.iter().zip(st.weights()) {
            let s = rza_weight(*b, 0.02);
            if *b == 0.0 {
                assert_eq!(*a, 0.0);
            } else {
                assert!(a.abs() < b.abs());
                assert!((b.abs() - a.abs() - 0.01 * s).abs() < 1e-15);
            }
        }
    }

    proptest! {
        #[test]
        fn dd_weight_never_exceeds_rza_weight(
            w in -50.0f64..50.0,
            q in -50.0f64..50.0,
            eps in 0.0f64..5.0,
            beta_q in 0.0f64..10.0,
        ) {
            let dd = dd_weight(w, q, eps, beta_q);
            prop_assert!(dd > 0.0 && dd <= 1.0);
            prop_assert!(dd <= rza_weight(w, eps));
        }

        #[test]
        fn weights_stay_in_unit_interval_along_trajectories(seed in 0u64..500) {
            use crate::signal_model::{TrialStream, TapDelayLine};
            let mut stream = TrialStream::new(seed, 0);
            let cfg = AlgorithmConfig::ddsaf(0.05, 1e-3, 0.02, 2.0, 0.97, 5);
            let mut st = FilterState::new(8);
            let mut line = TapDelayLine::new(8);
            for _ in 0..60 {
                line.push(stream.standard_normal());
                let d = line.regressor()[2] * 0.7 + 0.01 * stream.standard_normal();
                for i in 0..8 {
                    let s = st.penalty_weight(&cfg, i);
                    prop_assert!(s > 0.0 && s <= 1.0);
                }
                st.step(&cfg, line.regressor(), d).unwrap();
            }
        }
    }
}
