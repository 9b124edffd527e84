//! Closed-form mean and mean-square predictions for zero-attracting LMS
//! filters under white input.
//!
//! The steady-state penalty weights `s̄_i` of the active taps have no closed
//! form; callers supply them, typically from [`estimate_sbar_from_tail`] over a
//! pilot run or from [`analytic_sbar`].

use crate::error::{Error, Result};
use crate::signal_model::SparseSystem;

/// Squared-deviation values below this are clamped before taking logs.
pub const DB_FLOOR: f64 = 1e-300;

/// `10 log10(x)` with the floor applied.
pub fn db(x: f64) -> f64 {
    10.0 * x.max(DB_FLOOR).log10()
}

pub fn from_db(x_db: f64) -> f64 {
    10f64.powf(x_db / 10.0)
}

/// Everything the steady-state formulas need.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoryInputs {
    pub taps: usize,
    pub sigma_x2: f64,
    pub sigma_v2: f64,
    pub mu: f64,
    pub rho0: f64,
    /// One steady-state expected penalty weight per active tap.
    pub sbar_active: Vec<f64>,
}

impl TheoryInputs {
    pub fn sparsity(&self) -> usize {
        self.sbar_active.len()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_x2 > 0.0 && self.sigma_v2 > 0.0) {
            return Err(Error::InvalidConfig("variances must be positive".into()));
        }
        if self.taps == 0 || self.sparsity() > self.taps {
            return Err(Error::InvalidConfig(format!(
                "{} active taps in a {}-tap filter",
                self.sparsity(),
                self.taps
            )));
        }
        if self.sbar_active.iter().any(|s| !(*s >= 0.0 && *s <= 1.0)) {
            return Err(Error::InvalidConfig(
                "penalty weights must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }

    fn sbar_sq_sum(&self) -> f64 {
        self.sbar_active.iter().map(|s| s * s).sum()
    }

    /// `2 − μσ_x²(1+M)`; the mean-square recursion converges iff this is positive.
    fn ms_margin(&self) -> f64 {
        2.0 - self.mu * self.sigma_x2 * (1.0 + self.taps as f64)
    }
}

/// Largest step size for convergence in the mean, `2/σ_x²`.
pub fn mean_stability_bound(sigma_x2: f64) -> f64 {
    2.0 / sigma_x2
}

/// Mean-square step-size bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MsBound {
    /// `2 / ((M+1)σ_x²)`, used for stability decisions.
    pub exact: f64,
    /// `2 / (Mσ_x²)`.
    pub large_m: f64,
}

pub fn ms_stability_bound(taps: usize, sigma_x2: f64) -> MsBound {
    let m = taps as f64;
    MsBound {
        exact: 2.0 / ((m + 1.0) * sigma_x2),
        large_m: 2.0 / (m * sigma_x2),
    }
}

/// Steady-state mean penalty `π_i = s̄_i sgn(w_o,i)` on active taps, 0 elsewhere.
pub fn steady_state_penalty(system: &SparseSystem, sbar_active: &[f64]) -> Result<Vec<f64>> {
    check_sbar_len(system, sbar_active)?;
    let mut pi = vec![0.0; system.taps()];
    for (&i, s) in system.active_set().iter().zip(sbar_active) {
        pi[i] = s * crate::filters::sgn(system.coefficients()[i]);
    }
    Ok(pi)
}

fn check_sbar_len(system: &SparseSystem, sbar_active: &[f64]) -> Result<()> {
    if sbar_active.len() != system.sparsity() {
        return Err(Error::InvalidInput(format!(
            "{} penalty weights for {} active taps",
            sbar_active.len(),
            system.sparsity()
        )));
    }
    Ok(())
}

/// Expected weight error `E{w̃(n)} = λⁿ w_o + ρ₀ Σ_{k=N_warm}^{n−1} λ^{n−1−k} π(k)`
/// with `λ = 1 − μσ_x²`. `penalty(k)` supplies `π(k)`.
pub fn mean_error_solution<F>(
    w_o: &[f64],
    mu: f64,
    sigma_x2: f64,
    rho0: f64,
    n_warm: u64,
    mut penalty: F,
    n: u64,
) -> Result<Vec<f64>>
where
    F: FnMut(u64) -> Vec<f64>,
{
    let lambda = 1.0 - mu * sigma_x2;
    if lambda.abs() >= 1.0 {
        return Err(Error::InvalidConfig(format!(
            "|1 − μσ_x²| = {} is not below 1",
            lambda.abs()
        )));
    }
    // iterate the mean recursion; same terms as the closed-form sum
    let mut err = w_o.to_vec();
    for k in 0..n {
        err.iter_mut().for_each(|e| *e *= lambda);
        if k >= n_warm && rho0 != 0.0 {
            let pi = penalty(k);
            for (e, p) in err.iter_mut().zip(&pi) {
                *e += rho0 * p;
            }
        }
    }
    Ok(err)
}

/// Norm bound on the asymptotic bias, `ρ₀K/(μσ_x²)`.
pub fn bias_bound(rho0: f64, sparsity: usize, mu: f64, sigma_x2: f64) -> f64 {
    rho0 * sparsity as f64 / (mu * sigma_x2)
}

/// Asymptotic per-tap bias `ρ₀ s̄_i sgn(w_o,i)/(μσ_x²)` on active taps.
pub fn per_tap_bias(
    system: &SparseSystem,
    sbar_active: &[f64],
    rho0: f64,
    mu: f64,
    sigma_x2: f64,
) -> Result<Vec<f64>> {
    let pi = steady_state_penalty(system, sbar_active)?;
    let scale = rho0 / (mu * sigma_x2);
    Ok(pi.into_iter().map(|p| scale * p).collect())
}

/// Iterates the scalar MSD recursion
///
/// ```text
/// MSD(n+1) = α MSD(n) + μ²Mσ_v²σ_x² + 2ρ₀(1 − μσ_x²) b(n)
/// α = 1 − 2μσ_x² + μ²σ_x⁴(1+M)
/// ```
///
/// with the cross term `b(n)` frozen at its steady-state value
/// `(ρ₀/μσ_x²) Σ s̄_i²` once `n > n_warm` and zero before. Returns `n_iters`
/// values starting at `msd0`.
pub fn msd_learning_curve(
    inputs: &TheoryInputs,
    msd0: f64,
    n_iters: usize,
    n_warm: u64,
) -> Result<Vec<f64>> {
    inputs.validate()?;
    let (mu, sx2) = (inputs.mu, inputs.sigma_x2);
    let m = inputs.taps as f64;
    let alpha = 1.0 - 2.0 * mu * sx2 + mu * mu * sx2 * sx2 * (1.0 + m);
    if alpha >= 1.0 {
        return Err(Error::Unstable(format!(
            "MSD contraction factor {alpha} ≥ 1 (μ = {mu} exceeds {})",
            ms_stability_bound(inputs.taps, sx2).exact
        )));
    }
    let drive = mu * mu * m * inputs.sigma_v2 * sx2;
    let cross =
        2.0 * inputs.rho0 * (1.0 - mu * sx2) * (inputs.rho0 / (mu * sx2)) * inputs.sbar_sq_sum();
    let mut curve = Vec::with_capacity(n_iters);
    let mut msd = msd0;
    for n in 0..n_iters {
        curve.push(msd);
        let b = if (n as u64) > n_warm { cross } else { 0.0 };
        msd = alpha * msd + drive + b;
    }
    Ok(curve)
}

/// Steady-state MSD. `approximate` selects the small-step form
/// `μMσ_v²/2 + (ρ₀²/μ²σ_x⁴) Σ s̄_i²`; otherwise the exact fixed point of
/// [`msd_learning_curve`] is returned. The same formula serves RZA-LMS and
/// DD-SAF; only the supplied `s̄` differs.
pub fn steady_state_msd(inputs: &TheoryInputs, approximate: bool) -> Result<f64> {
    inputs.validate()?;
    let margin = inputs.ms_margin();
    if margin <= 0.0 {
        return Err(Error::Unstable(format!(
            "2 − μσ_x²(1+M) = {margin} is not positive"
        )));
    }
    let (mu, sx2, rho0) = (inputs.mu, inputs.sigma_x2, inputs.rho0);
    let m = inputs.taps as f64;
    let s2 = inputs.sbar_sq_sum();
    if approximate {
        Ok(mu * m * inputs.sigma_v2 / 2.0 + rho0 * rho0 / (mu * mu * sx2 * sx2) * s2)
    } else {
        Ok(mu * m * inputs.sigma_v2 / margin
            + 2.0 * rho0 * rho0 * (1.0 - mu * sx2) / (mu * mu * sx2 * sx2 * margin) * s2)
    }
}

/// LMS noise floor `μMσ_v²/2`.
pub fn noise_floor(taps: usize, mu: f64, sigma_v2: f64) -> f64 {
    mu * taps as f64 * sigma_v2 / 2.0
}

/// Small-step excess over the noise floor, `(ρ₀²/μ²σ_x⁴) Σ s̄_i²`.
pub fn attraction_excess(inputs: &TheoryInputs) -> f64 {
    let (mu, sx2) = (inputs.mu, inputs.sigma_x2);
    inputs.rho0 * inputs.rho0 / (mu * mu * sx2 * sx2) * inputs.sbar_sq_sum()
}

/// Improvement of DD-SAF over RZA-LMS, `(ρ₀²/μ²σ_x⁴) Σ (s̄_RZA² − s̄_DD²)`.
pub fn delta_msd(rza: &TheoryInputs, dd: &TheoryInputs) -> Result<f64> {
    let shared = rza.taps == dd.taps
        && rza.mu == dd.mu
        && rza.rho0 == dd.rho0
        && rza.sigma_x2 == dd.sigma_x2
        && rza.sigma_v2 == dd.sigma_v2
        && rza.sparsity() == dd.sparsity();
    if !shared {
        return Err(Error::InvalidComparison(
            "both filters must share μ, ρ₀, σ_x², σ_v², M and the active set".into(),
        ));
    }
    let scale = rza.rho0 * rza.rho0 / (rza.mu * rza.mu * rza.sigma_x2 * rza.sigma_x2);
    Ok(scale * (rza.sbar_sq_sum() - dd.sbar_sq_sum()))
}

/// Per-tap mean of the last `tail_window` rows of a weight trace (one row per
/// iteration, one column per active tap).
pub fn estimate_sbar_from_tail(weight_trace: &[Vec<f64>], tail_window: usize) -> Result<Vec<f64>> {
    if tail_window == 0 || tail_window > weight_trace.len() {
        return Err(Error::InvalidInput(format!(
            "tail window {tail_window} for a trace of {} rows",
            weight_trace.len()
        )));
    }
    let tail = &weight_trace[weight_trace.len() - tail_window..];
    let k = tail[0].len();
    let mut mean = vec![0.0; k];
    for row in tail {
        for (m, s) in mean.iter_mut().zip(row) {
            *m += s;
        }
    }
    mean.iter_mut().for_each(|m| *m /= tail_window as f64);
    Ok(mean)
}

/// Penalty weights evaluated at the true coefficients with an empty error
/// memory: `1/(1 + β_w|w_o,i|)`.
pub fn analytic_sbar(system: &SparseSystem, beta_w: f64) -> Vec<f64> {
    system
        .active_set()
        .iter()
        .map(|&i| crate::filters::rza_weight(system.coefficients()[i], beta_w))
        .collect()
}

/// Bundle of predictions for one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoryPrediction {
    pub mean_stable_max_mu: f64,
    pub ms_stable_max_mu: f64,
    pub msd_ss: f64,
    pub msd_ss_db: f64,
    pub bias_bound: f64,
    pub per_tap_bias: Vec<f64>,
    /// Improvement over `reference`, 0 when no reference is given.
    pub delta_msd: f64,
}

impl TheoryPrediction {
    pub fn evaluate(
        inputs: &TheoryInputs,
        system: &SparseSystem,
        reference: Option<&TheoryInputs>,
        approximate: bool,
    ) -> Result<Self> {
        let msd_ss = steady_state_msd(inputs, approximate)?;
        let delta = match reference {
            Some(r) => delta_msd(r, inputs)?,
            None => 0.0,
        };
        Ok(Self {
            mean_stable_max_mu: mean_stability_bound(inputs.sigma_x2),
            ms_stable_max_mu: ms_stability_bound(inputs.taps, inputs.sigma_x2).exact,
            msd_ss,
            msd_ss_db: db(msd_ss),
            bias_bound: bias_bound(inputs.rho0, inputs.sparsity(), inputs.mu, inputs.sigma_x2),
            per_tap_bias: per_tap_bias(
                system,
                &inputs.sbar_active,
                inputs.rho0,
                inputs.mu,
                inputs.sigma_x2,
            )?,
            delta_msd: delta,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn inputs(mu: f64, rho0: f64, sbar: Vec<f64>) -> TheoryInputs {
        TheoryInputs {
            taps: 128,
            sigma_x2: 1.0,
            sigma_v2: 10f64.powf(-3.5),
            mu,
            rho0,
            sbar_active: sbar,
        }
    }

    fn toy_system() -> SparseSystem {
        let mut c = vec![0.0; 16];
        c[3] = 0.6;
        c[9] = -0.8;
        SparseSystem::from_coefficients(c)
    }

    #[test]
    fn stability_bounds() {
        assert_eq!(mean_stability_bound(1.0), 2.0);
        assert_eq!(mean_stability_bound(2.0), 1.0);
        assert!((mean_stability_bound(3.0) * 3.0 - 2.0).abs() < 1e-15);
        let b = ms_stability_bound(128, 1.0);
        assert_eq!(b.large_m, 0.015625);
        assert!((b.exact - 2.0 / 129.0).abs() < 1e-15);
        assert_eq!(ms_stability_bound(1, 1.0).exact, 1.0);
        assert!(0.01 < b.large_m && 0.01 < b.exact);
        for m in 1..300 {
            let b = ms_stability_bound(m, 0.7);
            assert!(b.exact <= mean_stability_bound(0.7));
        }
    }

    #[test]
    fn mean_solution_cases() {
        let w_o = [0.6, 0.0, -0.8];
        let pi = |_k: u64| vec![0.9, 0.0, -0.9];
        assert_eq!(
            mean_error_solution(&w_o, 0.01, 1.0, 0.002, 0, pi, 0).unwrap(),
            w_o.to_vec()
        );

        let lambda: f64 = 1.0 - 0.05;
        let got = mean_error_solution(&w_o, 0.05, 1.0, 0.0, 0, pi, 40).unwrap();
        for (g, w) in got.iter().zip(w_o) {
            assert!((g - lambda.powi(40) * w).abs() < 1e-15);
        }

        // closed-form sum, evaluated term by term
        let (mu, rho0, n_warm, n) = (0.05, 0.002, 5u64, 60u64);
        let got = mean_error_solution(&w_o, mu, 1.0, rho0, n_warm, pi, n).unwrap();
        for i in 0..3 {
            let mut expect = lambda.powi(n as i32) * w_o[i];
            for k in n_warm..n {
                expect += rho0 * lambda.powi((n - 1 - k) as i32) * pi(k)[i];
            }
            assert!((got[i] - expect).abs() < 1e-14, "tap {i}");
        }

        // long-run limit respects the bias bound with ‖π‖ ≤ K
        let limit = mean_error_solution(&w_o, mu, 1.0, rho0, 0, pi, 5000).unwrap();
        let norm = limit.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(norm <= bias_bound(rho0, 2, mu, 1.0));

        assert!(mean_error_solution(&w_o, 2.5, 1.0, 0.0, 0, pi, 3).is_err());
    }

    #[test]
    fn per_tap_bias_cases() {
        let sys = toy_system();
        let zero = per_tap_bias(&sys, &[0.9, 0.9], 0.0, 0.01, 1.0).unwrap();
        assert!(zero.iter().all(|b| *b == 0.0));
        let b = per_tap_bias(&sys, &[0.9, 0.9], 0.0028, 0.01, 1.0).unwrap();
        assert!((b[3] - 0.252).abs() < 1e-12);
        assert!((b[9] + 0.252).abs() < 1e-12);
        assert_eq!(b[0], 0.0);
        assert!(per_tap_bias(&sys, &[0.9], 0.0028, 0.01, 1.0).is_err());
    }

    #[test]
    fn lms_recursion_reaches_fixed_point() {
        let inp = inputs(0.005, 0.0, vec![1.0; 8]);
        let curve = msd_learning_curve(&inp, 1.0, 20_000, 0).unwrap();
        assert_eq!(curve[0], 1.0);
        let m = 128.0;
        let fixed = 0.005 * m * inp.sigma_v2 / (2.0 - 0.005 * (1.0 + m));
        assert!((steady_state_msd(&inp, false).unwrap() - fixed).abs() < 1e-18);
        let last = *curve.last().unwrap();
        assert!((last - fixed).abs() < 1e-12 * fixed, "{last} vs {fixed}");
        assert!(curve[..2000].windows(2).all(|w| w[1] < w[0]));
        assert!(curve.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn recursion_with_attraction_matches_exact_steady_state() {
        let inp = inputs(0.004, 2e-4, vec![0.8; 8]);
        let curve = msd_learning_curve(&inp, 1.0, 30_000, 200).unwrap();
        let exact = steady_state_msd(&inp, false).unwrap();
        assert!((curve.last().unwrap() / exact - 1.0).abs() < 1e-10);
    }

    #[test]
    fn divergent_recursion_rejected() {
        let inp = inputs(0.02, 0.0, vec![]);
        assert!(matches!(
            msd_learning_curve(&inp, 1.0, 10, 0),
            Err(Error::Unstable(_))
        ));
        assert!(matches!(
            steady_state_msd(&inp, true),
            Err(Error::Unstable(_))
        ));
    }

    #[test]
    fn noise_floor_at_experiment_one_step() {
        let inp = inputs(0.01, 0.0, vec![0.9; 8]);
        let floor = steady_state_msd(&inp, true).unwrap();
        assert!((floor - 2.0239e-4).abs() < 1e-8);
        assert!((db(floor) + 36.94).abs() < 0.01);
        assert_eq!(floor, noise_floor(128, 0.01, inp.sigma_v2));
        let relaxed = inputs(0.01, 0.003, vec![0.0; 8]);
        assert_eq!(steady_state_msd(&relaxed, true).unwrap(), floor);
    }

    #[test]
    fn attraction_excess_is_gap_over_noise_floor() {
        let inp = inputs(0.008, 0.0028, vec![0.7, 0.9, 0.4]);
        let gap = steady_state_msd(&inp, true).unwrap() - noise_floor(128, 0.008, inp.sigma_v2);
        assert!((attraction_excess(&inp) - gap).abs() < 1e-15);
        assert_eq!(attraction_excess(&inputs(0.01, 0.0, vec![1.0; 4])), 0.0);
        let rza = inputs(0.01, 0.0028, vec![0.9; 8]);
        let dd = inputs(0.01, 0.0028, vec![0.6; 8]);
        let d = delta_msd(&rza, &dd).unwrap();
        assert!((attraction_excess(&rza) - attraction_excess(&dd) - d).abs() <= 1e-15 * d);
    }

    #[test]
    fn delta_msd_cases() {
        let rza = inputs(0.01, 0.0028, vec![0.9; 8]);
        let dd = inputs(0.01, 0.0028, vec![0.8; 8]);
        let d = delta_msd(&rza, &dd).unwrap();
        let expect = (0.0028f64 / 0.01).powi(2) * 8.0 * (0.81 - 0.64);
        assert!((d - expect).abs() < 1e-15);
        assert!((d - 0.1066).abs() < 1e-4);
        assert_eq!(delta_msd(&rza, &rza).unwrap(), 0.0);
        let no_za = inputs(0.01, 0.0, vec![0.9; 8]);
        assert_eq!(
            delta_msd(&no_za, &inputs(0.01, 0.0, vec![0.1; 8])).unwrap(),
            0.0
        );
        assert!(matches!(
            delta_msd(&rza, &inputs(0.008, 0.0028, vec![0.8; 8])),
            Err(Error::InvalidComparison(_))
        ));
    }

    #[test]
    fn sbar_from_tail() {
        let trace: Vec<Vec<f64>> = (0..50).map(|_| vec![0.7, 0.3]).collect();
        let s = estimate_sbar_from_tail(&trace, 10).unwrap();
        assert!((s[0] - 0.7).abs() < 1e-15 && (s[1] - 0.3).abs() < 1e-15);
        let ramp: Vec<Vec<f64>> = (0..10).map(|n| vec![n as f64]).collect();
        assert_eq!(estimate_sbar_from_tail(&ramp, 4).unwrap(), vec![7.5]);
        assert!(estimate_sbar_from_tail(&trace, 51).is_err());
        assert!(estimate_sbar_from_tail(&trace, 0).is_err());
    }

    #[test]
    fn analytic_weights() {
        let sys = toy_system();
        let s = analytic_sbar(&sys, 0.02);
        assert!((s[0] - 1.0 / 1.012).abs() < 1e-15);
        assert!((s[1] - 1.0 / 1.016).abs() < 1e-15);
    }

    #[test]
    fn prediction_bundle() {
        let mut c = vec![0.0; 128];
        for i in [20, 21, 22, 23, 70, 71, 72, 73] {
            c[i] = if i % 2 == 0 { 0.35 } else { -0.35 };
        }
        let sys = SparseSystem::from_coefficients(c);
        let rza = inputs(0.0026, 2e-5, vec![0.99; 8]);
        let dd = inputs(0.0026, 2e-5, vec![0.7; 8]);
        let p = TheoryPrediction::evaluate(&dd, &sys, Some(&rza), true).unwrap();
        assert!(p.ms_stable_max_mu <= p.mean_stable_max_mu);
        assert!(p.delta_msd >= 0.0);
        let p_rza = TheoryPrediction::evaluate(&rza, &sys, None, true).unwrap();
        assert!((p_rza.msd_ss - p.msd_ss - p.delta_msd).abs() < 1e-18);
        assert_eq!(p.per_tap_bias.len(), 128);
    }

    #[test]
    fn exact_form_approaches_small_step_form() {
        // μσ_x²(1+M) = 0.0129 < 0.02
        let inp = inputs(1e-4, 2e-7, vec![0.9; 8]);
        let exact = steady_state_msd(&inp, false).unwrap();
        let approx = steady_state_msd(&inp, true).unwrap();
        assert!(((exact - approx) / approx).abs() < 0.01);
    }

    proptest! {
        #[test]
        fn dominance_of_smaller_weights(
            mu in 1e-4f64..0.015,
            rho_frac in 0.0f64..0.5,
            sbar_rza in proptest::collection::vec(0.01f64..1.0, 8),
            shrink in proptest::collection::vec(0.0f64..1.0, 8),
        ) {
            let rho0 = rho_frac * mu;
            let sbar_dd: Vec<f64> = sbar_rza.iter().zip(&shrink).map(|(s, f)| s * f).collect();
            let rza = inputs(mu, rho0, sbar_rza);
            let dd = inputs(mu, rho0, sbar_dd);
            for approx in [true, false] {
                prop_assert!(steady_state_msd(&dd, approx).unwrap() <= steady_state_msd(&rza, approx).unwrap());
            }
            let d = delta_msd(&rza, &dd).unwrap();
            prop_assert!(d >= 0.0);
            let gap = steady_state_msd(&rza, true).unwrap() - steady_state_msd(&dd, true).unwrap();
            prop_assert!((d - gap).abs() <= 1e-12 * steady_state_msd(&rza, true).unwrap());
        }
    }
}
