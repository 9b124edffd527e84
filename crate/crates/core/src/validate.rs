//! Fast invariant suite behind `ddsaf validate`.

use crate::filters::{sgn, AlgorithmConfig, FilterState};
use crate::signal_model::{
    desired_output, generate_sparse_system, next_noise, NoiseSpec, SparseSystem, StreamPurpose,
    TapDelayLine, TrialStream,
};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

struct Fixture {
    system: SparseSystem,
    input: Vec<f64>,
    noise: Vec<f64>,
}

fn fixture(taps: usize, iterations: usize, seed: u64) -> Fixture {
    let mut sys_stream = TrialStream::for_purpose(seed, 0, StreamPurpose::System);
    let blocks = [(taps / 8, 2.min(taps)), (taps / 2, 2.min(taps - taps / 2))];
    let system =
        generate_sparse_system(taps, &blocks, &mut sys_stream, true).expect("fixture blocks fit");
    let mut x = TrialStream::for_purpose(seed, 0, StreamPurpose::Input);
    let mut v = TrialStream::for_purpose(seed, 0, StreamPurpose::Noise);
    let noise_spec = NoiseSpec::Gaussian { variance: 1e-3 };
    Fixture {
        system,
        input: (0..iterations).map(|_| x.standard_normal()).collect(),
        noise: (0..iterations)
            .map(|_| next_noise(&noise_spec, &mut v))
            .collect(),
    }
}

/// Weight trajectory `w(1), …, w(N)` of one filter over a fixture.
fn trajectory(fx: &Fixture, config: &AlgorithmConfig, sign: fn(f64) -> f64) -> Vec<Vec<f64>> {
    let mut state = FilterState::new(fx.system.taps());
    let mut line = TapDelayLine::new(fx.system.taps());
    let mut out = Vec::with_capacity(fx.input.len());
    for (x, v) in fx.input.iter().zip(&fx.noise) {
        line.push(*x);
        let d = desired_output(&fx.system, line.regressor(), *v).expect("lengths match");
        state
            .step_with_sign(config, line.regressor(), d, sign)
            .expect("lengths match");
        out.push(state.weights().to_vec());
    }
    out
}

fn bit_identical(a: &[Vec<f64>], b: &[Vec<f64>]) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|(x, y)| {
            x.len() == y.len() && x.iter().zip(y).all(|(p, q)| p.to_bits() == q.to_bits())
        })
}

/// DD-SAF with `β_q = 0, β_w = ε, N_warm = 0` (stepped with `dd_sign`)
/// against RZA-LMS (canonical sign). True when the trajectories agree bit for bit.
pub fn ddsaf_reduces_to_rza(
    iterations: usize,
    taps: usize,
    seed: u64,
    dd_sign: fn(f64) -> f64,
) -> bool {
    let fx = fixture(taps, iterations, seed);
    let (mu, rho0, eps) = (0.01, 5e-4, 0.02);
    let rza = trajectory(&fx, &AlgorithmConfig::rza(mu, rho0, eps), sgn);
    let dd = trajectory(
        &fx,
        &AlgorithmConfig::ddsaf(mu, rho0, eps, 0.0, 0.8, 0),
        dd_sign,
    );
    bit_identical(&rza, &dd)
}

/// RZA-LMS and DD-SAF with `ρ₀ = 0` against LMS.
pub fn zero_attraction_reduces_to_lms(iterations: usize, taps: usize, seed: u64) -> bool {
    let fx = fixture(taps, iterations, seed);
    let mu = 0.01;
    let lms = trajectory(&fx, &AlgorithmConfig::lms(mu), sgn);
    let rza = trajectory(&fx, &AlgorithmConfig::rza(mu, 0.0, 0.02), sgn);
    let dd = trajectory(
        &fx,
        &AlgorithmConfig::ddsaf(mu, 0.0, 0.02, 2.0, 0.97, 200),
        sgn,
    );
    bit_identical(&lms, &rza) && bit_identical(&lms, &dd)
}

/// DD-SAF states `w(1..=N_warm)` against LMS at the same step size.
pub fn warm_start_is_inert(n_warm: u64, taps: usize, seed: u64) -> bool {
    let fx = fixture(taps, n_warm as usize + 50, seed);
    let mu = 0.01;
    let lms = trajectory(&fx, &AlgorithmConfig::lms(mu), sgn);
    let dd = trajectory(
        &fx,
        &AlgorithmConfig::ddsaf(mu, 2e-3, 0.02, 2.0, 0.97, n_warm),
        sgn,
    );
    // w(n) for n = 1..=N_warm sits at index n − 1; w(N_warm + 1) is the first
    // state that can see attraction
    let k = n_warm as usize;
    bit_identical(&lms[..k], &dd[..k]) && !bit_identical(&lms[..k + 2], &dd[..k + 2])
}

/// Per-iteration multiplication tallies `[lms, rza, dd]` in units of M.
pub fn op_counts(taps: usize) -> [u64; 3] {
    let configs = [
        AlgorithmConfig::lms(0.01),
        AlgorithmConfig::rza(0.01, 1e-4, 0.02),
        AlgorithmConfig::ddsaf(0.01, 1e-4, 0.02, 2.0, 0.97, 0),
    ];
    let x = vec![0.01; taps];
    configs.map(|cfg| {
        let mut st = FilterState::new(taps);
        st.step(&cfg, &x, 1.0).expect("lengths match");
        st.mult_count() / taps as u64
    })
}

/// Largest relative error between the recursive error memory and the
/// brute-force sum `Σ_{l=1}^{n} γ^{l−1} e(n−l) x(n−l)` over a short trace.
pub fn error_memory_vs_window(steps: usize, taps: usize, gamma: f64, seed: u64) -> f64 {
    let fx = fixture(taps, steps, seed);
    let config = AlgorithmConfig::ddsaf(0.05, 1e-3, 0.02, 2.0, gamma, 3);
    let mut state = FilterState::new(taps);
    let mut line = TapDelayLine::new(taps);
    let mut history: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut worst: f64 = 0.0;
    for (x, v) in fx.input.iter().zip(&fx.noise) {
        line.push(*x);
        let d = desired_output(&fx.system, line.regressor(), *v).expect("lengths match");
        let e = state
            .step(&config, line.regressor(), d)
            .expect("lengths match");
        history.push((e, line.regressor().to_vec()));
        // q(n) = Σ_{l=1}^{n} γ^{l−1} e(n−l) x(n−l)
        let n = history.len();
        for i in 0..taps {
            let brute: f64 = (1..=n)
                .map(|l| gamma.powi(l as i32 - 1) * history[n - l].0 * history[n - l].1[i])
                .sum();
            let got = state.error_memory()[i];
            let scale = brute.abs().max(1e-300);
            worst = worst.max((got - brute).abs() / scale);
        }
    }
    worst
}

/// Every penalty weight seen along a DD-SAF and an RZA-LMS trajectory lies in (0, 1].
pub fn weights_bounded(iterations: usize, taps: usize, seed: u64) -> bool {
    let fx = fixture(taps, iterations, seed);
    let configs = [
        AlgorithmConfig::rza(0.01, 5e-4, 0.02),
        AlgorithmConfig::ddsaf(0.01, 5e-4, 0.02, 2.0, 0.97, 10),
    ];
    configs.iter().all(|cfg| {
        let mut st = FilterState::new(taps);
        let mut line = TapDelayLine::new(taps);
        fx.input.iter().zip(&fx.noise).all(|(x, v)| {
            line.push(*x);
            let ok = (0..taps).all(|i| {
                let s = st.penalty_weight(cfg, i);
                s > 0.0 && s <= 1.0
            });
            let d = desired_output(&fx.system, line.regressor(), *v).expect("lengths match");
            st.step(cfg, line.regressor(), d).expect("lengths match");
            ok
        })
    })
}

fn sgn_with_positive_zero(v: f64) -> f64 {
    if v < 0.0 {
        -1.0
    } else {
        1.0
    }
}

pub fn run_checks() -> Vec<CheckResult> {
    let mut out = Vec::new();
    let mut push = |name, passed, detail: String| {
        out.push(CheckResult {
            name,
            passed,
            detail,
        })
    };

    let ok = ddsaf_reduces_to_rza(2000, 64, 1, sgn);
    push(
        "reduction DD-SAF -> RZA-LMS",
        ok,
        "beta_q = 0, beta_w = eps, N_warm = 0; 2000 iterations, bit-exact".into(),
    );

    let ok = zero_attraction_reduces_to_lms(2000, 64, 2);
    push(
        "reduction rho0 = 0 -> LMS",
        ok,
        "RZA-LMS and DD-SAF, 2000 iterations, bit-exact".into(),
    );

    let ok = warm_start_is_inert(200, 64, 3);
    push(
        "warm-start inertness",
        ok,
        "DD-SAF equals LMS for n <= N_warm = 200".into(),
    );

    let ok = weights_bounded(1000, 64, 4);
    push(
        "penalty weight bounds",
        ok,
        "0 < s_i(n) <= 1 along RZA-LMS and DD-SAF trajectories".into(),
    );

    let counts: Vec<(usize, [u64; 3])> =
        [8, 128, 1024].iter().map(|&m| (m, op_counts(m))).collect();
    let ok = counts.iter().all(|(_, c)| *c == [2, 4, 6]);
    let detail = counts
        .iter()
        .map(|(m, c)| format!("M={m}: LMS {}M, RZA {}M, DD-SAF {}M", c[0], c[1], c[2]))
        .collect::<Vec<_>>()
        .join("; ");
    push("multiplication counts", ok, detail);

    let err = error_memory_vs_window(10, 16, 0.97, 5);
    push(
        "error-memory recursion vs windowed sum",
        err < 1e-12,
        format!("10-step trace, max relative error {err:.2e}"),
    );

    let detected = !ddsaf_reduces_to_rza(200, 64, 1, sgn_with_positive_zero);
    push(
        "mutation: sgn(0) = +1 is caught",
        detected,
        if detected {
            "reduction oracle rejects the corrupted sign convention".into()
        } else {
            "reduction oracle did not notice the corrupted sign convention".into()
        },
    );
    out
}
