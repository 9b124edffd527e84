//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 divergence or an
//! unstable configuration, 3 failed validation check.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::experiments::{
    curve_rows, estimate_steady_state, pilot_sbar, preset, run_monte_carlo_per_filter,
    step_size_sweep, write_curves_csv, write_sweep_csv, CurveRow, Experiment, ExperimentConfig,
    MsdCurve, Source,
};
use crate::filters::Algorithm;
use crate::theory::{
    analytic_sbar, attraction_excess, db, delta_msd, mean_stability_bound, ms_stability_bound,
    noise_floor, steady_state_msd, TheoryInputs,
};
use crate::validate::run_checks;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DIVERGED: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "ddsaf",
    version,
    about = "Sparse adaptive filters: simulation, sweeps and theory"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// More progress output on stderr
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Monte-Carlo learning curves; writes curves.csv and summary.txt
    Run(RunArgs),
    /// Steady-state MSD over a step-size grid; writes sweep.csv
    Sweep(SweepArgs),
    /// Print stability bounds and steady-state predictions
    Theory(RunArgs),
    /// Run the fast invariant suite
    Validate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SbarMode {
    /// Estimate penalty weights from pilot runs
    Plugin,
    /// Evaluate penalty weights at the true coefficients
    Analytic,
}

#[derive(Debug, Args)]
#[group(id = "source", required = true, multiple = false)]
struct SourceArgs {
    /// Reference experiment 1 to 5
    #[arg(long, group = "source")]
    experiment: Option<u32>,
    /// TOML experiment configuration
    #[arg(long, group = "source")]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Master seed override
    #[arg(long)]
    seed: Option<u64>,
    /// Number of Monte-Carlo trials
    #[arg(long)]
    trials: Option<usize>,
    /// Iterations per trial
    #[arg(long)]
    iters: Option<usize>,
    /// Output directory
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Step size override, e.g. `--mu dd-saf=0.01`
    #[arg(long, value_name = "ALG=VAL")]
    mu: Vec<String>,
    /// Zero-attraction strength override, e.g. `--rho0 rza=0`
    #[arg(long, value_name = "ALG=VAL")]
    rho0: Vec<String>,
    #[arg(long, value_enum, default_value_t = SbarMode::Plugin)]
    sbar: SbarMode,
    /// Skip the theory overlay
    #[arg(long)]
    no_theory: bool,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Comma-separated step sizes replacing the configured grid
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<f64>>,
}

pub fn main() -> i32 {
    run_cli(std::env::args_os())
}

pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let verbose = cli.verbose;
    let outcome = match cli.command {
        Command::Run(args) => cmd_run(&args, verbose),
        Command::Sweep(args) => cmd_sweep(&args, verbose),
        Command::Theory(args) => cmd_theory(&args, verbose),
        Command::Validate => Ok(cmd_validate()),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Diverged { .. } | Error::Unstable(_) => EXIT_DIVERGED,
                _ => EXIT_USAGE,
            }
        }
    }
}

fn parse_assignment(raw: &str) -> Result<(&str, f64)> {
    let (key, value) = raw
        .split_once('=')
        .ok_or_else(|| Error::InvalidInput(format!("expected ALG=VALUE, got `{raw}`")))?;
    let value: f64 = value
        .trim()
        .parse()
        .map_err(|_| Error::InvalidInput(format!("not a number in `{raw}`")))?;
    Ok((key.trim(), value))
}

fn load_config(args: &RunArgs) -> Result<ExperimentConfig> {
    let mut cfg = match (&args.source.experiment, &args.source.config) {
        (Some(id), None) => preset(*id)?,
        (None, Some(path)) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
            ExperimentConfig::from_toml(&text)?
        }
        _ => {
            return Err(Error::InvalidInput(
                "give exactly one of --experiment, --config".into(),
            ))
        }
    };
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    if let Some(trials) = args.trials {
        cfg.n_trials = trials;
    }
    if let Some(iters) = args.iters {
        cfg.n_iters = iters;
        if cfg.steady_state_window > iters {
            cfg.steady_state_window = (iters / 4).max(1);
        }
    }
    for raw in &args.mu {
        let (key, mu) = parse_assignment(raw)?;
        cfg.algorithm_mut(key)
            .ok_or_else(|| Error::InvalidInput(format!("no algorithm `{key}` in configuration")))?
            .mu = mu;
    }
    for raw in &args.rho0 {
        let (key, rho0) = parse_assignment(raw)?;
        cfg.algorithm_mut(key)
            .ok_or_else(|| Error::InvalidInput(format!("no algorithm `{key}` in configuration")))?
            .rho0 = Some(rho0);
    }
    if args.no_theory {
        cfg.theory_overlay = false;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn prepare(args: &RunArgs, verbose: u8) -> Result<Experiment> {
    let cfg = load_config(args)?;
    let exp = Experiment::prepare(&cfg)?;
    if verbose > 0 {
        eprintln!(
            "{}: fingerprint {}, {} trials x {} iterations, seed {}",
            cfg.name,
            exp.fingerprint(),
            cfg.n_trials,
            cfg.n_iters,
            cfg.master_seed
        );
        for (name, f) in &exp.filters {
            eprintln!("  {name}: mu {} rho0 {:.4e}", f.mu, f.rho0);
        }
    }
    Ok(exp)
}

fn create_out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)
        .map_err(|e| Error::InvalidInput(format!("cannot create {}: {e}", dir.display())))
}

fn create_file(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::InvalidInput(format!("cannot write {}: {e}", path.display())))
}

/// Steady-state model inputs for filter `idx` of a prepared experiment.
fn theory_inputs(exp: &Experiment, idx: usize, mode: SbarMode) -> Result<TheoryInputs> {
    let (_, cfg) = &exp.filters[idx];
    let sbar = match (cfg.algorithm, mode) {
        (Algorithm::Lms, _) => vec![1.0; exp.system.sparsity()],
        (_, SbarMode::Plugin) => pilot_sbar(exp, idx)?,
        (Algorithm::Rza, SbarMode::Analytic) => analytic_sbar(&exp.system, cfg.epsilon),
        (Algorithm::DdSaf, SbarMode::Analytic) => analytic_sbar(&exp.system, cfg.beta_w),
    };
    Ok(TheoryInputs {
        taps: exp.system.taps(),
        sigma_x2: exp.sigma_x2(),
        sigma_v2: exp.noise.variance(),
        mu: cfg.mu,
        rho0: cfg.rho0,
        sbar_active: sbar,
    })
}

fn cmd_run(args: &RunArgs, verbose: u8) -> Result<i32> {
    let exp = prepare(args, verbose)?;
    let cfg = &exp.config;
    create_out_dir(&args.out)?;

    let outcomes = run_monte_carlo_per_filter(&exp);
    let mut rows: Vec<CurveRow> = Vec::new();
    let mut summary = String::new();
    let _ = writeln!(summary, "experiment: {}", cfg.name);
    let _ = writeln!(summary, "fingerprint: {}", exp.fingerprint());
    let _ = writeln!(
        summary,
        "trials: {}  iterations: {}  seed: {}  steady-state window: last {}",
        cfg.n_trials, cfg.n_iters, cfg.master_seed, cfg.steady_state_window
    );
    let _ = writeln!(summary, "noise variance: {:.6e}", exp.noise.variance());
    let _ = writeln!(summary);
    let _ = writeln!(summary, "steady-state MSD (dB):");

    let mut diverged = false;
    let mut curves: Vec<Option<&MsdCurve>> = Vec::new();
    for (name, outcome) in &outcomes {
        match outcome {
            Ok(curve) => {
                let ss = estimate_steady_state(curve, cfg.steady_state_window)?;
                let _ = writeln!(
                    summary,
                    "  {name:<10} {:>9.3}  (cross-trial std {:.3} dB)",
                    ss.msd_db, ss.std_across_trials
                );
                rows.extend(curve_rows(curve));
                curves.push(Some(curve));
            }
            Err(e @ Error::Diverged { .. }) => {
                diverged = true;
                eprintln!("warning: {e}");
                let _ = writeln!(summary, "  {name:<10} {e}");
                curves.push(None);
            }
            Err(e) => return Err(e.clone()),
        }
    }

    if cfg.theory_overlay {
        let _ = writeln!(summary);
        let _ = writeln!(
            summary,
            "theory (small-step steady state, {:?} penalty weights):",
            args.sbar
        );
        for (idx, (name, f)) in exp.filters.iter().enumerate() {
            if f.algorithm != Algorithm::DdSaf {
                continue;
            }
            let inputs = theory_inputs(&exp, idx, args.sbar)?;
            match steady_state_msd(&inputs, true) {
                Ok(pred) => {
                    let pred_db = db(pred);
                    rows.extend((0..cfg.n_iters).map(|n| CurveRow {
                        iteration: n,
                        algorithm: name.clone(),
                        msd_db: pred_db,
                        source: Source::Theory,
                    }));
                    let _ = write!(summary, "  {name:<10} {pred_db:>9.3}");
                    if let Some(curve) = curves[idx] {
                        let ss = estimate_steady_state(curve, cfg.steady_state_window)?;
                        let _ = write!(
                            summary,
                            "  gap (sim - theory) {:+.3} dB",
                            ss.msd_db - pred_db
                        );
                    }
                    let _ = writeln!(summary);
                }
                Err(e) => {
                    let _ = writeln!(summary, "  {name:<10} unstable: {e}");
                }
            }
        }
    }

    let mut csv_out = create_file(&args.out.join("curves.csv"))?;
    write_curves_csv(&mut csv_out, exp.fingerprint(), &rows)?;
    fs::write(args.out.join("summary.txt"), &summary)
        .map_err(|e| Error::InvalidInput(format!("cannot write summary: {e}")))?;
    print!("{summary}");
    Ok(if diverged { EXIT_DIVERGED } else { EXIT_OK })
}

fn cmd_sweep(args: &SweepArgs, verbose: u8) -> Result<i32> {
    let exp = prepare(&args.run, verbose)?;
    let base = &exp.config;
    let grid = args.grid.clone().unwrap_or_else(|| base.mu_grid.clone());
    if grid.is_empty() {
        return Err(Error::InvalidInput(
            "no step-size grid: the configuration has none and --grid was not given".into(),
        ));
    }
    if grid.iter().any(|mu| !(*mu > 0.0)) {
        return Err(Error::InvalidInput("step sizes must be positive".into()));
    }
    create_out_dir(&args.run.out)?;
    let rows = step_size_sweep(base, &grid)?;
    let mut out = create_file(&args.run.out.join("sweep.csv"))?;
    write_sweep_csv(&mut out, exp.fingerprint(), &rows)?;

    println!("{}: fingerprint {}", base.name, exp.fingerprint());
    for r in &rows {
        if r.diverged {
            println!("  mu {:<9.6} {:<10} diverged", r.mu, r.algorithm);
        } else {
            println!(
                "  mu {:<9.6} {:<10} {:>9.3} dB (std {:.3})",
                r.mu, r.algorithm, r.msd_ss_db, r.std_db
            );
        }
    }
    let n_div = rows.iter().filter(|r| r.diverged).count();
    if n_div > 0 {
        eprintln!("warning: {n_div} of {} sweep points diverged", rows.len());
        return Ok(EXIT_DIVERGED);
    }
    Ok(EXIT_OK)
}

fn cmd_theory(args: &RunArgs, verbose: u8) -> Result<i32> {
    let exp = prepare(args, verbose)?;
    let m = exp.system.taps();
    let sx2 = exp.sigma_x2();
    let sv2 = exp.noise.variance();
    let bound = ms_stability_bound(m, sx2);

    println!("{}: fingerprint {}", exp.config.name, exp.fingerprint());
    if !exp.config.input.is_white() {
        println!("note: input is correlated; white-input formulas use its stationary variance");
    }
    println!("taps M = {m}, input variance {sx2:.4}, noise variance {sv2:.6e}");
    println!(
        "mean stability bound: mu < {:.4}",
        mean_stability_bound(sx2)
    );
    println!(
        "mean-square bound: mu < {:.4} (large-M form {:.4})",
        bound.exact, bound.large_m
    );

    let mut unstable = false;
    let mut inputs: Vec<Option<TheoryInputs>> = Vec::new();
    for (idx, (name, f)) in exp.filters.iter().enumerate() {
        println!("{name}: mu {} rho0 {:.4e}", f.mu, f.rho0);
        if f.mu >= bound.exact {
            unstable = true;
            println!("  unstable: exceeds mean-square bound {:.4}", bound.exact);
            inputs.push(None);
            continue;
        }
        let ti = theory_inputs(&exp, idx, args.sbar)?;
        println!("  noise floor: {:.2} dB", db(noise_floor(m, f.mu, sv2)));
        println!(
            "  steady-state MSD: {:.2} dB (small-step form), {:.2} dB (exact form)",
            db(steady_state_msd(&ti, true)?),
            db(steady_state_msd(&ti, false)?)
        );
        if f.rho0 > 0.0 {
            println!(
                "  bias bound: {:.4e}",
                crate::theory::bias_bound(f.rho0, ti.sparsity(), f.mu, sx2)
            );
        }
        inputs.push(Some(ti));
    }

    let find = |alg| exp.filters.iter().position(|(_, f)| f.algorithm == alg);
    if let (Some(r), Some(d)) = (find(Algorithm::Rza), find(Algorithm::DdSaf)) {
        if let (Some(rza), Some(dd)) = (&inputs[r], &inputs[d]) {
            match delta_msd(rza, dd) {
                Ok(delta) => println!("delta MSD (RZA-LMS minus DD-SAF): {delta:.4e}"),
                Err(_) => println!(
                    "delta MSD (RZA-LMS minus DD-SAF attraction excess, parameters differ): {:.4e}",
                    attraction_excess(rza) - attraction_excess(dd)
                ),
            }
        }
    }
    Ok(if unstable { EXIT_DIVERGED } else { EXIT_OK })
}

fn cmd_validate() -> i32 {
    let checks = run_checks();
    let mut failed = 0;
    for c in &checks {
        println!(
            "{} {}: {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
        failed += usize::from(!c.passed);
    }
    println!(
        "{} of {} checks passed",
        checks.len() - failed,
        checks.len()
    );
    if failed == 0 {
        EXIT_OK
    } else {
        EXIT_VALIDATION
    }
}
