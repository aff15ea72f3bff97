//! Command-line driver: experiment specs in, CSV tables and a JSON report out.

mod report;
mod spec;

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::environments::{
    build_kernels, build_multichannel, classify, discrete_correlation, random_couplings, DiscreteEnvironment,
};
use crate::error::{Error, Result};
use crate::fdr::{
    coupling_independence_test, fdi_check, fdi_check_kappa, fdr_kernel_matrix, fdr_kernel_scalar, FDIReport,
};
use crate::kernels::{decompose, KernelSet};
use crate::langevin::run_ensemble;
use crate::qbm::{
    hup_check, me_coefficients, robertson_margin, steady_state_covariance, uncertainty_product, OscillatorBank,
    PhaseSpaceCovariance, TimeKernels,
};

pub use report::{matrix_csv, number, Report};
pub use spec::ExperimentSpec;

/// Environment variable that overrides `run.seed`.
pub const SEED_VAR: &str = "FDILAB_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    /// Build ν̃, γ̃ and α̃ on the grid.
    Kernel,
    /// Fluctuation-dissipation inequality and uncertainty check.
    Check,
    /// FDR kernel κ̃ and its uncertainty check.
    Fdr,
    /// Steady-state covariance of the oscillator bank.
    Steady,
    /// Stochastic trajectories against the predicted steady state.
    Simulate,
    /// Coupling-independence experiment for a discrete environment.
    Discrete,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Kernel => "kernel",
            Command::Check => "check",
            Command::Fdr => "fdr",
            Command::Steady => "steady",
            Command::Simulate => "simulate",
            Command::Discrete => "discrete",
        }
    }
}

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Passed = 0,
    Violation = 1,
    UsageError = 2,
}

/// Whether an error reports a physical violation rather than bad input.
pub fn is_violation(err: &Error) -> bool {
    matches!(
        err,
        Error::NotDamping { .. }
            | Error::DampingVanishes { .. }
            | Error::SpectrumNotPositive { .. }
            | Error::Unstable { .. }
            | Error::LocalApproximationInvalid { .. }
            | Error::NonRealKernel { .. }
    )
}

/// Everything the driver needs besides the process environment.
#[derive(Debug, Clone, PartialEq)]
pub struct Invocation {
    pub command: Command,
    pub spec_path: PathBuf,
    pub overrides: Vec<String>,
    pub out_dir: PathBuf,
    pub seed_override: Option<String>,
}

/// Runs one command, writes its outputs and returns the exit status with a
/// one-line summary.
pub fn execute(inv: &Invocation) -> (ExitStatus, String) {
    let spec = match load_spec(inv) {
        Ok(spec) => spec,
        Err(e) => return (ExitStatus::UsageError, format!("error: {e}")),
    };
    if let Err(e) = fs::create_dir_all(&inv.out_dir) {
        return (
            ExitStatus::UsageError,
            format!("error: cannot create {}: {e}", inv.out_dir.display()),
        );
    }
    let seed = match spec.seed() {
        Ok(seed) => seed,
        Err(e) => return (ExitStatus::UsageError, format!("error: {e}")),
    };
    let mut report = Report::new(inv.command.name(), seed, spec.values().clone());
    let status = match dispatch(inv.command, &spec, seed, &inv.out_dir, &mut report) {
        Ok(()) if report.passed => ExitStatus::Passed,
        Ok(()) => ExitStatus::Violation,
        Err(e) if is_violation(&e) => {
            report.fail(e.to_string());
            ExitStatus::Violation
        }
        Err(e) => return (ExitStatus::UsageError, format!("error: {e}")),
    };
    if let Err(e) = report.write(&inv.out_dir.join("report.json")) {
        return (ExitStatus::UsageError, format!("error: {e}"));
    }
    let summary = match (&report.error, status) {
        (Some(msg), _) => format!("{}: violation: {msg}", report.command),
        (None, ExitStatus::Passed) => format!("{}: pass", report.command),
        (None, _) => format!("{}: violation", report.command),
    };
    (status, summary)
}

fn load_spec(inv: &Invocation) -> Result<ExperimentSpec> {
    let text = fs::read_to_string(&inv.spec_path)
        .map_err(|e| Error::InvalidParameter(format!("cannot read {}: {e}", inv.spec_path.display())))?;
    let mut spec = ExperimentSpec::parse(&text)?;
    for assignment in &inv.overrides {
        spec.set(assignment)?;
    }
    if let Some(seed) = &inv.seed_override {
        spec.set(&format!("run.seed={seed}"))?;
    }
    Ok(spec)
}

fn dispatch(command: Command, spec: &ExperimentSpec, seed: u64, out: &Path, report: &mut Report) -> Result<()> {
    match command {
        Command::Kernel => run_kernel(spec, out, report),
        Command::Check => run_check(spec, out, report),
        Command::Fdr => run_fdr(spec, out, report),
        Command::Steady => run_steady(spec, report),
        Command::Simulate => run_simulate(spec, seed, report),
        Command::Discrete => run_discrete(spec, seed, out, report),
    }
}

fn kernels(spec: &ExperimentSpec) -> Result<(OscillatorBank, KernelSet)> {
    let bank = spec.bank()?;
    let (model, state, grid) = (spec.spectral()?, spec.state()?, spec.grid()?);
    let k = if bank.n_modes == 1 {
        build_kernels(&model, &state, &grid)?
    } else {
        build_multichannel(&[model], &state, &spec.mixing(bank.n_modes)?, &grid)?
    };
    let k = if spec.amplifying()? {
        k.with_negated_damping()?
    } else {
        k
    };
    Ok((bank, k))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::InvalidParameter(format!("cannot write {}: {e}", path.display())))
}

fn fdi_summary(fdi: &FDIReport) -> Value {
    json!({
        "passed": fdi.passed,
        "worst_margin": number(fdi.worst_margin),
        "tolerance": number(fdi.tolerance),
        "violating_frequencies": fdi.violating_frequencies.iter().map(|&w| number(w)).collect::<Vec<_>>(),
    })
}

fn margins_csv(fdi: &FDIReport) -> String {
    let mut out = String::from("omega,margin_plus,margin_minus\n");
    for ((w, p), m) in fdi.omegas.iter().zip(&fdi.margin_plus).zip(&fdi.margin_minus) {
        out.push_str(&format!("{w:.16e},{p:.16e},{m:.16e}\n"));
    }
    out
}

fn matrix_json(m: &nalgebra::DMatrix<f64>) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|r| Value::Array((0..m.ncols()).map(|c| number(m[(r, c)])).collect()))
            .collect(),
    )
}

fn covariance_json(cov: &PhaseSpaceCovariance) -> Value {
    json!({
        "sigma_xx": matrix_json(&cov.sigma_xx),
        "sigma_xp": matrix_json(&cov.sigma_xp),
        "sigma_pp": matrix_json(&cov.sigma_pp),
    })
}

fn numbers(values: &[f64]) -> Value {
    Value::Array(values.iter().map(|&v| number(v)).collect())
}

fn run_kernel(spec: &ExperimentSpec, out: &Path, report: &mut Report) -> Result<()> {
    let (_, k) = kernels(spec)?;
    write(&out.join("nu.csv"), &matrix_csv(&k.nu))?;
    write(&out.join("gamma.csv"), &matrix_csv(&k.gamma))?;
    write(&out.join("alpha.csv"), &matrix_csv(&k.alpha))?;
    report.insert(
        "classification",
        serde_json::to_value(classify(&k)).expect("enum serializes"),
    );
    report.insert("n_channels", json!(k.n_channels()));
    report.insert("n_points", json!(k.grid().len()));
    Ok(())
}

fn run_check(spec: &ExperimentSpec, out: &Path, report: &mut Report) -> Result<()> {
    let tol = spec.tolerance()?;
    let (bank, k) = kernels(spec)?;
    let fdi = fdi_check(&k, tol);
    write(&out.join("margins.csv"), &margins_csv(&fdi))?;
    report.insert(
        "classification",
        serde_json::to_value(classify(&k)).expect("enum serializes"),
    );
    report.insert("fdi", fdi_summary(&fdi));
    report.verdict("fdi", fdi.passed);
    match steady_state_covariance(&bank, &k) {
        Ok(cov) => {
            let dets = uncertainty_product(&cov);
            report.insert("uncertainty_products", numbers(&dets));
            report.insert("robertson_margin", number(robertson_margin(&cov)));
            report.verdict("uncertainty", hup_check(&dets, tol).iter().all(|&b| b));
            report.verdict("robertson", robertson_margin(&cov) >= -tol);
        }
        Err(e) if is_violation(&e) => {
            report.insert("steady_state", json!(e.to_string()));
            report.verdict("uncertainty", false);
        }
        Err(e) => return Err(e),
    }
    Ok(())
}

fn run_fdr(spec: &ExperimentSpec, out: &Path, report: &mut Report) -> Result<()> {
    let tol = spec.tolerance()?;
    let (_, k) = kernels(spec)?;
    let kappa = if k.n_channels() == 1 {
        fdr_kernel_scalar(&k)?
    } else {
        fdr_kernel_matrix(&k)?
    };
    write(&out.join("kappa.csv"), &matrix_csv(&kappa.kappa))?;
    let check = fdi_check_kappa(&kappa, tol);
    report.insert("kappa_check", fdi_summary(&check));
    report.verdict("kappa_check", check.passed);
    Ok(())
}

fn run_steady(spec: &ExperimentSpec, report: &mut Report) -> Result<()> {
    let tol = spec.tolerance()?;
    let (bank, k) = kernels(spec)?;
    let cov = steady_state_covariance(&bank, &k)?;
    let dets = uncertainty_product(&cov);
    report.insert("covariance", covariance_json(&cov));
    report.insert("uncertainty_products", numbers(&dets));
    report.insert("robertson_margin", number(robertson_margin(&cov)));
    report.verdict("uncertainty", hup_check(&dets, tol).iter().all(|&b| b));
    report.verdict("robertson", robertson_margin(&cov) >= -tol);
    if let Some((t, dt)) = spec.me_window()? {
        let me = me_coefficients(&bank, &TimeKernels::from_kernels(&k, t, dt)?, t)?;
        report.insert(
            "master_equation",
            json!({
                "t": number(t),
                "d_normal": number(me.d_normal),
                "d_anomalous": number(me.d_anomalous),
                "damping_rate": number(me.damping_rate),
                "freq_shift": number(me.freq_shift),
                "renormalization": number(me.renormalization),
                "slip": number(me.slip),
            }),
        );
    }
    Ok(())
}

fn run_simulate(spec: &ExperimentSpec, seed: u64, report: &mut Report) -> Result<()> {
    let (bank, k) = kernels(spec)?;
    let (config, n_trajectories) = spec.simulation()?;
    let predicted = steady_state_covariance(&bank, &k)?;
    let stats = run_ensemble(&bank, &k, &config, n_trajectories, seed)?;
    let predicted_dets = uncertainty_product(&predicted);
    let rows: Vec<Value> = (0..bank.n_modes)
        .map(|m| {
            json!({
                "mode": m,
                "det": number(stats.dets[m]),
                "det_se": number(stats.det_se[m]),
                "predicted_det": number(predicted_dets[m]),
                "sigma_xx": number(stats.covariance.sigma_xx[(m, m)]),
                "sigma_xx_se": number(stats.se_xx[(m, m)]),
                "predicted_sigma_xx": number(predicted.sigma_xx[(m, m)]),
                "sigma_pp": number(stats.covariance.sigma_pp[(m, m)]),
                "sigma_pp_se": number(stats.se_pp[(m, m)]),
                "predicted_sigma_pp": number(predicted.sigma_pp[(m, m)]),
            })
        })
        .collect();
    report.insert("modes", Value::Array(rows));
    report.insert("covariance", covariance_json(&stats.covariance));
    report.insert(
        "run",
        json!({
            "dt": number(stats.dt),
            "burn_in_steps": stats.burn_in_steps,
            "measured_steps": stats.measured_steps,
            "n_trajectories": stats.n_trajectories,
            "n_batches": stats.n_batches,
        }),
    );
    // each mode must respect the bound within three standard errors
    let ok = stats.dets.iter().zip(&stats.det_se).all(|(d, se)| d + 3.0 * se >= 0.25);
    report.verdict("uncertainty", ok);
    Ok(())
}

fn run_discrete(spec: &ExperimentSpec, seed: u64, out: &Path, report: &mut Report) -> Result<()> {
    let grid = spec.grid()?;
    let (levels, probs, broadening, n_couplings) = spec.discrete()?;
    // classified through one channel: the broadened lines give complex
    // multichannel couplings a spurious antisymmetric γ̃ near ω = 0
    let env = DiscreteEnvironment::new(
        levels.clone(),
        probs.clone(),
        random_couplings(levels.len(), 1, seed),
        broadening,
    )?;
    let k = decompose(&discrete_correlation(&env, &grid)?)?;
    report.insert(
        "classification",
        serde_json::to_value(classify(&k)).expect("enum serializes"),
    );
    report.insert("probabilities", numbers(&probs));
    let spread = coupling_independence_test(&levels, &probs, broadening, n_couplings, seed, &grid)?;
    let mut csv = String::from("omega,kappa_mean,spread\n");
    for ((w, m), s) in spread.omegas.iter().zip(&spread.kappa_mean).zip(&spread.spread) {
        csv.push_str(&format!("{w:.16e},{m:.16e},{s:.16e}\n"));
    }
    write(&out.join("spread.csv"), &csv)?;
    report.insert("max_spread", number(spread.max_spread()));
    report.insert("n_couplings", json!(n_couplings));
    Ok(())
}
