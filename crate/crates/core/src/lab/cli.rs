//! `berglab` command line.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::carleson::{
    embedding_norm, lambda_seq_norm, m0_sup, m_n_estimate, mu_hat_norm, psi_norm, vanishing_profile,
    vanishing_sequence_f, CarlesonReport, FactorSpec,
};
use crate::error::{Error, Result};
use crate::geometry::{probe_points, verify_lattice, DiskPoint};
use crate::kernel::{
    bergman_kernel_function, inner_product_a2, kernel_coeffs, standard_kernel, AnalyticFunction,
    DEFAULT_TERMS, KERNEL_TOL,
};
use crate::toeplitz::{
    compactness_profile, same_weight, toeplitz_norm_estimate, toeplitz_norm_exact_22, ToeplitzOperator,
};
use crate::weights::{doubling_profile, duality_diagnostic, geometric_grid, regularity_profile};

use super::scenario::{Config, Prepared, Scenario};
use super::verify::{run_experiment, Experiment, Windows};

/// Probe count for lattice certification.
const LATTICE_PROBES: usize = 10_000;
/// Grid depth `r_k = 1 - 2^{-k}` for weight checks.
const WEIGHT_GRID_K: u32 = 20;
/// Bound on regularity ratios treated as "regular on the grid".
const REGULARITY_BOUND: f64 = 1e3;
const REPRODUCING_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(name = "berglab", version, about = "Weighted Bergman space laboratory")]
pub struct Cli {
    /// Scenario file (`{"scenario": {...}}`).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory for JSON and CSV artifacts.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Hyperbolic radius of testing disks.
    #[arg(long, global = true)]
    pub radius: Option<f64>,
    /// Optimizer evaluation budget.
    #[arg(long, global = true)]
    pub budget: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Write artifacts only, nothing to stdout.
    #[arg(long, short, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    Weights {
        #[command(subcommand)]
        cmd: WeightsCmd,
    },
    Geometry {
        #[command(subcommand)]
        cmd: GeometryCmd,
    },
    Kernel {
        #[command(subcommand)]
        cmd: KernelCmd,
    },
    Carleson {
        #[command(subcommand)]
        cmd: CarlesonCmd,
    },
    Toeplitz {
        #[command(subcommand)]
        cmd: ToeplitzCmd,
    },
    /// Paired-quantity equivalence runs over a scenario family.
    Verify {
        #[arg(value_enum)]
        experiment: VerifyKind,
        /// Window fixture overriding the bundled one.
        #[arg(long)]
        windows: Option<PathBuf>,
        /// Write padded windows from this run to a fixture file.
        #[arg(long)]
        record_windows: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum WeightsCmd {
    /// Regularity, doubling, σ and the A-constant.
    Check,
}

#[derive(Debug, Subcommand)]
pub enum GeometryCmd {
    /// Builds a lattice and certifies separation and covering.
    Lattice,
}

#[derive(Debug, Subcommand)]
pub enum KernelCmd {
    /// Series against closed forms and the reproducing property.
    Validate,
}

#[derive(Debug, Subcommand)]
pub enum CarlesonCmd {
    M0,
    Vanish,
    Lambda,
    Muhat,
    Psi,
    Embed,
    Mn,
    Thm3,
}

#[derive(Debug, Subcommand)]
pub enum ToeplitzCmd {
    Norm,
    Compactness,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VerifyKind {
    #[value(name = "thm1")]
    Thm1,
    #[value(name = "thm1-iii")]
    Thm1Iii,
    #[value(name = "thm2")]
    Thm2,
    #[value(name = "thmA")]
    ThmA,
}

impl From<VerifyKind> for Experiment {
    fn from(v: VerifyKind) -> Self {
        match v {
            VerifyKind::Thm1 => Experiment::Thm1,
            VerifyKind::Thm1Iii => Experiment::Thm1Iii,
            VerifyKind::Thm2 => Experiment::Thm2,
            VerifyKind::ThmA => Experiment::ThmA,
        }
    }
}

/// Exit status of a failed run.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Accuracy { .. } => 3,
        Error::Internal(_) | Error::Io(_) => 1,
        _ => 2,
    }
}

struct Output {
    name: String,
    summary: Value,
    csv: Option<String>,
    /// Non-error failure status (3 accuracy, 4 window).
    status: i32,
}

impl Output {
    fn new<T: Serialize>(name: &str, summary: &T) -> Result<Self> {
        Ok(Self {
            name: name.to_string(),
            summary: serde_json::to_value(summary)?,
            csv: None,
            status: 0,
        })
    }

    fn with_csv(mut self, csv: String) -> Self {
        self.csv = Some(csv);
        self
    }

    fn with_status(mut self, status: i32) -> Self {
        self.status = status;
        self
    }
}

fn csv_of<F>(f: F) -> Result<String>
where
    F: FnOnce(&mut Vec<u8>) -> Result<()>,
{
    let mut buf = Vec::new();
    f(&mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Internal(e.to_string()))
}

fn report_output(name: &str, rep: &CarlesonReport) -> Result<Output> {
    let csv = csv_of(|b| rep.write_csv(b))?;
    Ok(Output::new(name, rep)?.with_csv(csv))
}

fn scenario_from(cli: &Cli) -> Result<Scenario> {
    let mut s = match &cli.config {
        Some(path) => Config::load(path)?.scenario,
        None => Scenario::default(),
    };
    if let Some(seed) = cli.seed {
        s.seed = seed;
    }
    if let Some(r) = cli.radius {
        s.radius = r;
    }
    if let Some(b) = cli.budget {
        s.budget = b;
    }
    Ok(s)
}

fn factor_specs(prep: &Prepared) -> Result<Vec<FactorSpec>> {
    let s = &prep.scenario;
    if s.factors.is_empty() {
        return Ok(vec![FactorSpec {
            weight: prep.omega.clone(),
            p: s.p,
            q: s.q,
        }]);
    }
    s.factor_specs()
}

fn weights_check(prep: &Prepared) -> Result<Output> {
    let s = &prep.scenario;
    let grid = geometric_grid(WEIGHT_GRID_K);
    let reg = regularity_profile(&prep.omega, &grid)?;
    let dbl = doubling_profile(&prep.omega, &grid)?;
    let dual = duality_diagnostic(&prep.omega, &prep.eta, s.p, &grid, REGULARITY_BOUND)?;
    let summary = json!({
        "omega": prep.omega.label(),
        "eta": prep.eta.label(),
        "p": s.p,
        "regularity": {"min": reg.min, "max": reg.max},
        "doubling": {"min": dbl.min, "max": dbl.max},
        "duality": dual,
    });
    let mut csv = String::from("r,regularity,doubling\n");
    for ((r, a), b) in grid.iter().zip(&reg.ratios).zip(&dbl.ratios) {
        let _ = writeln!(csv, "{r},{a},{b}");
    }
    Ok(Output::new("weights-check", &summary)?.with_csv(csv))
}

fn geometry_lattice(s: &Scenario) -> Result<Output> {
    let lattice = s.lattice()?;
    let probes = probe_points(lattice.cutoff, LATTICE_PROBES);
    let rep = verify_lattice(&lattice, &probes);
    let status = if rep.separated && rep.covering { 0 } else { 3 };
    let csv = csv_of(|b| lattice.write_csv(b))?;
    Ok(Output::new("geometry-lattice", &rep)?.with_csv(csv).with_status(status))
}

fn kernel_validate(prep: &Prepared) -> Result<Output> {
    let s = &prep.scenario;
    let w = &prep.omega;
    let series = kernel_coeffs(w, DEFAULT_TERMS)?;
    let alpha = w.standard_alpha();
    let mut closed_form_error: Option<f64> = None;
    let mut csv = String::from("rho,closed_form_error\n");
    if let Some(alpha) = alpha {
        let mut worst = 0.0f64;
        for i in 1..=18 {
            let rho = 0.05 * i as f64;
            let z = Complex64::from_polar(rho.sqrt(), 0.3 * i as f64);
            let xi = Complex64::from_polar(rho.sqrt(), -0.7 * i as f64);
            let exact = standard_kernel(alpha, z, xi);
            let err = ((series.eval(z, xi)? - exact) / exact).norm();
            let _ = writeln!(csv, "{rho},{err}");
            worst = worst.max(err);
        }
        closed_form_error = Some(worst);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let coeffs: Vec<Complex64> = (0..=10)
        .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect();
    let f = AnalyticFunction::monomials(coeffs);
    let mut reproducing_error = 0.0f64;
    for i in 0..10 {
        let z = DiskPoint::polar(0.09 * i as f64, 0.61 * i as f64)?;
        let k = bergman_kernel_function(w, z)?;
        let err = (inner_product_a2(&f, &k, w)? - f.eval(z.z())).norm();
        reproducing_error = reproducing_error.max(err);
    }
    let pass = closed_form_error.is_none_or(|e| e <= KERNEL_TOL) && reproducing_error <= REPRODUCING_TOL;
    let summary = json!({
        "weight": w.label(),
        "terms": series.truncation(),
        "rho_max": series.rho_max(),
        "closed_form_error": closed_form_error,
        "reproducing_error": reproducing_error,
        "pass": pass,
    });
    Ok(Output::new("kernel-validate", &summary)?
        .with_csv(csv)
        .with_status(if pass { 0 } else { 3 }))
}

fn carleson(cmd: &CarlesonCmd, prep: &Prepared) -> Result<Output> {
    let s = &prep.scenario;
    let (mu, omega, eta, upsilon) = (&prep.mu, &prep.omega, &prep.eta, &prep.upsilon);
    let (p, q, r) = (s.p, s.q, s.radius);
    match cmd {
        CarlesonCmd::M0 => report_output("carleson-m0", &m0_sup(mu, omega, eta, upsilon, p, q, r, &prep.grid)?),
        CarlesonCmd::Vanish => report_output(
            "carleson-vanish",
            &vanishing_profile(mu, omega, eta, upsilon, p, q, r, &prep.grid)?,
        ),
        CarlesonCmd::Lambda => {
            let lattice = s.lattice()?;
            report_output(
                "carleson-lambda",
                &lambda_seq_norm(mu, omega, eta, upsilon, p, q, &lattice, r)?,
            )
        }
        CarlesonCmd::Muhat => report_output(
            "carleson-muhat",
            &mu_hat_norm(mu, omega, eta, upsilon, p, q, r, s.cutoff)?,
        ),
        CarlesonCmd::Psi => report_output("carleson-psi", &psi_norm(mu, omega, s.gamma, p, q, s.cutoff)?),
        CarlesonCmd::Embed => Output::new(
            "carleson-embed",
            &embedding_norm(omega, p, mu, q, &prep.space, &prep.budget)?,
        ),
        CarlesonCmd::Mn => {
            let specs = factor_specs(prep)?;
            Output::new("carleson-mn", &m_n_estimate(&specs, mu, &prep.space, &prep.budget)?)
        }
        CarlesonCmd::Thm3 => {
            let specs = factor_specs(prep)?;
            let rep = vanishing_sequence_f(&specs, mu, s.k_max, &prep.space, &prep.budget)?;
            let mut csv = String::from("k,value\n");
            for (k, v) in rep.k.iter().zip(&rep.values) {
                let _ = writeln!(csv, "{k},{v}");
            }
            Ok(Output::new("carleson-thm3", &rep)?.with_csv(csv))
        }
    }
}

fn toeplitz(cmd: &ToeplitzCmd, prep: &Prepared) -> Result<Output> {
    let s = &prep.scenario;
    let (omega, eta, upsilon) = (&prep.omega, &prep.eta, &prep.upsilon);
    match cmd {
        ToeplitzCmd::Norm => {
            let op = ToeplitzOperator::new(&prep.mu, omega)?;
            let equal = same_weight(eta, omega) && same_weight(upsilon, omega);
            let est = if s.p == 2.0 && s.q == 2.0 && equal {
                toeplitz_norm_exact_22(&op, s.basis)?
            } else {
                toeplitz_norm_estimate(&op, eta, upsilon, s.p, s.q, &prep.space, &prep.budget)?
            };
            Output::new("toeplitz-norm", &est)
        }
        ToeplitzCmd::Compactness => {
            let radii = s
                .radii
                .clone()
                .unwrap_or_else(|| geometric_grid((1.0 / s.cutoff).log2().floor() as u32));
            let prof =
                compactness_profile(&prep.mu, omega, eta, upsilon, s.p, s.q, &radii, &prep.space, &prep.budget)?;
            let mut csv = String::from("radius,norm\n");
            for (r, n) in prof.radii.iter().zip(&prof.norms) {
                let _ = writeln!(csv, "{r},{n}");
            }
            Ok(Output::new("toeplitz-compactness", &prof)?.with_csv(csv))
        }
    }
}

fn verify(
    cli: &Cli,
    kind: VerifyKind,
    windows: Option<&Path>,
    record: Option<&Path>,
) -> Result<Output> {
    let exp = Experiment::from(kind);
    let mut family = match &cli.config {
        Some(_) => vec![scenario_from(cli)?],
        None => exp.default_family(),
    };
    if cli.config.is_none() {
        for s in &mut family {
            if let Some(seed) = cli.seed {
                s.seed = seed;
            }
            if let Some(r) = cli.radius {
                s.radius = r;
            }
            if let Some(b) = cli.budget {
                s.budget = b;
            }
        }
    }
    let win = match windows {
        Some(path) => Windows::from_json(&std::fs::read_to_string(path)?)?,
        None => Windows::builtin(),
    };
    let report = run_experiment(exp, &family, &win)?;
    if let Some(path) = record {
        let mut recorded = win.clone();
        recorded.record(&report);
        std::fs::write(path, serde_json::to_string_pretty(&recorded)? + "\n")?;
    }
    let status = if !report.accuracy_failures.is_empty() {
        3
    } else if !report.windows_pass() {
        4
    } else {
        0
    };
    let csv = csv_of(|b| report.write_csv(b))?;
    Ok(Output::new(&format!("verify-{}", exp.name()), &report)?
        .with_csv(csv)
        .with_status(status))
}

fn dispatch(cli: &Cli) -> Result<Output> {
    if let Command::Verify {
        experiment,
        windows,
        record_windows,
    } = &cli.command
    {
        return verify(cli, *experiment, windows.as_deref(), record_windows.as_deref());
    }
    let scenario = scenario_from(cli)?;
    if let Command::Geometry { cmd: GeometryCmd::Lattice } = &cli.command {
        return geometry_lattice(&scenario);
    }
    let prep = scenario.prepare()?;
    match &cli.command {
        Command::Weights { cmd: WeightsCmd::Check } => weights_check(&prep),
        Command::Kernel { cmd: KernelCmd::Validate } => kernel_validate(&prep),
        Command::Carleson { cmd } => carleson(cmd, &prep),
        Command::Toeplitz { cmd } => toeplitz(cmd, &prep),
        Command::Geometry { .. } | Command::Verify { .. } => unreachable!("handled above"),
    }
}

fn emit(cli: &Cli, out: &Output) -> Result<()> {
    let json = serde_json::to_string_pretty(&out.summary)? + "\n";
    if let Some(dir) = &cli.out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(format!("{}.json", out.name)), &json)?;
        if let Some(csv) = &out.csv {
            std::fs::write(dir.join(format!("{}.csv", out.name)), csv)?;
        }
    }
    if cli.quiet {
        return Ok(());
    }
    let text = match cli.format {
        Format::Json => json.as_str(),
        Format::Csv => out.csv.as_deref().unwrap_or(""),
    };
    let mut stdout = std::io::stdout().lock();
    match stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var("BERGLAB_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        // A second call fails harmlessly once the pool exists.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

/// Runs the CLI on `args` and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    configure_threads();
    match dispatch(&cli).and_then(|out| emit(&cli, &out).map(|_| out.status)) {
        Ok(status) => status,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
