//! The `smpr` command line.
//!
//! Exit codes: 0 on success, 1 for invalid input, 2 for numerical failure
//! (factorization breakdown, solver divergence, truncation or sampling
//! aborts, or a verification suite that did not pass).

mod model;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::continuity::{
    alpha_admissibility, continuity_coefficients, harness_detect, solve_alpha, AlphaSequence,
};
use crate::error::SmprError;
use crate::format::{sig17, to_json};
use crate::kernels::{grid_points, verify_kernel, VerifyOptions};
use crate::marginals::{moment_summary, moment_summary_to, raw_moments, MarginalSpec};
use crate::orthopoly::{basis_from_moments, basis_from_recurrence, coeffs_from_expansion, CoeffMatrix};
use crate::simulate::{
    default_lags, empirical_increment_moments, exact_increment_moments, simulate_paths, PathEnsemble, SimConfig,
    SlopeReport, DEFAULT_GRID,
};

pub use model::{AlphaSource, ModelFile, ResolvedAlpha, SCHEMA};

/// Times at which admissibility checks are run.
const ADMISSIBILITY_TIMES: [f64; 4] = [0.1, 0.5, 1.0, 2.0];
/// Number of geometric lags requested for slope fits.
const LAG_COUNT: usize = 8;

#[derive(Debug, Parser)]
#[command(name = "smpr", version, about = "Stationary Markov processes with polynomial regressions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Model file, or a bare `{"family", "params"}` spec.
    #[arg(long)]
    spec: PathBuf,
    /// Rate file overriding the model's `alpha`.
    #[arg(long)]
    alpha: Option<PathBuf>,
}

impl ModelArgs {
    fn load(&self) -> Result<ModelFile, CliError> {
        let m = ModelFile::load(&self.spec)?;
        Ok(match &self.alpha {
            Some(p) => m.with_alpha_file(p)?,
            None => m,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Route {
    /// Exact Cholesky factor of the Hankel moment matrix.
    Cholesky,
    /// Closed-form expansion, or the three-term recurrence where none is tabulated.
    Closed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Exact,
    MonteCarlo,
    Both,
}

#[derive(Debug, Args)]
struct SimArgs {
    #[arg(long, default_value_t = 0.01)]
    dt: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: SMPR_THREADS, then all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Cells of the tabulated transition CDF.
    #[arg(long, default_value_t = DEFAULT_GRID)]
    cdf_grid: usize,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Raw and central moments as CSV.
    Moments {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        order: usize,
    },
    /// Lower-triangular coefficient matrix c[j][n] as CSV.
    Coeffs {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        degree: usize,
        #[arg(long, value_enum, default_value_t = Route::Cholesky)]
        route: Route,
    },
    /// Continuity coefficient, solved ratios and admissibility as JSON.
    Continuity {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        k: usize,
    },
    /// Transition density on a square grid as CSV.
    Kernel {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        t: f64,
        #[arg(long, default_value_t = 21)]
        grid: usize,
        /// Use the closed form instead of the Lancaster series.
        #[arg(long)]
        closed_form: bool,
    },
    /// Duality, semigroup, martingale and positivity checks as JSON.
    VerifyKernel {
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Simulated paths as CSV.
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        paths: usize,
        #[arg(long)]
        horizon: f64,
        #[command(flatten)]
        sim: SimArgs,
        /// Output file (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Small-lag scaling of increment moments as JSON.
    Conjecture {
        #[command(flatten)]
        model: ModelArgs,
        /// Comma-separated moment orders; E(ΔX)^{2k} is fitted.
        #[arg(long, value_delimiter = ',', default_value = "2,3")]
        k: Vec<usize>,
        #[arg(long, value_enum, default_value_t = Method::Exact)]
        method: Method,
        #[arg(long, default_value_t = 2000)]
        paths: usize,
        #[command(flatten)]
        sim: SimArgs,
        /// Also write `source,k,t,moment,se` rows to this file.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Full admissibility dossier as JSON.
    Report {
        #[command(flatten)]
        model: ModelArgs,
        /// Add Monte Carlo slopes from this many paths.
        #[arg(long)]
        paths: Option<usize>,
        #[command(flatten)]
        sim: SimArgs,
    },
}

#[derive(Debug)]
enum CliError {
    Lib(SmprError),
    Io(String),
    /// A check ran but did not pass; the report has been written.
    Failed,
}

impl From<SmprError> for CliError {
    fn from(e: SmprError) -> Self {
        CliError::Lib(e)
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("cannot write {}: {e}", path.display()))
}

/// Parses `args` (program name first) and runs the command, writing to
/// stdout and stderr. Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(args, &mut stdout.lock(), &mut stderr.lock())
}

/// [`run`] with explicit output streams.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    0
                }
                _ => {
                    let msg = e.to_string();
                    let line = msg.lines().next().unwrap_or("invalid arguments");
                    let _ = writeln!(err, "smpr: {}", line.trim_start_matches("error: "));
                    1
                }
            };
        }
    };
    match dispatch(cli.command, out) {
        Ok(()) => 0,
        Err(CliError::Failed) => 2,
        Err(CliError::Io(msg)) => {
            let _ = writeln!(err, "smpr: {msg}");
            1
        }
        Err(CliError::Lib(e)) => {
            let _ = writeln!(err, "smpr: {e}");
            if e.is_numerical() {
                2
            } else {
                1
            }
        }
    }
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes()).and_then(|_| out.flush()).map_err(|e| CliError::Io(format!("cannot write output: {e}")))
}

fn emit_json<T: Serialize + ?Sized>(out: &mut dyn Write, v: &T) -> Result<(), CliError> {
    let mut s = to_json(v);
    s.push('\n');
    emit(out, &s)
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> Result<(), CliError> {
    match cmd {
        Command::Moments { spec, order } => emit(out, &moments_csv(&ModelFile::load(&spec)?.spec, order)?),
        Command::Coeffs { spec, degree, route } => {
            let spec = ModelFile::load(&spec)?.spec;
            let c = match route {
                Route::Cholesky => basis_from_moments(&spec, degree)?,
                Route::Closed => closed_coeffs(&spec, degree)?,
            };
            emit(out, &coeffs_csv(&c))
        }
        Command::Continuity { spec, k } => {
            let spec = ModelFile::load(&spec)?.spec;
            let (doc, solved) = continuity_doc(&spec, k)?;
            emit_json(out, &doc)?;
            solved.map_err(CliError::Lib)
        }
        Command::Kernel { model, t, grid, closed_form } => {
            let m = model.load()?;
            let kernel = m.kernel()?.with_closed_form(closed_form);
            if closed_form && kernel.closed_form().is_none() {
                return Err(SmprError::Unsupported {
                    family: m.spec.family().name(),
                    what: "closed-form kernel for these rates; drop --closed-form to use the series".into(),
                }
                .into());
            }
            if grid < 2 {
                return Err(SmprError::InvalidParameter(format!("grid needs at least 2 points, got {grid}")).into());
            }
            let pts = grid_points(m.spec.evaluation_range(), grid);
            let mut s = String::from("x,y,eta\n");
            for &y in &pts {
                for &x in &pts {
                    s.push_str(&format!("{},{},{}\n", sig17(x), sig17(y), sig17(kernel.density(x, y, t)?)));
                }
            }
            emit(out, &s)
        }
        Command::VerifyKernel { model } => {
            let m = model.load()?;
            let v = verify_kernel(&m.kernel()?, &VerifyOptions::default());
            emit_json(out, &json!({ "schema": SCHEMA, "spec": m.spec, "verification": v }))?;
            if v.passed {
                Ok(())
            } else {
                Err(CliError::Failed)
            }
        }
        Command::Simulate { model, paths, horizon, sim, out: path } => {
            let m = model.load()?;
            let ens = simulate_paths(&sim_config(&m, &sim, paths, horizon)?)?;
            match path {
                Some(p) => {
                    let f = std::fs::File::create(&p).map_err(io_err(&p))?;
                    let mut w = std::io::BufWriter::new(f);
                    ens.write_csv(&mut w).map_err(io_err(&p))?;
                    w.flush().map_err(io_err(&p))
                }
                None => {
                    let mut buf = Vec::new();
                    ens.write_csv(&mut buf).expect("writing to memory");
                    emit(out, &String::from_utf8(buf).expect("CSV is ASCII"))
                }
            }
        }
        Command::Conjecture { model, k, method, paths, sim, csv } => {
            let m = model.load()?;
            let alpha = &m.require_alpha()?.alpha;
            let lags = default_lags(sim.dt, alpha.scale(), LAG_COUNT)?;
            let mut reports = Vec::new();
            if matches!(method, Method::Exact | Method::Both) {
                reports.push(exact_increment_moments(&m.spec, alpha, &k, &lags)?);
            }
            if matches!(method, Method::MonteCarlo | Method::Both) {
                let horizon = *lags.last().expect("lags are nonempty");
                let ens = simulate_paths(&sim_config(&m, &sim, paths, horizon)?)?;
                reports.push(empirical_increment_moments(&ens, &k, &lags)?);
            }
            if let Some(p) = csv {
                std::fs::write(&p, slope_csv(&reports)).map_err(io_err(&p))?;
            }
            emit_json(out, &json!({ "schema": SCHEMA, "spec": m.spec, "alpha": alpha, "lags": lags, "reports": reports }))
        }
        Command::Report { model, paths, sim } => {
            let m = model.load()?;
            emit_json(out, &report(&m, paths, &sim))
        }
    }
}

fn moments_csv(spec: &MarginalSpec, order: usize) -> Result<String, CliError> {
    let raw = raw_moments(spec, order)?;
    let central = moment_summary_to(spec, order)?.central;
    let mut s = String::from("order,raw,central\n");
    for j in 0..=order {
        s.push_str(&format!("{j},{},{}\n", sig17(raw[j]), sig17(central[j])));
    }
    Ok(s)
}

fn closed_coeffs(spec: &MarginalSpec, degree: usize) -> Result<CoeffMatrix, SmprError> {
    match coeffs_from_expansion(spec, degree) {
        Err(SmprError::Unsupported { .. }) => CoeffMatrix::from_recurrence(&basis_from_recurrence(spec, degree)?, degree),
        r => r,
    }
}

fn coeffs_csv(c: &CoeffMatrix) -> String {
    let mut s = String::from("j,n,c\n");
    for j in 0..=c.order() {
        for n in 0..=j {
            s.push_str(&format!("{j},{n},{}\n", sig17(c.get(j, n))));
        }
    }
    s
}

fn error_value(e: &SmprError) -> Value {
    json!({ "error": e.to_string() })
}

fn to_value<T: Serialize>(r: Result<T, SmprError>) -> Value {
    match r {
        Ok(v) => serde_json::to_value(v).expect("report types serialize"),
        Err(e) => error_value(&e),
    }
}

/// The `continuity` document, and whether a positive solution was found.
fn continuity_doc(spec: &MarginalSpec, k: usize) -> Result<(Value, Result<(), SmprError>), SmprError> {
    let coefficient = moment_summary(spec).and_then(|s| continuity_coefficients(&s));
    let c = basis_from_moments(spec, 2 * k)?;
    let solved = solve_alpha(&c, k);
    let (solve, harness, admissibility, status) = match solved {
        Ok(r) => {
            let adm = AlphaSequence::explicit(r.ratios.clone(), 1.0)
                .and_then(|a| alpha_admissibility(&a, spec, &ADMISSIBILITY_TIMES));
            let harness = harness_detect(&r, spec);
            (to_value(Ok(r)), json!(harness), to_value(adm), Ok(()))
        }
        Err(e) => (error_value(&e), Value::Null, Value::Null, Err(e)),
    };
    let doc = json!({
        "schema": SCHEMA,
        "spec": spec,
        "k": k,
        "continuity_coefficient": to_value(coefficient),
        "harness": harness,
        "solve": solve,
        "admissibility": admissibility,
    });
    Ok((doc, status))
}

fn sim_config(m: &ModelFile, sim: &SimArgs, paths: usize, horizon: f64) -> Result<SimConfig, SmprError> {
    let mut cfg = SimConfig::new(m.kernel()?, horizon, sim.dt, paths, sim.seed);
    cfg.grid = sim.cdf_grid;
    cfg.threads = sim.threads;
    cfg.validate()?;
    Ok(cfg)
}

fn slope_csv(reports: &[SlopeReport]) -> String {
    let mut s = String::from("source,k,t,moment,se\n");
    for r in reports {
        for line in r.to_csv().lines().skip(1) {
            s.push_str(&r.source);
            s.push(',');
            s.push_str(line);
            s.push('\n');
        }
    }
    s
}

fn monte_carlo_slopes(m: &ModelFile, alpha: &AlphaSequence, paths: usize, sim: &SimArgs) -> Result<SlopeReport, SmprError> {
    let lags = default_lags(sim.dt, alpha.scale(), LAG_COUNT)?;
    let horizon = *lags.last().expect("lags are nonempty");
    let ens: PathEnsemble = simulate_paths(&sim_config(m, sim, paths, horizon)?)?;
    empirical_increment_moments(&ens, &[2, 3], &lags)
}

/// The dossier behind `smpr report`. Failures of individual sections are
/// embedded as `{"error": ...}` so the document is always produced.
fn report(m: &ModelFile, paths: Option<usize>, sim: &SimArgs) -> Value {
    let spec = &m.spec;
    let summary = moment_summary(spec);
    let coefficient = summary.clone().and_then(|s| continuity_coefficients(&s));
    let solve2 = basis_from_moments(spec, 4).and_then(|c| solve_alpha(&c, 2));
    let harness = solve2.as_ref().map(|r| harness_detect(r, spec)).ok();
    let mut doc = json!({
        "schema": SCHEMA,
        "name": m.name,
        "family": spec.family().name(),
        "spec": spec,
        "moments": to_value(summary),
        "continuity_coefficient": to_value(coefficient),
        "harness": harness,
        "solve_k2": to_value(solve2),
    });
    let Some(resolved) = &m.alpha else {
        doc["alpha"] = error_value(&SmprError::InvalidParameter(
            "no rates given: pass --alpha or add an \"alpha\" entry to the model".into(),
        ));
        return doc;
    };
    let alpha = &resolved.alpha;
    doc["alpha"] = json!({
        "source": resolved.source,
        "scale": alpha.scale(),
        "ratios": alpha.ratios_upto(8),
    });
    if let Some(r) = &resolved.solved {
        doc["solve"] = to_value(Ok(r.clone()));
    }
    doc["admissibility"] = to_value(alpha_admissibility(alpha, spec, &ADMISSIBILITY_TIMES));
    doc["verification"] = to_value(m.kernel().map(|k| verify_kernel(&k, &VerifyOptions::default())));
    let lags = default_lags(sim.dt, alpha.scale(), LAG_COUNT);
    doc["exact_slopes"] = to_value(lags.and_then(|l| exact_increment_moments(spec, alpha, &[2, 3], &l)));
    if let Some(p) = paths {
        doc["monte_carlo_slopes"] = to_value(monte_carlo_slopes(m, alpha, p, sim));
    }
    doc
}
