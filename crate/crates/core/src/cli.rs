//! Batch front-end. Every subcommand reads flags or a JSON config and writes
//! CSV (plus JSON reports) either to stdout or atomically to a file.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::combinatorics::{
    ln_kappa_asymptotic, ln_kappa_ratio_to_bound, schroeder_hipparchus_by_compositions,
    schroeder_hipparchus_sequence,
};
use crate::envelopes::{convergence_radius, implicit_envelope, lemma_bound, GevreyEnvelope, StabilityConstant};
use crate::implicit_diff::{
    derivative_table, direction_label, finite_difference_check, richardson_steps, solve_residual,
    NewtonOptions, PolynomialOracle, ResidualOracle,
};
use crate::parametric::{verify_parametric_bounds, DomainMap1D, ParametricProblem};
use crate::pde1d::{BoundCheck, BoundaryCondition, Mesh1D, Nonlinearity, PdeConstants, PdeData, PdeOracle};
use crate::selftest;
use crate::Error;

/// Exit code for bad input: unreadable or invalid config, inadmissible data.
pub const EXIT_CONFIG: i32 = 1;
/// Exit code for solver or eigen-solver failures.
pub const EXIT_NUMERICAL: i32 = 2;
/// Exit code when `verify-bounds` finds a ratio above 1.
pub const EXIT_VIOLATION: i32 = 3;

/// Largest order for which `kappa` recounts via compositions.
const KAPPA_CROSS_CHECK_MAX: usize = 16;

#[derive(Parser, Debug)]
#[command(
    name = "gevrey-kit",
    version,
    about = "Gevrey-class derivative bounds for implicit solution maps",
    after_help = "Environment: GEVREY_KIT_THREADS caps the worker threads (default: all cores)."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Tabulate the Schröder–Hipparchus numbers and their ratio to (3+√8)^(n−1).
    Kappa(KappaArgs),
    /// Propagate a residual envelope to the solution map.
    Envelope(EnvelopeArgs),
    /// Solve the 1D semilinear model problem.
    Solve(SolveArgs),
    /// Directional derivatives of a solution map, optionally checked by finite differences.
    Derivatives(DerivativesArgs),
    /// Check parametric derivative norms against the composed envelope.
    VerifyBounds(VerifyArgs),
    /// Run the built-in checks.
    Selftest(SelftestArgs),
}

#[derive(Args, Debug)]
struct KappaArgs {
    /// Largest n to tabulate.
    #[arg(long, default_value_t = 20)]
    max_n: usize,
    /// Add a column with the ratio to the asymptotic formula.
    #[arg(long)]
    check_asymptotic: bool,
    /// Output file (stdout when absent).
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EnvelopeArgs {
    /// JSON {s, alpha, sigma, digamma, orders?, output?}; orders default to 1..=10.
    #[arg(long, short)]
    config: PathBuf,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SolveArgs {
    /// JSON {mesh_n, bc, a, b, f, g, nonlinearity, tol?, output?, report?}.
    #[arg(long, short)]
    config: PathBuf,
    /// Nodal CSV `x,u` (stdout when absent).
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// JSON report (stderr when absent).
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ProblemKind {
    /// u − d² = 0
    ScalarQuadratic,
    /// u³ + u − d = 0
    ScalarCubic,
    /// The 1D model problem; data from `--config`.
    Pde1d,
}

#[derive(Args, Debug)]
struct DerivativesArgs {
    #[arg(long, value_enum)]
    problem: ProblemKind,
    /// Highest derivative order.
    #[arg(long, default_value_t = 3)]
    order: usize,
    /// JSON list of directions: numbers for scalar problems, full data vectors
    /// or objects {a?, b?, f?, g?} for pde1d. Default: one unit direction
    /// (scalar) or a unit forcing perturbation (pde1d).
    #[arg(long)]
    directions: Option<PathBuf>,
    /// Base point for scalar problems.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    point: f64,
    /// Problem config for pde1d, same schema as `solve`.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Compare orders ≤ 4 with Richardson-extrapolated central differences.
    #[arg(long)]
    fd_check: bool,
    /// First finite-difference step; halved twice more.
    #[arg(long, default_value_t = 0.05)]
    fd_step: f64,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// JSON {mesh_n, p, c, vartheta, nonlinearity, max_order, y_samples, seed, ...}.
    #[arg(long, short)]
    config: PathBuf,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SelftestArgs {
    /// Only run checks whose name contains this string.
    #[arg(long)]
    filter: Option<String>,
}

/// An error with the exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn config(message: impl Into<String>) -> Self {
        Self { code: EXIT_CONFIG, message: message.into() }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = if e.is_numerical() { EXIT_NUMERICAL } else { EXIT_CONFIG };
        Self { code, message: e.to_string() }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `argv` (including the program name), runs the subcommand and
/// returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {}", e.message);
        return e.code;
    }
    let outcome = match cli.command {
        Command::Kappa(a) => kappa(a),
        Command::Envelope(a) => envelope(a),
        Command::Solve(a) => solve(a),
        Command::Derivatives(a) => derivatives(a),
        Command::VerifyBounds(a) => verify_bounds(a),
        Command::Selftest(a) => run_selftest(a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var("GEVREY_KIT_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::config(format!("GEVREY_KIT_THREADS must be a positive integer, got {raw:?}")))?;
    // A second call in the same process (tests) finds the pool already built.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn read_config<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

/// Writes to `path` through a temporary file in the same directory, or to
/// stdout when `path` is `None`.
fn write_output(path: Option<&Path>, content: &str) -> CliResult<()> {
    let io_err = |e: std::io::Error| CliError::config(format!("write failed: {e}"));
    match path {
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(content.as_bytes()).map_err(io_err)?;
            out.flush().map_err(io_err)
        }
        Some(p) => {
            let dir = match p.parent() {
                Some(d) if !d.as_os_str().is_empty() => d,
                _ => Path::new("."),
            };
            let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
            tmp.write_all(content.as_bytes()).map_err(io_err)?;
            tmp.persist(p).map_err(|e| io_err(e.error))?;
            Ok(())
        }
    }
}

fn output_path(flag: Option<PathBuf>, config: Option<String>) -> Option<PathBuf> {
    flag.or(config.map(PathBuf::from))
}

/// Shortest round-trip representation, so CSVs are exact and deterministic.
fn num(x: f64) -> String {
    format!("{x:e}")
}

fn kappa(args: KappaArgs) -> CliResult<i32> {
    if args.max_n == 0 {
        return Err(CliError::config("--max-n must be at least 1"));
    }
    let seq = schroeder_hipparchus_sequence(args.max_n);
    for n in 1..=args.max_n.min(KAPPA_CROSS_CHECK_MAX) {
        let by_enum = schroeder_hipparchus_by_compositions(n)?;
        if by_enum != seq[n - 1] {
            return Err(CliError {
                code: EXIT_NUMERICAL,
                message: format!("kappa_{n}: recursion {} differs from enumeration {by_enum}", seq[n - 1]),
            });
        }
    }
    let mut csv = String::from("n,kappa_n,ratio_to_bound");
    if args.check_asymptotic {
        csv.push_str(",ratio_to_asymptotic");
    }
    csv.push('\n');
    for n in 1..=args.max_n {
        let k = &seq[n - 1];
        let _ = write!(csv, "{n},{k},{}", num(ln_kappa_ratio_to_bound(n, k).exp()));
        if args.check_asymptotic {
            let ln_ratio = crate::combinatorics::ln_big(k) - ln_kappa_asymptotic(n);
            let _ = write!(csv, ",{}", num(ln_ratio.exp()));
        }
        csv.push('\n');
    }
    write_output(args.output.as_deref(), &csv)?;
    Ok(0)
}

#[derive(Deserialize, Debug)]
#[serde(deny_unknown_fields)]
struct EnvelopeConfig {
    #[serde(default = "one")]
    s: f64,
    alpha: f64,
    sigma: f64,
    digamma: f64,
    #[serde(default)]
    orders: Option<Vec<u64>>,
    #[serde(default)]
    output: Option<String>,
}

fn one() -> f64 {
    1.0
}

fn envelope(args: EnvelopeArgs) -> CliResult<i32> {
    let cfg: EnvelopeConfig = read_config(&args.config)?;
    let env_r = GevreyEnvelope::new(cfg.s, cfg.sigma, cfg.digamma)?;
    let alpha = StabilityConstant::new(cfg.alpha)?;
    let env_s = implicit_envelope(alpha, &env_r)?;
    let mut csv = String::from("quantity,n,value\n");
    let _ = writeln!(csv, "sigma_tilde,,{}", num(env_s.scale));
    let _ = writeln!(csv, "digamma_tilde,,{}", num(env_s.rate));
    if env_s.s <= 1.0 {
        let _ = writeln!(csv, "radius,,{}", num(convergence_radius(&env_s)?));
    }
    let orders = cfg.orders.unwrap_or_else(|| (1..=10).collect());
    for n in orders {
        if n == 0 {
            return Err(CliError::config("orders must be ≥ 1"));
        }
        let _ = writeln!(csv, "bound,{n},{}", num(env_s.bound(n)));
        let _ = writeln!(csv, "lemma_bound,{n},{}", num(lemma_bound(n, alpha, &env_r)?.exp()));
    }
    write_output(output_path(args.output, cfg.output).as_deref(), &csv)?;
    Ok(0)
}

/// A coefficient given either as one constant or as values at the
/// quadrature points (three per element).
#[derive(Deserialize, Serialize, Debug, Clone)]
#[serde(untagged)]
pub enum Coefficient {
    Constant(f64),
    Values(Vec<f64>),
}

impl Coefficient {
    fn resolve(&self, nq: usize, name: &str) -> CliResult<Vec<f64>> {
        match self {
            Coefficient::Constant(c) => Ok(vec![*c; nq]),
            Coefficient::Values(v) if v.len() == nq => Ok(v.clone()),
            Coefficient::Values(v) => Err(CliError::config(format!(
                "{name}: expected {nq} quadrature values, got {}",
                v.len()
            ))),
        }
    }
}

#[derive(Deserialize, Serialize, Debug, Clone)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum NonlinearityConfig {
    /// `Σ θ_j ζ^j` with `coefficients = [θ_1, …, θ_J]`.
    Polynomial {
        coefficients: Vec<f64>,
        #[serde(default)]
        q: Option<f64>,
    },
    /// `2 + tanh ζ`
    Tanh,
    /// Always rejected.
    Exp,
}

impl NonlinearityConfig {
    pub fn build(&self) -> crate::Result<Nonlinearity> {
        match self {
            NonlinearityConfig::Polynomial { coefficients, q } => Nonlinearity::polynomial(coefficients.clone(), *q),
            NonlinearityConfig::Tanh => Ok(Nonlinearity::tanh_shifted()),
            NonlinearityConfig::Exp => Nonlinearity::exponential(),
        }
    }
}

fn cubic() -> NonlinearityConfig {
    NonlinearityConfig::Polynomial { coefficients: vec![0.0, 0.0, 1.0], q: None }
}

/// Problem description shared by `solve`, `derivatives --problem pde1d` and
/// the FFI.
#[derive(Deserialize, Serialize, Debug, Clone)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub mesh_n: usize,
    #[serde(default = "dirichlet")]
    pub bc: BoundaryCondition,
    pub a: Coefficient,
    pub b: Coefficient,
    pub f: Coefficient,
    #[serde(default)]
    pub g: f64,
    pub nonlinearity: NonlinearityConfig,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output: Option<String>,
    #[serde(default)]
    pub report: Option<String>,
}

fn dirichlet() -> BoundaryCondition {
    BoundaryCondition::Dirichlet
}

fn default_tol() -> f64 {
    1e-12
}

impl ProblemConfig {
    /// Builds the oracle and the data, validating both.
    pub fn build(&self) -> crate::Result<(PdeOracle, PdeData)> {
        let mesh = Mesh1D::uniform(self.mesh_n, self.bc)?;
        let nq = mesh.num_quadrature_points();
        let resolve = |c: &Coefficient, name: &str| {
            c.resolve(nq, name).map_err(|e| Error::domain(e.message))
        };
        let data = PdeData {
            a: resolve(&self.a, "a")?,
            b: resolve(&self.b, "b")?,
            f: resolve(&self.f, "f")?,
            g: self.g,
        };
        data.validate(&mesh)?;
        let oracle = PdeOracle::new(mesh, self.nonlinearity.build()?)?;
        Ok((oracle, data))
    }
}

/// The JSON report written by `solve`.
#[derive(Serialize, Debug, Clone)]
pub struct SolveReport {
    pub iterations: usize,
    pub residual_norm: f64,
    pub constants: PdeConstants,
    pub bound_checks: SolveBoundChecks,
}

#[derive(Serialize, Debug, Clone)]
pub struct SolveBoundChecks {
    /// `‖u‖ ≤ 2 c_PF² c_A⁻¹ ‖d‖`
    pub a_priori: BoundCheck,
    /// Measured inverse-linearization norm against `c_PF² / c_A`.
    pub stability: BoundCheck,
}

/// Solves the configured problem from a zero initial guess and returns the
/// full nodal solution with its report.
pub fn solve_problem(cfg: &ProblemConfig) -> crate::Result<(Vec<f64>, Vec<f64>, SolveReport)> {
    let (oracle, data) = cfg.build()?;
    let zero = vec![0.0; oracle.mesh().num_free()];
    let sol = oracle.newton_solve(&data, &zero, cfg.tol)?;
    let constants = oracle.estimate_constants(&data, &sol.u, None)?;
    let stability = BoundCheck {
        lhs: constants.alpha_measured,
        rhs: constants.alpha_guaranteed,
        holds: constants.alpha_measured <= constants.alpha_guaranteed * (1.0 + 1e-9),
    };
    let report = SolveReport {
        iterations: sol.iterations,
        residual_norm: sol.residual_norm,
        constants,
        bound_checks: SolveBoundChecks { a_priori: sol.a_priori, stability },
    };
    let x = oracle.mesh().nodes().to_vec();
    let u = oracle.mesh().full_nodal(&sol.u);
    Ok((x, u, report))
}

fn solve(args: SolveArgs) -> CliResult<i32> {
    let cfg: ProblemConfig = read_config(&args.config)?;
    let (x, u, report) = solve_problem(&cfg)?;
    let mut csv = String::from("x,u\n");
    for (xi, ui) in x.iter().zip(&u) {
        let _ = writeln!(csv, "{},{}", num(*xi), num(*ui));
    }
    let json = serde_json::to_string_pretty(&report).map_err(|e| CliError::config(e.to_string()))? + "\n";
    write_output(output_path(args.output, cfg.output.clone()).as_deref(), &csv)?;
    match output_path(args.report, cfg.report) {
        Some(p) => write_output(Some(&p), &json)?,
        None => eprint!("{json}"),
    }
    let b = &report.bound_checks;
    Ok(if b.a_priori.holds && b.stability.holds { 0 } else { EXIT_VIOLATION })
}

#[derive(Deserialize, Debug)]
#[serde(untagged)]
enum DirectionSpec {
    Scalar(f64),
    Vector(Vec<f64>),
    Fields(FieldDirection),
}

#[derive(Deserialize, Debug)]
#[serde(deny_unknown_fields)]
struct FieldDirection {
    #[serde(default)]
    a: Option<Coefficient>,
    #[serde(default)]
    b: Option<Coefficient>,
    #[serde(default)]
    f: Option<Coefficient>,
    #[serde(default)]
    g: f64,
}

fn resolve_direction(given: &DirectionSpec, data_dim: usize) -> CliResult<Vec<f64>> {
    let v = match given {
        DirectionSpec::Scalar(x) => vec![*x],
        DirectionSpec::Vector(v) => v.clone(),
        DirectionSpec::Fields(fd) => {
            if data_dim < 4 {
                return Err(CliError::config("field directions only apply to pde1d"));
            }
            let nq = (data_dim - 1) / 3;
            let zero = Coefficient::Constant(0.0);
            let mut v = fd.a.as_ref().unwrap_or(&zero).resolve(nq, "a")?;
            v.extend(fd.b.as_ref().unwrap_or(&zero).resolve(nq, "b")?);
            v.extend(fd.f.as_ref().unwrap_or(&zero).resolve(nq, "f")?);
            v.push(fd.g);
            v
        }
    };
    if v.len() != data_dim {
        return Err(CliError::config(format!(
            "direction has length {}, data dimension is {data_dim}",
            v.len()
        )));
    }
    Ok(v)
}

fn derivatives(args: DerivativesArgs) -> CliResult<i32> {
    if args.order == 0 {
        return Err(CliError::config("--order must be at least 1"));
    }
    let specs: Option<Vec<DirectionSpec>> = args.directions.as_deref().map(read_config).transpose()?;
    let csv = match args.problem {
        ProblemKind::ScalarQuadratic | ProblemKind::ScalarCubic => {
            let oracle = if args.problem == ProblemKind::ScalarQuadratic {
                PolynomialOracle::scalar_quadratic()
            } else {
                PolynomialOracle::scalar_cubic()
            };
            let dirs = match &specs {
                Some(s) => s.iter().map(|d| resolve_direction(d, 1)).collect::<CliResult<_>>()?,
                None => vec![vec![1.0]],
            };
            let d = [args.point];
            derivatives_csv(&oracle, &d, &[0.0], dirs, &args, 1e-14)?
        }
        ProblemKind::Pde1d => {
            let path = args
                .config
                .as_deref()
                .ok_or_else(|| CliError::config("--problem pde1d needs --config"))?;
            let cfg: ProblemConfig = read_config(path)?;
            let (oracle, data) = cfg.build()?;
            let dim = oracle.data_dim();
            let dirs = match &specs {
                Some(s) => s.iter().map(|d| resolve_direction(d, dim)).collect::<CliResult<_>>()?,
                None => {
                    let nq = oracle.mesh().num_quadrature_points();
                    let mut h = vec![0.0; dim];
                    h[2 * nq..3 * nq].iter_mut().for_each(|v| *v = 1.0);
                    vec![h]
                }
            };
            let zero = vec![0.0; oracle.state_dim()];
            derivatives_csv(&oracle, &data.to_vector(), &zero, dirs, &args, cfg.tol)?
        }
    };
    write_output(args.output.as_deref(), &csv)?;
    Ok(0)
}

fn derivatives_csv<O: ResidualOracle>(
    oracle: &O,
    d: &[f64],
    u0: &[f64],
    dirs: Vec<Vec<f64>>,
    args: &DerivativesArgs,
    tol: f64,
) -> CliResult<String> {
    if dirs.is_empty() {
        return Err(CliError::config("need at least one direction"));
    }
    let table = derivative_table(oracle, d, u0, dirs, args.order, NewtonOptions::with_tol(tol))?;
    let base = table.solution.clone();
    let map = |x: &[f64]| solve_residual(oracle, x, &base, NewtonOptions::with_tol(tol)).map(|s| s.state);
    let steps = richardson_steps(args.fd_step, 3);
    let mut csv = String::from("key,norm,fd_norm,fd_error_indicator\n");
    for (key, value) in table.iter() {
        let label = if key.is_empty() { "0".to_string() } else { direction_label(key) };
        let norm = oracle.state_norm(value);
        if args.fd_check && !key.is_empty() && key.len() <= 4 {
            let hs: Vec<&[f64]> = key.iter().map(|&i| table.directions[i].as_slice()).collect();
            let fd = finite_difference_check(map, d, &hs, &steps)?;
            let _ = writeln!(
                csv,
                "{label},{},{},{}",
                num(norm),
                num(oracle.state_norm(&fd.estimate)),
                num(oracle.state_norm(&fd.indicator))
            );
        } else {
            let _ = writeln!(csv, "{label},{},,", num(norm));
        }
    }
    Ok(csv)
}

/// Config of `verify-bounds`.
#[derive(Deserialize, Serialize, Debug, Clone)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    #[serde(default = "default_mesh_n")]
    pub mesh_n: usize,
    pub p: usize,
    #[serde(default = "default_c")]
    pub c: f64,
    #[serde(default = "default_vartheta")]
    pub vartheta: f64,
    #[serde(default = "cubic")]
    pub nonlinearity: NonlinearityConfig,
    #[serde(default = "default_max_order")]
    pub max_order: u32,
    #[serde(default = "default_samples")]
    pub y_samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "dirichlet")]
    pub bc: BoundaryCondition,
    /// Reference coefficients on the unit interval.
    #[serde(default = "const_one")]
    pub a: Coefficient,
    #[serde(default = "const_one")]
    pub b: Coefficient,
    #[serde(default = "const_one")]
    pub f: Coefficient,
    #[serde(default)]
    pub g: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Multiplies the envelope scale; values below 1 deliberately shrink the
    /// bound (a negative control).
    #[serde(default = "one")]
    pub scale_multiplier: f64,
    #[serde(default)]
    pub output: Option<String>,
}

fn default_mesh_n() -> usize {
    256
}
fn default_c() -> f64 {
    0.5
}
fn default_vartheta() -> f64 {
    2.0
}
fn default_max_order() -> u32 {
    4
}
fn default_samples() -> usize {
    5
}
fn const_one() -> Coefficient {
    Coefficient::Constant(1.0)
}

/// Result of a `verify-bounds` run.
#[derive(Serialize, Debug, Clone)]
pub struct VerifyOutcome {
    pub csv: String,
    pub passed: bool,
    pub rows: usize,
    pub max_ratio: f64,
    pub scale: f64,
    pub rate: f64,
}

/// Draws `y_samples` parameters uniformly in `[−1/2, 1/2]^p` with ChaCha8
/// seeded by `seed`, tabulates `∂^α û` up to `max_order` and compares with
/// the composed envelope.
pub fn run_verify(cfg: &VerifyConfig) -> crate::Result<VerifyOutcome> {
    if cfg.y_samples == 0 {
        return Err(Error::domain("y_samples must be positive"));
    }
    if !(cfg.scale_multiplier > 0.0) {
        return Err(Error::domain("scale_multiplier must be positive"));
    }
    let mesh = Mesh1D::uniform(cfg.mesh_n, cfg.bc)?;
    let nq = mesh.num_quadrature_points();
    let resolve = |c: &Coefficient, name: &str| c.resolve(nq, name).map_err(|e| Error::domain(e.message));
    let hat = PdeData { a: resolve(&cfg.a, "a")?, b: resolve(&cfg.b, "b")?, f: resolve(&cfg.f, "f")?, g: cfg.g };
    let map = DomainMap1D::new(cfg.p, cfg.c, cfg.vartheta)?;
    let problem = ParametricProblem::new(map, hat, mesh, cfg.nonlinearity.build()?)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut samples = Vec::with_capacity(cfg.y_samples);
    for id in 0..cfg.y_samples {
        let y: Vec<f64> = (0..cfg.p).map(|_| rng.gen_range(-0.5..=0.5)).collect();
        samples.push(problem.sample(id, &y, cfg.max_order, cfg.tol)?);
    }
    let mut env = problem.composed_envelope(&samples)?;
    env.base.scale *= cfg.scale_multiplier;
    let report = verify_parametric_bounds(&problem.oracle, &samples, &env);
    let mut csv = String::from("alpha,y_id,measured_norm,bound,ratio\n");
    for r in &report.rows {
        let _ = writeln!(csv, "{},{},{},{},{}", r.alpha, r.y_id, num(r.measured_norm), num(r.bound), num(r.ratio));
    }
    let max_ratio = report.rows.iter().fold(0.0_f64, |m, r| m.max(r.ratio));
    Ok(VerifyOutcome {
        csv,
        passed: report.passed,
        rows: report.rows.len(),
        max_ratio,
        scale: env.base.scale,
        rate: env.base.rate,
    })
}

fn verify_bounds(args: VerifyArgs) -> CliResult<i32> {
    let cfg: VerifyConfig = read_config(&args.config)?;
    let out = run_verify(&cfg)?;
    write_output(output_path(args.output, cfg.output.clone()).as_deref(), &out.csv)?;
    eprintln!(
        "verify-bounds: {} rows, envelope scale {:e} rate {:e}, max ratio {:e}: {}",
        out.rows,
        out.scale,
        out.rate,
        out.max_ratio,
        if out.passed { "PASS" } else { "FAIL" }
    );
    Ok(if out.passed { 0 } else { EXIT_VIOLATION })
}

fn run_selftest(args: SelftestArgs) -> CliResult<i32> {
    let results = selftest::run(args.filter.as_deref());
    let mut failed = 0;
    for r in &results {
        println!("{} {} ({:.2}s){}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.seconds,
            if r.detail.is_empty() { String::new() } else { format!(": {}", r.detail) });
        if !r.passed {
            failed += 1;
        }
    }
    println!("{} checks, {failed} failed", results.len());
    Ok(if failed == 0 { 0 } else { EXIT_VIOLATION })
}
