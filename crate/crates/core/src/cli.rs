//! Command-line driver. Every subcommand writes one structured report (see
//! [`crate::report`]) to `--out` or standard output.
//!
//! Exit codes: 0 success, 1 numerical failure or a failed verdict, 2 invalid
//! input, 64 usage error.

use std::ffi::OsString;
use std::io::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::curvature::{
    gram_field, profile_curvature, trace_form_and_degree, CurvatureOptions, FieldBackend, FieldModel, Provenance,
};
use crate::error::{FqheError, Result};
use crate::geometry::{quasi_periodicity_defect, LineBundleSpec};
use crate::gram::GramMatrix;
use crate::integration::{GridSpec, Integrator, DEFAULT_GRID_CAP};
use crate::laughlin::{
    hr_gram, manybody_inner, one_particle_gram, one_particle_norm_sq_closed, slater_norm_closed, OneLayerModel,
    OneLayerState,
};
use crate::report::{fmt_complex, fmt_real, parse_complex, Report};
use crate::theta::{
    plan_theta1d, plan_theta_g, theta1d, theta1d_partial, theta_g, theta_g_partial, Characteristics1D, PeriodMatrix,
    Tolerance, TorusParams,
};
use crate::verify::{run_criterion, CRITERIA};
use crate::wen::{enumerate_pi, kappa_closed, validate_wen, CenterMassModel, KvwModel, LayeredPoint, WenDatum};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NUMERICAL: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

/// Environment variable holding the worker-thread count.
pub const THREADS_ENV: &str = "FQHE_THREADS";

#[derive(Debug, Parser)]
#[command(name = "fqhe", version, about = "Torus FQHE wave functions, Gram matrices and curvature", args_override_self = true)]
pub struct Cli {
    /// TOML experiment file; its keys are flag names, and flags on the
    /// command line win on conflict.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate θ[a,b](z|τ) or Θ[a⃗,b⃗](z⃗|τK) with its truncation certificate.
    Theta(ThetaArgs),
    /// One-particle Gram matrix of H⁰(L_{k,ξ}) by grid quadrature.
    Gram(GramArgs),
    /// Many-body norms: Slater, theta-product or Haldane–Rezayi states.
    Norm(NormArgs),
    /// Validate a Wen datum (K, n⃗) and list Π.
    WenValidate(WenArgs),
    /// Keski-Vakkuri–Wen Gram matrix on the slice ζ⃗ = ξe⃗.
    Kvw(KvwArgs),
    /// Centre-of-mass Gram matrix and its closed form.
    CenterGram(CenterArgs),
    /// Curvature, trace form and degree of a Gram field.
    Curvature(CurvatureArgs),
    /// Run the acceptance criteria.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct TorusArgs {
    /// Modular parameter, written x+yi.
    #[arg(long, default_value = "0+1i")]
    pub tau: String,
}

impl TorusArgs {
    fn torus(&self) -> Result<TorusParams> {
        TorusParams::new(parse_complex(&self.tau)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendArg {
    Grid,
    Qmc,
}

#[derive(Debug, Args)]
pub struct IntegrationArgs {
    #[arg(long, value_enum, default_value = "grid")]
    pub backend: BackendArg,
    /// Points per axis for the grid backend.
    #[arg(long, default_value_t = 16)]
    pub grid: usize,
    /// Largest allowed number of grid evaluations.
    #[arg(long, default_value_t = DEFAULT_GRID_CAP)]
    pub grid_cap: f64,
    /// Points per replicate for the QMC backend.
    #[arg(long, default_value_t = 65536)]
    pub samples: usize,
    /// Seed of the random digital shifts (required for QMC).
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 16)]
    pub replicates: usize,
    /// Peak-relative truncation tolerance for theta series.
    #[arg(long, default_value_t = crate::laughlin::DEFAULT_REL_TOL)]
    pub rel_tol: f64,
}

impl IntegrationArgs {
    fn integrator(&self) -> Result<Integrator> {
        match self.backend {
            BackendArg::Grid => Ok(Integrator::Grid { points_per_axis: self.grid, cap: self.grid_cap }),
            BackendArg::Qmc => {
                let seed = self.seed.ok_or_else(|| FqheError::InvalidInput("the qmc backend needs --seed".into()))?;
                Ok(Integrator::qmc(self.samples, seed, self.replicates))
            }
        }
    }

    fn echo(&self, r: &mut Report) {
        r.text("backend", format!("{:?}", self.backend).to_lowercase());
        match self.backend {
            BackendArg::Grid => r.text("grid", self.grid),
            BackendArg::Qmc => r.text("samples", self.samples).text("replicates", self.replicates).text("seed", self.seed.unwrap_or(0)),
        };
        r.real("rel_tol", self.rel_tol);
    }
}

#[derive(Debug, Args)]
pub struct ThetaArgs {
    #[command(flatten)]
    pub torus: TorusArgs,
    /// Characteristic a (space-separated list for g > 1).
    #[arg(long, default_value = "0")]
    pub a: String,
    #[arg(long, default_value = "0")]
    pub b: String,
    /// Argument z (space-separated complex list for g > 1).
    #[arg(long, default_value = "0")]
    pub z: String,
    /// Integer matrix K with Ω = τK, rows separated by ';' (default identity).
    #[arg(long = "K")]
    pub k_matrix: Option<String>,
    #[arg(long, default_value_t = 1e-13)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct GramArgs {
    #[command(flatten)]
    pub torus: TorusArgs,
    /// Degree k of the line bundle.
    #[arg(long)]
    pub k: i64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub xi_a: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub xi_b: f64,
    #[arg(long, default_value_t = 64)]
    pub grid: usize,
    /// Allowed entrywise deviation from the closed form.
    #[arg(long, default_value_t = 1e-9)]
    pub check_tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StateArg {
    Slater,
    Fay,
    Hr,
}

#[derive(Debug, Args)]
pub struct NormArgs {
    #[command(flatten)]
    pub torus: TorusArgs,
    #[arg(long, default_value_t = 1)]
    pub m: usize,
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    #[arg(long, value_enum, default_value = "slater")]
    pub state: StateArg,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub xi_a: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub xi_b: f64,
    #[command(flatten)]
    pub integration: IntegrationArgs,
    /// Relative tolerance for grid comparisons with closed forms.
    #[arg(long, default_value_t = 1e-6)]
    pub check_tol: f64,
}

#[derive(Debug, Args)]
pub struct WenArgs {
    /// Rows separated by ';', entries by spaces, e.g. "2 1; 1 2".
    #[arg(long = "K")]
    pub k_matrix: String,
    /// Particle counts per layer, e.g. "1 1".
    #[arg(long)]
    pub n: String,
}

#[derive(Debug, Args)]
pub struct KvwArgs {
    #[command(flatten)]
    pub torus: TorusArgs,
    #[command(flatten)]
    pub wen: WenArgs,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub xi_a: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub xi_b: f64,
    #[command(flatten)]
    pub integration: IntegrationArgs,
    /// Seed for the random point used in pointwise checks.
    #[arg(long, default_value_t = 1)]
    pub point_seed: u64,
    /// Allowed scalar residual of the Gram matrix for the grid backend.
    #[arg(long, default_value_t = 1e-8)]
    pub check_tol: f64,
}

#[derive(Debug, Args)]
pub struct CenterArgs {
    #[command(flatten)]
    pub torus: TorusArgs,
    #[arg(long = "K")]
    pub k_matrix: String,
    /// a⃗ in ξ⃗ = τa⃗ + b⃗ (default zero).
    #[arg(long, allow_negative_numbers = true)]
    pub xi_a: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub xi_b: Option<String>,
    #[arg(long, default_value_t = 32)]
    pub grid: usize,
    #[arg(long, default_value_t = crate::laughlin::DEFAULT_REL_TOL)]
    pub rel_tol: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub check_tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FieldModelArg {
    OneParticle,
    OneLayer,
    Multilayer,
    CenterMass,
    Profile,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FieldBackendArg {
    Closed,
    Integrated,
}

#[derive(Debug, Args)]
pub struct CurvatureArgs {
    #[command(flatten)]
    pub torus: TorusArgs,
    #[arg(long, value_enum, default_value = "multilayer")]
    pub field_model: FieldModelArg,
    /// Degree for the one-particle model.
    #[arg(long, default_value_t = 1)]
    pub k: i64,
    #[arg(long, default_value_t = 1)]
    pub m: usize,
    /// Particle count(s); a list for the multilayer model.
    #[arg(long, default_value = "1")]
    pub n: String,
    #[arg(long = "K")]
    pub k_matrix: Option<String>,
    /// Exponent α of the synthetic profile e^{αa²}.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1)]
    pub rank: usize,
    #[arg(long, value_enum, default_value = "closed")]
    pub field_backend: FieldBackendArg,
    /// Field points along a.
    #[arg(long, default_value_t = 64)]
    pub field_grid: usize,
    /// Field points along b (default: same as along a).
    #[arg(long)]
    pub field_grid_b: Option<usize>,
    #[arg(long, default_value_t = crate::curvature::DEFAULT_ORDER)]
    pub order: usize,
    #[arg(long, default_value_t = crate::curvature::DEFAULT_RICHARDSON_TOL)]
    pub richardson_tol: f64,
    /// Sample only a ∈ [0,1] and use one-sided stencils at the seam.
    #[arg(long)]
    pub no_halo: bool,
    /// Use the a²-profile fit instead of finite differences.
    #[arg(long)]
    pub fit: bool,
    #[command(flatten)]
    pub integration: IntegrationArgs,
    /// Allowed distance of the degree from its predicted value.
    #[arg(long, default_value_t = 1e-6)]
    pub check_tol: f64,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Run only these criteria (default: all).
    #[arg(long, value_delimiter = ',')]
    pub criterion: Vec<u8>,
}

/// Parses `"2 1; 1 2"` into integer rows.
pub fn parse_int_matrix(s: &str) -> Result<Vec<Vec<i64>>> {
    s.split(';')
        .map(parse_list::<i64>)
        .collect::<Result<Vec<_>>>()
        .and_then(|rows| if rows.iter().any(Vec::is_empty) { Err(FqheError::InvalidInput(format!("empty row in matrix {s:?}"))) } else { Ok(rows) })
}

pub fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>> {
    s.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<T>().map_err(|_| FqheError::InvalidInput(format!("cannot parse {t:?} in {s:?}"))))
        .collect()
}

fn parse_complex_list(s: &str) -> Result<Vec<Complex64>> {
    s.split(|c: char| c.is_whitespace() || c == ',').filter(|t| !t.is_empty()).map(parse_complex).collect()
}

fn fmt_matrix_rows(k: &[Vec<i64>]) -> String {
    k.iter().map(|r| r.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")).collect::<Vec<_>>().join("; ")
}

// ---------------------------------------------------------------------------
// Config files

/// Maps an experiment-selector name to its subcommand.
fn selector_to_command(model: &str) -> Option<(&'static str, Option<&'static str>)> {
    Some(match model {
        "one_particle" | "gram" => ("gram", None),
        "laughlin" => ("norm", Some("hr")),
        "slater" | "norm" => ("norm", Some("slater")),
        "wen" | "kvw" => ("kvw", None),
        "wen_validate" | "wen-validate" => ("wen-validate", None),
        "center_mass" | "center-gram" => ("center-gram", None),
        "curvature" => ("curvature", None),
        "theta" => ("theta", None),
        "verify" => ("verify", None),
        _ => return None,
    })
}

const SUBCOMMANDS: [&str; 8] = ["theta", "gram", "norm", "wen-validate", "kvw", "center-gram", "curvature", "verify"];

fn toml_to_flag_value(v: &toml::Value) -> Option<String> {
    match v {
        toml::Value::String(s) => Some(s.clone()),
        toml::Value::Integer(i) => Some(i.to_string()),
        toml::Value::Float(f) => Some(fmt_real(*f)),
        toml::Value::Boolean(_) => None,
        toml::Value::Array(items) => {
            if items.iter().all(|x| x.is_array()) {
                Some(items.iter().filter_map(toml_to_flag_value).collect::<Vec<_>>().join("; "))
            } else {
                Some(items.iter().filter_map(toml_to_flag_value).collect::<Vec<_>>().join(" "))
            }
        }
        _ => None,
    }
}

fn flatten_config(table: &toml::Table, out: &mut Vec<(String, toml::Value)>) {
    for (k, v) in table {
        match v {
            toml::Value::Table(t) => {
                // `[output] path = ...` is the report destination.
                if k == "output" {
                    if let Some(p) = t.get("path") {
                        out.push(("out".into(), p.clone()));
                    }
                    continue;
                }
                // `[torus] re = .., im = ..` is τ.
                if k == "torus" && (t.contains_key("re") || t.contains_key("im")) {
                    let part = |key: &str| t.get(key).and_then(|v| v.as_float().or_else(|| v.as_integer().map(|i| i as f64))).unwrap_or(0.0);
                    let tau = Complex64::new(part("re"), part("im"));
                    out.push(("tau".into(), toml::Value::String(fmt_complex(tau))));
                    continue;
                }
                flatten_config(t, out);
            }
            _ => out.push((k.clone(), v.clone())),
        }
    }
}

/// Expands `--config FILE` into flags placed before the command-line flags,
/// so that explicit flags win.
pub fn expand_config(argv: &[OsString]) -> std::result::Result<Vec<OsString>, String> {
    let args: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let mut path = None;
    for (i, a) in args.iter().enumerate() {
        if a == "--config" {
            path = args.get(i + 1).cloned();
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        }
    }
    let Some(path) = path else { return Ok(argv.to_vec()) };
    let text = std::fs::read_to_string(&path).map_err(|e| format!("cannot read config {path}: {e}"))?;
    let table: toml::Table = text.parse().map_err(|e| format!("malformed config {path}: {e}"))?;
    let mut entries = Vec::new();
    flatten_config(&table, &mut entries);

    let explicit = args.iter().skip(1).position(|a| SUBCOMMANDS.contains(&a.as_str())).map(|p| p + 1);
    let mut preset_state = None;
    let command = match explicit {
        Some(p) => args[p].clone(),
        None => {
            let selector = entries
                .iter()
                .find(|(k, _)| k == "command" || k == "model")
                .and_then(|(_, v)| v.as_str().map(str::to_string))
                .ok_or_else(|| "config names no command (set `command` or `model`)".to_string())?;
            let (cmd, state) = selector_to_command(&selector).ok_or_else(|| format!("unknown model selector {selector:?}"))?;
            preset_state = state;
            cmd.to_string()
        }
    };

    let mut out: Vec<OsString> = vec![argv[0].clone(), command.clone().into()];
    if let Some(s) = preset_state {
        out.push("--state".into());
        out.push(s.into());
    }
    for (k, v) in &entries {
        if k == "command" || k == "model" {
            continue;
        }
        let name = match k.as_str() {
            "K" => "K".to_string(),
            "n_vec" => "n".to_string(),
            "N" => "grid".to_string(),
            "tolerance" => "rel-tol".to_string(),
            _ => k.replace('_', "-"),
        };
        let flag = format!("--{name}");
        match v {
            toml::Value::Boolean(true) => out.push(flag.into()),
            toml::Value::Boolean(false) => {}
            _ => {
                let value = toml_to_flag_value(v).ok_or_else(|| format!("unsupported value for {k} in config"))?;
                out.push(flag.into());
                out.push(value.into());
            }
        }
    }
    for (i, a) in argv.iter().enumerate().skip(1) {
        if Some(i) != explicit {
            out.push(a.clone());
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Entry point

fn configure_threads() -> std::result::Result<(), String> {
    let Ok(v) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let n: usize = v.trim().parse().map_err(|_| format!("{THREADS_ENV} must be a positive integer, got {v:?}"))?;
    if n == 0 {
        return Err(format!("{THREADS_ENV} must be positive"));
    }
    // A second call in the same process keeps the first pool.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn exit_code(e: &FqheError) -> i32 {
    if e.is_validation() {
        EXIT_VALIDATION
    } else {
        EXIT_NUMERICAL
    }
}

/// Runs the CLI on `argv` (including the program name) and returns the exit
/// code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let argv = match expand_config(&argv) {
        Ok(a) => a,
        Err(msg) => {
            eprintln!("error: {msg}");
            return EXIT_USAGE;
        }
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = e.print();
                    EXIT_OK
                }
                _ => {
                    let _ = e.print();
                    EXIT_USAGE
                }
            };
        }
    };
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return EXIT_USAGE;
    }
    let start = Instant::now();
    let report = match dispatch(&cli.command) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    let text = report.render(start.elapsed());
    let written = match &cli.out {
        Some(path) => std::fs::write(path, &text),
        None => std::io::stdout().write_all(text.as_bytes()),
    };
    if let Err(e) = written {
        eprintln!("error: cannot write report: {e}");
        return EXIT_NUMERICAL;
    }
    if report.passed() {
        EXIT_OK
    } else {
        EXIT_NUMERICAL
    }
}

fn dispatch(cmd: &Command) -> Result<Report> {
    match cmd {
        Command::Theta(a) => cmd_theta(a),
        Command::Gram(a) => cmd_gram(a),
        Command::Norm(a) => cmd_norm(a),
        Command::WenValidate(a) => cmd_wen_validate(a),
        Command::Kvw(a) => cmd_kvw(a),
        Command::CenterGram(a) => cmd_center(a),
        Command::Curvature(a) => cmd_curvature(a),
        Command::Verify(a) => Ok(cmd_verify(a)),
    }
}

// ---------------------------------------------------------------------------
// Subcommands

fn cmd_theta(args: &ThetaArgs) -> Result<Report> {
    let torus = args.torus.torus()?;
    let tau = torus.tau();
    let tol = Tolerance::new(args.tol)?;
    let a: Vec<f64> = parse_list(&args.a)?;
    let b: Vec<f64> = parse_list(&args.b)?;
    let z = parse_complex_list(&args.z)?;
    let g = a.len();
    if g == 0 || b.len() != g || z.len() != g {
        return Err(FqheError::InvalidInput(format!("a, b and z need equal lengths, got {}, {}, {}", g, b.len(), z.len())));
    }
    let mut r = Report::new("theta");
    r.section("inputs").complex("tau", tau).reals("a", &a).reals("b", &b);
    r.text("z", z.iter().map(|v| fmt_complex(*v)).collect::<Vec<_>>().join(" ")).real("tol", args.tol);
    let i = Complex64::i();
    let pi = std::f64::consts::PI;
    if g == 1 && args.k_matrix.is_none() {
        let ch = Characteristics1D::new(a[0], b[0]);
        let value = theta1d(ch, z[0], tau, tol)?;
        let plan = plan_theta1d(ch, z[0], tau, tol)?;
        let cert = (theta1d_partial(ch, z[0], tau, plan.radius)? - theta1d_partial(ch, z[0], tau, plan.radius + 3)?).norm();
        let f1 = (2.0 * i * pi * a[0]).exp();
        let ft = (-2.0 * i * pi * (z[0] + b[0]) - i * pi * tau).exp();
        let qp1 = (theta1d(ch, z[0] + 1.0, tau, tol)? - f1 * value).norm();
        let qpt = (theta1d(ch, z[0] + tau, tau, tol)? - ft * value).norm();
        r.section("results").complex("value", value).text("radius", plan.radius).text("terms", 2 * plan.radius + 1).real("envelope_peak", plan.peak);
        r.real("certificate_gap", cert).real("residual_shift_1", qp1).real("residual_shift_tau", qpt);
        r.verdict("certificate", cert <= args.tol, format!("|S_N - S_(N+3)| = {cert:.3e}"));
        r.verdict("quasi_periodicity", qp1 <= 10.0 * args.tol && qpt <= 10.0 * args.tol * (1.0 + ft.norm()), format!("{qp1:.2e}, {qpt:.2e}"));
    } else {
        let k = match &args.k_matrix {
            Some(s) => parse_int_matrix(s)?,
            None => (0..g).map(|p| (0..g).map(|q| i64::from(p == q)).collect()).collect(),
        };
        if k.len() != g || k.iter().any(|row| row.len() != g) {
            return Err(FqheError::InvalidInput(format!("K must be {g}×{g}")));
        }
        let kf = DMatrix::from_fn(g, g, |p, q| k[p][q] as f64);
        let omega = PeriodMatrix::scaled(tau, &kf)?;
        let value = theta_g(&a, &b, &z, &omega, tol)?;
        let plan = plan_theta_g(&a, &z, &omega, tol)?;
        let cert = (theta_g_partial(&a, &b, &z, &omega, plan.radius)? - theta_g_partial(&a, &b, &z, &omega, plan.radius + 3)?).norm();
        let mut z1 = z.clone();
        z1[0] += 1.0;
        let qp1 = (theta_g(&a, &b, &z1, &omega, tol)? - (2.0 * i * pi * a[0]).exp() * value).norm();
        r.text("K", fmt_matrix_rows(&k));
        r.section("results").complex("value", value).text("radius", plan.radius).real("envelope_peak", plan.peak);
        r.real("min_eig_im_omega", omega.min_eig()).real("certificate_gap", cert).real("residual_shift_e1", qp1);
        r.verdict("certificate", cert <= args.tol, format!("|S_N - S_(N+3)| = {cert:.3e}"));
        r.verdict("quasi_periodicity", qp1 <= 10.0 * args.tol, format!("{qp1:.2e}"));
    }
    Ok(r)
}

fn gram_block(r: &mut Report, g: &GramMatrix) {
    r.matrix("gram", &g.matrix).real_matrix("entry_errors", &g.entry_errors);
    r.real("error_estimate", g.error_estimate).text("evaluations", g.evaluations).text("integration_backend", g.backend.name());
    r.real("off_diagonal_max", g.off_diagonal_max()).real("diagonal_mean", g.diagonal_mean()).real("scalar_residual", g.scalar_residual());
}

fn cmd_gram(args: &GramArgs) -> Result<Report> {
    let torus = args.torus.torus()?;
    let spec = LineBundleSpec::new(args.k, args.xi_a, args.xi_b);
    let g = one_particle_gram(&spec, &torus, GridSpec::new(args.grid, 2)?, crate::laughlin::DEFAULT_REL_TOL)?;
    let closed = one_particle_norm_sq_closed(args.k, torus.t(), args.xi_a);
    let dev = g.max_deviation_from_scalar(closed);
    let mut r = Report::new("gram");
    r.section("inputs").complex("tau", torus.tau()).text("k", args.k).real("xi_a", args.xi_a).real("xi_b", args.xi_b).text("grid", args.grid);
    r.section("results");
    gram_block(&mut r, &g);
    r.section("closed_form").real("diagonal", closed).real("max_deviation", dev);
    r.verdict("orthonormality", dev <= args.check_tol, format!("max |C - κI| = {dev:.3e}, limit {:.1e}", args.check_tol));
    Ok(r)
}

fn cmd_norm(args: &NormArgs) -> Result<Report> {
    let torus = args.torus.torus()?;
    let t = torus.t();
    let integrator = args.integration.integrator()?;
    let model = OneLayerModel::new(args.m, args.n, torus, args.xi_a, args.xi_b)?;
    let mut r = Report::new("norm");
    r.section("inputs").complex("tau", torus.tau()).text("m", args.m).text("n", args.n);
    r.text("state", format!("{:?}", args.state).to_lowercase()).real("xi_a", args.xi_a).real("xi_b", args.xi_b);
    args.integration.echo(&mut r);
    r.text("bundle", if model.spec.sharp { "sharp" } else { "plain" });
    let qmc = matches!(integrator, Integrator::Qmc { .. });
    match args.state {
        StateArg::Slater | StateArg::Fay => {
            let state = if args.state == StateArg::Slater { OneLayerState::Slater } else { OneLayerState::Fay };
            let res = manybody_inner(&model, state, state, &integrator, args.integration.rel_tol)?;
            let norm = res.value.re.sqrt();
            r.section("results").real("norm_squared", res.value.re).real("norm", norm).real("error_estimate", res.error_estimate);
            r.text("evaluations", res.evaluations).text("integration_backend", res.backend.name());
            if args.state == StateArg::Slater {
                let closed = slater_norm_closed(args.n, t, args.xi_a);
                r.section("closed_form").real("norm", closed).real("relative_error", (norm - closed).abs() / closed);
                if qmc {
                    let z = (res.value.re - closed * closed).abs() / res.error_estimate;
                    r.verdict("slater_norm", z <= 3.0, format!("{z:.2} standard errors from (1/2nt)^(n/2) e^(2πta²)"));
                } else {
                    let rel = (norm - closed).abs() / closed;
                    r.verdict("slater_norm", rel <= args.check_tol, format!("relative error {rel:.2e}"));
                }
            }
        }
        StateArg::Hr => {
            let g = hr_gram(&model, &integrator, args.integration.rel_tol)?;
            r.section("results");
            gram_block(&mut r, &g);
            let profile = (2.0 * std::f64::consts::PI * t * args.xi_a * args.xi_a / args.m as f64).exp();
            r.real("profile_factor", profile).real("gamma", g.diagonal_mean() / profile);
            add_orthogonality_verdicts(&mut r, &g, qmc, args.check_tol);
        }
    }
    Ok(r)
}

/// Grid: scalar residual within `tol`. QMC: every off-diagonal entry and
/// diagonal difference within 4 standard errors.
fn add_orthogonality_verdicts(r: &mut Report, g: &GramMatrix, qmc: bool, tol: f64) {
    if qmc {
        let n = g.size();
        let (mut off, mut spread): (f64, f64) = (0.0, 0.0);
        for p in 0..n {
            for q in 0..n {
                if p != q {
                    off = off.max(g.matrix[(p, q)].norm() / g.entry_errors[(p, q)]);
                    let se = (g.entry_errors[(p, p)].powi(2) + g.entry_errors[(q, q)].powi(2)).sqrt();
                    spread = spread.max((g.matrix[(p, p)].re - g.matrix[(q, q)].re).abs() / se);
                }
            }
        }
        r.verdict("orthogonality", off <= 4.0, format!("largest off-diagonal {off:.2} standard errors"));
        r.verdict("degeneracy", spread <= 4.0, format!("largest diagonal difference {spread:.2} standard errors"));
    } else {
        let res = g.scalar_residual();
        r.verdict("scalar", res <= tol, format!("scalar residual {res:.2e}, limit {tol:.1e}"));
    }
}

fn datum_block(r: &mut Report, w: &WenDatum) {
    r.text("K", fmt_matrix_rows(&w.k)).text("n", w.n_vec.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" "));
    r.section("datum").text("d", w.d).text("delta", w.delta).text("n_total", w.n_total);
    r.text("u", w.u.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" "));
    r.text("epsilon_K", w.epsilon_k).text("cyclic", w.cyclic).text("n_delta_over_d", w.n_delta_over_d());
    r.text("invariant_factors", w.invariant_factors.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" "));
    r.text("particle_bundle", if w.automorphy_sign() < 0 { "sharp" } else { "plain" });
    r.text("slope_magnitude", format!("{}/{}", w.n_total, w.d));
    let pi: Vec<String> = enumerate_pi(w).iter().map(|c| c.rationals().iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")).collect();
    r.text("pi", pi.join("; "));
}

fn parse_datum(args: &WenArgs) -> Result<WenDatum> {
    Ok(validate_wen(&parse_int_matrix(&args.k_matrix)?, &parse_list::<i64>(&args.n)?)?)
}

fn cmd_wen_validate(args: &WenArgs) -> Result<Report> {
    let w = parse_datum(args)?;
    let mut r = Report::new("wen-validate");
    r.section("inputs");
    datum_block(&mut r, &w);
    r.verdict("valid", true, "all invariants hold");
    Ok(r)
}

fn cmd_kvw(args: &KvwArgs) -> Result<Report> {
    let torus = args.torus.torus()?;
    let w = parse_datum(&args.wen)?;
    let integrator = args.integration.integrator()?;
    let kvw = KvwModel::new(w.clone(), torus)?;
    let frame = enumerate_pi(&w);
    let mut r = Report::new("kvw");
    r.section("inputs").complex("tau", torus.tau()).real("xi_a", args.xi_a).real("xi_b", args.xi_b);
    args.integration.echo(&mut r);
    datum_block(&mut r, &w);

    // Pointwise values and per-particle automorphy at a random point.
    let xi = args.xi_a * torus.tau() + args.xi_b;
    let zeta = vec![xi; w.g()];
    let mut rng = ChaCha8Rng::seed_from_u64(args.point_seed);
    let v: Vec<f64> = (0..2 * w.n_total).map(|_| rng.random::<f64>()).collect();
    let point = LayeredPoint::from_interleaved(&v, &w.n_vec, &torus)?;
    let spec = LineBundleSpec { k: w.d, a: args.xi_a, b: args.xi_b, sharp: w.automorphy_sign() < 0 };
    let mut values = Vec::new();
    let mut defect: f64 = 0.0;
    // A separate stream, so no sample lands on a particle of the base point.
    let sample_seed = args.point_seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(1);
    for c in &frame {
        values.push(fmt_complex(kvw.wavefunction(&zeta, c, &point, args.integration.rel_tol)?));
        for layer in 0..w.g() {
            let f = |z: Complex64| {
                let mut zs = point.z.clone();
                zs[layer][0] = z;
                kvw.wavefunction(&zeta, c, &LayeredPoint::from_z(zs, &torus), args.integration.rel_tol)
            };
            defect = defect.max(quasi_periodicity_defect(f, &spec, &torus, 4, sample_seed)?);
        }
    }
    r.section("pointwise").text("point", v.iter().map(|x| fmt_real(*x)).collect::<Vec<_>>().join(" ")).text("values", values.join(" "));
    r.real("automorphy_defect", defect);
    r.verdict("automorphy", defect <= 1e-9, format!("per-particle law of the {} bundle, defect {defect:.2e}", if spec.sharp { "sharp" } else { "plain" }));

    let g = kvw.gram(args.xi_a, args.xi_b, &frame, &integrator, args.integration.rel_tol)?;
    r.section("results");
    gram_block(&mut r, &g);
    let profile = (2.0 * std::f64::consts::PI * w.n_over_d() * torus.t() * args.xi_a * args.xi_a).exp();
    r.real("profile_factor", profile).real("gamma", g.diagonal_mean() / profile);
    add_orthogonality_verdicts(&mut r, &g, matches!(integrator, Integrator::Qmc { .. }), args.check_tol);
    Ok(r)
}

fn cmd_center(args: &CenterArgs) -> Result<Report> {
    let torus = args.torus.torus()?;
    let k = parse_int_matrix(&args.k_matrix)?;
    let g = k.len();
    let vec_or_zero = |s: &Option<String>| -> Result<Vec<f64>> {
        match s {
            Some(s) => parse_list(s),
            None => Ok(vec![0.0; g]),
        }
    };
    let (a, b) = (vec_or_zero(&args.xi_a)?, vec_or_zero(&args.xi_b)?);
    let model = CenterMassModel::new(&k, torus, &a, &b)?;
    let gram = model.gram(GridSpec::new(args.grid, 2 * g)?, args.rel_tol)?;
    let kap = kappa_closed(&k, &a, torus.t())?;
    let value = gram.diagonal_mean();
    let err = (value - kap.value).abs() / kap.value;
    let alt_err = (value - kap.alternative).abs() / kap.alternative;
    let mut r = Report::new("center-gram");
    r.section("inputs").complex("tau", torus.tau()).text("K", fmt_matrix_rows(&k)).reals("xi_a", &a).reals("xi_b", &b).text("grid", args.grid);
    r.section("results");
    gram_block(&mut r, &gram);
    r.section("closed_form").real("kappa", kap.value).real("relative_error", err);
    r.real("printed_prefactor_kappa", kap.alternative).real("printed_prefactor_relative_error", alt_err);
    r.text("prefactors_differ", kap.alternative_differs());
    r.text("closest", if err <= alt_err { "gaussian" } else { "printed" });
    let res = gram.scalar_residual();
    r.verdict("scalar", res <= args.check_tol, format!("scalar residual {res:.2e}"));
    r.verdict("kappa", err <= args.check_tol, format!("relative error {err:.2e} against (2t)^(-g/2) δ^(-1/2) e^(2πt(a,K⁻¹a))"));
    Ok(r)
}

fn cmd_curvature(args: &CurvatureArgs) -> Result<Report> {
    let torus = args.torus.torus()?;
    let need_k = || -> Result<Vec<Vec<i64>>> {
        parse_int_matrix(args.k_matrix.as_deref().ok_or_else(|| FqheError::InvalidInput("this model needs --K".into()))?)
    };
    let n_list: Vec<i64> = parse_list(&args.n)?;
    let model = match args.field_model {
        FieldModelArg::OneParticle => FieldModel::OneParticle { k: args.k },
        FieldModelArg::OneLayer => {
            let n = *n_list.first().ok_or_else(|| FqheError::InvalidInput("--n is empty".into()))?;
            if n < 1 {
                return Err(FqheError::InvalidInput("n must be positive".into()));
            }
            FieldModel::OneLayer { m: args.m, n: n as usize }
        }
        FieldModelArg::Multilayer => FieldModel::Multilayer { datum: validate_wen(&need_k()?, &n_list)? },
        FieldModelArg::CenterMass => FieldModel::CenterMass { k: need_k()? },
        FieldModelArg::Profile => FieldModel::ScalarProfile { rank: args.rank, alpha: args.alpha },
    };
    if model.rank()? == 0 {
        return Err(FqheError::InvalidInput("field rank must be positive".into()));
    }
    let backend = match args.field_backend {
        FieldBackendArg::Closed => FieldBackend::ClosedForm,
        FieldBackendArg::Integrated => FieldBackend::Integrated(args.integration.integrator()?),
    };
    let opts = CurvatureOptions { order: args.order, richardson_tol: args.richardson_tol, ..Default::default() };
    let halo = if args.no_halo || args.fit { 0 } else { opts.halo() };
    let nb = args.field_grid_b.unwrap_or(args.field_grid);
    let field = gram_field(&model, backend, torus, args.field_grid, nb, halo, args.integration.rel_tol)?;
    let report = if args.fit || field.provenance == Provenance::Qmc { profile_curvature(&field)? } else { trace_form_and_degree(&field, &opts)? };

    let t = torus.t();
    let expected_degree = model.expected_degree(t)?;
    let expected_trace = model.expected_trace(t)?;
    let mut r = Report::new("curvature");
    r.section("inputs").complex("tau", torus.tau()).text("field_model", format!("{model:?}"));
    r.text("field_backend", field.provenance.name()).text("field_grid", format!("{}x{}", field.na, field.nb)).text("halo", field.halo);
    if let FieldBackend::Integrated(_) = backend {
        args.integration.echo(&mut r);
    }
    r.section("results").text("curvature_backend", report.backend.name()).text("rank", report.rank);
    if report.backend == crate::curvature::CurvatureBackend::FiniteDifference {
        r.text("stencil_order", report.order).real("richardson_error", report.richardson_error);
    }
    let traces: Vec<f64> = report.trace.iter().map(|z| z.re).collect();
    let tmin = traces.iter().copied().fold(f64::INFINITY, f64::min);
    let tmax = traces.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let max_im = report.trace.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    r.real("trace_mean", report.trace_mean).real("trace_min", tmin).real("trace_max", tmax).real("trace_max_imaginary", max_im);
    r.real("expected_trace", expected_trace);
    r.real("flatness_residual", report.flatness_residual).real("gram_scalar_residual", report.gram_scalar_residual);
    r.real("field_max_error", field.max_error);
    r.complex("orientation_integral", report.orientation_integral);
    r.real("degree", report.degree).real("expected_degree", expected_degree).real("slope", report.slope);
    if let Some(fit) = report.fit {
        r.real("fit_alpha", fit.alpha).real("fit_intercept", fit.intercept).real("fit_residual", fit.residual);
    }
    let coefficient_at_origin = report.coefficients.first().cloned().unwrap_or_else(|| DMatrix::zeros(0, 0));
    r.matrix("curvature_at_origin", &coefficient_at_origin);

    let dev = (report.degree - expected_degree).abs();
    r.verdict("degree", dev <= args.check_tol, format!("|degree - ({expected_degree})| = {dev:.2e}, limit {:.1e}", args.check_tol));
    let quant = (report.degree - report.degree.round()).abs();
    r.verdict("quantization", quant <= args.check_tol, format!("distance to nearest integer {quant:.2e}"));
    if field.provenance == Provenance::ClosedForm {
        r.verdict("projective_flatness", report.flatness_residual <= 1e-8, format!("residual {:.2e}", report.flatness_residual));
    }
    Ok(r)
}

fn cmd_verify(args: &VerifyArgs) -> Report {
    let ids: Vec<u8> = if args.criterion.is_empty() { CRITERIA.iter().map(|(i, _)| *i).collect() } else { args.criterion.clone() };
    let mut r = Report::new("verify");
    r.section("inputs").text("criteria", ids.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(" "));
    for id in ids {
        let o = run_criterion(id);
        r.verdict(&format!("criterion_{id}"), o.passed, format!("{}: {}", o.name, o.detail));
    }
    r
}
