//! Command-line front end: problem files in, CSV/JSON artifacts out.
//!
//! Exit codes: 0 success, 1 configuration error, 2 numerical failure.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use canosys::evans::{
    count_zeros_winding, essential_spectrum, evans_real_zeros, evans_scan, matched_nullity, stability_verdict, Band,
    EvansOptions, Rectangle, DEFAULT_BAND_GRID,
};
use canosys::hamiltonian::{psd_report, sample_pencil, BoundaryCondition, Side, SolitonVariant, DEFAULT_PSD_TOL};
use canosys::linalg::{re, CMat};
use canosys::problem_file::ProblemFile;
use canosys::propagate::{transfer_matrix, StepControl};
use canosys::spectral::{eigenvalues_in, green_stats, problem_summary, BoundarySolver, GreenStats, ScanWarning, SpectralOptions};
use canosys::{CanonicalProblem, Error};
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

const FRAME_TOL: f64 = 1e-10;
const GREEN_TOL: f64 = 1e-8;
const STRUCTURE_TOL: f64 = 1e-8;
const CHECK_GREEN_PAIRS: usize = 10;
/// Trapezoid quadrature makes the Green residual O(h²); 1e-4 keeps it below the tolerance.
const GREEN_STEP: f64 = 1e-4;
const PROBE_LAMBDA: f64 = -0.5;
const DEFAULT_N_SCAN: usize = 400;
const DEFAULT_EVANS_SCAN: usize = 200;
const DEFAULT_EVANS_WINDOW: (f64, f64) = (-10.0, 10.0);
const NULLITY_TOL: f64 = 1e-6;

#[derive(Debug, Parser)]
#[command(name = "canosys", version, about = "Spectra of canonical systems J y' = (C0 + λ C1) y")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Frame validity, positivity of the weight, Green residuals and structure defect.
    Check(RunArgs),
    /// Sample the canonical coefficients on a grid.
    Reduce(RunArgs),
    /// Eigenvalues of a bounded problem in a window.
    Spectrum(RunArgs),
    /// Essential spectrum, Evans zeros and winding counts of a line problem.
    Evans(RunArgs),
    /// Characteristic function (bounded) or Evans function (line) on a real grid.
    Scan(RunArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window(pub f64, pub f64);

impl FromStr for Window {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let parts = parse_numbers(s, 2)?;
        if parts[1] <= parts[0] {
            return Err(format!("window {s:?} is empty"));
        }
        Ok(Window(parts[0], parts[1]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contour(pub Rectangle);

impl FromStr for Contour {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let p = parse_numbers(s, 4)?;
        Rectangle::new(p[0], p[1], p[2], p[3]).map(Contour).map_err(|e| e.to_string())
    }
}

fn parse_numbers(s: &str, n: usize) -> Result<Vec<f64>, String> {
    let parts: Vec<f64> = s
        .split(':')
        .map(|p| p.trim().parse::<f64>().map_err(|_| format!("bad number {p:?} in {s:?}")))
        .collect::<Result<_, _>>()?;
    if parts.len() != n || parts.iter().any(|v| !v.is_finite()) {
        return Err(format!("expected {n} finite numbers separated by ':' in {s:?}"));
    }
    Ok(parts)
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Problem definition file (TOML).
    pub problem: PathBuf,
    /// Real spectral window `a:b`.
    #[arg(long, allow_hyphen_values = true)]
    pub window: Option<Window>,
    /// Rectangle `re0:re1:im0:im1` for a winding count (repeatable).
    #[arg(long, allow_hyphen_values = true)]
    pub contour: Vec<Contour>,
    /// Number of λ samples (spectrum, evans, scan) or x samples (reduce).
    #[arg(long)]
    pub steps: Option<usize>,
    /// Propagation step.
    #[arg(long)]
    pub h: Option<f64>,
    /// Truncation length of line and half-line problems.
    #[arg(long = "L")]
    pub truncation: Option<f64>,
    /// Soliton variant, `paper` or `corrected`.
    #[arg(long)]
    pub variant: Option<String>,
    /// Write the artifact here; the summary then goes to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Artifact format; `scan` defaults to csv, everything else to json.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Seed for the random relation pairs of the Green check.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Config(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let name = variant_name(&e);
        let message = format!("{name}: {e}");
        match e {
            Error::DimensionMismatch { .. }
            | Error::NotOrthonormal { .. }
            | Error::NotIsotropic { .. }
            | Error::InvalidParameter(_)
            | Error::NonPositiveCoefficient { .. }
            | Error::NoAsymptoticLimit { .. }
            | Error::UnsupportedGeometry { .. }
            | Error::NotSolitonProblem
            | Error::ProblemFile(_) => CliError::Config(message),
            _ => CliError::Numerical(message),
        }
    }
}

fn variant_name(e: &Error) -> String {
    let debug = format!("{e:?}");
    debug.split(|c: char| !c.is_alphanumeric()).next().unwrap_or("Error").to_string()
}

/// `{ shape: [rows, cols], data: [[re, im], ...] }`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonMatrix {
    pub shape: [usize; 2],
    pub data: Vec<[f64; 2]>,
}

impl JsonMatrix {
    pub fn from_matrix(m: &CMat) -> Self {
        let data = (0..m.nrows()).flat_map(|i| (0..m.ncols()).map(move |j| (i, j))).map(|(i, j)| [m[(i, j)].re + 0.0, m[(i, j)].im + 0.0]).collect();
        Self { shape: [m.nrows(), m.ncols()], data }
    }

    pub fn from_rows<T: Copy>(rows: &[Vec<T>], f: impl Fn(T) -> [f64; 2]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        // `+ 0.0` turns -0.0 into 0.0
        let data = rows.iter().flat_map(|r| r.iter().map(|&v| f(v))).map(|[a, b]| [a + 0.0, b + 0.0]).collect();
        Self { shape: [rows.len(), cols], data }
    }

    fn validate(&self, name: &str) -> Result<(), String> {
        if self.data.len() != self.shape[0] * self.shape[1] {
            return Err(format!("{name}: shape {:?} does not match {} entries", self.shape, self.data.len()));
        }
        Ok(())
    }
}

/// Implemented by every emitted JSON document.
pub trait Validate {
    fn validate(&self) -> Result<(), String>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckItem {
    pub name: String,
    pub passed: bool,
    pub value: Option<f64>,
    pub threshold: Option<f64>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub summary: String,
    pub checks: Vec<CheckItem>,
    pub failures: Vec<String>,
}

impl Validate for CheckReport {
    fn validate(&self) -> Result<(), String> {
        let failed: Vec<&str> = self.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        if failed != self.failures.iter().map(String::as_str).collect::<Vec<_>>() {
            return Err("failure list disagrees with the checks".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedSample {
    pub x: f64,
    pub c0: JsonMatrix,
    pub c1: JsonMatrix,
    pub weight: JsonMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReduceReport {
    pub summary: String,
    pub dim: usize,
    pub interval: [f64; 2],
    pub hermitian: bool,
    pub samples: Vec<ReducedSample>,
}

impl Validate for ReduceReport {
    fn validate(&self) -> Result<(), String> {
        let n = 2 * self.dim;
        for s in &self.samples {
            for (name, m) in [("c0", &s.c0), ("c1", &s.c1), ("weight", &s.weight)] {
                m.validate(name)?;
                if m.shape != [n, n] {
                    return Err(format!("{name} at x = {} has shape {:?}, expected [{n}, {n}]", s.x, m.shape));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenpairJson {
    pub lambda: f64,
    pub lambda_imag: f64,
    pub multiplicity: usize,
    pub boundary_residual: f64,
    pub ode_residual: f64,
    pub match_sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessJson {
    pub gram: JsonMatrix,
    pub symmetry_defect: JsonMatrix,
    pub green: Option<GreenStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumJson {
    pub summary: String,
    pub window: [f64; 2],
    pub hermitian: bool,
    pub eigenvalues: Vec<f64>,
    pub eigenpairs: Vec<EigenpairJson>,
    pub warnings: Vec<ScanWarning>,
    pub witnesses: Option<WitnessJson>,
}

impl Validate for SpectrumJson {
    fn validate(&self) -> Result<(), String> {
        if self.eigenvalues.len() != self.eigenpairs.len()
            || self.eigenvalues.iter().zip(&self.eigenpairs).any(|(l, p)| *l != p.lambda)
        {
            return Err("eigenvalue list disagrees with the eigenpairs".into());
        }
        if self.eigenvalues.iter().any(|l| *l < self.window[0] || *l > self.window[1]) {
            return Err("eigenvalue outside the window".into());
        }
        if let Some(w) = &self.witnesses {
            w.gram.validate("gram")?;
            w.symmetry_defect.validate("symmetry_defect")?;
            let k: usize = self.eigenpairs.iter().map(|p| p.multiplicity).sum();
            if w.gram.shape != [k, k] || w.symmetry_defect.shape != [k, k] {
                return Err("witness matrices do not match the eigenfunction count".into());
            }
        }
        Ok(())
    }
}

/// Band ends; `null` marks an end beyond the classified window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandJson {
    pub lo: Option<f64>,
    pub hi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroJson {
    pub lambda: f64,
    /// Independent decaying solutions at the zero.
    pub nullity: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindingJson {
    pub contour: Rectangle,
    pub count: i64,
    pub winding: f64,
    pub n_samples: usize,
    pub min_conditioning: f64,
    pub max_phase_jump: f64,
    pub mean_zero: Option<[f64; 2]>,
    /// Independent decaying solutions at the mean zero when it is real.
    pub nullity: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictJson {
    pub stable: bool,
    pub message: String,
    pub rectangles: Vec<Rectangle>,
    pub counts: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvansJson {
    pub summary: String,
    pub window: [f64; 2],
    pub essential_spectrum: String,
    pub bands: Vec<BandJson>,
    pub zeros: Vec<ZeroJson>,
    pub windings: Vec<WindingJson>,
    pub verdict: Option<VerdictJson>,
}

impl Validate for EvansJson {
    fn validate(&self) -> Result<(), String> {
        for b in &self.bands {
            if let (Some(lo), Some(hi)) = (b.lo, b.hi) {
                if lo > hi {
                    return Err(format!("band [{lo}, {hi}] is reversed"));
                }
            }
        }
        for w in &self.windings {
            if w.count != w.winding.round() as i64 {
                return Err("winding count is not the rounded winding number".into());
            }
        }
        if let Some(v) = &self.verdict {
            if v.rectangles.len() != v.counts.len() || v.stable != v.counts.iter().all(|&c| c == 0) {
                return Err("verdict disagrees with its counts".into());
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvansScanRow {
    pub re_lambda: f64,
    pub im_lambda: f64,
    pub re_e: f64,
    pub im_e: f64,
    pub log_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicScanRow {
    pub lambda: f64,
    pub re_d: f64,
    pub im_d: f64,
    pub abs_d: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScanJson {
    Characteristic(Vec<CharacteristicScanRow>),
    Evans(Vec<EvansScanRow>),
}

impl Validate for ScanJson {
    fn validate(&self) -> Result<(), String> {
        Ok(())
    }
}

/// Output of one command: the artifact and a human-readable summary.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub artifact: String,
    pub summary: String,
    pub exit_code: i32,
}

/// Parses `args` (including the program name) and runs the command,
/// writing the artifact to `--out` or stdout. Returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let out = match &cli.command {
        Command::Check(a) | Command::Reduce(a) | Command::Spectrum(a) | Command::Evans(a) | Command::Scan(a) => a.out.clone(),
    };
    match run(&cli.command) {
        Ok(outcome) => {
            match out {
                Some(path) => {
                    if let Err(e) = std::fs::write(&path, &outcome.artifact) {
                        eprintln!("configuration error: cannot write {}: {e}", path.display());
                        return EXIT_CONFIG;
                    }
                    print!("{}", outcome.summary);
                }
                None => {
                    eprint!("{}", outcome.summary);
                    let mut stdout = std::io::stdout().lock();
                    let _ = stdout.write_all(outcome.artifact.as_bytes());
                }
            }
            outcome.exit_code
        }
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

pub fn run(command: &Command) -> Result<Outcome, CliError> {
    match command {
        Command::Check(a) => run_check(a),
        Command::Reduce(a) => run_reduce(a),
        Command::Spectrum(a) => run_spectrum(a),
        Command::Evans(a) => run_evans(a),
        Command::Scan(a) => run_scan(a),
    }
}

fn load(args: &RunArgs) -> Result<(ProblemFile, CanonicalProblem), CliError> {
    let mut file = ProblemFile::load(&args.problem)?;
    if let Some(l) = args.truncation {
        file.set_truncation(l)?;
    }
    if let Some(v) = &args.variant {
        file.set_variant(SolitonVariant::from_str(v)?)?;
    }
    if let Some(h) = args.h {
        if !(h > 0.0 && h.is_finite()) {
            return Err(CliError::Config(format!("--h must be positive, got {h}")));
        }
    }
    if args.steps == Some(0) {
        return Err(CliError::Config("--steps must be positive".into()));
    }
    let problem = file.build()?;
    Ok((file, problem))
}

fn seed(args: &RunArgs, file: &ProblemFile) -> u64 {
    args.seed.or(file.problem.seed).unwrap_or(canosys::spectral::DEFAULT_SEED)
}

fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Numerical(format!("serialization: {e}")))?;
    s.push('\n');
    Ok(s)
}

fn format_or(args: &RunArgs, default: Format) -> Format {
    args.format.unwrap_or(default)
}

pub fn run_check(args: &RunArgs) -> Result<Outcome, CliError> {
    if format_or(args, Format::Json) == Format::Csv {
        return Err(CliError::Config("check emits JSON only".into()));
    }
    let (file, problem) = load(args)?;
    let mut checks = Vec::new();
    for (name, bc) in [("left_frame", problem.left()), ("right_frame", problem.right())] {
        match bc {
            BoundaryCondition::Frame(f) => {
                let d = f.defects();
                let worst = d.orthonormality.max(d.isotropy);
                checks.push(item(name, worst <= FRAME_TOL, Some(worst), Some(FRAME_TOL), None));
            }
            BoundaryCondition::Asymptotic => {
                let side = if name == "left_frame" { Side::Minus } else { Side::Plus };
                let defect = problem.asymptotic_defect(side);
                let name = if side == Side::Minus { "left_decay" } else { "right_decay" };
                checks.push(item(name, defect <= problem.decay_tol(), Some(defect), Some(problem.decay_tol()), None));
            }
        }
    }
    let (a, b) = problem.interval();
    let grid: Vec<f64> = (0..=2000).map(|i| a + (b - a) * i as f64 / 2000.0).collect();
    let psd = psd_report(problem.weight(), &grid, DEFAULT_PSD_TOL);
    let note = (!psd.passed).then(|| {
        let mut n = format!("smallest eigenvalue {:.6e} at x = {}", psd.min_eigenvalue, psd.argmin_x);
        if let Some((lo, hi)) = psd.vanishing_window {
            let _ = write!(n, "; weight vanishes on [{lo}, {hi}]");
        }
        n
    });
    checks.push(item("psd", psd.passed, Some(psd.min_eigenvalue), Some(-psd.psd_tol), note));

    let h = args.h.unwrap_or(canosys::propagate::DEFAULT_STEP);
    if problem.is_hermitian() {
        let g = green_stats(&problem, CHECK_GREEN_PAIRS, seed(args, &file), args.h.unwrap_or(GREEN_STEP))?;
        checks.push(item("green", g.max_relative <= GREEN_TOL, Some(g.max_relative), Some(GREEN_TOL), None));
    } else {
        checks.push(item("green", true, None, Some(GREEN_TOL), Some("skipped: pencil is not Hermitian".into())));
    }
    let t = transfer_matrix(&problem, re(PROBE_LAMBDA), b, StepControl::with_h(h))?;
    let defect = t.relative_structure_defect();
    checks.push(item("structure", defect <= STRUCTURE_TOL, Some(defect), Some(STRUCTURE_TOL), None));

    let failures: Vec<String> = checks.iter().filter(|c| !c.passed).map(|c| c.name.clone()).collect();
    let report = CheckReport { summary: problem_summary(&problem), checks, failures };
    let mut summary = format!("{}\n", report.summary);
    for c in &report.checks {
        let value = c.value.map_or("-".to_string(), |v| format!("{v:.3e}"));
        let _ = writeln!(summary, "{:<12} {} {value}", c.name, if c.passed { "pass" } else { "FAIL" });
    }
    let exit_code = if report.failures.is_empty() { EXIT_OK } else { EXIT_NUMERICAL };
    Ok(Outcome { artifact: to_json(&report)?, summary, exit_code })
}

fn item(name: &str, passed: bool, value: Option<f64>, threshold: Option<f64>, note: Option<String>) -> CheckItem {
    CheckItem { name: name.to_string(), passed, value, threshold, note }
}

pub fn run_reduce(args: &RunArgs) -> Result<Outcome, CliError> {
    if format_or(args, Format::Json) == Format::Csv {
        return Err(CliError::Config("reduce emits JSON only".into()));
    }
    let (_, problem) = load(args)?;
    let n = args.steps.unwrap_or(11).max(2);
    let (a, b) = problem.interval();
    let xs: Vec<f64> = (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect();
    let samples = sample_pencil(&problem, &xs)
        .into_iter()
        .map(|s| ReducedSample {
            x: s.x,
            c0: JsonMatrix::from_rows(&s.c0, |v| v),
            c1: JsonMatrix::from_rows(&s.c1, |v| v),
            weight: JsonMatrix::from_rows(&s.weight, |v| v),
        })
        .collect();
    let report = ReduceReport {
        summary: problem_summary(&problem),
        dim: problem.dim().half(),
        interval: [a, b],
        hermitian: problem.is_hermitian(),
        samples,
    };
    let summary = format!("{}\nhermitian: {}\n", report.summary, report.hermitian);
    Ok(Outcome { artifact: to_json(&report)?, summary, exit_code: EXIT_OK })
}

fn spectral_options(args: &RunArgs, file: &ProblemFile) -> SpectralOptions {
    let mut o = SpectralOptions { seed: seed(args, file), green_pairs: CHECK_GREEN_PAIRS, ..SpectralOptions::default() };
    if let Some(h) = args.h {
        o.control.h = h;
    }
    o
}

fn require_window(args: &RunArgs) -> Result<Window, CliError> {
    args.window.ok_or_else(|| CliError::Config("--window a:b is required".into()))
}

pub fn run_spectrum(args: &RunArgs) -> Result<Outcome, CliError> {
    let (file, problem) = load(args)?;
    if !problem.geometry().is_bounded() {
        return Err(CliError::Config("spectrum needs a bounded problem; use evans for line problems".into()));
    }
    let Window(lo, hi) = require_window(args)?;
    let options = spectral_options(args, &file);
    let report = eigenvalues_in(&problem, lo, hi, args.steps.unwrap_or(DEFAULT_N_SCAN), &options)?;
    let json = SpectrumJson {
        summary: report.summary.clone(),
        window: [lo, hi],
        hermitian: report.hermitian,
        eigenvalues: report.eigenpairs.iter().map(|p| p.lambda).collect(),
        eigenpairs: report
            .eigenpairs
            .iter()
            .map(|p| EigenpairJson {
                lambda: p.lambda,
                lambda_imag: p.lambda_imag,
                multiplicity: p.multiplicity,
                boundary_residual: p.boundary_residual,
                ode_residual: p.ode_residual,
                match_sigma: p.match_sigma,
            })
            .collect(),
        warnings: report.warnings.clone(),
        witnesses: report.witnesses.as_ref().map(|w| WitnessJson {
            gram: JsonMatrix::from_rows(&w.gram, |z: Complex64| [z.re, z.im]),
            symmetry_defect: JsonMatrix::from_rows(&w.symmetry_defect, |v: f64| [v, 0.0]),
            green: w.green.clone(),
        }),
    };
    let mut summary = format!("{}\n", json.summary);
    let _ = writeln!(summary, "eigenvalues in [{lo}, {hi}]: {}", list(&json.eigenvalues));
    for w in &json.warnings {
        let ScanWarning::ScanTooCoarse { lo, hi, found, expected } = w;
        let _ = writeln!(summary, "warning: scan too coarse on [{lo}, {hi}] (found {found}, expected {expected:?})");
    }
    let artifact = match format_or(args, Format::Json) {
        Format::Json => to_json(&json)?,
        Format::Csv => characteristic_csv(&report.scan.iter().map(|s| (s.lambda, s.value, s.log_abs)).collect::<Vec<_>>()),
    };
    Ok(Outcome { artifact, summary, exit_code: EXIT_OK })
}

fn list(values: &[f64]) -> String {
    if values.is_empty() {
        return "none".into();
    }
    values.iter().map(|v| format!("{v:.10}")).collect::<Vec<_>>().join(", ")
}

fn characteristic_csv(rows: &[(f64, Complex64, f64)]) -> String {
    let mut s = String::from("lambda,re_D,im_D,abs_D\n");
    for (l, d, log_abs) in rows {
        let _ = writeln!(s, "{l:e},{:e},{:e},{:e}", d.re, d.im, log_abs.exp());
    }
    s
}

fn evans_options(args: &RunArgs) -> EvansOptions {
    let mut o = EvansOptions::default();
    if let Some(h) = args.h {
        o.control.h = h;
    }
    o
}

fn band_json(b: &Band) -> BandJson {
    BandJson { lo: b.lo.is_finite().then_some(b.lo), hi: b.hi.is_finite().then_some(b.hi) }
}

pub fn run_evans(args: &RunArgs) -> Result<Outcome, CliError> {
    let (_, problem) = load(args)?;
    if problem.geometry().is_bounded() {
        return Err(CliError::Config("evans needs a line or half-line problem; use spectrum for bounded ones".into()));
    }
    let Window(lo, hi) = args.window.unwrap_or(Window(DEFAULT_EVANS_WINDOW.0, DEFAULT_EVANS_WINDOW.1));
    let options = evans_options(args);
    let bands = essential_spectrum(&problem, (lo, hi), DEFAULT_BAND_GRID, &options)?;
    let n = args.steps.unwrap_or(DEFAULT_EVANS_SCAN).max(3);
    let zeros = evans_real_zeros(&problem, lo, hi, n, canosys::spectral::DEFAULT_DIP_FACTOR, &options)?
        .into_iter()
        .map(|l| Ok(ZeroJson { lambda: l, nullity: matched_nullity(&problem, re(l), NULLITY_TOL, &options)? }))
        .collect::<Result<Vec<_>, Error>>()?;
    let mut windings = Vec::new();
    for Contour(r) in &args.contour {
        let w = count_zeros_winding(&problem, *r, &options)?;
        let mean = w.mean_zero();
        let nullity = match mean {
            Some(z) if z.im.abs() <= 1e-6 && !bands.contains(z.re) => {
                Some(matched_nullity(&problem, re(z.re), NULLITY_TOL, &options)?)
            }
            _ => None,
        };
        windings.push(WindingJson {
            contour: w.contour,
            count: w.count,
            winding: w.winding,
            n_samples: w.n_samples,
            min_conditioning: w.min_conditioning,
            max_phase_jump: w.max_phase_jump,
            mean_zero: mean.map(|z| [z.re, z.im]),
            nullity,
        });
    }
    let mut verdict_rects: Vec<Rectangle> = args.contour.iter().map(|c| c.0).filter(|r| r.re0 > 0.0).collect();
    if verdict_rects.is_empty() {
        if let Some(r) = default_gap_rectangle(&bands) {
            verdict_rects.push(r);
        }
    }
    let verdict = if verdict_rects.is_empty() {
        None
    } else {
        let v = stability_verdict(&problem, &verdict_rects, &options)?;
        Some(VerdictJson {
            stable: v.stable,
            message: v.message,
            counts: v.rectangles.iter().map(|r| r.count).collect(),
            rectangles: verdict_rects,
        })
    };
    let json = EvansJson {
        summary: problem_summary(&problem),
        window: [lo, hi],
        essential_spectrum: bands.to_string(),
        bands: bands.bands.iter().map(band_json).collect(),
        zeros,
        windings,
        verdict,
    };
    let mut summary = format!("{}\n", json.summary);
    let _ = writeln!(summary, "essential spectrum: {}", json.essential_spectrum);
    let zs: Vec<f64> = json.zeros.iter().map(|z| z.lambda).collect();
    let _ = writeln!(summary, "real zeros of E in [{lo}, {hi}]: {}", list(&zs));
    for w in &json.windings {
        let r = w.contour;
        let _ = write!(summary, "winding on [{}, {}] x [{}, {}]i: {}", r.re0, r.re1, r.im0, r.im1, w.count);
        if let Some(k) = w.nullity {
            let _ = write!(summary, " (independent decaying solutions: {k})");
        }
        summary.push('\n');
    }
    if let Some(v) = &json.verdict {
        let _ = writeln!(summary, "{}", v.message);
    }
    let artifact = match format_or(args, Format::Json) {
        Format::Json => to_json(&json)?,
        Format::Csv => evans_csv(&problem, lo, hi, n, &options)?,
    };
    Ok(Outcome { artifact, summary, exit_code: EXIT_OK })
}

/// `[0.1, 0.9 e] × [−0.3, 0.3]i` below the first positive band edge `e`.
fn default_gap_rectangle(bands: &canosys::EssentialSpectrumBands) -> Option<Rectangle> {
    if bands.contains(0.1) {
        return None;
    }
    let edge = bands.bands.iter().map(|b| b.lo).filter(|&l| l > 0.1).fold(bands.window.1, f64::min);
    let hi = 0.9 * edge;
    (hi > 0.1).then(|| Rectangle::new(0.1, hi, -0.3, 0.3).expect("nonempty"))
}

fn evans_rows(problem: &CanonicalProblem, lo: f64, hi: f64, n: usize, options: &EvansOptions) -> Result<Vec<EvansScanRow>, CliError> {
    Ok(evans_scan(problem, lo, hi, n, options)?
        .into_iter()
        .flatten()
        .map(|v| EvansScanRow {
            re_lambda: v.lambda.re,
            im_lambda: v.lambda.im,
            re_e: v.value.re,
            im_e: v.value.im,
            log_scale: v.log_scale,
        })
        .collect())
}

fn evans_csv(problem: &CanonicalProblem, lo: f64, hi: f64, n: usize, options: &EvansOptions) -> Result<String, CliError> {
    let mut s = String::from("re_lambda,im_lambda,re_E,im_E,log_scale\n");
    for r in evans_rows(problem, lo, hi, n, options)? {
        let _ = writeln!(s, "{:e},{:e},{:e},{:e},{:e}", r.re_lambda, r.im_lambda, r.re_e, r.im_e, r.log_scale);
    }
    Ok(s)
}

pub fn run_scan(args: &RunArgs) -> Result<Outcome, CliError> {
    let (file, problem) = load(args)?;
    let Window(lo, hi) = require_window(args)?;
    let format = format_or(args, Format::Csv);
    if problem.geometry().is_bounded() {
        let n = args.steps.unwrap_or(DEFAULT_N_SCAN).max(2);
        let options = spectral_options(args, &file);
        let solver = BoundarySolver::new(&problem, options.control)?;
        let mut rows = Vec::with_capacity(n);
        for i in 0..n {
            let l = lo + (hi - lo) * i as f64 / (n - 1) as f64;
            let v = solver.evaluate(re(l))?;
            rows.push((l, v.value(), v.log_abs()));
        }
        let summary = format!("{}\ncharacteristic function at {n} points in [{lo}, {hi}]\n", problem_summary(&problem));
        let artifact = match format {
            Format::Csv => characteristic_csv(&rows),
            Format::Json => to_json(&ScanJson::Characteristic(
                rows.iter().map(|&(l, d, la)| CharacteristicScanRow { lambda: l, re_d: d.re, im_d: d.im, abs_d: la.exp() }).collect(),
            ))?,
        };
        Ok(Outcome { artifact, summary, exit_code: EXIT_OK })
    } else {
        let n = args.steps.unwrap_or(DEFAULT_EVANS_SCAN).max(2);
        let options = evans_options(args);
        let rows = evans_rows(&problem, lo, hi, n, &options)?;
        let summary = format!(
            "{}\nEvans function at {} of {n} points in [{lo}, {hi}] (others on the essential spectrum)\n",
            problem_summary(&problem),
            rows.len()
        );
        let artifact = match format {
            Format::Csv => evans_csv(&problem, lo, hi, n, &options)?,
            Format::Json => to_json(&ScanJson::Evans(rows))?,
        };
        Ok(Outcome { artifact, summary, exit_code: EXIT_OK })
    }
}

/// Re-parses an emitted JSON document and validates it.
pub fn revalidate<T: Validate + for<'de> Deserialize<'de>>(text: &str) -> Result<T, String> {
    let value: T = serde_json::from_str(text).map_err(|e| e.to_string())?;
    value.validate()?;
    Ok(value)
}
