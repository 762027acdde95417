//! Bounded-interval spectra: the boundary characteristic function
//! `D(λ) = det(B · T(b; λ) · JΘ*)`, eigenvalue location, eigenfunctions and
//! the numerical witnesses of self-adjointness.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{CanonicalProblem, Geometry, ProblemKind};
use crate::linalg::{self, re, CMat, CVec, ZERO};
use crate::propagate::{Discretization, SampledPath, StepControl};
use crate::symplectic::{kernel_basis, LagrangianFrame, DEFAULT_RANK_TOL};

pub const DEFAULT_BC_TOL: f64 = 1e-6;
pub const DEFAULT_ODE_TOL: f64 = 1e-6;
pub const DEFAULT_DIP_FACTOR: f64 = 1e-6;
pub const DEFAULT_REFINE_TOL: f64 = 1e-12;
pub const DEFAULT_SEED: u64 = 42;
const MATCH_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralOptions {
    pub control: StepControl,
    /// Bracket width at which refinement stops, relative to `max(1, |λ|)`.
    pub refine_tol: f64,
    pub rank_tol: f64,
    /// Dips of `|D|` below `dip_factor · median |D|` count as zeros.
    pub dip_factor: f64,
    pub bc_tol: f64,
    pub ode_tol: f64,
    /// Random relation pairs for the Green-identity witness (0 disables).
    pub green_pairs: usize,
    pub seed: u64,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        Self {
            control: StepControl::default(),
            refine_tol: DEFAULT_REFINE_TOL,
            rank_tol: DEFAULT_RANK_TOL,
            dip_factor: DEFAULT_DIP_FACTOR,
            bc_tol: DEFAULT_BC_TOL,
            ode_tol: DEFAULT_ODE_TOL,
            green_pairs: 0,
            seed: DEFAULT_SEED,
        }
    }
}

/// `D(λ) = mantissa · phase · exp(log_scale)` with `mantissa = det(B Q)`
/// for the orthonormal propagated frame `Q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicValue {
    pub lambda: Complex64,
    pub mantissa: Complex64,
    pub phase: Complex64,
    pub log_scale: f64,
    /// Singular values of `B Q`, descending. All lie in `[0, 1]`.
    pub singular_values: Vec<f64>,
}

impl CharacteristicValue {
    pub fn value(&self) -> Complex64 {
        self.mantissa * self.phase * self.log_scale.exp()
    }

    pub fn log_abs(&self) -> f64 {
        self.mantissa.norm().ln() + self.log_scale
    }

    /// Scale-free distance from an eigenvalue.
    pub fn sigma_min(&self) -> f64 {
        self.singular_values.last().copied().unwrap_or(0.0)
    }

    /// `D / |D|` without forming `|D|`.
    fn unit(&self) -> Complex64 {
        let m = self.mantissa * self.phase;
        if m.norm() == 0.0 { ZERO } else { m / m.norm() }
    }
}

/// Cached discretization of a bounded problem for repeated evaluation of
/// `D(λ)`.
#[derive(Debug, Clone)]
pub struct BoundarySolver<'a> {
    problem: &'a CanonicalProblem,
    disc: Discretization,
    right: LagrangianFrame,
    start: CMat,
}

fn bounded_frames(problem: &CanonicalProblem) -> Result<(LagrangianFrame, LagrangianFrame)> {
    match (problem.left().frame(), problem.right().frame()) {
        (Some(l), Some(r)) => Ok((l.clone(), r.clone())),
        _ => Err(Error::UnsupportedGeometry { expected: "two-frame" }),
    }
}

impl<'a> BoundarySolver<'a> {
    pub fn new(problem: &'a CanonicalProblem, control: StepControl) -> Result<Self> {
        let (left, right) = bounded_frames(problem)?;
        let (a, b) = problem.interval();
        let disc = Discretization::new(problem, a, b, control)?;
        let start = kernel_basis(&left).into_columns();
        Ok(Self { problem, disc, right, start })
    }

    pub fn problem(&self) -> &CanonicalProblem {
        self.problem
    }

    pub fn evaluate(&self, lambda: Complex64) -> Result<CharacteristicValue> {
        let frame = self.disc.propagate_frame(lambda, &self.start, false)?;
        let bq = self.right.rows() * &frame.columns;
        Ok(CharacteristicValue {
            lambda,
            mantissa: bq.determinant(),
            phase: frame.phase,
            log_scale: frame.log_scale,
            singular_values: linalg::singular_values(&bq),
        })
    }

    /// Final Prüfer angle of the left solution for `d = 1`, unwrapped
    /// continuously along the grid.
    fn prufer_angle(&self, lambda: f64) -> f64 {
        let mut v = self.start.column(0).into_owned();
        let mut angle = Complex64::new(v[0].re, v[1].re).arg();
        for i in 0..self.disc.steps() {
            let next = self.disc.step_matrix(i, re(lambda)) * &v;
            let before = Complex64::new(v[0].re, v[1].re);
            let after = Complex64::new(next[0].re, next[1].re);
            angle += (after / before).arg();
            v = &next / re(next.norm());
        }
        angle
    }

    fn sturm_count(&self, lo: f64, hi: f64) -> Option<usize> {
        if self.problem.dim().half() != 1 || !self.problem.is_hermitian() || !self.problem.is_real() {
            return None;
        }
        let target = kernel_basis(&self.right).into_columns();
        let phi_b = Complex64::new(target[(0, 0)].re, target[(1, 0)].re).arg();
        let (p, q) = (self.prufer_angle(lo), self.prufer_angle(hi));
        let (lo_a, hi_a) = if p <= q { (p, q) } else { (q, p) };
        let k_min = ((lo_a - phi_b) / std::f64::consts::PI).floor() as i64 + 1;
        let k_max = ((hi_a - phi_b) / std::f64::consts::PI).ceil() as i64 - 1;
        Some((k_max - k_min + 1).max(0) as usize)
    }
}

pub fn characteristic_function(problem: &CanonicalProblem, lambda: Complex64, control: StepControl) -> Result<Complex64> {
    Ok(BoundarySolver::new(problem, control)?.evaluate(lambda)?.value())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanSample {
    pub lambda: f64,
    pub value: Complex64,
    pub log_abs: f64,
    pub sigma_min: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub lambda: f64,
    /// Imaginary part of the nearby complex zero of `D`, found by complex
    /// secant iteration from the real estimate.
    pub lambda_imag: f64,
    pub multiplicity: usize,
    /// H-orthonormal eigenfunctions, one per independent solution.
    pub eigenfunctions: Vec<SampledPath>,
    pub boundary_residual: f64,
    pub ode_residual: f64,
    /// Smallest singular value of the two-sided matching matrix.
    pub match_sigma: f64,
}

impl EigenPair {
    pub fn eigenfunction(&self) -> &SampledPath {
        &self.eigenfunctions[0]
    }

    pub fn complex_lambda(&self) -> Complex64 {
        Complex64::new(self.lambda, self.lambda_imag)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScanWarning {
    /// Found zeros disagree with an independent count, or two zeros fall
    /// within two grid cells.
    ScanTooCoarse { lo: f64, hi: f64, found: usize, expected: Option<usize> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreenStats {
    pub pairs: usize,
    pub max_relative: f64,
    pub mean_relative: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Witnesses {
    /// `G[m][n] = ⟨y_m, y_n⟩_H`.
    pub gram: Vec<Vec<Complex64>>,
    pub symmetry_defect: Vec<Vec<f64>>,
    pub green: Option<GreenStats>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumReport {
    pub summary: String,
    pub window: (f64, f64),
    pub eigenpairs: Vec<EigenPair>,
    pub scan: Vec<ScanSample>,
    pub witnesses: Option<Witnesses>,
    pub warnings: Vec<ScanWarning>,
    pub hermitian: bool,
}

pub fn problem_summary(problem: &CanonicalProblem) -> String {
    let (a, b) = problem.interval();
    let kind = match problem.kind() {
        ProblemKind::SturmLiouville => "sturm_liouville".to_string(),
        ProblemKind::TravelingWave => "traveling_wave".to_string(),
        ProblemKind::NlsSoliton { eta, variant } => format!("nls_soliton(eta = {eta}, variant = {variant:?})"),
        ProblemKind::RawPencil => "raw_pencil".to_string(),
    };
    let geometry = match problem.geometry() {
        Geometry::Bounded { .. } => "bounded",
        Geometry::HalfLine { .. } => "half_line",
        Geometry::FullLine { .. } => "full_line",
    };
    format!("{kind}, d = {}, {geometry} on [{a}, {b}]", problem.dim().half())
}

/// Locates the eigenvalues in `[lambda_min, lambda_max]`.
///
/// `D` is sampled on a uniform grid of `n_scan` points. For real data `D`
/// is real on the real axis and sign changes bracket zeros, refined by
/// bisection. Grid minima of `σ_min(B Q)` are refined by golden-section
/// search and kept when `D` dips below `dip_factor · median |D|`; this
/// catches zeros of even order and complex data.
pub fn eigenvalues_in(
    problem: &CanonicalProblem,
    lambda_min: f64,
    lambda_max: f64,
    n_scan: usize,
    options: &SpectralOptions,
) -> Result<SpectrumReport> {
    if !problem.geometry().is_bounded() {
        return Err(Error::UnsupportedGeometry { expected: "bounded" });
    }
    if n_scan < 2 || !(lambda_max > lambda_min) {
        return Err(Error::InvalidParameter("scan needs n_scan >= 2 and a nonempty window".into()));
    }
    let solver = BoundarySolver::new(problem, options.control)?;
    let grid: Vec<f64> = (0..n_scan)
        .map(|i| lambda_min + (lambda_max - lambda_min) * i as f64 / (n_scan - 1) as f64)
        .collect();
    let values: Vec<CharacteristicValue> = grid.iter().map(|&l| solver.evaluate(re(l))).collect::<Result<_>>()?;
    let scan: Vec<ScanSample> = values
        .iter()
        .map(|v| ScanSample { lambda: v.lambda.re, value: v.value(), log_abs: v.log_abs(), sigma_min: v.sigma_min() })
        .collect();

    let real_data = problem.is_real();
    let mut roots: Vec<f64> = Vec::new();
    let mut claimed = vec![false; n_scan];
    if real_data {
        for i in 0..n_scan - 1 {
            let (s0, s1) = (values[i].unit().re, values[i + 1].unit().re);
            if s0 == 0.0 {
                roots.push(grid[i]);
                claimed[i] = true;
            } else if s0 * s1 < 0.0 {
                roots.push(bisect(&solver, grid[i], grid[i + 1], s0, options)?);
                claimed[i] = true;
                claimed[i + 1] = true;
            }
        }
        if values[n_scan - 1].unit().re == 0.0 {
            roots.push(grid[n_scan - 1]);
            claimed[n_scan - 1] = true;
        }
    }
    let mut logs: Vec<f64> = scan.iter().map(|s| s.log_abs).filter(|v| v.is_finite()).collect();
    logs.sort_by(f64::total_cmp);
    let median_log = logs.get(logs.len() / 2).copied().unwrap_or(0.0);
    let dip_log = median_log + options.dip_factor.ln();
    for i in 0..n_scan {
        let s = scan[i].sigma_min;
        let left = if i == 0 { f64::INFINITY } else { scan[i - 1].sigma_min };
        let right = if i + 1 == n_scan { f64::INFINITY } else { scan[i + 1].sigma_min };
        if !(s <= left && s <= right) {
            continue;
        }
        let near_claimed = claimed[i.saturating_sub(1)..(i + 2).min(n_scan)].iter().any(|&c| c);
        if near_claimed {
            continue;
        }
        let lo = grid[i.saturating_sub(1)];
        let hi = grid[(i + 1).min(n_scan - 1)];
        let (lam, value) = golden_minimum(&solver, lo, hi, options)?;
        if value.log_abs() <= dip_log || value.sigma_min() <= options.rank_tol {
            roots.push(lam);
        }
    }
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|a, b| (*a - *b).abs() <= 1e-7 * a.abs().max(1.0));
    roots.retain(|&l| l >= lambda_min && l <= lambda_max);

    let mut eigenpairs = Vec::with_capacity(roots.len());
    for &lam in &roots {
        let at = solver.evaluate(re(lam))?;
        let mut pair = eigenfunction_with(problem, lam, options)?;
        // B and Q have orthonormal rows and columns, so σ(BQ) ⊂ [0, 1] is already scale-free
        pair.multiplicity = at.singular_values.iter().filter(|&&s| s <= options.rank_tol).count().max(1);
        pair.lambda_imag = polish_complex(&solver, lam)?.im;
        eigenpairs.push(pair);
    }

    let cell = (lambda_max - lambda_min) / (n_scan - 1) as f64;
    let mut warnings = Vec::new();
    for w in roots.windows(2) {
        if w[1] - w[0] < 2.0 * cell {
            warnings.push(ScanWarning::ScanTooCoarse { lo: w[0], hi: w[1], found: 2, expected: None });
        }
    }
    if let Some(expected) = solver.sturm_count(lambda_min, lambda_max) {
        let found: usize = eigenpairs.iter().map(|p| p.multiplicity).sum();
        if found != expected {
            warnings.push(ScanWarning::ScanTooCoarse {
                lo: lambda_min,
                hi: lambda_max,
                found,
                expected: Some(expected),
            });
        }
    }

    let mut report = SpectrumReport {
        summary: problem_summary(problem),
        window: (lambda_min, lambda_max),
        eigenpairs,
        scan,
        witnesses: None,
        warnings,
        hermitian: problem.is_hermitian(),
    };
    if problem.is_hermitian() {
        let (gram, symmetry_defect) = symmetry_defect(&report, problem)?;
        let green = if options.green_pairs > 0 {
            Some(green_stats(problem, options.green_pairs, options.seed, options.control.h)?)
        } else {
            None
        };
        report.witnesses = Some(Witnesses { gram, symmetry_defect, green });
    }
    Ok(report)
}

fn bisect(solver: &BoundarySolver, mut lo: f64, mut hi: f64, sign_lo: f64, options: &SpectralOptions) -> Result<f64> {
    let tol = options.refine_tol * lo.abs().max(hi.abs()).max(1.0);
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let s = solver.evaluate(re(mid))?.unit().re;
        if s == 0.0 {
            return Ok(mid);
        }
        if s * sign_lo > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn golden_minimum(
    solver: &BoundarySolver,
    mut lo: f64,
    mut hi: f64,
    options: &SpectralOptions,
) -> Result<(f64, CharacteristicValue)> {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let tol = options.refine_tol * lo.abs().max(hi.abs()).max(1.0);
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let mut f1 = solver.evaluate(re(x1))?;
    let mut f2 = solver.evaluate(re(x2))?;
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        if f1.sigma_min() <= f2.sigma_min() {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = solver.evaluate(re(x1))?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = solver.evaluate(re(x2))?;
        }
    }
    Ok(if f1.sigma_min() <= f2.sigma_min() { (x1, f1) } else { (x2, f2) })
}

/// Secant iteration on `D` in the complex plane, started off the real axis.
fn polish_complex(solver: &BoundarySolver, lambda: f64) -> Result<Complex64> {
    let scale = lambda.abs().max(1.0);
    let reference = solver.evaluate(re(lambda))?.log_scale;
    let f = |z: Complex64| -> Result<Complex64> {
        let v = solver.evaluate(z)?;
        Ok(v.mantissa * v.phase * (v.log_scale - reference).exp())
    };
    let mut z0 = Complex64::new(lambda, 0.0) + Complex64::new(1e-6, 1e-6) * scale;
    let mut z1 = Complex64::new(lambda, 0.0);
    let mut f0 = f(z0)?;
    let mut f1 = f(z1)?;
    for _ in 0..60 {
        if f1 == ZERO || f1 == f0 {
            break;
        }
        let z2 = z1 - f1 * (z1 - z0) / (f1 - f0);
        if !(z2.re.is_finite() && z2.im.is_finite()) {
            break;
        }
        let done = (z2 - z1).norm() <= 1e-14 * scale;
        z0 = z1;
        f0 = f1;
        z1 = z2;
        f1 = f(z1)?;
        if done {
            break;
        }
    }
    Ok(z1)
}

/// Eigenfunction(s) at an eigenvalue by two-sided shooting, matched at the
/// interval midpoint.
pub fn eigenfunction(problem: &CanonicalProblem, lambda_star: f64, options: &SpectralOptions) -> Result<EigenPair> {
    eigenfunction_with(problem, lambda_star, options)
}

fn eigenfunction_with(problem: &CanonicalProblem, lambda: f64, options: &SpectralOptions) -> Result<EigenPair> {
    let (left, right) = bounded_frames(problem)?;
    let (a, b) = problem.interval();
    let control = options.control;
    let n_total = (((b - a) / control.h).ceil() as usize).max(2);
    let n_left = n_total / 2;
    let step = (b - a) / n_total as f64;
    let mid = a + step * n_left as f64;
    let lam = re(lambda);
    let left_disc = Discretization::with_steps(problem, a, mid, n_left, control)?;
    let right_disc = Discretization::with_steps(problem, b, mid, n_total - n_left, control)?;
    let fl = left_disc.propagate_frame(lam, &kernel_basis(&left).into_columns(), true)?;
    let fr = right_disc.propagate_frame(lam, &kernel_basis(&right).into_columns(), true)?;
    let d = problem.dim().half();

    let matching = linalg::hstack(&fl.columns, &fr.columns);
    let svd = matching.clone().svd(false, true);
    let v_t = svd.v_t.ok_or_else(|| Error::Numerical("SVD failed".into()))?;
    let mut order: Vec<usize> = (0..2 * d).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let sigma = |k: usize| svd.singular_values[order[k]];
    let sigma_min = sigma(2 * d - 1);
    if !(sigma_min <= MATCH_TOL) {
        return Err(Error::NotAnEigenvalue { lambda, sigma: sigma_min });
    }
    let top = sigma(0);
    let count = (0..2 * d).filter(|&k| sigma(k) <= options.rank_tol * top).count().max(1);

    let xs: Vec<f64> = (0..=n_total).map(|i| if i == n_total { b } else { a + step * i as f64 }).collect();
    let mut functions = Vec::with_capacity(count);
    for k in (2 * d - count)..2 * d {
        let w = v_t.row(order[k]).adjoint();
        let alpha = w.rows(0, d).into_owned();
        let beta = -w.rows(d, d).into_owned();
        let left_path = fl.solution_path(&alpha)?;
        let mut right_path = fr.solution_path(&beta)?;
        right_path.reverse();
        let mut values = left_path;
        values.extend(right_path.into_iter().skip(1));
        functions.push(SampledPath::new(xs.clone(), values)?);
    }

    // Gram-Schmidt in the H-inner product
    let mut basis: Vec<SampledPath> = Vec::with_capacity(count);
    for mut f in functions {
        for e in &basis {
            let c = h_inner(e, &f, problem)?;
            for (fv, ev) in f.values.iter_mut().zip(&e.values) {
                *fv -= ev * c;
            }
        }
        let norm = h_inner(&f, &f, problem)?.re;
        if !(norm > 0.0) {
            return Err(Error::ZeroHNorm);
        }
        f = f.scaled(re(1.0 / norm.sqrt()));
        basis.push(fix_phase(f));
    }

    let boundary_residual = basis
        .iter()
        .map(|f| {
            let peak = f.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
            let at_a = (left.rows() * &f.values[0]).norm();
            let at_b = (right.rows() * &f.values[f.len() - 1]).norm();
            at_a.max(at_b) / peak
        })
        .fold(0.0, f64::max);
    let ode_residual =
        basis.iter().map(|f| ode_residual(problem, lam, f)).collect::<Result<Vec<_>>>()?.into_iter().fold(0.0, f64::max);

    Ok(EigenPair {
        lambda,
        lambda_imag: 0.0,
        multiplicity: count,
        eigenfunctions: basis,
        boundary_residual,
        ode_residual,
        match_sigma: sigma_min,
    })
}

/// Makes the first non-negligible value of the first non-vanishing
/// component real and positive.
fn fix_phase(f: SampledPath) -> SampledPath {
    let peak = f.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let threshold = 1e-8 * peak;
    let width = f.values.first().map_or(0, |v| v.len());
    for k in 0..width {
        if let Some(z) = f.values.iter().map(|v| v[k]).find(|z| z.norm() > threshold) {
            let phase = z.conj() / z.norm();
            return f.scaled(phase);
        }
    }
    f
}

fn uniform_step(xs: &[f64]) -> Result<f64> {
    let h = (xs[xs.len() - 1] - xs[0]) / (xs.len() - 1) as f64;
    let uniform = xs.windows(2).all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h.abs());
    if !uniform {
        return Err(Error::InvalidParameter("finite differences need a uniform grid".into()));
    }
    Ok(h)
}

/// Fourth-order central differences in the interior, second order at the
/// two points next to each end and first order at the ends.
pub fn derivative(path: &SampledPath) -> Result<Vec<CVec>> {
    let h = uniform_step(&path.xs)?;
    let y = &path.values;
    let n = y.len();
    let mut dy = Vec::with_capacity(n);
    for i in 0..n {
        let v = if i >= 2 && i + 2 < n {
            (&y[i - 2] - &y[i + 2] + (&y[i + 1] - &y[i - 1]) * re(8.0)) / re(12.0 * h)
        } else if i >= 1 && i + 1 < n {
            (&y[i + 1] - &y[i - 1]) / re(2.0 * h)
        } else if i == 0 {
            (&y[1] - &y[0]) / re(h)
        } else {
            (&y[n - 1] - &y[n - 2]) / re(h)
        };
        dy.push(v);
    }
    Ok(dy)
}

/// `max ‖J y' − (C₀ + λC₁) y‖ / (max ‖y'‖ + max ‖(C₀ + λC₁) y‖)` over the
/// interior points where the fourth-order stencil applies.
pub fn ode_residual(problem: &CanonicalProblem, lambda: Complex64, path: &SampledPath) -> Result<f64> {
    let dy = derivative(path)?;
    let n = path.len();
    let (mut worst, mut dnorm, mut pnorm) = (0.0f64, 0.0f64, 0.0f64);
    for i in 2..n.saturating_sub(2) {
        let x = path.xs[i];
        let py = problem.pencil_at(x, lambda) * &path.values[i];
        let r = problem.pencil_residual(x, lambda, &path.values[i], &dy[i]);
        worst = worst.max(r.norm());
        dnorm = dnorm.max(dy[i].norm());
        pnorm = pnorm.max(py.norm());
    }
    Ok(worst / (dnorm + pnorm).max(f64::MIN_POSITIVE))
}

fn trapezoid_weights(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    (0..n)
        .map(|i| {
            let left = if i == 0 { 0.0 } else { xs[i] - xs[i - 1] };
            let right = if i + 1 == n { 0.0 } else { xs[i + 1] - xs[i] };
            0.5 * (left + right)
        })
        .collect()
}

/// `⟨f, g⟩ = ∫ f*(x) W(x) g(x) dx` by the trapezoid rule, `W` the problem
/// weight.
pub fn h_inner(f: &SampledPath, g: &SampledPath, problem: &CanonicalProblem) -> Result<Complex64> {
    if f.xs != g.xs {
        return Err(Error::GridMismatch);
    }
    let weights = trapezoid_weights(&f.xs);
    let weight = problem.weight();
    let mut total = ZERO;
    for ((x, w), (fv, gv)) in f.xs.iter().zip(&weights).zip(f.values.iter().zip(&g.values)) {
        let wg = weight.eval(*x) * gv;
        total += fv.dotc(&wg) * w;
    }
    Ok(total)
}

fn l2_inner(f: &[CVec], g: &[CVec], weights: &[f64]) -> Complex64 {
    f.iter().zip(g).zip(weights).map(|((a, b), w)| a.dotc(b) * w).sum()
}

/// Both pairings of the Green identity and their discrepancy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreenResidual {
    pub residual: f64,
    /// Sum of the magnitudes of the four terms.
    pub scale: f64,
}

impl GreenResidual {
    pub fn relative(&self) -> f64 {
        self.residual / self.scale.max(f64::MIN_POSITIVE)
    }
}

/// A pair `(u, v)` in the maximal relation: `J u' = C₀ u + W v`.
#[derive(Debug, Clone, PartialEq)]
pub struct RelationPair {
    pub u: SampledPath,
    pub v: SampledPath,
}

/// `|⟨u, g⟩ − ⟨v, f⟩ − (u*(b) J f(b) − u*(a) J f(a))|` for relation pairs
/// `(u, v)` and `(f, g)`.
pub fn greens_identity_residual(
    pair1: (&SampledPath, &SampledPath),
    pair2: (&SampledPath, &SampledPath),
    problem: &CanonicalProblem,
) -> Result<GreenResidual> {
    let (u, v) = pair1;
    let (f, g) = pair2;
    if u.xs != v.xs || u.xs != f.xs || u.xs != g.xs {
        return Err(Error::GridMismatch);
    }
    let ug = h_inner(u, g, problem)?;
    let vf = h_inner(v, f, problem)?;
    let n = u.len();
    let pairing = |i: usize| {
        let jf = linalg::apply_j(&CMat::from_column_slice(f.values[i].len(), 1, f.values[i].as_slice()));
        u.values[i].dotc(&jf.column(0).into_owned())
    };
    let (end, start) = (pairing(n - 1), pairing(0));
    let residual = (ug - vf - (end - start)).norm();
    let scale = ug.norm() + vf.norm() + end.norm() + start.norm();
    Ok(GreenResidual { residual, scale })
}

/// Random smooth `v` (low-order trigonometric polynomial with seeded complex
/// coefficients) and the `u` obtained by integrating `u' = J⁻¹(C₀ u + W v)`
/// from a random initial value with classical RK4 on a uniform grid.
pub fn random_relation_pair<R: Rng + ?Sized>(problem: &CanonicalProblem, steps: usize, rng: &mut R) -> Result<RelationPair> {
    if steps < 2 {
        return Err(Error::InvalidParameter("relation pairs need at least two steps".into()));
    }
    let n = problem.dim().ambient();
    let (a, b) = problem.interval();
    const MODES: usize = 3;
    let mut coeff = || Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let sin_c: Vec<Vec<Complex64>> = (0..MODES).map(|_| (0..n).map(|_| coeff()).collect()).collect();
    let cos_c: Vec<Vec<Complex64>> = (0..MODES).map(|_| (0..n).map(|_| coeff()).collect()).collect();
    let u0 = CVec::from_iterator(n, (0..n).map(|_| coeff()));
    let v_at = |x: f64| {
        let t = std::f64::consts::PI * (x - a) / (b - a);
        // sin(kt), cos(kt) by angle addition
        let (s1, c1) = t.sin_cos();
        let mut v = CVec::zeros(n);
        let (mut sk, mut ck) = (s1, c1);
        for k in 0..MODES {
            for c in 0..n {
                v[c] += sin_c[k][c] * sk + cos_c[k][c] * ck;
            }
            (sk, ck) = (sk * c1 + ck * s1, ck * c1 - sk * s1);
        }
        v
    };
    let c0 = &problem.pencil().c0;
    let weight = problem.weight();
    let h = (b - a) / steps as f64;
    let xs: Vec<f64> = (0..=steps).map(|i| if i == steps { b } else { a + h * i as f64 }).collect();
    // generator J⁻¹C₀ and forcing J⁻¹Wv on the half-step grid, flat row-major
    let d = n / 2;
    let nodes = 2 * steps + 1;
    let mut gens = vec![ZERO; nodes * n * n];
    let mut forcing = vec![ZERO; nodes * n];
    let mut vs = Vec::with_capacity(steps + 1);
    let j_inv_row = |i: usize| if i < d { (i + d, -1.0) } else { (i - d, 1.0) };
    for k in 0..nodes {
        let x = if k + 1 == nodes { b } else { a + 0.5 * h * k as f64 };
        let v = v_at(x);
        let c = c0.eval(x);
        let f = weight.eval(x) * &v;
        for i in 0..n {
            let (src, sign) = j_inv_row(i);
            forcing[k * n + i] = f[src] * sign;
            for j in 0..n {
                gens[(k * n + i) * n + j] = c[(src, j)] * sign;
            }
        }
        if k % 2 == 0 {
            vs.push(v);
        }
    }
    let rhs = |k: usize, u: &[Complex64], out: &mut [Complex64]| {
        for i in 0..n {
            let row = &gens[(k * n + i) * n..(k * n + i + 1) * n];
            out[i] = forcing[k * n + i] + row.iter().zip(u).map(|(g, y)| g * y).sum::<Complex64>();
        }
    };
    let mut us = Vec::with_capacity(steps + 1);
    let mut u: Vec<Complex64> = u0.iter().copied().collect();
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (vec![ZERO; n], vec![ZERO; n], vec![ZERO; n], vec![ZERO; n], vec![ZERO; n]);
    us.push(u0);
    for i in 0..steps {
        rhs(2 * i, &u, &mut k1);
        for c in 0..n {
            tmp[c] = u[c] + k1[c] * (0.5 * h);
        }
        rhs(2 * i + 1, &tmp, &mut k2);
        for c in 0..n {
            tmp[c] = u[c] + k2[c] * (0.5 * h);
        }
        rhs(2 * i + 1, &tmp, &mut k3);
        for c in 0..n {
            tmp[c] = u[c] + k3[c] * h;
        }
        rhs(2 * i + 2, &tmp, &mut k4);
        for c in 0..n {
            u[c] += (k1[c] + (k2[c] + k3[c]) * 2.0 + k4[c]) * (h / 6.0);
        }
        us.push(CVec::from_column_slice(&u));
    }

    Ok(RelationPair { u: SampledPath::new(xs.clone(), us)?, v: SampledPath::new(xs, vs)? })
}

/// Green residuals over seeded random relation pairs (consecutive pairs
/// are paired with each other).
pub fn green_stats(problem: &CanonicalProblem, pairs: usize, seed: u64, h: f64) -> Result<GreenStats> {
    let (a, b) = problem.interval();
    let steps = (((b - a) / h).ceil() as usize).max(2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_relative: f64 = 0.0;
    let mut total = 0.0;
    let mut previous = random_relation_pair(problem, steps, &mut rng)?;
    for _ in 0..pairs {
        let next = random_relation_pair(problem, steps, &mut rng)?;
        let r = greens_identity_residual((&previous.u, &previous.v), (&next.u, &next.v), problem)?;
        max_relative = max_relative.max(r.relative());
        total += r.relative();
        previous = next;
    }
    Ok(GreenStats { pairs, max_relative, mean_relative: if pairs == 0 { 0.0 } else { total / pairs as f64 } })
}

/// Gram matrix `⟨y_m, y_n⟩_H` over all eigenfunctions of a report and the
/// symmetry defects `|⟨λ_m W y_m, y_n⟩ − ⟨y_m, λ_n W y_n⟩| =
/// |conj(λ_m) − λ_n| · |⟨y_m, y_n⟩_H|`.
pub fn symmetry_defect(report: &SpectrumReport, problem: &CanonicalProblem) -> Result<(Vec<Vec<Complex64>>, Vec<Vec<f64>>)> {
    let modes: Vec<(Complex64, &SampledPath)> = report
        .eigenpairs
        .iter()
        .flat_map(|p| p.eigenfunctions.iter().map(move |f| (p.complex_lambda(), f)))
        .collect();
    let k = modes.len();
    let mut gram = vec![vec![ZERO; k]; k];
    let mut defect = vec![vec![0.0; k]; k];
    for m in 0..k {
        for n in 0..k {
            let g = h_inner(modes[m].1, modes[n].1, problem)?;
            gram[m][n] = g;
            defect[m][n] = ((modes[m].0.conj() - modes[n].0) * g).norm();
        }
    }
    Ok((gram, defect))
}

/// `Re ∫ y*(J y' − C₀ y) dx / ∫ y* W y dx`: the L² pairing in the
/// numerator, the weighted one in the denominator. For an eigenfunction
/// `J y' − C₀ y = λ W y`, so the quotient returns `λ`.
pub fn rayleigh_quotient(y: &SampledPath, problem: &CanonicalProblem) -> Result<f64> {
    let dy = derivative(y)?;
    let weights = trapezoid_weights(&y.xs);
    let c0 = &problem.pencil().c0;
    let lhs: Vec<CVec> = y
        .xs
        .iter()
        .zip(&y.values)
        .zip(&dy)
        .map(|((&x, v), d)| {
            let jd = linalg::apply_j(&CMat::from_column_slice(d.len(), 1, d.as_slice())).column(0).into_owned();
            jd - c0.eval(x) * v
        })
        .collect();
    let numerator = l2_inner(&y.values, &lhs, &weights);
    let denominator = h_inner(y, y, problem)?.re;
    if !(denominator > 0.0) {
        return Err(Error::ZeroHNorm);
    }
    Ok(numerator.re / denominator)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{
        sturm_liouville_to_canonical, traveling_wave_to_canonical, BoundaryCondition, CoefficientPencil,
        HamiltonianField, MatrixField, ScalarFn,
    };
    use crate::linalg::real_diag;
    use crate::symplectic::SymplecticDim;
    use std::f64::consts::PI;

    fn dirichlet(d: usize) -> BoundaryCondition {
        BoundaryCondition::Frame(LagrangianFrame::dirichlet(SymplecticDim::new(d).unwrap()))
    }

    fn laplacian(q: f64) -> CanonicalProblem {
        sturm_liouville_to_canonical(
            ScalarFn::Constant(1.0),
            ScalarFn::Constant(q),
            ScalarFn::Constant(1.0),
            Geometry::Bounded { a: 0.0, b: PI },
            dirichlet(1),
            dirichlet(1),
        )
        .unwrap()
    }

    fn double_laplacian() -> CanonicalProblem {
        let dim = SymplecticDim::new(2).unwrap();
        // state (u1, u2, -u1', -u2'): C0 = diag(0, 0, 1, 1), C1 = W = diag(1, 1, 0, 0)
        let w = real_diag(&[1.0, 1.0, 0.0, 0.0]);
        CanonicalProblem::new(
            dim,
            CoefficientPencil {
                c0: MatrixField::constant(real_diag(&[0.0, 0.0, 1.0, 1.0])),
                c1: MatrixField::constant(w.clone()),
                hermitian: true,
            },
            Geometry::Bounded { a: 0.0, b: PI },
            dirichlet(2),
            dirichlet(2),
            HamiltonianField::new(dim, MatrixField::constant(w)).unwrap(),
            ProblemKind::RawPencil,
        )
        .unwrap()
    }

    #[test]
    fn characteristic_function_vanishes_at_squares() {
        let p = laplacian(0.0);
        let solver = BoundarySolver::new(&p, StepControl::default()).unwrap();
        for n in 1..=3 {
            let v = solver.evaluate(re((n * n) as f64)).unwrap().value();
            assert!(v.norm() < 1e-8, "n = {n}: {v}");
        }
        let mid = solver.evaluate(re(0.5)).unwrap().value();
        // u(π) = sin(√λ π)/√λ for u(0) = 0, u'(0) = 1
        let expected = (0.5f64.sqrt() * PI).sin() / 0.5f64.sqrt();
        assert!((mid.re.abs() - expected.abs()).abs() < 1e-8);
    }

    #[test]
    fn zero_length_limit_of_the_characteristic_function() {
        // T = I: D = det(B J Θ*), which is det(Θ J Θ*) = 0 for B = Θ
        let p = sturm_liouville_to_canonical(
            ScalarFn::Constant(1.0),
            ScalarFn::Constant(0.0),
            ScalarFn::Constant(1.0),
            Geometry::Bounded { a: 0.0, b: 1e-9 },
            dirichlet(1),
            dirichlet(1),
        )
        .unwrap();
        let d = characteristic_function(&p, re(3.0), StepControl::default()).unwrap();
        assert!(d.norm() < 1e-8);
        let mixed = p
            .with_boundary(
                p.geometry(),
                dirichlet(1),
                BoundaryCondition::Frame(LagrangianFrame::neumann(SymplecticDim::new(1).unwrap())),
            )
            .unwrap();
        let d = characteristic_function(&mixed, re(3.0), StepControl::default()).unwrap();
        assert!((d - re(-1.0)).norm() < 1e-8, "{d}");
    }

    #[test]
    fn laplacian_spectrum() {
        let p = laplacian(0.0);
        let report = eigenvalues_in(&p, 0.5, 26.0, 400, &SpectralOptions::default()).unwrap();
        let lams: Vec<f64> = report.eigenpairs.iter().map(|e| e.lambda).collect();
        assert_eq!(lams.len(), 5, "{lams:?}");
        for (k, l) in lams.iter().enumerate() {
            let exact = ((k + 1) * (k + 1)) as f64;
            assert!((l - exact).abs() <= 1e-6 * exact, "{l} vs {exact}");
        }
        assert!(report.warnings.is_empty(), "{:?}", report.warnings);
        for e in &report.eigenpairs {
            assert_eq!(e.multiplicity, 1);
            assert!(e.boundary_residual <= DEFAULT_BC_TOL);
            assert!(e.ode_residual <= DEFAULT_ODE_TOL, "{}", e.ode_residual);
            assert!(e.lambda_imag.abs() <= 1e-8);
        }
    }

    #[test]
    fn shifted_spectrum_and_empty_window() {
        let p = laplacian(2.5);
        let report = eigenvalues_in(&p, 0.0, 12.0, 200, &SpectralOptions::default()).unwrap();
        let lams: Vec<f64> = report.eigenpairs.iter().map(|e| e.lambda).collect();
        assert_eq!(lams.len(), 3);
        for (l, n) in lams.iter().zip([1.0, 2.0, 3.0]) {
            assert!((l - n * n - 2.5).abs() < 1e-8);
        }
        let empty = eigenvalues_in(&p, -5.0, 3.0, 50, &SpectralOptions::default()).unwrap();
        assert!(empty.eigenpairs.is_empty());
        assert_eq!(empty.scan.len(), 50);
    }

    #[test]
    fn sine_eigenfunctions() {
        let p = laplacian(0.0);
        for n in [1.0f64, 2.0] {
            let pair = eigenfunction(&p, n * n, &SpectralOptions::default()).unwrap();
            let f = pair.eigenfunction();
            // unit H-norm: ∫ c² sin²(nx) = c² π/2
            let c = (2.0 / PI).sqrt();
            let dev = f
                .xs
                .iter()
                .zip(&f.values)
                .map(|(x, v)| (v[0] - re(c * (n * x).sin())).norm())
                .fold(0.0, f64::max);
            assert!(dev <= 1e-6, "n = {n}: {dev:e}");
            assert!((h_inner(f, f, &p).unwrap().re - 1.0).abs() < 1e-8);
        }
        assert!(matches!(eigenfunction(&p, 2.0, &SpectralOptions::default()), Err(Error::NotAnEigenvalue { .. })));
    }

    #[test]
    fn double_eigenvalue_from_two_copies() {
        let p = double_laplacian();
        let report = eigenvalues_in(&p, 0.5, 5.0, 100, &SpectralOptions::default()).unwrap();
        assert_eq!(report.eigenpairs.len(), 2);
        for (pair, exact) in report.eigenpairs.iter().zip([1.0, 4.0]) {
            assert!((pair.lambda - exact).abs() < 1e-8, "{}", pair.lambda);
            assert_eq!(pair.multiplicity, 2);
            assert_eq!(pair.eigenfunctions.len(), 2);
            let g = h_inner(&pair.eigenfunctions[0], &pair.eigenfunctions[1], &p).unwrap();
            assert!(g.norm() < 1e-10);
        }
    }

    #[test]
    fn traveling_wave_closed_forms() {
        let free = traveling_wave_to_canonical(
            ScalarFn::Constant(0.0),
            ScalarFn::Constant(0.0),
            Geometry::Bounded { a: 0.0, b: PI },
            dirichlet(1),
            dirichlet(1),
        )
        .unwrap();
        let r = eigenvalues_in(&free, -10.0, -0.5, 300, &SpectralOptions::default()).unwrap();
        let lams: Vec<f64> = r.eigenpairs.iter().map(|e| e.lambda).collect();
        assert_eq!(lams.len(), 3);
        for (l, n) in lams.iter().zip([3.0f64, 2.0, 1.0]) {
            assert!((l + n * n).abs() < 1e-8);
        }
        let damped = traveling_wave_to_canonical(
            ScalarFn::Constant(1.0),
            ScalarFn::Constant(0.0),
            Geometry::Bounded { a: 0.0, b: PI },
            dirichlet(1),
            dirichlet(1),
        )
        .unwrap();
        assert!(!damped.is_hermitian());
        let r = eigenvalues_in(&damped, -10.0, -0.5, 300, &SpectralOptions::default()).unwrap();
        assert!(r.witnesses.is_none());
        let lams: Vec<f64> = r.eigenpairs.iter().map(|e| e.lambda).collect();
        assert_eq!(lams.len(), 3, "{lams:?}");
        for (l, n) in lams.iter().zip([3.0f64, 2.0, 1.0]) {
            assert!((l + 0.25 + n * n).abs() < 1e-8, "{l}");
        }
    }

    #[test]
    fn frame_gauge_leaves_zeros_unchanged() {
        let dim = SymplecticDim::new(1).unwrap();
        let alpha = LagrangianFrame::alpha(dim, 0.4);
        let u = CMat::from_element(1, 1, Complex64::from_polar(1.0, 1.1));
        let rotated = alpha.left_multiply(&u, 1e-10).unwrap();
        let base = laplacian(0.0);
        let mk = |f: &LagrangianFrame| {
            base.with_boundary(base.geometry(), dirichlet(1), BoundaryCondition::Frame(f.clone())).unwrap()
        };
        let (p1, p2) = (mk(&alpha), mk(&rotated));
        let r1 = eigenvalues_in(&p1, 0.1, 10.0, 200, &SpectralOptions::default()).unwrap();
        let r2 = eigenvalues_in(&p2, 0.1, 10.0, 200, &SpectralOptions::default()).unwrap();
        assert_eq!(r1.eigenpairs.len(), r2.eigenpairs.len());
        assert!(!r1.eigenpairs.is_empty());
        for (a, b) in r1.eigenpairs.iter().zip(&r2.eigenpairs) {
            assert!((a.lambda - b.lambda).abs() < 1e-9);
        }
    }

    #[test]
    fn h_inner_examples() {
        let p = laplacian(0.0);
        let xs: Vec<f64> = (0..=2000).map(|i| PI * i as f64 / 2000.0).collect();
        let path = |f: &dyn Fn(f64) -> (f64, f64)| {
            SampledPath::new(
                xs.clone(),
                xs.iter()
                    .map(|&x| {
                        let (a, b) = f(x);
                        CVec::from_vec(vec![re(a), re(b)])
                    })
                    .collect(),
            )
            .unwrap()
        };
        let s1 = path(&|x: f64| (x.sin(), 5.0));
        let s2 = path(&|x: f64| ((2.0 * x).sin(), -3.0));
        assert!(h_inner(&s1, &s2, &p).unwrap().norm() < 1e-8);
        // second components never contribute
        assert!((h_inner(&s1, &s1, &p).unwrap().re - PI / 2.0).abs() < 1e-6);
        let g = path(&|x: f64| (x.cos(), x));
        let (fg, gf) = (h_inner(&s1, &g, &p).unwrap(), h_inner(&g, &s1, &p).unwrap());
        assert!((fg - gf.conj()).norm() < 1e-12);
    }

    #[test]
    fn green_identity_on_random_pairs() {
        let p = laplacian(0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..5 {
            let a = random_relation_pair(&p, 20000, &mut rng).unwrap();
            let b = random_relation_pair(&p, 20000, &mut rng).unwrap();
            let r = greens_identity_residual((&a.u, &a.v), (&b.u, &b.v), &p).unwrap();
            assert!(r.relative() < 1e-8, "{:e}", r.relative());
            // broken hypothesis
            let bad_v = SampledPath::new(a.v.xs.clone(), a.v.values.iter().map(|v| v + CVec::from_element(2, re(0.1))).collect()).unwrap();
            let r = greens_identity_residual((&a.u, &bad_v), (&b.u, &b.v), &p).unwrap();
            assert!(r.relative() > 1e-4);
        }
    }

    #[test]
    fn symmetry_defect_diagonal_is_reality() {
        let p = laplacian(0.0);
        let mut report = eigenvalues_in(&p, 0.5, 10.0, 200, &SpectralOptions::default()).unwrap();
        let (gram, defect) = symmetry_defect(&report, &p).unwrap();
        for m in 0..gram.len() {
            for n in 0..gram.len() {
                if m != n {
                    assert!(gram[m][n].norm() < 1e-6);
                }
                assert!(defect[m][n] < 1e-6);
            }
        }
        report.eigenpairs[0].lambda_imag = 0.01;
        let (_, defect) = symmetry_defect(&report, &p).unwrap();
        assert!((defect[0][0] - 0.02).abs() < 1e-8);
    }

    #[test]
    fn rayleigh_quotient_properties() {
        let p = laplacian(0.0);
        let pair = eigenfunction(&p, 1.0, &SpectralOptions::default()).unwrap();
        let y = pair.eigenfunction();
        let r = rayleigh_quotient(y, &p).unwrap();
        assert!((r - 1.0).abs() < 1e-4, "{r}");
        let r5 = rayleigh_quotient(&y.scaled(re(5.0)), &p).unwrap();
        assert!((r5 - r).abs() < 1e-12);
    }

    #[test]
    fn sturm_count_matches_closed_form() {
        let p = laplacian(0.0);
        let solver = BoundarySolver::new(&p, StepControl::default()).unwrap();
        assert_eq!(solver.sturm_count(0.5, 26.0), Some(5));
        assert_eq!(solver.sturm_count(1.5, 3.5), Some(0));
        assert_eq!(solver.sturm_count(0.5, 9.5), Some(3));
    }

    #[test]
    fn coarse_scan_is_flagged() {
        let p = laplacian(0.0);
        let report = eigenvalues_in(&p, 0.5, 26.0, 3, &SpectralOptions::default()).unwrap();
        assert!(report.eigenpairs.len() < 5);
        assert!(report.warnings.iter().any(|w| matches!(w, ScanWarning::ScanTooCoarse { expected: Some(5), .. })));
    }
}
