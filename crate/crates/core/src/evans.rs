//! Spectra on the line and half-line through the Evans function.
//!
//! Decaying subspaces at `∓∞` come from spectral projectors of the
//! asymptotic generators `G± = J⁻¹(C₀(±∞) + λ C₁(±∞))`, computed with the
//! matrix sign function. Bases are `P(λ) V₀` for a fixed `V₀`, which keeps
//! the Evans function analytic in λ; the exponential growth of the frames
//! along `[−L, 0]` and `[0, L]` is divided out with `exp(ℓ tr(G P))`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{nls_zero_modes, BoundaryCondition, CanonicalProblem, ProblemKind, Side};
use crate::linalg::{self, re, CMat, ZERO};
use crate::propagate::{Discretization, Scheme, StepControl};
use crate::symplectic::{kernel_basis, SubspaceBasis, SymplecticDim};

pub const DEFAULT_GAP_TOL: f64 = 1e-6;
pub const DEFAULT_BAND_TOL: f64 = 1e-8;
pub const DEFAULT_N_SAMPLES: usize = 400;
pub const DEFAULT_EVANS_STEP: f64 = 0.02;
const MAX_DOUBLINGS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvansOptions {
    pub control: StepControl,
    pub gap_tol: f64,
    pub band_tol: f64,
    /// Samples per rectangle side.
    pub n_samples: usize,
    /// Point whose decaying subspaces fix the basis gauge. Defaults to the
    /// evaluation point, the contour center or the scan start.
    pub anchor: Option<Complex64>,
    /// When set, values are divided by `E(reference)`.
    pub reference: Option<Complex64>,
}

impl Default for EvansOptions {
    fn default() -> Self {
        Self {
            control: StepControl { h: DEFAULT_EVANS_STEP, scheme: Scheme::Magnus4, renorm_every: 20 },
            gap_tol: DEFAULT_GAP_TOL,
            band_tol: DEFAULT_BAND_TOL,
            n_samples: DEFAULT_N_SAMPLES,
            anchor: None,
            reference: None,
        }
    }
}

/// Constant limits of the pencil at `∓∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticSystem {
    dim: SymplecticDim,
    c0: [CMat; 2],
    c1: [CMat; 2],
}

impl AsymptoticSystem {
    pub fn new(dim: SymplecticDim, c0: [CMat; 2], c1: [CMat; 2]) -> Self {
        Self { dim, c0, c1 }
    }

    pub fn dim(&self) -> SymplecticDim {
        self.dim
    }

    /// `(C₀(±∞), C₁(±∞))`.
    pub fn limits(&self, side: Side) -> (&CMat, &CMat) {
        (&self.c0[side as usize], &self.c1[side as usize])
    }

    pub fn generator(&self, side: Side, lambda: Complex64) -> CMat {
        let i = side as usize;
        linalg::apply_j_inv(&(&self.c0[i] + &self.c1[i] * lambda))
    }

    /// Spatial eigenvalues `μ` of `G±(λ)`; modes behave like `e^{μx}`.
    pub fn spatial_eigenvalues(&self, side: Side, lambda: Complex64) -> Result<Vec<Complex64>> {
        linalg::eigenvalues(&self.generator(side, lambda))
    }

    /// Smallest `|Re μ|` over the spatial eigenvalues on one side.
    pub fn gap(&self, side: Side, lambda: Complex64) -> Result<f64> {
        Ok(self.spatial_eigenvalues(side, lambda)?.iter().map(|m| m.re.abs()).fold(f64::INFINITY, f64::min))
    }

    /// Spectral projector onto the modes decaying towards `side`:
    /// `Re μ < 0` at `+∞`, `Re μ > 0` at `−∞`.
    pub fn decaying_projector(&self, side: Side, lambda: Complex64, gap_tol: f64) -> Result<CMat> {
        let g = self.generator(side, lambda);
        let mu = linalg::eigenvalues(&g)?;
        if mu.iter().any(|m| m.re.abs() <= gap_tol) {
            return Err(Error::OnEssentialSpectrum { re: lambda.re, im: lambda.im });
        }
        let decaying = mu.iter().filter(|m| if side == Side::Plus { m.re < 0.0 } else { m.re > 0.0 }).count();
        let d = self.dim.half();
        if decaying != d {
            return Err(Error::UnbalancedDimensions { side: side.name(), found: decaying, expected: d });
        }
        let n = g.nrows();
        let s = linalg::matrix_sign(&g)?;
        let id = CMat::identity(n, n);
        Ok(match side {
            Side::Plus => (id - s) * re(0.5),
            Side::Minus => (id + s) * re(0.5),
        })
    }
}

/// Asymptotic generators of a line or half-line problem. Closed-form limits
/// are used when the coefficients carry them, otherwise the truncation
/// values (already checked against `decay_tol` at construction).
pub fn asymptotic_matrices(problem: &CanonicalProblem) -> Result<AsymptoticSystem> {
    if problem.geometry().is_bounded() {
        return Err(Error::UnsupportedGeometry { expected: "line or half-line" });
    }
    for (side, bc) in [(Side::Minus, problem.left()), (Side::Plus, problem.right())] {
        if *bc == BoundaryCondition::Asymptotic {
            let defect = problem.asymptotic_defect(side);
            if !(defect <= problem.decay_tol()) {
                return Err(Error::NoAsymptoticLimit { side: side.name(), defect });
            }
        }
    }
    let (m0, m1) = problem.asymptotic_coefficients(Side::Minus);
    let (p0, p1) = problem.asymptotic_coefficients(Side::Plus);
    Ok(AsymptoticSystem { dim: problem.dim(), c0: [m0, p0], c1: [m1, p1] })
}

/// Orthonormal basis of the solutions decaying towards `side`.
pub fn decaying_subspace(asys: &AsymptoticSystem, lambda: Complex64, side: Side, gap_tol: f64) -> Result<SubspaceBasis> {
    let p = asys.decaying_projector(side, lambda, gap_tol)?;
    SubspaceBasis::new(linalg::orthonormal_range(&p, asys.dim.half()), crate::symplectic::DEFAULT_RANK_TOL)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvansValue {
    pub lambda: Complex64,
    pub value: Complex64,
    /// `log E`, imaginary part not unwrapped.
    pub log_value: Complex64,
    /// Real part of the growth factor removed from the frames.
    pub log_scale: f64,
    /// Smallest principal angle between the two matched subspaces.
    pub conditioning: f64,
}

#[derive(Debug, Clone)]
enum Closure {
    /// Fixed kernel basis of a boundary frame.
    Frame(CMat),
    /// `P(λ) V₀` with the anchor basis `V₀`.
    Decaying(CMat),
}

/// Cached discretizations and basis gauge for repeated Evans evaluations.
#[derive(Debug, Clone)]
pub struct EvansSolver<'a> {
    problem: &'a CanonicalProblem,
    asys: AsymptoticSystem,
    left: (Closure, Discretization, f64),
    right: (Closure, Discretization, f64),
    options: EvansOptions,
    reference_log: Option<Complex64>,
}

impl<'a> EvansSolver<'a> {
    pub fn new(problem: &'a CanonicalProblem, anchor: Complex64, options: EvansOptions) -> Result<Self> {
        let asys = asymptotic_matrices(problem)?;
        let (a, b) = problem.interval();
        let matching = if a < 0.0 && b > 0.0 { 0.0 } else { 0.5 * (a + b) };
        let closure = |bc: &BoundaryCondition, side: Side| -> Result<Closure> {
            Ok(match bc {
                BoundaryCondition::Frame(f) => Closure::Frame(kernel_basis(f).into_columns()),
                BoundaryCondition::Asymptotic => {
                    Closure::Decaying(decaying_subspace(&asys, anchor, side, options.gap_tol)?.into_columns())
                }
            })
        };
        let left = (
            closure(problem.left(), Side::Minus)?,
            Discretization::new(problem, a, matching, options.control)?,
            matching - a,
        );
        let right = (
            closure(problem.right(), Side::Plus)?,
            Discretization::new(problem, b, matching, options.control)?,
            b - matching,
        );
        let mut solver = Self { problem, asys, left, right, options, reference_log: None };
        if let Some(r) = options.reference {
            solver.reference_log = Some(solver.raw(r)?.0);
        }
        Ok(solver)
    }

    /// Replaces the boundary basis on one side by `basis · m`. A unimodular
    /// `m` leaves `E` unchanged.
    pub fn recombine(&mut self, side: Side, m: &CMat) -> Result<()> {
        let closure = match side {
            Side::Minus => &mut self.left.0,
            Side::Plus => &mut self.right.0,
        };
        let basis = match closure {
            Closure::Frame(k) | Closure::Decaying(k) => k,
        };
        if m.nrows() != basis.ncols() || m.ncols() != basis.ncols() {
            return Err(Error::DimensionMismatch { expected: basis.ncols(), found: m.nrows() });
        }
        *basis = &*basis * m;
        Ok(())
    }

    pub fn asymptotics(&self) -> &AsymptoticSystem {
        &self.asys
    }

    pub fn problem(&self) -> &CanonicalProblem {
        self.problem
    }

    /// `(log E, log scale, conditioning)` before the reference division.
    fn raw(&self, lambda: Complex64) -> Result<(Complex64, f64, f64)> {
        let mut log_total = ZERO;
        let mut frames = Vec::with_capacity(2);
        for (side, (closure, disc, length)) in [(Side::Minus, &self.left), (Side::Plus, &self.right)] {
            let (start, growth) = match closure {
                Closure::Frame(k) => (k.clone(), ZERO),
                Closure::Decaying(v0) => {
                    let p = self.asys.decaying_projector(side, lambda, self.options.gap_tol)?;
                    let g = self.asys.generator(side, lambda);
                    let rate = (&g * &p).trace();
                    // frames grow like exp(ℓ tr(G₋P₋)) forward and exp(−ℓ tr(G₊P₊)) backward
                    let growth = match side {
                        Side::Minus => rate * *length,
                        Side::Plus => -rate * *length,
                    };
                    (p * v0, growth)
                }
            };
            let frame = disc.propagate_frame(lambda, &start, false)?;
            log_total += Complex64::new(frame.log_scale, frame.phase.arg()) - growth;
            frames.push(frame.columns);
        }
        let conditioning = linalg::min_principal_angle(&frames[0], &frames[1]);
        let det = linalg::hstack(&frames[0], &frames[1]).determinant();
        let log_scale = log_total.re;
        Ok((det.ln() + log_total, log_scale, conditioning))
    }

    pub fn evaluate(&self, lambda: Complex64) -> Result<EvansValue> {
        let (mut log_value, log_scale, conditioning) = self.raw(lambda)?;
        if let Some(r) = self.reference_log {
            log_value -= r;
        }
        Ok(EvansValue { lambda, value: log_value.exp(), log_value, log_scale, conditioning })
    }

    /// Margin check for contour points: every spatial eigenvalue on an
    /// asymptotic side must satisfy `|Re μ| > 2 gap_tol`.
    fn check_margin(&self, lambda: Complex64) -> Result<()> {
        for (side, bc) in [(Side::Minus, self.problem.left()), (Side::Plus, self.problem.right())] {
            if *bc == BoundaryCondition::Asymptotic && self.asys.gap(side, lambda)? <= 2.0 * self.options.gap_tol {
                return Err(Error::ContourTouchesEssentialSpectrum { re: lambda.re, im: lambda.im });
            }
        }
        Ok(())
    }
}

/// `E(λ)` with the gauge fixed at `options.anchor` (default `λ`).
pub fn evans_function(problem: &CanonicalProblem, lambda: Complex64, options: &EvansOptions) -> Result<EvansValue> {
    let anchor = options.anchor.unwrap_or(lambda);
    EvansSolver::new(problem, anchor, *options)?.evaluate(lambda)
}

/// Axis-aligned rectangle `[re0, re1] × [im0, im1]` in the λ-plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rectangle {
    pub re0: f64,
    pub re1: f64,
    pub im0: f64,
    pub im1: f64,
}

impl Rectangle {
    pub fn new(re0: f64, re1: f64, im0: f64, im1: f64) -> Result<Self> {
        if !(re1 > re0 && im1 > im0) {
            return Err(Error::InvalidParameter(format!("degenerate rectangle [{re0}, {re1}] x [{im0}, {im1}]")));
        }
        Ok(Self { re0, re1, im0, im1 })
    }

    pub fn center(&self) -> Complex64 {
        Complex64::new(0.5 * (self.re0 + self.re1), 0.5 * (self.im0 + self.im1))
    }

    /// Counterclockwise boundary samples, `n` per side, starting at the
    /// lower-left corner (the closing point is not repeated).
    pub fn boundary(&self, n: usize) -> Vec<Complex64> {
        let corners = [
            Complex64::new(self.re0, self.im0),
            Complex64::new(self.re1, self.im0),
            Complex64::new(self.re1, self.im1),
            Complex64::new(self.re0, self.im1),
        ];
        let mut pts = Vec::with_capacity(4 * n);
        for k in 0..4 {
            let (p, q) = (corners[k], corners[(k + 1) % 4]);
            for i in 0..n {
                pts.push(p + (q - p) * (i as f64 / n as f64));
            }
        }
        pts
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindingReport {
    pub contour: Rectangle,
    pub n_samples: usize,
    pub count: i64,
    /// Unrounded winding number.
    pub winding: f64,
    /// `(1/2πi) ∮ λ E'/E dλ`: the sum of the enclosed zeros.
    pub moment: Complex64,
    pub min_conditioning: f64,
    pub max_phase_jump: f64,
}

impl WindingReport {
    /// Mean location of the enclosed zeros.
    pub fn mean_zero(&self) -> Option<Complex64> {
        (self.count != 0).then(|| self.moment / self.count as f64)
    }
}

/// Number of zeros of `E` inside the rectangle, with multiplicity, by the
/// argument principle. The sample count per side doubles (up to four
/// times) while adjacent samples differ in phase by `π/2` or more.
pub fn count_zeros_winding(problem: &CanonicalProblem, contour: Rectangle, options: &EvansOptions) -> Result<WindingReport> {
    let asys = asymptotic_matrices(problem)?;
    let sides: Vec<Side> = [(Side::Minus, problem.left()), (Side::Plus, problem.right())]
        .into_iter()
        .filter(|(_, bc)| **bc == BoundaryCondition::Asymptotic)
        .map(|(s, _)| s)
        .collect();
    let clear = |z: Complex64| -> Result<bool> {
        for &s in &sides {
            if asys.gap(s, z)? <= 2.0 * options.gap_tol {
                return Ok(false);
            }
        }
        Ok(true)
    };
    for z in contour.boundary(options.n_samples.max(1)) {
        if !clear(z)? {
            return Err(Error::ContourTouchesEssentialSpectrum { re: z.re, im: z.im });
        }
    }
    let anchor = match options.anchor {
        Some(a) => a,
        None if clear(contour.center())? => contour.center(),
        None => Complex64::new(contour.re0, contour.im0),
    };
    let solver = EvansSolver::new(problem, anchor, *options)?;
    winding_with(&solver, contour, options.n_samples)
}

pub fn winding_with(solver: &EvansSolver, contour: Rectangle, n_samples: usize) -> Result<WindingReport> {
    let mut n = n_samples.max(1);
    for attempt in 0..=MAX_DOUBLINGS {
        let pts = contour.boundary(n);
        for &z in &pts {
            solver.check_margin(z)?;
        }
        let values: Vec<EvansValue> = pts.iter().map(|&z| solver.evaluate(z)).collect::<Result<_>>()?;
        let mut total = ZERO;
        let mut moment = ZERO;
        let mut max_jump: f64 = 0.0;
        for k in 0..values.len() {
            let (a, b) = (&values[k], &values[(k + 1) % values.len()]);
            let mut dlog = b.log_value - a.log_value;
            dlog.im = wrap(dlog.im);
            max_jump = max_jump.max(dlog.im.abs());
            total += dlog;
            moment += (a.lambda + b.lambda) * 0.5 * dlog;
        }
        if max_jump >= std::f64::consts::FRAC_PI_2 {
            if attempt == MAX_DOUBLINGS {
                return Err(Error::PhaseJumpTooLarge { jump: max_jump, n_samples: n });
            }
            n *= 2;
            continue;
        }
        let two_pi_i = Complex64::new(0.0, 2.0 * std::f64::consts::PI);
        let winding = total.im / (2.0 * std::f64::consts::PI);
        return Ok(WindingReport {
            contour,
            n_samples: n,
            count: winding.round() as i64,
            winding,
            moment: moment / two_pi_i,
            min_conditioning: values.iter().map(|v| v.conditioning).fold(f64::INFINITY, f64::min),
            max_phase_jump: max_jump,
        });
    }
    unreachable!("loop returns on its last attempt")
}

fn wrap(angle: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let r = angle.rem_euclid(two_pi);
    if r > std::f64::consts::PI { r - two_pi } else { r }
}

/// Real interval of essential spectrum; infinite ends mean the band
/// reaches past the classified window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EssentialSpectrumBands {
    pub bands: Vec<Band>,
    pub window: (f64, f64),
}

impl EssentialSpectrumBands {
    pub fn contains(&self, lambda: f64) -> bool {
        self.bands.iter().any(|b| lambda >= b.lo && lambda <= b.hi)
    }
}

impl std::fmt::Display for EssentialSpectrumBands {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.bands.is_empty() {
            return write!(f, "empty");
        }
        let parts: Vec<String> = self
            .bands
            .iter()
            .map(|b| {
                let lo = if b.lo == f64::NEG_INFINITY { "(-inf".to_string() } else { format!("[{}", fmt_edge(b.lo)) };
                let hi = if b.hi == f64::INFINITY { "inf)".to_string() } else { format!("{}]", fmt_edge(b.hi)) };
                format!("{lo}, {hi}")
            })
            .collect();
        write!(f, "{}", parts.join(" U "))
    }
}

fn fmt_edge(x: f64) -> String {
    let r = (x * 1e6).round() / 1e6;
    if r == 0.0 { "0".to_string() } else { format!("{r}") }
}

pub const DEFAULT_BAND_GRID: usize = 2001;

/// Real λ in `window` whose asymptotic systems admit a bounded oscillatory
/// mode (`|Re μ| ≤ band_tol` on either asymptotic side). Band edges are
/// refined by bisection; bands reaching the window ends are reported as
/// half-infinite.
pub fn essential_spectrum(
    problem: &CanonicalProblem,
    window: (f64, f64),
    n_grid: usize,
    options: &EvansOptions,
) -> Result<EssentialSpectrumBands> {
    let asys = asymptotic_matrices(problem)?;
    let sides: Vec<Side> = [(Side::Minus, problem.left()), (Side::Plus, problem.right())]
        .into_iter()
        .filter(|(_, bc)| **bc == BoundaryCondition::Asymptotic)
        .map(|(s, _)| s)
        .collect();
    let classify = |l: f64| -> Result<bool> {
        for &s in &sides {
            if asys.gap(s, re(l))? <= options.band_tol {
                return Ok(true);
            }
        }
        Ok(false)
    };
    let (lo, hi) = window;
    if !(hi > lo) || n_grid < 2 {
        return Err(Error::InvalidParameter("essential spectrum needs a nonempty window and two grid points".into()));
    }
    let grid: Vec<f64> = (0..n_grid).map(|i| lo + (hi - lo) * i as f64 / (n_grid - 1) as f64).collect();
    let flags: Vec<bool> = grid.iter().map(|&l| classify(l)).collect::<Result<_>>()?;
    let edge = |mut a: f64, mut b: f64, inside_at_a: bool| -> Result<f64> {
        for _ in 0..60 {
            let m = 0.5 * (a + b);
            if classify(m)? == inside_at_a {
                a = m;
            } else {
                b = m;
            }
        }
        Ok(if inside_at_a { a } else { b })
    };
    let mut bands = Vec::new();
    let mut start: Option<f64> = if flags[0] { Some(f64::NEG_INFINITY) } else { None };
    for i in 1..n_grid {
        match (flags[i - 1], flags[i]) {
            (false, true) => start = Some(edge(grid[i - 1], grid[i], false)?),
            (true, false) => {
                let end = edge(grid[i - 1], grid[i], true)?;
                bands.push(Band { lo: start.take().unwrap_or(f64::NEG_INFINITY), hi: end });
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        bands.push(Band { lo: s, hi: f64::INFINITY });
    }
    Ok(EssentialSpectrumBands { bands, window })
}

/// Evans values along a real window, with the gauge anchored at the first
/// sample point off the essential spectrum.
pub fn evans_scan(
    problem: &CanonicalProblem,
    lambda_min: f64,
    lambda_max: f64,
    n: usize,
    options: &EvansOptions,
) -> Result<Vec<Option<EvansValue>>> {
    let grid = real_grid(lambda_min, lambda_max, n)?;
    let solver = match scan_solver(problem, &grid, options)? {
        Some(s) => s,
        None => return Ok(vec![None; grid.len()]),
    };
    grid.iter()
        .map(|&l| match solver.evaluate(re(l)) {
            Ok(v) => Ok(Some(v)),
            Err(Error::OnEssentialSpectrum { .. }) | Err(Error::UnbalancedDimensions { .. }) => Ok(None),
            Err(e) => Err(e),
        })
        .collect()
}

fn real_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if n < 2 || !(hi > lo) {
        return Err(Error::InvalidParameter("scan needs n >= 2 and a nonempty window".into()));
    }
    Ok((0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect())
}

fn scan_solver<'a>(problem: &'a CanonicalProblem, grid: &[f64], options: &EvansOptions) -> Result<Option<EvansSolver<'a>>> {
    if let Some(anchor) = options.anchor {
        return EvansSolver::new(problem, anchor, *options).map(Some);
    }
    for &l in grid {
        match EvansSolver::new(problem, re(l), *options) {
            Ok(s) => return Ok(Some(s)),
            Err(Error::OnEssentialSpectrum { .. }) | Err(Error::UnbalancedDimensions { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(None)
}

/// Real zeros of `E` in a window: interior grid minima of `log |E|` refined
/// by golden-section search, kept when `|E|` falls below `dip` times the
/// median over the grid. Zeros of any order are found because no sign
/// change is needed.
pub fn evans_real_zeros(
    problem: &CanonicalProblem,
    lambda_min: f64,
    lambda_max: f64,
    n: usize,
    dip: f64,
    options: &EvansOptions,
) -> Result<Vec<f64>> {
    let grid = real_grid(lambda_min, lambda_max, n)?;
    let solver = match scan_solver(problem, &grid, options)? {
        Some(s) => s,
        None => return Ok(Vec::new()),
    };
    let log_abs = |l: f64| -> Result<f64> {
        match solver.evaluate(re(l)) {
            Ok(v) => Ok(v.log_value.re),
            Err(Error::OnEssentialSpectrum { .. }) | Err(Error::UnbalancedDimensions { .. }) => Ok(f64::INFINITY),
            Err(e) => Err(e),
        }
    };
    let values: Vec<f64> = grid.iter().map(|&l| log_abs(l)).collect::<Result<_>>()?;
    let mut finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.is_empty() {
        return Ok(Vec::new());
    }
    finite.sort_by(f64::total_cmp);
    let threshold = finite[finite.len() / 2] + dip.ln();
    let mut zeros = Vec::new();
    for i in 1..n - 1 {
        let v = values[i];
        if !(v.is_finite() && v <= values[i - 1] && v <= values[i + 1]) {
            continue;
        }
        let (mut a, mut b) = (grid[i - 1], grid[i + 1]);
        let ratio = (5f64.sqrt() - 1.0) / 2.0;
        let mut x1 = b - ratio * (b - a);
        let mut x2 = a + ratio * (b - a);
        let (mut f1, mut f2) = (log_abs(x1)?, log_abs(x2)?);
        while b - a > 1e-12 * a.abs().max(b.abs()).max(1.0) {
            if f1 <= f2 {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - ratio * (b - a);
                f1 = log_abs(x1)?;
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + ratio * (b - a);
                f2 = log_abs(x2)?;
            }
        }
        let (x, f) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
        if f <= threshold {
            zeros.push(x);
        }
    }
    zeros.dedup_by(|a, b| (*a - *b).abs() <= 1e-8 * a.abs().max(1.0));
    Ok(zeros)
}

/// Winding counts on rectangles in the right half-plane; the verdict holds
/// when every count is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityVerdict {
    pub rectangles: Vec<WindingReport>,
    pub stable: bool,
    pub message: String,
}

pub fn stability_verdict(problem: &CanonicalProblem, rectangles: &[Rectangle], options: &EvansOptions) -> Result<StabilityVerdict> {
    let mut reports = Vec::with_capacity(rectangles.len());
    for &r in rectangles {
        if r.re0 <= 0.0 {
            return Err(Error::InvalidParameter("verdict rectangles must lie in Re λ > 0".into()));
        }
        reports.push(count_zeros_winding(problem, r, options)?);
    }
    let found: i64 = reports.iter().map(|r| r.count).sum();
    let stable = found == 0;
    let message = if stable {
        "no zeros with Re λ > 0 found".to_string()
    } else {
        format!("{found} zero(s) with Re λ > 0 found")
    };
    Ok(StabilityVerdict { rectangles: reports, stable, message })
}

/// Pointwise residuals of the closed-form symmetry modes and their
/// weighted norms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeroModeReport {
    /// `max_x ‖J y₁' − C₀ y₁‖` (translation mode).
    pub residual_translation: f64,
    /// `max_x ‖J y₂' − C₀ y₂‖` (phase mode).
    pub residual_phase: f64,
    /// `∫ y₁* H y₁` and `∫ y₂* H y₂` by the trapezoid rule.
    pub h_norm_translation: f64,
    pub h_norm_phase: f64,
    /// `max_x |v₁(x)|`, the amplitude of the translation mode.
    pub translation_amplitude: f64,
}

pub fn zero_mode_residuals(problem: &CanonicalProblem, grid: &[f64]) -> Result<ZeroModeReport> {
    let eta = match problem.kind() {
        ProblemKind::NlsSoliton { eta, .. } => eta,
        _ => return Err(Error::NotSolitonProblem),
    };
    if grid.len() < 2 {
        return Err(Error::InvalidParameter("zero-mode check needs at least two grid points".into()));
    }
    let mut res = [0.0f64; 2];
    let mut norms = [0.0f64; 2];
    let mut amplitude: f64 = 0.0;
    for (i, &x) in grid.iter().enumerate() {
        let w = match i {
            0 => 0.5 * (grid[1] - grid[0]),
            _ if i + 1 == grid.len() => 0.5 * (grid[i] - grid[i - 1]),
            _ => 0.5 * (grid[i + 1] - grid[i - 1]),
        };
        let h = problem.weight().eval(x);
        for (k, (y, dy)) in nls_zero_modes(eta, x).iter().enumerate() {
            res[k] = res[k].max(problem.pencil_residual(x, ZERO, y, dy).norm());
            norms[k] += w * y.dotc(&(&h * y)).re;
            if k == 0 {
                amplitude = amplitude.max(y[0].norm());
            }
        }
    }
    Ok(ZeroModeReport {
        residual_translation: res[0],
        residual_phase: res[1],
        h_norm_translation: norms[0],
        h_norm_phase: norms[1],
        translation_amplitude: amplitude,
    })
}

/// Rank deficiency of the matched frames at λ: the number of independent
/// decaying solutions (geometric multiplicity).
pub fn matched_nullity(problem: &CanonicalProblem, lambda: Complex64, rank_tol: f64, options: &EvansOptions) -> Result<usize> {
    let solver = EvansSolver::new(problem, options.anchor.unwrap_or(lambda), *options)?;
    let mut frames = Vec::new();
    for (side, (closure, disc, _)) in [(Side::Minus, &solver.left), (Side::Plus, &solver.right)] {
        let start = match closure {
            Closure::Frame(k) => k.clone(),
            Closure::Decaying(v0) => solver.asys.decaying_projector(side, lambda, options.gap_tol)? * v0,
        };
        frames.push(disc.propagate_frame(lambda, &start, false)?.columns);
    }
    let sv = linalg::singular_values(&linalg::hstack(&frames[0], &frames[1]));
    let top = sv.first().copied().unwrap_or(0.0);
    Ok(sv.iter().filter(|&&s| s <= rank_tol * top).count())
}
