//! Problem construction: coefficient fields, the spectral pencil
//! `J y' = (C₀(x) + λ C₁(x)) y`, and the standard reductions of scalar and
//! coupled second-order problems to canonical form.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, block_diag, re, real_diag, real_matrix, CMat, CVec};
use crate::symplectic::{LagrangianFrame, SymplecticDim};

pub const DEFAULT_PSD_TOL: f64 = 1e-10;
pub const DEFAULT_DECAY_TOL: f64 = 1e-8;
const HERMITIAN_TOL: f64 = 1e-12;
const CHECK_POINTS: usize = 401;

/// Scalar coefficient `x ↦ f(x)` used by the second-order reductions.
#[derive(Clone)]
pub enum ScalarFn {
    Constant(f64),
    /// `amplitude · sech²(rate · x)`
    Sech2 { amplitude: f64, rate: f64 },
    Sum(Vec<ScalarFn>),
    Custom { label: String, f: Arc<dyn Fn(f64) -> f64 + Send + Sync> },
}

impl ScalarFn {
    pub fn custom(label: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        ScalarFn::Custom { label: label.into(), f: Arc::new(f) }
    }

    /// Pöschl–Teller well `-ℓ(ℓ+1) sech²(x)`.
    pub fn poschl_teller(ell: u32) -> Self {
        let l = ell as f64;
        ScalarFn::Sech2 { amplitude: -l * (l + 1.0), rate: 1.0 }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            ScalarFn::Constant(c) => *c,
            ScalarFn::Sech2 { amplitude, rate } => amplitude * sech(rate * x).powi(2),
            ScalarFn::Sum(terms) => terms.iter().map(|t| t.eval(x)).sum(),
            ScalarFn::Custom { f, .. } => f(x),
        }
    }

    /// Limit as `|x| → ∞` when known in closed form (same on both sides).
    pub fn limit(&self) -> Option<f64> {
        match self {
            ScalarFn::Constant(c) => Some(*c),
            ScalarFn::Sech2 { .. } => Some(0.0),
            ScalarFn::Sum(terms) => terms.iter().map(|t| t.limit()).sum(),
            ScalarFn::Custom { .. } => None,
        }
    }

    pub fn is_identically_zero(&self) -> bool {
        match self {
            ScalarFn::Constant(c) => *c == 0.0,
            ScalarFn::Sech2 { amplitude, .. } => *amplitude == 0.0,
            ScalarFn::Sum(terms) => terms.iter().all(|t| t.is_identically_zero()),
            ScalarFn::Custom { .. } => false,
        }
    }
}

impl fmt::Debug for ScalarFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarFn::Constant(c) => write!(f, "{c}"),
            ScalarFn::Sech2 { amplitude, rate } => write!(f, "{amplitude}*sech^2({rate}*x)"),
            ScalarFn::Sum(terms) => {
                let parts: Vec<String> = terms.iter().map(|t| format!("{t:?}")).collect();
                write!(f, "{}", parts.join(" + "))
            }
            ScalarFn::Custom { label, .. } => write!(f, "{label}"),
        }
    }
}

pub fn sech(x: f64) -> f64 {
    // 1/cosh overflows gracefully to 0 for |x| > 710
    1.0 / x.cosh()
}

/// Piecewise-linear interpolation of matrix samples.
///
/// Convex combinations of Hermitian PSD matrices stay Hermitian PSD, so a
/// sampled Hamiltonian keeps its structure between nodes. Outside the
/// sampled range the end values are held constant.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledMatrix {
    xs: Vec<f64>,
    values: Vec<CMat>,
}

impl SampledMatrix {
    pub fn new(xs: Vec<f64>, values: Vec<CMat>) -> Result<Self> {
        if xs.is_empty() || xs.len() != values.len() {
            return Err(Error::InvalidParameter("sampled field needs matching, nonempty abscissae and values".into()));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("sample abscissae must be strictly increasing".into()));
        }
        let shape = values[0].shape();
        if shape.0 != shape.1 || values.iter().any(|m| m.shape() != shape) {
            return Err(Error::InvalidParameter("sampled matrices must be square with a common size".into()));
        }
        Ok(Self { xs, values })
    }

    /// Plain text, one row per abscissa: `x` followed by the row-major
    /// entries of an `n × n` matrix, either `n²` real values or `2n²`
    /// interleaved real/imaginary parts. `#` starts a comment.
    pub fn parse(text: &str, size: usize) -> Result<Self> {
        let n2 = size * size;
        let mut xs = Vec::new();
        let mut values = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let nums: Vec<f64> = line
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::ProblemFile(format!("line {}: {e}", lineno + 1)))?;
            let entries = &nums[1..];
            let m = if entries.len() == n2 {
                CMat::from_fn(size, size, |i, j| re(entries[i * size + j]))
            } else if entries.len() == 2 * n2 {
                CMat::from_fn(size, size, |i, j| {
                    let k = 2 * (i * size + j);
                    Complex64::new(entries[k], entries[k + 1])
                })
            } else {
                return Err(Error::ProblemFile(format!(
                    "line {}: expected {} or {} matrix entries after x, found {}",
                    lineno + 1,
                    n2,
                    2 * n2,
                    entries.len()
                )));
            };
            xs.push(nums[0]);
            values.push(m);
        }
        Self::new(xs, values)
    }

    pub fn size(&self) -> usize {
        self.values[0].nrows()
    }

    pub fn abscissae(&self) -> &[f64] {
        &self.xs
    }

    pub fn eval(&self, x: f64) -> CMat {
        let xs = &self.xs;
        if x <= xs[0] {
            return self.values[0].clone();
        }
        if x >= xs[xs.len() - 1] {
            return self.values[xs.len() - 1].clone();
        }
        let hi = xs.partition_point(|&v| v <= x);
        let lo = hi - 1;
        let t = (x - xs[lo]) / (xs[hi] - xs[lo]);
        &self.values[lo] * re(1.0 - t) + &self.values[hi] * re(t)
    }
}

type MatrixClosure = Arc<dyn Fn(f64) -> CMat + Send + Sync>;

#[derive(Clone)]
enum FieldSource {
    Constant(CMat),
    Sampled(SampledMatrix),
    Closure(MatrixClosure),
}

/// Square-matrix-valued coefficient `x ↦ M(x)`, optionally carrying its
/// closed-form limits at `∓∞`.
#[derive(Clone)]
pub struct MatrixField {
    size: usize,
    source: FieldSource,
    label: String,
    limits: Option<[CMat; 2]>,
}

impl fmt::Debug for MatrixField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MatrixField").field("size", &self.size).field("label", &self.label).finish()
    }
}

impl MatrixField {
    pub fn constant(m: CMat) -> Self {
        let size = m.nrows();
        Self {
            size,
            limits: Some([m.clone(), m.clone()]),
            label: "constant".into(),
            source: FieldSource::Constant(m),
        }
    }

    pub fn sampled(samples: SampledMatrix) -> Self {
        let n = samples.values.len();
        let limits = [samples.values[0].clone(), samples.values[n - 1].clone()];
        Self {
            size: samples.size(),
            label: "sampled".into(),
            limits: Some(limits),
            source: FieldSource::Sampled(samples),
        }
    }

    pub fn from_fn(
        size: usize,
        label: impl Into<String>,
        f: impl Fn(f64) -> CMat + Send + Sync + 'static,
    ) -> Self {
        Self { size, source: FieldSource::Closure(Arc::new(f)), label: label.into(), limits: None }
    }

    pub fn with_limits(mut self, minus: CMat, plus: CMat) -> Self {
        self.limits = Some([minus, plus]);
        self
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn eval(&self, x: f64) -> CMat {
        match &self.source {
            FieldSource::Constant(m) => m.clone(),
            FieldSource::Sampled(s) => s.eval(x),
            FieldSource::Closure(f) => f(x),
        }
    }

    /// Closed-form limit on the given side, if known.
    pub fn limit(&self, side: Side) -> Option<&CMat> {
        self.limits.as_ref().map(|l| &l[side as usize])
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.source, FieldSource::Constant(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Minus = 0,
    Plus = 1,
}

impl Side {
    pub fn name(self) -> &'static str {
        match self {
            Side::Minus => "minus",
            Side::Plus => "plus",
        }
    }
}

/// The Hamiltonian `H(x)`: Hermitian positive semi-definite `2d × 2d`
/// coefficient that also weights the inner product.
#[derive(Debug, Clone)]
pub struct HamiltonianField {
    dim: SymplecticDim,
    field: MatrixField,
}

impl HamiltonianField {
    pub fn new(dim: SymplecticDim, field: MatrixField) -> Result<Self> {
        if field.size() != dim.ambient() {
            return Err(Error::DimensionMismatch { expected: dim.ambient(), found: field.size() });
        }
        Ok(Self { dim, field })
    }

    pub fn dim(&self) -> SymplecticDim {
        self.dim
    }

    pub fn field(&self) -> &MatrixField {
        &self.field
    }

    pub fn eval(&self, x: f64) -> CMat {
        self.field.eval(x)
    }
}

/// `C₀(x) + λ C₁(x)`.
#[derive(Debug, Clone)]
pub struct CoefficientPencil {
    pub c0: MatrixField,
    pub c1: MatrixField,
    /// Both coefficients Hermitian everywhere; enables the self-adjointness
    /// witnesses and the conjugate-symplectic structure checks.
    pub hermitian: bool,
}

impl CoefficientPencil {
    pub fn at(&self, x: f64, lambda: Complex64) -> CMat {
        self.c0.eval(x) + self.c1.eval(x) * lambda
    }
}

/// Spatial domain of a problem. Unbounded problems carry the truncation
/// used for computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Geometry {
    Bounded { a: f64, b: f64 },
    /// `[a, ∞)` truncated at `a + length`.
    HalfLine { a: f64, length: f64 },
    /// `(-∞, ∞)` truncated to `[-half_length, half_length]`.
    FullLine { half_length: f64 },
}

impl Geometry {
    pub fn interval(&self) -> (f64, f64) {
        match *self {
            Geometry::Bounded { a, b } => (a, b),
            Geometry::HalfLine { a, length } => (a, a + length),
            Geometry::FullLine { half_length } => (-half_length, half_length),
        }
    }

    pub fn is_bounded(&self) -> bool {
        matches!(self, Geometry::Bounded { .. })
    }

    fn validate(&self) -> Result<()> {
        let (a, b) = self.interval();
        if !(a.is_finite() && b.is_finite() && b > a) {
            return Err(Error::InvalidParameter(format!("empty or non-finite interval [{a}, {b}]")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BoundaryCondition {
    Frame(LagrangianFrame),
    /// Decay at infinity, imposed through the asymptotic constant system.
    Asymptotic,
}

impl BoundaryCondition {
    pub fn frame(&self) -> Option<&LagrangianFrame> {
        match self {
            BoundaryCondition::Frame(f) => Some(f),
            BoundaryCondition::Asymptotic => None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolitonVariant {
    /// Potential blocks exactly as printed, without the rotating-frame mass.
    Paper,
    /// Potential blocks shifted by the rotating-frame mass `η²`.
    #[default]
    Corrected,
}

impl std::str::FromStr for SolitonVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(SolitonVariant::Paper),
            "corrected" => Ok(SolitonVariant::Corrected),
            other => Err(Error::InvalidParameter(format!("unknown variant {other:?}"))),
        }
    }
}

/// Which reduction produced a problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemKind {
    SturmLiouville,
    TravelingWave,
    NlsSoliton { eta: f64, variant: SolitonVariant },
    RawPencil,
}

/// Full problem description.
#[derive(Debug, Clone)]
pub struct CanonicalProblem {
    dim: SymplecticDim,
    pencil: CoefficientPencil,
    geometry: Geometry,
    left: BoundaryCondition,
    right: BoundaryCondition,
    weight: HamiltonianField,
    kind: ProblemKind,
    decay_tol: f64,
}

impl CanonicalProblem {
    pub fn new(
        dim: SymplecticDim,
        pencil: CoefficientPencil,
        geometry: Geometry,
        left: BoundaryCondition,
        right: BoundaryCondition,
        weight: HamiltonianField,
        kind: ProblemKind,
    ) -> Result<Self> {
        Self::with_decay_tol(dim, pencil, geometry, left, right, weight, kind, DEFAULT_DECAY_TOL)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn with_decay_tol(
        dim: SymplecticDim,
        pencil: CoefficientPencil,
        geometry: Geometry,
        left: BoundaryCondition,
        right: BoundaryCondition,
        weight: HamiltonianField,
        kind: ProblemKind,
        decay_tol: f64,
    ) -> Result<Self> {
        geometry.validate()?;
        let n = dim.ambient();
        for (name, size) in [("c0", pencil.c0.size()), ("c1", pencil.c1.size()), ("weight", weight.field.size())] {
            if size != n {
                return Err(Error::InvalidParameter(format!("{name} has size {size}, expected {n}")));
            }
        }
        for bc in [&left, &right] {
            if let BoundaryCondition::Frame(f) = bc {
                if f.dim() != dim {
                    return Err(Error::DimensionMismatch { expected: dim.half(), found: f.dim().half() });
                }
            }
        }
        match geometry {
            Geometry::Bounded { .. } => {
                if left.frame().is_none() || right.frame().is_none() {
                    return Err(Error::InvalidParameter("bounded geometry requires two boundary frames".into()));
                }
            }
            Geometry::HalfLine { .. } => {
                if left.frame().is_none() {
                    return Err(Error::InvalidParameter("half-line geometry requires a frame at the finite end".into()));
                }
            }
            Geometry::FullLine { .. } => {}
        }
        let problem = Self { dim, pencil, geometry, left, right, weight, kind, decay_tol };
        for (bc, side) in [(&problem.left, Side::Minus), (&problem.right, Side::Plus)] {
            if *bc == BoundaryCondition::Asymptotic {
                problem.check_asymptotic_limit(side)?;
            }
        }
        Ok(problem)
    }

    pub fn dim(&self) -> SymplecticDim {
        self.dim
    }

    pub fn pencil(&self) -> &CoefficientPencil {
        &self.pencil
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn interval(&self) -> (f64, f64) {
        self.geometry.interval()
    }

    pub fn left(&self) -> &BoundaryCondition {
        &self.left
    }

    pub fn right(&self) -> &BoundaryCondition {
        &self.right
    }

    pub fn weight(&self) -> &HamiltonianField {
        &self.weight
    }

    pub fn kind(&self) -> ProblemKind {
        self.kind
    }

    pub fn decay_tol(&self) -> f64 {
        self.decay_tol
    }

    pub fn is_hermitian(&self) -> bool {
        self.pencil.hermitian
    }

    /// Real coefficients (checked on a sample grid) and real frames: the
    /// fundamental solution is real for real λ.
    pub fn is_real(&self) -> bool {
        let (a, b) = self.interval();
        let frames_real = [&self.left, &self.right].iter().all(|bc| bc.frame().is_none_or(|f| f.is_real()));
        frames_real
            && check_grid(a, b, 33).into_iter().all(|x| {
                linalg::is_real(&self.pencil.c0.eval(x)) && linalg::is_real(&self.pencil.c1.eval(x))
            })
    }

    /// `C₀(x) + λ C₁(x)`.
    pub fn pencil_at(&self, x: f64, lambda: Complex64) -> CMat {
        self.pencil.at(x, lambda)
    }

    /// `J⁻¹ (C₀(x) + λ C₁(x))`.
    pub fn generator(&self, x: f64, lambda: Complex64) -> CMat {
        linalg::apply_j_inv(&self.pencil_at(x, lambda))
    }

    /// Residual `J y' − (C₀ + λ C₁) y` of a state and its derivative at `x`.
    pub fn pencil_residual(&self, x: f64, lambda: Complex64, y: &CVec, dy: &CVec) -> CVec {
        let jdy = linalg::apply_j(&CMat::from_column_slice(dy.len(), 1, dy.as_slice()));
        let rhs = self.pencil_at(x, lambda) * y;
        CVec::from_iterator(y.len(), jdy.iter().zip(rhs.iter()).map(|(a, b)| a - b))
    }

    /// Copy with a different geometry and boundary conditions.
    pub fn with_boundary(
        &self,
        geometry: Geometry,
        left: BoundaryCondition,
        right: BoundaryCondition,
    ) -> Result<Self> {
        Self::with_decay_tol(
            self.dim,
            self.pencil.clone(),
            geometry,
            left,
            right,
            self.weight.clone(),
            self.kind,
            self.decay_tol,
        )
    }

    /// Limits `(C₀, C₁)` at `∓∞`: closed form when known, otherwise the
    /// values at the truncation point.
    pub fn asymptotic_coefficients(&self, side: Side) -> (CMat, CMat) {
        let x = self.end_point(side);
        let pick = |f: &MatrixField| f.limit(side).cloned().unwrap_or_else(|| f.eval(x));
        (pick(&self.pencil.c0), pick(&self.pencil.c1))
    }

    fn end_point(&self, side: Side) -> f64 {
        let (a, b) = self.interval();
        match side {
            Side::Minus => a,
            Side::Plus => b,
        }
    }

    /// Distance of the pencil at the truncation point from its limit. With
    /// a closed-form limit this is `‖C(±L) − C(±∞)‖`; otherwise the field
    /// is compared against its value halfway to the truncation point.
    pub fn asymptotic_defect(&self, side: Side) -> f64 {
        let x = self.end_point(side);
        let (a, b) = self.interval();
        let mid = 0.5 * (x + 0.5 * (a + b));
        let gap = |f: &MatrixField| {
            let at_end = f.eval(x);
            let reference = f.limit(side).cloned().unwrap_or_else(|| f.eval(mid));
            linalg::frobenius(&(&at_end - reference)) / (1.0 + linalg::frobenius(&at_end))
        };
        gap(&self.pencil.c0).max(gap(&self.pencil.c1))
    }

    fn check_asymptotic_limit(&self, side: Side) -> Result<()> {
        let defect = self.asymptotic_defect(side);
        if !(defect <= self.decay_tol) {
            return Err(Error::NoAsymptoticLimit { side: side.name(), defect });
        }
        Ok(())
    }
}

pub(crate) fn check_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

fn check_positive(name: &'static str, f: &ScalarFn, a: f64, b: f64) -> Result<()> {
    for x in check_grid(a, b, CHECK_POINTS) {
        let value = f.eval(x);
        if !(value > 0.0) {
            return Err(Error::NonPositiveCoefficient { name, x, value });
        }
    }
    Ok(())
}

/// `-(p u')' + q u = λ ρ u` as a `d = 1` canonical system in the state
/// `y = (u, -p u')`:
///
/// `J y' = (λ H − V) y`, `H = diag(ρ, 0)`, `V = diag(q, −1/p)`.
///
/// The weight of the inner product is `H`.
pub fn sturm_liouville_to_canonical(
    p: ScalarFn,
    q: ScalarFn,
    rho: ScalarFn,
    geometry: Geometry,
    left: BoundaryCondition,
    right: BoundaryCondition,
) -> Result<CanonicalProblem> {
    geometry.validate()?;
    let (a, b) = geometry.interval();
    check_positive("p", &p, a, b)?;
    check_positive("rho", &rho, a, b)?;
    let dim = SymplecticDim::new(1)?;

    let c0_at = {
        let (p, q) = (p.clone(), q.clone());
        move |x: f64| real_diag(&[-q.eval(x), 1.0 / p.eval(x)])
    };
    let weight_at = {
        let rho = rho.clone();
        move |x: f64| real_diag(&[rho.eval(x), 0.0])
    };
    let label = format!("sturm_liouville(p = {p:?}, q = {q:?}, rho = {rho:?})");

    let mut c0 = MatrixField::from_fn(2, format!("{label}: C0"), c0_at);
    let mut weight = MatrixField::from_fn(2, format!("{label}: H"), weight_at);
    if let (Some(p_inf), Some(q_inf)) = (p.limit(), q.limit()) {
        let lim = real_diag(&[-q_inf, 1.0 / p_inf]);
        c0 = c0.with_limits(lim.clone(), lim);
    }
    if let Some(rho_inf) = rho.limit() {
        let lim = real_diag(&[rho_inf, 0.0]);
        weight = weight.with_limits(lim.clone(), lim);
    }
    let pencil = CoefficientPencil { c0, c1: weight.clone(), hermitian: true };
    CanonicalProblem::new(
        dim,
        pencil,
        geometry,
        left,
        right,
        HamiltonianField::new(dim, weight)?,
        ProblemKind::SturmLiouville,
    )
}

/// `v'' + a v' + b v = λ v` in the state `y = (v, −v')`:
///
/// `J y' = (H − λ M) y`, `H = [[b, −a], [0, 1]]`, `M = diag(1, 0)`.
///
/// `H` is not Hermitian unless `a ≡ 0`; such problems are flagged and the
/// self-adjointness witnesses are disabled for them. The weight is `M`.
pub fn traveling_wave_to_canonical(
    a: ScalarFn,
    b: ScalarFn,
    geometry: Geometry,
    left: BoundaryCondition,
    right: BoundaryCondition,
) -> Result<CanonicalProblem> {
    geometry.validate()?;
    let dim = SymplecticDim::new(1)?;
    let (lo, hi) = geometry.interval();
    let hermitian = a.is_identically_zero() || check_grid(lo, hi, CHECK_POINTS).into_iter().all(|x| a.eval(x) == 0.0);
    let label = format!("traveling_wave(a = {a:?}, b = {b:?})");
    let mut c0 = {
        let (a, b) = (a.clone(), b.clone());
        MatrixField::from_fn(2, format!("{label}: H"), move |x| {
            real_matrix(2, 2, &[b.eval(x), -a.eval(x), 0.0, 1.0])
        })
    };
    if let (Some(a_inf), Some(b_inf)) = (a.limit(), b.limit()) {
        let lim = real_matrix(2, 2, &[b_inf, -a_inf, 0.0, 1.0]);
        c0 = c0.with_limits(lim.clone(), lim);
    }
    let m = real_diag(&[1.0, 0.0]);
    let pencil = CoefficientPencil { c0, c1: MatrixField::constant(-m.clone()), hermitian };
    CanonicalProblem::new(
        dim,
        pencil,
        geometry,
        left,
        right,
        HamiltonianField::new(dim, MatrixField::constant(m))?,
        ProblemKind::TravelingWave,
    )
}

/// Default truncation for decaying `sech²` profiles of rate `eta`.
pub fn default_truncation(eta: f64) -> f64 {
    15.0 / eta
}

/// Linearization of the focusing cubic NLS about the bright soliton
/// `η sech(ηx)` as a `d = 2` canonical system on the line.
///
/// The state is `y = (p, q, −p', −q')` and the coupled second-order system
/// is
///
/// ```text
/// λ q = −p'' + m p − 6η² sech²(ηx) p
/// λ p = −q'' + m q − 2η² sech²(ηx) q
/// ```
///
/// with `m = 0` for [`SolitonVariant::Paper`] and `m = η²` for
/// [`SolitonVariant::Corrected`]. In canonical form
/// `C₀ = diag(6η²s² − m, 2η²s² − m, 1, 1)` and `C₁ = [[σ₁, 0], [0, 0]]`
/// with `σ₁` the 2 × 2 exchange matrix. For the paper variant `C₀` is the
/// Hamiltonian `diag(6η²s², 1, 2η²s², 1)` written in `(p, p', q, q')`
/// order; that Hamiltonian is the inner-product weight for both variants.
pub fn nls_soliton_problem(eta: f64, half_length: f64, variant: SolitonVariant) -> Result<CanonicalProblem> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::InvalidParameter(format!("eta must be positive, got {eta}")));
    }
    if !(half_length > 0.0 && half_length.is_finite()) {
        return Err(Error::InvalidParameter(format!("truncation must be positive, got {half_length}")));
    }
    let dim = SymplecticDim::new(2)?;
    let mass = match variant {
        SolitonVariant::Paper => 0.0,
        SolitonVariant::Corrected => eta * eta,
    };
    let e2 = eta * eta;
    let c0_at = move |x: f64| {
        let s2 = sech(eta * x).powi(2);
        real_diag(&[6.0 * e2 * s2 - mass, 2.0 * e2 * s2 - mass, 1.0, 1.0])
    };
    let c0_inf = real_diag(&[-mass, -mass, 1.0, 1.0]);
    let c0 = MatrixField::from_fn(4, format!("nls({variant:?}, eta = {eta}): C0"), c0_at)
        .with_limits(c0_inf.clone(), c0_inf);
    let exchange = real_matrix(2, 2, &[0.0, 1.0, 1.0, 0.0]);
    let c1 = MatrixField::constant(block_diag(&exchange, &CMat::zeros(2, 2)));

    let weight_inf = real_diag(&[0.0, 0.0, 1.0, 1.0]);
    let weight = MatrixField::from_fn(4, format!("nls(eta = {eta}): H"), move |x| {
        let s2 = sech(eta * x).powi(2);
        real_diag(&[6.0 * e2 * s2, 2.0 * e2 * s2, 1.0, 1.0])
    })
    .with_limits(weight_inf.clone(), weight_inf);

    CanonicalProblem::new(
        dim,
        CoefficientPencil { c0, c1, hermitian: true },
        Geometry::FullLine { half_length },
        BoundaryCondition::Asymptotic,
        BoundaryCondition::Asymptotic,
        HamiltonianField::new(dim, weight)?,
        ProblemKind::NlsSoliton { eta, variant },
    )
}

/// Reorders a `4 × 4` matrix from the state order `(p, q, −p', −q')` to the
/// printed order `(p, p', q, q')`. Signs of the derivative components are
/// restored, so diagonal matrices map to diagonal matrices.
pub fn to_printed_order(m: &CMat) -> CMat {
    // printed index -> (state index, sign)
    const MAP: [(usize, f64); 4] = [(0, 1.0), (2, -1.0), (1, 1.0), (3, -1.0)];
    CMat::from_fn(4, 4, |i, j| {
        let (si, ssign) = MAP[i];
        let (sj, tsign) = MAP[j];
        m[(si, sj)] * re(ssign * tsign)
    })
}

/// Printed Hamiltonian `diag(6η² sech², 1, 2η² sech², 1)` in `(p, p', q, q')`
/// order.
pub fn nls_printed_hamiltonian(eta: f64, x: f64) -> CMat {
    let s2 = sech(eta * x).powi(2);
    real_diag(&[6.0 * eta * eta * s2, 1.0, 2.0 * eta * eta * s2, 1.0])
}

/// Closed-form states and derivatives of the two symmetry modes at `x`:
/// translation `v₁ = −η² sech tanh` in the `p` slot and phase
/// `η sech` in the `q` slot, each as `(y, y')` in state order.
pub fn nls_zero_modes(eta: f64, x: f64) -> [(CVec, CVec); 2] {
    let s = sech(eta * x);
    let t = (eta * x).tanh();
    let e2 = eta * eta;
    let e3 = e2 * eta;
    let e4 = e2 * e2;
    let v1 = -e2 * s * t;
    let dv1 = e3 * (s - 2.0 * s * s * s);
    let ddv1 = e4 * s * t * (6.0 * s * s - 1.0);
    let phi = eta * s;
    let dphi = -e2 * s * t;
    let ddphi = e3 * (s - 2.0 * s * s * s);
    let v = |a: f64, b: f64, c: f64, d: f64| CVec::from_vec(vec![re(a), re(b), re(c), re(d)]);
    [
        (v(v1, 0.0, -dv1, 0.0), v(dv1, 0.0, -ddv1, 0.0)),
        (v(0.0, phi, 0.0, -dphi), v(0.0, dphi, 0.0, -ddphi)),
    ]
}

/// Positivity and Hermitian-ness of a Hamiltonian over a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsdReport {
    pub min_eigenvalue: f64,
    pub argmin_x: f64,
    pub max_hermitian_defect: f64,
    /// First window of three consecutive grid points on which `H` vanishes.
    pub vanishing_window: Option<(f64, f64)>,
    pub psd_tol: f64,
    pub passed: bool,
}

pub fn psd_report(field: &HamiltonianField, grid: &[f64], psd_tol: f64) -> PsdReport {
    let mut min_eigenvalue = f64::INFINITY;
    let mut argmin_x = f64::NAN;
    let mut max_hermitian_defect: f64 = 0.0;
    let mut norms = Vec::with_capacity(grid.len());
    for &x in grid {
        let h = field.eval(x);
        max_hermitian_defect = max_hermitian_defect.max(linalg::hermitian_defect(&h));
        let sym = (&h + h.adjoint()) * re(0.5);
        let smallest = sym.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
        if smallest < min_eigenvalue {
            min_eigenvalue = smallest;
            argmin_x = x;
        }
        norms.push(linalg::frobenius(&h));
    }
    let vanishing_window = grid
        .windows(3)
        .zip(norms.windows(3))
        .find(|(_, n)| n.iter().all(|&v| v == 0.0))
        .map(|(xs, _)| (xs[0], xs[2]));
    let passed = min_eigenvalue >= -psd_tol && max_hermitian_defect <= HERMITIAN_TOL && vanishing_window.is_none();
    PsdReport { min_eigenvalue, argmin_x, max_hermitian_defect, vanishing_window, psd_tol, passed }
}

/// Snapshot of the pencil at a point, for reporting.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PencilSample {
    pub x: f64,
    pub c0: Vec<Vec<[f64; 2]>>,
    pub c1: Vec<Vec<[f64; 2]>>,
    pub weight: Vec<Vec<[f64; 2]>>,
}

pub fn matrix_rows(m: &CMat) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect()
}

pub fn sample_pencil(problem: &CanonicalProblem, xs: &[f64]) -> Vec<PencilSample> {
    xs.iter()
        .map(|&x| PencilSample {
            x,
            c0: matrix_rows(&problem.pencil.c0.eval(x)),
            c1: matrix_rows(&problem.pencil.c1.eval(x)),
            weight: matrix_rows(&problem.weight.eval(x)),
        })
        .collect()
}
