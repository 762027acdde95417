//! Fundamental solutions of `y' = J⁻¹(C₀(x) + λ C₁(x)) y`.
//!
//! A [`Discretization`] fixes the grid and caches `J⁻¹C₀`, `J⁻¹C₁` at the
//! quadrature nodes, so scans over many λ evaluate the coefficients once.
//! Each step is the exponential of a generator in the Lie algebra of the
//! conjugate-symplectic group, so for Hermitian pencils and real λ the
//! propagator preserves `T* J T = J` up to rounding.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::CanonicalProblem;
use crate::linalg::{self, re, CMat, CVec};
use crate::symplectic::SubspaceBasis;

pub const DEFAULT_STEP: f64 = 1e-3;
pub const DEFAULT_RENORM_EVERY: usize = 20;
pub const STEP_DEFECT_LIMIT: f64 = 1e-6;
const COLLAPSE_RATIO: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Exponential of the generator at the step midpoint; second order.
    #[default]
    Midpoint,
    /// Two-point Gauss Magnus expansion with the commutator term; fourth order.
    Magnus4,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepControl {
    /// Target step; the actual step divides the interval evenly.
    pub h: f64,
    pub scheme: Scheme,
    pub renorm_every: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        Self { h: DEFAULT_STEP, scheme: Scheme::Midpoint, renorm_every: DEFAULT_RENORM_EVERY }
    }
}

impl StepControl {
    pub fn with_h(h: f64) -> Self {
        Self { h, ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::InvalidParameter(format!("step must be positive, got {}", self.h)));
        }
        if self.renorm_every == 0 {
            return Err(Error::InvalidParameter("renorm_every must be at least 1".into()));
        }
        Ok(())
    }
}

/// Fundamental solution `T(x; λ)` with `T(x_from) = I`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferMatrix {
    pub value: CMat,
    pub from_x: f64,
    pub at_x: f64,
    pub lambda: Complex64,
    /// `‖T* J T − J‖_F`.
    pub structure_defect: f64,
}

impl TransferMatrix {
    /// `‖T* J T − J‖_F / max(1, ‖T‖_F²)`: the defect relative to the size
    /// of the entries it is computed from.
    pub fn relative_structure_defect(&self) -> f64 {
        relative_structure_defect(&self.value)
    }
}

pub fn structure_defect(t: &CMat) -> f64 {
    let jt = linalg::apply_j(t);
    let tjt = t.adjoint() * jt;
    linalg::frobenius(&(tjt - linalg::symplectic_j(t.nrows() / 2)))
}

pub fn relative_structure_defect(t: &CMat) -> f64 {
    structure_defect(t) / linalg::frobenius(t).powi(2).max(1.0)
}

/// Frame carried with continuous re-orthonormalization.
///
/// The propagated span is `T(at_x) · initial`; concretely
/// `T(at_x) · initial = columns · R` with `det R = phase · exp(log_scale)`.
#[derive(Debug, Clone)]
pub struct PropagatedFrame {
    pub columns: CMat,
    pub log_scale: f64,
    /// Unit-modulus part of `det R`.
    pub phase: Complex64,
    pub from_x: f64,
    pub at_x: f64,
    pub lambda: Complex64,
    /// Largest `‖Q* Q − I‖_F` seen after a renormalization.
    pub max_gram_defect: f64,
    history: Option<FrameHistory>,
}

#[derive(Debug, Clone)]
struct FrameHistory {
    xs: Vec<f64>,
    /// Columns at each grid point, in the basis current at that point.
    frames: Vec<CMat>,
    /// Number of triangular factors extracted up to and including point `i`.
    epoch: Vec<usize>,
    factors: Vec<CMat>,
}

impl PropagatedFrame {
    /// `log |det R| + i arg det R` for the factor removed so far.
    pub fn log_det_factor(&self) -> Complex64 {
        Complex64::new(self.log_scale, self.phase.arg())
    }

    pub fn has_history(&self) -> bool {
        self.history.is_some()
    }

    /// Grid abscissae of the recorded path, in propagation order.
    pub fn path_abscissae(&self) -> Option<&[f64]> {
        self.history.as_ref().map(|h| h.xs.as_slice())
    }

    /// Solution path `x ↦ T(x) · initial · c` up to a common scale, given
    /// `a = R c` in the final basis (the solution at `at_x` is
    /// `columns · a`). Requires a recorded history.
    pub fn solution_path(&self, final_coeffs: &CVec) -> Result<Vec<CVec>> {
        let hist = self
            .history
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter("frame was propagated without a history".into()))?;
        let n_epochs = hist.factors.len();
        // coeffs[m] = R_m ⋯ R_1 R_0 c
        let mut coeffs = vec![CVec::zeros(0); n_epochs + 1];
        coeffs[n_epochs] = final_coeffs.clone();
        for m in (1..=n_epochs).rev() {
            let r = &hist.factors[m - 1];
            coeffs[m - 1] = r
                .solve_upper_triangular(&coeffs[m])
                .ok_or_else(|| Error::RankCollapse { x: hist.xs[0] })?;
        }
        Ok(hist.frames.iter().zip(&hist.epoch).map(|(y, &m)| y * &coeffs[m]).collect())
    }
}

/// Grid and cached coefficients for propagation from `x_from` to `x_to`
/// (either direction).
#[derive(Debug, Clone)]
pub struct Discretization {
    from_x: f64,
    to_x: f64,
    size: usize,
    steps: usize,
    step: f64,
    scheme: Scheme,
    renorm_every: usize,
    hermitian: bool,
    /// `(J⁻¹C₀, J⁻¹C₁)` at one node per step (midpoint) or two (Gauss).
    nodes: Vec<(CMat, CMat)>,
}

impl Discretization {
    pub fn new(problem: &CanonicalProblem, x_from: f64, x_to: f64, control: StepControl) -> Result<Self> {
        control.validate()?;
        if !(x_from.is_finite() && x_to.is_finite()) {
            return Err(Error::InvalidParameter("propagation end points must be finite".into()));
        }
        let (a, b) = problem.interval();
        let slack = 1e-12 * (b - a).max(1.0);
        for x in [x_from, x_to] {
            if x < a - slack || x > b + slack {
                return Err(Error::InvalidParameter(format!("x = {x} outside [{a}, {b}]")));
            }
        }
        let length = x_to - x_from;
        let steps = if length == 0.0 { 0 } else { (length.abs() / control.h).ceil().max(1.0) as usize };
        Self::with_steps(problem, x_from, x_to, steps, control)
    }

    /// Same as [`Discretization::new`] with an explicit step count.
    pub fn with_steps(
        problem: &CanonicalProblem,
        x_from: f64,
        x_to: f64,
        steps: usize,
        control: StepControl,
    ) -> Result<Self> {
        control.validate()?;
        let length = x_to - x_from;
        if steps == 0 && length != 0.0 {
            return Err(Error::InvalidParameter("a nonempty interval needs at least one step".into()));
        }
        let step = if steps == 0 { 0.0 } else { length / steps as f64 };
        let pencil = problem.pencil();
        let node = |x: f64| (linalg::apply_j_inv(&pencil.c0.eval(x)), linalg::apply_j_inv(&pencil.c1.eval(x)));
        let mut nodes = Vec::with_capacity(steps * 2);
        for i in 0..steps {
            let x0 = x_from + step * i as f64;
            match control.scheme {
                Scheme::Midpoint => nodes.push(node(x0 + 0.5 * step)),
                Scheme::Magnus4 => {
                    let offset = 3f64.sqrt() / 6.0;
                    nodes.push(node(x0 + (0.5 - offset) * step));
                    nodes.push(node(x0 + (0.5 + offset) * step));
                }
            }
        }
        Ok(Self {
            from_x: x_from,
            to_x: x_to,
            size: problem.dim().ambient(),
            steps,
            step,
            scheme: control.scheme,
            renorm_every: control.renorm_every,
            hermitian: problem.is_hermitian(),
            nodes,
        })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn grid(&self) -> Vec<f64> {
        (0..=self.steps).map(|i| self.x_at(i)).collect()
    }

    fn x_at(&self, i: usize) -> f64 {
        if i == self.steps {
            self.to_x
        } else {
            self.from_x + self.step * i as f64
        }
    }

    /// One-step propagator over step `i`.
    pub fn step_matrix(&self, i: usize, lambda: Complex64) -> CMat {
        let h = re(self.step);
        let omega = match self.scheme {
            Scheme::Midpoint => {
                let (g0, g1) = &self.nodes[i];
                (g0 + g1 * lambda) * h
            }
            Scheme::Magnus4 => {
                let (a0, a1) = &self.nodes[2 * i];
                let (b0, b1) = &self.nodes[2 * i + 1];
                let ga = a0 + a1 * lambda;
                let gb = b0 + b1 * lambda;
                let comm = &gb * &ga - &ga * &gb;
                (&ga + &gb) * (h * 0.5) + comm * (h * h * (3f64.sqrt() / 12.0))
            }
        };
        linalg::expm(&omega)
    }

    /// True fundamental solution, without renormalization.
    pub fn transfer(&self, lambda: Complex64) -> Result<TransferMatrix> {
        let n = self.size;
        let check_steps = self.hermitian && lambda.im == 0.0;
        let mut t = CMat::identity(n, n);
        for i in 0..self.steps {
            let e = self.step_matrix(i, lambda);
            if check_steps {
                let defect = structure_defect(&e);
                if defect > STEP_DEFECT_LIMIT {
                    return Err(Error::StepTooLarge { x: self.x_at(i), defect });
                }
            }
            t = e * t;
            if !linalg::is_finite(&t) {
                return Err(Error::NonFiniteState { x: self.x_at(i + 1) });
            }
        }
        let structure_defect = structure_defect(&t);
        Ok(TransferMatrix { value: t, from_x: self.from_x, at_x: self.to_x, lambda, structure_defect })
    }

    /// Propagates the span of `initial`, re-orthonormalizing every
    /// `renorm_every` steps and at the end. With `record` the path is kept
    /// for [`PropagatedFrame::solution_path`].
    pub fn propagate_frame(&self, lambda: Complex64, initial: &CMat, record: bool) -> Result<PropagatedFrame> {
        let (mut y, r0) = orthonormalize(initial, self.from_x)?;
        let (mut log_scale, mut phase) = det_parts(&r0);
        let mut max_gram_defect = gram_defect(&y);
        let mut history = record.then(|| FrameHistory {
            xs: vec![self.from_x],
            frames: vec![y.clone()],
            epoch: vec![1],
            factors: vec![r0],
        });
        for i in 0..self.steps {
            y = self.step_matrix(i, lambda) * y;
            let x = self.x_at(i + 1);
            if !linalg::is_finite(&y) {
                return Err(Error::NonFiniteState { x });
            }
            if (i + 1) % self.renorm_every == 0 || i + 1 == self.steps {
                let (q, r) = orthonormalize(&y, x)?;
                let (ls, ph) = det_parts(&r);
                log_scale += ls;
                phase *= ph;
                max_gram_defect = max_gram_defect.max(gram_defect(&q));
                y = q;
                if let Some(h) = history.as_mut() {
                    h.factors.push(r);
                }
            }
            if let Some(h) = history.as_mut() {
                h.xs.push(x);
                h.frames.push(y.clone());
                h.epoch.push(h.factors.len());
            }
        }
        Ok(PropagatedFrame {
            columns: y,
            log_scale,
            phase,
            from_x: self.from_x,
            at_x: self.to_x,
            lambda,
            max_gram_defect,
            history,
        })
    }
}

fn orthonormalize(y: &CMat, x: f64) -> Result<(CMat, CMat)> {
    let (q, r) = linalg::thin_qr(y);
    let diag: Vec<f64> = (0..r.nrows().min(r.ncols())).map(|i| r[(i, i)].norm()).collect();
    let largest = diag.iter().copied().fold(0.0, f64::max);
    if !(largest > 0.0) || diag.iter().any(|&v| v <= COLLAPSE_RATIO * largest) {
        return Err(Error::RankCollapse { x });
    }
    Ok((q, r))
}

fn det_parts(r: &CMat) -> (f64, Complex64) {
    let mut log = 0.0;
    let mut phase = Complex64::new(1.0, 0.0);
    for i in 0..r.nrows().min(r.ncols()) {
        let v = r[(i, i)];
        log += v.norm().ln();
        phase *= v / v.norm();
    }
    (log, phase)
}

fn gram_defect(q: &CMat) -> f64 {
    let k = q.ncols();
    linalg::frobenius(&(q.adjoint() * q - CMat::identity(k, k)))
}

/// `T(x_target; λ)` from the left end of the problem interval.
pub fn transfer_matrix(
    problem: &CanonicalProblem,
    lambda: Complex64,
    x_target: f64,
    control: StepControl,
) -> Result<TransferMatrix> {
    let (a, _) = problem.interval();
    Discretization::new(problem, a, x_target, control)?.transfer(lambda)
}

pub fn propagate_frame(
    problem: &CanonicalProblem,
    lambda: Complex64,
    initial: &SubspaceBasis,
    x_from: f64,
    x_to: f64,
    control: StepControl,
) -> Result<PropagatedFrame> {
    Discretization::new(problem, x_from, x_to, control)?.propagate_frame(lambda, initial.columns(), false)
}

/// Sampled vector-valued function on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledPath {
    pub xs: Vec<f64>,
    pub values: Vec<CVec>,
}

impl SampledPath {
    pub fn new(xs: Vec<f64>, values: Vec<CVec>) -> Result<Self> {
        if xs.len() != values.len() || xs.len() < 2 {
            return Err(Error::GridMismatch);
        }
        Ok(Self { xs, values })
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        Self { xs: self.xs.clone(), values: self.values.iter().map(|v| v * factor).collect() }
    }

    /// Component `k` along the grid.
    pub fn component(&self, k: usize) -> Vec<Complex64> {
        self.values.iter().map(|v| v[k]).collect()
    }
}
