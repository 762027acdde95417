use std::collections::HashMap;
use std::path::Path;

use canosys::evans::{self, matched_nullity, Band, EvansOptions, Rectangle};
use canosys::hamiltonian::{default_truncation, Geometry, ScalarFn, SolitonVariant};
use canosys::spectral::{self, SpectralOptions};
use canosys::{BoundaryCondition, CMat, CanonicalProblem, Error, LagrangianFrame, ProblemFile, StepControl, SymplecticDim};
use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

pyo3::create_exception!(pycanosys, ConfigError, PyValueError);
pyo3::create_exception!(pycanosys, NumericalError, PyRuntimeError);

const FRAME_TOL: f64 = 1e-10;

// Same split as the CLI exit codes: bad input vs. failed computation.
fn to_py(e: Error) -> PyErr {
    let msg = e.to_string();
    match e {
        Error::DimensionMismatch { .. }
        | Error::NotOrthonormal { .. }
        | Error::NotIsotropic { .. }
        | Error::InvalidParameter(_)
        | Error::NonPositiveCoefficient { .. }
        | Error::NoAsymptoticLimit { .. }
        | Error::UnsupportedGeometry { .. }
        | Error::NotSolitonProblem
        | Error::ProblemFile(_) => ConfigError::new_err(msg),
        _ => NumericalError::new_err(msg),
    }
}

fn rows_of(m: &CMat) -> Vec<Vec<Complex64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn matrix_of(rows: &[Vec<Complex64>]) -> PyResult<CMat> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || rows.iter().any(|r| r.len() != cols) {
        return Err(ConfigError::new_err("matrix rows must be nonempty and of equal length"));
    }
    Ok(CMat::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

fn boundary(name: &str, dim: SymplecticDim) -> PyResult<BoundaryCondition> {
    if name == "asymptotic" {
        return Ok(BoundaryCondition::Asymptotic);
    }
    LagrangianFrame::preset(name, dim).map(BoundaryCondition::Frame).map_err(to_py)
}

fn control(h: Option<f64>) -> StepControl {
    h.map_or_else(StepControl::default, StepControl::with_h)
}

/// Self-adjoint boundary condition `Θ y = 0` with `Θ` a `d × 2d` frame.
#[pyclass(name = "LagrangianFrame", module = "pycanosys", frozen)]
struct PyFrame(LagrangianFrame);

#[pymethods]
impl PyFrame {
    #[new]
    fn new(rows: Vec<Vec<Complex64>>) -> PyResult<Self> {
        LagrangianFrame::from_rows(matrix_of(&rows)?, FRAME_TOL).map(Self).map_err(to_py)
    }

    #[staticmethod]
    fn preset(name: &str, d: usize) -> PyResult<Self> {
        let dim = SymplecticDim::new(d).map_err(to_py)?;
        LagrangianFrame::preset(name, dim).map(Self).map_err(to_py)
    }

    #[getter]
    fn d(&self) -> usize {
        self.0.dim().half()
    }

    fn rows(&self) -> Vec<Vec<Complex64>> {
        rows_of(&self.0.rows())
    }

    /// Columns spanning `ker Θ = J Θ*`.
    fn kernel_basis(&self) -> Vec<Vec<Complex64>> {
        rows_of(canosys::kernel_basis(&self.0).columns())
    }

    fn defects(&self) -> (f64, f64) {
        let d = self.0.defects();
        (d.orthonormality, d.isotropy)
    }

    fn __repr__(&self) -> String {
        format!("LagrangianFrame(d={})", self.d())
    }
}

#[pyclass(name = "WindingReport", module = "pycanosys", frozen, get_all)]
struct PyWinding {
    count: i64,
    winding: f64,
    moment: Complex64,
    min_conditioning: f64,
    max_phase_jump: f64,
    n_samples: usize,
}

#[pymethods]
impl PyWinding {
    fn __repr__(&self) -> String {
        format!("WindingReport(count={}, winding={:.6}, n_samples={})", self.count, self.winding, self.n_samples)
    }
}

#[pyclass(name = "Problem", module = "pycanosys", frozen)]
struct PyProblem(CanonicalProblem);

#[pymethods]
impl PyProblem {
    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        ProblemFile::parse(text).and_then(|f| f.build()).map(Self).map_err(to_py)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        ProblemFile::load(Path::new(path)).and_then(|f| f.build()).map(Self).map_err(to_py)
    }

    /// `-(p u')' + q u = λ ρ u` on `[a, b]` with constant coefficients and a
    /// Pöschl–Teller well `-ℓ(ℓ+1) sech²` added to `q` when `ell` is given.
    #[staticmethod]
    #[pyo3(signature = (a, b, p=1.0, q=0.0, rho=1.0, ell=None, left="dirichlet", right="dirichlet"))]
    #[allow(clippy::too_many_arguments)]
    fn sturm_liouville(
        a: f64,
        b: f64,
        p: f64,
        q: f64,
        rho: f64,
        ell: Option<u32>,
        left: &str,
        right: &str,
    ) -> PyResult<Self> {
        let dim = SymplecticDim::new(1).map_err(to_py)?;
        let q = match ell {
            Some(l) => ScalarFn::Sum(vec![ScalarFn::Constant(q), ScalarFn::poschl_teller(l)]),
            None => ScalarFn::Constant(q),
        };
        canosys::sturm_liouville_to_canonical(
            ScalarFn::Constant(p),
            q,
            ScalarFn::Constant(rho),
            Geometry::Bounded { a, b },
            boundary(left, dim)?,
            boundary(right, dim)?,
        )
        .map(Self)
        .map_err(to_py)
    }

    /// `-u'' - ℓ(ℓ+1) sech²(x) u = λ u` on the whole line, truncated to
    /// `[-half_length, half_length]`.
    #[staticmethod]
    #[pyo3(signature = (ell, half_length=15.0))]
    fn poschl_teller_line(ell: u32, half_length: f64) -> PyResult<Self> {
        canosys::sturm_liouville_to_canonical(
            ScalarFn::Constant(1.0),
            ScalarFn::poschl_teller(ell),
            ScalarFn::Constant(1.0),
            Geometry::FullLine { half_length },
            BoundaryCondition::Asymptotic,
            BoundaryCondition::Asymptotic,
        )
        .map(Self)
        .map_err(to_py)
    }

    #[staticmethod]
    #[pyo3(signature = (eta=1.0, half_length=None, variant="corrected"))]
    fn nls_soliton(eta: f64, half_length: Option<f64>, variant: &str) -> PyResult<Self> {
        let variant: SolitonVariant = variant.parse().map_err(to_py)?;
        let l = half_length.unwrap_or_else(|| default_truncation(eta));
        canosys::nls_soliton_problem(eta, l, variant).map(Self).map_err(to_py)
    }

    #[getter]
    fn d(&self) -> usize {
        self.0.dim().half()
    }

    #[getter]
    fn interval(&self) -> (f64, f64) {
        self.0.interval()
    }

    #[getter]
    fn bounded(&self) -> bool {
        self.0.geometry().is_bounded()
    }

    #[getter]
    fn hermitian(&self) -> bool {
        self.0.is_hermitian()
    }

    /// `C₀(x) + λ C₁(x)`.
    fn pencil(&self, x: f64, lam: Complex64) -> Vec<Vec<Complex64>> {
        rows_of(&self.0.pencil_at(x, lam))
    }

    /// `T(x; λ)` from the left end; `x` defaults to the right end.
    #[pyo3(signature = (lam, x=None, h=None))]
    fn transfer_matrix(&self, lam: Complex64, x: Option<f64>, h: Option<f64>) -> PyResult<Vec<Vec<Complex64>>> {
        let x = x.unwrap_or(self.0.interval().1);
        let t = canosys::transfer_matrix(&self.0, lam, x, control(h)).map_err(to_py)?;
        Ok(rows_of(&t.value))
    }

    /// Characteristic determinant `D(λ)` of a bounded problem.
    #[pyo3(signature = (lam, h=None))]
    fn characteristic(&self, lam: Complex64, h: Option<f64>) -> PyResult<Complex64> {
        spectral::characteristic_function(&self.0, lam, control(h)).map_err(to_py)
    }

    #[pyo3(signature = (lo, hi, n_scan=400, h=None))]
    fn eigenvalues(&self, lo: f64, hi: f64, n_scan: usize, h: Option<f64>) -> PyResult<Vec<f64>> {
        let options = SpectralOptions { control: control(h), ..SpectralOptions::default() };
        let report = canosys::eigenvalues_in(&self.0, lo, hi, n_scan, &options).map_err(to_py)?;
        Ok(report.eigenpairs.iter().map(|p| p.lambda).collect())
    }

    /// `(xs, ys)` with `ys[i]` the state vector at `xs[i]`, unit weighted norm.
    #[pyo3(signature = (lam, h=None))]
    fn eigenfunction(&self, lam: f64, h: Option<f64>) -> PyResult<(Vec<f64>, Vec<Vec<Complex64>>)> {
        let options = SpectralOptions { control: control(h), ..SpectralOptions::default() };
        let pair = canosys::eigenfunction(&self.0, lam, &options).map_err(to_py)?;
        let path = pair.eigenfunction();
        Ok((path.xs.clone(), path.values.iter().map(|v| v.iter().copied().collect()).collect()))
    }

    /// Evans function value and the conditioning of the matching.
    fn evans(&self, lam: Complex64) -> PyResult<(Complex64, f64)> {
        let v = canosys::evans_function(&self.0, lam, &EvansOptions::default()).map_err(to_py)?;
        Ok((v.value, v.conditioning))
    }

    #[pyo3(signature = (re0, re1, im0, im1, n_samples=None))]
    fn count_zeros(&self, re0: f64, re1: f64, im0: f64, im1: f64, n_samples: Option<usize>) -> PyResult<PyWinding> {
        let mut options = EvansOptions::default();
        if let Some(n) = n_samples {
            options.n_samples = n;
        }
        let rect = Rectangle::new(re0, re1, im0, im1).map_err(to_py)?;
        let r = canosys::count_zeros_winding(&self.0, rect, &options).map_err(to_py)?;
        Ok(PyWinding {
            count: r.count,
            winding: r.winding,
            moment: r.moment,
            min_conditioning: r.min_conditioning,
            max_phase_jump: r.max_phase_jump,
            n_samples: r.n_samples,
        })
    }

    /// Real essential spectrum as `(lo, hi)` bands; ends may be infinite.
    #[pyo3(signature = (lo, hi, n_grid=evans::DEFAULT_BAND_GRID))]
    fn essential_spectrum(&self, lo: f64, hi: f64, n_grid: usize) -> PyResult<Vec<(f64, f64)>> {
        let bands = canosys::essential_spectrum(&self.0, (lo, hi), n_grid, &EvansOptions::default()).map_err(to_py)?;
        Ok(bands.bands.iter().map(|&Band { lo, hi }| (lo, hi)).collect())
    }

    #[pyo3(signature = (lo, hi, n=200, dip=1e-6))]
    fn evans_zeros(&self, lo: f64, hi: f64, n: usize, dip: f64) -> PyResult<Vec<f64>> {
        evans::evans_real_zeros(&self.0, lo, hi, n, dip, &EvansOptions::default()).map_err(to_py)
    }

    #[pyo3(signature = (lam, rank_tol=1e-6))]
    fn matched_nullity(&self, lam: Complex64, rank_tol: f64) -> PyResult<usize> {
        matched_nullity(&self.0, lam, rank_tol, &EvansOptions::default()).map_err(to_py)
    }

    /// Residuals of the translation and phase modes of a soliton problem.
    #[pyo3(signature = (n=2001))]
    fn zero_mode_residuals(&self, n: usize) -> PyResult<HashMap<&'static str, f64>> {
        let (a, b) = self.0.interval();
        let grid: Vec<f64> = (0..n).map(|i| a + (b - a) * i as f64 / (n - 1).max(1) as f64).collect();
        let r = canosys::zero_mode_residuals(&self.0, &grid).map_err(to_py)?;
        Ok(HashMap::from([
            ("translation", r.residual_translation),
            ("phase", r.residual_phase),
            ("h_norm_translation", r.h_norm_translation),
            ("h_norm_phase", r.h_norm_phase),
        ]))
    }

    fn __repr__(&self) -> String {
        let (a, b) = self.0.interval();
        format!("Problem(d={}, interval=({a}, {b}), bounded={})", self.d(), self.bounded())
    }
}

#[pymodule]
fn pycanosys(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyProblem>()?;
    m.add_class::<PyFrame>()?;
    m.add_class::<PyWinding>()?;
    m.add("ConfigError", m.py().get_type::<ConfigError>())?;
    m.add("NumericalError", m.py().get_type::<NumericalError>())?;
    Ok(())
}
