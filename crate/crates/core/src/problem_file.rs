//! Problem definition files.
//!
//! TOML with three sections:
//!
//! ```toml
//! [problem]
//! kind = "sturm_liouville"     # traveling_wave | nls_soliton | raw_pencil
//! geometry = "bounded"         # half_line | line
//! a = 0.0
//! b = 3.141592653589793
//!
//! [coefficients]
//! p = 1.0
//! q = { poschl_teller = 2 }
//! rho = 1.0
//!
//! [boundary]
//! left = "dirichlet"
//! right = [[1.0, 0.0]]
//! ```
//!
//! Scalar coefficients are a number, `{ constant = c }`,
//! `{ sech2 = { amplitude = A, rate = r } }`, `{ poschl_teller = ℓ }` or an
//! array of these (summed). Matrices are row lists whose entries are
//! numbers or `[re, im]` pairs; raw pencils may instead name a sampled
//! file (`c0_file`, `c1_file`, `weight_file`) resolved relative to the
//! problem file.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{
    check_grid, default_truncation, nls_soliton_problem, sturm_liouville_to_canonical, traveling_wave_to_canonical,
    BoundaryCondition, CanonicalProblem, CoefficientPencil, Geometry, HamiltonianField, MatrixField, ProblemKind,
    SampledMatrix, ScalarFn, SolitonVariant,
};
use crate::linalg::{hermitian_defect, CMat};
use crate::symplectic::{LagrangianFrame, SymplecticDim, DEFAULT_FRAME_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    SturmLiouville,
    TravelingWave,
    NlsSoliton,
    RawPencil,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometryKind {
    Bounded,
    HalfLine,
    Line,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub kind: Kind,
    pub geometry: GeometryKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    /// Truncation: half-length on the line, length on the half-line.
    #[serde(default, rename = "L", skip_serializing_if = "Option::is_none")]
    pub truncation: Option<f64>,
    /// Propagation steps across the interval.
    #[serde(default, rename = "N", skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScalarSpec {
    Number(f64),
    Sum(Vec<ScalarSpec>),
    Named(NamedScalar),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum NamedScalar {
    Constant(f64),
    Sech2 { amplitude: f64, rate: f64 },
    PoschlTeller(u32),
}

impl ScalarSpec {
    pub fn to_fn(&self) -> ScalarFn {
        match self {
            ScalarSpec::Number(c) | ScalarSpec::Named(NamedScalar::Constant(c)) => ScalarFn::Constant(*c),
            ScalarSpec::Named(NamedScalar::Sech2 { amplitude, rate }) => {
                ScalarFn::Sech2 { amplitude: *amplitude, rate: *rate }
            }
            ScalarSpec::Named(NamedScalar::PoschlTeller(ell)) => ScalarFn::poschl_teller(*ell),
            ScalarSpec::Sum(terms) => ScalarFn::Sum(terms.iter().map(ScalarSpec::to_fn).collect()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Entry {
    Real(f64),
    Complex([f64; 2]),
}

impl Entry {
    fn value(self) -> Complex64 {
        match self {
            Entry::Real(v) => Complex64::new(v, 0.0),
            Entry::Complex([r, i]) => Complex64::new(r, i),
        }
    }
}

pub type MatrixRows = Vec<Vec<Entry>>;

pub fn rows_to_matrix(rows: &MatrixRows) -> Result<CMat> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if nrows == 0 || ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::ProblemFile("matrix rows must be nonempty and of equal length".into()));
    }
    Ok(CMat::from_fn(nrows, ncols, |i, j| rows[i][j].value()))
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientsSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<ScalarSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<ScalarSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<ScalarSpec>,
    /// Traveling-wave drift.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drift: Option<ScalarSpec>,
    /// Traveling-wave potential.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<ScalarSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<SolitonVariant>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c0: Option<MatrixRows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c1: Option<MatrixRows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<MatrixRows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c0_file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c1_file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight_file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BoundarySpec {
    /// `dirichlet`, `neumann`, `alpha:<angle>` or `asymptotic`.
    Named(String),
    Rows(MatrixRows),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub left: Option<BoundarySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub right: Option<BoundarySpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub problem: ProblemSection,
    #[serde(default)]
    pub coefficients: CoefficientsSection,
    #[serde(default)]
    pub boundary: BoundarySection,
    /// Directory that relative sampled-file paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ProblemFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::ProblemFile(e.message().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::ProblemFile(format!("{}: {e}", path.display())))?;
        let mut file = Self::parse(&text)?;
        file.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(file)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::ProblemFile(e.to_string()))
    }

    fn dim(&self) -> Result<SymplecticDim> {
        let d = match self.problem.kind {
            Kind::SturmLiouville | Kind::TravelingWave => 1,
            Kind::NlsSoliton => 2,
            Kind::RawPencil => self
                .problem
                .dim
                .ok_or_else(|| Error::ProblemFile("raw_pencil needs problem.dim".into()))?,
        };
        if let Some(given) = self.problem.dim {
            if given != d {
                return Err(Error::DimensionMismatch { expected: d, found: given });
            }
        }
        SymplecticDim::new(d)
    }

    pub fn geometry(&self) -> Result<Geometry> {
        let p = &self.problem;
        let need = |v: Option<f64>, name: &str| v.ok_or_else(|| Error::ProblemFile(format!("geometry needs problem.{name}")));
        Ok(match p.geometry {
            GeometryKind::Bounded => Geometry::Bounded { a: need(p.a, "a")?, b: need(p.b, "b")? },
            GeometryKind::HalfLine => Geometry::HalfLine { a: p.a.unwrap_or(0.0), length: need(p.truncation, "L")? },
            GeometryKind::Line => {
                let eta = self.coefficients.eta.unwrap_or(1.0);
                let l = match (p.truncation, p.kind) {
                    (Some(l), _) => l,
                    (None, Kind::NlsSoliton) => default_truncation(eta),
                    (None, _) => return Err(Error::ProblemFile("line geometry needs problem.L".into())),
                };
                Geometry::FullLine { half_length: l }
            }
        })
    }

    fn boundary(&self, spec: &Option<BoundarySpec>, dim: SymplecticDim) -> Result<BoundaryCondition> {
        let default_asymptotic = match (self.problem.geometry, spec) {
            (_, Some(_)) => false,
            (GeometryKind::Bounded, None) => {
                return Err(Error::ProblemFile("bounded geometry needs boundary.left and boundary.right".into()))
            }
            _ => true,
        };
        if default_asymptotic {
            return Ok(BoundaryCondition::Asymptotic);
        }
        match spec.as_ref().expect("checked above") {
            BoundarySpec::Named(name) if name == "asymptotic" => Ok(BoundaryCondition::Asymptotic),
            BoundarySpec::Named(name) => Ok(BoundaryCondition::Frame(LagrangianFrame::preset(name, dim)?)),
            BoundarySpec::Rows(rows) => {
                Ok(BoundaryCondition::Frame(LagrangianFrame::from_rows(rows_to_matrix(rows)?, DEFAULT_FRAME_TOL)?))
            }
        }
    }

    fn scalar(&self, spec: &Option<ScalarSpec>, name: &str, default: Option<f64>) -> Result<ScalarFn> {
        match (spec, default) {
            (Some(s), _) => Ok(s.to_fn()),
            (None, Some(c)) => Ok(ScalarFn::Constant(c)),
            (None, None) => Err(Error::ProblemFile(format!("missing coefficients.{name}"))),
        }
    }

    fn matrix_field(&self, inline: &Option<MatrixRows>, file: &Option<PathBuf>, name: &str, n: usize) -> Result<Option<MatrixField>> {
        match (inline, file) {
            (Some(_), Some(_)) => Err(Error::ProblemFile(format!("give either {name} or {name}_file, not both"))),
            (Some(rows), None) => {
                let m = rows_to_matrix(rows)?;
                if m.nrows() != n || m.ncols() != n {
                    return Err(Error::DimensionMismatch { expected: n, found: m.nrows() });
                }
                Ok(Some(MatrixField::constant(m)))
            }
            (None, Some(path)) => {
                let full = self.base_dir.join(path);
                let text = std::fs::read_to_string(&full)
                    .map_err(|e| Error::ProblemFile(format!("{}: {e}", full.display())))?;
                Ok(Some(MatrixField::sampled(SampledMatrix::parse(&text, n)?)))
            }
            (None, None) => Ok(None),
        }
    }

    /// Builds the canonical problem this file describes.
    pub fn build(&self) -> Result<CanonicalProblem> {
        let dim = self.dim()?;
        let geometry = self.geometry()?;
        let c = &self.coefficients;
        match self.problem.kind {
            Kind::NlsSoliton => {
                if self.problem.geometry != GeometryKind::Line {
                    return Err(Error::ProblemFile("nls_soliton lives on the line".into()));
                }
                let Geometry::FullLine { half_length } = geometry else { unreachable!() };
                nls_soliton_problem(c.eta.unwrap_or(1.0), half_length, c.variant.unwrap_or_default())
            }
            Kind::SturmLiouville => sturm_liouville_to_canonical(
                self.scalar(&c.p, "p", Some(1.0))?,
                self.scalar(&c.q, "q", Some(0.0))?,
                self.scalar(&c.rho, "rho", Some(1.0))?,
                geometry,
                self.boundary(&self.boundary.left, dim)?,
                self.boundary(&self.boundary.right, dim)?,
            ),
            Kind::TravelingWave => traveling_wave_to_canonical(
                self.scalar(&c.drift, "drift", Some(0.0))?,
                self.scalar(&c.potential, "potential", None)?,
                geometry,
                self.boundary(&self.boundary.left, dim)?,
                self.boundary(&self.boundary.right, dim)?,
            ),
            Kind::RawPencil => {
                let n = dim.ambient();
                let c0 = self
                    .matrix_field(&c.c0, &c.c0_file, "c0", n)?
                    .ok_or_else(|| Error::ProblemFile("raw_pencil needs c0 or c0_file".into()))?;
                let c1 = self
                    .matrix_field(&c.c1, &c.c1_file, "c1", n)?
                    .ok_or_else(|| Error::ProblemFile("raw_pencil needs c1 or c1_file".into()))?;
                let weight = self.matrix_field(&c.weight, &c.weight_file, "weight", n)?.unwrap_or_else(|| c1.clone());
                let (a, b) = geometry.interval();
                let hermitian = check_grid(a, b, 201)
                    .into_iter()
                    .all(|x| hermitian_defect(&c0.eval(x)) <= 1e-12 && hermitian_defect(&c1.eval(x)) <= 1e-12);
                CanonicalProblem::new(
                    dim,
                    CoefficientPencil { c0, c1, hermitian },
                    geometry,
                    self.boundary(&self.boundary.left, dim)?,
                    self.boundary(&self.boundary.right, dim)?,
                    HamiltonianField::new(dim, weight)?,
                    ProblemKind::RawPencil,
                )
            }
        }
    }

    /// Overrides the truncation length (line and half-line only).
    pub fn set_truncation(&mut self, l: f64) -> Result<()> {
        if !(l > 0.0 && l.is_finite()) {
            return Err(Error::InvalidParameter(format!("truncation must be positive, got {l}")));
        }
        if self.problem.geometry == GeometryKind::Bounded {
            return Err(Error::UnsupportedGeometry { expected: "line or half-line" });
        }
        self.problem.truncation = Some(l);
        Ok(())
    }

    pub fn set_variant(&mut self, variant: SolitonVariant) -> Result<()> {
        if self.problem.kind != Kind::NlsSoliton {
            return Err(Error::NotSolitonProblem);
        }
        self.coefficients.variant = Some(variant);
        Ok(())
    }
}
