//! Finite-dimensional symplectic linear algebra on `C^{2d}`.
//!
//! The pairing is `b(p, q) = q* J p` with `J = [[0, I], [-I, 0]]`. Boundary
//! conditions are encoded by Lagrangian frames `Θ = (θ₁, θ₂)`, stored in row
//! form as a `d × 2d` matrix. A frame is defined only up to a left unitary
//! factor, so subspaces are always compared through principal angles.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec};

pub const DEFAULT_FRAME_TOL: f64 = 1e-10;
pub const DEFAULT_RANK_TOL: f64 = 1e-8;
pub const DEFAULT_ANGLE_TOL: f64 = 1e-8;

/// Half-dimension `d` of the ambient space `C^{2d}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct SymplecticDim(usize);

impl SymplecticDim {
    pub fn new(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidParameter("half-dimension must be at least 1".into()));
        }
        Ok(Self(d))
    }

    pub fn half(self) -> usize {
        self.0
    }

    pub fn ambient(self) -> usize {
        2 * self.0
    }

    pub fn j(self) -> CMat {
        linalg::symplectic_j(self.0)
    }
}

impl TryFrom<usize> for SymplecticDim {
    type Error = Error;
    fn try_from(d: usize) -> Result<Self> {
        Self::new(d)
    }
}

impl From<SymplecticDim> for usize {
    fn from(d: SymplecticDim) -> usize {
        d.0
    }
}

/// `b(p, q) = q* J p`.
pub fn symplectic_form(p: &CVec, q: &CVec, dim: SymplecticDim) -> Result<Complex64> {
    for v in [p, q] {
        if v.len() != dim.ambient() {
            return Err(Error::DimensionMismatch { expected: dim.ambient(), found: v.len() });
        }
    }
    let d = dim.half();
    // (Jp)_i = p_{i+d}, (Jp)_{i+d} = -p_i
    let mut acc = linalg::ZERO;
    for i in 0..d {
        acc += q[i].conj() * p[i + d] - q[i + d].conj() * p[i];
    }
    Ok(acc)
}

/// A basis of a subspace of `C^{2d}`, stored as the columns of a `2d × k`
/// matrix with full column rank.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceBasis {
    columns: CMat,
}

impl SubspaceBasis {
    /// Validates full column rank: the smallest singular value must exceed
    /// `rank_tol` times the largest.
    pub fn new(columns: CMat, rank_tol: f64) -> Result<Self> {
        if columns.ncols() == 0 || columns.ncols() > columns.nrows() || !columns.nrows().is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "subspace basis must be 2d x k with 1 <= k <= 2d, got {} x {}",
                columns.nrows(),
                columns.ncols()
            )));
        }
        let sv = linalg::singular_values(&columns);
        let largest = sv[0];
        let smallest = *sv.last().unwrap();
        if !(largest > 0.0) || smallest <= rank_tol * largest {
            return Err(Error::RankDeficient { smallest });
        }
        Ok(Self { columns })
    }

    pub(crate) fn new_unchecked(columns: CMat) -> Self {
        Self { columns }
    }

    pub fn columns(&self) -> &CMat {
        &self.columns
    }

    pub fn into_columns(self) -> CMat {
        self.columns
    }

    pub fn dim(&self) -> usize {
        self.columns.ncols()
    }

    pub fn ambient(&self) -> usize {
        self.columns.nrows()
    }

    /// Largest principal angle to another subspace of the same dimension.
    pub fn angle_to(&self, other: &SubspaceBasis) -> f64 {
        linalg::max_principal_angle(&self.columns, &other.columns)
    }
}

/// Max over column pairs of `|w_i* J w_j|` after normalizing the columns.
pub fn isotropy_defect(span: &SubspaceBasis) -> f64 {
    let w = span.columns();
    let mut normalized = w.clone();
    for mut col in normalized.column_iter_mut() {
        let n = col.norm();
        if n > 0.0 {
            col /= linalg::re(n);
        }
    }
    let gram = normalized.adjoint() * linalg::apply_j(&normalized);
    linalg::max_abs(&gram)
}

/// Boundary frame `Θ = (θ₁, θ₂)` with `θ₁θ₁* + θ₂θ₂* = I` and
/// `θ₁θ₂* − θ₂θ₁* = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LagrangianFrame {
    theta1: CMat,
    theta2: CMat,
}

/// Defect norms of a candidate frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameDefects {
    pub orthonormality: f64,
    pub isotropy: f64,
}

fn frame_defects(theta1: &CMat, theta2: &CMat) -> FrameDefects {
    let d = theta1.nrows();
    let ortho = theta1 * theta1.adjoint() + theta2 * theta2.adjoint() - CMat::identity(d, d);
    let iso = theta1 * theta2.adjoint() - theta2 * theta1.adjoint();
    FrameDefects { orthonormality: linalg::frobenius(&ortho), isotropy: linalg::frobenius(&iso) }
}

/// Validate and build a frame from its two `d × d` blocks.
pub fn make_lagrangian(theta1: CMat, theta2: CMat, frame_tol: f64) -> Result<LagrangianFrame> {
    let d = theta1.nrows();
    if d == 0 || theta1.shape() != (d, d) {
        return Err(Error::InvalidParameter(format!(
            "theta1 must be square and nonempty, got {:?}",
            theta1.shape()
        )));
    }
    if theta2.shape() != (d, d) {
        return Err(Error::DimensionMismatch { expected: d, found: theta2.nrows() });
    }
    let defects = frame_defects(&theta1, &theta2);
    if !(defects.orthonormality <= frame_tol) {
        return Err(Error::NotOrthonormal { defect: defects.orthonormality });
    }
    if !(defects.isotropy <= frame_tol) {
        return Err(Error::NotIsotropic { defect: defects.isotropy });
    }
    Ok(LagrangianFrame { theta1, theta2 })
}

impl LagrangianFrame {
    /// `(θ₁, θ₂)` as a `d × 2d` matrix.
    pub fn from_rows(rows: CMat, frame_tol: f64) -> Result<Self> {
        let d = rows.nrows();
        if rows.ncols() != 2 * d {
            return Err(Error::DimensionMismatch { expected: 2 * d, found: rows.ncols() });
        }
        make_lagrangian(rows.columns(0, d).into_owned(), rows.columns(d, d).into_owned(), frame_tol)
    }

    /// `(I, 0)`: the first half of the state vanishes.
    pub fn dirichlet(dim: SymplecticDim) -> Self {
        let d = dim.half();
        Self { theta1: CMat::identity(d, d), theta2: CMat::zeros(d, d) }
    }

    /// `(0, I)`: the second half of the state vanishes.
    pub fn neumann(dim: SymplecticDim) -> Self {
        let d = dim.half();
        Self { theta1: CMat::zeros(d, d), theta2: CMat::identity(d, d) }
    }

    /// `(cos α I, sin α I)`.
    pub fn alpha(dim: SymplecticDim, alpha: f64) -> Self {
        let d = dim.half();
        Self {
            theta1: CMat::identity(d, d) * linalg::re(alpha.cos()),
            theta2: CMat::identity(d, d) * linalg::re(alpha.sin()),
        }
    }

    /// Named presets: `dirichlet`, `neumann`, `alpha:<angle>`.
    pub fn preset(name: &str, dim: SymplecticDim) -> Result<Self> {
        match name.trim() {
            "dirichlet" => Ok(Self::dirichlet(dim)),
            "neumann" => Ok(Self::neumann(dim)),
            other => match other.strip_prefix("alpha:") {
                Some(angle) => {
                    let alpha: f64 = angle.trim().parse().map_err(|_| {
                        Error::InvalidParameter(format!("bad angle in frame preset {other:?}"))
                    })?;
                    Ok(Self::alpha(dim, alpha))
                }
                None => Err(Error::InvalidParameter(format!("unknown frame preset {other:?}"))),
            },
        }
    }

    pub fn dim(&self) -> SymplecticDim {
        SymplecticDim(self.theta1.nrows())
    }

    pub fn theta1(&self) -> &CMat {
        &self.theta1
    }

    pub fn theta2(&self) -> &CMat {
        &self.theta2
    }

    /// Row form `Θ = (θ₁, θ₂)`.
    pub fn rows(&self) -> CMat {
        linalg::hstack(&self.theta1, &self.theta2)
    }

    pub fn defects(&self) -> FrameDefects {
        frame_defects(&self.theta1, &self.theta2)
    }

    pub fn is_real(&self) -> bool {
        linalg::is_real(&self.theta1) && linalg::is_real(&self.theta2)
    }

    /// `U Θ` for a `d × d` matrix `U` (unitary for the result to stay a frame).
    pub fn left_multiply(&self, u: &CMat, frame_tol: f64) -> Result<Self> {
        make_lagrangian(u * &self.theta1, u * &self.theta2, frame_tol)
    }

    /// The `2d × d` matrix `Θ*` whose columns span the Lagrangian `W`.
    pub fn span(&self) -> SubspaceBasis {
        SubspaceBasis::new_unchecked(self.rows().adjoint())
    }
}

/// Basis `JΘ*` of `ker Θ = (Im Θ*)^⊥ = J Im Θ*`.
pub fn kernel_basis(frame: &LagrangianFrame) -> SubspaceBasis {
    SubspaceBasis::new_unchecked(linalg::apply_j(&frame.rows().adjoint()))
}

/// Nearest frame (polar factor) whose `Im Θ*` is the given Lagrangian span.
pub fn orthonormalize_lagrangian(span: &SubspaceBasis, iso_tol: f64) -> Result<LagrangianFrame> {
    let n = span.ambient();
    let d = n / 2;
    if span.dim() != d {
        return Err(Error::RankDeficient { smallest: 0.0 });
    }
    let defect = isotropy_defect(span);
    if !(defect <= iso_tol) {
        return Err(Error::NotIsotropic { defect });
    }
    // Θ_c = span*, Θ = U V* from Θ_c = U Σ V*.
    let candidate = span.columns().adjoint();
    let svd = candidate.svd(true, true);
    let smallest = svd.singular_values.iter().copied().fold(f64::INFINITY, f64::min);
    let largest = svd.singular_values.iter().copied().fold(0.0, f64::max);
    if !(smallest > DEFAULT_RANK_TOL * largest) {
        return Err(Error::RankDeficient { smallest });
    }
    let u = svd.u.expect("requested");
    let v_t = svd.v_t.expect("requested");
    let polar = u * v_t;
    Ok(LagrangianFrame {
        theta1: polar.columns(0, d).into_owned(),
        theta2: polar.columns(d, d).into_owned(),
    })
}
