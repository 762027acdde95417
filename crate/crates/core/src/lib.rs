//! Spectral analysis of linear canonical systems `J y' = (C₀(x) + λ C₁(x)) y`
//! with Lagrangian boundary conditions.

// `!(x > 0.0)` style guards reject NaN on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod evans;
pub mod hamiltonian;
pub mod linalg;
pub mod problem_file;
pub mod propagate;
pub mod spectral;
pub mod symplectic;

pub use error::{Error, Result};
pub use evans::{
    count_zeros_winding, essential_spectrum, evans_function, zero_mode_residuals, EssentialSpectrumBands, EvansOptions,
    EvansValue, Rectangle, WindingReport,
};
pub use hamiltonian::{
    nls_soliton_problem, sturm_liouville_to_canonical, traveling_wave_to_canonical, BoundaryCondition, CanonicalProblem,
    Geometry, ScalarFn, SolitonVariant,
};
pub use linalg::{CMat, CVec};
pub use problem_file::ProblemFile;
pub use propagate::{propagate_frame, transfer_matrix, Scheme, StepControl, TransferMatrix};
pub use spectral::{eigenfunction, eigenvalues_in, EigenPair, SpectralOptions, SpectrumReport};
pub use symplectic::{kernel_basis, orthonormalize_lagrangian, LagrangianFrame, SubspaceBasis, SymplecticDim};
