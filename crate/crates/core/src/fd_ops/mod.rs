//! Difference stencils, banded matrices and step-system assembly.

mod assembly;
mod assembly_2d;
mod banded;
mod stencil;
mod system;

pub use assembly::{
    assemble_cn_from_samples, assemble_from_samples, assemble_isaacs_from_samples,
    assemble_step_system, boundary_ghosts, numerical_hamiltonian, sample_coefficients,
    sample_isaacs_coefficients, spatial_operator, CnVariant, ControlCoefficients,
    SampledCoefficients, SpatialOperator, StepHistory,
};
pub use assembly_2d::{
    assemble_2d_from_samples, assemble_step_system_2d, sample_coefficients_2d, spatial_operator_2d,
    ControlCoefficients2D, SampledCoefficients2D,
};
pub use banded::{assemble_a_matrix, BandLu, BandedMatrix, PentaMatrix, TriMatrix};
pub use stencil::{d1_centered, d1_minus, d1_plus, d2, stencil_coefficients_2d, Padded};
pub use system::{StepMeta, SupInfSystem, SupLinearSystem};
