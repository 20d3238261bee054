//! Discrete norms, error measurement, convergence tables and the stability
//! coefficients of the two-step recursion.

mod errors;
mod norms;
mod stability;
mod table;

pub use errors::{
    consistency_error, error_vs_exact, error_vs_reference, restrict_to, ConsistencyScheme,
    ErrorRange, SmoothFunction,
};
pub use norms::{norm, oscillation_metric, NormKind};
pub use stability::{m_tau, m_tau_inverse, stability_coefficients, StabilityCoefficients};
pub use table::{
    convergence_table, convergence_table_partial, doubling_ladder, format_error, observed_order,
    ConvergenceTable, ErrorPolicy, Rung, TableRow,
};
