//! Numeric tolerances shared by every module.
//!
//! A single [`NumericPolicy`] value is threaded through the validating
//! constructors and decompositions. There are no global tolerance constants
//! outside this record, so two runs with the same policy make the same
//! accept/reject decisions.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NumericPolicy {
    /// Relative Frobenius asymmetry ‖H − H†‖/‖H‖ tolerated for Hermitian input.
    pub symmetry_tol: f64,
    /// Most negative eigenvalue still accepted as positive semidefinite.
    pub psd_tol: f64,
    /// Allowed deviation of a density operator's trace from one.
    pub trace_tol: f64,
    /// Allowed deviation of a pure state's norm from one.
    pub norm_tol: f64,
    /// Allowed ‖U†U − I‖ for unitary encodings.
    pub unitary_tol: f64,
    /// Operator-norm tolerance for POVM completeness and Choi trace preservation.
    pub completeness_tol: f64,
    /// Trace-norm tolerance for the no-signalling marginal condition.
    pub marginal_tol: f64,
    /// Schmidt coefficients at or below this are counted as zero.
    pub schmidt_tol: f64,
}

impl Default for NumericPolicy {
    fn default() -> Self {
        Self {
            symmetry_tol: 1e-10,
            psd_tol: 1e-9,
            trace_tol: 1e-10,
            norm_tol: 1e-10,
            unitary_tol: 1e-10,
            completeness_tol: 1e-9,
            marginal_tol: 1e-9,
            schmidt_tol: 1e-9,
        }
    }
}
