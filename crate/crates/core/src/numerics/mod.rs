//! Shared numerical kernels: quadrature, composite grids, a Magnus integrator
//! for linear 2x2 systems and Hermitian eigensolves.

mod grid;
mod linalg;
mod ode;
mod quadrature;

pub use grid::{AffineMap, Grid, GridSpec, Panel, Side};
pub use linalg::{herm_eig, herm_eigenvalues, lagrange_weights, smallest_singular};
pub(crate) use linalg::normalize_phase;
pub use ode::{expm_traceless, magnus_step, ode_integrate, transfer, LinearSystem, Trajectory};
pub use quadrature::{
    composite_gauss, gauss_legendre, quad_weighted, QuadResult, Singularity, UnitWeight, Weight,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("weight exponent {exponent} at x = {at} is not integrable")]
    NonIntegrable { at: f64, exponent: f64 },
    #[error("integrand evaluated to a non-finite value at x = {x}")]
    EvaluationError { x: f64 },
    #[error("step size underflow at x = {x} (h = {h:e})")]
    StiffnessError { x: f64, h: f64 },
    #[error("matrix is not Hermitian (relative residual {residual:e})")]
    NotHermitian { residual: f64 },
    #[error("invalid tolerance: {0}")]
    InvalidTolerance(&'static str),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("eigensolver failed: {0}")]
    EigenFailure(String),
}

/// Solver tolerances shared across modules.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub ode_rel: f64,
    pub ode_abs: f64,
    pub quad_tol: f64,
    pub root_tol: f64,
    pub eig_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            ode_rel: 1e-10,
            ode_abs: 1e-12,
            quad_tol: 1e-10,
            root_tol: 1e-9,
            eig_tol: 1e-10,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<(), NumericsError> {
        let all = [self.ode_rel, self.ode_abs, self.quad_tol, self.root_tol, self.eig_tol];
        if all.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(NumericsError::InvalidTolerance("all tolerances must be positive and finite"));
        }
        if self.root_tol < 1e2 * f64::EPSILON {
            return Err(NumericsError::InvalidTolerance("root_tol below 100 machine epsilon"));
        }
        Ok(())
    }

    /// Same tolerances with the integration tolerances scaled by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Tolerances {
            ode_rel: self.ode_rel * factor,
            ode_abs: self.ode_abs * factor,
            quad_tol: self.quad_tol * factor,
            ..*self
        }
    }
}
