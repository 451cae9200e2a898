//! Centralized tolerances shared by every module.

/// Numerical tolerances. All geometry is dimensionless.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Config {
    /// Conformal frame / orthonormality tolerance.
    pub tol_frame: f64,
    /// Containment tolerance for exact domain tests.
    pub tol_contain: f64,
    /// Relative tolerance of the sublevel boundary-distance estimate.
    pub tol_sublevel_distance: f64,
    /// Absolute tolerance of adaptive Simpson quadrature.
    pub tol_quadrature: f64,
}

impl Default for Config {
    fn default() -> Self {
        Self { tol_frame: 1e-10, tol_contain: 1e-9, tol_sublevel_distance: 1e-3, tol_quadrature: 1e-9 }
    }
}

pub const TOL_FRAME: f64 = 1e-10;
pub const TOL_CONTAIN: f64 = 1e-9;
