use serde::Serialize;

/// Numeric tolerances shared by every check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Tolerances {
    /// Equality of continuous parts of carrier elements.
    pub eq_tol: f64,
    /// Allowed deviation between finite-difference and analytic jacobians.
    pub fd_tol: f64,
    /// Central-difference step.
    pub fd_step: f64,
    /// Agreement of form coefficients.
    pub form_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            eq_tol: 1e-9,
            fd_tol: 1e-6,
            fd_step: 1e-5,
            form_tol: 1e-6,
        }
    }
}

/// Radii used to semi-decide openness, largest first.
pub const RADIUS_LADDER: [f64; 3] = [1e-2, 1e-3, 1e-4];

/// Deterministic sampling parameters for domains.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SampleConfig {
    pub count: usize,
    pub seed: u64,
}

impl Default for SampleConfig {
    fn default() -> Self {
        SampleConfig { count: 64, seed: 0 }
    }
}

impl SampleConfig {
    pub fn with_count(count: usize) -> Self {
        SampleConfig {
            count,
            ..Self::default()
        }
    }
}
