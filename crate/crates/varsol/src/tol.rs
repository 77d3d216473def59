//! Numeric tolerances used across the pipeline, in one place.

/// Relative agreement between the assembled residual and independent
/// algebraic routes (exact arithmetic up to rounding).
pub const EXACT_REL: f64 = 1e-12;

/// Relative tolerance on closed-form stationary points reproduced by the
/// solver.
pub const CLOSED_FORM_REL: f64 = 1e-8;

/// Scaled gradient residual below which a stationary point is admissible.
pub const ADMISSIBLE_RESIDUAL: f64 = 1e-9;

/// Newton convergence target (scaled residual).
pub const NEWTON_TARGET: f64 = 1e-12;

/// Relative distance below which two roots are considered duplicates.
pub const ROOT_DEDUP_REL: f64 = 1e-6;

/// Amplitude below which a root counts as the trivial zero solution.
pub const TRIVIAL_AMPLITUDE: f64 = 1e-8;

/// Relative tolerance on the selected tail wavenumber against the
/// linearized dispersion root.
pub const KAPPA_CROSS_CHECK_REL: f64 = 1e-10;

/// Normalized secular residual at the selected wavenumber.
pub const SECULAR_AT_KAPPA_REL: f64 = 1e-10;

/// Normalized secular residual gate before assembling the action.
pub const SECULAR_GATE_REL: f64 = 1e-8;

/// Agreement between assembled action and adaptive quadrature.
pub const ACTION_VS_QUADRATURE_REL: f64 = 1e-6;

/// Agreement between closed-form moments and adaptive quadrature.
pub const MOMENT_VS_QUADRATURE_REL: f64 = 1e-10;

/// Default absolute/relative tolerance for the quadrature oracle.
pub const QUADRATURE_DEFAULT: f64 = 1e-9;

/// Normalized threshold below which the second representability condition
/// counts as satisfied.
pub const FELS_PASS: f64 = 1e-9;

/// Normalized threshold above which the second representability condition
/// counts as violated. Values in between are inconclusive.
pub const FELS_FAIL: f64 = 1e-3;

/// Hessian determinant threshold (relative to its largest entry squared)
/// below which a stationary point is classified as degenerate.
pub const HESSIAN_DEGENERATE_REL: f64 = 1e-12;

/// Dual-number gradients against central finite differences.
pub const DUAL_VS_FD_REL: f64 = 1e-5;
