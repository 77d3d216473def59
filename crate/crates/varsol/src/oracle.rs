//! Direct accuracy analysis: analytic jets of the trial function, the
//! independent quadrature oracle for the averaged action, and residual
//! grids of the variational ODE under optimized trial functions.

use thiserror::Error;

use crate::ansatz::{self, AnsatzParams, AveragingError};
use crate::family::{CoefficientFamily, FamilyError, Jet};
use crate::solver::{self, SolveError, SolveMode, StartGrid, StationaryResult};
use crate::tol;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("trial-function width squared is zero")]
    ZeroWidth,
    #[error("adaptive quadrature did not converge within the depth limit")]
    NonConvergence,
    #[error("tail mean density {0:.3e} is not zero at the given wavenumber; the subtracted integrand would not converge")]
    TailMeanNonzero(f64),
    #[error("tail wavenumber must be finite and real when the tail amplitude is nonzero")]
    BadWavenumber,
    #[error(transparent)]
    Averaging(#[from] AveragingError),
    #[error(transparent)]
    Family(#[from] FamilyError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// Analytic jet of `u(z) = A·exp(−z²/s) + α·cos(κz)` up to fourth order.
pub fn ansatz_jet(p: &AnsatzParams, z: f64) -> Result<Jet, OracleError> {
    let s = p.width_sq;
    if s == 0.0 {
        return Err(OracleError::ZeroWidth);
    }
    let a = 1.0 / s;
    let g = p.amplitude * (-z * z * a).exp();
    let (al, k) = (p.tail_amplitude, p.tail_wavenumber);
    let (ck, sk) = ((k * z).cos(), (k * z).sin());
    Ok(Jet {
        z,
        u: g + al * ck,
        up: -2.0 * a * z * g - al * k * sk,
        upp: g * (4.0 * a * a * z * z - 2.0 * a) - al * k * k * ck,
        uppp: g * (-8.0 * a.powi(3) * z.powi(3) + 12.0 * a * a * z) + al * k.powi(3) * sk,
        u4: g * (16.0 * a.powi(4) * z.powi(4) - 48.0 * a.powi(3) * z * z + 12.0 * a * a)
            + al * k.powi(4) * ck,
    })
}

// ---------------------------------------------------------------------------
// Adaptive quadrature
// ---------------------------------------------------------------------------

const MAX_DEPTH: u32 = 60;

fn simpson(fa: f64, fm: f64, fb: f64, width: f64) -> f64 {
    width / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adapt<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    eps: f64,
    depth: u32,
) -> Result<f64, OracleError> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(fa, flm, fm, m - a);
    let right = simpson(fm, frm, fb, b - m);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * eps {
        return Ok(left + right + delta / 15.0);
    }
    if depth >= MAX_DEPTH {
        return Err(OracleError::NonConvergence);
    }
    let half = 0.5 * eps;
    Ok(adapt(f, a, m, fa, flm, fm, left, half, depth + 1)?
        + adapt(f, m, b, fm, frm, fb, right, half, depth + 1)?)
}

/// Adaptive Simpson quadrature of `f` over `[a, b]`. `tol` acts as an
/// absolute tolerance scaled up by the integral's rough magnitude when
/// that exceeds one. The interval is pre-split into panels so narrow or
/// oscillatory features cannot hide from the initial samples.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Result<f64, OracleError> {
    if a == b {
        return Ok(0.0);
    }
    let panels = 512usize;
    let width = (b - a) / panels as f64;
    let mut rough = 0.0;
    let mut cache = Vec::with_capacity(panels);
    for i in 0..panels {
        let lo = a + i as f64 * width;
        let hi = lo + width;
        let (fa, fm, fb) = (f(lo), f(0.5 * (lo + hi)), f(hi));
        let whole = simpson(fa, fm, fb, width);
        rough += whole.abs();
        cache.push((lo, hi, fa, fm, fb, whole));
    }
    let eps_total = tol * rough.max(1.0);
    let eps_panel = eps_total / panels as f64;
    let mut total = 0.0;
    for (lo, hi, fa, fm, fb, whole) in cache {
        total += adapt(f, lo, hi, fa, fm, fb, whole, eps_panel, 0)?;
    }
    Ok(total)
}

/// Numeric quadrature of `L(core + tail) − L(tail alone)` over the window
/// `[−Z, Z]`, `Z = 12√|s| + 40/max(κ, 1)`. The subtraction removes the
/// non-decaying tail-only density, whose constant mean must already vanish
/// at the selected wavenumber.
pub fn quadrature_action(
    fam: &CoefficientFamily,
    p: &AnsatzParams,
    tol: f64,
) -> Result<f64, OracleError> {
    if p.width_sq == 0.0 {
        return Err(OracleError::ZeroWidth);
    }
    if p.tail_amplitude != 0.0 {
        if !p.tail_wavenumber.is_finite() {
            return Err(OracleError::BadWavenumber);
        }
        let expansion = ansatz::expand_density(fam, p)?;
        let q = p.tail_wavenumber * p.tail_wavenumber;
        let (residual, largest) = ansatz::secular_residual(&expansion, q)?;
        if largest > 0.0 && residual.abs() > tol::SECULAR_GATE_REL * largest {
            return Err(OracleError::TailMeanNonzero(residual));
        }
    }
    let z_max = 12.0 * p.width_sq.abs().sqrt() + 40.0 / p.tail_wavenumber.max(1.0);
    let tail = AnsatzParams::with_tail(0.0, p.width_sq, p.tail_amplitude, p.tail_wavenumber);
    let f = |z: f64| {
        let full = ansatz_jet(p, z).expect("width checked");
        let tail_only = ansatz_jet(&tail, z).expect("width checked");
        fam.lagrangian_at(full.u, full.up, full.upp)
            - fam.lagrangian_at(tail_only.u, tail_only.up, tail_only.upp)
    };
    integrate(&f, -z_max, z_max, tol)
}

// ---------------------------------------------------------------------------
// Residual grids
// ---------------------------------------------------------------------------

/// Sample grid in z.
#[derive(Debug, Clone, PartialEq)]
pub struct ZGrid {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Default for ZGrid {
    fn default() -> Self {
        Self { min: -3.0, max: 3.0, points: 121 }
    }
}

impl ZGrid {
    pub fn values(&self) -> Vec<f64> {
        linspace(self.min, self.max, self.points)
    }
}

/// A parameter axis to sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisSpec {
    pub name: String,
    pub values: Vec<f64>,
}

impl AxisSpec {
    pub fn linspace(name: &str, min: f64, max: f64, points: usize) -> Self {
        Self { name: name.to_string(), values: linspace(min, max, points) }
    }
}

pub fn linspace(min: f64, max: f64, points: usize) -> Vec<f64> {
    if points <= 1 {
        return vec![min];
    }
    (0..points)
        .map(|i| min + (max - min) * i as f64 / (points - 1) as f64)
        .collect()
}

/// |ODE residual| sampled over z and one parameter axis, with the
/// stationary point re-solved at each axis value. Missing entries
/// (re-solve failures) are NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualGrid {
    pub z: Vec<f64>,
    pub axis_name: String,
    pub axis: Vec<f64>,
    /// values[zi][ai]
    pub values: Vec<Vec<f64>>,
}

impl ResidualGrid {
    /// Largest residual over z for one axis column (NaN if missing).
    pub fn max_over_z(&self, axis_idx: usize) -> f64 {
        self.values
            .iter()
            .map(|row| row[axis_idx])
            .fold(f64::NAN, |acc, v| if acc.is_nan() || v > acc { v } else { acc })
    }

    /// CSV: header row carries the axis values, one row per z sample.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("z");
        for v in &self.axis {
            out.push_str(&format!(",{}={}", self.axis_name, crate::runner::fmt_f64(*v)));
        }
        out.push('\n');
        for (zi, z) in self.z.iter().enumerate() {
            out.push_str(&crate::runner::fmt_f64(*z));
            for ai in 0..self.axis.len() {
                out.push_str(&format!(",{}", crate::runner::fmt_f64(self.values[zi][ai])));
            }
            out.push('\n');
        }
        out
    }
}

/// Scan the ODE residual of the re-optimized trial function across one
/// parameter axis. The family must carry its expression recipe so the
/// swept parameter can be rebound.
pub fn residual_scan(
    fam: &CoefficientFamily,
    solution: &StationaryResult,
    z_grid: &ZGrid,
    axis: &AxisSpec,
) -> Result<ResidualGrid, OracleError> {
    let z = z_grid.values();
    let mut values = vec![vec![f64::NAN; axis.values.len()]; z.len()];
    for (ai, &axis_value) in axis.values.iter().enumerate() {
        let rebuilt = match fam.with_param(&axis.name, axis_value) {
            Ok(f) => f,
            Err(FamilyError::NoRecipe) => return Err(FamilyError::NoRecipe.into()),
            Err(_) => continue,
        };
        let starts = StartGrid::default_for(&rebuilt);
        let results = match solution.mode {
            SolveMode::Regular => solver::solve_regular(&rebuilt, &starts, 0),
            SolveMode::Embedded => solver::solve_embedded(&rebuilt, &starts, 0),
        };
        let results = match results {
            Ok(r) => r,
            Err(_) => continue,
        };
        let target = (solution.params.amplitude, solution.params.width_sq);
        let chosen = results
            .iter()
            .filter(|r| r.admissible)
            .min_by(|a, b| {
                let da = dist(target, (a.params.amplitude, a.params.width_sq));
                let db = dist(target, (b.params.amplitude, b.params.width_sq));
                da.partial_cmp(&db).unwrap()
            })
            .cloned();
        let Some(root) = chosen else { continue };
        for (zi, &zv) in z.iter().enumerate() {
            let jet = ansatz_jet(&root.params, zv)?;
            values[zi][ai] = rebuilt.el_residual(&jet).abs();
        }
    }
    Ok(ResidualGrid { z, axis_name: axis.name.clone(), axis: axis.values.clone(), values })
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    let scale = (a.0.abs() + a.1.abs()).max(1.0);
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt() / scale
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::ParameterSet;

    fn example1(d1: f64, d2: f64, d3: f64, mu: f64) -> CoefficientFamily {
        let params =
            ParameterSet::from_pairs([("d1", d1), ("d2", d2), ("d3", d3), ("mu", mu)]).unwrap();
        CoefficientFamily::preset("example1", &params).unwrap()
    }

    #[test]
    fn gaussian_jet_at_origin() {
        let p = AnsatzParams::core(1.0, 1.0);
        let jet = ansatz_jet(&p, 0.0).unwrap();
        assert_eq!((jet.u, jet.up, jet.upp, jet.uppp, jet.u4), (1.0, 0.0, -2.0, 0.0, 12.0));
    }

    #[test]
    fn cosine_jet_at_origin() {
        let p = AnsatzParams::with_tail(0.0, 1.0, 1.0, 1.0);
        let jet = ansatz_jet(&p, 0.0).unwrap();
        assert_eq!((jet.u, jet.up, jet.upp, jet.uppp, jet.u4), (1.0, 0.0, -1.0, 0.0, 1.0));
    }

    #[test]
    fn gaussian_jet_decays() {
        let p = AnsatzParams::core(1.0, 1.0);
        let jet = ansatz_jet(&p, 40.0).unwrap();
        for v in [jet.u, jet.up, jet.upp, jet.uppp, jet.u4] {
            assert!(v.abs() < 1e-300);
        }
    }

    #[test]
    fn jet_matches_finite_differences() {
        let p = AnsatzParams::with_tail(0.8, 2.3, 0.2, 1.4);
        let u = |z: f64| {
            p.amplitude * (-z * z / p.width_sq).exp()
                + p.tail_amplitude * (p.tail_wavenumber * z).cos()
        };
        let h = 1e-3;
        for z in [-1.7, 0.3, 2.9] {
            let jet = ansatz_jet(&p, z).unwrap();
            let d1 = (u(z + h) - u(z - h)) / (2.0 * h);
            let d2 = (u(z + h) - 2.0 * u(z) + u(z - h)) / (h * h);
            let d4 = (u(z + 2.0 * h) - 4.0 * u(z + h) + 6.0 * u(z) - 4.0 * u(z - h)
                + u(z - 2.0 * h))
                / h.powi(4);
            assert!((jet.up - d1).abs() < 1e-6 * d1.abs().max(1.0));
            assert!((jet.upp - d2).abs() < 1e-5 * d2.abs().max(1.0));
            assert!((jet.u4 - d4).abs() < 1e-3 * d4.abs().max(1.0));
        }
    }

    #[test]
    fn zero_width_jet_is_rejected() {
        assert!(matches!(
            ansatz_jet(&AnsatzParams::core(1.0, 0.0), 1.0),
            Err(OracleError::ZeroWidth)
        ));
    }

    #[test]
    fn integrate_gaussian() {
        let got = integrate(&|z: f64| (-z * z).exp(), -12.0, 12.0, 1e-12).unwrap();
        assert!((got - std::f64::consts::PI.sqrt()).abs() < 1e-11);
    }

    #[test]
    fn integrate_oscillatory() {
        // ∫ e^{−z²} cos(6z) = √π e^{−9}
        let got = integrate(&|z: f64| (-z * z).exp() * (6.0 * z).cos(), -12.0, 12.0, 1e-13).unwrap();
        let want = std::f64::consts::PI.sqrt() * (-9.0f64).exp();
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn quadrature_matches_unit_action() {
        let fam = example1(1.0, 1.0, 1.0, 1.0);
        let got = quadrature_action(&fam, &AnsatzParams::core(1.0, 1.0), 1e-10).unwrap();
        let pi = std::f64::consts::PI;
        let want = (pi / 2.0).sqrt() + 2.0 / 3.0 * (pi / 3.0).sqrt();
        assert!((got - want).abs() < 1e-8, "got {got}, want {want}");
    }

    #[test]
    fn quadrature_of_zero_field_vanishes() {
        let fam = example1(1.0, 1.0, 1.0, 1.0);
        let got = quadrature_action(&fam, &AnsatzParams::core(0.0, 1.0), 1e-10).unwrap();
        assert!(got.abs() < 1e-12);
    }

    #[test]
    fn quadrature_window_independence() {
        // doubling the window changes the value by less than tol
        let fam = example1(1.0, 1.0, 1.0, 1.0);
        let p = AnsatzParams::with_tail(1.0, 1.0, 0.02, 1.0);
        let base = quadrature_action(&fam, &p, 1e-9).unwrap();
        let z1 = 12.0 + 40.0;
        let z2 = 2.0 * z1;
        let tail = AnsatzParams::with_tail(0.0, p.width_sq, p.tail_amplitude, p.tail_wavenumber);
        let f = |z: f64| {
            let full = ansatz_jet(&p, z).unwrap();
            let t = ansatz_jet(&tail, z).unwrap();
            fam.lagrangian_at(full.u, full.up, full.upp) - fam.lagrangian_at(t.u, t.up, t.upp)
        };
        let wide = integrate(&f, -z2, z2, 1e-9).unwrap();
        assert!((wide - base).abs() < 1e-8 * base.abs().max(1.0));
    }

    #[test]
    fn residual_is_symmetric_in_z_for_even_families() {
        // d3 = 0 makes the density even under z -> -z; the residual of the
        // even trial function then has |res(z)| = |res(-z)|.
        let fam = example1(1.0, 1.0, 0.0, 1.0);
        let grid = StartGrid::default_for(&fam);
        let root = solver::solve_regular(&fam, &grid, 0)
            .unwrap()
            .into_iter()
            .find(|r| r.admissible)
            .unwrap();
        for z in [0.3, 0.9, 1.7, 2.6] {
            let plus = fam.el_residual(&ansatz_jet(&root.params, z).unwrap()).abs();
            let minus = fam.el_residual(&ansatz_jet(&root.params, -z).unwrap()).abs();
            assert!((plus - minus).abs() <= 1e-12 * plus.max(1.0));
        }
    }

    #[test]
    fn quadrature_rejects_unbalanced_tail() {
        let fam = example1(1.0, 1.0, 1.0, 1.0);
        let p = AnsatzParams::with_tail(1.0, 1.0, 0.5, 1.9);
        assert!(matches!(
            quadrature_action(&fam, &p, 1e-9),
            Err(OracleError::TailMeanNonzero(_))
        ));
    }
}
