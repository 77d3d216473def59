//! Damped Newton multi-start solver for the Rayleigh-Ritz stationarity
//! systems of the averaged action.
//!
//! All equations are solved in their √s-reduced form, which is analytic in
//! s on both sides of zero: with Ŝ = S/√s the regular system is
//! {Ŝ_A = 0, Ŝ_s + Ŝ/(2s) = 0} in (A, s), and the embedded system fixes
//! α = 0 and solves {Ŝ_A = 0, Ŝ_α = 0} in (A, s), reporting the remaining
//! width equation as a diagnostic. Widths solved to s < 0 are flagged
//! inadmissible rather than suppressed.

use thiserror::Error;

use crate::ansatz::{self, AnsatzParams, AveragingError};
use crate::dual::Hess;
use crate::family::CoefficientFamily;
use crate::tol;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error(transparent)]
    Averaging(#[from] AveragingError),
    #[error("embedded mode: the secular part has no nonzero real root in kappa^2")]
    NoTailRoot,
    #[error("embedded mode: secular root q = {secular} has no matching dispersion root (nearest {dispersion})")]
    TailRootMismatch { secular: f64, dispersion: f64 },
}

/// Which stationarity system was solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMode {
    Regular,
    Embedded,
}

impl std::fmt::Display for SolveMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SolveMode::Regular => f.write_str("regular"),
            SolveMode::Embedded => f.write_str("embedded"),
        }
    }
}

/// Eigenvalue-sign classification of the action Hessian at a root.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extremum {
    Max,
    Min,
    Saddle,
    Degenerate,
}

impl std::fmt::Display for Extremum {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Extremum::Max => f.write_str("max"),
            Extremum::Min => f.write_str("min"),
            Extremum::Saddle => f.write_str("saddle"),
            Extremum::Degenerate => f.write_str("degenerate"),
        }
    }
}

/// Multi-start grid over (amplitude, width squared).
#[derive(Debug, Clone, PartialEq)]
pub struct StartGrid {
    pub amplitudes: Vec<f64>,
    pub widths: Vec<f64>,
}

impl StartGrid {
    /// Default grid: A ∈ ±{0.1, 0.5, 1, 2, 5}·scale, s ∈ {0.5, 1, 5, 20, 50},
    /// scale = max(1, |d1/μ|) read from the family parameters.
    pub fn default_for(fam: &CoefficientFamily) -> Self {
        let d1 = fam.params.get("d1").unwrap_or(1.0);
        let mu = fam.params.get("mu").unwrap_or(1.0);
        let scale = if mu != 0.0 { (d1 / mu).abs().max(1.0) } else { d1.abs().max(1.0) };
        let base = [0.1, 0.5, 1.0, 2.0, 5.0];
        let mut amplitudes = Vec::with_capacity(10);
        for b in base {
            amplitudes.push(b * scale);
        }
        for b in base {
            amplitudes.push(-b * scale);
        }
        Self { amplitudes, widths: vec![0.5, 1.0, 5.0, 20.0, 50.0] }
    }

    pub fn scale(&self) -> f64 {
        self.amplitudes.iter().fold(1.0_f64, |acc, a| acc.max(a.abs()))
    }
}

/// A solved stationary point with its diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryResult {
    pub mode: SolveMode,
    pub params: AnsatzParams,
    /// Scaled absolute residuals of the two solved equations.
    pub gradient_residual: [f64; 2],
    /// Embedded mode: scaled residual of the width equation left unsolved.
    pub unsolved_residual: Option<f64>,
    /// s > 0 and both solved residuals below tolerance.
    pub admissible: bool,
    /// Embedded mode: whether the tail wavenumber is real (κ² > 0).
    pub tail_is_real: bool,
    /// Embedded mode: the κ² value used by the α = 0 algebra.
    pub kappa_sq: Option<f64>,
    pub iterations: u32,
    pub start: AnsatzParams,
}

/// Reduced-system evaluation at one point.
struct SystemEval {
    /// Solved pair of equations.
    g: [f64; 2],
    /// Jacobian of the solved pair w.r.t. (A, s).
    jac: [[f64; 2]; 2],
    /// Positive magnitude scales of the solved equations.
    scales: [f64; 2],
    /// Width equation and its scale (diagnostic in embedded mode).
    width_eq: f64,
    width_scale: f64,
}

fn eval_system(
    fam: &CoefficientFamily,
    mode: SolveMode,
    a: f64,
    s: f64,
    q: f64,
) -> Result<SystemEval, SolveError> {
    let terms = ansatz::reduced_action_terms(
        fam,
        Hess::<3>::var(a, 0),
        Hess::<3>::var(s, 1),
        Hess::<3>::var(0.0, 2),
        q,
    )?;
    let mut total = Hess::<3>::constant(0.0);
    let mut abs_val = 0.0;
    let mut abs_grad = [0.0f64; 3];
    for t in &terms {
        total = total + *t;
        abs_val += t.val.abs();
        for k in 0..3 {
            abs_grad[k] += t.d[k].abs();
        }
    }
    let half_s = 0.5 / s;
    let g_a = total.d[0];
    let g_s = total.d[1] + total.val * half_s;
    let g_al = total.d[2];
    let scale_a = abs_grad[0];
    let scale_s = abs_grad[1] + abs_val * half_s.abs();
    let scale_al = abs_grad[2];
    // partials of the width equation w.r.t. (A, s)
    let ws_a = total.h[1][0] + total.d[0] * half_s;
    let ws_s = total.h[1][1] + total.d[1] * half_s - total.val * half_s / s;
    let (g, jac, scales) = match mode {
        SolveMode::Regular => (
            [g_a, g_s],
            [[total.h[0][0], total.h[0][1]], [ws_a, ws_s]],
            [scale_a, scale_s],
        ),
        SolveMode::Embedded => (
            [g_a, g_al],
            [[total.h[0][0], total.h[0][1]], [total.h[2][0], total.h[2][1]]],
            [scale_a, scale_al],
        ),
    };
    Ok(SystemEval { g, jac, scales, width_eq: g_s, width_scale: scale_s })
}

fn scaled_norm(g: &[f64; 2], scales: &[f64; 2]) -> f64 {
    let r0 = g[0].abs() / scales[0].max(f64::MIN_POSITIVE);
    let r1 = g[1].abs() / scales[1].max(f64::MIN_POSITIVE);
    r0.max(r1)
}

fn raw_norm(g: &[f64; 2]) -> f64 {
    (g[0] * g[0] + g[1] * g[1]).sqrt()
}

const MAX_ITERATIONS: u32 = 200;

/// One damped Newton run. Returns the end point, iteration count, and the
/// final evaluation when it converged.
fn newton(
    fam: &CoefficientFamily,
    mode: SolveMode,
    q: f64,
    start: (f64, f64),
) -> Result<Option<((f64, f64), u32, SystemEval)>, SolveError> {
    let (mut a, mut s) = start;
    let mut eval = match eval_system(fam, mode, a, s, q) {
        Ok(e) => e,
        Err(SolveError::Averaging(AveragingError::ZeroWidth)) => return Ok(None),
        Err(e) => return Err(e),
    };
    for iter in 0..MAX_ITERATIONS {
        if !eval.g[0].is_finite() || !eval.g[1].is_finite() {
            return Ok(None);
        }
        if scaled_norm(&eval.g, &eval.scales) < tol::NEWTON_TARGET {
            return Ok(Some(((a, s), iter, eval)));
        }
        let det = eval.jac[0][0] * eval.jac[1][1] - eval.jac[0][1] * eval.jac[1][0];
        if det.abs() < 1e-300 || !det.is_finite() {
            return Ok(None); // singular Jacobian at this start
        }
        let da = (-eval.g[0] * eval.jac[1][1] + eval.g[1] * eval.jac[0][1]) / det;
        let ds = (-eval.g[1] * eval.jac[0][0] + eval.g[0] * eval.jac[1][0]) / det;
        let base_norm = raw_norm(&eval.g);
        let mut lambda = 1.0f64;
        let mut accepted = false;
        for _ in 0..40 {
            let (ta, ts) = (a + lambda * da, s + lambda * ds);
            if ts == 0.0 {
                lambda *= 0.5;
                continue;
            }
            match eval_system(fam, mode, ta, ts, q) {
                Ok(trial) => {
                    if raw_norm(&trial.g) <= (1.0 - 1e-4 * lambda) * base_norm {
                        a = ta;
                        s = ts;
                        eval = trial;
                        accepted = true;
                        break;
                    }
                }
                Err(SolveError::Averaging(AveragingError::ZeroWidth)) => {}
                Err(e) => return Err(e),
            }
            lambda *= 0.5;
        }
        if !accepted {
            // stalled; accept only if already below admissibility
            if scaled_norm(&eval.g, &eval.scales) < tol::ADMISSIBLE_RESIDUAL {
                return Ok(Some(((a, s), iter + 1, eval)));
            }
            return Ok(None);
        }
    }
    if scaled_norm(&eval.g, &eval.scales) < tol::ADMISSIBLE_RESIDUAL {
        return Ok(Some(((a, s), MAX_ITERATIONS, eval)));
    }
    Ok(None)
}

fn roots_are_close(a: &StationaryResult, b: &StationaryResult) -> bool {
    let (a1, s1) = (a.params.amplitude, a.params.width_sq);
    let (a2, s2) = (b.params.amplitude, b.params.width_sq);
    let da = (a1 - a2).abs() / a1.abs().max(a2.abs()).max(1.0);
    let ds = (s1 - s2).abs() / s1.abs().max(s2.abs()).max(1.0);
    da < tol::ROOT_DEDUP_REL && ds < tol::ROOT_DEDUP_REL
}

fn collect_roots(
    fam: &CoefficientFamily,
    mode: SolveMode,
    starts: &StartGrid,
    q: f64,
    kappa: f64,
    tail_is_real: bool,
) -> Result<Vec<StationaryResult>, SolveError> {
    let trivial = tol::TRIVIAL_AMPLITUDE * starts.scale();
    let mut out: Vec<StationaryResult> = Vec::new();
    for &a0 in &starts.amplitudes {
        for &s0 in &starts.widths {
            let Some(((a, s), iterations, eval)) = newton(fam, mode, q, (a0, s0))? else {
                continue;
            };
            if a.abs() < trivial {
                continue;
            }
            let residuals = [
                eval.g[0].abs() / eval.scales[0].max(f64::MIN_POSITIVE),
                eval.g[1].abs() / eval.scales[1].max(f64::MIN_POSITIVE),
            ];
            let admissible = s > 0.0
                && residuals[0] < tol::ADMISSIBLE_RESIDUAL
                && residuals[1] < tol::ADMISSIBLE_RESIDUAL;
            let result = StationaryResult {
                mode,
                params: AnsatzParams {
                    amplitude: a,
                    width_sq: s,
                    tail_amplitude: 0.0,
                    tail_wavenumber: kappa,
                },
                gradient_residual: residuals,
                unsolved_residual: match mode {
                    SolveMode::Regular => None,
                    SolveMode::Embedded => {
                        Some(eval.width_eq.abs() / eval.width_scale.max(f64::MIN_POSITIVE))
                    }
                },
                admissible,
                tail_is_real,
                kappa_sq: match mode {
                    SolveMode::Regular => None,
                    SolveMode::Embedded => Some(q),
                },
                iterations,
                start: AnsatzParams::core(a0, s0),
            };
            if let Some(existing) = out.iter_mut().find(|r| roots_are_close(r, &result)) {
                // keep the better-converged representative
                if result.gradient_residual[0].max(result.gradient_residual[1])
                    < existing.gradient_residual[0].max(existing.gradient_residual[1])
                {
                    *existing = result;
                }
                continue;
            }
            out.push(result);
        }
    }
    out.sort_by(|x, y| {
        (x.params.amplitude, x.params.width_sq)
            .partial_cmp(&(y.params.amplitude, y.params.width_sq))
            .unwrap()
    });
    Ok(out)
}

/// All distinct nontrivial roots of the regular stationarity system
/// {∂S/∂A = 0, ∂S/∂s = 0} at α = 0 found from the start grid.
///
/// `seed` is recorded for reproducibility; the deterministic grid makes
/// the result independent of it.
pub fn solve_regular(
    fam: &CoefficientFamily,
    starts: &StartGrid,
    _seed: u64,
) -> Result<Vec<StationaryResult>, SolveError> {
    collect_roots(fam, SolveMode::Regular, starts, 0.0, 0.0, false)
}

/// Tail wavenumber squared for the embedded algebra: the secular root
/// cross-checked against the dispersion relation. Positive roots are
/// preferred (real tail); otherwise the algebra proceeds with q < 0 and
/// the tail is flagged as not real.
fn embedded_q(fam: &CoefficientFamily) -> Result<(f64, bool), SolveError> {
    let probe = AnsatzParams::with_tail(1.0, 1.0, 1.0, 0.0);
    let roots = ansatz::secular_roots(fam, &probe)?;
    let q = roots
        .iter()
        .copied()
        .find(|q| *q > 0.0)
        .or_else(|| roots.first().copied())
        .ok_or(SolveError::NoTailRoot)?;
    let disp = fam
        .linearized_dispersion()
        .map_err(AveragingError::from)?
        .nonzero_real_roots();
    let nearest = disp
        .iter()
        .copied()
        .min_by(|x, y| (x - q).abs().partial_cmp(&(y - q).abs()).unwrap());
    match nearest {
        Some(d) if (d - q).abs() <= tol::KAPPA_CROSS_CHECK_REL * d.abs().max(q.abs()) => {}
        other => {
            return Err(SolveError::TailRootMismatch {
                secular: q,
                dispersion: other.unwrap_or(f64::NAN),
            })
        }
    }
    Ok((q, q > 0.0))
}

/// All distinct nontrivial roots of the embedded stationarity subset
/// {∂S/∂A = 0, ∂S/∂α = 0} at α = 0, with the width equation residual
/// reported as a diagnostic.
///
/// The width grid is mirrored to negative values: embedded roots may sit
/// at s < 0 (diagnosed, flagged inadmissible) and the tail equation has no
/// sign-crossing path from positive widths to reach them.
pub fn solve_embedded(
    fam: &CoefficientFamily,
    starts: &StartGrid,
    _seed: u64,
) -> Result<Vec<StationaryResult>, SolveError> {
    let (q, tail_is_real) = embedded_q(fam)?;
    let kappa = if q > 0.0 { q.sqrt() } else { 0.0 };
    let mut grid = starts.clone();
    for w in starts.widths.iter().map(|w| -w).collect::<Vec<_>>() {
        if !grid.widths.contains(&w) {
            grid.widths.push(w);
        }
    }
    collect_roots(fam, SolveMode::Embedded, &grid, q, kappa, tail_is_real)
}

/// Least-squares variant of the embedded solve: Gauss-Newton over all
/// three stationarity equations in (A, s), for diagnosing how far the
/// full system is from consistency.
pub fn solve_embedded_least_squares(
    fam: &CoefficientFamily,
    starts: &StartGrid,
    _seed: u64,
) -> Result<Vec<StationaryResult>, SolveError> {
    let (q, tail_is_real) = embedded_q(fam)?;
    let kappa = if q > 0.0 { q.sqrt() } else { 0.0 };
    let trivial = tol::TRIVIAL_AMPLITUDE * starts.scale();
    let mut out: Vec<StationaryResult> = Vec::new();
    for &a0 in &starts.amplitudes {
        for &s0 in &starts.widths {
            let Some((a, s, iterations)) = gauss_newton_all3(fam, q, (a0, s0))? else {
                continue;
            };
            if a.abs() < trivial {
                continue;
            }
            let eval = eval_system(fam, SolveMode::Embedded, a, s, q)?;
            let residuals = [
                eval.g[0].abs() / eval.scales[0].max(f64::MIN_POSITIVE),
                eval.g[1].abs() / eval.scales[1].max(f64::MIN_POSITIVE),
            ];
            let result = StationaryResult {
                mode: SolveMode::Embedded,
                params: AnsatzParams {
                    amplitude: a,
                    width_sq: s,
                    tail_amplitude: 0.0,
                    tail_wavenumber: kappa,
                },
                gradient_residual: residuals,
                unsolved_residual: Some(
                    eval.width_eq.abs() / eval.width_scale.max(f64::MIN_POSITIVE),
                ),
                admissible: s > 0.0
                    && residuals[0] < tol::ADMISSIBLE_RESIDUAL
                    && residuals[1] < tol::ADMISSIBLE_RESIDUAL,
                tail_is_real,
                kappa_sq: Some(q),
                iterations,
                start: AnsatzParams::core(a0, s0),
            };
            if !out.iter().any(|r| roots_are_close(r, &result)) {
                out.push(result);
            }
        }
    }
    out.sort_by(|x, y| {
        (x.params.amplitude, x.params.width_sq)
            .partial_cmp(&(y.params.amplitude, y.params.width_sq))
            .unwrap()
    });
    Ok(out)
}

fn gauss_newton_all3(
    fam: &CoefficientFamily,
    q: f64,
    start: (f64, f64),
) -> Result<Option<(f64, f64, u32)>, SolveError> {
    let (mut a, mut s) = start;
    let mut prev_norm = f64::INFINITY;
    for iter in 0..MAX_ITERATIONS {
        let reg = eval_system(fam, SolveMode::Regular, a, s, q)?;
        let emb = eval_system(fam, SolveMode::Embedded, a, s, q)?;
        let r = [emb.g[0], reg.g[1], emb.g[1]];
        let j = [
            [emb.jac[0][0], emb.jac[0][1]],
            [reg.jac[1][0], reg.jac[1][1]],
            [emb.jac[1][0], emb.jac[1][1]],
        ];
        let norm = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
        if !norm.is_finite() {
            return Ok(None);
        }
        if (prev_norm - norm).abs() <= 1e-14 * norm.max(1.0) || norm < 1e-13 {
            return Ok(Some((a, s, iter)));
        }
        prev_norm = norm;
        // normal equations J^T J δ = −J^T r
        let mut jtj = [[0.0f64; 2]; 2];
        let mut jtr = [0.0f64; 2];
        for row in 0..3 {
            for c in 0..2 {
                jtr[c] += j[row][c] * r[row];
                for c2 in 0..2 {
                    jtj[c][c2] += j[row][c] * j[row][c2];
                }
            }
        }
        let det = jtj[0][0] * jtj[1][1] - jtj[0][1] * jtj[1][0];
        if det.abs() < 1e-300 {
            return Ok(None);
        }
        let da = (-jtr[0] * jtj[1][1] + jtr[1] * jtj[0][1]) / det;
        let ds = (-jtr[1] * jtj[0][0] + jtr[0] * jtj[1][0]) / det;
        let mut lambda = 1.0;
        let mut moved = false;
        for _ in 0..30 {
            let (ta, ts) = (a + lambda * da, s + lambda * ds);
            if ts != 0.0 {
                let rr = eval_system(fam, SolveMode::Regular, ta, ts, q)?;
                let ee = eval_system(fam, SolveMode::Embedded, ta, ts, q)?;
                let n2 = (ee.g[0] * ee.g[0] + rr.g[1] * rr.g[1] + ee.g[1] * ee.g[1]).sqrt();
                if n2 < norm {
                    a = ta;
                    s = ts;
                    moved = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !moved {
            return Ok(Some((a, s, iter)));
        }
    }
    Ok(Some((a, s, MAX_ITERATIONS)))
}

/// Eigenvalue-sign classification of the 2×2 Hessian of the action in
/// (A, s) at a solved root. Admissible roots (s > 0) use the Hessian of
/// the genuine action S = √s·Ŝ; roots at s ≤ 0 fall back to the
/// analytically continued reduced Hessian.
pub fn classify_stationary(
    fam: &CoefficientFamily,
    result: &StationaryResult,
) -> Result<Extremum, SolveError> {
    let (a, s) = (result.params.amplitude, result.params.width_sq);
    let q = result.kappa_sq.unwrap_or(0.0);
    let terms = ansatz::reduced_action_terms(
        fam,
        Hess::<3>::var(a, 0),
        Hess::<3>::var(s, 1),
        Hess::<3>::var(0.0, 2),
        q,
    )?;
    let mut t = Hess::<3>::constant(0.0);
    for term in terms {
        t = t + term;
    }
    let (h00, h01, h11) = if s > 0.0 {
        let rs = s.sqrt();
        (
            rs * t.h[0][0],
            rs * t.h[0][1] + t.d[0] / (2.0 * rs),
            rs * t.h[1][1] + t.d[1] / rs - t.val / (4.0 * s * rs),
        )
    } else {
        (t.h[0][0], t.h[0][1], t.h[1][1])
    };
    let scale = h00.abs().max(h01.abs()).max(h11.abs());
    let det = h00 * h11 - h01 * h01;
    if scale == 0.0 || det.abs() <= tol::HESSIAN_DEGENERATE_REL * scale * scale {
        return Ok(Extremum::Degenerate);
    }
    Ok(if det < 0.0 {
        Extremum::Saddle
    } else if h00 + h11 < 0.0 {
        Extremum::Max
    } else {
        Extremum::Min
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::ParameterSet;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn example1(d1: f64, d2: f64, d3: f64, mu: f64) -> CoefficientFamily {
        let params =
            ParameterSet::from_pairs([("d1", d1), ("d2", d2), ("d3", d3), ("mu", mu)]).unwrap();
        CoefficientFamily::preset("example1", &params).unwrap()
    }

    fn example2(d1: f64, d2: f64, d3: f64) -> CoefficientFamily {
        let params = ParameterSet::from_pairs([("d1", d1), ("d2", d2), ("d3", d3)]).unwrap();
        CoefficientFamily::preset("example2", &params).unwrap()
    }

    /// Closed-form regular root of the first preset:
    /// A = 3√(3/2)·d1/(7μ), s = 21·d2/d1.
    fn regular1_closed(d1: f64, d2: f64, mu: f64) -> (f64, f64) {
        (3.0 * 1.5f64.sqrt() * d1 / (7.0 * mu), 21.0 * d2 / d1)
    }

    /// Closed-form embedded root of the first preset:
    /// A = 13√(3/2)·d1/(8μ), s = −4d2/(3d1).
    fn embedded1_closed(d1: f64, d2: f64, mu: f64) -> (f64, f64) {
        (13.0 * 1.5f64.sqrt() * d1 / (8.0 * mu), -4.0 * d2 / (3.0 * d1))
    }

    fn find_root(
        results: &[StationaryResult],
        want: (f64, f64),
        rel: f64,
    ) -> Option<&StationaryResult> {
        results.iter().find(|r| {
            let da = (r.params.amplitude - want.0).abs() / want.0.abs().max(1e-12);
            let ds = (r.params.width_sq - want.1).abs() / want.1.abs().max(1e-12);
            da < rel && ds < rel
        })
    }

    #[test]
    fn regular_root_of_preset1_at_unit_parameters() {
        let fam = example1(1.0, 1.0, 1.0, 1.0);
        let results = solve_regular(&fam, &StartGrid::default_for(&fam), 0).unwrap();
        let want = regular1_closed(1.0, 1.0, 1.0);
        assert!((want.0 - 0.5248906).abs() < 1e-6);
        let root = find_root(&results, want, tol::CLOSED_FORM_REL).expect("root found");
        assert!(root.admissible);
        assert!((root.params.width_sq - 21.0).abs() < 1e-6);
    }

    #[test]
    fn regular_root_of_preset1_at_other_parameters() {
        let fam = example1(2.0, 3.0, 1.0, 1.0);
        let results = solve_regular(&fam, &StartGrid::default_for(&fam), 0).unwrap();
        let want = regular1_closed(2.0, 3.0, 1.0);
        assert!((want.0 - 1.0497813).abs() < 1e-6);
        assert!((want.1 - 31.5).abs() < 1e-12);
        assert!(find_root(&results, want, tol::CLOSED_FORM_REL).is_some());
    }

    #[test]
    fn regular_roots_over_random_parameters() {
        let mut rng = StdRng::seed_from_u64(21);
        for _ in 0..25 {
            let d1 = rng.random_range(0.2..5.0);
            let d2 = rng.random_range(0.2..5.0);
            let mu = rng.random_range(0.2..5.0);
            let fam = example1(d1, d2, rng.random_range(-1.0..1.0), mu);
            let results = solve_regular(&fam, &StartGrid::default_for(&fam), 0).unwrap();
            let want = regular1_closed(d1, d2, mu);
            assert!(
                find_root(&results, want, tol::CLOSED_FORM_REL).is_some(),
                "missing root for d1={d1} d2={d2} mu={mu}: want {want:?}, got {:?}",
                results
                    .iter()
                    .map(|r| (r.params.amplitude, r.params.width_sq))
                    .collect::<Vec<_>>()
            );
        }
    }

    #[test]
    fn regular_root_of_preset2() {
        // closed form via ν = 7d1−2d2+√(49d1²−36d1d2+4d2²), ν̃ = 7d1+2d2−√(·)
        let fam = example2(1.0, 1.0, 0.0);
        let results = solve_regular(&fam, &StartGrid::default_for(&fam), 0).unwrap();
        let root_disc = (49.0f64 - 36.0 + 4.0).sqrt();
        let nu = 5.0 + root_disc;
        let nu_t = 9.0 - root_disc;
        let want = (3.0 * 6.0f64.sqrt() / 64.0 * nu_t, 0.75 * nu);
        let root = find_root(&results, want, 1e-7).expect("closed-form root");
        assert!(root.admissible);
        assert!((root.params.amplitude - 0.55996).abs() < 1e-4);
        assert!((root.params.width_sq - 6.84233).abs() < 1e-4);
    }

    #[test]
    fn embedded_root_of_preset1_with_opposite_signs() {
        // d1 < 0 < d2: the width is positive while κ² < 0 (imaginary tail).
        let fam = example1(-1.0, 1.0, 1.0, 1.0);
        let results = solve_embedded(&fam, &StartGrid::default_for(&fam), 0).unwrap();
        let want = embedded1_closed(-1.0, 1.0, 1.0);
        let root = find_root(&results, want, tol::CLOSED_FORM_REL).expect("embedded root");
        assert!(root.admissible, "expected admissible: s = {}", root.params.width_sq);
        assert!(!root.tail_is_real);
        assert_eq!(root.kappa_sq, Some(-1.0));
        // width equation deliberately left unsolved; its residual is visible
        let diag = root.unsolved_residual.unwrap();
        assert!(diag > 1e-3, "width diagnostic should be visibly nonzero, got {diag}");
    }

    #[test]
    fn embedded_root_of_preset1_with_same_signs_is_inadmissible() {
        let fam = example1(1.0, 1.0, 1.0, 1.0);
        let results = solve_embedded(&fam, &StartGrid::default_for(&fam), 0).unwrap();
        let want = embedded1_closed(1.0, 1.0, 1.0);
        assert!(want.1 < 0.0);
        let root = find_root(&results, want, tol::CLOSED_FORM_REL).expect("negative-width root");
        assert!(!root.admissible);
        assert!(root.tail_is_real);
        assert_eq!(root.kappa_sq, Some(1.0));
    }

    #[test]
    fn embedded_root_of_preset2_matches_closed_form() {
        let (d1, d2) = (5.0, 2.0);
        let fam = example2(d1, d2, 0.0);
        let results = solve_embedded(&fam, &StartGrid::default_for(&fam), 0).unwrap();
        // ξ with either inner square-root sign; s = 2ξ/3 > 0 picks the branch
        let inner = (2.0 * d1 * d1 * (8.0 * d1 * d1 + 24.0 * d1 * d2 - 9.0 * d2 * d2)).sqrt();
        let denom = 8.0 * d1 - 3.0 * d2;
        let xi_plus = (3.0 * d1 * d2 - 4.0 * d1 * d1 + inner) / denom;
        let xi_minus = (3.0 * d1 * d2 - 4.0 * d1 * d1 - inner) / denom;
        let admissible: Vec<_> = results.iter().filter(|r| r.admissible).collect();
        assert!(!admissible.is_empty());
        let ok = admissible.iter().any(|r| {
            [xi_plus, xi_minus].iter().any(|xi| {
                let s = 2.0 * xi / 3.0;
                let a = 6.0f64.sqrt() * (3.0 * d1 - 2.0 * s) / (8.0 * (d2 - s));
                s > 0.0
                    && (r.params.width_sq - s).abs() <= 1e-8 * s.abs()
                    && (r.params.amplitude - a).abs() <= 1e-8 * a.abs()
            })
        });
        assert!(ok, "no admissible root matches the closed form");
        let real_tail = admissible.iter().find(|r| r.tail_is_real).unwrap();
        assert!((real_tail.params.tail_wavenumber - (2.0f64 / d1).sqrt()).abs() < 1e-10);
    }

    #[test]
    fn roots_are_unchanged_by_lagrangian_scaling() {
        let fam = example1(1.3, 0.9, 0.4, 1.1);
        let scaled = crate::family::build_family(
            fam.c1.scaled(3.5),
            fam.c2.clone(),
            fam.c3.scaled(3.5),
            fam.c5.scaled(3.5),
            fam.params.clone(),
        )
        .unwrap();
        let grid = StartGrid::default_for(&fam);
        let base = solve_regular(&fam, &grid, 0).unwrap();
        let moved = solve_regular(&scaled, &grid, 0).unwrap();
        assert_eq!(base.len(), moved.len());
        for (x, y) in base.iter().zip(&moved) {
            assert!((x.params.amplitude - y.params.amplitude).abs() < 1e-10);
            assert!(
                (x.params.width_sq - y.params.width_sq).abs()
                    < 1e-10 * x.params.width_sq.abs().max(1.0)
            );
        }
    }

    #[test]
    fn amplitude_scales_linearly_in_d1_over_mu_at_fixed_width_ratio() {
        // A* = 3*sqrt(3/2)*d1/(7*mu): scaling (d1, d2) by lambda at fixed
        // d2/d1 scales A* by lambda and leaves s* = 21*d2/d1 unchanged.
        let lambda = 2.5;
        let (d1, d2, mu) = (0.8, 1.2, 1.1);
        let fam = example1(d1, d2, 0.3, mu);
        let scaled = example1(lambda * d1, lambda * d2, 0.3, mu);
        let base = solve_regular(&fam, &StartGrid::default_for(&fam), 0).unwrap();
        let moved = solve_regular(&scaled, &StartGrid::default_for(&scaled), 0).unwrap();
        let pick = |rs: &[StationaryResult]| -> (f64, f64) {
            let r = rs.iter().find(|r| r.admissible).unwrap();
            (r.params.amplitude, r.params.width_sq)
        };
        let (a0, s0) = pick(&base);
        let (a1, s1) = pick(&moved);
        assert!((a1 - lambda * a0).abs() < 1e-7 * (lambda * a0).abs());
        assert!((s1 - s0).abs() < 1e-7 * s0.abs());
    }

    #[test]
    fn determinism_same_grid_same_results() {
        let fam = example2(1.0, 1.0, 0.0);
        let grid = StartGrid::default_for(&fam);
        let r1 = solve_regular(&fam, &grid, 7).unwrap();
        let r2 = solve_regular(&fam, &grid, 7).unwrap();
        assert_eq!(r1, r2);
    }

    #[test]
    fn classification_of_preset1_regular_root_is_stable() {
        let fam = example1(1.0, 1.0, 1.0, 1.0);
        let results = solve_regular(&fam, &StartGrid::default_for(&fam), 0).unwrap();
        let root = find_root(&results, regular1_closed(1.0, 1.0, 1.0), 1e-7).unwrap();
        let tag = classify_stationary(&fam, root).unwrap();
        assert_ne!(tag, Extremum::Degenerate);
        // scaling the Lagrangian by λ > 0 keeps the tag
        let scaled = crate::family::build_family(
            fam.c1.scaled(2.0),
            fam.c2.clone(),
            fam.c3.scaled(2.0),
            fam.c5.scaled(2.0),
            fam.params.clone(),
        )
        .unwrap();
        let results2 = solve_regular(&scaled, &StartGrid::default_for(&scaled), 0).unwrap();
        let root2 = find_root(&results2, regular1_closed(1.0, 1.0, 1.0), 1e-7).unwrap();
        assert_eq!(tag, classify_stationary(&scaled, root2).unwrap());
    }

    #[test]
    fn embedded_pair_satisfied_width_equation_not() {
        // The solved pair must meet the admissibility tolerance while the
        // diagnostic width equation stays visibly nonzero (preset1 case).
        let fam = example1(-2.0, 1.5, 1.0, 1.0);
        let results = solve_embedded(&fam, &StartGrid::default_for(&fam), 0).unwrap();
        let want = embedded1_closed(-2.0, 1.5, 1.0);
        let root = find_root(&results, want, 1e-7).expect("root");
        assert!(root.gradient_residual[0] < tol::ADMISSIBLE_RESIDUAL);
        assert!(root.gradient_residual[1] < tol::ADMISSIBLE_RESIDUAL);
        assert!(root.unsolved_residual.unwrap() > 1e-6);
    }

    #[test]
    fn classification_reports_degenerate_hessian() {
        // L = u''^2/2 alone: the action is c·A²/s^{3/2}, so the Hessian at
        // A = 0 has a zero row.
        let fam = crate::family::build_family(
            crate::poly::MultiPoly::constant(&[crate::poly::Var::U, crate::poly::Var::Up], 1.0),
            crate::poly::MultiPoly::constant(&[crate::poly::Var::Upp], 1.0),
            crate::poly::MultiPoly::zero(&[crate::poly::Var::U, crate::poly::Var::Up]),
            crate::poly::MultiPoly::zero(&[crate::poly::Var::U, crate::poly::Var::Up]),
            crate::poly::ParameterSet::new(),
        )
        .unwrap();
        let fake = StationaryResult {
            mode: SolveMode::Regular,
            params: AnsatzParams::core(0.0, 1.0),
            gradient_residual: [0.0, 0.0],
            unsolved_residual: None,
            admissible: false,
            tail_is_real: false,
            kappa_sq: None,
            iterations: 0,
            start: AnsatzParams::core(0.0, 1.0),
        };
        assert_eq!(classify_stationary(&fam, &fake).unwrap(), Extremum::Degenerate);
    }

    #[test]
    fn least_squares_mode_returns_compromise_points() {
        let fam = example1(-1.0, 1.0, 1.0, 1.0);
        let results =
            solve_embedded_least_squares(&fam, &StartGrid::default_for(&fam), 0).unwrap();
        assert!(!results.is_empty());
    }
}
