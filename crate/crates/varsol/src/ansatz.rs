//! Expansion of the Lagrangian density of a Gaussian-core-plus-cosine-tail
//! trial function into a finite term algebra, classification of the terms
//! into integrable / secular / dropped-oscillatory parts, tail-wavenumber
//! selection, and closed-form assembly of the averaged action.
//!
//! Every term has the shape `amp · z^n · exp(−m z²/ρ²) · {cos|sin}(j κ z)`.
//! Amplitudes are kept free of κ; the power of κ they carry is tracked as
//! an integer exponent. Since that exponent always has the parity of the
//! trig phase, assembled quantities are polynomials in q = κ² and stay
//! real even when the dispersion root q is negative (imaginary tail).

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::dual::{Algebra, Scalar};
use crate::family::{CoefficientFamily, FamilyError};
use crate::tol;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AveragingError {
    #[error("trial-function width squared is zero")]
    ZeroWidth,
    #[error("trial-function width squared must be positive to evaluate the action, got {0}")]
    WidthNotPositive(f64),
    #[error("family total degree {0} exceeds the expansion cap of {MAX_FAMILY_DEGREE}")]
    DegreeTooLarge(u32),
    #[error("gaussian moment requires a > 0, got {0}")]
    MomentDomain(f64),
    #[error("no real tail wavenumber cancels the secular terms")]
    NoRealKappa,
    #[error("secular residual {residual:.3e} exceeds {limit:.3e} at kappa^2 = {q}")]
    SecularResidual { residual: f64, limit: f64, q: f64 },
    #[error("secular root q = {secular} disagrees with dispersion root q = {dispersion}")]
    KappaMismatch { secular: f64, dispersion: f64 },
    #[error("internal: term has kappa power {kpow} with phase {phase:?}, parity broken")]
    KappaParity { kpow: u32, phase: Phase },
    #[error(transparent)]
    Family(#[from] FamilyError),
}

/// Largest total polynomial degree of the Lagrangian accepted for
/// expansion; bounds the number of generated terms.
pub const MAX_FAMILY_DEGREE: u32 = 8;

/// Trig factor of a basis term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Phase {
    Cos,
    Sin,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Phase::Cos => f.write_str("cos"),
            Phase::Sin => f.write_str("sin"),
        }
    }
}

/// Trial-function parameters: core amplitude, core width squared, tail
/// amplitude and tail wavenumber.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnsatzParams {
    pub amplitude: f64,
    pub width_sq: f64,
    pub tail_amplitude: f64,
    pub tail_wavenumber: f64,
}

impl AnsatzParams {
    pub fn core(amplitude: f64, width_sq: f64) -> Self {
        Self { amplitude, width_sq, tail_amplitude: 0.0, tail_wavenumber: 0.0 }
    }

    pub fn with_tail(amplitude: f64, width_sq: f64, tail_amplitude: f64, tail_wavenumber: f64) -> Self {
        Self { amplitude, width_sq, tail_amplitude, tail_wavenumber }
    }
}

/// Structural part of a basis term. `kappa_pow` is the power of κ carried
/// by the amplitude; its parity always matches the phase (cos ↔ even).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct TermKey {
    pub m: u32,
    pub n: u32,
    pub j: u32,
    pub phase: Phase,
    pub kappa_pow: u32,
}

/// One term `amp · κ^kappa_pow · z^n · exp(−m z²/ρ²) · phase(j κ z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisTerm<S> {
    pub key: TermKey,
    pub amp: S,
}

/// Canonically merged sum of basis terms.
#[derive(Debug, Clone, PartialEq)]
pub struct TermSum<S: Scalar> {
    terms: BTreeMap<TermKey, S>,
}

impl<S: Scalar> TermSum<S> {
    pub fn new() -> Self {
        Self { terms: BTreeMap::new() }
    }

    pub fn insert(&mut self, key: TermKey, amp: S) {
        if key.phase == Phase::Sin && key.j == 0 {
            return; // sin(0) ≡ 0
        }
        match self.terms.entry(key) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(amp);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let merged = *e.get() + amp;
                e.insert(merged);
            }
        }
    }

    pub fn single(key: TermKey, amp: S) -> Self {
        let mut out = Self::new();
        out.insert(key, amp);
        out
    }

    pub fn iter(&self) -> impl Iterator<Item = BasisTerm<S>> + '_ {
        self.terms.iter().map(|(k, a)| BasisTerm { key: *k, amp: *a })
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

impl<S: Scalar> Default for TermSum<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Scalar> std::ops::Add for TermSum<S> {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        for (k, a) in rhs.terms {
            self.insert(k, a);
        }
        self
    }
}

impl<S: Scalar> std::ops::Sub for TermSum<S> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl<S: Scalar> std::ops::Neg for TermSum<S> {
    type Output = Self;
    fn neg(mut self) -> Self {
        for amp in self.terms.values_mut() {
            *amp = -*amp;
        }
        self
    }
}

impl<S: Scalar> std::ops::Mul for TermSum<S> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let mut out = Self::new();
        let half = S::from_f64(0.5);
        for (ka, aa) in &self.terms {
            for (kb, ab) in &rhs.terms {
                let amp = *aa * *ab;
                let base = TermKey {
                    m: ka.m + kb.m,
                    n: ka.n + kb.n,
                    j: 0,
                    phase: Phase::Cos,
                    kappa_pow: ka.kappa_pow + kb.kappa_pow,
                };
                let (ja, jb) = (ka.j, kb.j);
                match (ka.phase, kb.phase) {
                    (Phase::Cos, Phase::Cos) => {
                        if ja == 0 || jb == 0 {
                            out.insert(TermKey { j: ja + jb, ..base }, amp);
                        } else {
                            out.insert(TermKey { j: ja + jb, ..base }, amp * half);
                            out.insert(TermKey { j: ja.abs_diff(jb), ..base }, amp * half);
                        }
                    }
                    (Phase::Sin, Phase::Sin) => {
                        out.insert(TermKey { j: ja.abs_diff(jb), ..base }, amp * half);
                        out.insert(TermKey { j: ja + jb, ..base }, -(amp * half));
                    }
                    (Phase::Sin, Phase::Cos) | (Phase::Cos, Phase::Sin) => {
                        let (js, jc) = if ka.phase == Phase::Sin { (ja, jb) } else { (jb, ja) };
                        if jc == 0 {
                            out.insert(TermKey { j: js, phase: Phase::Sin, ..base }, amp);
                        } else {
                            out.insert(
                                TermKey { j: js + jc, phase: Phase::Sin, ..base },
                                amp * half,
                            );
                            if js > jc {
                                out.insert(
                                    TermKey { j: js - jc, phase: Phase::Sin, ..base },
                                    amp * half,
                                );
                            } else if js < jc {
                                out.insert(
                                    TermKey { j: jc - js, phase: Phase::Sin, ..base },
                                    -(amp * half),
                                );
                            }
                            // js == jc contributes sin(0) = 0
                        }
                    }
                }
            }
        }
        out
    }
}

impl<S: Scalar> Algebra for TermSum<S> {
    fn from_f64(x: f64) -> Self {
        if x == 0.0 {
            return Self::new();
        }
        Self::single(
            TermKey { m: 0, n: 0, j: 0, phase: Phase::Cos, kappa_pow: 0 },
            S::from_f64(x),
        )
    }
}

/// Expansion of the Lagrangian density on the trial function, partitioned
/// into integrable (m ≥ 1), secular (m = 0 and non-oscillating or growing)
/// and dropped zero-mean oscillatory parts.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionExpansion<S: Scalar> {
    pub integrable: TermSum<S>,
    pub secular: TermSum<S>,
    pub dropped_oscillatory: TermSum<S>,
}

impl<S: Scalar> ActionExpansion<S> {
    pub fn class_of(key: &TermKey) -> &'static str {
        if key.m >= 1 {
            "integrable"
        } else if key.n >= 1 || key.j == 0 {
            "secular"
        } else {
            "oscillatory"
        }
    }
}

impl ActionExpansion<f64> {
    /// Debug dump: term_id, amplitude (κ powers folded in), n, m, j,
    /// phase, class.
    pub fn to_csv(&self, kappa: f64) -> String {
        let mut out = String::from("term_id,amplitude,n,m,j,phase,class\n");
        let mut id = 0usize;
        for part in [&self.integrable, &self.secular, &self.dropped_oscillatory] {
            for t in part.iter() {
                let amp = t.amp * kappa.powi(t.key.kappa_pow as i32);
                out.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    id,
                    crate::runner::fmt_f64(amp),
                    t.key.n,
                    t.key.m,
                    t.key.j,
                    t.key.phase,
                    Self::class_of(&t.key),
                ));
                id += 1;
            }
        }
        out
    }
}

fn family_degree(fam: &CoefficientFamily) -> u32 {
    (fam.c1.total_degree() + fam.c4.total_degree())
        .max(fam.c3.total_degree() + 1)
        .max(fam.c5.total_degree())
}

/// Expand the Lagrangian density of `u(z) = A·exp(−z²/s) + α·cos(κz)`
/// into the term algebra. Amplitudes carry (A, s, α); κ powers are kept
/// structural so the result is independent of κ.
pub fn expand_density_in<S: Scalar>(
    fam: &CoefficientFamily,
    amplitude: S,
    width_sq: S,
    tail_amplitude: S,
) -> Result<ActionExpansion<S>, AveragingError> {
    if width_sq.value() == 0.0 {
        return Err(AveragingError::ZeroWidth);
    }
    let deg = family_degree(fam);
    if deg > MAX_FAMILY_DEGREE {
        return Err(AveragingError::DegreeTooLarge(deg));
    }

    let key = |m: u32, n: u32, j: u32, phase: Phase, kappa_pow: u32| TermKey {
        m,
        n,
        j,
        phase,
        kappa_pow,
    };
    let a = amplitude;
    let s = width_sq;
    let alpha = tail_amplitude;
    let two = S::from_f64(2.0);
    let four = S::from_f64(4.0);

    // u = A e^{−z²/s} + α cos(κz)
    let mut u = TermSum::single(key(1, 0, 0, Phase::Cos, 0), a);
    u.insert(key(0, 0, 1, Phase::Cos, 0), alpha);
    // u' = −(2A/s) z e^{−z²/s} − ακ sin(κz)
    let mut up = TermSum::single(key(1, 1, 0, Phase::Cos, 0), -(two * a / s));
    up.insert(key(0, 0, 1, Phase::Sin, 1), -alpha);
    // u'' = (4A/s²) z² e^{−z²/s} − (2A/s) e^{−z²/s} − ακ² cos(κz)
    let mut upp = TermSum::single(key(1, 2, 0, Phase::Cos, 0), four * a / (s * s));
    upp.insert(key(1, 0, 0, Phase::Cos, 0), -(two * a / s));
    upp.insert(key(0, 0, 1, Phase::Cos, 2), -alpha);

    let c1 = fam.c1.eval(&[u.clone(), up.clone()]).map_err(FamilyError::from)?;
    let c3 = fam.c3.eval(&[u.clone(), up.clone()]).map_err(FamilyError::from)?;
    let c5 = fam.c5.eval(&[u, up]).map_err(FamilyError::from)?;
    let c4 = fam.c4.eval(&[upp.clone()]).map_err(FamilyError::from)?;
    let density = c1 * c4 + c3 * upp + c5;

    let mut out = ActionExpansion {
        integrable: TermSum::new(),
        secular: TermSum::new(),
        dropped_oscillatory: TermSum::new(),
    };
    for t in density.iter() {
        let bucket = match ActionExpansion::<S>::class_of(&t.key) {
            "integrable" => &mut out.integrable,
            "secular" => &mut out.secular,
            _ => &mut out.dropped_oscillatory,
        };
        bucket.insert(t.key, t.amp);
    }
    Ok(out)
}

/// Expansion at plain float parameters.
pub fn expand_density(
    fam: &CoefficientFamily,
    p: &AnsatzParams,
) -> Result<ActionExpansion<f64>, AveragingError> {
    expand_density_in(fam, p.amplitude, p.width_sq, p.tail_amplitude)
}

// ---------------------------------------------------------------------------
// Gaussian moments
// ---------------------------------------------------------------------------

/// Coefficients of the physicists' Hermite polynomial `H_n` in `x`.
fn hermite_coeffs(n: u32) -> Vec<f64> {
    let mut prev = vec![1.0]; // H_0
    if n == 0 {
        return prev;
    }
    let mut cur = vec![0.0, 2.0]; // H_1
    for k in 1..n {
        // H_{k+1} = 2x H_k − 2k H_{k−1}
        let mut next = vec![0.0; cur.len() + 1];
        for (i, c) in cur.iter().enumerate() {
            next[i + 1] += 2.0 * c;
        }
        for (i, c) in prev.iter().enumerate() {
            next[i] -= 2.0 * k as f64 * c;
        }
        prev = cur;
        cur = next;
    }
    cur
}

/// `∫ z^n e^{−a z²} {cos|sin}(b z) dz` over the whole line, by the closed
/// form `M(0,a,b,cos) = √(π/a)·exp(−b²/(4a))` and the derivative
/// recurrences in b (realized through Hermite polynomials). Parity zeros
/// are returned exactly.
pub fn moment<S: Scalar>(n: u32, a: S, b: S, phase: Phase) -> Result<S, AveragingError> {
    if a.value() <= 0.0 {
        return Err(AveragingError::MomentDomain(a.value()));
    }
    let even = n % 2 == 0;
    match phase {
        Phase::Cos if !even => return Ok(S::a_zero()),
        Phase::Sin if even => return Ok(S::a_zero()),
        Phase::Sin if b.value() == 0.0 => return Ok(S::a_zero()),
        _ => {}
    }
    let sign = match phase {
        Phase::Cos => {
            if (n / 2) % 2 == 0 {
                1.0
            } else {
                -1.0
            }
        }
        Phase::Sin => {
            if ((n - 1) / 2) % 2 == 0 {
                1.0
            } else {
                -1.0
            }
        }
    };
    let sqrt_a = a.sqrt();
    let x = b / sqrt_a.scale(2.0);
    let coeffs = hermite_coeffs(n);
    let mut h = S::a_zero();
    for (i, c) in coeffs.iter().enumerate() {
        if *c != 0.0 {
            h = h + x.powi(i as u32).scale(*c);
        }
    }
    let pref = sqrt_a.recip().powi(n).scale(0.5f64.powi(n as i32));
    let gauss = (-(x * x)).exp();
    let root = (S::from_f64(std::f64::consts::PI) / a).sqrt();
    Ok(pref * root * h * gauss * S::from_f64(sign))
}

/// Value of one integrable term's contribution to the reduced action
/// `Ŝ = S/√s`, with the term's κ power collected into a power of q = κ².
/// Analytic in both `s` and `q` for any sign, which carries the algebra
/// into the imaginary-tail and negative-width regimes.
fn reduced_term_value<S: Scalar>(
    key: &TermKey,
    amp: S,
    s: S,
    q: f64,
) -> Result<S, AveragingError> {
    let (n, m, j) = (key.n, key.m, key.j);
    debug_assert!(m >= 1);
    let even = n % 2 == 0;
    match key.phase {
        Phase::Cos if !even => return Ok(S::a_zero()),
        Phase::Sin if even => return Ok(S::a_zero()),
        _ => {}
    }
    let total_kpow = key.kappa_pow + if key.phase == Phase::Sin { 1 } else { 0 };
    if total_kpow % 2 != 0 {
        return Err(AveragingError::KappaParity { kpow: key.kappa_pow, phase: key.phase });
    }
    let mf = m as f64;
    let y = s.scale((j * j) as f64 * q / (4.0 * mf));
    let gauss = (-y).exp();
    let s_over_m = s.scale(1.0 / mf);
    let coeffs = hermite_coeffs(n);
    let (factor, sign, spow): (S, f64, u32) = match key.phase {
        Phase::Cos => {
            // even n: H_n(x) = E(y) with y = x²; no bare κ factor
            let mut e = S::a_zero();
            for (i, c) in coeffs.iter().enumerate() {
                if i % 2 == 0 && *c != 0.0 {
                    e = e + y.powi((i / 2) as u32).scale(*c);
                }
            }
            (e, if (n / 2) % 2 == 0 { 1.0 } else { -1.0 }, n / 2)
        }
        Phase::Sin => {
            // odd n: H_n(x) = x·O(y); the bare x contributes √(s/m)·(jκ/2)
            let mut o = S::a_zero();
            for (i, c) in coeffs.iter().enumerate() {
                if i % 2 == 1 && *c != 0.0 {
                    o = o + y.powi(((i - 1) / 2) as u32).scale(*c);
                }
            }
            (
                o.scale(j as f64 / 2.0),
                if ((n - 1) / 2) % 2 == 0 { 1.0 } else { -1.0 },
                (n + 1) / 2,
            )
        }
    };
    let pref = s_over_m
        .powi(spow)
        .scale(0.5f64.powi(n as i32) * (std::f64::consts::PI / mf).sqrt() * sign);
    let q_factor = S::from_f64(q.powi((total_kpow / 2) as i32));
    Ok(amp * q_factor * pref * factor * gauss)
}

/// Per-term contributions to the reduced action `Ŝ = S/√s` for the given
/// family and (dual) trial parameters, with the secular and oscillatory
/// parts discarded.
pub fn reduced_action_terms<S: Scalar>(
    fam: &CoefficientFamily,
    amplitude: S,
    width_sq: S,
    tail_amplitude: S,
    q: f64,
) -> Result<Vec<S>, AveragingError> {
    let expansion = expand_density_in(fam, amplitude, width_sq, tail_amplitude)?;
    let mut out = Vec::with_capacity(expansion.integrable.len());
    for t in expansion.integrable.iter() {
        out.push(reduced_term_value(&t.key, t.amp, width_sq, q)?);
    }
    Ok(out)
}

/// Reduced action `Ŝ(A, s, α; q) = S/√s`, analytic in s and q.
pub fn reduced_action<S: Scalar>(
    fam: &CoefficientFamily,
    amplitude: S,
    width_sq: S,
    tail_amplitude: S,
    q: f64,
) -> Result<S, AveragingError> {
    let mut acc = S::a_zero();
    for term in reduced_action_terms(fam, amplitude, width_sq, tail_amplitude, q)? {
        acc = acc + term;
    }
    Ok(acc)
}

// ---------------------------------------------------------------------------
// Secular part and wavenumber selection
// ---------------------------------------------------------------------------

/// Secular residual at `q = κ²`: signed sum of the secular coefficients and
/// the largest single contribution (for relative normalization).
pub fn secular_residual<S: Scalar>(
    expansion: &ActionExpansion<S>,
    q: f64,
) -> Result<(f64, f64), AveragingError> {
    let mut total = 0.0;
    let mut largest: f64 = 0.0;
    for t in expansion.secular.iter() {
        let total_kpow = t.key.kappa_pow + if t.key.phase == Phase::Sin { 1 } else { 0 };
        if total_kpow % 2 != 0 {
            return Err(AveragingError::KappaParity { kpow: t.key.kappa_pow, phase: t.key.phase });
        }
        if t.key.phase == Phase::Sin && t.amp.value() != 0.0 {
            // A growing sine term cannot be cancelled by any single κ;
            // count its magnitude as uncancellable.
            let v = t.amp.value() * q.powi((total_kpow / 2) as i32);
            largest = largest.max(v.abs());
            total += v.abs();
            continue;
        }
        let v = t.amp.value() * q.powi((t.key.kappa_pow / 2) as i32);
        largest = largest.max(v.abs());
        total += v;
    }
    Ok((total, largest))
}

/// Coefficients of the secular part as a polynomial in q (index = power).
fn secular_q_poly<S: Scalar>(expansion: &ActionExpansion<S>) -> Vec<f64> {
    let mut coeffs: Vec<f64> = Vec::new();
    for t in expansion.secular.iter() {
        if t.key.phase == Phase::Sin {
            continue;
        }
        let p = (t.key.kappa_pow / 2) as usize;
        if coeffs.len() <= p {
            coeffs.resize(p + 1, 0.0);
        }
        coeffs[p] += t.amp.value();
    }
    while coeffs.last() == Some(&0.0) {
        coeffs.pop();
    }
    coeffs
}

fn poly_value(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// Nonzero real roots of a low-degree polynomial, descending.
fn nonzero_real_roots(mut coeffs: Vec<f64>) -> Vec<f64> {
    while coeffs.first() == Some(&0.0) {
        coeffs.remove(0);
    }
    let mut roots = Vec::new();
    match coeffs.len() {
        0 | 1 => {}
        2 => roots.push(-coeffs[0] / coeffs[1]),
        3 => {
            let (c, b, a) = (coeffs[0], coeffs[1], coeffs[2]);
            let disc = b * b - 4.0 * a * c;
            if disc >= 0.0 {
                let sq = disc.sqrt();
                roots.push((-b + sq) / (2.0 * a));
                roots.push((-b - sq) / (2.0 * a));
            }
        }
        _ => {
            // grid scan with bisection refinement
            let lead = *coeffs.last().unwrap();
            let bound = 1.0 + coeffs.iter().map(|c| c.abs()).fold(0.0, f64::max) / lead.abs();
            let steps = 8192;
            let mut prev_x = -bound;
            let mut prev_v = poly_value(&coeffs, prev_x);
            for i in 1..=steps {
                let x = -bound + 2.0 * bound * i as f64 / steps as f64;
                let v = poly_value(&coeffs, x);
                if prev_v == 0.0 {
                    roots.push(prev_x);
                } else if prev_v * v < 0.0 {
                    let (mut lo, mut hi) = (prev_x, x);
                    let mut flo = prev_v;
                    for _ in 0..200 {
                        let mid = 0.5 * (lo + hi);
                        let fm = poly_value(&coeffs, mid);
                        if flo * fm <= 0.0 {
                            hi = mid;
                        } else {
                            lo = mid;
                            flo = fm;
                        }
                    }
                    roots.push(0.5 * (lo + hi));
                }
                prev_x = x;
                prev_v = v;
            }
        }
    }
    roots.retain(|r| r.is_finite() && *r != 0.0);
    roots.sort_by(|a, b| b.partial_cmp(a).unwrap());
    roots.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * a.abs().max(1.0));
    roots
}

/// Nonzero real roots `q = κ²` of the secular part, descending. The tail
/// amplitude of `p` is replaced by 1 when zero (secular coefficients scale
/// by α², so the roots do not depend on it).
pub fn secular_roots(
    fam: &CoefficientFamily,
    p: &AnsatzParams,
) -> Result<Vec<f64>, AveragingError> {
    let alpha = if p.tail_amplitude != 0.0 { p.tail_amplitude } else { 1.0 };
    let s = if p.width_sq != 0.0 { p.width_sq } else { 1.0 };
    let expansion = expand_density_in(fam, p.amplitude, s, alpha)?;
    Ok(nonzero_real_roots(secular_q_poly(&expansion)))
}

/// Select the tail wavenumber κ > 0 that cancels every secular
/// coefficient, cross-checked against the linearized dispersion relation.
pub fn select_kappa(fam: &CoefficientFamily, p: &AnsatzParams) -> Result<f64, AveragingError> {
    let roots = secular_roots(fam, p)?;
    let q = *roots
        .iter()
        .find(|q| **q > 0.0)
        .ok_or(AveragingError::NoRealKappa)?;

    let dispersion_q = fam
        .linearized_dispersion()?
        .positive_kappa()
        .map(|k| k * k)
        .map_err(|_| AveragingError::NoRealKappa)?;
    if (q - dispersion_q).abs() > tol::KAPPA_CROSS_CHECK_REL * q.abs().max(dispersion_q.abs()) {
        return Err(AveragingError::KappaMismatch { secular: q, dispersion: dispersion_q });
    }

    // Residual at the root, normalized by the largest secular magnitude
    // over a bracket of wavenumbers around it.
    let alpha = if p.tail_amplitude != 0.0 { p.tail_amplitude } else { 1.0 };
    let s = if p.width_sq != 0.0 { p.width_sq } else { 1.0 };
    let expansion = expand_density_in(fam, p.amplitude, s, alpha)?;
    let (residual, _) = secular_residual(&expansion, q)?;
    let kappa = q.sqrt();
    let mut scale: f64 = 0.0;
    for i in 0..=40 {
        let k = kappa * (0.5 + 1.5 * i as f64 / 40.0);
        let (v, _) = secular_residual(&expansion, k * k)?;
        scale = scale.max(v.abs());
    }
    if residual.abs() > tol::SECULAR_AT_KAPPA_REL * scale.max(f64::MIN_POSITIVE) {
        return Err(AveragingError::SecularResidual {
            residual: residual.abs(),
            limit: tol::SECULAR_AT_KAPPA_REL * scale,
            q,
        });
    }
    Ok(kappa)
}

// ---------------------------------------------------------------------------
// Action assembly
// ---------------------------------------------------------------------------

/// Averaged action `S` at (dual) trial parameters with a real tail
/// wavenumber. Requires s > 0; enforces that the secular part vanishes.
pub fn assemble_action_in<S: Scalar>(
    fam: &CoefficientFamily,
    amplitude: S,
    width_sq: S,
    tail_amplitude: S,
    kappa: f64,
) -> Result<S, AveragingError> {
    let s = width_sq.value();
    if s == 0.0 {
        return Err(AveragingError::ZeroWidth);
    }
    if s < 0.0 {
        return Err(AveragingError::WidthNotPositive(s));
    }
    let q = kappa * kappa;
    let expansion = expand_density_in(fam, amplitude, width_sq, tail_amplitude)?;
    let (residual, largest) = secular_residual(&expansion, q)?;
    if largest > 0.0 && residual.abs() > tol::SECULAR_GATE_REL * largest {
        return Err(AveragingError::SecularResidual {
            residual: residual.abs(),
            limit: tol::SECULAR_GATE_REL * largest,
            q,
        });
    }
    let reduced = reduced_action(fam, amplitude, width_sq, tail_amplitude, q)?;
    Ok(width_sq.sqrt() * reduced)
}

/// Averaged action at plain float parameters.
pub fn assemble_action(fam: &CoefficientFamily, p: &AnsatzParams) -> Result<f64, AveragingError> {
    assemble_action_in(fam, p.amplitude, p.width_sq, p.tail_amplitude, p.tail_wavenumber)
}
