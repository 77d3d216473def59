//! Exact multivariate polynomial arithmetic over the jet variables
//! u, u', u'', u''', u'''' with named real parameters, plus the rational
//! functions built from them.
//!
//! Coefficients are IEEE doubles; parameter names referenced in an
//! expression are bound to their numeric values while parsing, so a
//! constructed polynomial is fully numeric. Canonical form: no zero
//! coefficients, exponents sorted by the fixed variable order.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::dual::Algebra;

/// Number of variables in the fixed universe.
pub const NVARS: usize = 5;

/// Jet variables a polynomial may depend on, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Var {
    U,
    Up,
    Upp,
    Uppp,
    U4,
}

impl Var {
    pub const ALL: [Var; NVARS] = [Var::U, Var::Up, Var::Upp, Var::Uppp, Var::U4];

    pub fn index(self) -> usize {
        match self {
            Var::U => 0,
            Var::Up => 1,
            Var::Upp => 2,
            Var::Uppp => 3,
            Var::U4 => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Var::U => "u",
            Var::Up => "up",
            Var::Upp => "upp",
            Var::Uppp => "uppp",
            Var::U4 => "u4",
        }
    }

    pub fn from_name(name: &str) -> Option<Var> {
        Var::ALL.iter().copied().find(|v| v.name() == name)
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Exponent tuple over the full variable universe.
pub type Exps = [u32; NVARS];

/// Largest exponent accepted from parsed input.
pub const MAX_PARSED_EXPONENT: u32 = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolyError {
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown identifier `{name}` at byte {pos}")]
    UnknownIdent { pos: usize, name: String },
    #[error("exponent at byte {pos} must be a non-negative integer <= {MAX_PARSED_EXPONENT}")]
    BadExponent { pos: usize },
    #[error("division by a non-constant expression at byte {pos}")]
    NonConstantDivisor { pos: usize },
    #[error("division by zero at byte {pos}")]
    DivisionByZero { pos: usize },
    #[error("variable `{0}` is not in the polynomial's variable list")]
    VarNotDeclared(Var),
    #[error("evaluation point has {got} values, polynomial declares {want} variables")]
    PointArity { got: usize, want: usize },
    #[error("parameter name `{0}` is reserved or duplicated")]
    BadParameterName(String),
    #[error("parameter `{0}` has a non-finite value")]
    NonFiniteParameter(String),
    #[error("rational function denominator is identically zero")]
    ZeroDenominator,
    #[error("denominator vanishes at the evaluation point")]
    DenominatorVanishes,
}

/// Named real parameters (d1, d2, d3, mu, ...).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParameterSet {
    map: BTreeMap<String, f64>,
}

impl ParameterSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs<I, S>(pairs: I) -> Result<Self, PolyError>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        let mut set = Self::new();
        for (name, value) in pairs {
            set.insert(name.into(), value)?;
        }
        Ok(set)
    }

    pub fn insert(&mut self, name: String, value: f64) -> Result<(), PolyError> {
        if Var::from_name(&name).is_some() || name.is_empty() {
            return Err(PolyError::BadParameterName(name));
        }
        if !value.is_finite() {
            return Err(PolyError::NonFiniteParameter(name));
        }
        self.map.insert(name, value);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.map.get(name).copied()
    }

    pub fn require(&self, name: &str) -> Result<f64, PolyError> {
        self.get(name).ok_or_else(|| PolyError::UnknownIdent {
            pos: 0,
            name: name.to_string(),
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.map.iter().map(|(k, v)| (k.as_str(), *v))
    }

    /// Copy with one parameter replaced.
    pub fn with(&self, name: &str, value: f64) -> Result<Self, PolyError> {
        let mut out = self.clone();
        out.insert(name.to_string(), value)?;
        Ok(out)
    }
}

/// Multivariate polynomial in canonical form.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiPoly {
    vars: Vec<Var>,
    terms: BTreeMap<Exps, f64>,
}

impl MultiPoly {
    pub fn zero(vars: &[Var]) -> Self {
        Self { vars: normalize_vars(vars), terms: BTreeMap::new() }
    }

    pub fn constant(vars: &[Var], c: f64) -> Self {
        let mut p = Self::zero(vars);
        p.add_term([0; NVARS], c);
        p
    }

    pub fn var(vars: &[Var], v: Var) -> Result<Self, PolyError> {
        if !vars.contains(&v) {
            return Err(PolyError::VarNotDeclared(v));
        }
        let mut p = Self::zero(vars);
        let mut e = [0; NVARS];
        e[v.index()] = 1;
        p.add_term(e, 1.0);
        Ok(p)
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Exps, f64)> {
        self.terms.iter().map(|(e, c)| (e, *c))
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty() || (self.terms.len() == 1 && self.terms.contains_key(&[0; NVARS]))
    }

    /// Coefficient of a monomial (0 when absent).
    pub fn coeff(&self, exps: Exps) -> f64 {
        self.terms.get(&exps).copied().unwrap_or(0.0)
    }

    pub fn constant_term(&self) -> f64 {
        self.coeff([0; NVARS])
    }

    /// Highest exponent of `v` across all monomials.
    pub fn degree_in(&self, v: Var) -> u32 {
        self.terms.keys().map(|e| e[v.index()]).max().unwrap_or(0)
    }

    pub fn total_degree(&self) -> u32 {
        self.terms.keys().map(|e| e.iter().sum()).max().unwrap_or(0)
    }

    fn add_term(&mut self, exps: Exps, coeff: f64) {
        if coeff == 0.0 {
            return;
        }
        let entry = self.terms.entry(exps).or_insert(0.0);
        *entry += coeff;
        if *entry == 0.0 {
            self.terms.remove(&exps);
        }
    }

    fn merged_vars(&self, other: &Self) -> Vec<Var> {
        let mut vars = self.vars.clone();
        for v in &other.vars {
            if !vars.contains(v) {
                vars.push(*v);
            }
        }
        normalize_vars(&vars)
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = Self::zero(&self.merged_vars(other));
        for (e, c) in self.terms() {
            out.add_term(*e, c);
        }
        for (e, c) in other.terms() {
            out.add_term(*e, c);
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        self.scaled(-1.0)
    }

    pub fn scaled(&self, k: f64) -> Self {
        let mut out = Self::zero(&self.vars);
        for (e, c) in self.terms() {
            out.add_term(*e, c * k);
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero(&self.merged_vars(other));
        for (ea, ca) in self.terms() {
            for (eb, cb) in other.terms() {
                let mut e = [0; NVARS];
                for i in 0..NVARS {
                    e[i] = ea[i] + eb[i];
                }
                out.add_term(e, ca * cb);
            }
        }
        out
    }

    pub fn pow(&self, n: u32) -> Self {
        let mut out = Self::constant(&self.vars, 1.0);
        for _ in 0..n {
            out = out.mul(self);
        }
        out
    }

    /// Exact partial derivative with respect to `v`.
    pub fn differentiate(&self, v: Var) -> Result<Self, PolyError> {
        if !self.vars.contains(&v) {
            return Err(PolyError::VarNotDeclared(v));
        }
        let i = v.index();
        let mut out = Self::zero(&self.vars);
        for (e, c) in self.terms() {
            if e[i] == 0 {
                continue;
            }
            let mut d = *e;
            d[i] -= 1;
            out.add_term(d, c * e[i] as f64);
        }
        Ok(out)
    }

    /// Polynomial antiderivative in `v` with integration constant zero.
    pub fn antidifferentiate(&self, v: Var) -> Result<Self, PolyError> {
        if !self.vars.contains(&v) {
            return Err(PolyError::VarNotDeclared(v));
        }
        let i = v.index();
        let mut out = Self::zero(&self.vars);
        for (e, c) in self.terms() {
            let mut d = *e;
            d[i] += 1;
            out.add_term(d, c / d[i] as f64);
        }
        Ok(out)
    }

    /// Evaluate at a point given in the order of the declared variable list.
    /// Works over any [`Algebra`]: plain floats, dual numbers, term sums.
    pub fn eval<R: Algebra>(&self, point: &[R]) -> Result<R, PolyError> {
        if point.len() != self.vars.len() {
            return Err(PolyError::PointArity { got: point.len(), want: self.vars.len() });
        }
        let mut acc = R::a_zero();
        for (e, c) in self.terms() {
            let mut term = R::from_f64(c);
            for (slot, v) in self.vars.iter().enumerate() {
                let k = e[v.index()];
                for _ in 0..k {
                    term = term * point[slot].clone();
                }
            }
            acc = acc + term;
        }
        Ok(acc)
    }

    /// Widen the declared variable list (for cross-domain products).
    pub fn with_vars(&self, vars: &[Var]) -> Self {
        let mut merged = self.vars.clone();
        for v in vars {
            if !merged.contains(v) {
                merged.push(*v);
            }
        }
        let mut out = Self::zero(&merged);
        for (e, c) in self.terms() {
            out.add_term(*e, c);
        }
        out
    }

    /// Expression string that parses back to the same polynomial.
    pub fn to_expression(&self) -> String {
        if self.terms.is_empty() {
            return "0".to_string();
        }
        let mut out = String::new();
        for (idx, (e, c)) in self.terms().enumerate() {
            let neg = c < 0.0;
            let mag = c.abs();
            if idx == 0 {
                if neg {
                    out.push('-');
                }
            } else if neg {
                out.push_str(" - ");
            } else {
                out.push_str(" + ");
            }
            out.push_str(&format!("{mag}"));
            for v in Var::ALL {
                let k = e[v.index()];
                if k == 1 {
                    out.push_str(&format!("*{}", v.name()));
                } else if k > 1 {
                    out.push_str(&format!("*{}^{}", v.name(), k));
                }
            }
        }
        out
    }

    /// Coefficient-wise comparison with absolute tolerance.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        let keys: std::collections::BTreeSet<_> =
            self.terms.keys().chain(other.terms.keys()).collect();
        keys.into_iter().all(|k| (self.coeff(*k) - other.coeff(*k)).abs() <= tol)
    }
}

impl fmt::Display for MultiPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_expression())
    }
}

fn normalize_vars(vars: &[Var]) -> Vec<Var> {
    let mut out: Vec<Var> = Vec::new();
    for v in Var::ALL {
        if vars.contains(&v) {
            out.push(v);
        }
    }
    out
}

/// Ratio of two polynomials. No simplification beyond polynomial
/// canonicalization is performed.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalFn {
    pub num: MultiPoly,
    pub den: MultiPoly,
}

impl RationalFn {
    pub fn new(num: MultiPoly, den: MultiPoly) -> Result<Self, PolyError> {
        if den.is_zero() {
            return Err(PolyError::ZeroDenominator);
        }
        Ok(Self { num, den })
    }

    pub fn from_poly(num: MultiPoly) -> Self {
        let den = MultiPoly::constant(num.vars(), 1.0);
        Self { num, den }
    }

    /// Quotient-rule partial derivative. When the denominator does not
    /// depend on `v` the result stays over the same denominator.
    pub fn partial(&self, v: Var) -> Result<Self, PolyError> {
        let num = self.num.with_vars(&[v]);
        let den = self.den.with_vars(&[v]);
        let dn = num.differentiate(v)?;
        let dd = den.differentiate(v)?;
        if dd.is_zero() {
            return RationalFn::new(dn, self.den.clone());
        }
        let out_num = dn.mul(&den).sub(&num.mul(&dd));
        RationalFn::new(out_num, den.mul(&den))
    }

    pub fn mul(&self, other: &Self) -> Result<Self, PolyError> {
        RationalFn::new(self.num.mul(&other.num), self.den.mul(&other.den))
    }

    pub fn add(&self, other: &Self) -> Result<Self, PolyError> {
        if self.den == other.den {
            return RationalFn::new(self.num.add(&other.num), self.den.clone());
        }
        let num = self.num.mul(&other.den).add(&other.num.mul(&self.den));
        RationalFn::new(num, self.den.mul(&other.den))
    }

    pub fn sub(&self, other: &Self) -> Result<Self, PolyError> {
        self.add(&other.scaled(-1.0))
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self { num: self.num.scaled(k), den: self.den.clone() }
    }

    /// Evaluate at a jet point given over the full variable universe order.
    pub fn eval_universe(&self, point: &[f64; NVARS]) -> Result<f64, PolyError> {
        let num = eval_on_universe(&self.num, point)?;
        let den = eval_on_universe(&self.den, point)?;
        if den == 0.0 {
            return Err(PolyError::DenominatorVanishes);
        }
        Ok(num / den)
    }

    /// Equality as rational functions, by cross-multiplication, with a
    /// coefficient tolerance absorbing rounding from polynomial products.
    pub fn equivalent(&self, other: &Self, tol: f64) -> bool {
        let lhs = self.num.mul(&other.den);
        let rhs = other.num.mul(&self.den);
        let norm = lhs
            .terms()
            .map(|(_, c)| c.abs())
            .chain(rhs.terms().map(|(_, c)| c.abs()))
            .fold(1.0_f64, f64::max);
        lhs.approx_eq(&rhs, tol * norm)
    }
}

/// Evaluate a polynomial at a point indexed by the variable universe.
pub fn eval_on_universe<R: Algebra>(p: &MultiPoly, point: &[R; NVARS]) -> Result<R, PolyError> {
    let vals: Vec<R> = p.vars().iter().map(|v| point[v.index()].clone()).collect();
    p.eval(&vals)
}

// ---------------------------------------------------------------------------
// Expression parser
// ---------------------------------------------------------------------------
//
// expr   := term (('+'|'-') term)*
// term   := factor (('*'|'/') factor)*
// factor := base ('^' uint)?
// base   := number | ident | '(' expr ')' | '-' factor
//
// Identifiers are [a-zA-Z][a-zA-Z0-9_]*; they resolve to declared variables
// first, then to parameters (bound to their numeric values). Division is
// accepted only when the divisor evaluates to a nonzero constant.

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Self { src: src.as_bytes(), pos: 0 }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn next(&mut self) -> Result<Option<(usize, Tok)>, PolyError> {
        self.skip_ws();
        if self.pos >= self.src.len() {
            return Ok(None);
        }
        let start = self.pos;
        let c = self.src[self.pos];
        let tok = match c {
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'*' => Tok::Star,
            b'/' => Tok::Slash,
            b'^' => Tok::Caret,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b'0'..=b'9' | b'.' => {
                let mut end = self.pos;
                while end < self.src.len()
                    && (self.src[end].is_ascii_digit() || self.src[end] == b'.')
                {
                    end += 1;
                }
                // optional exponent part: e/E [+-] digits
                if end < self.src.len() && (self.src[end] == b'e' || self.src[end] == b'E') {
                    let mut probe = end + 1;
                    if probe < self.src.len()
                        && (self.src[probe] == b'+' || self.src[probe] == b'-')
                    {
                        probe += 1;
                    }
                    if probe < self.src.len() && self.src[probe].is_ascii_digit() {
                        end = probe;
                        while end < self.src.len() && self.src[end].is_ascii_digit() {
                            end += 1;
                        }
                    }
                }
                let text = std::str::from_utf8(&self.src[start..end]).unwrap();
                let value: f64 = text.parse().map_err(|_| PolyError::Syntax {
                    pos: start,
                    msg: format!("invalid number `{text}`"),
                })?;
                self.pos = end;
                return Ok(Some((start, Tok::Num(value))));
            }
            c if c.is_ascii_alphabetic() => {
                let mut end = self.pos;
                while end < self.src.len()
                    && (self.src[end].is_ascii_alphanumeric() || self.src[end] == b'_')
                {
                    end += 1;
                }
                let text = std::str::from_utf8(&self.src[start..end]).unwrap().to_string();
                self.pos = end;
                return Ok(Some((start, Tok::Ident(text))));
            }
            other => {
                return Err(PolyError::Syntax {
                    pos: start,
                    msg: format!("unexpected character `{}`", other as char),
                });
            }
        };
        self.pos += 1;
        Ok(Some((start, tok)))
    }
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    cursor: usize,
    vars: &'a [Var],
    params: &'a ParameterSet,
    end: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&(usize, Tok)> {
        self.toks.get(self.cursor)
    }

    fn bump(&mut self) -> Option<(usize, Tok)> {
        let t = self.toks.get(self.cursor).cloned();
        if t.is_some() {
            self.cursor += 1;
        }
        t
    }

    fn here(&self) -> usize {
        self.peek().map(|(p, _)| *p).unwrap_or(self.end)
    }

    fn expr(&mut self) -> Result<MultiPoly, PolyError> {
        let mut acc = self.term()?;
        while let Some((_, tok)) = self.peek() {
            match tok {
                Tok::Plus => {
                    self.bump();
                    acc = acc.add(&self.term()?);
                }
                Tok::Minus => {
                    self.bump();
                    acc = acc.sub(&self.term()?);
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<MultiPoly, PolyError> {
        let mut acc = self.factor()?;
        while let Some((_, tok)) = self.peek() {
            match tok {
                Tok::Star => {
                    self.bump();
                    acc = acc.mul(&self.factor()?);
                }
                Tok::Slash => {
                    let (pos, _) = self.bump().unwrap();
                    let divisor = self.factor()?;
                    if !divisor.is_constant() {
                        return Err(PolyError::NonConstantDivisor { pos });
                    }
                    let c = divisor.constant_term();
                    if c == 0.0 {
                        return Err(PolyError::DivisionByZero { pos });
                    }
                    acc = acc.scaled(1.0 / c);
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<MultiPoly, PolyError> {
        let base = self.base()?;
        if let Some((_, Tok::Caret)) = self.peek() {
            self.bump();
            let pos = self.here();
            match self.bump() {
                Some((_, Tok::Num(x))) => {
                    if x.fract() != 0.0 || x < 0.0 || x > MAX_PARSED_EXPONENT as f64 {
                        return Err(PolyError::BadExponent { pos });
                    }
                    return Ok(base.pow(x as u32));
                }
                _ => return Err(PolyError::BadExponent { pos }),
            }
        }
        Ok(base)
    }

    fn base(&mut self) -> Result<MultiPoly, PolyError> {
        let pos = self.here();
        match self.bump() {
            Some((_, Tok::Num(x))) => Ok(MultiPoly::constant(self.vars, x)),
            Some((p, Tok::Ident(name))) => {
                if let Some(v) = Var::from_name(&name) {
                    if self.vars.contains(&v) {
                        return MultiPoly::var(self.vars, v);
                    }
                    return Err(PolyError::UnknownIdent { pos: p, name });
                }
                if let Some(value) = self.params.get(&name) {
                    return Ok(MultiPoly::constant(self.vars, value));
                }
                Err(PolyError::UnknownIdent { pos: p, name })
            }
            Some((_, Tok::LParen)) => {
                let inner = self.expr()?;
                match self.bump() {
                    Some((_, Tok::RParen)) => Ok(inner),
                    other => Err(PolyError::Syntax {
                        pos: other.map(|(p, _)| p).unwrap_or(self.end),
                        msg: "expected `)`".to_string(),
                    }),
                }
            }
            Some((_, Tok::Minus)) => Ok(self.factor()?.neg()),
            other => Err(PolyError::Syntax {
                pos: other.map(|(p, _)| p).unwrap_or(pos),
                msg: "expected number, identifier, `(` or `-`".to_string(),
            }),
        }
    }
}

/// Parse an expression into a canonical polynomial over the declared
/// variables, binding parameter names to their values.
pub fn parse_poly(text: &str, vars: &[Var], params: &ParameterSet) -> Result<MultiPoly, PolyError> {
    let mut lexer = Lexer::new(text);
    let mut toks = Vec::new();
    while let Some(t) = lexer.next()? {
        toks.push(t);
    }
    let mut parser = Parser {
        toks,
        cursor: 0,
        vars,
        params,
        end: text.len(),
    };
    let poly = parser.expr()?;
    if let Some((pos, _)) = parser.peek() {
        return Err(PolyError::Syntax { pos: *pos, msg: "trailing input".to_string() });
    }
    // Exponent guard on parsed input.
    for (e, _) in poly.terms() {
        if e.iter().any(|&k| k > MAX_PARSED_EXPONENT) {
            return Err(PolyError::BadExponent { pos: 0 });
        }
    }
    Ok(poly)
}
