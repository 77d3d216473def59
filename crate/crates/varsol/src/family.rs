//! Coefficient families `(c1, c2, c3, c5)` with derived `c4`, the
//! Lagrangian `L = c1·c4 + c3·u'' + c5`, its fourth-order variational ODE,
//! and the dispersion relation of the linearization about `u = 0`.

use thiserror::Error;

use crate::poly::{
    eval_on_universe, parse_poly, MultiPoly, ParameterSet, PolyError, Var, NVARS,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FamilyError {
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error("degenerate family: c1*c2 is identically zero, so the variational ODE has no fourth-order term")]
    Degenerate,
    #[error("coefficient {name} may only depend on {allowed}, found `{var}`")]
    BadCoefficientDomain {
        name: &'static str,
        allowed: &'static str,
        var: Var,
    },
    #[error("the linearization about u = 0 has a forcing term ({0} contains a constant or u-linear monomial)")]
    NotLinearizable(&'static str),
    #[error("the linearization contains odd-derivative terms, a cosine tail cannot solve it")]
    OddLinearTerm,
    #[error("no real tail wavenumber: the dispersion polynomial has no positive root")]
    NoRealKappa,
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("preset `{preset}` requires parameter `{param}`")]
    MissingParameter { preset: String, param: String },
    #[error("family was built from raw polynomials and carries no expression recipe; parameter rebinding is unavailable")]
    NoRecipe,
}

/// A point of the fourth-order jet space at which the Lagrangian density
/// and ODE residual are evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub z: f64,
    pub u: f64,
    pub up: f64,
    pub upp: f64,
    pub uppp: f64,
    pub u4: f64,
}

impl Jet {
    pub fn new(z: f64, u: f64, up: f64, upp: f64, uppp: f64, u4: f64) -> Self {
        Self { z, u, up, upp, uppp, u4 }
    }

    /// Values over the variable universe (u, up, upp, uppp, u4).
    pub fn point(&self) -> [f64; NVARS] {
        [self.u, self.up, self.upp, self.uppp, self.u4]
    }
}

/// Source expressions a family can be rebuilt from with new parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyRecipe {
    pub c1: String,
    pub c2: String,
    pub c3: String,
    pub c5: String,
}

/// The twelve Lagrangian partials that assemble the variational ODE.
#[derive(Debug, Clone, PartialEq)]
pub struct LagrangianPartials {
    pub l_upp_upp: MultiPoly,
    pub l_upp_upp_upp: MultiPoly,
    pub l_up_upp_upp: MultiPoly,
    pub l_u_upp_upp: MultiPoly,
    pub l_u: MultiPoly,
    pub l_up: MultiPoly,
    pub l_up_up: MultiPoly,
    pub l_u_upp: MultiPoly,
    pub l_up_up_upp: MultiPoly,
    pub l_u_up: MultiPoly,
    pub l_u_up_upp: MultiPoly,
    pub l_u_u_upp: MultiPoly,
}

/// Coefficient family defining `L = c1·c4 + c3·u'' + c5`, with
/// `c4 = ∬ c2 du'' du''` (integration constants zero).
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientFamily {
    pub c1: MultiPoly,
    pub c2: MultiPoly,
    pub c3: MultiPoly,
    pub c5: MultiPoly,
    pub c4: MultiPoly,
    pub params: ParameterSet,
    recipe: Option<FamilyRecipe>,
    partials: LagrangianPartials,
}

fn check_domain(
    p: &MultiPoly,
    name: &'static str,
    allowed: &[Var],
    allowed_desc: &'static str,
) -> Result<(), FamilyError> {
    for (e, _) in p.terms() {
        for v in Var::ALL {
            if e[v.index()] > 0 && !allowed.contains(&v) {
                return Err(FamilyError::BadCoefficientDomain { name, allowed: allowed_desc, var: v });
            }
        }
    }
    Ok(())
}

fn partials_table(
    c1: &MultiPoly,
    c2: &MultiPoly,
    c3: &MultiPoly,
    c4: &MultiPoly,
    c5: &MultiPoly,
) -> Result<LagrangianPartials, FamilyError> {
    let c1 = c1.with_vars(&[Var::U, Var::Up]);
    let c3 = c3.with_vars(&[Var::U, Var::Up]);
    let c5 = c5.with_vars(&[Var::U, Var::Up]);
    let c2 = c2.with_vars(&[Var::Upp]);
    let c4 = c4.with_vars(&[Var::Upp]);
    let upp = MultiPoly::var(&[Var::Upp], Var::Upp)?;

    let c1_u = c1.differentiate(Var::U)?;
    let c1_up = c1.differentiate(Var::Up)?;
    let c1_uu = c1_u.differentiate(Var::U)?;
    let c1_uup = c1_u.differentiate(Var::Up)?;
    let c1_upup = c1_up.differentiate(Var::Up)?;
    let c3_u = c3.differentiate(Var::U)?;
    let c3_uu = c3_u.differentiate(Var::U)?;
    let c3_uup = c3_u.differentiate(Var::Up)?;
    let c3_upup = c3.differentiate(Var::Up)?.differentiate(Var::Up)?;
    let c5_u = c5.differentiate(Var::U)?;
    let c5_uup = c5_u.differentiate(Var::Up)?;
    let c5_up = c5.differentiate(Var::Up)?;
    let c5_upup = c5_up.differentiate(Var::Up)?;
    let c2_upp = c2.differentiate(Var::Upp)?;
    let c4_upp = c4.differentiate(Var::Upp)?;

    Ok(LagrangianPartials {
        l_upp_upp: c1.mul(&c2),
        l_upp_upp_upp: c1.mul(&c2_upp),
        l_up_upp_upp: c1_up.mul(&c2),
        l_u_upp_upp: c1_u.mul(&c2),
        l_u: c1_u.mul(&c4).add(&c3_u.mul(&upp)).add(&c5_u),
        l_up: c1_up.mul(&c4).add(&c3.differentiate(Var::Up)?.mul(&upp)).add(&c5_up),
        l_up_up: c1_upup.mul(&c4).add(&c3_upup.mul(&upp)).add(&c5_upup),
        l_u_upp: c1_u.mul(&c4_upp).add(&c3_u),
        l_up_up_upp: c1_upup.mul(&c4_upp).add(&c3_upup),
        l_u_up: c1_uup.mul(&c4).add(&c3_uup.mul(&upp)).add(&c5_uup),
        l_u_up_upp: c1_uup.mul(&c4_upp).add(&c3_uup),
        l_u_u_upp: c1_uu.mul(&c4_upp).add(&c3_uu),
    })
}

/// Build a family from already-parsed coefficient polynomials.
///
/// `c4` is computed as the double antiderivative of `c2` with both
/// integration constants zero, and the nondegeneracy `c1·c2 ≠ 0` is
/// verified.
pub fn build_family(
    c1: MultiPoly,
    c2: MultiPoly,
    c3: MultiPoly,
    c5: MultiPoly,
    params: ParameterSet,
) -> Result<CoefficientFamily, FamilyError> {
    CoefficientFamily::build(c1, c2, c3, c5, params, None)
}

impl CoefficientFamily {
    fn build(
        c1: MultiPoly,
        c2: MultiPoly,
        c3: MultiPoly,
        c5: MultiPoly,
        params: ParameterSet,
        recipe: Option<FamilyRecipe>,
    ) -> Result<Self, FamilyError> {
        check_domain(&c1, "c1", &[Var::U, Var::Up], "u, u'")?;
        check_domain(&c2, "c2", &[Var::Upp], "u''")?;
        check_domain(&c3, "c3", &[Var::U, Var::Up], "u, u'")?;
        check_domain(&c5, "c5", &[Var::U, Var::Up], "u, u'")?;
        if c1.mul(&c2).is_zero() {
            return Err(FamilyError::Degenerate);
        }
        let c4 = c2
            .with_vars(&[Var::Upp])
            .antidifferentiate(Var::Upp)?
            .antidifferentiate(Var::Upp)?;
        let partials = partials_table(&c1, &c2, &c3, &c4, &c5)?;
        Ok(Self { c1, c2, c3, c5, c4, params, recipe, partials })
    }

    /// Build from coefficient expressions, keeping them for parameter
    /// rebinding.
    pub fn from_exprs(
        c1: &str,
        c2: &str,
        c3: &str,
        c5: &str,
        params: ParameterSet,
    ) -> Result<Self, FamilyError> {
        let uv = [Var::U, Var::Up];
        let c1p = parse_poly(c1, &uv, &params)?;
        let c2p = parse_poly(c2, &[Var::Upp], &params)?;
        let c3p = parse_poly(c3, &uv, &params)?;
        let c5p = parse_poly(c5, &uv, &params)?;
        let recipe = FamilyRecipe {
            c1: c1.to_string(),
            c2: c2.to_string(),
            c3: c3.to_string(),
            c5: c5.to_string(),
        };
        Self::build(c1p, c2p, c3p, c5p, params, Some(recipe))
    }

    /// Built-in presets. `example1`: c1 = d2 − d3·u', c2 = 1,
    /// c3 = −(μ/2)u², c5 = −(d1/2)u'². `example2`: c1 = −d1 + d2·u + d3·u',
    /// c2 = 1, c3 = u², c5 = u'².
    pub fn preset(name: &str, params: &ParameterSet) -> Result<Self, FamilyError> {
        let require = |ps: &ParameterSet, keys: &[&str]| -> Result<(), FamilyError> {
            for key in keys {
                if ps.get(key).is_none() {
                    return Err(FamilyError::MissingParameter {
                        preset: name.to_string(),
                        param: key.to_string(),
                    });
                }
            }
            Ok(())
        };
        match name {
            "example1" => {
                require(params, &["d1", "d2", "d3", "mu"])?;
                Self::from_exprs(
                    "d2 - d3*up",
                    "1",
                    "-(mu/2)*u^2",
                    "-(d1/2)*up^2",
                    params.clone(),
                )
            }
            "example2" => {
                require(params, &["d1", "d2", "d3"])?;
                Self::from_exprs("-d1 + d2*u + d3*up", "1", "u^2", "up^2", params.clone())
            }
            other => Err(FamilyError::UnknownPreset(other.to_string())),
        }
    }

    pub fn recipe(&self) -> Option<&FamilyRecipe> {
        self.recipe.as_ref()
    }

    /// Rebuild the family with one parameter changed. Requires the family
    /// to carry its source expressions.
    pub fn with_param(&self, name: &str, value: f64) -> Result<Self, FamilyError> {
        let recipe = self.recipe.as_ref().ok_or(FamilyError::NoRecipe)?.clone();
        let params = self.params.with(name, value)?;
        Self::from_exprs(&recipe.c1, &recipe.c2, &recipe.c3, &recipe.c5, params)
    }

    /// The eleven mixed partials plus `L_{u''u''}` as polynomials in
    /// (u, u', u'').
    pub fn lagrangian_partials(&self) -> &LagrangianPartials {
        &self.partials
    }

    /// Lagrangian density at a second-order jet point.
    pub fn lagrangian_at(&self, u: f64, up: f64, upp: f64) -> f64 {
        let point = [u, up, upp, 0.0, 0.0];
        let c1 = eval_on_universe(&self.c1, &point).expect("domain checked at build");
        let c3 = eval_on_universe(&self.c3, &point).expect("domain checked at build");
        let c5 = eval_on_universe(&self.c5, &point).expect("domain checked at build");
        let c4 = eval_on_universe(&self.c4, &point).expect("domain checked at build");
        c1 * c4 + c3 * upp + c5
    }

    /// Residual of the variational ODE at a jet: the Euler-Lagrange
    /// expression assembled from the partials table.
    pub fn el_residual(&self, jet: &Jet) -> f64 {
        let pt = jet.point();
        let p = &self.partials;
        let ev = |poly: &MultiPoly| eval_on_universe(poly, &pt).expect("arity fixed");
        let (u1, u2, u3, u4) = (jet.up, jet.upp, jet.uppp, jet.u4);
        u4 * ev(&p.l_upp_upp)
            + u3 * u3 * ev(&p.l_upp_upp_upp)
            + 2.0 * u2 * u3 * ev(&p.l_up_upp_upp)
            - u2 * (ev(&p.l_up_up) - ev(&p.l_u_upp))
            + u2 * u2 * ev(&p.l_up_up_upp)
            + 2.0 * u1 * u3 * ev(&p.l_u_upp_upp)
            - u1 * ev(&p.l_u_up)
            + 2.0 * u1 * u2 * ev(&p.l_u_up_upp)
            + u1 * u1 * ev(&p.l_u_u_upp)
            + ev(&p.l_u)
    }

    /// The variational ODE as one polynomial over (u, u', u'', u''', u'''').
    pub fn el_poly(&self) -> MultiPoly {
        let p = &self.partials;
        let all = Var::ALL;
        let var = |v: Var| MultiPoly::var(&all, v).expect("universe var");
        let up = var(Var::Up);
        let upp = var(Var::Upp);
        let uppp = var(Var::Uppp);
        let u4 = var(Var::U4);

        u4.mul(&p.l_upp_upp)
            .add(&uppp.mul(&uppp).mul(&p.l_upp_upp_upp))
            .add(&upp.mul(&uppp).mul(&p.l_up_upp_upp).scaled(2.0))
            .sub(&upp.mul(&p.l_up_up.sub(&p.l_u_upp)))
            .add(&upp.mul(&upp).mul(&p.l_up_up_upp))
            .add(&up.mul(&uppp).mul(&p.l_u_upp_upp).scaled(2.0))
            .sub(&up.mul(&p.l_u_up))
            .add(&up.mul(&upp).mul(&p.l_u_up_upp).scaled(2.0))
            .add(&up.mul(&up).mul(&p.l_u_u_upp))
            .add(&p.l_u)
    }

    /// Linearize the variational ODE about `u = 0` and return the even
    /// polynomial `P(κ²)` whose roots carry the tail wavenumbers.
    pub fn linearized_dispersion(&self) -> Result<DispersionPoly, FamilyError> {
        for (poly, name) in [(&self.c3, "c3"), (&self.c5, "c5")] {
            for (e, _) in poly.terms() {
                let total: u32 = e.iter().sum();
                if total == 0 || (total == 1 && e[Var::U.index()] == 1) {
                    return Err(FamilyError::NotLinearizable(name));
                }
            }
        }
        let el = self.el_poly();
        if el.constant_term() != 0.0 {
            return Err(FamilyError::NotLinearizable("family"));
        }
        let lin = |v: Var| -> f64 {
            let mut e = [0u32; NVARS];
            e[v.index()] = 1;
            el.coeff(e)
        };
        if lin(Var::Up) != 0.0 || lin(Var::Uppp) != 0.0 {
            return Err(FamilyError::OddLinearTerm);
        }
        // u = cos(κz): u'' = -κ²u, u'''' = κ⁴u.
        Ok(DispersionPoly {
            quartic: lin(Var::U4),
            quadratic: -lin(Var::Upp),
            constant: lin(Var::U),
        })
    }
}

/// Even polynomial `P(y) = quartic·y² + quadratic·y + constant` in
/// `y = κ²` such that `u = cos(κz)` solves the linearized ODE iff
/// `P(κ²) = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DispersionPoly {
    pub quartic: f64,
    pub quadratic: f64,
    pub constant: f64,
}

impl DispersionPoly {
    /// Nonzero real roots in `y = κ²`, descending.
    pub fn nonzero_real_roots(&self) -> Vec<f64> {
        let (a, b, c) = (self.quartic, self.quadratic, self.constant);
        let mut roots = Vec::new();
        if a == 0.0 {
            if b != 0.0 {
                roots.push(-c / b);
            }
        } else {
            let disc = b * b - 4.0 * a * c;
            if disc >= 0.0 {
                let sq = disc.sqrt();
                roots.push((-b + sq) / (2.0 * a));
                roots.push((-b - sq) / (2.0 * a));
            }
        }
        roots.retain(|y| *y != 0.0 && y.is_finite());
        roots.sort_by(|p, q| q.partial_cmp(p).unwrap());
        roots.dedup();
        roots
    }

    /// Positive root as a wavenumber `κ = √y`, if one exists.
    pub fn positive_kappa(&self) -> Result<f64, FamilyError> {
        self.nonzero_real_roots()
            .into_iter()
            .find(|y| *y > 0.0)
            .map(f64::sqrt)
            .ok_or(FamilyError::NoRealKappa)
    }

    pub fn eval(&self, y: f64) -> f64 {
        (self.quartic * y + self.quadratic) * y + self.constant
    }
}
