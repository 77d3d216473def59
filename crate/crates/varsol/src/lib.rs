//! Workbench for second-degree Lagrangian families and their solitary waves.
//!
//! The crate builds Lagrangians of the form `L = c1(u,u')·c4(u'') +
//! c3(u,u')·u'' + c5(u,u')` with `c4` the double antiderivative of a free
//! coefficient `c2(u'')`, derives the corresponding fourth-order
//! variational ODE, checks the two representability conditions for
//! `u'''' = F` equations, and computes regular and embedded solitary-wave
//! approximations by making a Gaussian-core-plus-cosine-tail trial function
//! stationary in the averaged action. A small CLI (`varsol`) drives the
//! pipeline from INI-style config files and emits CSV/SVG artifacts with
//! reproducible seeds.

pub mod ansatz;
pub mod config;
pub mod dual;
pub mod family;
pub mod fels;
pub mod oracle;
pub mod poly;
pub mod runner;
pub mod solver;
pub mod svg;
pub mod tol;

pub use dual::{Grad, Hess, Scalar};
pub use family::{CoefficientFamily, DispersionPoly, Jet, LagrangianPartials};
pub use ansatz::{ActionExpansion, AnsatzParams, BasisTerm, Phase, TermSum};
pub use fels::{FelsReport, OdeForm, Verdict};
pub use poly::{parse_poly, MultiPoly, ParameterSet, RationalFn, Var};
pub use solver::{Extremum, SolveMode, StartGrid, StationaryResult};
