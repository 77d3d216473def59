//! Task execution: builds the family from a validated config, runs the
//! requested pipeline stage, and writes CSV / SVG artifacts plus a run
//! manifest with the config hash, seed, version and tolerances.

use std::path::PathBuf;

use thiserror::Error;

use crate::ansatz::{self, AnsatzParams, AveragingError};
use crate::config::{FamilySpec, RunConfig, Task};
use crate::family::{CoefficientFamily, FamilyError};
use crate::fels::{self, FelsError, FelsReport};
use crate::oracle::{self, AxisSpec, OracleError, ZGrid};
use crate::poly::{ParameterSet, PolyError, Var};
use crate::solver::{self, SolveError, SolveMode, StartGrid, StationaryResult};
use crate::svg;
use crate::tol;

/// Float formatting used in every CSV artifact: 17 significant digits,
/// round-trip exact for IEEE doubles; NaN prints as `NaN`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else {
        format!("{x:.16e}")
    }
}

/// FNV-1a hash of the canonical config text.
pub fn config_hash(canonical: &str) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for b in canonical.as_bytes() {
        hash ^= *b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("internal invariant violation: {0}")]
    Internal(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl RunError {
    /// Process exit code: 1 usage/config, 2 numerical, 3 internal.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 1,
            RunError::Numerical(_) => 2,
            RunError::Internal(_) => 3,
            RunError::Io { .. } => 1,
        }
    }
}

impl From<FamilyError> for RunError {
    fn from(e: FamilyError) -> Self {
        match e {
            FamilyError::NoRealKappa => RunError::Numerical(e.to_string()),
            _ => RunError::Config(e.to_string()),
        }
    }
}

impl From<PolyError> for RunError {
    fn from(e: PolyError) -> Self {
        RunError::Config(e.to_string())
    }
}

impl From<AveragingError> for RunError {
    fn from(e: AveragingError) -> Self {
        match e {
            AveragingError::Family(f) => f.into(),
            AveragingError::KappaParity { .. } => RunError::Internal(e.to_string()),
            _ => RunError::Numerical(e.to_string()),
        }
    }
}

impl From<SolveError> for RunError {
    fn from(e: SolveError) -> Self {
        match e {
            SolveError::Averaging(a) => a.into(),
            _ => RunError::Numerical(e.to_string()),
        }
    }
}

impl From<FelsError> for RunError {
    fn from(e: FelsError) -> Self {
        match e {
            FelsError::Family(f) => f.into(),
            FelsError::Poly(p) => RunError::Internal(p.to_string()),
            FelsError::SamplingFailed(_) => RunError::Numerical(e.to_string()),
        }
    }
}

impl From<OracleError> for RunError {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::Family(f) => f.into(),
            OracleError::Averaging(a) => a.into(),
            OracleError::Solve(s) => s.into(),
            _ => RunError::Numerical(e.to_string()),
        }
    }
}

/// Paths of everything a run wrote.
#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifacts {
    pub csv: PathBuf,
    pub manifest: PathBuf,
    pub extra: Vec<PathBuf>,
}

fn write(path: &PathBuf, content: &str) -> Result<(), RunError> {
    std::fs::write(path, content)
        .map_err(|source| RunError::Io { path: path.clone(), source })
}

/// Build the configured family (presets keep their expression recipe).
pub fn family_from_config(config: &RunConfig) -> Result<CoefficientFamily, RunError> {
    let mut params = ParameterSet::new();
    for (name, value) in &config.params {
        params.insert(name.clone(), *value)?;
    }
    let fam = match &config.family {
        FamilySpec::Preset(name) => CoefficientFamily::preset(name, &params)?,
        FamilySpec::Exprs { c1, c2, c3, c5 } => {
            CoefficientFamily::from_exprs(c1, c2, c3, c5, params)?
        }
    };
    Ok(fam)
}

fn start_grid(config: &RunConfig, fam: &CoefficientFamily) -> StartGrid {
    let mut grid = StartGrid::default_for(fam);
    if let Some(a) = &config.options.amplitude_starts {
        grid.amplitudes = a.clone();
    }
    if let Some(s) = &config.options.width_starts {
        grid.widths = s.clone();
    }
    grid
}

fn results_csv(fam: &CoefficientFamily, results: &[StationaryResult]) -> Result<String, RunError> {
    let param_names: Vec<String> = fam.params.iter().map(|(k, _)| k.to_string()).collect();
    let mut out = String::from("mode");
    for name in &param_names {
        out.push_str(&format!(",{name}"));
    }
    out.push_str(",kappa,A,s,alpha,grad_res_1,grad_res_2,unsolved_res,admissible,extremum,iterations\n");
    for r in results {
        let extremum = solver::classify_stationary(fam, r)
            .map_err(|e| RunError::Internal(e.to_string()))?;
        let kappa = match (r.mode, r.kappa_sq) {
            (SolveMode::Regular, _) => f64::NAN,
            (SolveMode::Embedded, Some(q)) if q > 0.0 => q.sqrt(),
            (SolveMode::Embedded, _) => f64::NAN,
        };
        out.push_str(&r.mode.to_string());
        for name in &param_names {
            out.push_str(&format!(",{}", fmt_f64(fam.params.get(name).unwrap())));
        }
        out.push_str(&format!(
            ",{},{},{},{},{},{},{},{},{},{}\n",
            fmt_f64(kappa),
            fmt_f64(r.params.amplitude),
            fmt_f64(r.params.width_sq),
            fmt_f64(r.params.tail_amplitude),
            fmt_f64(r.gradient_residual[0]),
            fmt_f64(r.gradient_residual[1]),
            fmt_f64(r.unsolved_residual.unwrap_or(f64::NAN)),
            r.admissible,
            extremum,
            r.iterations,
        ));
    }
    Ok(out)
}

fn profile_svg(results: &[StationaryResult]) -> Option<String> {
    let admissible: Vec<&StationaryResult> = results.iter().filter(|r| r.admissible).collect();
    if admissible.is_empty() {
        return None;
    }
    let z_half = admissible
        .iter()
        .map(|r| 4.0 * r.params.width_sq.abs().sqrt())
        .fold(3.0f64, f64::max);
    let series: Vec<(String, Vec<(f64, f64)>)> = admissible
        .iter()
        .map(|r| {
            let pts: Vec<(f64, f64)> = oracle::linspace(-z_half, z_half, 401)
                .into_iter()
                .map(|z| {
                    let jet = oracle::ansatz_jet(&r.params, z).expect("s > 0 for admissible");
                    (z, jet.u)
                })
                .collect();
            (
                format!("A={:.5}, s={:.5}", r.params.amplitude, r.params.width_sq),
                pts,
            )
        })
        .collect();
    Some(svg::line_plot("trial-function profiles", "z", &series))
}

fn run_solve(
    config: &RunConfig,
    fam: &CoefficientFamily,
    mode: SolveMode,
) -> Result<(String, Option<String>, bool), RunError> {
    let grid = start_grid(config, fam);
    let results = match (mode, config.options.least_squares) {
        (SolveMode::Regular, _) => solver::solve_regular(fam, &grid, config.seed)?,
        (SolveMode::Embedded, false) => solver::solve_embedded(fam, &grid, config.seed)?,
        (SolveMode::Embedded, true) => {
            solver::solve_embedded_least_squares(fam, &grid, config.seed)?
        }
    };
    let csv = results_csv(fam, &results)?;
    let svg = profile_svg(&results);
    let any_admissible = results.iter().any(|r| r.admissible);
    Ok((csv, svg, any_admissible))
}

fn run_scan(config: &RunConfig, fam: &CoefficientFamily) -> Result<(String, Option<String>), RunError> {
    let axis_name = config
        .options
        .axis_param
        .as_ref()
        .ok_or_else(|| RunError::Config("scan-residual needs task.axis_param".into()))?;
    let grid = start_grid(config, fam);
    let base = match config.options.scan_mode {
        SolveMode::Regular => solver::solve_regular(fam, &grid, config.seed)?,
        SolveMode::Embedded => solver::solve_embedded(fam, &grid, config.seed)?,
    };
    let base_root = base
        .iter()
        .find(|r| r.admissible)
        .ok_or_else(|| RunError::Numerical("no admissible root at the base parameters".into()))?;
    let z_grid = ZGrid {
        min: config.options.z_min,
        max: config.options.z_max,
        points: config.options.z_points,
    };
    let axis = AxisSpec::linspace(
        axis_name,
        config.options.axis_min,
        config.options.axis_max,
        config.options.axis_points,
    );
    let grid = oracle::residual_scan(fam, base_root, &z_grid, &axis)?;
    let svg = svg::heat_map("ODE residual of the optimized trial function", &grid);
    Ok((grid.to_csv(), Some(svg)))
}

fn run_action_eval(config: &RunConfig, fam: &CoefficientFamily) -> Result<(String, Option<String>), RunError> {
    let o = &config.options;
    let kappa = if o.tail_amplitude != 0.0 {
        ansatz::select_kappa(
            fam,
            &AnsatzParams::with_tail(o.amplitude, o.width_sq, o.tail_amplitude, 0.0),
        )?
    } else {
        0.0
    };
    let p = AnsatzParams::with_tail(o.amplitude, o.width_sq, o.tail_amplitude, kappa);
    let assembled = ansatz::assemble_action(fam, &p)?;
    let quadrature = oracle::quadrature_action(fam, &p, o.quad_tol)?;
    let rel = (assembled - quadrature).abs() / quadrature.abs().max(1e-300);
    let mut csv = String::from("A,s,alpha,kappa,action_assembled,action_quadrature,rel_diff\n");
    csv.push_str(&format!(
        "{},{},{},{},{},{},{}\n",
        fmt_f64(p.amplitude),
        fmt_f64(p.width_sq),
        fmt_f64(p.tail_amplitude),
        fmt_f64(p.tail_wavenumber),
        fmt_f64(assembled),
        fmt_f64(quadrature),
        fmt_f64(rel),
    ));
    let z_half = 4.0 * p.width_sq.abs().sqrt();
    let pts: Vec<(f64, f64)> = oracle::linspace(-z_half, z_half, 401)
        .into_iter()
        .map(|z| (z, oracle::ansatz_jet(&p, z).map(|j| j.u).unwrap_or(f64::NAN)))
        .collect();
    let svg = svg::line_plot("trial function", "z", &[("u(z)".to_string(), pts)]);
    Ok((csv, Some(svg)))
}

fn run_derive_ode(fam: &CoefficientFamily) -> String {
    let el = fam.el_poly();
    let mut out = String::from("u_pow,up_pow,upp_pow,uppp_pow,u4_pow,coefficient\n");
    for (e, c) in el.terms() {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            e[Var::U.index()],
            e[Var::Up.index()],
            e[Var::Upp.index()],
            e[Var::Uppp.index()],
            e[Var::U4.index()],
            fmt_f64(c),
        ));
    }
    out
}

fn run_fels(config: &RunConfig, fam: &CoefficientFamily) -> Result<(String, FelsReport), RunError> {
    let report = fels::fels_check(fam, config.options.n_samples, config.seed)?;
    let csv = format!("{}\n{}\n", FelsReport::csv_header(), report.csv_row());
    Ok((csv, report))
}

fn manifest(config: &RunConfig, hash: u64) -> String {
    let mut out = String::new();
    out.push_str(&format!("tool=varsol {}\n", env!("CARGO_PKG_VERSION")));
    out.push_str(&format!("config_hash={hash:016x}\n"));
    out.push_str(&format!("task={}\n", config.task));
    out.push_str(&format!("seed={}\n", config.seed));
    for (name, value) in [
        ("tolerance.exact_rel", tol::EXACT_REL),
        ("tolerance.closed_form_rel", tol::CLOSED_FORM_REL),
        ("tolerance.admissible_residual", tol::ADMISSIBLE_RESIDUAL),
        ("tolerance.newton_target", tol::NEWTON_TARGET),
        ("tolerance.root_dedup_rel", tol::ROOT_DEDUP_REL),
        ("tolerance.trivial_amplitude", tol::TRIVIAL_AMPLITUDE),
        ("tolerance.kappa_cross_check_rel", tol::KAPPA_CROSS_CHECK_REL),
        ("tolerance.secular_at_kappa_rel", tol::SECULAR_AT_KAPPA_REL),
        ("tolerance.secular_gate_rel", tol::SECULAR_GATE_REL),
        ("tolerance.action_vs_quadrature_rel", tol::ACTION_VS_QUADRATURE_REL),
        ("tolerance.quadrature_default", tol::QUADRATURE_DEFAULT),
        ("tolerance.fels_pass", tol::FELS_PASS),
        ("tolerance.fels_fail", tol::FELS_FAIL),
        ("tolerance.hessian_degenerate_rel", tol::HESSIAN_DEGENERATE_REL),
    ] {
        out.push_str(&format!("{name}={}\n", fmt_f64(value)));
    }
    let stamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    out.push_str(&format!("timestamp=unix:{stamp}\n"));
    out
}

/// Execute the configured task, writing the CSV (always), the SVG (when
/// requested and meaningful) and the manifest.
pub fn run(config: &RunConfig, hash: u64) -> Result<RunArtifacts, RunError> {
    std::fs::create_dir_all(&config.out_dir)
        .map_err(|source| RunError::Io { path: config.out_dir.clone(), source })?;
    let fam = family_from_config(config)?;

    let default_csv = match config.task {
        Task::DeriveOde => "ode.csv",
        Task::FelsCheck => "fels.csv",
        Task::SolveRegular | Task::SolveEmbedded => "results.csv",
        Task::ScanResidual => "scan.csv",
        Task::ActionEval => "action.csv",
    };
    let csv_path = config
        .out_dir
        .join(config.csv_name.clone().unwrap_or_else(|| default_csv.to_string()));
    let manifest_path = config.out_dir.join("manifest.txt");
    let mut extra = Vec::new();

    let mut failure: Option<RunError> = None;
    let (csv, svg_content) = match config.task {
        Task::DeriveOde => (run_derive_ode(&fam), None),
        Task::FelsCheck => {
            let (csv, report) = run_fels(config, &fam)?;
            let txt_path = config.out_dir.join("fels.txt");
            write(&txt_path, &report.to_key_value_block())?;
            extra.push(txt_path);
            (csv, None)
        }
        Task::SolveRegular => {
            let (csv, svg, any) = run_solve(config, &fam, SolveMode::Regular)?;
            if !any {
                failure = Some(RunError::Numerical("no admissible stationary point".into()));
            }
            (csv, svg)
        }
        Task::SolveEmbedded => {
            let (csv, svg, any) = run_solve(config, &fam, SolveMode::Embedded)?;
            if !any {
                failure = Some(RunError::Numerical("no admissible stationary point".into()));
            }
            (csv, svg)
        }
        Task::ScanResidual => run_scan(config, &fam)?,
        Task::ActionEval => run_action_eval(config, &fam)?,
    };

    write(&csv_path, &csv)?;
    if config.svg {
        if let Some(content) = svg_content {
            let svg_path = config.out_dir.join(match config.task {
                Task::ScanResidual => "scan.svg",
                _ => "profile.svg",
            });
            write(&svg_path, &content)?;
            extra.push(svg_path);
        }
    }
    write(&manifest_path, &manifest(config, hash))?;
    match failure {
        Some(err) => Err(err),
        None => Ok(RunArtifacts { csv: csv_path, manifest: manifest_path, extra }),
    }
}
