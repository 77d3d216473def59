//! Acceptance suite: one test per criterion, each printing a pass/fail
//! line. Run with `cargo test --test acceptance -- --nocapture` to see the
//! lines; every tolerance is pinned in code.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use varsol::ansatz::{self, AnsatzParams};
use varsol::config;
use varsol::family::{CoefficientFamily, Jet};
use varsol::fels;
use varsol::oracle::{self, AxisSpec, ZGrid};
use varsol::poly::ParameterSet;
use varsol::runner;
use varsol::solver::{self, StartGrid, StationaryResult};
use varsol::tol;
use varsol::Verdict;

fn example1(d1: f64, d2: f64, d3: f64, mu: f64) -> CoefficientFamily {
    let params =
        ParameterSet::from_pairs([("d1", d1), ("d2", d2), ("d3", d3), ("mu", mu)]).unwrap();
    CoefficientFamily::preset("example1", &params).unwrap()
}

fn example2(d1: f64, d2: f64, d3: f64) -> CoefficientFamily {
    let params = ParameterSet::from_pairs([("d1", d1), ("d2", d2), ("d3", d3)]).unwrap();
    CoefficientFamily::preset("example2", &params).unwrap()
}

fn report(criterion: u32, description: &str, failures: &[String]) {
    if failures.is_empty() {
        println!("criterion {criterion}: PASS - {description}");
    } else {
        println!("criterion {criterion}: FAIL - {description}");
        for f in failures {
            println!("    {f}");
        }
    }
    assert!(failures.is_empty(), "criterion {criterion} failed: {failures:?}");
}

fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(1e-300)
}

fn find_root(results: &[StationaryResult], want: (f64, f64), rel: f64) -> Option<StationaryResult> {
    results
        .iter()
        .find(|r| {
            rel_err(r.params.amplitude, want.0) < rel && rel_err(r.params.width_sq, want.1) < rel
        })
        .cloned()
}

#[test]
fn criterion_1_ode_reproduction() {
    let mut failures = Vec::new();
    let mut rng = StdRng::seed_from_u64(101);
    for _ in 0..20 {
        let d1 = rng.random_range(-3.0..3.0);
        let d2 = rng.random_range(-3.0..3.0);
        let d3 = rng.random_range(-3.0..3.0);
        let mu = rng.random_range(-3.0..3.0);
        let fam = example1(d1, d2, d3, mu);
        for _ in 0..50 {
            let jet = Jet::new(
                0.0,
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
            );
            let got = fam.el_residual(&jet);
            let want = jet.u4 * (d2 - d3 * jet.up) - 2.0 * d3 * jet.upp * jet.uppp
                + jet.upp * (d1 - 2.0 * mu * jet.u)
                - mu * jet.up * jet.up;
            if (got - want).abs() > tol::EXACT_REL * want.abs().max(1.0) {
                failures.push(format!(
                    "residual mismatch at {jet:?} d=({d1},{d2},{d3},{mu}): {got} vs {want}"
                ));
            }
        }
    }
    report(
        1,
        "variational residual of the first preset equals the hand-coded traveling-wave equation at 1000 random jets (rel 1e-12)",
        &failures,
    );
}

#[test]
fn criterion_2_regular_soliton_first_preset() {
    let mut failures = Vec::new();
    let mut rng = StdRng::seed_from_u64(202);
    for i in 0..100 {
        let d1 = rng.random_range(0.2..5.0);
        let d2 = rng.random_range(0.2..5.0);
        let mu = rng.random_range(0.2..5.0);
        let fam = example1(d1, d2, rng.random_range(-1.0..1.0), mu);
        let want = (3.0 * 1.5f64.sqrt() * d1 / (7.0 * mu), 21.0 * d2 / d1);
        match solver::solve_regular(&fam, &StartGrid::default_for(&fam), 0) {
            Ok(results) => {
                if find_root(&results, want, tol::CLOSED_FORM_REL).is_none() {
                    failures.push(format!(
                        "draw {i}: no root matching {want:?} for d1={d1} d2={d2} mu={mu}; roots: {:?}",
                        results
                            .iter()
                            .map(|r| (r.params.amplitude, r.params.width_sq))
                            .collect::<Vec<_>>()
                    ));
                }
            }
            Err(e) => failures.push(format!("draw {i}: solve failed: {e}")),
        }
    }
    // the specific unit-parameter point
    let fam = example1(1.0, 1.0, 1.0, 1.0);
    let results = solver::solve_regular(&fam, &StartGrid::default_for(&fam), 0).unwrap();
    match find_root(&results, (0.5248907, 21.0), 1e-6) {
        Some(root) if root.admissible => {}
        _ => failures.push("unit-parameter root (0.5248907, 21.0) missing or inadmissible".into()),
    }
    report(
        2,
        "regular stationary point of the first preset matches A = 3*sqrt(3/2)*d1/(7*mu), s = 21*d2/d1 (rel 1e-8, 100 draws)",
        &failures,
    );
}

#[test]
fn criterion_3_embedded_soliton_first_preset() {
    let mut failures = Vec::new();
    // opposite signs: admissible embedded root at the closed form
    for (d1, d2, mu) in [(-1.0, 1.0, 1.0), (-2.0, 1.5, 1.0), (-0.5, 4.0, 2.0)] {
        let fam = example1(d1, d2, 1.0, mu);
        let want = (13.0 * 1.5f64.sqrt() * d1 / (8.0 * mu), -4.0 * d2 / (3.0 * d1));
        let results = match solver::solve_embedded(&fam, &StartGrid::default_for(&fam), 0) {
            Ok(r) => r,
            Err(e) => {
                failures.push(format!("solve failed for d1={d1} d2={d2}: {e}"));
                continue;
            }
        };
        match find_root(&results, want, tol::CLOSED_FORM_REL) {
            Some(root) => {
                if !root.admissible {
                    failures.push(format!("root at d1={d1} d2={d2} should be admissible"));
                }
                match root.unsolved_residual {
                    Some(diag) if diag > 1e-6 => {}
                    other => failures.push(format!(
                        "width-equation diagnostic should be visibly nonzero, got {other:?}"
                    )),
                }
            }
            None => failures.push(format!("closed-form root {want:?} missing for d1={d1} d2={d2}")),
        }
    }
    // rounded reference values for d1=-1, d2=1, mu=1
    {
        let fam = example1(-1.0, 1.0, 1.0, 1.0);
        let results = solver::solve_embedded(&fam, &StartGrid::default_for(&fam), 0).unwrap();
        let formula = (13.0 * 1.5f64.sqrt() * (-1.0) / 8.0, 4.0 / 3.0);
        match find_root(&results, formula, tol::CLOSED_FORM_REL) {
            Some(root) => {
                if rel_err(root.params.amplitude, -1.9906577) > 5e-4
                    || rel_err(root.params.width_sq, 1.3333333) > 1e-6
                {
                    failures.push(format!(
                        "root ({}, {}) too far from the rounded reference (-1.9906577, 1.3333333)",
                        root.params.amplitude, root.params.width_sq
                    ));
                }
            }
            None => failures.push("embedded root missing at d1=-1, d2=1".into()),
        }
    }
    // same signs: width comes out negative and the root is inadmissible
    for (d1, d2) in [(1.0, 1.0), (2.0, 3.0)] {
        let fam = example1(d1, d2, 1.0, 1.0);
        let want = (13.0 * 1.5f64.sqrt() * d1 / 8.0, -4.0 * d2 / (3.0 * d1));
        let results = solver::solve_embedded(&fam, &StartGrid::default_for(&fam), 0).unwrap();
        match find_root(&results, want, tol::CLOSED_FORM_REL) {
            Some(root) => {
                if root.params.width_sq >= 0.0 || root.admissible {
                    failures.push(format!(
                        "same-sign root at d1={d1} d2={d2} must have s < 0 and be inadmissible"
                    ));
                }
            }
            None => failures.push(format!("negative-width root missing for d1={d1} d2={d2}")),
        }
    }
    report(
        3,
        "embedded stationary point matches A = 13*sqrt(3/2)*d1/(8*mu), s = -4*d2/(3*d1) (rel 1e-8); width diagnostic reported nonzero; same-sign parameters flagged inadmissible",
        &failures,
    );
}

#[test]
fn criterion_4_tail_wavenumber_selection() {
    let mut failures = Vec::new();
    let probe = AnsatzParams::with_tail(1.0, 1.0, 1.0, 0.0);
    let mut check = |fam: &CoefficientFamily, want_kappa: f64, label: &str| {
        match ansatz::select_kappa(fam, &probe) {
            Ok(kappa) => {
                if rel_err(kappa, want_kappa) > tol::KAPPA_CROSS_CHECK_REL {
                    failures.push(format!("{label}: kappa {kappa} vs {want_kappa}"));
                }
                // secular coefficients vanish at kappa relative to the
                // largest secular magnitude over [0.5, 2]*kappa
                let expansion = ansatz::expand_density(fam, &probe).unwrap();
                let (at_root, _) = ansatz::secular_residual(&expansion, kappa * kappa).unwrap();
                let mut scale: f64 = 0.0;
                for i in 0..=40 {
                    let k = kappa * (0.5 + 1.5 * i as f64 / 40.0);
                    let (v, _) = ansatz::secular_residual(&expansion, k * k).unwrap();
                    scale = scale.max(v.abs());
                }
                if at_root.abs() > 1e-10 * scale {
                    failures.push(format!(
                        "{label}: secular residual {at_root:.3e} above 1e-10 of bracket scale {scale:.3e}"
                    ));
                }
            }
            Err(e) => failures.push(format!("{label}: {e}")),
        }
    };
    for (d1, d2) in [(1.0, 1.0), (3.0, 4.0), (0.5, 2.0)] {
        check(
            &example1(d1, d2, 1.0, 1.0),
            (d1 / d2).sqrt(),
            &format!("first preset d1={d1} d2={d2}"),
        );
    }
    for d1 in [1.0, 5.0, 0.3] {
        check(
            &example2(d1, 2.0, 0.0),
            (2.0 / d1).sqrt(),
            &format!("second preset d1={d1}"),
        );
    }
    report(
        4,
        "selected tail wavenumber equals sqrt(d1/d2) and sqrt(2/d1) (rel 1e-10) and kills the secular part to 1e-10 of its bracket scale",
        &failures,
    );
}

#[test]
fn criterion_5_regular_soliton_second_preset() {
    let mut failures = Vec::new();
    let fam = example2(1.0, 1.0, 0.0);
    let disc = (49.0f64 - 36.0 + 4.0).sqrt();
    let nu = 5.0 + disc;
    let nu_t = 9.0 - disc;
    let want = (3.0 * 6.0f64.sqrt() / 64.0 * nu_t, 0.75 * nu);
    let results = solver::solve_regular(&fam, &StartGrid::default_for(&fam), 0).unwrap();
    match find_root(&results, want, 1e-6) {
        Some(root) => {
            if (root.params.amplitude - 0.55996).abs() > 1e-5
                || (root.params.width_sq - 6.84233).abs() > 1e-5
            {
                failures.push(format!(
                    "root ({}, {}) too far from the rounded reference (0.55996, 6.84233)",
                    root.params.amplitude, root.params.width_sq
                ));
            }
        }
        None => failures.push(format!("no root within 1e-6 of the closed form {want:?}")),
    }
    // gradient of the action at the closed-form point, scaled
    let grad = ansatz::assemble_action_in(
        &fam,
        varsol::Hess::<3>::var(want.0, 0),
        varsol::Hess::<3>::var(want.1, 1),
        varsol::Hess::<3>::var(0.0, 2),
        0.0,
    )
    .unwrap();
    let scale = grad.d.iter().map(|g| g.abs()).fold(1e-300, f64::max).max(grad.val.abs());
    for (i, g) in grad.d.iter().take(2).enumerate() {
        if g.abs() > 1e-6 * scale.max(1.0) {
            failures.push(format!("gradient component {i} at the closed-form point: {g:.3e}"));
        }
    }
    report(
        5,
        "regular stationary point of the second preset matches the closed forms built on nu = 5+sqrt(17), and the action gradient vanishes there (1e-6 scaled)",
        &failures,
    );
}

#[test]
fn criterion_6_action_correctness() {
    let mut failures = Vec::new();
    let mut rng = StdRng::seed_from_u64(606);

    // first preset, with and without tail
    for i in 0..25 {
        let d1 = rng.random_range(0.3..3.0);
        let d2 = rng.random_range(0.3..3.0);
        let fam = example1(d1, d2, rng.random_range(-1.0..1.0), rng.random_range(0.3..3.0));
        let alpha = if i % 2 == 0 { 0.0 } else { rng.random_range(0.005..0.05) };
        let kappa = if alpha != 0.0 { (d1 / d2).sqrt() } else { 0.0 };
        let p = AnsatzParams::with_tail(
            rng.random_range(0.2..1.5),
            rng.random_range(0.4..5.0),
            alpha,
            kappa,
        );
        let assembled = ansatz::assemble_action(&fam, &p).unwrap();
        let quadrature = oracle::quadrature_action(&fam, &p, 1e-9).unwrap();
        if (assembled - quadrature).abs()
            > tol::ACTION_VS_QUADRATURE_REL * quadrature.abs().max(1e-3)
        {
            failures.push(format!(
                "first preset point {i}: assembled {assembled} vs quadrature {quadrature}"
            ));
        }
    }
    // second preset, with and without tail
    for i in 0..25 {
        let d1 = rng.random_range(0.5..4.0);
        let fam = example2(d1, rng.random_range(0.3..3.0), 0.0);
        let alpha = if i % 2 == 0 { 0.0 } else { rng.random_range(0.005..0.05) };
        let kappa = if alpha != 0.0 { (2.0 / d1).sqrt() } else { 0.0 };
        let p = AnsatzParams::with_tail(
            rng.random_range(0.2..1.5),
            rng.random_range(0.4..5.0),
            alpha,
            kappa,
        );
        let assembled = ansatz::assemble_action(&fam, &p).unwrap();
        let quadrature = oracle::quadrature_action(&fam, &p, 1e-9).unwrap();
        if (assembled - quadrature).abs()
            > tol::ACTION_VS_QUADRATURE_REL * quadrature.abs().max(1e-3)
        {
            failures.push(format!(
                "second preset point {i}: assembled {assembled} vs quadrature {quadrature}"
            ));
        }
    }
    // reference value at unit parameters
    let fam = example1(1.0, 1.0, 1.0, 1.0);
    let s = ansatz::assemble_action(&fam, &AnsatzParams::core(1.0, 1.0)).unwrap();
    let pi = std::f64::consts::PI;
    let exact =
        pi.sqrt() * (27.0 * 2.0f64.sqrt() - 9.0 * 2.0f64.sqrt() + 8.0 * 3.0f64.sqrt()) / 36.0;
    if rel_err(s, exact) > 1e-10 {
        failures.push(format!("unit action {s} vs exact closed form {exact}"));
    }
    if (s - 1.935477).abs() > 1.2e-4 {
        // rounded reference
        failures.push(format!("unit action {s} too far from 1.935477"));
    }
    report(
        6,
        "assembled action agrees with adaptive quadrature to 1e-6 over 50 admissible points per preset; unit-parameter value matches sqrt(pi)(18*sqrt2+8*sqrt3)/36",
        &failures,
    );
}

#[test]
fn criterion_7_representability_conditions() {
    let mut failures = Vec::new();
    // condition 1 exact for every constructible family
    let mut rng = StdRng::seed_from_u64(707);
    let mut families: Vec<CoefficientFamily> = vec![
        example1(1.0, 1.0, 1.0, 1.0),
        example2(1.0, 1.0, 1.0),
        example2(5.0, 2.0, 0.0),
    ];
    for _ in 0..7 {
        let c1 = format!(
            "{} + {}*u + {}*up",
            rng.random_range(0.5..2.0f64),
            rng.random_range(-1.0..1.0f64),
            rng.random_range(-1.0..1.0f64)
        );
        let c2 = format!("{} + {}*upp", rng.random_range(0.5..2.0f64), rng.random_range(-1.0..1.0f64));
        let c3 = format!("{}*u^2 + {}*u*up", rng.random_range(-2.0..2.0f64), rng.random_range(-2.0..2.0f64));
        let c5 = format!("{}*up^2 + {}*u^3", rng.random_range(-2.0..2.0f64), rng.random_range(-2.0..2.0f64));
        families.push(
            CoefficientFamily::from_exprs(&c1, &c2, &c3, &c5, ParameterSet::new()).unwrap(),
        );
    }
    for (i, fam) in families.iter().enumerate() {
        let ode = fels::build_f(fam).unwrap();
        if !ode.third_uppp_derivative_is_zero() {
            failures.push(format!("family {i}: first condition not structurally zero"));
        }
    }
    // condition 2 satisfied for constant leading coefficients
    let named = CoefficientFamily::from_exprs("1", "1", "u^2", "up^2", ParameterSet::new()).unwrap();
    let mut const_families = vec![named];
    for _ in 0..4 {
        let c3 = format!("{}*u^2 + {}*u*up + {}*u^3", rng.random_range(-2.0..2.0f64), rng.random_range(-2.0..2.0f64), rng.random_range(-2.0..2.0f64));
        let c5 = format!("{}*up^2 + {}*u^2*up", rng.random_range(-2.0..2.0f64), rng.random_range(-2.0..2.0f64));
        const_families.push(
            CoefficientFamily::from_exprs(
                &format!("{}", rng.random_range(0.5..3.0f64)),
                &format!("{}", rng.random_range(0.5..3.0f64)),
                &c3,
                &c5,
                ParameterSet::new(),
            )
            .unwrap(),
        );
    }
    for (i, fam) in const_families.iter().enumerate() {
        let r = fels::fels_check(fam, 1000, 0).unwrap();
        if r.condition2_max_normalized >= tol::FELS_PASS {
            failures.push(format!(
                "constant-coefficient family {i}: condition 2 normalized residual {:.3e} not below 1e-9",
                r.condition2_max_normalized
            ));
        }
    }
    // condition 2 violated for the second preset with varying leading coefficient
    let r = fels::fels_check(&example2(1.0, 1.0, 1.0), 1000, 0).unwrap();
    if r.condition2_max_normalized <= tol::FELS_FAIL || r.condition2 != Verdict::Violated {
        failures.push(format!(
            "second preset: condition 2 normalized residual {:.3e} not above 1e-3",
            r.condition2_max_normalized
        ));
    }
    report(
        7,
        "first condition exact for every family; second condition < 1e-9 for constant leading coefficients and > 1e-3 for the second preset",
        &failures,
    );
}

#[test]
fn criterion_8_residual_scan_monotonicity() {
    let mut failures = Vec::new();
    let z_grid = ZGrid { min: -3.0, max: 3.0, points: 121 };

    // residual grows with d1 (for d2 = 1 and d2 = 5)
    for d2 in [1.0, 5.0] {
        let fam = example1(1.0, d2, 1.0, 1.0);
        let base = solver::solve_regular(&fam, &StartGrid::default_for(&fam), 0)
            .unwrap()
            .into_iter()
            .find(|r| r.admissible)
            .expect("admissible base root");
        let axis = AxisSpec::linspace("d1", 0.5, 10.0, 20);
        let grid = oracle::residual_scan(&fam, &base, &z_grid, &axis).unwrap();
        let maxima: Vec<f64> = (0..axis.values.len()).map(|i| grid.max_over_z(i)).collect();
        let violations = maxima
            .windows(2)
            .filter(|w| !(w[1] > w[0]) || w[0].is_nan() || w[1].is_nan())
            .count();
        if violations > 2 {
            failures.push(format!(
                "d2={d2}: residual not increasing in d1 ({violations} non-monotone pairs): {maxima:?}"
            ));
        }
    }
    // residual shrinks with d2 (for d1 = 1)
    {
        let fam = example1(1.0, 1.0, 1.0, 1.0);
        let base = solver::solve_regular(&fam, &StartGrid::default_for(&fam), 0)
            .unwrap()
            .into_iter()
            .find(|r| r.admissible)
            .expect("admissible base root");
        let axis = AxisSpec::linspace("d2", 1.0, 10.0, 20);
        let grid = oracle::residual_scan(&fam, &base, &z_grid, &axis).unwrap();
        let maxima: Vec<f64> = (0..axis.values.len()).map(|i| grid.max_over_z(i)).collect();
        let violations = maxima
            .windows(2)
            .filter(|w| !(w[1] < w[0]) || w[0].is_nan() || w[1].is_nan())
            .count();
        if violations > 2 {
            failures.push(format!(
                "d1=1: residual not decreasing in d2 ({violations} non-monotone pairs): {maxima:?}"
            ));
        }
    }
    report(
        8,
        "max ODE residual over z in [-3,3] increases with d1 and decreases with d2 (at most 2 non-monotone pairs)",
        &failures,
    );
}

#[test]
fn criterion_9_deterministic_csv_output() {
    let mut failures = Vec::new();
    let base = std::env::temp_dir().join(format!("varsol-acceptance-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&base);
    for task in ["solve-regular", "solve-embedded", "fels-check"] {
        let mut outputs = Vec::new();
        for run_idx in 0..2 {
            let dir = base.join(format!("{task}-{run_idx}"));
            let d1 = if task == "solve-embedded" { -1.0 } else { 1.0 };
            let text = format!(
                "[family]\npreset = \"example1\"\n[params]\nd1 = {d1}\nd2 = 1.0\nd3 = 1.0\nmu = 1.0\n[task]\nname = \"{task}\"\nseed = 11\nn_samples = 200\n[output]\ndir = \"{}\"\n",
                dir.display()
            );
            let raw = config::parse_raw(&text).unwrap();
            let hash = runner::config_hash(&raw.canonical_text());
            let cfg = config::validate(&raw).unwrap();
            match runner::run(&cfg, hash) {
                Ok(artifacts) => outputs.push(std::fs::read(&artifacts.csv).unwrap()),
                Err(e) => failures.push(format!("{task} run {run_idx} failed: {e}")),
            }
        }
        if outputs.len() == 2 && outputs[0] != outputs[1] {
            failures.push(format!("{task}: CSV bytes differ between identical runs"));
        }
    }
    let _ = std::fs::remove_dir_all(&base);
    report(
        9,
        "identical config and seed produce byte-identical CSV artifacts",
        &failures,
    );
}

/// Embedded root of the second preset validated against its closed form
/// with either inner square-root branch (admissibility decides the sign),
/// per the note accompanying the criteria.
#[test]
fn criteria_note_second_preset_embedded_branch() {
    let mut failures = Vec::new();
    let (d1, d2) = (5.0, 2.0);
    let fam = example2(d1, d2, 0.0);
    let results = solver::solve_embedded(&fam, &StartGrid::default_for(&fam), 0).unwrap();
    let inner = (2.0 * d1 * d1 * (8.0 * d1 * d1 + 24.0 * d1 * d2 - 9.0 * d2 * d2)).sqrt();
    let denom = 8.0 * d1 - 3.0 * d2;
    let branches = [
        (3.0 * d1 * d2 - 4.0 * d1 * d1 + inner) / denom,
        (3.0 * d1 * d2 - 4.0 * d1 * d1 - inner) / denom,
    ];
    let admissible: Vec<_> = results.iter().filter(|r| r.admissible).collect();
    let matched = admissible.iter().any(|r| {
        branches.iter().any(|xi| {
            let s = 2.0 * xi / 3.0;
            let a = 6.0f64.sqrt() * (3.0 * d1 - 2.0 * s) / (8.0 * (d2 - s));
            s > 0.0 && rel_err(r.params.width_sq, s) < 1e-8 && rel_err(r.params.amplitude, a) < 1e-8
        })
    });
    if !matched {
        failures.push(format!(
            "no admissible embedded root matches s = 2*xi/3 for either branch; admissible: {:?}",
            admissible
                .iter()
                .map(|r| (r.params.amplitude, r.params.width_sq))
                .collect::<Vec<_>>()
        ));
    }
    if let Some(r) = admissible.first() {
        if rel_err(r.params.tail_wavenumber, (2.0f64 / d1).sqrt()) > 1e-10 {
            failures.push(format!("tail wavenumber {} vs sqrt(2/5)", r.params.tail_wavenumber));
        }
    }
    report(
        10,
        "criteria note - embedded root of the second preset sits on the closed-form branch with positive width, kappa = sqrt(2/d1)",
        &failures,
    );
}
