//! Acceptance suite. Each test prints one `criterion N: PASS|FAIL` line and then
//! asserts; run with `--nocapture` to see the lines.

use std::f64::consts::{E, PI};
use std::sync::Arc;
use std::time::{Duration, Instant};

use curvest::comparison::{lambda_sup, phi_ode_residual, sturm_margin, sturm_profile, CurvatureBound};
use curvest::curvature::{garding_chain, higher_mean_curvatures, trace_identity_residuals};
use curvest::harness::{bundled, run_scenario, ScenarioConfig, ScenarioRun, Status, VerificationReport, BUNDLED};
use curvest::immersion::{GeodesicSphereChart, HypersurfacePatch, Orientation};
use curvest::operators::{omori_yau_search, LinearField, OperatorSpec};
use curvest::spaceform::{
    distance_hessian_fd, distance_hessian_quadform, hessian_comparison_residual, hessian_comparison_residual_with,
    AmbientModel, Signature,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(criterion: u32, title: &str, ok: bool, detail: String, elapsed: Duration, budget: Duration) {
    let within = elapsed <= budget;
    println!(
        "criterion {criterion}: {} [{title}] {detail}; {:.2} s (budget {:.0} s)",
        if ok && within { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        budget.as_secs_f64()
    );
    assert!(ok, "criterion {criterion} failed: {detail}");
    assert!(within, "criterion {criterion} exceeded its runtime budget");
}

fn config(name: &str) -> ScenarioConfig {
    ScenarioConfig::from_json(bundled(name).unwrap()).unwrap()
}

fn run(cfg: &ScenarioConfig) -> ScenarioRun {
    run_scenario(cfg).unwrap_or_else(|e| panic!("{}: {e}", cfg.name))
}

fn residual(r: &VerificationReport, id: &str) -> f64 {
    r.check(id)
        .unwrap_or_else(|| panic!("{}: no check {id}", r.scenario))
        .residual
        .unwrap_or(f64::NAN)
}

fn status(r: &VerificationReport, id: &str) -> Status {
    r.check(id).unwrap_or_else(|| panic!("{}: no check {id}", r.scenario)).status
}

#[test]
fn criterion_01_trace_identities() {
    const TOL: f64 = 1e-10;
    const CASES: usize = 1000;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for i in 0..CASES {
        let n = 2 + i % 7;
        let mut a = DMatrix::zeros(n, n);
        for r in 0..n {
            for c in r..n {
                let v = rng.random_range(-2.0..2.0);
                a[(r, c)] = v;
                a[(c, r)] = v;
            }
        }
        for sig in [Signature::Riemannian, Signature::Lorentzian] {
            for (t, ta) in trace_identity_residuals(&a, sig).unwrap() {
                worst = worst.max(t).max(ta);
            }
        }
    }
    report(
        1,
        "trace identities",
        worst <= TOL,
        format!("{CASES} matrices, n in 2..=8, both signatures, max relative residual {worst:.2e} <= {TOL:.0e}"),
        start.elapsed(),
        Duration::from_secs(5),
    );
}

/// `C_b(r)` in closed form.
fn sphere_mean_curvature(b: f64, r: f64) -> f64 {
    match b {
        b if b > 0.0 => b.sqrt() / (b.sqrt() * r).tan(),
        b if b < 0.0 => (-b).sqrt() / ((-b).sqrt() * r).tanh(),
        _ => 1.0 / r,
    }
}

fn geodesic_sphere_config(b: f64, n: usize, radius: f64, jets: &str, resolution: usize) -> ScenarioConfig {
    let kind = match b {
        b if b > 0.0 => "sphere_embedded",
        b if b < 0.0 => "hyperboloid_embedded",
        _ => "euclidean",
    };
    ScenarioConfig::from_json(&format!(
        r#"{{
            "name": "geodesic-sphere-b{b}-n{n}-{jets}",
            "ambient": {{"signature": "riemannian", "curvature": {b}, "dimension": {}, "model_kind": "{kind}"}},
            "chart": {{"name": "geodesic_sphere", "radius": {radius}}},
            "k_range": [0, {}],
            "resolution": {resolution},
            "jets": "{jets}",
            "expect": "equality",
            "checks": ["estimate"]
        }}"#,
        n + 1,
        n - 1
    ))
    .unwrap()
}

#[test]
fn criterion_02_geodesic_sphere_equality() {
    const TOL_ANALYTIC: f64 = 1e-6;
    const TOL_FD: f64 = 1e-3;
    const RADIUS: f64 = 0.8;
    let start = Instant::now();
    let mut worst = [0.0f64; 2];
    let mut ok = true;
    for b in [-1.0, 0.0, 1.0] {
        let oracle = sphere_mean_curvature(b, RADIUS);
        for n in [2usize, 3, 4] {
            let resolution = if n == 4 { 8 } else { 10 };
            for (slot, jets, tol) in [(0, "analytic", TOL_ANALYTIC), (1, "finite_difference", TOL_FD)] {
                let run = run(&geodesic_sphere_config(b, n, RADIUS, jets, resolution));
                for k in 0..n {
                    ok &= status(&run.report, &format!("estimate.equality.k{k}")) == Status::Pass;
                    for ratio in run.samples.column(&format!("ratio_k{k}")).unwrap() {
                        let dev = (ratio - oracle).abs();
                        worst[slot] = worst[slot].max(dev);
                        ok &= dev < tol;
                    }
                }
            }
        }
    }
    report(
        2,
        "geodesic-sphere equality",
        ok,
        format!(
            "b in {{-1,0,1}}, n in {{2,3,4}}, all k: max |H_(k+1)/H_k - C_b(r)| = {:.2e} analytic (< {TOL_ANALYTIC:.0e}), {:.2e} FD (< {TOL_FD:.0e})",
            worst[0], worst[1]
        ),
        start.elapsed(),
        Duration::from_secs(30),
    );
}

#[test]
fn criterion_03_ellipsoid_strict_inequality() {
    const REFINEMENT_NOISE: f64 = 1e-4;
    // equator: kappa = (1/a, a/c^2) = (1, 1/0.36), H_2/H_1 = 25/17; r = a = 1
    const ORACLE_MARGIN: f64 = 25.0 / 17.0 - 1.0;
    let start = Instant::now();
    let mut cfg = config("ellipsoid");
    let coarse = run(&cfg).report;
    cfg.resolution *= 2;
    let fine = run(&cfg).report;
    let (m1, m2) = (residual(&coarse, "estimate.ratio.k1"), residual(&fine, "estimate.ratio.k1"));
    let r = residual(&fine, "estimate.radius");
    let ok = m1 > 0.0
        && m2 > 0.0
        && m2 >= m1 - REFINEMENT_NOISE
        && status(&fine, "estimate.ratio.k1") == Status::Pass
        && (r - 1.0).abs() < 1e-9
        && (m2 - ORACLE_MARGIN).abs() < 1e-6;
    report(
        3,
        "strict inequality on the ellipsoid (1, 1, 0.6)",
        ok,
        format!("r = {r:.9}, margin {m1:.6} at resolution {}, {m2:.6} after doubling (expected 25/17 - 1 = {ORACLE_MARGIN:.6})", cfg.resolution / 2),
        start.elapsed(),
        Duration::from_secs(30),
    );
}

#[test]
fn criterion_04_sturm_comparison() {
    const TOL: f64 = 1e-6;
    const T_END: f64 = 5.0;
    // G = 1, t = 1: e/(e-1) - coth(1)
    let oracle = E / (E - 1.0) - 1.0 / 1f64.tanh();
    let start = Instant::now();
    let bounds = [
        CurvatureBound::Const(1.0),
        CurvatureBound::Const(2.0),
        CurvatureBound::Affine(1.0, 1.0),
        CurvatureBound::SqrtGrowth(1.0),
    ];
    let mut worst = f64::INFINITY;
    for g in &bounds {
        worst = worst.min(sturm_margin(g, T_END).unwrap());
    }
    let at_one = *sturm_profile(&CurvatureBound::Const(1.0), 1.0, 1000).unwrap().margin.last().unwrap();
    let ok = worst >= -TOL && (at_one - 0.268942).abs() < 1e-5 && (at_one - oracle).abs() < 1e-8;
    report(
        4,
        "Sturm comparison",
        ok,
        format!("min margin on (0, 5] over G in {{1, 2, 1+t, 1+sqrt(1+t)}} = {worst:.3e} >= -{TOL:.0e}; G = 1 margin at t = 1: {at_one:.7}"),
        start.elapsed(),
        Duration::from_secs(5),
    );
}

#[test]
fn criterion_05_lambda() {
    let oracle = E * E / (E - 1.0);
    let start = Instant::now();
    let est = lambda_sup(&CurvatureBound::Const(1.0), 50.0).unwrap();
    const STATED: f64 = 4.300260;
    let ok = (est.lambda - STATED).abs() <= 1e-4 && (est.lambda - oracle).abs() <= 1e-9 && (est.argmax - 2.0).abs() <= 1e-3;
    report(
        5,
        "Lambda for G = 1",
        ok,
        format!("Lambda = {:.7} (e^2/(e-1) = {oracle:.7}, stated {STATED} +- 1e-4), argmax t = {:.4}", est.lambda, est.argmax),
        start.elapsed(),
        Duration::from_secs(2),
    );
}

#[test]
fn criterion_06_phi_ode() {
    const TOL: f64 = 1e-10;
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for b in [-2.0f64, -1.0, 0.0, 1.0, 2.0] {
        let t_max = if b > 0.0 { 0.99 * PI / (2.0 * b.sqrt()) } else { 3.0 };
        for i in 1..=100 {
            let t = t_max * i as f64 / 100.0;
            worst = worst.max(phi_ode_residual(b, t).unwrap().abs());
        }
    }
    report(
        6,
        "phi_b'' - C_b phi_b' = 0",
        worst < TOL,
        format!("b in {{-2,-1,0,1,2}}, 100 t each, max |residual| = {worst:.2e} < {TOL:.0e}"),
        start.elapsed(),
        Duration::from_secs(1),
    );
}

/// Random point at distance in `[0.2, 1.2]` from the base point along a geodesic,
/// timelike and future-directed in the Lorentzian models, with a random tangent vector.
fn random_point_and_vector(model: &AmbientModel, rng: &mut ChaCha8Rng) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
    let o = model.base_point().into_inner();
    let frame = model.tangent_frame(&o).unwrap();
    let m = frame.len();
    let mut spatial = DVector::zeros(o.len());
    let first_spatial = match model.signature() {
        Signature::Riemannian => 0,
        Signature::Lorentzian => 1,
    };
    for e in &frame[first_spatial..] {
        spatial += e * rng.random_range(-1.0..1.0);
    }
    let spatial = &spatial / model.inner(&spatial, &spatial).sqrt();
    let dir = match model.signature() {
        Signature::Riemannian => spatial,
        Signature::Lorentzian => {
            let s: f64 = rng.random_range(0.0..1.0);
            &frame[0] * s.cosh() + spatial * s.sinh()
        }
    };
    let x = model.geodesic(&o, &dir, rng.random_range(0.2..1.2));
    let raw = DVector::from_fn(o.len(), |_, _| rng.random_range(-1.0..1.0));
    let v = model.project_tangent(&x, &raw);
    assert!(m >= 2);
    (o, x, v)
}

#[test]
fn criterion_07_hessian_comparison() {
    const TOL: f64 = 1e-6;
    const DRAWS: usize = 100;
    let start = Instant::now();
    let models = [
        AmbientModel::euclidean(3).unwrap(),
        AmbientModel::sphere(1.0, 3).unwrap(),
        AmbientModel::hyperbolic(-1.0, 4).unwrap(),
        AmbientModel::minkowski(3).unwrap(),
        AmbientModel::lorentz_spaceform(1.0, 3).unwrap(),
        AmbientModel::lorentz_spaceform(-1.0, 4).unwrap(),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut fd_gap, mut lemma, mut one_sided) = (0.0f64, 0.0f64, f64::INFINITY);
    for model in &models {
        for _ in 0..DRAWS {
            let (o, x, v) = random_point_and_vector(model, &mut rng);
            let closed = distance_hessian_quadform(model, &o, &x, &v).unwrap();
            let fd = distance_hessian_fd(model, &o, &x, &v).unwrap();
            fd_gap = fd_gap.max((closed - fd).abs());
            lemma = lemma.max(hessian_comparison_residual(model, &o, &x, &v).unwrap().abs());
            // a larger curvature bound weakens the comparison: residual stays >= 0
            let b_bound = model.curvature() + 0.5;
            one_sided = one_sided.min(hessian_comparison_residual_with(model, &o, &x, &v, b_bound).unwrap());
        }
    }
    let ok = fd_gap < TOL && lemma < TOL && one_sided >= -TOL;
    report(
        7,
        "Hessian comparison",
        ok,
        format!(
            "6 models x {DRAWS} draws: |closed - FD| <= {fd_gap:.2e}, |lemma residual| <= {lemma:.2e}, one-sided residual >= {one_sided:.2e}"
        ),
        start.elapsed(),
        Duration::from_secs(10),
    );
}

#[test]
fn criterion_08_restriction_hessian() {
    const ROUTE_TOL: f64 = 1e-4;
    const LK_TOL: f64 = 1e-6;
    let start = Instant::now();
    let mut ok = true;
    let mut worst_gap: f64 = 0.0;
    let mut worst_lk: f64 = 0.0;
    for (name, _) in BUNDLED {
        let run = run(&config(name));
        let gap = residual(&run.report, "restriction.routes");
        worst_gap = worst_gap.max(gap);
        ok &= gap < ROUTE_TOL;
        if matches!(*name, "sphere-equality" | "sphere-in-sphere" | "hyperbolic-sphere" | "minkowski-hyperboloid") {
            let cfg = config(name);
            for k in cfg.ks() {
                let lk = residual(&run.report, &format!("lk_vanishes.k{k}"));
                worst_lk = worst_lk.max(lk);
                ok &= lk < LK_TOL;
            }
        }
    }
    // tabulated paraboloid z = (x^2 + y^2)/2 without jets
    let dir = std::env::temp_dir().join(format!("curvest-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let mut csv = String::from("p0,p1,x0,x1,x2\n");
    let nodes = 101;
    for i in 0..nodes {
        for j in 0..nodes {
            let u = -0.5 + i as f64 / (nodes - 1) as f64;
            let v = -0.5 + j as f64 / (nodes - 1) as f64;
            csv.push_str(&format!("{u},{v},{u},{v},{}\n", 0.5 * (u * u + v * v)));
        }
    }
    std::fs::write(dir.join("paraboloid.csv"), csv).unwrap();
    let cfg = ScenarioConfig::from_json(&format!(
        r#"{{
            "name": "tabulated",
            "ambient": {{"signature": "riemannian", "curvature": 0, "dimension": 3, "model_kind": "euclidean"}},
            "chart": {{"name": "tabulated", "path": "{}"}},
            "reference_point": [0.0, 0.0, 2.0],
            "k_range": [0, 1],
            "resolution": 8,
            "checks": ["restriction"]
        }}"#,
        dir.join("paraboloid.csv").display()
    ))
    .unwrap();
    let tab = run(&cfg);
    let _ = std::fs::remove_dir_all(&dir);
    let gap = residual(&tab.report, "restriction.routes");
    worst_gap = worst_gap.max(gap);
    ok &= gap < ROUTE_TOL;
    report(
        8,
        "restriction Hessian identity",
        ok,
        format!(
            "{} bundled charts + tabulated: max route gap {worst_gap:.2e} < {ROUTE_TOL:.0e}; level sets: max |L_k u| {worst_lk:.2e} < {LK_TOL:.0e}",
            BUNDLED.len()
        ),
        start.elapsed(),
        Duration::from_secs(30),
    );
}

fn hyperboloid_config(radius: f64) -> ScenarioConfig {
    let mut cfg = config("minkowski-hyperboloid");
    cfg.chart = serde_json::from_str(&format!(r#"{{"name": "hyperboloid", "radius": {radius}}}"#)).unwrap();
    cfg.k_range = [0, 0];
    cfg.expect = Default::default();
    cfg.checks = Some(vec![curvest::harness::CheckGroup::Estimate]);
    cfg
}

#[test]
fn criterion_09_lorentzian_estimates() {
    const TOL_EQ: f64 = 1e-6;
    const TOL_GAP: f64 = 1e-6;
    const TOL_FAMILY: f64 = 1e-4;
    let start = Instant::now();
    let mut ok = true;

    let hyp = run(&config("minkowski-hyperboloid"));
    let mut eq_dev: f64 = 0.0;
    for k in 0..=1 {
        for ratio in hyp.samples.column(&format!("ratio_k{k}")).unwrap() {
            eq_dev = eq_dev.max((ratio - 0.5).abs());
        }
        ok &= status(&hyp.report, &format!("lorentz.equality.k{k}")) == Status::Pass;
    }
    ok &= eq_dev <= TOL_EQ;

    let pert = run(&config("perturbed-hyperboloid")).report;
    let (u_sup, u_inf) = (residual(&pert, "estimate.u_sup"), residual(&pert, "estimate.u_inf"));
    let upper = residual(&pert, "lorentz.upper.k0");
    let lower = residual(&pert, "lorentz.lower.k0");
    // b = 0: C^_0(t) = 1/t
    let middle = 1.0 / u_inf - 1.0 / u_sup;
    ok &= upper >= -TOL_GAP && middle >= -TOL_GAP && lower >= -TOL_GAP && u_sup > u_inf;
    ok &= status(&pert, "lorentz.sandwich.k0") == Status::Pass;

    let mut sups = Vec::new();
    for r in [1.0, 0.1, 0.01] {
        let rep = run(&hyperboloid_config(r)).report;
        let sup = residual(&rep, "lorentz.sup_ratio.k0");
        ok &= (sup - 1.0 / r).abs() <= TOL_FAMILY;
        sups.push(sup);
    }
    ok &= sups.windows(2).all(|w| w[1] > w[0]);
    report(
        9,
        "Lorentzian equality and sandwich",
        ok,
        format!(
            "hyperboloid r = 2: max |ratio - 0.5| = {eq_dev:.2e}; perturbed gaps ({upper:.3e}, {middle:.3e}, {lower:.3e}) >= -{TOL_GAP:.0e}; family sup ratio {sups:.4?} for r = 1, 0.1, 0.01"
        ),
        start.elapsed(),
        Duration::from_secs(30),
    );
}

#[test]
fn criterion_10_omori_yau() {
    const TOL: f64 = 1e-6;
    let start = Instant::now();
    let model = AmbientModel::euclidean(3).unwrap();
    let origin = DVector::zeros(3);
    let chart = GeodesicSphereChart::new(&model, &origin, 1.0).unwrap();
    let patch = HypersurfacePatch::new(Arc::new(chart), model, Orientation::Inner, Some(origin)).unwrap();
    let z = LinearField {
        coef: DVector::from_vec(vec![0.0, 0.0, 1.0]),
    };
    let rep = omori_yau_search(&patch, &z, OperatorSpec::Laplacian, 24, 6).unwrap();
    let r = &rep.refined;
    let ok = rep.all_found() && rep.outcomes.len() == 6 && r.grad_norm < TOL && r.q_lu <= TOL && (r.u - 1.0).abs() < 1e-9;
    report(
        10,
        "Omori-Yau sequence on the unit sphere, u = z, L = L_0",
        ok,
        format!(
            "candidates for j = 1..6: {}; refined max u = {:.12}, |grad u| = {:.2e}, q L u = {:.3e}",
            rep.all_found(),
            r.u,
            r.grad_norm,
            r.q_lu
        ),
        start.elapsed(),
        Duration::from_secs(10),
    );
}

#[test]
fn criterion_11_garding_and_p1_ellipticity() {
    const CASES: usize = 1000;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut chain_ok = 0;
    let mut worst_margin = f64::INFINITY;
    for i in 0..CASES {
        let n = 2 + i % 7;
        let kappa: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..5.0)).collect();
        let h = higher_mean_curvatures(&kappa, Signature::Riemannian);
        let chain = garding_chain(&h, n - 1).unwrap();
        if chain.holds {
            chain_ok += 1;
        }
        worst_margin = worst_margin.min(chain.margins.iter().copied().fold(f64::INFINITY, f64::min));
    }
    let mut mu_ok = 0;
    let mut min_mu = f64::INFINITY;
    let mut drawn = 0;
    while drawn < CASES {
        let n = 2 + drawn % 7;
        let kappa: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..3.0)).collect();
        let h = higher_mean_curvatures(&kappa, Signature::Riemannian);
        if !(h[1] > 0.0 && h[2] > 0.0) {
            continue;
        }
        drawn += 1;
        // mu_j = nH - kappa_j = sum of the other curvatures
        let s1: f64 = kappa.iter().sum();
        let nh = n as f64 * h[1];
        assert!((nh - s1).abs() < 1e-12 * s1.abs().max(1.0));
        let mu = kappa.iter().map(|k| nh - k).fold(f64::INFINITY, f64::min);
        min_mu = min_mu.min(mu);
        if mu > 0.0 {
            mu_ok += 1;
        }
    }
    let ok = chain_ok == CASES && mu_ok == CASES;
    report(
        11,
        "Garding chain and P_1 ellipticity",
        ok,
        format!(
            "chain holds on {chain_ok}/{CASES} positive spectra (min margin {worst_margin:.2e}); mu_j > 0 on {mu_ok}/{CASES} spectra with H, H_2 > 0 (min mu {min_mu:.2e})"
        ),
        start.elapsed(),
        Duration::from_secs(5),
    );
}
