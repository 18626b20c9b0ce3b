//! Scenario files, estimate checks and verification reports.
//!
//! A scenario names an ambient model, a chart and a range of `k`. [`run_scenario`]
//! samples the chart on a regular grid, evaluates `u = ρ ∘ f` and the curvature
//! profile at every sample, and turns the estimates into check records. Each
//! record carries the statement it tests as its anchor.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::comparison::{c_b, c_hat_b};
use crate::curvature::{garding_chain, gauss_identities, CurvatureProfile, NewtonFamily, ELLIPTIC_TOL};
use crate::immersion::{frame_at, sample_grid, ChartSpec, HypersurfacePatch, JetMode, Orientation, Sample};
use crate::operators::{
    decomposition_defect, field_at, intrinsic_hessian_fd, key_inequality_rhs, l_k_apply, omori_yau_search,
    refine_max, DistanceField, OperatorSpec, ScalarField, DEFAULT_J_MAX,
};
use crate::spaceform::{AmbientModel, ModelKind, Signature};
use crate::{Error, Result};

/// Smallest grid resolution accepted for a scenario.
pub const MIN_RESOLUTION: usize = 8;
/// Samples with `H_k` at or below this are left out of ratio estimates.
pub const RATIO_EXCLUSION: f64 = 1e-9;
/// Excluding more than this share of samples makes an estimate inconclusive.
pub const MAX_EXCLUSION_RATE: f64 = 0.1;
/// Agreement required between the two Hessian routes.
pub const ROUTE_TOL: f64 = 1e-4;
pub const DECOMPOSITION_TOL: f64 = 1e-8;
/// Gradient and `q L u` bound at the refined maximum of the Omori-Yau search.
pub const OMORI_YAU_TOL: f64 = 1e-6;
const REFINE_ROUNDS: usize = 14;

const PLUMBING: &str = "plumbing";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Bound on `|measured - predicted|` in equality cases.
    pub equality: f64,
    /// Inequality margins must exceed `-inequality`.
    pub inequality: f64,
}

impl Tolerances {
    pub fn for_jets(jets: JetMode) -> Self {
        Tolerances {
            equality: match jets {
                JetMode::Analytic => 1e-6,
                JetMode::FiniteDifference => 1e-3,
            },
            inequality: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expectation {
    /// The estimate is sharp on this geometry.
    Equality,
    /// The estimate holds with a positive margin.
    Strict,
    #[default]
    Inequality,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckGroup {
    /// Hessian routes, gradient decomposition and the key identity.
    Restriction,
    /// The Riemannian or Lorentzian estimates, whichever the signature selects.
    Estimate,
    /// The `k = 1` consequences for `H_2` and scalar curvature.
    H2,
    OmoriYau,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmbientSpec {
    pub signature: Signature,
    pub curvature: f64,
    pub dimension: usize,
    pub model_kind: ModelKind,
    /// Center of the chart; the model base point when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    /// Radius of a ball about the reference point asserted to contain `f(M)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub ambient: AmbientSpec,
    pub chart: ChartSpec,
    /// Inner for Riemannian and future for Lorentzian scenarios when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orientation: Option<Orientation>,
    /// Point `o` that `ρ` measures from; the center when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_point: Option<Vec<f64>>,
    /// Inclusive range of `k`.
    pub k_range: [usize; 2],
    pub resolution: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<Tolerances>,
    #[serde(default)]
    pub jets: JetMode,
    #[serde(default)]
    pub expect: Expectation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checks: Option<Vec<CheckGroup>>,
    #[serde(default)]
    pub outputs: Outputs,
}

impl ScenarioConfig {
    /// Parse and validate. Errors name the offending line, column and field.
    pub fn from_json(text: &str) -> Result<Self> {
        let config: ScenarioConfig = serde_json::from_str(text).map_err(|e| Error::Usage(format!("malformed scenario: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn model(&self) -> Result<AmbientModel> {
        let a = &self.ambient;
        AmbientModel::new(a.signature, a.curvature, a.dimension, a.model_kind).map_err(|e| Error::Usage(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let model = self.model()?;
        let n = model.hypersurface_dim();
        let [lo, hi] = self.k_range;
        if lo > hi || hi > n - 1 {
            return Err(Error::Usage(format!(
                "k_range [{lo}, {hi}] is invalid: k must lie in [0, n-1] = [0, {}]",
                n - 1
            )));
        }
        if self.resolution < MIN_RESOLUTION {
            return Err(Error::Usage(format!(
                "resolution {} is below the minimum of {MIN_RESOLUTION} per axis",
                self.resolution
            )));
        }
        if let Some(t) = &self.tolerances {
            if !(t.equality > 0.0 && t.inequality >= 0.0) {
                return Err(Error::Usage("tolerances must be positive".into()));
            }
        }
        let m = model.embedding_dim();
        for (what, v) in [("ambient.center", &self.ambient.center), ("reference_point", &self.reference_point)] {
            if let Some(v) = v {
                if v.len() != m {
                    return Err(Error::Usage(format!("{what} needs {m} coordinates, got {}", v.len())));
                }
            }
        }
        Ok(())
    }

    pub fn tolerances(&self) -> Tolerances {
        self.tolerances.unwrap_or_else(|| Tolerances::for_jets(self.jets))
    }

    pub fn ks(&self) -> std::ops::RangeInclusive<usize> {
        self.k_range[0]..=self.k_range[1]
    }

    /// Groups run when `checks` is absent: restriction and estimate always, the
    /// `H_2` checks when `k = 1` is in range on a Riemannian scenario, and the
    /// Omori-Yau search on closed charts.
    pub fn check_groups(&self) -> BTreeSet<CheckGroup> {
        if let Some(list) = &self.checks {
            return list.iter().copied().collect();
        }
        let mut out = BTreeSet::from([CheckGroup::Restriction, CheckGroup::Estimate]);
        if self.ambient.signature == Signature::Riemannian {
            if self.ks().contains(&1) {
                out.insert(CheckGroup::H2);
            }
            let closed = matches!(
                self.chart,
                ChartSpec::Sphere { .. } | ChartSpec::Ellipsoid { .. } | ChartSpec::GeodesicSphere { .. }
            );
            if closed {
                out.insert(CheckGroup::OmoriYau);
            }
        }
        out
    }
}

/// Scenarios shipped with the crate, as `(name, json)`.
pub const BUNDLED: &[(&str, &str)] = &[
    ("sphere-equality", include_str!("../scenarios/sphere-equality.json")),
    ("ellipsoid", include_str!("../scenarios/ellipsoid.json")),
    ("sphere-in-sphere", include_str!("../scenarios/sphere-in-sphere.json")),
    ("hyperbolic-sphere", include_str!("../scenarios/hyperbolic-sphere.json")),
    ("sphere-fd", include_str!("../scenarios/sphere-fd.json")),
    ("cylinder", include_str!("../scenarios/cylinder.json")),
    ("graph", include_str!("../scenarios/graph.json")),
    ("minkowski-hyperboloid", include_str!("../scenarios/minkowski-hyperboloid.json")),
    ("perturbed-hyperboloid", include_str!("../scenarios/perturbed-hyperboloid.json")),
];

/// Look up a bundled scenario by name, with or without a `.json` suffix.
pub fn bundled(name: &str) -> Option<&'static str> {
    let key = name.strip_suffix(".json").unwrap_or(name);
    BUNDLED.iter().find(|(n, _)| *n == key).map(|(_, text)| *text)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Inconclusive,
    HypothesisViolation,
    Informational,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub id: String,
    /// The statement checked, or "plumbing".
    pub anchor: String,
    pub status: Status,
    /// Residual or margin; `null` when not finite.
    pub residual: Option<f64>,
    pub worst_sample: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub resolution: usize,
    pub tol: Tolerances,
    pub jets: JetMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub scenario: String,
    pub checks: Vec<CheckRecord>,
    pub env: Environment,
    pub timing_ms: u64,
}

impl VerificationReport {
    pub fn check(&self, id: &str) -> Option<&CheckRecord> {
        self.checks.iter().find(|c| c.id == id)
    }

    /// 2 on any hypothesis violation, else 1 on any failure or inconclusive check, else 0.
    pub fn exit_code(&self) -> i32 {
        let has = |s: Status| self.checks.iter().any(|c| c.status == s);
        if has(Status::HypothesisViolation) {
            2
        } else if has(Status::Fail) || has(Status::Inconclusive) {
            1
        } else {
            0
        }
    }

    pub fn all_pass(&self) -> bool {
        self.exit_code() == 0
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("id,anchor,status,residual,worst_sample\n");
        for c in &self.checks {
            let status = serde_json::to_value(c.status).expect("status serializes");
            let worst = c
                .worst_sample
                .as_ref()
                .map(|p| p.iter().map(|x| format!("{x:.17e}")).collect::<Vec<_>>().join(" "))
                .unwrap_or_default();
            let _ = writeln!(
                out,
                "{},\"{}\",{},{},{}",
                c.id,
                c.anchor.replace('"', "\"\""),
                status.as_str().unwrap_or_default(),
                c.residual.map(|r| format!("{r:.17e}")).unwrap_or_default(),
                worst
            );
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Json,
    Csv,
}

pub fn emit_report(report: &VerificationReport, path: &Path, format: ReportFormat) -> Result<()> {
    let text = match format {
        ReportFormat::Json => report.to_json() + "\n",
        ReportFormat::Csv => report.to_csv(),
    };
    std::fs::write(path, text).map_err(|e| Error::Usage(format!("cannot write {}: {e}", path.display())))
}

/// Per-sample values in grid order.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl SampleTable {
    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|x| format!("{x:.17e}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::Usage(format!("cannot write {}: {e}", path.display())))
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub report: VerificationReport,
    pub samples: SampleTable,
}

/// Everything the checks need at one grid point.
#[derive(Debug, Clone)]
struct Eval {
    params: Vec<f64>,
    u: f64,
    grad_norm: f64,
    decomposition: f64,
    route_gap: Option<f64>,
    profile: CurvatureProfile,
    /// Indexed by `k - k_lo`.
    lk: Vec<f64>,
    key_residual: Vec<f64>,
}

struct Context<'a> {
    config: &'a ScenarioConfig,
    model: AmbientModel,
    patch: HypersurfacePatch,
    field: DistanceField,
    tol: Tolerances,
    step: Vec<f64>,
    evals: Vec<Eval>,
    /// Grid points dropped because the immersion is not spacelike there.
    non_spacelike: Vec<Vec<f64>>,
    /// Grid points where `ρ` is not smooth.
    off_domain: Vec<Vec<f64>>,
    total: usize,
}

/// Build the patch and run every selected check group.
pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioRun> {
    run_scenario_in(config, None)
}

/// As [`run_scenario`], resolving relative tabulated chart paths against `base_dir`.
pub fn run_scenario_in(config: &ScenarioConfig, base_dir: Option<&Path>) -> Result<ScenarioRun> {
    let started = Instant::now();
    config.validate()?;
    let model = config.model()?;
    let center = match &config.ambient.center {
        Some(c) => DVector::from_column_slice(c),
        None => model.base_point().into_inner(),
    };
    let reference = config
        .reference_point
        .as_ref()
        .map(|r| DVector::from_column_slice(r))
        .unwrap_or_else(|| center.clone());
    let chart = config.chart.build(&model, &center, base_dir).map_err(usage)?;
    let orientation = config.orientation.unwrap_or(match model.signature() {
        Signature::Riemannian => Orientation::Inner,
        Signature::Lorentzian => Orientation::Future,
    });
    let patch = HypersurfacePatch::new(chart, model, orientation, Some(reference.clone()))
        .map_err(usage)?
        .with_jets(config.jets);
    let groups = config.check_groups();
    let ctx = Context::new(config, model, patch, DistanceField { center: reference }, groups.contains(&CheckGroup::Restriction))?;

    let mut checks = ctx.hypothesis_checks();
    if groups.contains(&CheckGroup::Restriction) {
        checks.extend(ctx.restriction_checks()?);
    }
    if groups.contains(&CheckGroup::Estimate) {
        match model.signature() {
            Signature::Riemannian => checks.extend(ctx.riemannian_checks()?),
            Signature::Lorentzian => checks.extend(ctx.lorentz_checks()?),
        }
    }
    if groups.contains(&CheckGroup::H2) {
        checks.extend(ctx.h2_checks()?);
    }
    if groups.contains(&CheckGroup::OmoriYau) {
        checks.extend(ctx.omori_yau_checks()?);
    }
    let samples = ctx.sample_table();
    Ok(ScenarioRun {
        report: VerificationReport {
            scenario: config.name.clone(),
            checks,
            env: Environment {
                resolution: config.resolution,
                tol: ctx.tol,
                jets: config.jets,
            },
            timing_ms: started.elapsed().as_millis() as u64,
        },
        samples,
    })
}

fn usage(e: Error) -> Error {
    match e {
        Error::Precondition(m) | Error::Domain(m) => Error::Usage(m),
        other => other,
    }
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

fn record(id: String, anchor: &str, status: Status, residual: f64, worst: Option<Vec<f64>>) -> CheckRecord {
    CheckRecord {
        id,
        anchor: anchor.to_string(),
        status,
        residual: finite(residual),
        worst_sample: worst,
    }
}

fn pass_if(ok: bool) -> Status {
    if ok {
        Status::Pass
    } else {
        Status::Fail
    }
}

/// Extremum of `f` over the grid followed by stencil refinement.
struct Extremum {
    value: f64,
    at: Vec<f64>,
}

impl<'a> Context<'a> {
    fn new(
        config: &'a ScenarioConfig,
        model: AmbientModel,
        patch: HypersurfacePatch,
        field: DistanceField,
        with_routes: bool,
    ) -> Result<Self> {
        let domain = patch.chart.domain();
        let step = (0..domain.dim())
            .map(|a| domain.width(a) / (config.resolution - 1) as f64)
            .collect();
        let grid = sample_grid(&patch, config.resolution)?;
        let total = grid.samples.len() + grid.skipped.len();
        let non_spacelike = grid
            .skipped
            .iter()
            .filter(|(_, e)| model.signature() == Signature::Lorentzian && matches!(e, Error::Signature(_)))
            .map(|(p, _)| p.clone())
            .collect();
        let mut ctx = Context {
            config,
            model,
            patch,
            field,
            tol: config.tolerances(),
            step,
            evals: Vec::with_capacity(grid.samples.len()),
            non_spacelike,
            off_domain: Vec::new(),
            total,
        };
        for s in &grid.samples {
            match ctx.evaluate(s, with_routes) {
                Ok(e) => ctx.evals.push(e),
                Err(Error::Domain(_) | Error::UndefinedGradient { .. }) => ctx.off_domain.push(s.params.clone()),
                Err(e) => return Err(e),
            }
        }
        if ctx.evals.is_empty() {
            return Err(Error::EmptySample { skipped: total });
        }
        Ok(ctx)
    }

    fn evaluate(&self, s: &Sample, with_routes: bool) -> Result<Eval> {
        let frame = &s.frame;
        let point = field_at(&self.patch, frame, &self.field)?;
        let family = NewtonFamily::new(&frame.ortho_shape, self.model.signature())?;
        let profile = CurvatureProfile::new(&frame.principal_curvatures, self.model.signature());
        let route_gap = if with_routes {
            let intrinsic = intrinsic_hessian_fd(&self.patch, &self.field, &s.params)?;
            Some(frame.ortho_form(&(&point.hess_chart - &intrinsic)).amax())
        } else {
            None
        };
        let mut lk = Vec::new();
        let mut key_residual = Vec::new();
        for k in self.config.ks() {
            let lhs = l_k_apply(&family, k, &point.hess_ortho)?;
            let rhs = key_inequality_rhs(&self.model, &family, &point, k)?;
            lk.push(lhs);
            key_residual.push((lhs - rhs) / lhs.abs().max(rhs.abs()).max(1.0));
        }
        Ok(Eval {
            params: s.params.clone(),
            u: point.u,
            grad_norm: point.grad_norm,
            decomposition: decomposition_defect(self.model.signature(), &point),
            route_gap,
            profile,
            lk,
            key_residual,
        })
    }

    fn ki(&self, k: usize) -> usize {
        k - self.config.k_range[0]
    }

    fn profile_at(&self, p: &[f64]) -> Option<(f64, CurvatureProfile)> {
        let frame = frame_at(&self.patch, p).ok()?;
        let u = self.field.value(&self.model, &frame.position).ok()?;
        Some((u, CurvatureProfile::new(&frame.principal_curvatures, self.model.signature())))
    }

    /// Supremum (or infimum when `maximize` is false) of `f(u, profile)` over the
    /// samples, refined from the best grid point.
    fn extremum(&self, f: &dyn Fn(f64, &CurvatureProfile) -> Option<f64>, maximize: bool) -> Option<Extremum> {
        let sign = if maximize { 1.0 } else { -1.0 };
        let start = self
            .evals
            .iter()
            .filter_map(|e| f(e.u, &e.profile).map(|v| (e, sign * v)))
            .max_by(|a, b| a.1.total_cmp(&b.1))?;
        let g = |p: &[f64]| {
            let (u, prof) = self.profile_at(p)?;
            f(u, &prof).map(|v| sign * v)
        };
        let (at, v) = refine_max(&self.patch, &g, &start.0.params, &self.step, REFINE_ROUNDS);
        let (at, v) = if v >= start.1 { (at, v) } else { (start.0.params.clone(), start.1) };
        Some(Extremum { value: sign * v, at })
    }

    fn newton_hypothesis(&self, k: usize) -> Option<Vec<f64>> {
        self.evals
            .iter()
            .find(|e| !(e.profile.definiteness(k).is_semidefinite() && e.profile.trace_newton(k) > ELLIPTIC_TOL))
            .map(|e| e.params.clone())
    }

    fn hypothesis_checks(&self) -> Vec<CheckRecord> {
        let mut out = Vec::new();
        out.push(record(
            "sampling.coverage".into(),
            PLUMBING,
            Status::Informational,
            (self.evals.len() as f64) / (self.total as f64),
            None,
        ));
        if self.model.signature() == Signature::Lorentzian {
            let bad = self.non_spacelike.first().cloned();
            out.push(record(
                "hypothesis.spacelike".into(),
                "f(M) is spacelike",
                if bad.is_some() { Status::HypothesisViolation } else { Status::Pass },
                self.non_spacelike.len() as f64,
                bad,
            ));
        }
        let bad = self.off_domain.first().cloned();
        let anchor = match self.model.signature() {
            Signature::Riemannian => "rho is smooth along f(M)",
            Signature::Lorentzian => "f(M) lies in the chronological future of o where rho is smooth",
        };
        out.push(record(
            "hypothesis.distance_domain".into(),
            anchor,
            if bad.is_some() { Status::HypothesisViolation } else { Status::Pass },
            self.off_domain.len() as f64,
            bad,
        ));
        out
    }

    fn restriction_checks(&self) -> Result<Vec<CheckRecord>> {
        let lorentz = self.model.signature() == Signature::Lorentzian;
        let mut out = Vec::new();
        let worst = |f: &dyn Fn(&Eval) -> f64| {
            self.evals
                .iter()
                .map(|e| (f(e), e))
                .max_by(|a, b| a.0.total_cmp(&b.0))
                .map(|(v, e)| (v, e.params.clone()))
                .expect("samples are non-empty")
        };
        let (gap, at) = worst(&|e| e.route_gap.unwrap_or(f64::NAN));
        out.push(record(
            "restriction.routes".into(),
            if lorentz {
                "Hess u(X,Y) = Hess rho(X,Y) - sqrt(1 + |grad u|^2) <AX,Y>"
            } else {
                "Hess u(X,Y) = Hess rho(X,Y) + <grad rho, N> <AX,Y>"
            },
            pass_if(gap <= ROUTE_TOL),
            gap,
            Some(at),
        ));
        let decomposition_tol = match self.config.jets {
            JetMode::Analytic => DECOMPOSITION_TOL,
            JetMode::FiniteDifference => self.tol.equality,
        };
        let (defect, at) = worst(&|e| e.decomposition.abs());
        out.push(record(
            "restriction.decomposition".into(),
            if lorentz {
                "grad rho = grad u - sqrt(1 + |grad u|^2) N"
            } else {
                "grad rho = grad u + <grad rho, N> N, |grad u|^2 + <grad rho, N>^2 = 1"
            },
            pass_if(defect <= decomposition_tol),
            defect,
            Some(at),
        ));
        for k in self.config.ks() {
            let i = self.ki(k);
            let (res, at) = worst(&|e| e.key_residual[i].abs());
            out.push(record(
                format!("key_identity.k{k}"),
                if lorentz {
                    "L_k u = -C^_b(u)(c_k H_k + <P_k grad u, grad u>) + c_k H_{k+1} sqrt(1 + |grad u|^2)"
                } else {
                    "L_k u = C_b(u)(c_k H_k - <P_k grad u, grad u>) + c_k H_{k+1} <grad rho, N>"
                },
                pass_if(res <= self.tol.equality),
                res,
                Some(at),
            ));
            if self.config.expect == Expectation::Equality {
                let (lk, at) = worst(&|e| e.lk[i].abs());
                out.push(record(
                    format!("lk_vanishes.k{k}"),
                    "L_k u = 0 on a level set of rho",
                    pass_if(lk <= self.tol.equality),
                    lk,
                    Some(at),
                ));
            }
        }
        Ok(out)
    }

    /// Refined `max u`, or `min u` when `maximize` is false.
    fn u_extremum(&self, maximize: bool) -> Extremum {
        self.extremum(&|u, _| Some(u), maximize).expect("samples are non-empty")
    }

    fn ratio_stats(&self, k: usize) -> (usize, f64) {
        let excluded = self.evals.iter().filter(|e| !(e.profile.h[k] > RATIO_EXCLUSION)).count();
        (excluded, excluded as f64 / self.evals.len() as f64)
    }

    fn riemannian_checks(&self) -> Result<Vec<CheckRecord>> {
        let b = self.model.curvature();
        let tol = self.tol;
        let expect = self.config.expect;
        let mut out = Vec::new();
        let top = self.u_extremum(true);
        let r = top.value;
        let ball_ok = match self.config.ambient.radius {
            Some(radius) => {
                let ok = r <= radius + tol.inequality;
                out.push(record(
                    "hypothesis.ball".into(),
                    "f(M) is contained in B(r)",
                    if ok { Status::Pass } else { Status::HypothesisViolation },
                    radius - r,
                    Some(top.at.clone()),
                ));
                ok
            }
            None => true,
        };
        let cb = match c_b(b, r) {
            Ok(v) => v,
            Err(_) => {
                out.push(record(
                    "hypothesis.radius".into(),
                    "r < pi / (2 sqrt(b)) when b > 0",
                    Status::HypothesisViolation,
                    r,
                    Some(top.at),
                ));
                return Ok(out);
            }
        };
        out.push(record("estimate.radius".into(), PLUMBING, Status::Informational, r, Some(top.at.clone())));

        let elliptic_points: Vec<&Eval> = self.evals.iter().filter(|e| e.profile.is_elliptic()).collect();
        let mut sphere_gap: f64 = 0.0;
        for k in self.config.ks() {
            let hyp = self.newton_hypothesis(k);
            out.push(record(
                format!("hypothesis.newton.k{k}"),
                "P_k is positive semi-definite and tr P_k > 0",
                if hyp.is_some() { Status::HypothesisViolation } else { Status::Pass },
                f64::NAN,
                hyp.clone(),
            ));
            let gate = |s: Status| {
                if hyp.is_some() || !ball_ok {
                    Status::HypothesisViolation
                } else {
                    s
                }
            };
            let ratio = move |_u: f64, p: &CurvatureProfile| (p.h[k] > RATIO_EXCLUSION).then(|| p.h[k + 1].abs() / p.h[k]);
            let (excluded, rate) = self.ratio_stats(k);
            let anchor = "sup |H_{k+1}|/H_k >= C_b(r)";
            match self.extremum(&ratio, true) {
                None => out.push(record(format!("estimate.ratio.k{k}"), anchor, gate(Status::Inconclusive), f64::NAN, None)),
                Some(sup) => {
                    let margin = sup.value - cb;
                    let status = if rate > MAX_EXCLUSION_RATE {
                        Status::Inconclusive
                    } else {
                        match expect {
                            Expectation::Strict => pass_if(margin > tol.inequality),
                            _ => pass_if(margin >= -tol.inequality),
                        }
                    };
                    out.push(record(format!("estimate.ratio.k{k}"), anchor, gate(status), margin, Some(sup.at.clone())));
                    out.push(record(
                        format!("estimate.excluded.k{k}"),
                        PLUMBING,
                        Status::Informational,
                        excluded as f64,
                        None,
                    ));
                    if expect == Expectation::Equality {
                        let (dev, at) = self
                            .evals
                            .iter()
                            .filter_map(|e| ratio(e.u, &e.profile).map(|v| ((v - cb).abs(), e)))
                            .max_by(|a, b| a.0.total_cmp(&b.0))
                            .map(|(v, e)| (v.max((sup.value - cb).abs()), e.params.clone()))
                            .unwrap_or((f64::NAN, sup.at.clone()));
                        sphere_gap = sphere_gap.max(dev);
                        out.push(record(
                            format!("estimate.equality.k{k}"),
                            "|H_{k+1}|/H_k = C_b(r) on the geodesic sphere S(r)",
                            gate(pass_if(dev <= tol.equality)),
                            dev,
                            Some(at),
                        ));
                    }
                }
            }

            let sup_next = self.extremum(&|_, p| Some(p.h[k + 1].abs()), true).expect("samples are non-empty");
            let inf_hk = self.extremum(&|_, p| Some(p.h[k]), false).expect("samples are non-empty");
            let margin = sup_next.value - cb * inf_hk.value.max(0.0);
            out.push(record(
                format!("estimate.product.k{k}"),
                "sup |H_{k+1}| >= C_b(r) inf H_k",
                gate(pass_if(margin >= -tol.inequality)),
                margin,
                Some(sup_next.at),
            ));

            if k >= 1 {
                let id = format!("estimate.elliptic_root.k{k}");
                let anchor = "elliptic point: sup H_{k+1}^{1/(k+1)} >= sup H_{k+1}/H_k (K_M bounded below: sampled-only)";
                if elliptic_points.is_empty() {
                    out.push(record(id, anchor, Status::Informational, f64::NAN, None));
                } else {
                    let root = self
                        .extremum(
                            &|_, p| (p.h[k + 1] > 0.0).then(|| p.h[k + 1].powf(1.0 / (k + 1) as f64)),
                            true,
                        )
                        .expect("an elliptic point has H_{k+1} > 0");
                    let quotient = self
                        .extremum(&|_, p| (p.h[k] > RATIO_EXCLUSION).then(|| p.h[k + 1] / p.h[k]), true)
                        .expect("an elliptic point has H_k > 0");
                    let margin = root.value - quotient.value;
                    out.push(record(id, anchor, pass_if(margin >= -tol.inequality), margin, Some(root.at)));

                    let mut chain_margin = f64::INFINITY;
                    let mut chain_at = None;
                    let mut chain_ok = true;
                    for e in &elliptic_points {
                        let chain = garding_chain(&e.profile.h, k)?;
                        chain_ok &= chain.holds;
                        let m = chain.margins.iter().copied().fold(f64::INFINITY, f64::min);
                        if m < chain_margin {
                            chain_margin = m;
                            chain_at = Some(e.params.clone());
                        }
                    }
                    out.push(record(
                        format!("garding.k{k}"),
                        "H_1 >= H_2^{1/2} >= ... >= H_{k+1}^{1/(k+1)} > 0 at elliptic points",
                        pass_if(chain_ok),
                        chain_margin,
                        chain_at,
                    ));
                }
            }
        }
        out.push(record(
            "estimate.rigidity".into(),
            "consistency: equality measured only on round-sphere scenarios",
            Status::Informational,
            if expect == Expectation::Equality { sphere_gap } else { f64::NAN },
            None,
        ));
        Ok(out)
    }

    fn h2_checks(&self) -> Result<Vec<CheckRecord>> {
        let tol = self.tol.inequality;
        let b = self.model.curvature();
        let n = self.model.hypersurface_dim();
        let bad = self.evals.iter().find(|e| !(e.profile.h[2] > 0.0)).map(|e| e.params.clone());
        let gate = |s: Status| if bad.is_some() { Status::HypothesisViolation } else { s };
        let mut out = vec![record(
            "hypothesis.h2_positive".into(),
            "H_2 > 0",
            gate(Status::Pass),
            self.extremum(&|_, p| Some(p.h[2]), false).map(|m| m.value).unwrap_or(f64::NAN),
            bad.clone(),
        )];
        if bad.is_some() {
            return Ok(out);
        }
        let r = self.u_extremum(true).value;
        let cb = c_b(b, r)?;
        let root = self.extremum(&|_, p| Some(p.h[2].sqrt()), true).expect("samples are non-empty");
        let quotient = self
            .extremum(&|_, p| (p.h[1].abs() > RATIO_EXCLUSION).then(|| p.h[2] / p.h[1]), true)
            .ok_or_else(|| Error::Numerical("H vanishes at every sample".into()))?;
        let m1 = root.value - quotient.value;
        out.push(record(
            "h2.root_vs_ratio".into(),
            "sup sqrt(H_2) >= sup H_2/H",
            pass_if(m1 >= -tol),
            m1,
            Some(root.at),
        ));
        let m2 = quotient.value - cb;
        out.push(record(
            "h2.ratio_vs_bound".into(),
            "sup H_2/H >= C_b(r)",
            pass_if(m2 >= -tol),
            m2,
            Some(quotient.at),
        ));
        let s = |_: f64, p: &CurvatureProfile| gauss_identities(&p.kappa, b).ok().map(|g| g.normalized_scalar);
        let sup_s = self.extremum(&s, true).expect("n >= 2");
        let inf_h = self.extremum(&|_, p| Some(p.h[1]), false).expect("samples are non-empty");
        let m3 = sup_s.value - (b + cb * inf_h.value);
        out.push(record(
            "h2.scalar".into(),
            "sup s >= b + C_b(r) inf H, s = b + H_2",
            pass_if(m3 >= -tol),
            m3,
            Some(sup_s.at),
        ));
        let mu = |_: f64, p: &CurvatureProfile| {
            let nh = n as f64 * p.h[1];
            Some(p.kappa.iter().map(|k| nh - k).fold(f64::INFINITY, f64::min))
        };
        let (min_mu, at) = self
            .evals
            .iter()
            .map(|e| (mu(e.u, &e.profile).unwrap_or(f64::NAN), e))
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .map(|(v, e)| (v, e.params.clone()))
            .expect("samples are non-empty");
        out.push(record(
            "h2.p1_positive".into(),
            "mu_j = nH - kappa_j > 0",
            pass_if(min_mu > 0.0),
            min_mu,
            Some(at),
        ));
        Ok(out)
    }

    fn lorentz_checks(&self) -> Result<Vec<CheckRecord>> {
        let b = self.model.curvature();
        let tol = self.tol;
        let mut out = Vec::new();
        let u_sup = self.u_extremum(true);
        let u_inf = self.u_extremum(false);
        out.push(record("estimate.u_sup".into(), PLUMBING, Status::Informational, u_sup.value, Some(u_sup.at.clone())));
        out.push(record("estimate.u_inf".into(), PLUMBING, Status::Informational, u_inf.value, Some(u_inf.at.clone())));
        let (c_sup, c_inf) = match (c_hat_b(b, u_sup.value), c_hat_b(b, u_inf.value)) {
            (Ok(a), Ok(c)) => (a, c),
            _ => {
                out.push(record(
                    "hypothesis.radius".into(),
                    "u < pi / (2 sqrt(-b)) when b < 0, u > 0",
                    Status::HypothesisViolation,
                    u_sup.value,
                    Some(u_sup.at),
                ));
                return Ok(out);
            }
        };
        let spacelike_ok = self.non_spacelike.is_empty() && self.off_domain.is_empty();
        for k in self.config.ks() {
            let hyp = self.newton_hypothesis(k);
            out.push(record(
                format!("hypothesis.newton.k{k}"),
                "P_k is positive semi-definite and tr P_k > 0",
                if hyp.is_some() { Status::HypothesisViolation } else { Status::Pass },
                f64::NAN,
                hyp.clone(),
            ));
            let gate = |s: Status| {
                if hyp.is_some() || !spacelike_ok {
                    Status::HypothesisViolation
                } else {
                    s
                }
            };
            let ratio = move |_u: f64, p: &CurvatureProfile| (p.h[k] > RATIO_EXCLUSION).then(|| p.h[k + 1] / p.h[k]);
            let (Some(inf), Some(sup)) = (self.extremum(&ratio, false), self.extremum(&ratio, true)) else {
                out.push(record(
                    format!("lorentz.sandwich.k{k}"),
                    "inf H_{k+1}/H_k <= C^_b(u*) <= C^_b(u_*) <= sup H_{k+1}/H_k",
                    gate(Status::Inconclusive),
                    f64::NAN,
                    None,
                ));
                continue;
            };
            let (_, rate) = self.ratio_stats(k);
            let judge = |m: f64| {
                if rate > MAX_EXCLUSION_RATE {
                    Status::Inconclusive
                } else {
                    pass_if(m >= -tol.inequality)
                }
            };
            let upper = c_sup - inf.value;
            let middle = c_inf - c_sup;
            let lower = sup.value - c_inf;
            out.push(record(
                format!("lorentz.upper.k{k}"),
                "inf H_{k+1}/H_k <= C^_b(u*), u* = sup u",
                gate(judge(upper)),
                upper,
                Some(inf.at.clone()),
            ));
            out.push(record(
                format!("lorentz.lower.k{k}"),
                "sup H_{k+1}/H_k >= C^_b(u_*), u_* = inf u",
                gate(judge(lower)),
                lower,
                Some(sup.at.clone()),
            ));
            let all = upper.min(middle).min(lower);
            out.push(record(
                format!("lorentz.sandwich.k{k}"),
                "inf H_{k+1}/H_k <= C^_b(u*) <= C^_b(u_*) <= sup H_{k+1}/H_k",
                gate(judge(all)),
                all,
                None,
            ));
            out.push(record(
                format!("lorentz.sup_ratio.k{k}"),
                PLUMBING,
                Status::Informational,
                sup.value,
                Some(sup.at.clone()),
            ));
            out.push(record(
                format!("lorentz.outer_ball.k{k}"),
                "sup H_{k+1}/H_k < +inf gives f(M) in O+(o, delta) with delta = u_* > 0",
                Status::Informational,
                u_inf.value,
                Some(u_inf.at.clone()),
            ));
            if self.config.expect == Expectation::Equality {
                let dev = (sup.value - c_sup).abs().max((inf.value - c_sup).abs()).max((c_inf - c_sup).abs());
                out.push(record(
                    format!("lorentz.equality.k{k}"),
                    "H_{k+1}/H_k = C^_b(u) on a level set of rho",
                    gate(pass_if(dev <= tol.equality)),
                    dev,
                    Some(sup.at.clone()),
                ));
            }
        }
        Ok(out)
    }

    fn omori_yau_checks(&self) -> Result<Vec<CheckRecord>> {
        let mut out = Vec::new();
        for k in self.config.ks() {
            let report = omori_yau_search(
                &self.patch,
                &self.field,
                OperatorSpec::Newton(k),
                self.config.resolution,
                DEFAULT_J_MAX,
            )?;
            let refined = &report.refined;
            let ok = report.all_found() && refined.grad_norm < OMORI_YAU_TOL && refined.q_lu <= OMORI_YAU_TOL;
            out.push(record(
                format!("omori_yau.k{k}"),
                "u(p_j) > u* - 1/j, |grad u(p_j)| < 1/j, q L u(p_j) < 1/j",
                pass_if(ok),
                refined.grad_norm.max(refined.q_lu),
                Some(refined.param.clone()),
            ));
        }
        Ok(out)
    }

    fn sample_table(&self) -> SampleTable {
        let n = self.model.hypersurface_dim();
        let mut header: Vec<String> = (0..n).map(|a| format!("p{a}")).collect();
        header.extend(["u".into(), "grad_norm".into()]);
        header.extend((0..=n).map(|j| format!("H{j}")));
        for k in self.config.ks() {
            header.extend([
                format!("ratio_k{k}"),
                format!("lk_k{k}"),
                format!("q_lk_k{k}"),
                format!("key_residual_k{k}"),
            ]);
        }
        let rows = self
            .evals
            .iter()
            .map(|e| {
                let mut row = e.params.clone();
                row.extend([e.u, e.grad_norm]);
                row.extend(e.profile.h.iter().copied());
                for k in self.config.ks() {
                    let i = self.ki(k);
                    let hk = e.profile.h[k];
                    let ratio = if hk > RATIO_EXCLUSION {
                        match self.model.signature() {
                            Signature::Riemannian => e.profile.h[k + 1].abs() / hk,
                            Signature::Lorentzian => e.profile.h[k + 1] / hk,
                        }
                    } else {
                        f64::NAN
                    };
                    let trace = e.profile.trace_newton(k);
                    let q_lk = if trace > ELLIPTIC_TOL { e.lk[i] / trace } else { f64::NAN };
                    row.extend([ratio, e.lk[i], q_lk, e.key_residual[i]]);
                }
                row
            })
            .collect();
        SampleTable { header, rows }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere_config(radius: f64, k_range: [usize; 2]) -> ScenarioConfig {
        ScenarioConfig::from_json(&format!(
            r#"{{
                "name": "sphere",
                "ambient": {{"signature": "riemannian", "curvature": 0, "dimension": 3, "model_kind": "euclidean"}},
                "chart": {{"name": "sphere", "radius": {radius}}},
                "k_range": [{}, {}],
                "resolution": 9,
                "expect": "equality"
            }}"#,
            k_range[0], k_range[1]
        ))
        .unwrap()
    }

    #[test]
    fn every_bundled_scenario_parses() {
        for (name, text) in BUNDLED {
            let cfg = ScenarioConfig::from_json(text).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(&cfg.name, name);
        }
        assert!(bundled("ellipsoid.json").is_some());
        assert!(bundled("nope").is_none());
    }

    #[test]
    fn k_equal_n_is_a_usage_error_naming_the_range() {
        let text = bundled("sphere-equality").unwrap().replace("\"k_range\": [0, 1]", "\"k_range\": [2, 2]");
        match ScenarioConfig::from_json(&text) {
            Err(Error::Usage(m)) => assert!(m.contains("[0, 1]"), "{m}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_field_reports_its_name_and_line() {
        let text = "{\n \"name\": \"x\",\n \"bogus\": 1\n}";
        match ScenarioConfig::from_json(text) {
            Err(Error::Usage(m)) => assert!(m.contains("bogus") && m.contains("line 3"), "{m}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn low_resolution_is_rejected() {
        let mut cfg = sphere_config(1.0, [0, 1]);
        cfg.resolution = 4;
        assert!(matches!(cfg.validate(), Err(Error::Usage(_))));
    }

    #[test]
    fn radius_two_sphere_passes_everything() {
        let run = run_scenario(&sphere_config(2.0, [0, 1])).unwrap();
        let report = &run.report;
        assert_eq!(report.exit_code(), 0, "{}", report.to_json());
        let eq = report.check("estimate.equality.k1").unwrap();
        assert!(eq.residual.unwrap() < 1e-10);
        // sqrt(H_2) = H_2/H = C_0(2) = 1/2
        assert!(report.check("h2.root_vs_ratio").unwrap().residual.unwrap().abs() < 1e-10);
        assert!(report.check("h2.ratio_vs_bound").unwrap().residual.unwrap().abs() < 1e-10);
        assert_eq!(report.check("omori_yau.k0").unwrap().status, Status::Pass);
    }

    #[test]
    fn unit_sphere_scalar_remark() {
        let run = run_scenario(&sphere_config(1.0, [1, 1])).unwrap();
        // sup s = 1 >= 0 + 1 * 1
        let m = run.report.check("h2.scalar").unwrap().residual.unwrap();
        assert!(m.abs() < 1e-10, "{m}");
    }

    #[test]
    fn report_is_deterministic_apart_from_timing() {
        let cfg = sphere_config(1.5, [0, 1]);
        let mut a = run_scenario(&cfg).unwrap().report;
        let mut b = run_scenario(&cfg).unwrap().report;
        a.timing_ms = 0;
        b.timing_ms = 0;
        assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn report_json_has_the_fixed_field_names() {
        let report = run_scenario(&sphere_config(1.0, [0, 0])).unwrap().report;
        let v: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
        for key in ["scenario", "checks", "env", "timing_ms"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        for key in ["resolution", "tol", "jets"] {
            assert!(v["env"].get(key).is_some(), "{key}");
        }
        for key in ["id", "anchor", "status", "residual", "worst_sample"] {
            assert!(v["checks"][0].get(key).is_some(), "{key}");
        }
    }

    #[test]
    fn sample_table_has_ratio_columns() {
        let run = run_scenario(&sphere_config(2.0, [0, 1])).unwrap();
        let ratios = run.samples.column("ratio_k1").unwrap();
        assert!(ratios.iter().all(|r| (r - 0.5).abs() < 1e-10));
        assert_eq!(run.samples.rows.len(), ratios.len());
        assert!(run.samples.to_csv().starts_with("p0,p1,u,grad_norm,H0,H1,H2,"));
    }

    #[test]
    fn exit_codes_rank_hypothesis_violations_first() {
        let mut report = run_scenario(&sphere_config(1.0, [0, 0])).unwrap().report;
        report.checks[0].status = Status::Fail;
        assert_eq!(report.exit_code(), 1);
        report.checks[1].status = Status::HypothesisViolation;
        assert_eq!(report.exit_code(), 2);
    }
}
