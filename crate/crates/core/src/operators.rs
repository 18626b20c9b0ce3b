//! Trace operators `L_k u = tr(P_k ∘ hess u)` for functions restricted to a patch.
//!
//! `hess u` is computed two ways. The identity route combines the model Hessian of the
//! ambient function with the second fundamental form:
//! `Hess u(X,Y) = Hess U(X,Y) + <grad U, N> <N,N> h(X,Y)`.
//! The intrinsic route differentiates `u` in the chart and subtracts Christoffel terms
//! of the induced metric, both by finite differences.

use std::fmt::Debug;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::comparison::{c_b, c_hat_b, phi_b, phi_b_prime, phi_b_second};
use crate::curvature::{Definiteness, NewtonFamily, ELLIPTIC_TOL};
use crate::error::{Error, Result};
use crate::immersion::{frame_at, HypersurfacePatch, PointFrame};
use crate::spaceform::{
    ambient_distance, distance_gradient, distance_hessian_bilinear, AmbientModel, Signature,
};

/// Relative step of the intrinsic finite-difference route, per unit of domain width.
pub const INTRINSIC_STEP: f64 = 1e-4;

/// Route disagreement above which a consistency error is raised.
pub const ROUTE_CONSISTENCY_TOL: f64 = 1e-3;

/// A smooth function on the ambient model.
pub trait ScalarField: Debug + Sync {
    fn value(&self, model: &AmbientModel, x: &DVector<f64>) -> Result<f64>;

    /// Model gradient, as a tangent embedding vector.
    fn gradient(&self, model: &AmbientModel, x: &DVector<f64>) -> Result<DVector<f64>>;

    /// Model Hessian as a bilinear form on tangent vectors at `x`.
    fn hessian(
        &self,
        model: &AmbientModel,
        x: &DVector<f64>,
        v: &DVector<f64>,
        w: &DVector<f64>,
    ) -> Result<f64>;
}

/// Distance `ρ` to a reference point (Lorentzian distance in Lorentzian models).
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceField {
    pub center: DVector<f64>,
}

impl ScalarField for DistanceField {
    fn value(&self, model: &AmbientModel, x: &DVector<f64>) -> Result<f64> {
        ambient_distance(model, &self.center, x)
    }

    fn gradient(&self, model: &AmbientModel, x: &DVector<f64>) -> Result<DVector<f64>> {
        distance_gradient(model, &self.center, x)
    }

    fn hessian(
        &self,
        model: &AmbientModel,
        x: &DVector<f64>,
        v: &DVector<f64>,
        w: &DVector<f64>,
    ) -> Result<f64> {
        distance_hessian_bilinear(model, &self.center, x, v, w)
    }
}

/// Restriction of the linear function `x ↦ Σ a_i x_i` of the embedding space.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearField {
    pub coef: DVector<f64>,
}

impl ScalarField for LinearField {
    fn value(&self, _model: &AmbientModel, x: &DVector<f64>) -> Result<f64> {
        Ok(self.coef.dot(x))
    }

    fn gradient(&self, model: &AmbientModel, x: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(model.project_tangent(x, &model.lower(&self.coef)))
    }

    fn hessian(
        &self,
        model: &AmbientModel,
        x: &DVector<f64>,
        v: &DVector<f64>,
        w: &DVector<f64>,
    ) -> Result<f64> {
        // flat Hessian vanishes; the quadric adds -b <v,w> dU(x)
        if model.is_quadric() {
            Ok(-model.curvature() * model.inner(v, w) * self.coef.dot(x))
        } else {
            Ok(0.0)
        }
    }
}

/// `φ_b ∘ ρ`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiDistanceField {
    pub distance: DistanceField,
    pub b: f64,
}

impl ScalarField for PhiDistanceField {
    fn value(&self, model: &AmbientModel, x: &DVector<f64>) -> Result<f64> {
        Ok(phi_b(self.b, self.distance.value(model, x)?))
    }

    fn gradient(&self, model: &AmbientModel, x: &DVector<f64>) -> Result<DVector<f64>> {
        let rho = self.distance.value(model, x)?;
        Ok(self.distance.gradient(model, x)? * phi_b_prime(self.b, rho))
    }

    fn hessian(
        &self,
        model: &AmbientModel,
        x: &DVector<f64>,
        v: &DVector<f64>,
        w: &DVector<f64>,
    ) -> Result<f64> {
        let rho = self.distance.value(model, x)?;
        let g = self.distance.gradient(model, x)?;
        Ok(phi_b_second(self.b, rho) * model.inner(v, &g) * model.inner(w, &g)
            + phi_b_prime(self.b, rho) * self.distance.hessian(model, x, v, w)?)
    }
}

/// Restriction `u = U ∘ f` at one point, by the identity route.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldPoint {
    pub u: f64,
    /// `d_a u` in the chart basis.
    pub grad_chart: DVector<f64>,
    /// `∇u` in the orthonormal frame.
    pub grad_ortho: DVector<f64>,
    pub grad_norm: f64,
    /// `<grad U, N>`.
    pub normal_term: f64,
    pub hess_chart: DMatrix<f64>,
    pub hess_ortho: DMatrix<f64>,
}

pub fn field_at(patch: &HypersurfacePatch, frame: &PointFrame, field: &dyn ScalarField) -> Result<FieldPoint> {
    let model = &patch.ambient;
    let x = &frame.position;
    let n = frame.tangents.len();
    let u = field.value(model, x)?;
    let grad = field.gradient(model, x)?;
    let grad_chart = DVector::from_iterator(n, frame.tangents.iter().map(|t| model.inner(&grad, t)));
    let normal_term = model.inner(&grad, &frame.normal);
    let mut hess_chart = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in a..n {
            let v = field.hessian(model, x, &frame.tangents[a], &frame.tangents[b])?
                + normal_term * frame.normal_sign * frame.second_form[(a, b)];
            hess_chart[(a, b)] = v;
            hess_chart[(b, a)] = v;
        }
    }
    let grad_ortho = frame.ortho_covector(&grad_chart);
    Ok(FieldPoint {
        u,
        grad_norm: grad_ortho.norm(),
        grad_ortho,
        grad_chart,
        normal_term,
        hess_ortho: frame.ortho_form(&hess_chart),
        hess_chart,
    })
}

/// Deviation from the decomposition of the unit vector `grad ρ` into tangent and
/// normal parts: `|∇u|^2 + <grad ρ,N>^2 - 1` (Riemannian) or
/// `<grad ρ,N> - sqrt(1 + |∇u|^2)` (Lorentzian, future `N`, past `grad ρ`).
pub fn decomposition_defect(signature: Signature, point: &FieldPoint) -> f64 {
    match signature {
        Signature::Riemannian => point.grad_norm.powi(2) + point.normal_term.powi(2) - 1.0,
        Signature::Lorentzian => point.normal_term - (1.0 + point.grad_norm.powi(2)).sqrt(),
    }
}

/// `hess u` in the chart basis by finite differences of `u` and the induced metric.
pub fn intrinsic_hessian_fd(patch: &HypersurfacePatch, field: &dyn ScalarField, p: &[f64]) -> Result<DMatrix<f64>> {
    let n = p.len();
    let chart = &patch.chart;
    let h: Vec<f64> = (0..n).map(|a| chart.intrinsic_step(a)).collect();
    let shifted = |shifts: &[(usize, f64)]| {
        let mut q = p.to_vec();
        for &(a, s) in shifts {
            q[a] += s;
        }
        q
    };
    let u = |shifts: &[(usize, f64)]| -> Result<f64> {
        let x = chart.position(&shifted(shifts))?;
        field.value(&patch.ambient, &x)
    };
    let u0 = u(&[])?;
    let mut du = DVector::zeros(n);
    let mut ddu = DMatrix::zeros(n, n);
    for a in 0..n {
        let (up, um) = (u(&[(a, h[a])])?, u(&[(a, -h[a])])?);
        du[a] = (up - um) / (2.0 * h[a]);
        ddu[(a, a)] = (up - 2.0 * u0 + um) / (h[a] * h[a]);
        for b in a + 1..n {
            let v = (u(&[(a, h[a]), (b, h[b])])? - u(&[(a, h[a]), (b, -h[b])])?
                - u(&[(a, -h[a]), (b, h[b])])?
                + u(&[(a, -h[a]), (b, -h[b])])?)
                / (4.0 * h[a] * h[b]);
            ddu[(a, b)] = v;
            ddu[(b, a)] = v;
        }
    }
    // dg[c][(a, b)] = d_c g_ab
    let mut dg = Vec::with_capacity(n);
    for c in 0..n {
        let gp = patch.metric(&shifted(&[(c, h[c])]))?;
        let gm = patch.metric(&shifted(&[(c, -h[c])]))?;
        dg.push((gp - gm) / (2.0 * h[c]));
    }
    let g = patch.metric(p)?;
    let g_inv = g
        .try_inverse()
        .ok_or_else(|| Error::Degenerate { det: 0.0, at: p.to_vec() })?;
    let mut hess = ddu;
    for i in 0..n {
        for j in 0..n {
            // Γ^k_ij d_k u with Γ^k_ij = g^{kl} Γ_{ij,l}
            let mut corr = 0.0;
            for l in 0..n {
                let first_kind = 0.5 * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)]);
                let raised: f64 = (0..n).map(|k| g_inv[(k, l)] * du[k]).sum();
                corr += first_kind * raised;
            }
            hess[(i, j)] -= corr;
        }
    }
    Ok((&hess + hess.transpose()) * 0.5)
}

/// Both routes to `hess u`.
#[derive(Debug, Clone, PartialEq)]
pub struct RestrictionHessian {
    /// Identity route, chart basis. Authoritative.
    pub identity: DMatrix<f64>,
    /// Intrinsic finite-difference route, chart basis.
    pub intrinsic: DMatrix<f64>,
    /// Largest entry of the difference in the orthonormal frame.
    pub gap: f64,
}

pub fn field_hessian_routes(
    patch: &HypersurfacePatch,
    field: &dyn ScalarField,
    p: &[f64],
) -> Result<RestrictionHessian> {
    let frame = frame_at(patch, p)?;
    let point = field_at(patch, &frame, field)?;
    let intrinsic = intrinsic_hessian_fd(patch, field, p)?;
    let gap = frame.ortho_form(&(&point.hess_chart - &intrinsic)).amax();
    if gap > ROUTE_CONSISTENCY_TOL {
        return Err(Error::Consistency {
            what: format!("identity and intrinsic Hessians at {p:?}"),
            gap,
        });
    }
    Ok(RestrictionHessian {
        identity: point.hess_chart,
        intrinsic,
        gap,
    })
}

/// Hessian of `u = ρ ∘ f` with `ρ` the distance to `center`.
pub fn restriction_hessian(
    patch: &HypersurfacePatch,
    center: &DVector<f64>,
    p: &[f64],
) -> Result<RestrictionHessian> {
    field_hessian_routes(patch, &DistanceField { center: center.clone() }, p)
}

pub fn newton_family_at(patch: &HypersurfacePatch, frame: &PointFrame) -> Result<NewtonFamily> {
    NewtonFamily::new(&frame.ortho_shape, patch.ambient.signature())
}

/// `tr(P_k H)` with both arguments in the orthonormal frame.
pub fn l_k_apply(family: &NewtonFamily, k: usize, hess_ortho: &DMatrix<f64>) -> Result<f64> {
    let p = family
        .p
        .get(k)
        .ok_or_else(|| Error::Precondition(format!("k = {k} exceeds n = {}", family.n())))?;
    Ok((p * hess_ortho).trace())
}

/// Terms of the key differential inequality at one point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KeyInequality {
    /// `L_k u` by the identity route.
    pub lhs: f64,
    /// `L_k u` by the intrinsic route.
    pub lhs_intrinsic: f64,
    pub rhs: f64,
    pub residual: f64,
    pub residual_intrinsic: f64,
}

/// Right-hand side of the key inequality for `u = ρ ∘ f` at one point.
pub fn key_inequality_rhs(model: &AmbientModel, family: &NewtonFamily, point: &FieldPoint, k: usize) -> Result<f64> {
    let b = model.curvature();
    let prof = &family.profile;
    let ck = prof.c[k] as f64;
    let q = point.grad_ortho.dot(&(&family.p[k] * &point.grad_ortho));
    Ok(match model.signature() {
        Signature::Riemannian => c_b(b, point.u)? * (ck * prof.h[k] - q) + ck * prof.h[k + 1] * point.normal_term,
        Signature::Lorentzian => {
            -c_hat_b(b, point.u)? * (ck * prof.h[k] + q)
                + ck * prof.h[k + 1] * (1.0 + point.grad_norm.powi(2)).sqrt()
        }
    })
}

/// `L_k u - RHS` for `u = ρ ∘ f`.
///
/// Riemannian RHS: `C_b(u)(c_k H_k - <∇u, P_k ∇u>) + c_k H_{k+1} <grad ρ, N>`.
/// Lorentzian RHS: `-Ĉ_b(u)(c_k H_k + <∇u, P_k ∇u>) + c_k H_{k+1} sqrt(1 + |∇u|^2)`.
pub fn key_inequality_residual(
    patch: &HypersurfacePatch,
    center: &DVector<f64>,
    p: &[f64],
    k: usize,
) -> Result<KeyInequality> {
    let frame = frame_at(patch, p)?;
    let family = newton_family_at(patch, &frame)?;
    let n = family.n();
    if k >= n {
        return Err(Error::Precondition(format!("k must lie in [0, {}], got {k}", n - 1)));
    }
    if !family.definiteness[k].is_semidefinite() {
        return Err(Error::Hypothesis(format!("P_{k} is indefinite at {p:?}")));
    }
    let field = DistanceField { center: center.clone() };
    let point = field_at(patch, &frame, &field)?;
    let intrinsic = frame.ortho_form(&intrinsic_hessian_fd(patch, &field, p)?);
    let rhs = key_inequality_rhs(&patch.ambient, &family, &point, k)?;
    let lhs = l_k_apply(&family, k, &point.hess_ortho)?;
    let lhs_intrinsic = l_k_apply(&family, k, &intrinsic)?;
    Ok(KeyInequality {
        lhs,
        lhs_intrinsic,
        rhs,
        residual: lhs - rhs,
        residual_intrinsic: lhs_intrinsic - rhs,
    })
}

/// Gap between `L_k φ_b(u)`, evaluated on the intrinsic Hessian of `φ_b ∘ u`, and
/// `φ_b'(u)(C_b(u) <∇u, P_k ∇u> + L_k u)`.
pub fn lk_phi_chain_residual(
    patch: &HypersurfacePatch,
    center: &DVector<f64>,
    p: &[f64],
    k: usize,
) -> Result<f64> {
    let b = patch.ambient.curvature();
    let frame = frame_at(patch, p)?;
    let family = newton_family_at(patch, &frame)?;
    let distance = DistanceField { center: center.clone() };
    let point = field_at(patch, &frame, &distance)?;
    let composed = PhiDistanceField { distance, b };
    let hess_phi = frame.ortho_form(&intrinsic_hessian_fd(patch, &composed, p)?);
    let lhs = l_k_apply(&family, k, &hess_phi)?;
    let q = point.grad_ortho.dot(&(&family.p[k] * &point.grad_ortho));
    let rhs = phi_b_prime(b, point.u) * (c_b(b, point.u)? * q + l_k_apply(&family, k, &point.hess_ortho)?);
    Ok(lhs - rhs)
}

/// Which trace operator the maximum principle is applied to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorSpec {
    Laplacian,
    Newton(usize),
}

impl OperatorSpec {
    pub fn k(self) -> usize {
        match self {
            OperatorSpec::Laplacian => 0,
            OperatorSpec::Newton(k) => k,
        }
    }
}

/// `u`, `|∇u|` and `q L u` with `q = 1 / tr P` at a parameter point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OperatorSample {
    pub param: Vec<f64>,
    pub u: f64,
    pub grad_norm: f64,
    pub q_lu: f64,
}

/// Evaluate at `p`; `None` when `tr P_k <= τ_ell` excludes the point.
pub fn operator_sample(
    patch: &HypersurfacePatch,
    field: &dyn ScalarField,
    op: OperatorSpec,
    p: &[f64],
) -> Result<Option<OperatorSample>> {
    let frame = frame_at(patch, p)?;
    let family = newton_family_at(patch, &frame)?;
    let k = op.k();
    if k >= family.n() {
        return Err(Error::Precondition(format!("k must lie in [0, {}], got {k}", family.n() - 1)));
    }
    let trace = family.profile.trace_newton(k);
    if trace <= ELLIPTIC_TOL {
        return Ok(None);
    }
    let point = field_at(patch, &frame, field)?;
    Ok(Some(OperatorSample {
        param: p.to_vec(),
        u: point.u,
        grad_norm: point.grad_norm,
        q_lu: l_k_apply(&family, k, &point.hess_ortho)? / trace,
    }))
}

/// Maximize `f` near `start` by compass search: axis moves of size `step`, halved
/// once no move improves, for `rounds` halvings.
pub fn refine_max(
    patch: &HypersurfacePatch,
    f: &dyn Fn(&[f64]) -> Option<f64>,
    start: &[f64],
    step: &[f64],
    rounds: usize,
) -> (Vec<f64>, f64) {
    const MOVES_PER_ROUND: usize = 8;
    let domain = patch.chart.domain();
    let mut best = start.to_vec();
    let mut best_val = f(&best).unwrap_or(f64::NEG_INFINITY);
    let mut h = step.to_vec();
    for _ in 0..rounds {
        for _ in 0..MOVES_PER_ROUND {
            let centre = best.clone();
            let mut moved = false;
            for a in 0..centre.len() {
                for dir in [-1.0, 1.0] {
                    let mut q = centre.clone();
                    q[a] += dir * h[a];
                    domain.clamp(&mut q);
                    if let Some(v) = f(&q) {
                        if v > best_val {
                            best_val = v;
                            best = q;
                            moved = true;
                        }
                    }
                }
            }
            if !moved {
                break;
            }
        }
        for x in h.iter_mut() {
            *x *= 0.5;
        }
    }
    (best, best_val)
}

/// Newton iteration on `∇u = 0` in chart coordinates, started at a near-maximum.
fn newton_polish(patch: &HypersurfacePatch, field: &dyn ScalarField, start: &[f64]) -> Vec<f64> {
    let mut p = start.to_vec();
    let eval = |p: &[f64]| -> Option<FieldPoint> {
        let frame = frame_at(patch, p).ok()?;
        field_at(patch, &frame, field).ok()
    };
    let Some(mut cur) = eval(&p) else { return p };
    for _ in 0..20 {
        if cur.grad_norm < 1e-13 {
            break;
        }
        // Pseudo-inverse: maxima along a curve have a singular Hessian.
        let Ok(step) = cur.hess_chart.clone().svd(true, true).solve(&cur.grad_chart, 1e-10) else { break };
        let mut q: Vec<f64> = p.iter().zip(step.iter()).map(|(x, s)| x - s).collect();
        patch.chart.domain().clamp(&mut q);
        match eval(&q) {
            Some(next) if next.grad_norm < cur.grad_norm => {
                p = q;
                cur = next;
            }
            _ => break,
        }
    }
    p
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OmoriYauCandidate {
    pub param: Vec<f64>,
    pub u: f64,
    pub grad_norm: f64,
    pub q_lu: f64,
    pub j: usize,
}

/// Search result for one threshold `1/j`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OmoriYauOutcome {
    pub j: usize,
    pub candidate: Option<OmoriYauCandidate>,
    /// Best values reached: `u* - sup u` over the sample set, then `min |∇u|` over the
    /// near-sup set, then `min q L u` over the points that also pass the gradient test.
    pub best: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OmoriYauReport {
    pub sup_u: f64,
    /// The refined maximum point.
    pub refined: OperatorSample,
    pub outcomes: Vec<OmoriYauOutcome>,
    /// Grid points with `tr P <= τ_ell`.
    pub excluded: usize,
    pub samples: Vec<OperatorSample>,
}

impl OmoriYauReport {
    pub fn all_found(&self) -> bool {
        self.outcomes.iter().all(|o| o.candidate.is_some())
    }
}

pub const DEFAULT_J_MAX: usize = 6;

/// Look for points with `u > u* - 1/j`, `|∇u| < 1/j` and `q L u < 1/j`, for each
/// `j <= j_max`.
pub fn omori_yau_search(
    patch: &HypersurfacePatch,
    field: &dyn ScalarField,
    op: OperatorSpec,
    resolution: usize,
    j_max: usize,
) -> Result<OmoriYauReport> {
    if resolution < 2 {
        return Err(Error::Precondition(format!("grid resolution must be at least 2, got {resolution}")));
    }
    let mut samples = Vec::new();
    let mut excluded = 0;
    for p in patch.chart.grid(resolution) {
        match operator_sample(patch, field, op, &p) {
            Ok(Some(s)) => samples.push(s),
            Ok(None) => excluded += 1,
            Err(Error::Precondition(m)) => return Err(Error::Precondition(m)),
            Err(_) => excluded += 1,
        }
    }
    let top = samples
        .iter()
        .max_by(|a, b| a.u.total_cmp(&b.u))
        .ok_or(Error::EmptySample { skipped: excluded })?
        .clone();
    let domain = patch.chart.domain();
    let step: Vec<f64> = (0..domain.dim()).map(|a| domain.width(a) / (resolution - 1) as f64).collect();
    let value = |q: &[f64]| -> Option<f64> {
        let x = patch.chart.position(q).ok()?;
        field.value(&patch.ambient, &x).ok()
    };
    let (coarse, _) = refine_max(patch, &value, &top.param, &step, 8);
    let polished = newton_polish(patch, field, &coarse);
    let refined = operator_sample(patch, field, op, &polished)?
        .or_else(|| operator_sample(patch, field, op, &coarse).ok().flatten())
        .unwrap_or(top);
    let sup_u = samples.iter().map(|s| s.u).fold(refined.u, f64::max);

    let pool: Vec<&OperatorSample> = samples.iter().chain(std::iter::once(&refined)).collect();
    let outcomes = (1..=j_max)
        .map(|j| {
            let eta = 1.0 / j as f64;
            let near: Vec<&&OperatorSample> = pool.iter().filter(|s| s.u > sup_u - eta).collect();
            let flat: Vec<&&&OperatorSample> = near.iter().filter(|s| s.grad_norm < eta).collect();
            let best = [
                sup_u - pool.iter().map(|s| s.u).fold(f64::NEG_INFINITY, f64::max),
                near.iter().map(|s| s.grad_norm).fold(f64::INFINITY, f64::min),
                flat.iter().map(|s| s.q_lu).fold(f64::INFINITY, f64::min),
            ];
            let candidate = flat
                .iter()
                .filter(|s| s.q_lu < eta)
                .max_by(|a, b| a.u.total_cmp(&b.u))
                .map(|s| OmoriYauCandidate {
                    param: s.param.clone(),
                    u: s.u,
                    grad_norm: s.grad_norm,
                    q_lu: s.q_lu,
                    j,
                });
            OmoriYauOutcome { j, candidate, best }
        })
        .collect();
    Ok(OmoriYauReport {
        sup_u,
        refined,
        outcomes,
        excluded,
        samples,
    })
}

/// `0 <= <X, P_k X> <= tr P_k |X|^2` for `X = ∇u`; returns the smaller of the two
/// margins, scaled by `|X|^2`.
pub fn newton_quadratic_margin(family: &NewtonFamily, k: usize, x: &DVector<f64>) -> Result<f64> {
    if family.definiteness[k] == Definiteness::Indefinite {
        return Err(Error::Hypothesis(format!("P_{k} is indefinite")));
    }
    let q = x.dot(&(&family.p[k] * x));
    let upper = family.profile.trace_newton(k) * x.norm_squared();
    Ok(q.min(upper - q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::immersion::{
        EllipsoidChart, GeodesicSphereChart, GraphChart, HypersurfacePatch, Orientation,
    };
    use std::sync::Arc;

    fn zero(m: usize) -> DVector<f64> {
        DVector::zeros(m)
    }

    fn sphere_patch(r: f64, center: DVector<f64>) -> HypersurfacePatch {
        let model = AmbientModel::euclidean(3).unwrap();
        let chart = GeodesicSphereChart::new(&model, &center, r).unwrap();
        HypersurfacePatch::new(Arc::new(chart), model, Orientation::Inner, Some(center)).unwrap()
    }

    #[test]
    fn geodesic_sphere_restriction_is_flat() {
        let patch = sphere_patch(1.5, zero(3));
        let rh = restriction_hessian(&patch, &zero(3), &[0.8, 2.0]).unwrap();
        assert!(rh.identity.amax() < 1e-13);
        assert!(rh.gap < 1e-6);
        for k in 0..2 {
            let ki = key_inequality_residual(&patch, &zero(3), &[0.8, 2.0], k).unwrap();
            assert!(ki.lhs.abs() < 1e-12 && ki.residual.abs() < 1e-12);
        }
    }

    #[test]
    fn offset_circle_routes_agree() {
        let model = AmbientModel::euclidean(2).unwrap();
        let c = DVector::from_vec(vec![0.4, 0.0]);
        let chart = GeodesicSphereChart::new(&model, &c, 1.0).unwrap();
        let patch = HypersurfacePatch::new(Arc::new(chart), model, Orientation::Inner, Some(c)).unwrap();
        let o = zero(2);
        // nearest point to o is at angle π: d = 0.6, u'' = 1 - 1/0.6 ... via the closed form
        let rh = restriction_hessian(&patch, &o, &[std::f64::consts::PI]).unwrap();
        // u(θ) = sqrt(1.16 + 0.8 cos θ) gives u''(π) = 0.4 / 0.6
        assert!((rh.identity[(0, 0)] - 0.4 / 0.6).abs() < 1e-12);
        assert!(rh.gap < 1e-6);
    }

    #[test]
    fn minkowski_hyperboloid_restriction_vanishes() {
        let model = AmbientModel::minkowski(3).unwrap();
        let patch = HypersurfacePatch::new(
            Arc::new(GraphChart::hyperboloid(2, 2.0, 0.0, 2.0).unwrap()),
            model,
            Orientation::Future,
            None,
        )
        .unwrap();
        let p = [0.7, -1.1];
        let frame = frame_at(&patch, &p).unwrap();
        let pt = field_at(&patch, &frame, &DistanceField { center: zero(3) }).unwrap();
        assert!((pt.normal_term - 1.0).abs() < 1e-12);
        assert!(decomposition_defect(Signature::Lorentzian, &pt).abs() < 1e-12);
        let rh = restriction_hessian(&patch, &zero(3), &p).unwrap();
        assert!(rh.identity.amax() < 1e-12);
        let ki = key_inequality_residual(&patch, &zero(3), &p, 1).unwrap();
        assert!(ki.residual.abs() < 1e-12);
    }

    #[test]
    fn laplacian_of_height_on_unit_sphere() {
        let patch = sphere_patch(1.0, zero(3));
        let field = LinearField { coef: DVector::from_vec(vec![0.0, 0.0, 1.0]) };
        for p in [[0.9, 1.2], [1.7, 4.0]] {
            let frame = frame_at(&patch, &p).unwrap();
            let fam = newton_family_at(&patch, &frame).unwrap();
            let pt = field_at(&patch, &frame, &field).unwrap();
            let lap = l_k_apply(&fam, 0, &pt.hess_ortho).unwrap();
            assert!((lap + 2.0 * frame.position[2]).abs() < 1e-12);
            let routes = field_hessian_routes(&patch, &field, &p).unwrap();
            assert!(routes.gap < 1e-6);
        }
    }

    #[test]
    fn omori_yau_on_sphere_height() {
        let patch = sphere_patch(1.0, zero(3));
        let field = LinearField { coef: DVector::from_vec(vec![0.0, 0.0, 1.0]) };
        let rep = omori_yau_search(&patch, &field, OperatorSpec::Laplacian, 16, DEFAULT_J_MAX).unwrap();
        assert!(rep.all_found());
        assert!(rep.refined.grad_norm < 1e-6);
        assert!((rep.refined.q_lu + 1.0).abs() < 1e-6);
        assert!((rep.sup_u - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_field_qualifies_everywhere() {
        let patch = sphere_patch(2.0, zero(3));
        let rep = omori_yau_search(&patch, &DistanceField { center: zero(3) }, OperatorSpec::Newton(1), 8, 6).unwrap();
        for o in &rep.outcomes {
            assert!(o.candidate.is_some());
        }
        assert!(rep.samples.iter().all(|s| s.grad_norm < 1e-12 && s.q_lu.abs() < 1e-12));
    }

    #[test]
    fn ellipsoid_key_inequality_and_chain() {
        let model = AmbientModel::euclidean(3).unwrap();
        let patch = HypersurfacePatch::new(
            Arc::new(EllipsoidChart::new(&zero(3), &[1.0, 1.0, 0.6]).unwrap()),
            model,
            Orientation::Inner,
            Some(zero(3)),
        )
        .unwrap();
        for p in [[0.5, 1.0], [1.5, 3.0], [2.2, 5.5]] {
            for k in 0..2 {
                let ki = key_inequality_residual(&patch, &zero(3), &p, k).unwrap();
                assert!(ki.residual.abs() < 1e-10);
                assert!(ki.residual_intrinsic.abs() < 1e-4);
                assert!(lk_phi_chain_residual(&patch, &zero(3), &p, k).unwrap().abs() < 1e-4);
            }
        }
    }
}
