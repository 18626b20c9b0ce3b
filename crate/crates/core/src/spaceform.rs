//! Constant-curvature model spaces and the distance function to a reference point.
//!
//! Euclidean and Minkowski space are used directly. The round sphere, hyperbolic
//! space, de Sitter space (b > 0) and anti-de Sitter space (b < 0) are realized as
//! quadrics `<x, x> = 1/b` in a flat space of one extra dimension, so distances,
//! gradients and Hessians all have closed forms.
//!
//! Flat metric signatures of the embedding space (index 0 first):
//!
//! | model                     | embedding dim | signature      |
//! |---------------------------|---------------|----------------|
//! | euclidean                 | n + 1         | `+ + ... +`    |
//! | sphere_embedded           | n + 2         | `+ + ... +`    |
//! | hyperboloid_embedded      | n + 2         | `- + ... +`    |
//! | minkowski                 | n + 1         | `- + ... +`    |
//! | lorentz_spaceform, b > 0  | n + 2         | `- + ... +`    |
//! | lorentz_spaceform, b < 0  | n + 2         | `- - + ... +`  |

use std::f64::consts::FRAC_PI_2;
use std::ops::Deref;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::comparison::{c_b, c_hat_b};
use crate::error::{Error, Result};

/// Distances below this are treated as coincident with the reference point.
pub const MIN_DISTANCE: f64 = 1e-8;

/// Tolerance for membership of a point in an embedded quadric.
const QUADRIC_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Signature {
    Riemannian,
    Lorentzian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Euclidean,
    SphereEmbedded,
    HyperboloidEmbedded,
    Minkowski,
    LorentzSpaceform,
}

/// A simply connected space form of constant sectional curvature `curvature`.
///
/// `dimension` is the manifold dimension n + 1 of the ambient space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel", into = "RawModel")]
pub struct AmbientModel {
    signature: Signature,
    curvature: f64,
    dimension: usize,
    model_kind: ModelKind,
}

#[derive(Serialize, Deserialize)]
struct RawModel {
    signature: Signature,
    curvature: f64,
    dimension: usize,
    model_kind: ModelKind,
}

impl TryFrom<RawModel> for AmbientModel {
    type Error = Error;

    fn try_from(raw: RawModel) -> Result<Self> {
        AmbientModel::new(raw.signature, raw.curvature, raw.dimension, raw.model_kind)
    }
}

impl From<AmbientModel> for RawModel {
    fn from(m: AmbientModel) -> Self {
        RawModel {
            signature: m.signature,
            curvature: m.curvature,
            dimension: m.dimension,
            model_kind: m.model_kind,
        }
    }
}

/// A point of the model, stored in the coordinates of the flat embedding space.
#[derive(Debug, Clone, PartialEq)]
pub struct AmbientPoint(DVector<f64>);

impl AmbientPoint {
    pub fn new(coords: DVector<f64>) -> Self {
        Self(coords)
    }

    pub fn from_slice(coords: &[f64]) -> Self {
        Self(DVector::from_column_slice(coords))
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DVector<f64> {
        self.0
    }
}

impl Deref for AmbientPoint {
    type Target = DVector<f64>;

    fn deref(&self) -> &DVector<f64> {
        &self.0
    }
}

impl From<Vec<f64>> for AmbientPoint {
    fn from(v: Vec<f64>) -> Self {
        Self(DVector::from_vec(v))
    }
}

impl AmbientModel {
    pub fn new(
        signature: Signature,
        curvature: f64,
        dimension: usize,
        model_kind: ModelKind,
    ) -> Result<Self> {
        if dimension < 2 {
            return Err(Error::Domain(format!(
                "ambient dimension must be at least 2, got {dimension}"
            )));
        }
        if !curvature.is_finite() {
            return Err(Error::Domain("curvature must be finite".into()));
        }
        let expected = match model_kind {
            ModelKind::Euclidean | ModelKind::SphereEmbedded | ModelKind::HyperboloidEmbedded => {
                Signature::Riemannian
            }
            ModelKind::Minkowski | ModelKind::LorentzSpaceform => Signature::Lorentzian,
        };
        if signature != expected {
            return Err(Error::Domain(format!(
                "{model_kind:?} requires a {expected:?} signature"
            )));
        }
        let ok = match model_kind {
            ModelKind::Euclidean | ModelKind::Minkowski => curvature == 0.0,
            ModelKind::SphereEmbedded => curvature > 0.0,
            ModelKind::HyperboloidEmbedded => curvature < 0.0,
            ModelKind::LorentzSpaceform => curvature != 0.0,
        };
        if !ok {
            return Err(Error::Domain(format!(
                "curvature {curvature} is not valid for {model_kind:?}"
            )));
        }
        Ok(Self {
            signature,
            curvature,
            dimension,
            model_kind,
        })
    }

    pub fn euclidean(dimension: usize) -> Result<Self> {
        Self::new(Signature::Riemannian, 0.0, dimension, ModelKind::Euclidean)
    }

    pub fn sphere(curvature: f64, dimension: usize) -> Result<Self> {
        Self::new(Signature::Riemannian, curvature, dimension, ModelKind::SphereEmbedded)
    }

    pub fn hyperbolic(curvature: f64, dimension: usize) -> Result<Self> {
        Self::new(
            Signature::Riemannian,
            curvature,
            dimension,
            ModelKind::HyperboloidEmbedded,
        )
    }

    pub fn minkowski(dimension: usize) -> Result<Self> {
        Self::new(Signature::Lorentzian, 0.0, dimension, ModelKind::Minkowski)
    }

    /// de Sitter space for `curvature > 0`, anti-de Sitter space for `curvature < 0`.
    pub fn lorentz_spaceform(curvature: f64, dimension: usize) -> Result<Self> {
        Self::new(
            Signature::Lorentzian,
            curvature,
            dimension,
            ModelKind::LorentzSpaceform,
        )
    }

    /// The Riemannian space form of curvature `b` with the given dimension.
    pub fn riemannian_for(curvature: f64, dimension: usize) -> Result<Self> {
        if curvature > 0.0 {
            Self::sphere(curvature, dimension)
        } else if curvature < 0.0 {
            Self::hyperbolic(curvature, dimension)
        } else {
            Self::euclidean(dimension)
        }
    }

    pub fn signature(&self) -> Signature {
        self.signature
    }

    pub fn curvature(&self) -> f64 {
        self.curvature
    }

    /// Manifold dimension n + 1.
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn model_kind(&self) -> ModelKind {
        self.model_kind
    }

    /// Dimension n of hypersurfaces in this model.
    pub fn hypersurface_dim(&self) -> usize {
        self.dimension - 1
    }

    pub fn is_quadric(&self) -> bool {
        !matches!(self.model_kind, ModelKind::Euclidean | ModelKind::Minkowski)
    }

    pub fn embedding_dim(&self) -> usize {
        if self.is_quadric() {
            self.dimension + 1
        } else {
            self.dimension
        }
    }

    /// Number of negative entries in the flat embedding metric.
    fn negative_axes(&self) -> usize {
        match self.model_kind {
            ModelKind::Euclidean | ModelKind::SphereEmbedded => 0,
            ModelKind::HyperboloidEmbedded | ModelKind::Minkowski => 1,
            ModelKind::LorentzSpaceform if self.curvature > 0.0 => 1,
            ModelKind::LorentzSpaceform => 2,
        }
    }

    /// Diagonal entry of the flat embedding metric on axis `i`.
    pub fn metric_sign(&self, i: usize) -> f64 {
        if i < self.negative_axes() {
            -1.0
        } else {
            1.0
        }
    }

    /// Flat (pseudo-)Euclidean inner product of the embedding space.
    pub fn inner(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        let neg = self.negative_axes();
        u.iter()
            .zip(v.iter())
            .enumerate()
            .map(|(i, (a, b))| if i < neg { -a * b } else { a * b })
            .sum()
    }

    /// Apply the embedding metric to a vector (index lowering).
    pub fn lower(&self, v: &DVector<f64>) -> DVector<f64> {
        let neg = self.negative_axes();
        DVector::from_iterator(
            v.len(),
            v.iter()
                .enumerate()
                .map(|(i, a)| if i < neg { -a } else { *a }),
        )
    }

    /// Canonical reference point of the model.
    pub fn base_point(&self) -> AmbientPoint {
        let m = self.embedding_dim();
        let mut x = DVector::zeros(m);
        let b = self.curvature;
        match self.model_kind {
            ModelKind::Euclidean | ModelKind::Minkowski => {}
            ModelKind::SphereEmbedded => x[0] = 1.0 / b.sqrt(),
            ModelKind::HyperboloidEmbedded => x[0] = 1.0 / (-b).sqrt(),
            ModelKind::LorentzSpaceform if b > 0.0 => x[m - 1] = 1.0 / b.sqrt(),
            ModelKind::LorentzSpaceform => x[0] = 1.0 / (-b).sqrt(),
        }
        AmbientPoint(x)
    }

    /// Check that `x` lies on the model manifold.
    pub fn validate_point(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.embedding_dim() {
            return Err(Error::Domain(format!(
                "point has {} coordinates, model embedding needs {}",
                x.len(),
                self.embedding_dim()
            )));
        }
        if x.iter().any(|c| !c.is_finite()) {
            return Err(Error::Domain("point has non-finite coordinates".into()));
        }
        if self.is_quadric() {
            let q = self.curvature * self.inner(x, x);
            if (q - 1.0).abs() > QUADRIC_TOL * (1.0 + x.norm_squared() * self.curvature.abs()) {
                return Err(Error::Domain(format!(
                    "point is off the quadric: b<x,x> = {q}"
                )));
            }
            if self.model_kind == ModelKind::HyperboloidEmbedded && x[0] <= 0.0 {
                return Err(Error::Domain(
                    "hyperboloid points must have positive first coordinate".into(),
                ));
            }
        }
        Ok(())
    }

    /// Orthogonal projection of an embedding vector onto the tangent space at `x`.
    pub fn project_tangent(&self, x: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        if self.is_quadric() {
            v - x * (self.curvature * self.inner(v, x))
        } else {
            v.clone()
        }
    }

    /// Future-pointing timelike reference field defining the time orientation.
    ///
    /// A timelike tangent vector `v` at `x` is future-directed iff `<v, T(x)> < 0`.
    pub fn time_orientation(&self, x: &DVector<f64>) -> Option<DVector<f64>> {
        if self.signature != Signature::Lorentzian {
            return None;
        }
        let mut t = DVector::zeros(self.embedding_dim());
        if self.negative_axes() == 2 {
            t[0] = -x[1];
            t[1] = x[0];
        } else {
            t[0] = 1.0;
        }
        Some(t)
    }

    /// Whether the timelike vector `v` at `x` points to the future.
    pub fn is_future(&self, x: &DVector<f64>, v: &DVector<f64>) -> bool {
        match self.time_orientation(x) {
            Some(t) => self.inner(v, &t) < 0.0,
            None => false,
        }
    }

    /// Point reached at parameter `t` along the geodesic with `gamma(0) = x`, `gamma'(0) = v`.
    pub fn geodesic(&self, x: &DVector<f64>, v: &DVector<f64>, t: f64) -> DVector<f64> {
        if !self.is_quadric() {
            return x + v * t;
        }
        // gamma'' = -b <v, v> gamma on the quadric <x, x> = 1/b.
        let lambda = self.curvature * self.inner(v, v);
        if lambda > 0.0 {
            let w = lambda.sqrt();
            x * (w * t).cos() + v * ((w * t).sin() / w)
        } else if lambda < 0.0 {
            let w = (-lambda).sqrt();
            x * (w * t).cosh() + v * ((w * t).sinh() / w)
        } else {
            x + v * t
        }
    }

    /// Orthonormal basis of the tangent space at `o`.
    ///
    /// In Lorentzian models the first vector is future-directed timelike. Only the
    /// base point is supported for the curved Lorentzian quadrics.
    pub fn tangent_frame(&self, o: &DVector<f64>) -> Result<Vec<DVector<f64>>> {
        self.validate_point(o)?;
        let m = self.embedding_dim();
        let unit = |i: usize| {
            let mut e = DVector::zeros(m);
            e[i] = 1.0;
            e
        };
        match self.model_kind {
            ModelKind::Euclidean | ModelKind::Minkowski => Ok((0..m).map(unit).collect()),
            ModelKind::LorentzSpaceform => {
                let base = self.base_point();
                if (o - base.coords()).norm() > 1e-12 {
                    return Err(Error::Precondition(
                        "tangent frames on curved Lorentzian models are only available at the base point"
                            .into(),
                    ));
                }
                if self.curvature > 0.0 {
                    Ok((0..m - 1).map(unit).collect())
                } else {
                    Ok((1..m).map(unit).collect())
                }
            }
            ModelKind::SphereEmbedded | ModelKind::HyperboloidEmbedded => {
                // Gram-Schmidt on projected coordinate axes; the induced metric is
                // positive definite so this is stable with pivoting on the norm.
                let mut frame: Vec<DVector<f64>> = Vec::with_capacity(m - 1);
                let mut candidates: Vec<DVector<f64>> =
                    (0..m).map(|i| self.project_tangent(o, &unit(i))).collect();
                while frame.len() < m - 1 {
                    let (best, norm2) = candidates
                        .iter()
                        .enumerate()
                        .map(|(i, c)| (i, self.inner(c, c)))
                        .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
                    if norm2 <= 1e-20 {
                        return Err(Error::Numerical("tangent frame construction failed".into()));
                    }
                    let e = candidates.swap_remove(best) / norm2.sqrt();
                    for c in candidates.iter_mut() {
                        let proj = self.inner(c, &e);
                        *c -= &e * proj;
                    }
                    frame.push(e);
                }
                Ok(frame)
            }
        }
    }
}

/// Closed geodesic ball used as the enclosing region of a hypersurface.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceBall {
    pub center: AmbientPoint,
    pub radius: f64,
}

impl ReferenceBall {
    pub fn new(model: &AmbientModel, center: AmbientPoint, radius: f64) -> Result<Self> {
        model.validate_point(&center)?;
        if !(radius > 0.0) {
            return Err(Error::Domain(format!("ball radius must be positive, got {radius}")));
        }
        let b = model.curvature();
        let limit = match model.signature() {
            Signature::Riemannian if b > 0.0 => FRAC_PI_2 / b.sqrt(),
            Signature::Lorentzian if b < 0.0 => FRAC_PI_2 / (-b).sqrt(),
            _ => f64::INFINITY,
        };
        if radius >= limit {
            return Err(Error::Domain(format!(
                "ball radius {radius} must stay below pi/(2 sqrt|b|) = {limit}"
            )));
        }
        Ok(Self { center, radius })
    }

    pub fn contains(&self, model: &AmbientModel, x: &DVector<f64>) -> Result<bool> {
        Ok(ambient_distance(model, &self.center, x)? <= self.radius)
    }
}

/// Distance from `o` to `x`; the Lorentzian distance in Lorentzian models.
pub fn ambient_distance(model: &AmbientModel, o: &DVector<f64>, x: &DVector<f64>) -> Result<f64> {
    model.validate_point(o)?;
    model.validate_point(x)?;
    let d = x - o;
    let b = model.curvature();
    let q = model.inner(&d, &d);
    match model.model_kind() {
        ModelKind::Euclidean => Ok(q.max(0.0).sqrt()),
        ModelKind::SphereEmbedded => {
            let s = b.sqrt();
            let half_chord = 0.5 * s * q.max(0.0).sqrt();
            if half_chord >= 1.0 - 1e-14 {
                return Err(Error::Domain(
                    "point is antipodal to the reference point on the sphere".into(),
                ));
            }
            Ok(2.0 * half_chord.atan2((1.0 - half_chord * half_chord).sqrt()) / s)
        }
        ModelKind::HyperboloidEmbedded => {
            let s = (-b).sqrt();
            Ok(2.0 * (0.5 * s * q.max(0.0).sqrt()).asinh() / s)
        }
        ModelKind::Minkowski | ModelKind::LorentzSpaceform => {
            check_chronological(model, o, x, &d, q)?;
            let tau = (-q).sqrt();
            if model.model_kind() == ModelKind::Minkowski {
                Ok(tau)
            } else if b > 0.0 {
                let s = b.sqrt();
                Ok(2.0 * (0.5 * s * tau).asinh() / s)
            } else {
                let s = (-b).sqrt();
                let half = 0.5 * s * tau;
                // c = b<x,o> = 1 - 2 half^2 must stay positive: rho < pi/(2 sqrt(-b)).
                if 2.0 * half * half >= 1.0 {
                    return Err(Error::Domain(format!(
                        "Lorentzian distance exceeds pi/(2 sqrt(-b)) = {}",
                        FRAC_PI_2 / s
                    )));
                }
                Ok(2.0 * half.asin() / s)
            }
        }
    }
}

fn check_chronological(
    model: &AmbientModel,
    o: &DVector<f64>,
    x: &DVector<f64>,
    d: &DVector<f64>,
    q: f64,
) -> Result<()> {
    if !(q < 0.0) {
        return Err(Error::Domain(
            "point is not in the chronological future of the reference point".into(),
        ));
    }
    // Initial velocity of the radial geodesic, up to a positive factor.
    let w = if model.is_quadric() {
        model.project_tangent(o, x)
    } else {
        d.clone()
    };
    if !model.is_future(o, &w) {
        return Err(Error::Domain(
            "point lies in the chronological past of the reference point".into(),
        ));
    }
    Ok(())
}

/// Gradient of the distance function at `x` as an embedding vector (index raised).
///
/// Unit in the Riemannian case; unit timelike and past-directed in the Lorentzian case.
pub fn distance_gradient(
    model: &AmbientModel,
    o: &DVector<f64>,
    x: &DVector<f64>,
) -> Result<DVector<f64>> {
    let rho = ambient_distance(model, o, x)?;
    if rho < MIN_DISTANCE {
        return Err(Error::UndefinedGradient { rho });
    }
    let b = model.curvature();
    let grad = match model.model_kind() {
        ModelKind::Euclidean => (x - o) / rho,
        ModelKind::Minkowski => -(x - o) / rho,
        ModelKind::SphereEmbedded
        | ModelKind::HyperboloidEmbedded
        | ModelKind::LorentzSpaceform => {
            let c = b * model.inner(x, o);
            let s = b.abs().sqrt();
            let factor = match (model.model_kind(), b > 0.0) {
                (ModelKind::SphereEmbedded, _) => -s / (s * rho).sin(),
                (ModelKind::HyperboloidEmbedded, _) => -s / (s * rho).sinh(),
                (_, true) => s / (s * rho).sinh(),
                (_, false) => s / (s * rho).sin(),
            };
            (o - x * c) * factor
        }
    };
    Ok(grad)
}

/// Closed-form Hessian of the distance function as a bilinear form on tangent vectors at `x`.
///
/// Riemannian: `C_b(rho) (<X,Y> - <X,grad><Y,grad>)`.
/// Lorentzian: `-Ĉ_b(rho) (<X,Y> + <X,grad><Y,grad>)`.
pub fn distance_hessian_bilinear(
    model: &AmbientModel,
    o: &DVector<f64>,
    x: &DVector<f64>,
    v: &DVector<f64>,
    w: &DVector<f64>,
) -> Result<f64> {
    let rho = ambient_distance(model, o, x)?;
    let grad = distance_gradient(model, o, x)?;
    let b = model.curvature();
    let vw = model.inner(v, w);
    let vg = model.inner(v, &grad);
    let wg = model.inner(w, &grad);
    Ok(match model.signature() {
        Signature::Riemannian => c_b(b, rho)? * (vw - vg * wg),
        Signature::Lorentzian => -c_hat_b(b, rho)? * (vw + vg * wg),
    })
}

/// `Hess rho(X, X)` from the closed form.
pub fn distance_hessian_quadform(
    model: &AmbientModel,
    o: &DVector<f64>,
    x: &DVector<f64>,
    v: &DVector<f64>,
) -> Result<f64> {
    distance_hessian_bilinear(model, o, x, v, v)
}

/// `Hess rho(X, X)` by a fourth-order central difference of `rho` along the
/// geodesic through `x` with velocity `X`.
pub fn distance_hessian_fd(
    model: &AmbientModel,
    o: &DVector<f64>,
    x: &DVector<f64>,
    v: &DVector<f64>,
) -> Result<f64> {
    let speed = v.norm();
    if speed == 0.0 {
        return Ok(0.0);
    }
    let scale = x.amax().max(1.0);
    let h = 1e-3 * scale / speed;
    let f = |t: f64| ambient_distance(model, o, &model.geodesic(x, v, t));
    let f0 = f(0.0)?;
    let (fp1, fm1) = (f(h)?, f(-h)?);
    let (fp2, fm2) = (f(2.0 * h)?, f(-2.0 * h)?);
    Ok((-fp2 + 16.0 * fp1 - 30.0 * f0 + 16.0 * fm1 - fm2) / (12.0 * h * h))
}

/// Comparison bound on `Hess rho(X, X)` for radial curvature bounded by `b_bound`.
pub fn hessian_comparison_bound(
    model: &AmbientModel,
    o: &DVector<f64>,
    x: &DVector<f64>,
    v: &DVector<f64>,
    b_bound: f64,
) -> Result<f64> {
    let rho = ambient_distance(model, o, x)?;
    let grad = distance_gradient(model, o, x)?;
    let vv = model.inner(v, v);
    let vg = model.inner(v, &grad);
    Ok(match model.signature() {
        Signature::Riemannian => c_b(b_bound, rho)? * (vv - vg * vg),
        Signature::Lorentzian => -c_hat_b(b_bound, rho)? * (vv + vg * vg),
    })
}

/// `Hess rho(X, X) - bound`, with the Hessian taken by finite differences and the
/// comparison bound at the model's own curvature.
///
/// In a space form both comparison directions apply, so the residual vanishes up to the
/// finite-difference error.
pub fn hessian_comparison_residual(
    model: &AmbientModel,
    o: &DVector<f64>,
    x: &DVector<f64>,
    v: &DVector<f64>,
) -> Result<f64> {
    hessian_comparison_residual_with(model, o, x, v, model.curvature())
}

/// As [`hessian_comparison_residual`] with an explicit curvature bound `b_bound`.
///
/// For `b_bound >= b` the residual is nonnegative (the "≥" direction of both comparisons).
pub fn hessian_comparison_residual_with(
    model: &AmbientModel,
    o: &DVector<f64>,
    x: &DVector<f64>,
    v: &DVector<f64>,
    b_bound: f64,
) -> Result<f64> {
    let hess = distance_hessian_fd(model, o, x, v)?;
    Ok(hess - hessian_comparison_bound(model, o, x, v, b_bound)?)
}
