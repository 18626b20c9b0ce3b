//! Parametric hypersurface patches and their extrinsic geometry.
//!
//! A chart maps a box in `R^n` into the flat embedding space of an ambient model.
//! Frames carry the induced metric, the oriented unit normal, the second
//! fundamental form `h_ij = <N, d_i d_j f>` and the shape operator `A = -dN`.

use std::f64::consts::PI;
use std::fmt::Debug;
use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spaceform::{distance_gradient, AmbientModel, ModelKind, Signature};

/// Relative step of finite-difference jets, per unit of domain width.
pub const FD_JET_STEP: f64 = 1e-5;

/// Smallest admissible determinant of the induced metric.
pub const MIN_METRIC_DET: f64 = 1e-12;

/// Margin kept from the coordinate singularities of hyperspherical charts.
pub const POLAR_MARGIN: f64 = 0.05;

/// Axis-aligned parameter box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl ParamBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::Precondition("parameter box bounds must have equal nonzero length".into()));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
            return Err(Error::Precondition("parameter box must have lo < hi on every axis".into()));
        }
        Ok(ParamBox { lo, hi })
    }

    pub fn cube(n: usize, half_width: f64) -> Self {
        ParamBox {
            lo: vec![-half_width; n],
            hi: vec![half_width; n],
        }
    }

    /// Hyperspherical angles: polar angles away from the poles, last angle a full turn.
    pub fn angular(n: usize) -> Self {
        let mut lo = vec![POLAR_MARGIN; n];
        let mut hi = vec![PI - POLAR_MARGIN; n];
        lo[n - 1] = 0.0;
        hi[n - 1] = 2.0 * PI;
        ParamBox { lo, hi }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn width(&self, axis: usize) -> f64 {
        self.hi[axis] - self.lo[axis]
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim()
            && p.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(x, (a, b))| *x >= *a - 1e-12 && *x <= *b + 1e-12)
    }

    pub fn clamp(&self, p: &mut [f64]) {
        for (i, x) in p.iter_mut().enumerate() {
            *x = x.clamp(self.lo[i], self.hi[i]);
        }
    }

    /// Regular grid with `resolution` nodes per axis, endpoints included, in
    /// lexicographic order with the last axis fastest.
    pub fn grid(&self, resolution: usize) -> Vec<Vec<f64>> {
        let n = self.dim();
        let total = resolution.pow(n as u32);
        let mut out = Vec::with_capacity(total);
        let mut idx = vec![0usize; n];
        for _ in 0..total {
            out.push(
                (0..n)
                    .map(|a| {
                        let s = idx[a] as f64 / (resolution - 1) as f64;
                        self.lo[a] + s * self.width(a)
                    })
                    .collect(),
            );
            for a in (0..n).rev() {
                idx[a] += 1;
                if idx[a] < resolution {
                    break;
                }
                idx[a] = 0;
            }
        }
        out
    }
}

/// Position and first and second parameter derivatives of a chart.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub position: DVector<f64>,
    pub first: Vec<DVector<f64>>,
    /// `second[a * n + b] = d_a d_b f`.
    pub second: Vec<DVector<f64>>,
}

impl Jet {
    pub fn second(&self, a: usize, b: usize) -> &DVector<f64> {
        &self.second[a * self.first.len() + b]
    }
}

/// A parametrization of a hypersurface patch.
pub trait Chart: Debug + Send + Sync {
    fn name(&self) -> &str;

    fn domain(&self) -> &ParamBox;

    fn embedding_dim(&self) -> usize;

    fn position(&self, p: &[f64]) -> Result<DVector<f64>>;

    /// Exact jet, when the chart knows one.
    fn analytic_jet(&self, _p: &[f64]) -> Option<Result<Jet>> {
        None
    }

    /// Finite-difference step along `axis`.
    fn fd_step(&self, axis: usize) -> f64 {
        FD_JET_STEP * self.domain().width(axis)
    }

    /// Step of the intrinsic finite-difference route for `hess u` along `axis`.
    fn intrinsic_step(&self, axis: usize) -> f64 {
        crate::operators::INTRINSIC_STEP * self.domain().width(axis)
    }

    /// Jet by central differences of [`Chart::position`].
    fn fd_jet(&self, p: &[f64]) -> Result<Jet> {
        central_difference_jet(self, p)
    }

    /// Sample points for a grid of the given resolution.
    fn grid(&self, resolution: usize) -> Vec<Vec<f64>> {
        self.domain().grid(resolution)
    }

    fn param_dim(&self) -> usize {
        self.domain().dim()
    }
}

fn central_difference_jet<C: Chart + ?Sized>(chart: &C, p: &[f64]) -> Result<Jet> {
    let n = p.len();
    let at = |shifts: &[(usize, f64)]| {
        let mut q = p.to_vec();
        for &(a, s) in shifts {
            q[a] += s;
        }
        chart.position(&q)
    };
    let position = chart.position(p)?;
    let h: Vec<f64> = (0..n).map(|a| chart.fd_step(a)).collect();
    let mut first = Vec::with_capacity(n);
    let mut plus = Vec::with_capacity(n);
    let mut minus = Vec::with_capacity(n);
    for a in 0..n {
        let fp = at(&[(a, h[a])])?;
        let fm = at(&[(a, -h[a])])?;
        first.push((&fp - &fm) / (2.0 * h[a]));
        plus.push(fp);
        minus.push(fm);
    }
    let mut second = vec![DVector::zeros(position.len()); n * n];
    for a in 0..n {
        second[a * n + a] = (&plus[a] - &position * 2.0 + &minus[a]) / (h[a] * h[a]);
        for b in a + 1..n {
            let fpp = at(&[(a, h[a]), (b, h[b])])?;
            let fpm = at(&[(a, h[a]), (b, -h[b])])?;
            let fmp = at(&[(a, -h[a]), (b, h[b])])?;
            let fmm = at(&[(a, -h[a]), (b, -h[b])])?;
            let d = (fpp - fpm - fmp + fmm) / (4.0 * h[a] * h[b]);
            second[b * n + a] = d.clone();
            second[a * n + b] = d;
        }
    }
    Ok(Jet {
        position,
        first,
        second,
    })
}

/// Scalar jet: value, gradient and Hessian in the parameters.
#[derive(Debug, Clone)]
struct ScalarJet {
    v: f64,
    d: Vec<f64>,
    dd: DMatrix<f64>,
}

impl ScalarJet {
    fn zeros(n: usize) -> Self {
        ScalarJet {
            v: 0.0,
            d: vec![0.0; n],
            dd: DMatrix::zeros(n, n),
        }
    }
}

/// Components of the unit vector `ω(θ)` in hyperspherical coordinates with the polar
/// axis on the first coordinate: `ω_j = sin θ_0 ... sin θ_{j-1} cos θ_j`, and the last
/// component a pure product of sines.
fn hyperspherical(theta: &[f64]) -> Vec<ScalarJet> {
    let n = theta.len();
    let (s, c): (Vec<f64>, Vec<f64>) = theta.iter().map(|t| t.sin_cos()).unzip();
    (0..=n)
        .map(|j| {
            // factor i: (value, d, dd) as a function of θ_i alone
            let factor = |i: usize| -> (f64, f64, f64) {
                if i < j {
                    (s[i], c[i], -s[i])
                } else {
                    (c[i], -s[i], -c[i])
                }
            };
            let vars: Vec<usize> = (0..n.min(j + 1)).collect();
            let vals: Vec<(f64, f64, f64)> = vars.iter().map(|&i| factor(i)).collect();
            let mut jet = ScalarJet::zeros(n);
            let prod_except = |skip: &[usize]| -> f64 {
                vals.iter()
                    .enumerate()
                    .filter(|(i, _)| !skip.contains(i))
                    .map(|(_, f)| f.0)
                    .product()
            };
            jet.v = prod_except(&[]);
            for (ai, &a) in vars.iter().enumerate() {
                jet.d[a] = vals[ai].1 * prod_except(&[ai]);
                jet.dd[(a, a)] = vals[ai].2 * prod_except(&[ai]);
                for (bi, &b) in vars.iter().enumerate().skip(ai + 1) {
                    let v = vals[ai].1 * vals[bi].1 * prod_except(&[ai, bi]);
                    jet.dd[(a, b)] = v;
                    jet.dd[(b, a)] = v;
                }
            }
            jet
        })
        .collect()
}

/// Components of the unit future timelike vector `v(y) = (sqrt(1 + |y|^2), y)`.
fn hyperbolic_unit(y: &[f64]) -> Vec<ScalarJet> {
    let n = y.len();
    let s = (1.0 + y.iter().map(|a| a * a).sum::<f64>()).sqrt();
    let mut out = Vec::with_capacity(n + 1);
    let mut head = ScalarJet::zeros(n);
    head.v = s;
    for a in 0..n {
        head.d[a] = y[a] / s;
        for b in 0..n {
            let delta = if a == b { 1.0 } else { 0.0 };
            head.dd[(a, b)] = delta / s - y[a] * y[b] / (s * s * s);
        }
    }
    out.push(head);
    for a in 0..n {
        let mut jet = ScalarJet::zeros(n);
        jet.v = y[a];
        jet.d[a] = 1.0;
        out.push(jet);
    }
    out
}

/// Assemble `x = base + Σ_i columns_i w_i(p)` from scalar jets.
fn linear_combination(base: &DVector<f64>, columns: &[DVector<f64>], w: &[ScalarJet]) -> Jet {
    let n = w[0].d.len();
    let m = base.len();
    let mut position = base.clone();
    let mut first = vec![DVector::zeros(m); n];
    let mut second = vec![DVector::zeros(m); n * n];
    for (col, jet) in columns.iter().zip(w) {
        position += col * jet.v;
        for a in 0..n {
            if jet.d[a] != 0.0 {
                first[a] += col * jet.d[a];
            }
            for b in 0..n {
                let v = jet.dd[(a, b)];
                if v != 0.0 {
                    second[a * n + b] += col * v;
                }
            }
        }
    }
    Jet {
        position,
        first,
        second,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Directions {
    /// Unit vectors of a Riemannian tangent space, hyperspherical angles.
    Angular,
    /// Unit future timelike vectors, hyperbolic graph coordinates.
    Hyperbolic,
}

/// Geodesic sphere `{exp_o(r v)}` of radius `r` about `o`, in any model.
#[derive(Debug, Clone)]
pub struct GeodesicSphereChart {
    name: String,
    origin: DVector<f64>,
    frame: Vec<DVector<f64>>,
    alpha: f64,
    beta: f64,
    directions: Directions,
    domain: ParamBox,
}

impl GeodesicSphereChart {
    pub fn new(model: &AmbientModel, origin: &DVector<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::Domain(format!("geodesic sphere radius must be positive, got {radius}")));
        }
        let frame = model.tangent_frame(origin)?;
        let b = model.curvature();
        let s = b.abs().sqrt();
        let (alpha, beta) = match (model.model_kind(), b > 0.0) {
            (ModelKind::Euclidean | ModelKind::Minkowski, _) => (1.0, radius),
            (ModelKind::SphereEmbedded, _) => {
                if s * radius >= PI {
                    return Err(Error::Domain("geodesic sphere radius reaches the antipode".into()));
                }
                ((s * radius).cos(), (s * radius).sin() / s)
            }
            (ModelKind::HyperboloidEmbedded, _) => ((s * radius).cosh(), (s * radius).sinh() / s),
            (ModelKind::LorentzSpaceform, true) => ((s * radius).cosh(), (s * radius).sinh() / s),
            (ModelKind::LorentzSpaceform, false) => {
                if s * radius >= PI / 2.0 {
                    return Err(Error::Domain("geodesic sphere radius must stay below pi/(2 sqrt(-b))".into()));
                }
                ((s * radius).cos(), (s * radius).sin() / s)
            }
        };
        let n = model.hypersurface_dim();
        let (directions, domain) = match model.signature() {
            Signature::Riemannian => (Directions::Angular, ParamBox::angular(n)),
            Signature::Lorentzian => (Directions::Hyperbolic, ParamBox::cube(n, 2.0)),
        };
        Ok(GeodesicSphereChart {
            name: "geodesic_sphere".into(),
            origin: origin.clone(),
            frame,
            alpha,
            beta,
            directions,
            domain,
        })
    }

    pub fn with_domain(mut self, domain: ParamBox) -> Result<Self> {
        if domain.dim() != self.domain.dim() {
            return Err(Error::Precondition("domain dimension does not match the chart".into()));
        }
        self.domain = domain;
        Ok(self)
    }

    fn named(mut self, name: &str) -> Self {
        self.name = name.into();
        self
    }

    fn jet(&self, p: &[f64]) -> Jet {
        let w = match self.directions {
            Directions::Angular => hyperspherical(p),
            Directions::Hyperbolic => hyperbolic_unit(p),
        };
        let columns: Vec<DVector<f64>> = self.frame.iter().map(|e| e * self.beta).collect();
        linear_combination(&(&self.origin * self.alpha), &columns, &w)
    }
}

impl Chart for GeodesicSphereChart {
    fn name(&self) -> &str {
        &self.name
    }

    fn domain(&self) -> &ParamBox {
        &self.domain
    }

    fn embedding_dim(&self) -> usize {
        self.origin.len()
    }

    fn position(&self, p: &[f64]) -> Result<DVector<f64>> {
        Ok(self.jet(p).position)
    }

    fn analytic_jet(&self, p: &[f64]) -> Option<Result<Jet>> {
        Some(Ok(self.jet(p)))
    }
}

/// Ellipsoid `center + diag(axes) ω` in Euclidean space.
#[derive(Debug, Clone)]
pub struct EllipsoidChart {
    center: DVector<f64>,
    axes: Vec<f64>,
    domain: ParamBox,
}

impl EllipsoidChart {
    pub fn new(center: &DVector<f64>, axes: &[f64]) -> Result<Self> {
        if axes.len() != center.len() || axes.len() < 2 {
            return Err(Error::Precondition(format!(
                "ellipsoid needs one semi-axis per coordinate ({}), got {}",
                center.len(),
                axes.len()
            )));
        }
        if axes.iter().any(|a| !(*a > 0.0)) {
            return Err(Error::Domain("ellipsoid semi-axes must be positive".into()));
        }
        Ok(EllipsoidChart {
            center: center.clone(),
            axes: axes.to_vec(),
            domain: ParamBox::angular(axes.len() - 1),
        })
    }

    fn jet(&self, p: &[f64]) -> Jet {
        let m = self.axes.len();
        let columns: Vec<DVector<f64>> = (0..m)
            .map(|i| {
                let mut e = DVector::zeros(m);
                e[i] = self.axes[i];
                e
            })
            .collect();
        linear_combination(&self.center, &columns, &hyperspherical(p))
    }
}

impl Chart for EllipsoidChart {
    fn name(&self) -> &str {
        "ellipsoid"
    }

    fn domain(&self) -> &ParamBox {
        &self.domain
    }

    fn embedding_dim(&self) -> usize {
        self.axes.len()
    }

    fn position(&self, p: &[f64]) -> Result<DVector<f64>> {
        Ok(self.jet(p).position)
    }

    fn analytic_jet(&self, p: &[f64]) -> Option<Result<Jet>> {
        Some(Ok(self.jet(p)))
    }
}

/// Round cylinder of radius `r` about the last axis of `R^3`, parameters `(θ, z)`.
#[derive(Debug, Clone)]
pub struct CylinderChart {
    radius: f64,
    domain: ParamBox,
}

impl CylinderChart {
    pub fn new(radius: f64, half_height: f64) -> Result<Self> {
        if !(radius > 0.0 && half_height > 0.0) {
            return Err(Error::Domain("cylinder radius and height must be positive".into()));
        }
        Ok(CylinderChart {
            radius,
            domain: ParamBox::new(vec![0.0, -half_height], vec![2.0 * PI, half_height])?,
        })
    }
}

impl Chart for CylinderChart {
    fn name(&self) -> &str {
        "cylinder"
    }

    fn domain(&self) -> &ParamBox {
        &self.domain
    }

    fn embedding_dim(&self) -> usize {
        3
    }

    fn position(&self, p: &[f64]) -> Result<DVector<f64>> {
        let (s, c) = p[0].sin_cos();
        Ok(DVector::from_vec(vec![self.radius * c, self.radius * s, p[1]]))
    }

    fn analytic_jet(&self, p: &[f64]) -> Option<Result<Jet>> {
        let (s, c) = p[0].sin_cos();
        let r = self.radius;
        let v = |a: f64, b: f64, z: f64| DVector::from_vec(vec![a, b, z]);
        Some(Ok(Jet {
            position: v(r * c, r * s, p[1]),
            first: vec![v(-r * s, r * c, 0.0), v(0.0, 0.0, 1.0)],
            second: vec![v(-r * c, -r * s, 0.0), v(0.0, 0.0, 0.0), v(0.0, 0.0, 0.0), v(0.0, 0.0, 0.0)],
        }))
    }
}

/// One term `coef * Π y_i^{powers_i}` of a polynomial height function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coef: f64,
    pub powers: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq)]
enum Height {
    Polynomial(Vec<Monomial>),
    /// `sqrt(r^2 + |y|^2) + eps exp(-|y|^2)`.
    Hyperboloid { radius: f64, epsilon: f64 },
}

impl Height {
    fn jet(&self, y: &[f64]) -> ScalarJet {
        let n = y.len();
        let mut jet = ScalarJet::zeros(n);
        match self {
            Height::Polynomial(terms) => {
                let pow = |x: f64, k: i64| if k < 0 { 0.0 } else { x.powi(k as i32) };
                for t in terms {
                    let e: Vec<i64> = t.powers.iter().map(|&k| k as i64).collect();
                    let mono = |exps: &[i64]| -> f64 { (0..n).map(|i| pow(y[i], exps[i])).product() };
                    jet.v += t.coef * mono(&e);
                    for a in 0..n {
                        let mut ea = e.clone();
                        ea[a] -= 1;
                        jet.d[a] += t.coef * e[a] as f64 * mono(&ea);
                        for b in 0..n {
                            let mut eab = ea.clone();
                            eab[b] -= 1;
                            jet.dd[(a, b)] += t.coef * e[a] as f64 * ea[b] as f64 * mono(&eab);
                        }
                    }
                }
            }
            Height::Hyperboloid { radius, epsilon } => {
                let q: f64 = y.iter().map(|a| a * a).sum();
                let s = (radius * radius + q).sqrt();
                let bump = epsilon * (-q).exp();
                jet.v = s + bump;
                for a in 0..n {
                    jet.d[a] = y[a] / s - 2.0 * y[a] * bump;
                    for b in 0..n {
                        let delta = if a == b { 1.0 } else { 0.0 };
                        jet.dd[(a, b)] = delta / s - y[a] * y[b] / (s * s * s)
                            + (4.0 * y[a] * y[b] - 2.0 * delta) * bump;
                    }
                }
            }
        }
        jet
    }
}

/// Graph of a height function over a box. The height goes in the last coordinate
/// of Euclidean space and in the time coordinate of Minkowski space.
#[derive(Debug, Clone)]
pub struct GraphChart {
    name: String,
    height: Height,
    time_graph: bool,
    domain: ParamBox,
}

impl GraphChart {
    pub fn polynomial(n: usize, terms: Vec<Monomial>, half_width: f64, time_graph: bool) -> Result<Self> {
        if terms.iter().any(|t| t.powers.len() != n) {
            return Err(Error::Precondition(format!("every monomial needs {n} exponents")));
        }
        Ok(GraphChart {
            name: "graph".into(),
            height: Height::Polynomial(terms),
            time_graph,
            domain: ParamBox::cube(n, half_width),
        })
    }

    /// Spacelike graph `t = sqrt(r^2 + |y|^2) + eps exp(-|y|^2)` in Minkowski space.
    pub fn hyperboloid(n: usize, radius: f64, epsilon: f64, half_width: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::Domain("hyperboloid radius must be positive".into()));
        }
        Ok(GraphChart {
            name: if epsilon == 0.0 { "hyperboloid" } else { "perturbed_hyperboloid" }.into(),
            height: Height::Hyperboloid { radius, epsilon },
            time_graph: true,
            domain: ParamBox::cube(n, half_width),
        })
    }

    fn jet(&self, y: &[f64]) -> Jet {
        let n = y.len();
        let h = self.height.jet(y);
        let m = n + 1;
        let (hi, off) = if self.time_graph { (0, 1) } else { (n, 0) };
        let unit = |i: usize, v: f64| {
            let mut e = DVector::zeros(m);
            e[i] = v;
            e
        };
        let mut position = unit(hi, h.v);
        for a in 0..n {
            position[a + off] = y[a];
        }
        let first = (0..n)
            .map(|a| {
                let mut e = unit(hi, h.d[a]);
                e[a + off] = 1.0;
                e
            })
            .collect();
        let mut second = Vec::with_capacity(n * n);
        for a in 0..n {
            for b in 0..n {
                second.push(unit(hi, h.dd[(a, b)]));
            }
        }
        Jet {
            position,
            first,
            second,
        }
    }
}

impl Chart for GraphChart {
    fn name(&self) -> &str {
        &self.name
    }

    fn domain(&self) -> &ParamBox {
        &self.domain
    }

    fn embedding_dim(&self) -> usize {
        self.domain.dim() + 1
    }

    fn position(&self, p: &[f64]) -> Result<DVector<f64>> {
        Ok(self.jet(p).position)
    }

    fn analytic_jet(&self, p: &[f64]) -> Option<Result<Jet>> {
        Some(Ok(self.jet(p)))
    }
}

/// Chart given by samples on a regular parameter grid.
///
/// CSV columns: `p0..p{n-1}`, `x0..x{m-1}`, and optionally the jets `d{a}_x{j}` and
/// `d{a}{b}_x{j}`. Without jets, derivatives are central differences on the grid and
/// only nodes two layers inside the grid are sampled.
#[derive(Debug, Clone)]
pub struct TabulatedChart {
    axes: Vec<Vec<f64>>,
    positions: Vec<DVector<f64>>,
    jets: Option<Vec<(Vec<DVector<f64>>, Vec<DVector<f64>>)>>,
    domain: ParamBox,
}

impl TabulatedChart {
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
        let header: Vec<String> = lines
            .next()
            .ok_or_else(|| Error::Precondition("tabulated chart: empty file".into()))?
            .split(',')
            .map(|s| s.trim().to_string())
            .collect();
        let col = |name: &str| header.iter().position(|h| h == name);
        let n = (0..).take_while(|i| col(&format!("p{i}")).is_some()).count();
        let m = (0..).take_while(|i| col(&format!("x{i}")).is_some()).count();
        if n == 0 || m != n + 1 && m != n + 2 {
            return Err(Error::Precondition(format!(
                "tabulated chart: found {n} parameter and {m} position columns"
            )));
        }
        let first_cols: Option<Vec<Vec<usize>>> = (0..n)
            .map(|a| (0..m).map(|j| col(&format!("d{a}_x{j}"))).collect())
            .collect();
        let second_cols: Option<Vec<Vec<usize>>> = (0..n)
            .flat_map(|a| (0..n).map(move |b| (a, b)))
            .map(|(a, b)| {
                let (a, b) = (a.min(b), a.max(b));
                (0..m).map(|j| col(&format!("d{a}{b}_x{j}"))).collect()
            })
            .collect();
        let with_jets = first_cols.is_some() && second_cols.is_some();

        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (ln, line) in lines.enumerate() {
            let row: std::result::Result<Vec<f64>, _> = line.split(',').map(|s| s.trim().parse::<f64>()).collect();
            let row = row.map_err(|e| Error::Precondition(format!("tabulated chart: data row {}: {e}", ln + 1)))?;
            if row.len() != header.len() {
                return Err(Error::Precondition(format!(
                    "tabulated chart: data row {} has {} fields, header has {}",
                    ln + 1,
                    row.len(),
                    header.len()
                )));
            }
            rows.push(row);
        }
        let pcol: Vec<usize> = (0..n).map(|a| col(&format!("p{a}")).unwrap()).collect();
        let mut axes: Vec<Vec<f64>> = vec![Vec::new(); n];
        for row in &rows {
            for a in 0..n {
                axes[a].push(row[pcol[a]]);
            }
        }
        for ax in axes.iter_mut() {
            ax.sort_by(f64::total_cmp);
            ax.dedup_by(|x, y| (*x - *y).abs() <= 1e-12 * (1.0 + y.abs()));
        }
        let total: usize = axes.iter().map(Vec::len).product();
        if total != rows.len() || axes.iter().any(|a| a.len() < 2) {
            return Err(Error::Precondition(format!(
                "tabulated chart: {} rows do not form a full regular grid ({} nodes)",
                rows.len(),
                total
            )));
        }
        let mut positions = vec![DVector::zeros(m); total];
        let mut jets = with_jets.then(|| vec![(Vec::new(), Vec::new()); total]);
        let mut seen = vec![false; total];
        let chart_axes = axes.clone();
        for row in &rows {
            let p: Vec<f64> = pcol.iter().map(|&c| row[c]).collect();
            let idx = node_index(&chart_axes, &p)
                .ok_or_else(|| Error::Precondition("tabulated chart: row off the grid".into()))?;
            if seen[idx] {
                return Err(Error::Precondition(format!("tabulated chart: duplicate node {p:?}")));
            }
            seen[idx] = true;
            positions[idx] = DVector::from_iterator(m, (0..m).map(|j| row[col(&format!("x{j}")).unwrap()]));
            if let (Some(jets), Some(fc), Some(sc)) = (jets.as_mut(), first_cols.as_ref(), second_cols.as_ref()) {
                let pick = |cols: &Vec<usize>| DVector::from_iterator(m, cols.iter().map(|&c| row[c]));
                jets[idx] = (fc.iter().map(pick).collect(), sc.iter().map(pick).collect());
            }
        }
        let domain = ParamBox::new(
            axes.iter().map(|a| a[0]).collect(),
            axes.iter().map(|a| *a.last().unwrap()).collect(),
        )?;
        Ok(TabulatedChart {
            axes,
            positions,
            jets,
            domain,
        })
    }

    fn spacing(&self, axis: usize) -> f64 {
        let a = &self.axes[axis];
        (a[a.len() - 1] - a[0]) / (a.len() - 1) as f64
    }

    fn margin(&self) -> usize {
        // nodes whose neighbours carry jets
        if self.jets.is_some() {
            1
        } else {
            2
        }
    }
}

fn node_index(axes: &[Vec<f64>], p: &[f64]) -> Option<usize> {
    let mut idx = 0;
    for (a, ax) in axes.iter().enumerate() {
        let tol = 1e-9 * (ax[ax.len() - 1] - ax[0]);
        let i = ax.iter().position(|x| (x - p[a]).abs() <= tol)?;
        idx = idx * ax.len() + i;
    }
    Some(idx)
}

impl Chart for TabulatedChart {
    fn name(&self) -> &str {
        "tabulated"
    }

    fn domain(&self) -> &ParamBox {
        &self.domain
    }

    fn embedding_dim(&self) -> usize {
        self.positions[0].len()
    }

    fn position(&self, p: &[f64]) -> Result<DVector<f64>> {
        node_index(&self.axes, p)
            .map(|i| self.positions[i].clone())
            .ok_or_else(|| Error::Domain(format!("tabulated chart has no node at {p:?}")))
    }

    fn analytic_jet(&self, p: &[f64]) -> Option<Result<Jet>> {
        let jets = self.jets.as_ref()?;
        Some(node_index(&self.axes, p).map(|i| {
            let (first, second) = jets[i].clone();
            Jet {
                position: self.positions[i].clone(),
                first,
                second,
            }
        }).ok_or_else(|| Error::Domain(format!("tabulated chart has no node at {p:?}"))))
    }

    fn fd_step(&self, axis: usize) -> f64 {
        self.spacing(axis)
    }

    fn intrinsic_step(&self, axis: usize) -> f64 {
        self.spacing(axis)
    }

    /// The table fixes the grid; `resolution` is ignored.
    fn grid(&self, _resolution: usize) -> Vec<Vec<f64>> {
        let k = self.margin();
        let inner: Vec<Vec<f64>> = self
            .axes
            .iter()
            .map(|a| a[k.min(a.len())..a.len().saturating_sub(k)].to_vec())
            .collect();
        if inner.iter().any(Vec::is_empty) {
            return Vec::new();
        }
        let lens: Vec<usize> = inner.iter().map(Vec::len).collect();
        let total: usize = lens.iter().product();
        (0..total)
            .map(|mut i| {
                let mut p = vec![0.0; lens.len()];
                for a in (0..lens.len()).rev() {
                    p[a] = inner[a][i % lens[a]];
                    i /= lens[a];
                }
                p
            })
            .collect()
    }
}

/// Built-in charts addressable by name from scenario files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChartSpec {
    /// Round sphere in Euclidean space about the scenario center.
    Sphere { radius: f64 },
    Ellipsoid { axes: Vec<f64> },
    Cylinder { radius: f64, #[serde(default = "one")] half_height: f64 },
    Graph {
        terms: Vec<Monomial>,
        #[serde(default = "one")]
        half_width: f64,
    },
    /// Geodesic sphere about the scenario center in any model.
    GeodesicSphere { radius: f64 },
    Hyperboloid {
        radius: f64,
        #[serde(default = "two")]
        half_width: f64,
    },
    PerturbedHyperboloid {
        radius: f64,
        epsilon: f64,
        #[serde(default = "two")]
        half_width: f64,
    },
    Tabulated { path: String },
}

fn one() -> f64 {
    1.0
}

fn two() -> f64 {
    2.0
}

impl ChartSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ChartSpec::Sphere { .. } => "sphere",
            ChartSpec::Ellipsoid { .. } => "ellipsoid",
            ChartSpec::Cylinder { .. } => "cylinder",
            ChartSpec::Graph { .. } => "graph",
            ChartSpec::GeodesicSphere { .. } => "geodesic_sphere",
            ChartSpec::Hyperboloid { .. } => "hyperboloid",
            ChartSpec::PerturbedHyperboloid { .. } => "perturbed_hyperboloid",
            ChartSpec::Tabulated { .. } => "tabulated",
        }
    }

    /// Instantiate the chart in `model` about `center`. Relative tabulated paths
    /// resolve against `base_dir`.
    pub fn build(
        &self,
        model: &AmbientModel,
        center: &DVector<f64>,
        base_dir: Option<&std::path::Path>,
    ) -> Result<Arc<dyn Chart>> {
        let n = model.hypersurface_dim();
        let need = |kind: ModelKind| {
            if model.model_kind() == kind {
                Ok(())
            } else {
                Err(Error::Precondition(format!(
                    "chart '{}' needs a {kind:?} ambient model",
                    self.name()
                )))
            }
        };
        Ok(match self {
            ChartSpec::Sphere { radius } => {
                need(ModelKind::Euclidean)?;
                Arc::new(GeodesicSphereChart::new(model, center, *radius)?.named("sphere"))
            }
            ChartSpec::Ellipsoid { axes } => {
                need(ModelKind::Euclidean)?;
                Arc::new(EllipsoidChart::new(center, axes)?)
            }
            ChartSpec::Cylinder { radius, half_height } => {
                need(ModelKind::Euclidean)?;
                if n != 2 {
                    return Err(Error::Precondition("cylinder chart lives in R^3".into()));
                }
                Arc::new(CylinderChart::new(*radius, *half_height)?)
            }
            ChartSpec::Graph { terms, half_width } => {
                let time_graph = match model.model_kind() {
                    ModelKind::Euclidean => false,
                    ModelKind::Minkowski => true,
                    _ => {
                        return Err(Error::Precondition(
                            "graph charts need a Euclidean or Minkowski ambient model".into(),
                        ))
                    }
                };
                Arc::new(GraphChart::polynomial(n, terms.clone(), *half_width, time_graph)?)
            }
            ChartSpec::GeodesicSphere { radius } => Arc::new(GeodesicSphereChart::new(model, center, *radius)?),
            ChartSpec::Hyperboloid { radius, half_width } => {
                need(ModelKind::Minkowski)?;
                Arc::new(GraphChart::hyperboloid(n, *radius, 0.0, *half_width)?)
            }
            ChartSpec::PerturbedHyperboloid {
                radius,
                epsilon,
                half_width,
            } => {
                need(ModelKind::Minkowski)?;
                Arc::new(GraphChart::hyperboloid(n, *radius, *epsilon, *half_width)?)
            }
            ChartSpec::Tabulated { path } => {
                let mut full = std::path::PathBuf::from(path);
                if full.is_relative() {
                    if let Some(dir) = base_dir {
                        full = dir.join(full);
                    }
                }
                let text = std::fs::read_to_string(&full)
                    .map_err(|e| Error::Precondition(format!("cannot read {}: {e}", full.display())))?;
                let chart = TabulatedChart::from_csv(&text)?;
                if chart.param_dim() != n || chart.embedding_dim() != model.embedding_dim() {
                    return Err(Error::Precondition(
                        "tabulated chart dimensions do not match the ambient model".into(),
                    ));
                }
                Arc::new(chart)
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// Normal pointing towards the reference center.
    Inner,
    Outer,
    /// Future-directed timelike normal.
    Future,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JetMode {
    #[default]
    Analytic,
    FiniteDifference,
}

/// A chart together with its ambient model and orientation.
#[derive(Debug, Clone)]
pub struct HypersurfacePatch {
    pub chart: Arc<dyn Chart>,
    pub ambient: AmbientModel,
    pub orientation: Orientation,
    /// Reference center used by inner/outer orientations.
    pub center: Option<DVector<f64>>,
    pub jets: JetMode,
}

impl HypersurfacePatch {
    pub fn new(
        chart: Arc<dyn Chart>,
        ambient: AmbientModel,
        orientation: Orientation,
        center: Option<DVector<f64>>,
    ) -> Result<Self> {
        match (ambient.signature(), orientation) {
            (Signature::Lorentzian, Orientation::Future) | (Signature::Riemannian, Orientation::Inner | Orientation::Outer) => {}
            (Signature::Lorentzian, _) => {
                return Err(Error::Precondition("Lorentzian patches must use the future orientation".into()))
            }
            (Signature::Riemannian, _) => {
                return Err(Error::Precondition("the future orientation needs a Lorentzian ambient".into()))
            }
        }
        if orientation != Orientation::Future && center.is_none() {
            return Err(Error::Precondition("inner/outer orientation needs a reference center".into()));
        }
        if let Some(c) = &center {
            ambient.validate_point(c)?;
        }
        if chart.embedding_dim() != ambient.embedding_dim() || chart.param_dim() != ambient.hypersurface_dim() {
            return Err(Error::Precondition(format!(
                "chart '{}' maps R^{} into R^{}, ambient needs R^{} into R^{}",
                chart.name(),
                chart.param_dim(),
                chart.embedding_dim(),
                ambient.hypersurface_dim(),
                ambient.embedding_dim()
            )));
        }
        Ok(HypersurfacePatch {
            chart,
            ambient,
            orientation,
            center,
            jets: JetMode::Analytic,
        })
    }

    pub fn with_jets(mut self, jets: JetMode) -> Self {
        self.jets = jets;
        self
    }

    pub fn flipped(&self) -> Self {
        let mut out = self.clone();
        out.orientation = match self.orientation {
            Orientation::Inner => Orientation::Outer,
            Orientation::Outer => Orientation::Inner,
            Orientation::Future => Orientation::Future,
        };
        out
    }

    pub fn dim(&self) -> usize {
        self.chart.param_dim()
    }

    pub fn jet(&self, p: &[f64]) -> Result<Jet> {
        if self.jets == JetMode::Analytic {
            if let Some(jet) = self.chart.analytic_jet(p) {
                return jet;
            }
        }
        self.chart.fd_jet(p)
    }

    /// Induced metric `g_ab = <d_a f, d_b f>` at `p`.
    pub fn metric(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        let jet = self.jet(p)?;
        Ok(gram(&self.ambient, &jet.first))
    }
}

fn gram(model: &AmbientModel, vs: &[DVector<f64>]) -> DMatrix<f64> {
    let n = vs.len();
    DMatrix::from_fn(n, n, |a, b| model.inner(&vs[a], &vs[b]))
}

/// Extrinsic geometry of a patch at one parameter point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointFrame {
    pub param: Vec<f64>,
    pub position: DVector<f64>,
    pub tangents: Vec<DVector<f64>>,
    pub metric: DMatrix<f64>,
    pub normal: DVector<f64>,
    /// `h_ab = <N, d_a d_b f>`.
    pub second_form: DMatrix<f64>,
    /// `g^{-1} h` in the chart basis.
    pub shape_operator: DMatrix<f64>,
    /// Lower Cholesky factor `L` of the metric, `g = L L^T`.
    pub chol: DMatrix<f64>,
    /// Shape operator in the orthonormal frame `L^{-T}`: `L^{-1} h L^{-T}`.
    pub ortho_shape: DMatrix<f64>,
    /// Eigenvalues of `ortho_shape`, ascending.
    pub principal_curvatures: Vec<f64>,
    /// `<N, N>`, `+1` or `-1`.
    pub normal_sign: f64,
}

impl PointFrame {
    /// Components of a chart-basis covector in the orthonormal frame.
    pub fn ortho_covector(&self, v: &DVector<f64>) -> DVector<f64> {
        self.chol
            .solve_lower_triangular(v)
            .expect("Cholesky factor has a nonzero diagonal")
    }

    /// Chart-basis bilinear form expressed in the orthonormal frame.
    pub fn ortho_form(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let left = self
            .chol
            .solve_lower_triangular(m)
            .expect("Cholesky factor has a nonzero diagonal");
        let both = self
            .chol
            .solve_lower_triangular(&left.transpose())
            .expect("Cholesky factor has a nonzero diagonal");
        (&both + both.transpose()) * 0.5
    }
}

/// Generalized cross product: the vector `c` with `<c, v_i> = 0` for all rows,
/// built from the cofactors of the index-lowered rows.
fn cross_product(model: &AmbientModel, rows: &[DVector<f64>]) -> DVector<f64> {
    let m = rows.len() + 1;
    let lowered = DMatrix::from_fn(rows.len(), m, |i, j| model.metric_sign(j) * rows[i][j]);
    DVector::from_fn(m, |j, _| {
        let minor = lowered.clone().remove_column(j);
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        sign * minor.determinant()
    })
}

/// Frame of `patch` at `p`.
pub fn frame_at(patch: &HypersurfacePatch, p: &[f64]) -> Result<PointFrame> {
    if !patch.chart.domain().contains(p) {
        return Err(Error::Precondition(format!("parameter {p:?} lies outside the chart domain")));
    }
    let model = &patch.ambient;
    let jet = patch.jet(p)?;
    let x = jet.position.clone();
    let n = jet.first.len();
    let metric = gram(model, &jet.first);
    let scale = metric.amax().max(1e-300);
    let g_eig = SymmetricEigen::new(metric.clone()).eigenvalues;
    let min_eig = g_eig.iter().copied().fold(f64::INFINITY, f64::min);
    if model.signature() == Signature::Lorentzian && min_eig < -1e-12 * scale {
        return Err(Error::Signature(format!(
            "tangent plane at {p:?} is not spacelike (metric eigenvalue {min_eig:e})"
        )));
    }
    let det = metric.determinant();
    if !(det > MIN_METRIC_DET) {
        return Err(Error::Degenerate { det, at: p.to_vec() });
    }

    let mut rows = jet.first.clone();
    if model.is_quadric() {
        rows.push(x.clone());
    }
    let c = cross_product(model, &rows);
    let cc = model.inner(&c, &c);
    let expected = match model.signature() {
        Signature::Riemannian => 1.0,
        Signature::Lorentzian => -1.0,
    };
    if cc * expected <= 0.0 {
        return Err(Error::Signature(format!("normal at {p:?} has <N,N> = {cc:e}")));
    }
    let mut normal = c / cc.abs().sqrt();
    let flip = match patch.orientation {
        Orientation::Future => !model.is_future(&x, &normal),
        Orientation::Inner | Orientation::Outer => {
            let center = patch.center.as_ref().expect("checked at construction");
            let radial = distance_gradient(model, center, &x)?;
            let s = model.inner(&normal, &radial);
            if s.abs() < 1e-12 {
                return Err(Error::Numerical(format!(
                    "normal at {p:?} is tangent to the distance sphere; inner/outer is undefined"
                )));
            }
            (s > 0.0) == (patch.orientation == Orientation::Inner)
        }
    };
    if flip {
        normal = -normal;
    }

    let second_form = DMatrix::from_fn(n, n, |a, b| {
        let v = 0.5 * (model.inner(&normal, jet.second(a, b)) + model.inner(&normal, jet.second(b, a)));
        v
    });
    let chol = Cholesky::new(metric.clone())
        .ok_or_else(|| Error::Degenerate { det, at: p.to_vec() })?;
    let shape_operator = chol.solve(&second_form);
    let l = chol.l();
    let mut frame = PointFrame {
        param: p.to_vec(),
        position: x,
        tangents: jet.first,
        metric,
        normal,
        second_form,
        shape_operator,
        chol: l,
        ortho_shape: DMatrix::zeros(n, n),
        principal_curvatures: Vec::new(),
        normal_sign: expected,
    };
    frame.ortho_shape = frame.ortho_form(&frame.second_form);
    frame.principal_curvatures = principal_curvatures(&frame)?;
    Ok(frame)
}

/// Principal curvatures, ascending, from the Cholesky-congruent symmetric problem.
pub fn principal_curvatures(frame: &PointFrame) -> Result<Vec<f64>> {
    let b = &frame.ortho_shape;
    if b.iter().any(|v| !v.is_finite()) {
        let cond = {
            let e = SymmetricEigen::new(frame.metric.clone()).eigenvalues;
            let (lo, hi) = e.iter().fold((f64::INFINITY, 0.0f64), |(l, h), v| (l.min(*v), h.max(*v)));
            hi / lo
        };
        return Err(Error::Numerical(format!(
            "non-finite shape operator at {:?} (metric condition number {cond:e})",
            frame.param
        )));
    }
    let mut k: Vec<f64> = SymmetricEigen::new(b.clone()).eigenvalues.iter().copied().collect();
    k.sort_by(f64::total_cmp);
    Ok(k)
}

/// One evaluated grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub params: Vec<f64>,
    pub frame: PointFrame,
}

#[derive(Debug, Clone)]
pub struct SampleGrid {
    pub samples: Vec<Sample>,
    /// Skipped parameter points and the reason each failed.
    pub skipped: Vec<(Vec<f64>, Error)>,
}

/// Frames on a regular grid, in deterministic lexicographic order.
pub fn sample_grid(patch: &HypersurfacePatch, resolution: usize) -> Result<SampleGrid> {
    if resolution < 2 {
        return Err(Error::Precondition(format!("grid resolution must be at least 2, got {resolution}")));
    }
    let mut samples = Vec::new();
    let mut skipped = Vec::new();
    for p in patch.chart.grid(resolution) {
        match frame_at(patch, &p) {
            Ok(frame) => samples.push(Sample { params: p, frame }),
            Err(e @ (Error::Degenerate { .. } | Error::Signature(_) | Error::Domain(_) | Error::Numerical(_))) => {
                skipped.push((p, e))
            }
            Err(e) => return Err(e),
        }
    }
    if samples.is_empty() {
        return Err(Error::EmptySample { skipped: skipped.len() });
    }
    Ok(SampleGrid { samples, skipped })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn origin(m: usize) -> DVector<f64> {
        DVector::zeros(m)
    }

    fn euclidean_sphere(r: f64) -> HypersurfacePatch {
        let model = AmbientModel::euclidean(3).unwrap();
        let chart = GeodesicSphereChart::new(&model, &origin(3), r).unwrap();
        HypersurfacePatch::new(Arc::new(chart), model, Orientation::Inner, Some(origin(3))).unwrap()
    }

    #[test]
    fn unit_sphere_shape_operator_is_identity() {
        let patch = euclidean_sphere(1.0);
        for p in [[0.3, 1.0], [1.5, 4.0], [2.9, 0.0]] {
            let f = frame_at(&patch, &p).unwrap();
            assert!((&f.shape_operator - DMatrix::identity(2, 2)).amax() < 1e-12);
            assert!((f.position.norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn sphere_radius_r() {
        for n in 2..=4 {
            let model = AmbientModel::euclidean(n + 1).unwrap();
            let chart = GeodesicSphereChart::new(&model, &origin(n + 1), 2.5).unwrap();
            let patch = HypersurfacePatch::new(Arc::new(chart), model, Orientation::Inner, Some(origin(n + 1))).unwrap();
            let grid = sample_grid(&patch, 5).unwrap();
            for s in &grid.samples {
                for k in &s.frame.principal_curvatures {
                    assert!((k - 0.4).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn cylinder_curvatures() {
        let model = AmbientModel::euclidean(3).unwrap();
        let patch = HypersurfacePatch::new(
            Arc::new(CylinderChart::new(1.0, 1.0).unwrap()),
            model,
            Orientation::Inner,
            Some(origin(3)),
        )
        .unwrap();
        let f = frame_at(&patch, &[0.7, 0.4]).unwrap();
        assert!(f.principal_curvatures[0].abs() < 1e-14);
        assert!((f.principal_curvatures[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn minkowski_hyperboloid_shape_operator() {
        let r = 2.0;
        let model = AmbientModel::minkowski(3).unwrap();
        let chart = GraphChart::hyperboloid(2, r, 0.0, 2.0).unwrap();
        let patch = HypersurfacePatch::new(Arc::new(chart), model, Orientation::Future, None).unwrap();
        for p in [[0.0, 0.0], [1.2, -0.7], [-2.0, 2.0]] {
            let f = frame_at(&patch, &p).unwrap();
            assert!((&f.normal - &f.position / r).amax() < 1e-12);
            assert!((&f.shape_operator + DMatrix::identity(2, 2) / r).amax() < 1e-12);
            assert!((model.inner(&f.normal, &f.normal) + 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ellipsoid_pole_curvature() {
        let (a, c) = (1.3, 0.7);
        let model = AmbientModel::euclidean(3).unwrap();
        // polar axis of the chart is the first coordinate, so put c there
        let chart = EllipsoidChart::new(&origin(3), &[c, a, a]).unwrap();
        let patch = HypersurfacePatch::new(Arc::new(chart).clone(), model, Orientation::Inner, Some(origin(3)))
            .unwrap();
        let f = frame_at(&patch, &[POLAR_MARGIN, 1.0]).unwrap();
        // near the pole, both curvatures approach c / a^2
        for k in &f.principal_curvatures {
            assert!((k - c / (a * a)).abs() < 0.02);
        }
        // graph chart at the pole gives the exact value
        let terms = vec![
            Monomial { coef: -c / (2.0 * a * a), powers: vec![2, 0] },
            Monomial { coef: -c / (2.0 * a * a), powers: vec![0, 2] },
        ];
        let graph = GraphChart::polynomial(2, terms, 0.1, false).unwrap();
        let patch = HypersurfacePatch::new(Arc::new(graph), model, Orientation::Inner, Some(DVector::from_vec(vec![0.0, 0.0, -5.0])))
            .unwrap();
        let f = frame_at(&patch, &[0.0, 0.0]).unwrap();
        for k in &f.principal_curvatures {
            assert!((k - c / (a * a)).abs() < 1e-12);
        }
    }

    #[test]
    fn flipping_orientation_negates_shape_operator() {
        let model = AmbientModel::euclidean(3).unwrap();
        let patch = HypersurfacePatch::new(
            Arc::new(EllipsoidChart::new(&origin(3), &[1.0, 1.4, 0.6]).unwrap()),
            model,
            Orientation::Inner,
            Some(origin(3)),
        )
        .unwrap();
        let p = [1.1, 2.3];
        let a = frame_at(&patch, &p).unwrap();
        let b = frame_at(&patch.flipped(), &p).unwrap();
        assert!((&a.shape_operator + &b.shape_operator).amax() < 1e-12);
    }

    #[test]
    fn analytic_and_fd_jets_agree() {
        let patch = euclidean_sphere(1.7);
        let fd = patch.clone().with_jets(JetMode::FiniteDifference);
        for p in [[0.4, 0.3], [2.0, 5.0]] {
            let a = frame_at(&patch, &p).unwrap();
            let b = frame_at(&fd, &p).unwrap();
            for (x, y) in a.principal_curvatures.iter().zip(&b.principal_curvatures) {
                assert!((x - y).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn grid_skips_polar_singularity() {
        let model = AmbientModel::euclidean(3).unwrap();
        let chart = GeodesicSphereChart::new(&model, &origin(3), 1.0)
            .unwrap()
            .with_domain(ParamBox::new(vec![0.0, 0.0], vec![PI / 2.0, 2.0 * PI]).unwrap())
            .unwrap();
        let patch = HypersurfacePatch::new(Arc::new(chart), model, Orientation::Inner, Some(origin(3))).unwrap();
        let grid = sample_grid(&patch, 10).unwrap();
        assert_eq!(grid.skipped.len(), 10);
        assert!(grid.skipped.iter().all(|(p, e)| p[0] == 0.0 && matches!(e, Error::Degenerate { .. })));
        assert_eq!(grid.samples.len(), 90);

        let full = sample_grid(&euclidean_sphere(1.0), 10).unwrap();
        assert_eq!((full.samples.len(), full.skipped.len()), (100, 0));
        assert!(matches!(sample_grid(&euclidean_sphere(1.0), 1), Err(Error::Precondition(_))));
    }

    #[test]
    fn timelike_plane_is_rejected() {
        let model = AmbientModel::minkowski(3).unwrap();
        // t = 2 y_0 is a timelike plane
        let terms = vec![Monomial { coef: 2.0, powers: vec![1, 0] }];
        let patch = HypersurfacePatch::new(
            Arc::new(GraphChart::polynomial(2, terms, 1.0, true).unwrap()),
            model,
            Orientation::Future,
            None,
        )
        .unwrap();
        assert!(matches!(frame_at(&patch, &[0.0, 0.0]), Err(Error::Signature(_))));
    }

    #[test]
    fn orientation_rules() {
        let model = AmbientModel::minkowski(3).unwrap();
        let chart = Arc::new(GraphChart::hyperboloid(2, 1.0, 0.0, 2.0).unwrap());
        assert!(HypersurfacePatch::new(chart.clone(), model, Orientation::Inner, Some(origin(3))).is_err());
        let e3 = AmbientModel::euclidean(3).unwrap();
        let sph = Arc::new(EllipsoidChart::new(&origin(3), &[1.0, 1.0, 1.0]).unwrap());
        assert!(HypersurfacePatch::new(sph, e3, Orientation::Future, None).is_err());
    }

    #[test]
    fn geodesic_spheres_in_curved_models() {
        let r: f64 = 0.8;
        for (model, kappa) in [
            (AmbientModel::sphere(1.0, 3).unwrap(), 1.0 / r.tan()),
            (AmbientModel::hyperbolic(-1.0, 3).unwrap(), 1.0 / r.tanh()),
        ] {
            let o = model.base_point().into_inner();
            let chart = GeodesicSphereChart::new(&model, &o, r).unwrap();
            let patch = HypersurfacePatch::new(Arc::new(chart), model, Orientation::Inner, Some(o)).unwrap();
            let f = frame_at(&patch, &[1.0, 2.0]).unwrap();
            model.validate_point(&f.position).unwrap();
            for k in &f.principal_curvatures {
                assert!((k - kappa).abs() < 1e-12, "{k} vs {kappa}");
            }
        }
        for (model, kappa) in [
            (AmbientModel::lorentz_spaceform(1.0, 3).unwrap(), -1.0 / r.tanh()),
            (AmbientModel::lorentz_spaceform(-1.0, 3).unwrap(), -1.0 / r.tan()),
        ] {
            let o = model.base_point().into_inner();
            let chart = GeodesicSphereChart::new(&model, &o, r).unwrap();
            let patch = HypersurfacePatch::new(Arc::new(chart), model, Orientation::Future, None).unwrap();
            let f = frame_at(&patch, &[0.5, -0.3]).unwrap();
            for k in &f.principal_curvatures {
                assert!((k - kappa).abs() < 1e-11, "{k} vs {kappa}");
            }
        }
    }

    #[test]
    fn tabulated_chart_round_trip() {
        let mut csv = String::from("p0,p1,x0,x1,x2\n");
        let n = 21;
        for i in 0..n {
            for j in 0..n {
                let (u, v) = (-0.5 + i as f64 / (n - 1) as f64, -0.5 + j as f64 / (n - 1) as f64);
                csv.push_str(&format!("{u},{v},{u},{v},{}\n", 0.5 * (u * u + v * v)));
            }
        }
        let chart = TabulatedChart::from_csv(&csv).unwrap();
        let model = AmbientModel::euclidean(3).unwrap();
        let patch = HypersurfacePatch::new(Arc::new(chart), model, Orientation::Inner, Some(DVector::from_vec(vec![0.0, 0.0, 3.0])))
            .unwrap();
        let grid = sample_grid(&patch, 2).unwrap();
        assert_eq!(grid.samples.len(), 17 * 17);
        let centre = grid.samples.iter().find(|s| s.params.iter().all(|p| p.abs() < 1e-12)).unwrap();
        for k in &centre.frame.principal_curvatures {
            assert!((k - 1.0).abs() < 1e-12);
        }
        assert!(TabulatedChart::from_csv("p0,x0\n0,0\n").is_err());
    }
}
