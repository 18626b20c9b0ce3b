//! Scalar comparison functions.
//!
//! `C_b` is the mean curvature of a geodesic sphere of radius `t` in the space form
//! of curvature `b`; `Ĉ_b = C_{-b}` is the future mean curvature of the level sets of
//! the Lorentzian distance. The remaining functions are the ingredients of the
//! maximum principle for trace operators: the Cauchy problem `g'' = G² g`, its
//! explicit supersolution quotient `ψ`, the barrier profile `φ` and the constant `Λ`.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use ode_solvers::{Dop853, OutputType, System, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute target error for the double-exponential quadrature.
const QUAD_TOL: f64 = 1e-13;

fn check_t(t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("t must be positive and finite, got {t}")));
    }
    Ok(())
}

/// Mean curvature of the geodesic sphere of radius `t` in the space form of curvature `b`.
pub fn c_b(b: f64, t: f64) -> Result<f64> {
    check_t(t)?;
    if b > 0.0 {
        let s = b.sqrt();
        if s * t >= FRAC_PI_2 {
            return Err(Error::Domain(format!(
                "C_b needs t < pi/(2 sqrt b) = {}, got {t}",
                FRAC_PI_2 / s
            )));
        }
        Ok(s / (s * t).tan())
    } else if b < 0.0 {
        let s = (-b).sqrt();
        Ok(s / (s * t).tanh())
    } else {
        Ok(1.0 / t)
    }
}

/// `Ĉ_b(t) = C_{-b}(t)`.
pub fn c_hat_b(b: f64, t: f64) -> Result<f64> {
    c_b(-b, t)
}

/// `φ_b` with `φ_b(0) = 0`, `φ_b' > 0` on `t > 0` and `φ_b'' = C_b φ_b'`.
///
/// For `b < 0` this is `cosh(√-b t) - 1`. The profile `coth(√-b t)` is sometimes
/// quoted here, but it is decreasing and fails `φ'' = C_b φ'`.
pub fn phi_b(b: f64, t: f64) -> f64 {
    if b > 0.0 {
        1.0 - (b.sqrt() * t).cos()
    } else if b < 0.0 {
        ((-b).sqrt() * t).cosh() - 1.0
    } else {
        t * t
    }
}

pub fn phi_b_prime(b: f64, t: f64) -> f64 {
    if b > 0.0 {
        let s = b.sqrt();
        s * (s * t).sin()
    } else if b < 0.0 {
        let s = (-b).sqrt();
        s * (s * t).sinh()
    } else {
        2.0 * t
    }
}

pub fn phi_b_second(b: f64, t: f64) -> f64 {
    if b > 0.0 {
        b * (b.sqrt() * t).cos()
    } else if b < 0.0 {
        -b * ((-b).sqrt() * t).cosh()
    } else {
        2.0
    }
}

/// `φ_b''(t) - C_b(t) φ_b'(t)`.
pub fn phi_ode_residual(b: f64, t: f64) -> Result<f64> {
    Ok(phi_b_second(b, t) - c_b(b, t)? * phi_b_prime(b, t))
}

/// The radial curvature bound `G` of the maximum principle, `K_M >= -G(r)^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum CurvatureBound {
    /// `G(t) = c`
    Const(f64),
    /// `G(t) = a + b t`
    Affine(f64, f64),
    /// `G(t) = a + sqrt(1 + t)`
    SqrtGrowth(f64),
}

impl CurvatureBound {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            CurvatureBound::Const(c) => c,
            CurvatureBound::Affine(a, b) => a + b * t,
            CurvatureBound::SqrtGrowth(a) => a + (1.0 + t).sqrt(),
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match *self {
            CurvatureBound::Const(_) => 0.0,
            CurvatureBound::Affine(_, b) => b,
            CurvatureBound::SqrtGrowth(_) => 0.5 / (1.0 + t).sqrt(),
        }
    }

    /// `∫_a^b G(s) ds` by adaptive quadrature.
    pub fn integral(&self, a: f64, b: f64) -> Result<f64> {
        integrate(|s| self.value(s), a, b)
    }

    /// Numerical admissibility tests for the three maximum-principle conditions.
    pub fn admissibility(&self) -> Admissibility {
        let positive_at_zero = self.value(0.0) > 0.0;
        // G' is checked on a geometric grid reaching far into the tail.
        let nondecreasing = (0..=400)
            .map(|i| 10f64.powf(-3.0 + 9.0 * i as f64 / 400.0))
            .chain(std::iter::once(0.0))
            .all(|t| self.derivative(t) >= 0.0);
        let recip = |s: f64| 1.0 / self.value(s);
        let not_integrable = match (integrate(recip, 1e4, 1e5), integrate(recip, 1e5, 1e6)) {
            (Ok(prev), Ok(last)) => {
                prev.is_finite() && last.is_finite() && last > 0.0 && last >= 0.5 * prev
            }
            _ => false,
        };
        Admissibility {
            positive_at_zero,
            nondecreasing,
            not_integrable,
        }
    }

    pub fn ensure_admissible(&self) -> Result<()> {
        let adm = self.admissibility();
        if adm.is_admissible() {
            Ok(())
        } else {
            Err(Error::Hypothesis(format!("G = {self} is not admissible: {adm:?}")))
        }
    }
}

impl fmt::Display for CurvatureBound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CurvatureBound::Const(c) => write!(f, "const({c})"),
            CurvatureBound::Affine(a, b) => write!(f, "affine({a},{b})"),
            CurvatureBound::SqrtGrowth(a) => write!(f, "sqrt_growth({a})"),
        }
    }
}

impl FromStr for CurvatureBound {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Precondition(format!("cannot parse G specification `{s}`"));
        let open = s.find('(').ok_or_else(bad)?;
        if !s.ends_with(')') {
            return Err(bad());
        }
        let name = s[..open].trim();
        let args: Vec<f64> = s[open + 1..s.len() - 1]
            .split(',')
            .map(|a| a.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad())?;
        match (name, args.as_slice()) {
            ("const", [c]) => Ok(CurvatureBound::Const(*c)),
            ("affine", [a, b]) => Ok(CurvatureBound::Affine(*a, *b)),
            ("sqrt_growth", [a]) => Ok(CurvatureBound::SqrtGrowth(*a)),
            _ => Err(bad()),
        }
    }
}

impl From<CurvatureBound> for String {
    fn from(g: CurvatureBound) -> String {
        g.to_string()
    }
}

impl TryFrom<String> for CurvatureBound {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// Outcome of the numeric admissibility tests.
///
/// `not_integrable` is a heuristic: the integral of `1/G` over the decade
/// `[1e5, 1e6]` must be at least half the integral over `[1e4, 1e5]`, which holds for
/// `1/G` decaying like `1/s` or slower and fails for `1/s^2`-type decay.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Admissibility {
    pub positive_at_zero: bool,
    pub nondecreasing: bool,
    pub not_integrable: bool,
}

impl Admissibility {
    pub fn is_admissible(&self) -> bool {
        self.positive_at_zero && self.nondecreasing && self.not_integrable
    }
}

fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let scale = (b - a).abs().max(1.0);
    let out = quadrature::integrate(f, a, b, QUAD_TOL * scale);
    if !out.integral.is_finite() || !out.error_estimate.is_finite() {
        return Err(Error::Numerical(format!("quadrature failed on [{a}, {b}]")));
    }
    Ok(out.integral)
}

/// Solution of `g'' = G² g`, `g(0) = 0`, `g'(0) = 1` on a uniform output grid.
#[derive(Debug, Clone)]
pub struct OdeSolution {
    pub grid: Vec<f64>,
    pub g: Vec<f64>,
    pub g_prime: Vec<f64>,
    pub accepted_steps: u32,
    pub rejected_steps: u32,
}

impl OdeSolution {
    /// `g'/g` at grid index `i` (undefined at `t = 0`).
    pub fn log_derivative(&self, i: usize) -> f64 {
        self.g_prime[i] / self.g[i]
    }

    pub fn last(&self) -> (f64, f64, f64) {
        let i = self.grid.len() - 1;
        (self.grid[i], self.g[i], self.g_prime[i])
    }
}

struct Jacobi {
    bound: CurvatureBound,
}

// Time is carried as a third state component: the DOP853 implementation in
// ode_solvers evaluates non-autonomous right-hand sides incorrectly.
impl System<f64, Vector3<f64>> for Jacobi {
    fn system(&self, _t: f64, y: &Vector3<f64>, dy: &mut Vector3<f64>) {
        let g = self.bound.value(y[2]);
        dy[0] = y[1];
        dy[1] = g * g * y[0];
        dy[2] = 1.0;
    }
}

/// Integrate the Cauchy problem on `[0, t_end]` with `steps` uniform output intervals.
pub fn solve_cauchy_g_grid(bound: &CurvatureBound, t_end: f64, steps: usize) -> Result<OdeSolution> {
    bound.ensure_admissible()?;
    check_t(t_end)?;
    if steps == 0 {
        return Err(Error::Precondition("at least one output step is required".into()));
    }
    // The crate's dense output is inaccurate, so each output interval is
    // integrated separately and only its final accepted state is kept.
    let dx = t_end / steps as f64;
    let mut grid = Vec::with_capacity(steps + 1);
    let mut g = Vec::with_capacity(steps + 1);
    let mut g_prime = Vec::with_capacity(steps + 1);
    let (mut accepted, mut rejected) = (0, 0);
    let mut state = Vector3::new(0.0, 1.0, 0.0);
    grid.push(0.0);
    g.push(state[0]);
    g_prime.push(state[1]);
    for i in 0..steps {
        let t0 = i as f64 * dx;
        let t1 = if i + 1 == steps { t_end } else { (i + 1) as f64 * dx };
        state[2] = t0;
        let mut solver = Dop853::new(Jacobi { bound: *bound }, t0, t1, t1 - t0, state, 1e-11, 1e-14);
        solver.set_output(OutputType::Sparse);
        let stats = solver
            .integrate()
            .map_err(|e| Error::Numerical(format!("Cauchy problem integration failed: {e:?}")))?;
        accepted += stats.accepted_steps;
        rejected += stats.rejected_steps;
        let (xs, ys) = solver.results().get();
        match (xs.last(), ys.last()) {
            (Some(x), Some(y)) if (x - t1).abs() <= 1e-9 * t1.max(1.0) => state = *y,
            _ => {
                return Err(Error::Numerical(format!("solver stopped short of t = {t1}")));
            }
        }
        grid.push(t1);
        g.push(state[0]);
        g_prime.push(state[1]);
    }
    if let Some(i) = (1..=steps).find(|&i| !(g[i] > 0.0)) {
        return Err(Error::Numerical(format!(
            "g lost positivity at t = {} (g = {})",
            grid[i], g[i]
        )));
    }
    Ok(OdeSolution {
        grid,
        g,
        g_prime,
        accepted_steps: accepted,
        rejected_steps: rejected,
    })
}

/// Integrate the Cauchy problem on `[0, t_end]` (1000 output intervals).
pub fn solve_cauchy_g(bound: &CurvatureBound, t_end: f64) -> Result<OdeSolution> {
    solve_cauchy_g_grid(bound, t_end, 1000)
}

/// `ψ(t) = (exp(∫_0^t G) - 1) / G(0)`.
pub fn psi(bound: &CurvatureBound, t: f64) -> Result<f64> {
    let i = bound.integral(0.0, t)?;
    Ok(i.exp_m1() / bound.value(0.0))
}

pub fn psi_prime(bound: &CurvatureBound, t: f64) -> Result<f64> {
    let i = bound.integral(0.0, t)?;
    Ok(bound.value(t) * i.exp() / bound.value(0.0))
}

pub fn psi_second(bound: &CurvatureBound, t: f64) -> Result<f64> {
    let i = bound.integral(0.0, t)?;
    let g = bound.value(t);
    Ok((bound.derivative(t) + g * g) * i.exp() / bound.value(0.0))
}

/// `ψ'' - G² ψ`, nonnegative for admissible `G`.
pub fn psi_subsolution_residual(bound: &CurvatureBound, t: f64) -> Result<f64> {
    let g = bound.value(t);
    Ok(psi_second(bound, t)? - g * g * psi(bound, t)?)
}

/// `ψ'/ψ = G(t) / (1 - exp(-∫_0^t G))`, computed without cancellation.
pub fn psi_log_derivative(bound: &CurvatureBound, t: f64) -> Result<f64> {
    check_t(t)?;
    let i = bound.integral(0.0, t)?;
    Ok(psi_log_derivative_from_integral(bound.value(t), i))
}

fn psi_log_derivative_from_integral(g: f64, integral: f64) -> f64 {
    g / -(-integral).exp_m1()
}

/// Pointwise Sturm comparison data `ψ'/ψ - g'/g` on a uniform grid of `(0, T]`.
#[derive(Debug, Clone)]
pub struct SturmProfile {
    pub t: Vec<f64>,
    pub g: Vec<f64>,
    pub g_prime: Vec<f64>,
    pub psi: Vec<f64>,
    pub margin: Vec<f64>,
    pub min_margin: f64,
    pub argmin: f64,
}

pub fn sturm_profile(bound: &CurvatureBound, t_end: f64, points: usize) -> Result<SturmProfile> {
    if !(t_end >= 0.1) {
        return Err(Error::Precondition(format!("Sturm margin needs T >= 0.1, got {t_end}")));
    }
    let sol = solve_cauchy_g_grid(bound, t_end, points)?;
    let mut t = Vec::with_capacity(points);
    let mut g = Vec::with_capacity(points);
    let mut g_prime = Vec::with_capacity(points);
    let mut psi_vals = Vec::with_capacity(points);
    let mut margin = Vec::with_capacity(points);
    let mut integral = 0.0;
    for i in 1..=points {
        integral += bound.integral(sol.grid[i - 1], sol.grid[i])?;
        let ti = sol.grid[i];
        let q_psi = psi_log_derivative_from_integral(bound.value(ti), integral);
        t.push(ti);
        g.push(sol.g[i]);
        g_prime.push(sol.g_prime[i]);
        psi_vals.push(integral.exp_m1() / bound.value(0.0));
        margin.push(q_psi - sol.log_derivative(i));
    }
    let (k, min_margin) = margin
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
    Ok(SturmProfile {
        argmin: t[k],
        t,
        g,
        g_prime,
        psi: psi_vals,
        margin,
        min_margin,
    })
}

/// Minimum of `ψ'/ψ - g'/g` over a 1000-point grid of `(0, T]`.
pub fn sturm_margin(bound: &CurvatureBound, t_end: f64) -> Result<f64> {
    Ok(sturm_profile(bound, t_end, 1000)?.min_margin)
}

/// Supremum `Λ` of `exp(∫_0^t G) / (exp(∫_1^t G) - 1)` over `t >= 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LambdaEstimate {
    pub lambda: f64,
    pub argmax: f64,
    /// Limit of the ratio as `t → ∞`, `exp(∫_0^1 G)`.
    pub tail_limit: f64,
}

/// `Λ` by a dense grid on `[2, t_max]` refined by golden-section search near the grid argmax.
pub fn lambda_sup(bound: &CurvatureBound, t_max: f64) -> Result<LambdaEstimate> {
    bound.ensure_admissible()?;
    if !(t_max > 2.0) {
        return Err(Error::Precondition(format!("t_max must exceed 2, got {t_max}")));
    }
    let head = bound.integral(0.0, 1.0)?;
    // ratio = exp(I01) / (1 - exp(-I1t))
    let ratio_from = |i1t: f64| head.exp() / -(-i1t).exp_m1();
    let ratio = |t: f64| -> Result<f64> { Ok(ratio_from(bound.integral(1.0, t)?)) };

    let n = 4000;
    let dt = (t_max - 2.0) / n as f64;
    let mut i1t = bound.integral(1.0, 2.0)?;
    let mut best = (2.0, ratio_from(i1t), 0usize);
    for k in 1..=n {
        let a = 2.0 + (k - 1) as f64 * dt;
        let b = 2.0 + k as f64 * dt;
        i1t += bound.integral(a, b)?;
        let r = ratio_from(i1t);
        if r > best.1 {
            best = (b, r, k);
        }
    }
    let lo = (best.0 - dt).max(2.0);
    let hi = (best.0 + dt).min(t_max);
    let (t_star, r_star) = golden_section_max(|t| ratio(t), lo, hi, 1e-10)?;
    let (argmax, lambda) = if r_star >= best.1 { (t_star, r_star) } else { (best.0, best.1) };
    Ok(LambdaEstimate {
        lambda,
        argmax,
        tail_limit: head.exp(),
    })
}

fn golden_section_max(
    f: impl Fn(f64) -> Result<f64>,
    mut a: f64,
    mut b: f64,
    tol: f64,
) -> Result<(f64, f64)> {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while (b - a).abs() > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    // The endpoints are candidates too: a monotone ratio peaks at the boundary.
    let mid = 0.5 * (a + b);
    let candidates = [(a, f(a)?), (mid, f(mid)?), (b, f(b)?)];
    Ok(candidates
        .into_iter()
        .fold((mid, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc }))
}

/// Barrier profile `φ(t) = ∫_0^t ds / G(s + 1)`.
pub fn phi_gamma(bound: &CurvatureBound, t: f64) -> Result<f64> {
    if t < 0.0 {
        return Err(Error::Domain(format!("φ is defined for t >= 0, got {t}")));
    }
    integrate(|s| 1.0 / bound.value(s + 1.0), 0.0, t)
}

pub fn phi_gamma_prime(bound: &CurvatureBound, t: f64) -> f64 {
    1.0 / bound.value(t + 1.0)
}

pub fn phi_gamma_second(bound: &CurvatureBound, t: f64) -> f64 {
    let g = bound.value(t + 1.0);
    -bound.derivative(t + 1.0) / (g * g)
}
