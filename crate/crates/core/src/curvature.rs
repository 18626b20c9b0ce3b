//! Symmetric functions of principal curvatures and Newton tensors.
//!
//! Riemannian convention: `binom(n,k) H_k = S_k`, `P_k = S_k I - A P_{k-1}`.
//! Lorentzian (spacelike, future normal): `binom(n,k) H_k = (-1)^k S_k`,
//! `P_k = (-1)^k S_k I + A P_{k-1}`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::immersion::Sample;
use crate::spaceform::Signature;

/// Strict positivity threshold on principal curvatures for elliptic points.
pub const ELLIPTIC_TOL: f64 = 1e-9;

/// Symmetry tolerance for shape operators in an orthonormal frame.
const SYMMETRY_TOL: f64 = 1e-9;

pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) as u64 / (i + 1) as u64)
}

/// `c_k = (n - k) binom(n, k)`.
pub fn c_k(n: usize, k: usize) -> u64 {
    (n - k) as u64 * binomial(n, k)
}

/// `S_0, ..., S_n` from the coefficients of `prod_i (1 + t κ_i)`.
pub fn elementary_symmetric(kappa: &[f64]) -> Vec<f64> {
    let n = kappa.len();
    let mut s = vec![0.0; n + 1];
    s[0] = 1.0;
    for (m, &k) in kappa.iter().enumerate() {
        for j in (1..=m + 1).rev() {
            s[j] += k * s[j - 1];
        }
    }
    s
}

/// `H_0, ..., H_n` in the convention of `signature`.
pub fn higher_mean_curvatures(kappa: &[f64], signature: Signature) -> Vec<f64> {
    let n = kappa.len();
    elementary_symmetric(kappa)
        .into_iter()
        .enumerate()
        .map(|(k, s)| {
            let sign = match signature {
                Signature::Lorentzian if k % 2 == 1 => -1.0,
                _ => 1.0,
            };
            sign * s / binomial(n, k) as f64
        })
        .collect()
}

/// Per-point curvature data.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvatureProfile {
    pub n: usize,
    pub kappa: Vec<f64>,
    pub s: Vec<f64>,
    pub h: Vec<f64>,
    pub c: Vec<u64>,
    pub signature: Signature,
}

impl CurvatureProfile {
    pub fn new(kappa: &[f64], signature: Signature) -> Self {
        let n = kappa.len();
        let mut sorted = kappa.to_vec();
        sorted.sort_by(f64::total_cmp);
        CurvatureProfile {
            n,
            s: elementary_symmetric(&sorted),
            h: higher_mean_curvatures(&sorted, signature),
            c: (0..n).map(|k| c_k(n, k)).collect(),
            kappa: sorted,
            signature,
        }
    }

    /// Eigenvalues of `P_k`, one per principal direction (same order as `kappa`).
    pub fn newton_eigenvalues(&self, k: usize) -> Vec<f64> {
        newton_eigenvalues(&self.kappa, k, self.signature)
    }

    pub fn definiteness(&self, k: usize) -> Definiteness {
        classify(&self.newton_eigenvalues(k))
    }

    /// `Tr P_k = c_k H_k`.
    pub fn trace_newton(&self, k: usize) -> f64 {
        self.c[k] as f64 * self.h[k]
    }

    pub fn is_elliptic(&self) -> bool {
        self.kappa.iter().all(|&k| k > ELLIPTIC_TOL)
    }
}

/// Eigenvalues of `P_k` from `S_k` of the curvatures with one index removed.
pub fn newton_eigenvalues(kappa: &[f64], k: usize, signature: Signature) -> Vec<f64> {
    let sign = match signature {
        Signature::Lorentzian if k % 2 == 1 => -1.0,
        _ => 1.0,
    };
    (0..kappa.len())
        .map(|i| {
            let rest: Vec<f64> = kappa
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &x)| x)
                .collect();
            let s = elementary_symmetric(&rest);
            sign * s.get(k).copied().unwrap_or(0.0)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Definiteness {
    PositiveDefinite,
    PositiveSemidefinite,
    Indefinite,
}

impl Definiteness {
    pub fn is_semidefinite(self) -> bool {
        !matches!(self, Definiteness::Indefinite)
    }
}

fn classify(eigen: &[f64]) -> Definiteness {
    let scale = eigen.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let tol = 1e-10 * scale;
    let min = eigen.iter().copied().fold(f64::INFINITY, f64::min);
    if min > tol {
        Definiteness::PositiveDefinite
    } else if min >= -tol {
        Definiteness::PositiveSemidefinite
    } else {
        Definiteness::Indefinite
    }
}

/// Newton tensors `P_0, ..., P_n` of a symmetric operator in an orthonormal frame.
#[derive(Debug, Clone)]
pub struct NewtonFamily {
    pub p: Vec<DMatrix<f64>>,
    pub definiteness: Vec<Definiteness>,
    pub profile: CurvatureProfile,
}

impl NewtonFamily {
    pub fn new(a: &DMatrix<f64>, signature: Signature) -> Result<Self> {
        let n = a.nrows();
        if n == 0 || a.ncols() != n {
            return Err(Error::Precondition("shape operator must be a nonempty square matrix".into()));
        }
        let scale = a.amax().max(1.0);
        let asym = (a - a.transpose()).amax();
        if asym > SYMMETRY_TOL * scale {
            return Err(Error::Precondition(format!(
                "shape operator is not symmetric (asymmetry {asym:e})"
            )));
        }
        let sym = (a + a.transpose()) * 0.5;
        let kappa: Vec<f64> = SymmetricEigen::new(sym.clone()).eigenvalues.iter().copied().collect();
        let profile = CurvatureProfile::new(&kappa, signature);
        let s = &profile.s;
        let identity = DMatrix::<f64>::identity(n, n);
        let mut p = Vec::with_capacity(n + 1);
        p.push(identity.clone());
        for k in 1..=n {
            let prev = &p[k - 1];
            let next = match signature {
                Signature::Riemannian => &identity * s[k] - &sym * prev,
                Signature::Lorentzian => {
                    let sign = if k % 2 == 1 { -1.0 } else { 1.0 };
                    &identity * (sign * s[k]) + &sym * prev
                }
            };
            p.push(next);
        }
        let definiteness = (0..=n).map(|k| profile.definiteness(k)).collect();
        Ok(NewtonFamily {
            p,
            definiteness,
            profile,
        })
    }

    pub fn n(&self) -> usize {
        self.profile.n
    }

    /// Largest entry of `P_n`, which vanishes by Cayley-Hamilton in the Riemannian convention.
    pub fn closure_defect(&self) -> f64 {
        self.p[self.n()].amax()
    }
}

/// `(|Tr P_k - c_k H_k|, |Tr A P_k ∓ c_k H_{k+1}|)` for `k = 0..n-1`, relative to
/// `1 + c_k σ^k` and `1 + c_k σ^{k+1}` with `σ` the spectral radius of `A`.
pub fn trace_identity_residuals(a: &DMatrix<f64>, signature: Signature) -> Result<Vec<(f64, f64)>> {
    let fam = NewtonFamily::new(a, signature)?;
    let n = fam.n();
    let sym = (a + a.transpose()) * 0.5;
    let prof = &fam.profile;
    let sign = match signature {
        Signature::Riemannian => 1.0,
        Signature::Lorentzian => -1.0,
    };
    let sigma = prof.kappa.iter().fold(0.0f64, |m, k| m.max(k.abs()));
    Ok((0..n)
        .map(|k| {
            let c = prof.c[k] as f64;
            let tr = fam.p[k].trace();
            let tr_a = (&sym * &fam.p[k]).trace();
            let expected = c * prof.h[k];
            let expected_a = sign * c * prof.h[k + 1];
            // Both traces are homogeneous in A: compare against their value at A = σI.
            let scale = 1.0 + c * sigma.powi(k as i32);
            let scale_a = 1.0 + c * sigma.powi(k as i32 + 1);
            ((tr - expected).abs() / scale, (tr_a - expected_a).abs() / scale_a)
        })
        .collect())
}

/// Garding chain `H_1 >= H_2^{1/2} >= ... >= H_{k+1}^{1/(k+1)} > 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GardingChain {
    pub holds: bool,
    /// `H_j^{1/j} - H_{j+1}^{1/(j+1)}` for `j = 1..=k`.
    pub margins: Vec<f64>,
}

pub fn garding_chain(h: &[f64], k: usize) -> Result<GardingChain> {
    if k + 1 >= h.len() {
        return Err(Error::Precondition(format!(
            "Garding chain up to H_{} needs at least {} mean curvatures",
            k + 1,
            k + 2
        )));
    }
    if let Some(j) = (1..=k + 1).find(|&j| !(h[j] > 0.0)) {
        return Err(Error::Hypothesis(format!(
            "H_{j} = {} is not positive; the point is not elliptic",
            h[j]
        )));
    }
    let roots: Vec<f64> = (1..=k + 1).map(|j| h[j].powf(1.0 / j as f64)).collect();
    let margins: Vec<f64> = roots.windows(2).map(|w| w[0] - w[1]).collect();
    let holds = margins
        .iter()
        .zip(roots.iter())
        .all(|(m, r)| *m >= -1e-12 * r.max(1.0));
    Ok(GardingChain { holds, margins })
}

/// Parameter points whose principal curvatures all exceed [`ELLIPTIC_TOL`].
pub fn elliptic_point_scan(samples: &[Sample]) -> Vec<Vec<f64>> {
    samples
        .iter()
        .filter(|s| s.frame.principal_curvatures.iter().all(|&k| k > ELLIPTIC_TOL))
        .map(|s| s.params.clone())
        .collect()
}

/// Intrinsic curvature of a hypersurface in a space form of curvature `b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaussData {
    /// Scalar curvature `n(n-1)(b + H_2)`.
    pub scalar: f64,
    /// Normalized scalar curvature `b + H_2`.
    pub normalized_scalar: f64,
    pub sectional_min: f64,
    pub sectional_max: f64,
}

/// Gauss equation data for a Riemannian hypersurface: sectional curvatures of
/// principal planes are `b + κ_i κ_j`.
pub fn gauss_identities(kappa: &[f64], b: f64) -> Result<GaussData> {
    let n = kappa.len();
    if n < 2 {
        return Err(Error::Precondition("Gauss identities need n >= 2".into()));
    }
    let trace: f64 = kappa.iter().sum();
    let trace_sq: f64 = kappa.iter().map(|k| k * k).sum();
    // (Tr A)^2 - Tr A^2 = 2 S_2
    let s2 = 0.5 * (trace * trace - trace_sq);
    let h2 = s2 / binomial(n, 2) as f64;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        for j in i + 1..n {
            let k = b + kappa[i] * kappa[j];
            lo = lo.min(k);
            hi = hi.max(k);
        }
    }
    Ok(GaussData {
        scalar: (n * (n - 1)) as f64 * (b + h2),
        normalized_scalar: b + h2,
        sectional_min: lo,
        sectional_max: hi,
    })
}
