//! Browser bindings: comparison curves, Sturm quotients and an ellipsoid estimate.
//!
//! Arrays cross the boundary flat; each function documents its layout.

use std::sync::Arc;

use curvest::comparison::{c_b, c_hat_b, lambda_sup, sturm_profile, CurvatureBound};
use curvest::curvature::CurvatureProfile;
use curvest::immersion::{frame_at, EllipsoidChart, HypersurfacePatch, Orientation};
use curvest::spaceform::{AmbientModel, Signature};
use curvest::Error;
use nalgebra::DVector;
use wasm_bindgen::prelude::*;

const LAMBDA_T_MAX: f64 = 50.0;
const RATIO_EXCLUSION: f64 = 1e-9;

fn js(e: Error) -> JsValue {
    JsValue::from_str(&e.to_string())
}

/// `[C_b(t_i)..., Ĉ_b(t_i)...]` at `t_i = t_max i / n`, `i = 1..=n`; NaN outside the domain.
#[wasm_bindgen]
pub fn comparison_curves(b: f64, t_max: f64, n: usize) -> Vec<f64> {
    let ts: Vec<f64> = (1..=n).map(|i| t_max * i as f64 / n as f64).collect();
    let c = ts.iter().map(|&t| c_b(b, t).unwrap_or(f64::NAN));
    let hat = ts.iter().map(|&t| c_hat_b(b, t).unwrap_or(f64::NAN));
    c.chain(hat).collect()
}

/// `[t..., g'/g..., ψ'/ψ...]` on `points` nodes of `(0, T]`.
#[wasm_bindgen]
pub fn sturm_curves(spec: &str, t_end: f64, points: usize) -> Result<Vec<f64>, JsValue> {
    let bound: CurvatureBound = spec.parse().map_err(js)?;
    let prof = sturm_profile(&bound, t_end, points).map_err(js)?;
    let ratio_g: Vec<f64> = prof.g.iter().zip(&prof.g_prime).map(|(g, gp)| gp / g).collect();
    let ratio_psi: Vec<f64> = ratio_g.iter().zip(&prof.margin).map(|(q, m)| q + m).collect();
    Ok(prof.t.into_iter().chain(ratio_g).chain(ratio_psi).collect())
}

/// `Λ` for a curvature bound given as `const(c)`, `affine(a,b)` or `sqrt_growth(a)`.
#[wasm_bindgen]
pub fn lambda(spec: &str) -> Result<f64, JsValue> {
    let bound: CurvatureBound = spec.parse().map_err(js)?;
    Ok(lambda_sup(&bound, LAMBDA_T_MAX).map_err(js)?.lambda)
}

/// Ellipsoid with semi-axes `(a, a, c)` in `R^3`, sampled on a `resolution²` grid.
///
/// Returns `[sup H_{k+1}/H_k, C_0(r), r, excluded]` with `r` the largest sampled distance
/// to the center, followed by the ratio at every node in row-major order.
#[wasm_bindgen]
pub fn ellipsoid_estimate(a: f64, c: f64, k: usize, resolution: usize) -> Result<Vec<f64>, JsValue> {
    if k > 1 {
        return Err(JsValue::from_str("k must lie in [0, 1] for a surface"));
    }
    let model = AmbientModel::euclidean(3).map_err(js)?;
    let origin = DVector::zeros(3);
    let chart = EllipsoidChart::new(&origin, &[a, a, c]).map_err(js)?;
    let patch = HypersurfacePatch::new(Arc::new(chart), model, Orientation::Inner, Some(origin)).map_err(js)?;
    let grid = patch.chart.grid(resolution);
    let mut ratios = Vec::with_capacity(grid.len());
    let (mut sup, mut r, mut excluded) = (f64::NEG_INFINITY, 0.0f64, 0usize);
    for p in &grid {
        let frame = frame_at(&patch, p).map_err(js)?;
        r = r.max(frame.position.norm());
        let h = CurvatureProfile::new(&frame.principal_curvatures, Signature::Riemannian).h;
        if h[k] <= RATIO_EXCLUSION {
            excluded += 1;
            ratios.push(f64::NAN);
            continue;
        }
        let ratio = h[k + 1].abs() / h[k];
        sup = sup.max(ratio);
        ratios.push(ratio);
    }
    let bound = c_b(0.0, r).map_err(js)?;
    let mut out = vec![sup, bound, r, excluded as f64];
    out.extend(ratios);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_sphere_is_sharp() {
        let out = ellipsoid_estimate(1.0, 1.0, 1, 12).unwrap();
        assert!((out[0] - out[1]).abs() < 1e-9);
        assert_eq!(out.len(), 4 + 144);
    }

    #[test]
    fn oblate_ellipsoid_beats_the_bound() {
        let out = ellipsoid_estimate(1.0, 0.6, 1, 48).unwrap();
        assert!(out[0] > out[1]);
    }

    #[test]
    fn flat_comparison_is_one_over_t() {
        let v = comparison_curves(0.0, 2.0, 4);
        assert_eq!(v[3], 0.5);
        assert_eq!(v[7], 0.5);
    }

    #[test]
    fn sturm_quotients_are_ordered() {
        let v = sturm_curves("const(1)", 3.0, 30).unwrap();
        for i in 0..30 {
            assert!(v[60 + i] >= v[30 + i] - 1e-8);
        }
    }
}
