//! Reduction of the flat cone `ℂⁿ = C(S^{2n−1})` compared with the cone over
//! the reduced Sasakian space.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::chart::SliceChart;
use crate::action::TorusAction;
use crate::ambient::mul_i;
use crate::error::{GeomError, Result};
use crate::levelset::solve_retraction;
use crate::numkit::{derivative_at_zero, project_onto_span};

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ConeCommutation {
    /// `max |g₀(∂_a,∂_b) − r² ḡ_ab| / (r² max|ḡ|)`.
    pub tangent_block: f64,
    /// `max |g₀(∂_r,∂_r) − 1|`.
    pub radial_block: f64,
    /// `max |g₀(∂_a,∂_r)|`.
    pub mixed_block: f64,
    /// Largest of the three above.
    pub max_relative_deviation: f64,
    /// `max |Φ(r ψ(u))| / r²` together with the largest disagreement between
    /// normalized cone retractions at different radii.
    pub scale_invariance: f64,
}

/// Cone chart `χ(u, r) = r ŵ/|ŵ|`, where `ŵ` is the flat `ℂⁿ` solution of
/// `Φ = 0` seeded at `z₀ + Σ u_a e_a`. Its metric is read off the flat
/// Euclidean structure of `ℂⁿ`, not from the chart metric `ḡ`.
pub fn cone_chart_map(chart: &SliceChart, u: &DVector<f64>, r: f64) -> Result<DVector<f64>> {
    let mut y = chart.base().z.coords().clone();
    for (e, ua) in chart.frame().iter().zip(u.iter()) {
        y += e * *ua;
    }
    let w = cone_retract(&y, chart.action())?;
    Ok(w.normalize() * r)
}

/// Kähler-reduced flat metric at the cone chart point `(u, r)`: the Euclidean
/// Gram matrix of the finite-difference coordinate vectors of
/// [`cone_chart_map`] after removing their components along the orbit
/// directions `i Λᵢ ⊙ w`. The last coordinate is `r`.
pub fn reduced_cone_metric(chart: &SliceChart, u: &DVector<f64>, r: f64) -> Result<DMatrix<f64>> {
    let action = chart.action();
    let s = chart.first;
    let m = chart.dim();
    let w = cone_chart_map(chart, u, r)?;
    let verticals: Vec<DVector<f64>> = (0..action.d()).map(|i| mul_i(&action.weight_mul(i, &w))).collect();
    let mut coords = Vec::with_capacity(m + 1);
    for a in 0..m {
        let e = DVector::from_fn(m, |i, _| if i == a { 1.0 } else { 0.0 });
        coords.push(derivative_at_zero(|t| cone_chart_map(chart, &(u + &e * t), r), &s)?);
    }
    coords.push(derivative_at_zero(|t| cone_chart_map(chart, u, r + t), &s)?);
    let horizontal: Vec<DVector<f64>> = coords
        .iter()
        .map(|v| project_onto_span(v, &verticals).map(|(p, _)| v - p))
        .collect::<Result<_>>()?;
    let k = horizontal.len();
    Ok(DMatrix::from_fn(k, k, |a, b| horizontal[a].dot(&horizontal[b])))
}

/// Point of `Φ⁻¹(0) ⊂ ℂⁿ` on the complexified orbit of `w`. `Φ` is
/// quadratic, so this is the sphere retraction of `w/|w|` scaled by `|w|`.
pub fn cone_retract(w: &DVector<f64>, action: &TorusAction) -> Result<DVector<f64>> {
    let r = solve_retraction(w, action)?;
    Ok(r.unnormalized() * w.norm())
}

/// Compares the Kähler reduction of the cone with the cone `r²ḡ + dr²` over
/// the reduced space at every `(u, r)` pair.
pub fn cone_commutation(chart: &SliceChart, r_values: &[f64], u_samples: &[DVector<f64>]) -> Result<ConeCommutation> {
    if r_values.iter().any(|r| !(0.5..=2.0).contains(r)) {
        return Err(GeomError::InvalidInput("cone radii must lie in [0.5, 2]".into()));
    }
    let action = chart.action();
    let m = chart.dim();
    let mut out = ConeCommutation { tangent_block: 0.0, radial_block: 0.0, mixed_block: 0.0, max_relative_deviation: 0.0, scale_invariance: 0.0 };
    for u in u_samples {
        let gbar = chart.reduced_metric(u)?;
        let gmax = gbar.amax();
        let z = chart.sample(u)?.retraction.z;
        // an off-level seed near ψ(u) for the retraction comparison
        let seed = z.coords() + DVector::from_fn(z.coords().len(), |i, _| 1e-2 * ((i + 1) as f64).sin());
        let reference = cone_retract(&seed, action)?.normalize();
        for &r in r_values {
            let g0 = reduced_cone_metric(chart, u, r)?;
            for a in 0..m {
                for b in 0..m {
                    let dev = (g0[(a, b)] - r * r * gbar[(a, b)]).abs() / (r * r * gmax);
                    out.tangent_block = out.tangent_block.max(dev);
                }
                out.mixed_block = out.mixed_block.max(g0[(a, m)].abs());
            }
            out.radial_block = out.radial_block.max((g0[(m, m)] - 1.0).abs());

            let phi = action.cone_moment_ambient(&(z.coords() * r)).amax() / (r * r);
            let retracted = cone_retract(&(&seed * r), action)?;
            let level = action.moment(&crate::ambient::AmbientPoint::normalized(retracted.clone())?).amax();
            let drift = (retracted.normalize() - &reference).amax();
            out.scale_invariance = out.scale_invariance.max(phi).max(level).max(drift);
        }
    }
    out.max_relative_deviation = out.tangent_block.max(out.radial_block).max(out.mixed_block);
    Ok(out)
}
