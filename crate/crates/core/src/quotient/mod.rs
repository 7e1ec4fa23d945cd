//! The reduced space `M = μ⁻¹(0)/G`, realized through local slice charts.

mod chart;
mod cone;
mod curvature;
mod oneill;

pub use chart::{ChartGeometry, ChartSample, ScaledChart, SliceChart, CHART_RADIUS};
pub use cone::{cone_chart_map, cone_commutation, cone_retract, reduced_cone_metric, ConeCommutation};
pub use curvature::{
    contact_nondegeneracy, curvature_at, einstein_fit, einstein_fit_from, killing_residual_zeta, metric_gradient, sasaki_residual,
    sasaki_residual_from, Curvature, EinsteinFit,
};
pub use oneill::{horizontal_extension, oneill_a, oneill_crosscheck, OneillCrosscheck};

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

/// Random chart coordinates uniformly spread in the ball of radius `radius`.
pub fn random_chart_points<R: Rng + ?Sized>(dim: usize, radius: f64, count: usize, rng: &mut R) -> Vec<DVector<f64>> {
    (0..count)
        .map(|_| {
            let dir = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal)).normalize();
            let rho: f64 = rng.gen::<f64>().powf(1.0 / dim as f64) * radius;
            dir * rho
        })
        .collect()
}
