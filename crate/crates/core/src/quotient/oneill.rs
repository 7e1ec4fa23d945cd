//! O'Neill integrability tensor of the submersion `μ⁻¹(0) → M` and the
//! cross-check of the chart curvature against the Gauss/O'Neill chain.

use nalgebra::DVector;

use super::chart::SliceChart;
use super::curvature::curvature_at;
use crate::action::TorusAction;
use crate::ambient::reeb;
use crate::error::Result;
use crate::levelset::{level_curvature, retract, LevelPoint};
use crate::numkit::{derivative_at_zero, Stencil};

/// Horizontal extension of a fixed ambient vector: its projection onto the
/// horizontal space at `q`.
pub fn horizontal_extension(q: &LevelPoint, v: &DVector<f64>) -> Result<DVector<f64>> {
    q.horizontal_project(&q.tangent_project(v))
}

/// `A(Y, Z)`: vertical part of `∇^L_Y Z^h`, where `Z^h` is the horizontal
/// extension of `Z` and the derivative is taken by finite differences along
/// the retracted curve through `p` with velocity `Y`.
pub fn oneill_a(p: &LevelPoint, action: &TorusAction, y: &DVector<f64>, z: &DVector<f64>, s: &Stencil) -> Result<DVector<f64>> {
    if action.d() == 0 {
        return Ok(DVector::zeros(p.dim_ambient()));
    }
    let base = p.z.coords();
    let dz = derivative_at_zero(|t| horizontal_extension(&retract(&(base + y * t), action)?, z), s)?;
    Ok(p.vertical_part(&p.tangent_project(&dz))?.0)
}

/// Outcome of comparing the two curvature pipelines at a chart's base.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct OneillCrosscheck {
    /// Largest disagreement on the components `g^M(R^M(X,ζ)Y, Z)`.
    pub mixed: f64,
    /// Largest disagreement over all components, using the full O'Neill formula.
    pub full: f64,
}

/// Compares `g^M(R^M(X,Y)Z,W)` from the chart finite-difference engine with
/// `R^L(X,Y,Z,W) − 2⟨A_X Y, A_Z W⟩ + ⟨A_Y Z, A_X W⟩ − ⟨A_X Z, A_Y W⟩` built from
/// the Gauss equation and the O'Neill tensor, at `u = 0` where the chart
/// frame is orthonormal and horizontal.
pub fn oneill_crosscheck(chart: &SliceChart) -> Result<OneillCrosscheck> {
    let action = chart.action();
    let p = chart.base();
    let m = chart.dim();
    let u0 = DVector::zeros(m);
    let curv = curvature_at(chart, &u0)?;
    let zeta = chart.reduced_reeb(&u0)?;
    let frame = chart.frame();
    let s = chart.first;

    let mut a_tensor = vec![vec![DVector::zeros(p.dim_ambient()); m]; m];
    for i in 0..m {
        for j in 0..m {
            a_tensor[i][j] = oneill_a(p, action, &frame[i], &frame[j], &s)?;
        }
    }
    let xi = reeb(&p.z);
    let a_xi: Vec<DVector<f64>> = frame.iter().map(|e| oneill_a(p, action, e, &xi, &s)).collect::<Result<_>>()?;
    let a_from_xi: Vec<DVector<f64>> = frame.iter().map(|e| oneill_a(p, action, &xi, e, &s)).collect::<Result<_>>()?;

    let unit = |a: usize| DVector::from_fn(m, |i, _| if i == a { 1.0 } else { 0.0 });
    let mut full: f64 = 0.0;
    for a in 0..m {
        for b in 0..m {
            for c in 0..m {
                for d in 0..m {
                    let chart_value = curv.component(d, c, a, b);
                    let chain = level_curvature(p, action, &frame[a], &frame[b], &frame[c], &frame[d])?
                        - 2.0 * a_tensor[a][b].dot(&a_tensor[c][d])
                        + a_tensor[b][c].dot(&a_tensor[a][d])
                        - a_tensor[a][c].dot(&a_tensor[b][d]);
                    full = full.max((chart_value - chain).abs());
                }
            }
        }
    }
    let mut mixed: f64 = 0.0;
    for a in 0..m {
        for c in 0..m {
            for d in 0..m {
                let chart_value = curv.lowered(&unit(a), &zeta, &unit(c), &unit(d));
                let chain = level_curvature(p, action, &frame[a], &xi, &frame[c], &frame[d])?
                    - 2.0 * a_xi[a].dot(&a_tensor[c][d])
                    + a_from_xi[c].dot(&a_tensor[a][d])
                    - a_tensor[a][c].dot(&a_from_xi[d]);
                mixed = mixed.max((chart_value - chain).abs());
            }
        }
    }
    Ok(OneillCrosscheck { mixed, full })
}
