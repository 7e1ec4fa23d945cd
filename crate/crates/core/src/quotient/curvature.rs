//! Coordinate curvature engine: Christoffel symbols from first finite
//! differences of the chart metric, Riemann from its second differences.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::chart::ChartGeometry;
use crate::error::{GeomError, Result};
use crate::numkit::{derivative_at_zero, gram_schmidt, nullspace, singular_values, Stencil, RANK_TOL};

fn unit(m: usize, a: usize) -> DVector<f64> {
    DVector::from_fn(m, |i, _| if i == a { 1.0 } else { 0.0 })
}

fn metric_as_vector<G: ChartGeometry + ?Sized>(g: &G, u: &DVector<f64>) -> Result<DVector<f64>> {
    Ok(DVector::from_column_slice(g.metric(u)?.as_slice()))
}

/// `∂_c ḡ` for every coordinate direction `c`.
pub fn metric_gradient<G: ChartGeometry + ?Sized>(g: &G, u: &DVector<f64>, s: &Stencil) -> Result<Vec<DMatrix<f64>>> {
    let m = g.dim();
    (0..m)
        .map(|c| {
            let e = unit(m, c);
            let d = derivative_at_zero(|t| metric_as_vector(g, &(u + &e * t)), s)?;
            Ok(DMatrix::from_column_slice(m, m, d.as_slice()))
        })
        .collect()
}

/// `∂_a ∂_b ḡ`, mixed partials by polarization of second directional derivatives.
fn metric_hessian<G: ChartGeometry + ?Sized>(g: &G, u: &DVector<f64>, s: &Stencil) -> Result<Vec<Vec<DMatrix<f64>>>> {
    let m = g.dim();
    let second = |v: &DVector<f64>| -> Result<DMatrix<f64>> {
        let d = derivative_at_zero(|t| metric_as_vector(g, &(u + v * t)), s)?;
        Ok(DMatrix::from_column_slice(m, m, d.as_slice()))
    };
    let diag: Vec<DMatrix<f64>> = (0..m).map(|a| second(&unit(m, a))).collect::<Result<_>>()?;
    let mut h = vec![vec![DMatrix::zeros(m, m); m]; m];
    for a in 0..m {
        h[a][a] = diag[a].clone();
        for b in a + 1..m {
            let mixed = (second(&(unit(m, a) + unit(m, b)))? - &diag[a] - &diag[b]) * 0.5;
            h[a][b] = mixed.clone();
            h[b][a] = mixed;
        }
    }
    Ok(h)
}

/// Riemann tensor of a chart metric at one point.
///
/// `lowered[(κ, σ, μ, ν)] = g(R(∂_μ, ∂_ν)∂_σ, ∂_κ)` with
/// `R(X,Y) = [∇_X, ∇_Y] − ∇_[X,Y]`.
#[derive(Debug, Clone)]
pub struct Curvature {
    pub dim: usize,
    pub metric: DMatrix<f64>,
    pub inverse: DMatrix<f64>,
    pub metric_gradient: Vec<DMatrix<f64>>,
    lowered: Vec<f64>,
}

impl Curvature {
    fn idx(&self, k: usize, s: usize, mu: usize, nu: usize) -> usize {
        let m = self.dim;
        ((k * m + s) * m + mu) * m + nu
    }

    /// `g(R(∂_μ,∂_ν)∂_σ, ∂_κ)`.
    pub fn component(&self, k: usize, s: usize, mu: usize, nu: usize) -> f64 {
        self.lowered[self.idx(k, s, mu, nu)]
    }

    /// `g(R(X,Y)Z, W)`.
    pub fn lowered(&self, x: &DVector<f64>, y: &DVector<f64>, z: &DVector<f64>, w: &DVector<f64>) -> f64 {
        let m = self.dim;
        let mut acc = 0.0;
        for k in 0..m {
            if w[k] == 0.0 {
                continue;
            }
            for s in 0..m {
                if z[s] == 0.0 {
                    continue;
                }
                for mu in 0..m {
                    if x[mu] == 0.0 {
                        continue;
                    }
                    for nu in 0..m {
                        acc += self.lowered[self.idx(k, s, mu, nu)] * w[k] * z[s] * x[mu] * y[nu];
                    }
                }
            }
        }
        acc
    }

    /// `R(X,Y)Z` in chart components.
    pub fn apply(&self, x: &DVector<f64>, y: &DVector<f64>, z: &DVector<f64>) -> DVector<f64> {
        let m = self.dim;
        let low = DVector::from_fn(m, |k, _| self.lowered(x, y, z, &unit(m, k)));
        &self.inverse * low
    }

    /// `Ric_{σν} = R^μ_{σμν}`.
    pub fn ricci(&self) -> DMatrix<f64> {
        let m = self.dim;
        DMatrix::from_fn(m, m, |s, nu| {
            let mut acc = 0.0;
            for mu in 0..m {
                for k in 0..m {
                    acc += self.inverse[(mu, k)] * self.lowered[self.idx(k, s, mu, nu)];
                }
            }
            acc
        })
    }

    /// `ḡ`-orthonormal frame (columns) obtained from the coordinate basis.
    pub fn orthonormal_frame(&self) -> Result<Vec<DVector<f64>>> {
        let basis: Vec<_> = (0..self.dim).map(|a| unit(self.dim, a)).collect();
        let g = &self.metric;
        Ok(gram_schmidt(&basis, |a, b| (a.transpose() * g * b)[0])?.vectors)
    }

    pub fn inner(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        (a.transpose() * &self.metric * b)[0]
    }

    /// Largest violation of the pair antisymmetries, pair symmetry and the
    /// first Bianchi identity.
    pub fn symmetry_residual(&self) -> f64 {
        let m = self.dim;
        let mut worst: f64 = 0.0;
        for a in 0..m {
            for b in 0..m {
                for c in 0..m {
                    for d in 0..m {
                        let r = self.component(a, b, c, d);
                        worst = worst.max((r + self.component(b, a, c, d)).abs());
                        worst = worst.max((r + self.component(a, b, d, c)).abs());
                        worst = worst.max((r - self.component(c, d, a, b)).abs());
                        let bianchi = self.component(a, b, c, d) + self.component(a, c, d, b) + self.component(a, d, b, c);
                        worst = worst.max(bianchi.abs());
                    }
                }
            }
        }
        worst
    }
}

/// Curvature of the chart metric at `u`.
pub fn curvature_at<G: ChartGeometry + ?Sized>(g: &G, u: &DVector<f64>) -> Result<Curvature> {
    let m = g.dim();
    let metric = g.metric(u)?;
    let inverse = metric
        .clone()
        .try_inverse()
        .ok_or_else(|| GeomError::InvalidInput("chart metric is singular".into()))?;
    let dg = metric_gradient(g, u, &g.first_stencil())?;
    let hess = metric_hessian(g, u, &g.second_stencil())?;

    // Γ_{d,bc} and its derivatives
    let gamma_low = |d: usize, b: usize, c: usize| 0.5 * (dg[b][(d, c)] + dg[c][(d, b)] - dg[d][(b, c)]);
    let d_gamma_low = |a: usize, d: usize, b: usize, c: usize| 0.5 * (hess[a][b][(d, c)] + hess[a][c][(d, b)] - hess[a][d][(b, c)]);
    let mut gl = vec![0.0; m * m * m];
    for d in 0..m {
        for b in 0..m {
            for c in 0..m {
                gl[(d * m + b) * m + c] = gamma_low(d, b, c);
            }
        }
    }
    let mut gu = vec![0.0; m * m * m];
    for a in 0..m {
        for b in 0..m {
            for c in 0..m {
                let mut acc = 0.0;
                for d in 0..m {
                    acc += inverse[(a, d)] * gl[(d * m + b) * m + c];
                }
                gu[(a * m + b) * m + c] = acc;
            }
        }
    }
    let low = |d: usize, b: usize, c: usize| gl[(d * m + b) * m + c];
    let up = |a: usize, b: usize, c: usize| gu[(a * m + b) * m + c];

    let mut lowered = vec![0.0; m * m * m * m];
    for k in 0..m {
        for s in 0..m {
            for mu in 0..m {
                for nu in 0..m {
                    let mut r = d_gamma_low(mu, k, nu, s) - d_gamma_low(nu, k, mu, s);
                    for rho in 0..m {
                        r += -low(rho, mu, k) * up(rho, nu, s) + low(rho, nu, k) * up(rho, mu, s);
                    }
                    lowered[((k * m + s) * m + mu) * m + nu] = r;
                }
            }
        }
    }
    Ok(Curvature { dim: m, metric, inverse, metric_gradient: dg, lowered })
}

/// `max_{X,Y} ‖R(X,ζ)Y − (ḡ(ζ,Y)X − ḡ(X,Y)ζ)‖_ḡ` over a `ḡ`-orthonormal frame.
pub fn sasaki_residual<G: ChartGeometry + ?Sized>(g: &G, u: &DVector<f64>) -> Result<f64> {
    let curv = curvature_at(g, u)?;
    let zeta = g.reeb_field(u)?;
    sasaki_residual_from(&curv, &zeta)
}

pub fn sasaki_residual_from(curv: &Curvature, zeta: &DVector<f64>) -> Result<f64> {
    let frame = curv.orthonormal_frame()?;
    let mut worst: f64 = 0.0;
    for x in &frame {
        for y in &frame {
            let lhs = curv.apply(x, zeta, y);
            let rhs = x * curv.inner(zeta, y) - zeta * curv.inner(x, y);
            let diff = lhs - rhs;
            worst = worst.max(curv.inner(&diff, &diff).max(0.0).sqrt());
        }
    }
    Ok(worst)
}

/// Largest entry of the coordinate Killing operator
/// `ζ^c ∂_c ḡ_ab + ḡ_cb ∂_a ζ^c + ḡ_ac ∂_b ζ^c`.
pub fn killing_residual_zeta<G: ChartGeometry + ?Sized>(g: &G, u: &DVector<f64>) -> Result<f64> {
    let m = g.dim();
    let s = g.first_stencil();
    let metric = g.metric(u)?;
    let dg = metric_gradient(g, u, &s)?;
    let zeta = g.reeb_field(u)?;
    // dz[a][c] = ∂_a ζ^c
    let dz: Vec<DVector<f64>> = (0..m)
        .map(|a| {
            let e = unit(m, a);
            derivative_at_zero(|t| g.reeb_field(&(u + &e * t)), &s)
        })
        .collect::<Result<_>>()?;
    let mut worst: f64 = 0.0;
    for a in 0..m {
        for b in 0..m {
            let mut v = 0.0;
            for c in 0..m {
                v += zeta[c] * dg[c][(a, b)] + metric[(c, b)] * dz[a][c] + metric[(a, c)] * dz[b][c];
            }
            worst = worst.max(v.abs());
        }
    }
    Ok(worst)
}

/// Least-squares Einstein constant over several chart points.
#[derive(Debug, Clone, Serialize)]
pub struct EinsteinFit {
    pub constant: f64,
    /// Largest pointwise Frobenius norm of `Ric − c ḡ` in `ḡ`-orthonormal frames.
    pub residual: f64,
    /// Eigenvalues of the Ricci endomorphism at the first point.
    pub ricci_spectrum: Vec<f64>,
}

pub fn einstein_fit<G: ChartGeometry + ?Sized>(g: &G, points: &[DVector<f64>]) -> Result<EinsteinFit> {
    if points.len() < 5 {
        return Err(GeomError::InvalidInput(format!("Einstein fit needs at least 5 chart points, got {}", points.len())));
    }
    let mut ricci_on = Vec::with_capacity(points.len());
    for u in points {
        let curv = curvature_at(g, u)?;
        let frame = curv.orthonormal_frame()?;
        let f = DMatrix::from_fn(curv.dim, curv.dim, |i, j| frame[j][i]);
        ricci_on.push(f.transpose() * curv.ricci() * f);
    }
    einstein_fit_from(&ricci_on)
}

/// Einstein fit from Ricci tensors already expressed in orthonormal frames.
pub fn einstein_fit_from(ricci_on: &[DMatrix<f64>]) -> Result<EinsteinFit> {
    let m = ricci_on[0].nrows();
    let total: f64 = ricci_on.iter().map(|r| r.trace()).sum();
    let constant = total / (m * ricci_on.len()) as f64;
    let residual = ricci_on
        .iter()
        .map(|r| (r - DMatrix::identity(m, m) * constant).norm())
        .fold(0.0, f64::max);
    let sym = (&ricci_on[0] + ricci_on[0].transpose()) * 0.5;
    let mut spectrum: Vec<f64> = sym.symmetric_eigen().eigenvalues.iter().copied().collect();
    spectrum.sort_by(f64::total_cmp);
    Ok(EinsteinFit { constant, residual, ricci_spectrum: spectrum })
}

/// Minimal singular value of `dη'` restricted to `ker η'`, with
/// `η' = ḡ(ζ, ·)`.
pub fn contact_nondegeneracy<G: ChartGeometry + ?Sized>(g: &G, u: &DVector<f64>) -> Result<f64> {
    let m = g.dim();
    let s = g.first_stencil();
    let form = |x: &DVector<f64>| -> Result<DVector<f64>> { Ok(g.metric(x)? * g.reeb_field(x)?) };
    let eta = form(u)?;
    let d: Vec<DVector<f64>> = (0..m)
        .map(|a| {
            let e = unit(m, a);
            derivative_at_zero(|t| form(&(u + &e * t)), &s)
        })
        .collect::<Result<_>>()?;
    let deta = DMatrix::from_fn(m, m, |a, b| d[a][b] - d[b][a]);
    let kernel = nullspace(&DMatrix::from_row_slice(1, m, eta.as_slice()), RANK_TOL);
    let restricted = kernel.transpose() * deta * &kernel;
    Ok(singular_values(&restricted).last().copied().unwrap_or(0.0))
}
