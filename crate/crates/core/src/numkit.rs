//! Numerical kernels shared by every geometric module: Richardson-extrapolated
//! central differences, Gram–Schmidt against an arbitrary inner product, and
//! SVD-based nullspaces.
//!
//! Everything here is a pure function of its inputs.

use nalgebra::{DMatrix, DVector};

use crate::error::{GeomError, Result};

/// Default relative threshold for numerical rank decisions.
pub const RANK_TOL: f64 = 1e-9;

/// Relative pivot below which Gram–Schmidt declares the input dependent.
pub const GS_PIVOT_TOL: f64 = 1e-10;

/// Finite-difference stencil description.
///
/// The estimate combines central differences taken at the steps
/// `step * 2^k` for `k = 0..=richardson_levels`, so the stencil reaches out to
/// `step * 2^richardson_levels` from the evaluation point.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Stencil {
    pub step: f64,
    pub richardson_levels: u32,
    pub order: u32,
}

impl Stencil {
    pub fn new(step: f64, richardson_levels: u32, order: u32) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(GeomError::InvalidInput(format!("stencil step must be positive, got {step}")));
        }
        if !(1..=4).contains(&richardson_levels) {
            return Err(GeomError::InvalidInput(format!(
                "richardson_levels must lie in [1, 4], got {richardson_levels}"
            )));
        }
        if !(1..=2).contains(&order) {
            return Err(GeomError::InvalidInput(format!("derivative order must be 1 or 2, got {order}")));
        }
        Ok(Self { step, richardson_levels, order })
    }

    /// Step 1e-3 with two extrapolation levels.
    pub fn first_order() -> Self {
        Self { step: 1e-3, richardson_levels: 2, order: 1 }
    }

    /// Step 5e-3 with two extrapolation levels.
    pub fn second_order() -> Self {
        Self { step: 5e-3, richardson_levels: 2, order: 2 }
    }

    pub fn with_step(self, step: f64) -> Self {
        Self { step, ..self }
    }

    /// Largest excursion from the evaluation point.
    pub fn reach(&self) -> f64 {
        self.step * f64::powi(2.0, self.richardson_levels as i32)
    }

    /// Leading truncation order of the extrapolated estimate.
    pub fn truncation_order(&self) -> u32 {
        2 * (self.richardson_levels + 1)
    }
}

fn check_finite(v: &DVector<f64>, t: f64) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(GeomError::EvaluationDomain { context: format!("stencil offset t = {t:e}") })
    }
}

/// Richardson table for an even-power error expansion; `estimates[k]` was taken
/// with step `h * 2^k`.
fn richardson(mut estimates: Vec<DVector<f64>>) -> DVector<f64> {
    let levels = estimates.len();
    for j in 1..levels {
        let factor = f64::powi(4.0, j as i32);
        for k in 0..levels - j {
            let fine = &estimates[k];
            let coarse = &estimates[k + 1];
            estimates[k] = (fine * factor - coarse) / (factor - 1.0);
        }
    }
    estimates.swap_remove(0)
}

/// Derivative at `t = 0` of a one-parameter family `f(t)`.
///
/// Uses the first or second central difference depending on `s.order`.
pub fn derivative_at_zero<F>(f: F, s: &Stencil) -> Result<DVector<f64>>
where
    F: Fn(f64) -> Result<DVector<f64>>,
{
    let center = if s.order == 2 {
        let c = f(0.0)?;
        check_finite(&c, 0.0)?;
        Some(c)
    } else {
        None
    };
    let mut estimates = Vec::with_capacity(s.richardson_levels as usize + 1);
    for k in 0..=s.richardson_levels {
        let h = s.step * f64::powi(2.0, k as i32);
        let plus = f(h)?;
        check_finite(&plus, h)?;
        let minus = f(-h)?;
        check_finite(&minus, -h)?;
        let est = match &center {
            None => (plus - minus) / (2.0 * h),
            Some(c) => (plus - c * 2.0 + minus) / (h * h),
        };
        estimates.push(est);
    }
    Ok(richardson(estimates))
}

/// Directional derivative `D_v f(x)` (or `D_v D_v f(x)` for order-2 stencils).
pub fn directional_derivative<F>(f: F, x: &DVector<f64>, v: &DVector<f64>, s: &Stencil) -> Result<DVector<f64>>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    derivative_at_zero(|t| f(&(x + v * t)), s)
}

/// Scalar convenience wrapper around [`derivative_at_zero`].
pub fn scalar_derivative<F>(f: F, s: &Stencil) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let d = derivative_at_zero(|t| f(t).map(|y| DVector::from_element(1, y)), s)?;
    Ok(d[0])
}

/// Output of [`gram_schmidt`]: orthonormal vectors `u_i = Σ_j coeffs[(i, j)] v_j`
/// with `coeffs` lower triangular.
#[derive(Debug, Clone)]
pub struct Orthonormalized {
    pub vectors: Vec<DVector<f64>>,
    pub coeffs: DMatrix<f64>,
}

/// Modified Gram–Schmidt with one reorthogonalization pass.
pub fn gram_schmidt<F>(vectors: &[DVector<f64>], inner: F) -> Result<Orthonormalized>
where
    F: Fn(&DVector<f64>, &DVector<f64>) -> f64,
{
    let k = vectors.len();
    let mut out: Vec<DVector<f64>> = Vec::with_capacity(k);
    let mut coeffs = DMatrix::zeros(k, k);
    for (i, v) in vectors.iter().enumerate() {
        let norm0 = inner(v, v).max(0.0).sqrt();
        if norm0 == 0.0 {
            return Err(GeomError::RankDeficient { index: i });
        }
        let mut w = v.clone();
        // running coefficients of w in terms of the inputs
        let mut c = DVector::zeros(k);
        c[i] = 1.0;
        for _pass in 0..2 {
            for (j, o) in out.iter().enumerate() {
                let proj = inner(o, &w);
                w -= o * proj;
                let row = coeffs.row(j).transpose();
                c -= row * proj;
            }
        }
        let norm = inner(&w, &w).max(0.0).sqrt();
        if norm <= GS_PIVOT_TOL * norm0 {
            return Err(GeomError::RankDeficient { index: i });
        }
        w /= norm;
        c /= norm;
        coeffs.set_row(i, &c.transpose());
        out.push(w);
    }
    Ok(Orthonormalized { vectors: out, coeffs })
}

pub fn euclidean(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    a.dot(b)
}

/// Singular values of `m`, padded with zeros to `m.ncols()` entries, with the
/// matching full set of right singular vectors (as columns, descending order).
fn full_right_svd(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let cols = m.ncols();
    let rows = m.nrows().max(cols);
    let mut padded = DMatrix::zeros(rows, cols);
    padded.view_mut((0, 0), (m.nrows(), cols)).copy_from(m);
    let svd = padded.svd(false, true);
    let vt = svd.v_t.expect("requested right singular vectors");
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sv = order.iter().map(|&i| svd.singular_values[i]).collect();
    let v = DMatrix::from_fn(cols, cols, |r, c| vt[(order[c], r)]);
    (sv, v)
}

/// Numerical rank with the relative threshold `tol`.
pub fn numerical_rank(m: &DMatrix<f64>, tol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let (sv, _) = full_right_svd(m);
    let cutoff = tol * sv[0];
    sv.iter().filter(|&&s| s > cutoff && s > 0.0).count()
}

/// Singular values in descending order.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut sv: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Orthonormal basis (as columns) of `ker m`.
pub fn nullspace(m: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let cols = m.ncols();
    if m.nrows() == 0 {
        return DMatrix::identity(cols, cols);
    }
    let (sv, v) = full_right_svd(m);
    let cutoff = tol * sv.first().copied().unwrap_or(0.0);
    let rank = sv.iter().filter(|&&s| s > cutoff && s > 0.0).count();
    v.columns(rank, cols - rank).into_owned()
}

/// Rows stacked into a matrix.
pub fn rows_to_matrix(rows: &[DVector<f64>], ncols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j])
}

/// Columns stacked into a matrix.
pub fn columns_to_matrix(cols: &[DVector<f64>], nrows: usize) -> DMatrix<f64> {
    DMatrix::from_fn(nrows, cols.len(), |i, j| cols[j][i])
}

/// Orthogonal projection of `v` onto the span of `basis` (any spanning set with
/// nonsingular Gram matrix). Returns the projection and the coefficients.
pub fn project_onto_span(v: &DVector<f64>, basis: &[DVector<f64>]) -> Result<(DVector<f64>, DVector<f64>)> {
    if basis.is_empty() {
        return Ok((DVector::zeros(v.len()), DVector::zeros(0)));
    }
    let k = basis.len();
    let gram = DMatrix::from_fn(k, k, |i, j| basis[i].dot(&basis[j]));
    let rhs = DVector::from_fn(k, |i, _| basis[i].dot(v));
    let chol = gram.cholesky().ok_or(GeomError::RankDeficient { index: k - 1 })?;
    let c = chol.solve(&rhs);
    let mut p = DVector::zeros(v.len());
    for (b, ci) in basis.iter().zip(c.iter()) {
        p += b * *ci;
    }
    Ok((p, c))
}

/// Least-squares power-law fit `y = C t^s` in log-log space; returns
/// `(s, rms residual of the log fit)`. Pairs with non-positive ratios are
/// dropped.
pub fn fit_power_law(samples: &[(f64, f64)]) -> Result<(f64, f64)> {
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|(t, y)| *t > 0.0 && *y > 0.0)
        .map(|(t, y)| (t.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(GeomError::InvalidInput("power-law fit needs at least two positive samples".into()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(GeomError::InvalidInput("power-law fit needs two distinct abscissae".into()));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let rms = (pts.iter().map(|p| (p.1 - icpt - slope * p.0).powi(2)).sum::<f64>() / n).sqrt();
    Ok((slope, rms))
}
