//! The zero level set `L = μ⁻¹(0) ⊂ S^{2n−1}`: retraction onto it, adapted
//! frames, its second fundamental form (closed form and by direct
//! differentiation of the unit normals), and the Gauss-equation curvature.
//!
//! Conventions follow [`crate::ambient`]. The second fundamental form along
//! the orthonormal normal `νᵢ` is `hᵢ(Y, Z) = −g(∇^S_Y νᵢ, Z)`, and the Gauss
//! equation reads `R^L(X,Y,Z,W) = R^S(X,Y,Z,W) + ⟨h(Y,Z),h(X,W)⟩ − ⟨h(X,Z),h(Y,W)⟩`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::action::TorusAction;
use crate::ambient::{eta, phi, reeb, sphere_curvature_4, AmbientPoint};
use crate::error::{GeomError, Result};
use crate::numkit::{derivative_at_zero, gram_schmidt, euclidean, project_onto_span, Stencil};

/// Level-set membership tolerance `|μᵢ| <` this.
pub const LEVEL_TOL: f64 = 1e-10;
/// Orbits with `‖Xᵢ‖` below this are rejected as degenerate.
pub const DEGENERATE_ORBIT_TOL: f64 = 1e-10;
/// Newton stops once the scaled constraint residual drops below this.
pub const NEWTON_TOL: f64 = 1e-13;
pub const NEWTON_MAX_ITERS: usize = 50;

/// Solution of the retraction constraint for a seed `y`: the point is
/// `z = w / |w|` with `w = exp(Σ cᵢ Dᵢ) y`, `Dᵢ` the weight scaling of row `i`.
/// `w` lies on the orbit of `y` under the complexified torus.
#[derive(Debug, Clone)]
pub struct Retraction {
    pub z: AmbientPoint,
    pub coeffs: DVector<f64>,
    w: DVector<f64>,
}

/// `exp(Σ cᵢ Dᵢ) v`: complex coordinate `j` is scaled by `exp(Σᵢ cᵢ λᵢⱼ)`.
fn combined_scaling(action: &TorusAction, c: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
    let mut out = v.clone();
    for j in 0..action.n() {
        let exponent: f64 = (0..action.d()).map(|i| c[i] * action.weights()[i][j] as f64).sum();
        let f = exponent.exp();
        out[2 * j] *= f;
        out[2 * j + 1] *= f;
    }
    out
}

/// `Jₖᵢ = 2 wᵀ Dₖ Dᵢ w`, the derivative of `wᵀDₖw` in `cᵢ`.
fn constraint_jacobian(action: &TorusAction, w: &DVector<f64>) -> DMatrix<f64> {
    let d = action.d();
    let scaled: Vec<DVector<f64>> = (0..d).map(|i| action.weight_mul(i, w)).collect();
    DMatrix::from_fn(d, d, |k, i| 2.0 * scaled[k].dot(&scaled[i]))
}

/// Newton solve of `wᵀ Dₖ w = 0` (k = 1..d) in the coefficients `c`.
///
/// The constraint is the gradient of the convex function
/// `f(c) = ½ Σⱼ exp(2⟨c, Λⱼ⟩)|yⱼ|²`, so damped Newton on `f` converges
/// whenever a zero exists. Normalization then puts the point on the sphere.
pub fn solve_retraction(y: &DVector<f64>, action: &TorusAction) -> Result<Retraction> {
    let norm = y.norm();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(GeomError::InvalidInput("cannot retract a zero or non-finite vector".into()));
    }
    let d = action.d();
    if let Some(i) = action.definite_row() {
        return Err(GeomError::Infeasible {
            reason: format!("weight row {i} is definite, so μ_{i} never vanishes on the sphere"),
        });
    }
    let y = y / norm;
    let evaluate = |c: &DVector<f64>| -> (DVector<f64>, f64, DVector<f64>) {
        let w = combined_scaling(action, c, &y);
        let ww = w.norm_squared();
        let g = DVector::from_fn(d, |k, _| action.quadratic(k, &w) / ww);
        (w, 0.5 * ww, g)
    };
    let mut c = DVector::zeros(d);
    let (mut w, mut f, mut g) = evaluate(&c);
    let mut polish = 0;
    for _ in 0..NEWTON_MAX_ITERS {
        if d == 0 {
            break;
        }
        if g.amax() < NEWTON_TOL {
            // a couple of extra steps so the result is a smooth function of y
            polish += 1;
            if polish > 2 {
                break;
            }
        }
        let grad = DVector::from_fn(d, |k, _| action.quadratic(k, &w));
        let step = constraint_jacobian(action, &w)
            .cholesky()
            .ok_or(GeomError::Irregular { min_singular_value: 0.0 })?
            .solve(&grad);
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial = &c - &step * lambda;
            let (tw, tf, tg) = evaluate(&trial);
            // Armijo on f, whose gradient in c is the unscaled constraint; near
            // the root f is flat to rounding, so a smaller residual also counts
            if tf <= f - 1e-4 * lambda * grad.dot(&step) || tg.amax() < g.amax() || (polish > 0 && tg.amax() <= g.amax()) {
                c = trial;
                w = tw;
                f = tf;
                g = tg;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if g.amax() >= NEWTON_TOL * 100.0 {
        return Err(GeomError::RetractionFailure { residual: g.amax() });
    }
    let wn = w.norm();
    Ok(Retraction { z: AmbientPoint::new(&w / wn)?, coeffs: c, w })
}

impl Retraction {
    /// Differential of `y ↦ z` applied to `v`, by implicit differentiation of
    /// the constraint. `y` must be the seed this retraction was solved from.
    pub fn differential(&self, action: &TorusAction, y: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
        // the constraint is homogeneous in y, so work with the seed's scale
        let scale = y.norm();
        let y = y / scale;
        let v = v / scale;
        let w = combined_scaling(action, &self.coeffs, &y);
        let d = action.d();
        let mut dw = combined_scaling(action, &self.coeffs, &v);
        if d > 0 {
            let rhs = DVector::from_fn(d, |k, _| 2.0 * action.weight_mul(k, &w).dot(&dw));
            let dc = constraint_jacobian(action, &w)
                .lu()
                .solve(&(-rhs))
                .ok_or(GeomError::Irregular { min_singular_value: 0.0 })?;
            for i in 0..d {
                dw += action.weight_mul(i, &w) * dc[i];
            }
        }
        let wn = w.norm();
        let z = &w / wn;
        Ok((&dw - &z * z.dot(&dw)) / wn)
    }

    pub fn unnormalized(&self) -> &DVector<f64> {
        &self.w
    }
}

/// A point of the level set with cached adapted frames.
///
/// * `vertical`: the fundamental fields `Xᵢ(z)`.
/// * `normal`: orthonormal `νᵢ = Σⱼ normal_coeffs[(i, j)] φXⱼ`, the normals of
///   `L` inside the sphere.
/// * `horizontal`: orthonormal basis of `T_zL ∩ span{Xᵢ}^⊥`, with `ξ` first.
#[derive(Debug, Clone)]
pub struct LevelPoint {
    pub z: AmbientPoint,
    pub vertical: Vec<DVector<f64>>,
    pub normal: Vec<DVector<f64>>,
    pub normal_coeffs: DMatrix<f64>,
    pub horizontal: Vec<DVector<f64>>,
}

impl LevelPoint {
    /// Builds the frames at a point that must already be on the level set.
    pub fn from_point(z: AmbientPoint, action: &TorusAction) -> Result<Self> {
        if z.n() != action.n() {
            return Err(GeomError::InvalidInput(format!("point lives in C^{}, action in C^{}", z.n(), action.n())));
        }
        let norm = z.coords().norm();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(GeomError::InvalidInput(format!("level point has norm {norm}")));
        }
        let mu = action.moment(&z);
        if mu.amax() >= LEVEL_TOL {
            return Err(GeomError::InvalidInput(format!("|μ| = {:e} exceeds the level-set tolerance", mu.amax())));
        }
        let vertical = action.fundamental_fields(&z);
        for (i, x) in vertical.iter().enumerate() {
            let nx = x.norm();
            if nx < DEGENERATE_ORBIT_TOL {
                return Err(GeomError::DegenerateOrbit { index: i, norm: nx });
            }
        }
        let phis: Vec<_> = vertical.iter().map(|x| phi(&z, x)).collect();
        let ortho = gram_schmidt(&phis, euclidean).map_err(|_| GeomError::Irregular {
            min_singular_value: crate::action::moment_differential_min_sv(action, &z),
        })?;
        let horizontal = horizontal_frame(&z, &vertical, &ortho.vectors)?;
        Ok(Self { z, vertical, normal: ortho.vectors, normal_coeffs: ortho.coeffs, horizontal })
    }

    pub fn dim_ambient(&self) -> usize {
        self.z.coords().len()
    }

    /// Projection onto `T_zL`.
    pub fn tangent_project(&self, v: &DVector<f64>) -> DVector<f64> {
        let p = self.z.coords();
        let mut out = v - p * p.dot(v);
        for nu in &self.normal {
            out -= nu * nu.dot(v);
        }
        out
    }

    /// Vertical part (in the span of the `Xᵢ`) of a vector and its coefficients.
    pub fn vertical_part(&self, v: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
        project_onto_span(v, &self.vertical)
    }

    /// Projection of a level-set tangent vector onto the horizontal space.
    pub fn horizontal_project(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(v - self.vertical_part(v)?.0)
    }

    /// Orthonormal basis of `T_zL`: orthonormalized verticals, then the
    /// horizontal frame.
    pub fn tangent_frame(&self) -> Vec<DVector<f64>> {
        let mut out = gram_schmidt(&self.vertical, euclidean).map(|o| o.vectors).unwrap_or_default();
        out.extend(self.horizontal.iter().cloned());
        out
    }

    /// Random tangent vector of `L` with Gaussian coefficients in the tangent frame.
    pub fn random_tangent<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let mut v = DVector::zeros(self.dim_ambient());
        for e in self.tangent_frame() {
            v += e * rng.sample::<f64, _>(StandardNormal);
        }
        v
    }

    /// Random horizontal vector.
    pub fn random_horizontal<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let mut v = DVector::zeros(self.dim_ambient());
        for e in &self.horizontal {
            v += e * rng.sample::<f64, _>(StandardNormal);
        }
        v
    }

    /// Horizontal vector orthogonal to `ξ`.
    pub fn random_contact_horizontal<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let mut v = DVector::zeros(self.dim_ambient());
        for e in self.horizontal.iter().skip(1) {
            v += e * rng.sample::<f64, _>(StandardNormal);
        }
        v
    }

    /// Residuals of the frame bookkeeping: dimension count and blockwise
    /// orthogonality. Returns the largest inner product between blocks.
    pub fn frame_ledger(&self, action: &TorusAction) -> Result<f64> {
        let d = action.d();
        let expected = 2 * action.n() - 1;
        let got = self.vertical.len() + self.normal.len() + self.horizontal.len();
        if self.vertical.len() != d || self.normal.len() != d || got != expected {
            return Err(GeomError::InvalidInput(format!(
                "frame dimensions {}+{}+{} do not add up to {expected}",
                self.vertical.len(),
                self.normal.len(),
                self.horizontal.len()
            )));
        }
        let mut worst: f64 = 0.0;
        let p = self.z.coords();
        for h in &self.horizontal {
            for v in self.vertical.iter().chain(self.normal.iter()) {
                worst = worst.max(h.dot(v).abs());
            }
            worst = worst.max(h.dot(p).abs());
        }
        for v in &self.vertical {
            for nu in &self.normal {
                worst = worst.max(v.dot(nu).abs());
            }
            worst = worst.max(v.dot(p).abs());
        }
        Ok(worst)
    }
}

/// Orthonormal horizontal frame: `ξ` first, then pivoted Gram–Schmidt over the
/// coordinate axes (largest residual wins, ties to the lowest index).
fn horizontal_frame(z: &AmbientPoint, vertical: &[DVector<f64>], normal: &[DVector<f64>]) -> Result<Vec<DVector<f64>>> {
    let dim = z.coords().len();
    let target = dim - 1 - vertical.len() - normal.len();
    // orthonormal basis of the excluded span {z, Xᵢ, νᵢ}
    let mut excluded: Vec<DVector<f64>> = vec![z.coords().clone()];
    excluded.extend(normal.iter().cloned());
    if !vertical.is_empty() {
        excluded.extend(gram_schmidt(vertical, euclidean)?.vectors);
    }
    let reduce = |v: &DVector<f64>, basis: &[DVector<f64>]| -> DVector<f64> {
        let mut w = v.clone();
        for _ in 0..2 {
            for b in basis {
                w -= b * b.dot(&w);
            }
        }
        w
    };
    let xi = reduce(&reeb(z), &excluded);
    let mut frame = vec![xi.normalize()];
    while frame.len() < target {
        let mut basis = excluded.clone();
        basis.extend(frame.iter().cloned());
        let mut best: Option<(f64, DVector<f64>)> = None;
        for k in 0..dim {
            let e = DVector::from_fn(dim, |i, _| if i == k { 1.0 } else { 0.0 });
            let r = reduce(&e, &basis);
            let nr = r.norm();
            if best.as_ref().is_none_or(|(b, _)| nr > *b) {
                best = Some((nr, r));
            }
        }
        let (nr, r) = best.expect("dimension is positive");
        if nr < 1e-8 {
            return Err(GeomError::RankDeficient { index: frame.len() });
        }
        frame.push(r / nr);
    }
    Ok(frame)
}

/// Retracts an ambient vector onto the level set and builds the frames.
pub fn retract(y: &DVector<f64>, action: &TorusAction) -> Result<LevelPoint> {
    let r = solve_retraction(y, action)?;
    LevelPoint::from_point(r.z, action)
}

/// `∇^S_Y Xᵢ`: tangential projection of the exact ambient derivative.
pub fn sphere_field_derivative(p: &LevelPoint, action: &TorusAction, i: usize, y: &DVector<f64>) -> DVector<f64> {
    let d = action.field_derivative(i, y);
    crate::ambient::project_to_sphere_tangent(&p.z, &d)
}

/// Second fundamental form along the unnormalized normal `φXⱼ`:
/// `g(Xⱼ,Y)η(Z) − g(φ∇_Y Xⱼ, Z)`.
fn raw_shape_form(p: &LevelPoint, action: &TorusAction, j: usize, y: &DVector<f64>, z: &DVector<f64>) -> Result<f64> {
    let xj = &p.vertical[j];
    let nx = xj.norm();
    if nx < DEGENERATE_ORBIT_TOL {
        return Err(GeomError::DegenerateOrbit { index: j, norm: nx });
    }
    let nab = sphere_field_derivative(p, action, j, y);
    Ok(xj.dot(y) * eta(&p.z, z) - phi(&p.z, &nab).dot(z))
}

/// Closed-form second fundamental form along `νᵢ`, evaluated on the
/// tangential parts of `y` and `z`. No finite differences.
pub fn shape_form_closed(p: &LevelPoint, action: &TorusAction, i: usize, y: &DVector<f64>, z: &DVector<f64>) -> Result<f64> {
    let y = p.tangent_project(y);
    let z = p.tangent_project(z);
    let mut acc = 0.0;
    for j in 0..action.d() {
        let c = p.normal_coeffs[(i, j)];
        if c != 0.0 {
            acc += c * raw_shape_form(p, action, j, &y, &z)?;
        }
    }
    Ok(acc)
}

/// All components `hᵢ(Y, Z)`, i = 1..d.
pub fn second_fundamental_form(p: &LevelPoint, action: &TorusAction, y: &DVector<f64>, z: &DVector<f64>) -> Result<DVector<f64>> {
    let mut h = DVector::zeros(action.d());
    for i in 0..action.d() {
        h[i] = shape_form_closed(p, action, i, y, z)?;
    }
    Ok(h)
}

/// Second fundamental form by differentiating the unit normal `νᵢ` along a
/// retracted curve through `p` with velocity `Y`:
/// `hᵢ(Y, Z) = −⟨D_Y νᵢ, Z⟩`.
pub fn shape_form_direct(p: &LevelPoint, action: &TorusAction, i: usize, y: &DVector<f64>, z: &DVector<f64>, s: &Stencil) -> Result<f64> {
    let y = p.tangent_project(y);
    let z = p.tangent_project(z);
    let base = p.z.coords();
    let d_nu = derivative_at_zero(
        |t| {
            let q = retract(&(base + &y * t), action)?;
            Ok(q.normal[i].clone())
        },
        s,
    )?;
    Ok(-d_nu.dot(&z))
}

/// Largest violation of `hᵢ(Y, ξ) = ‖Xᵢ‖⁻¹ g(Xᵢ, Y)` and `hᵢ(ξ, ξ) = 0`,
/// where `hᵢ` is taken along the unit normal `φXᵢ/‖Xᵢ‖`.
pub fn reeb_shape_residual(p: &LevelPoint, action: &TorusAction, y: &DVector<f64>) -> Result<f64> {
    let y = p.tangent_project(y);
    let xi = reeb(&p.z);
    let mut worst: f64 = 0.0;
    for j in 0..action.d() {
        let x = &p.vertical[j];
        let nx = x.norm();
        let hy = raw_shape_form(p, action, j, &y, &xi)? / nx;
        let hxi = raw_shape_form(p, action, j, &xi, &xi)? / nx;
        worst = worst.max((hy - x.dot(&y) / nx).abs()).max(hxi.abs());
    }
    Ok(worst)
}

/// `R^L(X,Y,Z,W)` from the Gauss equation with the closed-form `h`.
pub fn level_curvature(
    p: &LevelPoint,
    action: &TorusAction,
    x: &DVector<f64>,
    y: &DVector<f64>,
    z: &DVector<f64>,
    w: &DVector<f64>,
) -> Result<f64> {
    let (x, y, z, w) = (p.tangent_project(x), p.tangent_project(y), p.tangent_project(z), p.tangent_project(w));
    let h = |a: &DVector<f64>, b: &DVector<f64>| second_fundamental_form(p, action, a, b);
    let ambient = sphere_curvature_4(&x, &y, &z, &w);
    Ok(ambient + h(&y, &z)?.dot(&h(&x, &w)?) - h(&x, &z)?.dot(&h(&y, &w)?))
}

/// Both sides of the mixed-curvature difference
/// `R^L(X,ξ,Y,Z) − R^S(X,ξ,Y,Z) = −Σ‖Xᵢ‖⁻²{g(Xᵢ,Z)g(∇_X Xᵢ,φY) − g(Xᵢ,Y)g(∇_X Xᵢ,φZ)}`
/// for `X, Y, Z ⟂ ξ`. The right side presumes the `φXᵢ/‖Xᵢ‖` are orthonormal,
/// which always holds for circle actions.
pub fn mixed_curvature_sides(p: &LevelPoint, action: &TorusAction, x: &DVector<f64>, y: &DVector<f64>, z: &DVector<f64>) -> Result<(f64, f64)> {
    let xi = reeb(&p.z);
    let lhs = level_curvature(p, action, x, &xi, y, z)? - sphere_curvature_4(x, &xi, y, z);
    let mut rhs = 0.0;
    for i in 0..action.d() {
        let xi_field = &p.vertical[i];
        let nab = sphere_field_derivative(p, action, i, x);
        rhs -= (xi_field.dot(z) * nab.dot(&phi(&p.z, y)) - xi_field.dot(y) * nab.dot(&phi(&p.z, z))) / xi_field.norm_squared();
    }
    Ok((lhs, rhs))
}

/// Killing residual of `ξ` on `L`: the largest
/// `|g(∇^L_Y ξ, Z) + g(∇^L_Z ξ, Y)|` over the tangent frame, using the exact
/// derivative `D_Y ξ = iY`.
pub fn xi_killing_residual(p: &LevelPoint) -> f64 {
    let frame = p.tangent_frame();
    let nab: Vec<_> = frame.iter().map(|y| p.tangent_project(&crate::ambient::mul_i(y))).collect();
    let mut worst: f64 = 0.0;
    for a in 0..frame.len() {
        for b in a..frame.len() {
            worst = worst.max((nab[a].dot(&frame[b]) + nab[b].dot(&frame[a])).abs());
        }
    }
    worst
}

/// Killing residual of an arbitrary tangent field on `L`, differentiated by
/// finite differences along retracted curves.
pub fn killing_residual_fd<F>(p: &LevelPoint, action: &TorusAction, field: F, s: &Stencil) -> Result<f64>
where
    F: Fn(&LevelPoint) -> DVector<f64>,
{
    let frame = p.tangent_frame();
    let base = p.z.coords();
    let mut nab = Vec::with_capacity(frame.len());
    for y in &frame {
        let dv = derivative_at_zero(|t| Ok(field(&retract(&(base + y * t), action)?)), s)?;
        nab.push(p.tangent_project(&dv));
    }
    let mut worst: f64 = 0.0;
    for a in 0..frame.len() {
        for b in a..frame.len() {
            worst = worst.max((nab[a].dot(&frame[b]) + nab[b].dot(&frame[a])).abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ambient::sphere_curvature_4;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ex41() -> TorusAction {
        TorusAction::circle(&[-1, -1, 1, 1]).unwrap()
    }

    fn sample(action: &TorusAction, rng: &mut ChaCha8Rng) -> LevelPoint {
        loop {
            let y = AmbientPoint::random_on_sphere(action.n(), rng);
            if let Ok(p) = retract(y.coords(), action) {
                return p;
            }
        }
    }

    #[test]
    fn retraction_fixes_level_points() {
        let a = ex41();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = sample(&a, &mut rng);
        let q = retract(p.z.coords(), &a).unwrap();
        assert_abs_diff_eq!(q.z.coords(), p.z.coords(), epsilon = 1e-12);
    }

    #[test]
    fn retraction_lands_on_product_of_spheres() {
        let a = ex41();
        let y = DVector::from_column_slice(&[0.9, 0.0, 0.0, 0.0, 0.3, 0.0, 0.0, 0.0]);
        let p = retract(&y, &a).unwrap();
        assert_abs_diff_eq!(p.z.modulus_sq(0) + p.z.modulus_sq(1), 0.5, epsilon = 1e-10);
    }

    #[test]
    fn retraction_reports_infeasibility() {
        let a = TorusAction::circle(&[1, 1, 1, 1]).unwrap();
        let y = DVector::from_element(8, 0.3);
        assert!(matches!(retract(&y, &a), Err(GeomError::Infeasible { .. })));
    }

    #[test]
    fn retraction_differential_matches_finite_differences() {
        let a = TorusAction::new(vec![vec![-1, -1, 1, 1], vec![1, -2, 1, 0]], 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = sample(&a, &mut rng);
        let y = p.z.coords() + DVector::from_fn(8, |i, _| 0.01 * (i as f64).cos());
        let r = solve_retraction(&y, &a).unwrap();
        let v = DVector::from_fn(8, |i, _| (i as f64 * 0.7).sin());
        let exact = r.differential(&a, &y, &v).unwrap();
        let fd = crate::numkit::directional_derivative(
            |x| Ok(solve_retraction(x, &a)?.z.into_coords()),
            &y,
            &v,
            &Stencil::first_order(),
        )
        .unwrap();
        assert_abs_diff_eq!(exact, fd, epsilon = 1e-9);
    }

    #[test]
    fn frames_are_consistent() {
        for a in [ex41(), TorusAction::new(vec![vec![-1, -1, 1, 1], vec![1, -2, 1, 0]], 4).unwrap(), TorusAction::trivial(3)] {
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let p = sample(&a, &mut rng);
            assert!(p.frame_ledger(&a).unwrap() < 1e-10);
            assert_abs_diff_eq!(p.horizontal[0], reeb(&p.z), epsilon = 1e-10);
            for e in &p.horizontal {
                for x in &p.vertical {
                    assert!(x.dot(e).abs() < 1e-10);
                }
            }
            // φXᵢ is normal to L
            for y in p.tangent_frame() {
                for f in a.phi_fields(&p.z) {
                    assert!(f.dot(&y).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn eq5_identities() {
        let a = ex41();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let p = sample(&a, &mut rng);
            let xi = reeb(&p.z);
            let y = p.random_tangent(&mut rng);
            let h = shape_form_closed(&p, &a, 0, &y, &xi).unwrap();
            let x = &p.vertical[0];
            assert_abs_diff_eq!(h, x.dot(&y) / x.norm(), epsilon = 1e-10);
            assert_abs_diff_eq!(shape_form_closed(&p, &a, 0, &xi, &xi).unwrap(), 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn shape_form_is_symmetric_and_matches_direct() {
        let a = TorusAction::circle(&[-2, 1, 1, 1]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = Stencil::first_order();
        for _ in 0..10 {
            let p = sample(&a, &mut rng);
            let y = p.random_tangent(&mut rng);
            let z = p.random_tangent(&mut rng);
            let hyz = shape_form_closed(&p, &a, 0, &y, &z).unwrap();
            let hzy = shape_form_closed(&p, &a, 0, &z, &y).unwrap();
            assert_abs_diff_eq!(hyz, hzy, epsilon = 1e-10);
            let direct = shape_form_direct(&p, &a, 0, &y, &z, &s).unwrap();
            assert_abs_diff_eq!(hyz, direct, epsilon = 1e-6);
            // normal components of Z are projected away
            let z2 = &z + &p.normal[0] * 0.7;
            assert_abs_diff_eq!(shape_form_closed(&p, &a, 0, &y, &z2).unwrap(), hyz, epsilon = 1e-10);
        }
    }

    #[test]
    fn torus_shape_forms_match_direct() {
        let a = TorusAction::new(vec![vec![-1, -1, 1, 1], vec![1, -2, 1, 0]], 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let p = sample(&a, &mut rng);
        let s = Stencil::first_order();
        for i in 0..2 {
            let y = p.random_tangent(&mut rng);
            let z = p.random_tangent(&mut rng);
            let closed = shape_form_closed(&p, &a, i, &y, &z).unwrap();
            let direct = shape_form_direct(&p, &a, i, &y, &z, &s).unwrap();
            assert_abs_diff_eq!(closed, direct, epsilon = 1e-6);
        }
    }

    #[test]
    fn trivial_action_reduces_to_sphere() {
        let a = TorusAction::trivial(3);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p = sample(&a, &mut rng);
        let v: Vec<_> = (0..4).map(|_| p.random_tangent(&mut rng)).collect();
        let lc = level_curvature(&p, &a, &v[0], &v[1], &v[2], &v[3]).unwrap();
        assert_abs_diff_eq!(lc, sphere_curvature_4(&v[0], &v[1], &v[2], &v[3]), epsilon = 1e-14);
        assert!(xi_killing_residual(&p) < 1e-12);
    }

    #[test]
    fn level_curvature_symmetries() {
        let a = ex41();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let p = sample(&a, &mut rng);
        let v: Vec<_> = (0..4).map(|_| p.random_tangent(&mut rng)).collect();
        let r = |a1: usize, b: usize, c: usize, d: usize| level_curvature(&p, &a, &v[a1], &v[b], &v[c], &v[d]).unwrap();
        assert_abs_diff_eq!(r(0, 1, 2, 3), -r(1, 0, 2, 3), epsilon = 1e-10);
        assert_abs_diff_eq!(r(0, 1, 2, 3), -r(0, 1, 3, 2), epsilon = 1e-10);
        let bianchi = r(0, 1, 2, 3) + r(1, 2, 0, 3) + r(2, 0, 1, 3);
        assert!(bianchi.abs() < 1e-9);
    }

    #[test]
    fn mixed_curvature_formula() {
        let a = TorusAction::circle(&[-2, 1, 1, 1]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let p = sample(&a, &mut rng);
            let xi = reeb(&p.z);
            let perp = |v: DVector<f64>| &v - &xi * xi.dot(&v);
            let x = perp(p.random_tangent(&mut rng));
            let y = perp(p.random_tangent(&mut rng));
            let z = perp(p.random_tangent(&mut rng));
            let (lhs, rhs) = mixed_curvature_sides(&p, &a, &x, &y, &z).unwrap();
            assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-8);
        }
    }

    #[test]
    fn xi_is_killing_but_projected_constant_is_not() {
        let a = ex41();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let p = sample(&a, &mut rng);
        assert!(xi_killing_residual(&p) < 1e-9);
        let s = Stencil::first_order();
        let via_fd = killing_residual_fd(&p, &a, |q| reeb(&q.z), &s).unwrap();
        assert!(via_fd < 1e-8, "{via_fd}");
        let c = DVector::from_fn(8, |i, _| 1.0 + i as f64);
        let bad = killing_residual_fd(&p, &a, |q| q.tangent_project(&c), &s).unwrap();
        assert!(bad > 1e-2, "{bad}");
    }

    #[test]
    fn degenerate_orbits_are_rejected() {
        let a = TorusAction::circle(&[-2, 1, 1, 1]).unwrap();
        // X vanishes only at z = 0, so force degeneracy with a zero weight slot instead
        let b = TorusAction::circle(&[0, 1, -1]).unwrap();
        let z = AmbientPoint::from_complex(&[(1.0, 0.0), (0.0, 0.0), (0.0, 0.0)]).unwrap();
        assert!(matches!(LevelPoint::from_point(z, &b), Err(GeomError::DegenerateOrbit { .. })));
        let off = AmbientPoint::from_complex(&[(1.0, 0.0), (0.0, 0.0), (0.0, 0.0), (0.0, 0.0)]).unwrap();
        assert!(LevelPoint::from_point(off, &a).is_err());
    }
}
