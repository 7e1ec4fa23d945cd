//! The round Sasakian structure on the unit sphere `S^{2n-1} ⊂ ℂⁿ` and the
//! Kähler cone over it.
//!
//! Real coordinates are interleaved, `(x₀, y₀, x₁, y₁, …)` with `zⱼ = xⱼ + i yⱼ`.
//! Conventions fixed here and used everywhere else:
//!
//! * Reeb field `ξ(z) = i z`, contact form `η(Y) = ⟨i z, Y⟩`, so `η(ξ) = 1`.
//! * `φY = iY + η(Y) z`, the tangential part of the ambient derivative of `ξ`.
//! * Curvature `R(X,Y)Z = ∇_X∇_Y Z − ∇_Y∇_X Z − ∇_[X,Y] Z` and
//!   `R(X,Y,Z,W) = ⟨R(X,Y)Z, W⟩`; the unit sphere has
//!   `R(X,Y)Z = ⟨Y,Z⟩X − ⟨X,Z⟩Y`.
//! * Cone vectors are split as `(Y, a)` with `Y` tangent to the sphere and `a`
//!   the `∂r` coefficient, so `R₀ = r∂r = (0, r)`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{GeomError, Result};
use crate::numkit::{derivative_at_zero, fit_power_law, Stencil};

/// Tolerance for the unit-norm invariant of sphere points.
pub const SPHERE_TOL: f64 = 1e-12;

/// A point of `ℝ^{2n} ≅ ℂⁿ`.
#[derive(Debug, Clone, PartialEq)]
pub struct AmbientPoint {
    coords: DVector<f64>,
}

impl AmbientPoint {
    /// Wraps raw coordinates; the length must be even and non-zero.
    pub fn new(coords: DVector<f64>) -> Result<Self> {
        if coords.is_empty() || !coords.len().is_multiple_of(2) {
            return Err(GeomError::InvalidInput(format!(
                "ambient coordinates need an even positive length, got {}",
                coords.len()
            )));
        }
        Ok(Self { coords })
    }

    /// Wraps coordinates that must already lie on the unit sphere.
    pub fn on_sphere(coords: DVector<f64>) -> Result<Self> {
        let p = Self::new(coords)?;
        let norm = p.coords.norm();
        if (norm - 1.0).abs() > SPHERE_TOL {
            return Err(GeomError::InvalidInput(format!("point has norm {norm}, expected 1")));
        }
        Ok(p)
    }

    /// Normalizes `coords` onto the sphere.
    pub fn normalized(coords: DVector<f64>) -> Result<Self> {
        let norm = coords.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(GeomError::InvalidInput("cannot normalize a zero or non-finite vector".into()));
        }
        Self::new(coords / norm)
    }

    pub fn from_complex(z: &[(f64, f64)]) -> Result<Self> {
        let mut v = DVector::zeros(2 * z.len());
        for (j, &(x, y)) in z.iter().enumerate() {
            v[2 * j] = x;
            v[2 * j + 1] = y;
        }
        Self::new(v)
    }

    /// Uniformly distributed point of the unit sphere in `ℂⁿ`.
    pub fn random_on_sphere<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        loop {
            let v = DVector::from_fn(2 * n, |_, _| rng.sample::<f64, _>(StandardNormal));
            if v.norm() > 1e-6 {
                return Self { coords: v.normalize() };
            }
        }
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.coords
    }

    pub fn into_coords(self) -> DVector<f64> {
        self.coords
    }

    /// Complex dimension.
    pub fn n(&self) -> usize {
        self.coords.len() / 2
    }

    /// `|zⱼ|²`.
    pub fn modulus_sq(&self, j: usize) -> f64 {
        self.coords[2 * j].powi(2) + self.coords[2 * j + 1].powi(2)
    }
}

/// Multiplication by `i` on interleaved coordinates: `(x, y) ↦ (−y, x)`.
pub fn mul_i(v: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(v.len());
    for j in 0..v.len() / 2 {
        out[2 * j] = -v[2 * j + 1];
        out[2 * j + 1] = v[2 * j];
    }
    out
}

/// Removes the component along the (unit) position vector.
pub fn project_to_sphere_tangent(z: &AmbientPoint, v: &DVector<f64>) -> DVector<f64> {
    let p = z.coords();
    v - p * p.dot(v)
}

/// Random tangent vector to the sphere at `z` with standard normal components.
pub fn random_tangent<R: Rng + ?Sized>(z: &AmbientPoint, rng: &mut R) -> DVector<f64> {
    let v = DVector::from_fn(z.coords().len(), |_, _| rng.sample::<f64, _>(StandardNormal));
    project_to_sphere_tangent(z, &v)
}

pub fn reeb(z: &AmbientPoint) -> DVector<f64> {
    mul_i(z.coords())
}

pub fn eta(z: &AmbientPoint, y: &DVector<f64>) -> f64 {
    reeb(z).dot(y)
}

pub fn phi(z: &AmbientPoint, y: &DVector<f64>) -> DVector<f64> {
    mul_i(y) + z.coords() * eta(z, y)
}

/// Curvature of the unit round sphere, `R(X,Y)Z = ⟨Y,Z⟩X − ⟨X,Z⟩Y`.
pub fn sphere_curvature(x: &DVector<f64>, y: &DVector<f64>, z: &DVector<f64>) -> DVector<f64> {
    x * y.dot(z) - y * x.dot(z)
}

/// `R(X,Y,Z,W) = ⟨R(X,Y)Z, W⟩` on the unit sphere.
pub fn sphere_curvature_4(x: &DVector<f64>, y: &DVector<f64>, z: &DVector<f64>, w: &DVector<f64>) -> f64 {
    y.dot(z) * x.dot(w) - x.dot(z) * y.dot(w)
}

/// Residual of `R(X,ξ)Y = η(Y)X − g(X,Y)ξ` for the round sphere.
pub fn sasaki_identity_residual(z: &AmbientPoint, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
    let xi = reeb(z);
    let lhs = sphere_curvature(x, &xi, y);
    let rhs = x * eta(z, y) - &xi * x.dot(y);
    (lhs - rhs).amax()
}

/// Residuals of `φξ = 0` and `g(φY,φZ) = g(Y,Z) − η(Y)η(Z)`.
pub fn structure_identity_residuals(z: &AmbientPoint, y: &DVector<f64>, w: &DVector<f64>) -> (f64, f64) {
    let phi_xi = phi(z, &reeb(z)).amax();
    let lhs = phi(z, y).dot(&phi(z, w));
    let rhs = y.dot(w) - eta(z, y) * eta(z, w);
    (phi_xi, (lhs - rhs).abs())
}

/// A point `(z, r)` of the cone `C(S) = S × ℝ₊`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConePoint {
    pub base: AmbientPoint,
    pub r: f64,
}

impl ConePoint {
    pub fn new(base: AmbientPoint, r: f64) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(GeomError::InvalidInput(format!("cone radius must be positive, got {r}")));
        }
        Ok(Self { base, r })
    }

    /// The cone point of a non-zero vector of `ℝ^{2n}`.
    pub fn from_ambient(w: &DVector<f64>) -> Result<Self> {
        let r = w.norm();
        Self::new(AmbientPoint::normalized(w.clone())?, r)
    }

    pub fn to_ambient(&self) -> DVector<f64> {
        self.base.coords() * self.r
    }

    /// The image under the radial scaling `ρ_t`.
    pub fn scaled(&self, t: f64) -> Result<Self> {
        Self::new(self.base.clone(), self.r * t)
    }
}

/// Tangent vector of the cone in the `(sphere-tangent, ∂r-coefficient)` split.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeVec {
    pub tangent: DVector<f64>,
    pub radial: f64,
}

impl ConeVec {
    pub fn new(tangent: DVector<f64>, radial: f64) -> Self {
        Self { tangent, radial }
    }

    /// `R₀ = r∂r` at `p`.
    pub fn radial_field(p: &ConePoint) -> Self {
        Self { tangent: DVector::zeros(p.base.coords().len()), radial: p.r }
    }

    /// Ambient representative in `ℝ^{2n}`: `(Y, a) ↦ rY + a z`.
    pub fn to_ambient(&self, p: &ConePoint) -> DVector<f64> {
        &self.tangent * p.r + p.base.coords() * self.radial
    }

    /// Inverse of [`ConeVec::to_ambient`].
    pub fn from_ambient(p: &ConePoint, w: &DVector<f64>) -> Self {
        let a = p.base.coords().dot(w);
        Self { tangent: (w - p.base.coords() * a) / p.r, radial: a }
    }

    pub fn pushforward_scaling(&self, t: f64) -> Self {
        Self { tangent: self.tangent.clone(), radial: self.radial * t }
    }
}

/// `C(g)(U, V) = r²⟨Y,Z⟩ + ab`.
pub fn cone_metric(p: &ConePoint, u: &ConeVec, v: &ConeVec) -> f64 {
    p.r * p.r * u.tangent.dot(&v.tangent) + u.radial * v.radial
}

/// The almost complex structure on the cone, with an optional scale on `φ`
/// (`phi_scale = 1` is the structure of the round cone).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConeStructure {
    pub phi_scale: f64,
}

impl Default for ConeStructure {
    fn default() -> Self {
        Self { phi_scale: 1.0 }
    }
}

impl ConeStructure {
    /// `J(Y, a) = (φY + (a/r)ξ, −r η(Y))`.
    pub fn apply(&self, p: &ConePoint, u: &ConeVec) -> ConeVec {
        let z = &p.base;
        let tangent = phi(z, &u.tangent) * self.phi_scale + reeb(z) * (u.radial / p.r);
        ConeVec { tangent, radial: -p.r * eta(z, &u.tangent) }
    }

    /// `J` as a linear map on `ℝ^{2n}` at the ambient point `w`.
    pub fn ambient_matrix(&self, w: &DVector<f64>) -> Result<DMatrix<f64>> {
        let p = ConePoint::from_ambient(w)?;
        let dim = w.len();
        let mut m = DMatrix::zeros(dim, dim);
        for k in 0..dim {
            let e = DVector::from_fn(dim, |i, _| if i == k { 1.0 } else { 0.0 });
            let ju = self.apply(&p, &ConeVec::from_ambient(&p, &e));
            m.set_column(k, &ju.to_ambient(&p));
        }
        Ok(m)
    }

    pub fn kahler_form(&self, p: &ConePoint, u: &ConeVec, v: &ConeVec) -> f64 {
        cone_metric(p, &self.apply(p, u), v)
    }
}

pub fn cone_j(p: &ConePoint, u: &ConeVec) -> ConeVec {
    ConeStructure::default().apply(p, u)
}

/// `ω(U, V) = C(g)(JU, V)`.
pub fn kahler_form(p: &ConePoint, u: &ConeVec, v: &ConeVec) -> f64 {
    ConeStructure::default().kahler_form(p, u, v)
}

/// `η` extended to `ℝ^{2n}∖0` as the 1-form `Σ (xⱼ dyⱼ − yⱼ dxⱼ)`.
fn extended_eta(w: &DVector<f64>, v: &DVector<f64>) -> f64 {
    mul_i(w).dot(v)
}

/// Measures the constant `c` in `dη(X, Y) = c · g(X, φY)` at `z`, with `dη`
/// computed by finite differences of the extended contact form
/// (`dη(X,Y) = X η(Y) − Y η(X)` for coordinate-constant fields).
/// `x` and `y` should lie in the contact distribution with `g(x, φy) ≠ 0`.
pub fn measure_deta_factor(z: &AmbientPoint, x: &DVector<f64>, y: &DVector<f64>, s: &Stencil) -> Result<f64> {
    let w = z.coords();
    let xy = derivative_at_zero(|t| Ok(DVector::from_element(1, extended_eta(&(w + x * t), y))), s)?[0];
    let yx = derivative_at_zero(|t| Ok(DVector::from_element(1, extended_eta(&(w + y * t), x))), s)?[0];
    let denom = x.dot(&phi(z, y));
    if denom.abs() < 1e-8 {
        return Err(GeomError::InvalidInput("g(X, φY) vanishes; pick a different pair".into()));
    }
    Ok((xy - yx) / denom)
}

/// Measures `k` in `ω = k · d(r²η)` on a pair of ambient vectors at `w`,
/// where `r²η` is the 1-form `Σ (xⱼ dyⱼ − yⱼ dxⱼ)` on `ℝ^{2n}`.
pub fn measure_omega_vs_d_r2eta(w: &DVector<f64>, a: &DVector<f64>, b: &DVector<f64>, s: &Stencil) -> Result<f64> {
    let p = ConePoint::from_ambient(w)?;
    let omega = kahler_form(&p, &ConeVec::from_ambient(&p, a), &ConeVec::from_ambient(&p, b));
    let ab = derivative_at_zero(|t| Ok(DVector::from_element(1, extended_eta(&(w + a * t), b))), s)?[0];
    let ba = derivative_at_zero(|t| Ok(DVector::from_element(1, extended_eta(&(w + b * t), a))), s)?[0];
    let d = ab - ba;
    if d.abs() < 1e-8 {
        return Err(GeomError::InvalidInput("d(r²η) vanishes on this pair".into()));
    }
    Ok(omega / d)
}

/// Closedness and integrability residuals of a cone structure.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct KahlerResiduals {
    pub d_omega: f64,
    pub nijenhuis: f64,
}

/// `dω` and the Nijenhuis tensor of `J` at `p`, evaluated on the coordinate
/// frame of `ℝ^{2n}` (coordinate-constant fields, so all brackets of frame
/// fields vanish). Derivatives of `ω` and `J` are finite differences.
pub fn cone_kahler_residuals(p: &ConePoint, structure: &ConeStructure, s: &Stencil) -> Result<KahlerResiduals> {
    if p.r <= s.reach() * 2.0 {
        return Err(GeomError::EvaluationDomain { context: format!("stencil leaves the cone at r = {}", p.r) });
    }
    let w = p.to_ambient();
    let dim = w.len();
    let omega_matrix = |x: &DVector<f64>| -> Result<DMatrix<f64>> {
        // ω_x(a, b) = ⟨J a, b⟩ since C(g) is the flat metric in ambient coordinates
        Ok(structure.ambient_matrix(x)?.transpose())
    };
    // D_k ω and D_k J for each coordinate direction
    let mut d_omega = Vec::with_capacity(dim);
    let mut d_j = Vec::with_capacity(dim);
    for k in 0..dim {
        let e = DVector::from_fn(dim, |i, _| if i == k { 1.0 } else { 0.0 });
        let dom = derivative_at_zero(|t| Ok(DVector::from_column_slice(omega_matrix(&(&w + &e * t))?.as_slice())), s)?;
        d_omega.push(DMatrix::from_column_slice(dim, dim, dom.as_slice()));
        let dj = derivative_at_zero(|t| Ok(DVector::from_column_slice(structure.ambient_matrix(&(&w + &e * t))?.as_slice())), s)?;
        d_j.push(DMatrix::from_column_slice(dim, dim, dj.as_slice()));
    }
    let mut max_dw: f64 = 0.0;
    for a in 0..dim {
        for b in a + 1..dim {
            for c in b + 1..dim {
                // ω matrix entry (i, j) = ω(e_i, e_j)
                let v = d_omega[a][(b, c)] - d_omega[b][(a, c)] + d_omega[c][(a, b)];
                max_dw = max_dw.max(v.abs());
            }
        }
    }
    let j = structure.ambient_matrix(&w)?;
    // directional derivative of J along an arbitrary vector
    let dj_along = |v: &DVector<f64>| -> DMatrix<f64> {
        let mut m = DMatrix::zeros(dim, dim);
        for k in 0..dim {
            m += &d_j[k] * v[k];
        }
        m
    };
    let mut max_n: f64 = 0.0;
    for a in 0..dim {
        let u = DVector::from_fn(dim, |i, _| if i == a { 1.0 } else { 0.0 });
        let ju = &j * &u;
        for b in a + 1..dim {
            let v = DVector::from_fn(dim, |i, _| if i == b { 1.0 } else { 0.0 });
            let jv = &j * &v;
            // [A, B] = D_A B − D_B A for the fields A = J e_a etc.
            let br_ju_jv = dj_along(&ju) * &v - dj_along(&jv) * &u;
            let br_ju_v = -(dj_along(&v) * &u);
            let br_u_jv = dj_along(&u) * &v;
            let n = br_ju_jv - &j * br_ju_v - &j * br_u_jv;
            max_n = max_n.max(n.amax());
        }
    }
    Ok(KahlerResiduals { d_omega: max_dw, nijenhuis: max_n })
}

/// Outcome of a homogeneity fit `F(ρ_t ·) = t^s F(·)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ScalingFit {
    pub exponent: f64,
    pub residual: f64,
}

/// The scaling parameters used by every exponent fit.
pub fn default_scaling_values() -> Vec<f64> {
    vec![0.5, std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::SQRT_2, 2.0]
}

/// Fits `s` in `ρ_t^* F = t^s F` for a 2-form `F` on the cone, over the given
/// argument triples `(p, U, V)`.
pub fn fit_two_form_scaling<F>(form: F, t_values: &[f64], args: &[(ConePoint, ConeVec, ConeVec)]) -> Result<ScalingFit>
where
    F: Fn(&ConePoint, &ConeVec, &ConeVec) -> f64,
{
    validate_scalings(t_values)?;
    let mut pts = Vec::new();
    for (p, u, v) in args {
        let base = form(p, u, v);
        if base.abs() < 1e-8 {
            continue;
        }
        for &t in t_values {
            let pt = p.scaled(t)?;
            let pulled = form(&pt, &u.pushforward_scaling(t), &v.pushforward_scaling(t));
            pts.push((t, pulled / base));
        }
    }
    let (exponent, residual) = fit_power_law(&pts)?;
    Ok(ScalingFit { exponent, residual })
}

pub(crate) fn validate_scalings(t_values: &[f64]) -> Result<()> {
    if t_values.iter().any(|t| !(0.5..=2.0).contains(t)) {
        return Err(GeomError::InvalidInput("scaling parameters must lie in [0.5, 2]".into()));
    }
    let mut distinct = t_values.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(GeomError::InvalidInput("need at least two distinct scaling parameters".into()));
    }
    Ok(())
}

/// Measured exponent of `ρ_t^*ω = t^s ω` at random argument pairs.
pub fn radial_scaling_exponent<R: Rng + ?Sized>(n: usize, t_values: &[f64], samples: usize, rng: &mut R) -> Result<ScalingFit> {
    let args = random_cone_arguments(n, samples, rng)?;
    fit_two_form_scaling(kahler_form, t_values, &args)
}

/// The degree-one form `dr ∧ η`, used as a negative control for the fit.
pub fn dr_wedge_eta(p: &ConePoint, u: &ConeVec, v: &ConeVec) -> f64 {
    u.radial * eta(&p.base, &v.tangent) - v.radial * eta(&p.base, &u.tangent)
}

/// Random `(p, U, V)` with `r ∈ [0.5, 2]`.
pub fn random_cone_arguments<R: Rng + ?Sized>(n: usize, count: usize, rng: &mut R) -> Result<Vec<(ConePoint, ConeVec, ConeVec)>> {
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let z = AmbientPoint::random_on_sphere(n, rng);
        let r = rng.gen_range(0.5..2.0);
        let u = ConeVec::new(random_tangent(&z, rng), rng.sample(StandardNormal));
        let v = ConeVec::new(random_tangent(&z, rng), rng.sample(StandardNormal));
        out.push((ConePoint::new(z, r)?, u, v));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn e(dim: usize, k: usize) -> DVector<f64> {
        DVector::from_fn(dim, |i, _| if i == k { 1.0 } else { 0.0 })
    }

    #[test]
    fn reeb_at_first_axis() {
        let z = AmbientPoint::on_sphere(e(4, 0)).unwrap();
        assert_eq!(reeb(&z), e(4, 1));
    }

    #[test]
    fn reeb_is_unit_and_tangent() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let z = AmbientPoint::random_on_sphere(3, &mut rng);
            let xi = reeb(&z);
            assert_abs_diff_eq!(eta(&z, &xi), 1.0, epsilon = 1e-14);
            assert_abs_diff_eq!(xi.dot(z.coords()), 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn eta_direct_formula() {
        let z = AmbientPoint::on_sphere(e(4, 0)).unwrap();
        let y = DVector::from_column_slice(&[0.0, 0.3, 0.0, 0.0]);
        assert_abs_diff_eq!(eta(&z, &y), 0.3, epsilon = 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let z = AmbientPoint::random_on_sphere(3, &mut rng);
        let y = random_tangent(&z, &mut rng);
        let y = &y - reeb(&z) * eta(&z, &y);
        assert_abs_diff_eq!(eta(&z, &y), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn phi_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let z = AmbientPoint::random_on_sphere(4, &mut rng);
            let y = random_tangent(&z, &mut rng);
            let w = random_tangent(&z, &mut rng);
            let (phi_xi, metric) = structure_identity_residuals(&z, &y, &w);
            assert!(phi_xi < 1e-15 && metric < 1e-12);
            let pp = phi(&z, &phi(&z, &y));
            let expected = -&y + reeb(&z) * eta(&z, &y);
            assert_abs_diff_eq!(pp, expected, epsilon = 1e-12);
            assert_abs_diff_eq!(phi(&z, &y).dot(z.coords()), 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn sphere_curvature_examples() {
        let x = e(6, 1);
        let z = e(6, 3);
        assert_eq!(sphere_curvature(&x, &x, &z).amax(), 0.0);
        assert_eq!(sphere_curvature(&x, &z, &z), x);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = AmbientPoint::random_on_sphere(3, &mut rng);
        let a = random_tangent(&p, &mut rng);
        let b = random_tangent(&p, &mut rng);
        assert!(sasaki_identity_residual(&p, &a, &b) < 1e-14);
    }

    #[test]
    fn cone_metric_examples() {
        let z = AmbientPoint::on_sphere(e(4, 0)).unwrap();
        let y = DVector::from_column_slice(&[0.0, 1.0, 2.0, 0.0]);
        let w = DVector::from_column_slice(&[0.0, -1.0, 0.5, 3.0]);
        let p1 = ConePoint::new(z.clone(), 1.0).unwrap();
        let p2 = ConePoint::new(z.clone(), 2.0).unwrap();
        assert_eq!(cone_metric(&p1, &ConeVec::new(y.clone(), 0.0), &ConeVec::new(w.clone(), 0.0)), y.dot(&w));
        let zero = DVector::zeros(4);
        assert_eq!(cone_metric(&p2, &ConeVec::new(zero.clone(), 1.0), &ConeVec::new(zero, 1.0)), 1.0);
        assert_eq!(cone_metric(&p2, &ConeVec::new(y.clone(), 0.0), &ConeVec::new(w.clone(), 0.0)), 4.0 * y.dot(&w));
        assert!(ConePoint::new(z, 0.0).is_err());
    }

    #[test]
    fn cone_j_on_radial_and_reeb() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let z = AmbientPoint::random_on_sphere(3, &mut rng);
        let p = ConePoint::new(z.clone(), 1.7).unwrap();
        let jr = cone_j(&p, &ConeVec::radial_field(&p));
        assert_abs_diff_eq!(jr.tangent, reeb(&z), epsilon = 1e-15);
        assert_abs_diff_eq!(jr.radial, 0.0, epsilon = 1e-15);
        let jxi = cone_j(&p, &ConeVec::new(reeb(&z), 0.0));
        assert_abs_diff_eq!(jxi.tangent.amax(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(jxi.radial, -1.7, epsilon = 1e-15);
    }

    #[test]
    fn cone_j_squares_to_minus_one_and_is_isometric() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let args = random_cone_arguments(3, 50, &mut rng).unwrap();
        for (p, u, v) in &args {
            let jju = cone_j(p, &cone_j(p, u));
            assert_abs_diff_eq!(jju.tangent, -&u.tangent, epsilon = 1e-12);
            assert_abs_diff_eq!(jju.radial, -u.radial, epsilon = 1e-12);
            let lhs = cone_metric(p, &cone_j(p, u), &cone_j(p, v));
            assert_abs_diff_eq!(lhs, cone_metric(p, u, v), epsilon = 1e-12);
            assert_abs_diff_eq!(kahler_form(p, u, u), 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(kahler_form(p, u, v), -kahler_form(p, v, u), epsilon = 1e-12);
        }
    }

    #[test]
    fn kahler_form_on_radial_and_reeb() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let z = AmbientPoint::random_on_sphere(3, &mut rng);
        let p = ConePoint::new(z.clone(), 1.0).unwrap();
        let v = kahler_form(&p, &ConeVec::radial_field(&p), &ConeVec::new(reeb(&z), 0.0));
        assert_abs_diff_eq!(v, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn round_cone_j_is_multiplication_by_i() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let w = AmbientPoint::random_on_sphere(3, &mut rng).into_coords() * 1.3;
        let j = ConeStructure::default().ambient_matrix(&w).unwrap();
        let v = DVector::from_fn(6, |i, _| (i as f64).sin());
        assert_abs_diff_eq!(&j * &v, mul_i(&v), epsilon = 1e-14);
    }

    #[test]
    fn deta_factor_and_omega_normalization() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let z = AmbientPoint::random_on_sphere(3, &mut rng);
        let xi = reeb(&z);
        let x = random_tangent(&z, &mut rng);
        let x = &x - &xi * eta(&z, &x);
        let y = phi(&z, &x);
        let c = measure_deta_factor(&z, &x, &y, &Stencil::first_order()).unwrap();
        assert_abs_diff_eq!(c.abs(), 2.0, epsilon = 1e-9);
        let k = measure_omega_vs_d_r2eta(&(z.coords() * 1.5), &x, &y, &Stencil::first_order()).unwrap();
        assert_abs_diff_eq!(k, 0.5, epsilon = 1e-9);
    }

    #[test]
    fn round_cone_is_kahler_and_perturbation_is_not() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let s = Stencil::first_order();
        let z = AmbientPoint::random_on_sphere(3, &mut rng);
        let p = ConePoint::new(z, 1.2).unwrap();
        let good = cone_kahler_residuals(&p, &ConeStructure::default(), &s).unwrap();
        assert!(good.d_omega < 1e-6 && good.nijenhuis < 1e-6, "{good:?}");
        let bad = cone_kahler_residuals(&p, &ConeStructure { phi_scale: 1.1 }, &s).unwrap();
        assert!(bad.nijenhuis > 1e-2, "{bad:?}");
    }

    #[test]
    fn cone_residual_rejects_small_radius() {
        let z = AmbientPoint::on_sphere(e(6, 0)).unwrap();
        let p = ConePoint::new(z, 1e-3).unwrap();
        let err = cone_kahler_residuals(&p, &ConeStructure::default(), &Stencil::first_order()).unwrap_err();
        assert!(matches!(err, GeomError::EvaluationDomain { .. }));
    }

    #[test]
    fn scaling_exponents() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let fit = radial_scaling_exponent(3, &default_scaling_values(), 20, &mut rng).unwrap();
        assert_abs_diff_eq!(fit.exponent, 2.0, epsilon = 1e-6);
        assert!(fit.residual < 1e-8);
        let args = random_cone_arguments(3, 20, &mut rng).unwrap();
        let fit = fit_two_form_scaling(dr_wedge_eta, &default_scaling_values(), &args).unwrap();
        assert_abs_diff_eq!(fit.exponent, 1.0, epsilon = 1e-6);
        assert!(fit_two_form_scaling(kahler_form, &[1.0, 3.0], &args).is_err());
        assert!(fit_two_form_scaling(kahler_form, &[1.0, 1.0], &args).is_err());
    }
}
