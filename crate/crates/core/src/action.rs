//! Weighted torus actions `z ↦ (e^{iλ₀t}z₀, …)` on the sphere, their
//! fundamental fields, moment maps and invariance diagnostics.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::ambient::{eta, mul_i, phi, project_to_sphere_tangent, reeb, validate_scalings, AmbientPoint, ConePoint, ScalingFit};
use crate::error::{GeomError, Result};
use crate::levelset::{retract, LevelPoint};
use crate::numkit::{derivative_at_zero, fit_power_law, singular_values, Stencil};

/// Smallest singular value of `dμ` on sphere tangent spaces accepted as regular.
pub const REGULARITY_SV_TOL: f64 = 1e-6;

/// Integer weight matrix `Λ` (d × n); row `i` generates the `i`-th circle factor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TorusAction {
    weights: Vec<Vec<i64>>,
    n: usize,
}

impl TorusAction {
    pub fn new(weights: Vec<Vec<i64>>, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(GeomError::InvalidInput("complex dimension must be positive".into()));
        }
        for (i, row) in weights.iter().enumerate() {
            if row.len() != n {
                return Err(GeomError::InvalidInput(format!("weight row {i} has {} entries, expected {n}", row.len())));
            }
            if row.iter().all(|&w| w == 0) {
                return Err(GeomError::InvalidInput(format!("weight row {i} is identically zero")));
            }
        }
        Ok(Self { weights, n })
    }

    /// A single circle with the given weights.
    pub fn circle(weights: &[i64]) -> Result<Self> {
        Self::new(vec![weights.to_vec()], weights.len())
    }

    /// The trivial (d = 0) action on `ℂⁿ`.
    pub fn trivial(n: usize) -> Self {
        Self { weights: Vec::new(), n }
    }

    pub fn weights(&self) -> &[Vec<i64>] {
        &self.weights
    }

    pub fn d(&self) -> usize {
        self.weights.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Dimension `2n − 1 − 2d` of the reduced space.
    pub fn reduced_dim(&self) -> usize {
        2 * self.n - 1 - 2 * self.d()
    }

    /// `Λᵢ ⊙ v`, scaling the `j`-th complex slot by `λᵢⱼ`.
    pub fn weight_mul(&self, i: usize, v: &DVector<f64>) -> DVector<f64> {
        let row = &self.weights[i];
        DVector::from_fn(v.len(), |k, _| row[k / 2] as f64 * v[k])
    }

    /// `Xᵢ(z) = i (Λᵢ ⊙ z)`.
    pub fn fundamental_field(&self, i: usize, z: &AmbientPoint) -> DVector<f64> {
        mul_i(&self.weight_mul(i, z.coords()))
    }

    pub fn fundamental_fields(&self, z: &AmbientPoint) -> Vec<DVector<f64>> {
        (0..self.d()).map(|i| self.fundamental_field(i, z)).collect()
    }

    /// Ambient derivative `D_Y Xᵢ = i (Λᵢ ⊙ Y)` (the fields are linear).
    pub fn field_derivative(&self, i: usize, y: &DVector<f64>) -> DVector<f64> {
        mul_i(&self.weight_mul(i, y))
    }

    /// `μᵢ(z) = Σⱼ λᵢⱼ |zⱼ|²`.
    pub fn moment(&self, z: &AmbientPoint) -> DVector<f64> {
        DVector::from_fn(self.d(), |i, _| self.quadratic(i, z.coords()))
    }

    /// `η(Xᵢ(z))`, which equals the moment map identically.
    pub fn moment_via_eta(&self, z: &AmbientPoint) -> DVector<f64> {
        DVector::from_fn(self.d(), |i, _| eta(z, &self.fundamental_field(i, z)))
    }

    /// `Σⱼ λᵢⱼ |vⱼ|²` for an arbitrary ambient vector.
    pub fn quadratic(&self, i: usize, v: &DVector<f64>) -> f64 {
        self.weights[i]
            .iter()
            .enumerate()
            .map(|(j, &l)| l as f64 * (v[2 * j].powi(2) + v[2 * j + 1].powi(2)))
            .sum()
    }

    /// Tangential gradients of the `μᵢ` at `z`: `2(Λᵢ⊙z − μᵢ z) = −2 φXᵢ`.
    pub fn tangential_gradients(&self, z: &AmbientPoint) -> Vec<DVector<f64>> {
        (0..self.d())
            .map(|i| project_to_sphere_tangent(z, &(self.weight_mul(i, z.coords()) * 2.0)))
            .collect()
    }

    /// `φXᵢ(z)`.
    pub fn phi_fields(&self, z: &AmbientPoint) -> Vec<DVector<f64>> {
        self.fundamental_fields(z).iter().map(|x| phi(z, x)).collect()
    }

    /// Cone moment map `Φᵢ(z, r) = r² μᵢ(z)`, so that `Φ = μ` at `r = 1`.
    pub fn cone_moment(&self, p: &ConePoint) -> DVector<f64> {
        self.moment(&p.base) * (p.r * p.r)
    }

    /// Cone moment map of an ambient vector of `ℂⁿ ≅ C(S)`.
    pub fn cone_moment_ambient(&self, w: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.d(), |i, _| self.quadratic(i, w))
    }

    /// Exact flow of the `i`-th circle factor, `z ↦ e^{iΛᵢt} ⊙ z`.
    pub fn flow(&self, i: usize, t: f64, v: &DVector<f64>) -> DVector<f64> {
        let row = &self.weights[i];
        let mut out = v.clone();
        for (j, &l) in row.iter().enumerate() {
            let (s, c) = (l as f64 * t).sin_cos();
            let (x, y) = (v[2 * j], v[2 * j + 1]);
            out[2 * j] = c * x - s * y;
            out[2 * j + 1] = s * x + c * y;
        }
        out
    }

    /// Measured exponent `s` of `Φ ∘ ρ_t = t^s Φ` at cone points over random
    /// sphere points (where `Φ ≠ 0`).
    pub fn moment_scaling_exponent<R: rand::Rng + ?Sized>(&self, t_values: &[f64], samples: usize, rng: &mut R) -> Result<ScalingFit> {
        validate_scalings(t_values)?;
        let mut pts = Vec::new();
        for _ in 0..samples {
            let z = AmbientPoint::random_on_sphere(self.n, rng);
            let p = ConePoint::new(z, rng.gen_range(0.5..2.0))?;
            let base = self.cone_moment(&p);
            for i in 0..self.d() {
                if base[i].abs() < 1e-6 {
                    continue;
                }
                for &t in t_values {
                    pts.push((t, self.cone_moment(&p.scaled(t)?)[i] / base[i]));
                }
            }
        }
        let (exponent, residual) = fit_power_law(&pts)?;
        Ok(ScalingFit { exponent, residual })
    }

    /// Closed-form regularity test for circle actions: all weights non-zero,
    /// coprime, and of both signs.
    pub fn closed_form_regularity(&self) -> Result<ClosedFormVerdict> {
        if self.d() != 1 {
            return Err(GeomError::NotApplicable("closed-form regularity only covers circle actions".into()));
        }
        let row = &self.weights[0];
        if let Some(j) = row.iter().position(|&w| w == 0) {
            return Ok(ClosedFormVerdict::ZeroWeight { index: j });
        }
        let g = row.iter().fold(0i64, |acc, &w| gcd(acc, w.abs()));
        if g != 1 {
            return Ok(ClosedFormVerdict::NotCoprime { gcd: g });
        }
        let pos = row.iter().any(|&w| w > 0);
        let neg = row.iter().any(|&w| w < 0);
        if !(pos && neg) {
            return Ok(ClosedFormVerdict::SingleSign);
        }
        Ok(ClosedFormVerdict::Regular)
    }

    /// Index of a weight row whose entries share one strict sign, which makes
    /// the zero set empty.
    pub fn definite_row(&self) -> Option<usize> {
        self.weights
            .iter()
            .position(|row| row.iter().all(|&w| w > 0) || row.iter().all(|&w| w < 0))
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ClosedFormVerdict {
    Regular,
    ZeroWeight { index: usize },
    NotCoprime { gcd: i64 },
    SingleSign,
}

/// Residuals of `L_X g = 0`, `L_X η = 0` and `[X, ξ] = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InvarianceResiduals {
    pub lie_metric: f64,
    pub lie_eta: f64,
    pub reeb_bracket: f64,
}

/// Lie-derivative residuals along a flow `F_t` (restricted to the sphere) at
/// `z`, over the tangent `frame`. `push(t, x, v)` is the differential of `F_t`
/// at `x` applied to `v`; time derivatives are finite differences in `t`.
pub fn flow_invariance_residuals<F, P>(flow: F, push: P, z: &AmbientPoint, frame: &[DVector<f64>], s: &Stencil) -> Result<InvarianceResiduals>
where
    F: Fn(f64, &DVector<f64>) -> DVector<f64>,
    P: Fn(f64, &DVector<f64>, &DVector<f64>) -> Result<DVector<f64>>,
{
    let moved = |t: f64| AmbientPoint::normalized(flow(t, z.coords()));
    let x0 = z.coords();

    let mut lie_metric: f64 = 0.0;
    let mut lie_eta: f64 = 0.0;
    for (a, ya) in frame.iter().enumerate() {
        let de = derivative_at_zero(
            |t| {
                let q = moved(t)?;
                Ok(DVector::from_element(1, eta(&q, &push(t, x0, ya)?)))
            },
            s,
        )?;
        lie_eta = lie_eta.max(de[0].abs());
        for yb in frame.iter().skip(a) {
            let dg = derivative_at_zero(|t| Ok(DVector::from_element(1, push(t, x0, ya)?.dot(&push(t, x0, yb)?))), s)?;
            lie_metric = lie_metric.max(dg[0].abs());
        }
    }
    // L_X ξ = d/dt (F_{−t})_* ξ(F_t z)
    let bracket = derivative_at_zero(
        |t| {
            let q = moved(t)?;
            push(-t, q.coords(), &reeb(&q))
        },
        s,
    )?;
    Ok(InvarianceResiduals { lie_metric, lie_eta, reeb_bracket: bracket.amax() })
}

/// Differential of an arbitrary ambient map by central differences in space.
pub fn numerical_pushforward<F>(map: F, x: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    crate::numkit::directional_derivative(|y| Ok(map(y)), x, v, &Stencil::first_order().with_step(1e-4))
}

/// Invariance residuals of every circle factor of `action` at `z`, using the
/// exact flows, maximized over the factors.
pub fn invariance_residuals(action: &TorusAction, z: &AmbientPoint, frame: &[DVector<f64>], s: &Stencil) -> Result<InvarianceResiduals> {
    let mut acc = InvarianceResiduals { lie_metric: 0.0, lie_eta: 0.0, reeb_bracket: 0.0 };
    for i in 0..action.d() {
        // the flows are linear, so they are their own differentials
        let r = flow_invariance_residuals(|t, v| action.flow(i, t, v), |t, _, v| Ok(action.flow(i, t, v)), z, frame, s)?;
        acc.lie_metric = acc.lie_metric.max(r.lie_metric);
        acc.lie_eta = acc.lie_eta.max(r.lie_eta);
        acc.reeb_bracket = acc.reeb_bracket.max(r.reeb_bracket);
    }
    Ok(acc)
}

/// Largest `‖[Xᵢ, Xⱼ]‖` at `z`, with brackets by finite differences of the fields.
pub fn field_bracket_residual(action: &TorusAction, z: &AmbientPoint, s: &Stencil) -> Result<f64> {
    let field = |i: usize| move |x: &DVector<f64>| Ok(mul_i(&action.weight_mul(i, x)));
    let mut worst: f64 = 0.0;
    for i in 0..action.d() {
        for j in i + 1..action.d() {
            let xi = action.fundamental_field(i, z);
            let xj = action.fundamental_field(j, z);
            let dij = crate::numkit::directional_derivative(field(j), z.coords(), &xi, s)?;
            let dji = crate::numkit::directional_derivative(field(i), z.coords(), &xj, s)?;
            worst = worst.max((dij - dji).norm());
        }
    }
    Ok(worst)
}

/// Combined regularity verdict.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularityVerdict {
    pub closed_form: Option<ClosedFormVerdict>,
    pub min_singular_value: f64,
    pub regular: bool,
}

/// Number of random seeds tried before declaring the zero set empty.
pub const FEASIBILITY_SEEDS: usize = 64;

/// Checks that `dμ` restricted to sphere tangent spaces has rank `d` at every
/// sample; circle actions additionally get the closed-form weight test. With
/// no samples, level points are searched from deterministic seeds and an
/// infeasibility error is returned when none is found.
pub fn regularity_check(action: &TorusAction, samples: &[LevelPoint]) -> Result<RegularityVerdict> {
    let closed_form = if action.d() == 1 { Some(action.closed_form_regularity()?) } else { None };
    let owned;
    let samples = if samples.is_empty() {
        owned = search_level_points(action, FEASIBILITY_SEEDS, 0x5eed)?;
        &owned[..]
    } else {
        samples
    };
    let mut min_sv = f64::INFINITY;
    for p in samples {
        min_sv = min_sv.min(moment_differential_min_sv(action, &p.z));
    }
    let numeric_ok = min_sv > REGULARITY_SV_TOL;
    let closed_ok = closed_form.is_none_or(|v| v == ClosedFormVerdict::Regular);
    Ok(RegularityVerdict { closed_form, min_singular_value: min_sv, regular: numeric_ok && closed_ok })
}

/// Minimal singular value of the tangential moment-map differential at `z`.
pub fn moment_differential_min_sv(action: &TorusAction, z: &AmbientPoint) -> f64 {
    if action.d() == 0 {
        return f64::INFINITY;
    }
    let grads = action.tangential_gradients(z);
    let m = DMatrix::from_fn(grads.len(), z.coords().len(), |i, j| grads[i][j]);
    singular_values(&m).last().copied().unwrap_or(0.0)
}

/// Retracts `count` deterministic pseudo-random seeds; errors when none lands
/// on the zero set.
pub fn search_level_points(action: &TorusAction, count: usize, seed: u64) -> Result<Vec<LevelPoint>> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut found = Vec::new();
    let mut last_err = None;
    for _ in 0..count {
        let y = AmbientPoint::random_on_sphere(action.n(), &mut rng);
        match retract(y.coords(), action) {
            Ok(p) => found.push(p),
            Err(e) => last_err = Some(e),
        }
    }
    if found.is_empty() {
        return Err(match last_err {
            Some(GeomError::Infeasible { reason }) => GeomError::Infeasible { reason },
            other => GeomError::Infeasible {
                reason: format!("no retraction converged from {count} seeds ({other:?})"),
            },
        });
    }
    Ok(found)
}
