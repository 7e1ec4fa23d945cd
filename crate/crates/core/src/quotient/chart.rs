use nalgebra::{DMatrix, DVector};

use crate::action::TorusAction;
use crate::ambient::{eta, reeb};
use crate::error::{GeomError, Result};
use crate::levelset::{solve_retraction, LevelPoint, Retraction};
use crate::numkit::{project_onto_span, Stencil};

/// Default chart radius.
pub const CHART_RADIUS: f64 = 5e-2;

/// Local model of the reduced space around an orbit: `ψ(u) = retract(z₀ + Σ u_a e_a)`
/// with `{e_a}` an orthonormal horizontal frame at the base point `z₀`.
/// `π ∘ ψ` is a coordinate chart of `M = μ⁻¹(0)/G`.
#[derive(Debug, Clone)]
pub struct SliceChart {
    action: TorusAction,
    base: LevelPoint,
    frame: Vec<DVector<f64>>,
    pub chart_radius: f64,
    /// Stencil for first derivatives of chart quantities.
    pub first: Stencil,
    /// Stencil for second derivatives of the reduced metric.
    pub second: Stencil,
}

/// Everything the chart knows at one coordinate value.
#[derive(Debug, Clone)]
pub struct ChartSample {
    pub retraction: Retraction,
    /// `dψ(e_a)` as ambient vectors.
    pub tangents: Vec<DVector<f64>>,
    /// Fundamental fields at `ψ(u)`.
    pub vertical: Vec<DVector<f64>>,
}

impl ChartSample {
    /// `hor(dψ e_a)`: the tangents with their vertical components removed.
    pub fn horizontal_tangents(&self) -> Result<Vec<DVector<f64>>> {
        self.tangents
            .iter()
            .map(|t| project_onto_span(t, &self.vertical).map(|(v, _)| t - v))
            .collect::<Result<_>>()
            .map_err(|_| GeomError::DegenerateOrbit { index: 0, norm: self.min_vertical_norm() })
    }

    fn min_vertical_norm(&self) -> f64 {
        self.vertical.iter().map(|x| x.norm()).fold(f64::INFINITY, f64::min)
    }
}

impl SliceChart {
    /// Chart built on the base point's horizontal frame (`ξ` first).
    pub fn new(action: &TorusAction, base: LevelPoint) -> Self {
        let frame = base.horizontal.clone();
        Self::with_frame(action, base, frame).expect("the base point's own horizontal frame is valid")
    }

    /// Chart with a caller-supplied horizontal frame, checked to be orthonormal
    /// and horizontal with the right count.
    pub fn with_frame(action: &TorusAction, base: LevelPoint, frame: Vec<DVector<f64>>) -> Result<Self> {
        let m = action.reduced_dim();
        if frame.len() != m {
            return Err(GeomError::InvalidInput(format!("chart frame has {} vectors, expected {m}", frame.len())));
        }
        for (a, e) in frame.iter().enumerate() {
            let off = (base.tangent_project(e) - e).amax();
            let vert = base.vertical.iter().map(|x| x.dot(e).abs()).fold(0.0, f64::max);
            if off > 1e-8 || vert > 1e-8 {
                return Err(GeomError::InvalidInput(format!("frame vector {a} is not horizontal")));
            }
            for (b, f) in frame.iter().enumerate() {
                let target = if a == b { 1.0 } else { 0.0 };
                if (e.dot(f) - target).abs() > 1e-10 {
                    return Err(GeomError::InvalidInput("chart frame is not orthonormal".into()));
                }
            }
        }
        Ok(Self {
            action: action.clone(),
            base,
            frame,
            chart_radius: CHART_RADIUS,
            first: Stencil::first_order(),
            second: Stencil::second_order(),
        })
    }

    pub fn action(&self) -> &TorusAction {
        &self.action
    }

    pub fn base(&self) -> &LevelPoint {
        &self.base
    }

    pub fn frame(&self) -> &[DVector<f64>] {
        &self.frame
    }

    /// Chart dimension `m = 2n − 1 − 2d`.
    pub fn dim(&self) -> usize {
        self.frame.len()
    }

    /// Largest `|u|` at which curvature may be evaluated with the stencils
    /// staying inside the chart.
    pub fn interior_radius(&self) -> f64 {
        (self.chart_radius - 2f64.sqrt() * self.second.reach().max(self.first.reach())).max(0.0)
    }

    fn seed(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        if u.len() != self.dim() {
            return Err(GeomError::InvalidInput(format!("chart coordinate has length {}, expected {}", u.len(), self.dim())));
        }
        let norm = u.norm();
        if norm > self.chart_radius {
            return Err(GeomError::OutsideChart { norm, radius: self.chart_radius });
        }
        let mut y = self.base.z.coords().clone();
        for (e, ua) in self.frame.iter().zip(u.iter()) {
            y += e * *ua;
        }
        Ok(y)
    }

    /// `ψ(u)` with its exact differential.
    pub fn sample(&self, u: &DVector<f64>) -> Result<ChartSample> {
        let y = self.seed(u)?;
        let retraction = solve_retraction(&y, &self.action)?;
        let tangents = self
            .frame
            .iter()
            .map(|e| retraction.differential(&self.action, &y, e))
            .collect::<Result<Vec<_>>>()?;
        let vertical = self.action.fundamental_fields(&retraction.z);
        Ok(ChartSample { retraction, tangents, vertical })
    }

    /// `ψ(u)` as a level point with frames.
    pub fn chart_map(&self, u: &DVector<f64>) -> Result<LevelPoint> {
        let s = self.sample(u)?;
        LevelPoint::from_point(s.retraction.z, &self.action)
    }

    /// `ḡ_ab(u) = g(hor dψ e_a, hor dψ e_b)`.
    pub fn reduced_metric(&self, u: &DVector<f64>) -> Result<DMatrix<f64>> {
        let h = self.sample(u)?.horizontal_tangents()?;
        let m = self.dim();
        Ok(DMatrix::from_fn(m, m, |a, b| h[a].dot(&h[b])))
    }

    /// Chart components of the projected Reeb field `ζ`: the `c` with
    /// `ξ = Σ c_a dψ e_a + Σ bᵢ Xᵢ`.
    pub fn reduced_reeb(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        let s = self.sample(u)?;
        reeb_coordinates(&s)
    }

    /// `η'_a = η(dψ e_a)`, the reduced contact form in chart components.
    pub fn reduced_contact_form(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        let s = self.sample(u)?;
        let z = &s.retraction.z;
        Ok(DVector::from_fn(self.dim(), |a, _| eta(z, &s.tangents[a])))
    }
}

pub(crate) fn reeb_coordinates(s: &ChartSample) -> Result<DVector<f64>> {
    // ξ is tangent to the level set, so pairing with the horizontal tangents
    // removes the vertical part: ḡ c = (⟨ξ, hor dψ e_b⟩)_b
    let h = s.horizontal_tangents()?;
    let m = h.len();
    let xi = reeb(&s.retraction.z);
    let gram = DMatrix::from_fn(m, m, |a, b| h[a].dot(&h[b]));
    let rhs = DVector::from_fn(m, |b, _| xi.dot(&h[b]));
    gram.cholesky()
        .map(|c| c.solve(&rhs))
        .ok_or_else(|| GeomError::InvalidInput("chart metric is not positive definite".into()))
}

/// A chart of a Riemannian manifold carrying a distinguished unit field.
pub trait ChartGeometry: Sync {
    fn dim(&self) -> usize;
    fn metric(&self, u: &DVector<f64>) -> Result<DMatrix<f64>>;
    /// Chart components of the unit Reeb candidate.
    fn reeb_field(&self, u: &DVector<f64>) -> Result<DVector<f64>>;
    fn first_stencil(&self) -> Stencil;
    fn second_stencil(&self) -> Stencil;
}

impl ChartGeometry for SliceChart {
    fn dim(&self) -> usize {
        self.dim()
    }

    fn metric(&self, u: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.reduced_metric(u)
    }

    fn reeb_field(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        self.reduced_reeb(u)
    }

    fn first_stencil(&self) -> Stencil {
        self.first
    }

    fn second_stencil(&self) -> Stencil {
        self.second
    }
}

/// The chart metric multiplied by a constant, with the Reeb candidate
/// renormalized to unit length.
#[derive(Debug, Clone)]
pub struct ScaledChart<'a, G> {
    pub inner: &'a G,
    pub factor: f64,
}

impl<G: ChartGeometry> ChartGeometry for ScaledChart<'_, G> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn metric(&self, u: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(self.inner.metric(u)? * self.factor)
    }

    fn reeb_field(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.inner.reeb_field(u)? / self.factor.sqrt())
    }

    fn first_stencil(&self) -> Stencil {
        self.inner.first_stencil()
    }

    fn second_stencil(&self) -> Stencil {
        self.inner.second_stencil()
    }
}
