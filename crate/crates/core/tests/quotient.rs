use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sasakian_reduction::action::{search_level_points, TorusAction};
use sasakian_reduction::numkit::Stencil;
use sasakian_reduction::quotient::{
    cone_chart_map, cone_commutation, contact_nondegeneracy, curvature_at, einstein_fit, killing_residual_zeta, oneill_crosscheck,
    random_chart_points, sasaki_residual, ChartGeometry, ScaledChart, SliceChart,
};
use sasakian_reduction::GeomError;

/// Unit `S³` in gnomonic coordinates `x = (1, u)/√(1+|u|²)` with the Hopf
/// field. Everything here is closed form.
struct GnomonicS3;

impl GnomonicS3 {
    fn point(u: &DVector<f64>) -> DVector<f64> {
        let x = DVector::from_vec(vec![1.0, u[0], u[1], u[2]]);
        x.normalize()
    }
}

impl ChartGeometry for GnomonicS3 {
    fn dim(&self) -> usize {
        3
    }

    fn metric(&self, u: &DVector<f64>) -> sasakian_reduction::Result<DMatrix<f64>> {
        let q = 1.0 + u.norm_squared();
        Ok(DMatrix::identity(3, 3) / q - u * u.transpose() / (q * q))
    }

    fn reeb_field(&self, u: &DVector<f64>) -> sasakian_reduction::Result<DVector<f64>> {
        let x = Self::point(u);
        let xi = DVector::from_vec(vec![-x[1], x[0], -x[3], x[2]]);
        // u_a = x_a / x_0
        Ok(DVector::from_fn(3, |a, _| (xi[a + 1] * x[0] - x[a + 1] * xi[0]) / (x[0] * x[0])))
    }

    fn first_stencil(&self) -> Stencil {
        Stencil::first_order()
    }

    fn second_stencil(&self) -> Stencil {
        Stencil::second_order()
    }
}

fn sample_points(m: usize, seed: u64) -> Vec<DVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut us = vec![DVector::zeros(m)];
    us.extend(random_chart_points(m, 0.3, 5, &mut rng));
    us
}

#[test]
fn curvature_engine_recovers_round_s3() {
    let fit = einstein_fit(&GnomonicS3, &sample_points(3, 1)).unwrap();
    assert!((fit.constant - 2.0).abs() < 1e-6, "{fit:?}");
    assert!(fit.residual < 1e-6);
    let curv = curvature_at(&GnomonicS3, &DVector::from_vec(vec![0.1, -0.2, 0.05])).unwrap();
    assert!(curv.symmetry_residual() < 1e-6);
}

#[test]
fn hopf_field_is_sasakian_on_s3() {
    for u in sample_points(3, 2) {
        assert!(sasaki_residual(&GnomonicS3, &u).unwrap() < 1e-6);
        assert!(killing_residual_zeta(&GnomonicS3, &u).unwrap() < 1e-7);
        assert!(contact_nondegeneracy(&GnomonicS3, &u).unwrap() > 0.1);
    }
}

#[test]
fn scaled_metric_is_not_sasakian() {
    let scaled = ScaledChart { inner: &GnomonicS3, factor: 2.0 };
    let u = DVector::zeros(3);
    assert!(sasaki_residual(&scaled, &u).unwrap() > 0.1);
    let m = scaled.metric(&u).unwrap();
    assert!((m - DMatrix::identity(3, 3) * 2.0).amax() < 1e-15);
}

fn chart(weights: Vec<Vec<i64>>, n: usize, seed: u64) -> SliceChart {
    let action = TorusAction::new(weights, n).unwrap();
    let base = search_level_points(&action, 1, seed).unwrap().remove(0);
    SliceChart::new(&action, base)
}

fn interior_points(c: &SliceChart, seed: u64) -> Vec<DVector<f64>> {
    let r = c.interior_radius();
    sample_points(c.dim(), seed).into_iter().map(|u| u * (r / 0.3)).collect()
}

#[test]
fn slice_chart_is_orthonormal_at_base() {
    let c = chart(vec![vec![-1, -1, 1, 1]], 4, 3);
    let u = DVector::zeros(c.dim());
    assert_eq!(c.dim(), 5);
    assert!((c.reduced_metric(&u).unwrap() - DMatrix::identity(5, 5)).amax() < 1e-10);
    let zeta = c.reduced_reeb(&u).unwrap();
    assert!((zeta[0] - 1.0).abs() < 1e-10 && zeta.rows(1, 4).amax() < 1e-10);
    assert!((c.reduced_contact_form(&u).unwrap() - zeta).amax() < 1e-10);
}

#[test]
fn trivial_action_chart_is_the_round_s3() {
    let c = chart(vec![], 2, 4);
    let fit = einstein_fit(&c, &interior_points(&c, 5)).unwrap();
    assert!((fit.constant - 2.0).abs() < 1e-5, "{fit:?}");
}

#[test]
fn two_torus_quotient_is_einstein() {
    let c = chart(vec![vec![1, -1, 0, 0], vec![0, 0, 1, -1]], 4, 6);
    assert_eq!(c.dim(), 3);
    let us = interior_points(&c, 7);
    let fit = einstein_fit(&c, &us).unwrap();
    assert!((fit.constant - 2.0).abs() < 1e-5, "{fit:?}");
    assert!(sasaki_residual(&c, &us[1]).unwrap() < 1e-6);
}

#[test]
fn example_41_metric_is_eta_einstein() {
    let c = chart(vec![vec![-1, -1, 1, 1]], 4, 8);
    let fit = einstein_fit(&c, &interior_points(&c, 9)).unwrap();
    let expected = [4.0, 6.0, 6.0, 6.0, 6.0];
    for (got, want) in fit.ricci_spectrum.iter().zip(expected) {
        assert!((got - want).abs() < 1e-5, "{:?}", fit.ricci_spectrum);
    }
}

#[test]
fn oneill_chain_matches_chart_engine() {
    for (w, n) in [(vec![vec![-1, -1, 1, 1]], 4), (vec![vec![1, -2, 3, -1, 1]], 5)] {
        let check = oneill_crosscheck(&chart(w, n, 10)).unwrap();
        assert!(check.mixed < 1e-6 && check.full < 1e-5, "{check:?}");
    }
}

#[test]
fn cone_chart_is_homogeneous() {
    let c = chart(vec![vec![-2, 1, 1, 1]], 4, 11);
    let u = DVector::from_fn(5, |i, _| 0.004 * (i as f64 - 2.0));
    let one = cone_chart_map(&c, &u, 1.0).unwrap();
    let two = cone_chart_map(&c, &u, 2.0).unwrap();
    assert!((two - &one * 2.0).amax() < 1e-14);
    assert!((one.norm() - 1.0).abs() < 1e-14);
    assert!(c.action().moment(&sasakian_reduction::ambient::AmbientPoint::on_sphere(one).unwrap()).amax() < 1e-12);
}

#[test]
fn cone_commutation_holds_and_validates_radii() {
    let c = chart(vec![vec![1, -1, 2, -3]], 4, 12);
    let us = sample_points(5, 13).into_iter().map(|u| u * 0.1).collect::<Vec<_>>();
    let out = cone_commutation(&c, &[0.5, 1.0, 2.0], &us).unwrap();
    assert!(out.max_relative_deviation < 1e-6 && out.scale_invariance < 1e-10, "{out:?}");
    assert!(matches!(cone_commutation(&c, &[3.0], &us), Err(GeomError::InvalidInput(_))));
}

#[test]
fn chart_rejects_bad_input() {
    let c = chart(vec![vec![-1, -1, 1, 1]], 4, 14);
    let far = DVector::from_element(5, 1.0);
    assert!(matches!(c.sample(&far), Err(GeomError::OutsideChart { .. })));
    assert!(matches!(c.sample(&DVector::zeros(3)), Err(GeomError::InvalidInput(_))));
    let mut frame = c.frame().to_vec();
    frame[1] = &frame[1] * 2.0;
    assert!(SliceChart::with_frame(c.action(), c.base().clone(), frame).is_err());
    assert!(SliceChart::with_frame(c.action(), c.base().clone(), c.frame()[..4].to_vec()).is_err());
}

#[test]
fn random_chart_points_stay_inside() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let pts = random_chart_points(5, 0.02, 200, &mut rng);
    assert_eq!(pts.len(), 200);
    assert!(pts.iter().all(|u| u.len() == 5 && u.norm() <= 0.02));
}

/// `g_a = a ḡ + a(a − 1) η' ⊗ η'` with Reeb field `ζ/a`.
struct DHomothetic<'a> {
    inner: &'a SliceChart,
    a: f64,
}

impl ChartGeometry for DHomothetic<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn metric(&self, u: &DVector<f64>) -> sasakian_reduction::Result<DMatrix<f64>> {
        let g = self.inner.reduced_metric(u)?;
        let eta = &g * self.inner.reduced_reeb(u)?;
        Ok(g * self.a + &eta * eta.transpose() * (self.a * (self.a - 1.0)))
    }

    fn reeb_field(&self, u: &DVector<f64>) -> sasakian_reduction::Result<DVector<f64>> {
        Ok(self.inner.reduced_reeb(u)? / self.a)
    }

    fn first_stencil(&self) -> Stencil {
        self.inner.first
    }

    fn second_stencil(&self) -> Stencil {
        self.inner.second
    }
}

#[test]
fn d_homothety_makes_the_balanced_quotients_einstein() {
    for (weights, a, c) in [(vec![-1, -1, 1, 1], 4.0 / 3.0, 4.0), (vec![1, 1, 1, -1, -1, -1], 6.0 / 5.0, 8.0)] {
        let n = weights.len();
        let chart = chart(vec![weights], n, 16);
        let us = interior_points(&chart, 17);
        let g = DHomothetic { inner: &chart, a };
        let fit = einstein_fit(&g, &us).unwrap();
        assert!((fit.constant - c).abs() < 1e-5 && fit.residual < 1e-4, "{fit:?}");
        assert!(sasaki_residual(&g, &us[2]).unwrap() < 1e-5);
    }
}
