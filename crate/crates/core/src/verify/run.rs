use std::collections::BTreeSet;
use std::time::{SystemTime, UNIX_EPOCH};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::*;
use crate::action::{field_bracket_residual, invariance_residuals, regularity_check, search_level_points, ClosedFormVerdict};
use crate::ambient::{
    cone_kahler_residuals, default_scaling_values, eta, phi, radial_scaling_exponent, random_tangent, reeb, measure_deta_factor,
    sasaki_identity_residual, structure_identity_residuals, AmbientPoint, ConePoint, ConeStructure,
};
use crate::levelset::{mixed_curvature_sides, reeb_shape_residual, retract, shape_form_closed, shape_form_direct, LevelPoint};
use crate::numkit::{numerical_rank, RANK_TOL};
use crate::quotient::{
    cone_commutation, contact_nondegeneracy, curvature_at, einstein_fit_from, killing_residual_zeta, oneill_a, oneill_crosscheck,
    random_chart_points, sasaki_residual, sasaki_residual_from, ScaledChart, SliceChart,
};

/// Outcome of a check before it is compared with its tolerance.
struct Outcome {
    per_point: Vec<f64>,
    detail: Option<String>,
    /// Fails the check regardless of the residual.
    veto: Option<String>,
}

impl Outcome {
    fn new(per_point: Vec<f64>) -> Self {
        Self { per_point, detail: None, veto: None }
    }

    fn detail(mut self, d: String) -> Self {
        self.detail = Some(d);
        self
    }
}

fn rng_for(seed: u64, check: usize, index: usize) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(((check as u64) << 32) | index as u64);
    r
}

fn stream(name: &str) -> usize {
    CHECKS.iter().position(|c| c.name == name).expect("catalog name")
}

/// The checks a run performs when no selector is given.
fn default_checks(example: &ExampleName) -> BTreeSet<&'static str> {
    CHECKS
        .iter()
        .map(|c| c.name)
        .filter(|&name| match name {
            "reference_radii" => example.reference_radii().is_some(),
            "einstein" => example.expects_einstein(),
            _ => true,
        })
        .collect()
}

/// Runs the named example (or the explicit weights of `cfg` for
/// [`ExampleName::Custom`]). Only configuration problems are returned as
/// errors; numerical failures are recorded on the affected checks.
pub fn run_example(name: ExampleName, cfg: &RunConfig) -> Result<VerificationReport> {
    let mut cfg = cfg.clone();
    cfg.example = Some(name);
    if name != ExampleName::Custom {
        cfg.weights = None;
    }
    run(&cfg)
}

fn validate_stencils(cfg: &RunConfig) -> Result<()> {
    let f = cfg.first_stencil;
    let s = cfg.second_stencil;
    Stencil::new(f.step, f.richardson_levels, f.order)?;
    Stencil::new(s.step, s.richardson_levels, s.order)?;
    if f.order != 1 || s.order != 2 {
        return Err(GeomError::InvalidInput("first_stencil must have order 1 and second_stencil order 2".into()));
    }
    Ok(())
}

fn run(cfg: &RunConfig) -> Result<VerificationReport> {
    let (example, action) = cfg.resolve()?;
    validate_stencils(cfg)?;
    let selected: BTreeSet<&'static str> = match &cfg.checks {
        Some(list) => list.iter().filter_map(|n| check_spec(n)).map(|c| c.name).collect(),
        None => default_checks(&example),
    };
    let mut runner = Runner { cfg, action: &action, example, selected: &selected, results: Vec::new(), measured: MeasuredConstants::default() };
    runner.sphere_suite();
    let points = search_level_points(&action, cfg.samples, cfg.seed);
    runner.level_suite(&points);
    runner.quotient_suite(&points);

    let Runner { results, measured, .. } = runner;
    let mut checks: Vec<CheckRecord> = Vec::new();
    for spec in CHECKS {
        if let Some((_, outcome)) = results.iter().find(|(n, _)| *n == spec.name) {
            checks.push(record(cfg, spec, outcome));
        }
    }
    let verdict = if checks.iter().all(|c| c.pass) { Verdict::Pass } else { Verdict::Fail };
    let discrepancies = discrepancies(&example, &action, &measured, points.as_deref().ok());
    Ok(VerificationReport {
        schema_version: SCHEMA_VERSION,
        example: example.to_string(),
        n: action.n(),
        weights: action.weights().to_vec(),
        reduced_dimension: action.reduced_dim(),
        checks,
        measured,
        discrepancies,
        environment: Environment {
            seed: cfg.seed,
            samples: cfg.samples,
            charts: cfg.charts,
            chart_points: cfg.chart_points,
            cone_points: cfg.cone_points,
            first_stencil: cfg.first_stencil,
            second_stencil: cfg.second_stencil,
            version: env!("CARGO_PKG_VERSION").to_string(),
        },
        verdict,
        timestamp_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
    })
}

fn record(cfg: &RunConfig, spec: &CheckSpec, outcome: &Result<Outcome>) -> CheckRecord {
    let tolerance = cfg.tolerance(spec.name);
    let base = CheckRecord {
        name: spec.name.to_string(),
        residual: None,
        tolerance,
        expect: spec.expect,
        pass: true,
        status: CheckStatus::Skipped,
        samples: 0,
        detail: None,
        per_point: Vec::new(),
    };
    match outcome {
        Err(GeomError::NotApplicable(why)) => CheckRecord { detail: Some(why.clone()), ..base },
        Err(e) => CheckRecord { pass: false, status: CheckStatus::Error, detail: Some(e.to_string()), ..base },
        Ok(o) => {
            let residual = match spec.expect {
                Expect::Below => o.per_point.iter().copied().fold(0.0, f64::max),
                Expect::Above => o.per_point.iter().copied().fold(f64::INFINITY, f64::min),
            };
            let within = match spec.expect {
                Expect::Below => residual < tolerance,
                Expect::Above => residual > tolerance,
            };
            let pass = within && o.veto.is_none() && !o.per_point.is_empty() && residual.is_finite();
            let detail = match (&o.detail, &o.veto) {
                (Some(d), Some(v)) => Some(format!("{d}; {v}")),
                (d, v) => d.clone().or_else(|| v.clone()),
            };
            CheckRecord {
                residual: Some(residual),
                pass,
                status: if pass { CheckStatus::Pass } else { CheckStatus::Fail },
                samples: o.per_point.len(),
                detail,
                per_point: o.per_point.clone(),
                ..base
            }
        }
    }
}

struct Runner<'a> {
    cfg: &'a RunConfig,
    action: &'a TorusAction,
    example: ExampleName,
    selected: &'a BTreeSet<&'static str>,
    results: Vec<(&'static str, Result<Outcome>)>,
    measured: MeasuredConstants,
}

/// Per-chart results of the quotient suite.
#[derive(Default)]
struct ChartData {
    sasaki: Vec<f64>,
    zeta_unit: Vec<f64>,
    reduced_contact: Vec<f64>,
    killing: Vec<f64>,
    contact: Vec<f64>,
    ricci: Vec<DMatrix<f64>>,
    oneill: Option<f64>,
    cone: Option<f64>,
    scaled_sasaki: Option<f64>,
}

impl Runner<'_> {
    fn wants(&self, name: &str) -> bool {
        self.selected.contains(name)
    }

    fn push(&mut self, name: &'static str, outcome: Result<Outcome>) {
        self.results.push((name, outcome));
    }

    /// Per-sample work over `0..count`, in parallel, with a deterministic
    /// random stream per sample.
    fn per_sample<F>(&self, name: &'static str, count: usize, f: F) -> Result<Vec<f64>>
    where
        F: Fn(usize, &mut ChaCha8Rng) -> Result<f64> + Sync,
    {
        let seed = self.cfg.seed;
        let id = stream(name);
        (0..count).into_par_iter().map(|i| f(i, &mut rng_for(seed, id, i))).collect()
    }

    fn sphere_suite(&mut self) {
        let n = self.action.n();
        let samples = self.cfg.samples;
        let s = self.cfg.first_stencil;

        if self.wants("sasaki_axioms") {
            let r = self.per_sample("sasaki_axioms", samples, |_, rng| {
                let z = AmbientPoint::random_on_sphere(n, rng);
                let x = random_tangent(&z, rng);
                let y = random_tangent(&z, rng);
                let (phi_xi, metric) = structure_identity_residuals(&z, &x, &y);
                Ok(sasaki_identity_residual(&z, &x, &y).max(phi_xi).max(metric))
            });
            self.push("sasaki_axioms", r.map(Outcome::new));
        }
        if self.wants("kahler_cone") {
            let r = self.per_sample("kahler_cone", self.cfg.cone_points, |_, rng| {
                let z = AmbientPoint::random_on_sphere(n, rng);
                let p = ConePoint::new(z, rand::Rng::gen_range(rng, 0.5..=2.0))?;
                let k = cone_kahler_residuals(&p, &ConeStructure::default(), &s)?;
                Ok(k.d_omega.max(k.nijenhuis))
            });
            self.push("kahler_cone", r.map(Outcome::new));
        }

        // measured constants are always produced
        let deta = self.per_sample("deta_factor", samples, |_, rng| {
            let z = AmbientPoint::random_on_sphere(n, rng);
            let mut x = random_tangent(&z, rng);
            let xi = reeb(&z);
            x -= &xi * eta(&z, &x);
            measure_deta_factor(&z, &x, &phi(&z, &x), &s)
        });
        if let Ok(values) = &deta {
            self.measured.deta_factor = Some(values.iter().sum::<f64>() / values.len() as f64);
        }
        if self.wants("deta_factor") {
            self.push("deta_factor", deta.map(|v| Outcome::new(v.iter().map(|c| (c + 2.0).abs()).collect())));
        }

        let ts = default_scaling_values();
        let omega = radial_scaling_exponent(n, &ts, samples, &mut rng_for(self.cfg.seed, stream("omega_scaling"), 0));
        if let Ok(fit) = &omega {
            self.measured.omega_scaling_exponent = Some(fit.exponent);
        }
        if self.wants("omega_scaling") {
            self.push(
                "omega_scaling",
                omega.map(|f| Outcome::new(vec![(f.exponent - 2.0).abs()]).detail(format!("exponent {:.9}, fit rms {:.1e}", f.exponent, f.residual))),
            );
        }
        let moment = self.action.moment_scaling_exponent(&ts, samples, &mut rng_for(self.cfg.seed, stream("moment_scaling"), 0));
        if let Ok(fit) = &moment {
            self.measured.moment_scaling_exponent = Some(fit.exponent);
        }
        if self.wants("moment_scaling") {
            self.push(
                "moment_scaling",
                moment.map(|f| Outcome::new(vec![(f.exponent - 2.0).abs()]).detail(format!("exponent {:.9}, fit rms {:.1e}", f.exponent, f.residual))),
            );
        }
        if self.wants("negative_controls") {
            let r = self.negative_controls_static();
            if let Err(e) = r {
                self.push("negative_controls", Err(e));
            }
        }
    }

    /// The parts of the negative controls that need no chart; the scaled
    /// metric part is added by the quotient suite.
    fn negative_controls_static(&self) -> Result<()> {
        let positive = TorusAction::circle(&vec![1; self.action.n()])?;
        let y = DVector::from_fn(2 * self.action.n(), |i, _| 1.0 + i as f64);
        if !matches!(retract(&y, &positive), Err(GeomError::Infeasible { .. })) {
            return Err(GeomError::InvalidInput("all-positive weights were not rejected as infeasible".into()));
        }
        let mut even = vec![2; self.action.n()];
        even[0] = -2;
        if !matches!(TorusAction::circle(&even)?.closed_form_regularity()?, ClosedFormVerdict::NotCoprime { gcd: 2 }) {
            return Err(GeomError::InvalidInput("gcd-2 weights passed the closed-form regularity test".into()));
        }
        Ok(())
    }

    fn level_suite(&mut self, points: &Result<Vec<LevelPoint>>) {
        const LEVEL: [&str; 13] = [
            "regularity",
            "invariance",
            "level_set",
            "frames",
            "dimension",
            "radii",
            "reference_radii",
            "product_metric",
            "shape_form",
            "reeb_shape",
            "mixed_curvature",
            "oneill_a_xi",
            "negative_controls",
        ];
        let points = match points {
            Ok(p) => p,
            Err(e) => {
                for name in LEVEL {
                    if self.wants(name) && !self.results.iter().any(|(n, _)| *n == name) {
                        self.push(name, Err(e.clone()));
                    }
                }
                return;
            }
        };
        let action = self.action;
        let s = self.cfg.first_stencil;
        let count = points.len();

        if self.wants("regularity") {
            let r = regularity_check(action, points).map(|v| {
                let mut o = Outcome::new(vec![v.min_singular_value]);
                if let Some(cf) = v.closed_form {
                    o = o.detail(format!("closed form: {cf:?}"));
                    if cf != ClosedFormVerdict::Regular {
                        o.veto = Some("closed-form weight test fails".into());
                    }
                }
                o
            });
            self.push("regularity", r);
        }
        if self.wants("invariance") {
            let r = self.per_sample("invariance", count, |i, _| {
                let p = &points[i];
                let inv = invariance_residuals(action, &p.z, &p.tangent_frame(), &s)?;
                let br = field_bracket_residual(action, &p.z, &s)?;
                Ok(inv.lie_metric.max(inv.lie_eta).max(inv.reeb_bracket).max(br))
            });
            self.push("invariance", r.map(Outcome::new));
        }
        if self.wants("level_set") {
            let v = points
                .iter()
                .map(|p| action.moment(&p.z).amax().max((p.z.coords().norm() - 1.0).abs()))
                .collect();
            self.push("level_set", Ok(Outcome::new(v)));
        }
        if self.wants("frames") {
            let r = points.iter().map(|p| p.frame_ledger(action)).collect::<Result<Vec<_>>>();
            self.push("frames", r.map(Outcome::new));
        }
        if self.wants("dimension") {
            let expected = action.reduced_dim() as f64;
            let v = points
                .iter()
                .map(|p| {
                    let z = p.z.coords();
                    let mut rows = vec![z.clone()];
                    rows.extend((0..action.d()).map(|i| action.weight_mul(i, z)));
                    let constraints = DMatrix::from_fn(rows.len(), z.len(), |i, j| rows[i][j]);
                    let tangent_dim = z.len() - numerical_rank(&constraints, RANK_TOL);
                    let orbits = DMatrix::from_fn(p.vertical.len(), z.len(), |i, j| p.vertical[i][j]);
                    let horizontal = tangent_dim - numerical_rank(&orbits, RANK_TOL);
                    (horizontal as f64 - expected).abs().max((p.horizontal.len() as f64 - expected).abs())
                })
                .collect();
            self.push("dimension", Ok(Outcome::new(v).detail(format!("m = {}", action.reduced_dim()))));
        }
        if self.wants("radii") {
            let r = match balanced_block_radii(action) {
                Some((split, radii)) => radii_check(action, points, split, radii)
                    .map(|v| Outcome::new(v).detail(format!("expected {:.12}, {:.12}", radii[0], radii[1]))),
                None => Err(GeomError::NotApplicable("weights do not have the two-block sign pattern".into())),
            };
            self.push("radii", r);
        }
        if self.wants("reference_radii") {
            let r = match self.example.reference_radii() {
                Some((split, radii)) => radii_check(action, points, split, radii)
                    .map(|v| Outcome::new(v).detail(format!("reference {:.12}, {:.12}", radii[0], radii[1]))),
                None => Err(GeomError::NotApplicable("no reference radii for this configuration".into())),
            };
            self.push("reference_radii", r);
        }
        if self.wants("product_metric") {
            self.push("product_metric", product_metric_block_check(action, points).map(Outcome::new));
        }
        if self.wants("shape_form") {
            let r = self.per_sample("shape_form", count, |i, rng| {
                let p = &points[i];
                let y = p.random_tangent(rng);
                let z = p.random_tangent(rng);
                let mut worst: f64 = 0.0;
                for k in 0..action.d() {
                    let closed = shape_form_closed(p, action, k, &y, &z)?;
                    let direct = shape_form_direct(p, action, k, &y, &z, &s)?;
                    worst = worst.max((closed - direct).abs());
                }
                Ok(worst)
            });
            self.push("shape_form", r.map(Outcome::new));
        }
        if self.wants("reeb_shape") {
            let r = self.per_sample("reeb_shape", count, |i, rng| {
                let p = &points[i];
                reeb_shape_residual(p, action, &p.random_tangent(rng))
            });
            self.push("reeb_shape", r.map(Outcome::new));
        }
        if self.wants("mixed_curvature") {
            let r = self.per_sample("mixed_curvature", count, |i, rng| {
                let p = &points[i];
                let x = p.random_contact_horizontal(rng);
                let y = p.random_contact_horizontal(rng);
                let z = p.random_contact_horizontal(rng);
                let (lhs, rhs) = mixed_curvature_sides(p, action, &x, &y, &z)?;
                Ok((lhs - rhs).abs())
            });
            self.push("mixed_curvature", r.map(Outcome::new));
        }
        if self.wants("oneill_a_xi") {
            let r = self.per_sample("oneill_a_xi", count, |i, rng| {
                let p = &points[i];
                let x = p.random_horizontal(rng);
                Ok(oneill_a(p, action, &x, &reeb(&p.z), &s)?.norm())
            });
            self.push("oneill_a_xi", r.map(Outcome::new));
        }
    }

    fn chart_data(&self, index: usize, base: &LevelPoint) -> Result<ChartData> {
        let mut chart = SliceChart::new(self.action, base.clone());
        chart.first = self.cfg.first_stencil;
        chart.second = self.cfg.second_stencil;
        let m = chart.dim();
        let u0 = DVector::zeros(m);
        let mut rng = rng_for(self.cfg.seed, CHECKS.len(), index);
        let mut us = vec![u0.clone()];
        us.extend(random_chart_points(m, chart.interior_radius(), self.cfg.chart_points.saturating_sub(1), &mut rng));

        let mut out = ChartData::default();
        let wants_curvature = ["sasaki", "einstein", "zeta_unit", "reduced_contact"].iter().any(|n| self.wants(n));
        if wants_curvature {
            for u in &us {
                let curv = curvature_at(&chart, u)?;
                let zeta = chart.reduced_reeb(u)?;
                out.sasaki.push(sasaki_residual_from(&curv, &zeta)?);
                out.zeta_unit.push((curv.inner(&zeta, &zeta) - 1.0).abs());
                let eta_prime = chart.reduced_contact_form(u)?;
                out.reduced_contact.push((&curv.metric * &zeta - eta_prime).amax());
                let frame = curv.orthonormal_frame()?;
                let f = DMatrix::from_fn(m, m, |i, j| frame[j][i]);
                out.ricci.push(f.transpose() * curv.ricci() * f);
            }
        }
        if self.wants("killing") {
            out.killing = us.iter().map(|u| killing_residual_zeta(&chart, u)).collect::<Result<_>>()?;
        }
        if self.wants("contact") {
            out.contact = us.iter().map(|u| contact_nondegeneracy(&chart, u)).collect::<Result<_>>()?;
        }
        if self.wants("oneill") {
            out.oneill = Some(oneill_crosscheck(&chart)?.mixed);
        }
        if self.wants("cone") {
            let per_chart = self.cfg.cone_points.div_ceil(self.cfg.charts).min(us.len());
            let c = cone_commutation(&chart, &[0.5, 1.0, 2.0], &us[..per_chart])?;
            out.cone = Some(c.max_relative_deviation.max(c.scale_invariance));
        }
        if index == 0 && self.wants("negative_controls") {
            let scaled = ScaledChart { inner: &chart, factor: 2.0 };
            out.scaled_sasaki = Some(sasaki_residual(&scaled, &u0)?);
        }
        Ok(out)
    }

    fn quotient_suite(&mut self, points: &Result<Vec<LevelPoint>>) {
        const QUOTIENT: [&str; 9] = ["zeta_unit", "reduced_contact", "sasaki", "killing", "contact", "einstein", "oneill", "cone", "negative_controls"];
        if !QUOTIENT.iter().any(|n| self.wants(n) && !self.results.iter().any(|(r, _)| r == n)) {
            return;
        }
        let data: Result<Vec<ChartData>> = match points {
            Ok(points) => {
                let bases = &points[..self.cfg.charts.min(points.len())];
                bases.par_iter().enumerate().map(|(i, b)| self.chart_data(i, b)).collect()
            }
            Err(e) => Err(e.clone()),
        };
        let data = match data {
            Ok(d) => d,
            Err(e) => {
                for name in QUOTIENT {
                    if self.wants(name) && !self.results.iter().any(|(n, _)| *n == name) {
                        self.push(name, Err(e.clone()));
                    }
                }
                return;
            }
        };
        let gather = |f: fn(&ChartData) -> Vec<f64>| -> Vec<f64> { data.iter().flat_map(f).collect() };
        let ricci: Vec<DMatrix<f64>> = data.iter().flat_map(|d| d.ricci.iter().cloned()).collect();
        if !ricci.is_empty() {
            if let Ok(fit) = einstein_fit_from(&ricci) {
                self.measured.einstein_constant = Some(fit.constant);
                self.measured.einstein_residual = Some(fit.residual);
                self.measured.ricci_spectrum = fit.ricci_spectrum.clone();
            }
        }
        for name in ["zeta_unit", "reduced_contact", "sasaki", "killing", "contact"] {
            if !self.wants(name) {
                continue;
            }
            let v = match name {
                "zeta_unit" => gather(|d| d.zeta_unit.clone()),
                "reduced_contact" => gather(|d| d.reduced_contact.clone()),
                "sasaki" => gather(|d| d.sasaki.clone()),
                "killing" => gather(|d| d.killing.clone()),
                _ => gather(|d| d.contact.clone()),
            };
            self.push(name, Ok(Outcome::new(v)));
        }
        if self.wants("einstein") {
            let target = self.action.reduced_dim() as f64 - 1.0;
            let r = if ricci.len() < 5 {
                Err(GeomError::InvalidInput(format!("Einstein fit needs at least 5 chart points, got {}", ricci.len())))
            } else {
                einstein_fit_from(&ricci).map(|fit| {
                    let per_point = ricci
                        .iter()
                        .map(|r| {
                            let m = r.nrows();
                            (r - DMatrix::identity(m, m) * fit.constant).norm().max((fit.constant - target).abs())
                        })
                        .collect();
                    Outcome::new(per_point).detail(format!("c = {:.4}, target {target}, spectrum at first base {:?}", fit.constant, round4(&fit.ricci_spectrum)))
                })
            };
            self.push("einstein", r);
        }
        if self.wants("oneill") {
            self.push("oneill", Ok(Outcome::new(data.iter().filter_map(|d| d.oneill).collect())));
        }
        if self.wants("cone") {
            self.push("cone", Ok(Outcome::new(data.iter().filter_map(|d| d.cone).collect())));
        }
        if self.wants("negative_controls") && !self.results.iter().any(|(n, _)| *n == "negative_controls") {
            let v: Vec<f64> = data.iter().filter_map(|d| d.scaled_sasaki).collect();
            self.push(
                "negative_controls",
                Ok(Outcome::new(v).detail("definite weights rejected, gcd-2 weights rejected; residual is the 2ḡ Sasakian residual".into())),
            );
        }
    }
}

fn round4(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| (x * 1e4).round() / 1e4).collect()
}

fn discrepancies(example: &ExampleName, action: &TorusAction, measured: &MeasuredConstants, points: Option<&[LevelPoint]>) -> Vec<Discrepancy> {
    let mut out = Vec::new();
    if let Some(s) = measured.omega_scaling_exponent {
        out.push(Discrepancy {
            quantity: "omega_scaling_exponent".into(),
            reference: 1.0,
            measured: s,
            note: "ω = ½ d(r²η) is homogeneous of degree 2 under ρ_t".into(),
        });
    }
    if let Some(s) = measured.moment_scaling_exponent {
        out.push(Discrepancy {
            quantity: "moment_scaling_exponent".into(),
            reference: 1.0,
            measured: s,
            note: "Φ = r²μ is homogeneous of degree 2 under ρ_t".into(),
        });
    }
    let quoted_dim = 2 * (action.n() - action.d()) + 1;
    if quoted_dim != action.reduced_dim() {
        out.push(Discrepancy {
            quantity: "reduced_dimension".into(),
            reference: quoted_dim as f64,
            measured: action.reduced_dim() as f64,
            note: "2(n−d)+1 counts for S^{2n+1}; on S^{2n−1} the count is 2n−1−2d".into(),
        });
    }
    if let (Some((split, reference)), Some(points)) = (example.reference_radii(), points) {
        let n = action.n();
        let mean = |range: std::ops::Range<usize>| {
            points.iter().map(|p| p.z.coords().rows(2 * range.start, 2 * (range.end - range.start)).norm()).sum::<f64>() / points.len() as f64
        };
        let got = [mean(0..split), mean(split..n)];
        for b in 0..2 {
            if (got[b] - reference[b]).abs() > 1e-8 {
                out.push(Discrepancy {
                    quantity: format!("block_{b}_radius"),
                    reference: reference[b],
                    measured: got[b],
                    note: "the quoted radii are those of the other block".into(),
                });
            }
        }
    }
    if example.expects_einstein() {
        if let Some(c) = measured.einstein_constant {
            out.push(Discrepancy {
                quantity: "einstein_constant".into(),
                reference: action.reduced_dim() as f64 - 1.0,
                measured: c,
                note: format!("Ricci spectrum {:?}: the submersion metric is not Einstein", round4(&measured.ricci_spectrum)),
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(example: &str, checks: &[&str]) -> VerificationReport {
        let cfg = RunConfig {
            example: Some(example.parse().unwrap()),
            samples: 6,
            charts: 2,
            chart_points: 5,
            cone_points: 4,
            checks: Some(checks.iter().map(|s| s.to_string()).collect()),
            ..RunConfig::default()
        };
        run(&cfg).unwrap()
    }

    #[test]
    fn ex41_core_checks_pass() {
        let r = quick("ex41", &["level_set", "radii", "reference_radii", "sasaki", "killing", "cone", "oneill"]);
        for c in &r.checks {
            assert!(c.pass, "{c:?}");
        }
        assert_eq!(r.exit_code(), 0);
    }

    #[test]
    fn measured_constants_always_present() {
        let r = quick("ex42:k=2", &["level_set"]);
        assert!((r.measured.deta_factor.unwrap() + 2.0).abs() < 1e-6);
        assert!((r.measured.omega_scaling_exponent.unwrap() - 2.0).abs() < 1e-9);
        assert!((r.measured.moment_scaling_exponent.unwrap() - 2.0).abs() < 1e-9);
        assert!(r.discrepancies.iter().any(|d| d.quantity == "omega_scaling_exponent"));
        assert!(r.discrepancies.iter().any(|d| d.quantity == "block_0_radius"));
    }

    #[test]
    fn non_block_weights_skip_radii() {
        let cfg = RunConfig {
            weights: Some(vec![vec![1, -1, 2, -3]]),
            samples: 4,
            checks: Some(vec!["radii".into(), "product_metric".into()]),
            ..RunConfig::default()
        };
        let r = run(&cfg).unwrap();
        assert!(r.checks.iter().all(|c| c.status == CheckStatus::Skipped && c.pass));
    }

    #[test]
    fn definite_weights_are_a_numerical_failure() {
        let cfg = RunConfig { weights: Some(vec![vec![1, 2, 1, 1]]), samples: 3, checks: Some(vec!["regularity".into()]), ..RunConfig::default() };
        let r = run(&cfg).unwrap();
        assert_eq!(r.checks[0].status, CheckStatus::Error);
        assert_eq!(r.exit_code(), 3);
    }

    #[test]
    fn reports_are_reproducible() {
        let a = quick("ex41", &["shape_form", "sasaki"]);
        let b = quick("ex41", &["shape_form", "sasaki"]);
        let strip = |r: &VerificationReport| VerificationReport { timestamp_unix: 0, ..r.clone() }.to_json();
        assert_eq!(strip(&a), strip(&b));
    }
}
