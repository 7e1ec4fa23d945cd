//! Verification runs: configuration, the example registry, orchestration of
//! every suite and the JSON report.

mod examples;
mod run;

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::action::TorusAction;
use crate::error::{GeomError, Result};
use crate::numkit::Stencil;

pub use examples::{balanced_block_radii, product_metric_block_check, radii_check, ExampleName};
pub use run::run_example;

pub const SCHEMA_VERSION: u32 = 1;

/// Whether a check passes when its residual is below or above the tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expect {
    Below,
    Above,
}

/// Catalog entry for a named check.
#[derive(Debug, Clone, Copy)]
pub struct CheckSpec {
    pub name: &'static str,
    pub tolerance: f64,
    pub expect: Expect,
    pub summary: &'static str,
}

const fn below(name: &'static str, tolerance: f64, summary: &'static str) -> CheckSpec {
    CheckSpec { name, tolerance, expect: Expect::Below, summary }
}

const fn above(name: &'static str, tolerance: f64, summary: &'static str) -> CheckSpec {
    CheckSpec { name, tolerance, expect: Expect::Above, summary }
}

/// Every check, in report order.
pub const CHECKS: &[CheckSpec] = &[
    below("sasaki_axioms", 1e-10, "round-sphere curvature and structure identities (analytic)"),
    below("kahler_cone", 1e-6, "dω and Nijenhuis residuals of the cone over the sphere"),
    below("deta_factor", 1e-6, "|c + 2| for dη(X,Y) = c·g(X,φY)"),
    below("omega_scaling", 1e-6, "|s − 2| for ρ_t^*ω = t^s ω"),
    below("moment_scaling", 1e-6, "|s − 2| for Φ∘ρ_t = t^s Φ"),
    above("regularity", 1e-6, "smallest singular value of dμ on the level set (closed-form test must agree)"),
    below("invariance", 1e-8, "Lie derivatives of g and η along the action, [Xᵢ, ξ] and [Xᵢ, Xⱼ]"),
    below("level_set", 1e-10, "|μ| and |‖z‖ − 1| of retracted samples"),
    below("frames", 1e-10, "orthogonality of the vertical, normal and horizontal frames"),
    below("dimension", 0.5, "numerical rank count of the horizontal space vs 2n − 1 − 2d"),
    below("radii", 1e-10, "block radii against the values forced by the weights"),
    below("reference_radii", 1e-10, "block radii against the commonly quoted values"),
    below("product_metric", 1e-10, "off-block induced metric entries in a block-adapted frame"),
    below("shape_form", 1e-6, "closed-form vs direct second fundamental form"),
    below("reeb_shape", 1e-10, "hᵢ(Y,ξ) = ‖Xᵢ‖⁻¹g(Xᵢ,Y) and hᵢ(ξ,ξ) = 0"),
    below("mixed_curvature", 1e-8, "mixed level-set curvature against the Xᵢ-derivative formula"),
    below("zeta_unit", 1e-8, "|ḡ(ζ,ζ) − 1|"),
    below("reduced_contact", 1e-8, "ḡ(ζ,·) against η'(·) = η(dψ ·)"),
    below("sasaki", 1e-4, "‖R(X,ζ)Y − (ḡ(ζ,Y)X − ḡ(X,Y)ζ)‖ on the reduced space"),
    below("killing", 1e-4, "coordinate Killing operator of ζ"),
    above("contact", 1e-6, "smallest singular value of dη' on ker η'"),
    below("einstein", 1e-2, "max(|c − (m − 1)|, ‖Ric − cḡ‖) for the reduced metric"),
    below("oneill_a_xi", 1e-8, "‖A(X, ξ)‖ for horizontal X"),
    below("oneill", 1e-4, "chart curvature vs level-set curvature plus O'Neill terms (mixed components)"),
    below("cone", 1e-6, "reduced flat cone vs r²ḡ + dr² over r ∈ {0.5, 1, 2}"),
    above("negative_controls", 0.1, "2ḡ fails the Sasakian test; definite and non-coprime weights are rejected"),
];

pub fn check_spec(name: &str) -> Option<&'static CheckSpec> {
    CHECKS.iter().find(|c| c.name == name)
}

/// Configuration of a verification run. Every field has a default, so a
/// JSON document only needs the fields it changes.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub example: Option<ExampleName>,
    /// Complex dimension, for explicit weights.
    pub n: Option<usize>,
    pub weights: Option<Vec<Vec<i64>>>,
    /// Level-set sample count.
    pub samples: usize,
    pub charts: usize,
    pub chart_points: usize,
    /// Cone points for the Kähler cone check.
    pub cone_points: usize,
    pub seed: u64,
    pub first_stencil: Stencil,
    pub second_stencil: Stencil,
    pub tolerances: BTreeMap<String, f64>,
    /// Subset of check names; `None` runs the default set.
    pub checks: Option<Vec<String>>,
    pub out: Option<PathBuf>,
    pub csv: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            example: None,
            n: None,
            weights: None,
            samples: 100,
            charts: 10,
            chart_points: 20,
            cone_points: 50,
            seed: 42,
            first_stencil: Stencil::first_order(),
            second_stencil: Stencil::second_order(),
            tolerances: BTreeMap::new(),
            checks: None,
            out: None,
            csv: None,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| GeomError::InvalidInput(format!("config: {e}")))
    }

    /// The example and the action it names, after validating the whole
    /// configuration.
    pub fn resolve(&self) -> Result<(ExampleName, TorusAction)> {
        if self.samples < 1 {
            return Err(GeomError::InvalidInput("samples must be at least 1".into()));
        }
        if self.charts < 1 || self.chart_points < 1 || self.cone_points < 1 {
            return Err(GeomError::InvalidInput("chart and cone counts must be at least 1".into()));
        }
        for name in self.tolerances.keys() {
            if check_spec(name).is_none() {
                return Err(GeomError::InvalidInput(format!("tolerance given for unknown check `{name}`")));
            }
        }
        for (name, tol) in &self.tolerances {
            if !(tol.is_finite() && *tol >= 0.0) {
                return Err(GeomError::InvalidInput(format!("tolerance for `{name}` must be a non-negative number")));
            }
        }
        for name in self.checks.iter().flatten() {
            if check_spec(name).is_none() {
                return Err(GeomError::InvalidInput(format!("unknown check `{name}`")));
            }
        }
        let example = self.example.unwrap_or(ExampleName::Custom);
        let action = match (example.action()?, &self.weights) {
            (Some(_), Some(_)) => {
                return Err(GeomError::InvalidInput("give either a named example or explicit weights, not both".into()));
            }
            (Some(a), None) => a,
            (None, Some(w)) => {
                let n = self.n.or_else(|| w.first().map(Vec::len)).unwrap_or(0);
                TorusAction::new(w.clone(), n)?
            }
            (None, None) => return Err(GeomError::InvalidInput("no example or weights given".into())),
        };
        if let Some(n) = self.n {
            if n != action.n() {
                return Err(GeomError::InvalidInput(format!("n = {n} does not match the weights (n = {})", action.n())));
            }
        }
        if action.n() < 2 {
            return Err(GeomError::InvalidInput("n must be at least 2".into()));
        }
        if action.reduced_dim() < 1 || 2 * action.d() >= 2 * action.n() - 1 {
            return Err(GeomError::InvalidInput("the action has too many factors for a reduced space".into()));
        }
        Ok((example, action))
    }

    pub fn tolerance(&self, name: &str) -> f64 {
        self.tolerances
            .get(name)
            .copied()
            .unwrap_or_else(|| check_spec(name).map_or(0.0, |c| c.tolerance))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    /// The check does not apply to this configuration.
    Skipped,
    /// A numerical failure prevented the check from running.
    Error,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    /// Worst residual over all samples (`null` when skipped or errored).
    pub residual: Option<f64>,
    pub tolerance: f64,
    pub expect: Expect,
    pub pass: bool,
    pub status: CheckStatus,
    pub samples: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
    #[serde(skip)]
    pub per_point: Vec<f64>,
}

/// Constants that are measured on every run.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct MeasuredConstants {
    pub deta_factor: Option<f64>,
    pub omega_scaling_exponent: Option<f64>,
    pub moment_scaling_exponent: Option<f64>,
    pub einstein_constant: Option<f64>,
    pub einstein_residual: Option<f64>,
    /// Ricci eigenvalues in a `ḡ`-orthonormal frame at the first chart base.
    pub ricci_spectrum: Vec<f64>,
}

/// A quantity whose commonly quoted value differs from the measured one.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Discrepancy {
    pub quantity: String,
    pub reference: f64,
    pub measured: f64,
    pub note: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Environment {
    pub seed: u64,
    pub samples: usize,
    pub charts: usize,
    pub chart_points: usize,
    pub cone_points: usize,
    pub first_stencil: Stencil,
    pub second_stencil: Stencil,
    pub version: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerificationReport {
    pub schema_version: u32,
    pub example: String,
    pub n: usize,
    pub weights: Vec<Vec<i64>>,
    pub reduced_dimension: usize,
    pub checks: Vec<CheckRecord>,
    pub measured: MeasuredConstants,
    pub discrepancies: Vec<Discrepancy>,
    pub environment: Environment,
    pub verdict: Verdict,
    pub timestamp_unix: u64,
}

impl VerificationReport {
    /// 0 pass, 1 check failure, 3 numerical failure.
    pub fn exit_code(&self) -> i32 {
        if self.checks.iter().any(|c| c.status == CheckStatus::Error) {
            3
        } else if self.verdict == Verdict::Pass {
            0
        } else {
            1
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    /// Per-point residuals as `check,index,residual` lines.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("check,index,residual\n");
        for c in &self.checks {
            for (i, r) in c.per_point.iter().enumerate() {
                out.push_str(&format!("{},{},{:e}\n", c.name, i, r));
            }
        }
        out
    }

    /// One line per check.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let residual = c.residual.map_or("-".to_string(), |r| format!("{r:.3e}"));
            let cmp = match c.expect {
                Expect::Below => "<",
                Expect::Above => ">",
            };
            out.push_str(&format!(
                "{:<6} {:<18} {:>10} {} {:.0e}{}\n",
                format!("{:?}", c.status).to_uppercase(),
                c.name,
                residual,
                cmp,
                c.tolerance,
                c.detail.as_ref().map_or(String::new(), |d| format!("  ({d})"))
            ));
        }
        for d in &self.discrepancies {
            out.push_str(&format!("NOTE   {}: reference {} vs measured {:.6}\n", d.quantity, d.reference, d.measured));
        }
        out.push_str(&format!("verdict: {:?}\n", self.verdict).to_lowercase());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_and_overrides() {
        let cfg = RunConfig::from_json(r#"{"weights": [[-2, 1, 1, 1]], "samples": 5, "tolerances": {"sasaki": 1e-5}}"#).unwrap();
        assert_eq!(cfg.charts, 10);
        assert_eq!(cfg.tolerance("sasaki"), 1e-5);
        assert_eq!(cfg.tolerance("killing"), 1e-4);
        let (ex, action) = cfg.resolve().unwrap();
        assert_eq!(ex, ExampleName::Custom);
        assert_eq!(action.n(), 4);
    }

    #[test]
    fn config_errors() {
        assert!(RunConfig::from_json(r#"{"bogus": 1}"#).is_err());
        let bad = |json: &str| RunConfig::from_json(json).unwrap().resolve().is_err();
        assert!(bad(r#"{}"#));
        assert!(bad(r#"{"weights": [[1, -1, 1]], "n": 4}"#));
        assert!(bad(r#"{"example": "ex41", "weights": [[1, -1, 1, -1]]}"#));
        assert!(bad(r#"{"example": "ex41", "samples": 0}"#));
        assert!(bad(r#"{"example": "ex41", "checks": ["nope"]}"#));
        assert!(bad(r#"{"example": "ex41", "tolerances": {"nope": 1.0}}"#));
        assert!(bad(r#"{"weights": [[1]]}"#));
    }

    #[test]
    fn catalog_names_are_unique() {
        let mut names: Vec<_> = CHECKS.iter().map(|c| c.name).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), CHECKS.len());
    }
}
