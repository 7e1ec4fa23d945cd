//! Registry of the named weighted circle actions and the block-radius checks.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::action::TorusAction;
use crate::error::{GeomError, Result};
use crate::levelset::LevelPoint;
use crate::numkit::gram_schmidt;

/// A named configuration.
///
/// String forms: `ex41`, `ex42` or `ex42:k=3`, `ex43` or
/// `ex43:a=1,b=2,k=1,n=4`, `custom`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExampleName {
    /// `S⁷`, weights `(−1,−1,1,1)`.
    Ex41,
    /// `S⁷`, weights `(−k,1,1,1)`.
    Ex42 { k: u32 },
    /// `S^{2n−1}`, weights `a` on `z₀..z_k` and `−b` on the rest.
    Ex43 { a: u32, b: u32, k: u32, n: u32 },
    /// Weights given explicitly.
    Custom,
}

impl ExampleName {
    pub fn action(&self) -> Result<Option<TorusAction>> {
        self.validate()?;
        let row: Vec<i64> = match *self {
            ExampleName::Ex41 => vec![-1, -1, 1, 1],
            ExampleName::Ex42 { k } => vec![-(k as i64), 1, 1, 1],
            ExampleName::Ex43 { a, b, k, n } => (0..n).map(|j| if j <= k { a as i64 } else { -(b as i64) }).collect(),
            ExampleName::Custom => return Ok(None),
        };
        TorusAction::circle(&row).map(Some)
    }

    fn validate(&self) -> Result<()> {
        match *self {
            ExampleName::Ex42 { k: 0 } => Err(GeomError::InvalidInput("ex42 needs k ≥ 1".into())),
            ExampleName::Ex43 { a, b, k, n } => {
                if a == 0 || b == 0 || gcd(a, b) != 1 {
                    return Err(GeomError::InvalidInput(format!("ex43 needs coprime positive a, b (got {a}, {b})")));
                }
                if k < 1 || k + 2 > n {
                    return Err(GeomError::InvalidInput(format!("ex43 needs 1 ≤ k ≤ n − 2 (got k = {k}, n = {n})")));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Block radii as commonly quoted for the named examples: the size of the
    /// first block and the two radii.
    pub fn reference_radii(&self) -> Option<(usize, [f64; 2])> {
        match *self {
            ExampleName::Ex41 => Some((2, [0.5f64.sqrt(), 0.5f64.sqrt()])),
            ExampleName::Ex42 { k } => {
                let k = k as f64;
                Some((1, [(k / (k + 1.0)).sqrt(), (1.0 / (k + 1.0)).sqrt()]))
            }
            ExampleName::Ex43 { a, b, k, .. } => {
                let (a, b) = (a as f64, b as f64);
                Some((k as usize + 1, [(a / (a + b)).sqrt(), (b / (a + b)).sqrt()]))
            }
            ExampleName::Custom => None,
        }
    }

    /// Whether the reduced metric of this example is expected to be
    /// Sasaki–Einstein: equal numbers of weights `−1` and `1`.
    pub fn expects_einstein(&self) -> bool {
        match *self {
            ExampleName::Ex41 => true,
            ExampleName::Ex43 { a: 1, b: 1, k, n } => n % 2 == 0 && 2 * (k + 1) == n,
            _ => false,
        }
    }
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl fmt::Display for ExampleName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExampleName::Ex41 => write!(f, "ex41"),
            ExampleName::Ex42 { k } => write!(f, "ex42:k={k}"),
            ExampleName::Ex43 { a, b, k, n } => write!(f, "ex43:a={a},b={b},k={k},n={n}"),
            ExampleName::Custom => write!(f, "custom"),
        }
    }
}

impl FromStr for ExampleName {
    type Err = GeomError;

    fn from_str(s: &str) -> Result<Self> {
        let (head, params) = match s.split_once(':') {
            Some((h, p)) => (h.trim(), p.trim()),
            None => (s.trim(), ""),
        };
        let mut kv = std::collections::BTreeMap::new();
        for item in params.split(',').filter(|x| !x.trim().is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| GeomError::InvalidInput(format!("bad example parameter `{item}`")))?;
            let v: u32 = v.trim().parse().map_err(|_| GeomError::InvalidInput(format!("bad value in `{item}`")))?;
            kv.insert(k.trim().to_string(), v);
        }
        let mut take = |name: &str, default: u32| kv.remove(name).unwrap_or(default);
        let out = match head {
            "ex41" => ExampleName::Ex41,
            "ex42" => ExampleName::Ex42 { k: take("k", 2) },
            "ex43" => ExampleName::Ex43 { a: take("a", 1), b: take("b", 2), k: take("k", 1), n: take("n", 4) },
            "custom" => ExampleName::Custom,
            other => return Err(GeomError::InvalidInput(format!("unknown example `{other}`"))),
        };
        if let Some(extra) = kv.keys().next() {
            return Err(GeomError::InvalidInput(format!("example {head} has no parameter `{extra}`")));
        }
        out.validate()?;
        Ok(out)
    }
}

impl Serialize for ExampleName {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for ExampleName {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Two-block pattern of a circle action: a prefix of constant weight `α` and
/// a suffix of constant weight `β` with `αβ < 0`. Returns the prefix length
/// and the block radii forced by `α|A|² + β|B|² = 0`, `|A|² + |B|² = 1`.
pub fn balanced_block_radii(action: &TorusAction) -> Option<(usize, [f64; 2])> {
    if action.d() != 1 {
        return None;
    }
    let row = &action.weights()[0];
    let split = row.iter().position(|&w| w != row[0])?;
    let (alpha, beta) = (row[0], row[split]);
    if row[split..].iter().any(|&w| w != beta) || alpha * beta >= 0 {
        return None;
    }
    let (alpha, beta) = (alpha as f64, beta as f64);
    let a2 = beta / (beta - alpha);
    Some((split, [a2.sqrt(), (1.0 - a2).sqrt()]))
}

fn block_norm(p: &LevelPoint, range: std::ops::Range<usize>) -> f64 {
    p.z.coords().rows(2 * range.start, 2 * (range.end - range.start)).norm()
}

/// Per-sample `max |blockwise norm − expected radius|` for the two blocks
/// `z₀..z_{split−1}` and the rest.
pub fn radii_check(action: &TorusAction, samples: &[LevelPoint], split: usize, expected: [f64; 2]) -> Result<Vec<f64>> {
    if balanced_block_radii(action).map(|(s, _)| s) != Some(split) {
        return Err(GeomError::NotApplicable("weights do not have the two-block sign pattern".into()));
    }
    let n = action.n();
    Ok(samples
        .iter()
        .map(|p| (block_norm(p, 0..split) - expected[0]).abs().max((block_norm(p, split..n) - expected[1]).abs()))
        .collect())
}

/// Per-sample largest off-block entry of the induced metric in a
/// block-adapted tangent frame (tangent vectors of each factor sphere), also
/// folding in how far that frame is from being tangent to the level set.
pub fn product_metric_block_check(action: &TorusAction, samples: &[LevelPoint]) -> Result<Vec<f64>> {
    let (split, _) = balanced_block_radii(action)
        .ok_or_else(|| GeomError::NotApplicable("weights do not have the two-block sign pattern".into()))?;
    let n = action.n();
    let mut out = Vec::with_capacity(samples.len());
    for p in samples {
        let z = p.z.coords();
        let dim = z.len();
        let mut blocks: Vec<Vec<DVector<f64>>> = Vec::new();
        for range in [0..2 * split, 2 * split..2 * n] {
            let part = DVector::from_fn(dim, |i, _| if range.contains(&i) { z[i] } else { 0.0 });
            let radius2 = part.norm_squared();
            let mut candidates = vec![part.clone() / radius2.sqrt()];
            for i in range.clone() {
                let e = DVector::from_fn(dim, |j, _| if j == i { 1.0 } else { 0.0 });
                candidates.push(e);
            }
            // orthonormalize with the radial direction of the factor first, then drop it
            let basis = pivoted(&candidates)?;
            blocks.push(basis.into_iter().skip(1).collect());
        }
        let mut worst: f64 = 0.0;
        for u in blocks.iter().flatten() {
            worst = worst.max((p.tangent_project(u) - u).amax());
        }
        for u in &blocks[0] {
            for v in &blocks[1] {
                worst = worst.max(u.dot(v).abs());
            }
        }
        out.push(worst);
    }
    Ok(out)
}

fn pivoted(candidates: &[DVector<f64>]) -> Result<Vec<DVector<f64>>> {
    let mut kept: Vec<DVector<f64>> = Vec::new();
    for c in candidates {
        let mut trial = kept.clone();
        trial.push(c.clone());
        if let Ok(o) = gram_schmidt(&trial, crate::numkit::euclidean) {
            kept = o.vectors;
        }
    }
    Ok(kept)
}
