//! Parameter and data types, link functions, the surrogate probability model
//! and forward simulation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Default slack for the label-switching constraint `α₁ + α₂ ≥ 1 + δ`.
pub const DEFAULT_DELTA: f64 = 1e-6;

/// Overflow-safe logistic function.
pub fn expit(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

/// Log-odds of `p`; `p` must lie strictly inside `(0, 1)`.
pub fn logit(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("logit requires 0 < p < 1, got {p}")));
    }
    Ok(p.ln() - (-p).ln_1p())
}

/// Sensitivity `α₁ = P(S=1|Y=1)` and specificity `α₂ = P(S=0|Y=0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MisclassParams {
    alpha1: f64,
    alpha2: f64,
}

impl MisclassParams {
    pub fn new(alpha1: f64, alpha2: f64) -> Result<Self> {
        Self::with_delta(alpha1, alpha2, DEFAULT_DELTA)
    }

    /// Validates `0 ≤ α ≤ 1` and `α₁ + α₂ ≥ 1 + delta`.
    pub fn with_delta(alpha1: f64, alpha2: f64, delta: f64) -> Result<Self> {
        for (name, v) in [("alpha1", alpha1), ("alpha2", alpha2)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParameter(format!("{name} = {v} outside [0, 1]")));
            }
        }
        // Absorb rounding from grid construction (e.g. 0.7 + 0.3).
        if alpha1 + alpha2 < 1.0 + delta - 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "alpha1 + alpha2 = {} must be at least 1 + {delta}",
                alpha1 + alpha2
            )));
        }
        Ok(Self { alpha1, alpha2 })
    }

    /// Builds a value without any constraint check. Only useful for
    /// constructing points outside the parameter space, such as the
    /// label-switched twin of a valid point.
    pub fn new_unchecked(alpha1: f64, alpha2: f64) -> Self {
        Self { alpha1, alpha2 }
    }

    pub fn alpha1(&self) -> f64 {
        self.alpha1
    }

    pub fn alpha2(&self) -> f64 {
        self.alpha2
    }

    /// Lower asymptote `a = 1 - α₂`.
    pub fn floor(&self) -> f64 {
        1.0 - self.alpha2
    }

    /// Range `b = α₁ + α₂ - 1`.
    pub fn range(&self) -> f64 {
        self.alpha1 + self.alpha2 - 1.0
    }

    pub fn to_ab(&self) -> ABParams {
        ABParams { a: self.floor(), b: self.range() }
    }
}

/// The `(a, b)` form of the misclassification rates: `P(S=1|x) = a + b·expit(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ABParams {
    pub a: f64,
    pub b: f64,
}

impl ABParams {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&a) || !(b > 0.0) || a + b > 1.0 + 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "(a, b) = ({a}, {b}) violates 0 <= a, b > 0, a + b <= 1"
            )));
        }
        Ok(Self { a, b })
    }

    pub fn to_misclass(&self) -> Result<MisclassParams> {
        MisclassParams::new((self.a + self.b).min(1.0), 1.0 - self.a)
    }
}

/// Intercept `β₀` and covariate coefficients `β`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionParams {
    pub intercept: f64,
    pub coefs: Vec<f64>,
}

impl RegressionParams {
    pub fn new(intercept: f64, coefs: Vec<f64>) -> Result<Self> {
        if !intercept.is_finite() || coefs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("regression coefficients must be finite".into()));
        }
        Ok(Self { intercept, coefs })
    }

    pub fn zeros(p: usize) -> Self {
        Self { intercept: 0.0, coefs: vec![0.0; p] }
    }

    pub fn p(&self) -> usize {
        self.coefs.len()
    }

    /// Coefficients by slot: slot 0 is the intercept, slot `j + 1` is covariate `j`.
    pub fn slots(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.coefs.len() + 1);
        v.push(self.intercept);
        v.extend_from_slice(&self.coefs);
        v
    }

    pub fn from_slots(slots: &[f64]) -> Self {
        Self { intercept: slots[0], coefs: slots[1..].to_vec() }
    }

    pub fn slot(&self, k: usize) -> f64 {
        if k == 0 {
            self.intercept
        } else {
            self.coefs[k - 1]
        }
    }

    pub fn set_slot(&mut self, k: usize, v: f64) {
        if k == 0 {
            self.intercept = v;
        } else {
            self.coefs[k - 1] = v;
        }
    }

    /// `β₀ + xᵀβ`; `x` must have length `p`.
    pub fn linear_predictor(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.coefs.len());
        self.intercept + x.iter().zip(&self.coefs).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn max_abs(&self) -> f64 {
        self.coefs.iter().fold(self.intercept.abs(), |m, c| m.max(c.abs()))
    }
}

/// Full parameter vector `θ = (α₁, α₂, β₀, β)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theta {
    pub misclass: MisclassParams,
    pub reg: RegressionParams,
}

impl Theta {
    pub fn new(alpha1: f64, alpha2: f64, intercept: f64, coefs: Vec<f64>) -> Result<Self> {
        Ok(Self {
            misclass: MisclassParams::new(alpha1, alpha2)?,
            reg: RegressionParams::new(intercept, coefs)?,
        })
    }

    pub fn p(&self) -> usize {
        self.reg.p()
    }

    /// `P(S = 1 | x)`.
    pub fn surrogate_prob(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.p() {
            return Err(Error::DimensionMismatch { expected: self.p(), got: x.len() });
        }
        Ok(self.prob_unchecked(x))
    }

    pub(crate) fn prob_unchecked(&self, x: &[f64]) -> f64 {
        let ab = self.misclass.to_ab();
        ab.a + ab.b * expit(self.reg.linear_predictor(x))
    }
    /// `(1 - α₂, 1 - α₁, -β₀, -β)`: same surrogate distribution, outside Θ.
    pub fn label_switched(&self) -> Theta {
        Theta {
            misclass: MisclassParams::new_unchecked(1.0 - self.misclass.alpha2, 1.0 - self.misclass.alpha1),
            reg: RegressionParams {
                intercept: -self.reg.intercept,
                coefs: self.reg.coefs.iter().map(|c| -c).collect(),
            },
        }
    }

    /// Sup-norm distance over `(α₁, α₂, β₀, β)`.
    pub fn distance(&self, other: &Theta) -> f64 {
        let mut d = (self.misclass.alpha1 - other.misclass.alpha1)
            .abs()
            .max((self.misclass.alpha2 - other.misclass.alpha2).abs())
            .max((self.reg.intercept - other.reg.intercept).abs());
        for (a, b) in self.reg.coefs.iter().zip(&other.reg.coefs) {
            d = d.max((a - b).abs());
        }
        d
    }
}

/// Row-major `n × p` covariate matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Covariates {
    n: usize,
    p: usize,
    values: Vec<f64>,
}

impl Covariates {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, |r| r.len());
        let mut values = Vec::with_capacity(n * p);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != p {
                return Err(Error::InvalidData(format!("row {i} has {} columns, expected {p}", r.len())));
            }
            values.extend_from_slice(r);
        }
        Self::from_flat(n, p, values)
    }

    pub fn from_flat(n: usize, p: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * p {
            return Err(Error::DimensionMismatch { expected: n * p, got: values.len() });
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!(
                "non-finite covariate at row {}, column {}",
                k / p.max(1),
                k % p.max(1)
            )));
        }
        Ok(Self { n, p, values })
    }

    /// `n` rows with no covariates (intercept-only designs).
    pub fn empty(n: usize) -> Self {
        Self { n, p: 0, values: Vec::new() }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.p..(i + 1) * self.p]
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |i| self.values[i * self.p + j])
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.n).map(move |i| self.row(i))
    }
}

/// Surrogate outcomes `S` with their covariate rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    covariates: Covariates,
    outcomes: Vec<bool>,
}

impl Dataset {
    pub fn new(covariates: Covariates, outcomes: Vec<bool>) -> Result<Self> {
        if covariates.n() == 0 {
            return Err(Error::InvalidData("dataset needs at least one observation".into()));
        }
        if outcomes.len() != covariates.n() {
            return Err(Error::DimensionMismatch { expected: covariates.n(), got: outcomes.len() });
        }
        Ok(Self { covariates, outcomes })
    }

    /// Convenience constructor from `0/1` codes.
    pub fn from_codes(covariates: Covariates, codes: &[u8]) -> Result<Self> {
        if let Some(i) = codes.iter().position(|&c| c > 1) {
            return Err(Error::InvalidData(format!("outcome at row {i} is {}, expected 0 or 1", codes[i])));
        }
        Self::new(covariates, codes.iter().map(|&c| c == 1).collect())
    }

    pub fn n(&self) -> usize {
        self.covariates.n()
    }

    pub fn p(&self) -> usize {
        self.covariates.p()
    }

    pub fn covariates(&self) -> &Covariates {
        &self.covariates
    }

    pub fn x(&self, i: usize) -> &[f64] {
        self.covariates.row(i)
    }

    pub fn s(&self, i: usize) -> f64 {
        if self.outcomes[i] {
            1.0
        } else {
            0.0
        }
    }

    pub fn outcomes(&self) -> &[bool] {
        &self.outcomes
    }

    pub fn mean_outcome(&self) -> f64 {
        self.outcomes.iter().filter(|&&s| s).count() as f64 / self.n() as f64
    }
}

/// Attainable values of one covariate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Support {
    Finite(Vec<f64>),
    Continuous,
}

impl Support {
    /// Sorts and de-duplicates; at least two distinct values are required,
    /// otherwise the coefficient cannot be told apart from the intercept.
    pub fn finite(mut values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("support values must be finite".into()));
        }
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        values.dedup();
        if values.len() < 2 {
            return Err(Error::DegenerateDesign(format!(
                "support needs at least two distinct values, got {values:?}"
            )));
        }
        Ok(Support::Finite(values))
    }

    /// Number of distinct values, `None` for continuous supports.
    pub fn n_values(&self) -> Option<usize> {
        match self {
            Support::Finite(v) => Some(v.len()),
            Support::Continuous => None,
        }
    }

    pub fn has_at_least(&self, k: usize) -> bool {
        self.n_values().is_none_or(|m| m >= k)
    }
}

/// Per-covariate supports; the joint support is their Cartesian product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportSpec(pub Vec<Support>);

impl SupportSpec {
    pub fn new(supports: Vec<Support>) -> Result<Self> {
        for s in &supports {
            if let Support::Finite(v) = s {
                if v.len() < 2 || v.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err(Error::DegenerateDesign(
                        "finite supports must be strictly increasing with at least two values".into(),
                    ));
                }
            }
        }
        Ok(Self(supports))
    }

    pub fn p(&self) -> usize {
        self.0.len()
    }

    pub fn get(&self, j: usize) -> &Support {
        &self.0[j]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Support> {
        self.0.iter()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|s| s.n_values().is_some())
    }

    /// Number of points in the product support, if finite.
    pub fn n_cells(&self) -> Option<usize> {
        self.0.iter().try_fold(1usize, |acc, s| s.n_values().and_then(|m| acc.checked_mul(m)))
    }

    /// Supports observed in `x`: columns with more than `max_finite`
    /// distinct values are treated as continuous.
    pub fn infer(x: &Covariates, max_finite: usize) -> Result<Self> {
        let mut out = Vec::with_capacity(x.p());
        for j in 0..x.p() {
            let mut vals: Vec<f64> = x.column(j).collect();
            vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            vals.dedup();
            if vals.len() > max_finite {
                out.push(Support::Continuous);
            } else {
                out.push(Support::finite(vals).map_err(|_| {
                    Error::DegenerateDesign(format!("covariate {j} is constant"))
                })?);
            }
        }
        Ok(Self(out))
    }

    /// Enumerates the product support in lexicographic order.
    pub fn cells(&self) -> Result<Vec<Vec<f64>>> {
        let mut out: Vec<Vec<f64>> = vec![Vec::new()];
        for s in &self.0 {
            let Support::Finite(vals) = s else {
                return Err(Error::InvalidParameter("cannot enumerate a continuous support".into()));
            };
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    vals.iter().map(move |&v| {
                        let mut c = prefix.clone();
                        c.push(v);
                        c
                    })
                })
                .collect();
        }
        Ok(out)
    }
}

/// Draws `S_i ~ Bernoulli(P(S=1|x_i))`. Observation `i` uses its own stream
/// derived from `(seed, i)`, so the result does not depend on evaluation order.
pub fn simulate(theta: &Theta, covariates: &Covariates, seed: u64) -> Result<Dataset> {
    if covariates.p() != theta.p() {
        return Err(Error::DimensionMismatch { expected: theta.p(), got: covariates.p() });
    }
    let outcomes = (0..covariates.n())
        .map(|i| {
            let p = theta.prob_unchecked(covariates.row(i));
            let u: f64 = rng::stream(seed, i as u64).random();
            u < p
        })
        .collect();
    Dataset::new(covariates.clone(), outcomes)
}

/// Affine coordinate change `z_j = (x_j - shift_j) / scale_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineMap {
    pub shift: Vec<f64>,
    pub scale: Vec<f64>,
}

impl AffineMap {
    pub fn identity(p: usize) -> Self {
        Self { shift: vec![0.0; p], scale: vec![1.0; p] }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.shift.iter().zip(&self.scale))
            .map(|(v, (s, c))| (v - s) / c)
            .collect()
    }

    /// Coefficients in `z` coordinates giving the same linear predictor.
    pub fn to_rescaled(&self, reg: &RegressionParams) -> RegressionParams {
        let intercept = reg.intercept + reg.coefs.iter().zip(&self.shift).map(|(b, s)| b * s).sum::<f64>();
        let coefs = reg.coefs.iter().zip(&self.scale).map(|(b, c)| b * c).collect();
        RegressionParams { intercept, coefs }
    }

    /// Inverse of [`AffineMap::to_rescaled`].
    pub fn to_original(&self, reg: &RegressionParams) -> RegressionParams {
        let coefs: Vec<f64> = reg.coefs.iter().zip(&self.scale).map(|(b, c)| b / c).collect();
        let intercept = reg.intercept - coefs.iter().zip(&self.shift).map(|(b, s)| b * s).sum::<f64>();
        RegressionParams { intercept, coefs }
    }

    pub fn rescale_support(&self, support: &SupportSpec) -> SupportSpec {
        SupportSpec(
            support
                .iter()
                .enumerate()
                .map(|(j, s)| match s {
                    Support::Finite(v) => {
                        Support::Finite(v.iter().map(|x| (x - self.shift[j]) / self.scale[j]).collect())
                    }
                    Support::Continuous => Support::Continuous,
                })
                .collect(),
        )
    }
}

/// Maps each finite-support covariate so that its two smallest support values
/// become 0 and 1. Continuous covariates are left unchanged.
pub fn design_map(support: &SupportSpec) -> Result<AffineMap> {
    let mut map = AffineMap::identity(support.p());
    for (j, s) in support.iter().enumerate() {
        if let Support::Finite(v) = s {
            if v.len() < 2 {
                return Err(Error::DegenerateDesign(format!("covariate {j} has a single support value")));
            }
            map.shift[j] = v[0];
            map.scale[j] = v[1] - v[0];
        }
    }
    Ok(map)
}

/// Rescales the design; see [`design_map`].
pub fn rescale_design(x: &Covariates, support: &SupportSpec) -> Result<(Covariates, AffineMap)> {
    if support.p() != x.p() {
        return Err(Error::DimensionMismatch { expected: x.p(), got: support.p() });
    }
    let map = design_map(support)?;
    let values = x.rows().flat_map(|r| map.apply(r)).collect();
    Ok((Covariates::from_flat(x.n(), x.p(), values)?, map))
}
