//! Global identifiability of the surrogate model.
//!
//! [`check_identifiability`] decides identifiability exactly from the
//! per-covariate support sizes and the zero pattern of `β`. The remaining
//! functions produce concrete evidence: observationally equivalent parameter
//! values for non-identifiable designs, a randomized search for alternatives,
//! and the closed-form recovery of `(a, b)` on the three-binary-covariate
//! design.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{
    design_map, expit, logit, ABParams, MisclassParams, RegressionParams, Support, SupportSpec, Theta, DEFAULT_DELTA,
};
use crate::rng;

/// Coefficients with magnitude at or below this are treated as zero.
pub const ZERO_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Condition {
    /// Some covariate with a nonzero coefficient takes at least four values.
    T1C1,
    /// Two nonzero coefficients, one of whose covariates takes at least three values.
    T1C2,
    /// Three nonzero coefficients.
    T1C3,
    NotIdentifiable,
}

/// Why a design fails every condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    AllBetaZero,
    SingleNonzeroShortSupport,
    TwoNonzeroBinarySupports,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    /// Covariates involved (the satisfying ones, or the nonzero ones when
    /// nothing is satisfied).
    pub covariates: Vec<usize>,
    /// Support size per listed covariate; `None` means continuous.
    pub support_sizes: Vec<Option<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<Scenario>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentifiabilityVerdict {
    pub identifiable: bool,
    pub fired_condition: Condition,
    pub witness: Witness,
}

/// Decides identifiability for estimated or numeric coefficients, treating
/// `|β_j| ≤ 1e-12` as zero.
pub fn check_identifiability(support: &SupportSpec, beta: &RegressionParams) -> Result<IdentifiabilityVerdict> {
    let nonzero: Vec<bool> = beta.coefs.iter().map(|b| b.abs() > ZERO_TOL).collect();
    check_pattern(support, &nonzero)
}

/// Decides identifiability for a declared nonzero pattern. Conditions are
/// tried in the order C1, C2, C3.
pub fn check_pattern(support: &SupportSpec, nonzero: &[bool]) -> Result<IdentifiabilityVerdict> {
    if support.p() != nonzero.len() {
        return Err(Error::DimensionMismatch { expected: support.p(), got: nonzero.len() });
    }
    let nz: Vec<usize> = (0..nonzero.len()).filter(|&j| nonzero[j]).collect();
    let sizes = |idx: &[usize]| idx.iter().map(|&j| support.get(j).n_values()).collect::<Vec<_>>();
    let verdict = |cond: Condition, covariates: Vec<usize>, scenario: Option<Scenario>| IdentifiabilityVerdict {
        identifiable: cond != Condition::NotIdentifiable,
        fired_condition: cond,
        witness: Witness { support_sizes: sizes(&covariates), covariates, scenario },
    };

    if let Some(&k) = nz.iter().find(|&&k| support.get(k).has_at_least(4)) {
        return Ok(verdict(Condition::T1C1, vec![k], None));
    }
    for (i, &j) in nz.iter().enumerate() {
        for &k in &nz[i + 1..] {
            if support.get(j).has_at_least(3) || support.get(k).has_at_least(3) {
                return Ok(verdict(Condition::T1C2, vec![j, k], None));
            }
        }
    }
    if nz.len() >= 3 {
        return Ok(verdict(Condition::T1C3, nz[..3].to_vec(), None));
    }
    let scenario = match nz.len() {
        0 => Scenario::AllBetaZero,
        1 => Scenario::SingleNonzeroShortSupport,
        _ => Scenario::TwoNonzeroBinarySupports,
    };
    Ok(verdict(Condition::NotIdentifiable, nz, Some(scenario)))
}

/// A point on the family of parameters reproducing three cells on the
/// support `{0, 1, d}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EquivalenceCurvePoint {
    pub a: f64,
    pub b: f64,
    pub beta0: f64,
    pub beta1: f64,
    /// `a ≥ 0` and `a + b ≤ 1`, i.e. the point maps into Θ.
    pub feasible: bool,
}

impl EquivalenceCurvePoint {
    /// The one-covariate parameter in `{0, 1, d}` coordinates.
    pub fn to_theta(&self) -> Result<Theta> {
        Theta::new((self.a + self.b).min(1.0), 1.0 - self.a, self.beta0, vec![self.beta1])
    }

    fn cells(&self, d: f64) -> [f64; 3] {
        [0.0, 1.0, d].map(|x| self.a + self.b * expit(self.beta0 + x * self.beta1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkippedPoint {
    pub a: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveTrace {
    pub points: Vec<EquivalenceCurvePoint>,
    pub skipped: Vec<SkippedPoint>,
    /// Some point needed the bisection bracket widened beyond `b = 1`.
    pub bracket_expanded: bool,
}

/// Traces the family of `(a, b, β₀, β₁)` that reproduce the cells
/// `c = (c₁, c₂, c₃)` on the support `{0, 1, d}` for `n_points` evenly spaced
/// values of `a` in `a_range`. For each `a`, `β₀` and `β₁` are eliminated
/// through the first two cells and the third is solved for `b` by bisection.
pub fn trace_equivalence_curve(cells: [f64; 3], d: f64, a_range: (f64, f64), n_points: usize) -> CurveTrace {
    let mut trace = CurveTrace { points: Vec::new(), skipped: Vec::new(), bracket_expanded: false };
    let cmin = cells.iter().cloned().fold(f64::INFINITY, f64::min);
    let (lo, hi) = a_range;
    let valid = d > 1.0
        && cells.iter().all(|c| *c > 0.0 && *c < 1.0)
        && lo.is_finite()
        && hi.is_finite()
        && lo <= hi
        && hi < cmin
        && n_points > 0;
    if !valid {
        return trace;
    }
    for k in 0..n_points {
        let a = if n_points == 1 { lo } else { lo + (hi - lo) * k as f64 / (n_points - 1) as f64 };
        match curve_point(cells, d, a) {
            Ok((pt, expanded)) => {
                trace.bracket_expanded |= expanded;
                trace.points.push(pt);
            }
            Err(reason) => trace.skipped.push(SkippedPoint { a, reason }),
        }
    }
    trace
}

/// Largest `b` the bisection bracket is widened to.
const MAX_CURVE_B: f64 = 64.0;

fn curve_point(cells: [f64; 3], d: f64, a: f64) -> std::result::Result<(EquivalenceCurvePoint, bool), String> {
    let [c1, c2, c3] = cells;
    let cmax = c1.max(c2).max(c3);
    let eliminated = |b: f64| -> Option<(f64, f64)> {
        let beta0 = logit((c1 - a) / b).ok()?;
        let beta1 = logit((c2 - a) / b).ok()? - beta0;
        Some((beta0, beta1))
    };
    let residual = |b: f64| -> Option<f64> {
        let (beta0, beta1) = eliminated(b)?;
        Some(a + b * expit(beta0 + d * beta1) - c3)
    };
    let b_lo = cmax - a + 1e-12;
    let f_lo = residual(b_lo).ok_or("lower bracket not evaluable")?;
    let mut expanded = false;
    let mut b_hi = 1.0;
    let mut f_hi = residual(b_hi).ok_or("upper bracket not evaluable")?;
    while f_lo.signum() == f_hi.signum() {
        if b_hi >= MAX_CURVE_B {
            return Err("no sign change in the b bracket".into());
        }
        b_hi *= 2.0;
        f_hi = residual(b_hi).ok_or("expanded bracket not evaluable")?;
        expanded = true;
    }
    let (mut lo, mut hi, mut flo) = (b_lo, b_hi, f_lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = residual(mid).ok_or("bisection left the domain")?;
        if fm == 0.0 {
            lo = mid;
            hi = mid;
            break;
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    let b = 0.5 * (lo + hi);
    let (beta0, beta1) = eliminated(b).ok_or("root outside the domain")?;
    let pt = EquivalenceCurvePoint { a, b, beta0, beta1, feasible: a >= 0.0 && b > 0.0 && a + b <= 1.0 };
    let got = pt.cells(d);
    let err = got.iter().zip(&cells).map(|(g, c)| (g - c).abs()).fold(0.0, f64::max);
    if err > 1e-10 {
        return Err(format!("cell residual {err:.2e} above 1e-10"));
    }
    Ok((pt, expanded))
}

/// The `β = 0` family: `(a, b - ε, logit(b/(b-ε) · expit(β₀)))` gives the same
/// surrogate probability at every `x`.
pub fn construct_beta_zero_family(theta: &Theta, eps: f64) -> Result<Theta> {
    if theta.reg.coefs.iter().any(|c| *c != 0.0) {
        return Err(Error::InvalidParameter("the beta-zero family needs every covariate coefficient zero".into()));
    }
    let ab = theta.misclass.to_ab();
    if !(eps > 0.0 && eps < ab.b) {
        return Err(Error::InvalidParameter(format!("eps = {eps} must lie in (0, b = {})", ab.b)));
    }
    let b_new = ab.b - eps;
    let ratio = ab.b / b_new * expit(theta.reg.intercept);
    if ratio >= 1.0 {
        return Err(Error::InvalidParameter(format!("b/(b-eps)·expit(beta0) = {ratio} must stay below 1")));
    }
    Ok(Theta {
        misclass: ABParams { a: ab.a, b: b_new }.to_misclass()?,
        reg: RegressionParams::new(logit(ratio)?, theta.reg.coefs.clone())?,
    })
}

/// Outcome of [`search_alternative`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlternativeSearch {
    /// A parameter at sup-distance above 1e-3 from the target that matches
    /// every cell to within 1e-8.
    pub alternative: Option<Theta>,
    /// Max cell residual of `alternative`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
    pub n_starts: usize,
    /// Starts that matched every cell to within 1e-8.
    pub n_matched: usize,
    /// Largest distance from the target among matching starts.
    pub max_matched_distance: f64,
}

/// Cell-matching tolerance for a numeric alternative.
pub const MATCH_TOL: f64 = 1e-8;
/// Minimum sup-distance for an alternative to count as distinct.
pub const DISTINCT_TOL: f64 = 1e-3;
const MAX_CELLS: usize = 20_000;

/// Multi-start Levenberg–Marquardt search for another point of Θ
/// reproducing every cell probability of `theta` on a finite product support.
/// Each start draws its own random stream from `(seed, start)`.
pub fn search_alternative(theta: &Theta, support: &SupportSpec, n_starts: usize, seed: u64) -> Result<AlternativeSearch> {
    if support.p() != theta.p() {
        return Err(Error::DimensionMismatch { expected: theta.p(), got: support.p() });
    }
    if !support.is_finite() {
        return Err(Error::InvalidParameter("numeric search needs finite supports".into()));
    }
    match support.n_cells() {
        Some(n) if n <= MAX_CELLS => {}
        _ => return Err(Error::InvalidParameter(format!("product support exceeds {MAX_CELLS} cells"))),
    }
    let map = design_map(support)?;
    let cells_x = support.cells()?;
    let cells_z: Vec<Vec<f64>> = cells_x.iter().map(|x| map.apply(x)).collect();
    let target: Vec<f64> = cells_x.iter().map(|x| theta.prob_unchecked(x)).collect();
    let p = theta.p();

    let results: Vec<(usize, Theta, f64)> = (0..n_starts)
        .into_par_iter()
        .filter_map(|s| {
            let mut rng = rng::stream(seed, s as u64);
            let (a1, a2) = loop {
                let a1: f64 = rng.random_range(0.5..1.0);
                let a2: f64 = rng.random_range(0.5..1.0);
                if a1 + a2 > 1.0 + 1e-3 {
                    break (a1, a2);
                }
            };
            let ab = MisclassParams::new_unchecked(a1, a2).to_ab();
            let mut u = vec![0.0; p + 3];
            u[0] = logit(((ab.b - DEFAULT_DELTA) / (1.0 - DEFAULT_DELTA)).clamp(1e-9, 1.0 - 1e-9)).ok()?;
            u[1] = logit((ab.a / (1.0 - ab.b)).clamp(1e-9, 1.0 - 1e-9)).ok()?;
            for v in &mut u[2..] {
                *v = rng.random_range(-5.0..5.0);
            }
            let (u, _) = levenberg_marquardt(&cells_z, &target, u);
            let (ab, reg_z) = decode(&u);
            let misclass = ab.to_misclass().ok()?;
            let reg = map.to_original(&reg_z);
            let cand = Theta { misclass, reg };
            let res = cells_x
                .iter()
                .zip(&target)
                .map(|(x, c)| (cand.prob_unchecked(x) - c).abs())
                .fold(0.0, f64::max);
            Some((s, cand, res))
        })
        .collect();

    let matched: Vec<&(usize, Theta, f64)> = results.iter().filter(|r| r.2 < MATCH_TOL).collect();
    let max_matched_distance = matched.iter().map(|r| r.1.distance(theta)).fold(0.0, f64::max);
    let best = matched
        .iter()
        .filter(|r| r.1.distance(theta) > DISTINCT_TOL)
        .min_by(|x, y| x.2.partial_cmp(&y.2).unwrap().then(x.0.cmp(&y.0)));
    Ok(AlternativeSearch {
        alternative: best.map(|r| r.1.clone()),
        residual: best.map(|r| r.2),
        n_starts,
        n_matched: matched.len(),
        max_matched_distance,
    })
}

/// Unconstrained coordinates `(u_b, u_a, β₀, β)` to `(a, b)` and `β`, with
/// `b = δ + (1-δ)σ(u_b)` and `a = (1-b)σ(u_a)` so that the point lies in Θ.
fn decode(u: &[f64]) -> (ABParams, RegressionParams) {
    let b = DEFAULT_DELTA + (1.0 - DEFAULT_DELTA) * expit(u[0]);
    let a = (1.0 - b) * expit(u[1]);
    (ABParams { a, b }, RegressionParams { intercept: u[2], coefs: u[3..].to_vec() })
}

fn residuals_and_jacobian(cells: &[Vec<f64>], target: &[f64], u: &[f64], want_jac: bool) -> (Vec<f64>, Vec<Vec<f64>>) {
    let (ab, reg) = decode(u);
    let sb = expit(u[0]);
    let sa = expit(u[1]);
    let db_dub = (1.0 - DEFAULT_DELTA) * sb * (1.0 - sb);
    let da_dua = (1.0 - ab.b) * sa * (1.0 - sa);
    let da_dub = -sa * db_dub;
    let mut r = Vec::with_capacity(cells.len());
    let mut jac = Vec::new();
    for (x, c) in cells.iter().zip(target) {
        let f = expit(reg.linear_predictor(x));
        r.push(ab.a + ab.b * f - c);
        if want_jac {
            let mut row = Vec::with_capacity(u.len());
            row.push(da_dub + f * db_dub);
            row.push(da_dua);
            let g = ab.b * f * (1.0 - f);
            row.push(g);
            row.extend(x.iter().map(|v| g * v));
            jac.push(row);
        }
    }
    (r, jac)
}

fn levenberg_marquardt(cells: &[Vec<f64>], target: &[f64], mut u: Vec<f64>) -> (Vec<f64>, f64) {
    use nalgebra::{DMatrix, DVector};
    let k = u.len();
    let mut mu = 1e-3;
    let (mut r, mut jac) = residuals_and_jacobian(cells, target, &u, true);
    let mut cost: f64 = r.iter().map(|v| v * v).sum();
    for _ in 0..400 {
        if r.iter().all(|v| v.abs() < 1e-15) {
            break;
        }
        let mut jtj = DMatrix::<f64>::zeros(k, k);
        let mut jtr = DVector::<f64>::zeros(k);
        for (row, ri) in jac.iter().zip(&r) {
            for i in 0..k {
                jtr[i] += row[i] * ri;
                for j in i..k {
                    jtj[(i, j)] += row[i] * row[j];
                }
            }
        }
        for i in 0..k {
            for j in 0..i {
                jtj[(i, j)] = jtj[(j, i)];
            }
        }
        let mut improved = false;
        while mu < 1e16 {
            let mut m = jtj.clone();
            for i in 0..k {
                m[(i, i)] += mu * (jtj[(i, i)] + 1e-12);
            }
            let Some(ch) = m.cholesky() else {
                mu *= 4.0;
                continue;
            };
            let step = ch.solve(&(-&jtr));
            let cand: Vec<f64> = u.iter().zip(step.iter()).map(|(a, s)| a + s).collect();
            let (cr, _) = residuals_and_jacobian(cells, target, &cand, false);
            let ccost: f64 = cr.iter().map(|v| v * v).sum();
            if ccost.is_finite() && ccost < cost {
                u = cand;
                cost = ccost;
                mu = (mu / 3.0).max(1e-15);
                improved = true;
                break;
            }
            mu *= 4.0;
        }
        if !improved {
            break;
        }
        let next = residuals_and_jacobian(cells, target, &u, true);
        r = next.0;
        jac = next.1;
    }
    (u, cost)
}

/// How an equivalent parameter was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WitnessMethod {
    BetaZeroFamily,
    EquivalenceCurve,
    NumericSearch,
}

/// A concrete parameter observationally equivalent to the target.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalentPoint {
    pub theta: Theta,
    pub method: WitnessMethod,
    /// Max absolute cell difference over the support.
    pub residual: f64,
    pub distance: f64,
}

/// Maximum `|P(S=1|x; θ₁) - P(S=1|x; θ₂)|` over a finite support; continuous
/// covariates are probed at `-2, -1, …, 2`.
pub fn max_cell_residual(t1: &Theta, t2: &Theta, support: &SupportSpec) -> Result<f64> {
    let probe = SupportSpec(
        support
            .iter()
            .map(|s| match s {
                Support::Finite(v) => Support::Finite(v.clone()),
                Support::Continuous => Support::Finite(vec![-2.0, -1.0, 0.0, 1.0, 2.0]),
            })
            .collect(),
    );
    Ok(probe
        .cells()?
        .iter()
        .map(|x| (t1.prob_unchecked(x) - t2.prob_unchecked(x)).abs())
        .fold(0.0, f64::max))
}

/// Produces an observationally equivalent `θ' ≠ θ` for a non-identifiable
/// design, preferring the explicit constructions and falling back to the
/// numeric search. Returns `None` when nothing was found.
pub fn find_equivalent(theta: &Theta, support: &SupportSpec, n_starts: usize, seed: u64) -> Result<Option<EquivalentPoint>> {
    let verdict = check_identifiability(support, &theta.reg)?;
    let finish = |cand: Theta, method: WitnessMethod| -> Result<Option<EquivalentPoint>> {
        let residual = max_cell_residual(theta, &cand, support)?;
        let distance = cand.distance(theta);
        Ok((residual < MATCH_TOL && distance > DISTINCT_TOL).then_some(EquivalentPoint { theta: cand, method, residual, distance }))
    };
    match verdict.witness.scenario {
        Some(Scenario::AllBetaZero) => {
            let mut zeroed = theta.clone();
            zeroed.reg.coefs.iter_mut().for_each(|c| *c = 0.0);
            let ab = theta.misclass.to_ab();
            let f = expit(theta.reg.intercept);
            let eps = 0.5 * (0.5 * ab.b).min(ab.b * (1.0 - f));
            if let Ok(cand) = construct_beta_zero_family(&zeroed, eps) {
                let mut cand = cand;
                cand.reg.coefs = theta.reg.coefs.clone();
                if let Some(pt) = finish(cand, WitnessMethod::BetaZeroFamily)? {
                    return Ok(Some(pt));
                }
            }
        }
        Some(Scenario::SingleNonzeroShortSupport) => {
            let k = verdict.witness.covariates[0];
            if let Support::Finite(v) = support.get(k) {
                if v.len() == 3 {
                    if let Some(cand) = curve_alternative(theta, k, v) {
                        if let Some(pt) = finish(cand, WitnessMethod::EquivalenceCurve)? {
                            return Ok(Some(pt));
                        }
                    }
                }
            }
        }
        _ => {}
    }
    if !support.is_finite() {
        return Ok(None);
    }
    let search = search_alternative(theta, support, n_starts, seed)?;
    match search.alternative {
        Some(cand) => finish(cand, WitnessMethod::NumericSearch),
        None => Ok(None),
    }
}

/// Moves along the equivalence curve of the only nonzero covariate `k`,
/// whose support is the three values `v`.
fn curve_alternative(theta: &Theta, k: usize, v: &[f64]) -> Option<Theta> {
    let ab = theta.misclass.to_ab();
    let scale = v[1] - v[0];
    let d = (v[2] - v[0]) / scale;
    let slope = theta.reg.coefs[k] * scale;
    let intercept = theta.reg.intercept + theta.reg.coefs[k] * v[0];
    let cells = [0.0, 1.0, d].map(|z| ab.a + ab.b * expit(intercept + slope * z));
    let cmin = cells.iter().cloned().fold(f64::INFINITY, f64::min);
    let candidates = [0.5, 0.25, 0.75, 0.1, 0.9]
        .iter()
        .map(|f| ab.a + f * (cmin - ab.a))
        .chain([0.5, 0.25, 0.1].iter().map(|f| ab.a * (1.0 - f)));
    for a in candidates {
        let Ok((pt, _)) = curve_point(cells, d, a) else { continue };
        if !pt.feasible || pt.b < DEFAULT_DELTA {
            continue;
        }
        let misclass = ABParams { a: pt.a, b: pt.b }.to_misclass().ok()?;
        let mut coefs = vec![0.0; theta.p()];
        coefs[k] = pt.beta1 / scale;
        let reg = RegressionParams { intercept: pt.beta0 - coefs[k] * v[0], coefs };
        return Some(Theta { misclass, reg });
    }
    None
}

/// Design points of the three-binary-covariate recovery: `x = 0`, the three
/// unit vectors, `e₁ + e₂` and `e₁ + e₃`.
pub const C3_DESIGN: [[f64; 3]; 6] = [
    [0.0, 0.0, 0.0],
    [1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, 0.0, 1.0],
    [1.0, 1.0, 0.0],
    [1.0, 0.0, 1.0],
];

/// Cell probabilities for the three-binary recovery: the six core cells plus
/// one cell per additional covariate at its unit vector.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct C3Cells {
    pub core: [f64; 6],
    pub extra: Vec<f64>,
}

/// Forward-generates [`C3Cells`] from `theta` (`p ≥ 3`, binary `{0,1}` coordinates).
pub fn c3_cells(theta: &Theta) -> Result<C3Cells> {
    let p = theta.p();
    if p < 3 {
        return Err(Error::DimensionMismatch { expected: 3, got: p });
    }
    let core = C3_DESIGN.map(|pt| {
        let mut x = vec![0.0; p];
        x[..3].copy_from_slice(&pt);
        theta.prob_unchecked(&x)
    });
    let extra = (3..p)
        .map(|j| {
            let mut x = vec![0.0; p];
            x[j] = 1.0;
            theta.prob_unchecked(&x)
        })
        .collect();
    Ok(C3Cells { core, extra })
}

/// Both roots of the `(a, b)` system on the six core cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AbRoots {
    pub quad_a: f64,
    pub quad_b: f64,
    pub quad_c: f64,
    /// `(a, b)` with `b > 0`.
    pub valid: (f64, f64),
    /// The label-switched root, `b ≤ 0`.
    pub rejected: (f64, f64),
}

/// Eliminating `b` from the two polynomial equations leaves
/// `A a² + B a + C = 0` whose roots are `a` and `a + b`; the smaller root is
/// `a` and their gap is `b`.
pub fn ab_roots(c: &[f64; 6]) -> Result<AbRoots> {
    let [c0, c1, c2, c3, c4, c5] = *c;
    if c.iter().any(|v| !(*v > 0.0 && *v < 1.0)) {
        return Err(Error::InconsistentCells(format!("cell probabilities must lie in (0, 1): {c:?}")));
    }
    let qa = c0 * c4 - c0 * c5 - c1 * c2 + c1 * c3 + c2 * c5 - c3 * c4;
    let qb = c0 * c1 * c2 - c0 * c1 * c3 - c0 * c1 * c4 + c0 * c1 * c5 - c0 * c2 * c4 + c0 * c3 * c5 + c1 * c2 * c4
        - c1 * c3 * c5
        + c2 * c3 * c4
        - c2 * c3 * c5
        - c2 * c4 * c5
        + c3 * c4 * c5;
    let qc = -c0 * c1 * c2 * c5 + c0 * c1 * c3 * c4 + c0 * c2 * c4 * c5 - c0 * c3 * c4 * c5 - c1 * c2 * c3 * c4
        + c1 * c2 * c3 * c5;
    if qa.abs() < 1e-12 {
        return Err(Error::DegenerateDesign(format!("leading coefficient A = {qa:.3e} vanishes")));
    }
    let disc = qb * qb - 4.0 * qa * qc;
    if disc < -1e-12 {
        return Err(Error::InconsistentCells(format!("negative discriminant {disc:.3e}")));
    }
    let sq = disc.max(0.0).sqrt();
    let q = -0.5 * (qb + qb.signum() * sq);
    let (r1, r2) = if q == 0.0 { (-qb / (2.0 * qa), -qb / (2.0 * qa)) } else { (q / qa, qc / q) };
    let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
    Ok(AbRoots { quad_a: qa, quad_b: qb, quad_c: qc, valid: (lo, hi - lo), rejected: (hi, lo - hi) })
}

/// Closed-form `(a, b)` from the six core cells.
pub fn recover_ab_from_cells(c: &[f64; 6]) -> Result<ABParams> {
    let roots = ab_roots(c)?;
    let (a, b) = roots.valid;
    ABParams::new(a.max(0.0), b)
        .map_err(|_| Error::InconsistentCells(format!("recovered (a, b) = ({a}, {b}) lies outside the parameter space")))
}

/// Back-solves the full parameter from [`C3Cells`]:
/// `β₀ = logit((c₀ - a)/b)` and `β_j = logit((c_j - a)/b) - β₀`.
pub fn recover_full_theta_c3(cells: &C3Cells) -> Result<Theta> {
    let ab = recover_ab_from_cells(&cells.core)?;
    let lg = |c: f64| -> Result<f64> {
        let r = (c - ab.a) / ab.b;
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::InconsistentCells(format!("(c - a)/b = {r} outside (0, 1)")));
        }
        logit(r)
    };
    let beta0 = lg(cells.core[0])?;
    let mut coefs = Vec::with_capacity(3 + cells.extra.len());
    for &c in cells.core[1..4].iter().chain(&cells.extra) {
        coefs.push(lg(c)? - beta0);
    }
    // The two interaction cells must agree with the additive predictor.
    for (idx, (i, j)) in [(4usize, (0usize, 1usize)), (5, (0, 2))] {
        let pred = ab.a + ab.b * expit(beta0 + coefs[i] + coefs[j]);
        if (pred - cells.core[idx]).abs() > 1e-6 {
            return Err(Error::InconsistentCells(format!("cell {idx} disagrees with the recovered coefficients")));
        }
    }
    Ok(Theta { misclass: ab.to_misclass()?, reg: RegressionParams::new(beta0, coefs)? })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn finite(v: &[f64]) -> Support {
        Support::finite(v.to_vec()).unwrap()
    }

    #[test]
    fn checker_examples() {
        let s = SupportSpec::new(vec![finite(&[0.0, 1.0, 2.0, 5.0])]).unwrap();
        let v = check_identifiability(&s, &RegressionParams::new(0.0, vec![1.2]).unwrap()).unwrap();
        assert_eq!(v.fired_condition, Condition::T1C1);
        assert!(v.identifiable);

        let s = SupportSpec::new(vec![finite(&[0.0, 1.0]); 3]).unwrap();
        let v = check_pattern(&s, &[true, true, true]).unwrap();
        assert_eq!(v.fired_condition, Condition::T1C3);

        let s = SupportSpec::new(vec![finite(&[0.0, 1.0, 2.0])]).unwrap();
        let v = check_pattern(&s, &[true]).unwrap();
        assert!(!v.identifiable);
        assert_eq!(v.witness.scenario, Some(Scenario::SingleNonzeroShortSupport));

        let s = SupportSpec::new(vec![finite(&[0.0, 1.0]), finite(&[0.0, 1.0, 3.0])]).unwrap();
        let v = check_pattern(&s, &[true, true]).unwrap();
        assert_eq!(v.fired_condition, Condition::T1C2);
        assert_eq!(v.witness.covariates, vec![0, 1]);
    }

    #[test]
    fn checker_scenarios_and_continuous() {
        let s = SupportSpec::new(vec![Support::Continuous, finite(&[0.0, 1.0])]).unwrap();
        assert_eq!(check_pattern(&s, &[true, false]).unwrap().fired_condition, Condition::T1C1);
        let v = check_pattern(&s, &[false, false]).unwrap();
        assert_eq!(v.witness.scenario, Some(Scenario::AllBetaZero));
        let s = SupportSpec::new(vec![finite(&[0.0, 1.0]), finite(&[2.0, 5.0]), finite(&[0.0, 1.0, 2.0, 3.0])]).unwrap();
        let v = check_pattern(&s, &[true, true, false]).unwrap();
        assert_eq!(v.witness.scenario, Some(Scenario::TwoNonzeroBinarySupports));
        // Numeric zeros below 1e-12 do not count.
        let v = check_identifiability(&s, &RegressionParams::new(0.0, vec![1.0, 1.0, 1e-13]).unwrap()).unwrap();
        assert!(!v.identifiable);
        assert!(check_pattern(&s, &[true]).is_err());
    }

    #[test]
    fn beta_zero_family_hand_example() {
        let t = Theta::new(0.9, 0.9, 0.0, vec![0.0]).unwrap();
        let alt = construct_beta_zero_family(&t, 0.1).unwrap();
        let ab = alt.misclass.to_ab();
        assert!((ab.a - 0.1).abs() < 1e-15);
        assert!((ab.b - 0.7).abs() < 1e-12);
        assert!((alt.reg.intercept - logit(4.0 / 7.0).unwrap()).abs() < 1e-12);
        assert!((alt.surrogate_prob(&[3.0]).unwrap() - 0.5).abs() < 1e-12);
        assert!((t.surrogate_prob(&[3.0]).unwrap() - 0.5).abs() < 1e-12);

        let near = construct_beta_zero_family(&t, 1e-8).unwrap();
        assert!(near.distance(&t) < 1e-6);
        assert!(construct_beta_zero_family(&t, 0.9).is_err());
        assert!(construct_beta_zero_family(&Theta::new(0.9, 0.9, 0.0, vec![1.0]).unwrap(), 0.1).is_err());
    }

    #[test]
    fn curve_returns_generating_point() {
        let (a0, b0, beta0, beta1, d) = (0.1, 0.8, -0.4, 1.3, 2.0);
        let cells = [0.0, 1.0, d].map(|x| a0 + b0 * expit(beta0 + beta1 * x));
        let trace = trace_equivalence_curve(cells, d, (a0, a0), 1);
        let pt = trace.points[0];
        assert!((pt.b - b0).abs() < 1e-8);
        assert!((pt.beta0 - beta0).abs() < 1e-8);
        assert!((pt.beta1 - beta1).abs() < 1e-8);
        assert!(trace_equivalence_curve(cells, d, (0.5, 0.9), 5).points.is_empty());
        assert!(trace_equivalence_curve(cells, 0.5, (0.1, 0.2), 5).points.is_empty());
    }

    #[test]
    fn recover_ab_hand_example() {
        let t = Theta::new(0.85, 0.85, -0.3, vec![0.8, -0.5, 1.1]).unwrap();
        let cells = c3_cells(&t).unwrap();
        let ab = recover_ab_from_cells(&cells.core).unwrap();
        assert!((ab.a - 0.15).abs() < 1e-10);
        assert!((ab.b - 0.7).abs() < 1e-10);
        let full = recover_full_theta_c3(&cells).unwrap();
        assert!(full.distance(&t) < 1e-9);
    }

    #[test]
    fn label_switched_cells_recover_the_valid_twin() {
        let t = Theta::new(0.9, 0.8, 0.2, vec![1.0, -0.7, 0.9]).unwrap();
        let twin = t.label_switched();
        let cells = c3_cells(&twin).unwrap();
        let rec = recover_full_theta_c3(&cells).unwrap();
        assert!(rec.distance(&t) < 1e-9);
    }

    #[test]
    fn malformed_cells_are_rejected() {
        assert!(matches!(recover_ab_from_cells(&[0.5; 6]), Err(Error::DegenerateDesign(_))));
        assert!(matches!(recover_ab_from_cells(&[0.8, 0.55, 0.63, 0.22, 0.94, 0.82]), Err(Error::InconsistentCells(_))));
        assert!(recover_ab_from_cells(&[0.2, 1.2, 0.3, 0.8, 0.25, 0.1]).is_err());
    }
}
