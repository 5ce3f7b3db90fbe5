//! Maximum-likelihood estimation over the constrained parameter space.
//!
//! For fixed `(α₁, α₂)` the regression coefficients are fitted by a damped
//! Newton method. The joint maximum is located by profiling over an
//! `(α₁, α₂)` grid and then, optionally, polishing the misclassification
//! rates with BFGS on the profile log-likelihood inside the grid's box.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::AlphaGrid;
use crate::likelihood::{self, InfoKind, Partition};
use crate::linalg;
use crate::model::{expit, logit, Dataset, MisclassParams, RegressionParams, Theta, DEFAULT_DELTA};

/// Coefficients beyond this magnitude (in standardized units) count as divergence.
pub const DIVERGENCE_BOUND: f64 = 50.0;

/// Grid entries closer than this in log-likelihood are ties.
const TIE_TOL: f64 = 1e-10;
/// Largest Newton step component accepted at convergence.
const STEP_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepOrder {
    /// Warm-start along rows of constant `α₁`.
    RowMajor,
    /// Warm-start along columns of constant `α₂`.
    ColumnMajor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub grid: AlphaGrid,
    pub delta: f64,
    pub max_newton_iter: usize,
    /// Convergence threshold on the Euclidean norm of the mean score.
    pub grad_tol: f64,
    pub polish: bool,
    pub max_polish_iter: usize,
    pub sweep: SweepOrder,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            grid: AlphaGrid::default(),
            delta: DEFAULT_DELTA,
            max_newton_iter: 100,
            grad_tol: 1e-8,
            polish: true,
            max_polish_iter: 100,
            sweep: SweepOrder::RowMajor,
        }
    }
}

impl FitOptions {
    pub fn with_grid(grid: AlphaGrid) -> Self {
        Self { grid, ..Self::default() }
    }
}

/// Regression fit at fixed misclassification rates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BetaFit {
    pub beta: RegressionParams,
    pub loglik: f64,
    pub converged: bool,
    pub diverged: bool,
    pub n_iter: usize,
    /// Norm of the mean score over the free slots.
    pub grad_norm: f64,
    /// Log-likelihood after each accepted step, starting with the initial value.
    pub trace: Vec<f64>,
}

/// Column means and standard deviations for the divergence guard.
#[derive(Debug, Clone)]
struct Scaling {
    mean: Vec<f64>,
    sd: Vec<f64>,
}

impl Scaling {
    fn of(data: &Dataset) -> Self {
        let n = data.n() as f64;
        let p = data.p();
        let mut mean = vec![0.0; p];
        let mut sd = vec![0.0; p];
        for j in 0..p {
            let m = data.covariates().column(j).sum::<f64>() / n;
            let v = data.covariates().column(j).map(|x| (x - m) * (x - m)).sum::<f64>() / n;
            mean[j] = m;
            sd[j] = if v > 0.0 { v.sqrt() } else { 1.0 };
        }
        Self { mean, sd }
    }

    fn magnitude(&self, beta: &RegressionParams) -> f64 {
        let centered = beta.intercept + beta.coefs.iter().zip(&self.mean).map(|(b, m)| b * m).sum::<f64>();
        beta.coefs.iter().zip(&self.sd).fold(centered.abs(), |acc, (b, s)| acc.max((b * s).abs()))
    }
}

fn newton_fit(
    alpha: &MisclassParams,
    data: &Dataset,
    init: &RegressionParams,
    free: &[usize],
    scaling: &Scaling,
    max_iter: usize,
    grad_tol: f64,
) -> BetaFit {
    let n = data.n() as f64;
    let mut theta = Theta { misclass: *alpha, reg: init.clone() };
    let mut ll = likelihood::loglik(&theta, data).value;
    if !ll.is_finite() {
        theta.reg = mean_matching_start(alpha, data, init, free);
        ll = likelihood::loglik(&theta, data).value;
    }
    let mut trace = vec![ll];
    let mut converged = false;
    let mut diverged = false;
    let mut n_iter = 0;
    let mut grad_norm = f64::INFINITY;

    for iter in 0..=max_iter {
        let full = likelihood::slot_gradient(&theta, data);
        let g = DVector::from_iterator(free.len(), free.iter().map(|&k| full[k]));
        grad_norm = g.norm() / n;
        let Some(step) = ascent_direction(&theta, data, free, &g) else {
            converged = grad_norm <= grad_tol;
            break;
        };
        // A small gradient alone is not enough: on separated data it decays
        // exponentially while the Newton step stays of order one.
        if grad_norm <= grad_tol && step.amax() <= STEP_TOL {
            converged = true;
            let mut cand = theta.reg.clone();
            for (i, &k) in free.iter().enumerate() {
                cand.set_slot(k, cand.slot(k) + step[i]);
            }
            let cand = Theta { misclass: *alpha, reg: cand };
            let cll = likelihood::loglik(&cand, data).value;
            if cll.is_finite() && cll >= ll - 1e-12 * (1.0 + ll.abs()) {
                let cg = likelihood::slot_gradient(&cand, data);
                let cnorm = free.iter().map(|&k| cg[k] * cg[k]).sum::<f64>().sqrt() / n;
                if cnorm <= grad_norm {
                    theta = cand;
                    ll = cll;
                    grad_norm = cnorm;
                }
            }
            break;
        }
        if iter == max_iter {
            break;
        }
        n_iter = iter + 1;
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let mut cand = theta.reg.clone();
            for (i, &k) in free.iter().enumerate() {
                cand.set_slot(k, cand.slot(k) + t * step[i]);
            }
            let cand = Theta { misclass: *alpha, reg: cand };
            let cll = likelihood::loglik(&cand, data).value;
            if cll.is_finite() && cll >= ll {
                accepted = Some((cand, cll));
                break;
            }
            // Near the optimum the change in ℓ drops below its rounding error;
            // a full step that shrinks the gradient is taken anyway.
            if t == 1.0 && cll.is_finite() && cll >= ll - 1e-12 * (1.0 + ll.abs()) {
                let cg = likelihood::slot_gradient(&cand, data);
                let cnorm = free.iter().map(|&k| cg[k] * cg[k]).sum::<f64>().sqrt() / n;
                if cnorm < grad_norm {
                    accepted = Some((cand, cll.max(ll)));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((cand, cll)) = accepted else { break };
        theta = cand;
        ll = cll;
        trace.push(ll);
        if scaling.magnitude(&theta.reg) > DIVERGENCE_BOUND {
            diverged = true;
            break;
        }
    }
    BetaFit { beta: theta.reg, loglik: ll, converged, diverged, n_iter, grad_norm, trace }
}

/// Newton direction from the observed information, falling back to the
/// expected information (and then a ridge) when the former is not positive
/// definite.
fn ascent_direction(theta: &Theta, data: &Dataset, free: &[usize], g: &DVector<f64>) -> Option<DVector<f64>> {
    for kind in [InfoKind::Observed, InfoKind::Expected] {
        let full = likelihood::slot_information(&theta.misclass, &theta.reg, data, kind);
        let h = linalg::select(&full, free, free);
        if let Some(ch) = h.clone().cholesky() {
            let s = ch.solve(g);
            if s.iter().all(|v| v.is_finite()) && s.dot(g) > 0.0 {
                return Some(s);
            }
        }
        if kind == InfoKind::Expected {
            let scale = h.diagonal().iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
            let ridge = h + DMatrix::identity(free.len(), free.len()) * (1e-8 * scale);
            if let Some(ch) = ridge.cholesky() {
                let s = ch.solve(g);
                if s.iter().all(|v| v.is_finite()) {
                    return Some(s);
                }
            }
        }
    }
    None
}

/// Intercept chosen so that the fitted mean matches `s̄`, other free slots zero.
fn mean_matching_start(alpha: &MisclassParams, data: &Dataset, base: &RegressionParams, free: &[usize]) -> RegressionParams {
    let ab = alpha.to_ab();
    let target = ((data.mean_outcome() - ab.a) / ab.b).clamp(0.02, 0.98);
    let mut beta = base.clone();
    for &k in free {
        beta.set_slot(k, 0.0);
    }
    beta.intercept = logit(target).unwrap_or(0.0);
    beta
}

fn check_p(data: &Dataset, beta: &RegressionParams) -> Result<()> {
    if data.p() != beta.p() {
        return Err(Error::DimensionMismatch { expected: data.p(), got: beta.p() });
    }
    Ok(())
}

/// Maximizes the log-likelihood over `β` with `α` held fixed.
pub fn fit_beta_given_alpha(alpha: &MisclassParams, data: &Dataset, init: &RegressionParams, opts: &FitOptions) -> Result<BetaFit> {
    check_p(data, init)?;
    let free: Vec<usize> = (0..=data.p()).collect();
    Ok(newton_fit(alpha, data, init, &free, &Scaling::of(data), opts.max_newton_iter, opts.grad_tol))
}

/// Fits the reduced model `η = 0` at fixed `α`, maximizing over `γ` only.
pub fn fit_null(data: &Dataset, partition: &Partition, alpha: &MisclassParams, opts: &FitOptions) -> Result<BetaFit> {
    let init = null_start(alpha, data, partition);
    fit_null_from(data, partition, alpha, &init, opts)
}

pub fn fit_null_from(
    data: &Dataset,
    partition: &Partition,
    alpha: &MisclassParams,
    init: &RegressionParams,
    opts: &FitOptions,
) -> Result<BetaFit> {
    check_p(data, init)?;
    if partition.p() != data.p() {
        return Err(Error::DimensionMismatch { expected: data.p(), got: partition.p() });
    }
    let mut init = init.clone();
    for &k in partition.eta_slots() {
        init.set_slot(k, 0.0);
    }
    Ok(newton_fit(alpha, data, &init, partition.gamma_slots(), &Scaling::of(data), opts.max_newton_iter, opts.grad_tol))
}

pub(crate) fn null_start(alpha: &MisclassParams, data: &Dataset, partition: &Partition) -> RegressionParams {
    mean_matching_start(alpha, data, &RegressionParams::zeros(data.p()), partition.gamma_slots())
}

/// Notes attached to a fit.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FitWarning {
    /// Fewer observations than parameters.
    LowDegreesOfFreedom { n: usize, params: usize },
    /// Fewer distinct covariate patterns than parameters: the model cannot be identified.
    FewDistinctCells { cells: usize, params: usize },
    /// The profile log-likelihood is constant over the grid.
    FlatProfile { spread: f64 },
    /// The information at the optimum is close to singular.
    NearSingularInformation { condition: f64 },
    /// Grid points whose fit diverged or produced no usable value.
    DivergedGridPoints { count: usize },
    /// The grid optimum was not improved by polishing.
    PolishRejected,
}

/// One grid point of the profile log-likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfilePoint {
    pub alpha1: f64,
    pub alpha2: f64,
    /// `None` when the fit at this point diverged.
    pub loglik: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub theta_hat: Theta,
    pub loglik_at_max: f64,
    pub converged: bool,
    pub n_iter: usize,
    pub grad_norm: f64,
    /// Observed information over `(α₁, α₂, β₀, β)` at the optimum.
    pub information: DMatrix<f64>,
    pub profile_surface: Vec<ProfilePoint>,
    pub warnings: Vec<FitWarning>,
    /// Whether the reported optimum came from polishing rather than the grid.
    pub polished: bool,
}

/// Unrestricted maximum-likelihood estimate.
pub fn fit_mle(data: &Dataset, opts: &FitOptions) -> Result<FitResult> {
    fit_profile(data, &[], opts)
}

/// Maximum-likelihood estimate with the given regression slots fixed at zero.
pub fn fit_profile(data: &Dataset, zero_slots: &[usize], opts: &FitOptions) -> Result<FitResult> {
    let p = data.p();
    if zero_slots.iter().any(|&k| k == 0 || k > p) {
        return Err(Error::InvalidParameter("zero slots must name covariates".into()));
    }
    let m = data.mean_outcome();
    if m == 0.0 || m == 1.0 {
        return Err(Error::InvalidData("the outcome is constant; the likelihood has no maximizer".into()));
    }
    let free: Vec<usize> = (0..=p).filter(|k| !zero_slots.contains(k)).collect();
    let scaling = Scaling::of(data);
    let n_params = free.len() + 2;
    let mut warnings = Vec::new();
    if data.n() < n_params {
        warnings.push(FitWarning::LowDegreesOfFreedom { n: data.n(), params: n_params });
    }
    let cells = distinct_rows(data);
    if cells < n_params {
        warnings.push(FitWarning::FewDistinctCells { cells, params: n_params });
    }

    // Starting point: ordinary logistic regression, i.e. α = (1, 1).
    let perfect = MisclassParams::new(1.0, 1.0)?;
    let start = mean_matching_start(&perfect, data, &RegressionParams::zeros(p), &free);
    let ordinary = newton_fit(&perfect, data, &start, &free, &scaling, opts.max_newton_iter, opts.grad_tol);
    let base = if ordinary.diverged { start } else { ordinary.beta };

    let grid = &opts.grid;
    let lines: Vec<Vec<usize>> = match opts.sweep {
        SweepOrder::RowMajor => grid.rows().into_iter().map(|r| r.collect()).collect(),
        SweepOrder::ColumnMajor => grid.columns(),
    };
    let mut fits: Vec<Option<BetaFit>> = vec![None; grid.len()];
    let swept: Vec<Vec<(usize, BetaFit)>> = lines
        .par_iter()
        .map(|line| {
            let mut prev: Option<RegressionParams> = None;
            let mut out = Vec::with_capacity(line.len());
            for &idx in line {
                let alpha = &grid.points()[idx];
                let init = match &prev {
                    Some(b) => b.clone(),
                    None => rescaled_start(alpha, data, &base, &free),
                };
                let fit = newton_fit(alpha, data, &init, &free, &scaling, opts.max_newton_iter, opts.grad_tol);
                prev = if fit.diverged { None } else { Some(fit.beta.clone()) };
                out.push((idx, fit));
            }
            out
        })
        .collect();
    for (idx, fit) in swept.into_iter().flatten() {
        fits[idx] = Some(fit);
    }

    let usable = |f: &BetaFit| !f.diverged && f.loglik.is_finite();
    let profile_surface: Vec<ProfilePoint> = grid
        .points()
        .iter()
        .zip(&fits)
        .map(|(m, f)| ProfilePoint {
            alpha1: m.alpha1(),
            alpha2: m.alpha2(),
            loglik: f.as_ref().filter(|f| usable(f)).map(|f| f.loglik),
        })
        .collect();
    let n_bad = profile_surface.iter().filter(|pt| pt.loglik.is_none()).count();
    if n_bad > 0 {
        warnings.push(FitWarning::DivergedGridPoints { count: n_bad });
    }
    let best_idx = best_grid_index(grid, &profile_surface).ok_or_else(|| {
        Error::EstimationFailed("every grid point diverged; the data may be separated or constant".into())
    })?;
    let values: Vec<f64> = profile_surface.iter().filter_map(|pt| pt.loglik).collect();
    let spread = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - values.iter().cloned().fold(f64::INFINITY, f64::min);
    let flat = grid.len() > 1 && values.len() > 1 && spread <= 1e-6;
    if flat {
        warnings.push(FitWarning::FlatProfile { spread });
    }

    let mut best_alpha = grid.points()[best_idx];
    let mut best = fits[best_idx].clone().expect("best index has a fit");
    let mut polished = false;
    // A flat profile has no isolated optimum to refine.
    if opts.polish && grid.len() > 1 && !flat {
        if let Some((alpha, fit)) = polish(data, &free, &scaling, grid, &best_alpha, &best.beta, opts) {
            if fit.loglik > best.loglik && !fit.diverged {
                best_alpha = alpha;
                best = fit;
                polished = true;
            } else {
                warnings.push(FitWarning::PolishRejected);
            }
        }
    }

    let theta_hat = Theta { misclass: best_alpha, reg: best.beta.clone() };
    let full_info = likelihood::theta_information(&theta_hat, data);
    // Information restricted to free parameters (α plus free slots).
    let idx: Vec<usize> = [0, 1].into_iter().chain(free.iter().map(|k| k + 2)).collect();
    let information = linalg::select(&full_info, &idx, &idx);
    let condition = linalg::sym_condition(&information);
    if condition > 1e10 {
        warnings.push(FitWarning::NearSingularInformation { condition });
    }
    Ok(FitResult {
        theta_hat,
        loglik_at_max: best.loglik,
        converged: best.converged,
        n_iter: best.n_iter,
        grad_norm: best.grad_norm,
        information,
        profile_surface,
        warnings,
        polished,
    })
}

/// Best usable grid point; near-ties go to the larger `α₁ + α₂`, then the
/// lower index.
fn best_grid_index(grid: &AlphaGrid, surface: &[ProfilePoint]) -> Option<usize> {
    let max = surface.iter().filter_map(|p| p.loglik).fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return None;
    }
    let mut best: Option<usize> = None;
    for (i, pt) in surface.iter().enumerate() {
        let Some(ll) = pt.loglik else { continue };
        if ll < max - TIE_TOL {
            continue;
        }
        let sum = grid.points()[i].alpha1() + grid.points()[i].alpha2();
        match best {
            None => best = Some(i),
            Some(b) => {
                let bsum = grid.points()[b].alpha1() + grid.points()[b].alpha2();
                if sum > bsum + 1e-12 {
                    best = Some(i);
                }
            }
        }
    }
    best
}

/// Start for a fresh grid line: ordinary-logistic slopes, intercept matched
/// to the outcome mean under `alpha`.
fn rescaled_start(alpha: &MisclassParams, data: &Dataset, base: &RegressionParams, free: &[usize]) -> RegressionParams {
    let ab = alpha.to_ab();
    let mut beta = base.clone();
    let target = ((data.mean_outcome() - ab.a) / ab.b).clamp(0.02, 0.98);
    let mean_lp = (0..data.n()).map(|i| base.linear_predictor(data.x(i))).sum::<f64>() / data.n() as f64;
    if free.contains(&0) {
        beta.intercept += logit(target).unwrap_or(0.0) - mean_lp;
    }
    beta
}

fn distinct_rows(data: &Dataset) -> usize {
    let mut rows: Vec<&[f64]> = data.covariates().rows().collect();
    rows.sort_by(|a, b| a.partial_cmp(b).unwrap());
    rows.dedup();
    rows.len()
}

/// Smooth bijection from `R²` onto the grid's bounding box intersected with
/// `α₁ + α₂ ≥ 1 + δ`.
struct AlphaBox {
    lo1: f64,
    hi1: f64,
    lo2: f64,
    hi2: f64,
    delta: f64,
}

impl AlphaBox {
    fn lower2(&self, a1: f64) -> (f64, f64) {
        let floor = 1.0 + self.delta - a1;
        if floor > self.lo2 {
            (floor, -1.0)
        } else {
            (self.lo2, 0.0)
        }
    }

    /// Rates and the Jacobian `d(α₁, α₂)/d(u₁, u₂)`.
    fn map(&self, u: &[f64; 2]) -> ([f64; 2], [[f64; 2]; 2]) {
        let s1 = expit(u[0]);
        let s2 = expit(u[1]);
        let a1 = self.lo1 + (self.hi1 - self.lo1) * s1;
        let da1 = (self.hi1 - self.lo1) * s1 * (1.0 - s1);
        let (l2, dl2) = self.lower2(a1);
        let width = (self.hi2 - l2).max(0.0);
        let a2 = l2 + width * s2;
        let da2_du2 = width * s2 * (1.0 - s2);
        let da2_du1 = dl2 * (1.0 - s2) * da1;
        ([a1, a2.min(1.0)], [[da1, 0.0], [da2_du1, da2_du2]])
    }

    fn inverse(&self, a: &MisclassParams) -> [f64; 2] {
        let frac = |v: f64, lo: f64, hi: f64| if hi > lo { ((v - lo) / (hi - lo)).clamp(1e-6, 1.0 - 1e-6) } else { 0.5 };
        let u1 = logit(frac(a.alpha1(), self.lo1, self.hi1)).unwrap_or(0.0);
        let a1 = self.map(&[u1, 0.0]).0[0];
        let (l2, _) = self.lower2(a1);
        let u2 = logit(frac(a.alpha2(), l2, self.hi2)).unwrap_or(0.0);
        [u1, u2]
    }
}

/// BFGS on the profile log-likelihood over the grid's box. The gradient in
/// `α` at `β̂(α)` is the envelope-theorem gradient of the profile.
fn polish(
    data: &Dataset,
    free: &[usize],
    scaling: &Scaling,
    grid: &AlphaGrid,
    start_alpha: &MisclassParams,
    start_beta: &RegressionParams,
    opts: &FitOptions,
) -> Option<(MisclassParams, BetaFit)> {
    let ((lo1, hi1), (lo2, hi2)) = grid.bounds();
    let bx = AlphaBox { lo1, hi1, lo2, hi2, delta: opts.delta.max(grid.delta()) };
    let n = data.n() as f64;

    let eval = |u: &[f64; 2], warm: &RegressionParams| -> Option<(f64, [f64; 2], MisclassParams, BetaFit)> {
        let (a, jac) = bx.map(u);
        let alpha = MisclassParams::with_delta(a[0], a[1], bx.delta).ok()?;
        let fit = newton_fit(&alpha, data, warm, free, scaling, opts.max_newton_iter, opts.grad_tol);
        if fit.diverged || !fit.loglik.is_finite() {
            return None;
        }
        let g = likelihood::theta_gradient(&Theta { misclass: alpha, reg: fit.beta.clone() }, data);
        let grad_u = [
            -(g[0] * jac[0][0] + g[1] * jac[1][0]) / n,
            -(g[0] * jac[0][1] + g[1] * jac[1][1]) / n,
        ];
        Some((-fit.loglik / n, grad_u, alpha, fit))
    };

    let mut u = bx.inverse(start_alpha);
    let (mut val, mut grad, mut alpha, mut fit) = eval(&u, start_beta)?;
    let mut hinv = [[1.0, 0.0], [0.0, 1.0]];
    for _ in 0..opts.max_polish_iter {
        let gnorm = (grad[0] * grad[0] + grad[1] * grad[1]).sqrt();
        if gnorm < opts.grad_tol {
            break;
        }
        let mut dir = [
            -(hinv[0][0] * grad[0] + hinv[0][1] * grad[1]),
            -(hinv[1][0] * grad[0] + hinv[1][1] * grad[1]),
        ];
        let mut slope = dir[0] * grad[0] + dir[1] * grad[1];
        if slope >= 0.0 {
            hinv = [[1.0, 0.0], [0.0, 1.0]];
            dir = [-grad[0], -grad[1]];
            slope = -gnorm * gnorm;
        }
        let mut t = 1.0;
        let mut next = None;
        for _ in 0..40 {
            let cand = [u[0] + t * dir[0], u[1] + t * dir[1]];
            if let Some(res) = eval(&cand, &fit.beta) {
                if res.0 <= val + 1e-4 * t * slope {
                    next = Some((cand, res));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((cand, (nval, ngrad, nalpha, nfit))) = next else { break };
        let s = [cand[0] - u[0], cand[1] - u[1]];
        let y = [ngrad[0] - grad[0], ngrad[1] - grad[1]];
        let sy = s[0] * y[0] + s[1] * y[1];
        let improvement = val - nval;
        u = cand;
        val = nval;
        grad = ngrad;
        alpha = nalpha;
        fit = nfit;
        if sy > 1e-16 {
            let hy = [hinv[0][0] * y[0] + hinv[0][1] * y[1], hinv[1][0] * y[0] + hinv[1][1] * y[1]];
            let yhy = y[0] * hy[0] + y[1] * hy[1];
            let rho = 1.0 / sy;
            for i in 0..2 {
                for j in 0..2 {
                    hinv[i][j] += (1.0 + rho * yhy) * rho * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
                }
            }
        }
        if improvement.abs() < 1e-15 {
            break;
        }
    }
    Some((alpha, fit))
}
