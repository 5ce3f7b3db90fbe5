//! Tests of `H₀: η = 0` for a subset `η` of the regression coefficients.
//!
//! Under the null the misclassification rates may be unidentified. The score
//! statistic is then computed at every `α` of a grid and maximized; its null
//! distribution is either chi-square (when every coefficient is tested) or
//! approximated by a multiplier bootstrap on efficient-score contributions.
//! When the reduced model is identifiable the likelihood ratio is used.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::estimation::{self, fit_null, fit_profile, FitOptions, FitResult};
use crate::grid::AlphaGrid;
use crate::identifiability::{check_pattern, IdentifiabilityVerdict, ZERO_TOL};
use crate::likelihood::{self, InfoKind, Partition};
use crate::model::{Dataset, MisclassParams, SupportSpec, Theta};
use crate::rng;

/// Columns with more distinct values than this are treated as continuous
/// when supports are inferred from data.
pub const MAX_FINITE_SUPPORT: usize = 20;
const BOOT_CHUNK: usize = 128;

/// Bootstrap multiplier distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Multipliers {
    Gaussian,
    /// Every multiplier equal to one; reproduces the observed statistic when
    /// centering is off.
    Ones,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StatisticChoice {
    /// Likelihood ratio when the reduced model is identifiable, sup-score otherwise.
    Auto,
    Score,
    Lrt,
}

/// Which statistic a report carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TestKind {
    #[serde(rename = "T1_LRT")]
    Lrt,
    #[serde(rename = "T2_fixed_alpha")]
    FixedAlphaScore,
    #[serde(rename = "T2_sup")]
    SupScore,
}

/// Reference distribution used for the p-value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NullDistribution {
    ChiSq { df: usize },
    BootstrapSup,
}

/// Extent of the `α` grid a report used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSummary {
    pub n_points: usize,
    pub alpha1: [f64; 2],
    pub alpha2: [f64; 2],
}

impl GridSummary {
    pub fn of(grid: &AlphaGrid) -> Self {
        let (a1, a2) = grid.bounds();
        Self { n_points: grid.len(), alpha1: [a1.0, a1.1], alpha2: [a2.0, a2.1] }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestOptions {
    pub fit: FitOptions,
    /// Grid for the score statistic; defaults to the fitting grid.
    pub score_grid: Option<AlphaGrid>,
    pub n_bootstrap: usize,
    pub seed: u64,
    pub multipliers: Multipliers,
    /// Subtract the mean contribution before resampling.
    pub center: bool,
    pub statistic: StatisticChoice,
    /// Covariate supports; inferred from the data when absent.
    pub support: Option<SupportSpec>,
    /// Declared nonzero pattern of the reduced model (length `p`; entries for
    /// tested covariates are ignored). Estimated when absent.
    pub declared_nonzero: Option<Vec<bool>>,
}

impl Default for TestOptions {
    fn default() -> Self {
        Self {
            fit: FitOptions::default(),
            score_grid: None,
            n_bootstrap: 1000,
            seed: 0,
            multipliers: Multipliers::Gaussian,
            center: true,
            statistic: StatisticChoice::Auto,
            support: None,
            declared_nonzero: None,
        }
    }
}

/// Score statistic at one fixed `α`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlphaScore {
    pub alpha1: f64,
    pub alpha2: f64,
    pub statistic: f64,
    /// Null-model slots `(β₀, β)` with the tested entries at zero.
    pub null_slots: Vec<f64>,
    pub null_converged: bool,
}

struct Components {
    score: AlphaScore,
    /// `n × d`: efficient-score contributions premultiplied by `L⁻¹`, where
    /// `L Lᵀ` is the partial information.
    whitened: DMatrix<f64>,
}

fn components(data: &Dataset, partition: &Partition, alpha: &MisclassParams, opts: &FitOptions) -> Result<Components> {
    let fit = fit_null(data, partition, alpha, opts)?;
    if fit.diverged {
        return Err(Error::EstimationFailed(format!(
            "null fit diverged at alpha = ({}, {})",
            alpha.alpha1(),
            alpha.alpha2()
        )));
    }
    let theta = Theta { misclass: *alpha, reg: fit.beta.clone() };
    let blocks = likelihood::info_blocks_of(alpha, &fit.beta, data, partition, InfoKind::Expected)?;
    let proj = blocks.projection()?;
    let partial = likelihood::partial_info(&blocks)?;
    let chol = partial.clone().cholesky().ok_or(Error::Singular { condition: f64::INFINITY })?;
    let l = chol.l();

    let d = partition.d();
    let u = likelihood::predictor_scores(&theta, data);
    let slot_value = |i: usize, k: usize| if k == 0 { 1.0 } else { data.x(i)[k - 1] };
    let mut eff = DMatrix::<f64>::zeros(d, data.n());
    let mut u_eta = DVector::<f64>::zeros(d);
    let gamma = partition.gamma_slots();
    for i in 0..data.n() {
        let ug = DVector::from_iterator(gamma.len(), gamma.iter().map(|&k| u[i] * slot_value(i, k)));
        let adj = proj.transpose() * ug;
        for (r, &k) in partition.eta_slots().iter().enumerate() {
            let ue = u[i] * slot_value(i, k);
            u_eta[r] += ue;
            eff[(r, i)] = ue - adj[r];
        }
    }
    let w = l.solve_lower_triangular(&u_eta).ok_or(Error::Singular { condition: f64::INFINITY })?;
    let whitened = l.solve_lower_triangular(&eff).ok_or(Error::Singular { condition: f64::INFINITY })?;
    Ok(Components {
        score: AlphaScore {
            alpha1: alpha.alpha1(),
            alpha2: alpha.alpha2(),
            statistic: w.norm_squared(),
            null_slots: fit.beta.slots(),
            null_converged: fit.converged,
        },
        whitened: whitened.transpose(),
    })
}

/// Score statistic `Uᵀ I⁻¹ U` for `η` at fixed `α`, evaluated at the null
/// fit with expected partial information.
pub fn score_test_fixed_alpha(data: &Dataset, partition: &Partition, alpha: &MisclassParams, opts: &FitOptions) -> Result<AlphaScore> {
    check_inputs(data, partition)?;
    Ok(components(data, partition, alpha, opts)?.score)
}

/// Supremum of the score statistic over a grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupScore {
    pub statistic: f64,
    pub argmax: [f64; 2],
    pub per_alpha: Vec<AlphaScore>,
    /// Grid points dropped because the null fit or information failed.
    pub n_skipped: usize,
    #[serde(skip)]
    whitened: Vec<DMatrix<f64>>,
}

pub fn sup_score_test(data: &Dataset, partition: &Partition, grid: &AlphaGrid, opts: &FitOptions) -> Result<SupScore> {
    check_inputs(data, partition)?;
    let results: Vec<Result<Components>> =
        grid.points().par_iter().map(|alpha| components(data, partition, alpha, opts)).collect();
    let n_skipped = results.iter().filter(|r| r.is_err()).count();
    let mut per_alpha = Vec::with_capacity(results.len());
    let mut whitened = Vec::with_capacity(results.len());
    for c in results.into_iter().flatten() {
        per_alpha.push(c.score);
        whitened.push(c.whitened);
    }
    if per_alpha.is_empty() {
        return Err(Error::EstimationFailed("score statistic failed at every grid point".into()));
    }
    let best = per_alpha
        .iter()
        .enumerate()
        .fold(0, |b, (i, s)| if s.statistic > per_alpha[b].statistic { i } else { b });
    Ok(SupScore {
        statistic: per_alpha[best].statistic,
        argmax: [per_alpha[best].alpha1, per_alpha[best].alpha2],
        per_alpha,
        n_skipped,
        whitened,
    })
}

/// Multiplier-bootstrap draws of the sup-score statistic under the null.
/// Draw `b` uses its own random stream `(seed, b)`.
pub fn multiplier_bootstrap_null(sup: &SupScore, n_bootstrap: usize, seed: u64, multipliers: Multipliers, center: bool) -> Vec<f64> {
    let n = sup.whitened.first().map_or(0, |m| m.nrows());
    let d = sup.whitened.first().map_or(0, |m| m.ncols());
    let g = sup.whitened.len();
    let mut stacked = DMatrix::<f64>::zeros(n, g * d);
    for (k, w) in sup.whitened.iter().enumerate() {
        for c in 0..d {
            let mut col = w.column(c).into_owned();
            if center && n > 0 {
                let mean = col.mean();
                col.add_scalar_mut(-mean);
            }
            stacked.set_column(k * d + c, &col);
        }
    }
    let chunks: Vec<usize> = (0..n_bootstrap).step_by(BOOT_CHUNK).collect();
    chunks
        .par_iter()
        .flat_map_iter(|&start| {
            let rows = BOOT_CHUNK.min(n_bootstrap - start);
            let mut e = DMatrix::<f64>::zeros(rows, n);
            for r in 0..rows {
                let mut rng = rng::stream(seed, (start + r) as u64);
                for i in 0..n {
                    e[(r, i)] = match multipliers {
                        Multipliers::Gaussian => rng.sample(StandardNormal),
                        Multipliers::Ones => 1.0,
                    };
                }
            }
            let draws = &e * &stacked;
            (0..rows)
                .map(|r| {
                    (0..g)
                        .map(|k| (0..d).map(|c| draws[(r, k * d + c)].powi(2)).sum::<f64>())
                        .fold(f64::NEG_INFINITY, f64::max)
                })
                .collect::<Vec<_>>()
        })
        .collect()
}

/// `(1 + #{draws ≥ observed}) / (1 + B)`.
pub fn bootstrap_p_value(observed: f64, draws: &[f64]) -> f64 {
    let exceed = draws.iter().filter(|&&t| t >= observed).count();
    (1 + exceed) as f64 / (1 + draws.len()) as f64
}

/// Upper tail of the chi-square distribution.
pub fn chi_square_sf(x: f64, df: usize) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    ChiSquared::new(df as f64).map(|c| c.sf(x)).unwrap_or(f64::NAN)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LrtResult {
    pub statistic: f64,
    pub full: FitResult,
    pub restricted: FitResult,
}

/// Likelihood ratio `2(ℓ̂ - ℓ̃)`. The unrestricted value is the larger of the
/// two maxima so the statistic is never negative.
pub fn lrt(data: &Dataset, partition: &Partition, opts: &FitOptions) -> Result<LrtResult> {
    check_inputs(data, partition)?;
    let restricted = fit_profile(data, partition.eta_slots(), opts)?;
    lrt_with_restricted(data, restricted, opts)
}

fn lrt_with_restricted(data: &Dataset, restricted: FitResult, opts: &FitOptions) -> Result<LrtResult> {
    let full = estimation::fit_mle(data, opts)?;
    let top = full.loglik_at_max.max(restricted.loglik_at_max);
    let mut statistic = 2.0 * (top - restricted.loglik_at_max);
    if statistic < 0.0 && statistic > -1e-8 {
        statistic = 0.0;
    }
    Ok(LrtResult { statistic, full, restricted })
}

/// Outcome of [`run_test`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestReport {
    pub statistic: f64,
    pub kind: TestKind,
    pub null_dist: NullDistribution,
    pub p_value: f64,
    pub df: usize,
    pub tested_covariates: Vec<usize>,
    pub alpha_grid_used: GridSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub argmax_alpha: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boot_draws: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub reduced_identifiable: bool,
    pub reduced_verdict: IdentifiabilityVerdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skipped_grid_points: Option<usize>,
    /// Unrestricted and restricted maxima for the likelihood ratio.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub logliks: Option<[f64; 2]>,
    pub notes: Vec<String>,
}

fn check_inputs(data: &Dataset, partition: &Partition) -> Result<()> {
    if partition.p() != data.p() {
        return Err(Error::DimensionMismatch { expected: data.p(), got: partition.p() });
    }
    let m = data.mean_outcome();
    if m == 0.0 || m == 1.0 {
        return Err(Error::InvalidData("the outcome is constant; no test is possible".into()));
    }
    Ok(())
}

/// Tests `η = 0`, choosing the statistic and its calibration from the
/// identifiability of the reduced model.
pub fn run_test(data: &Dataset, partition: &Partition, opts: &TestOptions) -> Result<TestReport> {
    check_inputs(data, partition)?;
    let p = data.p();
    let d = partition.d();
    let support = match &opts.support {
        Some(s) if s.p() != p => return Err(Error::DimensionMismatch { expected: p, got: s.p() }),
        Some(s) => s.clone(),
        None => SupportSpec::infer(data.covariates(), MAX_FINITE_SUPPORT)?,
    };
    let tested = partition.eta_covariates();
    let reduced_pattern = |nonzero: &dyn Fn(usize) -> bool| -> Vec<bool> {
        (0..p).map(|j| !tested.contains(&j) && nonzero(j)).collect()
    };

    // If even an all-nonzero reduced model is unidentifiable, no fit is needed.
    let mut restricted: Option<FitResult> = None;
    let verdict = match &opts.declared_nonzero {
        Some(v) if v.len() != p => return Err(Error::DimensionMismatch { expected: p, got: v.len() }),
        Some(v) => check_pattern(&support, &reduced_pattern(&|j| v[j]))?,
        None => {
            let optimistic = check_pattern(&support, &reduced_pattern(&|_| true))?;
            if !optimistic.identifiable {
                optimistic
            } else {
                let fit = fit_profile(data, partition.eta_slots(), &opts.fit)?;
                let coefs = fit.theta_hat.reg.coefs.clone();
                let v = check_pattern(&support, &reduced_pattern(&|j| coefs[j].abs() > ZERO_TOL))?;
                restricted = Some(fit);
                v
            }
        }
    };

    let use_lrt = match opts.statistic {
        StatisticChoice::Auto => verdict.identifiable,
        StatisticChoice::Lrt => true,
        StatisticChoice::Score => false,
    };
    let grid = opts.score_grid.as_ref().unwrap_or(&opts.fit.grid);
    let mut report = TestReport {
        statistic: f64::NAN,
        kind: TestKind::SupScore,
        null_dist: NullDistribution::ChiSq { df: d },
        p_value: f64::NAN,
        df: d,
        tested_covariates: tested.clone(),
        alpha_grid_used: GridSummary::of(if use_lrt { &opts.fit.grid } else { grid }),
        argmax_alpha: None,
        boot_draws: None,
        seed: None,
        diagnostics: Diagnostics {
            reduced_identifiable: verdict.identifiable,
            reduced_verdict: verdict,
            skipped_grid_points: None,
            logliks: None,
            notes: Vec::new(),
        },
    };
    if report.alpha_grid_used.n_points > 200 {
        report.diagnostics.notes.push(format!(
            "the alpha grid has {} points; a tighter range raises power",
            report.alpha_grid_used.n_points
        ));
    }

    if use_lrt {
        let restricted = match restricted {
            Some(r) => r,
            None => fit_profile(data, partition.eta_slots(), &opts.fit)?,
        };
        let res = lrt_with_restricted(data, restricted, &opts.fit)?;
        report.kind = TestKind::Lrt;
        report.statistic = res.statistic;
        report.p_value = chi_square_sf(res.statistic, d);
        report.diagnostics.logliks = Some([res.full.loglik_at_max, res.restricted.loglik_at_max]);
        if res.full.loglik_at_max < res.restricted.loglik_at_max {
            report.diagnostics.notes.push("restricted maximum exceeded the unrestricted fit; the latter was replaced".into());
        }
        return Ok(report);
    }

    let sup = sup_score_test(data, partition, grid, &opts.fit)?;
    report.statistic = sup.statistic;
    report.argmax_alpha = Some(sup.argmax);
    report.diagnostics.skipped_grid_points = Some(sup.n_skipped);
    if grid.len() == 1 {
        report.kind = TestKind::FixedAlphaScore;
    }
    if d == p {
        report.p_value = chi_square_sf(sup.statistic, d);
    } else {
        if opts.n_bootstrap == 0 {
            return Err(Error::InvalidParameter("bootstrap calibration needs at least one draw".into()));
        }
        if opts.n_bootstrap < 100 {
            report.diagnostics.notes.push(format!("B = {} is small; bootstrap quantiles are unstable", opts.n_bootstrap));
        }
        let draws = multiplier_bootstrap_null(&sup, opts.n_bootstrap, opts.seed, opts.multipliers, opts.center);
        report.null_dist = NullDistribution::BootstrapSup;
        report.p_value = bootstrap_p_value(sup.statistic, &draws);
        report.boot_draws = Some(draws);
        report.seed = Some(opts.seed);
    }
    Ok(report)
}
