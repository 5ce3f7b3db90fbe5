//! Subcommand implementations. Each returns the bytes to emit.

use mislogit::estimation::{FitWarning, ProfilePoint};
use mislogit::identifiability::{
    check_pattern, find_equivalent, search_alternative, Condition, IdentifiabilityVerdict, Scenario, WitnessMethod,
    ZERO_TOL,
};
use mislogit::inference::{GridSummary, Multipliers, NullDistribution, StatisticChoice, TestKind};
use mislogit::model::simulate as draw_outcomes;
use mislogit::{
    fit_mle, run_test, AlphaGrid, Covariates, Dataset, FitOptions, Partition, Support, SupportSpec, TestOptions, TestReport,
    Theta,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::io::{self, Table, ThetaSpec};
use crate::{Common, FitArgs, IdentifyArgs, Output, PowerArgs, SimulateArgs, StatisticArg, TestArgs};

/// Generator for work item `index` under `seed`.
fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn json<T: Serialize>(value: &T, common: &Common) -> CliResult<Output> {
    let mut body = serde_json::to_vec_pretty(value).map_err(|e| CliError::Numerical(e.to_string()))?;
    body.push(b'\n');
    Ok(Output { body, path: common.output.clone() })
}

fn grid_of(common: &Common) -> CliResult<AlphaGrid> {
    match &common.alpha_grid {
        Some(s) => io::parse_grid(s),
        None => Ok(AlphaGrid::default()),
    }
}

fn require_input(common: &Common, needs_outcome: bool) -> CliResult<Table> {
    let path = common.input.as_ref().ok_or_else(|| CliError::invalid("--input is required"))?;
    io::load_csv(path, &common.outcome, needs_outcome)
}

fn statistic_choice(s: StatisticArg) -> StatisticChoice {
    match s {
        StatisticArg::Auto => StatisticChoice::Auto,
        StatisticArg::Score => StatisticChoice::Score,
        StatisticArg::Lrt => StatisticChoice::Lrt,
    }
}

fn default_names(p: usize) -> Vec<String> {
    (1..=p).map(|j| format!("x{j}")).collect()
}

/// Identifiability verdict with covariates named.
#[derive(Debug, Serialize)]
pub struct VerdictOut {
    pub identifiable: bool,
    pub condition: Condition,
    pub witness: WitnessOut,
}

#[derive(Debug, Serialize)]
pub struct WitnessOut {
    pub covariates: Vec<String>,
    pub support_sizes: Vec<Option<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<Scenario>,
}

impl VerdictOut {
    fn of(v: &IdentifiabilityVerdict, names: &[String]) -> Self {
        Self {
            identifiable: v.identifiable,
            condition: v.fired_condition,
            witness: WitnessOut {
                covariates: v.witness.covariates.iter().map(|&j| names[j].clone()).collect(),
                support_sizes: v.witness.support_sizes.clone(),
                scenario: v.witness.scenario,
            },
        }
    }
}

#[derive(Debug, Serialize)]
pub struct FitReport {
    pub n: usize,
    pub covariates: Vec<String>,
    pub theta_hat: ThetaSpec,
    /// From the inverse observed information; absent when it is singular.
    pub std_errors: Option<ThetaSpec>,
    pub loglik: f64,
    pub converged: bool,
    pub n_iter: usize,
    pub grad_norm: f64,
    pub polished: bool,
    pub alpha_grid: GridSummary,
    pub identifiability: VerdictOut,
    pub warnings: Vec<FitWarning>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub profile_surface: Option<Vec<ProfilePoint>>,
}

fn std_errors(info: &mislogit::estimation::FitResult) -> Option<ThetaSpec> {
    let inv = info.information.clone().try_inverse()?;
    let k = inv.nrows();
    let se: Vec<f64> = (0..k).map(|i| inv[(i, i)]).collect();
    if se.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return None;
    }
    let se: Vec<f64> = se.iter().map(|v| v.sqrt()).collect();
    Some(ThetaSpec { alpha1: se[0], alpha2: se[1], beta0: se[2], beta: se[3..].to_vec() })
}

pub fn fit(args: &FitArgs) -> CliResult<Output> {
    let table = require_input(&args.common, true)?;
    let data = table.dataset(&args.common.outcome)?;
    let support = io::resolve_support(&table.names, Some(&table.covariates), &args.common.support)?;
    let opts = FitOptions { polish: !args.no_polish, ..FitOptions::with_grid(grid_of(&args.common)?) };
    let res = fit_mle(&data, &opts)?;
    let pattern: Vec<bool> = res.theta_hat.reg.coefs.iter().map(|c| c.abs() > ZERO_TOL).collect();
    let verdict = check_pattern(&support, &pattern)?;
    let report = FitReport {
        n: data.n(),
        covariates: table.names.clone(),
        theta_hat: ThetaSpec::of(&res.theta_hat),
        std_errors: std_errors(&res),
        loglik: res.loglik_at_max,
        converged: res.converged,
        n_iter: res.n_iter,
        grad_norm: res.grad_norm,
        polished: res.polished,
        alpha_grid: GridSummary::of(&opts.grid),
        identifiability: VerdictOut::of(&verdict, &table.names),
        warnings: res.warnings.clone(),
        profile_surface: args.profile.then(|| res.profile_surface.clone()),
    };
    json(&report, &args.common)
}

#[derive(Debug, Serialize)]
pub struct TestOut {
    pub n: usize,
    pub covariates: Vec<String>,
    pub eta: Vec<String>,
    #[serde(flatten)]
    pub report: TestReport,
}

fn nonzero_pattern(list: &str, names: &[String]) -> CliResult<Vec<bool>> {
    let cols = io::resolve_columns(list, names)?;
    Ok((0..names.len()).map(|j| cols.contains(&j)).collect())
}

pub fn test(args: &TestArgs) -> CliResult<Output> {
    let table = require_input(&args.common, true)?;
    let data = table.dataset(&args.common.outcome)?;
    let eta = io::resolve_columns(&args.eta, &table.names)?;
    if eta.is_empty() {
        return Err(CliError::invalid("--eta names no column"));
    }
    let partition = Partition::new(data.p(), &eta)?;
    let support = io::resolve_support(&table.names, Some(&table.covariates), &args.common.support)?;
    let opts = TestOptions {
        fit: FitOptions::with_grid(grid_of(&args.common)?),
        n_bootstrap: args.bootstrap,
        seed: args.common.seed,
        statistic: statistic_choice(args.statistic),
        support: Some(support),
        declared_nonzero: args.nonzero.as_deref().map(|s| nonzero_pattern(s, &table.names)).transpose()?,
        ..TestOptions::default()
    };
    let mut report = run_test(&data, &partition, &opts)?;
    if args.no_draws {
        report.boot_draws = None;
    }
    let out = TestOut {
        n: data.n(),
        covariates: table.names.clone(),
        eta: eta.iter().map(|&j| table.names[j].clone()).collect(),
        report,
    };
    json(&out, &args.common)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternSource {
    Declared,
    Theta,
    Estimated,
}

#[derive(Debug, Serialize)]
pub struct SupportOut {
    pub column: String,
    pub support: Support,
}

/// Numeric backing for a verdict.
#[derive(Debug, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Certificate {
    /// A distinct parameter with the same cell probabilities.
    EquivalentPoint {
        found: bool,
        #[serde(skip_serializing_if = "Option::is_none")]
        method: Option<WitnessMethod>,
        #[serde(skip_serializing_if = "Option::is_none")]
        theta: Option<ThetaSpec>,
        #[serde(skip_serializing_if = "Option::is_none")]
        residual: Option<f64>,
        #[serde(skip_serializing_if = "Option::is_none")]
        distance: Option<f64>,
    },
    /// Multi-start search for an alternative; `found` should be false.
    Search {
        found: bool,
        n_starts: usize,
        n_matched: usize,
        max_matched_distance: f64,
        #[serde(skip_serializing_if = "Option::is_none")]
        alternative: Option<ThetaSpec>,
        #[serde(skip_serializing_if = "Option::is_none")]
        residual: Option<f64>,
        /// Supports actually searched, when continuous ones were discretized.
        #[serde(skip_serializing_if = "Option::is_none")]
        probe_support: Option<Vec<SupportOut>>,
    },
}

#[derive(Debug, Serialize)]
pub struct IdentifyOut {
    pub identifiable: bool,
    pub condition: Condition,
    pub witness: WitnessOut,
    pub nonzero: Vec<String>,
    pub pattern_source: PatternSource,
    pub supports: Vec<SupportOut>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<ThetaSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<Certificate>,
}

/// A parameter with the given zero pattern, for verifying a bare pattern.
fn representative_theta(pattern: &[bool], seed: u64) -> CliResult<Theta> {
    let mut rng = stream(seed, 0);
    let coefs = pattern
        .iter()
        .map(|&nz| {
            if !nz {
                return 0.0;
            }
            let m: f64 = rng.random_range(0.5..1.5);
            if rng.random_bool(0.5) { m } else { -m }
        })
        .collect();
    Ok(Theta::new(0.9, 0.85, 0.2, coefs)?)
}

/// Five quantiles of each continuous column (or -2..2 without data).
fn discretize(support: &SupportSpec, x: Option<&Covariates>) -> CliResult<SupportSpec> {
    let mut out = Vec::with_capacity(support.p());
    for (j, s) in support.iter().enumerate() {
        match s {
            Support::Finite(_) => out.push(s.clone()),
            Support::Continuous => {
                let vals = match x {
                    Some(x) => {
                        let mut col: Vec<f64> = x.column(j).collect();
                        col.sort_by(|a, b| a.partial_cmp(b).unwrap());
                        (0..5).map(|k| col[(k * (col.len() - 1)) / 4]).collect()
                    }
                    None => vec![-2.0, -1.0, 0.0, 1.0, 2.0],
                };
                out.push(Support::finite(vals)?);
            }
        }
    }
    Ok(SupportSpec::new(out)?)
}

fn supports_out(s: &SupportSpec, names: &[String]) -> Vec<SupportOut> {
    s.iter().zip(names).map(|(s, n)| SupportOut { column: n.clone(), support: s.clone() }).collect()
}

pub fn identify(args: &IdentifyArgs) -> CliResult<Output> {
    let c = &args.common;
    let table = match &c.input {
        Some(p) => Some(io::load_csv(p, &c.outcome, false)?),
        None => None,
    };
    let names: Vec<String> = match &table {
        Some(t) => t.names.clone(),
        None => c
            .support
            .iter()
            .map(|f| io::parse_support_flag(f).map(|(n, _)| n))
            .collect::<CliResult<_>>()?,
    };
    let support = io::resolve_support(&names, table.as_ref().map(|t| &t.covariates), &c.support)?;
    let p = names.len();

    let given_theta = args.theta.as_deref().map(|s| io::parse_theta(s, Some(p))).transpose()?;
    let (pattern, source, theta) = if let Some(list) = &args.nonzero {
        let pat = nonzero_pattern(list, &names)?;
        (pat, PatternSource::Declared, given_theta)
    } else if let Some(t) = given_theta {
        (t.reg.coefs.iter().map(|b| b.abs() > ZERO_TOL).collect(), PatternSource::Theta, Some(t))
    } else {
        let t = table
            .as_ref()
            .ok_or_else(|| CliError::invalid("pass --nonzero, --theta, or an --input with an outcome column"))?;
        let data = t.dataset(&c.outcome)?;
        let res = fit_mle(&data, &FitOptions::with_grid(grid_of(c)?))?;
        let pat = res.theta_hat.reg.coefs.iter().map(|b| b.abs() > ZERO_TOL).collect();
        (pat, PatternSource::Estimated, Some(res.theta_hat))
    };
    if let Some(t) = &theta {
        let tp: Vec<bool> = t.reg.coefs.iter().map(|b| b.abs() > ZERO_TOL).collect();
        if tp != pattern {
            return Err(CliError::invalid("--nonzero disagrees with the zero pattern of --theta"));
        }
    }
    let verdict = check_pattern(&support, &pattern)?;

    let mut theta = theta;
    let certificate = if args.verify {
        let target = match &theta {
            Some(t) => t.clone(),
            None => representative_theta(&pattern, c.seed)?,
        };
        let cert = certify(&target, &verdict, &support, table.as_ref().map(|t| &t.covariates), &names, args.starts, c.seed)?;
        theta = Some(target);
        Some(cert)
    } else {
        None
    };
    let v = VerdictOut::of(&verdict, &names);
    let out = IdentifyOut {
        identifiable: v.identifiable,
        condition: v.condition,
        witness: v.witness,
        nonzero: pattern.iter().zip(&names).filter(|(nz, _)| **nz).map(|(_, n)| n.clone()).collect(),
        pattern_source: source,
        supports: supports_out(&support, &names),
        theta: theta.as_ref().map(ThetaSpec::of),
        certificate,
    };
    json(&out, c)
}

fn certify(
    target: &Theta,
    verdict: &IdentifiabilityVerdict,
    support: &SupportSpec,
    x: Option<&Covariates>,
    names: &[String],
    starts: usize,
    seed: u64,
) -> CliResult<Certificate> {
    if !verdict.identifiable {
        let pt = find_equivalent(target, support, starts, seed)?;
        return Ok(match pt {
            Some(e) => Certificate::EquivalentPoint {
                found: true,
                method: Some(e.method),
                theta: Some(ThetaSpec::of(&e.theta)),
                residual: Some(e.residual),
                distance: Some(e.distance),
            },
            None => Certificate::EquivalentPoint { found: false, method: None, theta: None, residual: None, distance: None },
        });
    }
    let probe = if support.is_finite() { None } else { Some(discretize(support, x)?) };
    let searched = probe.as_ref().unwrap_or(support);
    let s = search_alternative(target, searched, starts, seed)?;
    Ok(Certificate::Search {
        found: s.alternative.is_some(),
        n_starts: s.n_starts,
        n_matched: s.n_matched,
        max_matched_distance: s.max_matched_distance,
        alternative: s.alternative.as_ref().map(ThetaSpec::of),
        residual: s.residual,
        probe_support: probe.map(|p| supports_out(&p, names)),
    })
}

fn normal_covariates(rng: &mut ChaCha8Rng, n: usize, p: usize) -> CliResult<Covariates> {
    let values = (0..n * p).map(|_| rng.sample(StandardNormal)).collect();
    Ok(Covariates::from_flat(n, p, values)?)
}

pub fn simulate(args: &SimulateArgs) -> CliResult<Output> {
    let c = &args.common;
    let (names, x) = match (&c.input, args.n) {
        (Some(_), Some(_)) => return Err(CliError::invalid("pass either --input or --n, not both")),
        (Some(p), None) => {
            let t = io::load_csv(p, &c.outcome, false)?;
            (t.names, t.covariates)
        }
        (None, Some(n)) => {
            if n == 0 {
                return Err(CliError::invalid("--n must be positive"));
            }
            let theta = io::parse_theta(&args.theta, None)?;
            let p = theta.p();
            (default_names(p), normal_covariates(&mut stream(c.seed, 1), n, p)?)
        }
        (None, None) => return Err(CliError::invalid("pass --input or --n")),
    };
    let theta = io::parse_theta(&args.theta, Some(names.len()))?;
    let data = draw_outcomes(&theta, &x, c.seed)?;
    let mut body = Vec::new();
    io::write_csv(&mut body, &names, &c.outcome, &data)?;
    Ok(Output { body, path: c.output.clone() })
}

#[derive(Debug, Serialize)]
pub struct PowerRow {
    pub effect: f64,
    pub n: usize,
    pub replicates: usize,
    /// Replicates where the test ran.
    pub completed: usize,
    pub rejections: usize,
    /// Rejections over completed replicates.
    pub rejection_rate: f64,
    /// Binomial standard error of the rate.
    pub mc_se: f64,
    /// Completed replicates per statistic actually used.
    pub kinds: KindCounts,
    pub failures: Vec<String>,
}

#[derive(Debug, Default, Serialize)]
pub struct KindCounts {
    pub lrt: usize,
    pub sup_score_chi_square: usize,
    pub sup_score_bootstrap: usize,
}

/// Rejection rate against effect size for one sample size.
#[derive(Debug, Serialize)]
pub struct PowerSeries {
    pub n: usize,
    pub effects: Vec<f64>,
    pub rejection_rate: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct PowerOut {
    pub level: f64,
    pub eta: Vec<String>,
    pub base_theta: ThetaSpec,
    pub bootstrap: usize,
    pub seed: u64,
    pub alpha_grid: GridSummary,
    pub rows: Vec<PowerRow>,
    pub series: Vec<PowerSeries>,
}

pub fn power(args: &PowerArgs) -> CliResult<Output> {
    let c = &args.common;
    let pool = match &c.input {
        Some(p) => Some(io::load_csv(p, &c.outcome, false)?),
        None => None,
    };
    let base = io::parse_theta(&args.theta, pool.as_ref().map(|t| t.names.len()))?;
    let p = base.p();
    let names = pool.as_ref().map_or_else(|| default_names(p), |t| t.names.clone());
    let eta = io::resolve_columns(&args.eta, &names)?;
    if eta.is_empty() {
        return Err(CliError::invalid("--eta names no column"));
    }
    let partition = Partition::new(p, &eta)?;
    let effects: Vec<f64> = io::parse_list("--effects", &args.effects)?;
    let sizes: Vec<usize> = io::parse_list("--sizes", &args.sizes)?;
    if sizes.iter().any(|&n| n == 0) || effects.iter().any(|e| !e.is_finite()) {
        return Err(CliError::invalid("--sizes must be positive and --effects finite"));
    }
    if args.replicates == 0 {
        return Err(CliError::invalid("--replicates must be positive"));
    }
    if !(args.level > 0.0 && args.level < 1.0) {
        return Err(CliError::invalid("--level must lie in (0, 1)"));
    }
    let grid = grid_of(c)?;

    let mut rows = Vec::new();
    for (ei, &effect) in effects.iter().enumerate() {
        let mut theta = base.clone();
        for &j in &eta {
            theta.reg.coefs[j] = effect;
        }
        for (si, &n) in sizes.iter().enumerate() {
            let mut row = PowerRow {
                effect,
                n,
                replicates: args.replicates,
                completed: 0,
                rejections: 0,
                rejection_rate: f64::NAN,
                mc_se: f64::NAN,
                kinds: KindCounts::default(),
                failures: Vec::new(),
            };
            for r in 0..args.replicates {
                let index = ((ei * sizes.len() + si) * args.replicates + r) as u64;
                let mut rng = stream(c.seed, index);
                let x = match &pool {
                    Some(t) => {
                        let src = &t.covariates;
                        let mut v = Vec::with_capacity(n * p);
                        for _ in 0..n {
                            v.extend_from_slice(src.row(rng.random_range(0..src.n())));
                        }
                        Covariates::from_flat(n, p, v)?
                    }
                    None => normal_covariates(&mut rng, n, p)?,
                };
                let sim_seed: u64 = rng.random();
                let boot_seed: u64 = rng.random();
                match power_replicate(&theta, &x, &partition, &grid, args, &names, sim_seed, boot_seed) {
                    Ok(rep) => {
                        row.completed += 1;
                        row.rejections += (rep.p_value <= args.level) as usize;
                        match (rep.kind, rep.null_dist) {
                            (TestKind::Lrt, _) => row.kinds.lrt += 1,
                            (_, NullDistribution::BootstrapSup) => row.kinds.sup_score_bootstrap += 1,
                            _ => row.kinds.sup_score_chi_square += 1,
                        }
                    }
                    Err(e) => {
                        if row.failures.len() < 5 {
                            row.failures.push(format!("replicate {r}: {}", e.message()));
                        }
                    }
                }
            }
            if row.completed > 0 {
                let k = row.completed as f64;
                let rate = row.rejections as f64 / k;
                row.rejection_rate = rate;
                row.mc_se = (rate * (1.0 - rate) / k).sqrt();
            }
            rows.push(row);
        }
    }
    let series = sizes
        .iter()
        .map(|&n| PowerSeries {
            n,
            effects: effects.clone(),
            rejection_rate: rows.iter().filter(|r| r.n == n).map(|r| r.rejection_rate).collect(),
        })
        .collect();
    let out = PowerOut {
        level: args.level,
        eta: eta.iter().map(|&j| names[j].clone()).collect(),
        base_theta: ThetaSpec::of(&base),
        bootstrap: args.bootstrap,
        seed: c.seed,
        alpha_grid: GridSummary::of(&grid),
        rows,
        series,
    };
    json(&out, c)
}

#[allow(clippy::too_many_arguments)]
fn power_replicate(
    theta: &Theta,
    x: &Covariates,
    partition: &Partition,
    grid: &AlphaGrid,
    args: &PowerArgs,
    names: &[String],
    sim_seed: u64,
    boot_seed: u64,
) -> CliResult<TestReport> {
    let data: Dataset = draw_outcomes(theta, x, sim_seed)?;
    let support = io::resolve_support(names, Some(x), &args.common.support)?;
    let opts = TestOptions {
        fit: FitOptions::with_grid(grid.clone()),
        n_bootstrap: args.bootstrap,
        seed: boot_seed,
        multipliers: Multipliers::Gaussian,
        statistic: statistic_choice(args.statistic),
        support: Some(support),
        ..TestOptions::default()
    };
    Ok(run_test(&data, partition, &opts)?)
}
