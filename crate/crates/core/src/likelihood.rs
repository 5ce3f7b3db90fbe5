//! Log-likelihood, analytic score and information for the surrogate model.
//!
//! Regression coefficients are addressed by *slot*: slot 0 is the intercept
//! and slot `j + 1` is covariate `j`. Throughout, `p_i = P(S_i = 1 | x_i)`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{expit, Dataset, MisclassParams, RegressionParams, Theta};

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` inside logs
/// and likelihood derivatives.
pub const PROB_CLAMP: f64 = 1e-12;

/// Split of the regression slots into tested coefficients `η` and nuisance
/// coefficients `γ`; `γ` always contains the intercept.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Partition {
    p: usize,
    eta: Vec<usize>,
    gamma: Vec<usize>,
}

impl Partition {
    /// `eta_covariates` are 0-based covariate indices; everything else,
    /// including the intercept, becomes nuisance.
    pub fn new(p: usize, eta_covariates: &[usize]) -> Result<Self> {
        let eta: Vec<usize> = eta_covariates.iter().map(|j| j + 1).collect();
        let gamma = (0..=p).filter(|k| !eta.contains(k)).collect();
        Self::from_slots(p, eta, gamma)
    }

    /// Explicit slot lists, in the order the blocks should use.
    pub fn from_slots(p: usize, eta: Vec<usize>, gamma: Vec<usize>) -> Result<Self> {
        if eta.is_empty() {
            return Err(Error::InvalidParameter("at least one coefficient must be tested".into()));
        }
        if !gamma.contains(&0) || eta.contains(&0) {
            return Err(Error::InvalidParameter("the intercept must be a nuisance slot".into()));
        }
        let mut all: Vec<usize> = eta.iter().chain(&gamma).copied().collect();
        all.sort_unstable();
        if all != (0..=p).collect::<Vec<_>>() {
            return Err(Error::InvalidParameter(format!(
                "eta {eta:?} and gamma {gamma:?} must partition slots 0..={p}"
            )));
        }
        Ok(Self { p, eta, gamma })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn d(&self) -> usize {
        self.eta.len()
    }

    pub fn eta_slots(&self) -> &[usize] {
        &self.eta
    }

    pub fn gamma_slots(&self) -> &[usize] {
        &self.gamma
    }

    pub fn eta_covariates(&self) -> Vec<usize> {
        self.eta.iter().map(|k| k - 1).collect()
    }

    /// Covariates that stay in the reduced model.
    pub fn gamma_covariates(&self) -> Vec<usize> {
        self.gamma.iter().filter(|&&k| k > 0).map(|k| k - 1).collect()
    }

    /// True when every covariate is tested (`η = β_x`).
    pub fn tests_all(&self) -> bool {
        self.eta.len() == self.p
    }
}

/// Log-likelihood value with clamping diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogLik {
    pub value: f64,
    /// Observations whose probability needed clamping.
    pub n_clamped: usize,
    /// Some `p_i` is exactly 0 or 1 and contradicts `s_i`; `value` is `-∞`.
    pub impossible: bool,
}

/// Per-observation quantities shared by score and information.
#[derive(Debug, Clone, Copy)]
struct Terms {
    /// expit of the linear predictor.
    f: f64,
    /// Clamped `P(S=1|x)`.
    p: f64,
    /// `dℓ/dp = (s - p) / (p(1-p))`.
    r: f64,
    /// `-d²ℓ/dp² = (s(1-2p) + p²) / (p(1-p))²`.
    w: f64,
}

#[inline]
fn terms(a: f64, b: f64, t: f64, s: f64) -> Terms {
    let f = expit(t);
    let p = (a + b * f).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    let v = p * (1.0 - p);
    Terms { f, p, r: (s - p) / v, w: (s * (1.0 - 2.0 * p) + p * p) / (v * v) }
}

pub fn loglik(theta: &Theta, data: &Dataset) -> LogLik {
    let ab = theta.misclass.to_ab();
    let mut value = 0.0;
    let mut n_clamped = 0;
    let mut impossible = false;
    for i in 0..data.n() {
        let raw = ab.a + ab.b * expit(theta.reg.linear_predictor(data.x(i)));
        let s = data.outcomes()[i];
        if (raw <= 0.0 && s) || (raw >= 1.0 && !s) {
            impossible = true;
        }
        let p = raw.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
        if p != raw {
            n_clamped += 1;
        }
        value += if s { p.ln() } else { (-p).ln_1p() };
    }
    if impossible {
        value = f64::NEG_INFINITY;
    }
    LogLik { value, n_clamped, impossible }
}

/// `dℓ_i/dt_i` for each observation, where `t_i` is the linear predictor.
/// The per-observation gradient over slots is this value times `(1, x_i)`.
pub fn predictor_scores(theta: &Theta, data: &Dataset) -> Vec<f64> {
    let ab = theta.misclass.to_ab();
    (0..data.n())
        .map(|i| {
            let tm = terms(ab.a, ab.b, theta.reg.linear_predictor(data.x(i)), data.s(i));
            tm.r * ab.b * tm.f * (1.0 - tm.f)
        })
        .collect()
}

/// Gradient of the log-likelihood over all `p + 1` regression slots.
pub fn slot_gradient(theta: &Theta, data: &Dataset) -> DVector<f64> {
    let mut g = DVector::zeros(data.p() + 1);
    for (i, u) in predictor_scores(theta, data).into_iter().enumerate() {
        g[0] += u;
        for (j, x) in data.x(i).iter().enumerate() {
            g[j + 1] += u * x;
        }
    }
    g
}

/// Score split into its `η` and `γ` parts.
#[derive(Debug, Clone, PartialEq)]
pub struct Score {
    pub eta: DVector<f64>,
    pub gamma: DVector<f64>,
}

pub fn score(theta: &Theta, data: &Dataset, partition: &Partition) -> Result<Score> {
    check_dims(theta.p(), data, partition)?;
    let g = slot_gradient(theta, data);
    Ok(Score {
        eta: DVector::from_iterator(partition.d(), partition.eta.iter().map(|&k| g[k])),
        gamma: DVector::from_iterator(partition.gamma.len(), partition.gamma.iter().map(|&k| g[k])),
    })
}

fn check_dims(p: usize, data: &Dataset, partition: &Partition) -> Result<()> {
    if data.p() != p {
        return Err(Error::DimensionMismatch { expected: p, got: data.p() });
    }
    if partition.p() != p {
        return Err(Error::DimensionMismatch { expected: p, got: partition.p() });
    }
    Ok(())
}

/// Which information matrix to assemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InfoKind {
    /// Negative Hessian of the log-likelihood.
    Observed,
    /// Observed information with each `S_i` replaced by its model mean `p_i`.
    Expected,
}

/// Information over all regression slots for fixed misclassification rates.
pub fn slot_information(alpha: &MisclassParams, reg: &RegressionParams, data: &Dataset, kind: InfoKind) -> DMatrix<f64> {
    let ab = alpha.to_ab();
    let q = data.p() + 1;
    let mut m = DMatrix::zeros(q, q);
    let mut z = vec![1.0; q];
    for i in 0..data.n() {
        let x = data.x(i);
        z[1..].copy_from_slice(x);
        let tm = terms(ab.a, ab.b, reg.linear_predictor(x), data.s(i));
        let f1 = tm.f * (1.0 - tm.f);
        let weight = match kind {
            InfoKind::Observed => {
                let f2 = f1 * (1.0 - 2.0 * tm.f);
                tm.w * ab.b * ab.b * f1 * f1 - tm.r * ab.b * f2
            }
            InfoKind::Expected => ab.b * ab.b * f1 * f1 / (tm.p * (1.0 - tm.p)),
        };
        for r in 0..q {
            let wr = weight * z[r];
            for c in r..q {
                m[(r, c)] += wr * z[c];
            }
        }
    }
    for r in 0..q {
        for c in 0..r {
            m[(r, c)] = m[(c, r)];
        }
    }
    m
}

/// `η`/`γ` blocks of the information matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct InfoBlocks {
    pub ee: DMatrix<f64>,
    pub eg: DMatrix<f64>,
    pub gg: DMatrix<f64>,
}

impl InfoBlocks {
    pub fn from_full(full: &DMatrix<f64>, partition: &Partition) -> Self {
        Self {
            ee: linalg::select(full, &partition.eta, &partition.eta),
            eg: linalg::select(full, &partition.eta, &partition.gamma),
            gg: linalg::select(full, &partition.gamma, &partition.gamma),
        }
    }

    /// `I_γγ⁻¹ I_γη`, the regression of the `η`-score on the `γ`-score.
    pub fn projection(&self) -> Result<DMatrix<f64>> {
        linalg::sym_solve(&self.gg, &self.eg.transpose())
    }
}

/// Observed information blocks at `(alpha, beta)`.
pub fn info_blocks(alpha: &MisclassParams, beta: &RegressionParams, data: &Dataset, partition: &Partition) -> Result<InfoBlocks> {
    info_blocks_of(alpha, beta, data, partition, InfoKind::Observed)
}

pub fn info_blocks_of(
    alpha: &MisclassParams,
    beta: &RegressionParams,
    data: &Dataset,
    partition: &Partition,
    kind: InfoKind,
) -> Result<InfoBlocks> {
    check_dims(beta.p(), data, partition)?;
    Ok(InfoBlocks::from_full(&slot_information(alpha, beta, data, kind), partition))
}

/// Partial information `I_ηη - I_ηγ I_γγ⁻¹ I_γη`.
pub fn partial_info(blocks: &InfoBlocks) -> Result<DMatrix<f64>> {
    let proj = blocks.projection()?;
    let mut m = &blocks.ee - &blocks.eg * proj;
    linalg::symmetrize(&mut m);
    Ok(m)
}

/// Gradient over `(α₁, α₂, slot 0, …, slot p)`.
pub fn theta_gradient(theta: &Theta, data: &Dataset) -> DVector<f64> {
    let ab = theta.misclass.to_ab();
    let q = data.p() + 1;
    let mut g_ab = [0.0; 2];
    let mut g = DVector::zeros(q + 2);
    for i in 0..data.n() {
        let x = data.x(i);
        let tm = terms(ab.a, ab.b, theta.reg.linear_predictor(x), data.s(i));
        g_ab[0] += tm.r;
        g_ab[1] += tm.r * tm.f;
        let u = tm.r * ab.b * tm.f * (1.0 - tm.f);
        g[2] += u;
        for (j, v) in x.iter().enumerate() {
            g[3 + j] += u * v;
        }
    }
    // a = 1 - α₂, b = α₁ + α₂ - 1
    g[0] = g_ab[1];
    g[1] = -g_ab[0] + g_ab[1];
    g
}

/// Observed information over `(α₁, α₂, slot 0, …, slot p)`.
pub fn theta_information(theta: &Theta, data: &Dataset) -> DMatrix<f64> {
    let ab = theta.misclass.to_ab();
    let q = data.p() + 1;
    let k = q + 2;
    // Work in (a, b, slots) first.
    let mut h = DMatrix::zeros(k, k);
    let mut grad_p = vec![0.0; k];
    for i in 0..data.n() {
        let x = data.x(i);
        let tm = terms(ab.a, ab.b, theta.reg.linear_predictor(x), data.s(i));
        let f1 = tm.f * (1.0 - tm.f);
        let f2 = f1 * (1.0 - 2.0 * tm.f);
        grad_p[0] = 1.0;
        grad_p[1] = tm.f;
        grad_p[2] = ab.b * f1;
        for (j, v) in x.iter().enumerate() {
            grad_p[3 + j] = ab.b * f1 * v;
        }
        for r in 0..k {
            for c in r..k {
                h[(r, c)] += tm.w * grad_p[r] * grad_p[c];
            }
        }
        // Second derivatives of p: (b, slot) = f' z, (slot, slot) = b f'' z zᵀ.
        for c in 2..k {
            let zc = if c == 2 { 1.0 } else { x[c - 3] };
            h[(1, c)] -= tm.r * f1 * zc;
            for c2 in c..k {
                let zc2 = if c2 == 2 { 1.0 } else { x[c2 - 3] };
                h[(c, c2)] -= tm.r * ab.b * f2 * zc * zc2;
            }
        }
    }
    for r in 0..k {
        for c in 0..r {
            h[(r, c)] = h[(c, r)];
        }
    }
    // Jacobian of (a, b, slots) with respect to (α₁, α₂, slots).
    let mut jac = DMatrix::identity(k, k);
    jac[(0, 0)] = 0.0;
    jac[(0, 1)] = -1.0;
    jac[(1, 0)] = 1.0;
    jac[(1, 1)] = 1.0;
    jac.transpose() * h * jac
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Covariates;

    fn dataset(rows: &[Vec<f64>], s: &[u8]) -> Dataset {
        Dataset::from_codes(Covariates::from_rows(rows).unwrap(), s).unwrap()
    }

    #[test]
    fn single_observation_half() {
        let t = Theta::new(1.0, 1.0, 0.0, vec![]).unwrap();
        for s in [0u8, 1] {
            let d = Dataset::from_codes(Covariates::empty(1), &[s]).unwrap();
            assert!((loglik(&t, &d).value - 0.5f64.ln()).abs() < 1e-15);
        }
    }

    #[test]
    fn copies_of_one_cell_are_additive() {
        let t = Theta::new(0.9, 0.8, 0.3, vec![0.5]).unwrap();
        let s = [1u8, 0, 1, 1, 0, 1, 1];
        let rows = vec![vec![2.0]; s.len()];
        let d = dataset(&rows, &s);
        let p = t.surrogate_prob(&[2.0]).unwrap();
        let sbar = 5.0 / 7.0;
        let expected = 7.0 * (sbar * p.ln() + (1.0 - sbar) * (1.0 - p).ln());
        assert!((loglik(&t, &d).value - expected).abs() < 1e-12);
    }

    #[test]
    fn contradicting_certain_outcome_is_flagged() {
        let t = Theta::new(1.0, 1.0, 800.0, vec![]).unwrap();
        let d = Dataset::from_codes(Covariates::empty(2), &[1, 0]).unwrap();
        let ll = loglik(&t, &d);
        assert!(ll.impossible);
        assert_eq!(ll.value, f64::NEG_INFINITY);
        let d = Dataset::from_codes(Covariates::empty(2), &[1, 1]).unwrap();
        let ll = loglik(&t, &d);
        assert!(!ll.impossible && ll.value.is_finite());
        assert_eq!(ll.n_clamped, 2);
    }

    #[test]
    fn partition_validation() {
        assert!(Partition::new(2, &[]).is_err());
        assert!(Partition::from_slots(2, vec![0], vec![1, 2]).is_err());
        assert!(Partition::from_slots(2, vec![1], vec![0]).is_err());
        let part = Partition::new(3, &[1]).unwrap();
        assert_eq!(part.eta_slots(), &[2]);
        assert_eq!(part.gamma_slots(), &[0, 1, 3]);
        assert_eq!(part.gamma_covariates(), vec![0, 2]);
        assert!(Partition::new(2, &[0, 1]).unwrap().tests_all());
    }

    #[test]
    fn partial_info_hand_cases() {
        let blocks = InfoBlocks {
            ee: DMatrix::from_element(1, 1, 4.0),
            eg: DMatrix::from_element(1, 1, 2.0),
            gg: DMatrix::from_element(1, 1, 2.0),
        };
        assert!((partial_info(&blocks).unwrap()[(0, 0)] - 2.0).abs() < 1e-15);

        let ee = DMatrix::from_row_slice(2, 2, &[3.0, 1.0, 1.0, 2.0]);
        let blocks = InfoBlocks { ee: ee.clone(), eg: DMatrix::zeros(2, 1), gg: DMatrix::from_element(1, 1, 5.0) };
        assert_eq!(partial_info(&blocks).unwrap(), ee);

        let singular = InfoBlocks {
            ee: DMatrix::from_element(1, 1, 1.0),
            eg: DMatrix::from_element(1, 2, 1.0),
            gg: DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]),
        };
        assert!(matches!(partial_info(&singular), Err(Error::Singular { .. })));
    }

    #[test]
    fn intercept_only_gamma_block_positive() {
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![(i % 5) as f64]).collect();
        let s: Vec<u8> = (0..30).map(|i| (i % 3 == 0) as u8).collect();
        let d = dataset(&rows, &s);
        let part = Partition::new(1, &[0]).unwrap();
        let alpha = MisclassParams::new(0.9, 0.9).unwrap();
        let beta = RegressionParams::new(-0.2, vec![0.4]).unwrap();
        for kind in [InfoKind::Observed, InfoKind::Expected] {
            let blocks = info_blocks_of(&alpha, &beta, &d, &part, kind).unwrap();
            assert_eq!(blocks.gg.shape(), (1, 1));
            assert!(blocks.gg[(0, 0)] > 0.0);
        }
    }
}
