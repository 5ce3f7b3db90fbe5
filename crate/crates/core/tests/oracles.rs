//! Independent oracles for the likelihood: direct summation, finite
//! differences, and analytic expectation.

mod common;

use mislogit::likelihood::{self, InfoKind};
use mislogit::model::{rescale_design, simulate};
use mislogit::{expit, logit, Dataset, InfoBlocks, MisclassParams, Partition, RegressionParams, Support, SupportSpec, Theta};
use nalgebra::DMatrix;
use rand::Rng;

fn direct_loglik(theta: &Theta, data: &Dataset) -> f64 {
    let (a1, a2) = (theta.misclass.alpha1(), theta.misclass.alpha2());
    let mut total = 0.0;
    for i in 0..data.n() {
        let mut t = theta.reg.intercept;
        for (b, x) in theta.reg.coefs.iter().zip(data.x(i)) {
            t += b * x;
        }
        let p = (1.0 - a2) + (a1 + a2 - 1.0) / (1.0 + (-t).exp());
        total += if data.outcomes()[i] { p.ln() } else { (1.0 - p).ln() };
    }
    total
}

fn instance(seed: u64, n: usize, p: usize) -> (Theta, Dataset) {
    let mut rng = common::rng(seed);
    let theta = common::random_theta(&mut rng, p);
    let x = common::normal_covariates(&mut rng, n, p);
    let data = simulate(&theta, &x, seed ^ 0x5eed).unwrap();
    (theta, data)
}

fn with_slot(theta: &Theta, k: usize, h: f64) -> Theta {
    let mut t = theta.clone();
    t.reg.set_slot(k, t.reg.slot(k) + h);
    t
}

#[test]
fn loglik_matches_direct_summation() {
    for seed in 0..30 {
        let (theta, data) = instance(seed, 50, 1 + (seed as usize % 3));
        let ll = likelihood::loglik(&theta, &data);
        assert_eq!(ll.n_clamped, 0);
        assert!((ll.value - direct_loglik(&theta, &data)).abs() < 1e-10);
    }
}

#[test]
fn score_matches_central_differences() {
    let h = 1e-6;
    for seed in 0..100 {
        let p = 1 + (seed as usize % 3);
        let (theta, data) = instance(100 + seed, 100, p);
        let g = likelihood::slot_gradient(&theta, &data);
        for k in 0..=p {
            let fd = (likelihood::loglik(&with_slot(&theta, k, h), &data).value
                - likelihood::loglik(&with_slot(&theta, k, -h), &data).value)
                / (2.0 * h);
            assert!((g[k] - fd).abs() <= 1e-6 * fd.abs().max(1.0), "seed {seed} slot {k}: {} vs {fd}", g[k]);
        }
        // The partitioned score is a relabelling of the same gradient.
        let part = Partition::new(p, &[0]).unwrap();
        let s = likelihood::score(&theta, &data, &part).unwrap();
        assert_eq!(s.eta[0], g[1]);
        assert_eq!(s.gamma[0], g[0]);
    }
}

#[test]
fn alpha_gradient_matches_central_differences() {
    let h = 1e-6;
    for seed in 0..100 {
        let p = 1 + (seed as usize % 2);
        let (theta, data) = instance(300 + seed, 100, p);
        let g = likelihood::theta_gradient(&theta, &data);
        for which in 0..2 {
            let shift = |d: f64| {
                let (a1, a2) = (theta.misclass.alpha1(), theta.misclass.alpha2());
                let m = if which == 0 { (a1 + d, a2) } else { (a1, a2 + d) };
                Theta { misclass: MisclassParams::new_unchecked(m.0, m.1), reg: theta.reg.clone() }
            };
            let fd = (likelihood::loglik(&shift(h), &data).value - likelihood::loglik(&shift(-h), &data).value) / (2.0 * h);
            assert!((g[which] - fd).abs() <= 1e-6 * fd.abs().max(1.0), "seed {seed}: {} vs {fd}", g[which]);
        }
    }
}

fn max_rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let scale = b.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    (a - b).amax() / scale
}

#[test]
fn information_matches_differentiated_score() {
    let h = 1e-6;
    for seed in 0..100 {
        let p = 1 + (seed as usize % 3);
        let (theta, data) = instance(500 + seed, 100, p);
        let info = likelihood::slot_information(&theta.misclass, &theta.reg, &data, InfoKind::Observed);
        let mut fd = DMatrix::zeros(p + 1, p + 1);
        for k in 0..=p {
            let gp = likelihood::slot_gradient(&with_slot(&theta, k, h), &data);
            let gm = likelihood::slot_gradient(&with_slot(&theta, k, -h), &data);
            for r in 0..=p {
                fd[(r, k)] = -(gp[r] - gm[r]) / (2.0 * h);
            }
        }
        assert!(max_rel(&info, &fd) <= 1e-5, "seed {seed}: {}", max_rel(&info, &fd));

        let part = Partition::new(p, &[0]).unwrap();
        let blocks = likelihood::info_blocks(&theta.misclass, &theta.reg, &data, &part).unwrap();
        assert_eq!(blocks.ee[(0, 0)], info[(1, 1)]);
        assert_eq!(blocks.gg[(0, 0)], info[(0, 0)]);
    }
}

#[test]
fn full_information_matches_differentiated_gradient() {
    let h = 1e-6;
    for seed in 0..100 {
        let p = 1 + (seed as usize % 2);
        let (theta, data) = instance(700 + seed, 120, p);
        let info = likelihood::theta_information(&theta, &data);
        let k = p + 3;
        let coords = |t: &Theta| {
            let mut v = vec![t.misclass.alpha1(), t.misclass.alpha2()];
            v.extend(t.reg.slots());
            v
        };
        let build = |v: &[f64]| Theta {
            misclass: MisclassParams::new_unchecked(v[0], v[1]),
            reg: RegressionParams::from_slots(&v[2..]),
        };
        let base = coords(&theta);
        let mut fd = DMatrix::zeros(k, k);
        for c in 0..k {
            let mut up = base.clone();
            let mut dn = base.clone();
            up[c] += h;
            dn[c] -= h;
            let gp = likelihood::theta_gradient(&build(&up), &data);
            let gm = likelihood::theta_gradient(&build(&dn), &data);
            for r in 0..k {
                fd[(r, c)] = -(gp[r] - gm[r]) / (2.0 * h);
            }
        }
        assert!(max_rel(&info, &fd) <= 1e-5, "seed {seed}: {}", max_rel(&info, &fd));
    }
}

#[test]
fn expected_information_is_the_mean_of_observed() {
    let mut rng = common::rng(42);
    let theta = Theta::new(0.9, 0.8, 0.2, vec![0.9]).unwrap();
    let x = common::normal_covariates(&mut rng, 60, 1);
    let expected = likelihood::slot_information(&theta.misclass, &theta.reg, &simulate(&theta, &x, 0).unwrap(), InfoKind::Expected);
    let reps = 4000;
    let mut sum = DMatrix::zeros(2, 2);
    let mut sumsq = DMatrix::zeros(2, 2);
    for r in 0..reps {
        let data = simulate(&theta, &x, 1000 + r).unwrap();
        let o = likelihood::slot_information(&theta.misclass, &theta.reg, &data, InfoKind::Observed);
        sum += &o;
        sumsq += o.component_mul(&o);
    }
    let mean = &sum / reps as f64;
    for i in 0..4 {
        let var = sumsq[i] / reps as f64 - mean[i] * mean[i];
        let se = (var / reps as f64).sqrt();
        assert!((mean[i] - expected[i]).abs() < 5.0 * se + 1e-12, "entry {i}: {} vs {}", mean[i], expected[i]);
    }
}

#[test]
fn schur_complement_of_random_spd_is_psd() {
    let mut rng = common::rng(9);
    for _ in 0..200 {
        let k = rng.random_range(2..6);
        let a = DMatrix::from_fn(k, k + 2, |_, _| rng.random_range(-1.0..1.0));
        let full = &a * a.transpose();
        let eta: Vec<usize> = (1..k).filter(|_| rng.random_bool(0.5)).collect();
        let eta = if eta.is_empty() { vec![k - 1] } else { eta };
        let gamma: Vec<usize> = (0..k).filter(|j| !eta.contains(j)).collect();
        let part = Partition::from_slots(k - 1, eta, gamma).unwrap();
        let pi = likelihood::partial_info(&InfoBlocks::from_full(&full, &part)).unwrap();
        assert!(pi.clone().symmetric_eigenvalues().iter().all(|&l| l >= -1e-10));
        assert_eq!(pi, pi.transpose());
    }
}

#[test]
fn partial_information_ignores_gamma_order() {
    let (theta, data) = instance(77, 200, 3);
    let a = Partition::from_slots(3, vec![2], vec![0, 1, 3]).unwrap();
    let b = Partition::from_slots(3, vec![2], vec![3, 0, 1]).unwrap();
    let pa = likelihood::partial_info(&likelihood::info_blocks(&theta.misclass, &theta.reg, &data, &a).unwrap()).unwrap();
    let pb = likelihood::partial_info(&likelihood::info_blocks(&theta.misclass, &theta.reg, &data, &b).unwrap()).unwrap();
    assert!((pa[(0, 0)] - pb[(0, 0)]).abs() <= 1e-12 * pa[(0, 0)].abs().max(1.0));
}

#[test]
fn loglik_is_invariant_under_rescaling() {
    let mut rng = common::rng(5);
    for seed in 0..20 {
        let theta = common::random_theta(&mut rng, 2);
        let supports = SupportSpec::new(vec![
            Support::finite(vec![2.0, 4.0, 7.0]).unwrap(),
            Support::finite(vec![-1.0, 3.0]).unwrap(),
        ])
        .unwrap();
        let rows: Vec<Vec<f64>> = (0..80)
            .map(|_| vec![[2.0, 4.0, 7.0][rng.random_range(0..3)], [-1.0, 3.0][rng.random_range(0..2)]])
            .collect();
        let x = mislogit::Covariates::from_rows(&rows).unwrap();
        let data = simulate(&theta, &x, seed).unwrap();
        let (z, map) = rescale_design(&x, &supports).unwrap();
        let zdata = Dataset::new(z, data.outcomes().to_vec()).unwrap();
        let ztheta = Theta { misclass: theta.misclass, reg: map.to_rescaled(&theta.reg) };
        let l1 = likelihood::loglik(&theta, &data).value;
        let l2 = likelihood::loglik(&ztheta, &zdata).value;
        assert!((l1 - l2).abs() < 1e-10);
    }
}

#[test]
fn label_switching_negates_the_slot_score() {
    for seed in 0..20 {
        let (theta, data) = instance(900 + seed, 80, 2);
        let twin = theta.label_switched();
        let g = likelihood::slot_gradient(&theta, &data);
        let gt = likelihood::slot_gradient(&twin, &data);
        assert!((likelihood::loglik(&theta, &data).value - likelihood::loglik(&twin, &data).value).abs() < 1e-10);
        for k in 0..3 {
            assert!((g[k] + gt[k]).abs() < 1e-9 * g[k].abs().max(1.0));
        }
    }
}

#[test]
fn balanced_intercept_has_zero_score() {
    let codes: Vec<u8> = (0..90).map(|i| (i % 3 == 0) as u8).collect();
    let data = Dataset::from_codes(mislogit::Covariates::empty(90), &codes).unwrap();
    let alpha = MisclassParams::new(0.9, 0.85).unwrap();
    let ab = alpha.to_ab();
    let beta0 = logit((data.mean_outcome() - ab.a) / ab.b).unwrap();
    let theta = Theta { misclass: alpha, reg: RegressionParams::new(beta0, vec![]).unwrap() };
    assert!((ab.a + ab.b * expit(beta0) - 1.0 / 3.0).abs() < 1e-15);
    assert!(likelihood::slot_gradient(&theta, &data)[0].abs() < 1e-10);
}
