mod common;

use mislogit::estimation::{fit_profile, FitWarning, SweepOrder};
use mislogit::identifiability::trace_equivalence_curve;
use mislogit::likelihood::{self, InfoKind};
use mislogit::model::simulate;
use mislogit::{
    fit_beta_given_alpha, fit_mle, fit_null, AlphaGrid, Covariates, Dataset, FitOptions, GridAxis, MisclassParams,
    Partition, RegressionParams, Theta,
};
use nalgebra::{DMatrix, DVector};

fn coarse_grid() -> AlphaGrid {
    let ax = GridAxis::new(0.7, 1.0, 0.05).unwrap();
    AlphaGrid::rect(ax, ax, 1e-6).unwrap()
}

/// Plain iteratively reweighted least squares for ordinary logistic regression.
fn irls(data: &Dataset) -> Vec<f64> {
    let n = data.n();
    let q = data.p() + 1;
    let z = DMatrix::from_fn(n, q, |i, j| if j == 0 { 1.0 } else { data.x(i)[j - 1] });
    let s = DVector::from_fn(n, |i, _| data.s(i));
    let mut beta = DVector::zeros(q);
    for _ in 0..100 {
        let eta = &z * &beta;
        let mu = eta.map(|t| 1.0 / (1.0 + (-t).exp()));
        let w = mu.map(|m| m * (1.0 - m));
        let zw = DMatrix::from_fn(n, q, |i, j| z[(i, j)] * w[i]);
        let step = (z.transpose() * &zw).cholesky().unwrap().solve(&(z.transpose() * (&s - &mu)));
        beta += &step;
        if step.amax() < 1e-14 {
            break;
        }
    }
    beta.iter().copied().collect()
}

#[test]
fn perfect_classification_reduces_to_logistic_regression() {
    let mut rng = common::rng(1);
    let x = common::normal_covariates(&mut rng, 500, 2);
    let theta = Theta::new(1.0, 1.0, -0.3, vec![0.8, -0.6]).unwrap();
    let data = simulate(&theta, &x, 3).unwrap();
    let oracle = irls(&data);
    let alpha = MisclassParams::new(1.0, 1.0).unwrap();
    let fit = fit_beta_given_alpha(&alpha, &data, &RegressionParams::zeros(2), &FitOptions::default()).unwrap();
    for (a, b) in fit.beta.slots().iter().zip(&oracle) {
        assert!((a - b).abs() < 1e-6);
    }
    let opts = FitOptions { polish: false, ..FitOptions::with_grid(AlphaGrid::single(alpha)) };
    let mle = fit_mle(&data, &opts).unwrap();
    for (a, b) in mle.theta_hat.reg.slots().iter().zip(&oracle) {
        assert!((a - b).abs() < 1e-6);
    }
}

#[test]
fn accepted_fits_satisfy_first_order_conditions() {
    let mut rng = common::rng(2);
    for seed in 0..10 {
        let theta = common::random_theta(&mut rng, 2);
        let x = common::normal_covariates(&mut rng, 300, 2);
        let data = simulate(&theta, &x, seed).unwrap();
        let opts = FitOptions::default();
        let fit = fit_beta_given_alpha(&theta.misclass, &data, &RegressionParams::zeros(2), &opts).unwrap();
        assert!(fit.converged);
        assert!(fit.grad_norm <= opts.grad_tol);
        let g = likelihood::slot_gradient(&Theta { misclass: theta.misclass, reg: fit.beta.clone() }, &data);
        assert!(g.norm() / data.n() as f64 <= opts.grad_tol);
        assert!(fit.trace.windows(2).all(|w| w[1] >= w[0]));

        let part = Partition::new(2, &[1]).unwrap();
        let null = fit_null(&data, &part, &theta.misclass, &opts).unwrap();
        assert_eq!(null.beta.coefs[1], 0.0);
        let s = likelihood::score(&Theta { misclass: theta.misclass, reg: null.beta }, &data, &part).unwrap();
        assert!(s.gamma.norm() / data.n() as f64 <= opts.grad_tol);
    }
}

#[test]
fn restricted_loglik_with_every_coefficient_tested_is_alpha_free() {
    let mut rng = common::rng(3);
    let x = common::normal_covariates(&mut rng, 400, 2);
    let data = simulate(&Theta::new(0.9, 0.85, 0.1, vec![0.5, 0.0]).unwrap(), &x, 4).unwrap();
    let n = data.n() as f64;
    let sbar = data.mean_outcome();
    let closed = n * (sbar * sbar.ln() + (1.0 - sbar) * (1.0 - sbar).ln());
    let part = Partition::new(2, &[0, 1]).unwrap();
    for (a1, a2) in [(0.75, 0.8), (0.9, 0.85), (1.0, 1.0), (0.95, 0.7)] {
        let fit = fit_null(&data, &part, &MisclassParams::new(a1, a2).unwrap(), &FitOptions::default()).unwrap();
        assert!((fit.loglik - closed).abs() < 1e-9, "{} vs {closed}", fit.loglik);
    }
}

#[test]
fn restricted_never_exceeds_unrestricted() {
    let mut rng = common::rng(4);
    let opts = FitOptions::with_grid(coarse_grid());
    for seed in 0..5 {
        let x = common::normal_covariates(&mut rng, 400, 2);
        let data = simulate(&Theta::new(0.9, 0.85, 0.2, vec![0.7, 0.0]).unwrap(), &x, seed).unwrap();
        let full = fit_mle(&data, &opts).unwrap();
        let restricted = fit_profile(&data, &[2], &opts).unwrap();
        assert!(restricted.loglik_at_max <= full.loglik_at_max + 1e-9);
        assert_eq!(restricted.theta_hat.reg.coefs[1], 0.0);
    }
}

#[test]
fn sweep_order_does_not_change_the_grid_optimum() {
    let mut rng = common::rng(5);
    let x = common::normal_covariates(&mut rng, 800, 2);
    let data = simulate(&Theta::new(0.9, 0.85, -0.2, vec![1.2, -0.8]).unwrap(), &x, 6).unwrap();
    let rows = FitOptions { polish: false, ..FitOptions::with_grid(coarse_grid()) };
    let cols = FitOptions { sweep: SweepOrder::ColumnMajor, ..rows.clone() };
    let a = fit_mle(&data, &rows).unwrap();
    let b = fit_mle(&data, &cols).unwrap();
    assert!((a.loglik_at_max - b.loglik_at_max).abs() <= 1e-8);
    for (p, q) in a.profile_surface.iter().zip(&b.profile_surface) {
        assert!((p.loglik.unwrap() - q.loglik.unwrap()).abs() <= 1e-8);
    }
}

#[test]
fn polishing_never_lowers_the_optimum() {
    let mut rng = common::rng(6);
    let x = common::uniform_covariates(&mut rng, 3000, 1, -3.0, 3.0);
    let data = simulate(&Theta::new(0.88, 0.83, 0.3, vec![1.8]).unwrap(), &x, 7).unwrap();
    let grid = FitOptions { polish: false, ..FitOptions::with_grid(coarse_grid()) };
    let a = fit_mle(&data, &grid).unwrap();
    let b = fit_mle(&data, &FitOptions::with_grid(coarse_grid())).unwrap();
    assert!(b.loglik_at_max >= a.loglik_at_max);
    assert!(b.theta_hat.misclass.alpha1() + b.theta_hat.misclass.alpha2() >= 1.0 + 1e-6 - 1e-12);
    let ((lo1, hi1), (lo2, hi2)) = coarse_grid().bounds();
    assert!((lo1..=hi1).contains(&b.theta_hat.misclass.alpha1()));
    assert!((lo2..=hi2).contains(&b.theta_hat.misclass.alpha2()));
}

#[test]
fn three_point_support_gives_a_flat_ridge() {
    let rows: Vec<Vec<f64>> = (0..1500).map(|i| vec![(i % 3) as f64]).collect();
    let x = Covariates::from_rows(&rows).unwrap();
    let data = simulate(&Theta::new(0.9, 0.85, -0.5, vec![0.9]).unwrap(), &x, 8).unwrap();
    let fit = fit_mle(&data, &FitOptions::with_grid(coarse_grid())).unwrap();
    assert!(fit.warnings.iter().any(|w| matches!(w, FitWarning::FewDistinctCells { cells: 3, params: 4 })));

    // Every other point on the equivalence curve through the estimate has the same likelihood.
    let t = &fit.theta_hat;
    let cells = [0.0, 1.0, 2.0].map(|v| t.surrogate_prob(&[v]).unwrap());
    let a0 = t.misclass.to_ab().a;
    let cmin = cells.iter().cloned().fold(1.0, f64::min);
    let trace = trace_equivalence_curve(cells, 2.0, (a0, a0 + 0.9 * (cmin - a0)), 8);
    assert!(trace.points.len() >= 6);
    for pt in &trace.points {
        let other = pt.to_theta().unwrap();
        let ll = likelihood::loglik(&other, &data).value;
        assert!((ll - fit.loglik_at_max).abs() < 1e-8, "{ll} vs {}", fit.loglik_at_max);
    }
    let info = likelihood::slot_information(&t.misclass, &t.reg, &data, InfoKind::Observed);
    assert!(info.iter().all(|v| v.is_finite()));
}
