// SPDX-License-Identifier: MIT OR Apache-2.0

//! Estimators and likelihood derivatives against independent references.

mod common;

use boundedcp::bar_model::{simulate_bar, InitialState};
use boundedcp::estimation::{cls_estimate, cml_derivatives, cml_estimate, cml_loglik, mql_estimate};
use boundedcp::rng::stream_rng;
use boundedcp::{BarParams, BoundedSeries};
use common::*;
use rand::Rng;

fn random_series(seed: u64, nb: u32, n: usize) -> (BoundedSeries, f64, f64) {
    let mut rng = stream_rng(seed, 1);
    let p: f64 = rng.random_range(0.2..0.8);
    let rho: f64 = rng.random_range(-0.15..0.7);
    let s = simulate_bar(&BarParams::new(p, rho).unwrap(), nb, n, &mut stream_rng(seed, 2), InitialState::Stationary)
        .unwrap();
    (s, p, rho)
}

fn penalized(f: impl Fn(f64, f64) -> f64) -> impl Fn([f64; 2]) -> f64 {
    move |[rho, p]| if in_domain(p, rho) { f(p, rho) } else { f64::INFINITY }
}

#[test]
fn cls_matches_numerical_minimum() {
    for seed in 0..25 {
        let (s, p0, rho0) = random_series(seed, 10, 200);
        let est = cls_estimate(&s).unwrap();
        assert!(!est.clamped, "seed {seed}");
        let xs = s.counts().to_vec();
        let [rho, p] = nelder_mead(penalized(|p, r| weighted_ls(&xs, 10, p, r, |_| 1.0)), [rho0, p0], 0.05, 1e-11);
        assert!((est.params.rho() - rho).abs() < 1e-6, "seed {seed}: {} vs {rho}", est.params.rho());
        assert!((est.params.p() - p).abs() < 1e-6, "seed {seed}: {} vs {p}", est.params.p());
    }
}

#[test]
fn mql_matches_numerical_minimum() {
    for seed in 100..125 {
        let (s, p0, rho0) = random_series(seed, 10, 200);
        let xs = s.counts().to_vec();
        let [rc, pc] = nelder_mead(penalized(|p, r| weighted_ls(&xs, 10, p, r, |_| 1.0)), [rho0, p0], 0.05, 1e-11);
        let w = |x: u32| 1.0 / thinning_variance(x, 10, pc, rc);
        let [rho, p] = nelder_mead(penalized(|p, r| weighted_ls(&xs, 10, p, r, w)), [rc, pc], 0.05, 1e-11);
        let est = mql_estimate(&s).unwrap();
        assert!((est.params.rho() - rho).abs() < 1e-6, "seed {seed}: {} vs {rho}", est.params.rho());
        assert!((est.params.p() - p).abs() < 1e-6, "seed {seed}: {} vs {p}", est.params.p());
    }
}

#[test]
fn score_and_information_match_finite_differences() {
    for seed in 200..215 {
        let (s, p, rho) = random_series(seed, 10, 200);
        let xs = s.counts().to_vec();
        let d = cml_derivatives(&s, &BarParams::new(p, rho).unwrap());
        let ll = |p: f64, r: f64| direct_loglik(&xs, 10, p, r);
        assert!((d.loglik - ll(p, rho)).abs() < 1e-9 * ll(p, rho).abs());
        let h = 1e-5;
        let fd_rho = (ll(p, rho + h) - ll(p, rho - h)) / (2.0 * h);
        let fd_p = (ll(p + h, rho) - ll(p - h, rho)) / (2.0 * h);
        for (an, fd) in [(d.score[0], fd_rho), (d.score[1], fd_p)] {
            assert!((an - fd).abs() <= 1e-6 * fd.abs().max(1.0), "seed {seed}: {an} vs {fd}");
        }
        // observed information is −(1/m)·Hessian
        let hh = 1e-4;
        let m = (xs.len() - 1) as f64;
        let d2_rr = (ll(p, rho + hh) - 2.0 * ll(p, rho) + ll(p, rho - hh)) / (hh * hh);
        let d2_pp = (ll(p + hh, rho) - 2.0 * ll(p, rho) + ll(p - hh, rho)) / (hh * hh);
        let d2_rp = (ll(p + hh, rho + hh) - ll(p + hh, rho - hh) - ll(p - hh, rho + hh) + ll(p - hh, rho - hh))
            / (4.0 * hh * hh);
        let info = d.observed_info;
        for (an, fd) in [(info.a, -d2_rr / m), (info.c, -d2_pp / m), (info.b, -d2_rp / m)] {
            assert!((an - fd).abs() < 1e-4 * fd.abs().max(1.0), "seed {seed}: {an} vs {fd}");
        }
    }
}

#[test]
fn cml_matches_numerical_maximum() {
    for seed in 300..310 {
        let (s, p0, rho0) = random_series(seed, 10, 200);
        let xs = s.counts().to_vec();
        let [rho, p] = nelder_mead(penalized(|p, r| -direct_loglik(&xs, 10, p, r)), [rho0, p0], 0.05, 1e-10);
        let est = cml_estimate(&s, 1).unwrap();
        assert!(est.converged);
        assert!((est.params.rho() - rho).abs() < 1e-5, "seed {seed}: {} vs {rho}", est.params.rho());
        assert!((est.params.p() - p).abs() < 1e-5, "seed {seed}: {} vs {p}", est.params.p());
        assert!((est.objective_value - cml_loglik(&s, &est.params, 1)).abs() < 1e-9);
    }
}

/// With `N = 1` the process is a two-state chain with `P(1|0) = β`,
/// `P(1|1) = α`, whose MLE is the pair of empirical transition frequencies.
#[test]
fn binary_chain_mle() {
    let mut checked = 0;
    for seed in 400..440 {
        let (s, _, _) = random_series(seed, 1, 400);
        let mut c = [[0u32; 2]; 2];
        for w in s.counts().windows(2) {
            c[w[0] as usize][w[1] as usize] += 1;
        }
        let beta = f64::from(c[0][1]) / f64::from(c[0][0] + c[0][1]);
        let alpha = f64::from(c[1][1]) / f64::from(c[1][0] + c[1][1]);
        let rho = alpha - beta;
        let p = beta / (1.0 - rho);
        if !in_domain(p, rho) || rho.abs() > 0.9 {
            continue;
        }
        let est = cml_estimate(&s, 1).unwrap();
        assert!((est.params.rho() - rho).abs() < 1e-6, "seed {seed}: {} vs {rho}", est.params.rho());
        assert!((est.params.p() - p).abs() < 1e-6, "seed {seed}: {} vs {p}", est.params.p());
        checked += 1;
    }
    assert!(checked >= 30);
}
