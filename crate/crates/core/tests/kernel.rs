// SPDX-License-Identifier: MIT OR Apache-2.0

mod common;

use boundedcp::bar_model::{bar_step, conditional_mean, conditional_variance, transition_matrix, transition_prob};
use boundedcp::rng::stream_rng;
use boundedcp::BarParams;
use common::{kernel_by_convolution, thinning_variance};
use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn random_params(rng: &mut impl Rng) -> BarParams {
    let p: f64 = rng.random_range(0.02..0.98);
    let lo = (-p / (1.0 - p)).max(-(1.0 - p) / p);
    let rho: f64 = rng.random_range(lo + 1e-3..0.999);
    BarParams::new(p, rho).unwrap()
}

#[test]
fn one_step_kernel_matches_convolution() {
    let mut rng = stream_rng(1, 0);
    for _ in 0..50 {
        let q = random_params(&mut rng);
        for nb in 1..=10 {
            for i in 0..=nb {
                for j in 0..=nb {
                    let want = kernel_by_convolution(i, j, nb, q.p(), q.rho());
                    assert!((transition_prob(i, j, 1, &q, nb) - want).abs() < 1e-12);
                }
            }
        }
    }
}

#[test]
fn moments_match_thinning_representation() {
    let mut rng = stream_rng(2, 0);
    for _ in 0..50 {
        let q = random_params(&mut rng);
        let nb = 10;
        let k = transition_matrix(&q, nb, 1);
        for i in 0..=nb {
            let row = &k[(i * (nb + 1)) as usize..((i + 1) * (nb + 1)) as usize];
            let mean: f64 = row.iter().enumerate().map(|(j, w)| j as f64 * w).sum();
            let var: f64 = row.iter().enumerate().map(|(j, w)| (j as f64 - mean).powi(2) * w).sum();
            let direct_mean = f64::from(i) * q.alpha() + f64::from(nb - i) * q.beta();
            assert!((mean - direct_mean).abs() < 1e-10);
            assert!((var - thinning_variance(i, nb, q.p(), q.rho())).abs() < 1e-10);
            assert!((conditional_mean(i, &q, nb) - direct_mean).abs() < 1e-10);
            assert!((conditional_variance(i, &q, nb) - var).abs() < 1e-10);
        }
    }
}

#[test]
fn simulated_steps_follow_the_kernel() {
    let nb = 10;
    let draws = 20_000;
    // 0.1% level per cell; 12 independent cells
    let mut rng = stream_rng(3, 0);
    for (p, rho) in [(0.3, 0.1), (0.6, -0.1), (0.5, 0.6)] {
        let q = BarParams::new(p, rho).unwrap();
        for i in [0, 4, 10, 7] {
            let mut hits = vec![0usize; (nb + 1) as usize];
            for _ in 0..draws {
                hits[bar_step(i, &q, nb, &mut rng) as usize] += 1;
            }
            // pool cells with expected count < 5 into their neighbour
            let mut obs = Vec::new();
            let mut exp = Vec::new();
            let (mut o_acc, mut e_acc) = (0.0, 0.0);
            for j in 0..=nb {
                o_acc += hits[j as usize] as f64;
                e_acc += draws as f64 * kernel_by_convolution(i, j, nb, p, rho);
                if e_acc >= 5.0 {
                    obs.push(o_acc);
                    exp.push(e_acc);
                    (o_acc, e_acc) = (0.0, 0.0);
                }
            }
            if let (Some(lo), Some(le)) = (obs.last_mut(), exp.last_mut()) {
                *lo += o_acc;
                *le += e_acc;
            }
            let stat: f64 = obs.iter().zip(&exp).map(|(o, e)| (o - e).powi(2) / e).sum();
            let df = (obs.len() - 1) as f64;
            let crit = ChiSquared::new(df).unwrap().inverse_cdf(0.999);
            assert!(stat < crit, "(p, rho, i) = ({p}, {rho}, {i}): chi2 {stat:.2} ≥ {crit:.2} on {df} df");
        }
    }
}

#[test]
fn large_bound_kernel_is_normalized() {
    let q = BarParams::new(0.37, 0.55).unwrap();
    for nb in [31, 60, 200] {
        let k = transition_matrix(&q, nb, 1);
        for i in [0, nb / 3, nb] {
            let row = &k[(i * (nb + 1)) as usize..((i + 1) * (nb + 1)) as usize];
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9, "N = {nb}, i = {i}");
        }
    }
}
