// SPDX-License-Identifier: MIT OR Apache-2.0

//! CUSUM tests for a single change in `θ = (ρ, p)`.
//!
//! `C_n = max_k (k²/n) (θ̂_k − θ̂_n)ᵀ M (θ̂_k − θ̂_n)`, where `θ̂_k` is the
//! estimate from `x₁…x_k` and `M` is the full-sample precision: `V̂ Ŵ⁻¹ V̂`
//! for CLS and MQL, `Î` for CML. Under no change the statistic converges to
//! `sup_λ ‖B₂(λ)‖²` for a two-dimensional Brownian bridge.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bar_model::BoundedSeries;
use crate::error::{BarError, Result};
use crate::estimation::{
    cls_estimate_counts, cml_derivatives_counts, cml_estimate_counts, mql_estimate_counts, Method, MqlFit,
    ParamEstimate, TransitionCounts,
};
use crate::linalg::Matrix2;
use crate::rng::stream_rng;

/// Prefixes with fewer transitions than this are never evaluated.
pub const MIN_PREFIX_TRANSITIONS: usize = 5;
pub const DEFAULT_K0: usize = 10;

pub const CRITICAL_VALUE_1PCT: f64 = 3.269;
pub const CRITICAL_VALUE_5PCT: f64 = 2.408;

/// Defaults for the simulated critical-value path.
pub const DEFAULT_CV_GRID: usize = 5000;
pub const DEFAULT_CV_REPS: usize = 100_000;
pub const DEFAULT_CV_SEED: u64 = 0x00b2_b1d6e;

/// Statistic of one sweep, before any decision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CusumStatistic {
    pub method: Method,
    pub statistic: f64,
    pub argmax_k: usize,
    pub k0: usize,
    /// Prefixes that were in range but had no usable estimate.
    pub skipped_prefixes: usize,
    pub full_sample: ParamEstimate,
    pub weight: Matrix2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticalValueSource {
    Table,
    Simulated { grid: usize, reps: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub statistic: f64,
    pub method: Method,
    pub gamma: f64,
    pub critical_value: f64,
    pub critical_value_source: CriticalValueSource,
    pub reject: bool,
    pub argmax_k: usize,
    pub k0: usize,
    pub skipped_prefixes: usize,
    pub full_sample: ParamEstimate,
}

/// Per visited state: `(i − Np̂, count, Σ residual, Σ residual²)` at `est`.
fn residual_rows(counts: &TransitionCounts, est: &ParamEstimate) -> Vec<(u32, f64, f64, f64, f64)> {
    let nb = f64::from(counts.upper_bound());
    let (p, rho) = (est.params.p(), est.params.rho());
    counts
        .rows()
        .map(|(i, n, s, ss)| {
            let mu = rho * f64::from(i) + nb * p * (1.0 - rho);
            (i, f64::from(i) - nb * p, n, s - n * mu, ss - 2.0 * mu * s + n * mu * mu)
        })
        .collect()
}

fn vw_cls_counts(counts: &TransitionCounts, est: &ParamEstimate) -> (Matrix2, Matrix2) {
    let m = counts.transitions() as f64;
    let c = f64::from(counts.upper_bound()) * (1.0 - est.params.rho());
    let (mut v11, mut v12, mut w11, mut w12, mut w22) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (_, dx, n, _, rss) in residual_rows(counts, est) {
        v11 += n * dx * dx;
        v12 += n * dx * c;
        w11 += rss * dx * dx;
        w12 += rss * dx * c;
        w22 += rss * c * c;
    }
    (Matrix2::new(v11 / m, v12 / m, c * c), Matrix2::new(w11 / m, w12 / m, w22 / m))
}

fn vw_mql_counts(counts: &TransitionCounts, fit: &MqlFit) -> Result<(Matrix2, Matrix2)> {
    let m = counts.transitions() as f64;
    let nb = counts.upper_bound();
    let c = f64::from(nb) * (1.0 - fit.estimate.params.rho());
    let (mut v11, mut v12, mut vd, mut w11, mut w12, mut w22) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for (i, dx, n, sum_s, rss) in residual_rows(counts, &fit.estimate) {
        let d = crate::estimation::mql_weight(i, &fit.pilot, nb)?;
        v11 += d * n * dx * dx;
        v12 += d * dx * (n * c + sum_s);
        vd += d * n;
        w11 += d * d * rss * dx * dx;
        w12 += d * d * rss * dx * c;
        w22 += d * d * rss * c * c;
    }
    Ok((Matrix2::new(v11 / m, v12 / m, c * c * vd / m), Matrix2::new(w11 / m, w12 / m, w22 / m)))
}

fn check_w(w: &Matrix2) -> Result<()> {
    let det = w.det();
    if !(det.abs() >= crate::linalg::SINGULAR_DET) {
        return Err(BarError::SingularMatrix(det));
    }
    Ok(())
}

/// `(V̂, Ŵ)` for the CLS statistic at `estimate`.
pub fn vw_hat_cls(series: &BoundedSeries, estimate: &ParamEstimate) -> Result<(Matrix2, Matrix2)> {
    let (v, w) = vw_cls_counts(&TransitionCounts::from_series(series), estimate);
    check_w(&w)?;
    Ok((v, w))
}

/// `(V̂, Ŵ)` for the MQL statistic; weights at the fit's CLS pilot.
pub fn vw_hat_mql(series: &BoundedSeries, fit: &MqlFit) -> Result<(Matrix2, Matrix2)> {
    let (v, w) = vw_mql_counts(&TransitionCounts::from_series(series), fit)?;
    check_w(&w)?;
    Ok((v, w))
}

fn precision_weight(v: &Matrix2, w: &Matrix2) -> Result<Matrix2> {
    check_w(w)?;
    Ok(Matrix2::sandwich(v, &w.inverse()?))
}

fn first_prefix(k0: usize) -> usize {
    k0.max(MIN_PREFIX_TRANSITIONS) + 1
}

/// Sweeps the prefixes, calling `estimate` on each prefix's counts in order.
fn sweep(
    series: &BoundedSeries,
    method: Method,
    k0: usize,
    full: ParamEstimate,
    weight: Matrix2,
    mut estimate: impl FnMut(&TransitionCounts, usize) -> Option<ParamEstimate>,
) -> Result<CusumStatistic> {
    let n = series.len();
    let start = first_prefix(k0);
    if start > n {
        return Err(BarError::InvalidSeries(format!(
            "series of length {n} is too short for k0 = {k0}"
        )));
    }
    let eig = weight.eigenvalues();
    debug_assert!(eig[0] >= -1e-10 * eig[1].abs().max(1.0), "weight matrix is indefinite: {eig:?}");
    let xs = series.counts();
    let nf = n as f64;
    let mut counts = TransitionCounts::new(series.upper_bound());
    let (mut best, mut argmax, mut skipped) = (0.0f64, start, 0usize);
    for k in 2..=n {
        counts.push(xs[k - 2], xs[k - 1]);
        if k < start {
            continue;
        }
        match estimate(&counts, k) {
            Some(e) => {
                let diff = [e.params.rho() - full.params.rho(), e.params.p() - full.params.p()];
                let kf = k as f64;
                let val = (kf * kf / nf * weight.quad_form(diff)).max(0.0);
                if val > best {
                    best = val;
                    argmax = k;
                }
            }
            None => skipped += 1,
        }
    }
    Ok(CusumStatistic { method, statistic: best, argmax_k: argmax, k0, skipped_prefixes: skipped, full_sample: full, weight })
}

pub fn cusum_cls(series: &BoundedSeries, k0: usize) -> Result<CusumStatistic> {
    let all = TransitionCounts::from_series(series);
    let full = cls_estimate_counts(&all, (1, series.len()))?;
    let (v, w) = vw_cls_counts(&all, &full);
    let weight = precision_weight(&v, &w)?;
    sweep(series, Method::Cls, k0, full, weight, |c, k| cls_estimate_counts(c, (1, k)).ok())
}

pub fn cusum_mql(series: &BoundedSeries, k0: usize) -> Result<CusumStatistic> {
    let all = TransitionCounts::from_series(series);
    let fit = mql_estimate_counts(&all, (1, series.len()))?;
    let (v, w) = vw_mql_counts(&all, &fit)?;
    let weight = precision_weight(&v, &w)?;
    sweep(series, Method::Mql, k0, fit.estimate, weight, |c, k| {
        mql_estimate_counts(c, (1, k)).ok().map(|f| f.estimate)
    })
}

pub fn cusum_cml(series: &BoundedSeries, k0: usize) -> Result<CusumStatistic> {
    let all = TransitionCounts::from_series(series);
    let full = cml_estimate_counts(&all, (1, series.len()), None)?;
    if !full.converged {
        return Err(BarError::OptimizerFailure("full-sample CML did not converge".into()));
    }
    let info = cml_derivatives_counts(&all, &full.params).observed_info;
    let mut warm = None;
    sweep(series, Method::Cml, k0, full, info, |c, k| {
        let e = cml_estimate_counts(c, (1, k), warm).ok()?;
        warm = Some(e.params);
        e.converged.then_some(e)
    })
}

pub fn cusum_statistic(series: &BoundedSeries, method: Method, k0: usize) -> Result<CusumStatistic> {
    match method {
        Method::Cls => cusum_cls(series, k0),
        Method::Mql => cusum_mql(series, k0),
        Method::Cml => cusum_cml(series, k0),
    }
}

fn validate_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma < 1.0 {
        Ok(())
    } else {
        Err(BarError::InvalidConfig(format!("significance level must lie in (0, 1), got {gamma}")))
    }
}

/// Tabulated critical values; other levels give `UnsupportedLevel`.
pub fn critical_value(gamma: f64) -> Result<f64> {
    validate_gamma(gamma)?;
    if (gamma - 0.01).abs() < 1e-12 {
        Ok(CRITICAL_VALUE_1PCT)
    } else if (gamma - 0.05).abs() < 1e-12 {
        Ok(CRITICAL_VALUE_5PCT)
    } else {
        Err(BarError::UnsupportedLevel(gamma))
    }
}

/// Table lookup, falling back to simulation with the default settings.
pub fn resolve_critical_value(gamma: f64) -> Result<(f64, CriticalValueSource)> {
    match critical_value(gamma) {
        Ok(cv) => Ok((cv, CriticalValueSource::Table)),
        Err(BarError::UnsupportedLevel(_)) => Ok((
            simulate_critical_value(gamma, DEFAULT_CV_GRID, DEFAULT_CV_REPS, DEFAULT_CV_SEED)?,
            CriticalValueSource::Simulated { grid: DEFAULT_CV_GRID, reps: DEFAULT_CV_REPS, seed: DEFAULT_CV_SEED },
        )),
        Err(e) => Err(e),
    }
}

/// Empirical `(1−γ)` quantiles of `sup_i ‖B₂(i/grid)‖²`, one per level.
///
/// The bridge is the random walk `S_i` of standard normal pairs, recentred as
/// `(S_i − (i/grid) S_grid) / √grid`. Replication `r` draws from stream `r`.
pub fn simulate_critical_values(gammas: &[f64], grid: usize, reps: usize, seed: u64) -> Result<Vec<f64>> {
    for &g in gammas {
        validate_gamma(g)?;
    }
    if grid == 0 || reps == 0 {
        return Err(BarError::InvalidConfig("grid and reps must be positive".into()));
    }
    let mut sups: Vec<f64> = (0..reps)
        .into_par_iter()
        .map_init(
            || vec![[0.0f64; 2]; grid],
            |path, r| {
                let mut rng = stream_rng(seed, r as u64);
                let mut acc = [0.0f64; 2];
                for slot in path.iter_mut() {
                    let z0: f64 = StandardNormal.sample(&mut rng);
                    let z1: f64 = StandardNormal.sample(&mut rng);
                    acc[0] += z0;
                    acc[1] += z1;
                    *slot = acc;
                }
                let g = grid as f64;
                let mut sup = 0.0f64;
                for (i, s) in path.iter().enumerate() {
                    let frac = (i + 1) as f64 / g;
                    let b0 = s[0] - frac * acc[0];
                    let b1 = s[1] - frac * acc[1];
                    sup = sup.max(b0 * b0 + b1 * b1);
                }
                sup / g
            },
        )
        .collect();
    sups.sort_by(f64::total_cmp);
    Ok(gammas
        .iter()
        .map(|&g| {
            let idx = ((1.0 - g) * reps as f64).ceil() as usize;
            sups[idx.clamp(1, reps) - 1]
        })
        .collect())
}

pub fn simulate_critical_value(gamma: f64, grid: usize, reps: usize, seed: u64) -> Result<f64> {
    Ok(simulate_critical_values(&[gamma], grid, reps, seed)?[0])
}

pub fn decide(stat: &CusumStatistic, gamma: f64, critical_value: f64, source: CriticalValueSource) -> TestOutcome {
    TestOutcome {
        statistic: stat.statistic,
        method: stat.method,
        gamma,
        critical_value,
        critical_value_source: source,
        reject: stat.statistic > critical_value,
        argmax_k: stat.argmax_k,
        k0: stat.k0,
        skipped_prefixes: stat.skipped_prefixes,
        full_sample: stat.full_sample,
    }
}

pub fn run_test(series: &BoundedSeries, method: Method, gamma: f64, k0: usize) -> Result<TestOutcome> {
    let (cv, source) = resolve_critical_value(gamma)?;
    let stat = cusum_statistic(series, method, k0)?;
    Ok(decide(&stat, gamma, cv, source))
}
