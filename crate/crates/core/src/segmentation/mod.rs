// SPDX-License-Identifier: MIT OR Apache-2.0

//! Multiple change-point estimation by minimum description length.
//!
//! For `m ≥ 1` change-points with segment lengths `n_j`,
//! `MDL = ln m + (m+1) ln n + Σ_j ln n_j − Σ_j L_j`, where `L_j` is the
//! conditional log-likelihood of segment `j` at that segment's estimate,
//! conditioning on the segment's own first observation by default (see
//! [`SegmentConditioning`]). Segments shorter than
//! `⌈n·ε_λ⌉` make the score `+∞`. With no change-point the score is
//! `2 ln n − L`.
//!
//! The location search for each `m` is a genetic algorithm ([`ga_search`]);
//! [`s_ga`] walks `m = 1, 2, …` and stops as soon as the best score stops
//! improving, [`exhaustive_m_sweep`] tries every `m` up to the cap.

mod ga;

pub use ga::{ga_search, GaLevel};

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::bar_model::BoundedSeries;
use crate::error::{BarError, Result};
use crate::estimation::{cls_estimate_counts, cml_estimate_counts, loglik_counts, ParamEstimate, TransitionCounts};
use crate::rng::stream_rng;

/// How a segment's log-likelihood is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SegmentLikelihood {
    /// Conditional likelihood evaluated at the closed-form CLS estimate.
    #[default]
    ClsPlugin,
    /// Conditional likelihood maximized per segment.
    FullCml,
}

/// Which transitions a segment owns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SegmentConditioning {
    /// Each segment starts afresh from its own first observation, so a
    /// segment of length `n_j` scores `n_j − 1` transitions.
    #[default]
    OwnFirstObservation,
    /// Segment `j ≥ 2` also scores the transition from `x_{τ_{j−1}}` into its
    /// first observation, so every segmentation scores all `n − 1`
    /// transitions. Detects more weak changes and fewer spurious ones.
    PreviousObservation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaConfig {
    /// Population is `max(4, population_scale · m)`.
    pub population_scale: usize,
    pub crossover_fraction: f64,
    pub max_generations: usize,
    /// Stop a level early after this many generations without improvement.
    pub stall_generations: Option<usize>,
    /// Minimum relative spacing; `None` means `10/n`.
    pub epsilon_lambda: Option<f64>,
    pub max_changepoints_cap: usize,
    pub mutation_rate: f64,
    pub tournament_size: usize,
    pub seed: u64,
    /// Also score the no-change model and prefer it when it is no worse.
    pub compare_m0: bool,
    pub likelihood: SegmentLikelihood,
    pub conditioning: SegmentConditioning,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population_scale: 10,
            crossover_fraction: 0.55,
            max_generations: 300,
            stall_generations: Some(50),
            epsilon_lambda: None,
            max_changepoints_cap: 10,
            mutation_rate: 0.1,
            tournament_size: 3,
            seed: 0,
            compare_m0: false,
            likelihood: SegmentLikelihood::ClsPlugin,
            conditioning: SegmentConditioning::OwnFirstObservation,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(BarError::InvalidConfig(msg));
        if self.population_scale == 0 {
            return bad("population scale must be positive".into());
        }
        if !(self.crossover_fraction > 0.0 && self.crossover_fraction < 1.0) {
            return bad(format!("crossover fraction must lie in (0, 1), got {}", self.crossover_fraction));
        }
        if let Some(e) = self.epsilon_lambda {
            if !(e > 0.0 && e < 1.0) {
                return bad(format!("epsilon_lambda must lie in (0, 1), got {e}"));
            }
        }
        if !(self.mutation_rate > 0.0 && self.mutation_rate <= 1.0) {
            return bad(format!("mutation rate must lie in (0, 1], got {}", self.mutation_rate));
        }
        if self.tournament_size == 0 {
            return bad("tournament size must be positive".into());
        }
        Ok(())
    }

    pub fn epsilon_for(&self, n: usize) -> f64 {
        self.epsilon_lambda.unwrap_or(10.0 / n as f64)
    }

    pub fn population_for(&self, m: usize) -> usize {
        (self.population_scale * m).max(4)
    }
}

/// `⌈n·ε_λ⌉`, at least 2 so every segment has a transition.
pub fn min_spacing(n: usize, epsilon_lambda: f64) -> usize {
    ((n as f64 * epsilon_lambda - 1e-9).ceil() as usize).max(2)
}

/// Largest `m` the sweep may try: `min(⌊1/ε_λ⌋ + 1, cap, ⌊n/g⌋ − 1)`.
pub fn max_feasible_changepoints(n: usize, epsilon_lambda: f64, cap: usize) -> usize {
    let m0 = (1.0 / epsilon_lambda + 1e-9).floor() as usize + 1;
    let g = min_spacing(n, epsilon_lambda);
    m0.min(cap).min((n / g).saturating_sub(1))
}

/// 1-based inclusive observation ranges of the `m+1` segments.
pub fn segment_ranges(n: usize, taus: &[usize]) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(taus.len() + 1);
    let mut start = 1;
    for &t in taus.iter().chain(std::iter::once(&n)) {
        out.push((start, t));
        start = t + 1;
    }
    out
}

/// Whether every segment is at least `g` long and the locations are ordered.
pub fn spacing_ok(n: usize, taus: &[usize], g: usize) -> bool {
    let mut prev = 0;
    for &t in taus.iter().chain(std::iter::once(&n)) {
        if t < prev + g {
            return false;
        }
        prev = t;
    }
    true
}

/// `ln m + (m+1) ln n + Σ ln n_j`, or `2 ln n` when `m = 0`.
pub fn mdl_penalty(n: usize, taus: &[usize]) -> f64 {
    let ln_n = (n as f64).ln();
    if taus.is_empty() {
        return 2.0 * ln_n;
    }
    let m = taus.len() as f64;
    m.ln()
        + (m + 1.0) * ln_n
        + segment_ranges(n, taus).iter().map(|&(a, b)| ((b - a + 1) as f64).ln()).sum::<f64>()
}

/// Transitions owned by the segment covering observations `a..=b`.
pub fn segment_counts(series: &BoundedSeries, (a, b): (usize, usize), conditioning: SegmentConditioning) -> TransitionCounts {
    let first = match conditioning {
        SegmentConditioning::PreviousObservation if a > 1 => a - 2,
        _ => a - 1,
    };
    TransitionCounts::from_slice(&series.counts()[first..b], series.upper_bound())
}

/// One segment's fitted estimate and log-likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentFit {
    pub estimate: ParamEstimate,
    pub loglik: f64,
}

fn fit_one(
    series: &BoundedSeries,
    range: (usize, usize),
    likelihood: SegmentLikelihood,
    conditioning: SegmentConditioning,
) -> Result<SegmentFit> {
    let counts = segment_counts(series, range, conditioning);
    let cls = cls_estimate_counts(&counts, range)?;
    match likelihood {
        SegmentLikelihood::ClsPlugin => Ok(SegmentFit { loglik: loglik_counts(&counts, &cls.params), estimate: cls }),
        SegmentLikelihood::FullCml => {
            let est = cml_estimate_counts(&counts, range, Some(cls.params))?;
            Ok(SegmentFit { loglik: est.objective_value, estimate: est })
        }
    }
}

/// Per-segment estimates for the segmentation `taus`.
pub fn fit_segments(
    series: &BoundedSeries,
    taus: &[usize],
    likelihood: SegmentLikelihood,
    conditioning: SegmentConditioning,
) -> Result<Vec<SegmentFit>> {
    segment_ranges(series.len(), taus).into_iter().map(|r| fit_one(series, r, likelihood, conditioning)).collect()
}

/// Description length of `taus` with the given per-segment estimates.
pub fn mdl_value(
    series: &BoundedSeries,
    taus: &[usize],
    estimates: &[ParamEstimate],
    epsilon_lambda: f64,
    conditioning: SegmentConditioning,
) -> f64 {
    let n = series.len();
    if estimates.len() != taus.len() + 1 {
        return f64::INFINITY;
    }
    if !taus.is_empty() && !spacing_ok(n, taus, min_spacing(n, epsilon_lambda)) {
        return f64::INFINITY;
    }
    let ll: f64 = segment_ranges(n, taus)
        .into_iter()
        .zip(estimates)
        .map(|(r, e)| loglik_counts(&segment_counts(series, r, conditioning), &e.params))
        .sum();
    mdl_penalty(n, taus) - ll
}

/// Memoized `ln n_j − L_j` per segment; `+∞` when the segment cannot be fitted.
pub struct SegmentScorer<'a> {
    series: &'a BoundedSeries,
    likelihood: SegmentLikelihood,
    conditioning: SegmentConditioning,
    cache: HashMap<(usize, usize), f64>,
}

impl<'a> SegmentScorer<'a> {
    pub fn new(series: &'a BoundedSeries, likelihood: SegmentLikelihood, conditioning: SegmentConditioning) -> Self {
        Self { series, likelihood, conditioning, cache: HashMap::new() }
    }

    pub fn segment_cost(&mut self, range: (usize, usize)) -> f64 {
        let (series, likelihood, conditioning) = (self.series, self.likelihood, self.conditioning);
        *self.cache.entry(range).or_insert_with(|| match fit_one(series, range, likelihood, conditioning) {
            Ok(f) => ((range.1 - range.0 + 1) as f64).ln() - f.loglik,
            Err(_) => f64::INFINITY,
        })
    }

    /// Full MDL of `taus` (spacing assumed checked by the caller).
    pub fn mdl(&mut self, taus: &[usize]) -> f64 {
        let n = self.series.len();
        let ln_n = (n as f64).ln();
        let mut total = if taus.is_empty() { ln_n } else { (taus.len() as f64).ln() + (taus.len() as f64 + 1.0) * ln_n };
        for r in segment_ranges(n, taus) {
            total += self.segment_cost(r);
            if total == f64::INFINITY {
                break;
            }
        }
        total
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelLog {
    pub m: usize,
    pub best_mdl: f64,
    pub best_taus: Vec<usize>,
    /// Best score after each generation (index 0 is the initial population).
    pub history: Vec<f64>,
}

/// Fitted segmentation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdlFit {
    pub m_hat: usize,
    pub tau_hat: Vec<usize>,
    pub lambda_hat: Vec<f64>,
    pub segment_estimates: Vec<ParamEstimate>,
    pub per_segment_loglik: Vec<f64>,
    pub mdl: f64,
    pub epsilon_lambda: f64,
    pub min_spacing: usize,
    pub likelihood: SegmentLikelihood,
    pub conditioning: SegmentConditioning,
    /// MDL of the no-change model, when it was scored.
    pub mdl_m0: Option<f64>,
    pub search_log: Vec<LevelLog>,
}

impl MdlFit {
    pub fn total_loglik(&self) -> f64 {
        self.per_segment_loglik.iter().sum()
    }
}

fn build_fit(
    series: &BoundedSeries,
    taus: Vec<usize>,
    config: &GaConfig,
    mdl_m0: Option<f64>,
    search_log: Vec<LevelLog>,
) -> Result<MdlFit> {
    let n = series.len();
    let eps = config.epsilon_for(n);
    let fits = fit_segments(series, &taus, config.likelihood, config.conditioning)?;
    let segment_estimates: Vec<ParamEstimate> = fits.iter().map(|f| f.estimate).collect();
    let mdl = mdl_value(series, &taus, &segment_estimates, eps, config.conditioning);
    Ok(MdlFit {
        m_hat: taus.len(),
        lambda_hat: taus.iter().map(|&t| t as f64 / n as f64).collect(),
        tau_hat: taus,
        per_segment_loglik: fits.iter().map(|f| f.loglik).collect(),
        segment_estimates,
        mdl,
        epsilon_lambda: eps,
        min_spacing: min_spacing(n, eps),
        likelihood: config.likelihood,
        conditioning: config.conditioning,
        mdl_m0,
        search_log,
    })
}

fn log_of(level: &GaLevel) -> LevelLog {
    LevelLog { m: level.m, best_mdl: level.mdl, best_taus: level.taus.clone(), history: level.history.clone() }
}

/// Shared driver: `early_stop` selects the S-GA break rule.
fn sweep(series: &BoundedSeries, config: &GaConfig, early_stop: bool) -> Result<MdlFit> {
    config.validate()?;
    let n = series.len();
    let eps = config.epsilon_for(n);
    if !(eps > 0.0 && eps < 1.0) {
        return Err(BarError::InvalidConfig(format!("epsilon_lambda must lie in (0, 1), got {eps}")));
    }
    let max_m = max_feasible_changepoints(n, eps, config.max_changepoints_cap);
    let mut scorer = SegmentScorer::new(series, config.likelihood, config.conditioning);
    let mdl_m0 = config.compare_m0.then(|| scorer.mdl(&[]));
    if max_m == 0 {
        return match mdl_m0 {
            Some(v) if v.is_finite() => build_fit(series, Vec::new(), config, mdl_m0, Vec::new()),
            _ => Err(BarError::Infeasible(format!(
                "n = {n} cannot host a change-point with minimum spacing {}",
                min_spacing(n, eps)
            ))),
        };
    }
    let mut log = Vec::new();
    let mut best: Option<GaLevel> = None;
    for m in 1..=max_m {
        let level = ga_search(series, m, config, &mut stream_rng(config.seed, m as u64), &mut scorer)?;
        log.push(log_of(&level));
        match &best {
            None => best = Some(level),
            Some(b) if level.mdl < b.mdl => best = Some(level),
            Some(_) if early_stop => break,
            Some(_) => {}
        }
    }
    let best = best.expect("at least one level");
    let taus = match mdl_m0 {
        Some(v) if v <= best.mdl => Vec::new(),
        _ if best.mdl.is_finite() => best.taus,
        _ => return Err(BarError::Infeasible("no segmentation has a finite description length".into())),
    };
    build_fit(series, taus, config, mdl_m0, log)
}

/// Early-stopping sweep over `m`, each level searched by [`ga_search`].
///
/// Level `m` draws from RNG stream `m` of `config.seed`, so its result does
/// not depend on which other levels were run.
pub fn s_ga(series: &BoundedSeries, config: &GaConfig) -> Result<MdlFit> {
    sweep(series, config, true)
}

/// Like [`s_ga`] but tries every feasible `m` up to the cap.
pub fn exhaustive_m_sweep(series: &BoundedSeries, config: &GaConfig) -> Result<MdlFit> {
    sweep(series, config, false)
}
