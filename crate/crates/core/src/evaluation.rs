// SPDX-License-Identifier: MIT OR Apache-2.0

//! Accuracy metrics and Monte Carlo harnesses.
//!
//! The harnesses parallelize over replications. Replication `r` at sample
//! size `n` simulates from stream `r` of `derive_seed(seed, n)`, and results
//! are reduced in replication order, so a report depends only on the
//! configuration, not on the thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bar_model::{simulate_mcp_bar, BarParams, BoundedSeries, InitialState, SegmentedModel, Stitching};
use crate::cusum::{cusum_statistic, resolve_critical_value, CriticalValueSource, DEFAULT_K0};
use crate::error::{BarError, Result};
use crate::estimation::{Method, TransitionCounts};
use crate::rng::{derive_seed, stream_rng};
use crate::segmentation::{s_ga, segment_ranges, GaConfig, MdlFit};

/// `sup_{b∈b_set} inf_{a∈a_set} |a − b|`.
///
/// With truth `λ⁰` and estimate `λ̂`, `zeta(λ⁰, λ̂)` is the under-segmentation
/// error and `zeta(λ̂, λ⁰)` the over-segmentation error.
pub fn zeta(a_set: &[f64], b_set: &[f64]) -> Result<f64> {
    if a_set.is_empty() || b_set.is_empty() {
        return Err(BarError::EmptySet);
    }
    Ok(b_set.iter().map(|&b| nearest(a_set, b)).fold(0.0, f64::max))
}

/// Mean over true locations of the distance to the nearest estimate.
pub fn distance_d(est: &[f64], truth: &[f64]) -> Result<f64> {
    if est.is_empty() || truth.is_empty() {
        return Err(BarError::EmptySet);
    }
    Ok(truth.iter().map(|&t| nearest(est, t)).sum::<f64>() / truth.len() as f64)
}

fn nearest(set: &[f64], x: f64) -> f64 {
    set.iter().map(|&a| (a - x).abs()).fold(f64::INFINITY, f64::min)
}

/// Compensated running sum.
#[derive(Debug, Default, Clone, Copy)]
struct Kahan {
    sum: f64,
    c: f64,
}

impl Kahan {
    fn add(&mut self, x: f64) {
        let y = x - self.c;
        let t = self.sum + y;
        self.c = (t - self.sum) - y;
        self.sum = t;
    }
}

// ---------------------------------------------------------------------------
// Scenarios

#[derive(Debug, Clone, Copy)]
enum Layout {
    /// One stationary segment.
    Stationary,
    /// One change at `⌊n/2⌋`.
    Midpoint,
    /// Tabulated locations per sample size.
    Table(&'static [(usize, &'static [usize])]),
}

/// A named simulation design with `N = 10`.
#[derive(Debug, Clone, Copy)]
pub struct Scenario {
    pub id: &'static str,
    pub description: &'static str,
    /// `(p, ρ)` per segment.
    segments: &'static [(f64, f64)],
    layout: Layout,
}

const A_LOCATIONS: &[(usize, &[usize])] = &[(200, &[70, 140]), (500, &[150, 350]), (800, &[300, 450])];
const B_LOCATIONS: &[(usize, &[usize])] =
    &[(200, &[50, 100, 150]), (500, &[100, 225, 390]), (800, &[200, 400, 650])];

/// Sample size whose layout is rescaled for untabulated `n`.
const REFERENCE_N: usize = 500;

pub const SCENARIO_UPPER_BOUND: u32 = 10;

macro_rules! scenario {
    ($id:literal, $desc:literal, $layout:expr, [$(($p:expr, $r:expr)),+]) => {
        Scenario { id: $id, description: $desc, segments: &[$(($p, $r)),+], layout: $layout }
    };
}

pub const SCENARIOS: &[Scenario] = &[
    scenario!("T1", "no change, (rho, p) = (-0.1, 0.6)", Layout::Stationary, [(0.6, -0.1)]),
    scenario!("T2", "no change, (rho, p) = (0.1, 0.3)", Layout::Stationary, [(0.3, 0.1)]),
    scenario!("T3", "no change, (rho, p) = (0.4, 0.3)", Layout::Stationary, [(0.3, 0.4)]),
    scenario!("T11", "rho change at n/2", Layout::Midpoint, [(0.6, -0.1), (0.6, 0.5)]),
    scenario!("T12", "p change at n/2", Layout::Midpoint, [(0.6, -0.1), (0.3, -0.1)]),
    scenario!("T13", "rho and p change at n/2", Layout::Midpoint, [(0.6, -0.1), (0.3, 0.1)]),
    scenario!("T21", "rho change at n/2", Layout::Midpoint, [(0.3, 0.1), (0.3, 0.5)]),
    scenario!("T22", "p change at n/2", Layout::Midpoint, [(0.3, 0.1), (0.6, 0.1)]),
    scenario!("T23", "rho and p change at n/2", Layout::Midpoint, [(0.3, 0.1), (0.5, 0.3)]),
    scenario!("T31", "rho change at n/2", Layout::Midpoint, [(0.3, 0.4), (0.3, -0.2)]),
    scenario!("T32", "p change at n/2", Layout::Midpoint, [(0.3, 0.4), (0.6, 0.4)]),
    scenario!("T33", "rho and p change at n/2", Layout::Midpoint, [(0.3, 0.4), (0.6, -0.2)]),
    scenario!("A1", "two changes, rho only", Layout::Table(A_LOCATIONS), [(0.5, -0.2), (0.5, 0.6), (0.5, 0.1)]),
    scenario!("A2", "two changes, p only", Layout::Table(A_LOCATIONS), [(0.3, 0.2), (0.5, 0.2), (0.7, 0.2)]),
    scenario!("A3", "two changes, rho and p", Layout::Table(A_LOCATIONS), [(0.3, -0.2), (0.5, 0.6), (0.7, 0.3)]),
    scenario!(
        "B1",
        "three changes, rho only",
        Layout::Table(B_LOCATIONS),
        [(0.5, -0.2), (0.5, 0.6), (0.5, 0.1), (0.5, 0.4)]
    ),
    scenario!(
        "B2",
        "three changes, p only",
        Layout::Table(B_LOCATIONS),
        [(0.2, 0.3), (0.4, 0.3), (0.6, 0.3), (0.8, 0.3)]
    ),
    scenario!(
        "B3",
        "three changes, rho and p",
        Layout::Table(B_LOCATIONS),
        [(0.3, -0.2), (0.4, -0.1), (0.6, 0.2), (0.8, 0.4)]
    ),
];

/// Case-insensitive lookup.
pub fn scenario(id: &str) -> Option<&'static Scenario> {
    SCENARIOS.iter().find(|s| s.id.eq_ignore_ascii_case(id.trim()))
}

pub fn scenario_ids() -> Vec<&'static str> {
    SCENARIOS.iter().map(|s| s.id).collect()
}

impl Scenario {
    /// Change-point locations at sample size `n`. Untabulated sizes reuse the
    /// `n = 500` fractions, rounded.
    pub fn change_points(&self, n: usize) -> Vec<usize> {
        match self.layout {
            Layout::Stationary => Vec::new(),
            Layout::Midpoint => vec![n / 2],
            Layout::Table(rows) => match rows.iter().find(|(size, _)| *size == n) {
                Some((_, taus)) => taus.to_vec(),
                None => {
                    let (_, reference) = rows.iter().find(|(size, _)| *size == REFERENCE_N).expect("reference row");
                    reference.iter().map(|&t| (t as f64 * n as f64 / REFERENCE_N as f64).round() as usize).collect()
                }
            },
        }
    }

    pub fn model(&self, n: usize) -> Result<SegmentedModel> {
        let params = self.segments.iter().map(|&(p, rho)| BarParams::new(p, rho)).collect::<Result<Vec<_>>>()?;
        let taus = self.change_points(n);
        if taus.first() == Some(&0) || taus.last().is_some_and(|&t| t >= n) {
            return Err(BarError::InvalidConfig(format!("scenario {} does not fit in n = {n}", self.id)));
        }
        SegmentedModel::new(SCENARIO_UPPER_BOUND, taus, params)
    }
}

/// Where the true model comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelSource {
    /// A registered scenario id such as `"T21"` or `"A2"`.
    Scenario(String),
    /// A fixed model; change-points are absolute indices.
    Custom(SegmentedModel),
}

impl ModelSource {
    pub fn label(&self) -> String {
        match self {
            ModelSource::Scenario(id) => scenario(id).map_or_else(|| id.clone(), |s| s.id.to_string()),
            ModelSource::Custom(_) => "custom".into(),
        }
    }

    pub fn model(&self, n: usize) -> Result<SegmentedModel> {
        match self {
            ModelSource::Scenario(id) => scenario(id)
                .ok_or_else(|| {
                    BarError::InvalidConfig(format!(
                        "unknown scenario '{id}'; valid ids: {}",
                        scenario_ids().join(", ")
                    ))
                })?
                .model(n),
            ModelSource::Custom(m) => {
                if m.change_points().last().is_some_and(|&t| t >= n) {
                    return Err(BarError::InvalidConfig(format!("custom model does not fit in n = {n}")));
                }
                Ok(m.clone())
            }
        }
    }
}

/// Monte Carlo study settings shared by both harnesses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: ModelSource,
    pub sample_sizes: Vec<usize>,
    pub replications: usize,
    pub seed: u64,
    /// CUSUM methods (size/power only).
    pub methods: Vec<Method>,
    /// Significance levels (size/power only).
    pub gammas: Vec<f64>,
    pub k0: usize,
    /// Segmentation settings; `seed` is overridden per replication.
    pub ga: GaConfig,
}

impl ExperimentConfig {
    pub fn new(model: ModelSource, sample_sizes: Vec<usize>, replications: usize, seed: u64) -> Self {
        Self {
            model,
            sample_sizes,
            replications,
            seed,
            methods: Method::ALL.to_vec(),
            gammas: vec![0.01, 0.05],
            k0: DEFAULT_K0,
            ga: GaConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(BarError::InvalidConfig("replication count must be ≥ 1".into()));
        }
        if self.sample_sizes.is_empty() {
            return Err(BarError::InvalidConfig("at least one sample size is required".into()));
        }
        if let Some(&n) = self.sample_sizes.iter().find(|&&n| n < 2) {
            return Err(BarError::InvalidConfig(format!("sample size must be ≥ 2, got {n}")));
        }
        if let Some(&g) = self.gammas.iter().find(|&&g| !(g > 0.0 && g < 1.0)) {
            return Err(BarError::InvalidConfig(format!("significance level must lie in (0, 1), got {g}")));
        }
        for &n in &self.sample_sizes {
            self.model.model(n)?;
        }
        self.ga.validate()
    }

    fn series(&self, model: &SegmentedModel, n: usize, rep: usize) -> Result<BoundedSeries> {
        let mut rng = stream_rng(derive_seed(self.seed, n as u64), rep as u64);
        simulate_mcp_bar(model, n, &mut rng, InitialState::Stationary, Stitching::Continuous)
    }
}

// ---------------------------------------------------------------------------
// Reports

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectionRate {
    pub method: Method,
    pub gamma: f64,
    pub critical_value: f64,
    pub critical_value_source: CriticalValueSource,
    /// `rejections / valid`.
    pub rate: f64,
    pub rejections: usize,
    pub valid: usize,
    /// Replications where the statistic could not be computed.
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentationMetrics {
    pub m_true: usize,
    /// `m_histogram[m]` = replications with `m̂ = m`.
    pub m_histogram: Vec<usize>,
    /// Fraction of successful replications with `m̂ = m₀`.
    pub cr_m: f64,
    /// Means over replications where both location sets are non-empty;
    /// `None` when there were none.
    pub zeta_under: Option<f64>,
    pub zeta_over: Option<f64>,
    pub d_mean: Option<f64>,
    /// Per-location bias and MSE of `λ̂`, over replications with `m̂ = m₀`.
    pub bias: Vec<f64>,
    pub mse: Vec<f64>,
    pub correct_reps: usize,
}

/// One row of a study: a scenario at one sample size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub scenario: String,
    pub n: usize,
    pub replications: usize,
    /// Replications that failed outright (simulation or search errors).
    pub skipped: usize,
    pub size_or_power: Vec<RejectionRate>,
    pub segmentation: Option<SegmentationMetrics>,
}

// ---------------------------------------------------------------------------
// Harnesses

/// Empirical rejection frequencies of the CUSUM tests.
///
/// One series per replication; each method's statistic is computed once and
/// compared against every level. A method whose statistic fails on a
/// replication counts that replication as skipped for that method only.
pub fn size_power_experiment(config: &ExperimentConfig) -> Result<Vec<MetricReport>> {
    config.validate()?;
    if config.methods.is_empty() || config.gammas.is_empty() {
        return Err(BarError::InvalidConfig("size/power needs at least one method and one level".into()));
    }
    let cvs = config.gammas.iter().map(|&g| resolve_critical_value(g)).collect::<Result<Vec<_>>>()?;
    let mut reports = Vec::with_capacity(config.sample_sizes.len());
    for &n in &config.sample_sizes {
        let model = config.model.model(n)?;
        let per_rep: Vec<Option<Vec<Option<f64>>>> = (0..config.replications)
            .into_par_iter()
            .map(|rep| {
                let series = config.series(&model, n, rep).ok()?;
                Some(
                    config
                        .methods
                        .iter()
                        .map(|&method| cusum_statistic(&series, method, config.k0).ok().map(|s| s.statistic))
                        .collect(),
                )
            })
            .collect();
        let skipped = per_rep.iter().filter(|r| r.is_none()).count();
        let mut rows = Vec::new();
        for (mi, &method) in config.methods.iter().enumerate() {
            let stats: Vec<f64> = per_rep.iter().flatten().filter_map(|r| r[mi]).collect();
            for (&gamma, &(cv, source)) in config.gammas.iter().zip(&cvs) {
                let rejections = stats.iter().filter(|&&s| s > cv).count();
                let valid = stats.len();
                rows.push(RejectionRate {
                    method,
                    gamma,
                    critical_value: cv,
                    critical_value_source: source,
                    rate: if valid == 0 { f64::NAN } else { rejections as f64 / valid as f64 },
                    rejections,
                    valid,
                    skipped: config.replications - valid,
                });
            }
        }
        reports.push(MetricReport {
            scenario: config.model.label(),
            n,
            replications: config.replications,
            skipped,
            size_or_power: rows,
            segmentation: None,
        });
    }
    Ok(reports)
}

/// Per-replication GA seed: independent of the simulation stream.
pub fn replication_ga_seed(master: u64, n: usize, rep: usize) -> u64 {
    derive_seed(derive_seed(master ^ 0x6761_5f73_6565_6473, n as u64), rep as u64)
}

/// S-GA accuracy over simulated segmented series.
pub fn segmentation_experiment(config: &ExperimentConfig) -> Result<Vec<MetricReport>> {
    config.validate()?;
    let mut reports = Vec::with_capacity(config.sample_sizes.len());
    for &n in &config.sample_sizes {
        let model = config.model.model(n)?;
        let truth: Vec<f64> = model.change_points().iter().map(|&t| t as f64 / n as f64).collect();
        let fits: Vec<Option<Vec<f64>>> = (0..config.replications)
            .into_par_iter()
            .map(|rep| {
                let series = config.series(&model, n, rep).ok()?;
                let ga = GaConfig { seed: replication_ga_seed(config.seed, n, rep), ..config.ga.clone() };
                s_ga(&series, &ga).ok().map(|f| f.lambda_hat)
            })
            .collect();
        let metrics = aggregate_segmentation(&truth, fits.iter().flatten().map(Vec::as_slice));
        reports.push(MetricReport {
            scenario: config.model.label(),
            n,
            replications: config.replications,
            skipped: fits.iter().filter(|f| f.is_none()).count(),
            size_or_power: Vec::new(),
            segmentation: Some(metrics),
        });
    }
    Ok(reports)
}

/// Reduces estimated location sets (in order) against the truth.
pub fn aggregate_segmentation<'a>(truth: &[f64], estimates: impl Iterator<Item = &'a [f64]>) -> SegmentationMetrics {
    let m_true = truth.len();
    let mut hist = vec![0usize; m_true + 1];
    let (mut zu, mut zo, mut d) = (Kahan::default(), Kahan::default(), Kahan::default());
    let mut with_distance = 0usize;
    let mut bias = vec![Kahan::default(); m_true];
    let mut sq = vec![Kahan::default(); m_true];
    let mut total = 0usize;
    for est in estimates {
        total += 1;
        if est.len() >= hist.len() {
            hist.resize(est.len() + 1, 0);
        }
        hist[est.len()] += 1;
        if let (Ok(u), Ok(o), Ok(dd)) = (zeta(truth, est), zeta(est, truth), distance_d(est, truth)) {
            zu.add(u);
            zo.add(o);
            d.add(dd);
            with_distance += 1;
        }
        if est.len() == m_true {
            for k in 0..m_true {
                let e = est[k] - truth[k];
                bias[k].add(e);
                sq[k].add(e * e);
            }
        }
    }
    let correct = hist[m_true];
    let mean = |k: Kahan, count: usize| (count > 0).then(|| k.sum / count as f64);
    SegmentationMetrics {
        m_true,
        m_histogram: hist,
        cr_m: if total == 0 { f64::NAN } else { correct as f64 / total as f64 },
        zeta_under: mean(zu, with_distance),
        zeta_over: mean(zo, with_distance),
        d_mean: mean(d, with_distance),
        bias: bias.into_iter().map(|k| mean(k, correct).unwrap_or(f64::NAN)).collect(),
        mse: sq.into_iter().map(|k| mean(k, correct).unwrap_or(f64::NAN)).collect(),
        correct_reps: correct,
    }
}

// ---------------------------------------------------------------------------
// Goodness of fit

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitStats {
    pub loglik: f64,
    /// Free quantities: two parameters per segment plus the locations.
    pub k: usize,
    pub aic: f64,
    pub bic: f64,
    pub rms: f64,
}

/// AIC, BIC and the summed per-segment one-step residual RMS.
///
/// `L` is the conditional log-likelihood of the fit, `k = 2(m̂+1) + m̂`. The
/// RMS of a segment uses its own consecutive pairs with the fitted
/// `(ρ̂_j, p̂_j)`; segments with a single observation contribute nothing.
pub fn model_fit_stats(series: &BoundedSeries, fit: &MdlFit) -> FitStats {
    let n = series.len();
    let loglik = fit.total_loglik();
    let k = 2 * (fit.m_hat + 1) + fit.m_hat;
    let rms = segment_ranges(n, &fit.tau_hat)
        .into_iter()
        .zip(&fit.segment_estimates)
        .map(|((a, b), est)| {
            let xs = &series.counts()[a - 1..b];
            if xs.len() < 2 {
                return 0.0;
            }
            let counts = TransitionCounts::from_slice(xs, series.upper_bound());
            let (rho, p) = (est.params.rho(), est.params.p());
            let intercept = series.upper_bound() as f64 * p * (1.0 - rho);
            (counts.weighted_rss(rho, intercept, |_| 1.0).max(0.0) / (xs.len() - 1) as f64).sqrt()
        })
        .sum();
    FitStats {
        loglik,
        k,
        aic: -2.0 * loglik + 2.0 * k as f64,
        bic: -2.0 * loglik + k as f64 * (n as f64).ln(),
        rms,
    }
}
