// SPDX-License-Identifier: MIT OR Apache-2.0

//! The binomial AR(1) process on `{0, …, N}` and its piecewise extension.
//!
//! `X_t = α∘X_{t−1} + β∘(N − X_{t−1})` with `β = p(1−ρ)`, `α = β + ρ`.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{BarError, Result};

/// Lower admissible bound for ρ given p: `max(−p/(1−p), −(1−p)/p)`.
pub fn rho_lower_bound(p: f64) -> f64 {
    (-p / (1.0 - p)).max(-(1.0 - p) / p)
}

/// One segment's parameter pair. Construction enforces admissibility.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams")]
pub struct BarParams {
    p: f64,
    rho: f64,
}

#[derive(Deserialize)]
struct RawParams {
    p: f64,
    rho: f64,
}

impl TryFrom<RawParams> for BarParams {
    type Error = BarError;
    fn try_from(raw: RawParams) -> Result<Self> {
        BarParams::new(raw.p, raw.rho)
    }
}

impl BarParams {
    pub fn new(p: f64, rho: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(BarError::OutOfDomain { name: "p", value: p });
        }
        if !(rho > rho_lower_bound(p) && rho < 1.0) {
            return Err(BarError::OutOfDomain { name: "rho", value: rho });
        }
        Ok(Self { p, rho })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Recruitment probability `β = p(1−ρ)`.
    pub fn beta(&self) -> f64 {
        self.p * (1.0 - self.rho)
    }

    /// Survival probability `α = β + ρ`.
    pub fn alpha(&self) -> f64 {
        self.beta() + self.rho
    }

    /// `(α_h, β_h)` of the h-step chain; ρ^h keeps its sign.
    pub fn thinning_pair(&self, h: u32) -> (f64, f64) {
        let rho_h = self.rho.powi(h as i32);
        let beta_h = self.p * (1.0 - rho_h);
        (beta_h + rho_h, beta_h)
    }
}

pub fn validate_params(p: f64, rho: f64) -> Result<BarParams> {
    BarParams::new(p, rho)
}

/// Observed counts `x₁…xₙ` with known upper bound N.
///
/// `initial` holds the pre-sample value `X₀` when the series was simulated;
/// estimation never uses it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundedSeries {
    counts: Vec<u32>,
    upper_bound: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    initial: Option<u32>,
}

impl BoundedSeries {
    pub fn new(counts: Vec<u32>, upper_bound: u32) -> Result<Self> {
        if upper_bound == 0 {
            return Err(BarError::InvalidSeries("upper bound must be positive".into()));
        }
        if counts.len() < 2 {
            return Err(BarError::InvalidSeries(format!(
                "need at least 2 observations, got {}",
                counts.len()
            )));
        }
        if let Some((t, &c)) = counts.iter().enumerate().find(|(_, &c)| c > upper_bound) {
            return Err(BarError::InvalidSeries(format!(
                "count {c} at position {} exceeds upper bound {upper_bound}",
                t + 1
            )));
        }
        Ok(Self { counts, upper_bound, initial: None })
    }

    pub fn with_initial(mut self, x0: u32) -> Self {
        self.initial = Some(x0.min(self.upper_bound));
        self
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn upper_bound(&self) -> u32 {
        self.upper_bound
    }

    pub fn initial(&self) -> Option<u32> {
        self.initial
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

/// Piecewise BAR(1): segment `j` covers observations `τ_{j−1}+1 ..= τ_j`
/// (1-based, `τ₀ = 0`, `τ_{m+1} = n`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel")]
pub struct SegmentedModel {
    upper_bound: u32,
    change_points: Vec<usize>,
    segment_params: Vec<BarParams>,
}

#[derive(Deserialize)]
struct RawModel {
    upper_bound: u32,
    #[serde(default)]
    change_points: Vec<usize>,
    segment_params: Vec<BarParams>,
}

impl TryFrom<RawModel> for SegmentedModel {
    type Error = BarError;
    fn try_from(raw: RawModel) -> Result<Self> {
        SegmentedModel::new(raw.upper_bound, raw.change_points, raw.segment_params)
    }
}

impl SegmentedModel {
    pub fn new(upper_bound: u32, change_points: Vec<usize>, segment_params: Vec<BarParams>) -> Result<Self> {
        if upper_bound == 0 {
            return Err(BarError::InvalidConfig("upper bound must be positive".into()));
        }
        if segment_params.len() != change_points.len() + 1 {
            return Err(BarError::InvalidConfig(format!(
                "{} change-points need {} parameter sets, got {}",
                change_points.len(),
                change_points.len() + 1,
                segment_params.len()
            )));
        }
        if change_points.first() == Some(&0) || change_points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(BarError::InvalidConfig(
                "change-points must be strictly increasing and ≥ 1".into(),
            ));
        }
        if segment_params.windows(2).any(|w| w[0] == w[1]) {
            return Err(BarError::InvalidConfig(
                "adjacent segments must have different parameters".into(),
            ));
        }
        Ok(Self { upper_bound, change_points, segment_params })
    }

    pub fn stationary(upper_bound: u32, params: BarParams) -> Self {
        Self { upper_bound, change_points: Vec::new(), segment_params: vec![params] }
    }

    pub fn upper_bound(&self) -> u32 {
        self.upper_bound
    }

    pub fn change_points(&self) -> &[usize] {
        &self.change_points
    }

    pub fn segment_params(&self) -> &[BarParams] {
        &self.segment_params
    }

    pub fn num_change_points(&self) -> usize {
        self.change_points.len()
    }
}

/// Draws Binomial(x, a) exactly.
///
/// Small `x` uses inverse transform on one uniform (after reflecting `a`
/// below 1/2 so `(1−a)^x` cannot underflow); larger `x` defers to
/// `rand_distr`.
pub fn binomial_thin<R: Rng + ?Sized>(x: u32, a: f64, rng: &mut R) -> u32 {
    if x == 0 || a <= 0.0 {
        return 0;
    }
    if a >= 1.0 {
        return x;
    }
    if a > 0.5 {
        return x - binomial_thin(x, 1.0 - a, rng);
    }
    if x <= 64 {
        let u: f64 = rng.random();
        let odds = a / (1.0 - a);
        let mut pmf = (1.0 - a).powi(x as i32);
        let mut cdf = pmf;
        let mut k = 0;
        while u >= cdf && k < x {
            pmf *= odds * f64::from(x - k) / f64::from(k + 1);
            k += 1;
            cdf += pmf;
        }
        k
    } else {
        Binomial::new(u64::from(x), a)
            .expect("probability checked above")
            .sample(rng) as u32
    }
}

/// One transition `α∘x + β∘(N−x)` with independent thinnings.
pub fn bar_step<R: Rng + ?Sized>(x_prev: u32, params: &BarParams, upper_bound: u32, rng: &mut R) -> u32 {
    debug_assert!(x_prev <= upper_bound);
    let survivors = binomial_thin(x_prev, params.alpha(), rng);
    let recruits = binomial_thin(upper_bound - x_prev, params.beta(), rng);
    survivors + recruits
}

pub fn conditional_mean(x_prev: u32, params: &BarParams, upper_bound: u32) -> f64 {
    let (p, rho) = (params.p, params.rho);
    rho * f64::from(x_prev) + f64::from(upper_bound) * p * (1.0 - rho)
}

pub fn conditional_variance(x_prev: u32, params: &BarParams, upper_bound: u32) -> f64 {
    let (p, rho) = (params.p, params.rho);
    let nb = f64::from(upper_bound);
    rho * (1.0 - rho) * (1.0 - 2.0 * p) * f64::from(x_prev) + nb * p * (1.0 - rho) * (1.0 - p * (1.0 - rho))
}

/// Binomial coefficients up to a fixed bound: exact integers through 60,
/// log-factorials beyond.
#[derive(Debug, Clone)]
pub(crate) struct BinomTable {
    n: usize,
    exact: Vec<f64>,
    ln_fact: Vec<f64>,
}

const EXACT_CHOOSE_MAX: usize = 60;
/// Above this bound kernel terms are accumulated in log space.
pub(crate) const LOG_SPACE_ABOVE: u32 = 30;

impl BinomTable {
    pub(crate) fn new(n: u32) -> Self {
        let n = n as usize;
        let mut exact = Vec::new();
        if n <= EXACT_CHOOSE_MAX {
            let mut rows = vec![vec![1u64]];
            for r in 1..=n {
                let prev = &rows[r - 1];
                let mut row = vec![1u64; r + 1];
                for k in 1..r {
                    row[k] = prev[k - 1] + prev[k];
                }
                rows.push(row);
            }
            exact = vec![0.0; (n + 1) * (n + 1)];
            for (r, row) in rows.iter().enumerate() {
                for (k, &c) in row.iter().enumerate() {
                    exact[r * (n + 1) + k] = c as f64;
                }
            }
        }
        let mut ln_fact = vec![0.0; n + 1];
        for k in 1..=n {
            ln_fact[k] = ln_fact[k - 1] + (k as f64).ln();
        }
        Self { n, exact, ln_fact }
    }

    pub(crate) fn choose(&self, r: u32, k: u32) -> f64 {
        let (r, k) = (r as usize, k as usize);
        if self.exact.is_empty() {
            self.ln_choose(r as u32, k as u32).exp()
        } else {
            self.exact[r * (self.n + 1) + k]
        }
    }

    pub(crate) fn ln_choose(&self, r: u32, k: u32) -> f64 {
        let (r, k) = (r as usize, k as usize);
        self.ln_fact[r] - self.ln_fact[k] - self.ln_fact[r - k]
    }
}

/// `n·ln v`, with the `0·ln 0 = 0` convention.
pub(crate) fn xlny(n: u32, v: f64) -> f64 {
    if n == 0 {
        0.0
    } else {
        f64::from(n) * v.ln()
    }
}

/// One entry of the kernel with survival `a` and recruitment `b`.
pub(crate) fn kernel_entry(i: u32, j: u32, nb: u32, a: f64, b: f64, table: &BinomTable) -> f64 {
    let lo = (i + j).saturating_sub(nb);
    let hi = i.min(j);
    let mut total = 0.0;
    if nb > LOG_SPACE_ABOVE {
        for k in lo..=hi {
            let ln_term = table.ln_choose(i, k)
                + table.ln_choose(nb - i, j - k)
                + xlny(k, a)
                + xlny(i - k, 1.0 - a)
                + xlny(j - k, b)
                + xlny(nb + k - i - j, 1.0 - b);
            total += ln_term.exp();
        }
    } else {
        for k in lo..=hi {
            total += table.choose(i, k)
                * table.choose(nb - i, j - k)
                * a.powi(k as i32)
                * (1.0 - a).powi((i - k) as i32)
                * b.powi((j - k) as i32)
                * (1.0 - b).powi((nb + k - i - j) as i32);
        }
    }
    total
}

/// `P(X_{t+h} = j | X_t = i)`.
pub fn transition_prob(i: u32, j: u32, h: u32, params: &BarParams, upper_bound: u32) -> f64 {
    assert!(h >= 1, "horizon must be at least 1");
    assert!(i <= upper_bound && j <= upper_bound, "state outside [0, N]");
    let (a, b) = params.thinning_pair(h);
    kernel_entry(i, j, upper_bound, a, b, &BinomTable::new(upper_bound))
}

/// Row-major `(N+1)×(N+1)` h-step kernel.
pub fn transition_matrix(params: &BarParams, upper_bound: u32, h: u32) -> Vec<f64> {
    assert!(h >= 1, "horizon must be at least 1");
    let table = BinomTable::new(upper_bound);
    let (a, b) = params.thinning_pair(h);
    let s = upper_bound as usize + 1;
    let mut out = vec![0.0; s * s];
    for i in 0..=upper_bound {
        for j in 0..=upper_bound {
            out[i as usize * s + j as usize] = kernel_entry(i, j, upper_bound, a, b, &table);
        }
    }
    out
}

/// How `X₀` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitialState {
    /// Binomial(N, p), the stationary marginal.
    #[default]
    Stationary,
    Fixed(u32),
}

/// Simulates `X₁…Xₙ`; `X₀` is kept in [`BoundedSeries::initial`].
pub fn simulate_bar<R: Rng + ?Sized>(
    params: &BarParams,
    upper_bound: u32,
    n: usize,
    rng: &mut R,
    init: InitialState,
) -> Result<BoundedSeries> {
    simulate_mcp_bar(
        &SegmentedModel::stationary(upper_bound, *params),
        n,
        rng,
        init,
        Stitching::Continuous,
    )
}

/// What happens to the path at a change-point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Stitching {
    /// The new segment evolves from the last value of the previous one.
    #[default]
    Continuous,
    /// The new segment starts from a fresh Binomial(N, p_j) draw.
    Restart,
}

pub fn simulate_mcp_bar<R: Rng + ?Sized>(
    model: &SegmentedModel,
    n: usize,
    rng: &mut R,
    init: InitialState,
    stitching: Stitching,
) -> Result<BoundedSeries> {
    if n < 2 {
        return Err(BarError::InvalidConfig(format!("series length must be ≥ 2, got {n}")));
    }
    if model.change_points.last().is_some_and(|&t| t >= n) {
        return Err(BarError::InvalidConfig(format!(
            "last change-point {} must be below n = {n}",
            model.change_points.last().unwrap()
        )));
    }
    let nb = model.upper_bound;
    let first = &model.segment_params[0];
    let x0 = match init {
        InitialState::Stationary => binomial_thin(nb, first.p, rng),
        InitialState::Fixed(v) if v <= nb => v,
        InitialState::Fixed(v) => {
            return Err(BarError::InvalidConfig(format!("initial value {v} exceeds N = {nb}")))
        }
    };
    let mut counts = Vec::with_capacity(n);
    let mut prev = x0;
    let mut seg = 0;
    for t in 1..=n {
        if seg < model.change_points.len() && t > model.change_points[seg] {
            seg += 1;
            if stitching == Stitching::Restart {
                prev = binomial_thin(nb, model.segment_params[seg].p, rng);
            }
        }
        prev = bar_step(prev, &model.segment_params[seg], nb, rng);
        counts.push(prev);
    }
    Ok(BoundedSeries { counts, upper_bound: nb, initial: Some(x0) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    #[test]
    fn validate_examples() {
        let ok = validate_params(0.5, 0.0).unwrap();
        assert_eq!(ok.alpha(), 0.5);
        assert_eq!(ok.beta(), 0.5);
        // lower bound at p = 0.3 is −3/7
        assert!(validate_params(0.3, -0.5).is_err());
        assert!(validate_params(0.3, -3.0 / 7.0 + 1e-9).is_ok());
        assert!(validate_params(0.5, 1.0).is_err());
        assert!(validate_params(0.0, 0.1).is_err());
        assert!(validate_params(f64::NAN, 0.1).is_err());
    }

    #[test]
    fn thinning_edge_cases() {
        let mut rng = stream_rng(1, 0);
        assert_eq!(binomial_thin(5, 0.0, &mut rng), 0);
        assert_eq!(binomial_thin(5, 1.0, &mut rng), 5);
        assert_eq!(binomial_thin(0, 0.7, &mut rng), 0);
        for _ in 0..1000 {
            assert!(binomial_thin(200, 0.3, &mut rng) <= 200);
        }
    }

    #[test]
    fn saturated_step_is_fixed() {
        // α = 1 is not admissible, so exercise the thinning identity directly.
        let mut rng = stream_rng(2, 0);
        assert_eq!(binomial_thin(10, 1.0, &mut rng) + binomial_thin(0, 0.4, &mut rng), 10);
    }

    #[test]
    fn moment_examples() {
        let a = BarParams::new(0.5, 0.2).unwrap();
        assert!((conditional_mean(4, &a, 10) - 4.8).abs() < 1e-12);
        let b = BarParams::new(0.3, 0.4).unwrap();
        assert!((conditional_variance(4, &b, 10) - 1.86).abs() < 1e-12);
        let c = BarParams::new(0.3, 0.0).unwrap();
        assert!((conditional_variance(7, &c, 10) - 2.1).abs() < 1e-12);
        assert!((conditional_mean(3, &c, 10) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn kernel_simple_cases() {
        let q = BarParams::new(0.3, 0.5).unwrap();
        assert!((transition_prob(1, 1, 1, &q, 1) - q.alpha()).abs() < 1e-15);
        let b = q.beta();
        // from state 0 only recruitment acts: Binomial(4, β)
        let pmf = [
            (1.0 - b).powi(4),
            4.0 * b * (1.0 - b).powi(3),
            6.0 * b * b * (1.0 - b).powi(2),
            4.0 * b.powi(3) * (1.0 - b),
            b.powi(4),
        ];
        for (j, want) in pmf.iter().enumerate() {
            assert!((transition_prob(0, j as u32, 1, &q, 4) - want).abs() < 1e-15);
        }
    }

    #[test]
    fn kernel_two_step_is_matrix_square() {
        let q = BarParams::new(0.3, 0.5).unwrap();
        let one = transition_matrix(&q, 4, 1);
        let two = transition_matrix(&q, 4, 2);
        for i in 0..5 {
            for j in 0..5 {
                let sq: f64 = (0..5).map(|k| one[i * 5 + k] * one[k * 5 + j]).sum();
                assert!((sq - two[i * 5 + j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn log_space_kernel_is_stochastic() {
        let q = BarParams::new(0.4, -0.3).unwrap();
        let nb = 80;
        let m = transition_matrix(&q, nb, 1);
        let s = nb as usize + 1;
        for i in 0..s {
            let row: f64 = m[i * s..(i + 1) * s].iter().sum();
            assert!((row - 1.0).abs() < 1e-10, "row {i} sums to {row}");
            let mean: f64 = (0..s).map(|j| j as f64 * m[i * s + j]).sum();
            assert!((mean - conditional_mean(i as u32, &q, nb)).abs() < 1e-8);
        }
    }

    #[test]
    fn step_mean_matches_conditional_mean() {
        let q = BarParams::new(0.35, 0.25).unwrap();
        let mut rng = stream_rng(11, 0);
        let reps = 100_000;
        let x_prev = 7;
        let total: u64 = (0..reps).map(|_| u64::from(bar_step(x_prev, &q, 10, &mut rng))).sum();
        let mean = total as f64 / reps as f64;
        let se = (conditional_variance(x_prev, &q, 10) / reps as f64).sqrt();
        assert!((mean - conditional_mean(x_prev, &q, 10)).abs() < 3.0 * se);
    }

    #[test]
    fn simulation_marginal_and_autocorrelation() {
        let q = BarParams::new(0.3, 0.4).unwrap();
        let n = 100_000;
        let s = simulate_bar(&q, 10, n, &mut stream_rng(3, 0), InitialState::Stationary).unwrap();
        assert_eq!(s.len(), n);
        assert!(s.counts().iter().all(|&c| c <= 10));
        let xs: Vec<f64> = s.counts().iter().map(|&c| f64::from(c)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        // variance of the sample mean inflates by (1+ρ)/(1−ρ) under AR(1) dependence
        let se = (10.0 * 0.3 * 0.7 / n as f64 * (1.4 / 0.6)).sqrt();
        assert!((mean - 3.0).abs() < 3.0 * se, "mean {mean}");
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>();
        let cov = xs.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum::<f64>();
        assert!((cov / var - 0.4).abs() < 0.02);
    }

    #[test]
    fn single_segment_model_matches_simulate_bar() {
        let q = BarParams::new(0.6, -0.1).unwrap();
        let a = simulate_bar(&q, 10, 300, &mut stream_rng(5, 0), InitialState::Stationary).unwrap();
        let model = SegmentedModel::stationary(10, q);
        let b = simulate_mcp_bar(&model, 300, &mut stream_rng(5, 0), InitialState::Stationary, Stitching::Continuous)
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn segment_means_follow_segment_parameters() {
        let model = SegmentedModel::new(
            10,
            vec![20_000],
            vec![BarParams::new(0.2, 0.3).unwrap(), BarParams::new(0.7, 0.3).unwrap()],
        )
        .unwrap();
        for stitching in [Stitching::Continuous, Stitching::Restart] {
            let s = simulate_mcp_bar(&model, 40_000, &mut stream_rng(8, 0), InitialState::Stationary, stitching)
                .unwrap();
            let mean = |xs: &[u32]| xs.iter().map(|&c| f64::from(c)).sum::<f64>() / xs.len() as f64;
            assert!((mean(&s.counts()[..20_000]) - 2.0).abs() < 0.1);
            assert!((mean(&s.counts()[20_000..]) - 7.0).abs() < 0.1);
        }
    }

    #[test]
    fn model_rejects_bad_layouts() {
        let a = BarParams::new(0.2, 0.3).unwrap();
        let b = BarParams::new(0.4, 0.3).unwrap();
        assert!(SegmentedModel::new(10, vec![5], vec![a]).is_err());
        assert!(SegmentedModel::new(10, vec![5, 5], vec![a, b, a]).is_err());
        assert!(SegmentedModel::new(10, vec![5], vec![a, a]).is_err());
        assert!(SegmentedModel::new(10, vec![5, 9], vec![a, b, a]).is_ok());
    }

    #[test]
    fn series_validation() {
        assert!(BoundedSeries::new(vec![1], 3).is_err());
        assert!(BoundedSeries::new(vec![1, 4], 3).is_err());
        assert!(BoundedSeries::new(vec![1, 2], 0).is_err());
        assert!(BoundedSeries::new(vec![0, 3], 3).is_ok());
    }

    #[test]
    fn params_roundtrip_through_serde_validation() {
        let bad: std::result::Result<BarParams, _> = serde_json::from_str(r#"{"p":0.3,"rho":-0.9}"#);
        assert!(bad.is_err());
    }
}
