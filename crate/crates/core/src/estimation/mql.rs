// SPDX-License-Identifier: MIT OR Apache-2.0

use super::{clamp_to_box, cls_estimate_counts, Method, ParamEstimate, TransitionCounts};
use crate::bar_model::{conditional_variance, BarParams, BoundedSeries};
use crate::error::{BarError, Result};

/// Conditional variances at or below this are rejected as weights.
pub const VARIANCE_FLOOR: f64 = 1e-8;

/// `D_t = 1 / Var(X_t | X_{t−1} = x_prev)` at the pilot.
pub fn mql_weight(x_prev: u32, pilot: &BarParams, upper_bound: u32) -> Result<f64> {
    let v = conditional_variance(x_prev, pilot, upper_bound);
    if !(v > VARIANCE_FLOOR) {
        return Err(BarError::NonpositiveVariance(v));
    }
    Ok(1.0 / v)
}

/// `Q_n(θ) = Σ_t D_t [x_t − ρx_{t−1} − Np(1−ρ)]²` with weights fixed at `pilot`.
pub fn mql_objective(series: &BoundedSeries, pilot: &BarParams, params: &BarParams) -> Result<f64> {
    let nb = series.upper_bound();
    let intercept = f64::from(nb) * params.p() * (1.0 - params.rho());
    let mut total = 0.0;
    for w in series.counts().windows(2) {
        let r = f64::from(w[1]) - params.rho() * f64::from(w[0]) - intercept;
        total += mql_weight(w[0], pilot, nb)? * r * r;
    }
    Ok(total)
}

/// MQL estimate together with the CLS pilot that fixed its weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MqlFit {
    pub estimate: ParamEstimate,
    pub pilot: BarParams,
}

pub(crate) fn row_weights(counts: &TransitionCounts, pilot: &BarParams) -> Result<Vec<f64>> {
    let nb = counts.upper_bound();
    let mut w = vec![0.0; nb as usize + 1];
    for (i, ..) in counts.rows() {
        w[i as usize] = mql_weight(i, pilot, nb)?;
    }
    Ok(w)
}

pub fn mql_estimate_counts(counts: &TransitionCounts, sample_range: (usize, usize)) -> Result<MqlFit> {
    let pilot = cls_estimate_counts(counts, sample_range)?.params;
    let weights = row_weights(counts, &pilot)?;
    let (mut w, mut wx, mut wxx, mut wy, mut wxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (i, n, s, _) in counts.rows() {
        let d = weights[i as usize];
        let x = f64::from(i);
        w += d * n;
        wx += d * n * x;
        wxx += d * n * x * x;
        wy += d * s;
        wxy += d * x * s;
    }
    let den = w * wxx - wx * wx;
    if !(den > 1e-12 * w * wxx) {
        return Err(BarError::DegenerateSeries("weighted lagged values are constant"));
    }
    let rho = (w * wxy - wx * wy) / den;
    if rho == 1.0 {
        return Err(BarError::DegenerateSeries("ρ̂ = 1 leaves p unidentified"));
    }
    let nb = f64::from(counts.upper_bound());
    let p = (wy - rho * wx) / (nb * (1.0 - rho) * w);
    if !p.is_finite() {
        return Err(BarError::DegenerateSeries("p̂ is not finite"));
    }
    let (params, clamped) = clamp_to_box(p, rho);
    let objective_value =
        counts.weighted_rss(params.rho(), nb * params.p() * (1.0 - params.rho()), |i| weights[i as usize]);
    Ok(MqlFit {
        estimate: ParamEstimate {
            params,
            method: Method::Mql,
            objective_value,
            sample_range,
            clamped,
            converged: true,
        },
        pilot,
    })
}

pub fn mql_estimate(series: &BoundedSeries) -> Result<ParamEstimate> {
    Ok(mql_estimate_counts(&TransitionCounts::from_series(series), (1, series.len()))?.estimate)
}
