// SPDX-License-Identifier: MIT OR Apache-2.0

use super::{clamp_to_box, Method, ParamEstimate, TransitionCounts};
use crate::bar_model::{BarParams, BoundedSeries};
use crate::error::{BarError, Result};

/// `S_n(θ) = Σ_t [x_t − ρx_{t−1} − Np(1−ρ)]²`.
pub fn cls_objective(series: &BoundedSeries, params: &BarParams) -> f64 {
    let nb = f64::from(series.upper_bound());
    let intercept = nb * params.p() * (1.0 - params.rho());
    series
        .counts()
        .windows(2)
        .map(|w| {
            let r = f64::from(w[1]) - params.rho() * f64::from(w[0]) - intercept;
            r * r
        })
        .sum()
}

pub fn cls_objective_counts(counts: &TransitionCounts, params: &BarParams) -> f64 {
    let nb = f64::from(counts.upper_bound());
    counts.weighted_rss(params.rho(), nb * params.p() * (1.0 - params.rho()), |_| 1.0)
}

/// Raw closed-form `(ρ̂, p̂)` before projection into Θ_c.
pub(crate) fn cls_raw(counts: &TransitionCounts) -> Result<(f64, f64)> {
    if counts.lag_is_constant() {
        return Err(BarError::DegenerateSeries("lagged values are constant"));
    }
    let mo = counts.moments();
    let m = i128::from(mo.m);
    let (sx, sy) = (i128::from(mo.sum_prev), i128::from(mo.sum_next));
    let num = m * i128::from(mo.sum_cross) - sx * sy;
    let den = m * i128::from(mo.sum_prev_sq) - sx * sx;
    if den == 0 {
        return Err(BarError::DegenerateSeries("lagged values are constant"));
    }
    if num == den {
        return Err(BarError::DegenerateSeries("ρ̂ = 1 leaves p unidentified"));
    }
    let rho = num as f64 / den as f64;
    let nb = f64::from(counts.upper_bound());
    let p = (sy as f64 - rho * sx as f64) / (mo.m as f64 * nb * (1.0 - rho));
    if !p.is_finite() {
        return Err(BarError::DegenerateSeries("p̂ is not finite"));
    }
    Ok((rho, p))
}

pub fn cls_estimate_counts(counts: &TransitionCounts, sample_range: (usize, usize)) -> Result<ParamEstimate> {
    let (rho, p) = cls_raw(counts)?;
    let (params, clamped) = clamp_to_box(p, rho);
    Ok(ParamEstimate {
        params,
        method: Method::Cls,
        objective_value: cls_objective_counts(counts, &params),
        sample_range,
        clamped,
        converged: true,
    })
}

pub fn cls_estimate(series: &BoundedSeries) -> Result<ParamEstimate> {
    cls_estimate_counts(&TransitionCounts::from_series(series), (1, series.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bar_model::{simulate_bar, InitialState};
    use crate::rng::stream_rng;

    #[test]
    fn constant_series_is_degenerate() {
        let s = BoundedSeries::new(vec![3, 3, 3, 3], 10).unwrap();
        assert!(matches!(cls_estimate(&s), Err(BarError::DegenerateSeries(_))));
    }

    #[test]
    fn exact_mean_recursion_gives_zero_objective() {
        // x = Np is the fixed point of the mean recursion
        let q = BarParams::new(0.4, 0.5).unwrap();
        let fixed = BoundedSeries::new(vec![4, 4, 4], 10).unwrap();
        assert_eq!(cls_objective(&fixed, &q), 0.0);
    }

    #[test]
    fn two_point_objective_is_one_residual() {
        let q = BarParams::new(0.3, 0.2).unwrap();
        let s = BoundedSeries::new(vec![5, 1], 10).unwrap();
        let r = 1.0 - 0.2 * 5.0 - 10.0 * 0.3 * 0.8;
        assert!((cls_objective(&s, &q) - r * r).abs() < 1e-12);
    }

    #[test]
    fn counts_and_direct_objective_agree() {
        let q = BarParams::new(0.45, 0.3).unwrap();
        let s = simulate_bar(&q, 10, 400, &mut stream_rng(4, 0), InitialState::Stationary).unwrap();
        let c = TransitionCounts::from_series(&s);
        let trial = BarParams::new(0.5, 0.1).unwrap();
        let a = cls_objective(&s, &trial);
        let b = cls_objective_counts(&c, &trial);
        assert!((a - b).abs() < 1e-9 * a.max(1.0));
    }

    #[test]
    fn closed_form_beats_grid() {
        let q = BarParams::new(0.5, 0.2).unwrap();
        let s = simulate_bar(&q, 10, 300, &mut stream_rng(9, 0), InitialState::Stationary).unwrap();
        let est = cls_estimate(&s).unwrap();
        let best = cls_objective(&s, &est.params);
        for a in 1..100 {
            for b in 1..100 {
                let p = a as f64 / 100.0;
                let rho = -1.0 + 2.0 * b as f64 / 100.0;
                if let Ok(g) = BarParams::new(p, rho) {
                    assert!(best <= cls_objective(&s, &g) + 1e-9);
                }
            }
        }
    }

    #[test]
    fn consistent_for_long_series() {
        let q = BarParams::new(0.5, 0.2).unwrap();
        let s = simulate_bar(&q, 10, 100_000, &mut stream_rng(10, 0), InitialState::Stationary).unwrap();
        let est = cls_estimate(&s).unwrap();
        assert!((est.params.p() - 0.5).abs() < 0.02);
        assert!((est.params.rho() - 0.2).abs() < 0.02);
    }

    #[test]
    fn relabeling_reflects_p() {
        let q = BarParams::new(0.3, 0.35).unwrap();
        let s = simulate_bar(&q, 8, 500, &mut stream_rng(12, 0), InitialState::Stationary).unwrap();
        let flipped = BoundedSeries::new(s.counts().iter().map(|&c| 8 - c).collect(), 8).unwrap();
        let (r1, p1) = cls_raw(&TransitionCounts::from_series(&s)).unwrap();
        let (r2, p2) = cls_raw(&TransitionCounts::from_series(&flipped)).unwrap();
        assert!((r1 - r2).abs() < 1e-10);
        assert!((p1 + p2 - 1.0).abs() < 1e-10);
    }
}
