// SPDX-License-Identifier: MIT OR Apache-2.0

//! Single-segment estimators: conditional least squares, modified
//! quasi-likelihood, and conditional maximum likelihood.
//!
//! A series `x₁…xₙ` contributes the `n−1` transitions `(x_{t−1}, x_t)`,
//! `t = 2…n`; the first observation is the initial condition. Every
//! estimator works from [`TransitionCounts`], so cost is independent of `n`
//! once the counts are built.

mod cls;
mod cml;
mod mql;

pub use cls::{cls_estimate, cls_estimate_counts, cls_objective, cls_objective_counts};
pub use cml::{
    cml_derivatives, cml_derivatives_counts, cml_estimate, cml_estimate_counts, cml_loglik, loglik_counts,
    LikelihoodDerivatives,
};
pub use mql::{mql_estimate, mql_estimate_counts, mql_objective, mql_weight, MqlFit, VARIANCE_FLOOR};

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::bar_model::{rho_lower_bound, BarParams, BoundedSeries};

/// Margin δ of the compact parameter box Θ_c.
pub const BOX_MARGIN: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Cls,
    Mql,
    Cml,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Cls, Method::Mql, Method::Cml];
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Cls => "CLS",
            Method::Mql => "MQL",
            Method::Cml => "CML",
        })
    }
}

impl std::str::FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "cls" => Ok(Method::Cls),
            "mql" => Ok(Method::Mql),
            "cml" => Ok(Method::Cml),
            other => Err(format!("unknown method `{other}` (expected cls, mql or cml)")),
        }
    }
}

/// A fitted parameter pair with provenance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamEstimate {
    pub params: BarParams,
    pub method: Method,
    /// `S_n` for CLS, `Q_n` for MQL, the log-likelihood for CML.
    pub objective_value: f64,
    /// 1-based inclusive range of observations used.
    pub sample_range: (usize, usize),
    /// The raw estimate left Θ_c and was projected back.
    pub clamped: bool,
    /// Always true for the closed forms; for CML, whether the optimizer met
    /// its stopping rule.
    pub converged: bool,
}

/// Projects a raw `(p, ρ)` into Θ_c: p first, then ρ against p's bound.
pub fn clamp_to_box(p: f64, rho: f64) -> (BarParams, bool) {
    let pc = p.clamp(BOX_MARGIN, 1.0 - BOX_MARGIN);
    let rc = rho.clamp(rho_lower_bound(pc) + BOX_MARGIN, 1.0 - BOX_MARGIN);
    let params = BarParams::new(pc, rc).expect("box lies inside the admissible region");
    (params, pc != p || rc != rho)
}

/// Transition counts `c_ij = #{t : x_{t−1} = i, x_t = j}` plus running
/// integer moments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionCounts {
    upper_bound: u32,
    cells: Vec<u32>,
    /// Per previous state: count, Σ next, Σ next².
    row_n: Vec<u64>,
    row_s: Vec<u64>,
    row_ss: Vec<u64>,
    m: u64,
    sx: u64,
    sy: u64,
    sxx: u64,
    sxy: u64,
    distinct_prev: usize,
}

/// Integer sums over transitions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LagMoments {
    pub m: u64,
    pub sum_prev: u64,
    pub sum_next: u64,
    pub sum_prev_sq: u64,
    pub sum_cross: u64,
}

impl TransitionCounts {
    pub fn new(upper_bound: u32) -> Self {
        let s = upper_bound as usize + 1;
        Self {
            upper_bound,
            cells: vec![0; s * s],
            row_n: vec![0; s],
            row_s: vec![0; s],
            row_ss: vec![0; s],
            m: 0,
            sx: 0,
            sy: 0,
            sxx: 0,
            sxy: 0,
            distinct_prev: 0,
        }
    }

    /// Transitions inside `xs` (the first element is only an initial state).
    pub fn from_slice(xs: &[u32], upper_bound: u32) -> Self {
        let mut c = Self::new(upper_bound);
        for w in xs.windows(2) {
            c.push(w[0], w[1]);
        }
        c
    }

    pub fn from_series(series: &BoundedSeries) -> Self {
        Self::from_slice(series.counts(), series.upper_bound())
    }

    pub fn push(&mut self, prev: u32, next: u32) {
        let s = self.upper_bound as usize + 1;
        let (i, j) = (prev as usize, next as usize);
        self.cells[i * s + j] += 1;
        if self.row_n[i] == 0 {
            self.distinct_prev += 1;
        }
        let (x, y) = (u64::from(prev), u64::from(next));
        self.row_n[i] += 1;
        self.row_s[i] += y;
        self.row_ss[i] += y * y;
        self.m += 1;
        self.sx += x;
        self.sy += y;
        self.sxx += x * x;
        self.sxy += x * y;
    }

    pub fn upper_bound(&self) -> u32 {
        self.upper_bound
    }

    pub fn transitions(&self) -> u64 {
        self.m
    }

    pub fn cell(&self, i: u32, j: u32) -> u32 {
        self.cells[i as usize * (self.upper_bound as usize + 1) + j as usize]
    }

    /// `(i, j, c_ij)` for every non-empty cell, row-major.
    pub fn nonzero(&self) -> impl Iterator<Item = (u32, u32, u32)> + '_ {
        let s = self.upper_bound as usize + 1;
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(move |(k, &c)| ((k / s) as u32, (k % s) as u32, c))
    }

    /// `(i, count, Σ next, Σ next²)` for every visited previous state.
    pub(crate) fn rows(&self) -> impl Iterator<Item = (u32, f64, f64, f64)> + '_ {
        (0..self.row_n.len()).filter(|&i| self.row_n[i] > 0).map(move |i| {
            (i as u32, self.row_n[i] as f64, self.row_s[i] as f64, self.row_ss[i] as f64)
        })
    }

    pub fn moments(&self) -> LagMoments {
        LagMoments {
            m: self.m,
            sum_prev: self.sx,
            sum_next: self.sy,
            sum_prev_sq: self.sxx,
            sum_cross: self.sxy,
        }
    }

    /// Fewer than two distinct lagged values leaves ρ unidentified.
    pub fn lag_is_constant(&self) -> bool {
        self.distinct_prev < 2
    }

    /// `Σ_t (x_t − μ(x_{t−1}))²` for an affine conditional mean
    /// `μ(i) = slope·i + intercept`, optionally weighted per row.
    pub(crate) fn weighted_rss(&self, slope: f64, intercept: f64, weight: impl Fn(u32) -> f64) -> f64 {
        self.rows()
            .map(|(i, n, s, ss)| {
                let mu = slope * f64::from(i) + intercept;
                weight(i) * (ss - 2.0 * mu * s + n * mu * mu)
            })
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_match_transitions() {
        let c = TransitionCounts::from_slice(&[0, 2, 2, 1, 2], 3);
        assert_eq!(c.transitions(), 4);
        assert_eq!(c.cell(2, 2), 1);
        assert_eq!(c.cell(2, 1), 1);
        assert_eq!(c.cell(0, 2), 1);
        assert_eq!(c.cell(1, 2), 1);
        let m = c.moments();
        assert_eq!((m.sum_prev, m.sum_next, m.sum_prev_sq, m.sum_cross), (5, 7, 9, 8));
        assert_eq!(c.nonzero().count(), 4);
    }

    #[test]
    fn clamp_only_moves_outside_points() {
        let (q, moved) = clamp_to_box(0.3, 0.2);
        assert!(!moved);
        assert_eq!((q.p(), q.rho()), (0.3, 0.2));
        let (q, moved) = clamp_to_box(1.2, 1.5);
        assert!(moved);
        assert_eq!(q.p(), 1.0 - BOX_MARGIN);
        assert_eq!(q.rho(), 1.0 - BOX_MARGIN);
        let (q, _) = clamp_to_box(0.3, -0.9);
        assert!((q.rho() - (-3.0 / 7.0 + BOX_MARGIN)).abs() < 1e-15);
    }

    #[test]
    fn method_parsing() {
        assert_eq!("CML".parse::<Method>().unwrap(), Method::Cml);
        assert!("ols".parse::<Method>().is_err());
        assert_eq!(Method::Mql.to_string(), "MQL");
    }
}
