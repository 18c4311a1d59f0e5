// SPDX-License-Identifier: MIT OR Apache-2.0

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{cls_estimate_counts, Method, ParamEstimate, TransitionCounts, BOX_MARGIN};
use crate::bar_model::{kernel_entry, rho_lower_bound, xlny, BarParams, BinomTable, BoundedSeries};
use crate::error::{BarError, Result};
use crate::linalg::Matrix2;
use crate::rng::stream_rng;

/// Log-likelihood and its derivatives in `θ = (ρ, p)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodDerivatives {
    pub loglik: f64,
    /// `Σ_t ∇ log P(x_t | x_{t−1})`.
    pub score: [f64; 2],
    /// `−(1/m) Σ_t ∇² log P(x_t | x_{t−1})`, positive definite near the MLE.
    pub observed_info: Matrix2,
    pub transitions: u64,
}

/// `log P`, `∇ log P`, `∇² log P` for one cell.
///
/// The kernel is a sum of terms `t_k`; with `w_k = t_k / P`,
/// `∇ log P = Σ w_k ∇ log t_k` and
/// `∇² log P = Σ w_k (∇² log t_k + ∇log t_k ∇log t_kᵀ) − ∇log P ∇log Pᵀ`.
/// `α_ρ = 1−p`, `α_p = 1−ρ`, `β_ρ = −p`, `β_p = 1−ρ`, `α_ρp = β_ρp = −1`.
fn cell_derivatives(i: u32, j: u32, nb: u32, q: &BarParams, table: &BinomTable) -> (f64, [f64; 2], Matrix2) {
    let (p, rho) = (q.p(), q.rho());
    let (a, b) = (q.alpha(), q.beta());
    let lo = (i + j).saturating_sub(nb);
    let hi = i.min(j);
    let mut ln_terms = [0.0f64; 64];
    let mut heap;
    let terms: &mut [f64] = if (hi - lo + 1) as usize <= ln_terms.len() {
        &mut ln_terms[..(hi - lo + 1) as usize]
    } else {
        heap = vec![0.0; (hi - lo + 1) as usize];
        &mut heap
    };
    let mut mx = f64::NEG_INFINITY;
    for (slot, k) in terms.iter_mut().zip(lo..=hi) {
        *slot = table.ln_choose(i, k)
            + table.ln_choose(nb - i, j - k)
            + xlny(k, a)
            + xlny(i - k, 1.0 - a)
            + xlny(j - k, b)
            + xlny(nb + k - i - j, 1.0 - b);
        mx = mx.max(*slot);
    }
    let (mut s, mut g0, mut g1, mut h00, mut h01, mut h11) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for (&lt, k) in terms.iter().zip(lo..=hi) {
        let w = (lt - mx).exp();
        let (kf, ik, jk, rest) = (f64::from(k), f64::from(i - k), f64::from(j - k), f64::from(nb + k - i - j));
        let da = kf / a - ik / (1.0 - a);
        let db = jk / b - rest / (1.0 - b);
        let da2 = -kf / (a * a) - ik / ((1.0 - a) * (1.0 - a));
        let db2 = -jk / (b * b) - rest / ((1.0 - b) * (1.0 - b));
        let gr = da * (1.0 - p) - db * p;
        let gp = (da + db) * (1.0 - rho);
        s += w;
        g0 += w * gr;
        g1 += w * gp;
        h00 += w * (gr * gr + da2 * (1.0 - p) * (1.0 - p) + db2 * p * p);
        h01 += w * (gr * gp + (da2 * (1.0 - p) - db2 * p) * (1.0 - rho) - da - db);
        h11 += w * (gp * gp + (da2 + db2) * (1.0 - rho) * (1.0 - rho));
    }
    let (g0, g1) = (g0 / s, g1 / s);
    let hess = Matrix2::new(h00 / s - g0 * g0, h01 / s - g0 * g1, h11 / s - g1 * g1);
    (mx + s.ln(), [g0, g1], hess)
}

/// Log-likelihood, summed score and summed Hessian.
fn evaluate(counts: &TransitionCounts, q: &BarParams, table: &BinomTable) -> (f64, [f64; 2], Matrix2) {
    let nb = counts.upper_bound();
    let mut ll = 0.0;
    let mut g = [0.0; 2];
    let mut h = Matrix2::default();
    for (i, j, c) in counts.nonzero() {
        let (lp, gc, hc) = cell_derivatives(i, j, nb, q, table);
        let c = f64::from(c);
        ll += c * lp;
        g[0] += c * gc[0];
        g[1] += c * gc[1];
        h = h.add(&hc.scale(c));
    }
    (ll, g, h)
}

/// `Σ c_ij log P_ij`.
pub fn loglik_counts(counts: &TransitionCounts, params: &BarParams) -> f64 {
    loglik_with_table(counts, params, &BinomTable::new(counts.upper_bound()))
}

pub(crate) fn loglik_with_table(counts: &TransitionCounts, q: &BarParams, table: &BinomTable) -> f64 {
    let nb = counts.upper_bound();
    let (a, b) = (q.alpha(), q.beta());
    counts
        .nonzero()
        .map(|(i, j, c)| f64::from(c) * kernel_entry(i, j, nb, a, b, table).ln())
        .sum()
}

/// `Σ_{t=start+1}^{n} log P(x_t | x_{t−1})`, `start` 1-based.
pub fn cml_loglik(series: &BoundedSeries, params: &BarParams, start: usize) -> f64 {
    let start = start.max(1);
    let xs = &series.counts()[(start - 1).min(series.len())..];
    loglik_counts(&TransitionCounts::from_slice(xs, series.upper_bound()), params)
}

pub fn cml_derivatives_counts(counts: &TransitionCounts, params: &BarParams) -> LikelihoodDerivatives {
    let table = BinomTable::new(counts.upper_bound());
    let (loglik, score, hess) = evaluate(counts, params, &table);
    let m = counts.transitions().max(1) as f64;
    LikelihoodDerivatives { loglik, score, observed_info: hess.scale(-1.0 / m), transitions: counts.transitions() }
}

pub fn cml_derivatives(series: &BoundedSeries, params: &BarParams) -> LikelihoodDerivatives {
    cml_derivatives_counts(&TransitionCounts::from_series(series), params)
}

const GRAD_TOL: f64 = 1e-7;
const MAX_ITER: usize = 200;
const ACTIVE_EPS: f64 = 1e-12;
const ARMIJO: f64 = 1e-4;

fn project(rho: f64, p: f64) -> [f64; 2] {
    let p = p.clamp(BOX_MARGIN, 1.0 - BOX_MARGIN);
    [rho.clamp(rho_lower_bound(p) + BOX_MARGIN, 1.0 - BOX_MARGIN), p]
}

/// Score with components that push against active constraints removed.
/// On the curved lower ρ bound the outward part is projected onto the
/// boundary tangent.
fn projected_gradient(t: [f64; 2], g: [f64; 2]) -> [f64; 2] {
    let [rho, p] = t;
    let mut g = g;
    let clip_p = |g: &mut [f64; 2]| {
        if (p <= BOX_MARGIN + ACTIVE_EPS && g[1] < 0.0) || (p >= 1.0 - BOX_MARGIN - ACTIVE_EPS && g[1] > 0.0) {
            g[1] = 0.0;
        }
    };
    clip_p(&mut g);
    if rho >= 1.0 - BOX_MARGIN - ACTIVE_EPS && g[0] > 0.0 {
        g[0] = 0.0;
    }
    if rho <= rho_lower_bound(p) + BOX_MARGIN + ACTIVE_EPS {
        let slope = if p < 0.5 { -1.0 / ((1.0 - p) * (1.0 - p)) } else { 1.0 / (p * p) };
        let normal = [1.0, -slope];
        let dot = g[0] * normal[0] + g[1] * normal[1];
        if dot < 0.0 {
            let nn = normal[0] * normal[0] + normal[1] * normal[1];
            g = [g[0] - dot / nn * normal[0], g[1] - dot / nn * normal[1]];
            clip_p(&mut g);
        }
    }
    g
}

fn params_of(t: [f64; 2]) -> BarParams {
    BarParams::new(t[1], t[0]).expect("projected point is admissible")
}

#[derive(Debug, Clone, Copy)]
struct Ascent {
    theta: [f64; 2],
    loglik: f64,
    converged: bool,
}

/// Projected Newton ascent with Armijo backtracking; falls back to a
/// gradient step when the Hessian is not negative definite or the Newton
/// step does not ascend.
fn ascend(counts: &TransitionCounts, start: [f64; 2], table: &BinomTable) -> Ascent {
    let m = counts.transitions().max(1) as f64;
    let mut theta = project(start[0], start[1]);
    let mut converged = false;
    let (mut f, mut g, mut h) = evaluate(counts, &params_of(theta), table);
    for _ in 0..MAX_ITER {
        let pg = projected_gradient(theta, g);
        let norm = pg[0].hypot(pg[1]);
        if norm < GRAD_TOL {
            converged = true;
            break;
        }
        let mut directions = Vec::with_capacity(2);
        if h.is_negative_definite() {
            let inv = h.inverse().ok();
            if let Some(inv) = inv {
                let d = inv.mul_vec(g);
                directions.push([-d[0], -d[1]]);
            }
        }
        directions.push([0.1 * pg[0] / norm, 0.1 * pg[1] / norm]);
        let mut moved = false;
        'dirs: for d in directions {
            let mut step = 1.0;
            while step > 1e-16 {
                let cand = project(theta[0] + step * d[0], theta[1] + step * d[1]);
                let delta = [cand[0] - theta[0], cand[1] - theta[1]];
                let gain = g[0] * delta[0] + g[1] * delta[1];
                if gain <= 0.0 || (delta[0] == 0.0 && delta[1] == 0.0) {
                    step *= 0.5;
                    continue;
                }
                let fc = loglik_with_table(counts, &params_of(cand), table);
                if fc >= f + ARMIJO * gain {
                    theta = cand;
                    (f, g, h) = evaluate(counts, &params_of(theta), table);
                    moved = true;
                    break 'dirs;
                }
                step *= 0.5;
            }
        }
        if !moved {
            // No representable ascent step left: accept if the mean score is negligible.
            converged = norm / m < 1e-6;
            break;
        }
    }
    Ascent { theta, loglik: f, converged }
}

pub fn cml_estimate_counts(
    counts: &TransitionCounts,
    sample_range: (usize, usize),
    warm_start: Option<BarParams>,
) -> Result<ParamEstimate> {
    if counts.transitions() < 2 {
        return Err(BarError::InvalidSeries("CML needs at least 2 transitions".into()));
    }
    let table = BinomTable::new(counts.upper_bound());
    let first = warm_start
        .or_else(|| cls_estimate_counts(counts, sample_range).ok().map(|e| e.params))
        .map(|q| [q.rho(), q.p()])
        .unwrap_or([0.0, 0.5]);
    let mut best = ascend(counts, first, &table);
    if !best.converged {
        let mut rng = stream_rng(0x5eed_c41, 0);
        let mut starts = vec![[0.0, 0.5]];
        for _ in 0..2 {
            let p: f64 = rng.random_range(0.05..0.95);
            let rho: f64 = rng.random_range(rho_lower_bound(p) + 0.05..0.95);
            starts.push([rho, p]);
        }
        for s in starts {
            let run = ascend(counts, s, &table);
            if run.loglik > best.loglik || (run.converged && !best.converged && run.loglik >= best.loglik - 1e-9) {
                best = run;
            }
        }
    }
    Ok(ParamEstimate {
        params: params_of(best.theta),
        method: Method::Cml,
        objective_value: best.loglik,
        sample_range,
        clamped: false,
        converged: best.converged,
    })
}

/// Maximizes the conditional likelihood of `x_start … x_n` over Θ_c.
pub fn cml_estimate(series: &BoundedSeries, start: usize) -> Result<ParamEstimate> {
    let start = start.max(1);
    if start >= series.len() {
        return Err(BarError::InvalidSeries(format!("start {start} leaves no transitions")));
    }
    let counts = TransitionCounts::from_slice(&series.counts()[start - 1..], series.upper_bound());
    cml_estimate_counts(&counts, (start, series.len()), None)
}
