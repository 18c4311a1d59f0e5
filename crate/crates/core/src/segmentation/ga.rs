// SPDX-License-Identifier: MIT OR Apache-2.0

use std::collections::HashMap;

use rand::Rng;

use super::{min_spacing, spacing_ok, GaConfig, SegmentScorer};
use crate::bar_model::BoundedSeries;
use crate::error::{BarError, Result};

/// Best chromosome found for one `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaLevel {
    pub m: usize,
    pub taus: Vec<usize>,
    pub mdl: f64,
    /// Elite score after each generation; index 0 is the initial population.
    pub history: Vec<f64>,
}

struct Search<'s, 'a, R: Rng + ?Sized> {
    n: usize,
    m: usize,
    g: usize,
    cfg: &'s GaConfig,
    rng: &'s mut R,
    scorer: &'s mut SegmentScorer<'a>,
    memo: HashMap<Vec<usize>, f64>,
}

impl<R: Rng + ?Sized> Search<'_, '_, R> {
    fn score(&mut self, taus: &[usize]) -> f64 {
        if let Some(&v) = self.memo.get(taus) {
            return v;
        }
        let v = if spacing_ok(self.n, taus, self.g) { self.scorer.mdl(taus) } else { f64::INFINITY };
        self.memo.insert(taus.to_vec(), v);
        v
    }

    /// Uniformly random composition of the slack `n − (m+1)g` over the gaps.
    fn random_feasible(&mut self) -> Vec<usize> {
        let slack = self.n - (self.m + 1) * self.g;
        let mut u: Vec<usize> = (0..self.m).map(|_| self.rng.random_range(0..=slack)).collect();
        u.sort_unstable();
        u.iter().enumerate().map(|(j, &x)| (j + 1) * self.g + x).collect()
    }

    fn tournament(&mut self, scores: &[f64]) -> usize {
        let mut best = self.rng.random_range(0..scores.len());
        for _ in 1..self.cfg.tournament_size {
            let c = self.rng.random_range(0..scores.len());
            if scores[c] < scores[best] {
                best = c;
            }
        }
        best
    }

    /// Sort and clamp into `[g, n−g]`; remaining violations score `+∞`.
    fn repair(&self, mut taus: Vec<usize>) -> Vec<usize> {
        for t in taus.iter_mut() {
            *t = (*t).clamp(self.g, self.n - self.g);
        }
        taus.sort_unstable();
        taus
    }

    fn crossover(&mut self, a: &[usize], b: &[usize]) -> Vec<usize> {
        if self.m == 1 {
            // a single gene has no cut point: blend the two parents instead
            let (lo, hi) = if a[0] <= b[0] { (a[0], b[0]) } else { (b[0], a[0]) };
            return vec![self.rng.random_range(lo..=hi)];
        }
        let cut = self.rng.random_range(1..self.m);
        let child = a[..cut].iter().chain(&b[cut..]).copied().collect();
        self.repair(child)
    }

    /// Geometric jitter of mean `mean` (≥ 1), random sign.
    fn jitter(&mut self, mean: f64) -> i64 {
        let q = 1.0 / mean.max(1.0);
        let extra = if q >= 1.0 {
            0
        } else {
            let u: f64 = 1.0 - self.rng.random::<f64>();
            (u.ln() / (1.0 - q).ln()).floor() as i64
        };
        let mag = 1 + extra;
        if self.rng.random::<bool>() {
            mag
        } else {
            -mag
        }
    }

    /// Each gene moves with probability `mutation_rate` (at least one moves),
    /// half the time by a small local step, half by a jump on the scale of a
    /// segment.
    fn mutate(&mut self, parent: &[usize]) -> Vec<usize> {
        let small = (self.n as f64 / 100.0).max(2.0);
        let large = (self.n as f64 / (2.0 * (self.m as f64 + 1.0))).max(2.0);
        let forced = self.rng.random_range(0..self.m);
        let mut child = parent.to_vec();
        for (j, gene) in child.iter_mut().enumerate() {
            if j == forced || self.rng.random::<f64>() < self.cfg.mutation_rate {
                let mean = if self.rng.random::<bool>() { small } else { large };
                let d = self.jitter(mean);
                *gene = (*gene as i64 + d).clamp(1, self.n as i64 - 1) as usize;
            }
        }
        self.repair(child)
    }
}

/// Genetic search for the `m` change-point locations minimizing MDL.
///
/// Each generation keeps the elite, fills `round(CF·(P−1))` slots by one-point
/// crossover of tournament winners and the rest by mutation. The elite score
/// never increases.
pub fn ga_search<R: Rng + ?Sized>(
    series: &BoundedSeries,
    m: usize,
    config: &GaConfig,
    rng: &mut R,
    scorer: &mut SegmentScorer<'_>,
) -> Result<GaLevel> {
    let n = series.len();
    if m == 0 {
        return Err(BarError::InvalidConfig("genetic search needs m ≥ 1".into()));
    }
    let g = min_spacing(n, config.epsilon_for(n));
    if (m + 1) * g > n {
        return Err(BarError::Infeasible(format!(
            "{m} change-points need n ≥ {}, got {n}",
            (m + 1) * g
        )));
    }
    let pop_size = config.population_for(m);
    let n_cross = (config.crossover_fraction * (pop_size - 1) as f64).round() as usize;
    let mut s = Search { n, m, g, cfg: config, rng, scorer, memo: HashMap::new() };

    let mut pop: Vec<Vec<usize>> = (0..pop_size).map(|_| s.random_feasible()).collect();
    let mut scores: Vec<f64> = pop.iter().map(|c| s.score(c)).collect();
    let elite_of = |scores: &[f64]| {
        scores.iter().enumerate().fold(0, |b, (i, &v)| if v < scores[b] { i } else { b })
    };
    let mut best = elite_of(&scores);
    let mut history = vec![scores[best]];
    let mut stall = 0;
    for _ in 0..config.max_generations {
        let mut next = Vec::with_capacity(pop_size);
        next.push(pop[best].clone());
        for _ in 0..n_cross {
            let a = s.tournament(&scores);
            let b = s.tournament(&scores);
            let child = s.crossover(&pop[a], &pop[b]);
            next.push(child);
        }
        while next.len() < pop_size {
            let a = s.tournament(&scores);
            let child = s.mutate(&pop[a]);
            next.push(child);
        }
        let next_scores: Vec<f64> = next.iter().map(|c| s.score(c)).collect();
        let prev_best = scores[best];
        pop = next;
        scores = next_scores;
        best = elite_of(&scores);
        history.push(scores[best]);
        if scores[best] < prev_best - 1e-12 {
            stall = 0;
        } else {
            stall += 1;
            if config.stall_generations.is_some_and(|lim| stall >= lim) {
                break;
            }
        }
    }
    Ok(GaLevel { m, taus: pop[best].clone(), mdl: scores[best], history })
}
