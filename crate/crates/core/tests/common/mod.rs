// SPDX-License-Identifier: MIT OR Apache-2.0

//! Independent reference computations shared by the integration tests. Nothing
//! here calls into the library's estimators or kernel code.

#![allow(dead_code)]

pub fn binom_pmf(n: u32, k: u32, q: f64) -> f64 {
    if k > n {
        return 0.0;
    }
    let mut c = 1.0f64;
    for t in 0..k {
        c = c * f64::from(n - t) / f64::from(t + 1);
    }
    c * q.powi(k as i32) * (1.0 - q).powi((n - k) as i32)
}

/// `P(j | i)` as the law of `Bin(i, α) + Bin(N−i, β)`.
pub fn kernel_by_convolution(i: u32, j: u32, nb: u32, p: f64, rho: f64) -> f64 {
    let beta = p * (1.0 - rho);
    let alpha = beta + rho;
    (0..=j.min(i)).map(|k| binom_pmf(i, k, alpha) * binom_pmf(nb - i, j - k, beta)).sum()
}

pub fn in_domain(p: f64, rho: f64) -> bool {
    p > 0.0 && p < 1.0 && rho < 1.0 && rho > (-p / (1.0 - p)).max(-(1.0 - p) / p)
}

/// Direct `Σ_{t≥2} w(x_{t−1}) (x_t − ρ x_{t−1} − Np(1−ρ))²`.
pub fn weighted_ls(xs: &[u32], nb: u32, p: f64, rho: f64, w: impl Fn(u32) -> f64) -> f64 {
    let c = f64::from(nb) * p * (1.0 - rho);
    xs.windows(2)
        .map(|t| {
            let r = f64::from(t[1]) - rho * f64::from(t[0]) - c;
            w(t[0]) * r * r
        })
        .sum()
}

/// `Var(X_t | X_{t−1} = x) = x α(1−α) + (N−x) β(1−β)`.
pub fn thinning_variance(x: u32, nb: u32, p: f64, rho: f64) -> f64 {
    let beta = p * (1.0 - rho);
    let alpha = beta + rho;
    f64::from(x) * alpha * (1.0 - alpha) + f64::from(nb - x) * beta * (1.0 - beta)
}

pub fn direct_loglik(xs: &[u32], nb: u32, p: f64, rho: f64) -> f64 {
    xs.windows(2).map(|t| kernel_by_convolution(t[0], t[1], nb, p, rho).ln()).sum()
}

/// Plain Nelder–Mead with restarts; returns the best vertex.
pub fn nelder_mead(f: impl Fn([f64; 2]) -> f64, start: [f64; 2], step: f64, tol: f64) -> [f64; 2] {
    let mut best = start;
    let mut best_val = f(start);
    for _restart in 0..20 {
        let mut s = [best, [best[0] + step, best[1]], [best[0], best[1] + step]];
        let mut v = s.map(&f);
        for _ in 0..20_000 {
            let mut idx = [0usize, 1, 2];
            idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
            s = idx.map(|i| s[i]);
            v = idx.map(|i| v[i]);
            let diam = (1..3)
                .map(|k| ((s[k][0] - s[0][0]).powi(2) + (s[k][1] - s[0][1]).powi(2)).sqrt())
                .fold(0.0, f64::max);
            if diam < tol {
                break;
            }
            let c = [(s[0][0] + s[1][0]) / 2.0, (s[0][1] + s[1][1]) / 2.0];
            let at = |t: f64| [c[0] + t * (s[2][0] - c[0]), c[1] + t * (s[2][1] - c[1])];
            let xr = at(-1.0);
            let fr = f(xr);
            if fr < v[0] {
                let xe = at(-2.0);
                let fe = f(xe);
                if fe < fr {
                    (s[2], v[2]) = (xe, fe);
                } else {
                    (s[2], v[2]) = (xr, fr);
                }
            } else if fr < v[1] {
                (s[2], v[2]) = (xr, fr);
            } else {
                let xc = if fr < v[2] { at(-0.5) } else { at(0.5) };
                let fc = f(xc);
                if fc < v[2].min(fr) {
                    (s[2], v[2]) = (xc, fc);
                } else {
                    for k in 1..3 {
                        s[k] = [(s[k][0] + s[0][0]) / 2.0, (s[k][1] + s[0][1]) / 2.0];
                        v[k] = f(s[k]);
                    }
                }
            }
        }
        let (i, &val) = v.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap();
        let improved = val < best_val - 1e-15 * best_val.abs().max(1.0);
        if val <= best_val {
            best = s[i];
            best_val = val;
        }
        if !improved {
            break;
        }
    }
    best
}
