// SPDX-License-Identifier: MIT OR Apache-2.0

//! Independent reference implementations used by the oracle tests. Nothing
//! here calls into the recursion or the baseline code it is compared with.

#![allow(dead_code)]

use std::f64::consts::PI;

use statrs::function::gamma::ln_gamma;

/// 1-D Normal-Inverse-Gamma prior `(mu0, kappa0, alpha0, beta0)`.
#[derive(Clone, Copy, Debug)]
pub struct Nig {
    pub mu0: f64,
    pub kappa0: f64,
    pub alpha0: f64,
    pub beta0: f64,
}

/// Closed-form log marginal likelihood of a whole segment under a NIG prior.
pub fn segment_log_marginal(prior: Nig, xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let ss: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
    let kappa_n = prior.kappa0 + n;
    let alpha_n = prior.alpha0 + n / 2.0;
    let beta_n = prior.beta0 + 0.5 * ss + prior.kappa0 * n * (mean - prior.mu0).powi(2) / (2.0 * kappa_n);
    ln_gamma(alpha_n) - ln_gamma(prior.alpha0) + prior.alpha0 * prior.beta0.ln() - alpha_n * beta_n.ln()
        + 0.5 * (prior.kappa0 / kappa_n).ln()
        - 0.5 * n * (2.0 * PI).ln()
}

/// Run-length posterior after each step by enumerating every segmentation
/// of `xs`. A changepoint before step `t` (t >= 1) has prior probability `h`
/// independently; the first segment starts at step 0.
///
/// Returns, for each step `t`, a vector indexed by run length holding
/// `P(r_t = r | x_{0..=t})` where `r` counts observations since the last
/// changepoint with the fresh hypothesis convention: `r = 0` means a
/// changepoint happens right after `x_t` and carries no data yet.
pub fn enumerate_run_lengths(prior: Nig, h: f64, xs: &[f64]) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for t in 0..xs.len() {
        let seen = &xs[..=t];
        // Boundaries between consecutive observations 1..=t, plus whether a
        // changepoint occurs after x_t (which defines r = 0).
        let cuts = t;
        let mut post = vec![0.0; t + 2];
        let mut total = 0.0;
        for mask in 0u32..(1 << cuts) {
            let mut log_p = 0.0;
            let mut start = 0;
            for b in 1..=t {
                if mask & (1 << (b - 1)) != 0 {
                    log_p += h.ln() + segment_log_marginal(prior, &seen[start..b]);
                    start = b;
                } else {
                    log_p += (1.0 - h).ln();
                }
            }
            log_p += segment_log_marginal(prior, &seen[start..]);
            let p = log_p.exp();
            let current = t + 1 - start;
            // Next-step changepoint splits the mass into r = 0 and r = current.
            post[0] += p * h;
            post[current] += p * (1.0 - h);
            total += p;
        }
        for v in &mut post {
            *v /= total;
        }
        out.push(post);
    }
    out
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Textbook LOF by full sorting, no shared code with the library version.
/// Training neighbourhoods exclude the point itself; ties by index.
pub fn lof_brute_force(train: &[Vec<f64>], k: usize, query: &[f64]) -> f64 {
    let neighbours = |p: &[f64], skip: Option<usize>| -> Vec<(f64, usize)> {
        let mut all: Vec<(f64, usize)> = train
            .iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != skip)
            .map(|(i, q)| (distance(p, q), i))
            .collect();
        all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        all.truncate(k);
        all
    };
    let k_dist: Vec<f64> = (0..train.len())
        .map(|i| neighbours(&train[i], Some(i))[k - 1].0)
        .collect();
    let lrd = |nb: &[(f64, usize)]| -> f64 {
        let s: f64 = nb.iter().map(|&(d, o)| if d > k_dist[o] { d } else { k_dist[o] }).sum();
        k as f64 / s.max(f64::EPSILON)
    };
    let train_lrd: Vec<f64> = (0..train.len()).map(|i| lrd(&neighbours(&train[i], Some(i)))).collect();
    let q = neighbours(query, None);
    let lq = lrd(&q);
    q.iter().map(|&(_, o)| train_lrd[o]).sum::<f64>() / (k as f64 * lq)
}

/// ECOD score computed by direct counting over the raw training columns.
pub fn ecod_direct(train: &[Vec<f64>], query: &[f64]) -> f64 {
    let n = train.len() as f64;
    let d = query.len();
    let (mut left, mut right, mut skewed) = (0.0, 0.0, 0.0);
    for j in 0..d {
        let col: Vec<f64> = train.iter().map(|r| r[j]).collect();
        let le = col.iter().filter(|&&v| v <= query[j]).count() as f64;
        let ge = col.iter().filter(|&&v| v >= query[j]).count() as f64;
        let l = -((le + 1.0) / (n + 1.0)).ln();
        let r = -((ge + 1.0) / (n + 1.0)).ln();
        let mean = col.iter().sum::<f64>() / n;
        let m2 = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let m3 = col.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / n;
        let skew = if m2 > 0.0 { m3 / m2.powf(1.5) } else { 0.0 };
        left += l;
        right += r;
        skewed += if skew < 0.0 { l } else { r };
    }
    left.max(right).max(skewed)
}
