// SPDX-License-Identifier: MIT OR Apache-2.0

//! Local Outlier Factor in novelty mode: neighbourhoods, k-distances and
//! local reachability densities are computed on the training set once; a
//! query is compared against its k nearest training points.

use rayon::prelude::*;
use std::cmp::Ordering;

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub(super) struct LofModel {
    k: usize,
    k_distance: Vec<f64>,
    lrd: Vec<f64>,
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn by_distance_then_index(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// The `k` nearest rows to `query`, nearest first, ties by row index.
/// `exclude` removes one row (the query itself during fitting).
fn nearest(rows: &[Vec<f64>], query: &[f64], k: usize, exclude: Option<usize>) -> Vec<(f64, usize)> {
    let mut d: Vec<(f64, usize)> = rows
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != exclude)
        .map(|(i, r)| (distance(r, query), i))
        .collect();
    if k < d.len() {
        d.select_nth_unstable_by(k - 1, by_distance_then_index);
        d.truncate(k);
    }
    d.sort_by(by_distance_then_index);
    d
}

/// `1 / mean reachability`, with the reachability sum floored at machine
/// epsilon so duplicate points give a large finite density.
fn local_reachability_density(neighbours: &[(f64, usize)], k_distance: &[f64]) -> f64 {
    let sum: f64 = neighbours.iter().map(|&(d, o)| d.max(k_distance[o])).sum();
    neighbours.len() as f64 / sum.max(f64::EPSILON)
}

impl LofModel {
    pub(super) fn fit(rows: &[Vec<f64>], k: usize) -> Result<Self> {
        let n = rows.len();
        if k == 0 || k >= n {
            return Err(Error::invalid(format!(
                "LOF needs 1 <= k < n training rows; got k={k}, n={n}"
            )));
        }
        let neighbourhoods: Vec<Vec<(f64, usize)>> = (0..n)
            .into_par_iter()
            .map(|i| nearest(rows, &rows[i], k, Some(i)))
            .collect();
        let k_distance: Vec<f64> = neighbourhoods.iter().map(|nb| nb[k - 1].0).collect();
        let lrd = neighbourhoods
            .iter()
            .map(|nb| local_reachability_density(nb, &k_distance))
            .collect();
        Ok(Self { k, k_distance, lrd })
    }

    pub(super) fn k(&self) -> usize {
        self.k
    }

    pub(super) fn score(&self, rows: &[Vec<f64>], x: &[f64]) -> f64 {
        let nb = nearest(rows, x, self.k, None);
        let lrd_x = local_reachability_density(&nb, &self.k_distance);
        nb.iter().map(|&(_, o)| self.lrd[o] / lrd_x).sum::<f64>() / nb.len() as f64
    }
}
