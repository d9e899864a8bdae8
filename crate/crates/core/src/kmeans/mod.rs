//! Hard K-means (Lloyd iterations) with best-of-restarts selection.
//!
//! The Lloyd control flow lives in [`lloyd`] and is shared with kernel
//! K-means, so that the linear kernel reproduces vector K-means exactly.

pub(crate) mod lloyd;

use std::sync::atomic::{AtomicU64, Ordering};

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{sq_dist, DataMatrix, RngSeed};
use crate::error::{invalid, Result};
use lloyd::{run_lloyd, LloydModel};

/// How initial centroids are picked among the data points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Init {
    /// K distinct points chosen uniformly.
    RandomPoints,
    /// K distinct points chosen by D² weighting (k-means++).
    #[default]
    PlusPlus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub k: usize,
    pub max_iter: usize,
    pub restarts: usize,
    /// Stop once the relative objective decrease falls below this value.
    pub tol: f64,
    pub init: Init,
}

impl KMeansConfig {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            max_iter: 300,
            restarts: 5,
            tol: 1e-6,
            init: Init::default(),
        }
    }

    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts;
        self
    }

    pub fn with_init(mut self, init: Init) -> Self {
        self.init = init;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn validate(&self, n_points: usize) -> Result<()> {
        if self.k == 0 {
            return Err(invalid("K must be at least 1"));
        }
        if self.k > n_points {
            return Err(invalid(format!("K = {} exceeds the {n_points} points", self.k)));
        }
        if self.restarts == 0 {
            return Err(invalid("restarts must be at least 1"));
        }
        if self.tol.is_nan() || self.tol < 0.0 {
            return Err(invalid("tol must be non-negative"));
        }
        Ok(())
    }
}

/// Result of a hard clustering.
#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub labels: Vec<usize>,
    /// One centroid per column.
    pub centroids: DataMatrix,
    /// Sum of squared distances of points to their assigned centroid.
    pub objective: f64,
    pub iterations: usize,
    /// Objective after every assignment step, ending with the final value.
    pub history: Vec<f64>,
}

impl Clustering {
    pub fn k(&self) -> usize {
        self.centroids.cols()
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k()];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }
}

/// Counts scalar squared-difference terms spent on point-to-centroid
/// distances. One `d`-dimensional distance adds `d`.
#[derive(Debug, Default)]
pub struct DistanceCounter(AtomicU64);

impl DistanceCounter {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&self, terms: u64) {
        self.0.fetch_add(terms, Ordering::Relaxed);
    }

    pub fn get(&self) -> u64 {
        self.0.load(Ordering::Relaxed)
    }
}

/// Nearest-centroid labels; ties go to the smallest cluster index.
pub fn assign_to_nearest(x: &DataMatrix, centroids: &DataMatrix) -> Result<Vec<usize>> {
    check_dims(x, centroids)?;
    Ok(assign_with_dists(x, centroids, &DistanceCounter::new()).0)
}

/// Labels and objective of `x` against fixed centroids.
pub fn assign_to_centroids(x: &DataMatrix, centroids: &DataMatrix) -> Result<(Vec<usize>, f64)> {
    check_dims(x, centroids)?;
    let (labels, dists) = assign_with_dists(x, centroids, &DistanceCounter::new());
    Ok((labels, dists.iter().sum()))
}

fn check_dims(x: &DataMatrix, centroids: &DataMatrix) -> Result<()> {
    if centroids.rows() != x.rows() {
        return Err(invalid(format!(
            "centroid dimension {} does not match data dimension {}",
            centroids.rows(),
            x.rows()
        )));
    }
    Ok(())
}

pub(crate) fn assign_with_dists(
    x: &DataMatrix,
    centroids: &DataMatrix,
    counter: &DistanceCounter,
) -> (Vec<usize>, Vec<f64>) {
    let k = centroids.cols();
    let mut labels = Vec::with_capacity(x.cols());
    let mut dists = Vec::with_capacity(x.cols());
    for p in x.columns() {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (j, c) in centroids.columns().enumerate() {
            let d = sq_dist(p, c);
            if d < best_d {
                best_d = d;
                best = j;
            }
        }
        labels.push(best);
        dists.push(best_d);
    }
    counter.add((x.cols() * k * x.rows()) as u64);
    (labels, dists)
}

/// Cluster means. An empty cluster is re-seeded at the point farthest from
/// its own cluster mean; several empty clusters take distinct points.
pub fn update_centroids(x: &DataMatrix, labels: &[usize], k: usize) -> Result<DataMatrix> {
    if labels.len() != x.cols() {
        return Err(invalid(format!(
            "{} labels for {} points",
            labels.len(),
            x.cols()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return Err(invalid(format!("label {bad} not below K = {k}")));
    }
    Ok(means_with_reseed(x, labels, k, true))
}

pub(crate) fn cluster_means(x: &DataMatrix, labels: &[usize], k: usize) -> (DataMatrix, Vec<usize>) {
    let d = x.rows();
    let mut sums = DataMatrix::zeros(d, k);
    let mut counts = vec![0usize; k];
    for (p, &l) in x.columns().zip(labels) {
        counts[l] += 1;
        for (s, v) in sums.col_mut(l).iter_mut().zip(p) {
            *s += v;
        }
    }
    for (j, &c) in counts.iter().enumerate() {
        if c > 0 {
            let inv = 1.0 / c as f64;
            sums.col_mut(j).iter_mut().for_each(|s| *s *= inv);
        }
    }
    (sums, counts)
}

fn means_with_reseed(x: &DataMatrix, labels: &[usize], k: usize, reseed: bool) -> DataMatrix {
    let (mut centroids, counts) = cluster_means(x, labels, k);
    if reseed && counts.contains(&0) {
        let mut spread: Vec<f64> = x
            .columns()
            .zip(labels)
            .map(|(p, &l)| sq_dist(p, centroids.col(l)))
            .collect();
        for j in (0..k).filter(|&j| counts[j] == 0) {
            let far = farthest(&spread);
            centroids.col_mut(j).copy_from_slice(x.col(far));
            spread[far] = f64::NEG_INFINITY;
        }
    }
    centroids
}

/// Index of the largest value, smallest index on ties.
pub(crate) fn farthest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Picks `k` distinct seed points among `n` according to `init`.
/// `dist(a, b)` is the squared distance between points `a` and `b`.
pub(crate) fn choose_seeds<R: Rng>(
    n: usize,
    k: usize,
    init: Init,
    rng: &mut R,
    mut dist: impl FnMut(usize, usize) -> f64,
) -> Vec<usize> {
    match init {
        Init::RandomPoints => index::sample(rng, n, k).into_vec(),
        Init::PlusPlus => {
            let mut seeds = Vec::with_capacity(k);
            let mut chosen = vec![false; n];
            let first = rng.random_range(0..n);
            seeds.push(first);
            chosen[first] = true;
            let mut nearest: Vec<f64> = (0..n).map(|i| dist(i, first)).collect();
            while seeds.len() < k {
                let total: f64 = (0..n).filter(|&i| !chosen[i]).map(|i| nearest[i]).sum();
                let next = if total > 0.0 && total.is_finite() {
                    let target = rng.random::<f64>() * total;
                    let mut acc = 0.0;
                    let mut pick = None;
                    for i in (0..n).filter(|&i| !chosen[i]) {
                        acc += nearest[i];
                        if nearest[i] > 0.0 {
                            pick = Some(i);
                            if acc >= target {
                                break;
                            }
                        }
                    }
                    pick.expect("positive mass implies a candidate")
                } else {
                    let free: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
                    free[rng.random_range(0..free.len())]
                };
                seeds.push(next);
                chosen[next] = true;
                for (i, v) in nearest.iter_mut().enumerate() {
                    let d = dist(i, next);
                    if d < *v {
                        *v = d;
                    }
                }
            }
            seeds
        }
    }
}

struct VectorModel<'a> {
    x: &'a DataMatrix,
    centroids: DataMatrix,
    counter: &'a DistanceCounter,
}

impl LloydModel for VectorModel<'_> {
    fn assign(&mut self) -> (Vec<usize>, Vec<f64>) {
        assign_with_dists(self.x, &self.centroids, self.counter)
    }

    fn update(&mut self, labels: &[usize], reseed: bool) {
        self.centroids = means_with_reseed(self.x, labels, self.centroids.cols(), reseed);
    }

    fn objective(&mut self, labels: &[usize]) -> f64 {
        self.counter.add((self.x.cols() * self.x.rows()) as u64);
        self.x
            .columns()
            .zip(labels)
            .map(|(p, &l)| sq_dist(p, self.centroids.col(l)))
            .sum()
    }
}

/// Lloyd iterations from explicit seed points (column indices of `x`).
pub fn lloyd_from_seeds(x: &DataMatrix, seeds: &[usize], cfg: &KMeansConfig) -> Result<Clustering> {
    lloyd_from_seeds_counted(x, seeds, cfg, &DistanceCounter::new())
}

pub(crate) fn lloyd_from_seeds_counted(
    x: &DataMatrix,
    seeds: &[usize],
    cfg: &KMeansConfig,
    counter: &DistanceCounter,
) -> Result<Clustering> {
    if seeds.len() != cfg.k {
        return Err(invalid(format!("{} seeds for K = {}", seeds.len(), cfg.k)));
    }
    let centroids = x.select_cols(seeds)?;
    let mut model = VectorModel {
        x,
        centroids,
        counter,
    };
    let out = run_lloyd(&mut model, cfg.max_iter, cfg.tol);
    Ok(Clustering {
        labels: out.labels,
        centroids: model.centroids,
        objective: out.objective,
        iterations: out.iterations,
        history: out.history,
    })
}

/// One Lloyd run from seeds drawn with `seed`.
pub fn lloyd_kmeans(x: &DataMatrix, cfg: &KMeansConfig, seed: &RngSeed) -> Result<Clustering> {
    lloyd_kmeans_counted(x, cfg, seed, &DistanceCounter::new())
}

pub(crate) fn lloyd_kmeans_counted(
    x: &DataMatrix,
    cfg: &KMeansConfig,
    seed: &RngSeed,
    counter: &DistanceCounter,
) -> Result<Clustering> {
    cfg.validate(x.cols())?;
    let mut rng = seed.rng();
    let seeds = choose_seeds(x.cols(), cfg.k, cfg.init, &mut rng, |a, b| {
        sq_dist(x.col(a), x.col(b))
    });
    if cfg.init == Init::PlusPlus {
        counter.add((x.cols() * cfg.k * x.rows()) as u64);
    }
    lloyd_from_seeds_counted(x, &seeds, cfg, counter)
}

/// Runs `cfg.restarts` independent Lloyd runs (restart `i` uses
/// `seed.child(i)`) and keeps the one with the smallest objective, earliest
/// restart on ties.
pub fn best_of_restarts(x: &DataMatrix, cfg: &KMeansConfig, seed: &RngSeed) -> Result<Clustering> {
    best_of_restarts_counted(x, cfg, seed, &DistanceCounter::new())
}

pub(crate) fn best_of_restarts_counted(
    x: &DataMatrix,
    cfg: &KMeansConfig,
    seed: &RngSeed,
    counter: &DistanceCounter,
) -> Result<Clustering> {
    cfg.validate(x.cols())?;
    let runs = (0..cfg.restarts)
        .into_par_iter()
        .map(|i| lloyd_kmeans_counted(x, cfg, &seed.child(i as u64), counter))
        .collect::<Result<Vec<_>>>()?;
    Ok(pick_best(runs, |c| c.objective))
}

/// First element with the minimum key.
pub(crate) fn pick_best<T>(items: Vec<T>, key: impl Fn(&T) -> f64) -> T {
    let mut best: Option<(f64, T)> = None;
    for item in items {
        let v = key(&item);
        match &best {
            Some((bv, _)) if v.is_nan() || v >= *bv => {}
            _ => best = Some((v, item)),
        }
    }
    best.expect("at least one item").1
}
