//! Kernel K-means over a row-major Gram block.

use crate::kmeans::lloyd::{run_lloyd, LloydModel};
use crate::kmeans::{choose_seeds, farthest, pick_best, KMeansConfig};
use crate::data::RngSeed;

use super::KernelClustering;

/// Square Gram matrix over an ordered point set, row-major.
#[derive(Clone, Copy)]
pub(crate) struct Block<'a> {
    pub values: &'a [f64],
    pub stride: usize,
}

impl Block<'_> {
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.stride + j]
    }

    /// `sum_{a, b in members} K[a, b]`.
    pub fn self_sum(&self, members: &[usize]) -> f64 {
        members
            .iter()
            .map(|&a| members.iter().map(|&b| self.get(a, b)).sum::<f64>())
            .sum()
    }

    /// Kernel distance of point `i` to every cluster given by member lists
    /// and their cached self sums. Empty clusters are infinitely far.
    pub fn dists(&self, i: usize, members: &[Vec<usize>], self_sums: &[f64], out: &mut [f64]) {
        let diag = self.get(i, i);
        for ((o, m), &s) in out.iter_mut().zip(members).zip(self_sums) {
            *o = cluster_dist(diag, m.iter().map(|&j| self.get(i, j)).sum(), s, m.len());
        }
    }

    /// Nearest cluster for each of `points` (smallest index on ties) and its distance.
    pub fn nearest(&self, points: impl Iterator<Item = usize>, members: &[Vec<usize>]) -> (Vec<usize>, Vec<f64>) {
        let self_sums: Vec<f64> = members.iter().map(|m| self.self_sum(m)).collect();
        let mut d = vec![0.0; members.len()];
        points
            .map(|i| {
                self.dists(i, members, &self_sums, &mut d);
                let best = argmin(&d);
                (best, d[best])
            })
            .unzip()
    }
}

/// `k(x,x) - 2/|C| sum k(x,c) + 1/|C|^2 sum sum k(c,c')`.
#[inline]
pub(crate) fn cluster_dist(diag: f64, cross: f64, self_sum: f64, size: usize) -> f64 {
    if size == 0 {
        return f64::INFINITY;
    }
    let c = size as f64;
    diag - 2.0 * cross / c + self_sum / (c * c)
}

/// Smallest index of the minimum.
pub(crate) fn argmin(d: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in d.iter().enumerate().skip(1) {
        if v < d[best] {
            best = j;
        }
    }
    best
}

pub(crate) fn members_of(labels: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut m = vec![Vec::new(); k];
    for (i, &l) in labels.iter().enumerate() {
        m[l].push(i);
    }
    m
}

struct KernelModel<'a> {
    g: Block<'a>,
    n: usize,
    members: Vec<Vec<usize>>,
}

impl LloydModel for KernelModel<'_> {
    fn assign(&mut self) -> (Vec<usize>, Vec<f64>) {
        self.g.nearest(0..self.n, &self.members)
    }

    fn update(&mut self, labels: &[usize], reseed: bool) {
        let k = self.members.len();
        self.members = members_of(labels, k);
        if reseed && self.members.iter().any(Vec::is_empty) {
            let self_sums: Vec<f64> = self.members.iter().map(|m| self.g.self_sum(m)).collect();
            let mut spread: Vec<f64> = labels
                .iter()
                .enumerate()
                .map(|(i, &l)| {
                    let cross = self.members[l].iter().map(|&j| self.g.get(i, j)).sum();
                    cluster_dist(self.g.get(i, i), cross, self_sums[l], self.members[l].len())
                })
                .collect();
            for j in 0..k {
                if self.members[j].is_empty() {
                    let far = farthest(&spread);
                    self.members[j] = vec![far];
                    spread[far] = f64::NEG_INFINITY;
                }
            }
        }
    }

    fn objective(&mut self, labels: &[usize]) -> f64 {
        let self_sums: Vec<f64> = self.members.iter().map(|m| self.g.self_sum(m)).collect();
        labels
            .iter()
            .enumerate()
            .map(|(i, &l)| {
                let cross = self.members[l].iter().map(|&j| self.g.get(i, j)).sum();
                cluster_dist(self.g.get(i, i), cross, self_sums[l], self.members[l].len())
            })
            .sum()
    }
}

/// Lloyd iterations on the first `n` points of `g`, starting from singleton
/// clusters at `seeds`.
pub(crate) fn from_seeds(g: Block<'_>, n: usize, seeds: &[usize], cfg: &KMeansConfig) -> KernelClustering {
    let mut model = KernelModel {
        g,
        n,
        members: seeds.iter().map(|&s| vec![s]).collect(),
    };
    let out = run_lloyd(&mut model, cfg.max_iter, cfg.tol);
    KernelClustering {
        members: members_of(&out.labels, seeds.len()),
        labels: out.labels,
        objective: out.objective,
        iterations: out.iterations,
        history: out.history,
    }
}

/// Feature-space distance between points `a` and `b` of `g`.
#[inline]
pub(crate) fn pair_dist(g: Block<'_>, a: usize, b: usize) -> f64 {
    (g.get(a, a) + g.get(b, b) - 2.0 * g.get(a, b)).max(0.0)
}

/// Best of `cfg.restarts` seeded runs; restart `i` draws its seeds from
/// `seed.child(i)` exactly as vector K-means does.
pub(crate) fn best_of_restarts(g: Block<'_>, n: usize, cfg: &KMeansConfig, seed: &RngSeed) -> KernelClustering {
    let runs = (0..cfg.restarts)
        .map(|i| {
            let mut rng = seed.child(i as u64).rng();
            let seeds = choose_seeds(n, cfg.k, cfg.init, &mut rng, |a, b| pair_dist(g, a, b));
            from_seeds(g, n, &seeds, cfg)
        })
        .collect();
    pick_best(runs, |c| c.objective)
}
