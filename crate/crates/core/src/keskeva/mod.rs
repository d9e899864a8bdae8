//! Kernel K-means on point sketches, validated on extra points.
//!
//! Each draw runs kernel K-means on `ν̌` random points, lets `ν̌′` further
//! points join the nearest clusters, and regroups the sketch points against
//! the enlarged clusters. Sketch points that keep their cluster form the
//! validation set; the draw with the largest one labels all `N` points.
//!
//! Centroids live in feature space and are never formed: a cluster is its
//! member list and every distance is expanded into kernel sums.

mod coeff;
mod engine;

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::data::{sample_indices, DataMatrix, IndexSet, RngSeed};
use crate::error::{invalid, Result};
use crate::kernels::{GramView, KernelSpec};
use crate::kmeans::KMeansConfig;

pub use coeff::{centroid_coefficients, coeff_distance, coeff_distance_mixed, CentroidCoefficients};
use engine::{argmin, cluster_dist, Block};

const SKETCH_STREAM: u64 = 1;
const AUG_STREAM: u64 = 2;
const KMEANS_STREAM: u64 = 3;
const BLOCK: usize = 256;

/// Hard clustering with implicit feature-space centroids.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelClustering {
    /// Cluster of each point.
    pub labels: Vec<usize>,
    /// Sorted member indices of each cluster.
    pub members: Vec<Vec<usize>>,
    /// Sum of kernel distances of points to their cluster centroids.
    pub objective: f64,
    pub iterations: usize,
    pub history: Vec<f64>,
}

impl KernelClustering {
    pub fn k(&self) -> usize {
        self.members.len()
    }
}

/// A point given by its row in a [`GramView`] or by its coordinates.
#[derive(Debug, Clone, Copy)]
pub enum PointRef<'a> {
    Row(usize),
    External(&'a [f64]),
}

/// Squared feature-space distance from a point to the mean of the `members`
/// (column indices of `gram`).
pub fn kernel_point_to_cluster_dist(gram: &GramView<'_>, point: PointRef<'_>, members: &[usize]) -> Result<f64> {
    if members.is_empty() {
        return Err(invalid("cluster has no members"));
    }
    if let Some(&bad) = members.iter().find(|&&m| m >= gram.ncols()) {
        return Err(invalid(format!("member {bad} out of range")));
    }
    let spec = gram.spec();
    let cols = gram.col_points();
    let (diag, cross) = match point {
        PointRef::Row(i) => {
            if i >= gram.nrows() {
                return Err(invalid(format!("point {i} out of range")));
            }
            let p = gram.row_points().col(i);
            (spec.eval(p, p), members.iter().map(|&m| gram.get(i, m)).sum())
        }
        PointRef::External(p) => {
            if p.len() != spec.dim {
                return Err(invalid("external point has the wrong dimension"));
            }
            (spec.eval(p, p), members.iter().map(|&m| spec.eval(p, cols.col(m))).sum())
        }
    };
    let self_sum: f64 = members
        .iter()
        .map(|&a| members.iter().map(|&b| spec.eval(cols.col(a), cols.col(b))).sum::<f64>())
        .sum();
    Ok(cluster_dist(diag, cross, self_sum, members.len()))
}

fn square_gram(spec: &KernelSpec, points: &DataMatrix) -> Result<Vec<f64>> {
    let g = GramView::cached(*spec, points, points)?;
    Ok(g.values().expect("cached gram").to_vec())
}

/// Kernel K-means with `cfg.restarts` restarts; restart `i` seeds from
/// `seed.child(i)`.
pub fn kernel_kmeans(points: &DataMatrix, spec: &KernelSpec, cfg: &KMeansConfig, seed: &RngSeed) -> Result<KernelClustering> {
    cfg.validate(points.cols())?;
    let g = square_gram(spec, points)?;
    let n = points.cols();
    Ok(engine::best_of_restarts(Block { values: &g, stride: n }, n, cfg, seed))
}

/// Kernel K-means started from singleton clusters at `seeds`.
pub fn kernel_kmeans_from_seeds(points: &DataMatrix, spec: &KernelSpec, seeds: &[usize], cfg: &KMeansConfig) -> Result<KernelClustering> {
    let n = points.cols();
    if seeds.is_empty() || seeds.iter().any(|&s| s >= n) {
        return Err(invalid("seeds must be non-empty point indices"));
    }
    let g = square_gram(spec, points)?;
    Ok(engine::from_seeds(Block { values: &g, stride: n }, n, seeds, cfg))
}

/// Joins each augmentation point to the nearest sketch cluster. Returned
/// member lists index the stacked set `[sketch | aug]`, so augmentation
/// point `j` appears as `sketch.cols() + j`.
pub fn augment_centroids(
    sketch: &DataMatrix,
    clustering: &KernelClustering,
    aug: &DataMatrix,
    spec: &KernelSpec,
) -> Result<Vec<Vec<usize>>> {
    check_sketch(sketch, clustering)?;
    let both = sketch.hstack(aug)?;
    let g = square_gram(spec, &both)?;
    Ok(augment(Block { values: &g, stride: both.cols() }, sketch.cols(), aug.cols(), &clustering.members))
}

/// Reassigns every sketch point to the nearest augmented cluster, smallest
/// index on ties.
pub fn regroup_sketch(
    sketch: &DataMatrix,
    aug: &DataMatrix,
    augmented: &[Vec<usize>],
    spec: &KernelSpec,
) -> Result<Vec<usize>> {
    let total = sketch.cols() + aug.cols();
    if augmented.iter().flatten().any(|&m| m >= total) {
        return Err(invalid("augmented member index out of range"));
    }
    let both = sketch.hstack(aug)?;
    let g = square_gram(spec, &both)?;
    Ok(Block { values: &g, stride: total }.nearest(0..sketch.cols(), augmented).0)
}

fn check_sketch(sketch: &DataMatrix, c: &KernelClustering) -> Result<()> {
    if c.labels.len() != sketch.cols() {
        return Err(invalid("clustering does not match the sketch points"));
    }
    Ok(())
}

fn augment(g: Block<'_>, ns: usize, na: usize, members: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let (labels, _) = g.nearest(ns..ns + na, members);
    let mut out = members.to_vec();
    for (j, l) in labels.into_iter().enumerate() {
        out[l].push(ns + j);
    }
    out
}

/// Parameters of [`keskeva`].
#[derive(Debug, Clone, PartialEq)]
pub struct KeskevaParams {
    pub kmeans: KMeansConfig,
    pub spec: KernelSpec,
    pub sketch_points: usize,
    pub aug_points: usize,
    pub draws: usize,
}

impl KeskevaParams {
    pub fn new(k: usize, spec: KernelSpec, sketch_points: usize, aug_points: usize) -> Self {
        Self {
            kmeans: KMeansConfig::new(k),
            spec,
            sketch_points,
            aug_points,
            draws: 10,
        }
    }

    pub fn with_draws(mut self, draws: usize) -> Self {
        self.draws = draws;
        self
    }

    pub fn with_kmeans(mut self, kmeans: KMeansConfig) -> Self {
        self.kmeans = kmeans;
        self
    }
}

/// Trace row for one point-sketch draw.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointDrawRecord {
    pub draw: usize,
    pub validation_size: usize,
    pub objective: f64,
    pub millis: f64,
}

/// Result of [`keskeva`].
#[derive(Debug, Clone)]
pub struct KeskevaOutput {
    /// Cluster of every data point.
    pub labels: Vec<usize>,
    pub winner: usize,
    pub sketch_idx: IndexSet,
    /// Winner's clustering of its sketch points.
    pub sketch_clustering: KernelClustering,
    pub trace: Vec<PointDrawRecord>,
}

struct Draw {
    sketch_idx: IndexSet,
    clustering: KernelClustering,
    record: PointDrawRecord,
}

fn run_draw(x: &DataMatrix, p: &KeskevaParams, seed: &RngSeed, r: usize) -> Result<Draw> {
    let start = Instant::now();
    let n = x.cols();
    let ds = seed.with_draw(r as u64);
    let mut sketch = sample_indices(n, p.sketch_points, &IndexSet::empty(n), &ds.child(SKETCH_STREAM))?.into_vec();
    sketch.sort_unstable();
    let sketch_idx = IndexSet::new(sketch, n)?;
    let aug_idx = sample_indices(n, p.aug_points, &sketch_idx, &ds.child(AUG_STREAM))?;
    let both = x.select_cols(&[sketch_idx.as_slice(), aug_idx.as_slice()].concat())?;
    let g = square_gram(&p.spec, &both)?;
    let block = Block { values: &g, stride: both.cols() };
    let ns = sketch_idx.len();
    let clustering = engine::best_of_restarts(block, ns, &p.kmeans, &ds.child(KMEANS_STREAM));
    let augmented = augment(block, ns, aug_idx.len(), &clustering.members);
    let (regrouped, _) = block.nearest(0..ns, &augmented);
    let validation_size = regrouped.iter().zip(&clustering.labels).filter(|(a, b)| a == b).count();
    Ok(Draw {
        sketch_idx,
        record: PointDrawRecord {
            draw: r,
            validation_size,
            objective: clustering.objective,
            millis: start.elapsed().as_secs_f64() * 1e3,
        },
        clustering,
    })
}

/// Kernel sketch-and-validate K-means over points.
pub fn keskeva(x: &DataMatrix, p: &KeskevaParams, seed: &RngSeed) -> Result<KeskevaOutput> {
    let n = x.cols();
    if p.spec.dim != x.rows() {
        return Err(invalid(format!("kernel dimension {} does not match D = {}", p.spec.dim, x.rows())));
    }
    if p.sketch_points + p.aug_points > n {
        return Err(invalid(format!(
            "sketch plus augmentation points {} + {} exceed N = {n}",
            p.sketch_points, p.aug_points
        )));
    }
    if p.draws == 0 {
        return Err(invalid("number of draws must be at least 1"));
    }
    p.kmeans.validate(p.sketch_points)?;
    let draws: Vec<Draw> = (0..p.draws)
        .into_par_iter()
        .map(|r| run_draw(x, p, seed, r))
        .collect::<Result<_>>()?;
    let mut winner = 0;
    for (r, d) in draws.iter().enumerate() {
        if d.record.validation_size > draws[winner].record.validation_size {
            winner = r;
        }
    }
    let trace = draws.iter().map(|d| d.record.clone()).collect();
    let w = draws.into_iter().nth(winner).expect("winner in range");
    let sketch = x.restrict_cols(&w.sketch_idx)?;
    let labels = assign_all(x, &sketch, &w.clustering.members, &p.spec)?;
    Ok(KeskevaOutput {
        labels,
        winner,
        sketch_idx: w.sketch_idx,
        sketch_clustering: w.clustering,
        trace,
    })
}

/// Nearest implicit centroid for every column of `x`, where cluster `k` is
/// the mean of `support` columns listed in `members[k]`. Streams over `x` in
/// blocks so no `N x |support|` matrix is held.
pub fn assign_all(x: &DataMatrix, support: &DataMatrix, members: &[Vec<usize>], spec: &KernelSpec) -> Result<Vec<usize>> {
    if x.rows() != spec.dim || support.rows() != spec.dim {
        return Err(invalid("points do not match the kernel dimension"));
    }
    let g = square_gram(spec, support)?;
    let s = Block { values: &g, stride: support.cols() };
    let self_sums: Vec<f64> = members.iter().map(|m| s.self_sum(m)).collect();
    let starts: Vec<usize> = (0..x.cols()).step_by(BLOCK).collect();
    let parts: Vec<Vec<usize>> = starts
        .par_iter()
        .map(|&lo| {
            let mut d = vec![0.0; members.len()];
            (lo..(lo + BLOCK).min(x.cols()))
                .map(|i| {
                    let p = x.col(i);
                    let diag = spec.eval(p, p);
                    for ((o, m), &ss) in d.iter_mut().zip(members).zip(&self_sums) {
                        let cross = m.iter().map(|&j| spec.eval(p, support.col(j))).sum();
                        *o = cluster_dist(diag, cross, ss, m.len());
                    }
                    argmin(&d)
                })
                .collect()
        })
        .collect();
    Ok(parts.concat())
}
