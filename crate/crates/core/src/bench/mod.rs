//! Synthetic data, relative accuracy, a random-projection baseline and the
//! Monte-Carlo experiment runner.

mod experiment;

use pathfinding::prelude::{kuhn_munkres, Matrix};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{dot, DataMatrix, RngSeed};
use crate::error::{invalid, Result};
use crate::kmeans::{self, Clustering, KMeansConfig};

pub use experiment::{
    run_experiment, DataSource, ExperimentConfig, ExperimentReport, MethodConfig, MethodKind, ReportRow,
    SummaryRow,
};

/// Gaussian clusters around uniformly drawn means:
/// `x = m_k + G_k v` with `v ~ N(0, I_rank)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub d: usize,
    pub n: usize,
    pub k: usize,
    /// Rank of every cluster covariance; `rank == d` gives identity noise.
    pub rank: usize,
    /// Side of the hypercube holding the means; `5 sqrt(rank)` when absent.
    #[serde(default)]
    pub side: Option<f64>,
    pub seed: u64,
}

impl SynthSpec {
    pub fn new(d: usize, n: usize, k: usize, rank: usize, seed: u64) -> Self {
        Self { d, n, k, rank, side: None, seed }
    }

    pub fn with_side(mut self, side: f64) -> Self {
        self.side = Some(side);
        self
    }

    pub fn side(&self) -> f64 {
        self.side.unwrap_or(5.0 * (self.rank as f64).sqrt())
    }

    fn validate(&self) -> Result<()> {
        if self.d == 0 || self.k == 0 || self.n == 0 {
            return Err(invalid("D, N and K must be positive"));
        }
        if !self.n.is_multiple_of(self.k) {
            return Err(invalid(format!("N = {} is not a multiple of K = {}", self.n, self.k)));
        }
        if self.rank == 0 || self.rank > self.d {
            return Err(invalid(format!("rank {} must lie in 1..={}", self.rank, self.d)));
        }
        if !(self.side() > 0.0 && self.side().is_finite()) {
            return Err(invalid("hypercube side must be positive"));
        }
        Ok(())
    }
}

/// Points (cluster by cluster, `N/K` each) and their true labels.
pub fn gen_synthetic(spec: &SynthSpec) -> Result<(DataMatrix, Vec<usize>)> {
    spec.validate()?;
    let (d, rank, per) = (spec.d, spec.rank, spec.n / spec.k);
    let side = spec.side();
    let mut rng = RngSeed::new(spec.seed).rng();
    let mut values = Vec::with_capacity(d * spec.n);
    let mut labels = Vec::with_capacity(spec.n);
    let scale = 1.0 / (rank as f64).sqrt();
    for k in 0..spec.k {
        let mean: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..side)).collect();
        // column-major D x rank factor
        let factor: Option<Vec<f64>> = (rank < d)
            .then(|| (0..d * rank).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect());
        let mut v = vec![0.0; rank];
        for _ in 0..per {
            v.iter_mut().for_each(|e| *e = rng.sample(StandardNormal));
            match &factor {
                None => values.extend(mean.iter().zip(&v).map(|(m, e)| m + e)),
                Some(g) => {
                    let start = values.len();
                    values.extend_from_slice(&mean);
                    let x = &mut values[start..];
                    for (col, &e) in g.chunks_exact(d).zip(&v) {
                        for (xi, gi) in x.iter_mut().zip(col) {
                            *xi += gi * e;
                        }
                    }
                }
            }
            labels.push(k);
        }
    }
    Ok((DataMatrix::new(d, spec.n, values)?, labels))
}

/// Fraction of points whose predicted label maps to the reference label
/// under the best one-to-one relabelling.
pub fn relative_accuracy(pred: &[usize], reference: &[usize], k: usize) -> Result<f64> {
    if pred.len() != reference.len() {
        return Err(invalid(format!("{} predicted labels vs {} reference labels", pred.len(), reference.len())));
    }
    if pred.is_empty() {
        return Err(invalid("no labels to compare"));
    }
    let size = pred.iter().chain(reference).map(|&l| l + 1).max().unwrap_or(0).max(k);
    let mut confusion = vec![0i64; size * size];
    for (&p, &r) in pred.iter().zip(reference) {
        confusion[p * size + r] += 1;
    }
    let m = Matrix::from_vec(size, size, confusion).expect("square confusion matrix");
    let (matched, _) = kuhn_munkres(&m);
    Ok(matched as f64 / pred.len() as f64)
}

/// Random `d x D` matrix with independent `+-1/sqrt(d)` entries, row-major.
pub fn sign_projection(d: usize, big_d: usize, seed: &RngSeed) -> Vec<f64> {
    let mut rng = seed.rng();
    let s = 1.0 / (d as f64).sqrt();
    (0..d * big_d).map(|_| if rng.random::<bool>() { s } else { -s }).collect()
}

/// K-means on `R X` for a random sign projection `R` of `d` rows. With
/// `identity` set (and `d == D`) the data are clustered unprojected.
pub fn rp_kmeans_baseline(
    x: &DataMatrix,
    d: usize,
    cfg: &KMeansConfig,
    seed: &RngSeed,
    identity: bool,
) -> Result<Clustering> {
    if d == 0 || d > x.rows() {
        return Err(invalid(format!("projection dimension {d} must lie in 1..={}", x.rows())));
    }
    if identity {
        if d != x.rows() {
            return Err(invalid("identity projection needs d = D"));
        }
        return kmeans::best_of_restarts(x, cfg, &seed.child(1));
    }
    let r = sign_projection(d, x.rows(), &seed.child(0));
    let mut y = vec![0.0; d * x.cols()];
    y.par_chunks_mut(d).zip(x.as_slice().par_chunks(x.rows())).for_each(|(out, p)| {
        for (o, row) in out.iter_mut().zip(r.chunks_exact(x.rows())) {
            *o = dot(row, p);
        }
    });
    kmeans::best_of_restarts(&DataMatrix::new(d, x.cols(), y)?, cfg, &seed.child(1))
}

/// Linear-interpolation quantile of sorted `v` (`q` in `[0, 1]`).
pub(crate) fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Median of unsorted values.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile(&v, 0.5)
}

#[cfg(test)]
mod tests;
