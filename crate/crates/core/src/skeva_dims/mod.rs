//! Sketching and validating on dimensions: batch and sequential variants.
//!
//! Each draw clusters all `N` points on `ď` random rows, then checks the
//! clustering on `ď′` further rows. The draw whose validation scores best
//! supplies the final labels.

mod validation;

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{sample_indices, DataMatrix, IndexSet, RngSeed};
use crate::error::{invalid, Result};
use crate::kmeans::{self, Clustering, DistanceCounter, KMeansConfig};

pub use validation::{
    extend_centroids, fdr, rank_score, validation_set_dims, DimValidation, ExtraCentroids,
    RankFunction,
};
pub(crate) use validation::Validator;

const SKETCH_STREAM: u64 = 1;
const AUG_STREAM: u64 = 2;
const KMEANS_STREAM: u64 = 3;

/// What the sequential variant does once the score stops moving.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum GradientRule {
    /// Stop augmenting and compare the draw's current score.
    #[default]
    StopAugmenting,
    /// Discard the draw, like a bail-out.
    RejectDraw,
}

/// Parameters shared by [`skeva_batch`] and [`skeva_sequential`].
#[derive(Debug, Clone, PartialEq)]
pub struct SkevaParams {
    pub kmeans: KMeansConfig,
    pub sketch_dims: usize,
    pub aug_dims: usize,
    pub draws: usize,
    pub rank: RankFunction,
    /// Gradient threshold for the sequential variant.
    pub epsilon: f64,
    pub gradient_rule: GradientRule,
}

impl SkevaParams {
    pub fn new(k: usize, sketch_dims: usize) -> Self {
        Self {
            kmeans: KMeansConfig::new(k),
            sketch_dims,
            aug_dims: 100,
            draws: 10,
            rank: RankFunction::default(),
            epsilon: 0.0,
            gradient_rule: GradientRule::default(),
        }
    }

    pub fn with_aug_dims(mut self, aug_dims: usize) -> Self {
        self.aug_dims = aug_dims;
        self
    }

    pub fn with_draws(mut self, draws: usize) -> Self {
        self.draws = draws;
        self
    }

    pub fn with_rank(mut self, rank: RankFunction) -> Self {
        self.rank = rank;
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_gradient_rule(mut self, rule: GradientRule) -> Self {
        self.gradient_rule = rule;
        self
    }

    pub fn with_kmeans(mut self, kmeans: KMeansConfig) -> Self {
        self.kmeans = kmeans;
        self
    }

    fn validate(&self, x: &DataMatrix) -> Result<()> {
        let d = x.rows();
        if self.sketch_dims == 0 {
            return Err(invalid("sketch dimension must be positive"));
        }
        if self.sketch_dims >= d {
            return Err(invalid(format!(
                "sketch dimension {} must be below D = {d}",
                self.sketch_dims
            )));
        }
        if self.sketch_dims + self.aug_dims > d {
            return Err(invalid(format!(
                "sketch plus augmentation dimensions {} + {} exceed D = {d}",
                self.sketch_dims, self.aug_dims
            )));
        }
        if self.draws == 0 {
            return Err(invalid("number of draws must be at least 1"));
        }
        if self.epsilon.is_nan() || self.epsilon < 0.0 {
            return Err(invalid("epsilon must be non-negative"));
        }
        self.kmeans.validate(x.cols())
    }
}

/// One sketch clustering and the rows it was built on.
#[derive(Debug, Clone, PartialEq)]
pub struct SketchDraw {
    pub draw_index: usize,
    pub sketch_idx: IndexSet,
    pub aug_idx: IndexSet,
    /// Clustering of all `N` points on the sketch rows.
    pub clustering: Clustering,
    pub score: f64,
}

/// How a draw ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DrawStatus {
    /// Validated on every augmentation row.
    Completed,
    /// Augmentation stopped early because the score settled.
    GradientStop,
    /// Score fell below the best so far.
    BailedOut,
    /// Discarded by [`GradientRule::RejectDraw`].
    Rejected,
}

/// Trace row for one draw.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DrawRecord {
    pub draw: usize,
    pub score: f64,
    pub validation_size: usize,
    pub fdr: f64,
    pub aug_dims_used: usize,
    pub status: DrawStatus,
    pub millis: f64,
    pub distance_terms: u64,
}

/// Result of a dimension-sketching run.
#[derive(Debug, Clone)]
pub struct SkevaOutput {
    /// Winner labels with centroids recomputed on all `D` rows. `iterations`
    /// and `history` describe the winner's sketch run.
    pub clustering: Clustering,
    pub winner: usize,
    pub winner_draw: SketchDraw,
    pub trace: Vec<DrawRecord>,
    /// Scalar squared-difference terms spent on K-means and validation.
    pub distance_terms: u64,
    /// No draw survived, so the first draw was used.
    pub fallback: bool,
}

struct Prepared {
    sketch_idx: IndexSet,
    aug_idx: IndexSet,
    sketch: DataMatrix,
    clustering: Clustering,
    millis: f64,
    terms: u64,
}

fn prepare_draw(x: &DataMatrix, p: &SkevaParams, seed: &RngSeed, r: usize) -> Result<Prepared> {
    let start = Instant::now();
    let counter = DistanceCounter::new();
    let ds = seed.with_draw(r as u64);
    let sketch_idx = sample_indices(x.rows(), p.sketch_dims, &IndexSet::empty(x.rows()), &ds.child(SKETCH_STREAM))?;
    let aug_idx = sample_indices(x.rows(), p.aug_dims, &sketch_idx, &ds.child(AUG_STREAM))?;
    let sketch = x.restrict_rows(&sketch_idx)?;
    let clustering = kmeans::best_of_restarts_counted(&sketch, &p.kmeans, &ds.child(KMEANS_STREAM), &counter)?;
    Ok(Prepared {
        sketch_idx,
        aug_idx,
        sketch,
        clustering,
        millis: start.elapsed().as_secs_f64() * 1e3,
        terms: counter.get(),
    })
}

fn finish(
    x: &DataMatrix,
    prepared: Vec<Prepared>,
    scores: &[Option<f64>],
    trace: Vec<DrawRecord>,
) -> SkevaOutput {
    let mut winner = None;
    for (r, s) in scores.iter().enumerate() {
        if let Some(s) = *s {
            if winner.is_none_or(|(_, best)| s > best) {
                winner = Some((r, s));
            }
        }
    }
    let fallback = winner.is_none();
    let (winner, score) = winner.unwrap_or((0, trace[0].score));
    let distance_terms = trace.iter().map(|t| t.distance_terms).sum();
    let w = prepared.into_iter().nth(winner).expect("winner index in range");
    let clustering = full_space_clustering(x, &w.clustering);
    SkevaOutput {
        clustering,
        winner,
        winner_draw: SketchDraw {
            draw_index: winner,
            sketch_idx: w.sketch_idx,
            aug_idx: w.aug_idx,
            clustering: w.clustering,
            score,
        },
        trace,
        distance_terms,
        fallback,
    }
}

/// Keeps the sketch labels and recomputes centroids and objective on every row.
fn full_space_clustering(x: &DataMatrix, sketch: &Clustering) -> Clustering {
    let (centroids, _) = kmeans::cluster_means(x, &sketch.labels, sketch.k());
    let objective = x
        .columns()
        .zip(&sketch.labels)
        .map(|(p, &l)| crate::data::sq_dist(p, centroids.col(l)))
        .sum();
    Clustering {
        labels: sketch.labels.clone(),
        centroids,
        objective,
        iterations: sketch.iterations,
        history: sketch.history.clone(),
    }
}

/// Batch sketch-and-validate K-means over dimensions.
///
/// Draws are independent and run in parallel; the winner is the draw with the
/// highest rank score, earliest draw on ties.
pub fn skeva_batch(x: &DataMatrix, p: &SkevaParams, seed: &RngSeed) -> Result<SkevaOutput> {
    p.validate(x)?;
    let results: Vec<(Prepared, DrawRecord)> = (0..p.draws)
        .into_par_iter()
        .map(|r| {
            let mut prep = prepare_draw(x, p, seed, r)?;
            let start = Instant::now();
            let counter = DistanceCounter::new();
            let mut v = Validator::new(&prep.sketch, &prep.clustering.labels, &prep.clustering.centroids, &counter);
            let n = x.cols();
            for row in x.rows_packed(prep.aug_idx.as_slice()).chunks_exact(n) {
                v.add_dim(row, &counter);
            }
            let (size, f) = v.evaluate();
            prep.terms += counter.get();
            prep.millis += start.elapsed().as_secs_f64() * 1e3;
            let rec = DrawRecord {
                draw: r,
                score: rank_score(size, f, p.rank),
                validation_size: size,
                fdr: f,
                aug_dims_used: p.aug_dims,
                status: DrawStatus::Completed,
                millis: prep.millis,
                distance_terms: prep.terms,
            };
            Ok((prep, rec))
        })
        .collect::<Result<_>>()?;
    let (prepared, trace): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let scores: Vec<Option<f64>> = trace.iter().map(|t| Some(t.score)).collect();
    Ok(finish(x, prepared, &scores, trace))
}

/// Sequential sketch-and-validate K-means over dimensions.
///
/// Augmentation rows are added one at a time. A draw whose score drops below
/// the best completed score is abandoned. Once two consecutive scores differ
/// by at most `epsilon` the draw stops augmenting, or is discarded under
/// [`GradientRule::RejectDraw`]. The score before the first augmentation row
/// is taken on the sketch rows alone.
pub fn skeva_sequential(x: &DataMatrix, p: &SkevaParams, seed: &RngSeed) -> Result<SkevaOutput> {
    p.validate(x)?;
    let prepared: Vec<Prepared> = (0..p.draws)
        .into_par_iter()
        .map(|r| prepare_draw(x, p, seed, r))
        .collect::<Result<_>>()?;
    let mut f_max = f64::NEG_INFINITY;
    let mut scores = Vec::with_capacity(p.draws);
    let mut trace = Vec::with_capacity(p.draws);
    for (r, prep) in prepared.iter().enumerate() {
        let start = Instant::now();
        let counter = DistanceCounter::new();
        let mut v = Validator::new(&prep.sketch, &prep.clustering.labels, &prep.clustering.centroids, &counter);
        let (size0, fdr0) = v.evaluate();
        let mut prev = rank_score(size0, fdr0, p.rank);
        let mut status = DrawStatus::Completed;
        let mut last = (size0, fdr0, prev);
        let mut used = 0;
        let aug = x.rows_packed(prep.aug_idx.as_slice());
        for row in aug.chunks_exact(x.cols()) {
            v.add_dim(row, &counter);
            used += 1;
            let (size, f) = v.evaluate();
            let score = rank_score(size, f, p.rank);
            last = (size, f, score);
            if score < f_max {
                status = DrawStatus::BailedOut;
                break;
            }
            if (score - prev).abs() <= p.epsilon {
                status = match p.gradient_rule {
                    GradientRule::StopAugmenting => DrawStatus::GradientStop,
                    GradientRule::RejectDraw => DrawStatus::Rejected,
                };
                break;
            }
            prev = score;
        }
        let accepted = matches!(status, DrawStatus::Completed | DrawStatus::GradientStop);
        if accepted && last.2 > f_max {
            f_max = last.2;
        }
        scores.push(accepted.then_some(last.2));
        trace.push(DrawRecord {
            draw: r,
            score: last.2,
            validation_size: last.0,
            fdr: last.1,
            aug_dims_used: used,
            status,
            millis: prep.millis + start.elapsed().as_secs_f64() * 1e3,
            distance_terms: prep.terms + counter.get(),
        });
    }
    if scores.iter().all(Option::is_none) {
        log::warn!("no draw survived validation; using draw 0");
    }
    Ok(finish(x, prepared, &scores, trace))
}

/// Rank scores of a fixed sketch clustering as augmentation rows are added
/// in order; entry `j` uses the first `j + 1` rows of `aug_idx`.
pub fn score_curve(
    x: &DataMatrix,
    sketch_idx: &IndexSet,
    clustering: &Clustering,
    aug_idx: &IndexSet,
    rank: RankFunction,
) -> Result<Vec<f64>> {
    if sketch_idx.as_slice().iter().any(|&i| aug_idx.contains(i)) {
        return Err(invalid("augmentation rows overlap the sketch rows"));
    }
    let sketch = x.restrict_rows(sketch_idx)?;
    let counter = DistanceCounter::new();
    let mut v = Validator::new(&sketch, &clustering.labels, &clustering.centroids, &counter);
    Ok(aug_idx
        .as_slice()
        .iter()
        .map(|&i| {
            v.add_dim(&x.row(i), &counter);
            let (size, f) = v.evaluate();
            rank_score(size, f, rank)
        })
        .collect())
}
