//! Draw selection by Cauchy-Schwarz divergence between Parzen estimates.
//!
//! A draw first has to look multi-modal: its centred Parzen estimate must sit
//! further from a single kernel at the origin than every accepted draw so
//! far. It then has to stay stable when more data are added. K-means runs
//! once, on the last draw that passed both checks.

mod divergence;

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{sample_indices, sq_dist, DataMatrix, IndexSet, RngSeed};
use crate::error::{invalid, Result};
use crate::kmeans::{self, Clustering, KMeansConfig};

pub use divergence::{
    cs_divergence, cs_divergence_to_origin, origin_log_summand, zero_pad_mixture, ParzenMixture,
};
use divergence::{cs_from_logs, log_sum_exp, log_sum_exp_pairs};

const SKETCH_STREAM: u64 = 1;
const AUG_STREAM: u64 = 2;
const KMEANS_STREAM: u64 = 3;

/// Draw count so that at least one of the draws is good with probability
/// `p`, when each of `m` sampled items is informative with probability `q`:
/// `ceil(ln(1 - p) / (m ln(1 - q)))`, at least 1.
pub fn num_draws(p: f64, q: f64, m: usize) -> Result<usize> {
    if !(p > 0.0 && p < 1.0) || !(q > 0.0 && q < 1.0) {
        return Err(invalid("probabilities must lie strictly between 0 and 1"));
    }
    if m == 0 {
        return Err(invalid("sample size must be at least 1"));
    }
    let r = (1.0 - p).ln() / (m as f64 * (1.0 - q).ln());
    Ok((r.ceil() as usize).max(1))
}

/// Adaptive thresholds of the two checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SelectionState {
    pub delta_max: f64,
    pub delta_min_prime: f64,
    pub r_star: Option<usize>,
}

impl Default for SelectionState {
    fn default() -> Self {
        Self {
            delta_max: 0.0,
            delta_min_prime: f64::INFINITY,
            r_star: None,
        }
    }
}

impl SelectionState {
    pub fn passes_first(&self, d1: f64) -> bool {
        d1 > self.delta_max
    }

    /// Applies the second check; on success both thresholds move and `r`
    /// becomes the current choice.
    pub fn offer(&mut self, r: usize, d1: f64, d2: f64) -> bool {
        if d2 < self.delta_min_prime {
            self.delta_min_prime = d2;
            self.delta_max = d1;
            self.r_star = Some(r);
            true
        } else {
            false
        }
    }
}

/// Which estimate the augmented mixture is compared with on points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SecondCheck {
    /// The estimate built from the extra points alone.
    #[default]
    ExtraPoints,
    /// The estimate built from the sketch points.
    SketchPoints,
}

/// Trace row for one divergence draw.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergenceRecord {
    pub draw: usize,
    pub check1: f64,
    /// Absent when the first check failed.
    pub check2: Option<f64>,
    pub accepted: bool,
    pub r_star: Option<usize>,
    pub millis: f64,
}

/// Result of a divergence-selected run.
#[derive(Debug, Clone)]
pub struct DiskevaOutput {
    pub clustering: Clustering,
    pub winner: usize,
    /// Sampled points (or rows) of the chosen draw.
    pub sketch_idx: IndexSet,
    pub trace: Vec<DivergenceRecord>,
    /// No draw passed both checks, so the first draw was used.
    pub fallback: bool,
}

/// Parameters of [`diskeva_points`] and [`diskeva_dims`]. Sizes count points
/// for the former and rows for the latter.
#[derive(Debug, Clone, PartialEq)]
pub struct DiskevaParams {
    pub kmeans: KMeansConfig,
    pub sketch: usize,
    pub aug: usize,
    pub draws: usize,
    pub sigma2: f64,
    pub second_check: SecondCheck,
    /// Evaluate every draw in parallel, then replay the thresholds in order.
    pub speculative: bool,
}

impl DiskevaParams {
    pub fn new(k: usize, sketch: usize, aug: usize) -> Self {
        Self {
            kmeans: KMeansConfig::new(k),
            sketch,
            aug,
            draws: 10,
            sigma2: 1.0,
            second_check: SecondCheck::default(),
            speculative: false,
        }
    }

    pub fn with_draws(mut self, draws: usize) -> Self {
        self.draws = draws;
        self
    }

    pub fn with_sigma2(mut self, sigma2: f64) -> Self {
        self.sigma2 = sigma2;
        self
    }

    pub fn with_second_check(mut self, c: SecondCheck) -> Self {
        self.second_check = c;
        self
    }

    pub fn with_speculative(mut self, on: bool) -> Self {
        self.speculative = on;
        self
    }

    pub fn with_kmeans(mut self, kmeans: KMeansConfig) -> Self {
        self.kmeans = kmeans;
        self
    }

    fn validate(&self, available: usize, what: &str) -> Result<()> {
        if self.sketch == 0 {
            return Err(invalid(format!("sketch must contain at least one {what}")));
        }
        if self.sketch + self.aug > available {
            return Err(invalid(format!(
                "sketch plus augmentation {what}s {} + {} exceed {available}",
                self.sketch, self.aug
            )));
        }
        if self.draws == 0 {
            return Err(invalid("number of draws must be at least 1"));
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(invalid("sigma2 must be positive"));
        }
        Ok(())
    }
}

struct DrawSample {
    sketch_idx: IndexSet,
    aug_idx: IndexSet,
}

fn sample_draw(universe: usize, p: &DiskevaParams, seed: &RngSeed, r: usize) -> Result<DrawSample> {
    let ds = seed.with_draw(r as u64);
    let sketch_idx = sample_indices(universe, p.sketch, &IndexSet::empty(universe), &ds.child(SKETCH_STREAM))?;
    let aug_idx = sample_indices(universe, p.aug, &sketch_idx, &ds.child(AUG_STREAM))?;
    Ok(DrawSample { sketch_idx, aug_idx })
}

/// Runs the threshold recursion. `first(r)` gives the first divergence and
/// the draw's sample; `second(r, sample)` the second divergence.
fn select<F1, F2>(p: &DiskevaParams, first: F1, second: F2) -> Result<(Vec<DivergenceRecord>, Vec<DrawSample>, SelectionState)>
where
    F1: Fn(usize) -> Result<(f64, DrawSample)> + Sync,
    F2: Fn(&DrawSample) -> Result<f64> + Sync,
{
    let mut state = SelectionState::default();
    let mut trace = Vec::with_capacity(p.draws);
    let mut samples = Vec::with_capacity(p.draws);
    if p.speculative {
        let all: Vec<(f64, f64, DrawSample, f64)> = (0..p.draws)
            .into_par_iter()
            .map(|r| {
                let start = Instant::now();
                let (d1, s) = first(r)?;
                let d2 = second(&s)?;
                Ok((d1, d2, s, start.elapsed().as_secs_f64() * 1e3))
            })
            .collect::<Result<_>>()?;
        for (r, (d1, d2, s, ms)) in all.into_iter().enumerate() {
            let (check2, accepted) = if state.passes_first(d1) {
                (Some(d2), state.offer(r, d1, d2))
            } else {
                (None, false)
            };
            trace.push(DivergenceRecord { draw: r, check1: d1, check2, accepted, r_star: state.r_star, millis: ms });
            samples.push(s);
        }
    } else {
        for r in 0..p.draws {
            let start = Instant::now();
            let (d1, s) = first(r)?;
            let (check2, accepted) = if state.passes_first(d1) {
                let d2 = second(&s)?;
                (Some(d2), state.offer(r, d1, d2))
            } else {
                (None, false)
            };
            trace.push(DivergenceRecord {
                draw: r,
                check1: d1,
                check2,
                accepted,
                r_star: state.r_star,
                millis: start.elapsed().as_secs_f64() * 1e3,
            });
            samples.push(s);
        }
    }
    Ok((trace, samples, state))
}

fn winner_of(state: &SelectionState) -> (usize, bool) {
    match state.r_star {
        Some(r) => (r, false),
        None => {
            log::warn!("no draw passed both divergence checks; using draw 0");
            (0, true)
        }
    }
}

/// Divergence-selected K-means on a sample of points.
///
/// The chosen draw's raw points are clustered and every column of `x` is
/// assigned to the nearest of the resulting centroids.
pub fn diskeva_points(x: &DataMatrix, p: &DiskevaParams, seed: &RngSeed) -> Result<DiskevaOutput> {
    p.validate(x.cols(), "point")?;
    if p.aug == 0 {
        return Err(invalid("augmentation must contain at least one point"));
    }
    p.kmeans.validate(p.sketch)?;
    let s2 = p.sigma2;
    let first = |r: usize| -> Result<(f64, DrawSample)> {
        let s = sample_draw(x.cols(), p, seed, r)?;
        let sketch = x.restrict_cols(&s.sketch_idx)?.center_columns();
        let d1 = cs_divergence_to_origin(&ParzenMixture::gaussian(sketch, s2)?)?;
        Ok((d1, s))
    };
    let second = |s: &DrawSample| -> Result<f64> {
        let sketch = x.restrict_cols(&s.sketch_idx)?.center_columns();
        let extra = x.restrict_cols(&s.aug_idx)?.center_columns();
        let both = ParzenMixture::gaussian(sketch.hstack(&extra)?, s2)?;
        let other = match p.second_check {
            SecondCheck::ExtraPoints => extra,
            SecondCheck::SketchPoints => sketch,
        };
        cs_divergence(&both, &ParzenMixture::gaussian(other, s2)?)
    };
    let (trace, mut samples, state) = select(p, first, second)?;
    let (winner, fallback) = winner_of(&state);
    let sketch_idx = samples.swap_remove(winner).sketch_idx;
    let sample = x.restrict_cols(&sketch_idx)?;
    let c = kmeans::best_of_restarts(&sample, &p.kmeans, &seed.with_draw(winner as u64).child(KMEANS_STREAM))?;
    let (labels, objective) = kmeans::assign_to_centroids(x, &c.centroids)?;
    Ok(DiskevaOutput {
        clustering: Clustering {
            labels,
            centroids: c.centroids,
            objective,
            iterations: c.iterations,
            history: c.history,
        },
        winner,
        sketch_idx,
        trace,
        fallback,
    })
}

/// Divergence-selected K-means on a sample of rows.
///
/// Mixtures range over all `N` points restricted to the sampled rows. The
/// second check compares the estimate on sketch plus extra rows with the
/// zero-padded sketch estimate. The chosen rows are clustered and their
/// labels are returned, with centroids recomputed on every row.
pub fn diskeva_dims(x: &DataMatrix, p: &DiskevaParams, seed: &RngSeed) -> Result<DiskevaOutput> {
    p.validate(x.rows(), "row")?;
    p.kmeans.validate(x.cols())?;
    let n = x.cols();
    let s2 = p.sigma2;
    let scale = -0.25 / s2;
    let first = |r: usize| -> Result<(f64, DrawSample)> {
        let s = sample_draw(x.rows(), p, seed, r)?;
        let sketch = x.restrict_rows(&s.sketch_idx)?.center_columns();
        let d1 = cs_divergence_to_origin(&ParzenMixture::gaussian(sketch, s2)?)?;
        Ok((d1, s))
    };
    let second = |s: &DrawSample| -> Result<f64> {
        if s.aug_idx.is_empty() {
            return Ok(0.0);
        }
        let sketch = x.restrict_rows(&s.sketch_idx)?.center_columns();
        let extra = x.restrict_rows(&s.aug_idx)?.center_columns();
        // Padded sketch points only differ from augmented ones in the extra
        // rows, so every pairwise distance splits into sketch and extra parts.
        let row_lse: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|a| {
                let sa = sketch.col(a);
                let terms: Vec<f64> = sketch.columns().map(|b| scale * sq_dist(sa, b)).collect();
                log_sum_exp(&terms)
            })
            .collect();
        let pq_terms: Vec<f64> = row_lse
            .iter()
            .zip(extra.columns())
            .map(|(&l, e)| l + scale * e.iter().map(|v| v * v).sum::<f64>())
            .collect();
        let pq = log_sum_exp(&pq_terms);
        let qq = log_sum_exp(&row_lse);
        let pp = log_sum_exp_pairs(n, n, |a, b| {
            scale * (sq_dist(sketch.col(a), sketch.col(b)) + sq_dist(extra.col(a), extra.col(b)))
        });
        Ok(cs_from_logs(pq, pp, qq))
    };
    let (trace, mut samples, state) = select(p, first, second)?;
    let (winner, fallback) = winner_of(&state);
    let sketch_idx = samples.swap_remove(winner).sketch_idx;
    let sample = x.restrict_rows(&sketch_idx)?;
    let c = kmeans::best_of_restarts(&sample, &p.kmeans, &seed.with_draw(winner as u64).child(KMEANS_STREAM))?;
    let (centroids, _) = kmeans::cluster_means(x, &c.labels, p.kmeans.k);
    let objective = x.columns().zip(&c.labels).map(|(v, &l)| sq_dist(v, centroids.col(l))).sum();
    Ok(DiskevaOutput {
        clustering: Clustering {
            labels: c.labels,
            centroids,
            objective,
            iterations: c.iterations,
            history: c.history,
        },
        winner,
        sketch_idx,
        trace,
        fallback,
    })
}
