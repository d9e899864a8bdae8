//! Validation on extra dimensions: augmented centroids, the validation set
//! and Fisher's discriminant ratio.

use serde::{Deserialize, Serialize};

use crate::data::{DataMatrix, IndexSet};
use crate::error::{invalid, Result};
use crate::kmeans::DistanceCounter;

/// How a draw's validation outcome is turned into a comparable score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum RankFunction {
    /// Size of the validation set.
    Cardinality,
    /// `|V| * exp(-1 / FDR)`.
    #[default]
    FdrWeighted,
}

impl std::str::FromStr for RankFunction {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "card" | "cardinality" => Ok(Self::Cardinality),
            "fdr" | "fdr-weighted" => Ok(Self::FdrWeighted),
            _ => Err(invalid(format!("unknown rank function {s:?} (card|fdr)"))),
        }
    }
}

/// Score of a validation set of size `validation_size` with discriminant ratio `fdr`.
pub fn rank_score(validation_size: usize, fdr: f64, f: RankFunction) -> f64 {
    let v = validation_size as f64;
    match f {
        RankFunction::Cardinality => v,
        RankFunction::FdrWeighted => {
            if v == 0.0 || fdr <= 0.0 || fdr.is_nan() {
                0.0
            } else if fdr.is_infinite() {
                v
            } else {
                v * (-1.0 / fdr).exp()
            }
        }
    }
}

/// Per-cluster centroids on extra dimensions, formed from sketch clusters.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtraCentroids {
    dims: usize,
    values: Vec<f64>,
    /// Clusters without members; their extra centroid is all zeros.
    pub empty: Vec<bool>,
}

impl ExtraCentroids {
    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn k(&self) -> usize {
        self.empty.len()
    }

    pub fn centroid(&self, k: usize) -> &[f64] {
        &self.values[k * self.dims..(k + 1) * self.dims]
    }
}

/// Means of the `aug_idx` coordinates over the members of each sketch
/// cluster given by `labels`.
pub fn extend_centroids(
    x: &DataMatrix,
    labels: &[usize],
    k: usize,
    aug_idx: &IndexSet,
) -> Result<ExtraCentroids> {
    if labels.len() != x.cols() {
        return Err(invalid(format!("{} labels for {} points", labels.len(), x.cols())));
    }
    if aug_idx.universe() != x.rows() {
        return Err(invalid("augmentation indices do not index the data rows"));
    }
    let dims = aug_idx.len();
    let mut values = vec![0.0; k * dims];
    let mut counts = vec![0usize; k];
    for (p, &l) in x.columns().zip(labels) {
        if l >= k {
            return Err(invalid(format!("label {l} not below K = {k}")));
        }
        counts[l] += 1;
        let c = &mut values[l * dims..(l + 1) * dims];
        for (v, &i) in c.iter_mut().zip(aug_idx.as_slice()) {
            *v += p[i];
        }
    }
    for (j, &n) in counts.iter().enumerate() {
        if n > 0 {
            let inv = 1.0 / n as f64;
            values[j * dims..(j + 1) * dims].iter_mut().for_each(|v| *v *= inv);
        }
    }
    Ok(ExtraCentroids {
        dims,
        values,
        empty: counts.iter().map(|&n| n == 0).collect(),
    })
}

/// Fisher's discriminant ratio of a clustering: the sum over ordered pairs of
/// distinct non-empty clusters of the squared centroid gap over the summed
/// unbiased within-cluster variances.
///
/// A singleton cluster contributes zero variance. A pair with zero summed
/// variance contributes `+inf` when the centroids differ and `0` otherwise.
pub fn fdr(points: &DataMatrix, labels: &[usize], centroids: &DataMatrix) -> Result<f64> {
    if points.rows() != centroids.rows() || labels.len() != points.cols() {
        return Err(invalid("fdr: points, labels and centroids disagree in shape"));
    }
    let k = centroids.cols();
    let mut counts = vec![0usize; k];
    let mut spread = vec![0.0; k];
    for (p, &l) in points.columns().zip(labels) {
        if l >= k {
            return Err(invalid(format!("label {l} not below K = {k}")));
        }
        counts[l] += 1;
        spread[l] += crate::data::sq_dist(p, centroids.col(l));
    }
    let mut gaps = vec![0.0; k * k];
    for a in 0..k {
        for b in 0..k {
            gaps[a * k + b] = crate::data::sq_dist(centroids.col(a), centroids.col(b));
        }
    }
    Ok(fdr_from_parts(&counts, &spread, &gaps))
}

pub(crate) fn fdr_from_parts(counts: &[usize], spread: &[f64], gaps: &[f64]) -> f64 {
    let k = counts.len();
    let var: Vec<f64> = counts
        .iter()
        .zip(spread)
        .map(|(&n, &s)| if n >= 2 { s / (n - 1) as f64 } else { 0.0 })
        .collect();
    let mut total = 0.0;
    for a in 0..k {
        for b in 0..k {
            if a == b || counts[a] == 0 || counts[b] == 0 {
                continue;
            }
            let num = gaps[a * k + b];
            let den = var[a] + var[b];
            total += if den > 0.0 {
                num / den
            } else if num > 0.0 {
                f64::INFINITY
            } else {
                0.0
            };
        }
    }
    total
}

/// Outcome of validating one sketch clustering on extra dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct DimValidation {
    /// Points whose augmented-space label equals their sketch label.
    pub members: Vec<usize>,
    pub aug_labels: Vec<usize>,
    /// Concatenated centroids: sketch coordinates, then extra coordinates.
    pub aug_centroids: DataMatrix,
    pub fdr: f64,
}

/// Validation set of a sketch clustering against `aug_idx` extra rows.
pub fn validation_set_dims(
    x: &DataMatrix,
    sketch_idx: &IndexSet,
    sketch_labels: &[usize],
    sketch_centroids: &DataMatrix,
    aug_idx: &IndexSet,
) -> Result<DimValidation> {
    if sketch_idx.as_slice().iter().any(|&i| aug_idx.contains(i)) {
        return Err(invalid("augmentation rows overlap the sketch rows"));
    }
    if sketch_centroids.rows() != sketch_idx.len() {
        return Err(invalid("sketch centroids do not match the sketch dimension"));
    }
    let k = sketch_centroids.cols();
    let extra = extend_centroids(x, sketch_labels, k, aug_idx)?;
    let all = sketch_idx.union(aug_idx)?;
    let points = x.restrict_rows(&all)?;
    let cols: Vec<Vec<f64>> = (0..k)
        .map(|j| {
            let mut c = sketch_centroids.col(j).to_vec();
            c.extend_from_slice(extra.centroid(j));
            c
        })
        .collect();
    let aug_centroids = DataMatrix::from_columns(&cols)?;
    let aug_labels = crate::kmeans::assign_to_nearest(&points, &aug_centroids)?;
    let members = aug_labels
        .iter()
        .zip(sketch_labels)
        .enumerate()
        .filter(|(_, (a, s))| a == s)
        .map(|(n, _)| n)
        .collect();
    let fdr = fdr(&points, sketch_labels, &aug_centroids)?;
    Ok(DimValidation {
        members,
        aug_labels,
        aug_centroids,
        fdr,
    })
}

/// Incrementally maintained augmented distances for one draw.
///
/// Holds the squared distances of every point to every augmented centroid
/// (one length-`N` run per cluster) and the `K x K` squared centroid gaps;
/// adding a dimension costs one pass over a single data row.
pub(crate) struct Validator<'a> {
    labels: &'a [usize],
    k: usize,
    counts: Vec<usize>,
    dist: Vec<f64>,
    gaps: Vec<f64>,
}

impl<'a> Validator<'a> {
    /// Starts from the sketch-space distances of `sketch` to `centroids`.
    pub fn new(
        sketch: &DataMatrix,
        labels: &'a [usize],
        centroids: &DataMatrix,
        counter: &DistanceCounter,
    ) -> Self {
        let k = centroids.cols();
        let n = sketch.cols();
        let mut dist = Vec::with_capacity(n * k);
        for c in centroids.columns() {
            dist.extend(sketch.columns().map(|p| crate::data::sq_dist(p, c)));
        }
        counter.add((n * k * sketch.rows()) as u64);
        let mut gaps = vec![0.0; k * k];
        for a in 0..k {
            for b in 0..k {
                gaps[a * k + b] = crate::data::sq_dist(centroids.col(a), centroids.col(b));
            }
        }
        let mut counts = vec![0; k];
        for &l in labels {
            counts[l] += 1;
        }
        Self {
            labels,
            k,
            counts,
            dist,
            gaps,
        }
    }

    /// Adds one extra dimension whose values over all points are `row`.
    pub fn add_dim(&mut self, row: &[f64], counter: &DistanceCounter) {
        let k = self.k;
        let n = row.len();
        let mut c = vec![0.0; k];
        for (&v, &l) in row.iter().zip(self.labels) {
            c[l] += v;
        }
        for (cj, &m) in c.iter_mut().zip(&self.counts) {
            if m > 0 {
                *cj /= m as f64;
            }
        }
        for (d, &cj) in self.dist.chunks_exact_mut(n).zip(&c) {
            for (dp, &v) in d.iter_mut().zip(row) {
                let t = v - cj;
                *dp += t * t;
            }
        }
        counter.add((n * k) as u64);
        for a in 0..k {
            for b in 0..k {
                let t = c[a] - c[b];
                self.gaps[a * k + b] += t * t;
            }
        }
    }

    /// Validation-set size and FDR in the current augmented space.
    pub fn evaluate(&self) -> (usize, f64) {
        let k = self.k;
        let n = self.labels.len();
        let mut best = vec![0usize; n];
        let mut best_d = self.dist[..n].to_vec();
        for j in 1..k {
            for ((b, bd), &d) in best.iter_mut().zip(best_d.iter_mut()).zip(&self.dist[j * n..(j + 1) * n]) {
                if d < *bd {
                    *bd = d;
                    *b = j;
                }
            }
        }
        let mut spread = vec![0.0; k];
        let mut agree = 0;
        for (p, (&b, &l)) in best.iter().zip(self.labels).enumerate() {
            if b == l {
                agree += 1;
            }
            spread[l] += self.dist[l * n + p];
        }
        (agree, fdr_from_parts(&self.counts, &spread, &self.gaps))
    }
}
