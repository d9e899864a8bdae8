//! Centroids as coefficient vectors over the sketch points: `c_k = Phi b_k`.

use crate::data::{dot, DataMatrix};
use crate::error::{invalid, Result};
use crate::kernels::GramView;

/// Column `k` of `b` holds the weights of centroid `k` over the sketch points.
#[derive(Debug, Clone, PartialEq)]
pub struct CentroidCoefficients {
    /// `ν̌ x K`, one column per cluster.
    pub b: DataMatrix,
    /// Clusters without members; their column is zero.
    pub empty: Vec<bool>,
}

/// Hard-assignment coefficients: `1/|C_k|` on the members of cluster `k`.
pub fn centroid_coefficients(members: &[Vec<usize>], support: usize) -> Result<CentroidCoefficients> {
    if members.is_empty() || support == 0 {
        return Err(invalid("need at least one cluster and one support point"));
    }
    let mut seen = vec![false; support];
    let mut b = DataMatrix::zeros(support, members.len());
    for (k, m) in members.iter().enumerate() {
        for &i in m {
            if i >= support || seen[i] {
                return Err(invalid(format!("member {i} is out of range or repeated")));
            }
            seen[i] = true;
        }
        let w = 1.0 / m.len() as f64;
        for &i in m {
            b.set(i, k, w);
        }
    }
    if seen.contains(&false) {
        return Err(invalid("member lists do not cover every support point"));
    }
    Ok(CentroidCoefficients {
        b,
        empty: members.iter().map(Vec::is_empty).collect(),
    })
}

/// `k(x,x) - 2 b'k_x + b'Kb` for a square Gram `K` over the support,
/// cross-kernel vector `k_x` and self value `k(x,x)`.
pub fn coeff_distance(gram: &GramView<'_>, cross: &[f64], self_value: f64, b: &[f64]) -> Result<f64> {
    let n = gram.nrows();
    if gram.ncols() != n || cross.len() != n || b.len() != n {
        return Err(invalid("gram, cross-kernel vector and coefficients disagree in size"));
    }
    let mut quad = 0.0;
    for (i, &bi) in b.iter().enumerate() {
        if bi != 0.0 {
            quad += bi * (0..n).map(|j| gram.get(i, j) * b[j]).sum::<f64>();
        }
    }
    Ok(self_value - 2.0 * dot(b, cross) + quad)
}

/// Distance to the centroid mixture `sum_k pi_k c_k`, i.e. [`coeff_distance`]
/// with `b = B pi`.
pub fn coeff_distance_mixed(
    gram: &GramView<'_>,
    cross: &[f64],
    self_value: f64,
    coeffs: &CentroidCoefficients,
    pi: &[f64],
) -> Result<f64> {
    if pi.len() != coeffs.b.cols() {
        return Err(invalid("mixture weights must have one entry per cluster"));
    }
    let mut b = vec![0.0; coeffs.b.rows()];
    for (col, &w) in coeffs.b.columns().zip(pi) {
        for (bi, &c) in b.iter_mut().zip(col) {
            *bi += w * c;
        }
    }
    coeff_distance(gram, cross, self_value, &b)
}
