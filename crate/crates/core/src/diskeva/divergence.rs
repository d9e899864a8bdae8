//! Parzen mixtures and their Cauchy-Schwarz divergence.
//!
//! For Gaussian mixtures every integral in the divergence is a sum of
//! doubled-bandwidth kernel values. The kernel normalizer and the mixture
//! weights appear equally in numerator and denominator, so sums are taken
//! over the unnormalized log-kernel `-|a-b|^2 / (4 s2)` with log-sum-exp.

use rayon::prelude::*;

use crate::data::{sq_dist, DataMatrix};
use crate::error::{invalid, Error, Result};
use crate::kernels::{KernelKind, KernelSpec};

/// `(1/m) sum_i k(x_i, .)` with a Gaussian kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct ParzenMixture {
    support: DataMatrix,
    spec: KernelSpec,
}

impl ParzenMixture {
    pub fn new(support: DataMatrix, spec: KernelSpec) -> Result<Self> {
        if !matches!(spec.kind, KernelKind::Gaussian { .. }) {
            return Err(Error::Unsupported(format!("Parzen mixture with a {} kernel", spec.kind)));
        }
        if support.rows() != spec.dim {
            return Err(invalid(format!(
                "support is {}-dimensional but the kernel expects {}",
                support.rows(),
                spec.dim
            )));
        }
        Ok(Self { support, spec })
    }

    /// Gaussian mixture with bandwidth `sigma2` over the columns of `support`.
    pub fn gaussian(support: DataMatrix, sigma2: f64) -> Result<Self> {
        let spec = KernelSpec::gaussian(sigma2, support.rows())?;
        Self::new(support, spec)
    }

    pub fn support(&self) -> &DataMatrix {
        &self.support
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn sigma2(&self) -> f64 {
        self.spec.sigma2().expect("gaussian mixture")
    }

    /// Density at `x`.
    pub fn density(&self, x: &[f64]) -> f64 {
        let m = self.support.cols() as f64;
        self.support.columns().map(|s| self.spec.eval(s, x)).sum::<f64>() / m
    }
}

/// `log sum exp` of `values`; `-inf` for an empty slice.
pub(crate) fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// `log sum_{i<na, j<nb} exp(term(i, j))`, row by row so memory stays `O(na + nb)`.
pub(crate) fn log_sum_exp_pairs<F>(na: usize, nb: usize, term: F) -> f64
where
    F: Fn(usize, usize) -> f64 + Sync,
{
    let rows: Vec<f64> = (0..na)
        .into_par_iter()
        .map_init(
            || vec![0.0; nb],
            |buf, i| {
                for (j, v) in buf.iter_mut().enumerate() {
                    *v = term(i, j);
                }
                log_sum_exp(buf)
            },
        )
        .collect();
    log_sum_exp(&rows)
}

/// `log sum_{a in P, b in Q} exp(-|a-b|^2 / (4 s2))`.
pub(crate) fn log_cross_sum(p: &DataMatrix, q: &DataMatrix, sigma2: f64) -> f64 {
    let scale = -0.25 / sigma2;
    log_sum_exp_pairs(p.cols(), q.cols(), |i, j| scale * sq_dist(p.col(i), q.col(j)))
}

/// Divergence from the three log cross sums; mixture sizes cancel.
#[inline]
pub(crate) fn cs_from_logs(pq: f64, pp: f64, qq: f64) -> f64 {
    -2.0 * pq + pp + qq
}

fn check_pair(p: &ParzenMixture, q: &ParzenMixture) -> Result<()> {
    if p.spec.dim != q.spec.dim {
        return Err(invalid("mixtures live in different dimensions"));
    }
    if p.sigma2() != q.sigma2() {
        return Err(invalid("mixtures use different bandwidths"));
    }
    Ok(())
}

/// Cauchy-Schwarz divergence `-log[(int pq)^2 / (int p^2 int q^2)]`.
pub fn cs_divergence(p: &ParzenMixture, q: &ParzenMixture) -> Result<f64> {
    check_pair(p, q)?;
    let s2 = p.sigma2();
    Ok(cs_from_logs(
        log_cross_sum(&p.support, &q.support, s2),
        log_cross_sum(&p.support, &p.support, s2),
        log_cross_sum(&q.support, &q.support, s2),
    ))
}

/// `log k_{2S}(0, 0) = -D/2 log(2 pi) - D/2 log(2 s2)`, the self term of the
/// single-point reference mixture at the origin.
pub fn origin_log_summand(spec: &KernelSpec) -> Result<f64> {
    spec.double_bandwidth()?.log_normalizer()
}

/// Divergence between `p` and the kernel centred at the origin.
pub fn cs_divergence_to_origin(p: &ParzenMixture) -> Result<f64> {
    let s2 = p.sigma2();
    let log_norm = origin_log_summand(&p.spec)?;
    let scale = -0.25 / s2;
    let m = p.support.cols() as f64;
    let terms: Vec<f64> = p.support.columns().map(|a| scale * a.iter().map(|v| v * v).sum::<f64>()).collect();
    // normalized form: -2 log(1/m sum k2(a,0)) + log(1/m^2 sum k2(a,b)) + log k2(0,0)
    let pq = log_norm + log_sum_exp(&terms) - m.ln();
    let pp = log_norm + log_cross_sum(&p.support, &p.support, s2) - 2.0 * m.ln();
    Ok(-2.0 * pq + pp + log_norm)
}

/// The same mixture with every support point padded by `extra` zeros.
pub fn zero_pad_mixture(p: &ParzenMixture, extra: usize) -> Result<ParzenMixture> {
    if extra == 0 {
        return Ok(p.clone());
    }
    let spec = p.spec.with_dim(p.spec.dim + extra)?;
    ParzenMixture::new(p.support.zero_pad_rows(extra), spec)
}
