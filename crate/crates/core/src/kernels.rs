//! Kernel descriptors and Gram matrices.
//!
//! The Gaussian kernel is the normalized isotropic density
//! `exp(-|x-y|^2 / (2 s2)) / (2 pi s2)^(D/2)`. Its normalizer underflows for a
//! few hundred dimensions, so [`KernelSpec::log_eval`] is provided for
//! log-domain consumers.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{dot, sq_dist, DataMatrix};
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum KernelKind {
    /// Isotropic Gaussian density with covariance `sigma2 * I`.
    Gaussian { sigma2: f64 },
    Linear,
    /// `tanh(alpha * x.y + b)`.
    Sigmoid { alpha: f64, b: f64 },
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelKind::Gaussian { sigma2 } => write!(f, "gaussian:{sigma2}"),
            KernelKind::Linear => write!(f, "linear"),
            KernelKind::Sigmoid { alpha, b } => write!(f, "sigmoid:{alpha},{b}"),
        }
    }
}

impl FromStr for KernelKind {
    type Err = Error;

    /// Parses `gaussian:<sigma2>`, `linear` or `sigmoid:<alpha>,<b>`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, args) = s.split_once(':').unwrap_or((s, ""));
        let nums = || -> Result<Vec<f64>> {
            args.split(',')
                .filter(|a| !a.trim().is_empty())
                .map(|a| {
                    a.trim()
                        .parse::<f64>()
                        .map_err(|_| invalid(format!("bad kernel parameter {a:?}")))
                })
                .collect()
        };
        match name.trim().to_ascii_lowercase().as_str() {
            "linear" => Ok(KernelKind::Linear),
            "gaussian" | "rbf" => match nums()?.as_slice() {
                [] => Ok(KernelKind::Gaussian { sigma2: 1.0 }),
                [s2] => Ok(KernelKind::Gaussian { sigma2: *s2 }),
                _ => Err(invalid("gaussian takes one parameter: sigma2")),
            },
            "sigmoid" => match nums()?.as_slice() {
                [] => Ok(KernelKind::Sigmoid { alpha: 0.0045, b: 0.11 }),
                [a, b] => Ok(KernelKind::Sigmoid { alpha: *a, b: *b }),
                _ => Err(invalid("sigmoid takes two parameters: alpha,b")),
            },
            other => Err(invalid(format!("unknown kernel {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub dim: usize,
}

impl KernelSpec {
    pub fn new(kind: KernelKind, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("kernel dimension must be at least 1"));
        }
        if let KernelKind::Gaussian { sigma2 } = kind {
            if !(sigma2 > 0.0 && sigma2.is_finite()) {
                return Err(invalid(format!("gaussian sigma2 must be positive, got {sigma2}")));
            }
        }
        if let KernelKind::Sigmoid { alpha, b } = kind {
            if !(alpha.is_finite() && b.is_finite()) {
                return Err(invalid("sigmoid parameters must be finite"));
            }
        }
        Ok(Self { kind, dim })
    }

    pub fn gaussian(sigma2: f64, dim: usize) -> Result<Self> {
        Self::new(KernelKind::Gaussian { sigma2 }, dim)
    }

    pub fn linear(dim: usize) -> Result<Self> {
        Self::new(KernelKind::Linear, dim)
    }

    pub fn sigmoid(alpha: f64, b: f64, dim: usize) -> Result<Self> {
        Self::new(KernelKind::Sigmoid { alpha, b }, dim)
    }

    /// Same kernel on `dim`-dimensional inputs.
    pub fn with_dim(&self, dim: usize) -> Result<Self> {
        Self::new(self.kind, dim)
    }

    pub fn sigma2(&self) -> Option<f64> {
        match self.kind {
            KernelKind::Gaussian { sigma2 } => Some(sigma2),
            _ => None,
        }
    }

    /// Kernel value without dimension checks.
    #[inline]
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match self.kind {
            KernelKind::Gaussian { sigma2 } => {
                (-sq_dist(x, y) / (2.0 * sigma2) + self.gaussian_log_norm(sigma2)).exp()
            }
            KernelKind::Linear => dot(x, y),
            KernelKind::Sigmoid { alpha, b } => (alpha * dot(x, y) + b).tanh(),
        }
    }

    /// Natural log of the Gaussian kernel value.
    pub fn log_eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        match self.kind {
            KernelKind::Gaussian { sigma2 } => {
                Ok(-sq_dist(x, y) / (2.0 * sigma2) + self.gaussian_log_norm(sigma2))
            }
            _ => Err(Error::Unsupported(format!("log_eval for {} kernel", self.kind))),
        }
    }

    /// `log` of the Gaussian peak value `(2 pi sigma2)^(-D/2)`.
    pub fn log_normalizer(&self) -> Result<f64> {
        match self.kind {
            KernelKind::Gaussian { sigma2 } => Ok(self.gaussian_log_norm(sigma2)),
            _ => Err(Error::Unsupported(format!("normalizer of {} kernel", self.kind))),
        }
    }

    #[inline]
    fn gaussian_log_norm(&self, sigma2: f64) -> f64 {
        -0.5 * self.dim as f64 * (2.0 * PI * sigma2).ln()
    }

    /// Gaussian with covariance doubled: the kernel that results from
    /// integrating the product of two Gaussian kernels.
    pub fn double_bandwidth(&self) -> Result<Self> {
        match self.kind {
            KernelKind::Gaussian { sigma2 } => Self::gaussian(2.0 * sigma2, self.dim),
            _ => Err(invalid(format!("bandwidth doubling needs a gaussian kernel, got {}", self.kind))),
        }
    }
}

/// Checked kernel evaluation.
pub fn kernel_eval(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != spec.dim || y.len() != spec.dim {
        return Err(invalid(format!(
            "kernel expects {}-dimensional inputs, got {} and {}",
            spec.dim,
            x.len(),
            y.len()
        )));
    }
    Ok(spec.eval(x, y))
}

/// Kernel values between the columns of two point sets, either cached or
/// evaluated on demand.
#[derive(Debug, Clone)]
pub struct GramView<'a> {
    spec: KernelSpec,
    rows: &'a DataMatrix,
    cols: &'a DataMatrix,
    values: Option<Vec<f64>>,
}

impl<'a> GramView<'a> {
    fn check(spec: &KernelSpec, p: &DataMatrix, q: &DataMatrix) -> Result<()> {
        if p.rows() != spec.dim || q.rows() != spec.dim {
            return Err(invalid(format!(
                "gram points must be {}-dimensional, got {} and {}",
                spec.dim,
                p.rows(),
                q.rows()
            )));
        }
        Ok(())
    }

    /// Evaluates lazily on every [`GramView::get`].
    pub fn on_demand(spec: KernelSpec, rows: &'a DataMatrix, cols: &'a DataMatrix) -> Result<Self> {
        Self::check(&spec, rows, cols)?;
        Ok(Self {
            spec,
            rows,
            cols,
            values: None,
        })
    }

    /// Materializes the full `|rows| x |cols|` matrix (row-major).
    pub fn cached(spec: KernelSpec, rows: &'a DataMatrix, cols: &'a DataMatrix) -> Result<Self> {
        Self::check(&spec, rows, cols)?;
        let nc = cols.cols();
        let mut values = vec![0.0; rows.cols() * nc];
        values
            .par_chunks_mut(nc)
            .enumerate()
            .for_each(|(i, out)| {
                let p = rows.col(i);
                for (j, v) in out.iter_mut().enumerate() {
                    *v = spec.eval(p, cols.col(j));
                }
            });
        Ok(Self {
            spec,
            rows,
            cols,
            values: Some(values),
        })
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn nrows(&self) -> usize {
        self.rows.cols()
    }

    pub fn ncols(&self) -> usize {
        self.cols.cols()
    }

    pub fn row_points(&self) -> &'a DataMatrix {
        self.rows
    }

    pub fn col_points(&self) -> &'a DataMatrix {
        self.cols
    }

    pub fn is_cached(&self) -> bool {
        self.values.is_some()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        match &self.values {
            Some(v) => v[i * self.cols.cols() + j],
            None => self.spec.eval(self.rows.col(i), self.cols.col(j)),
        }
    }

    /// Row-major cached values, if materialized.
    pub fn values(&self) -> Option<&[f64]> {
        self.values.as_deref()
    }
}

/// Full Gram matrix between the columns of `p` and `q`.
pub fn gram<'a>(spec: &KernelSpec, p: &'a DataMatrix, q: &'a DataMatrix) -> Result<GramView<'a>> {
    GramView::cached(*spec, p, q)
}
