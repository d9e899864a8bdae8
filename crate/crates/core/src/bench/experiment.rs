//! Monte-Carlo experiment runner driven by a TOML config.
//!
//! ```toml
//! seed = 7
//! runs = 10
//! k = 5
//!
//! [data]
//! source = "synthetic"
//! d = 2000
//! n = 1000
//! rank = 2000
//!
//! [[methods]]
//! kind = "skeva"
//! grid = [10, 25, 50, 100, 200]
//! aug = 100
//! ```

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::{load_dense, load_libsvm, DataMatrix, DenseFormat, RngSeed};
use crate::diskeva::{diskeva_dims, diskeva_points, DiskevaParams};
use crate::error::{Error, Result};
use crate::kernels::{KernelKind, KernelSpec};
use crate::keskeva::{kernel_kmeans, keskeva, KeskevaParams};
use crate::kmeans::{self, DistanceCounter, KMeansConfig};
use crate::skeva_dims::{skeva_batch, skeva_sequential, RankFunction, SkevaParams};

use super::{gen_synthetic, quantile, relative_accuracy, rp_kmeans_baseline, SynthSpec};

fn default_runs() -> usize {
    10
}

fn default_restarts() -> usize {
    5
}

fn default_draws() -> usize {
    10
}

fn default_sigma2() -> f64 {
    1.0
}

/// Where the data of every Monte-Carlo run come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DataSource {
    /// Fresh synthetic data per run, `K` taken from the experiment.
    Synthetic {
        d: usize,
        n: usize,
        rank: usize,
        #[serde(default)]
        side: Option<f64>,
    },
    /// One dense text file reused by every run.
    Dense {
        path: PathBuf,
        #[serde(default)]
        format: DenseFormat,
    },
    /// One LIBSVM file reused by every run; its targets act as true labels.
    Libsvm { path: PathBuf, dims: usize },
}

/// Algorithms the runner knows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodKind {
    Kmeans,
    Skeva,
    Seskeva,
    Keskeva,
    DiskevaN,
    DiskevaD,
    Rp,
}

impl MethodKind {
    /// Name used in reports.
    pub fn label(self) -> &'static str {
        match self {
            Self::Kmeans => "kmeans",
            Self::Skeva => "skeva",
            Self::Seskeva => "seskeva",
            Self::Keskeva => "keskeva",
            Self::DiskevaN => "diskeva-n",
            Self::DiskevaD => "diskeva-d",
            Self::Rp => "rp-sign",
        }
    }

    fn tag(self) -> u64 {
        self as u64 + 1
    }
}

/// One method and the sketch sizes it is evaluated at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodConfig {
    pub kind: MethodKind,
    /// Sketch sizes (`ď`, `ν̌` or projection dimension); ignored by `kmeans`.
    #[serde(default)]
    pub grid: Vec<usize>,
    /// Validation size; 100 for row methods, the sketch size for point methods.
    #[serde(default)]
    pub aug: Option<usize>,
    #[serde(default = "default_draws")]
    pub draws: usize,
    #[serde(default)]
    pub rank: RankFunction,
    #[serde(default)]
    pub epsilon: f64,
    /// Kernel for `keskeva`, e.g. `"linear"` or `"gaussian:5"`.
    #[serde(default)]
    pub kernel: Option<String>,
    /// Parzen bandwidth for the divergence methods.
    #[serde(default = "default_sigma2")]
    pub sigma2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(default = "default_runs")]
    pub runs: usize,
    pub k: usize,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    pub data: DataSource,
    #[serde(default)]
    pub methods: Vec<MethodConfig>,
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    fn kmeans(&self) -> KMeansConfig {
        KMeansConfig::new(self.k).with_restarts(self.restarts)
    }
}

/// One (method, sketch size, run) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub method: String,
    pub param: usize,
    pub run: usize,
    pub seed: u64,
    /// Agreement with full K-means (kernel K-means for non-linear kernels).
    pub relative_accuracy: f64,
    /// Agreement with the true labels, when known.
    pub truth_accuracy: Option<f64>,
    pub wall_ms: f64,
    pub distance_terms: Option<u64>,
}

/// Medians and quartiles over the runs of one (method, sketch size) pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub method: String,
    pub param: usize,
    pub runs: usize,
    pub median_accuracy: f64,
    pub q1_accuracy: f64,
    pub q3_accuracy: f64,
    pub median_truth_accuracy: Option<f64>,
    pub median_wall_ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentReport {
    pub rows: Vec<ReportRow>,
}

impl ExperimentReport {
    /// Groups rows by (method, sketch size) in order of first appearance.
    pub fn summary(&self) -> Vec<SummaryRow> {
        let mut order: Vec<(String, usize)> = Vec::new();
        let mut groups: HashMap<(String, usize), Vec<&ReportRow>> = HashMap::new();
        for r in &self.rows {
            let key = (r.method.clone(), r.param);
            if !groups.contains_key(&key) {
                order.push(key.clone());
            }
            groups.entry(key).or_default().push(r);
        }
        order
            .into_iter()
            .map(|key| {
                let rows = &groups[&key];
                let sorted = |f: &dyn Fn(&ReportRow) -> Option<f64>| {
                    let mut v: Vec<f64> = rows.iter().filter_map(|r| f(r)).collect();
                    v.sort_by(f64::total_cmp);
                    v
                };
                let acc = sorted(&|r| Some(r.relative_accuracy));
                let truth = sorted(&|r| r.truth_accuracy);
                let ms = sorted(&|r| Some(r.wall_ms));
                SummaryRow {
                    method: key.0,
                    param: key.1,
                    runs: rows.len(),
                    median_accuracy: quantile(&acc, 0.5),
                    q1_accuracy: quantile(&acc, 0.25),
                    q3_accuracy: quantile(&acc, 0.75),
                    median_truth_accuracy: (!truth.is_empty()).then(|| quantile(&truth, 0.5)),
                    median_wall_ms: quantile(&ms, 0.5),
                }
            })
            .collect()
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `{"config": ..., "summary": [...]}`.
    pub fn write_summary_json(&self, config: &ExperimentConfig, path: impl AsRef<Path>) -> Result<()> {
        let doc = serde_json::json!({ "config": config, "summary": self.summary() });
        std::fs::write(path, serde_json::to_string_pretty(&doc)?)?;
        Ok(())
    }
}

/// Class index of each distinct target value, in order of first appearance.
fn classes(targets: &[f64]) -> Vec<usize> {
    let mut seen: Vec<f64> = Vec::new();
    targets
        .iter()
        .map(|t| match seen.iter().position(|s| s == t) {
            Some(i) => i,
            None => {
                seen.push(*t);
                seen.len() - 1
            }
        })
        .collect()
}

struct Reference {
    labels: Vec<usize>,
    wall_ms: f64,
    terms: u64,
}

fn parse_kernel(m: &MethodConfig, dim: usize) -> Result<KernelSpec> {
    let kind: KernelKind = m.kernel.as_deref().unwrap_or("linear").parse()?;
    KernelSpec::new(kind, dim)
}

/// Runs every (method, grid value, run) cell in that nesting order. Cells run
/// one after another so their wall times are comparable.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::default();
    if cfg.methods.is_empty() {
        return Ok(report);
    }
    if cfg.runs == 0 {
        return Err(Error::Config("runs must be at least 1".into()));
    }
    let kcfg = cfg.kmeans();
    let master = RngSeed::new(cfg.seed);
    let fixed = match &cfg.data {
        DataSource::Synthetic { .. } => None,
        DataSource::Dense { path, format } => Some((load_dense(path, format)?, None)),
        DataSource::Libsvm { path, dims } => {
            let (x, t) = load_libsvm(path, *dims)?;
            Some((x, Some(classes(&t))))
        }
    };
    for run in 0..cfg.runs {
        let run_seed = master.child(run as u64);
        let (x, truth) = match (&cfg.data, &fixed) {
            (DataSource::Synthetic { d, n, rank, side }, _) => {
                let spec = SynthSpec { d: *d, n: *n, k: cfg.k, rank: *rank, side: *side, seed: run_seed.master };
                let (x, t) = gen_synthetic(&spec)?;
                (x, Some(t))
            }
            (_, Some((x, t))) => (x.clone(), t.clone()),
            _ => unreachable!("file data loaded above"),
        };
        let start = Instant::now();
        let counter = DistanceCounter::new();
        let full = kmeans::best_of_restarts_counted(&x, &kcfg, &run_seed.child(0), &counter)?;
        let reference = Reference {
            labels: full.labels,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
            terms: counter.get(),
        };
        let mut kernel_refs: HashMap<String, Vec<usize>> = HashMap::new();
        for m in &cfg.methods {
            let grid: Vec<usize> = if m.kind == MethodKind::Kmeans { vec![0] } else { m.grid.clone() };
            for &param in &grid {
                let seed = run_seed.child(m.kind.tag() * 1_000_003 + param as u64);
                let row = run_cell(cfg, m, param, run, seed, &x, &kcfg, &reference, truth.as_deref(), &mut kernel_refs)?;
                log::info!(
                    "{} param={} run={} acc={:.4} ms={:.1}",
                    row.method,
                    row.param,
                    row.run,
                    row.relative_accuracy,
                    row.wall_ms
                );
                report.rows.push(row);
            }
        }
    }
    Ok(report)
}

#[allow(clippy::too_many_arguments)]
fn run_cell(
    cfg: &ExperimentConfig,
    m: &MethodConfig,
    param: usize,
    run: usize,
    seed: RngSeed,
    x: &DataMatrix,
    kcfg: &KMeansConfig,
    reference: &Reference,
    truth: Option<&[usize]>,
    kernel_refs: &mut HashMap<String, Vec<usize>>,
) -> Result<ReportRow> {
    let row_aug = m.aug.unwrap_or(100);
    let point_aug = m.aug.unwrap_or(param);
    let mut ref_labels: &[usize] = &reference.labels;
    let start = Instant::now();
    let (labels, wall_ms, terms) = match m.kind {
        MethodKind::Kmeans => (reference.labels.clone(), reference.wall_ms, Some(reference.terms)),
        MethodKind::Skeva | MethodKind::Seskeva => {
            let p = SkevaParams::new(cfg.k, param)
                .with_kmeans(*kcfg)
                .with_aug_dims(row_aug)
                .with_draws(m.draws)
                .with_rank(m.rank)
                .with_epsilon(m.epsilon);
            let out = if m.kind == MethodKind::Skeva { skeva_batch(x, &p, &seed)? } else { skeva_sequential(x, &p, &seed)? };
            let ms = start.elapsed().as_secs_f64() * 1e3;
            (out.clustering.labels, ms, Some(out.distance_terms))
        }
        MethodKind::Keskeva => {
            let spec = parse_kernel(m, x.rows())?;
            let p = KeskevaParams::new(cfg.k, spec, param, point_aug).with_kmeans(*kcfg).with_draws(m.draws);
            let out = keskeva(x, &p, &seed)?;
            let ms = start.elapsed().as_secs_f64() * 1e3;
            if spec.kind != KernelKind::Linear {
                let key = spec.kind.to_string();
                if !kernel_refs.contains_key(&key) {
                    let c = kernel_kmeans(x, &spec, kcfg, &seed.child(0))?;
                    kernel_refs.insert(key.clone(), c.labels);
                }
                ref_labels = &kernel_refs[&key];
            }
            (out.labels, ms, None)
        }
        MethodKind::DiskevaN | MethodKind::DiskevaD => {
            let aug = if m.kind == MethodKind::DiskevaN { point_aug } else { row_aug };
            let p = DiskevaParams::new(cfg.k, param, aug)
                .with_kmeans(*kcfg)
                .with_draws(m.draws)
                .with_sigma2(m.sigma2);
            let out = if m.kind == MethodKind::DiskevaN { diskeva_points(x, &p, &seed)? } else { diskeva_dims(x, &p, &seed)? };
            (out.clustering.labels, start.elapsed().as_secs_f64() * 1e3, None)
        }
        MethodKind::Rp => {
            let c = rp_kmeans_baseline(x, param, kcfg, &seed, false)?;
            (c.labels, start.elapsed().as_secs_f64() * 1e3, None)
        }
    };
    Ok(ReportRow {
        method: m.kind.label().to_string(),
        param,
        run,
        seed: seed.master,
        relative_accuracy: relative_accuracy(&labels, ref_labels, cfg.k)?,
        truth_accuracy: truth.map(|t| relative_accuracy(&labels, t, cfg.k)).transpose()?,
        wall_ms,
        distance_terms: terms,
    })
}
