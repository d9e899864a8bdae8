use super::*;
use rand::Rng;
use rand_distr::StandardNormal;
use approx::assert_abs_diff_eq;

/// Best agreement over every relabelling of `pred`.
fn brute_force_accuracy(pred: &[usize], reference: &[usize], k: usize) -> f64 {
    fn perms(k: usize) -> Vec<Vec<usize>> {
        if k == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in perms(k - 1) {
            for i in 0..k {
                let mut q = p.clone();
                q.insert(i, k - 1);
                out.push(q);
            }
        }
        out
    }
    perms(k)
        .iter()
        .map(|m| pred.iter().zip(reference).filter(|(p, r)| m[**p] == **r).count())
        .max()
        .unwrap() as f64
        / pred.len() as f64
}

#[test]
fn accuracy_examples() {
    assert_eq!(relative_accuracy(&[0, 1, 1, 2], &[0, 1, 1, 2], 3).unwrap(), 1.0);
    assert_eq!(relative_accuracy(&[0, 0, 1, 1], &[1, 1, 0, 0], 2).unwrap(), 1.0);
    assert_eq!(relative_accuracy(&[0, 0, 0, 1], &[0, 0, 1, 1], 2).unwrap(), 0.75);
    assert!(relative_accuracy(&[0, 1], &[0], 2).is_err());
}

#[test]
fn accuracy_matches_exhaustive_matching() {
    let mut rng = RngSeed::new(5).rng();
    for _ in 0..200 {
        let k = rng.random_range(1..=5);
        let n = rng.random_range(1..40);
        let a: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let b: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        assert_abs_diff_eq!(relative_accuracy(&a, &b, k).unwrap(), brute_force_accuracy(&a, &b, k), epsilon = 1e-15);
    }
}

#[test]
fn synthetic_shapes_and_reproducibility() {
    let spec = SynthSpec::new(7, 30, 3, 7, 11);
    let (x, y) = gen_synthetic(&spec).unwrap();
    assert_eq!((x.rows(), x.cols()), (7, 30));
    assert_eq!(y.iter().filter(|&&l| l == 2).count(), 10);
    assert_eq!(gen_synthetic(&spec).unwrap().0, x);
    assert_ne!(gen_synthetic(&SynthSpec::new(7, 30, 3, 7, 12)).unwrap().0, x);
    assert!(gen_synthetic(&SynthSpec::new(7, 31, 3, 7, 1)).is_err());
    assert!(gen_synthetic(&SynthSpec::new(7, 30, 3, 8, 1)).is_err());
    assert!(gen_synthetic(&SynthSpec::new(7, 30, 3, 0, 1)).is_err());
    let (x, y) = gen_synthetic(&SynthSpec::new(4, 3, 3, 4, 2)).unwrap();
    assert_eq!((x.cols(), y), (3, vec![0, 1, 2]));
}

#[test]
fn wide_separation_gives_perfect_self_accuracy() {
    let (x, y) = gen_synthetic(&SynthSpec::new(10, 200, 4, 10, 3).with_side(50.0)).unwrap();
    let c = kmeans::best_of_restarts(&x, &KMeansConfig::new(4), &RngSeed::new(1)).unwrap();
    assert_eq!(relative_accuracy(&c.labels, &y, 4).unwrap(), 1.0);
    assert_eq!(relative_accuracy(&c.labels, &c.labels, 4).unwrap(), 1.0);
}

#[test]
fn low_rank_covariance_is_flat() {
    use nalgebra::DMatrix;
    let (x, y) = gen_synthetic(&SynthSpec::new(5, 20_000, 2, 2, 4)).unwrap();
    for k in 0..2 {
        let pts: Vec<&[f64]> = x.columns().zip(&y).filter(|(_, &l)| l == k).map(|(p, _)| p).collect();
        let n = pts.len() as f64;
        let mean: Vec<f64> = (0..5).map(|i| pts.iter().map(|p| p[i]).sum::<f64>() / n).collect();
        let cov = DMatrix::from_fn(5, 5, |i, j| pts.iter().map(|p| (p[i] - mean[i]) * (p[j] - mean[j])).sum::<f64>() / (n - 1.0));
        let mut ev: Vec<f64> = cov.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        assert!(ev[..3].iter().all(|&e| e <= 0.05 * ev[4]), "{ev:?}");
    }
}

#[test]
fn cluster_means_converge() {
    let spec = SynthSpec::new(6, 6000, 3, 6, 8);
    let (x, y) = gen_synthetic(&spec).unwrap();
    let (c, _) = kmeans::cluster_means(&x, &y, 3);
    // regenerate the means from the same stream: the first D draws per cluster
    let mut rng = RngSeed::new(8).rng();
    let side = spec.side();
    for k in 0..3 {
        let m: Vec<f64> = (0..6).map(|_| rng.random_range(0.0..side)).collect();
        for _ in 0..2000 * 6 {
            let _: f64 = rng.sample(StandardNormal);
        }
        let err = crate::data::sq_dist(&m, c.col(k)).sqrt();
        assert!(err <= 4.0 * (6.0 * 3.0 / 6000.0f64).sqrt(), "cluster {k}: {err}");
    }
}

#[test]
fn identity_projection_is_plain_kmeans() {
    let (x, _) = gen_synthetic(&SynthSpec::new(6, 60, 3, 6, 1)).unwrap();
    let cfg = KMeansConfig::new(3);
    let s = RngSeed::new(2);
    let rp = rp_kmeans_baseline(&x, 6, &cfg, &s, true).unwrap();
    let plain = kmeans::best_of_restarts(&x, &cfg, &s.child(1)).unwrap();
    assert_eq!(rp.labels, plain.labels);
    assert!(rp_kmeans_baseline(&x, 5, &cfg, &s, true).is_err());
    assert!(rp_kmeans_baseline(&x, 7, &cfg, &s, false).is_err());
}

#[test]
fn projection_roughly_preserves_distances() {
    let (x, _) = gen_synthetic(&SynthSpec::new(2000, 50, 5, 2000, 3)).unwrap();
    let r = sign_projection(200, 2000, &RngSeed::new(4));
    let proj: Vec<Vec<f64>> = x.columns().map(|p| r.chunks_exact(2000).map(|row| dot(row, p)).collect()).collect();
    let mut rng = RngSeed::new(6).rng();
    for _ in 0..50 {
        let (a, b) = (rng.random_range(0..50), rng.random_range(0..50));
        if a == b {
            continue;
        }
        let orig = crate::data::sq_dist(x.col(a), x.col(b));
        let got = crate::data::sq_dist(&proj[a], &proj[b]);
        assert!((got / orig - 1.0).abs() <= 0.3, "{got} vs {orig}");
    }
}

#[test]
fn near_full_projection_matches_full_kmeans() {
    let (x, _) = gen_synthetic(&SynthSpec::new(40, 200, 4, 40, 9)).unwrap();
    let cfg = KMeansConfig::new(4);
    let full = kmeans::best_of_restarts(&x, &cfg, &RngSeed::new(1)).unwrap();
    let rp = rp_kmeans_baseline(&x, 39, &cfg, &RngSeed::new(2), false).unwrap();
    assert!(relative_accuracy(&rp.labels, &full.labels, 4).unwrap() >= 0.95);
}

#[test]
fn quantiles() {
    assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
    assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    assert_eq!(quantile(&[1.0, 2.0, 3.0, 4.0, 5.0], 0.25), 2.0);
    assert!(median(&[]).is_nan());
}

const SMALL: &str = r#"
seed = 3
runs = 2
k = 3

[data]
source = "synthetic"
d = 30
n = 90
rank = 30

[[methods]]
kind = "kmeans"

[[methods]]
kind = "skeva"
grid = [5, 10]
aug = 10
draws = 3

[[methods]]
kind = "seskeva"
grid = [5]
aug = 10
draws = 3
"#;

#[test]
fn experiment_rows_and_determinism() {
    let cfg = ExperimentConfig::from_toml_str(SMALL).unwrap();
    let a = run_experiment(&cfg).unwrap();
    assert_eq!(a.rows.len(), 2 * (1 + 2 + 1));
    let b = run_experiment(&cfg).unwrap();
    let strip = |r: &ReportRow| (r.method.clone(), r.param, r.run, r.seed, r.relative_accuracy, r.truth_accuracy, r.distance_terms);
    assert_eq!(a.rows.iter().map(strip).collect::<Vec<_>>(), b.rows.iter().map(strip).collect::<Vec<_>>());
    assert!(a.rows.iter().all(|r| (0.0..=1.0).contains(&r.relative_accuracy)));
    let s = a.summary();
    assert_eq!(s.len(), 4);
    assert_eq!((s[1].method.as_str(), s[1].param, s[1].runs), ("skeva", 5, 2));
    assert_eq!(s[0].median_accuracy, 1.0);

    let dir = tempfile::tempdir().unwrap();
    a.write_csv(dir.path().join("r.csv")).unwrap();
    a.write_summary_json(&cfg, dir.path().join("s.json")).unwrap();
    let csv = std::fs::read_to_string(dir.path().join("r.csv")).unwrap();
    assert!(csv.starts_with("method,param,run,seed,relative_accuracy"));
    assert_eq!(csv.lines().count(), 1 + a.rows.len());
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("s.json")).unwrap()).unwrap();
    assert_eq!(json["summary"].as_array().unwrap().len(), 4);
}

#[test]
fn experiment_edge_cases() {
    let empty = SMALL.split("[[methods]]").next().unwrap();
    let cfg = ExperimentConfig::from_toml_str(empty).unwrap();
    assert!(run_experiment(&cfg).unwrap().rows.is_empty());

    let bad = format!("{empty}\n[[methods]]\nkind = \"spectral\"\n");
    assert!(matches!(ExperimentConfig::from_toml_str(&bad), Err(crate::Error::Config(_))));

    let grid = format!("{empty}\n[[methods]]\nkind = \"rp\"\ngrid = [10, 15, 20, 25]\n");
    let cfg = ExperimentConfig::from_toml_str(&grid).unwrap();
    let rep = run_experiment(&cfg).unwrap();
    assert_eq!(rep.rows.len(), 4 * cfg.runs);
    assert!(rep.rows.iter().all(|r| r.method == "rp-sign"));
}

#[test]
fn experiment_covers_point_methods() {
    let cfg = r#"
seed = 1
runs = 1
k = 3

[data]
source = "synthetic"
d = 4
n = 300
rank = 4

[[methods]]
kind = "keskeva"
grid = [40]
kernel = "gaussian:4"
draws = 3

[[methods]]
kind = "diskeva-n"
grid = [40]
draws = 3

[[methods]]
kind = "diskeva-d"
grid = [2]
aug = 1
draws = 3
"#;
    let cfg = ExperimentConfig::from_toml_str(cfg).unwrap();
    let rep = run_experiment(&cfg).unwrap();
    assert_eq!(rep.rows.len(), 3);
    assert!(rep.rows.iter().all(|r| r.truth_accuracy.is_some()));
}
