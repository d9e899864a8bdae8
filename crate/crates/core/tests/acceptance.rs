//! Acceptance checks. Every criterion prints one PASS/FAIL line; the test
//! fails if any criterion does.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use skeva::bench::{gen_synthetic, median, relative_accuracy, SynthSpec};
use skeva::diskeva::{cs_divergence, diskeva_points, num_draws, zero_pad_mixture, DiskevaParams, ParzenMixture};
use skeva::kernels::{kernel_eval, GramView, KernelSpec};
use skeva::keskeva::{coeff_distance, kernel_kmeans_from_seeds, kernel_point_to_cluster_dist, keskeva, KeskevaParams, PointRef};
use skeva::kmeans::{best_of_restarts, lloyd_from_seeds};
use skeva::skeva_dims::{fdr, skeva_batch, skeva_sequential, SkevaParams};
use skeva::{DataMatrix, KMeansConfig, RngSeed};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn single_thread<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(f)
}

fn normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    (-(x - mean) * (x - mean) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}

/// Composite Simpson rule with `n` (even) panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

fn mixture_pdf(support: &[f64], var: f64, x: f64) -> f64 {
    support.iter().map(|&s| normal_pdf(x, s, var)).sum::<f64>() / support.len() as f64
}

fn c1_divergence_oracle() -> Outcome {
    let mut rng = RngSeed::new(101).rng();
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let var: f64 = [0.5, 1.0, 2.0][rng.random_range(0..3)];
        let p: Vec<f64> = (0..rng.random_range(1..=5)).map(|_| rng.random_range(-3.0..=3.0)).collect();
        let q: Vec<f64> = (0..rng.random_range(1..=5)).map(|_| rng.random_range(-3.0..=3.0)).collect();
        let reach = 3.0 + 12.0 * var.sqrt();
        let integral = |a: &[f64], b: &[f64]| {
            simpson(|x| mixture_pdf(a, var, x) * mixture_pdf(b, var, x), -reach, reach, 8000)
        };
        let quad = -2.0 * integral(&p, &q).ln() + integral(&p, &p).ln() + integral(&q, &q).ln();
        let mp = ParzenMixture::gaussian(DataMatrix::from_rows(&[&p]).unwrap(), var).unwrap();
        let mq = ParzenMixture::gaussian(DataMatrix::from_rows(&[&q]).unwrap(), var).unwrap();
        let closed = cs_divergence(&mp, &mq).unwrap();
        worst = worst.max((closed - quad).abs());
    }
    ensure(worst <= 1e-6, || format!("max |closed - quadrature| = {worst:.3e}"))?;
    Ok(format!("100 cases, max abs error {worst:.2e}"))
}

fn c2_convolution_identity() -> Outcome {
    let mut worst: f64 = 0.0;
    for var in [0.5f64, 1.0, 2.0] {
        let k = KernelSpec::gaussian(var, 1).unwrap();
        let k2 = KernelSpec::gaussian(2.0 * var, 1).unwrap();
        for a in -3..=3 {
            for b in -3..=3 {
                let (a, b) = (a as f64, b as f64);
                let reach = 3.0 + 14.0 * var.sqrt();
                let quad = simpson(
                    |x| kernel_eval(&k, &[a], &[x]).unwrap() * kernel_eval(&k, &[b], &[x]).unwrap(),
                    -reach,
                    reach,
                    8000,
                );
                let closed = kernel_eval(&k2, &[a], &[b]).unwrap();
                let by_hand = normal_pdf(a, b, 2.0 * var);
                worst = worst.max((quad - closed).abs()).max((closed - by_hand).abs());
            }
        }
    }
    ensure(worst <= 1e-8, || format!("max error {worst:.3e}"))?;
    Ok(format!("49 pairs x 3 bandwidths, max abs error {worst:.2e}"))
}

fn c3_kernel_vector_equivalence() -> Outcome {
    let mut rng = RngSeed::new(303).rng();
    for case in 0..20 {
        let n = rng.random_range(10..=200);
        let d = rng.random_range(1..=5);
        let k = rng.random_range(2..=4);
        let centers: Vec<Vec<f64>> = (0..k).map(|_| (0..d).map(|_| rng.random_range(-4.0..4.0)).collect()).collect();
        let cols: Vec<Vec<f64>> = (0..n)
            .map(|i| centers[i % k].iter().map(|c| c + rng.sample::<f64, _>(StandardNormal)).collect())
            .collect();
        let x = DataMatrix::from_columns(&cols).unwrap();
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut rng);
        let seeds = &idx[..k];
        let cfg = KMeansConfig::new(k);
        let vector = lloyd_from_seeds(&x, seeds, &cfg).unwrap();
        let kernel = kernel_kmeans_from_seeds(&x, &KernelSpec::linear(d).unwrap(), seeds, &cfg).unwrap();
        ensure(vector.labels == kernel.labels, || format!("case {case} (N={n}, D={d}, K={k}) labels differ"))?;
    }
    Ok("20 instances, identical labels".into())
}

fn c4_small_optimality() -> Outcome {
    let pts = [0.0, 1.0, 10.0, 11.0];
    let mut best = f64::INFINITY;
    for mask in 1u32..(1 << 4) - 1 {
        let mut sse = 0.0;
        for side in [true, false] {
            let members: Vec<f64> = (0..4).filter(|&i| (mask >> i & 1 == 1) == side).map(|i| pts[i]).collect();
            let mean = members.iter().sum::<f64>() / members.len() as f64;
            sse += members.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
        }
        best = best.min(sse);
    }
    ensure(best == 1.0, || format!("exhaustive optimum {best}"))?;
    let x = DataMatrix::from_rows(&[&pts]).unwrap();
    for s in 0..100 {
        let c = best_of_restarts(&x, &KMeansConfig::new(2), &RngSeed::new(s)).unwrap();
        ensure(c.objective == best, || format!("seed {s}: objective {}", c.objective))?;
        ensure(c.labels[0] == c.labels[1] && c.labels[2] == c.labels[3] && c.labels[0] != c.labels[2], || {
            format!("seed {s}: labels {:?}", c.labels)
        })?;
    }
    let f = fdr(
        &DataMatrix::from_rows(&[[0.0, 2.0, 10.0, 12.0]]).unwrap(),
        &[0, 0, 1, 1],
        &DataMatrix::from_rows(&[[1.0, 11.0]]).unwrap(),
    )
    .unwrap();
    ensure(f == 50.0, || format!("FDR {f}"))?;
    Ok("objective 1.0 on 100 seeds, FDR = 50".into())
}

struct SkevaTrend {
    grid: Vec<usize>,
    batch_acc: Vec<Vec<f64>>,
    seq_acc: Vec<Vec<f64>>,
    batch_ms: Vec<Vec<f64>>,
    full_ms: Vec<f64>,
    terms_ok: bool,
    worst_terms: (usize, u64, u64),
}

fn skeva_trend() -> SkevaTrend {
    let grid = vec![10, 25, 50, 100, 200];
    let runs = 10;
    let mut t = SkevaTrend {
        batch_acc: vec![Vec::new(); grid.len()],
        seq_acc: vec![Vec::new(); grid.len()],
        batch_ms: vec![Vec::new(); grid.len()],
        full_ms: Vec::new(),
        terms_ok: true,
        worst_terms: (0, 0, 0),
        grid,
    };
    let cfg = KMeansConfig::new(5);
    single_thread(|| {
        for run in 0..runs as u64 {
            let (x, _) = gen_synthetic(&SynthSpec::new(2000, 1000, 5, 2000, 500 + run)).unwrap();
            let start = Instant::now();
            let full = best_of_restarts(&x, &cfg, &RngSeed::new(run)).unwrap();
            t.full_ms.push(start.elapsed().as_secs_f64() * 1e3);
            for (g, &d) in t.grid.iter().enumerate() {
                let p = SkevaParams::new(5, d).with_aug_dims(100).with_draws(10);
                let seed = RngSeed::new(1000 + run);
                let start = Instant::now();
                let b = skeva_batch(&x, &p, &seed).unwrap();
                t.batch_ms[g].push(start.elapsed().as_secs_f64() * 1e3);
                let s = skeva_sequential(&x, &p, &seed).unwrap();
                t.batch_acc[g].push(relative_accuracy(&b.clustering.labels, &full.labels, 5).unwrap());
                t.seq_acc[g].push(relative_accuracy(&s.clustering.labels, &full.labels, 5).unwrap());
                if s.distance_terms > b.distance_terms {
                    t.terms_ok = false;
                    t.worst_terms = (d, s.distance_terms, b.distance_terms);
                }
            }
        }
    });
    t
}

fn c5_skeva_trend(t: &SkevaTrend) -> Outcome {
    let acc: Vec<f64> = t.batch_acc.iter().map(|v| median(v)).collect();
    let ms: Vec<f64> = t.batch_ms.iter().map(|v| median(v)).collect();
    let full = median(&t.full_ms);
    let detail = t
        .grid
        .iter()
        .zip(acc.iter().zip(&ms))
        .map(|(d, (a, m))| format!("d={d}: acc {a:.3}, {m:.1} ms"))
        .collect::<Vec<_>>()
        .join("; ");
    let detail = format!("{detail}; full K-means {full:.1} ms");
    ensure(acc.windows(2).all(|w| w[1] >= w[0]), || format!("accuracy decreases: {detail}"))?;
    ensure(*acc.last().unwrap() >= 0.90, || format!("accuracy at d=200 below 0.90: {detail}"))?;
    ensure(ms.iter().all(|&m| m < full), || format!("not faster than full K-means everywhere: {detail}"))?;
    Ok(detail)
}

fn c6_sequential_dominance(t: &SkevaTrend) -> Outcome {
    ensure(t.terms_ok, || {
        let (d, s, b) = t.worst_terms;
        format!("d={d}: sequential {s} distance terms > batch {b}")
    })?;
    let mut gaps = Vec::new();
    for (g, &d) in t.grid.iter().enumerate() {
        let gap = (median(&t.seq_acc[g]) - median(&t.batch_acc[g])).abs();
        ensure(gap <= 0.05, || format!("d={d}: median accuracy gap {gap:.3}"))?;
        gaps.push(gap);
    }
    Ok(format!(
        "terms never exceed batch; max median accuracy gap {:.3}",
        gaps.iter().copied().fold(0.0, f64::max)
    ))
}

fn c7_diskeva_points() -> Outcome {
    let cfg = KMeansConfig::new(5);
    let (mut acc, mut ms, mut full_ms) = (Vec::new(), Vec::new(), Vec::new());
    single_thread(|| {
        for run in 0..10u64 {
            let (x, _) = gen_synthetic(&SynthSpec::new(5, 20_000, 5, 5, 700 + run)).unwrap();
            let start = Instant::now();
            let full = best_of_restarts(&x, &cfg, &RngSeed::new(run)).unwrap();
            full_ms.push(start.elapsed().as_secs_f64() * 1e3);
            let p = DiskevaParams::new(5, 100, 100).with_draws(10).with_sigma2(1.0);
            let start = Instant::now();
            let o = diskeva_points(&x, &p, &RngSeed::new(2000 + run)).unwrap();
            ms.push(start.elapsed().as_secs_f64() * 1e3);
            acc.push(relative_accuracy(&o.clustering.labels, &full.labels, 5).unwrap());
        }
    });
    let (a, m, f) = (median(&acc), median(&ms), median(&full_ms));
    let detail = format!("median accuracy {a:.4}, {m:.1} ms vs full K-means {f:.1} ms");
    ensure(a >= 0.90, || detail.clone())?;
    ensure(m < f, || detail.clone())?;
    Ok(detail)
}

fn c8_num_draws() -> Outcome {
    let oracle = |p: f64, q: f64, m: usize| ((1.0 - p).ln() / (m as f64 * (1.0 - q).ln())).ceil() as usize;
    let a = num_draws(0.95, 0.5, 5).unwrap();
    let b = num_draws(0.95, 0.01, 10).unwrap();
    ensure(a == 1 && oracle(0.95, 0.5, 5) == 1, || format!("(0.95, 0.5, 5) -> {a}"))?;
    ensure(b == 30 && oracle(0.95, 0.01, 10) == 30, || format!("(0.95, 0.01, 10) -> {b}"))?;
    Ok("1 and 30".into())
}

fn random_mixture<R: Rng>(rng: &mut R, d: usize, var: f64) -> ParzenMixture {
    let m = rng.random_range(1..=6);
    let cols: Vec<Vec<f64>> = (0..m).map(|_| (0..d).map(|_| rng.random_range(-4.0..4.0)).collect()).collect();
    ParzenMixture::gaussian(DataMatrix::from_columns(&cols).unwrap(), var).unwrap()
}

fn c9_determinism_and_invariance() -> Outcome {
    let (x, _) = gen_synthetic(&SynthSpec::new(300, 400, 4, 300, 9)).unwrap();
    let (pts, _) = gen_synthetic(&SynthSpec::new(5, 2000, 4, 5, 10)).unwrap();
    let seed = RngSeed::new(42);
    let skp = SkevaParams::new(4, 30).with_aug_dims(50);
    let fingerprint = || -> Vec<String> {
        let b = skeva_batch(&x, &skp, &seed).unwrap();
        let s = skeva_sequential(&x, &skp.clone().with_epsilon(1e-3), &seed).unwrap();
        let k = keskeva(&pts, &KeskevaParams::new(4, KernelSpec::gaussian(10.0, 5).unwrap(), 150, 150), &seed).unwrap();
        let dn = diskeva_points(&pts, &DiskevaParams::new(4, 80, 80), &seed).unwrap();
        let bits = |v: &[f64]| v.iter().map(|f| f.to_bits()).collect::<Vec<_>>();
        vec![
            format!("{:?}", b.clustering.labels),
            format!("{:?}", bits(b.clustering.centroids.as_slice())),
            format!("{:?}", b.trace.iter().map(|r| (r.score.to_bits(), r.validation_size, r.distance_terms)).collect::<Vec<_>>()),
            format!("{:?}", s.clustering.labels),
            format!("{:?}", s.trace.iter().map(|r| (r.score.to_bits(), r.aug_dims_used, r.status)).collect::<Vec<_>>()),
            format!("{:?}", k.labels),
            format!("{:?}", dn.clustering.labels),
            format!("{:?}", dn.trace.iter().map(|r| (r.check1.to_bits(), r.check2.map(f64::to_bits), r.accepted)).collect::<Vec<_>>()),
        ]
    };
    ensure(fingerprint() == fingerprint(), || "repeated seeded runs differ".into())?;

    let mut rng = RngSeed::new(909).rng();
    for trial in 0..1000 {
        let k = rng.random_range(2..=6);
        let n = rng.random_range(1..=60);
        let pred: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let reference: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let mut perm: Vec<usize> = (0..k).collect();
        perm.shuffle(&mut rng);
        let relabeled: Vec<usize> = pred.iter().map(|&l| perm[l]).collect();
        let a = relative_accuracy(&pred, &reference, k).unwrap();
        let b = relative_accuracy(&relabeled, &reference, k).unwrap();
        ensure(a == b, || format!("trial {trial}: accuracy {a} vs permuted {b}"))?;
    }

    let mut worst_pad: f64 = 0.0;
    let mut min_div = f64::INFINITY;
    for trial in 0..1000 {
        let d = rng.random_range(1..=4);
        let var = rng.random_range(0.2..3.0);
        let p = random_mixture(&mut rng, d, var);
        let q = random_mixture(&mut rng, d, var);
        let pq = cs_divergence(&p, &q).unwrap();
        let pp = cs_divergence(&p, &p).unwrap();
        ensure(pq >= -1e-12, || format!("trial {trial}: negative divergence {pq}"))?;
        ensure(pp.abs() <= 1e-12, || format!("trial {trial}: self divergence {pp}"))?;
        min_div = min_div.min(pq);
        let extra = rng.random_range(1..=5);
        let padded = cs_divergence(&zero_pad_mixture(&p, extra).unwrap(), &zero_pad_mixture(&q, extra).unwrap()).unwrap();
        worst_pad = worst_pad.max((padded - pq).abs());
    }
    ensure(worst_pad <= 1e-10, || format!("zero padding changes divergence by {worst_pad:.3e}"))?;
    Ok(format!(
        "reruns identical; 1000 permutations invariant; min divergence {min_div:.3e}; padding drift {worst_pad:.1e}"
    ))
}

fn c10_coefficient_oracle() -> Outcome {
    let mut rng = RngSeed::new(1010).rng();
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let d = rng.random_range(1..=4);
        let nu = rng.random_range(2..=12);
        let cols: Vec<Vec<f64>> = (0..nu).map(|_| (0..d).map(|_| rng.sample(StandardNormal)).collect()).collect();
        let support = DataMatrix::from_columns(&cols).unwrap();
        let spec = if case % 2 == 0 {
            KernelSpec::gaussian(rng.random_range(0.3..3.0), d).unwrap()
        } else {
            KernelSpec::linear(d).unwrap()
        };
        let g = GramView::cached(spec, &support, &support).unwrap();
        let size = rng.random_range(1..=nu);
        let mut idx: Vec<usize> = (0..nu).collect();
        idx.shuffle(&mut rng);
        let members = &idx[..size];
        let mut b = vec![0.0; nu];
        for &m in members {
            b[m] = 1.0 / size as f64;
        }
        let q: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let cross: Vec<f64> = support.columns().map(|s| kernel_eval(&spec, &q, s).unwrap()).collect();
        let self_value = kernel_eval(&spec, &q, &q).unwrap();
        let via_b = coeff_distance(&g, &cross, self_value, &b).unwrap();
        let direct = kernel_point_to_cluster_dist(&g, PointRef::External(&q), members).unwrap();
        worst = worst.max((via_b - direct).abs());
        let row = members[0];
        let cross_row: Vec<f64> = (0..nu).map(|j| g.get(row, j)).collect();
        let via_b_row = coeff_distance(&g, &cross_row, g.get(row, row), &b).unwrap();
        let direct_row = kernel_point_to_cluster_dist(&g, PointRef::Row(row), members).unwrap();
        worst = worst.max((via_b_row - direct_row).abs());
    }
    ensure(worst <= 1e-12, || format!("max difference {worst:.3e}"))?;
    Ok(format!("100 instances, max abs difference {worst:.2e}"))
}

#[test]
fn acceptance() {
    let total = Instant::now();
    let mut failed = Vec::new();
    let mut record = |n: usize, name: &str, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {n:>2} PASS  {name} ({secs:.1} s): {detail}"),
            Err(detail) => {
                println!("criterion {n:>2} FAIL  {name} ({secs:.1} s): {detail}");
                failed.push(n);
            }
        }
    };
    record(1, "divergence vs quadrature", &mut c1_divergence_oracle);
    record(2, "gaussian convolution identity", &mut c2_convolution_identity);
    record(3, "linear kernel equals vector K-means", &mut c3_kernel_vector_equivalence);
    record(4, "small-instance optimum and FDR", &mut c4_small_optimality);
    let trend_start = Instant::now();
    let trend = catch_unwind(skeva_trend);
    let trend_secs = trend_start.elapsed().as_secs_f64();
    match &trend {
        Ok(t) => {
            record(5, "batch sketching trend", &mut || c5_skeva_trend(t).map(|d| format!("{d} [{trend_secs:.0} s total]")));
            record(6, "sequential dominance", &mut || c6_sequential_dominance(t));
        }
        Err(_) => {
            record(5, "batch sketching trend", &mut || Err("experiment panicked".into()));
            record(6, "sequential dominance", &mut || Err("experiment panicked".into()));
        }
    }
    record(7, "divergence-selected point sketching", &mut c7_diskeva_points);
    record(8, "number of draws", &mut c8_num_draws);
    record(9, "determinism and invariances", &mut c9_determinism_and_invariance);
    record(10, "centroid coefficient oracle", &mut c10_coefficient_oracle);
    println!("acceptance finished in {:.1} s", total.elapsed().as_secs_f64());
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
