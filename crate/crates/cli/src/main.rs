mod args;

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use serde::Serialize;
use serde_json::{json, Map, Value};
use skeva::bench::{gen_synthetic, relative_accuracy, rp_kmeans_baseline, run_experiment, ExperimentConfig, SynthSpec};
use skeva::data::{load_dense, load_libsvm, write_dense_csv, DenseFormat, Delimiter, Orientation};
use skeva::diskeva::{diskeva_dims, diskeva_points, DiskevaOutput, DiskevaParams};
use skeva::kernels::{KernelKind, KernelSpec};
use skeva::keskeva::{keskeva, KeskevaParams};
use skeva::kmeans::best_of_restarts;
use skeva::skeva_dims::{skeva_batch, skeva_sequential, GradientRule, SkevaOutput, SkevaParams};
use skeva::{Clustering, DataMatrix, KMeansConfig, RngSeed};

use args::{Cli, Command, Common, InputFormat};

/// Exit 2 for bad arguments, 1 for failures while running.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<skeva::Error> for Failure {
    fn from(e: skeva::Error) -> Self {
        match e {
            skeva::Error::InvalidArgument(_) | skeva::Error::Unsupported(_) | skeva::Error::Config(_) => {
                Failure::Usage(e.to_string())
            }
            other => Failure::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type CliResult<T> = Result<T, Failure>;
type Parts = (Vec<usize>, Vec<u8>, Map<String, Value>);

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Failure::Runtime(e.to_string()))?;
    }
    match cli.command {
        Command::Gen(a) => gen(a),
        Command::Bench(a) => bench(a),
        Command::Kmeans(a) => {
            check_common(&a.common)?;
            let x = load(&a.common)?;
            let start = Instant::now();
            let c = best_of_restarts(&x, &kmeans_cfg(&a.common), &RngSeed::new(a.common.seed))?;
            let ms = elapsed(start);
            let trace = history_trace(&c)?;
            let mut s = Map::new();
            s.insert("objective".into(), json!(c.objective));
            s.insert("iterations".into(), json!(c.iterations));
            finish(&a.common, &x, "kmeans", Map::new(), c.labels, trace, s, ms)
        }
        Command::Skeva(a) => {
            check_common(&a.common)?;
            check_sketch(a.d, a.draws)?;
            let x = load(&a.common)?;
            let p = SkevaParams::new(a.common.k, a.d)
                .with_kmeans(kmeans_cfg(&a.common))
                .with_aug_dims(a.daug)
                .with_draws(a.draws)
                .with_rank(a.rank.into());
            let params = params_json(&[("d", json!(a.d)), ("daug", json!(a.daug)), ("R", json!(a.draws)), ("f", json!(p.rank))]);
            let start = Instant::now();
            let o = skeva_batch(&x, &p, &RngSeed::new(a.common.seed))?;
            let ms = elapsed(start);
            let (labels, trace, s) = skeva_parts(o)?;
            finish(&a.common, &x, "skeva", params, labels, trace, s, ms)
        }
        Command::Seskeva(a) => {
            let b = &a.skeva;
            check_common(&b.common)?;
            check_sketch(b.d, b.draws)?;
            if !(a.eps >= 0.0 && a.eps.is_finite()) {
                return Err(usage("--eps must be a finite non-negative number"));
            }
            let x = load(&b.common)?;
            let rule = if a.reject_settled { GradientRule::RejectDraw } else { GradientRule::StopAugmenting };
            let p = SkevaParams::new(b.common.k, b.d)
                .with_kmeans(kmeans_cfg(&b.common))
                .with_aug_dims(b.daug)
                .with_draws(b.draws)
                .with_rank(b.rank.into())
                .with_epsilon(a.eps)
                .with_gradient_rule(rule);
            let params = params_json(&[
                ("d", json!(b.d)),
                ("daug", json!(b.daug)),
                ("R", json!(b.draws)),
                ("f", json!(p.rank)),
                ("eps", json!(a.eps)),
                ("gradient_rule", json!(rule)),
            ]);
            let start = Instant::now();
            let o = skeva_sequential(&x, &p, &RngSeed::new(b.common.seed))?;
            let ms = elapsed(start);
            let (labels, trace, s) = skeva_parts(o)?;
            finish(&b.common, &x, "seskeva", params, labels, trace, s, ms)
        }
        Command::Keskeva(a) => {
            check_common(&a.common)?;
            check_sketch(a.nu, a.draws)?;
            let kind: KernelKind = a.kernel.parse()?;
            let x = load(&a.common)?;
            let aug = a.nuaug.unwrap_or(a.nu);
            let spec = KernelSpec::new(kind, x.rows())?;
            let p = KeskevaParams::new(a.common.k, spec, a.nu, aug)
                .with_kmeans(kmeans_cfg(&a.common))
                .with_draws(a.draws);
            let params = params_json(&[("nu", json!(a.nu)), ("nuaug", json!(aug)), ("R", json!(a.draws)), ("kernel", json!(kind.to_string()))]);
            let start = Instant::now();
            let o = keskeva(&x, &p, &RngSeed::new(a.common.seed))?;
            let ms = elapsed(start);
            let trace = records_csv(&o.trace)?;
            let mut s = Map::new();
            s.insert("winner".into(), json!(o.winner));
            s.insert("sketch_objective".into(), json!(o.sketch_clustering.objective));
            finish(&a.common, &x, "keskeva", params, o.labels, trace, s, ms)
        }
        Command::DiskevaN(a) => {
            check_common(&a.common)?;
            check_sketch(a.nu, a.draws)?;
            check_sigma2(a.sigma2)?;
            let x = load(&a.common)?;
            let aug = a.nuaug.unwrap_or(a.nu);
            let p = DiskevaParams::new(a.common.k, a.nu, aug)
                .with_kmeans(kmeans_cfg(&a.common))
                .with_draws(a.draws)
                .with_sigma2(a.sigma2)
                .with_second_check(a.second_check.into());
            let params = params_json(&[
                ("nu", json!(a.nu)),
                ("nuaug", json!(aug)),
                ("R", json!(a.draws)),
                ("sigma2", json!(a.sigma2)),
                ("second_check", json!(p.second_check)),
            ]);
            let start = Instant::now();
            let o = diskeva_points(&x, &p, &RngSeed::new(a.common.seed))?;
            let ms = elapsed(start);
            let (labels, trace, s) = diskeva_parts(o)?;
            finish(&a.common, &x, "diskeva-n", params, labels, trace, s, ms)
        }
        Command::DiskevaD(a) => {
            check_common(&a.common)?;
            check_sketch(a.d, a.draws)?;
            check_sigma2(a.sigma2)?;
            let x = load(&a.common)?;
            let p = DiskevaParams::new(a.common.k, a.d, a.daug)
                .with_kmeans(kmeans_cfg(&a.common))
                .with_draws(a.draws)
                .with_sigma2(a.sigma2)
                .with_second_check(a.second_check.into());
            let params = params_json(&[
                ("d", json!(a.d)),
                ("daug", json!(a.daug)),
                ("R", json!(a.draws)),
                ("sigma2", json!(a.sigma2)),
                ("second_check", json!(p.second_check)),
            ]);
            let start = Instant::now();
            let o = diskeva_dims(&x, &p, &RngSeed::new(a.common.seed))?;
            let ms = elapsed(start);
            let (labels, trace, s) = diskeva_parts(o)?;
            finish(&a.common, &x, "diskeva-d", params, labels, trace, s, ms)
        }
        Command::Rp(a) => {
            check_common(&a.common)?;
            check_sketch(a.d, 1)?;
            let x = load(&a.common)?;
            let start = Instant::now();
            let c = rp_kmeans_baseline(&x, a.d, &kmeans_cfg(&a.common), &RngSeed::new(a.common.seed), false)?;
            let ms = elapsed(start);
            let trace = history_trace(&c)?;
            let mut s = Map::new();
            s.insert("projected_objective".into(), json!(c.objective));
            let params = params_json(&[("d", json!(a.d)), ("projection", json!("rp-sign"))]);
            finish(&a.common, &x, "rp", params, c.labels, trace, s, ms)
        }
    }
}

fn check_common(c: &Common) -> CliResult<()> {
    if c.k == 0 {
        return Err(usage("--K must be at least 1"));
    }
    if c.restarts == 0 {
        return Err(usage("--restarts must be at least 1"));
    }
    if c.format == InputFormat::Libsvm && c.dims.is_none() {
        return Err(usage("--D is required for libsvm input"));
    }
    if c.dims == Some(0) {
        return Err(usage("--D must be at least 1"));
    }
    Ok(())
}

fn check_sketch(size: usize, draws: usize) -> CliResult<()> {
    if size == 0 {
        return Err(usage("sketch size must be at least 1"));
    }
    if draws == 0 {
        return Err(usage("--R must be at least 1"));
    }
    Ok(())
}

fn check_sigma2(s: f64) -> CliResult<()> {
    if s > 0.0 && s.is_finite() {
        Ok(())
    } else {
        Err(usage("--sigma2 must be positive"))
    }
}

fn kmeans_cfg(c: &Common) -> KMeansConfig {
    KMeansConfig::new(c.k).with_restarts(c.restarts)
}

fn load(c: &Common) -> CliResult<DataMatrix> {
    let x = match c.format {
        InputFormat::Libsvm => load_libsvm(&c.input, c.dims.unwrap_or(0)).map(|(x, _)| x),
        InputFormat::Csv | InputFormat::Whitespace => {
            let format = DenseFormat {
                delimiter: if c.format == InputFormat::Csv { Delimiter::Comma } else { Delimiter::Whitespace },
                orientation: if c.points_as_columns { Orientation::PointsAsColumns } else { Orientation::PointsAsRows },
                skip_header: c.skip_header,
            };
            load_dense(&c.input, &format)
        }
    }
    .map_err(|e| match e {
        e @ skeva::Error::Parse { .. } => Failure::Runtime(e.to_string()),
        other => Failure::Runtime(format!("{}: {other}", c.input.display())),
    })?;
    if let Some(d) = c.dims {
        if d != x.rows() {
            return Err(Failure::Runtime(format!("input has {} features, --D says {d}", x.rows())));
        }
    }
    Ok(if c.standardize { x.standardize_rows() } else { x })
}

fn elapsed(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

fn params_json(pairs: &[(&str, Value)]) -> Map<String, Value> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

fn records_csv<T: Serialize>(rows: &[T]) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| Failure::Runtime(e.to_string()))
}

fn history_trace(c: &Clustering) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["step", "objective"])?;
    for (i, v) in c.history.iter().enumerate() {
        w.write_record([i.to_string(), v.to_string()])?;
    }
    w.into_inner().map_err(|e| Failure::Runtime(e.to_string()))
}

fn skeva_parts(o: SkevaOutput) -> CliResult<Parts> {
    let trace = records_csv(&o.trace)?;
    let mut s = Map::new();
    s.insert("objective".into(), json!(o.clustering.objective));
    s.insert("winner".into(), json!(o.winner));
    s.insert("fallback".into(), json!(o.fallback));
    s.insert("distance_terms".into(), json!(o.distance_terms));
    Ok((o.clustering.labels, trace, s))
}

fn diskeva_parts(o: DiskevaOutput) -> CliResult<Parts> {
    let trace = records_csv(&o.trace)?;
    let mut s = Map::new();
    s.insert("objective".into(), json!(o.clustering.objective));
    s.insert("winner".into(), json!(o.winner));
    s.insert("fallback".into(), json!(o.fallback));
    Ok((o.clustering.labels, trace, s))
}

/// Integer labels, one per line; distinct values become classes in order of
/// first appearance.
fn read_reference(path: &Path) -> CliResult<Vec<usize>> {
    let text = fs::read_to_string(path)?;
    let mut seen: Vec<i64> = Vec::new();
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let v: i64 = t
            .parse()
            .or_else(|_| t.parse::<f64>().map(|f| f as i64))
            .map_err(|_| Failure::Runtime(format!("{}:{}: not a label: {t:?}", path.display(), i + 1)))?;
        let class = seen.iter().position(|&s| s == v).unwrap_or_else(|| {
            seen.push(v);
            seen.len() - 1
        });
        out.push(class);
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    c: &Common,
    x: &DataMatrix,
    method: &str,
    params: Map<String, Value>,
    labels: Vec<usize>,
    trace: Vec<u8>,
    extra: Map<String, Value>,
    wall_ms: f64,
) -> CliResult<()> {
    let accuracy = match &c.reference {
        Some(p) => {
            let reference = read_reference(p)?;
            Some(relative_accuracy(&labels, &reference, c.k).map_err(|e| Failure::Runtime(e.to_string()))?)
        }
        None => None,
    };
    let mut summary = Map::new();
    summary.insert("method".into(), json!(method));
    summary.insert("input".into(), json!(c.input.display().to_string()));
    summary.insert("points".into(), json!(x.cols()));
    summary.insert("dims".into(), json!(x.rows()));
    summary.insert("k".into(), json!(c.k));
    summary.insert("restarts".into(), json!(c.restarts));
    summary.insert("seed".into(), json!(c.seed));
    summary.insert("standardize".into(), json!(c.standardize));
    summary.insert("params".into(), Value::Object(params));
    summary.insert("wall_ms".into(), json!(wall_ms));
    summary.insert("accuracy".into(), json!(accuracy));
    summary.extend(extra);

    fs::create_dir_all(&c.out_dir)?;
    let mut text = String::with_capacity(labels.len() * 2);
    for l in &labels {
        text.push_str(&l.to_string());
        text.push('\n');
    }
    fs::write(c.out_dir.join("labels.txt"), text)?;
    fs::write(c.out_dir.join("trace.csv"), trace)?;
    fs::write(
        c.out_dir.join("summary.json"),
        serde_json::to_string_pretty(&Value::Object(summary)).map_err(|e| Failure::Runtime(e.to_string()))? + "\n",
    )?;
    Ok(())
}

fn gen(a: args::GenArgs) -> CliResult<()> {
    if a.dims == 0 || a.points == 0 || a.k == 0 {
        return Err(usage("--D, --N and --K must be at least 1"));
    }
    let mut spec = SynthSpec::new(a.dims, a.points, a.k, a.rank.unwrap_or(a.dims), a.seed);
    if let Some(side) = a.side {
        if !(side > 0.0 && side.is_finite()) {
            return Err(usage("--side must be positive"));
        }
        spec = spec.with_side(side);
    }
    let (x, y) = gen_synthetic(&spec)?;
    if let Some(parent) = a.out.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    write_dense_csv(&a.out, &x).map_err(|e| Failure::Runtime(e.to_string()))?;
    if let Some(path) = &a.labels_out {
        let text: String = y.iter().map(|l| format!("{l}\n")).collect();
        fs::write(path, text)?;
    }
    Ok(())
}

fn bench(a: args::BenchArgs) -> CliResult<()> {
    let cfg = ExperimentConfig::from_path(&a.config).map_err(|e| match e {
        skeva::Error::Io(io) => Failure::Runtime(format!("{}: {io}", a.config.display())),
        other => Failure::from(other),
    })?;
    let report = run_experiment(&cfg)?;
    fs::create_dir_all(&a.out_dir)?;
    report.write_csv(a.out_dir.join("report.csv")).map_err(|e| Failure::Runtime(e.to_string()))?;
    report
        .write_summary_json(&cfg, a.out_dir.join("summary.json"))
        .map_err(|e| Failure::Runtime(e.to_string()))?;
    for row in report.summary() {
        println!(
            "{:<10} {:>6}  median accuracy {:.4}  median wall {:.1} ms",
            row.method, row.param, row.median_accuracy, row.median_wall_ms
        );
    }
    Ok(())
}
