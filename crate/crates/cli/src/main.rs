//! `cnnidx`: build, query and evaluate inverted tables over feature files.

use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cnnindex::baseline::{LshConfig, LshIndex};
use cnnindex::embed::EmbedConfig;
use cnnindex::eval::{self, BruteForceSearcher, EvalOptions, IndexSearcher, LshSearcher, QueryRun, Searcher, SweepSpec};
use cnnindex::index::{InvertedIndex, Quantizer, Scheme};
use cnnindex::pq::{self, PqCodebook, PqConfig};
use cnnindex::search::QueryConfig;
use cnnindex::tifc;
use cnnindex::vecio::{self, FeatureSet, SynthSpec};
use serde::{Deserialize, Serialize};
use serde_json::json;

/// `println!` that ignores a closed stdout, e.g. when piped into `head`.
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

#[derive(Parser, Debug)]
#[command(name = "cnnidx", version, about = "Inverted-table retrieval over global image features")]
struct Cli {
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a clustered synthetic database, queries and ground truth.
    Synth(SynthArgs),
    /// Train a product-quantization codebook.
    Train(TrainArgs),
    /// Build an inverted index.
    Build(BuildArgs),
    /// Query an index.
    Query(QueryArgs),
    /// Run a brute-force or LSH baseline.
    Baseline(BaselineArgs),
    /// Score a results file against ground truth.
    Evaluate(EvaluateArgs),
    /// Evaluate a parameter grid.
    Sweep(SweepArgs),
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, default_value_t = 100)]
    clusters: usize,
    #[arg(long, default_value_t = 100)]
    per_cluster: usize,
    #[arg(long, default_value_t = 64)]
    dim: usize,
    #[arg(long, default_value_t = 1.0)]
    cluster_stddev: f64,
    #[arg(long, default_value_t = 0.1)]
    noise_stddev: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory receiving database.bin, queries.bin and ground_truth.txt.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
struct PqArgs {
    /// Words per sub-codebook.
    #[arg(long = "K", default_value_t = 1000)]
    k: usize,
    /// Number of segments.
    #[arg(long = "M", default_value_t = 2)]
    m: usize,
    #[arg(long, default_value_t = 25)]
    kmeans_iters: usize,
    #[arg(long, default_value_t = 3)]
    kmeans_restarts: usize,
    #[arg(long, default_value_t = 0)]
    kmeans_seed: u64,
}

impl PqArgs {
    fn config(&self) -> PqConfig {
        PqConfig {
            segments: self.m,
            words_per_segment: self.k,
            kmeans_iters: self.kmeans_iters,
            kmeans_seed: self.kmeans_seed,
            kmeans_restarts: self.kmeans_restarts,
        }
    }
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    features: PathBuf,
    #[command(flatten)]
    pq: PqArgs,
    /// Train on every n-th vector only.
    #[arg(long, default_value_t = 1)]
    stride: usize,
    #[arg(long)]
    normalize: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct BuildArgs {
    #[arg(long)]
    features: PathBuf,
    #[arg(long, default_value = "ifc")]
    scheme: Scheme,
    /// Links per database vector.
    #[arg(long = "S", default_value_t = 40)]
    s: usize,
    /// Binary code length in bits.
    #[arg(long = "L", default_value_t = 512)]
    l: usize,
    #[command(flatten)]
    pq: PqArgs,
    /// Codebook training vectors (default: the indexed features).
    #[arg(long, conflicts_with = "codebook")]
    train_features: Option<PathBuf>,
    /// Pre-trained codebook from `train`.
    #[arg(long)]
    codebook: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    virtual_seed: u64,
    /// L2-normalize features before indexing.
    #[arg(long)]
    normalize: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct OutputArgs {
    /// Ranked id lists, one record per query.
    #[arg(long)]
    out: PathBuf,
    /// Deterministic run summary (default: <out>.summary.json).
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Per-query timings (default: <out>.timing.json).
    #[arg(long)]
    timing: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct QueryArgs {
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    /// Words probed per query (default: the index's S).
    #[arg(long = "W")]
    w: Option<usize>,
    /// Hamming threshold; entries need distance < T (default: ceil(0.35 L)).
    #[arg(long = "T")]
    t: Option<u32>,
    #[arg(long, default_value_t = 100)]
    topk: usize,
    #[arg(long)]
    normalize: bool,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Copy, Clone, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Method {
    Bf,
    Lsh,
}

#[derive(Args, Debug)]
struct BaselineArgs {
    #[arg(long, value_enum)]
    method: Method,
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    #[arg(long, default_value_t = 100)]
    topk: usize,
    #[arg(long, default_value_t = 8)]
    tables: usize,
    #[arg(long, default_value_t = 16)]
    bits: usize,
    #[arg(long, default_value_t = 0)]
    lsh_seed: u64,
    #[arg(long)]
    normalize: bool,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    results: PathBuf,
    #[arg(long)]
    ground_truth: PathBuf,
    /// Summary written by `query` or `baseline` (default: <results>.summary.json if present).
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Timing file written by `query` or `baseline` (default: <results>.timing.json if present).
    #[arg(long)]
    timing: Option<PathBuf>,
    /// Drop each query's own database image from its ranking and relevant set.
    #[arg(long)]
    exclude_self: bool,
    /// Report JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    database: Option<PathBuf>,
    #[arg(long)]
    queries: Option<PathBuf>,
    #[arg(long)]
    ground_truth: Option<PathBuf>,
    /// Output prefix; writes <out>.csv and <out>.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Serialize, Deserialize)]
struct RunSummary {
    config: serde_json::Value,
    database_size: usize,
    storage_bytes: u64,
    queries: Vec<QuerySummary>,
}

#[derive(Debug, Serialize, Deserialize)]
struct QuerySummary {
    query: usize,
    returned: usize,
    candidates: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct RunTiming {
    total_seconds: f64,
    mean_seconds: f64,
    per_query_seconds: Vec<f64>,
}

/// Exit status plus message.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: 1, message: message.into() }
    }

    fn data(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }
}

impl From<cnnindex::Error> for Failure {
    fn from(e: cnnindex::Error) -> Self {
        Self {
            code: if e.is_config() { 1 } else { 2 },
            message: e.to_string(),
        }
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn echo(config: &serde_json::Value) {
    say!("config {config}");
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> CliResult {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
    fs::write(path, text + "\n").map_err(|e| Failure::data(format!("{}: {e}", path.display())))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::data(format!("{}: {e}", path.display())))
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn load_features(path: &Path, normalize: bool) -> CliResult<FeatureSet> {
    let mut fs = vecio::read_feature_file(path)?;
    if normalize {
        fs.l2_normalize();
    }
    Ok(fs)
}

fn synth(args: &SynthArgs) -> CliResult {
    let spec = SynthSpec {
        n_clusters: args.clusters,
        points_per_cluster: args.per_cluster,
        dim: args.dim,
        cluster_stddev: args.cluster_stddev,
        noise_stddev: args.noise_stddev,
        seed: args.seed,
    };
    echo(&json!({ "command": "synth", "spec": spec, "out_dir": args.out_dir }));
    let data = vecio::generate_synthetic(&spec)?;
    fs::create_dir_all(&args.out_dir).map_err(|e| Failure::data(format!("{}: {e}", args.out_dir.display())))?;
    vecio::write_feature_file(&data.database, args.out_dir.join("database.bin"))?;
    vecio::write_feature_file(&data.queries, args.out_dir.join("queries.bin"))?;
    vecio::write_ground_truth(&data.ground_truth, args.out_dir.join("ground_truth.txt"))?;
    say!(
        "wrote {} database vectors, {} queries (dim {})",
        data.database.len(),
        data.queries.len(),
        spec.dim
    );
    Ok(())
}

fn stride_sample(fs: &FeatureSet, stride: usize) -> CliResult<FeatureSet> {
    if stride == 0 {
        return Err(Failure::usage("--stride must be >= 1"));
    }
    if stride == 1 {
        return Ok(fs.clone());
    }
    let mut out = FeatureSet::with_dim(fs.dim())?;
    for row in fs.iter().step_by(stride) {
        out.push(row)?;
    }
    Ok(out)
}

fn train(args: &TrainArgs) -> CliResult {
    let cfg = args.pq.config();
    echo(&json!({
        "command": "train",
        "features": args.features,
        "pq": cfg,
        "stride": args.stride,
        "normalize": args.normalize,
        "out": args.out,
    }));
    let features = load_features(&args.features, args.normalize)?;
    let sample = stride_sample(&features, args.stride)?;
    let cb = pq::train(&sample, &cfg)?;
    cb.save(&args.out)?;
    say!("trained {} x {} codebook on {} vectors", cfg.segments, cfg.words_per_segment, sample.len());
    Ok(())
}

fn build(args: &BuildArgs) -> CliResult {
    let features = load_features(&args.features, args.normalize)?;
    let embed = EmbedConfig { code_length: args.l };
    embed.validate(features.dim())?;
    let quantizer = match args.scheme {
        Scheme::Tifc => {
            echo(&json!({
                "command": "build",
                "features": args.features,
                "scheme": args.scheme,
                "S": args.s,
                "L": args.l,
                "virtual_seed": args.virtual_seed,
                "normalize": args.normalize,
                "out": args.out,
            }));
            Quantizer::Tifc(tifc::make_virtual_words(features.dim(), args.virtual_seed)?)
        }
        Scheme::Ifc => {
            let cb = match &args.codebook {
                Some(path) => PqCodebook::load(path)?,
                None => {
                    let train = match &args.train_features {
                        Some(path) => load_features(path, args.normalize)?,
                        None => features.clone(),
                    };
                    pq::train(&train, &args.pq.config())?
                }
            };
            echo(&json!({
                "command": "build",
                "features": args.features,
                "scheme": args.scheme,
                "S": args.s,
                "L": args.l,
                "pq": cb.config(),
                "train_features": args.train_features,
                "codebook": args.codebook,
                "normalize": args.normalize,
                "out": args.out,
            }));
            Quantizer::Ifc(cb)
        }
    };
    let ix = InvertedIndex::build_with_quantizer(&features, quantizer, args.s, embed)?;
    ix.save(&args.out)?;
    let stats = ix.stats();
    say!("stats {}", serde_json::to_string(&stats).unwrap_or_default());
    Ok(())
}

/// Runs every query, writes the id lists, summary and timing files.
fn run_and_write(searcher: &dyn Searcher, queries: &FeatureSet, config: serde_json::Value, output: &OutputArgs) -> CliResult {
    let start = Instant::now();
    let runs = eval::run_queries(searcher, queries)?;
    let total_seconds = start.elapsed().as_secs_f64();
    let lists: Vec<&[u32]> = runs.iter().map(|r| r.ranked.as_slice()).collect();
    vecio::write_id_lists(&lists, &output.out)?;

    let summary = RunSummary {
        config,
        database_size: searcher.database_size(),
        storage_bytes: searcher.storage_bytes(),
        queries: runs
            .iter()
            .map(|r| QuerySummary {
                query: r.query,
                returned: r.ranked.len(),
                candidates: r.candidates,
            })
            .collect(),
    };
    let summary_path = output.summary.clone().unwrap_or_else(|| with_suffix(&output.out, ".summary.json"));
    write_json(&summary, &summary_path)?;

    let per_query_seconds: Vec<f64> = runs.iter().map(|r| r.seconds).collect();
    let timing = RunTiming {
        total_seconds,
        mean_seconds: per_query_seconds.iter().sum::<f64>() / per_query_seconds.len().max(1) as f64,
        per_query_seconds,
    };
    let timing_path = output.timing.clone().unwrap_or_else(|| with_suffix(&output.out, ".timing.json"));
    write_json(&timing, &timing_path)?;
    say!(
        "answered {} queries, mean {:.6} s per query",
        runs.len(),
        timing.mean_seconds
    );
    Ok(())
}

fn query(args: &QueryArgs) -> CliResult {
    let ix = InvertedIndex::load(&args.index)?;
    let config = QueryConfig {
        assignment_count: args.w.unwrap_or(ix.link_count()),
        hamming_threshold: args.t.unwrap_or_else(|| eval::default_threshold(ix.embed().code_length)),
        top_k: args.topk,
    };
    config.validate(&ix)?;
    let echoed = json!({
        "command": "query",
        "index": args.index,
        "queries": args.queries,
        "scheme": ix.scheme(),
        "S": ix.link_count(),
        "L": ix.embed().code_length,
        "W": config.assignment_count,
        "T": config.hamming_threshold,
        "topk": config.top_k,
        "normalize": args.normalize,
    });
    echo(&echoed);
    let queries = load_features(&args.queries, args.normalize)?;
    if queries.dim() != ix.dim() {
        return Err(cnnindex::Error::DimensionMismatch { expected: ix.dim(), found: queries.dim() }.into());
    }
    let searcher = IndexSearcher { index: &ix, config };
    run_and_write(&searcher, &queries, echoed, &args.output)
}

fn baseline(args: &BaselineArgs) -> CliResult {
    let echoed = match args.method {
        Method::Bf => json!({
            "command": "baseline",
            "method": args.method,
            "features": args.features,
            "queries": args.queries,
            "topk": args.topk,
            "normalize": args.normalize,
        }),
        Method::Lsh => json!({
            "command": "baseline",
            "method": args.method,
            "features": args.features,
            "queries": args.queries,
            "topk": args.topk,
            "tables": args.tables,
            "bits": args.bits,
            "lsh_seed": args.lsh_seed,
            "normalize": args.normalize,
        }),
    };
    echo(&echoed);
    if args.topk == 0 {
        return Err(Failure::usage("--topk must be >= 1"));
    }
    let db = load_features(&args.features, args.normalize)?;
    let queries = load_features(&args.queries, args.normalize)?;
    if queries.dim() != db.dim() {
        return Err(cnnindex::Error::DimensionMismatch { expected: db.dim(), found: queries.dim() }.into());
    }
    match args.method {
        Method::Bf => {
            let searcher = BruteForceSearcher { database: &db, top_k: args.topk };
            run_and_write(&searcher, &queries, echoed, &args.output)
        }
        Method::Lsh => {
            let cfg = LshConfig {
                tables: args.tables,
                bits_per_table: args.bits,
                seed: args.lsh_seed,
            };
            let ix = LshIndex::build(&db, &cfg)?;
            let searcher = LshSearcher { index: &ix, database_size: db.len(), top_k: args.topk };
            run_and_write(&searcher, &queries, echoed, &args.output)
        }
    }
}

fn existing(explicit: &Option<PathBuf>, fallback: PathBuf) -> Option<PathBuf> {
    match explicit {
        Some(p) => Some(p.clone()),
        None => fallback.exists().then_some(fallback),
    }
}

fn evaluate(args: &EvaluateArgs) -> CliResult {
    let summary_path = existing(&args.summary, with_suffix(&args.results, ".summary.json"));
    let timing_path = existing(&args.timing, with_suffix(&args.results, ".timing.json"));
    echo(&json!({
        "command": "evaluate",
        "results": args.results,
        "ground_truth": args.ground_truth,
        "summary": summary_path,
        "timing": timing_path,
        "exclude_self": args.exclude_self,
        "out": args.out,
    }));
    let lists = vecio::read_id_lists(&args.results)?;
    let summary: Option<RunSummary> = summary_path.as_deref().map(read_json).transpose()?;
    let timing: Option<RunTiming> = timing_path.as_deref().map(read_json).transpose()?;
    let gt = vecio::read_ground_truth(&args.ground_truth, summary.as_ref().map(|s| s.database_size))?;

    for (name, len) in [
        ("summary", summary.as_ref().map(|s| s.queries.len())),
        ("timing", timing.as_ref().map(|t| t.per_query_seconds.len())),
    ] {
        if let Some(n) = len {
            if n != lists.len() {
                return Err(Failure::data(format!("{name} covers {n} queries but results hold {}", lists.len())));
            }
        }
    }
    let runs: Vec<QueryRun> = lists
        .into_iter()
        .enumerate()
        .map(|(i, ranked)| QueryRun {
            query: i,
            ranked,
            seconds: timing.as_ref().map_or(0.0, |t| t.per_query_seconds[i]),
            candidates: summary.as_ref().map_or(0, |s| s.queries[i].candidates),
        })
        .collect();
    let mut report = eval::evaluate(
        &runs,
        &gt,
        summary.as_ref().map_or(0, |s| s.database_size),
        summary.as_ref().map_or(0, |s| s.storage_bytes),
        EvalOptions { exclude_self: args.exclude_self },
    )?;
    report.config = summary.map_or(serde_json::Value::Null, |s| s.config);
    if let Some(out) = &args.out {
        write_json(&report, out)?;
    }
    say!("MAP {:.6}", report.map);
    if timing.is_some() {
        say!("mean_query_time_s {:.9}", report.mean_query_time_s);
    }
    if report.index_bytes > 0 {
        say!("scan_fraction {:.6}", report.scan_fraction);
        say!("index_bytes {}", report.index_bytes);
    }
    Ok(())
}

fn sweep(args: &SweepArgs) -> CliResult {
    let mut spec: SweepSpec = read_json(&args.spec)?;
    let spec_dir = args.spec.parent().unwrap_or(Path::new("."));
    let resolve = |flag: &Option<PathBuf>, field: &Option<String>, name: &str| -> CliResult<PathBuf> {
        match (flag, field) {
            (Some(p), _) => Ok(p.clone()),
            (None, Some(f)) => Ok(spec_dir.join(f)),
            (None, None) => Err(Failure::usage(format!("no {name} given on the command line or in the spec"))),
        }
    };
    let db_path = resolve(&args.database, &spec.database, "database")?;
    let q_path = resolve(&args.queries, &spec.queries, "queries")?;
    let gt_path = resolve(&args.ground_truth, &spec.ground_truth, "ground truth")?;
    spec.database = Some(db_path.display().to_string());
    spec.queries = Some(q_path.display().to_string());
    spec.ground_truth = Some(gt_path.display().to_string());
    echo(&serde_json::to_value(&spec).unwrap_or_default());

    let database = vecio::read_feature_file(&db_path)?;
    let queries = vecio::read_feature_file(&q_path)?;
    let ground_truth = vecio::read_ground_truth(&gt_path, Some(database.len()))?;
    let table = eval::sweep(
        &spec,
        &eval::Dataset {
            database: &database,
            queries: &queries,
            ground_truth: &ground_truth,
        },
    )?;

    let csv_path = with_suffix(&args.out, ".csv");
    let file = fs::File::create(&csv_path).map_err(|e| Failure::data(format!("{}: {e}", csv_path.display())))?;
    table.write_csv(file)?;
    write_json(&table, &with_suffix(&args.out, ".json"))?;
    for row in &table.rows {
        let values: Vec<String> = table
            .params
            .iter()
            .zip(&row.values)
            .map(|(p, v)| format!("{}={v}", p.name()))
            .collect();
        match (&row.report, &row.error) {
            (Some(r), _) => say!("{} MAP {:.6}", values.join(" "), r.map),
            (None, Some(e)) => say!("{} error: {e}", values.join(" ")),
            (None, None) => {}
        }
    }
    Ok(())
}

fn run(cli: &Cli) -> CliResult {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::usage("--threads must be >= 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure { code: 3, message: e.to_string() })?;
    }
    match &cli.command {
        Command::Synth(a) => synth(a),
        Command::Train(a) => train(a),
        Command::Build(a) => build(a),
        Command::Query(a) => query(a),
        Command::Baseline(a) => baseline(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Sweep(a) => sweep(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match panic::catch_unwind(AssertUnwindSafe(|| run(&cli))) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(f)) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
        Err(_) => {
            eprintln!("error: internal failure");
            ExitCode::from(3)
        }
    }
}
