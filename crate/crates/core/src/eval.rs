//! Accuracy, timing and storage measurement, and parameter sweeps.
//!
//! AP follows the usual retrieval definition: the mean over relevant ids of
//! the precision at the rank where each is retrieved, with unretrieved
//! relevant ids contributing zero.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::baseline::{self, LshIndex};
use crate::embed::EmbedConfig;
use crate::error::{Error, Result};
use crate::index::{BuildConfig, InvertedIndex, Quantizer, Scheme};
use crate::pq::{self, PqCodebook, PqConfig};
use crate::search::{self, QueryConfig};
use crate::tifc;
use crate::vecio::{FeatureSet, GroundTruth};

pub fn average_precision(ranked: &[u32], relevant: &BTreeSet<u32>) -> Result<f64> {
    if relevant.is_empty() {
        return Err(Error::InvalidInput("average precision needs a non-empty relevant set".into()));
    }
    let mut seen = HashSet::with_capacity(ranked.len());
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (pos, id) in ranked.iter().enumerate() {
        if !seen.insert(*id) {
            continue;
        }
        if relevant.contains(id) {
            hits += 1;
            sum += hits as f64 / (pos + 1) as f64;
        }
    }
    Ok(sum / relevant.len() as f64)
}

/// Threshold used when none is given: 35% of the code length, rounded up
/// (180 for 512-bit codes).
pub fn default_threshold(code_length: usize) -> u32 {
    (code_length as f64 * 0.35).ceil() as u32
}

/// Something that answers queries with a ranked id list.
pub trait Searcher: Sync {
    fn search(&self, q: &[f32]) -> Result<Vec<u32>>;

    /// Size of the candidate set examined before ranking.
    fn candidates(&self, q: &[f32]) -> Result<usize>;

    /// Vectors the candidate fraction is measured against.
    fn database_size(&self) -> usize;

    /// Bytes the method needs to hold its search structure.
    fn storage_bytes(&self) -> u64;
}

pub struct IndexSearcher<'a> {
    pub index: &'a InvertedIndex,
    pub config: QueryConfig,
}

impl Searcher for IndexSearcher<'_> {
    fn search(&self, q: &[f32]) -> Result<Vec<u32>> {
        Ok(search::query(self.index, q, &self.config)?.ids())
    }

    fn candidates(&self, q: &[f32]) -> Result<usize> {
        Ok(search::candidate_set(self.index, q, self.config.assignment_count)?.len())
    }

    fn database_size(&self) -> usize {
        self.index.indexed_count()
    }

    fn storage_bytes(&self) -> u64 {
        self.index.stats().file_bytes
    }
}

pub struct BruteForceSearcher<'a> {
    pub database: &'a FeatureSet,
    pub top_k: usize,
}

impl Searcher for BruteForceSearcher<'_> {
    fn search(&self, q: &[f32]) -> Result<Vec<u32>> {
        Ok(baseline::brute_force(self.database, q, self.top_k)?
            .into_iter()
            .map(|(id, _)| id)
            .collect())
    }

    fn candidates(&self, _q: &[f32]) -> Result<usize> {
        Ok(self.database.len())
    }

    fn database_size(&self) -> usize {
        self.database.len()
    }

    fn storage_bytes(&self) -> u64 {
        (self.database.len() * (4 + 4 * self.database.dim())) as u64
    }
}

pub struct LshSearcher<'a> {
    pub index: &'a LshIndex<'a>,
    pub database_size: usize,
    pub top_k: usize,
}

impl Searcher for LshSearcher<'_> {
    fn search(&self, q: &[f32]) -> Result<Vec<u32>> {
        Ok(self.index.query(q, self.top_k)?.into_iter().map(|(id, _)| id).collect())
    }

    fn candidates(&self, q: &[f32]) -> Result<usize> {
        Ok(self.index.candidates(q)?.len())
    }

    fn database_size(&self) -> usize {
        self.database_size
    }

    fn storage_bytes(&self) -> u64 {
        self.index.memory_bytes() as u64
    }
}

/// Outcome of one query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRun {
    pub query: usize,
    pub ranked: Vec<u32>,
    pub seconds: f64,
    pub candidates: usize,
}

/// Runs every query sequentially. Each query is timed on its own; candidate
/// counting happens outside the timed region.
pub fn run_queries(searcher: &dyn Searcher, queries: &FeatureSet) -> Result<Vec<QueryRun>> {
    let mut runs = Vec::with_capacity(queries.len());
    for (i, q) in queries.iter().enumerate() {
        let start = Instant::now();
        let ranked = searcher.search(q)?;
        let seconds = start.elapsed().as_secs_f64();
        runs.push(QueryRun {
            query: i,
            ranked,
            seconds,
            candidates: searcher.candidates(q)?,
        });
    }
    Ok(runs)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalOptions {
    /// Drop each query's own database image (the smallest id of its relevant
    /// set) from both its ranking and its relevant set.
    pub exclude_self: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub map: f64,
    /// `(query id, AP)` in query order.
    pub per_query_ap: Vec<(usize, f64)>,
    pub mean_query_time_s: f64,
    /// Mean candidate count over the database size.
    pub scan_fraction: f64,
    pub index_bytes: u64,
    pub queries: usize,
    #[serde(default)]
    pub config: serde_json::Value,
}

/// Aggregates AP over every query in `gt`.
pub fn evaluate(
    runs: &[QueryRun],
    gt: &GroundTruth,
    database_size: usize,
    index_bytes: u64,
    opts: EvalOptions,
) -> Result<EvalReport> {
    if gt.is_empty() {
        return Err(Error::InvalidInput("ground truth holds no queries".into()));
    }
    let by_query: HashMap<usize, &QueryRun> = runs.iter().map(|r| (r.query, r)).collect();
    let mut per_query_ap = Vec::with_capacity(gt.len());
    let mut seconds = 0.0;
    let mut candidates = 0usize;
    for (q, relevant) in gt.iter() {
        let run = by_query
            .get(&q)
            .ok_or_else(|| Error::InvalidInput(format!("no results for query {q}")))?;
        let ap = if opts.exclude_self {
            let own = *relevant.first().expect("relevant sets are non-empty");
            let mut rest = relevant.clone();
            rest.remove(&own);
            if rest.is_empty() {
                return Err(Error::InvalidInput(format!(
                    "query {q} has no relevant ids besides itself"
                )));
            }
            let ranked: Vec<u32> = run.ranked.iter().copied().filter(|&id| id != own).collect();
            average_precision(&ranked, &rest)?
        } else {
            average_precision(&run.ranked, relevant)?
        };
        per_query_ap.push((q, ap));
        seconds += run.seconds;
        candidates += run.candidates;
    }
    let n = per_query_ap.len() as f64;
    Ok(EvalReport {
        map: per_query_ap.iter().map(|p| p.1).sum::<f64>() / n,
        per_query_ap,
        mean_query_time_s: seconds / n,
        scan_fraction: if database_size == 0 {
            0.0
        } else {
            candidates as f64 / n / database_size as f64
        },
        index_bytes,
        queries: gt.len(),
        config: serde_json::Value::Null,
    })
}

/// Parameters a sweep can vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Param {
    L,
    T,
    S,
    W,
    K,
    M,
}

impl Param {
    pub fn name(self) -> &'static str {
        match self {
            Param::L => "L",
            Param::T => "T",
            Param::S => "S",
            Param::W => "W",
            Param::K => "K",
            Param::M => "M",
        }
    }
}

/// One fully resolved parameter set. Missing fields take their defaults
/// when deserialized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepPoint {
    pub scheme: Scheme,
    pub code_length: usize,
    /// `None` means [`default_threshold`] of the code length.
    pub hamming_threshold: Option<u32>,
    pub link_count: usize,
    /// `None` means `W = S`.
    pub assignment_count: Option<usize>,
    pub words_per_segment: usize,
    pub segments: usize,
    pub top_k: usize,
    pub kmeans_iters: usize,
    pub kmeans_restarts: usize,
    pub kmeans_seed: u64,
    pub virtual_word_seed: u64,
}

impl Default for SweepPoint {
    fn default() -> Self {
        Self {
            scheme: Scheme::Ifc,
            code_length: 512,
            hamming_threshold: None,
            link_count: 40,
            assignment_count: None,
            words_per_segment: 1000,
            segments: 2,
            top_k: 100,
            kmeans_iters: 25,
            kmeans_restarts: 3,
            kmeans_seed: 0,
            virtual_word_seed: 0,
        }
    }
}

impl SweepPoint {
    fn set(&mut self, p: Param, v: u64) {
        match p {
            Param::L => self.code_length = v as usize,
            Param::T => self.hamming_threshold = Some(v as u32),
            Param::S => self.link_count = v as usize,
            Param::W => self.assignment_count = Some(v as usize),
            Param::K => self.words_per_segment = v as usize,
            Param::M => self.segments = v as usize,
        }
    }

    pub fn build_config(&self) -> BuildConfig {
        BuildConfig {
            scheme: self.scheme,
            link_count: self.link_count,
            embed: EmbedConfig {
                code_length: self.code_length,
            },
            pq: self.pq_config(),
            virtual_word_seed: self.virtual_word_seed,
        }
    }

    pub fn pq_config(&self) -> PqConfig {
        PqConfig {
            segments: self.segments,
            words_per_segment: self.words_per_segment,
            kmeans_iters: self.kmeans_iters,
            kmeans_seed: self.kmeans_seed,
            kmeans_restarts: self.kmeans_restarts,
        }
    }

    pub fn query_config(&self) -> QueryConfig {
        QueryConfig {
            assignment_count: self.assignment_count.unwrap_or(self.link_count),
            hamming_threshold: self
                .hamming_threshold
                .unwrap_or_else(|| default_threshold(self.code_length)),
            top_k: self.top_k,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridAxis {
    pub param: Param,
    pub values: Vec<u64>,
}

/// A grid over any of L, T, S, W, K, M around a base point. Points are
/// visited with the first axis outermost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    #[serde(default)]
    pub base: SweepPoint,
    pub grid: Vec<GridAxis>,
    #[serde(default)]
    pub options: EvalOptions,
    /// Dataset files, used by the command-line front end.
    #[serde(default)]
    pub database: Option<String>,
    #[serde(default)]
    pub queries: Option<String>,
    #[serde(default)]
    pub ground_truth: Option<String>,
}

impl SweepSpec {
    /// Every grid point in iteration order, with the swept values.
    pub fn points(&self) -> Result<Vec<(Vec<u64>, SweepPoint)>> {
        if self.grid.is_empty() || self.grid.iter().any(|a| a.values.is_empty()) {
            return Err(Error::InvalidConfig("sweep grid is empty".into()));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = self.grid.iter().find(|a| !seen.insert(a.param)) {
            return Err(Error::InvalidConfig(format!("parameter {} swept twice", dup.param.name())));
        }
        let mut out = vec![(Vec::new(), self.base)];
        for axis in &self.grid {
            out = out
                .into_iter()
                .flat_map(|(vals, point)| {
                    axis.values.iter().map(move |&v| {
                        let mut p = point;
                        p.set(axis.param, v);
                        let mut vals = vals.clone();
                        vals.push(v);
                        (vals, p)
                    })
                })
                .collect();
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub values: Vec<u64>,
    pub point: SweepPoint,
    pub report: Option<EvalReport>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub params: Vec<Param>,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    /// Header: swept parameters, then map, mean_query_time_s, scan_fraction,
    /// index_bytes, error.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let to_err = |e: csv::Error| Error::InvalidInput(format!("csv: {e}"));
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = self.params.iter().map(|p| p.name().to_string()).collect();
        header.extend(
            ["map", "mean_query_time_s", "scan_fraction", "index_bytes", "error"].map(String::from),
        );
        w.write_record(&header).map_err(to_err)?;
        for row in &self.rows {
            let mut rec: Vec<String> = row.values.iter().map(u64::to_string).collect();
            match &row.report {
                Some(r) => rec.extend([
                    format!("{:.6}", r.map),
                    format!("{:.9}", r.mean_query_time_s),
                    format!("{:.6}", r.scan_fraction),
                    r.index_bytes.to_string(),
                    String::new(),
                ]),
                None => {
                    rec.extend(std::iter::repeat_n(String::new(), 4));
                    rec.push(row.error.clone().unwrap_or_default());
                }
            }
            w.write_record(&rec).map_err(to_err)?;
        }
        w.flush().map_err(|e| Error::InvalidInput(format!("csv: {e}")))
    }
}

/// Dataset a sweep runs over.
pub struct Dataset<'a> {
    pub database: &'a FeatureSet,
    pub queries: &'a FeatureSet,
    pub ground_truth: &'a GroundTruth,
}

/// Evaluates every grid point. A point whose parameters are invalid is
/// recorded with its error and the sweep moves on. Indexes and codebooks are
/// reused between points that share build parameters.
pub fn sweep(spec: &SweepSpec, data: &Dataset<'_>) -> Result<SweepTable> {
    let points = spec.points()?;
    data.ground_truth.validate(data.database.len())?;
    let mut codebooks: HashMap<PqConfig, PqCodebook> = HashMap::new();
    let mut indexes: HashMap<BuildConfig, InvertedIndex> = HashMap::new();
    let mut rows = Vec::with_capacity(points.len());

    for (values, point) in points {
        let outcome = (|| -> Result<EvalReport> {
            let build = point.build_config();
            let key = match build.scheme {
                Scheme::Tifc => BuildConfig { pq: PqConfig::default(), ..build },
                Scheme::Ifc => BuildConfig { virtual_word_seed: 0, ..build },
            };
            if let std::collections::hash_map::Entry::Vacant(e) = indexes.entry(key) {
                build.embed.validate(data.database.dim())?;
                let quantizer = match build.scheme {
                    Scheme::Tifc => Quantizer::Tifc(tifc::make_virtual_words(
                        data.database.dim(),
                        build.virtual_word_seed,
                    )?),
                    Scheme::Ifc => {
                        let pq_cfg = build.pq;
                        let cb = match codebooks.get(&pq_cfg) {
                            Some(cb) => cb.clone(),
                            None => {
                                let cb = pq::train(data.database, &pq_cfg)?;
                                codebooks.insert(pq_cfg, cb.clone());
                                cb
                            }
                        };
                        Quantizer::Ifc(cb)
                    }
                };
                let ix = InvertedIndex::build_with_quantizer(data.database, quantizer, build.link_count, build.embed)?;
                e.insert(ix);
            }
            let ix = &indexes[&key];
            let qcfg = point.query_config();
            qcfg.validate(ix)?;
            let searcher = IndexSearcher { index: ix, config: qcfg };
            let runs = run_queries(&searcher, data.queries)?;
            let mut report = evaluate(
                &runs,
                data.ground_truth,
                ix.indexed_count(),
                ix.stats().file_bytes,
                spec.options,
            )?;
            report.config = serde_json::to_value(point).unwrap_or_default();
            Ok(report)
        })();
        rows.push(match outcome {
            Ok(report) => SweepRow { values, point, report: Some(report), error: None },
            Err(e) => SweepRow { values, point, report: None, error: Some(e.to_string()) },
        });
    }

    Ok(SweepTable {
        params: spec.grid.iter().map(|a| a.param).collect(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vecio::{generate_synthetic, SynthSpec};
    use proptest::prelude::*;

    /// AP straight from the definition: walk the relevant ids, find each
    /// one's rank, count relevant ids at or above it.
    fn ap_by_definition(ranked: &[u32], relevant: &BTreeSet<u32>) -> f64 {
        let mut total = 0.0;
        for r in relevant {
            if let Some(pos) = ranked.iter().position(|x| x == r) {
                let above = ranked[..=pos].iter().filter(|x| relevant.contains(x)).count();
                total += above as f64 / (pos + 1) as f64;
            }
        }
        total / relevant.len() as f64
    }

    #[test]
    fn worked_examples() {
        let rel = BTreeSet::from([4, 9]);
        assert_eq!(average_precision(&[4, 9, 1], &rel).unwrap(), 1.0);
        assert_eq!(average_precision(&[4, 1, 9], &rel).unwrap(), (1.0 + 2.0 / 3.0) / 2.0);
        assert_eq!(average_precision(&[1, 2, 3], &rel).unwrap(), 0.0);
        assert_eq!(average_precision(&[], &rel).unwrap(), 0.0);
        assert_eq!(average_precision(&[4], &rel).unwrap(), 0.5);
        assert!(average_precision(&[1], &BTreeSet::new()).is_err());
    }

    #[test]
    fn default_threshold_values() {
        assert_eq!(default_threshold(512), 180);
        assert_eq!(default_threshold(32), 12);
    }

    #[test]
    fn map_is_mean_of_aps() {
        let mut gt = GroundTruth::new();
        gt.insert(0, BTreeSet::from([1])).unwrap();
        gt.insert(1, BTreeSet::from([2])).unwrap();
        let runs = vec![
            QueryRun { query: 0, ranked: vec![1, 2], seconds: 0.5, candidates: 2 },
            QueryRun { query: 1, ranked: vec![3], seconds: 1.5, candidates: 4 },
        ];
        let r = evaluate(&runs, &gt, 8, 0, EvalOptions::default()).unwrap();
        assert_eq!(r.map, 0.5);
        assert_eq!(r.mean_query_time_s, 1.0);
        assert_eq!(r.scan_fraction, 3.0 / 8.0);
        assert!(evaluate(&runs[..1], &gt, 8, 0, EvalOptions::default()).is_err());
    }

    #[test]
    fn exclude_self_drops_own_image() {
        let mut gt = GroundTruth::new();
        gt.insert(0, BTreeSet::from([5, 6])).unwrap();
        let runs = vec![QueryRun { query: 0, ranked: vec![5, 7, 6], seconds: 0.0, candidates: 3 }];
        let keep = evaluate(&runs, &gt, 10, 0, EvalOptions { exclude_self: false }).unwrap();
        assert_eq!(keep.map, (1.0 + 2.0 / 3.0) / 2.0);
        let drop = evaluate(&runs, &gt, 10, 0, EvalOptions { exclude_self: true }).unwrap();
        assert_eq!(drop.map, 0.5);
    }

    #[test]
    fn brute_force_zero_noise_ranks_source_first() {
        let data = generate_synthetic(&SynthSpec {
            n_clusters: 10,
            points_per_cluster: 10,
            dim: 16,
            cluster_stddev: 1.0,
            noise_stddev: 0.0,
            seed: 8,
        })
        .unwrap();
        let bf = BruteForceSearcher { database: &data.database, top_k: 100 };
        let runs = run_queries(&bf, &data.queries).unwrap();
        for run in &runs {
            assert_eq!(run.ranked[0] as usize, data.query_source(run.query));
            assert!(run.seconds > 0.0);
        }
        let a = evaluate(&runs, &data.ground_truth, 100, 0, EvalOptions::default()).unwrap();
        let runs2 = run_queries(&bf, &data.queries).unwrap();
        let b = evaluate(&runs2, &data.ground_truth, 100, 0, EvalOptions::default()).unwrap();
        assert_eq!(a.map, b.map);
        assert_eq!(a.per_query_ap, b.per_query_ap);
        assert!(a.map > 0.9);
        assert_eq!(a.scan_fraction, 1.0);
    }

    fn sweep_data() -> crate::vecio::SyntheticData {
        generate_synthetic(&SynthSpec {
            n_clusters: 20,
            points_per_cluster: 10,
            dim: 16,
            cluster_stddev: 1.0,
            noise_stddev: 0.1,
            seed: 4,
        })
        .unwrap()
    }

    fn small_base() -> SweepPoint {
        SweepPoint {
            code_length: 8,
            link_count: 4,
            words_per_segment: 8,
            kmeans_iters: 10,
            kmeans_restarts: 1,
            ..SweepPoint::default()
        }
    }

    #[test]
    fn sweep_threshold_extremes() {
        let data = sweep_data();
        let spec = SweepSpec {
            base: small_base(),
            grid: vec![GridAxis { param: Param::T, values: vec![0, 8] }],
            options: EvalOptions::default(),
            database: None,
            queries: None,
            ground_truth: None,
        };
        let ds = Dataset { database: &data.database, queries: &data.queries, ground_truth: &data.ground_truth };
        let table = sweep(&spec, &ds).unwrap();
        assert_eq!(table.rows.len(), 2);
        assert_eq!(table.rows[0].report.as_ref().unwrap().map, 0.0);
        assert!(table.rows[1].report.as_ref().unwrap().map > 0.0);

        let mut csv = Vec::new();
        table.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("T,map,mean_query_time_s,scan_fraction,index_bytes,error\n"));
        assert_eq!(text.lines().count(), 3);
    }

    #[test]
    fn sweep_w_candidates_grow_and_bad_points_are_reported() {
        let data = sweep_data();
        let spec = SweepSpec {
            base: SweepPoint { hamming_threshold: Some(8), ..small_base() },
            grid: vec![GridAxis { param: Param::W, values: vec![1, 2, 4, 1000] }],
            options: EvalOptions::default(),
            database: None,
            queries: None,
            ground_truth: None,
        };
        let ds = Dataset { database: &data.database, queries: &data.queries, ground_truth: &data.ground_truth };
        let table = sweep(&spec, &ds).unwrap();
        let fractions: Vec<f64> = table.rows[..3].iter().map(|r| r.report.as_ref().unwrap().scan_fraction).collect();
        assert!(fractions.windows(2).all(|w| w[0] <= w[1]), "{fractions:?}");
        assert!(table.rows[3].report.is_none());
        assert!(table.rows[3].error.as_ref().unwrap().contains("W"));
    }

    #[test]
    fn empty_grid_rejected() {
        let data = sweep_data();
        let ds = Dataset { database: &data.database, queries: &data.queries, ground_truth: &data.ground_truth };
        let spec = SweepSpec {
            base: small_base(),
            grid: vec![],
            options: EvalOptions::default(),
            database: None,
            queries: None,
            ground_truth: None,
        };
        assert!(sweep(&spec, &ds).is_err());
    }

    #[test]
    fn grid_order_is_first_axis_outermost() {
        let spec = SweepSpec {
            base: small_base(),
            grid: vec![
                GridAxis { param: Param::S, values: vec![1, 2] },
                GridAxis { param: Param::T, values: vec![3, 4, 5] },
            ],
            options: EvalOptions::default(),
            database: None,
            queries: None,
            ground_truth: None,
        };
        let vals: Vec<Vec<u64>> = spec.points().unwrap().into_iter().map(|p| p.0).collect();
        assert_eq!(vals, [[1, 3], [1, 4], [1, 5], [2, 3], [2, 4], [2, 5]]);
    }

    proptest! {
        #[test]
        fn ap_matches_definition(seed in any::<u64>(), n in 1usize..60, k in 1usize..20) {
            use rand::{seq::SliceRandom, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut ids: Vec<u32> = (0..n as u32 + 20).collect();
            ids.shuffle(&mut rng);
            let relevant: BTreeSet<u32> = ids[..k.min(ids.len())].iter().copied().collect();
            ids.shuffle(&mut rng);
            let ranked = &ids[..n];
            let got = average_precision(ranked, &relevant).unwrap();
            prop_assert!((got - ap_by_definition(ranked, &relevant)).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&got));
        }
    }
}
