//! Feature, ground-truth and id-list files, plus a seeded synthetic generator.
//!
//! Binary vector files use the common ANN benchmark layout: each record is a
//! little-endian `i32` length followed by that many `f32` (feature files) or
//! `i32` (id-list files) values. Ids are implicit record positions.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A single owned feature vector with finite components.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(Vec<f32>);

impl FeatureVector {
    pub fn new(values: Vec<f32>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("feature vector must have D > 0".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "feature component {i} is not finite"
            )));
        }
        Ok(Self(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f32> {
        self.0
    }
}

impl AsRef<[f32]> for FeatureVector {
    fn as_ref(&self) -> &[f32] {
        &self.0
    }
}

/// `N` vectors of a shared dimension `D`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    dim: usize,
    data: Vec<f32>,
}

impl FeatureSet {
    /// An empty set of the given dimension, ready for `push`.
    pub fn with_dim(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("dimension must be > 0".into()));
        }
        Ok(Self {
            dim,
            data: Vec::new(),
        })
    }

    /// Wraps a row-major buffer. Fails if the buffer is not a whole number of
    /// rows or holds non-finite values.
    pub fn from_flat(dim: usize, data: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("dimension must be > 0".into()));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::InvalidInput(format!(
                "buffer of {} values is not a multiple of dimension {dim}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "vector {} component {} is not finite",
                i / dim,
                i % dim
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows<R: AsRef<[f32]>>(rows: &[R]) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| Error::InvalidInput("no vectors given".into()))?;
        let mut set = Self::with_dim(first.as_ref().len())?;
        for row in rows {
            set.push(row.as_ref())?;
        }
        Ok(set)
    }

    pub fn push(&mut self, row: &[f32]) -> Result<()> {
        if row.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: row.len(),
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "vector {} has non-finite components",
                self.len()
            )));
        }
        self.data.extend_from_slice(row);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, id: usize) -> &[f32] {
        &self.data[id * self.dim..(id + 1) * self.dim]
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, f32> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f32] {
        &self.data
    }

    /// Copies rows `[start, end)` into a new set.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.len() {
            return Err(Error::InvalidInput(format!(
                "row range {start}..{end} invalid for {} vectors",
                self.len()
            )));
        }
        Ok(Self {
            dim: self.dim,
            data: self.data[start * self.dim..end * self.dim].to_vec(),
        })
    }

    /// Scales every vector to unit L2 norm. Zero vectors are left untouched.
    pub fn l2_normalize(&mut self) {
        for row in self.data.chunks_exact_mut(self.dim) {
            let norm = row.iter().map(|&v| f64::from(v) * f64::from(v)).sum::<f64>().sqrt();
            if norm > 0.0 {
                for v in row.iter_mut() {
                    *v = (f64::from(*v) / norm) as f32;
                }
            }
        }
    }
}

/// Query id to the set of relevant database ids.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    entries: BTreeMap<usize, BTreeSet<u32>>,
}

impl GroundTruth {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, query: usize, relevant: BTreeSet<u32>) -> Result<()> {
        if relevant.is_empty() {
            return Err(Error::InvalidInput(format!(
                "query {query} has an empty relevant set"
            )));
        }
        self.entries.insert(query, relevant);
        Ok(())
    }

    pub fn get(&self, query: usize) -> Option<&BTreeSet<u32>> {
        self.entries.get(&query)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &BTreeSet<u32>)> {
        self.entries.iter().map(|(&q, r)| (q, r))
    }

    /// Checks every relevant id against a database of `n` vectors.
    pub fn validate(&self, n: usize) -> Result<()> {
        for (q, rel) in &self.entries {
            if let Some(&bad) = rel.iter().find(|&&id| id as usize >= n) {
                return Err(Error::InvalidInput(format!(
                    "query {q}: relevant id {bad} out of range for {n} database vectors"
                )));
            }
        }
        Ok(())
    }
}

fn read_all(path: &Path) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    File::open(path)
        .and_then(|f| BufReader::new(f).read_to_end(&mut buf))
        .map_err(|e| Error::io(path, e))?;
    Ok(buf)
}

/// Splits a length-prefixed record file into `(record_len, payload)` pairs.
fn records<'a>(
    path: &'a Path,
    buf: &'a [u8],
) -> impl Iterator<Item = Result<(usize, &'a [u8])>> + 'a {
    let mut pos = 0usize;
    let mut index = 0usize;
    std::iter::from_fn(move || {
        if pos == buf.len() {
            return None;
        }
        let record = index;
        index += 1;
        let fail = |detail: String| {
            Some(Err(Error::Format {
                path: path.to_path_buf(),
                record,
                detail,
            }))
        };
        if buf.len() - pos < 4 {
            pos = buf.len();
            return fail("truncated record header".into());
        }
        let len = i32::from_le_bytes(buf[pos..pos + 4].try_into().unwrap());
        if len < 0 {
            pos = buf.len();
            return fail(format!("negative record length {len}"));
        }
        let len = len as usize;
        let bytes = len * 4;
        pos += 4;
        if buf.len() - pos < bytes {
            pos = buf.len();
            return fail(format!(
                "truncated payload: need {bytes} bytes, {} remain",
                buf.len() - (pos)
            ));
        }
        let payload = &buf[pos..pos + bytes];
        pos += bytes;
        Some(Ok((len, payload)))
    })
}

pub fn read_feature_file(path: impl AsRef<Path>) -> Result<FeatureSet> {
    let path = path.as_ref();
    let buf = read_all(path)?;
    let mut dim = 0usize;
    let mut data = Vec::new();
    for (i, rec) in records(path, &buf).enumerate() {
        let (len, payload) = rec?;
        let fail = |detail: String| Error::Format {
            path: path.to_path_buf(),
            record: i,
            detail,
        };
        if len == 0 {
            return Err(fail("malformed header: dimension 0".into()));
        }
        if i == 0 {
            dim = len;
            data.reserve(dim * (buf.len() / (4 + 4 * dim)));
        } else if len != dim {
            return Err(fail(format!("dimension {len} differs from first record's {dim}")));
        }
        for (j, chunk) in payload.chunks_exact(4).enumerate() {
            let v = f32::from_le_bytes(chunk.try_into().unwrap());
            if !v.is_finite() {
                return Err(fail(format!("component {j} is not finite")));
            }
            data.push(v);
        }
    }
    if dim == 0 {
        return Err(Error::Format {
            path: path.to_path_buf(),
            record: 0,
            detail: "file holds no records".into(),
        });
    }
    FeatureSet::from_flat(dim, data)
}

pub fn write_feature_file(fs: &FeatureSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if fs.is_empty() {
        return Err(Error::InvalidInput("refusing to write an empty feature set".into()));
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::with_capacity(1 << 20, file);
    let header = (fs.dim() as i32).to_le_bytes();
    let mut row_bytes = Vec::with_capacity(4 + 4 * fs.dim());
    for row in fs.iter() {
        row_bytes.clear();
        row_bytes.extend_from_slice(&header);
        for v in row {
            row_bytes.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&row_bytes).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads an id-list file (`[i32 count][count x i32]` per record).
pub fn read_id_lists(path: impl AsRef<Path>) -> Result<Vec<Vec<u32>>> {
    let path = path.as_ref();
    let buf = read_all(path)?;
    let mut lists = Vec::new();
    for (i, rec) in records(path, &buf).enumerate() {
        let (_, payload) = rec?;
        let ids = payload
            .chunks_exact(4)
            .map(|c| {
                let v = i32::from_le_bytes(c.try_into().unwrap());
                u32::try_from(v).map_err(|_| Error::Format {
                    path: path.to_path_buf(),
                    record: i,
                    detail: format!("negative id {v}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        lists.push(ids);
    }
    Ok(lists)
}

pub fn write_id_lists<L: AsRef<[u32]>>(lists: &[L], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for list in lists {
        let list = list.as_ref();
        let mut bytes = Vec::with_capacity(4 + 4 * list.len());
        bytes.extend_from_slice(&(list.len() as i32).to_le_bytes());
        for &id in list {
            let id = i32::try_from(id)
                .map_err(|_| Error::InvalidInput(format!("id {id} does not fit in i32")))?;
            bytes.extend_from_slice(&id.to_le_bytes());
        }
        w.write_all(&bytes).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Parses `qid: id id ...` lines. `#` starts a comment. When `declared_n` is
/// given, every relevant id must be below it.
pub fn read_ground_truth(path: impl AsRef<Path>, declared_n: Option<usize>) -> Result<GroundTruth> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut gt = GroundTruth::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let fail = |detail: String| Error::Parse {
            path: path.to_path_buf(),
            line: lineno + 1,
            detail,
        };
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (qid, rest) = content
            .split_once(':')
            .ok_or_else(|| fail("expected `qid: id id ...`".into()))?;
        let qid: usize = qid
            .trim()
            .parse()
            .map_err(|_| fail(format!("unknown query id format {:?}", qid.trim())))?;
        let relevant = rest
            .split_whitespace()
            .map(|tok| {
                tok.parse::<u32>()
                    .map_err(|_| fail(format!("bad database id {tok:?}")))
            })
            .collect::<Result<BTreeSet<u32>>>()?;
        if relevant.is_empty() {
            return Err(fail(format!("query {qid} has no relevant ids")));
        }
        if let Some(n) = declared_n {
            if let Some(&bad) = relevant.iter().find(|&&id| id as usize >= n) {
                return Err(fail(format!("relevant id {bad} >= database size {n}")));
            }
        }
        if gt.entries.insert(qid, relevant).is_some() {
            return Err(fail(format!("duplicate query id {qid}")));
        }
    }
    Ok(gt)
}

pub fn write_ground_truth(gt: &GroundTruth, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for (q, rel) in gt.iter() {
        let ids: Vec<String> = rel.iter().map(u32::to_string).collect();
        writeln!(w, "{q}: {}", ids.join(" ")).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Parameters of the clustered synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_clusters: usize,
    pub points_per_cluster: usize,
    pub dim: usize,
    pub cluster_stddev: f64,
    /// Perturbation added to each query's source vector.
    pub noise_stddev: f64,
    pub seed: u64,
}

/// Per-component standard deviation of the cluster centers.
pub const CENTER_STDDEV: f64 = 10.0;

/// A generated database with one query per cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub database: FeatureSet,
    pub queries: FeatureSet,
    pub ground_truth: GroundTruth,
}

impl SyntheticData {
    /// Database id each query was perturbed from (the first member of its
    /// cluster).
    pub fn query_source(&self, query: usize) -> usize {
        self.ground_truth
            .get(query)
            .and_then(|rel| rel.first())
            .map(|&id| id as usize)
            .expect("every generated query has a relevant set")
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_clusters == 0 || self.points_per_cluster == 0 || self.dim == 0 {
            return Err(Error::InvalidConfig(
                "n_clusters, points_per_cluster and dim must all be >= 1".into(),
            ));
        }
        let ok = |s: f64| s.is_finite() && s >= 0.0;
        if !ok(self.cluster_stddev) || !ok(self.noise_stddev) {
            return Err(Error::InvalidConfig("standard deviations must be finite and >= 0".into()));
        }
        let n = self.n_clusters.checked_mul(self.points_per_cluster);
        if n.is_none_or(|n| n > i32::MAX as usize) {
            return Err(Error::InvalidConfig("database too large for i32 ids".into()));
        }
        Ok(())
    }
}

/// Database vectors are laid out cluster by cluster: cluster `c` owns ids
/// `c * P .. (c + 1) * P`. Query `c` is the first member of cluster `c` plus
/// Gaussian noise, and its relevant set is the whole cluster.
pub fn generate_synthetic(spec: &SynthSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let SynthSpec {
        n_clusters,
        points_per_cluster: per,
        dim,
        ..
    } = *spec;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut gauss = |scale: f64| -> f32 {
        let z: f64 = rng.sample(StandardNormal);
        (z * scale) as f32
    };

    let mut db = Vec::with_capacity(n_clusters * per * dim);
    let mut center = vec![0f32; dim];
    for _ in 0..n_clusters {
        for c in center.iter_mut() {
            *c = gauss(CENTER_STDDEV);
        }
        for _ in 0..per {
            for &c in &center {
                db.push(c + gauss(spec.cluster_stddev));
            }
        }
    }

    let mut queries = Vec::with_capacity(n_clusters * dim);
    let mut gt = GroundTruth::new();
    for c in 0..n_clusters {
        let source = c * per;
        for &v in &db[source * dim..(source + 1) * dim] {
            queries.push(v + gauss(spec.noise_stddev));
        }
        let members = (source as u32..(source + per) as u32).collect();
        gt.insert(c, members)?;
    }

    Ok(SyntheticData {
        database: FeatureSet::from_flat(dim, db)?,
        queries: FeatureSet::from_flat(dim, queries)?,
        ground_truth: gt,
    })
}
