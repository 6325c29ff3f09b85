//! Product-quantization dictionary.
//!
//! A vector is split into `M` contiguous segments of length `D / M`; each
//! segment is quantized against its own `K`-word sub-codebook. The Cartesian
//! product of the sub-codebooks is a dictionary of `K^M` product words. A
//! product word id packs the sub-word tuple `(w_1, .., w_M)` in mixed radix
//! `K` with segment 1 most significant.

pub mod kmeans;

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashSet};
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bytes::Reader;
use crate::error::{Error, Result};
use crate::squared_l2;
use crate::vecio::FeatureSet;

pub const CODEBOOK_MAGIC: &[u8; 8] = b"CNNPQC01";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PqConfig {
    pub segments: usize,
    pub words_per_segment: usize,
    pub kmeans_iters: usize,
    pub kmeans_seed: u64,
    pub kmeans_restarts: usize,
}

impl Default for PqConfig {
    fn default() -> Self {
        Self {
            segments: 2,
            words_per_segment: 1000,
            kmeans_iters: 25,
            kmeans_seed: 0,
            kmeans_restarts: 3,
        }
    }
}

impl PqConfig {
    /// `K^M`, or an error when it does not fit in 64 bits.
    pub fn word_count(&self) -> Result<u64> {
        if self.segments == 0 || self.words_per_segment == 0 {
            return Err(Error::InvalidConfig("M and K must both be >= 1".into()));
        }
        let m = u32::try_from(self.segments)
            .map_err(|_| Error::InvalidConfig("too many segments".into()))?;
        (self.words_per_segment as u64)
            .checked_pow(m)
            .ok_or_else(|| Error::InvalidConfig(format!(
                "K^M = {}^{} does not fit in a 64-bit word id",
                self.words_per_segment, self.segments
            )))
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        self.word_count()?;
        if self.kmeans_restarts == 0 {
            return Err(Error::InvalidConfig("kmeans_restarts must be >= 1".into()));
        }
        if !dim.is_multiple_of(self.segments) {
            return Err(Error::InvalidConfig(format!(
                "dimension {dim} is not divisible by M = {}",
                self.segments
            )));
        }
        Ok(())
    }
}

/// Identifier of a word in the product dictionary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ProductWordId(pub u64);

#[derive(Debug, Clone, PartialEq)]
pub struct PqCodebook {
    config: PqConfig,
    dim: usize,
    /// One `K * (D / M)` buffer per segment.
    centroids: Vec<Vec<f32>>,
}

impl PqCodebook {
    /// Assembles a codebook from explicit centroids (one flat buffer per
    /// segment).
    pub fn from_centroids(config: PqConfig, dim: usize, centroids: Vec<Vec<f32>>) -> Result<Self> {
        config.validate(dim)?;
        let sub = dim / config.segments;
        if centroids.len() != config.segments
            || centroids.iter().any(|c| c.len() != config.words_per_segment * sub)
        {
            return Err(Error::InvalidConfig(format!(
                "expected {} segments of {} x {sub} centroids",
                config.segments, config.words_per_segment
            )));
        }
        Ok(Self {
            config,
            dim,
            centroids,
        })
    }

    pub fn config(&self) -> &PqConfig {
        &self.config
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn segments(&self) -> usize {
        self.config.segments
    }

    pub fn words_per_segment(&self) -> usize {
        self.config.words_per_segment
    }

    pub fn sub_dim(&self) -> usize {
        self.dim / self.config.segments
    }

    pub fn word_count(&self) -> u64 {
        self.config.word_count().expect("validated at construction")
    }

    pub fn sub_codebook(&self, segment: usize) -> &[f32] {
        &self.centroids[segment]
    }

    pub fn sub_centroid(&self, segment: usize, word: usize) -> &[f32] {
        let s = self.sub_dim();
        &self.centroids[segment][word * s..(word + 1) * s]
    }

    /// Bytes needed for all centroids as `f32`.
    pub fn centroid_bytes(&self) -> usize {
        self.centroids.iter().map(Vec::len).sum::<usize>() * 4
    }

    pub fn encode_tuple(&self, words: &[usize]) -> Result<ProductWordId> {
        let k = self.config.words_per_segment;
        if words.len() != self.config.segments || words.iter().any(|&w| w >= k) {
            return Err(Error::InvalidInput(format!(
                "sub-word tuple {words:?} invalid for M = {}, K = {k}",
                self.config.segments
            )));
        }
        Ok(ProductWordId(
            words.iter().fold(0u64, |acc, &w| acc * k as u64 + w as u64),
        ))
    }

    pub fn decode(&self, id: ProductWordId) -> Result<Vec<usize>> {
        if id.0 >= self.word_count() {
            return Err(Error::InvalidInput(format!(
                "product word {} out of range (dictionary has {} words)",
                id.0,
                self.word_count()
            )));
        }
        let k = self.config.words_per_segment as u64;
        let mut rest = id.0;
        let mut words = vec![0usize; self.config.segments];
        for w in words.iter_mut().rev() {
            *w = (rest % k) as usize;
            rest /= k;
        }
        Ok(words)
    }

    fn check_dim(&self, x: &[f32]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        Ok(())
    }

    fn segment<'a>(&self, x: &'a [f32], m: usize) -> &'a [f32] {
        let s = self.sub_dim();
        &x[m * s..(m + 1) * s]
    }

    /// Nearest product word: the per-segment nearest sub-words, ties to the
    /// smaller sub-word id.
    pub fn assign(&self, x: &[f32]) -> Result<ProductWordId> {
        self.check_dim(x)?;
        let sub = self.sub_dim();
        let k = self.config.words_per_segment as u64;
        let id = (0..self.segments()).fold(0u64, |acc, m| {
            let (j, _) = kmeans::nearest(self.segment(x, m), &self.centroids[m], sub);
            acc * k + u64::from(j)
        });
        Ok(ProductWordId(id))
    }

    /// Squared distances from each segment of `x` to every sub-word.
    pub fn segment_distances(&self, x: &[f32]) -> Result<Vec<Vec<f64>>> {
        self.check_dim(x)?;
        let sub = self.sub_dim();
        Ok((0..self.segments())
            .map(|m| {
                let xs = self.segment(x, m);
                self.centroids[m]
                    .chunks_exact(sub)
                    .map(|c| squared_l2(xs, c))
                    .collect()
            })
            .collect())
    }

    /// The `count` product words nearest to `x` in ascending summed segment
    /// distance, ties to the smaller product word id.
    ///
    /// Multi-sequence enumeration: each segment's sub-words are sorted by
    /// distance, and a priority queue walks the grid of rank tuples outward
    /// from `(0, .., 0)`. Summed distance never decreases along any axis of
    /// that grid, so words pop in final order and only `O(count * M)` tuples
    /// are ever touched.
    pub fn nearest_words(&self, x: &[f32], count: usize) -> Result<Vec<(ProductWordId, f64)>> {
        let total = self.word_count();
        if count == 0 || count as u64 > total {
            return Err(Error::InvalidConfig(format!(
                "word count {count} outside 1..={total}"
            )));
        }
        let dists = self.segment_distances(x)?;
        let m_count = self.segments();
        let k = self.config.words_per_segment;

        // per segment: sub-word ids sorted by (distance, id)
        let sorted: Vec<Vec<u32>> = dists
            .iter()
            .map(|d| {
                let mut order: Vec<u32> = (0..k as u32).collect();
                order.sort_unstable_by(|&a, &b| {
                    d[a as usize]
                        .partial_cmp(&d[b as usize])
                        .unwrap_or(Ordering::Equal)
                        .then(a.cmp(&b))
                });
                order
            })
            .collect();

        let cell = |ranks: &[u32]| -> Candidate {
            let mut dist = 0.0;
            let mut word = 0u64;
            for (m, &r) in ranks.iter().enumerate() {
                let w = sorted[m][r as usize];
                dist += dists[m][w as usize];
                word = word * k as u64 + u64::from(w);
            }
            Candidate {
                dist,
                word,
                ranks: ranks.to_vec(),
            }
        };

        let mut heap = BinaryHeap::new();
        let mut pushed: HashSet<Vec<u32>> = HashSet::new();
        let origin = vec![0u32; m_count];
        pushed.insert(origin.clone());
        heap.push(Reverse(cell(&origin)));

        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let Reverse(best) = heap.pop().expect("dictionary holds at least `count` words");
            for m in 0..m_count {
                if (best.ranks[m] as usize) + 1 < k {
                    let mut next = best.ranks.clone();
                    next[m] += 1;
                    if pushed.insert(next.clone()) {
                        heap.push(Reverse(cell(&next)));
                    }
                }
            }
            out.push((ProductWordId(best.word), best.dist));
        }
        Ok(out)
    }

    /// Concatenation of the sub-centroids named by `id`.
    pub fn reconstruct(&self, id: ProductWordId) -> Result<Vec<f32>> {
        let words = self.decode(id)?;
        let mut v = Vec::with_capacity(self.dim);
        for (m, &w) in words.iter().enumerate() {
            v.extend_from_slice(self.sub_centroid(m, w));
        }
        Ok(v)
    }
}

impl PqCodebook {
    /// Config and centroids in the layout shared with the index file:
    /// `M, K, kmeans_iters, kmeans_restarts` as u32, `kmeans_seed` u64, then
    /// the f32 centroids segment by segment.
    pub(crate) fn write_body(&self, out: &mut Vec<u8>) {
        let c = &self.config;
        for v in [c.segments, c.words_per_segment, c.kmeans_iters, c.kmeans_restarts] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        out.extend_from_slice(&c.kmeans_seed.to_le_bytes());
        for seg in &self.centroids {
            for v in seg {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }

    pub(crate) fn read_body(r: &mut Reader<'_>, dim: usize) -> Result<Self> {
        let segments = r.u32()? as usize;
        let words_per_segment = r.u32()? as usize;
        let kmeans_iters = r.u32()? as usize;
        let kmeans_restarts = r.u32()? as usize;
        let kmeans_seed = r.u64()?;
        let config = PqConfig {
            segments,
            words_per_segment,
            kmeans_iters,
            kmeans_seed,
            kmeans_restarts,
        };
        config.validate(dim).map_err(|e| Error::Corrupt(e.to_string()))?;
        let per_segment = words_per_segment * (dim / segments);
        let mut centroids = Vec::with_capacity(segments);
        for _ in 0..segments {
            let raw = r.take(per_segment * 4)?;
            centroids.push(
                raw.chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
            );
        }
        Self::from_centroids(config, dim, centroids)
    }

    /// Standalone codebook file: magic, `dim` u32, body, CRC32 of the rest.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + 4 + 24 + self.centroid_bytes() + 4);
        out.extend_from_slice(CODEBOOK_MAGIC);
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        self.write_body(&mut out);
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 8 || &bytes[..8] != CODEBOOK_MAGIC {
            return Err(Error::BadMagic);
        }
        if bytes.len() < 16 {
            return Err(Error::Corrupt("codebook file too short".into()));
        }
        let (body, trailer) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(trailer.try_into().unwrap());
        let computed = crc32fast::hash(body);
        if stored != computed {
            return Err(Error::Checksum { stored, computed });
        }
        let mut r = Reader::new(&body[8..]);
        let dim = r.u32()? as usize;
        let cb = Self::read_body(&mut r, dim)?;
        if r.remaining() != 0 {
            return Err(Error::Corrupt("trailing bytes after codebook".into()));
        }
        Ok(cb)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

#[derive(Debug, Clone)]
struct Candidate {
    dist: f64,
    word: u64,
    ranks: Vec<u32>,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist
            .total_cmp(&other.dist)
            .then(self.word.cmp(&other.word))
    }
}

/// Trains one sub-codebook per segment; each is the lowest-inertia run of
/// `kmeans_restarts` seeded k-means++ / Lloyd runs.
pub fn train(training: &FeatureSet, cfg: &PqConfig) -> Result<PqCodebook> {
    let dim = training.dim();
    cfg.validate(dim)?;
    if training.len() < cfg.words_per_segment {
        return Err(Error::InvalidConfig(format!(
            "{} training vectors is fewer than K = {}",
            training.len(),
            cfg.words_per_segment
        )));
    }
    let sub = dim / cfg.segments;
    let mut centroids = Vec::with_capacity(cfg.segments);
    for m in 0..cfg.segments {
        let mut data = Vec::with_capacity(training.len() * sub);
        for row in training.iter() {
            data.extend_from_slice(&row[m * sub..(m + 1) * sub]);
        }
        let best = (0..cfg.kmeans_restarts)
            .map(|r| {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.kmeans_seed);
                rng.set_stream((m * cfg.kmeans_restarts + r) as u64);
                kmeans::lloyd(&data, sub, cfg.words_per_segment, cfg.kmeans_iters, &mut rng)
            })
            .reduce(|a, b| if b.inertia < a.inertia { b } else { a })
            .expect("at least one restart");
        centroids.push(best.centroids);
    }
    PqCodebook::from_centroids(*cfg, dim, centroids)
}

/// Assigns many vectors at once, preserving input order.
pub fn assign_all(cb: &PqCodebook, xs: &FeatureSet) -> Result<Vec<ProductWordId>> {
    xs.iter().collect::<Vec<_>>().par_iter().map(|x| cb.assign(x)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_codebook(dim: usize, m: usize, k: usize, seed: u64) -> PqCodebook {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sub = dim / m;
        let cfg = PqConfig {
            segments: m,
            words_per_segment: k,
            ..PqConfig::default()
        };
        let cents = (0..m)
            .map(|_| (0..k * sub).map(|_| rng.random_range(-1.0f32..1.0)).collect())
            .collect();
        PqCodebook::from_centroids(cfg, dim, cents).unwrap()
    }

    /// Every product word with its summed segment distance, sorted by
    /// (distance, id).
    fn enumerate_all(cb: &PqCodebook, x: &[f32]) -> Vec<(u64, f64)> {
        let m = cb.segments();
        let k = cb.words_per_segment();
        let sub = cb.sub_dim();
        let mut all = Vec::new();
        for id in 0..cb.word_count() {
            let mut rest = id;
            let mut tuple = vec![0usize; m];
            for t in tuple.iter_mut().rev() {
                *t = (rest % k as u64) as usize;
                rest /= k as u64;
            }
            let mut total = 0.0;
            for (s, &w) in tuple.iter().enumerate() {
                let c = &cb.sub_codebook(s)[w * sub..(w + 1) * sub];
                let mut d = 0.0f64;
                for (a, b) in x[s * sub..(s + 1) * sub].iter().zip(c) {
                    let e = f64::from(*a) - f64::from(*b);
                    d += e * e;
                }
                total += d;
            }
            all.push((id, total));
        }
        all.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        all
    }

    #[test]
    fn assign_matches_enumeration() {
        let cb = random_codebook(6, 2, 4, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let x: Vec<f32> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
            assert_eq!(cb.assign(&x).unwrap().0, enumerate_all(&cb, &x)[0].0);
        }
    }

    #[test]
    fn nearest_words_full_order() {
        let cb = random_codebook(4, 2, 3, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            let x: Vec<f32> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let got: Vec<u64> = cb.nearest_words(&x, 9).unwrap().iter().map(|w| w.0 .0).collect();
            let want: Vec<u64> = enumerate_all(&cb, &x).iter().map(|w| w.0).collect();
            assert_eq!(got, want);
            assert_eq!(cb.nearest_words(&x, 1).unwrap()[0].0, cb.assign(&x).unwrap());
        }
        assert!(cb.nearest_words(&[0.0; 4], 0).is_err());
        assert!(cb.nearest_words(&[0.0; 4], 10).is_err());
    }

    #[test]
    fn tied_distances_order_by_word_id() {
        // All sub-centroids equidistant from the origin query.
        let cfg = PqConfig {
            segments: 2,
            words_per_segment: 2,
            ..PqConfig::default()
        };
        let cb = PqCodebook::from_centroids(cfg, 2, vec![vec![1.0, -1.0], vec![-1.0, 1.0]]).unwrap();
        let ids: Vec<u64> = cb.nearest_words(&[0.0, 0.0], 4).unwrap().iter().map(|w| w.0 .0).collect();
        assert_eq!(ids, [0, 1, 2, 3]);
        assert_eq!(cb.assign(&[0.0, 0.0]).unwrap(), ProductWordId(0));
    }

    #[test]
    fn zero_distance_and_reconstruct() {
        let cb = random_codebook(4, 2, 8, 3);
        let mut x = cb.sub_centroid(0, 3).to_vec();
        x.extend_from_slice(cb.sub_centroid(1, 7));
        let id = cb.assign(&x).unwrap();
        assert_eq!(id, cb.encode_tuple(&[3, 7]).unwrap());
        assert_eq!(id.0, 3 * 8 + 7);
        assert_eq!(cb.reconstruct(id).unwrap(), x);

        let mut first = cb.sub_centroid(0, 0).to_vec();
        first.extend_from_slice(cb.sub_centroid(1, 0));
        assert_eq!(cb.reconstruct(ProductWordId(0)).unwrap(), first);
        assert!(cb.reconstruct(ProductWordId(64)).is_err());
    }

    #[test]
    fn mixed_radix_round_trip() {
        let cb = random_codebook(6, 3, 5, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let t: Vec<usize> = (0..3).map(|_| rng.random_range(0..5)).collect();
            let id = cb.encode_tuple(&t).unwrap();
            assert_eq!(id.0 as usize, t[0] * 25 + t[1] * 5 + t[2]);
            assert_eq!(cb.decode(id).unwrap(), t);
        }
        assert!(cb.encode_tuple(&[5, 0, 0]).is_err());
        assert!(cb.encode_tuple(&[0, 0]).is_err());
    }

    #[test]
    fn single_segment_is_plain_nearest_centroid() {
        let cb = random_codebook(3, 1, 6, 9);
        let x = [0.1f32, -0.2, 0.3];
        let (j, _) = kmeans::nearest(&x, cb.sub_codebook(0), 3);
        assert_eq!(cb.assign(&x).unwrap().0, u64::from(j));
    }

    #[test]
    fn dimension_checks() {
        let cb = random_codebook(4, 2, 2, 0);
        assert!(matches!(cb.assign(&[0.0; 3]), Err(Error::DimensionMismatch { .. })));
        let cfg = PqConfig {
            segments: 3,
            words_per_segment: 2,
            ..PqConfig::default()
        };
        let fs = FeatureSet::from_flat(4, vec![0.0; 16]).unwrap();
        assert!(train(&fs, &cfg).is_err());
        let cfg = PqConfig {
            segments: 2,
            words_per_segment: 5,
            ..PqConfig::default()
        };
        assert!(train(&fs, &cfg).is_err());
        let cfg = PqConfig {
            segments: 64,
            words_per_segment: 1000,
            ..PqConfig::default()
        };
        assert!(cfg.word_count().is_err());
    }

    #[test]
    fn k_one_is_segment_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let rows: Vec<Vec<f32>> = (0..50)
            .map(|_| (0..4).map(|_| rng.random_range(-3.0..3.0)).collect())
            .collect();
        let fs = FeatureSet::from_rows(&rows).unwrap();
        let cfg = PqConfig {
            segments: 2,
            words_per_segment: 1,
            kmeans_restarts: 1,
            ..PqConfig::default()
        };
        let cb = train(&fs, &cfg).unwrap();
        let centroid = cb.reconstruct(ProductWordId(0)).unwrap();
        for d in 0..4 {
            let mean = rows.iter().map(|r| f64::from(r[d])).sum::<f64>() / 50.0;
            assert!((f64::from(centroid[d]) - mean).abs() < 1e-6);
        }
        assert_eq!(cb.sub_dim(), 2);
    }

    #[test]
    fn two_pairs_recover_pair_means() {
        let fs = FeatureSet::from_rows(&[[0.0f32, 0.0], [0.0, 1.0], [10.0, 10.0], [10.0, 11.0]]).unwrap();
        let cfg = PqConfig {
            segments: 1,
            words_per_segment: 2,
            ..PqConfig::default()
        };
        let cb = train(&fs, &cfg).unwrap();
        let mut cents: Vec<Vec<f32>> = cb.sub_codebook(0).chunks(2).map(<[f32]>::to_vec).collect();
        cents.sort_by(|a, b| a[0].total_cmp(&b[0]));

        // Exhaustive oracle over every 2-partition of the four points.
        let pts = [[0.0f64, 0.0], [0.0, 1.0], [10.0, 10.0], [10.0, 11.0]];
        let mut best = (f64::INFINITY, vec![]);
        for mask in 1u32..15 {
            let mut cost = 0.0;
            let mut means = vec![];
            for side in [true, false] {
                let members: Vec<&[f64; 2]> =
                    (0..4).filter(|i| ((mask >> i) & 1 == 1) == side).map(|i| &pts[i]).collect();
                let n = members.len() as f64;
                let mean = [
                    members.iter().map(|p| p[0]).sum::<f64>() / n,
                    members.iter().map(|p| p[1]).sum::<f64>() / n,
                ];
                cost += members
                    .iter()
                    .map(|p| (p[0] - mean[0]).powi(2) + (p[1] - mean[1]).powi(2))
                    .sum::<f64>();
                means.push(mean);
            }
            if cost < best.0 {
                best = (cost, means);
            }
        }
        let mut want = best.1;
        want.sort_by(|a, b| a[0].total_cmp(&b[0]));
        for (c, w) in cents.iter().zip(&want) {
            assert!((f64::from(c[0]) - w[0]).abs() < 1e-6 && (f64::from(c[1]) - w[1]).abs() < 1e-6);
        }
    }

    #[test]
    fn training_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let data: Vec<f32> = (0..400 * 8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let fs = FeatureSet::from_flat(8, data).unwrap();
        let cfg = PqConfig {
            segments: 2,
            words_per_segment: 16,
            kmeans_seed: 4,
            ..PqConfig::default()
        };
        assert_eq!(train(&fs, &cfg).unwrap(), train(&fs, &cfg).unwrap());
    }

    #[test]
    fn codebook_file_round_trip() {
        let cb = random_codebook(12, 3, 5, 77);
        let bytes = cb.to_bytes();
        assert_eq!(bytes.len(), 8 + 4 + 24 + 3 * 5 * 4 * 4 + 4);
        assert_eq!(PqCodebook::from_bytes(&bytes).unwrap(), cb);
        let mut bad = bytes.clone();
        bad[20] ^= 1;
        assert!(matches!(PqCodebook::from_bytes(&bad), Err(Error::Checksum { .. })));
        assert!(matches!(PqCodebook::from_bytes(b"CNNIDX01...."), Err(Error::BadMagic)));
    }
}
