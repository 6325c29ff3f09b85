//! Exact brute-force search and sign-random-projection LSH.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::squared_l2;
use crate::vecio::FeatureSet;

/// `(id, squared distance)` pairs, nearest first.
pub type Neighbors = Vec<(u32, f64)>;

fn check_dim(db: &FeatureSet, q: &[f32]) -> Result<()> {
    if q.len() != db.dim() {
        return Err(Error::DimensionMismatch {
            expected: db.dim(),
            found: q.len(),
        });
    }
    Ok(())
}

fn top_k(mut scored: Neighbors, k: usize) -> Neighbors {
    let cmp = |a: &(u32, f64), b: &(u32, f64)| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0));
    if k == 0 {
        return Vec::new();
    }
    if scored.len() > k {
        scored.select_nth_unstable_by(k - 1, cmp);
        scored.truncate(k);
    }
    scored.sort_unstable_by(cmp);
    scored
}

/// The `top_k` database vectors nearest to `q`, ties to the smaller id.
pub fn brute_force(db: &FeatureSet, q: &[f32], top_k_count: usize) -> Result<Neighbors> {
    check_dim(db, q)?;
    let scored = db
        .iter()
        .enumerate()
        .map(|(i, x)| (i as u32, squared_l2(q, x)))
        .collect();
    Ok(top_k(scored, top_k_count))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LshConfig {
    pub tables: usize,
    pub bits_per_table: usize,
    pub seed: u64,
}

impl Default for LshConfig {
    fn default() -> Self {
        Self {
            tables: 8,
            bits_per_table: 16,
            seed: 0,
        }
    }
}

impl LshConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tables == 0 || self.bits_per_table == 0 {
            return Err(Error::InvalidConfig("LSH needs at least one table and one bit".into()));
        }
        if self.bits_per_table > 64 {
            return Err(Error::InvalidConfig("at most 64 bits per LSH table".into()));
        }
        Ok(())
    }
}

/// Random-hyperplane hash tables over a borrowed database. Candidates are
/// re-ranked by exact distance.
#[derive(Debug)]
pub struct LshIndex<'a> {
    cfg: LshConfig,
    db: &'a FeatureSet,
    /// `tables * bits * dim` Gaussian hyperplane normals, table by table.
    planes: Vec<f32>,
    buckets: Vec<HashMap<u64, Vec<u32>>>,
}

impl<'a> LshIndex<'a> {
    pub fn build(db: &'a FeatureSet, cfg: &LshConfig) -> Result<Self> {
        cfg.validate()?;
        let dim = db.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        // Drawn table by table, so the first t tables do not depend on the
        // total table count.
        let planes: Vec<f32> = (0..cfg.tables * cfg.bits_per_table * dim)
            .map(|_| rng.sample::<f64, _>(StandardNormal) as f32)
            .collect();
        let mut ix = Self {
            cfg: *cfg,
            db,
            planes,
            buckets: Vec::with_capacity(cfg.tables),
        };
        let hashes: Vec<Vec<u64>> = (0..db.len())
            .into_par_iter()
            .map(|i| ix.hash_all(db.get(i)))
            .collect();
        for t in 0..cfg.tables {
            let mut table: HashMap<u64, Vec<u32>> = HashMap::new();
            for (i, h) in hashes.iter().enumerate() {
                table.entry(h[t]).or_default().push(i as u32);
            }
            ix.buckets.push(table);
        }
        Ok(ix)
    }

    pub fn config(&self) -> &LshConfig {
        &self.cfg
    }

    fn hash(&self, table: usize, x: &[f32]) -> u64 {
        let dim = self.db.dim();
        let bits = self.cfg.bits_per_table;
        let base = table * bits * dim;
        let mut h = 0u64;
        for b in 0..bits {
            let normal = &self.planes[base + b * dim..base + (b + 1) * dim];
            let dot: f64 = normal.iter().zip(x).map(|(&a, &v)| f64::from(a) * f64::from(v)).sum();
            if dot >= 0.0 {
                h |= 1 << b;
            }
        }
        h
    }

    fn hash_all(&self, x: &[f32]) -> Vec<u64> {
        (0..self.cfg.tables).map(|t| self.hash(t, x)).collect()
    }

    /// Union of `q`'s buckets over all tables, sorted ascending.
    pub fn candidates(&self, q: &[f32]) -> Result<Vec<u32>> {
        check_dim(self.db, q)?;
        let mut ids = Vec::new();
        for (t, table) in self.buckets.iter().enumerate() {
            if let Some(b) = table.get(&self.hash(t, q)) {
                ids.extend_from_slice(b);
            }
        }
        ids.sort_unstable();
        ids.dedup();
        Ok(ids)
    }

    pub fn query(&self, q: &[f32], top_k_count: usize) -> Result<Neighbors> {
        let scored = self
            .candidates(q)?
            .into_iter()
            .map(|i| (i, squared_l2(q, self.db.get(i as usize))))
            .collect();
        Ok(top_k(scored, top_k_count))
    }

    /// Bytes held by hyperplanes and bucket id lists.
    pub fn memory_bytes(&self) -> usize {
        self.planes.len() * 4
            + self
                .buckets
                .iter()
                .map(|t| t.values().map(|b| 8 + 4 * b.len()).sum::<usize>())
                .sum::<usize>()
    }
}

/// Fraction of `truth` ids present in `found`.
pub fn recall(found: &[u32], truth: &[u32]) -> f64 {
    if truth.is_empty() {
        return 1.0;
    }
    let hits = truth.iter().filter(|t| found.contains(t)).count();
    hits as f64 / truth.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vecio::{generate_synthetic, SynthSpec};

    #[test]
    fn self_match_first() {
        let data = generate_synthetic(&SynthSpec {
            n_clusters: 4,
            points_per_cluster: 5,
            dim: 8,
            cluster_stddev: 1.0,
            noise_stddev: 0.0,
            seed: 1,
        })
        .unwrap();
        let r = brute_force(&data.database, data.database.get(7), 3).unwrap();
        assert_eq!(r[0], (7, 0.0));
    }

    #[test]
    fn hand_distances() {
        let db = FeatureSet::from_rows(&[[3.0f32, 0.0], [1.0, 1.0], [0.0, -1.0]]).unwrap();
        // from (0, 0): 9, 2, 1
        let r = brute_force(&db, &[0.0, 0.0], 3).unwrap();
        assert_eq!(r, vec![(2, 1.0), (1, 2.0), (0, 9.0)]);
        // from (1, 0): 4, 1, 2
        let ids: Vec<u32> = brute_force(&db, &[1.0, 0.0], 10).unwrap().iter().map(|x| x.0).collect();
        assert_eq!(ids, [1, 2, 0]);
        // ties by id
        let db = FeatureSet::from_rows(&[[1.0f32], [-1.0], [1.0]]).unwrap();
        let ids: Vec<u32> = brute_force(&db, &[0.0], 2).unwrap().iter().map(|x| x.0).collect();
        assert_eq!(ids, [0, 1]);
        assert!(brute_force(&db, &[0.0, 1.0], 2).is_err());
    }

    #[test]
    fn lsh_duplicates_are_candidates() {
        let data = generate_synthetic(&SynthSpec {
            n_clusters: 20,
            points_per_cluster: 20,
            dim: 16,
            cluster_stddev: 1.0,
            noise_stddev: 0.0,
            seed: 2,
        })
        .unwrap();
        let ix = LshIndex::build(&data.database, &LshConfig { tables: 3, bits_per_table: 12, seed: 5 }).unwrap();
        for i in (0..400).step_by(37) {
            let q = data.database.get(i);
            assert!(ix.candidates(q).unwrap().binary_search(&(i as u32)).is_ok());
            assert_eq!(ix.query(q, 1).unwrap()[0].0, i as u32);
        }
    }

    #[test]
    fn lsh_rejects_bad_config() {
        let db = FeatureSet::from_rows(&[[1.0f32]]).unwrap();
        assert!(LshIndex::build(&db, &LshConfig { tables: 1, bits_per_table: 0, seed: 0 }).is_err());
        assert!(LshIndex::build(&db, &LshConfig { tables: 0, bits_per_table: 4, seed: 0 }).is_err());
        assert!(LshIndex::build(&db, &LshConfig { tables: 1, bits_per_table: 65, seed: 0 }).is_err());
    }

    #[test]
    fn more_tables_never_lose_recall() {
        let data = generate_synthetic(&SynthSpec {
            n_clusters: 50,
            points_per_cluster: 40,
            dim: 32,
            cluster_stddev: 1.0,
            noise_stddev: 0.3,
            seed: 3,
        })
        .unwrap();
        let db = &data.database;
        let queries: Vec<usize> = (0..db.len()).step_by(19).take(100).collect();
        let truth: Vec<Vec<u32>> = queries
            .iter()
            .map(|&i| brute_force(db, db.get(i), 10).unwrap().iter().map(|x| x.0).collect())
            .collect();
        let mut prev = 0.0;
        for tables in [1, 2, 4, 8] {
            let ix = LshIndex::build(db, &LshConfig { tables, bits_per_table: 14, seed: 9 }).unwrap();
            let total: f64 = queries
                .iter()
                .zip(&truth)
                .map(|(&i, t)| {
                    let found: Vec<u32> = ix.query(db.get(i), 10).unwrap().iter().map(|x| x.0).collect();
                    recall(&found, t)
                })
                .sum();
            let r = total / queries.len() as f64;
            assert!(r >= prev, "recall fell from {prev} to {r} at {tables} tables");
            prev = r;
        }
    }
}
