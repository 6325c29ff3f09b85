//! Query pipeline: multiple assignment, Hamming filtering and voting.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embed;
use crate::error::{Error, Result};
use crate::index::InvertedIndex;
use crate::vecio::FeatureSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryConfig {
    /// Words probed per query (`W`).
    pub assignment_count: usize,
    /// An entry votes only when its Hamming distance is strictly below this.
    pub hamming_threshold: u32,
    pub top_k: usize,
}

impl Default for QueryConfig {
    fn default() -> Self {
        Self {
            assignment_count: 40,
            hamming_threshold: 180,
            top_k: 100,
        }
    }
}

impl QueryConfig {
    pub fn validate(&self, ix: &InvertedIndex) -> Result<()> {
        if self.assignment_count == 0 || self.assignment_count as u64 > ix.word_count() {
            return Err(Error::InvalidConfig(format!(
                "assignment count W = {} outside 1..={}",
                self.assignment_count,
                ix.word_count()
            )));
        }
        if self.hamming_threshold as usize > ix.embed().code_length {
            return Err(Error::InvalidConfig(format!(
                "Hamming threshold T = {} exceeds code length {}",
                self.hamming_threshold,
                ix.embed().code_length
            )));
        }
        if self.top_k == 0 {
            return Err(Error::InvalidConfig("top_k must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hit {
    pub image_id: u32,
    pub votes: u32,
    pub min_hamming: u32,
}

/// Hits ordered by votes (descending), then smallest Hamming distance seen,
/// then image id.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankedResult {
    pub hits: Vec<Hit>,
}

impl RankedResult {
    pub fn ids(&self) -> Vec<u32> {
        self.hits.iter().map(|h| h.image_id).collect()
    }

    pub fn len(&self) -> usize {
        self.hits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hits.is_empty()
    }
}

/// Counters gathered while answering one query.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryTrace {
    /// Posting entries inspected across all probed lists.
    pub scanned_entries: u64,
    /// Entries that passed the Hamming filter.
    pub passed_entries: u64,
}

fn check_query(ix: &InvertedIndex, q: &[f32]) -> Result<()> {
    if q.len() != ix.dim() {
        return Err(Error::DimensionMismatch {
            expected: ix.dim(),
            found: q.len(),
        });
    }
    Ok(())
}

pub fn query(ix: &InvertedIndex, q: &[f32], cfg: &QueryConfig) -> Result<RankedResult> {
    query_traced(ix, q, cfg).map(|(r, _)| r)
}

pub fn query_traced(ix: &InvertedIndex, q: &[f32], cfg: &QueryConfig) -> Result<(RankedResult, QueryTrace)> {
    check_query(ix, q)?;
    cfg.validate(ix)?;
    let quantizer = ix.quantizer();
    let code_bytes = ix.code_bytes();
    let code_length = ix.embed().code_length;
    let mut trace = QueryTrace::default();
    let mut passed: Vec<(u32, u32)> = Vec::new();
    let mut qcode = vec![0u8; code_bytes];

    for word in quantizer.select_words(q, cfg.assignment_count)? {
        let Some(list) = ix.list(word) else { continue };
        let c = quantizer.word_vector(word)?;
        embed::encode_into(q, &c, code_length, &mut qcode);
        for entry in list.entries(code_bytes) {
            trace.scanned_entries += 1;
            let h = embed::hamming_bytes(&qcode, entry.code);
            if h < cfg.hamming_threshold {
                passed.push((entry.image_id, h));
            }
        }
    }
    trace.passed_entries = passed.len() as u64;

    // Each image appears at most once per list, so a run of equal ids after
    // sorting is its vote count.
    passed.sort_unstable();
    let mut hits: Vec<Hit> = Vec::new();
    for (id, h) in passed {
        match hits.last_mut() {
            Some(last) if last.image_id == id => {
                last.votes += 1;
                last.min_hamming = last.min_hamming.min(h);
            }
            _ => hits.push(Hit {
                image_id: id,
                votes: 1,
                min_hamming: h,
            }),
        }
    }
    let rank = |a: &Hit, b: &Hit| {
        b.votes
            .cmp(&a.votes)
            .then(a.min_hamming.cmp(&b.min_hamming))
            .then(a.image_id.cmp(&b.image_id))
    };
    if hits.len() > cfg.top_k {
        hits.select_nth_unstable_by(cfg.top_k - 1, rank);
        hits.truncate(cfg.top_k);
    }
    hits.sort_unstable_by(rank);
    Ok((RankedResult { hits }, trace))
}

/// Union of the posting lists of the `assignment_count` words selected for
/// `q`, before any Hamming filtering. Sorted ascending.
pub fn candidate_set(ix: &InvertedIndex, q: &[f32], assignment_count: usize) -> Result<Vec<u32>> {
    check_query(ix, q)?;
    if assignment_count == 0 || assignment_count as u64 > ix.word_count() {
        return Err(Error::InvalidConfig(format!(
            "assignment count W = {assignment_count} outside 1..={}",
            ix.word_count()
        )));
    }
    let code_bytes = ix.code_bytes();
    let mut ids = Vec::new();
    for word in ix.quantizer().select_words(q, assignment_count)? {
        if let Some(list) = ix.list(word) {
            ids.extend(list.entries(code_bytes).map(|e| e.image_id));
        }
    }
    ids.sort_unstable();
    ids.dedup();
    Ok(ids)
}

/// Answers every query, in parallel, preserving query order.
pub fn query_batch(ix: &InvertedIndex, queries: &FeatureSet, cfg: &QueryConfig) -> Result<Vec<RankedResult>> {
    cfg.validate(ix)?;
    (0..queries.len())
        .into_par_iter()
        .map(|i| query(ix, queries.get(i), cfg))
        .collect()
}
