//! Lloyd's k-means with k-means++ seeding over a flat row-major buffer.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::squared_l2;

/// Rows handled per parallel work unit. Partial sums are merged in chunk
/// order, so results do not depend on the thread count.
const CHUNK_ROWS: usize = 1024;

#[derive(Debug, Clone)]
pub struct KMeansResult {
    /// `k * dim` centroid buffer.
    pub centroids: Vec<f32>,
    pub assignments: Vec<u32>,
    /// Within-cluster sum of squares of the final assignment.
    pub inertia: f64,
    pub iterations: usize,
    /// Inertia after the seeding assignment and after every Lloyd step.
    pub history: Vec<f64>,
}

/// Index of the nearest centroid (ties to the smaller index) and its
/// squared distance.
pub fn nearest(point: &[f32], centroids: &[f32], dim: usize) -> (u32, f64) {
    let mut best = (0u32, f64::INFINITY);
    for (j, c) in centroids.chunks_exact(dim).enumerate() {
        let d = squared_l2(point, c);
        if d < best.1 {
            best = (j as u32, d);
        }
    }
    best
}

fn assign_all(data: &[f32], dim: usize, centroids: &[f32]) -> (Vec<u32>, f64) {
    let parts: Vec<(Vec<u32>, f64)> = data
        .par_chunks(CHUNK_ROWS * dim)
        .map(|chunk| {
            let mut ids = Vec::with_capacity(chunk.len() / dim);
            let mut cost = 0.0;
            for p in chunk.chunks_exact(dim) {
                let (j, d) = nearest(p, centroids, dim);
                ids.push(j);
                cost += d;
            }
            (ids, cost)
        })
        .collect();
    let mut ids = Vec::with_capacity(data.len() / dim);
    let mut cost = 0.0;
    for (part, c) in parts {
        ids.extend(part);
        cost += c;
    }
    (ids, cost)
}

/// Recomputes centroids as cluster means. Empty clusters keep their previous
/// centroid.
fn update(data: &[f32], dim: usize, k: usize, assignments: &[u32], centroids: &mut [f32]) {
    let partials: Vec<(Vec<f64>, Vec<usize>)> = data
        .par_chunks(CHUNK_ROWS * dim)
        .zip(assignments.par_chunks(CHUNK_ROWS))
        .map(|(chunk, ids)| {
            let mut sums = vec![0f64; k * dim];
            let mut counts = vec![0usize; k];
            for (p, &j) in chunk.chunks_exact(dim).zip(ids) {
                let j = j as usize;
                counts[j] += 1;
                for (s, &v) in sums[j * dim..(j + 1) * dim].iter_mut().zip(p) {
                    *s += f64::from(v);
                }
            }
            (sums, counts)
        })
        .collect();
    let mut sums = vec![0f64; k * dim];
    let mut counts = vec![0usize; k];
    for (s, c) in partials {
        for (a, b) in sums.iter_mut().zip(s) {
            *a += b;
        }
        for (a, b) in counts.iter_mut().zip(c) {
            *a += b;
        }
    }
    for j in 0..k {
        if counts[j] == 0 {
            continue;
        }
        let n = counts[j] as f64;
        for (c, s) in centroids[j * dim..(j + 1) * dim]
            .iter_mut()
            .zip(&sums[j * dim..(j + 1) * dim])
        {
            *c = (s / n) as f32;
        }
    }
}

/// k-means++: first center uniform, the rest sampled proportional to the
/// squared distance to the nearest chosen center.
fn seed_plus_plus(data: &[f32], dim: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<f32> {
    let n = data.len() / dim;
    let row = |i: usize| &data[i * dim..(i + 1) * dim];
    let mut centroids = Vec::with_capacity(k * dim);
    centroids.extend_from_slice(row(rng.random_range(0..n)));
    let mut dist: Vec<f64> = (0..n).map(|i| squared_l2(row(i), &centroids[..dim])).collect();
    while centroids.len() < k * dim {
        let total: f64 = dist.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, &d) in dist.iter().enumerate() {
                acc += d;
                if acc > target {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            // every point coincides with a chosen center
            rng.random_range(0..n)
        };
        let start = centroids.len();
        centroids.extend_from_slice(row(pick));
        for (i, d) in dist.iter_mut().enumerate() {
            *d = d.min(squared_l2(row(i), &centroids[start..start + dim]));
        }
    }
    centroids
}

/// One k-means run. Stops once an assignment pass changes nothing or after
/// `max_iters` centroid updates (at least one update is always performed).
pub fn lloyd(data: &[f32], dim: usize, k: usize, max_iters: usize, rng: &mut ChaCha8Rng) -> KMeansResult {
    assert!(dim > 0 && k > 0 && data.len() >= k * dim, "k-means needs at least k points");
    let mut centroids = seed_plus_plus(data, dim, k, rng);
    let (mut assignments, mut inertia) = assign_all(data, dim, &centroids);
    let mut history = vec![inertia];
    let mut iterations = 0;
    while iterations < max_iters.max(1) {
        update(data, dim, k, &assignments, &mut centroids);
        iterations += 1;
        let (next, cost) = assign_all(data, dim, &centroids);
        history.push(cost);
        inertia = cost;
        let changed = next != assignments;
        assignments = next;
        if !changed {
            break;
        }
    }
    KMeansResult {
        centroids,
        assignments,
        inertia,
        iterations,
        history,
    }
}
