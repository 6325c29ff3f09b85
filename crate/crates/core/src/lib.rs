//! Inverted-table indexing for global, high-dimensional image features.
//!
//! Database vectors are quantized into visual words by one of two schemes:
//!
//! - **TIFC** treats each feature dimension as a virtual concept word. A
//!   softmax turns the vector into a term-frequency histogram and the top-`S`
//!   bins become the vector's words.
//! - **IFC** learns a product-quantization dictionary of `K^M` words and links
//!   each vector to its `S` nearest product words.
//!
//! Every link carries an `L`-bit binary embedding code. At query time the
//! query is assigned to `W` words, posting entries whose code lies at Hamming
//! distance `>= T` from the query's code are discarded, and the remaining
//! entries vote for their images.
//!
//! Brute-force and random-hyperplane LSH baselines plus a MAP / timing /
//! storage evaluation harness live alongside the index.

pub mod baseline;
mod bytes;
pub mod embed;
pub mod error;
pub mod eval;
pub mod index;
pub mod pq;
pub mod search;
pub mod tifc;
pub mod vecio;

pub use error::{Error, Result};
pub use index::{BuildConfig, InvertedIndex, Scheme};
pub use search::{QueryConfig, RankedResult};
pub use vecio::{FeatureSet, FeatureVector, GroundTruth};

/// Squared Euclidean distance accumulated in `f64`.
#[inline]
pub fn squared_l2(a: &[f32], b: &[f32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = f64::from(x) - f64::from(y);
            d * d
        })
        .sum()
}
