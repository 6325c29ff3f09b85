//! Term-frequency quantizer: every feature dimension is a virtual concept
//! word, and a softmax over the raw activations gives each word's weight.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Softmax of a feature vector: `D` word probabilities summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct TermFrequencyVector {
    probs: Vec<f64>,
}

impl TermFrequencyVector {
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// `probs[i] = exp(x[i] - max) / sum_j exp(x[j] - max)`.
pub fn softmax<T: Copy + Into<f64>>(x: &[T]) -> Result<TermFrequencyVector> {
    if x.is_empty() {
        return Err(Error::InvalidInput("softmax of an empty vector".into()));
    }
    let mut max = f64::NEG_INFINITY;
    for (i, &v) in x.iter().enumerate() {
        let v: f64 = v.into();
        if !v.is_finite() {
            return Err(Error::InvalidInput(format!("component {i} is not finite")));
        }
        max = max.max(v);
    }
    let mut probs: Vec<f64> = x.iter().map(|&v| (v.into() - max).exp()).collect();
    let total: f64 = probs.iter().sum();
    for p in probs.iter_mut() {
        *p /= total;
    }
    Ok(TermFrequencyVector { probs })
}

/// The `count` heaviest bins, heaviest first; equal weights go to the
/// smaller word id.
pub fn top_words(tf: &TermFrequencyVector, count: usize) -> Result<Vec<(usize, f64)>> {
    top_k_desc(tf.probs(), count)
}

/// Top-`count` selection by descending value, ties by ascending index. The
/// same ordering is used on raw activations since softmax is monotone.
pub(crate) fn top_k_desc<T: Copy + PartialOrd>(values: &[T], count: usize) -> Result<Vec<(usize, T)>> {
    if count == 0 || count > values.len() {
        return Err(Error::InvalidConfig(format!(
            "word count {count} outside 1..={}",
            values.len()
        )));
    }
    let cmp = |a: &usize, b: &usize| {
        values[*b]
            .partial_cmp(&values[*a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(b))
    };
    let mut idx: Vec<usize> = (0..values.len()).collect();
    if count < idx.len() {
        idx.select_nth_unstable_by(count - 1, cmp);
        idx.truncate(count);
    }
    idx.sort_unstable_by(cmp);
    Ok(idx.into_iter().map(|i| (i, values[i])).collect())
}

/// One random `D`-dimensional reference vector per virtual word, used as the
/// comparison point for binary codes. Regenerated from `(dim, seed)`.
#[derive(Debug, Clone, PartialEq)]
pub struct VirtualWordBank {
    dim: usize,
    seed: u64,
    vectors: Vec<f32>,
}

impl VirtualWordBank {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn word(&self, id: usize) -> &[f32] {
        &self.vectors[id * self.dim..(id + 1) * self.dim]
    }

    /// Resident size of the generated vectors.
    pub fn memory_bytes(&self) -> usize {
        self.vectors.len() * std::mem::size_of::<f32>()
    }
}

pub fn make_virtual_words(dim: usize, seed: u64) -> Result<VirtualWordBank> {
    if dim == 0 {
        return Err(Error::InvalidConfig("virtual word dimension must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vectors = (0..dim * dim)
        .map(|_| rng.sample::<f64, _>(StandardNormal) as f32)
        .collect();
    Ok(VirtualWordBank { dim, seed, vectors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn uniform_inputs() {
        let tf = softmax(&[0.0f32; 4]).unwrap();
        assert_eq!(tf.probs(), &[0.25; 4]);
        let tf = softmax(&[7.5f64; 5]).unwrap();
        for &p in tf.probs() {
            assert!((p - 0.2).abs() < 1e-15);
        }
    }

    #[test]
    fn known_values() {
        // Direct evaluation: e^k / (e + e^2 + e^3).
        let e = std::f64::consts::E;
        let z = e + e * e + e * e * e;
        let expect = [e / z, e * e / z, e * e * e / z];
        let tf = softmax(&[1.0f32, 2.0, 3.0]).unwrap();
        for (p, q) in tf.probs().iter().zip(expect) {
            assert!((p - q).abs() < 1e-12);
        }
        assert!((tf.probs()[0] - 0.090031).abs() < 1e-6);
        assert!((tf.probs()[1] - 0.244728).abs() < 1e-6);
        assert!((tf.probs()[2] - 0.665241).abs() < 1e-6);
    }

    #[test]
    fn rejects_non_finite() {
        assert!(softmax(&[1.0f32, f32::NAN]).is_err());
        assert!(softmax(&[f64::INFINITY]).is_err());
        assert!(softmax::<f32>(&[]).is_err());
    }

    #[test]
    fn huge_component_stays_finite() {
        let tf = softmax(&[1e4f32, 0.0, -1e4]).unwrap();
        assert!(tf.probs().iter().all(|p| p.is_finite()));
        assert_eq!(tf.probs()[0], 1.0);
    }

    #[test]
    fn top_words_examples() {
        let tf = softmax(&[5.0f32, 1.0, 9.0, 3.0]).unwrap();
        let ids: Vec<usize> = top_words(&tf, 2).unwrap().iter().map(|w| w.0).collect();
        assert_eq!(ids, [2, 0]);

        let all: Vec<usize> = top_words(&tf, 4).unwrap().iter().map(|w| w.0).collect();
        assert_eq!(all, [2, 0, 3, 1]);

        let mut x = [0.0f32; 10];
        x[3] = 2.0;
        x[7] = 2.0;
        let tf = softmax(&x).unwrap();
        assert_eq!(tf.probs()[3], tf.probs()[7]);
        assert_eq!(top_words(&tf, 1).unwrap()[0].0, 3);
        assert_eq!(top_words(&tf, 2).unwrap()[1].0, 7);

        assert!(top_words(&tf, 0).is_err());
        assert!(top_words(&tf, 11).is_err());
    }

    #[test]
    fn virtual_words_are_seeded() {
        let a = make_virtual_words(16, 5).unwrap();
        assert_eq!(a, make_virtual_words(16, 5).unwrap());
        assert_ne!(a.vectors, make_virtual_words(16, 6).unwrap().vectors);
        let one = make_virtual_words(1, 5).unwrap();
        assert_eq!(one.word(0).len(), 1);
        assert!(make_virtual_words(0, 1).is_err());
    }

    proptest! {
        #[test]
        fn sums_to_one(x in prop::collection::vec(-50.0f64..50.0, 1..64)) {
            let tf = softmax(&x).unwrap();
            let total: f64 = tf.probs().iter().sum();
            prop_assert!((total - 1.0).abs() <= 1e-9);
            prop_assert!(tf.probs().iter().all(|&p| p > 0.0));
        }

        #[test]
        fn shift_invariant(x in prop::collection::vec(-50.0f64..50.0, 1..64), c in -100.0f64..100.0) {
            let a = softmax(&x).unwrap();
            let shifted: Vec<f64> = x.iter().map(|v| v + c).collect();
            let b = softmax(&shifted).unwrap();
            for (p, q) in a.probs().iter().zip(b.probs()) {
                prop_assert!((p - q).abs() <= 1e-12);
            }
        }
    }
}
