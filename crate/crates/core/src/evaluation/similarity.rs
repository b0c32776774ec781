use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::RelationInstance;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::numerics::dot;

pub const DEFAULT_SAMPLE_CAP: usize = 1_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainSimilarity {
    pub mean_cosine: f64,
    /// Pairs averaged over.
    pub pairs: usize,
    /// Whether `pairs` is a seeded sample of the cross pairs.
    pub sampled: bool,
    /// Vectors dropped for having zero norm, both sides together.
    pub zero_norm_excluded: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarityReport {
    pub sample_cap: usize,
    /// Keyed by the test instances' domain.
    pub domains: BTreeMap<String, DomainSimilarity>,
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = dot(a, a).sqrt();
    let nb = dot(b, b).sqrt();
    (dot(a, b) / (na * nb)).clamp(-1.0, 1.0)
}

/// Mean cosine over all `(train, test)` pairs, or over `sample_cap` pairs
/// drawn uniformly with replacement when there are more.
pub fn vector_similarity(train: &[Vec<f64>], test: &[Vec<f64>], sample_cap: usize, seed: u64) -> Result<DomainSimilarity> {
    let nonzero = |v: &&Vec<f64>| v.iter().any(|&x| x != 0.0);
    let a: Vec<&Vec<f64>> = train.iter().filter(nonzero).collect();
    let b: Vec<&Vec<f64>> = test.iter().filter(nonzero).collect();
    let zero_norm_excluded = train.len() - a.len() + test.len() - b.len();
    if a.is_empty() || b.is_empty() {
        return Err(Error::Precondition("no nonzero vectors on one side of the comparison".into()));
    }
    if sample_cap == 0 {
        return Err(Error::Precondition("sample_cap must be positive".into()));
    }
    let total = a.len() * b.len();
    let (sum, pairs, sampled) = if total <= sample_cap {
        let sum: f64 = a.iter().flat_map(|x| b.iter().map(move |y| cosine(x, y))).sum();
        (sum, total, false)
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sum: f64 = (0..sample_cap)
            .map(|_| cosine(a[rng.gen_range(0..a.len())], b[rng.gen_range(0..b.len())]))
            .sum();
        (sum, sample_cap, true)
    };
    Ok(DomainSimilarity { mean_cosine: sum / pairs as f64, pairs, sampled, zero_norm_excluded })
}

/// Cosine similarity between aggregation vectors of training instances and
/// test instances, reported per test domain.
pub fn representation_similarity(
    model: &Model,
    train: &[RelationInstance],
    test: &[RelationInstance],
    sample_cap: usize,
    seed: u64,
) -> Result<SimilarityReport> {
    if train.is_empty() || test.is_empty() {
        return Err(Error::Precondition("similarity needs nonempty train and test sets".into()));
    }
    let vectors = |insts: &[RelationInstance]| -> Result<Vec<Vec<f64>>> {
        insts.iter().map(|i| model.predict_instance(i).map(|t| t.o)).collect()
    };
    let train_vecs = vectors(train)?;
    let mut by_domain: BTreeMap<String, Vec<Vec<f64>>> = BTreeMap::new();
    for (inst, o) in test.iter().zip(vectors(test)?) {
        by_domain.entry(inst.domain.clone()).or_default().push(o);
    }
    let mut domains = BTreeMap::new();
    for (domain, vecs) in by_domain {
        domains.insert(domain, vector_similarity(&train_vecs, &vecs, sample_cap, seed)?);
    }
    Ok(SimilarityReport { sample_cap, domains })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_and_orthogonal() {
        let r = vector_similarity(&[vec![1.0, 2.0]], &[vec![1.0, 2.0]], 10, 0).unwrap();
        assert!((r.mean_cosine - 1.0).abs() < 1e-15);
        let r = vector_similarity(&[vec![1.0, 0.0]], &[vec![0.0, 3.0]], 10, 0).unwrap();
        assert_eq!(r.mean_cosine, 0.0);
    }

    #[test]
    fn zero_vectors_are_counted_and_dropped() {
        let r = vector_similarity(&[vec![0.0, 0.0], vec![1.0, 1.0]], &[vec![2.0, 2.0]], 10, 0).unwrap();
        assert_eq!(r.zero_norm_excluded, 1);
        assert_eq!(r.pairs, 1);
        assert!(vector_similarity(&[vec![0.0]], &[vec![1.0]], 10, 0).is_err());
    }

    #[test]
    fn sampling_kicks_in_above_cap() {
        let a: Vec<Vec<f64>> = (0..5).map(|i| vec![1.0, i as f64]).collect();
        let r = vector_similarity(&a, &a, 7, 3).unwrap();
        assert!(r.sampled && r.pairs == 7);
        assert_eq!(r, vector_similarity(&a, &a, 7, 3).unwrap());
        assert!(!vector_similarity(&a, &a, 25, 3).unwrap().sampled);
    }
}
