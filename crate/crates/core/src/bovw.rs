//! Bag-of-binary-words baseline: a Hamming-space codebook trained with
//! k-majority clustering and l2-normalized visual-word histograms.

use rand::Rng;
use rayon::prelude::*;

use crate::bitdesc::{nearest, BinaryDescriptor, FeatureSet};
use crate::bmm::seeded_rng;
use crate::error::{Error, Result};
use crate::normalize::l2_normalize_slice;

/// Codebook size used by the baseline unless overridden.
pub const DEFAULT_CODEBOOK_SIZE: usize = 1024;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryCodebook {
    centroids: Vec<BinaryDescriptor>,
    dims: usize,
}

impl BinaryCodebook {
    pub fn new(centroids: Vec<BinaryDescriptor>) -> Result<Self> {
        let dims = centroids
            .first()
            .map(BinaryDescriptor::dims)
            .ok_or_else(|| Error::validation("centroids", "codebook is empty"))?;
        for (k, c) in centroids.iter().enumerate() {
            if c.dims() != dims {
                return Err(Error::validation(
                    format!("centroids[{k}]"),
                    format!("{} bits, expected {dims}", c.dims()),
                ));
            }
        }
        Ok(Self { centroids, dims })
    }

    pub fn centroids(&self) -> &[BinaryDescriptor] {
        &self.centroids
    }

    pub fn len(&self) -> usize {
        self.centroids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centroids.is_empty()
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    /// Nearest centroid and its distance; ties go to the lowest index.
    pub fn assign(&self, x: &BinaryDescriptor) -> (usize, u32) {
        nearest(x, &self.centroids).expect("codebook is never empty")
    }

    /// Codebook restricted to the first `d_prime` bits.
    pub fn truncate(&self, d_prime: usize) -> Result<Self> {
        let centroids = self
            .centroids
            .iter()
            .map(|c| c.truncate(d_prime))
            .collect::<Result<_>>()?;
        Self::new(centroids)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KMajorityReport {
    pub iterations: usize,
    /// Sum of Hamming distances to the assigned centroid after each assignment step.
    pub objective_trace: Vec<u64>,
    pub reseeded: usize,
    pub converged: bool,
}

/// Trains a `k`-word codebook with k-majority clustering: Hamming
/// assignment, then a bitwise majority vote per cluster (ties set the bit).
/// Empty clusters are reseeded from a random data point. Stops when the
/// assignment no longer changes or after `max_iters` rounds.
pub fn train_codebook(
    data: &FeatureSet,
    k: usize,
    seed: u64,
    max_iters: usize,
) -> Result<(BinaryCodebook, KMajorityReport)> {
    if k == 0 {
        return Err(Error::param("k", "must be at least 1"));
    }
    if max_iters == 0 {
        return Err(Error::param("max_iters", "must be at least 1"));
    }
    if data.len() < k {
        return Err(Error::TooFewSamples {
            needed: k,
            available: data.len(),
        });
    }
    let xs = data.descriptors();
    let dims = data.dims();
    let mut rng = seeded_rng(seed);
    let mut centroids: Vec<BinaryDescriptor> = rand::seq::index::sample(&mut rng, xs.len(), k)
        .into_iter()
        .map(|i| xs[i].clone())
        .collect();

    let mut assignment: Vec<usize> = Vec::new();
    let mut report = KMajorityReport {
        iterations: 0,
        objective_trace: Vec::new(),
        reseeded: 0,
        converged: false,
    };

    for iteration in 1..=max_iters {
        let assigned: Vec<(usize, u32)> = xs
            .par_iter()
            .map(|x| nearest(x, &centroids).expect("k >= 1"))
            .collect();
        report.iterations = iteration;
        report
            .objective_trace
            .push(assigned.iter().map(|&(_, d)| u64::from(d)).sum());
        let next: Vec<usize> = assigned.iter().map(|&(c, _)| c).collect();
        if next == assignment {
            report.converged = true;
            break;
        }
        assignment = next;

        let mut ones = vec![0u32; k * dims];
        let mut sizes = vec![0u32; k];
        for (x, &c) in xs.iter().zip(&assignment) {
            sizes[c] += 1;
            let row = &mut ones[c * dims..(c + 1) * dims];
            for d in x.ones() {
                row[d] += 1;
            }
        }
        for c in 0..k {
            if sizes[c] == 0 {
                centroids[c] = xs[rng.random_range(0..xs.len())].clone();
                report.reseeded += 1;
                continue;
            }
            let row = &ones[c * dims..(c + 1) * dims];
            // bit set when at least half the members have it
            centroids[c] = BinaryDescriptor::from_fn(dims, |d| 2 * row[d] >= sizes[c])?;
        }
    }
    Ok((BinaryCodebook::new(centroids)?, report))
}

/// Histogram of nearest-word counts, l2-normalized.
#[derive(Clone, Debug, PartialEq)]
pub struct BowVector {
    values: Vec<f64>,
    normalized: bool,
}

impl BowVector {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// False only for the all-zero histogram of an empty feature set.
    pub fn is_normalized(&self) -> bool {
        self.normalized
    }
}

pub fn encode_bow(codebook: &BinaryCodebook, data: &FeatureSet) -> Result<BowVector> {
    Error::check_dims(codebook.dims(), data.dims())?;
    let mut values = vec![0.0; codebook.len()];
    for x in data {
        values[codebook.assign(x).0] += 1.0;
    }
    let normalized = l2_normalize_slice(&mut values);
    Ok(BowVector { values, normalized })
}
