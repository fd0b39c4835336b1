use serde::{Deserialize, Serialize};

use super::sparse::{SparseVector, SPARSE_EPS};
use super::ModelError;

/// Tolerance on `Σ b(s) = 1`.
pub const BELIEF_SUM_TOL: f64 = 1e-9;

/// Probability distribution over states, stored sparsely. Zero entries are
/// never stored, so `support()` is exactly the set of positive entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Belief(SparseVector);

impl Belief {
    /// Validates an explicit distribution.
    pub fn new(probs: SparseVector) -> Result<Self, ModelError> {
        if probs.is_empty() {
            return Err(ModelError::InvalidBelief("empty support".into()));
        }
        if let Some(v) = probs
            .values()
            .iter()
            .find(|v| !(**v > 0.0) || !v.is_finite())
        {
            return Err(ModelError::InvalidBelief(format!("non-positive entry {v}")));
        }
        let sum = probs.sum();
        if (sum - 1.0).abs() > BELIEF_SUM_TOL {
            return Err(ModelError::InvalidBelief(format!("entries sum to {sum}")));
        }
        Ok(Self(probs))
    }

    pub fn from_dense(probs: &[f64]) -> Result<Self, ModelError> {
        Self::new(SparseVector::from_dense(probs))
    }

    /// Normalizes a nonnegative mass vector, dropping entries whose
    /// normalized value falls below the sparsity threshold.
    pub fn from_mass(mass: SparseVector) -> Result<Self, ModelError> {
        let total = mass.sum();
        if !(total > 0.0) {
            return Err(ModelError::InvalidBelief("zero total mass".into()));
        }
        let n = mass.len();
        let (mut idx, mut val): (Vec<usize>, Vec<f64>) = mass
            .iter()
            .map(|(i, v)| (i, v / total))
            .filter(|&(_, v)| v >= SPARSE_EPS)
            .unzip();
        let kept: f64 = val.iter().sum();
        if kept != 1.0 {
            for v in &mut val {
                *v /= kept;
            }
        }
        idx.shrink_to_fit();
        Ok(Self(SparseVector::from_sorted(n, idx, val)))
    }

    pub fn corner(num_states: usize, s: usize) -> Self {
        Self(SparseVector::from_sorted(num_states, vec![s], vec![1.0]))
    }

    pub fn uniform(num_states: usize) -> Self {
        let p = 1.0 / num_states as f64;
        Self(SparseVector::from_sorted(
            num_states,
            (0..num_states).collect(),
            vec![p; num_states],
        ))
    }

    pub fn num_states(&self) -> usize {
        self.0.len()
    }

    pub fn support(&self) -> &[usize] {
        self.0.indices()
    }

    pub fn probs(&self) -> &[f64] {
        self.0.values()
    }

    pub fn prob(&self, s: usize) -> f64 {
        self.0.get(s)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.0.iter()
    }

    pub fn as_sparse(&self) -> &SparseVector {
        &self.0
    }

    pub fn to_dense(&self) -> Vec<f64> {
        self.0.to_dense()
    }

    pub fn dot(&self, dense: &[f64]) -> f64 {
        self.0.dot_dense(dense)
    }

    pub fn l1_distance(&self, other: &Belief) -> f64 {
        self.0.l1_distance(&other.0)
    }

    /// Samples a state given a uniform draw `u ∈ [0, 1)`.
    pub fn sample_with(&self, u: f64) -> usize {
        let mut acc = 0.0;
        for (s, p) in self.iter() {
            acc += p;
            if u < acc {
                return s;
            }
        }
        *self.support().last().expect("belief has nonempty support")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_sums() {
        assert!(Belief::from_dense(&[0.5, 0.4]).is_err());
        assert!(Belief::from_dense(&[0.0, 0.0]).is_err());
        assert!(Belief::from_dense(&[0.5, 0.5]).is_ok());
    }

    #[test]
    fn mass_normalization_drops_tiny_entries() {
        let b = Belief::from_mass(SparseVector::from_dense(&[2.0, 1e-13, 2.0])).unwrap();
        assert_eq!(b.support(), &[0, 2]);
        assert!((b.prob(0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn sampling_walks_cumulative_mass() {
        let b = Belief::from_dense(&[0.25, 0.0, 0.75]).unwrap();
        assert_eq!(b.sample_with(0.1), 0);
        assert_eq!(b.sample_with(0.3), 2);
        assert_eq!(b.sample_with(0.999_999), 2);
    }
}
