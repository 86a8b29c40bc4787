//! Random projection from raw observations to state keys.
//!
//! Entries are i.i.d. standard normal and are not rescaled, so embedded
//! distances are roughly `sqrt(out_dim)` times the original ones. Nearest
//! neighbour order does not depend on that scale, but the input threshold of
//! the store is measured in embedded units.

use crate::error::{Error, Result};
use crate::rng::{self, Stream};

/// Embedded state. All values are finite.
#[derive(Clone, Debug, PartialEq)]
pub struct StateKey(Vec<f64>);

impl StateKey {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::input(format!(
                "state key component {i} is not finite"
            )));
        }
        Ok(StateKey(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Bitwise equality; `0.0` and `-0.0` are different keys.
    pub fn bitwise_eq(&self, other: &[f64]) -> bool {
        self.0.len() == other.len()
            && self
                .0
                .iter()
                .zip(other)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl AsRef<[f64]> for StateKey {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionMatrix {
    rows: usize,
    cols: usize,
    weights: Vec<f64>,
    seed: u64,
}

impl ProjectionMatrix {
    /// Builds a `out_dim x in_dim` matrix from the projection stream of `seed`.
    ///
    /// Weights are filled row-major from consecutive Box-Muller pairs; when the
    /// entry count is odd the last sine sample is dropped.
    pub fn new(seed: u64, in_dim: usize, out_dim: usize) -> Result<Self> {
        if in_dim == 0 {
            return Err(Error::config("in_dim", "must be at least 1"));
        }
        if out_dim == 0 {
            return Err(Error::config("proj-dim", "must be at least 1"));
        }
        let len = in_dim
            .checked_mul(out_dim)
            .ok_or_else(|| Error::config("proj-dim", "matrix size overflows"))?;
        let mut rng = rng::seeded(seed, Stream::Projection);
        let mut weights = Vec::with_capacity(len + 1);
        while weights.len() < len {
            let (a, b) = rng::standard_normal_pair(&mut rng);
            weights.push(a);
            weights.push(b);
        }
        weights.truncate(len);
        Ok(ProjectionMatrix {
            rows: out_dim,
            cols: in_dim,
            weights,
            seed,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.weights[row * self.cols + col]
    }

    /// Matrix-vector product `W * observation`.
    pub fn embed(&self, observation: &[f64]) -> Result<StateKey> {
        if observation.len() != self.cols {
            return Err(Error::input(format!(
                "observation has length {}, projection expects {}",
                observation.len(),
                self.cols
            )));
        }
        let values = self
            .weights
            .chunks_exact(self.cols)
            .map(|row| row.iter().zip(observation).map(|(w, o)| w * o).sum())
            .collect();
        StateKey::new(values)
    }
}
