//! Rating datasets, synthetic instances and train/test splits.

mod movielens;
mod split;
mod synthetic;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::SparseTensor;

pub use movielens::{parse_movielens, parse_movielens_reader, Flavor};
pub use split::{split, split_matrix, Split, SplitFlags, SplitSpec};
pub use synthetic::{
    consensus_instance, generate, generate_supported, Model, SyntheticInstance, SyntheticSpec,
};

/// A discrete rating lattice `min, min + step, ..., max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scale {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl Scale {
    pub const ONE_TO_FIVE: Scale = Scale {
        min: 1.0,
        max: 5.0,
        step: 1.0,
    };

    pub fn new(min: f64, max: f64, step: f64) -> Result<Self> {
        if !(min.is_finite() && max.is_finite() && min < max && step > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "invalid rating scale min={min} max={max} step={step}"
            )));
        }
        Ok(Scale { min, max, step })
    }

    pub fn contains(&self, v: f64) -> bool {
        if v < self.min - 1e-9 || v > self.max + 1e-9 {
            return false;
        }
        let steps = (v - self.min) / self.step;
        (steps - steps.round()).abs() < 1e-9
    }

    /// Nearest lattice point, clamped into the scale.
    pub fn snap(&self, v: f64) -> f64 {
        let steps = ((v - self.min) / self.step).round();
        (self.min + steps * self.step).clamp(self.min, self.max)
    }
}

/// A users x items rating matrix with the original ids.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingsDataset {
    pub matrix: SparseTensor,
    /// External id of each dense user index (position `u - 1` for user `u`).
    pub user_ids: Vec<u64>,
    pub item_ids: Vec<u64>,
    pub scale: Scale,
}

impl RatingsDataset {
    /// Wraps a matrix whose ids are already dense (`1..=m`, `1..=n`).
    pub fn from_matrix(matrix: SparseTensor, scale: Scale) -> Result<Self> {
        if matrix.ndim() != 2 {
            return Err(Error::InvalidShape(format!(
                "ratings must form a matrix, got shape {}",
                matrix.shape()
            )));
        }
        if let Some((c, v)) = matrix.iter().find(|&(_, v)| !scale.contains(v)) {
            return Err(Error::Domain(format!("rating {v} at {c} lies outside the scale")));
        }
        let users = (1..=matrix.shape().extent(0) as u64).collect();
        let items = (1..=matrix.shape().extent(1) as u64).collect();
        Ok(RatingsDataset {
            matrix,
            user_ids: users,
            item_ids: items,
            scale,
        })
    }

    pub fn users(&self) -> usize {
        self.user_ids.len()
    }

    pub fn items(&self) -> usize {
        self.item_ids.len()
    }

    pub fn ratings(&self) -> usize {
        self.matrix.nnz()
    }

    /// Dense 1-based index of an external user id.
    pub fn user_index(&self, external: u64) -> Option<usize> {
        self.user_ids.binary_search(&external).ok().map(|i| i + 1)
    }

    pub fn item_index(&self, external: u64) -> Option<usize> {
        self.item_ids.binary_search(&external).ok().map(|i| i + 1)
    }
}
