use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::RatingsDataset;
use crate::error::{Error, Result};
use crate::tensor::{Coord, Shape, SparseTensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub test_fraction: f64,
    /// Fractions of the training set to keep, each in `(0, 1]`.
    pub fractions: Vec<f64>,
    pub seed: u64,
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "test fraction must lie in (0, 1), got {}",
                self.test_fraction
            )));
        }
        if let Some(f) = self.fractions.iter().find(|&&f| !(f > 0.0 && f <= 1.0)) {
            return Err(Error::InvalidConfig(format!("sweep fraction {f} outside (0, 1]")));
        }
        Ok(())
    }
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            test_fraction: 0.2,
            fractions: (1..=10).map(|i| i as f64 / 10.0).collect(),
            seed: 0,
        }
    }
}

/// A fixed held-out test set plus a training pool in random order, so that
/// every sweep point's training set is a prefix of the next.
#[derive(Debug, Clone)]
pub struct Split {
    shape: Shape,
    test: Vec<(Coord, f64)>,
    pool: Vec<(usize, f64)>,
}

/// Rows or columns left without any training rating.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitFlags {
    pub cold_users: usize,
    pub cold_items: usize,
    /// Test entries whose user or item is cold.
    pub cold_test_entries: usize,
}

impl SplitFlags {
    pub fn degenerate(&self) -> bool {
        self.cold_users > 0 || self.cold_items > 0
    }
}

/// Holds out `floor(test_fraction * ratings)` entries uniformly at random.
pub fn split(ds: &RatingsDataset, spec: &SplitSpec) -> Result<Split> {
    split_matrix(&ds.matrix, spec)
}

/// [`split`] for a bare users x items matrix.
pub fn split_matrix(t: &SparseTensor, spec: &SplitSpec) -> Result<Split> {
    spec.validate()?;
    if t.ndim() != 2 {
        return Err(Error::InvalidShape(format!(
            "train/test splits need a users x items matrix, got shape {}",
            t.shape()
        )));
    }
    let mut entries: Vec<(usize, f64)> = t.raw_offsets().iter().copied().zip(t.values().iter().copied()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    entries.shuffle(&mut rng);
    let n_test = (spec.test_fraction * entries.len() as f64).floor() as usize;
    let pool = entries.split_off(n_test);
    let cols = t.shape().extent(1);
    let test = entries
        .into_iter()
        .map(|(off, v)| (Coord::new(vec![off / cols + 1, off % cols + 1]), v))
        .collect();
    Ok(Split {
        shape: t.shape().clone(),
        test,
        pool,
    })
}

impl Split {
    pub fn test(&self) -> &[(Coord, f64)] {
        &self.test
    }

    pub fn train_size(&self, fraction: f64) -> usize {
        (fraction * self.pool.len() as f64).floor() as usize
    }

    /// Training tensor holding the first `floor(fraction * pool)` entries.
    pub fn train_at(&self, fraction: f64) -> Result<SparseTensor> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::InvalidConfig(format!("sweep fraction {fraction} outside (0, 1]")));
        }
        let n = self.train_size(fraction);
        SparseTensor::from_offsets(self.shape.clone(), self.pool[..n].to_vec())
    }

    pub fn flags(&self, train: &SparseTensor) -> SplitFlags {
        let (m, n) = (self.shape.extent(0), self.shape.extent(1));
        let mut user_seen = vec![false; m];
        let mut item_seen = vec![false; n];
        for &off in train.raw_offsets() {
            user_seen[off / n] = true;
            item_seen[off % n] = true;
        }
        let cold_test_entries = self
            .test
            .iter()
            .filter(|(c, _)| !user_seen[c.0[0] - 1] || !item_seen[c.0[1] - 1])
            .count();
        SplitFlags {
            cold_users: user_seen.iter().filter(|s| !**s).count(),
            cold_items: item_seen.iter().filter(|s| !**s).count(),
            cold_test_entries,
        }
    }
}
