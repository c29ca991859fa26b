use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::Scale;
use crate::catalog::SubtensorCatalog;
use crate::error::{Error, Result};
use crate::recsys::ConsensusPattern;
use crate::support::check_support;
use crate::tensor::{Coord, Shape, SparseTensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    /// Sum of one offset per subtensor containing the entry.
    Additive,
    /// Product of one positive factor per subtensor containing the entry.
    Multiplicative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub shape: Vec<usize>,
    pub model: Model,
    /// Factors are drawn uniformly from `[low, high]`.
    pub factor_range: (f64, f64),
    /// Gaussian noise; additive for `Additive`, log-normal for `Multiplicative`.
    pub noise_std: f64,
    /// Fraction of grid cells kept as known, in `(0, 1]`.
    pub known_fraction: f64,
    pub discretize: Option<Scale>,
    /// Subtensor order carrying the factors; `None` means `d − 1`.
    pub structure_order: Option<usize>,
}

impl SyntheticSpec {
    pub fn additive(shape: Vec<usize>, known_fraction: f64) -> Self {
        SyntheticSpec {
            shape,
            model: Model::Additive,
            factor_range: (-2.0, 2.0),
            noise_std: 0.0,
            known_fraction,
            discretize: None,
            structure_order: None,
        }
    }

    pub fn multiplicative(shape: Vec<usize>, known_fraction: f64) -> Self {
        SyntheticSpec {
            model: Model::Multiplicative,
            factor_range: (0.5, 2.0),
            ..Self::additive(shape, known_fraction)
        }
    }

    pub fn validate(&self) -> Result<Shape> {
        let shape = Shape::new(self.shape.clone())?;
        if !(self.known_fraction > 0.0 && self.known_fraction <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "known fraction must lie in (0, 1], got {}",
                self.known_fraction
            )));
        }
        let (lo, hi) = self.factor_range;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::InvalidConfig(format!("bad factor range {lo}..{hi}")));
        }
        if self.model == Model::Multiplicative && lo <= 0.0 {
            return Err(Error::InvalidConfig("multiplicative factors must be positive".into()));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::InvalidConfig(format!("bad noise level {}", self.noise_std)));
        }
        Ok(shape)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticInstance {
    /// The masked tensor handed to completion.
    pub observed: SparseTensor,
    /// Every grid cell, before masking.
    pub truth: SparseTensor,
}

/// Draws an instance; the same spec and seed always give the same tensors.
pub fn generate(spec: &SyntheticSpec, seed: u64) -> Result<SyntheticInstance> {
    let shape = spec.validate()?;
    let k = spec.structure_order.unwrap_or(shape.ndim().saturating_sub(1));
    let catalog = SubtensorCatalog::new(&shape, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = spec.factor_range;
    let factors: Vec<f64> = (0..catalog.len()).map(|_| rng.gen_range(lo..=hi)).collect();
    let noise = Normal::new(0.0, spec.noise_std).map_err(|e| Error::InvalidConfig(e.to_string()))?;

    let mut index = vec![0usize; shape.ndim()];
    let values: Vec<f64> = (0..shape.cells())
        .map(|off| {
            shape.unravel(off, &mut index);
            let members = catalog.containing_raw(&index);
            let clean = match spec.model {
                Model::Additive => members.map(|i| factors[i]).sum::<f64>(),
                Model::Multiplicative => members.map(|i| factors[i]).product::<f64>(),
            };
            let eps = if spec.noise_std > 0.0 { noise.sample(&mut rng) } else { 0.0 };
            let noisy = match spec.model {
                Model::Additive => clean + eps,
                Model::Multiplicative => clean * eps.exp(),
            };
            match spec.discretize {
                Some(scale) => scale.snap(noisy),
                None => noisy,
            }
        })
        .collect();
    let truth = SparseTensor::from_dense(shape.clone(), values.clone())?;

    let keep = ((spec.known_fraction * shape.cells() as f64).round() as usize).clamp(1, shape.cells());
    let mut offsets: Vec<usize> = (0..shape.cells()).collect();
    offsets.shuffle(&mut rng);
    offsets.truncate(keep);
    let observed = SparseTensor::from_offsets(shape, offsets.into_iter().map(|o| (o, values[o])).collect())?;
    Ok(SyntheticInstance { observed, truth })
}

/// Like [`generate`], redrawing with derived seeds until the observed
/// tensor is fully supported. Returns the seed that succeeded.
pub fn generate_supported(spec: &SyntheticSpec, seed: u64, attempts: usize) -> Result<(SyntheticInstance, u64)> {
    for attempt in 0..attempts as u64 {
        let s = seed.wrapping_add(attempt.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let inst = generate(spec, s)?;
        if check_support(&inst.observed).fully_supported {
            return Ok((inst, s));
        }
    }
    Err(Error::InvalidConfig(format!(
        "no fully supported instance in {attempts} attempts; raise the known fraction"
    )))
}

/// A random tensor containing a valid consensus pattern of `slices` slices
/// along `axis` (1-based). Pattern slices share a common known set on which
/// they are strictly increasing in pattern order, with gaps of at least 0.25.
pub fn consensus_instance(
    shape: &[usize],
    axis: usize,
    slices: usize,
    seed: u64,
) -> Result<(SparseTensor, ConsensusPattern)> {
    let shape = Shape::new(shape.to_vec())?;
    let d = shape.ndim();
    if axis < 1 || axis > d || d < 2 {
        return Err(Error::InvalidConfig(format!("axis {axis} invalid for shape {shape}")));
    }
    let extent = shape.extent(axis - 1);
    if slices < 2 || slices > extent {
        return Err(Error::InvalidConfig(format!(
            "need 2..={extent} pattern slices, got {slices}"
        )));
    }
    let mut rest_extents = shape.extents().to_vec();
    rest_extents.remove(axis - 1);
    let rest = Shape::new(rest_extents)?;
    if rest.cells() < 2 {
        return Err(Error::InvalidConfig("slices need at least two cells".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gamma: Vec<usize> = (1..=extent).collect();
    gamma.shuffle(&mut rng);
    gamma.truncate(slices);

    // common known set: a random proper, nonempty subset of the slice grid
    let mut cells: Vec<usize> = (0..rest.cells()).collect();
    cells.shuffle(&mut rng);
    let n_known = rng.gen_range(1..rest.cells());
    let mut common: Vec<usize> = cells[..n_known].to_vec();
    common.sort_unstable();

    let mut entries: Vec<(Coord, f64)> = Vec::new();
    let mut idx = vec![0usize; rest.ndim()];
    let place = |idx: &[usize], slice: usize| {
        let mut c: Vec<usize> = idx.iter().map(|a| a + 1).collect();
        c.insert(axis - 1, slice);
        Coord(c)
    };
    for &cell in &common {
        rest.unravel(cell, &mut idx);
        let mut v = rng.gen_range(0.0..3.0);
        for &g in &gamma {
            entries.push((place(&idx, g), v));
            v += rng.gen_range(0.25..1.5);
        }
    }
    for slice in (1..=extent).filter(|s| !gamma.contains(s)) {
        for cell in 0..rest.cells() {
            if rng.gen_bool(0.6) {
                rest.unravel(cell, &mut idx);
                entries.push((place(&idx, slice), rng.gen_range(0.0..5.0)));
            }
        }
    }
    let t = SparseTensor::from_entries(shape, entries)?;
    let pattern = ConsensusPattern::new(&t, axis, gamma)?;
    Ok((t, pattern))
}
