//! Shift-consistent completion.
//!
//! After canonical shifting, every unknown entry is imputed as the sum of the
//! shift coefficients of the subtensors containing it, i.e. the value the
//! canonical tensor's implicit zero takes once the shifts are undone.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::catalog::SubtensorCatalog;
use crate::error::{Error, Result};
use crate::shift::{
    apply_shift_with, csa_in, residual, ConvergenceConfig, ShiftDirection, ShiftVector, SweepOrder,
};
use crate::support::{check_support, SupportReport};
use crate::tensor::{Coord, Shape, SparseTensor};

/// Which consistency the completion honours.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Shift consistency: imputations in the data's own additive frame.
    Sc,
    /// Unit consistency, realised by completing `log t` and exponentiating.
    Uc,
}

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Method::Sc => "SC",
            Method::Uc => "UC (log-bridge)",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Sc => "sc",
            Method::Uc => "uc",
        })
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sc" => Ok(Method::Sc),
            "uc" => Ok(Method::Uc),
            other => Err(Error::InvalidConfig(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompletionDiagnostics {
    pub sweeps_used: usize,
    pub final_sweep_variance: f64,
    /// Canonical-form residual of the working tensor after shifting.
    pub residual: f64,
}

/// A completed tensor, evaluated lazily from the shift coefficients.
#[derive(Debug, Clone)]
pub struct CompletionResult {
    method: Method,
    source: SparseTensor,
    canonical: SparseTensor,
    catalog: SubtensorCatalog,
    pub shifts: ShiftVector,
    pub diagnostics: CompletionDiagnostics,
    /// Present once [`CompletionResult::certify`] has run.
    pub support: Option<SupportReport>,
}

impl CompletionResult {
    pub fn method(&self) -> Method {
        self.method
    }

    /// The input, unchanged.
    pub fn source(&self) -> &SparseTensor {
        &self.source
    }

    /// Canonical values (in the working domain: logs for UC) on the known set.
    pub fn canonical(&self) -> &SparseTensor {
        &self.canonical
    }

    pub fn catalog(&self) -> &SubtensorCatalog {
        &self.catalog
    }

    pub fn shape(&self) -> &Shape {
        self.source.shape()
    }

    /// Completed value at `alpha`: the input value if known, otherwise the
    /// imputation.
    pub fn value(&self, alpha: &Coord) -> Result<f64> {
        self.shape().check(alpha)?;
        Ok(self.value_raw(&alpha.to_zero_based()))
    }

    /// Imputation formula at `alpha`, whether or not `alpha` is known.
    pub fn imputation(&self, alpha: &Coord) -> Result<f64> {
        self.shape().check(alpha)?;
        Ok(self.imputation_raw(&alpha.to_zero_based()))
    }

    #[inline]
    pub(crate) fn value_raw(&self, index: &[usize]) -> f64 {
        match self.source.position_of(index) {
            Some(p) => self.source.values()[p],
            None => self.imputation_raw(index),
        }
    }

    #[inline]
    pub(crate) fn imputation_raw(&self, index: &[usize]) -> f64 {
        let sum = self.shifts.sum_at_raw(&self.catalog, index);
        match self.method {
            Method::Sc => sum,
            Method::Uc => sum.exp(),
        }
    }

    /// Imputed coordinates, i.e. the input's unknown set.
    pub fn imputed_coords(&self) -> impl Iterator<Item = Coord> + '_ {
        self.source.unknown_coords()
    }

    /// Materialises the completion over the full grid.
    pub fn completed(&self) -> SparseTensor {
        let shape = self.shape().clone();
        let mut index = vec![0usize; shape.ndim()];
        let values = (0..shape.cells())
            .map(|off| {
                shape.unravel(off, &mut index);
                self.value_raw(&index)
            })
            .collect();
        SparseTensor::from_dense(shape, values).expect("grid-sized value vector")
    }

    /// Runs the full-support check and stores the report.
    pub fn certify(&mut self) -> &SupportReport {
        self.support.get_or_insert_with(|| check_support(&self.source))
    }
}

pub(crate) fn complete_in(
    source: &SparseTensor,
    working: &SparseTensor,
    method: Method,
    catalog: &SubtensorCatalog,
    cfg: &ConvergenceConfig,
    order: &SweepOrder,
) -> Result<CompletionResult> {
    let canonical = csa_in(working, catalog, cfg, order)?;
    let residual = residual(&canonical.canonical, catalog.order())?;
    Ok(CompletionResult {
        method,
        source: source.clone(),
        canonical: canonical.canonical,
        catalog: catalog.clone(),
        shifts: canonical.shifts,
        diagnostics: CompletionDiagnostics {
            sweeps_used: canonical.sweeps_used,
            final_sweep_variance: canonical.final_sweep_variance,
            residual,
        },
        support: None,
    })
}

/// Shift-consistent completion of `t` over its order-`k` subtensors.
pub fn scca(t: &SparseTensor, k: usize, cfg: &ConvergenceConfig) -> Result<CompletionResult> {
    scca_with_order(t, k, cfg, &SweepOrder::default())
}

pub fn scca_with_order(
    t: &SparseTensor,
    k: usize,
    cfg: &ConvergenceConfig,
    order: &SweepOrder,
) -> Result<CompletionResult> {
    let catalog = SubtensorCatalog::new(t.shape(), k)?;
    complete_in(t, t, Method::Sc, &catalog, cfg, order)
}

/// Matrix completion: rows and columns shifted independently.
pub fn mca(t: &SparseTensor, cfg: &ConvergenceConfig) -> Result<CompletionResult> {
    if t.ndim() != 2 {
        return Err(Error::InvalidShape(format!(
            "matrix completion needs a 2-dimensional tensor, got shape {}",
            t.shape()
        )));
    }
    scca(t, 1, cfg)
}

/// Uniform random coefficients in `[-scale, scale]`.
pub fn random_shift(catalog: &SubtensorCatalog, scale: f64, rng: &mut impl Rng) -> ShiftVector {
    ShiftVector {
        k: catalog.order(),
        coefficients: (0..catalog.len()).map(|_| rng.gen_range(-scale..=scale)).collect(),
    }
}

/// Largest `|T ⊖ SCCA(t) − SCCA(T ⊖ t)|` over the grid, for the given shifts.
pub fn shift_consistency_deviation(
    t: &SparseTensor,
    k: usize,
    cfg: &ConvergenceConfig,
    trial_shifts: &[ShiftVector],
) -> Result<f64> {
    let base = scca(t, k, cfg)?;
    let catalog = base.catalog().clone();
    let shape = t.shape().clone();
    let mut index = vec![0usize; shape.ndim()];
    let mut worst = 0.0f64;
    for shift in trial_shifts {
        let shifted = apply_shift_with(t, shift, ShiftDirection::Forward, &catalog)?;
        let completed_shifted = complete_in(&shifted, &shifted, Method::Sc, &catalog, cfg, &SweepOrder::default())?;
        for off in 0..shape.cells() {
            shape.unravel(off, &mut index);
            let lhs = base.value_raw(&index) - shift.sum_at_raw(&catalog, &index);
            let rhs = completed_shifted.value_raw(&index);
            worst = worst.max((lhs - rhs).abs());
        }
    }
    Ok(worst)
}

/// Shift consistency over `trials` random shift vectors.
pub fn verify_shift_consistency(
    t: &SparseTensor,
    k: usize,
    cfg: &ConvergenceConfig,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    let catalog = SubtensorCatalog::new(t.shape(), k)?;
    let scale = t.values().iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shifts: Vec<ShiftVector> = (0..trials)
        .map(|_| random_shift(&catalog, scale, &mut rng))
        .collect();
    shift_consistency_deviation(t, k, cfg, &shifts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniquenessReport {
    pub orders: usize,
    /// Largest pairwise difference between completed tensors.
    pub max_deviation: f64,
    /// Largest pairwise difference between canonical tensors.
    pub max_canonical_deviation: f64,
    /// Largest `|Σ_{i: α ∈ A_i} (S' − S)_i|` over known `α`.
    pub max_null_shift_residual: f64,
    /// Whether full support holds, so that uniqueness is guaranteed.
    pub guaranteed: bool,
    pub unsupported: usize,
}

/// `n` random sweep permutations of an order-`k` catalog.
pub fn random_orders(shape: &Shape, k: usize, n: usize, seed: u64) -> Result<Vec<SweepOrder>> {
    let len = SubtensorCatalog::new(shape, k)?.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|_| {
            let mut perm: Vec<usize> = (0..len).collect();
            perm.shuffle(&mut rng);
            SweepOrder::Permutation(perm)
        })
        .collect())
}

/// Runs completion under each sweep order and measures how far the results
/// disagree.
pub fn verify_uniqueness(
    t: &SparseTensor,
    k: usize,
    cfg: &ConvergenceConfig,
    orders: &[SweepOrder],
) -> Result<UniquenessReport> {
    if orders.len() < 2 {
        return Err(Error::InvalidConfig(
            "uniqueness check needs at least two sweep orders".into(),
        ));
    }
    let catalog = SubtensorCatalog::new(t.shape(), k)?;
    let runs = orders
        .iter()
        .map(|o| complete_in(t, t, Method::Sc, &catalog, cfg, o))
        .collect::<Result<Vec<_>>>()?;

    let shape = t.shape().clone();
    let mut index = vec![0usize; shape.ndim()];
    let mut max_deviation = 0.0f64;
    let mut max_canonical = 0.0f64;
    let mut max_null = 0.0f64;
    for (a, first) in runs.iter().enumerate() {
        for second in &runs[a + 1..] {
            for off in 0..shape.cells() {
                shape.unravel(off, &mut index);
                let dev = (first.value_raw(&index) - second.value_raw(&index)).abs();
                max_deviation = max_deviation.max(dev);
            }
            for (x, y) in first.canonical.values().iter().zip(second.canonical.values()) {
                max_canonical = max_canonical.max((x - y).abs());
            }
            let null = first.shifts.difference(&second.shifts)?;
            for p in 0..t.nnz() {
                let s = null.sum_at_raw(&catalog, t.raw_index(p));
                max_null = max_null.max(s.abs());
            }
        }
    }
    let support = check_support(t);
    Ok(UniquenessReport {
        orders: orders.len(),
        max_deviation,
        max_canonical_deviation: max_canonical,
        max_null_shift_residual: max_null,
        guaranteed: support.fully_supported,
        unsupported: support.unsupported.len() + support.inconclusive.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three_known() -> SparseTensor {
        SparseTensor::from_entries(
            Shape::new(vec![2, 2]).unwrap(),
            vec![
                (Coord::from([1, 2]), 2.0),
                (Coord::from([2, 1]), 3.0),
                (Coord::from([2, 2]), 4.0),
            ],
        )
        .unwrap()
    }

    #[test]
    fn two_by_two_imputes_additive_completion() {
        let r = scca(&three_known(), 1, &ConvergenceConfig::default()).unwrap();
        // r1 + c1 = (r1 + c2) + (r2 + c1) - (r2 + c2) = 2 + 3 - 4
        assert!((r.value(&Coord::from([1, 1])).unwrap() - 1.0).abs() < 1e-9);
        assert_eq!(r.value(&Coord::from([2, 2])).unwrap(), 4.0);
        assert!(r.diagnostics.residual < 1e-9);
    }

    #[test]
    fn fully_known_passes_through() {
        let t = SparseTensor::from_dense(Shape::new(vec![2, 3]).unwrap(), vec![1.5, -2.0, 3.25, 0.0, 7.0, 1e-3])
            .unwrap();
        let r = scca(&t, 1, &ConvergenceConfig::default()).unwrap();
        assert_eq!(r.completed(), t);
    }

    #[test]
    fn three_by_three_additive_corner() {
        let rows = [0.0, 1.0, 2.0];
        let cols = [0.0, 10.0, 20.0];
        let entries = (0..3)
            .flat_map(|i| (0..3).map(move |j| (i, j)))
            .filter(|&(i, j)| (i, j) != (2, 2))
            .map(|(i, j)| (Coord::from([i + 1, j + 1]), rows[i] + cols[j]));
        let t = SparseTensor::from_entries(Shape::new(vec![3, 3]).unwrap(), entries).unwrap();
        let r = mca(&t, &ConvergenceConfig::default()).unwrap();
        assert!((r.value(&Coord::from([3, 3])).unwrap() - 22.0).abs() < 1e-10);
    }

    #[test]
    fn single_row_imputes_row_mean() {
        let t = SparseTensor::from_entries(
            Shape::new(vec![1, 3]).unwrap(),
            vec![(Coord::from([1, 1]), 2.0), (Coord::from([1, 2]), 4.0)],
        )
        .unwrap();
        let r = mca(&t, &ConvergenceConfig::default()).unwrap();
        assert!((r.value(&Coord::from([1, 3])).unwrap() - 3.0).abs() < 1e-9);
    }

    #[test]
    fn mca_requires_a_matrix() {
        let t = SparseTensor::empty(Shape::new(vec![2, 2, 2]).unwrap());
        assert!(matches!(mca(&t, &ConvergenceConfig::default()), Err(Error::InvalidShape(_))));
    }

    #[test]
    fn zero_shift_gives_zero_deviation() {
        let t = three_known();
        let cat = SubtensorCatalog::new(t.shape(), 1).unwrap();
        let dev = shift_consistency_deviation(&t, 1, &ConvergenceConfig::default(), &[ShiftVector::zeros(&cat)])
            .unwrap();
        assert_eq!(dev, 0.0);
    }

    #[test]
    fn uniqueness_flags_missing_support() {
        let entries = (1..=2).flat_map(|i| (1..=3).map(move |j| (Coord::from([i, j]), (i * j) as f64)));
        let t = SparseTensor::from_entries(Shape::new(vec![3, 3]).unwrap(), entries).unwrap();
        let report = verify_uniqueness(
            &t,
            1,
            &ConvergenceConfig::default(),
            &[SweepOrder::Catalog, SweepOrder::ReverseCatalog],
        )
        .unwrap();
        assert!(!report.guaranteed);
        assert_eq!(report.unsupported, 3);
        assert!(verify_uniqueness(&t, 1, &ConvergenceConfig::default(), &[SweepOrder::Catalog]).is_err());
    }

    #[test]
    fn certify_attaches_report() {
        let mut r = scca(&three_known(), 1, &ConvergenceConfig::default()).unwrap();
        assert!(r.support.is_none());
        assert!(r.certify().fully_supported);
        assert!(r.support.is_some());
    }
}
