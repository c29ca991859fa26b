//! Subtensor shifting and the canonical shifting algorithm.
//!
//! Shifting subtracts one coefficient per subtensor from every known entry it
//! contains: `out(α) = t(α) − Σ_{i: α ∈ A_i} S_i`. Canonical shifting finds
//! coefficients that leave every non-empty subtensor with a zero known-entry
//! sum, by repeatedly removing each subtensor's mean (alternating projection
//! over the affine zero-sum constraints).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::{PiGroup, SubtensorCatalog};
use crate::error::{Error, Result};
use crate::numeric::{stable_sum, CompensatedSum};
use crate::tensor::{Coord, SparseTensor};

/// Group passes switch to rayon above this many known entries.
const PARALLEL_THRESHOLD: usize = 1 << 16;

/// One coefficient per subtensor of an order-`k` catalog.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftVector {
    pub k: usize,
    pub coefficients: Vec<f64>,
}

impl ShiftVector {
    pub fn zeros(catalog: &SubtensorCatalog) -> Self {
        ShiftVector {
            k: catalog.order(),
            coefficients: vec![0.0; catalog.len()],
        }
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub(crate) fn check_conformant(&self, catalog: &SubtensorCatalog) -> Result<()> {
        if self.k != catalog.order() || self.len() != catalog.len() {
            return Err(Error::ShiftLength {
                expected: catalog.len(),
                actual: self.len(),
            });
        }
        Ok(())
    }

    /// `Σ_{i: α ∈ A_i} S_i` for a 0-based index.
    #[inline]
    pub(crate) fn sum_at_raw(&self, catalog: &SubtensorCatalog, index: &[usize]) -> f64 {
        catalog.containing_raw(index).map(|i| self.coefficients[i]).sum()
    }

    /// `Σ_{i: α ∈ A_i} S_i`.
    pub fn sum_at(&self, catalog: &SubtensorCatalog, alpha: &Coord) -> Result<f64> {
        self.check_conformant(catalog)?;
        catalog.shape().check(alpha)?;
        Ok(self.sum_at_raw(catalog, &alpha.to_zero_based()))
    }

    /// `other − self`, coefficient-wise.
    pub fn difference(&self, other: &ShiftVector) -> Result<ShiftVector> {
        if self.k != other.k || self.len() != other.len() {
            return Err(Error::ShiftLength {
                expected: self.len(),
                actual: other.len(),
            });
        }
        Ok(ShiftVector {
            k: self.k,
            coefficients: other
                .coefficients
                .iter()
                .zip(&self.coefficients)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ShiftDirection {
    /// Subtract the coefficient sum.
    Forward,
    /// Add the coefficient sum back.
    Inverse,
}

/// Shifts every known entry of `t` by the sum of the coefficients of the
/// subtensors that contain it.
pub fn apply_shift(t: &SparseTensor, s: &ShiftVector, direction: ShiftDirection) -> Result<SparseTensor> {
    let catalog = SubtensorCatalog::new(t.shape(), s.k)?;
    apply_shift_with(t, s, direction, &catalog)
}

pub(crate) fn apply_shift_with(
    t: &SparseTensor,
    s: &ShiftVector,
    direction: ShiftDirection,
    catalog: &SubtensorCatalog,
) -> Result<SparseTensor> {
    s.check_conformant(catalog)?;
    let sign = match direction {
        ShiftDirection::Forward => -1.0,
        ShiftDirection::Inverse => 1.0,
    };
    let values = (0..t.nnz())
        .map(|p| t.values()[p] + sign * s.sum_at_raw(catalog, t.raw_index(p)))
        .collect();
    t.with_values(values)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceConfig {
    /// Threshold on the per-sweep sum of squared mean corrections.
    pub epsilon: f64,
    pub max_sweeps: usize,
}

impl ConvergenceConfig {
    pub fn new(epsilon: f64, max_sweeps: usize) -> Result<Self> {
        let cfg = ConvergenceConfig { epsilon, max_sweeps };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "epsilon must be positive and finite, got {}",
                self.epsilon
            )));
        }
        if self.max_sweeps == 0 {
            return Err(Error::InvalidConfig("max_sweeps must be at least 1".into()));
        }
        Ok(())
    }
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        ConvergenceConfig {
            epsilon: 1e-18,
            max_sweeps: 10_000,
        }
    }
}

/// The order in which one sweep visits subtensors.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SweepOrder {
    /// Whole `pi` groups, ordered by their fixed dimensions; subtensors
    /// anchored on dimension 1 come first (for matrices: rows, then columns).
    #[default]
    AnchorMajor,
    /// Catalog order (for matrices: columns, then rows).
    Catalog,
    /// Catalog order reversed.
    ReverseCatalog,
    /// An explicit permutation of catalog positions, visited one at a time.
    Permutation(Vec<usize>),
}

/// Output of canonical shifting.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalResult {
    /// Canonical values on the input's known set.
    pub canonical: SparseTensor,
    /// Coefficients with `canonical = apply_shift(input, shifts, Forward)`.
    pub shifts: ShiftVector,
    pub sweeps_used: usize,
    pub final_sweep_variance: f64,
}

/// Known-entry membership of every subtensor, grouped by `pi`.
struct Incidence {
    groups: Vec<GroupIncidence>,
}

struct GroupIncidence {
    start: usize,
    /// Local subtensor index of each known entry.
    owner: Vec<usize>,
    /// Entry positions bucketed by subtensor.
    members: Vec<usize>,
    bounds: Vec<usize>,
}

impl GroupIncidence {
    fn build(t: &SparseTensor, g: &PiGroup) -> Self {
        let owner: Vec<usize> = (0..t.nnz()).map(|p| g.local_of(t.raw_index(p))).collect();
        let mut bounds = vec![0usize; g.len + 1];
        for &o in &owner {
            bounds[o + 1] += 1;
        }
        for j in 0..g.len {
            bounds[j + 1] += bounds[j];
        }
        let mut fill = bounds.clone();
        let mut members = vec![0usize; owner.len()];
        for (p, &o) in owner.iter().enumerate() {
            members[fill[o]] = p;
            fill[o] += 1;
        }
        GroupIncidence {
            start: g.start,
            owner,
            members,
            bounds,
        }
    }

    fn len(&self) -> usize {
        self.bounds.len() - 1
    }

    #[inline]
    fn entries(&self, local: usize) -> &[usize] {
        &self.members[self.bounds[local]..self.bounds[local + 1]]
    }

    /// Negated mean of the subtensor's current entries; zero when empty.
    #[inline]
    fn correction(&self, local: usize, values: &[f64]) -> f64 {
        let entries = self.entries(local);
        if entries.is_empty() {
            return 0.0;
        }
        -stable_sum(entries.iter().map(|&p| values[p])) / entries.len() as f64
    }

    /// Centers every subtensor of the group at once. Subtensors of one group
    /// are disjoint, so this equals visiting them one by one in any order.
    fn pass(&self, values: &mut [f64], coefficients: &mut [f64]) -> f64 {
        let parallel = values.len() >= PARALLEL_THRESHOLD;
        let rho: Vec<f64> = if parallel {
            (0..self.len())
                .into_par_iter()
                .map(|j| self.correction(j, values))
                .collect()
        } else {
            (0..self.len()).map(|j| self.correction(j, values)).collect()
        };
        if parallel {
            values
                .par_iter_mut()
                .zip(self.owner.par_iter())
                .for_each(|(v, &o)| *v += rho[o]);
        } else {
            for (v, &o) in values.iter_mut().zip(&self.owner) {
                *v += rho[o];
            }
        }
        let mut variance = 0.0;
        for (j, r) in rho.iter().enumerate() {
            coefficients[self.start + j] -= r;
            variance += r * r;
        }
        variance
    }

    fn visit(&self, local: usize, values: &mut [f64], coefficients: &mut [f64]) -> f64 {
        let rho = self.correction(local, values);
        if rho == 0.0 {
            return 0.0;
        }
        for &p in self.entries(local) {
            values[p] += rho;
        }
        coefficients[self.start + local] -= rho;
        rho * rho
    }
}

impl Incidence {
    fn build(t: &SparseTensor, catalog: &SubtensorCatalog) -> Self {
        Incidence {
            groups: catalog
                .groups()
                .iter()
                .map(|g| GroupIncidence::build(t, g))
                .collect(),
        }
    }

    fn locate(&self, i: usize) -> (usize, usize) {
        let g = self.groups.partition_point(|g| g.start <= i) - 1;
        (g, i - self.groups[g].start)
    }
}

enum Plan {
    Groups(Vec<usize>),
    Subtensors(Vec<usize>),
}

fn plan(order: &SweepOrder, catalog: &SubtensorCatalog) -> Result<Plan> {
    let groups = catalog.groups();
    Ok(match order {
        SweepOrder::AnchorMajor => {
            let mut idx: Vec<usize> = (0..groups.len()).collect();
            idx.sort_by(|&a, &b| groups[a].anchor_dims.cmp(&groups[b].anchor_dims));
            Plan::Groups(idx)
        }
        SweepOrder::Catalog => Plan::Groups((0..groups.len()).collect()),
        SweepOrder::ReverseCatalog => Plan::Groups((0..groups.len()).rev().collect()),
        SweepOrder::Permutation(perm) => {
            let mut seen = vec![false; catalog.len()];
            if perm.len() != catalog.len() {
                return Err(Error::InvalidConfig(format!(
                    "sweep permutation has {} entries, catalog has {}",
                    perm.len(),
                    catalog.len()
                )));
            }
            for &i in perm {
                if i >= catalog.len() || std::mem::replace(&mut seen[i], true) {
                    return Err(Error::InvalidConfig(format!(
                        "sweep order is not a permutation (bad or repeated position {i})"
                    )));
                }
            }
            Plan::Subtensors(perm.clone())
        }
    })
}

/// Canonical shifting with the default sweep order.
pub fn csa(t: &SparseTensor, k: usize, cfg: &ConvergenceConfig) -> Result<CanonicalResult> {
    csa_with_order(t, k, cfg, &SweepOrder::default())
}

pub fn csa_with_order(
    t: &SparseTensor,
    k: usize,
    cfg: &ConvergenceConfig,
    order: &SweepOrder,
) -> Result<CanonicalResult> {
    let catalog = SubtensorCatalog::new(t.shape(), k)?;
    csa_in(t, &catalog, cfg, order)
}

pub(crate) fn csa_in(
    t: &SparseTensor,
    catalog: &SubtensorCatalog,
    cfg: &ConvergenceConfig,
    order: &SweepOrder,
) -> Result<CanonicalResult> {
    cfg.validate()?;
    let plan = plan(order, catalog)?;
    let incidence = Incidence::build(t, catalog);
    let mut values = t.values().to_vec();
    let mut shifts = ShiftVector::zeros(catalog);
    let mut variance = f64::INFINITY;

    for sweep in 1..=cfg.max_sweeps {
        variance = 0.0;
        match &plan {
            Plan::Groups(groups) => {
                for &g in groups {
                    variance += incidence.groups[g].pass(&mut values, &mut shifts.coefficients);
                }
            }
            Plan::Subtensors(perm) => {
                for &i in perm {
                    let (g, local) = incidence.locate(i);
                    variance +=
                        incidence.groups[g].visit(local, &mut values, &mut shifts.coefficients);
                }
            }
        }
        if variance < cfg.epsilon {
            return Ok(CanonicalResult {
                canonical: t.with_values(values)?,
                shifts,
                sweeps_used: sweep,
                final_sweep_variance: variance,
            });
        }
    }
    Err(Error::NotConverged {
        sweeps: cfg.max_sweeps,
        variance,
    })
}

/// Largest `|Σ known| / count` over non-empty subtensors; zero means `t` is
/// in canonical form.
pub fn residual(t: &SparseTensor, k: usize) -> Result<f64> {
    let catalog = SubtensorCatalog::new(t.shape(), k)?;
    let mut sums = vec![CompensatedSum::default(); catalog.len()];
    let mut counts = vec![0usize; catalog.len()];
    for p in 0..t.nnz() {
        for i in catalog.containing_raw(t.raw_index(p)) {
            sums[i].add(t.values()[p]);
            counts[i] += 1;
        }
    }
    Ok(sums
        .iter()
        .zip(&counts)
        .filter(|(_, &c)| c > 0)
        .map(|(s, &c)| s.value().abs() / c as f64)
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Shape;

    fn full_2x2() -> SparseTensor {
        SparseTensor::from_dense(Shape::new(vec![2, 2]).unwrap(), vec![1.0, 2.0, 3.0, 4.0]).unwrap()
    }

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
    fn zero_shift_is_identity() {
        let t = three_known();
        let cat = SubtensorCatalog::new(t.shape(), 1).unwrap();
        let out = apply_shift(&t, &ShiftVector::zeros(&cat), ShiftDirection::Forward).unwrap();
        assert_eq!(out, t);
    }

    #[test]
    fn row_shift_subtracts_from_each_row() {
        // catalog: columns 1,2 then rows 1,2
        let s = ShiftVector {
            k: 1,
            coefficients: vec![0.0, 0.0, 1.0, 1.0],
        };
        let out = apply_shift(&full_2x2(), &s, ShiftDirection::Forward).unwrap();
        assert_eq!(out.values(), &[0.0, 1.0, 2.0, 3.0]);
        let back = apply_shift(&out, &s, ShiftDirection::Inverse).unwrap();
        assert_eq!(back, full_2x2());
    }

    #[test]
    fn non_conformant_shift_is_rejected() {
        let s = ShiftVector {
            k: 1,
            coefficients: vec![0.0; 3],
        };
        assert!(matches!(
            apply_shift(&full_2x2(), &s, ShiftDirection::Forward),
            Err(Error::ShiftLength { expected: 4, actual: 3 })
        ));
    }

    #[test]
    fn full_two_by_two_centers_in_one_sweep() {
        let r = csa(&full_2x2(), 1, &ConvergenceConfig::default()).unwrap();
        assert_eq!(r.canonical.values(), &[0.0, 0.0, 0.0, 0.0]);
        assert!(r.sweeps_used <= 2, "took {} sweeps", r.sweeps_used);
        assert_eq!(r.final_sweep_variance, 0.0);
        // rows remove 1.5 and 3.5, columns then remove -0.5 and +0.5
        assert_eq!(r.shifts.coefficients, vec![-0.5, 0.5, 1.5, 3.5]);
    }

    #[test]
    fn centered_input_is_a_fixed_point() {
        let t = SparseTensor::from_dense(Shape::new(vec![2, 3]).unwrap(), vec![0.0; 6]).unwrap();
        let r = csa(&t, 1, &ConvergenceConfig::default()).unwrap();
        assert_eq!(r.canonical, t);
        assert_eq!(r.sweeps_used, 1);
        assert!(r.shifts.coefficients.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn empty_tensor_converges_immediately() {
        let t = SparseTensor::empty(Shape::new(vec![3, 3]).unwrap());
        let r = csa(&t, 1, &ConvergenceConfig::default()).unwrap();
        assert_eq!(r.sweeps_used, 1);
        assert!(r.shifts.coefficients.iter().all(|&c| c == 0.0));
        assert_eq!(residual(&t, 1).unwrap(), 0.0);
    }

    #[test]
    fn residual_of_uncentered_matrix() {
        // rows: 3/2, 7/2; columns: 4/2, 6/2
        assert_eq!(residual(&full_2x2(), 1).unwrap(), 3.5);
    }

    #[test]
    fn non_convergence_reports_last_variance() {
        let t = three_known();
        let cfg = ConvergenceConfig {
            epsilon: 1e-300,
            max_sweeps: 1,
        };
        match csa(&t, 1, &cfg) {
            Err(Error::NotConverged { sweeps: 1, variance }) => assert!(variance > 0.0),
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn config_validation() {
        assert!(ConvergenceConfig::new(0.0, 10).is_err());
        assert!(ConvergenceConfig::new(f64::NAN, 10).is_err());
        assert!(ConvergenceConfig::new(1e-12, 0).is_err());
        assert!(ConvergenceConfig::new(1e-12, 1).is_ok());
    }

    #[test]
    fn permutation_must_be_complete() {
        let t = full_2x2();
        let cfg = ConvergenceConfig::default();
        let bad = SweepOrder::Permutation(vec![0, 1, 1, 3]);
        assert!(csa_with_order(&t, 1, &cfg, &bad).is_err());
        let short = SweepOrder::Permutation(vec![0, 1, 2]);
        assert!(csa_with_order(&t, 1, &cfg, &short).is_err());
        let ok = SweepOrder::Permutation(vec![3, 0, 2, 1]);
        let r = csa_with_order(&t, 1, &cfg, &ok).unwrap();
        assert!(residual(&r.canonical, 1).unwrap() < 1e-9);
    }
}
