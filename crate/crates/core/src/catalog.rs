//! Enumeration of the k-dimensional subtensors of a shape.
//!
//! A subtensor is identified by its free dimensions `pi` together with the
//! fixed values (`anchor`) of the remaining dimensions. The catalog lists
//! every subtensor once: `pi` subsets in lexicographic order, and within one
//! subset, anchors in row-major order.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Coord, Shape, SparseTensor};

/// Identity of one k-dimensional subtensor. Both fields are 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SubtensorId {
    /// Free dimensions, sorted ascending.
    pub pi: Vec<usize>,
    /// Values of the fixed dimensions (the complement of `pi`), in
    /// ascending dimension order.
    pub anchor: Vec<usize>,
}

impl fmt::Display for SubtensorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pi: Vec<String> = self.pi.iter().map(|n| n.to_string()).collect();
        let anchor: Vec<String> = self.anchor.iter().map(|n| n.to_string()).collect();
        write!(f, "pi={{{}}}@({})", pi.join(","), anchor.join(","))
    }
}

/// All subtensors sharing one set of free dimensions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct PiGroup {
    /// 0-based free dimensions.
    pub pi: Vec<usize>,
    /// 0-based fixed dimensions.
    pub anchor_dims: Vec<usize>,
    anchor_extents: Vec<usize>,
    anchor_strides: Vec<usize>,
    /// Catalog position of the first subtensor of this group.
    pub start: usize,
    pub len: usize,
}

impl PiGroup {
    /// Position within the group of the subtensor holding `index` (0-based).
    #[inline]
    pub fn local_of(&self, index: &[usize]) -> usize {
        self.anchor_dims
            .iter()
            .zip(&self.anchor_strides)
            .map(|(&dim, &stride)| index[dim] * stride)
            .sum()
    }

    fn anchor_of(&self, mut local: usize) -> Vec<usize> {
        self.anchor_strides
            .iter()
            .map(|&s| {
                let a = local / s;
                local %= s;
                a + 1
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubtensorCatalog {
    shape: Shape,
    k: usize,
    groups: Vec<PiGroup>,
    len: usize,
}

/// Lexicographic k-subsets of `0..n`.
fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current: Vec<usize> = (0..k).collect();
    loop {
        out.push(current.clone());
        // rightmost position that can still advance
        let Some(i) = (0..k).rev().find(|&i| current[i] < n - k + i) else {
            return out;
        };
        current[i] += 1;
        for j in i + 1..k {
            current[j] = current[j - 1] + 1;
        }
    }
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

impl SubtensorCatalog {
    pub fn new(shape: &Shape, k: usize) -> Result<Self> {
        let d = shape.ndim();
        if k == 0 || k >= d {
            return Err(Error::InvalidOrder { k, d });
        }
        let mut groups = Vec::new();
        let mut start = 0;
        for pi in combinations(d, k) {
            let anchor_dims: Vec<usize> = (0..d).filter(|j| !pi.contains(j)).collect();
            let anchor_extents: Vec<usize> = anchor_dims.iter().map(|&j| shape.extent(j)).collect();
            let mut anchor_strides = vec![1usize; anchor_dims.len()];
            for j in (0..anchor_dims.len().saturating_sub(1)).rev() {
                anchor_strides[j] = anchor_strides[j + 1] * anchor_extents[j + 1];
            }
            let len = anchor_extents.iter().product();
            groups.push(PiGroup {
                pi,
                anchor_dims,
                anchor_extents,
                anchor_strides,
                start,
                len,
            });
            start += len;
        }
        Ok(SubtensorCatalog {
            shape: shape.clone(),
            k,
            groups,
            len: start,
        })
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    /// Subtensor order `k`.
    pub fn order(&self) -> usize {
        self.k
    }

    /// Number of subtensors `|𝒜|`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Number of subtensors containing any given coordinate, `C(d, k)`.
    pub fn memberships(&self) -> usize {
        binomial(self.shape.ndim(), self.k)
    }

    pub(crate) fn groups(&self) -> &[PiGroup] {
        &self.groups
    }

    /// The subtensor at catalog position `i` (0-based).
    pub fn get(&self, i: usize) -> Option<SubtensorId> {
        let g = self.groups.iter().find(|g| i >= g.start && i < g.start + g.len)?;
        Some(SubtensorId {
            pi: g.pi.iter().map(|j| j + 1).collect(),
            anchor: g.anchor_of(i - g.start),
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = SubtensorId> + '_ {
        (0..self.len).map(move |i| self.get(i).expect("index within catalog"))
    }

    /// Catalog position of a subtensor id, if it belongs to this catalog.
    pub fn position(&self, sid: &SubtensorId) -> Option<usize> {
        let pi: Vec<usize> = sid.pi.iter().map(|j| j.wrapping_sub(1)).collect();
        let g = self.groups.iter().find(|g| g.pi == pi)?;
        if sid.anchor.len() != g.anchor_dims.len()
            || sid
                .anchor
                .iter()
                .zip(&g.anchor_extents)
                .any(|(&a, &n)| a == 0 || a > n)
        {
            return None;
        }
        let local: usize = sid
            .anchor
            .iter()
            .zip(&g.anchor_strides)
            .map(|(&a, &s)| (a - 1) * s)
            .sum();
        Some(g.start + local)
    }

    /// Catalog positions of the subtensors holding a 0-based index, one per
    /// `pi` group, in catalog order.
    #[inline]
    pub(crate) fn containing_raw<'a>(&'a self, index: &'a [usize]) -> impl Iterator<Item = usize> + 'a {
        self.groups.iter().map(move |g| g.start + g.local_of(index))
    }

    /// Every subtensor containing `alpha`, with its catalog position.
    pub fn subtensors_containing(&self, alpha: &Coord) -> Result<Vec<(usize, SubtensorId)>> {
        self.shape.check(alpha)?;
        let index = alpha.to_zero_based();
        Ok(self
            .containing_raw(&index)
            .map(|i| (i, self.get(i).expect("index within catalog")))
            .collect())
    }

    /// Known coordinates of `t` that lie in subtensor `sid`, row-major.
    pub fn known_coords_of(&self, t: &SparseTensor, sid: &SubtensorId) -> Result<Vec<Coord>> {
        if t.shape() != &self.shape {
            return Err(Error::InvalidShape(format!(
                "tensor shape {} does not match catalog shape {}",
                t.shape(),
                self.shape
            )));
        }
        let target = self.position(sid).ok_or_else(|| {
            Error::InvalidConfig(format!("subtensor {sid} is not in the order-{} catalog", self.k))
        })?;
        let g = self
            .groups
            .iter()
            .find(|g| target >= g.start && target < g.start + g.len)
            .expect("position lies in a group");
        Ok((0..t.nnz())
            .filter(|&p| g.start + g.local_of(t.raw_index(p)) == target)
            .map(|p| Coord::from_zero_based(t.raw_index(p)))
            .collect())
    }
}
