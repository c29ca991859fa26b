//! Sparse d-dimensional tensors with an explicit known-entry set.
//!
//! Coordinates are 1-based at every public boundary. Internally entries are
//! kept sorted by their row-major linear offset, with 0-based indices.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dimensional extents `(n_1, ..., n_d)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Shape {
    extents: Vec<usize>,
    strides: Vec<usize>,
    cells: usize,
}

impl Shape {
    pub fn new(extents: Vec<usize>) -> Result<Self> {
        if extents.is_empty() {
            return Err(Error::InvalidShape("a shape needs at least one dimension".into()));
        }
        if let Some(pos) = extents.iter().position(|&n| n == 0) {
            return Err(Error::InvalidShape(format!(
                "extent of dimension {} is zero",
                pos + 1
            )));
        }
        let mut cells = 1usize;
        for &n in &extents {
            cells = cells.checked_mul(n).ok_or_else(|| {
                Error::InvalidShape(format!("grid {extents:?} overflows the index space"))
            })?;
        }
        let mut strides = vec![1usize; extents.len()];
        for j in (0..extents.len().saturating_sub(1)).rev() {
            strides[j] = strides[j + 1] * extents[j + 1];
        }
        Ok(Shape {
            extents,
            strides,
            cells,
        })
    }

    pub fn extents(&self) -> &[usize] {
        &self.extents
    }

    /// Number of dimensions `d`.
    pub fn ndim(&self) -> usize {
        self.extents.len()
    }

    pub fn extent(&self, dim: usize) -> usize {
        self.extents[dim]
    }

    /// Total number of grid cells `n_1 * ... * n_d`.
    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn contains(&self, coord: &Coord) -> bool {
        coord.0.len() == self.ndim()
            && coord
                .0
                .iter()
                .zip(&self.extents)
                .all(|(&a, &n)| a >= 1 && a <= n)
    }

    pub(crate) fn check(&self, coord: &Coord) -> Result<()> {
        if self.contains(coord) {
            Ok(())
        } else {
            Err(Error::OutOfBounds {
                coord: coord.0.clone(),
                shape: self.extents.clone(),
            })
        }
    }

    /// Row-major offset of a 0-based index.
    #[inline]
    pub(crate) fn offset(&self, index: &[usize]) -> usize {
        index.iter().zip(&self.strides).map(|(a, s)| a * s).sum()
    }

    /// Inverse of [`Shape::offset`], written into `out`.
    #[inline]
    pub(crate) fn unravel(&self, mut offset: usize, out: &mut [usize]) {
        for (o, &s) in out.iter_mut().zip(&self.strides) {
            *o = offset / s;
            offset %= s;
        }
    }
}

impl TryFrom<Vec<usize>> for Shape {
    type Error = Error;

    fn try_from(extents: Vec<usize>) -> Result<Self> {
        Shape::new(extents)
    }
}

impl From<Shape> for Vec<usize> {
    fn from(shape: Shape) -> Self {
        shape.extents
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.extents.iter().map(|n| n.to_string()).collect();
        write!(f, "{}", parts.join("x"))
    }
}

/// A 1-based tensor coordinate.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Coord(pub Vec<usize>);

impl Coord {
    pub fn new(indices: impl Into<Vec<usize>>) -> Self {
        Coord(indices.into())
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub(crate) fn from_zero_based(index: &[usize]) -> Self {
        Coord(index.iter().map(|a| a + 1).collect())
    }

    pub(crate) fn to_zero_based(&self) -> Vec<usize> {
        self.0.iter().map(|a| a - 1).collect()
    }
}

impl From<Vec<usize>> for Coord {
    fn from(v: Vec<usize>) -> Self {
        Coord(v)
    }
}

impl<const N: usize> From<[usize; N]> for Coord {
    fn from(v: [usize; N]) -> Self {
        Coord(v.to_vec())
    }
}

impl fmt::Display for Coord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|n| n.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// Sparse tensor holding values only for its known coordinates.
///
/// Zero is an ordinary known value here; absence is expressed by the
/// coordinate not being stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseTensor {
    shape: Shape,
    /// Row-major offsets of known entries, strictly increasing.
    offsets: Vec<usize>,
    /// 0-based indices, `ndim` per entry, in the same order as `offsets`.
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseTensor {
    /// Tensor with no known entries.
    pub fn empty(shape: Shape) -> Self {
        SparseTensor {
            shape,
            offsets: Vec::new(),
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Builds a tensor from 1-based `(coordinate, value)` pairs in any order.
    pub fn from_entries<I>(shape: Shape, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Coord, f64)>,
    {
        let mut raw = Vec::new();
        for (coord, value) in entries {
            shape.check(&coord)?;
            if !value.is_finite() {
                return Err(Error::NonFinite {
                    coord: coord.0,
                    value,
                });
            }
            raw.push((shape.offset(&coord.to_zero_based()), value));
        }
        Self::from_offsets(shape, raw)
    }

    /// Builds a tensor from row-major offsets (0-based).
    pub(crate) fn from_offsets(shape: Shape, mut raw: Vec<(usize, f64)>) -> Result<Self> {
        raw.sort_unstable_by_key(|&(off, _)| off);
        let d = shape.ndim();
        let mut offsets = Vec::with_capacity(raw.len());
        let mut values = Vec::with_capacity(raw.len());
        let mut indices = vec![0usize; raw.len() * d];
        for (pos, &(off, value)) in raw.iter().enumerate() {
            if offsets.last() == Some(&off) {
                let mut idx = vec![0; d];
                shape.unravel(off, &mut idx);
                return Err(Error::DuplicateCoord(Coord::from_zero_based(&idx).0));
            }
            shape.unravel(off, &mut indices[pos * d..(pos + 1) * d]);
            offsets.push(off);
            values.push(value);
        }
        Ok(SparseTensor {
            shape,
            offsets,
            indices,
            values,
        })
    }

    /// Builds a tensor with every grid cell known, values in row-major order.
    pub fn from_dense(shape: Shape, values: Vec<f64>) -> Result<Self> {
        if values.len() != shape.cells() {
            return Err(Error::InvalidShape(format!(
                "{} values supplied for a grid of {} cells",
                values.len(),
                shape.cells()
            )));
        }
        let raw = values.into_iter().enumerate().collect();
        Self::from_offsets(shape, raw)
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn ndim(&self) -> usize {
        self.shape.ndim()
    }

    /// Number of known entries `|σ(A)|`.
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Number of unknown entries `|σ̄(A)|`.
    pub fn unknown_count(&self) -> usize {
        self.shape.cells() - self.nnz()
    }

    /// Fraction of the grid that is unknown.
    pub fn sparsity(&self) -> f64 {
        self.unknown_count() as f64 / self.shape.cells() as f64
    }

    pub fn is_fully_known(&self) -> bool {
        self.nnz() == self.shape.cells()
    }

    /// Known values in canonical (row-major) order.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, coord: &Coord) -> Option<f64> {
        if !self.shape.contains(coord) {
            return None;
        }
        self.position_of_offset(self.shape.offset(&coord.to_zero_based()))
            .map(|p| self.values[p])
    }

    pub fn contains(&self, coord: &Coord) -> bool {
        self.get(coord).is_some()
    }

    /// Known entries as `(1-based coordinate, value)`, row-major.
    pub fn iter(&self) -> impl Iterator<Item = (Coord, f64)> + '_ {
        (0..self.nnz()).map(move |p| (Coord::from_zero_based(self.raw_index(p)), self.values[p]))
    }

    /// Coordinates of unknown entries, row-major.
    pub fn unknown_coords(&self) -> impl Iterator<Item = Coord> + '_ {
        let d = self.ndim();
        self.unknown_offsets().map(move |off| {
            let mut idx = vec![0; d];
            self.shape.unravel(off, &mut idx);
            Coord::from_zero_based(&idx)
        })
    }

    /// Same known set with replaced values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.nnz() {
            return Err(Error::InvalidShape(format!(
                "{} values supplied for {} known entries",
                values.len(),
                self.nnz()
            )));
        }
        if let Some(p) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                coord: Coord::from_zero_based(self.raw_index(p)).0,
                value: values[p],
            });
        }
        Ok(SparseTensor {
            values,
            ..self.clone()
        })
    }

    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        self.with_values(self.values.iter().map(|&v| f(v)).collect())
    }

    /// Known entries whose coordinate satisfies `keep`.
    pub fn filter(&self, mut keep: impl FnMut(&Coord, f64) -> bool) -> Self {
        let raw: Vec<(usize, f64)> = (0..self.nnz())
            .filter(|&p| keep(&Coord::from_zero_based(self.raw_index(p)), self.values[p]))
            .map(|p| (self.offsets[p], self.values[p]))
            .collect();
        Self::from_offsets(self.shape.clone(), raw).expect("subset of a valid tensor")
    }

    // crate-internal raw access

    #[inline]
    pub(crate) fn raw_index(&self, pos: usize) -> &[usize] {
        let d = self.ndim();
        &self.indices[pos * d..(pos + 1) * d]
    }

    #[inline]
    pub(crate) fn raw_offsets(&self) -> &[usize] {
        &self.offsets
    }

    #[inline]
    pub(crate) fn position_of_offset(&self, off: usize) -> Option<usize> {
        self.offsets.binary_search(&off).ok()
    }

    /// Position of a 0-based index among the known entries, if known.
    #[inline]
    pub(crate) fn position_of(&self, index: &[usize]) -> Option<usize> {
        self.position_of_offset(self.shape.offset(index))
    }

    pub(crate) fn unknown_offsets(&self) -> impl Iterator<Item = usize> + '_ {
        let mut known = self.offsets.iter().copied().peekable();
        (0..self.shape.cells()).filter(move |&off| {
            while let Some(&k) = known.peek() {
                if k < off {
                    known.next();
                } else {
                    break;
                }
            }
            known.peek() != Some(&off)
        })
    }
}
