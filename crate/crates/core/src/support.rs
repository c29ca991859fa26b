//! Full-support certification.
//!
//! An unknown entry `α` is supported when some offset `s` with every
//! component nonzero makes all `2^d − 1` other corners `α + δ·s` (δ ∈ {0,1}^d,
//! δ ≠ 0) of the hypercube known. Because the unit-vector corners must be
//! known, each component `s_j` is drawn from the known offsets along the
//! axis-`j` fiber through `α`; candidates are tried in lexicographic order of
//! `(|s_1|, s_1, |s_2|, s_2, ...)` so the first hit is the smallest.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::tensor::{Coord, SparseTensor};

pub const DEFAULT_CANDIDATE_BUDGET: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupportCertificate {
    pub alpha: Coord,
    pub offset: Vec<isize>,
    /// `H(α, s)`, ordered by the bit pattern of δ.
    pub corners: Vec<Coord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportReport {
    pub fully_supported: bool,
    pub certificates: BTreeMap<Coord, SupportCertificate>,
    /// Unknowns for which no certificate exists.
    pub unsupported: Vec<Coord>,
    /// Unknowns whose search hit the candidate budget without a verdict.
    pub inconclusive: Vec<Coord>,
}

impl SupportReport {
    pub fn is_supported(&self, alpha: &Coord) -> bool {
        self.certificates.contains_key(alpha)
    }
}

enum Verdict {
    Supported(Vec<isize>),
    Unsupported,
    Inconclusive,
}

/// Offsets `t ≠ 0` with `α + t·e_dim` known, sorted by `(|t|, t)`.
fn axis_offsets(t: &SparseTensor, alpha: &[usize], dim: usize, probe: &mut [usize]) -> Vec<isize> {
    let n = t.shape().extent(dim);
    probe.copy_from_slice(alpha);
    let mut out: Vec<isize> = (0..n)
        .filter(|&x| x != alpha[dim])
        .filter(|&x| {
            probe[dim] = x;
            t.position_of(probe).is_some()
        })
        .map(|x| x as isize - alpha[dim] as isize)
        .collect();
    out.sort_by_key(|&o| (o.unsigned_abs(), o));
    out
}

fn corners_known(t: &SparseTensor, alpha: &[usize], offset: &[isize], probe: &mut [usize]) -> bool {
    let d = alpha.len();
    // unit corners are known by construction of the candidate lists
    (1usize..(1 << d)).filter(|m| m.count_ones() > 1).all(|mask| {
        for j in 0..d {
            probe[j] = if mask & (1 << j) != 0 {
                (alpha[j] as isize + offset[j]) as usize
            } else {
                alpha[j]
            };
        }
        t.position_of(probe).is_some()
    })
}

fn search(t: &SparseTensor, alpha: &[usize], budget: usize) -> Verdict {
    let d = alpha.len();
    let mut probe = vec![0usize; d];
    let lists: Vec<Vec<isize>> = (0..d).map(|j| axis_offsets(t, alpha, j, &mut probe)).collect();
    if lists.iter().any(|l| l.is_empty()) {
        return Verdict::Unsupported;
    }
    // odometer over the product of candidate lists, last dimension fastest
    let mut pick = vec![0usize; d];
    let mut offset = vec![0isize; d];
    let mut tried = 0usize;
    loop {
        if tried == budget {
            return Verdict::Inconclusive;
        }
        tried += 1;
        for j in 0..d {
            offset[j] = lists[j][pick[j]];
        }
        if corners_known(t, alpha, &offset, &mut probe) {
            return Verdict::Supported(offset);
        }
        let mut j = d;
        loop {
            if j == 0 {
                return Verdict::Unsupported;
            }
            j -= 1;
            pick[j] += 1;
            if pick[j] < lists[j].len() {
                break;
            }
            pick[j] = 0;
        }
    }
}

fn certificate(alpha: Coord, offset: Vec<isize>) -> SupportCertificate {
    let d = offset.len();
    let corners = (1usize..(1 << d))
        .map(|mask| {
            Coord(
                (0..d)
                    .map(|j| {
                        if mask & (1 << j) != 0 {
                            (alpha.0[j] as isize + offset[j]) as usize
                        } else {
                            alpha.0[j]
                        }
                    })
                    .collect(),
            )
        })
        .collect();
    SupportCertificate {
        alpha,
        offset,
        corners,
    }
}

pub fn check_support(t: &SparseTensor) -> SupportReport {
    check_support_with_budget(t, DEFAULT_CANDIDATE_BUDGET)
}

pub fn check_support_with_budget(t: &SparseTensor, budget: usize) -> SupportReport {
    let d = t.ndim();
    let mut certificates = BTreeMap::new();
    let mut unsupported = Vec::new();
    let mut inconclusive = Vec::new();
    let mut index = vec![0usize; d];
    for off in t.unknown_offsets() {
        t.shape().unravel(off, &mut index);
        let alpha = Coord::from_zero_based(&index);
        match search(t, &index, budget) {
            Verdict::Supported(offset) => {
                certificates.insert(alpha.clone(), certificate(alpha, offset));
            }
            Verdict::Unsupported => unsupported.push(alpha),
            Verdict::Inconclusive => inconclusive.push(alpha),
        }
    }
    SupportReport {
        fully_supported: unsupported.is_empty() && inconclusive.is_empty(),
        certificates,
        unsupported,
        inconclusive,
    }
}
