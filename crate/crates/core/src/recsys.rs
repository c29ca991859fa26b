//! Recommendations from a completion over the (d−1)-dimensional subtensors,
//! plus audits of consensus ordering and single-user shift fairness.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::completion::{CompletionResult, Method};
use crate::error::{Error, Result};
use crate::shift::ConvergenceConfig;
use crate::tensor::{Coord, SparseTensor};
use crate::uc::complete;

/// Predictions closer than this are ranked as ties (then by item id), so
/// that floating-point noise cannot reorder equal predictions.
pub const RANK_RESOLUTION: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct Recommender {
    completion: CompletionResult,
}

impl Recommender {
    /// Completes `t` over its (d−1)-dimensional subtensors.
    pub fn new(t: &SparseTensor, method: Method, cfg: &ConvergenceConfig) -> Result<Self> {
        let k = t.ndim().checked_sub(1).ok_or(Error::InvalidOrder { k: 0, d: t.ndim() })?;
        Ok(Recommender {
            completion: complete(t, k, method, cfg)?,
        })
    }

    pub fn from_completion(completion: CompletionResult) -> Result<Self> {
        let d = completion.shape().ndim();
        if completion.catalog().order() + 1 != d {
            return Err(Error::InvalidOrder {
                k: completion.catalog().order(),
                d,
            });
        }
        Ok(Recommender { completion })
    }

    pub fn completion(&self) -> &CompletionResult {
        &self.completion
    }

    pub fn source(&self) -> &SparseTensor {
        self.completion.source()
    }

    pub fn method(&self) -> Method {
        self.completion.method()
    }

    /// `RS(α)`: the rating if known, the imputation otherwise.
    pub fn recommend(&self, alpha: &Coord) -> Result<f64> {
        self.completion.value(alpha)
    }

    fn require_matrix(&self) -> Result<(usize, usize)> {
        let shape = self.source().shape();
        if shape.ndim() != 2 {
            return Err(Error::InvalidShape(format!(
                "top-N ranking needs a users x items matrix, got shape {shape}"
            )));
        }
        Ok((shape.extent(0), shape.extent(1)))
    }

    /// Unrated items of a 0-based user, best first.
    fn ranked_unrated(&self, user: usize, items: usize) -> Vec<usize> {
        let mut scored: Vec<(f64, usize)> = (0..items)
            .filter(|&j| self.source().position_of(&[user, j]).is_none())
            .map(|j| {
                let v = self.completion.imputation_raw(&[user, j]);
                ((v / RANK_RESOLUTION).round(), j)
            })
            .collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        scored.into_iter().map(|(_, j)| j).collect()
    }

    /// The `n` best unrated items for `user` (1-based ids throughout).
    pub fn top_n(&self, user: usize, n: usize) -> Result<TopN> {
        if n < 1 {
            return Err(Error::InvalidConfig("N must be at least 1".into()));
        }
        let (users, items) = self.require_matrix()?;
        if user < 1 || user > users {
            return Err(Error::OutOfBounds {
                coord: vec![user],
                shape: vec![users],
            });
        }
        let mut ranked = self.ranked_unrated(user - 1, items);
        ranked.truncate(n);
        Ok(TopN {
            user,
            items: ranked.into_iter().map(|j| j + 1).collect(),
        })
    }

    /// Checks that the completion keeps a consensus ordering on the pattern's
    /// common unknown set.
    pub fn verify_consensus(&self, pattern: &ConsensusPattern) -> Result<ConsensusOutcome> {
        // the pattern must describe this recommender's data
        let fresh = ConsensusPattern::new(self.source(), pattern.axis, pattern.gamma.clone())?;
        if fresh.sigma != pattern.sigma {
            return Err(Error::MalformedPattern(
                "pattern's common known set does not match the data".into(),
            ));
        }
        let axis = pattern.axis - 1;
        let mut violations = Vec::new();
        for rest in &fresh.sigma_bar {
            let values: Vec<f64> = pattern
                .gamma
                .iter()
                .map(|&slice| {
                    let full = insert_axis(&rest.0, axis, slice);
                    self.completion.value(&Coord(full))
                })
                .collect::<Result<_>>()?;
            for w in 0..values.len() - 1 {
                if values[w] >= values[w + 1] {
                    violations.push(ConsensusViolation {
                        alpha: rest.clone(),
                        lower_slice: pattern.gamma[w],
                        upper_slice: pattern.gamma[w + 1],
                        lower_value: values[w],
                        upper_value: values[w + 1],
                    });
                }
            }
        }
        Ok(ConsensusOutcome {
            checked: fresh.sigma_bar.len(),
            violations,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopN {
    pub user: usize,
    pub items: Vec<usize>,
}

fn insert_axis(rest: &[usize], axis: usize, value: usize) -> Vec<usize> {
    let mut full = Vec::with_capacity(rest.len() + 1);
    full.extend_from_slice(&rest[..axis]);
    full.push(value);
    full.extend_from_slice(&rest[axis..]);
    full
}

/// Known entries of one slice along `axis`, keyed by the remaining 1-based
/// coordinates.
fn slice_entries(t: &SparseTensor, axis: usize, slice: usize) -> BTreeMap<Coord, f64> {
    t.iter()
        .filter(|(c, _)| c.0[axis] == slice)
        .map(|(mut c, v)| {
            c.0.remove(axis);
            (c, v)
        })
        .collect()
}

/// Slices along one axis that share a known set and are unanimously strictly
/// ordered on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusPattern {
    /// 1-based dimension indexing the slices.
    pub axis: usize,
    /// Slice indices in increasing order of preference.
    pub gamma: Vec<usize>,
    /// Common known set of the slices, as (d−1)-coordinates.
    pub sigma: Vec<Coord>,
    /// Common unknown set of the slices.
    pub sigma_bar: Vec<Coord>,
}

impl ConsensusPattern {
    /// Validates `gamma` against `t`.
    pub fn new(t: &SparseTensor, axis: usize, gamma: Vec<usize>) -> Result<Self> {
        let d = t.ndim();
        if d < 2 {
            return Err(Error::MalformedPattern("tensor must have at least 2 dimensions".into()));
        }
        if axis < 1 || axis > d {
            return Err(Error::MalformedPattern(format!("axis {axis} outside 1..={d}")));
        }
        let extent = t.shape().extent(axis - 1);
        if gamma.len() < 2 {
            return Err(Error::MalformedPattern("gamma needs at least two slices".into()));
        }
        for (i, &g) in gamma.iter().enumerate() {
            if g < 1 || g > extent {
                return Err(Error::MalformedPattern(format!("slice {g} outside 1..={extent}")));
            }
            if gamma[..i].contains(&g) {
                return Err(Error::MalformedPattern(format!("slice {g} repeated")));
            }
        }
        let slices: Vec<BTreeMap<Coord, f64>> =
            gamma.iter().map(|&g| slice_entries(t, axis - 1, g)).collect();
        let sigma: Vec<Coord> = slices[0].keys().cloned().collect();
        if sigma.is_empty() {
            return Err(Error::MalformedPattern("common known set is empty".into()));
        }
        for (s, &g) in slices.iter().zip(&gamma).skip(1) {
            if !s.keys().eq(sigma.iter()) {
                return Err(Error::MalformedPattern(format!(
                    "slice {g} has a different known set than slice {}",
                    gamma[0]
                )));
            }
        }
        for alpha in &sigma {
            for w in 0..gamma.len() - 1 {
                let (lo, hi) = (slices[w][alpha], slices[w + 1][alpha]);
                if lo >= hi {
                    return Err(Error::MalformedPattern(format!(
                        "ordering not strict at {alpha}: slice {} = {lo}, slice {} = {hi}",
                        gamma[w],
                        gamma[w + 1]
                    )));
                }
            }
        }
        let mut rest_extents: Vec<usize> = t.shape().extents().to_vec();
        rest_extents.remove(axis - 1);
        let rest_shape = crate::tensor::Shape::new(rest_extents)?;
        let known = SparseTensor::from_entries(rest_shape, sigma.iter().map(|c| (c.clone(), 0.0)))?;
        let sigma_bar = known.unknown_coords().collect();
        Ok(ConsensusPattern {
            axis,
            gamma,
            sigma,
            sigma_bar,
        })
    }
}

/// Every ordered pair of slices along `axis` that forms a valid pattern, up
/// to `limit` patterns.
pub fn find_consensus_patterns(t: &SparseTensor, axis: usize, limit: usize) -> Result<Vec<ConsensusPattern>> {
    if axis < 1 || axis > t.ndim() {
        return Err(Error::MalformedPattern(format!("axis {axis} outside 1..={}", t.ndim())));
    }
    let extent = t.shape().extent(axis - 1);
    let mut by_slice: Vec<BTreeMap<Coord, f64>> = vec![BTreeMap::new(); extent];
    for (mut c, v) in t.iter() {
        let slice = c.0.remove(axis - 1);
        by_slice[slice - 1].insert(c, v);
    }
    let mut groups: BTreeMap<Vec<Coord>, Vec<usize>> = BTreeMap::new();
    for (s, entries) in by_slice.iter().enumerate() {
        if !entries.is_empty() {
            groups.entry(entries.keys().cloned().collect()).or_default().push(s);
        }
    }
    let mut out = Vec::new();
    for members in groups.values() {
        for (i, &a) in members.iter().enumerate() {
            for &b in &members[i + 1..] {
                let (ea, eb) = (&by_slice[a], &by_slice[b]);
                let pair = if ea.iter().all(|(c, v)| *v < eb[c]) {
                    Some(vec![a + 1, b + 1])
                } else if ea.iter().all(|(c, v)| *v > eb[c]) {
                    Some(vec![b + 1, a + 1])
                } else {
                    None
                };
                if let Some(gamma) = pair {
                    out.push(ConsensusPattern::new(t, axis, gamma)?);
                    if out.len() == limit {
                        return Ok(out);
                    }
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusViolation {
    pub alpha: Coord,
    pub lower_slice: usize,
    pub upper_slice: usize,
    pub lower_value: f64,
    pub upper_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusOutcome {
    /// Number of common-unknown positions examined.
    pub checked: usize,
    pub violations: Vec<ConsensusViolation>,
}

impl ConsensusOutcome {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub method: Method,
    pub shifted_user: usize,
    pub delta: f64,
    /// Multiplier applied to the user's ratings (UC only).
    pub scale_factor: Option<f64>,
    pub ns: Vec<usize>,
    /// Other users whose top-N list changed, one count per entry of `ns`.
    pub changed_users: Vec<usize>,
    /// Largest prediction change over all other users' entries.
    pub max_other_deviation: f64,
    /// Largest departure of the shifted user's imputations from the applied
    /// shift (absolute for SC, relative for UC).
    pub shifted_user_deviation: f64,
}

impl FairnessReport {
    pub fn unaffected(&self) -> bool {
        self.changed_users.iter().all(|&c| c == 0)
    }

    /// `N,changed_user_count` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("N,changed_user_count\n");
        for (n, c) in self.ns.iter().zip(&self.changed_users) {
            out.push_str(&format!("{n},{c}\n"));
        }
        out
    }
}

/// First user (1-based) whose highest rating sits exactly `step` below
/// `scale_max`.
pub fn default_fairness_user(t: &SparseTensor, scale_max: f64, step: f64) -> Option<usize> {
    if t.ndim() != 2 {
        return None;
    }
    let mut best = vec![f64::NEG_INFINITY; t.shape().extent(0)];
    for (c, v) in t.iter() {
        best[c.0[0] - 1] = best[c.0[0] - 1].max(v);
    }
    best.iter()
        .position(|&m| (m - (scale_max - step)).abs() < 1e-9)
        .map(|u| u + 1)
}

/// Shifts every rating of `user` by `delta` (SC) or scales it so the user's
/// top rating grows by `delta` (UC), then counts how many other users see a
/// different top-N list.
pub fn fairness_probe(
    t: &SparseTensor,
    user: usize,
    delta: f64,
    ns: &[usize],
    method: Method,
    cfg: &ConvergenceConfig,
) -> Result<FairnessReport> {
    if t.ndim() != 2 {
        return Err(Error::InvalidShape(format!(
            "fairness probe needs a users x items matrix, got shape {}",
            t.shape()
        )));
    }
    if ns.iter().any(|&n| n < 1) {
        return Err(Error::InvalidConfig("every N must be at least 1".into()));
    }
    let (users, items) = (t.shape().extent(0), t.shape().extent(1));
    if user < 1 || user > users {
        return Err(Error::OutOfBounds {
            coord: vec![user],
            shape: vec![users],
        });
    }
    let user_max = t
        .iter()
        .filter(|(c, _)| c.0[0] == user)
        .map(|(_, v)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    if user_max == f64::NEG_INFINITY {
        return Err(Error::InvalidConfig(format!("user {user} has no ratings")));
    }
    let scale_factor = match method {
        Method::Sc => None,
        Method::Uc => {
            let f = (user_max + delta) / user_max;
            if f.is_nan() || f <= 0.0 {
                return Err(Error::Domain(format!(
                    "scaling user {user} by {f} would leave non-positive ratings"
                )));
            }
            Some(f)
        }
    };
    let adjusted: Vec<f64> = t
        .iter()
        .map(|(c, v)| match (c.0[0] == user, scale_factor) {
            (false, _) => v,
            (true, None) => v + delta,
            (true, Some(f)) => v * f,
        })
        .collect();
    let shifted = t.with_values(adjusted)?;

    let (before, after) = rayon::join(
        || Recommender::new(t, method, cfg),
        || Recommender::new(&shifted, method, cfg),
    );
    let (before, after) = (before?, after?);

    let u0 = user - 1;
    let mut max_other = 0.0f64;
    let mut shifted_dev = 0.0f64;
    for i in 0..users {
        for j in 0..items {
            let old = before.completion.value_raw(&[i, j]);
            let new = after.completion.value_raw(&[i, j]);
            if i != u0 {
                max_other = max_other.max((new - old).abs());
            } else if t.position_of(&[i, j]).is_none() {
                let dev = match scale_factor {
                    None => (new - old - delta).abs(),
                    Some(f) => ((new - old * f) / (old * f)).abs(),
                };
                shifted_dev = shifted_dev.max(dev);
            }
        }
    }

    let n_max = ns.iter().copied().max().unwrap_or(0);
    let mut changed_users = vec![0usize; ns.len()];
    for i in (0..users).filter(|&i| i != u0) {
        let mut a = before.ranked_unrated(i, items);
        let mut b = after.ranked_unrated(i, items);
        a.truncate(n_max);
        b.truncate(n_max);
        for (slot, &n) in changed_users.iter_mut().zip(ns) {
            let m = n.min(a.len());
            if a[..m] != b[..n.min(b.len())] {
                *slot += 1;
            }
        }
    }

    Ok(FairnessReport {
        method,
        shifted_user: user,
        delta,
        scale_factor,
        ns: ns.to_vec(),
        changed_users,
        max_other_deviation: max_other,
        shifted_user_deviation: shifted_dev,
    })
}
