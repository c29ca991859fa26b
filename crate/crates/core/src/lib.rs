//! Shift-consistent completion of sparse tensors.
//!
//! The engine shifts every k-dimensional subtensor of a partially known
//! tensor so that its known entries sum to zero, then imputes each unknown
//! entry from the accumulated shift coefficients. The result is invariant to
//! adding constants to whole subtensors, which gives recommender systems
//! built on it a consensus-ordering guarantee and a per-user fairness
//! property. A log-domain variant provides unit-consistent completion.

pub mod catalog;
pub mod completion;
pub mod coo;
pub mod data;
pub mod error;
mod numeric;
pub mod recsys;
pub mod shift;
pub mod support;
pub mod tensor;
pub mod uc;

pub use catalog::{SubtensorCatalog, SubtensorId};
pub use completion::{
    mca, random_orders, scca, scca_with_order, verify_shift_consistency, verify_uniqueness, CompletionResult,
    Method, UniquenessReport,
};
pub use error::{Error, ErrorKind, Result};
pub use recsys::{fairness_probe, ConsensusPattern, FairnessReport, Recommender, TopN};
pub use shift::{apply_shift, csa, csa_with_order, residual, ConvergenceConfig, ShiftDirection, ShiftVector, SweepOrder};
pub use support::{check_support, SupportCertificate, SupportReport};
pub use tensor::{Coord, Shape, SparseTensor};
pub use uc::{complete, ucca, PositiveTensor};
