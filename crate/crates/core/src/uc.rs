//! Unit-consistent completion through the log domain.
//!
//! Positive scalings of subtensors become shifts after taking logs, so
//! completing `log t` shift-consistently and exponentiating gives a
//! completion that is consistent under positive rescaling.

use crate::catalog::SubtensorCatalog;
use crate::completion::{complete_in, CompletionResult, Method};
use crate::error::{Error, Result};
use crate::shift::{ConvergenceConfig, SweepOrder};
use crate::tensor::SparseTensor;

/// A sparse tensor whose known values are all strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct PositiveTensor(SparseTensor);

impl PositiveTensor {
    pub fn new(t: SparseTensor) -> Result<Self> {
        if let Some((coord, v)) = t.iter().find(|&(_, v)| v <= 0.0) {
            return Err(Error::Domain(format!(
                "unit-consistent completion needs positive values, found {v} at {coord}"
            )));
        }
        Ok(PositiveTensor(t))
    }

    pub fn as_tensor(&self) -> &SparseTensor {
        &self.0
    }

    pub fn into_inner(self) -> SparseTensor {
        self.0
    }
}

impl TryFrom<SparseTensor> for PositiveTensor {
    type Error = Error;

    fn try_from(t: SparseTensor) -> Result<Self> {
        PositiveTensor::new(t)
    }
}

/// `exp(scca(log t))` with known entries passed through unchanged.
pub fn ucca(t: &PositiveTensor, k: usize, cfg: &ConvergenceConfig) -> Result<CompletionResult> {
    ucca_with_order(t, k, cfg, &SweepOrder::default())
}

pub fn ucca_with_order(
    t: &PositiveTensor,
    k: usize,
    cfg: &ConvergenceConfig,
    order: &SweepOrder,
) -> Result<CompletionResult> {
    let source = t.as_tensor();
    let catalog = SubtensorCatalog::new(source.shape(), k)?;
    let logs = source.map_values(f64::ln)?;
    complete_in(source, &logs, Method::Uc, &catalog, cfg, order)
}

/// Completes with either method; UC checks positivity first.
pub fn complete(t: &SparseTensor, k: usize, method: Method, cfg: &ConvergenceConfig) -> Result<CompletionResult> {
    match method {
        Method::Sc => crate::completion::scca(t, k, cfg),
        Method::Uc => ucca(&PositiveTensor::new(t.clone())?, k, cfg),
    }
}
