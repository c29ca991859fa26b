//! Loading tensors and rating datasets from disk.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use shiftrec_core::coo::read_coo;
use shiftrec_core::data::{parse_movielens, Flavor, RatingsDataset, Scale};
use shiftrec_core::SparseTensor;

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    /// `# shape ...` header, then `i_1 ... i_d value` lines.
    Coo,
    Ml100k,
    Ml1m,
    Ml10m,
}

impl InputFormat {
    fn flavor(self) -> Option<Flavor> {
        match self {
            InputFormat::Coo => None,
            InputFormat::Ml100k => Some(Flavor::Ml100k),
            InputFormat::Ml1m => Some(Flavor::Ml1m),
            InputFormat::Ml10m => Some(Flavor::Ml10m),
        }
    }
}

impl FromStr for InputFormat {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "coo" => Ok(InputFormat::Coo),
            other => other
                .parse::<Flavor>()
                .map(|f| match f {
                    Flavor::Ml100k => InputFormat::Ml100k,
                    Flavor::Ml1m => InputFormat::Ml1m,
                    Flavor::Ml10m => InputFormat::Ml10m,
                })
                .map_err(|_| HarnessError::Config(format!("unknown input format {s:?}"))),
        }
    }
}

impl fmt::Display for InputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            InputFormat::Coo => "coo",
            InputFormat::Ml100k => "ml100k",
            InputFormat::Ml1m => "ml1m",
            InputFormat::Ml10m => "ml10m",
        };
        f.write_str(name)
    }
}

pub fn load_tensor(path: &Path, format: InputFormat) -> Result<SparseTensor> {
    Ok(match format.flavor() {
        None => read_coo(path)?,
        Some(flavor) => parse_movielens(path, flavor)?.matrix,
    })
}

/// A ratings dataset. COO matrices are taken to use dense ids already; their
/// scale is the flavor-independent 1..5 unless `scale` says otherwise.
pub fn load_dataset(path: &Path, format: InputFormat, scale: Option<Scale>) -> Result<RatingsDataset> {
    Ok(match format.flavor() {
        None => RatingsDataset::from_matrix(read_coo(path)?, scale.unwrap_or(Scale::ONE_TO_FIVE))?,
        Some(flavor) => parse_movielens(path, flavor)?,
    })
}

/// Parses `min:max:step`.
pub fn parse_scale(s: &str) -> Result<Scale> {
    let parts: Vec<f64> = s
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| HarnessError::Config(format!("scale {s:?} is not min:max:step")))?;
    match parts[..] {
        [min, max, step] => Ok(Scale::new(min, max, step)?),
        _ => Err(HarnessError::Config(format!("scale {s:?} is not min:max:step"))),
    }
}
