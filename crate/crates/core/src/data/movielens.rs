use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{RatingsDataset, Scale};
use crate::coo::open_text;
use crate::error::{Error, Result};
use crate::tensor::{Shape, SparseTensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Flavor {
    /// `user \t item \t rating \t timestamp`
    Ml100k,
    /// `UserID::MovieID::Rating::Timestamp`
    Ml1m,
    /// As `Ml1m`, with half-star ratings.
    Ml10m,
}

impl Flavor {
    pub fn scale(&self) -> Scale {
        match self {
            Flavor::Ml100k | Flavor::Ml1m => Scale::ONE_TO_FIVE,
            Flavor::Ml10m => Scale {
                min: 0.5,
                max: 5.0,
                step: 0.5,
            },
        }
    }

    fn split<'a>(&self, line: &'a str) -> Vec<&'a str> {
        match self {
            Flavor::Ml100k => line.split('\t').collect(),
            Flavor::Ml1m | Flavor::Ml10m => line.split("::").collect(),
        }
    }
}

impl FromStr for Flavor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ml100k" => Ok(Flavor::Ml100k),
            "ml1m" => Ok(Flavor::Ml1m),
            "ml10m" => Ok(Flavor::Ml10m),
            other => Err(Error::InvalidConfig(format!(
                "unknown MovieLens flavor {other:?} (expected ml100k, ml1m or ml10m)"
            ))),
        }
    }
}

pub fn parse_movielens(path: &Path, flavor: Flavor) -> Result<RatingsDataset> {
    parse_movielens_reader(open_text(path)?, flavor, &path.display().to_string())
}

/// Parses ratings, dropping timestamps and remapping ids densely in
/// ascending external-id order.
pub fn parse_movielens_reader(reader: impl BufRead, flavor: Flavor, origin: &str) -> Result<RatingsDataset> {
    let scale = flavor.scale();
    let err = |line: usize, message: String| Error::Parse {
        path: origin.to_string(),
        line,
        message,
    };
    let mut raw: Vec<(u64, u64, f64)> = Vec::new();
    let mut seen: HashMap<(u64, u64), usize> = HashMap::new();
    for (n, line) in reader.lines().enumerate() {
        let lineno = n + 1;
        let line = line.map_err(|e| Error::io(origin, e))?;
        let line = line.trim_end_matches(['\r', '\n']);
        if line.trim().is_empty() {
            continue;
        }
        let fields = flavor.split(line);
        if fields.len() != 4 {
            return Err(err(lineno, format!("expected 4 fields, found {}", fields.len())));
        }
        let field = |i: usize, name: &str| -> Result<&str> {
            let f = fields[i].trim();
            if f.is_empty() {
                Err(err(lineno, format!("field '{name}' is empty")))
            } else {
                Ok(f)
            }
        };
        let user: u64 = field(0, "user")?
            .parse()
            .map_err(|_| err(lineno, format!("field 'user' is not an integer: {:?}", fields[0])))?;
        let item: u64 = field(1, "item")?
            .parse()
            .map_err(|_| err(lineno, format!("field 'item' is not an integer: {:?}", fields[1])))?;
        let rating: f64 = field(2, "rating")?
            .parse()
            .map_err(|_| err(lineno, format!("field 'rating' is not a number: {:?}", fields[2])))?;
        field(3, "timestamp")?
            .parse::<i64>()
            .map_err(|_| err(lineno, format!("field 'timestamp' is not an integer: {:?}", fields[3])))?;
        if !scale.contains(rating) {
            return Err(err(
                lineno,
                format!("rating {rating} outside scale {}..{} step {}", scale.min, scale.max, scale.step),
            ));
        }
        if let Some(first) = seen.insert((user, item), lineno) {
            return Err(err(
                lineno,
                format!("duplicate rating for user {user}, item {item} (first on line {first})"),
            ));
        }
        raw.push((user, item, rating));
    }

    let mut user_ids: Vec<u64> = raw.iter().map(|r| r.0).collect();
    user_ids.sort_unstable();
    user_ids.dedup();
    let mut item_ids: Vec<u64> = raw.iter().map(|r| r.1).collect();
    item_ids.sort_unstable();
    item_ids.dedup();
    if user_ids.is_empty() {
        return Err(err(0, "no ratings found".into()));
    }
    let shape = Shape::new(vec![user_ids.len(), item_ids.len()])?;
    let n_items = item_ids.len();
    let entries: Vec<(usize, f64)> = raw
        .iter()
        .map(|&(u, i, r)| {
            let ui = user_ids.binary_search(&u).expect("collected id");
            let ii = item_ids.binary_search(&i).expect("collected id");
            (ui * n_items + ii, r)
        })
        .collect();
    Ok(RatingsDataset {
        matrix: SparseTensor::from_offsets(shape, entries)?,
        user_ids,
        item_ids,
        scale,
    })
}
