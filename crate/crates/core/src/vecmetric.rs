//! Distances between transformed fingerprint vectors.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("dimension mismatch: {left} vs {right}")]
pub struct DimensionMismatch {
    pub left: usize,
    pub right: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    Euclidean,
    Manhattan,
    Chebyshev,
    Hamming,
    Canberra,
    BrayCurtis,
}

impl MetricKind {
    pub const ALL: [MetricKind; 6] = [
        MetricKind::Euclidean,
        MetricKind::Manhattan,
        MetricKind::Chebyshev,
        MetricKind::Hamming,
        MetricKind::Canberra,
        MetricKind::BrayCurtis,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Euclidean => "euclidean",
            MetricKind::Manhattan => "manhattan",
            MetricKind::Chebyshev => "chebyshev",
            MetricKind::Hamming => "hamming",
            MetricKind::Canberra => "canberra",
            MetricKind::BrayCurtis => "braycurtis",
        }
    }

    /// Unchanged when both vectors are multiplied by the same positive constant.
    pub fn is_scale_invariant(self) -> bool {
        matches!(self, MetricKind::BrayCurtis | MetricKind::Canberra | MetricKind::Hamming)
    }

    /// Distance without the length check. Callers guarantee `u.len() == v.len()`.
    #[inline]
    pub(crate) fn eval(self, u: &[f64], v: &[f64]) -> f64 {
        debug_assert_eq!(u.len(), v.len());
        let pairs = u.iter().zip(v);
        match self {
            MetricKind::Euclidean => pairs.map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt(),
            MetricKind::Manhattan => pairs.map(|(a, b)| (a - b).abs()).sum(),
            MetricKind::Chebyshev => pairs.map(|(a, b)| (a - b).abs()).fold(0.0, f64::max),
            MetricKind::Hamming => {
                let differing = pairs.filter(|(a, b)| a != b).count();
                differing as f64 / u.len() as f64
            }
            MetricKind::Canberra => pairs
                .map(|(a, b)| {
                    let denom = a.abs() + b.abs();
                    if denom == 0.0 {
                        0.0
                    } else {
                        (a - b).abs() / denom
                    }
                })
                .sum(),
            MetricKind::BrayCurtis => {
                let (num, denom) = pairs.fold((0.0, 0.0), |(n, d), (a, b)| {
                    (n + (a - b).abs(), d + (a + b).abs())
                });
                if denom == 0.0 {
                    0.0
                } else {
                    num / denom
                }
            }
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MetricKind::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown metric '{s}'"))
    }
}

pub fn distance(u: &[f64], v: &[f64], kind: MetricKind) -> Result<f64, DimensionMismatch> {
    if u.len() != v.len() || u.is_empty() {
        return Err(DimensionMismatch {
            left: u.len(),
            right: v.len(),
        });
    }
    Ok(kind.eval(u, v))
}
