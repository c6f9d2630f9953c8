//! RSSI data representations.
//!
//! Every representation first clamps the raw value to the detection
//! threshold `tau` (so sentinel entries become `tau`), then maps the clamped
//! value into a non-negative feature:
//!
//! | kind        | value                                   |
//! |-------------|-----------------------------------------|
//! | positive    | `r - tau`                               |
//! | normalized  | `(r - tau) / d`                         |
//! | exponential | `exp((r - tau) / alpha) / exp(d / alpha)` |
//! | powed       | `((r - tau) / d) ^ beta`                |
//!
//! where `r = max(rss, tau)` and the scale `d` is `-tau` unless a fixed
//! floor is configured.

use crate::dataset::FingerprintSource;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransformError {
    #[error("tau must be finite and at most -1 dBm, got {0}")]
    Tau(f64),
    #[error("alpha must be positive and finite, got {0}")]
    Alpha(f64),
    #[error("beta must be positive and finite, got {0}")]
    Beta(f64),
    #[error("scale floor must be finite, at most -1 dBm and not above tau ({tau}), got {floor}")]
    ScaleFloor { floor: f64, tau: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Representation {
    Positive,
    Normalized,
    Exponential,
    Powed,
}

impl Representation {
    pub const ALL: [Representation; 4] = [
        Representation::Positive,
        Representation::Normalized,
        Representation::Exponential,
        Representation::Powed,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Representation::Positive => "positive",
            Representation::Normalized => "normalized",
            Representation::Exponential => "exponential",
            Representation::Powed => "powed",
        }
    }
}

impl fmt::Display for Representation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Representation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Representation::ALL
            .into_iter()
            .find(|r| r.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown representation '{s}'"))
    }
}

pub const DEFAULT_ALPHA: f64 = 24.0;
pub const DEFAULT_BETA: f64 = std::f64::consts::E;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct RawParams {
    kind: Representation,
    tau: f64,
    #[serde(default = "default_alpha")]
    alpha: f64,
    #[serde(default = "default_beta")]
    beta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scale_floor: Option<f64>,
}

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}

fn default_beta() -> f64 {
    DEFAULT_BETA
}

/// Representation kind plus the threshold and shape parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct TransformParams {
    kind: Representation,
    tau: f64,
    alpha: f64,
    beta: f64,
    scale_floor: Option<f64>,
}

impl TryFrom<RawParams> for TransformParams {
    type Error = TransformError;

    fn try_from(raw: RawParams) -> Result<Self, Self::Error> {
        if !(raw.tau.is_finite() && raw.tau <= -1.0) {
            return Err(TransformError::Tau(raw.tau));
        }
        if !(raw.alpha.is_finite() && raw.alpha > 0.0) {
            return Err(TransformError::Alpha(raw.alpha));
        }
        if !(raw.beta.is_finite() && raw.beta > 0.0) {
            return Err(TransformError::Beta(raw.beta));
        }
        if let Some(floor) = raw.scale_floor {
            if !(floor.is_finite() && floor <= -1.0 && floor <= raw.tau) {
                return Err(TransformError::ScaleFloor { floor, tau: raw.tau });
            }
        }
        Ok(Self {
            kind: raw.kind,
            tau: raw.tau,
            alpha: raw.alpha,
            beta: raw.beta,
            scale_floor: raw.scale_floor,
        })
    }
}

impl From<TransformParams> for RawParams {
    fn from(p: TransformParams) -> Self {
        RawParams {
            kind: p.kind,
            tau: p.tau,
            alpha: p.alpha,
            beta: p.beta,
            scale_floor: p.scale_floor,
        }
    }
}

impl TransformParams {
    pub fn new(kind: Representation, tau: f64, alpha: f64, beta: f64) -> Result<Self, TransformError> {
        RawParams {
            kind,
            tau,
            alpha,
            beta,
            scale_floor: None,
        }
        .try_into()
    }

    /// `kind` at threshold `tau` with the default alpha and beta.
    pub fn with_defaults(kind: Representation, tau: f64) -> Result<Self, TransformError> {
        Self::new(kind, tau, DEFAULT_ALPHA, DEFAULT_BETA)
    }

    /// Uses `-floor` instead of `-tau` as the scale denominator. With
    /// `floor == tau` this is the default behaviour.
    pub fn with_scale_floor(self, floor: f64) -> Result<Self, TransformError> {
        RawParams {
            scale_floor: Some(floor),
            ..self.into()
        }
        .try_into()
    }

    pub fn with_kind(self, kind: Representation) -> Self {
        Self { kind, ..self }
    }

    pub fn with_tau(self, tau: f64) -> Result<Self, TransformError> {
        RawParams { tau, ..self.into() }.try_into()
    }

    pub fn with_alpha(self, alpha: f64) -> Result<Self, TransformError> {
        RawParams { alpha, ..self.into() }.try_into()
    }

    pub fn with_beta(self, beta: f64) -> Result<Self, TransformError> {
        RawParams { beta, ..self.into() }.try_into()
    }

    pub fn kind(&self) -> Representation {
        self.kind
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn scale_floor(&self) -> Option<f64> {
        self.scale_floor
    }

    /// Positive scale denominator.
    fn scale(&self) -> f64 {
        -self.scale_floor.unwrap_or(self.tau)
    }

    /// Applies the configured representation to one raw RSSI value.
    #[inline]
    pub fn apply(&self, rss: f64) -> f64 {
        let scale = self.scale();
        match self.kind {
            Representation::Positive => positive(rss, self.tau),
            Representation::Normalized => positive(rss, self.tau) / scale,
            Representation::Exponential => ((positive(rss, self.tau) - scale) / self.alpha).exp(),
            Representation::Powed => (positive(rss, self.tau) / scale).powf(self.beta),
        }
    }
}

/// `max(rss, tau) - tau`.
#[inline]
pub fn positive(rss: f64, tau: f64) -> f64 {
    rss.max(tau) - tau
}

/// Positive value rescaled by `-tau`; 1 at 0 dBm.
pub fn normalized(rss: f64, tau: f64) -> f64 {
    positive(rss, tau) / -tau
}

/// `exp(positive / alpha) / exp(-tau / alpha)`, evaluated as a single
/// exponential so that it stays finite for small alpha.
pub fn exponential(rss: f64, tau: f64, alpha: f64) -> f64 {
    ((positive(rss, tau) + tau) / alpha).exp()
}

/// `positive^beta / (-tau)^beta`, evaluated as `(positive / -tau)^beta`.
pub fn powed(rss: f64, tau: f64, beta: f64) -> f64 {
    (positive(rss, tau) / -tau).powf(beta)
}

/// Row-major matrix of transformed fingerprints.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformedMatrix {
    values: Vec<f64>,
    n_rows: usize,
    n_cols: usize,
    params: TransformParams,
}

impl TransformedMatrix {
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn params(&self) -> &TransformParams {
        &self.params
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        // chunks() on an empty slice with n_cols 0 would panic
        let width = self.n_cols.max(1);
        self.values.chunks_exact(width).take(self.n_rows)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Applies `params` to every RSSI entry of the selected rows, in the order
/// given. Rows are processed in parallel; the result does not depend on it.
pub fn transform_set<S: FingerprintSource + ?Sized>(
    set: &S,
    rows: &[usize],
    params: &TransformParams,
) -> TransformedMatrix {
    let n_cols = set.n_basestations();
    let mut values = vec![0.0; rows.len() * n_cols];
    if n_cols > 0 {
        values
            .par_chunks_mut(n_cols)
            .zip(rows.par_iter())
            .for_each(|(out, &r)| {
                for (o, &v) in out.iter_mut().zip(set.rssi_row(r)) {
                    *o = params.apply(v);
                }
            });
    }
    TransformedMatrix {
        values,
        n_rows: rows.len(),
        n_cols,
        params: *params,
    }
}
