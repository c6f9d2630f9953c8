//! End-to-end evaluation of one configuration: transform, fit on the
//! training rows, predict the target rows, measure geodesic error.

use crate::dataset::{DatasetError, FingerprintSource, SplitIndices, Subset};
use crate::estimator::{EstimatorError, KnnModel};
use crate::geo::{GeoError, GeoPoint, Geodesic};
use crate::transform::TransformParams;
use crate::vecmetric::MetricKind;
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("cannot compute statistics of an empty error list")]
    EmptyErrors,
    #[error("no results to select from")]
    EmptyResults,
    #[error("invalid sweep grid: {0}")]
    Grid(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error(transparent)]
    Transform(#[from] crate::transform::TransformError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub params: TransformParams,
    pub metric: MetricKind,
    pub k: usize,
    #[serde(default)]
    pub geodesic: Geodesic,
}

impl fmt::Display for EvalConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} tau={} alpha={} beta={} k={}",
            self.metric,
            self.params.kind(),
            self.params.tau(),
            self.params.alpha(),
            self.params.beta(),
            self.k
        )
    }
}

/// Which held-out subset is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Validation,
    Test,
}

impl Target {
    /// Label used in exported rows; test evaluations are tagged as final.
    pub fn label(self) -> &'static str {
        match self {
            Target::Validation => "validation",
            Target::Test => "test-final",
        }
    }

    fn subset(self) -> Subset {
        match self {
            Target::Validation => Subset::Validation,
            Target::Test => Subset::Test,
        }
    }
}

/// Summary of per-row localization errors, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub n: usize,
    pub mean_m: f64,
    pub median_m: f64,
    pub p75_m: f64,
    pub p90_m: f64,
    pub max_m: f64,
}

/// Nearest-rank percentile of sorted values.
fn nearest_rank(sorted: &[f64], pct: f64) -> f64 {
    let rank = ((pct / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

pub fn error_stats(errors: &[f64]) -> Result<ErrorStats, EvalError> {
    if errors.is_empty() {
        return Err(EvalError::EmptyErrors);
    }
    let n = errors.len();
    let mean_m = errors.iter().sum::<f64>() / n as f64;
    let mut sorted = errors.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let median_m = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    };
    Ok(ErrorStats {
        n,
        mean_m,
        median_m,
        p75_m: nearest_rank(&sorted, 75.0),
        p90_m: nearest_rank(&sorted, 90.0),
        max_m: sorted[n - 1],
    })
}

/// Per-row geodesic errors between predictions and ground truth, in row order.
pub fn geodesic_errors(
    predictions: &[GeoPoint],
    truth: impl IntoIterator<Item = GeoPoint>,
    geodesic: Geodesic,
) -> Result<Vec<f64>, GeoError> {
    predictions
        .iter()
        .zip(truth)
        .map(|(&p, t)| geodesic.distance(p, t))
        .collect()
}

/// Result of one evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub cfg: EvalConfig,
    pub target: Target,
    pub stats: ErrorStats,
}

impl Evaluation {
    pub fn is_final(&self) -> bool {
        self.target == Target::Test
    }

    pub fn row(&self) -> ResultRow {
        ResultRow::new(&self.cfg, self.target, &self.stats)
    }
}

/// Fits on the training rows and evaluates on `target`.
///
/// Reads the training rows and the target rows only. Test-set evaluation is
/// the final, one-off measurement of a configuration chosen on validation;
/// sweeps never call this with [`Target::Test`].
pub fn evaluate<S: FingerprintSource + ?Sized>(
    set: &S,
    split: &SplitIndices,
    cfg: &EvalConfig,
    target: Target,
) -> Result<Evaluation, EvalError> {
    let model = KnnModel::fit(set, split.train(), &cfg.params, cfg.metric, cfg.k)?;
    let rows = split.rows(target.subset());
    let queries = model.transform_queries(set, rows);
    let predictions = model.predict_batch(&queries)?;
    let errors = geodesic_errors(&predictions, rows.iter().map(|&r| set.position(r)), cfg.geodesic)?;
    Ok(Evaluation {
        cfg: *cfg,
        target,
        stats: error_stats(&errors)?,
    })
}

/// One exported row: `metric,representation,tau,alpha,beta,k,target,n,mean_m,…`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub metric: MetricKind,
    pub representation: crate::transform::Representation,
    pub tau: f64,
    pub alpha: f64,
    pub beta: f64,
    pub k: usize,
    pub target: String,
    pub n: usize,
    pub mean_m: f64,
    pub median_m: f64,
    pub p75_m: f64,
    pub p90_m: f64,
    pub max_m: f64,
}

pub const RESULT_HEADER: [&str; 13] = [
    "metric",
    "representation",
    "tau",
    "alpha",
    "beta",
    "k",
    "target",
    "n",
    "mean_m",
    "median_m",
    "p75_m",
    "p90_m",
    "max_m",
];

impl ResultRow {
    pub fn new(cfg: &EvalConfig, target: Target, stats: &ErrorStats) -> Self {
        Self {
            metric: cfg.metric,
            representation: cfg.params.kind(),
            tau: cfg.params.tau(),
            alpha: cfg.params.alpha(),
            beta: cfg.params.beta(),
            k: cfg.k,
            target: target.label().to_string(),
            n: stats.n,
            mean_m: stats.mean_m,
            median_m: stats.median_m,
            p75_m: stats.p75_m,
            p90_m: stats.p90_m,
            max_m: stats.max_m,
        }
    }

    /// Fixed-precision CSV fields: parameters to 4 decimals, meters to 1.
    pub fn fields(&self) -> [String; 13] {
        [
            self.metric.name().to_string(),
            self.representation.name().to_string(),
            format!("{:.4}", self.tau),
            format!("{:.4}", self.alpha),
            format!("{:.4}", self.beta),
            self.k.to_string(),
            self.target.clone(),
            self.n.to_string(),
            format!("{:.1}", self.mean_m),
            format!("{:.1}", self.median_m),
            format!("{:.1}", self.p75_m),
            format!("{:.1}", self.p90_m),
            format!("{:.1}", self.max_m),
        ]
    }
}
