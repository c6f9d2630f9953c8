//! Hyperparameter sweeps on the validation set.
//!
//! Every sweep evaluates a grid of configurations against the validation
//! rows only and returns one [`SweepResult`] per grid point, in grid order.
//! For a fixed representation and metric the neighbor lists are computed
//! once for the largest `k` and every smaller `k` reuses their prefix; the
//! numbers are identical to a standalone [`evaluate`](crate::evaluate::evaluate)
//! call with the same configuration.

use crate::dataset::{FingerprintSource, SplitIndices};
use crate::estimator::KnnModel;
use crate::evaluate::{error_stats, geodesic_errors, ErrorStats, EvalConfig, EvalError, ResultRow, Target};
use crate::geo::{GeoPoint, Geodesic};
use crate::transform::{Representation, TransformParams};
use crate::vecmetric::MetricKind;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;

/// Inclusive integer range of `k` values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KRange {
    pub min: usize,
    pub max: usize,
}

impl KRange {
    pub fn new(min: usize, max: usize) -> Result<Self, EvalError> {
        if min == 0 || min > max {
            return Err(EvalError::Grid(format!("k range [{min}, {max}] is empty or starts at 0")));
        }
        Ok(Self { min, max })
    }

    pub fn single(k: usize) -> Result<Self, EvalError> {
        Self::new(k, k)
    }

    pub fn values(&self) -> Vec<usize> {
        (self.min..=self.max).collect()
    }
}

impl Default for KRange {
    fn default() -> Self {
        Self { min: 1, max: 20 }
    }
}

/// Inclusive real range `start, start + step, …, end`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FloatRange {
    pub start: f64,
    pub end: f64,
    pub step: f64,
}

impl FloatRange {
    pub fn new(start: f64, end: f64, step: f64) -> Result<Self, EvalError> {
        if !(start.is_finite() && end.is_finite() && step.is_finite()) || step <= 0.0 || end < start {
            return Err(EvalError::Grid(format!("range [{start}, {end}] step {step} is empty or invalid")));
        }
        Ok(Self { start, end, step })
    }

    /// Grid points, rounded to 1e-9 so that e.g. 2.6 prints as 2.6.
    pub fn values(&self) -> Vec<f64> {
        let n = ((self.end - self.start) / self.step + 1e-9).floor() as usize + 1;
        (0..n)
            .map(|i| ((self.start + i as f64 * self.step) * 1e9).round() / 1e9)
            .collect()
    }
}

/// Everything a full tuning run may scan over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub metrics: Vec<MetricKind>,
    pub representations: Vec<Representation>,
    pub k_range: KRange,
    pub tau_range: FloatRange,
    pub alpha_range: FloatRange,
    pub beta_range: FloatRange,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self {
            metrics: MetricKind::ALL.to_vec(),
            representations: Representation::ALL.to_vec(),
            k_range: KRange::default(),
            tau_range: FloatRange {
                start: -200.0,
                end: -130.0,
                step: 1.0,
            },
            alpha_range: FloatRange {
                start: 10.0,
                end: 40.0,
                step: 1.0,
            },
            beta_range: FloatRange {
                start: 2.0,
                end: 3.0,
                step: 0.02,
            },
        }
    }
}

impl SweepGrid {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.metrics.is_empty() || self.representations.is_empty() {
            return Err(EvalError::Grid("metric and representation sets must be non-empty".into()));
        }
        KRange::new(self.k_range.min, self.k_range.max)?;
        for r in [&self.tau_range, &self.alpha_range, &self.beta_range] {
            FloatRange::new(r.start, r.end, r.step)?;
        }
        Ok(())
    }
}

/// One evaluated grid point. Holds validation statistics only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepResult {
    pub cfg: EvalConfig,
    pub validation: ErrorStats,
}

impl SweepResult {
    pub fn row(&self) -> ResultRow {
        ResultRow::new(&self.cfg, Target::Validation, &self.validation)
    }
}

/// Shared inputs for a sweep: data, split, error formula and parallelism.
pub struct SweepContext<'a, S: FingerprintSource + ?Sized> {
    set: &'a S,
    split: &'a SplitIndices,
    geodesic: Geodesic,
    pool: rayon::ThreadPool,
}

impl<'a, S: FingerprintSource + ?Sized> SweepContext<'a, S> {
    /// `jobs` worker threads; 0 means one per logical core. Results do not
    /// depend on it.
    pub fn new(set: &'a S, split: &'a SplitIndices, geodesic: Geodesic, jobs: usize) -> Result<Self, EvalError> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| EvalError::Grid(format!("cannot start {jobs} worker threads: {e}")))?;
        Ok(Self {
            set,
            split,
            geodesic,
            pool,
        })
    }

    pub fn geodesic(&self) -> Geodesic {
        self.geodesic
    }

    /// Validation results for every `k` in `ks` at fixed params and metric.
    pub fn evaluate_ks(
        &self,
        params: &TransformParams,
        metric: MetricKind,
        ks: &[usize],
    ) -> Result<Vec<SweepResult>, EvalError> {
        let Some(&k_max) = ks.iter().max() else {
            return Ok(Vec::new());
        };
        self.pool.install(|| {
            let model = KnnModel::fit(self.set, self.split.train(), params, metric, k_max)?;
            let rows = self.split.validation();
            let queries = model.transform_queries(self.set, rows);
            let query_rows: Vec<&[f64]> = queries.rows().collect();
            let neighbors = query_rows
                .par_iter()
                .map(|q| model.neighbors(q, k_max))
                .collect::<Result<Vec<_>, _>>()?;
            let truth: Vec<GeoPoint> = rows.iter().map(|&r| self.set.position(r)).collect();
            ks.iter()
                .map(|&k| {
                    let predictions: Vec<GeoPoint> = neighbors.iter().map(|nb| model.centroid(&nb[..k])).collect();
                    let errors = geodesic_errors(&predictions, truth.iter().copied(), self.geodesic)?;
                    Ok(SweepResult {
                        cfg: EvalConfig {
                            params: *params,
                            metric,
                            k,
                            geodesic: self.geodesic,
                        },
                        validation: error_stats(&errors)?,
                    })
                })
                .collect()
        })
    }

    fn check_k(&self, k_range: &KRange) -> Result<(), EvalError> {
        if k_range.max > self.split.train().len() {
            return Err(EvalError::Grid(format!(
                "k up to {} exceeds the {} training rows",
                k_range.max,
                self.split.train().len()
            )));
        }
        Ok(())
    }

    /// Every (metric, representation, k) at fixed tau/alpha/beta, plus the
    /// best `k` per (metric, representation) cell.
    pub fn sweep_k_by_metric(
        &self,
        metrics: &[MetricKind],
        representations: &[Representation],
        base: &TransformParams,
        k_range: KRange,
    ) -> Result<KMetricSweep, EvalError> {
        self.check_k(&k_range)?;
        let ks = k_range.values();
        let mut results = Vec::new();
        let mut cells = Vec::new();
        for &metric in metrics {
            for &rep in representations {
                let cell = self.evaluate_ks(&base.with_kind(rep), metric, &ks)?;
                cells.push(*select_best_result(&cell)?);
                results.extend(cell);
            }
        }
        Ok(KMetricSweep { results, cells })
    }

    /// Validation mean error as a function of tau, everything else fixed.
    /// The threshold is the free variable: it sets both the clamp and the
    /// scale denominator.
    pub fn sweep_tau(&self, base: &EvalConfig, taus: &FloatRange) -> Result<Scan, EvalError> {
        self.check_k(&KRange::single(base.k)?)?;
        let mut results = Vec::new();
        for tau in taus.values() {
            results.extend(self.evaluate_ks(&base.params.with_tau(tau)?, base.metric, &[base.k])?);
        }
        Scan::new(results)
    }

    /// Exponential alpha scan. With `k_range` it is an (alpha, k) grid,
    /// otherwise `base.k` is used.
    pub fn sweep_alpha(&self, base: &EvalConfig, alphas: &FloatRange, k_range: Option<KRange>) -> Result<Scan, EvalError> {
        if base.params.kind() != Representation::Exponential {
            return Err(EvalError::Grid("alpha scan needs the exponential representation".into()));
        }
        self.param_scan(base, alphas, k_range, |p, a| p.with_alpha(a))
    }

    /// Powed beta scan. With `k_range` it is a (beta, k) grid.
    pub fn sweep_beta(&self, base: &EvalConfig, betas: &FloatRange, k_range: Option<KRange>) -> Result<Scan, EvalError> {
        if base.params.kind() != Representation::Powed {
            return Err(EvalError::Grid("beta scan needs the powed representation".into()));
        }
        self.param_scan(base, betas, k_range, |p, b| p.with_beta(b))
    }

    fn param_scan(
        &self,
        base: &EvalConfig,
        range: &FloatRange,
        k_range: Option<KRange>,
        set_param: impl Fn(TransformParams, f64) -> Result<TransformParams, crate::transform::TransformError>,
    ) -> Result<Scan, EvalError> {
        let k_range = match k_range {
            Some(r) => r,
            None => KRange::single(base.k)?,
        };
        self.check_k(&k_range)?;
        let ks = k_range.values();
        let mut results = Vec::new();
        for v in range.values() {
            results.extend(self.evaluate_ks(&set_param(base.params, v)?, base.metric, &ks)?);
        }
        Scan::new(results)
    }
}

/// Output of [`SweepContext::sweep_k_by_metric`].
#[derive(Debug, Clone, PartialEq)]
pub struct KMetricSweep {
    /// Grid order: metric, then representation, then k.
    pub results: Vec<SweepResult>,
    /// Best k per (metric, representation), in the same order.
    pub cells: Vec<SweepResult>,
}

impl KMetricSweep {
    pub fn best(&self) -> Result<&SweepResult, EvalError> {
        select_best_result(&self.cells)
    }

    pub fn cell(&self, metric: MetricKind, rep: Representation) -> Option<&SweepResult> {
        self.cells
            .iter()
            .find(|c| c.cfg.metric == metric && c.cfg.params.kind() == rep)
    }
}

/// A curve or grid with its best point.
#[derive(Debug, Clone, PartialEq)]
pub struct Scan {
    pub results: Vec<SweepResult>,
    pub best: SweepResult,
}

impl Scan {
    fn new(results: Vec<SweepResult>) -> Result<Self, EvalError> {
        let best = *select_best_result(&results)?;
        Ok(Self { results, best })
    }
}

fn selection_order(a: &SweepResult, b: &SweepResult) -> Ordering {
    a.validation
        .mean_m
        .total_cmp(&b.validation.mean_m)
        .then(a.cfg.k.cmp(&b.cfg.k))
        .then(a.cfg.metric.name().cmp(b.cfg.metric.name()))
}

/// Lowest validation mean error; ties go to the smaller `k`, then the
/// lexicographically smaller metric name, then the earlier row.
pub fn select_best_result(results: &[SweepResult]) -> Result<&SweepResult, EvalError> {
    results
        .iter()
        .reduce(|best, r| if selection_order(r, best) == Ordering::Less { r } else { best })
        .ok_or(EvalError::EmptyResults)
}

pub fn select_best(results: &[SweepResult]) -> Result<EvalConfig, EvalError> {
    select_best_result(results).map(|r| r.cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluate::evaluate;
    use crate::synthetic::{synthetic_city, CityConfig};

    fn result(metric: MetricKind, k: usize, mean: f64) -> SweepResult {
        SweepResult {
            cfg: EvalConfig {
                params: TransformParams::with_defaults(Representation::Powed, -157.0).unwrap(),
                metric,
                k,
                geodesic: Geodesic::Haversine,
            },
            validation: ErrorStats {
                n: 1,
                mean_m: mean,
                median_m: mean,
                p75_m: mean,
                p90_m: mean,
                max_m: mean,
            },
        }
    }

    #[test]
    fn ranges() {
        assert_eq!(FloatRange::new(-200.0, -130.0, 1.0).unwrap().values().len(), 71);
        let betas = FloatRange::new(2.0, 3.0, 0.02).unwrap().values();
        assert_eq!(betas.len(), 51);
        assert_eq!(betas[30], 2.6);
        assert_eq!(*betas.last().unwrap(), 3.0);
        assert_eq!(FloatRange::new(10.0, 40.0, 1.0).unwrap().values().len(), 31);
        assert!(FloatRange::new(1.0, 0.0, 1.0).is_err());
        assert!(FloatRange::new(0.0, 1.0, 0.0).is_err());
        assert!(KRange::new(0, 3).is_err());
        assert!(KRange::new(4, 3).is_err());
        SweepGrid::default().validate().unwrap();
    }

    #[test]
    fn selection_rules() {
        assert!(matches!(select_best(&[]), Err(EvalError::EmptyResults)));
        let one = [result(MetricKind::Canberra, 3, 10.0)];
        assert_eq!(select_best(&one).unwrap(), one[0].cfg);
        let tie = [result(MetricKind::Euclidean, 7, 5.0), result(MetricKind::Euclidean, 4, 5.0)];
        assert_eq!(select_best(&tie).unwrap().k, 4);
        let by_name = [result(MetricKind::Manhattan, 4, 5.0), result(MetricKind::BrayCurtis, 4, 5.0)];
        assert_eq!(select_best(&by_name).unwrap().metric, MetricKind::BrayCurtis);
    }

    #[test]
    fn table_two_best_rows_select_braycurtis_powed() {
        // best rows of the tau = -157 table, mean errors in meters
        let rows = [
            (MetricKind::Euclidean, Representation::Powed, 8, 343.0),
            (MetricKind::Manhattan, Representation::Powed, 6, 343.0),
            (MetricKind::Chebyshev, Representation::Powed, 4, 399.0),
            (MetricKind::Hamming, Representation::Powed, 7, 1065.0),
            (MetricKind::Canberra, Representation::Exponential, 6, 420.0),
            (MetricKind::BrayCurtis, Representation::Powed, 6, 319.0),
        ];
        let table: Vec<SweepResult> = rows
            .iter()
            .map(|&(m, rep, k, mean)| {
                let mut r = result(m, k, mean);
                r.cfg.params = r.cfg.params.with_kind(rep);
                r
            })
            .collect();
        let best = select_best(&table).unwrap();
        assert_eq!((best.metric, best.params.kind(), best.k), (MetricKind::BrayCurtis, Representation::Powed, 6));
    }

    fn fixture() -> (crate::dataset::FingerprintSet, SplitIndices) {
        let city = synthetic_city(&CityConfig {
            n_messages: 30,
            n_basestations: 6,
            seed: 30,
            ..CityConfig::default()
        });
        let split = SplitIndices::new((0..20).collect(), (20..25).collect(), (25..30).collect(), 30).unwrap();
        (city, split)
    }

    #[test]
    fn k_sweep_equals_naive_loop() {
        let (set, split) = fixture();
        let ctx = SweepContext::new(&set, &split, Geodesic::Haversine, 2).unwrap();
        let base = TransformParams::with_defaults(Representation::Powed, -157.0).unwrap();
        let sweep = ctx
            .sweep_k_by_metric(&[MetricKind::BrayCurtis], &[Representation::Powed], &base, KRange::new(1, 3).unwrap())
            .unwrap();
        assert_eq!(sweep.results.len(), 3);
        for (k, r) in (1..=3).zip(&sweep.results) {
            let cfg = EvalConfig {
                params: base,
                metric: MetricKind::BrayCurtis,
                k,
                geodesic: Geodesic::Haversine,
            };
            assert_eq!(r.validation, evaluate(&set, &split, &cfg, Target::Validation).unwrap().stats);
        }
        assert_eq!(sweep.cells.len(), 1);
    }

    #[test]
    fn grid_equals_nested_loop() {
        let (set, split) = fixture();
        let ctx = SweepContext::new(&set, &split, Geodesic::Haversine, 1).unwrap();
        let base = EvalConfig {
            params: TransformParams::with_defaults(Representation::Exponential, -157.0).unwrap(),
            metric: MetricKind::BrayCurtis,
            k: 2,
            geodesic: Geodesic::Haversine,
        };
        let alphas = FloatRange::new(10.0, 14.0, 2.0).unwrap();
        let grid = ctx.sweep_alpha(&base, &alphas, Some(KRange::new(1, 4).unwrap())).unwrap();
        let mut i = 0;
        for a in [10.0, 12.0, 14.0] {
            for k in 1..=4 {
                let cfg = EvalConfig {
                    params: base.params.with_alpha(a).unwrap(),
                    k,
                    ..base
                };
                let r = &grid.results[i];
                assert_eq!(r.cfg, cfg);
                assert_eq!(r.validation, evaluate(&set, &split, &cfg, Target::Validation).unwrap().stats);
                i += 1;
            }
        }
        assert_eq!(i, grid.results.len());
        assert!(grid.results.iter().all(|r| r.validation.mean_m >= grid.best.validation.mean_m));
    }

    #[test]
    fn scans_check_representation_and_k() {
        let (set, split) = fixture();
        let ctx = SweepContext::new(&set, &split, Geodesic::Haversine, 1).unwrap();
        let powed = EvalConfig {
            params: TransformParams::with_defaults(Representation::Powed, -157.0).unwrap(),
            metric: MetricKind::BrayCurtis,
            k: 3,
            geodesic: Geodesic::Haversine,
        };
        let r = FloatRange::new(10.0, 12.0, 1.0).unwrap();
        assert!(matches!(ctx.sweep_alpha(&powed, &r, None), Err(EvalError::Grid(_))));
        let e = EvalConfig {
            params: powed.params.with_kind(Representation::Exponential),
            ..powed
        };
        assert!(matches!(ctx.sweep_beta(&e, &r, None), Err(EvalError::Grid(_))));
        assert!(matches!(
            ctx.sweep_beta(&powed, &r, Some(KRange::new(1, 21).unwrap())),
            Err(EvalError::Grid(_))
        ));
    }

    #[test]
    fn tau_curve_flat_when_clamp_inactive() {
        // every message received everywhere, all values >= -120 dBm
        let set = synthetic_city(&CityConfig {
            n_messages: 40,
            n_basestations: 5,
            seed: 4,
            min_rssi: -120.0,
            coverage_floor: None,
            ..CityConfig::default()
        });
        assert!(set.received_values().count() == 40 * 5);
        let split = SplitIndices::new((0..28).collect(), (28..34).collect(), (34..40).collect(), 40).unwrap();
        let ctx = SweepContext::new(&set, &split, Geodesic::Haversine, 1).unwrap();
        let base = EvalConfig {
            params: TransformParams::with_defaults(Representation::Exponential, -157.0).unwrap(),
            metric: MetricKind::BrayCurtis,
            k: 3,
            geodesic: Geodesic::Haversine,
        };
        let scan = ctx.sweep_tau(&base, &FloatRange::new(-200.0, -121.0, 1.0).unwrap()).unwrap();
        assert_eq!(scan.results.len(), 80);
        let first = scan.results[0].validation;
        assert!(scan.results.iter().all(|r| r.validation == first));
        assert_eq!(scan.best.cfg.params.tau(), -200.0);
    }
}
