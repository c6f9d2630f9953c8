//! Brute-force kNN position estimation.

use crate::dataset::FingerprintSource;
use crate::geo::GeoPoint;
use crate::transform::{transform_set, Representation, TransformParams, TransformedMatrix};
use crate::vecmetric::{DimensionMismatch, MetricKind};
use rayon::prelude::*;
use std::cmp::Ordering;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimatorError {
    #[error("k must be in [1, {n_reference}], got {k}")]
    BadK { k: usize, n_reference: usize },
    #[error("{rows} reference rows but {positions} positions")]
    PositionCount { rows: usize, positions: usize },
    #[error(transparent)]
    Dimension(#[from] DimensionMismatch),
}

/// Total order on (distance, reference row): nearer first, then lower row.
#[inline]
fn neighbor_order(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// Parameters whose transformed values neighbors are ranked on.
///
/// Normalized values are positive values divided by one constant, and
/// scale-invariant metrics give the same distances on both in exact
/// arithmetic. Per-element rounding of the division can still split exact
/// ties differently, so for those pairs the ranking uses the positive values.
pub fn ranking_params(params: &TransformParams, metric: MetricKind) -> TransformParams {
    if params.kind() == Representation::Normalized && metric.is_scale_invariant() {
        params.with_kind(Representation::Positive)
    } else {
        *params
    }
}

/// Reference fingerprints with their positions.
#[derive(Debug, Clone)]
pub struct KnnModel {
    reference: TransformedMatrix,
    positions: Vec<GeoPoint>,
    metric: MetricKind,
    k: usize,
}

impl KnnModel {
    pub fn new(
        reference: TransformedMatrix,
        positions: Vec<GeoPoint>,
        metric: MetricKind,
        k: usize,
    ) -> Result<Self, EstimatorError> {
        if reference.n_rows() != positions.len() {
            return Err(EstimatorError::PositionCount {
                rows: reference.n_rows(),
                positions: positions.len(),
            });
        }
        if k == 0 || k > reference.n_rows() {
            return Err(EstimatorError::BadK {
                k,
                n_reference: reference.n_rows(),
            });
        }
        Ok(Self {
            reference,
            positions,
            metric,
            k,
        })
    }

    /// Transforms `rows` of `set` with [`ranking_params`] and uses them as
    /// the reference. Only those rows are read.
    pub fn fit<S: FingerprintSource + ?Sized>(
        set: &S,
        rows: &[usize],
        params: &TransformParams,
        metric: MetricKind,
        k: usize,
    ) -> Result<Self, EstimatorError> {
        let reference = transform_set(set, rows, &ranking_params(params, metric));
        let positions = rows.iter().map(|&r| set.position(r)).collect();
        Self::new(reference, positions, metric, k)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn metric(&self) -> MetricKind {
        self.metric
    }

    /// Parameters of the reference matrix. Queries must use the same ones.
    pub fn params(&self) -> &TransformParams {
        self.reference.params()
    }

    /// Transforms `rows` of `set` to match the reference.
    pub fn transform_queries<S: FingerprintSource + ?Sized>(&self, set: &S, rows: &[usize]) -> TransformedMatrix {
        transform_set(set, rows, self.params())
    }

    pub fn n_reference(&self) -> usize {
        self.reference.n_rows()
    }

    pub fn reference_position(&self, row: usize) -> GeoPoint {
        self.positions[row]
    }

    fn check_width(&self, width: usize) -> Result<(), DimensionMismatch> {
        if width != self.reference.n_cols() {
            return Err(DimensionMismatch {
                left: width,
                right: self.reference.n_cols(),
            });
        }
        Ok(())
    }

    /// Indices of the `k` nearest reference rows, nearest first. Equal
    /// distances are ordered by row index.
    pub fn neighbors(&self, query: &[f64], k: usize) -> Result<Vec<usize>, EstimatorError> {
        self.check_width(query.len())?;
        if k == 0 || k > self.n_reference() {
            return Err(EstimatorError::BadK {
                k,
                n_reference: self.n_reference(),
            });
        }
        let mut dist: Vec<(f64, usize)> = self
            .reference
            .rows()
            .enumerate()
            .map(|(i, row)| (self.metric.eval(query, row), i))
            .collect();
        if k < dist.len() {
            dist.select_nth_unstable_by(k - 1, neighbor_order);
            dist.truncate(k);
        }
        dist.sort_unstable_by(neighbor_order);
        Ok(dist.into_iter().map(|(_, i)| i).collect())
    }

    /// Unweighted mean of the neighbors' latitudes and longitudes, summed in
    /// the order given.
    pub fn centroid(&self, neighbors: &[usize]) -> GeoPoint {
        let (lat, lon) = neighbors.iter().fold((0.0, 0.0), |(la, lo), &i| {
            let p = self.positions[i];
            (la + p.lat(), lo + p.lon())
        });
        let n = neighbors.len() as f64;
        GeoPoint::new_unchecked((lat / n).clamp(-90.0, 90.0), (lon / n).clamp(-180.0, 180.0))
    }

    pub fn predict(&self, query: &[f64]) -> Result<GeoPoint, EstimatorError> {
        let nb = self.neighbors(query, self.k)?;
        Ok(self.centroid(&nb))
    }

    /// Predicts every row of `queries`, in order.
    pub fn predict_batch(&self, queries: &TransformedMatrix) -> Result<Vec<GeoPoint>, EstimatorError> {
        if queries.n_rows() == 0 {
            return Ok(Vec::new());
        }
        self.check_width(queries.n_cols())?;
        let rows: Vec<&[f64]> = queries.rows().collect();
        rows.par_iter().map(|q| self.predict(q)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::FingerprintSet;
    use crate::transform::Representation;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_set(rng: &mut ChaCha8Rng, n: usize, b: usize) -> FingerprintSet {
        let rssi = (0..n * b)
            .map(|_| {
                if rng.gen_bool(0.4) {
                    -200.0
                } else {
                    rng.gen_range(-156..-60) as f64
                }
            })
            .collect();
        let positions = (0..n)
            .map(|_| GeoPoint::new(rng.gen_range(51.15..51.30), rng.gen_range(4.30..4.50)).unwrap())
            .collect();
        FingerprintSet::new(rssi, positions, (0..b).map(|i| i.to_string()).collect(), -200.0).unwrap()
    }

    fn matrix(values: &[&[f64]]) -> TransformedMatrix {
        let set = FingerprintSet::new(
            values.iter().flat_map(|r| r.iter().copied()).collect(),
            vec![GeoPoint::new(0.0, 0.0).unwrap(); values.len()],
            (0..values[0].len()).map(|i| i.to_string()).collect(),
            -200.0,
        )
        .unwrap();
        let rows: Vec<usize> = (0..values.len()).collect();
        transform_set(&set, &rows, &TransformParams::with_defaults(Representation::Positive, -200.0).unwrap())
    }

    #[test]
    fn k_one_returns_nearest_position() {
        let reference = matrix(&[&[-100.0, -120.0], &[-60.0, -90.0]]);
        let pos = vec![GeoPoint::new(51.0, 4.0).unwrap(), GeoPoint::new(51.2, 4.2).unwrap()];
        let model = KnnModel::new(reference.clone(), pos.clone(), MetricKind::Euclidean, 1).unwrap();
        assert_eq!(model.predict(reference.row(1)).unwrap(), pos[1]);
        assert_eq!(model.predict(reference.row(0)).unwrap(), pos[0]);
    }

    #[test]
    fn k_two_is_midpoint() {
        let reference = matrix(&[&[-100.0], &[-60.0]]);
        let pos = vec![GeoPoint::new(51.0, 4.0).unwrap(), GeoPoint::new(51.2, 4.2).unwrap()];
        let model = KnnModel::new(reference, pos, MetricKind::Manhattan, 2).unwrap();
        let p = model.predict(&[120.0]).unwrap();
        assert!((p.lat() - 51.1).abs() < 1e-12 && (p.lon() - 4.1).abs() < 1e-12);
    }

    #[test]
    fn ties_prefer_lower_row() {
        let reference = matrix(&[&[-100.0], &[-80.0], &[-100.0]]);
        let pos = vec![
            GeoPoint::new(1.0, 1.0).unwrap(),
            GeoPoint::new(2.0, 2.0).unwrap(),
            GeoPoint::new(3.0, 3.0).unwrap(),
        ];
        let model = KnnModel::new(reference.clone(), pos, MetricKind::Euclidean, 1).unwrap();
        assert_eq!(model.neighbors(reference.row(2), 2).unwrap(), vec![0, 2]);
        assert_eq!(model.predict(reference.row(2)).unwrap(), GeoPoint::new(1.0, 1.0).unwrap());
    }

    #[test]
    fn construction_errors() {
        let reference = matrix(&[&[-100.0], &[-60.0]]);
        let pos = vec![GeoPoint::new(51.0, 4.0).unwrap()];
        assert!(matches!(
            KnnModel::new(reference.clone(), pos, MetricKind::Euclidean, 1),
            Err(EstimatorError::PositionCount { .. })
        ));
        let pos = vec![GeoPoint::new(51.0, 4.0).unwrap(); 2];
        assert!(matches!(
            KnnModel::new(reference.clone(), pos.clone(), MetricKind::Euclidean, 3),
            Err(EstimatorError::BadK { .. })
        ));
        let model = KnnModel::new(reference, pos, MetricKind::Euclidean, 1).unwrap();
        assert!(matches!(model.predict(&[1.0, 2.0]), Err(EstimatorError::Dimension(_))));
        let wide = matrix(&[&[-1.0, -2.0]]);
        assert!(model.predict_batch(&wide).is_err());
    }

    /// Sorts every distance and averages the first k positions in that order.
    fn oracle(model_rows: &[Vec<f64>], pos: &[GeoPoint], q: &[f64], metric: MetricKind, k: usize) -> GeoPoint {
        let mut all: Vec<(f64, usize)> = model_rows
            .iter()
            .enumerate()
            .map(|(i, r)| (crate::vecmetric::distance(q, r, metric).unwrap(), i))
            .collect();
        all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        let mut lat = 0.0;
        let mut lon = 0.0;
        for &(_, i) in &all[..k] {
            lat += pos[i].lat();
            lon += pos[i].lon();
        }
        GeoPoint::new(lat / k as f64, lon / k as f64).unwrap()
    }

    #[test]
    fn matches_exhaustive_oracle_on_twenty_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let set = random_set(&mut rng, 30, 6);
        let train: Vec<usize> = (0..20).collect();
        let queries: Vec<usize> = (20..30).collect();
        let params = TransformParams::with_defaults(Representation::Powed, -157.0).unwrap();
        let model = KnnModel::fit(&set, &train, &params, MetricKind::BrayCurtis, 5).unwrap();
        let reference = transform_set(&set, &train, &params);
        let rows: Vec<Vec<f64>> = reference.rows().map(<[f64]>::to_vec).collect();
        let q = transform_set(&set, &queries, &params);
        let batch = model.predict_batch(&q).unwrap();
        for (i, query) in q.rows().enumerate() {
            let expected = oracle(&rows, &set.positions()[..20], query, MetricKind::BrayCurtis, 5);
            assert_eq!(model.predict(query).unwrap(), expected);
            assert_eq!(batch[i], expected);
        }
    }

    #[test]
    fn batch_edge_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let set = random_set(&mut rng, 10, 4);
        let params = TransformParams::with_defaults(Representation::Exponential, -157.0).unwrap();
        let model = KnnModel::fit(&set, &[0, 1, 2, 3, 4], &params, MetricKind::Canberra, 2).unwrap();
        let empty = transform_set(&set, &[], &params);
        assert!(model.predict_batch(&empty).unwrap().is_empty());
        let one = transform_set(&set, &[7], &params);
        assert_eq!(model.predict_batch(&one).unwrap(), vec![model.predict(one.row(0)).unwrap()]);
    }

    #[test]
    fn scaling_keeps_euclidean_neighbors() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let set = random_set(&mut rng, 40, 5);
        let train: Vec<usize> = (0..30).collect();
        let pos = |p: &TransformParams| KnnModel::fit(&set, &train, p, MetricKind::Euclidean, 4).unwrap();
        // normalized = positive / 157
        let a = pos(&TransformParams::with_defaults(Representation::Positive, -157.0).unwrap());
        let b = pos(&TransformParams::with_defaults(Representation::Normalized, -157.0).unwrap());
        let qa = transform_set(&set, &[35], a.params());
        let qb = transform_set(&set, &[35], b.params());
        let mut na = a.neighbors(qa.row(0), 4).unwrap();
        let mut nb = b.neighbors(qb.row(0), 4).unwrap();
        na.sort_unstable();
        nb.sort_unstable();
        assert_eq!(na, nb);
    }

    #[test]
    fn prediction_within_training_bbox_and_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let set = random_set(&mut rng, 50, 8);
        let train: Vec<usize> = (0..40).collect();
        let params = TransformParams::with_defaults(Representation::Powed, -157.0).unwrap();
        let model = KnnModel::fit(&set, &train, &params, MetricKind::BrayCurtis, 7).unwrap();
        let (mut lat_lo, mut lat_hi, mut lon_lo, mut lon_hi) = (90.0f64, -90.0f64, 180.0f64, -180.0f64);
        for &r in &train {
            let p = set.position(r);
            lat_lo = lat_lo.min(p.lat());
            lat_hi = lat_hi.max(p.lat());
            lon_lo = lon_lo.min(p.lon());
            lon_hi = lon_hi.max(p.lon());
        }
        let q = transform_set(&set, &(40..50).collect::<Vec<_>>(), &params);
        let first = model.predict_batch(&q).unwrap();
        assert_eq!(first, model.predict_batch(&q).unwrap());
        for p in first {
            assert!(p.lat() >= lat_lo - 1e-12 && p.lat() <= lat_hi + 1e-12);
            assert!(p.lon() >= lon_lo - 1e-12 && p.lon() <= lon_hi + 1e-12);
        }
    }

    #[test]
    fn normalized_ranks_like_positive_for_scale_invariant_metrics() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        // few columns and a narrow value range make exact distance ties common
        let rssi: Vec<f64> = (0..300 * 3)
            .map(|_| if rng.gen_bool(0.5) { -200.0 } else { rng.gen_range(-150..-140) as f64 })
            .collect();
        let positions = (0..300)
            .map(|_| GeoPoint::new(rng.gen_range(51.15..51.30), rng.gen_range(4.30..4.50)).unwrap())
            .collect();
        let set = FingerprintSet::new(rssi, positions, vec!["a".into(), "b".into(), "c".into()], -200.0).unwrap();
        let train: Vec<usize> = (0..250).collect();
        let queries: Vec<usize> = (250..300).collect();
        let pos = TransformParams::with_defaults(Representation::Positive, -200.0).unwrap();
        let norm = pos.with_kind(Representation::Normalized);
        for metric in MetricKind::ALL {
            let a = KnnModel::fit(&set, &train, &pos, metric, 5).unwrap();
            let b = KnnModel::fit(&set, &train, &norm, metric, 5).unwrap();
            let expected = if metric.is_scale_invariant() { Representation::Positive } else { Representation::Normalized };
            assert_eq!(b.params().kind(), expected, "{metric}");
            if metric.is_scale_invariant() {
                let pa = a.predict_batch(&a.transform_queries(&set, &queries)).unwrap();
                let pb = b.predict_batch(&b.transform_queries(&set, &queries)).unwrap();
                assert_eq!(pa, pb, "{metric}");
            }
        }
        assert_eq!(ranking_params(&pos, MetricKind::BrayCurtis), pos);
        let powed = pos.with_kind(Representation::Powed);
        assert_eq!(ranking_params(&powed, MetricKind::BrayCurtis), powed);
    }
}
