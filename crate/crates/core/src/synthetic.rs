//! Synthetic fingerprint sets for tests and demos.
//!
//! Messages are scattered over a box around Antwerp and received by
//! basestations through a log-distance path-loss model with Gaussian
//! shadowing, rounded to whole dBm like the real data.

use crate::dataset::{FingerprintSet, DEFAULT_SENTINEL};
use crate::geo::{haversine_distance, GeoPoint};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

#[derive(Debug, Clone, PartialEq)]
pub struct CityConfig {
    pub n_messages: usize,
    pub n_basestations: usize,
    pub seed: u64,
    /// Received values are clamped to at least this.
    pub min_rssi: f64,
    /// Values below this are recorded as not received; `None` keeps all.
    pub coverage_floor: Option<f64>,
    /// Shadowing standard deviation in dB.
    pub shadowing_db: f64,
}

impl Default for CityConfig {
    fn default() -> Self {
        Self {
            n_messages: 500,
            n_basestations: 12,
            seed: 0,
            min_rssi: -156.0,
            coverage_floor: Some(-156.0),
            shadowing_db: 6.0,
        }
    }
}

const LAT: (f64, f64) = (51.17, 51.27);
const LON: (f64, f64) = (4.33, 4.47);

pub fn synthetic_city(cfg: &CityConfig) -> FingerprintSet {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let shadowing = Normal::new(0.0, cfg.shadowing_db.max(0.0)).expect("finite std dev");
    let stations: Vec<GeoPoint> = (0..cfg.n_basestations)
        .map(|_| {
            GeoPoint::new(rng.gen_range(LAT.0 - 0.1..LAT.1 + 0.1), rng.gen_range(LON.0 - 0.15..LON.1 + 0.15))
                .expect("in range")
        })
        .collect();
    let mut rssi = Vec::with_capacity(cfg.n_messages * cfg.n_basestations);
    let mut positions = Vec::with_capacity(cfg.n_messages);
    for _ in 0..cfg.n_messages {
        let p = GeoPoint::new(rng.gen_range(LAT.0..LAT.1), rng.gen_range(LON.0..LON.1)).expect("in range");
        for &bs in &stations {
            let d_km = (haversine_distance(p, bs) / 1000.0).max(0.05);
            let v = (-95.0 - 35.0 * d_km.log10() + shadowing.sample(&mut rng)).round();
            let received = cfg.coverage_floor.is_none_or(|floor| v >= floor);
            rssi.push(if received { v.clamp(cfg.min_rssi, -40.0) } else { DEFAULT_SENTINEL });
        }
        positions.push(p);
    }
    let ids = (1..=cfg.n_basestations).map(|i| format!("BS {i}")).collect();
    FingerprintSet::new(rssi, positions, ids, DEFAULT_SENTINEL).expect("synthetic data satisfies the set invariants")
}
