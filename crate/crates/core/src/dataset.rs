//! Fingerprint ingestion, train/validation/test splits and training-only
//! statistics.

use crate::geo::GeoPoint;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{Read, Write};
use thiserror::Error;

/// RSSI value recorded when a basestation did not receive a message.
pub const DEFAULT_SENTINEL: f64 = -200.0;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },
    #[error("missing column '{0}'")]
    MissingColumn(String),
    #[error("dataset contains no messages")]
    EmptyDataset,
    #[error("bad split ratios: {0}")]
    BadRatios(String),
    #[error("split index {0} out of range")]
    IndexOutOfRange(usize),
    #[error("split index {0} assigned more than once")]
    DuplicateIndex(usize),
    #[error("split subset '{0}' is empty")]
    EmptySubset(&'static str),
    #[error("no received RSSI values in the training rows")]
    NoReceivedValues,
    #[error("histogram bin width must be positive, got {0}")]
    BadBinWidth(f64),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Which CSV columns hold the RSSI vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RssiColumns {
    /// Every column whose (normalized) header starts with the prefix, in file order.
    Prefix(String),
    /// Exactly these columns, in this order.
    Named(Vec<String>),
}

/// Column mapping for the fingerprint CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub latitude: String,
    pub longitude: String,
    pub rssi: RssiColumns,
    pub sentinel: f64,
}

impl Default for Schema {
    /// Layout of the public Antwerp Sigfox CSV: `BS 1` … `BS 84` followed by
    /// metadata columns including `Latitude` and `Longitude`.
    fn default() -> Self {
        Self {
            latitude: "Latitude".into(),
            longitude: "Longitude".into(),
            rssi: RssiColumns::Prefix("BS ".into()),
            sentinel: DEFAULT_SENTINEL,
        }
    }
}

/// Headers are compared after trimming whitespace and surrounding quotes,
/// since some exports wrap names in apostrophes.
fn normalize_header(h: &str) -> &str {
    h.trim().trim_matches(|c| c == '\'' || c == '"').trim()
}

/// Read access to fingerprint rows.
///
/// Everything that fits a model is generic over this trait so that the
/// rows it touches can be audited.
pub trait FingerprintSource: Sync {
    fn n_rows(&self) -> usize;
    fn n_basestations(&self) -> usize;
    fn sentinel(&self) -> f64;
    fn rssi_row(&self, row: usize) -> &[f64];
    fn position(&self, row: usize) -> GeoPoint;
}

/// N messages, each an RSSI vector over B basestations plus a ground-truth
/// position. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct FingerprintSet {
    rssi: Vec<f64>,
    positions: Vec<GeoPoint>,
    basestation_ids: Vec<String>,
    sentinel: f64,
}

impl FingerprintSet {
    /// `rssi` is row-major with one row per position.
    pub fn new(
        rssi: Vec<f64>,
        positions: Vec<GeoPoint>,
        basestation_ids: Vec<String>,
        sentinel: f64,
    ) -> Result<Self, DatasetError> {
        let (n, b) = (positions.len(), basestation_ids.len());
        if n == 0 {
            return Err(DatasetError::EmptyDataset);
        }
        if b == 0 {
            return Err(DatasetError::MissingColumn("<rssi columns>".into()));
        }
        if rssi.len() != n * b {
            return Err(DatasetError::MalformedRow {
                row: rssi.len() / b + 1,
                reason: format!("expected {} RSSI values, got {}", n * b, rssi.len()),
            });
        }
        for (row, values) in rssi.chunks(b).enumerate() {
            for (col, &v) in values.iter().enumerate() {
                check_rssi(v, sentinel).map_err(|reason| DatasetError::MalformedRow {
                    row: row + 1,
                    reason: format!("{}: {reason}", basestation_ids[col]),
                })?;
            }
        }
        Ok(Self {
            rssi,
            positions,
            basestation_ids,
            sentinel,
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn basestation_ids(&self) -> &[String] {
        &self.basestation_ids
    }

    pub fn positions(&self) -> &[GeoPoint] {
        &self.positions
    }

    /// All non-sentinel RSSI values, row-major.
    pub fn received_values(&self) -> impl Iterator<Item = f64> + '_ {
        let s = self.sentinel;
        self.rssi.iter().copied().filter(move |&v| v != s)
    }

    /// Copy of the given rows, in the given order.
    pub fn subset(&self, rows: &[usize]) -> Self {
        let b = self.n_basestations();
        let mut rssi = Vec::with_capacity(rows.len() * b);
        let mut positions = Vec::with_capacity(rows.len());
        for &r in rows {
            rssi.extend_from_slice(self.rssi_row(r));
            positions.push(self.positions[r]);
        }
        Self {
            rssi,
            positions,
            basestation_ids: self.basestation_ids.clone(),
            sentinel: self.sentinel,
        }
    }
}

impl FingerprintSource for FingerprintSet {
    fn n_rows(&self) -> usize {
        self.positions.len()
    }

    fn n_basestations(&self) -> usize {
        self.basestation_ids.len()
    }

    fn sentinel(&self) -> f64 {
        self.sentinel
    }

    fn rssi_row(&self, row: usize) -> &[f64] {
        let b = self.basestation_ids.len();
        &self.rssi[row * b..(row + 1) * b]
    }

    fn position(&self, row: usize) -> GeoPoint {
        self.positions[row]
    }
}

fn check_rssi(v: f64, sentinel: f64) -> Result<(), String> {
    if !v.is_finite() {
        return Err(format!("non-finite RSSI {v}"));
    }
    if v > 0.0 {
        return Err(format!("positive RSSI {v} dBm"));
    }
    if v < sentinel {
        return Err(format!("RSSI {v} below the sentinel {sentinel}"));
    }
    Ok(())
}

/// Parses a fingerprint CSV with a header row.
pub fn load_fingerprints<R: Read>(source: R, schema: &Schema) -> Result<FingerprintSet, DatasetError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(source);
    let headers: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| normalize_header(h).to_string())
        .collect();
    let find = |name: &str| -> Result<usize, DatasetError> {
        let name = normalize_header(name);
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DatasetError::MissingColumn(name.to_string()))
    };
    let lat_col = find(&schema.latitude)?;
    let lon_col = find(&schema.longitude)?;
    let rssi_cols: Vec<usize> = match &schema.rssi {
        RssiColumns::Prefix(prefix) => {
            let cols: Vec<usize> = headers
                .iter()
                .enumerate()
                .filter(|(_, h)| h.starts_with(prefix.as_str()))
                .map(|(i, _)| i)
                .collect();
            if cols.is_empty() {
                return Err(DatasetError::MissingColumn(format!("{prefix}*")));
            }
            cols
        }
        RssiColumns::Named(names) => names.iter().map(|n| find(n)).collect::<Result<_, _>>()?,
    };
    if rssi_cols.is_empty() {
        return Err(DatasetError::MissingColumn("<rssi columns>".into()));
    }
    let basestation_ids: Vec<String> = rssi_cols.iter().map(|&c| headers[c].clone()).collect();

    let mut rssi = Vec::new();
    let mut positions = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record?;
        let field = |col: usize| record.get(col).unwrap_or("").trim();
        let parse = |col: usize, what: &str| -> Result<f64, DatasetError> {
            let raw = field(col);
            raw.parse::<f64>().map_err(|_| DatasetError::MalformedRow {
                row,
                reason: format!("unparsable {what} '{raw}'"),
            })
        };
        let lat = parse(lat_col, "latitude")?;
        let lon = parse(lon_col, "longitude")?;
        let pos = GeoPoint::new(lat, lon).map_err(|e| DatasetError::MalformedRow {
            row,
            reason: e.to_string(),
        })?;
        for &c in &rssi_cols {
            let v = parse(c, &headers[c])?;
            check_rssi(v, schema.sentinel).map_err(|reason| DatasetError::MalformedRow { row, reason })?;
            rssi.push(v);
        }
        positions.push(pos);
    }
    if positions.is_empty() {
        return Err(DatasetError::EmptyDataset);
    }
    Ok(FingerprintSet {
        rssi,
        positions,
        basestation_ids,
        sentinel: schema.sentinel,
    })
}

/// Writes the set in a layout that [`load_fingerprints`] reads back with
/// [`write_schema`].
pub fn write_fingerprints<W: Write>(set: &FingerprintSet, sink: W) -> Result<(), DatasetError> {
    let mut w = csv::Writer::from_writer(sink);
    let mut header: Vec<&str> = set.basestation_ids.iter().map(String::as_str).collect();
    header.extend(["Latitude", "Longitude"]);
    w.write_record(&header)?;
    for row in 0..set.len() {
        let mut rec: Vec<String> = set.rssi_row(row).iter().map(|v| v.to_string()).collect();
        rec.push(set.positions[row].lat().to_string());
        rec.push(set.positions[row].lon().to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Schema matching the output of [`write_fingerprints`] for this set.
pub fn write_schema(set: &FingerprintSet) -> Schema {
    Schema {
        latitude: "Latitude".into(),
        longitude: "Longitude".into(),
        rssi: RssiColumns::Named(set.basestation_ids.clone()),
        sentinel: set.sentinel,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subset {
    Train,
    Validation,
    Test,
}

impl Subset {
    pub fn name(self) -> &'static str {
        match self {
            Subset::Train => "train",
            Subset::Validation => "validation",
            Subset::Test => "test",
        }
    }

    fn parse(label: &str) -> Option<Self> {
        match label.trim().to_ascii_lowercase().as_str() {
            "train" | "training" => Some(Subset::Train),
            "validation" | "val" | "valid" => Some(Subset::Validation),
            "test" | "testing" => Some(Subset::Test),
            _ => None,
        }
    }
}

/// Disjoint train/validation/test row indices, each subset in ascending
/// order so that a split compares equal however it was produced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    train: Vec<usize>,
    validation: Vec<usize>,
    test: Vec<usize>,
}

impl SplitIndices {
    /// Validates disjointness, range and non-emptiness against a set of `n` rows.
    pub fn new(
        mut train: Vec<usize>,
        mut validation: Vec<usize>,
        mut test: Vec<usize>,
        n: usize,
    ) -> Result<Self, DatasetError> {
        let mut seen = vec![false; n];
        for &i in train.iter().chain(&validation).chain(&test) {
            if i >= n {
                return Err(DatasetError::IndexOutOfRange(i));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(DatasetError::DuplicateIndex(i));
            }
        }
        for (subset, rows) in [
            (Subset::Train, &train),
            (Subset::Validation, &validation),
            (Subset::Test, &test),
        ] {
            if rows.is_empty() {
                return Err(DatasetError::EmptySubset(subset.name()));
            }
        }
        train.sort_unstable();
        validation.sort_unstable();
        test.sort_unstable();
        Ok(Self {
            train,
            validation,
            test,
        })
    }

    pub fn train(&self) -> &[usize] {
        &self.train
    }

    pub fn validation(&self) -> &[usize] {
        &self.validation
    }

    pub fn test(&self) -> &[usize] {
        &self.test
    }

    pub fn rows(&self, subset: Subset) -> &[usize] {
        match subset {
            Subset::Train => &self.train,
            Subset::Validation => &self.validation,
            Subset::Test => &self.test,
        }
    }

    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.train.len(), self.validation.len(), self.test.len())
    }
}

/// Subset size for `n` rows at `ratio`: ceil(n·ratio), with a small guard
/// so that products that are integers up to rounding are not bumped.
fn subset_size(n: usize, ratio: f64) -> usize {
    ((n as f64) * ratio - 1e-9).ceil().max(0.0) as usize
}

/// Seeded shuffle of `0..n` cut into train, validation and test. Validation
/// and test get ceil(n·ratio) rows each; train gets the remainder.
pub fn make_split(n: usize, ratios: (f64, f64, f64), seed: u64) -> Result<SplitIndices, DatasetError> {
    let (tr, va, te) = ratios;
    if !(tr > 0.0 && va > 0.0 && te > 0.0) || [tr, va, te].iter().any(|r| !r.is_finite()) {
        return Err(DatasetError::BadRatios(format!("ratios must be positive, got {tr}, {va}, {te}")));
    }
    if (tr + va + te - 1.0).abs() > 1e-9 {
        return Err(DatasetError::BadRatios(format!(
            "ratios must sum to 1, got {}",
            tr + va + te
        )));
    }
    let n_val = subset_size(n, va);
    let n_test = subset_size(n, te);
    if n_val + n_test >= n {
        return Err(DatasetError::BadRatios(format!("{n} rows leave no training rows")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = n - n_val - n_test;
    let test = order.split_off(n_train + n_val);
    let validation = order.split_off(n_train);
    SplitIndices::new(order, validation, test, n)
}

/// Reads an `index,subset` split file.
pub fn load_split<R: Read>(source: R, n: usize) -> Result<SplitIndices, DatasetError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(source);
    let headers: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| normalize_header(h).to_ascii_lowercase())
        .collect();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DatasetError::MissingColumn(name.into()))
    };
    let (idx_col, subset_col) = (col("index")?, col("subset")?);
    let mut parts: [Vec<usize>; 3] = Default::default();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record?;
        let raw_idx = record.get(idx_col).unwrap_or("").trim();
        let index: usize = raw_idx.parse().map_err(|_| DatasetError::MalformedRow {
            row,
            reason: format!("unparsable index '{raw_idx}'"),
        })?;
        let label = record.get(subset_col).unwrap_or("");
        let subset = Subset::parse(label).ok_or_else(|| DatasetError::MalformedRow {
            row,
            reason: format!("unknown subset '{label}'"),
        })?;
        parts[subset as usize].push(index);
    }
    let [train, validation, test] = parts;
    SplitIndices::new(train, validation, test, n)
}

/// Writes the split as `index,subset`, ordered by index.
pub fn write_split<W: Write>(split: &SplitIndices, sink: W) -> Result<(), DatasetError> {
    let mut by_index = BTreeMap::new();
    for subset in [Subset::Train, Subset::Validation, Subset::Test] {
        for &i in split.rows(subset) {
            by_index.insert(i, subset);
        }
    }
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["index", "subset"])?;
    for (i, subset) in by_index {
        w.write_record([i.to_string().as_str(), subset.name()])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a "wide" split layout: one column per subset (headers containing
/// `train`, `val` and `test`), each cell a row index or blank. Columns can
/// have different lengths.
///
/// If `n` is `None` the range check uses the largest index seen.
pub fn load_wide_split<R: Read>(source: R, n: Option<usize>) -> Result<SplitIndices, DatasetError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(source);
    let headers: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| normalize_header(h).to_ascii_lowercase())
        .collect();
    let col = |key: &str, name: &'static str| {
        headers
            .iter()
            .position(|h| h.contains(key))
            .ok_or_else(|| DatasetError::MissingColumn(name.into()))
    };
    let cols = [
        col("train", "train")?,
        col("val", "validation")?,
        col("test", "test")?,
    ];
    let mut parts: [Vec<usize>; 3] = Default::default();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record?;
        for (part, &c) in parts.iter_mut().zip(&cols) {
            let raw = record.get(c).unwrap_or("").trim();
            if raw.is_empty() {
                continue;
            }
            // tolerate float-formatted indices like "17.0" from dataframe exports
            let value: f64 = raw.parse().map_err(|_| DatasetError::MalformedRow {
                row,
                reason: format!("unparsable index '{raw}'"),
            })?;
            if value < 0.0 || value.fract() != 0.0 {
                return Err(DatasetError::MalformedRow {
                    row,
                    reason: format!("index '{raw}' is not a non-negative integer"),
                });
            }
            part.push(value as usize);
        }
    }
    let [train, validation, test] = parts;
    let n = n.unwrap_or_else(|| {
        train
            .iter()
            .chain(&validation)
            .chain(&test)
            .max()
            .map_or(0, |m| m + 1)
    });
    SplitIndices::new(train, validation, test, n)
}

/// Minimum received RSSI over the training rows, minus one dBm.
///
/// Reads training rows only.
pub fn training_floor<S: FingerprintSource + ?Sized>(
    set: &S,
    split: &SplitIndices,
) -> Result<f64, DatasetError> {
    let sentinel = set.sentinel();
    split
        .train()
        .iter()
        .flat_map(|&r| set.rssi_row(r).iter().copied())
        .filter(|&v| v != sentinel)
        .min_by(f64::total_cmp)
        .map(|m| m - 1.0)
        .ok_or(DatasetError::NoReceivedValues)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistogramBin {
    pub bin_low: f64,
    pub bin_high: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetStats {
    pub n_messages: usize,
    pub n_basestations: usize,
    pub n_received: usize,
    pub min_received: Option<f64>,
    pub max_received: Option<f64>,
    /// Contiguous bins `[low, high)` aligned to multiples of the bin width.
    pub histogram: Vec<HistogramBin>,
}

impl DatasetStats {
    pub fn write_histogram<W: Write>(&self, sink: W) -> Result<(), DatasetError> {
        let mut w = csv::Writer::from_writer(sink);
        for bin in &self.histogram {
            w.serialize(bin)?;
        }
        if self.histogram.is_empty() {
            w.write_record(["bin_low", "bin_high", "count"])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Summary and histogram of the received (non-sentinel) RSSI values.
pub fn stats(set: &FingerprintSet, bin_width: f64) -> Result<DatasetStats, DatasetError> {
    if !(bin_width > 0.0 && bin_width.is_finite()) {
        return Err(DatasetError::BadBinWidth(bin_width));
    }
    let mut min = None::<f64>;
    let mut max = None::<f64>;
    let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
    let mut n_received = 0;
    for v in set.received_values() {
        n_received += 1;
        min = Some(min.map_or(v, |m| m.min(v)));
        max = Some(max.map_or(v, |m| m.max(v)));
        *counts.entry((v / bin_width).floor() as i64).or_default() += 1;
    }
    let histogram = match (counts.keys().next(), counts.keys().next_back()) {
        (Some(&lo), Some(&hi)) => (lo..=hi)
            .map(|b| HistogramBin {
                bin_low: b as f64 * bin_width,
                bin_high: (b + 1) as f64 * bin_width,
                count: counts.get(&b).copied().unwrap_or(0),
            })
            .collect(),
        _ => Vec::new(),
    };
    Ok(DatasetStats {
        n_messages: set.len(),
        n_basestations: set.n_basestations(),
        n_received,
        min_received: min,
        max_received: max,
        histogram,
    })
}
