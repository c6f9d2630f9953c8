//! Run configuration: a flat TOML file overlaid by command-line flags.

use crate::error::CliError;
use clap::{Args, ValueEnum};
use rff_core::dataset::{
    load_fingerprints, load_split, load_wide_split, make_split, training_floor, FingerprintSet, RssiColumns,
    Schema, SplitIndices, DEFAULT_SENTINEL,
};
use rff_core::sweep::{FloatRange, KRange, SweepGrid};
use rff_core::transform::{Representation, TransformParams, DEFAULT_ALPHA, DEFAULT_BETA};
use rff_core::{EvalConfig, Geodesic, MetricKind};
use serde::Deserialize;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

pub const DATASET_FILE: &str = "sigfox_dataset_antwerp.csv";
pub const SPLIT_FILE: &str = "split.csv";
pub const DEFAULT_RATIOS: [f64; 3] = [0.7, 0.15, 0.15];

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Axis {
    KMetric,
    Tau,
    Alpha,
    Beta,
    AlphaK,
    BetaK,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::KMetric => "k-metric",
            Axis::Tau => "tau",
            Axis::Alpha => "alpha",
            Axis::Beta => "beta",
            Axis::AlphaK => "alpha-k",
            Axis::BetaK => "beta-k",
        }
    }
}

/// Threshold value, or the training minimum minus one dBm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TauSpec {
    Value(f64),
    TrainFloor,
}

impl FromStr for TauSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "train-floor" => Ok(TauSpec::TrainFloor),
            v => v
                .parse()
                .map(TauSpec::Value)
                .map_err(|_| format!("tau must be a number or 'train-floor', got '{s}'")),
        }
    }
}

impl fmt::Display for TauSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TauSpec::Value(v) => write!(f, "{v}"),
            TauSpec::TrainFloor => f.write_str("train-floor"),
        }
    }
}

impl<'de> Deserialize<'de> for TauSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(TauSpec::Value(v)),
            Raw::Str(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Contents of a `.cfg` file. Every key is optional.
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub dataset: Option<PathBuf>,
    pub latitude_column: Option<String>,
    pub longitude_column: Option<String>,
    pub rssi_prefix: Option<String>,
    pub sentinel: Option<f64>,
    pub split: Option<PathBuf>,
    pub ratios: Option<[f64; 3]>,
    pub seed: Option<u64>,
    pub representation: Option<Representation>,
    pub metric: Option<MetricKind>,
    pub k: Option<usize>,
    pub tau: Option<TauSpec>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub scale_floor: Option<f64>,
    pub geodesic: Option<Geodesic>,
    pub out_dir: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub axis: Option<Axis>,
    pub metrics: Option<Vec<MetricKind>>,
    pub representations: Option<Vec<Representation>>,
    pub k_min: Option<usize>,
    pub k_max: Option<usize>,
    pub tau_range: Option<[f64; 3]>,
    pub alpha_range: Option<[f64; 3]>,
    pub beta_range: Option<[f64; 3]>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::io(path, e))
    }
}

fn parse_range(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [a, b, c] = parts[..] else {
        return Err(format!("expected start:end:step, got '{s}'"));
    };
    let num = |x: &str| x.trim().parse::<f64>().map_err(|_| format!("bad number '{x}' in '{s}'"));
    Ok([num(a)?, num(b)?, num(c)?])
}

/// Dataset, schema and split flags.
#[derive(Debug, Default, Clone, Args)]
pub struct DataArgs {
    /// Run-config file (flat TOML); flags override its values.
    #[arg(long, short = 'c')]
    pub config: Option<PathBuf>,
    /// Fingerprint CSV [default: $RFF_DATA_DIR/sigfox_dataset_antwerp.csv].
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub latitude_column: Option<String>,
    #[arg(long)]
    pub longitude_column: Option<String>,
    /// Header prefix of the RSSI columns.
    #[arg(long)]
    pub rssi_prefix: Option<String>,
    /// Value marking "not received".
    #[arg(long, allow_hyphen_values = true)]
    pub sentinel: Option<f64>,
    /// Split file [default: $RFF_DATA_DIR/split.csv].
    #[arg(long, conflicts_with = "ratios")]
    pub split: Option<PathBuf>,
    /// Generate the split from train,validation,test ratios instead of reading one.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub ratios: Option<Vec<f64>>,
    /// Seed for a generated split.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for evaluation (0 = one per logical core).
    #[arg(long, short = 'j')]
    pub jobs: Option<usize>,
    /// Directory for output files.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

/// Model and transformation flags.
#[derive(Debug, Default, Clone, Args)]
pub struct ModelArgs {
    #[arg(long)]
    pub representation: Option<Representation>,
    #[arg(long)]
    pub metric: Option<MetricKind>,
    #[arg(long, short = 'k')]
    pub k: Option<usize>,
    /// Missing-value threshold in dBm, or 'train-floor'.
    #[arg(long, allow_hyphen_values = true)]
    pub tau: Option<TauSpec>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Fixed scale denominator floor, decoupled from tau.
    #[arg(long, allow_hyphen_values = true)]
    pub scale_floor: Option<f64>,
    #[arg(long)]
    pub geodesic: Option<Geodesic>,
}

/// Sweep grid flags.
#[derive(Debug, Default, Clone, Args)]
pub struct GridArgs {
    #[arg(long)]
    pub axis: Option<Axis>,
    #[arg(long, value_delimiter = ',')]
    pub metrics: Option<Vec<MetricKind>>,
    #[arg(long, value_delimiter = ',')]
    pub representations: Option<Vec<Representation>>,
    #[arg(long)]
    pub k_min: Option<usize>,
    #[arg(long)]
    pub k_max: Option<usize>,
    /// start:end:step
    #[arg(long, allow_hyphen_values = true, value_parser = parse_range)]
    pub tau_range: Option<[f64; 3]>,
    #[arg(long, value_parser = parse_range)]
    pub alpha_range: Option<[f64; 3]>,
    #[arg(long, value_parser = parse_range)]
    pub beta_range: Option<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SplitSource {
    File(PathBuf),
    Generate { ratios: [f64; 3], seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub kind: Representation,
    pub metric: MetricKind,
    pub k: usize,
    pub tau: TauSpec,
    pub alpha: f64,
    pub beta: f64,
    pub scale_floor: Option<f64>,
    pub geodesic: Geodesic,
}

impl ModelSpec {
    pub fn eval_config(&self, tau: f64) -> Result<EvalConfig, CliError> {
        let mut params = TransformParams::new(self.kind, tau, self.alpha, self.beta)?;
        if let Some(floor) = self.scale_floor {
            params = params.with_scale_floor(floor)?;
        }
        Ok(EvalConfig {
            params,
            metric: self.metric,
            k: self.k,
            geodesic: self.geodesic,
        })
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub dataset: PathBuf,
    pub schema: Schema,
    pub split: Result<SplitSource, String>,
    pub model: ModelSpec,
    pub grid: SweepGrid,
    pub axis: Option<Axis>,
    pub out_dir: PathBuf,
    pub jobs: usize,
}

fn data_dir() -> Option<PathBuf> {
    std::env::var_os("RFF_DATA_DIR").filter(|v| !v.is_empty()).map(PathBuf::from)
}

/// Relative paths that do not exist as given are looked up in `$RFF_DATA_DIR`.
fn locate(path: PathBuf) -> PathBuf {
    match data_dir() {
        Some(dir) if path.is_relative() && !path.exists() => dir.join(path),
        _ => path,
    }
}

fn range(r: [f64; 3]) -> FloatRange {
    FloatRange {
        start: r[0],
        end: r[1],
        step: r[2],
    }
}

impl RunConfig {
    pub fn resolve(data: &DataArgs, model: &ModelArgs, grid: &GridArgs) -> Result<Self, CliError> {
        let file = match &data.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        let dataset = data
            .data
            .clone()
            .or(file.dataset)
            .map(locate)
            .unwrap_or_else(|| data_dir().unwrap_or_default().join(DATASET_FILE));
        let schema = Schema {
            latitude: data.latitude_column.clone().or(file.latitude_column).unwrap_or_else(|| "Latitude".into()),
            longitude: data.longitude_column.clone().or(file.longitude_column).unwrap_or_else(|| "Longitude".into()),
            rssi: RssiColumns::Prefix(data.rssi_prefix.clone().or(file.rssi_prefix).unwrap_or_else(|| "BS ".into())),
            sentinel: data.sentinel.or(file.sentinel).unwrap_or(DEFAULT_SENTINEL),
        };

        let flag_ratios = match &data.ratios {
            Some(r) => Some(<[f64; 3]>::try_from(r.as_slice()).map_err(|_| CliError::input("--ratios needs three values"))?),
            None => None,
        };
        let seed = data.seed.or(file.seed).unwrap_or(0);
        let pick = |split: Option<PathBuf>, ratios: Option<[f64; 3]>, seeded: bool| match (split, ratios) {
            (Some(_), Some(_)) => Some(Err("give exactly one split source: a split file or ratios".to_string())),
            (Some(p), None) => Some(Ok(SplitSource::File(locate(p)))),
            (None, Some(ratios)) => Some(Ok(SplitSource::Generate { ratios, seed })),
            (None, None) if seeded => Some(Ok(SplitSource::Generate {
                ratios: DEFAULT_RATIOS,
                seed,
            })),
            (None, None) => None,
        };
        let split = pick(data.split.clone(), flag_ratios, data.seed.is_some())
            .or_else(|| pick(file.split, file.ratios, file.seed.is_some()))
            .unwrap_or_else(|| match data_dir() {
                Some(dir) => Ok(SplitSource::File(dir.join(SPLIT_FILE))),
                None => Err("no split source: pass --split FILE or --ratios/--seed, or set RFF_DATA_DIR".into()),
            });

        let model = ModelSpec {
            kind: model.representation.or(file.representation).unwrap_or(Representation::Powed),
            metric: model.metric.or(file.metric).unwrap_or(MetricKind::BrayCurtis),
            k: model.k.or(file.k).unwrap_or(6),
            tau: model.tau.or(file.tau).unwrap_or(TauSpec::Value(DEFAULT_SENTINEL)),
            alpha: model.alpha.or(file.alpha).unwrap_or(DEFAULT_ALPHA),
            beta: model.beta.or(file.beta).unwrap_or(DEFAULT_BETA),
            scale_floor: model.scale_floor.or(file.scale_floor),
            geodesic: model.geodesic.or(file.geodesic).unwrap_or_default(),
        };

        let defaults = SweepGrid::default();
        let sweep = SweepGrid {
            metrics: grid.metrics.clone().or(file.metrics).unwrap_or(defaults.metrics),
            representations: grid
                .representations
                .clone()
                .or(file.representations)
                .unwrap_or(defaults.representations),
            k_range: KRange {
                min: grid.k_min.or(file.k_min).unwrap_or(defaults.k_range.min),
                max: grid.k_max.or(file.k_max).unwrap_or(defaults.k_range.max),
            },
            tau_range: grid.tau_range.or(file.tau_range).map(range).unwrap_or(defaults.tau_range),
            alpha_range: grid.alpha_range.or(file.alpha_range).map(range).unwrap_or(defaults.alpha_range),
            beta_range: grid.beta_range.or(file.beta_range).map(range).unwrap_or(defaults.beta_range),
        };
        sweep.validate()?;

        Ok(Self {
            dataset,
            schema,
            split,
            model,
            grid: sweep,
            axis: grid.axis.or(file.axis),
            out_dir: data.out_dir.clone().or(file.out_dir).unwrap_or_else(|| "results".into()),
            jobs: data.jobs.or(file.jobs).unwrap_or(0),
        })
    }

    pub fn load_dataset(&self) -> Result<FingerprintSet, CliError> {
        let f = std::fs::File::open(&self.dataset).map_err(|e| CliError::io(&self.dataset, e))?;
        load_fingerprints(std::io::BufReader::new(f), &self.schema)
            .map_err(|e| CliError::input(format!("{}: {e}", self.dataset.display())))
    }

    pub fn load_split(&self, n: usize) -> Result<SplitIndices, CliError> {
        match self.split.clone().map_err(CliError::Input)? {
            SplitSource::File(path) => read_split_file(&path, Some(n)),
            SplitSource::Generate { ratios, seed } => Ok(make_split(n, (ratios[0], ratios[1], ratios[2]), seed)?),
        }
    }

    /// Dataset, split and the resolved evaluation config.
    pub fn load(&self) -> Result<(FingerprintSet, SplitIndices, EvalConfig), CliError> {
        let set = self.load_dataset()?;
        let split = self.load_split(set.len())?;
        let tau = match self.model.tau {
            TauSpec::Value(v) => v,
            TauSpec::TrainFloor => training_floor(&set, &split)?,
        };
        let cfg = self.model.eval_config(tau)?;
        Ok((set, split, cfg))
    }

    pub fn create_out_dir(&self) -> Result<&Path, CliError> {
        std::fs::create_dir_all(&self.out_dir).map_err(|e| CliError::io(&self.out_dir, e))?;
        Ok(&self.out_dir)
    }
}

/// Reads a split in the `index,subset` layout, or the wide per-subset
/// layout of the published split file.
pub fn read_split_file(path: &Path, n: Option<usize>) -> Result<SplitIndices, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let parsed = match (text.trim_start().starts_with("index,subset"), n) {
        (true, Some(n)) => load_split(text.as_bytes(), n),
        (true, None) => {
            let max = text
                .lines()
                .skip(1)
                .filter_map(|l| l.split(',').next()?.trim().parse::<usize>().ok())
                .max()
                .unwrap_or(0);
            load_split(text.as_bytes(), max + 1)
        }
        (false, n) => load_wide_split(text.as_bytes(), n),
    };
    parsed.map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resolve(data: DataArgs, model: ModelArgs, grid: GridArgs) -> RunConfig {
        RunConfig::resolve(&data, &model, &grid).unwrap()
    }

    #[test]
    fn tau_spec_parses() {
        assert_eq!("train-floor".parse::<TauSpec>().unwrap(), TauSpec::TrainFloor);
        assert_eq!("-157".parse::<TauSpec>().unwrap(), TauSpec::Value(-157.0));
        assert!("floor".parse::<TauSpec>().is_err());
        let f: FileConfig = toml::from_str("tau = -157").unwrap();
        assert_eq!(f.tau, Some(TauSpec::Value(-157.0)));
        let f: FileConfig = toml::from_str("tau = \"train-floor\"").unwrap();
        assert_eq!(f.tau, Some(TauSpec::TrainFloor));
    }

    #[test]
    fn ranges_parse() {
        assert_eq!(parse_range("-200:-130:1").unwrap(), [-200.0, -130.0, 1.0]);
        assert!(parse_range("1:2").is_err());
        assert!(parse_range("a:2:3").is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<FileConfig>("kk = 3").is_err());
        assert!(toml::from_str::<FileConfig>("metric = \"cosine\"").is_err());
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(
            &path,
            "metric = \"canberra\"\nk = 3\ntau = -157\nratios = [0.8, 0.1, 0.1]\naxis = \"beta-k\"\nbeta_range = [2.0, 2.5, 0.1]\n",
        )
        .unwrap();
        let data = DataArgs {
            config: Some(path),
            ..Default::default()
        };
        let model = ModelArgs {
            k: Some(9),
            ..Default::default()
        };
        let cfg = resolve(data, model, GridArgs::default());
        assert_eq!(cfg.model.metric, MetricKind::Canberra);
        assert_eq!(cfg.model.k, 9);
        assert_eq!(cfg.model.tau, TauSpec::Value(-157.0));
        assert_eq!(cfg.axis, Some(Axis::BetaK));
        assert_eq!(cfg.grid.beta_range.values().len(), 6);
        assert_eq!(
            cfg.split,
            Ok(SplitSource::Generate {
                ratios: [0.8, 0.1, 0.1],
                seed: 0
            })
        );
    }

    #[test]
    fn split_source_is_exclusive() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "split = \"s.csv\"\nratios = [0.7, 0.15, 0.15]\n").unwrap();
        let cfg = resolve(
            DataArgs {
                config: Some(path.clone()),
                ..Default::default()
            },
            ModelArgs::default(),
            GridArgs::default(),
        );
        assert!(cfg.split.is_err());
        // a flag-level source replaces the file-level ones
        let cfg = resolve(
            DataArgs {
                config: Some(path),
                seed: Some(4),
                ..Default::default()
            },
            ModelArgs::default(),
            GridArgs::default(),
        );
        assert_eq!(
            cfg.split,
            Ok(SplitSource::Generate {
                ratios: DEFAULT_RATIOS,
                seed: 4
            })
        );
    }

    #[test]
    fn invalid_grid_rejected() {
        let grid = GridArgs {
            k_min: Some(5),
            k_max: Some(2),
            ..Default::default()
        };
        assert!(RunConfig::resolve(&DataArgs::default(), &ModelArgs::default(), &grid).is_err());
    }
}
