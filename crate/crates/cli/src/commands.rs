use crate::config::{read_split_file, Axis, RunConfig, SplitSource, DEFAULT_RATIOS};
use crate::error::CliError;
use crate::svg::{self, Series};
use rff_core::dataset::{self, make_split, write_split};
use rff_core::evaluate::{ResultRow, RESULT_HEADER};
use rff_core::sweep::Scan;
use rff_core::transform::Representation;
use rff_core::{evaluate, SweepContext, SweepResult, Target};
use std::io::Write;
use std::path::{Path, PathBuf};

pub fn write_rows(path: &Path, rows: impl IntoIterator<Item = ResultRow>) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::io(path, e))?;
    w.write_record(RESULT_HEADER)?;
    for r in rows {
        w.write_record(r.fields())?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn stats(cfg: &RunConfig, bin_width: f64, histogram: Option<PathBuf>) -> Result<(), CliError> {
    let set = cfg.load_dataset()?;
    let st = dataset::stats(&set, bin_width)?;
    println!(
        "messages={} basestations={} received={}",
        st.n_messages, st.n_basestations, st.n_received
    );
    let fmt = |v: Option<f64>| v.map_or("none".to_string(), |v| format!("{v:.1}"));
    println!("min_received={} max_received={}", fmt(st.min_received), fmt(st.max_received));
    let path = match histogram {
        Some(p) => p,
        None => cfg.create_out_dir()?.join("histogram.csv"),
    };
    let file = std::fs::File::create(&path).map_err(|e| CliError::io(&path, e))?;
    st.write_histogram(std::io::BufWriter::new(file))?;
    println!("histogram={}", path.display());
    Ok(())
}

pub fn split(cfg: &RunConfig, n: Option<usize>, from_zenodo: Option<&Path>, explicit_data: bool, out: &Path) -> Result<(), CliError> {
    let rows = |explicit: bool| -> Result<Option<usize>, CliError> {
        match n {
            Some(n) => Ok(Some(n)),
            None if explicit => Ok(Some(cfg.load_dataset()?.len())),
            None => Ok(None),
        }
    };
    let split = match from_zenodo {
        Some(path) => read_split_file(path, rows(explicit_data)?)?,
        None => {
            let (ratios, seed) = match &cfg.split {
                Ok(SplitSource::Generate { ratios, seed }) => (*ratios, *seed),
                _ => (DEFAULT_RATIOS, 0),
            };
            let n = rows(true)?.expect("row count is known");
            make_split(n, (ratios[0], ratios[1], ratios[2]), seed)?
        }
    };
    let file = std::fs::File::create(out).map_err(|e| CliError::io(out, e))?;
    write_split(&split, std::io::BufWriter::new(file))?;
    let (a, b, c) = split.sizes();
    println!("train={a} validation={b} test={c} split={}", out.display());
    Ok(())
}

pub const TEST_REFUSAL: &str = "refusing to evaluate on the test set without --final: \
the test set is measured once, for a configuration already chosen on validation";

pub fn eval(cfg: &RunConfig, target: Target, is_final: bool) -> Result<(), CliError> {
    if target == Target::Test && !is_final {
        return Err(CliError::input(TEST_REFUSAL));
    }
    let (set, split, ecfg) = cfg.load()?;
    let result = evaluate(&set, &split, &ecfg, target)?;
    let row = result.row();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let _ = writeln!(out, "{}", RESULT_HEADER.join(","));
    let _ = writeln!(out, "{}", row.fields().join(","));
    let path = cfg.create_out_dir()?.join(format!("eval_{}.csv", target.label()));
    write_rows(&path, [row])?;
    let _ = writeln!(out, "written={}", path.display());
    Ok(())
}

/// Reads the scanned parameter off a result.
type Param = fn(&SweepResult) -> f64;

/// Points of (x, mean) for one curve.
fn curve(results: &[SweepResult], x: impl Fn(&SweepResult) -> f64) -> Vec<(f64, f64)> {
    results.iter().map(|r| (x(r), r.validation.mean_m)).collect()
}

/// Grid `values[k][param]` of mean errors for a (param, k) scan.
fn grid(scan: &Scan, params: &[f64], ks: &[usize], param: impl Fn(&SweepResult) -> f64) -> Result<Vec<Vec<f64>>, CliError> {
    let mut values = vec![vec![f64::NAN; params.len()]; ks.len()];
    for r in &scan.results {
        let i = params.iter().position(|&p| p == param(r));
        let j = ks.iter().position(|&k| k == r.cfg.k);
        match (i, j) {
            (Some(i), Some(j)) => values[j][i] = r.validation.mean_m,
            _ => return Err(CliError::Internal(format!("grid point {} outside the requested grid", r.cfg))),
        }
    }
    if values.iter().flatten().any(|v| v.is_nan()) {
        return Err(CliError::Internal("grid has unevaluated cells".into()));
    }
    Ok(values)
}

fn k_metric_table(path: &Path, reps: &[Representation], cells: &[SweepResult]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::io(path, e))?;
    let mut header = vec!["metric".to_string()];
    for r in reps {
        header.extend([format!("{r}_k"), format!("{r}_mean_m"), format!("{r}_median_m")]);
    }
    w.write_record(&header)?;
    for row in cells.chunks(reps.len()) {
        let mut rec = vec![row[0].cfg.metric.to_string()];
        for c in row {
            rec.extend([
                c.cfg.k.to_string(),
                format!("{:.1}", c.validation.mean_m),
                format!("{:.1}", c.validation.median_m),
            ]);
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn sweep(cfg: &RunConfig, stamp: &str) -> Result<(), CliError> {
    let axis = cfg
        .axis
        .ok_or_else(|| CliError::input("sweep needs an axis: --axis k-metric|tau|alpha|beta|alpha-k|beta-k"))?;
    let (set, split, base) = cfg.load()?;
    let ctx = SweepContext::new(&set, &split, base.geodesic, cfg.jobs)?;
    let g = &cfg.grid;
    let dir = cfg.create_out_dir()?;
    let stem = format!("sweep_{}_{stamp}", axis.name());
    let csv_path = dir.join(format!("{stem}.csv"));
    let svg_path = dir.join(format!("{stem}.svg"));
    let mut extra = None;
    let ks = g.k_range.values();

    let (results, best, svg) = match axis {
        Axis::KMetric => {
            let sweep = ctx.sweep_k_by_metric(&g.metrics, &g.representations, &base.params, g.k_range)?;
            let best = *sweep.best()?;
            let table = dir.join(format!("{stem}_table.csv"));
            k_metric_table(&table, &g.representations, &sweep.cells)?;
            extra = Some(table);
            let series: Vec<Series> = sweep
                .results
                .chunks(ks.len())
                .map(|c| Series {
                    label: format!("{} {}", c[0].cfg.metric, c[0].cfg.params.kind()),
                    points: curve(c, |r| r.cfg.k as f64),
                })
                .collect();
            let title = format!("Validation mean error by k (tau={})", base.params.tau());
            (sweep.results, best, svg::line_chart(&title, "k", "mean error (m)", &series))
        }
        Axis::Tau => {
            let scan = ctx.sweep_tau(&base, &g.tau_range)?;
            let series = [Series {
                label: format!("k={}", base.k),
                points: curve(&scan.results, |r| r.cfg.params.tau()),
            }];
            let title = format!("Validation mean error vs tau ({} {})", base.metric, base.params.kind());
            (scan.results, scan.best, svg::line_chart(&title, "tau (dBm)", "mean error (m)", &series))
        }
        Axis::Alpha | Axis::Beta => {
            let (scan, label, x): (Scan, &str, Param) = if axis == Axis::Alpha {
                let b = base_with(&base, Representation::Exponential);
                (ctx.sweep_alpha(&b, &g.alpha_range, None)?, "alpha", |r| r.cfg.params.alpha())
            } else {
                let b = base_with(&base, Representation::Powed);
                (ctx.sweep_beta(&b, &g.beta_range, None)?, "beta", |r| r.cfg.params.beta())
            };
            let series = [Series {
                label: format!("k={}", base.k),
                points: curve(&scan.results, x),
            }];
            let title = format!("Validation mean error vs {label} ({})", title_tail_for(&scan));
            (scan.results.clone(), scan.best, svg::line_chart(&title, label, "mean error (m)", &series))
        }
        Axis::AlphaK | Axis::BetaK => {
            let (scan, label, params, x): (Scan, &str, Vec<f64>, Param) = if axis == Axis::AlphaK {
                let b = base_with(&base, Representation::Exponential);
                let s = ctx.sweep_alpha(&b, &g.alpha_range, Some(g.k_range))?;
                (s, "alpha", g.alpha_range.values(), |r| r.cfg.params.alpha())
            } else {
                let b = base_with(&base, Representation::Powed);
                let s = ctx.sweep_beta(&b, &g.beta_range, Some(g.k_range))?;
                (s, "beta", g.beta_range.values(), |r| r.cfg.params.beta())
            };
            let values = grid(&scan, &params, &ks, x)?;
            let ys: Vec<f64> = ks.iter().map(|&k| k as f64).collect();
            let title = format!("Validation mean error over ({label}, k) ({})", title_tail_for(&scan));
            let svg = svg::heat_map(&title, label, "k", &params, &ys, &values);
            (scan.results.clone(), scan.best, svg)
        }
    };
    write_rows(&csv_path, results.iter().map(SweepResult::row))?;
    write_text(&svg_path, &svg)?;
    let v = best.validation;
    println!("best: {} validation mean={:.1}m median={:.1}m", best.cfg, v.mean_m, v.median_m);
    println!("csv={}", csv_path.display());
    println!("svg={}", svg_path.display());
    if let Some(t) = extra {
        println!("table={}", t.display());
    }
    Ok(())
}

fn base_with(base: &rff_core::EvalConfig, kind: Representation) -> rff_core::EvalConfig {
    rff_core::EvalConfig {
        params: base.params.with_kind(kind),
        ..*base
    }
}

fn title_tail_for(scan: &Scan) -> String {
    let c = &scan.best.cfg;
    format!("{} {}, tau={}", c.metric, c.params.kind(), c.params.tau())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rff_core::evaluate::error_stats;
    use rff_core::sweep::FloatRange;
    use rff_core::transform::TransformParams;
    use rff_core::{EvalConfig, Geodesic, MetricKind};

    fn result(beta: f64, k: usize, mean: f64) -> SweepResult {
        SweepResult {
            cfg: EvalConfig {
                params: TransformParams::new(Representation::Powed, -157.0, 24.0, beta).unwrap(),
                metric: MetricKind::BrayCurtis,
                k,
                geodesic: Geodesic::Haversine,
            },
            validation: error_stats(&[mean]).unwrap(),
        }
    }

    #[test]
    fn grid_places_cells() {
        let betas = FloatRange::new(2.0, 2.2, 0.1).unwrap().values();
        let mut results = Vec::new();
        for (i, &b) in betas.iter().enumerate() {
            for k in 1..=2 {
                results.push(result(b, k, (10 * k + i) as f64));
            }
        }
        let scan = Scan {
            best: results[0],
            results,
        };
        let g = grid(&scan, &betas, &[1, 2], |r| r.cfg.params.beta()).unwrap();
        assert_eq!(g, vec![vec![10.0, 11.0, 12.0], vec![20.0, 21.0, 22.0]]);
        assert!(grid(&scan, &betas, &[1], |r| r.cfg.params.beta()).is_err());
    }
}
