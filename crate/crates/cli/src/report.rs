//! Markdown summary of a results directory.

use crate::error::CliError;
use rff_core::evaluate::ResultRow;
use rff_core::transform::Representation;
use std::cmp::Ordering;
use std::fmt::Write;
use std::path::{Path, PathBuf};

const AXES: [&str; 6] = ["k-metric", "alpha-k", "beta-k", "alpha", "beta", "tau"];

struct ResultFile {
    name: String,
    /// `None` for single evaluations.
    axis: Option<&'static str>,
    rows: Vec<ResultRow>,
}

fn classify(name: &str) -> Option<Option<&'static str>> {
    let stem = name.strip_suffix(".csv")?;
    if stem.starts_with("eval_") {
        return Some(None);
    }
    let rest = stem.strip_prefix("sweep_")?;
    if rest.ends_with("_table") {
        return None;
    }
    AXES.iter().find(|a| rest.starts_with(&format!("{a}_"))).map(|a| Some(*a))
}

fn read_rows(path: &Path) -> Result<Vec<ResultRow>, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::io(path, e))?;
    r.deserialize()
        .collect::<Result<Vec<ResultRow>, _>>()
        .map_err(|e| CliError::io(path, e))
}

fn collect(dir: &Path) -> Result<Vec<ResultFile>, CliError> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    paths.sort();
    let mut files = Vec::new();
    for path in paths {
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
        let Some(axis) = classify(&name) else { continue };
        let rows = read_rows(&path)?;
        if !rows.is_empty() {
            files.push(ResultFile { name, axis, rows });
        }
    }
    Ok(files)
}

/// Same rule as the sweeps: lowest mean, then smaller k, then metric name.
fn better(a: &ResultRow, b: &ResultRow) -> Ordering {
    a.mean_m
        .total_cmp(&b.mean_m)
        .then(a.k.cmp(&b.k))
        .then(a.metric.name().cmp(b.metric.name()))
}

fn best<'a>(rows: impl IntoIterator<Item = &'a ResultRow>) -> Option<&'a ResultRow> {
    rows.into_iter()
        .reduce(|best, r| if better(r, best) == Ordering::Less { r } else { best })
}

fn describe(r: &ResultRow) -> String {
    format!(
        "{} {}, tau={:.4}, alpha={:.4}, beta={:.4}, k={}: mean {:.1} m, median {:.1} m",
        r.metric, r.representation, r.tau, r.alpha, r.beta, r.k, r.mean_m, r.median_m
    )
}

fn k_metric_section(out: &mut String, f: &ResultFile) {
    let mut reps: Vec<Representation> = Vec::new();
    let mut metrics = Vec::new();
    for r in &f.rows {
        if !reps.contains(&r.representation) {
            reps.push(r.representation);
        }
        if !metrics.contains(&r.metric) {
            metrics.push(r.metric);
        }
    }
    let _ = writeln!(out, "## k by metric: `{}` (tau={:.4})\n", f.name, f.rows[0].tau);
    let _ = writeln!(out, "Validation mean / median error in meters at the best k of each cell.\n");
    let _ = write!(out, "| metric |");
    for r in &reps {
        let _ = write!(out, " {r} |");
    }
    let _ = writeln!(out, "\n|---|{}", "---|".repeat(reps.len()));
    for m in &metrics {
        let _ = write!(out, "| {m} |");
        for rep in &reps {
            match best(f.rows.iter().filter(|r| r.metric == *m && r.representation == *rep)) {
                Some(b) => {
                    let _ = write!(out, " {:.1} / {:.1} (k={}) |", b.mean_m, b.median_m, b.k);
                }
                None => out.push_str(" - |"),
            }
        }
        out.push('\n');
    }
}

fn curve_section(out: &mut String, f: &ResultFile, axis: &str) {
    let param = |r: &ResultRow| match axis {
        "tau" => r.tau,
        "alpha" | "alpha-k" => r.alpha,
        _ => r.beta,
    };
    let name = axis.trim_end_matches("-k");
    if axis.ends_with("-k") {
        let _ = writeln!(out, "## ({name}, k) grid: `{}`\n", f.name);
        let _ = writeln!(out, "Best k for each {name} value.\n");
    } else {
        let _ = writeln!(out, "## {name} scan: `{}`\n", f.name);
    }
    let _ = writeln!(out, "| {name} | k | mean_m | median_m |\n|---|---|---|---|");
    let mut values: Vec<f64> = Vec::new();
    for r in &f.rows {
        if !values.contains(&param(r)) {
            values.push(param(r));
        }
    }
    for v in values {
        if let Some(b) = best(f.rows.iter().filter(|r| param(r) == v)) {
            let _ = writeln!(out, "| {v:.4} | {} | {:.1} | {:.1} |", b.k, b.mean_m, b.median_m);
        }
    }
}

pub fn render(dir: &Path) -> Result<String, CliError> {
    let files = collect(dir)?;
    if files.is_empty() {
        return Err(CliError::input(format!("{}: no sweep_*.csv or eval_*.csv result files", dir.display())));
    }
    let mut out = String::from("# rf-fingerprint results\n\n");
    let validation = files
        .iter()
        .flat_map(|f| f.rows.iter().map(move |r| (f, r)))
        .filter(|(_, r)| r.target == "validation");
    if let Some((f, b)) = validation.clone().reduce(|a, c| if better(c.1, a.1) == Ordering::Less { c } else { a }) {
        let _ = writeln!(out, "**Best validation configuration:** {} (`{}`)\n", describe(b), f.name);
    }
    for f in files.iter().filter(|f| f.axis.is_some()) {
        let axis = f.axis.unwrap_or_default();
        if axis == "k-metric" {
            k_metric_section(&mut out, f);
        } else {
            curve_section(&mut out, f, axis);
        }
        if let Some(b) = best(&f.rows) {
            let _ = writeln!(out, "\nBest: {}\n", describe(b));
        }
    }
    let evals: Vec<&ResultFile> = files.iter().filter(|f| f.axis.is_none()).collect();
    if !evals.is_empty() {
        out.push_str("## Evaluations\n\n");
        out.push_str("| file | configuration | target | n | mean_m | median_m | p75_m | p90_m | max_m |\n");
        out.push_str("|---|---|---|---|---|---|---|---|---|\n");
        for f in evals {
            for r in &f.rows {
                let _ = writeln!(
                    out,
                    "| `{}` | {} {} tau={:.4} alpha={:.4} beta={:.4} k={} | {} | {} | {:.1} | {:.1} | {:.1} | {:.1} | {:.1} |",
                    f.name,
                    r.metric,
                    r.representation,
                    r.tau,
                    r.alpha,
                    r.beta,
                    r.k,
                    r.target,
                    r.n,
                    r.mean_m,
                    r.median_m,
                    r.p75_m,
                    r.p90_m,
                    r.max_m
                );
            }
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn report(dir: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let text = render(dir)?;
    let path = out.map(Path::to_path_buf).unwrap_or_else(|| dir.join("report.md"));
    std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    println!("report={}", path.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_names_classified() {
        assert_eq!(classify("sweep_k-metric_20260101T000000Z.csv"), Some(Some("k-metric")));
        assert_eq!(classify("sweep_alpha-k_x.csv"), Some(Some("alpha-k")));
        assert_eq!(classify("sweep_alpha_x.csv"), Some(Some("alpha")));
        assert_eq!(classify("sweep_k-metric_x_table.csv"), None);
        assert_eq!(classify("eval_validation.csv"), Some(None));
        assert_eq!(classify("histogram.csv"), None);
        assert_eq!(classify("sweep_gamma_x.csv"), None);
        assert_eq!(classify("sweep_tau_x.svg"), None);
    }
}
