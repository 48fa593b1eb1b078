//! Results, summary and figure-data CSV files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::metrics::{summarize_rows, Metric, MetricRow, RowId, SummaryRow};

pub const RESULTS_FILE: &str = "results.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const RESULTS_HEADER: &str = "scheme,alpha,seed,metric,service_or_node,t,value";
pub const SUMMARY_HEADER: &str = "scheme,alpha,metric,service_or_node,mean,min,max,runs";
pub const FIGURE_HEADER: &str = "scheme,alpha,service_or_node,mean,min,max,runs";

/// Figure-data files and the metric each one carries.
pub const FIGURES: [(&str, Metric); 8] = [
    ("fig_delay_per_service.csv", Metric::AvgDelay),
    ("fig_delay_vs_alpha.csv", Metric::AvgDelay),
    ("fig_resource_usage.csv", Metric::ResourceUsage),
    ("fig_fairness.csv", Metric::Fairness),
    ("fig_instance_utilization.csv", Metric::InstanceUtilization),
    ("fig_satisfaction.csv", Metric::Satisfaction),
    ("fig_instances.csv", Metric::AvgInstances),
    ("fig_replacement_cost.csv", Metric::ReplacementCost),
];

pub fn results_to_string(rows: &[MetricRow]) -> String {
    let mut out = String::with_capacity(48 * rows.len() + 64);
    out.push_str(RESULTS_HEADER);
    out.push('\n');
    for r in rows {
        let t = r.t.map(|t| t.to_string()).unwrap_or_default();
        let _ = writeln!(out, "{},{},{},{},{},{},{}", r.scheme, r.alpha, r.seed, r.metric, r.id, t, r.value);
    }
    out
}

#[derive(Debug, Deserialize)]
struct RawRow {
    scheme: String,
    alpha: f64,
    seed: u64,
    metric: String,
    service_or_node: String,
    t: Option<u32>,
    value: f64,
}

pub fn read_results(path: &Path) -> Result<Vec<MetricRow>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_results(&text, path)
}

pub fn parse_results(text: &str, path: &Path) -> Result<Vec<MetricRow>> {
    let parse_err = |line: u64, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    if header.iter().collect::<Vec<_>>().join(",") != RESULTS_HEADER {
        return Err(parse_err(1, format!("expected header {RESULTS_HEADER:?}")));
    }
    let mut rows = Vec::new();
    for rec in rdr.deserialize::<RawRow>() {
        let raw = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = rows.len() as u64 + 2;
        let metric = Metric::parse(&raw.metric).ok_or_else(|| parse_err(line, format!("unknown metric {:?}", raw.metric)))?;
        let id = RowId::parse(&raw.service_or_node)
            .ok_or_else(|| parse_err(line, format!("bad service_or_node {:?}", raw.service_or_node)))?;
        rows.push(MetricRow {
            scheme: raw.scheme,
            alpha: raw.alpha,
            seed: raw.seed,
            metric,
            id,
            t: raw.t,
            value: raw.value,
        });
    }
    Ok(rows)
}

pub fn summary_to_string(summary: &[SummaryRow]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for r in summary {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.scheme, r.alpha, r.metric, r.id, r.mean, r.min, r.max, r.runs
        );
    }
    out
}

/// Contents of one figure-data file, drawn from the summary.
pub fn figure_to_string(name: &str, metric: Metric, summary: &[SummaryRow]) -> String {
    let keep = |id: RowId| match name {
        "fig_delay_per_service.csv" => matches!(id, RowId::Service(_)),
        "fig_delay_vs_alpha.csv" => id == RowId::All,
        _ => true,
    };
    let mut out = String::from(FIGURE_HEADER);
    out.push('\n');
    for r in summary.iter().filter(|r| r.metric == metric && keep(r.id)) {
        let _ = writeln!(out, "{},{},{},{},{},{},{}", r.scheme, r.alpha, r.id, r.mean, r.min, r.max, r.runs);
    }
    out
}

fn write(path: PathBuf, contents: &str) -> Result<()> {
    fs::write(&path, contents).map_err(|e| Error::io(path, e))
}

/// Write `results.csv`, `summary.csv` and every figure file into `dir`.
pub fn write_all(dir: &Path, rows: &[MetricRow]) -> Result<Vec<SummaryRow>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write(dir.join(RESULTS_FILE), &results_to_string(rows))?;
    let summary = summarize_rows(rows);
    write_summary(dir, &summary)?;
    Ok(summary)
}

fn write_summary(dir: &Path, summary: &[SummaryRow]) -> Result<()> {
    write(dir.join(SUMMARY_FILE), &summary_to_string(summary))?;
    for (name, metric) in FIGURES {
        write(dir.join(name), &figure_to_string(name, metric, summary))?;
    }
    Ok(())
}

/// Per-scheme averages over all alphas, ranked by mean delay.
pub fn ranking_table(summary: &[SummaryRow]) -> String {
    let columns = [
        (Metric::AvgDelay, "delay_ms"),
        (Metric::ResourceUsage, "usage"),
        (Metric::Fairness, "fairness"),
        (Metric::InstanceUtilization, "util"),
        (Metric::Satisfaction, "satisf"),
        (Metric::AvgInstances, "instances"),
        (Metric::ReplacementCost, "replace"),
    ];
    let mut by_scheme: BTreeMap<&str, BTreeMap<Metric, Vec<f64>>> = BTreeMap::new();
    for r in summary.iter().filter(|r| r.id == RowId::All) {
        by_scheme
            .entry(&r.scheme)
            .or_default()
            .entry(r.metric)
            .or_default()
            .push(r.mean);
    }
    let mean_of = |m: &BTreeMap<Metric, Vec<f64>>, metric: Metric| {
        m.get(&metric).map(|v| v.iter().sum::<f64>() / v.len() as f64)
    };
    let mut ranked: Vec<(&str, &BTreeMap<Metric, Vec<f64>>)> = by_scheme.iter().map(|(s, m)| (*s, m)).collect();
    ranked.sort_by(|a, b| {
        let da = mean_of(a.1, Metric::AvgDelay).unwrap_or(f64::INFINITY);
        let db = mean_of(b.1, Metric::AvgDelay).unwrap_or(f64::INFINITY);
        da.total_cmp(&db).then(a.0.cmp(b.0))
    });

    let mut out = format!("{:<5} {:<9}", "rank", "scheme");
    for (_, title) in columns {
        let _ = write!(out, " {title:>10}");
    }
    out.push('\n');
    for (i, (scheme, m)) in ranked.iter().enumerate() {
        let _ = write!(out, "{:<5} {:<9}", i + 1, scheme);
        for (metric, _) in columns {
            match mean_of(m, metric) {
                Some(v) => {
                    let _ = write!(out, " {v:>10.4}");
                }
                None => {
                    let _ = write!(out, " {:>10}", "-");
                }
            }
        }
        out.push('\n');
    }
    out
}

/// Summarize `results.csv` in `dir`, rewrite the summary and figure files, and return the
/// ranking table.
pub fn compare(dir: &Path) -> Result<String> {
    let path = dir.join(RESULTS_FILE);
    if !path.exists() {
        return Err(Error::Io {
            path: path.clone(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "no results file; run `evaluate` first"),
        });
    }
    let rows = read_results(&path)?;
    if rows.is_empty() {
        return Err(Error::Validation(format!("{} holds no result rows", path.display())));
    }
    let summary = summarize_rows(&rows);
    write_summary(dir, &summary)?;
    Ok(ranking_table(&summary))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(scheme: &str, seed: u64, metric: Metric, id: RowId, t: Option<u32>, value: f64) -> MetricRow {
        MetricRow {
            scheme: scheme.into(),
            alpha: 0.6,
            seed,
            metric,
            id,
            t,
            value,
        }
    }

    #[test]
    fn results_round_trip() {
        let rows = vec![
            row("DRLD-SP", 1, Metric::AvgDelay, RowId::All, None, 3.25),
            row("DRLD-SP", 1, Metric::Fairness, RowId::All, Some(4), 0.1 + 0.2),
            row("SSP_min", 2, Metric::ResourceUsage, RowId::Node(3), None, 1e-17),
        ];
        let text = results_to_string(&rows);
        assert!(text.starts_with(RESULTS_HEADER));
        assert_eq!(parse_results(&text, Path::new("r.csv")).unwrap(), rows);
    }

    #[test]
    fn malformed_row_names_file_and_line() {
        let text = format!("{RESULTS_HEADER}\nSSP_min,0.2,1,avg_delay_ms,all,,1.0\nSSP_min,0.2,x,avg_delay_ms,all,,1.0\n");
        let err = parse_results(&text, Path::new("res.csv")).unwrap_err();
        match err {
            Error::Parse { path, line, .. } => {
                assert_eq!(path, Path::new("res.csv"));
                assert_eq!(line, 3);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ranking_orders_by_delay() {
        let rows = vec![
            row("SSP_min", 1, Metric::AvgDelay, RowId::All, None, 5.0),
            row("DRLD-SP", 1, Metric::AvgDelay, RowId::All, None, 2.0),
        ];
        let table = ranking_table(&summarize_rows(&rows));
        let lines: Vec<&str> = table.lines().collect();
        assert!(lines[1].contains("DRLD-SP"));
        assert!(lines[2].contains("SSP_min"));
    }
}
