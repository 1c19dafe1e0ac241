use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Method, ModelKind};
use super::run::{CellReport, DatasetSummary, ExperimentResults};
use crate::diagnostics::TopKMode;
use crate::error::{Error, Result};

/// Scalar read out of a cell for aggregation.
pub type Extractor = fn(&CellReport) -> Option<f64>;

/// Columns of `aggregate.csv`, in order.
pub const AGGREGATE_METRICS: &[(&str, Extractor)] = &[
    ("bac", |r| r.bac),
    ("macro_f1", |r| r.macro_f1),
    ("train_rows", |r| Some(r.train_rows as f64)),
    ("synthetic_rows", |r| Some(r.synthetic_rows as f64)),
    ("frobenius_total", |r| {
        r.diagnostics.weights.as_ref().map(|w| w.frobenius_total)
    }),
    ("weight_diff_pct", |r| {
        r.diagnostics.weights.as_ref().and_then(|w| w.mean_pct_diff_vs_base)
    }),
    ("sv_count", |r| {
        r.diagnostics.sv_census.as_ref().map(|c| c.sv_count as f64)
    }),
    ("sv_multiple_vs_base", |r| {
        r.diagnostics.sv_census.as_ref().map(|c| c.sv_multiple_vs_base)
    }),
    ("sv_class_ratio_maj_min", |r| {
        r.diagnostics.sv_census.as_ref().and_then(|c| c.class_ratio_maj_min)
    }),
    ("new_sv_ratio", |r| {
        r.diagnostics.sv_census.as_ref().map(|c| c.new_sv_ratio)
    }),
    ("synthetic_sv_ratio", |r| {
        r.diagnostics.sv_census.as_ref().map(|c| c.synthetic_sv_ratio)
    }),
    ("topk_overlap", |r| {
        r.diagnostics.topk.as_ref().and_then(|t| t.overlap_i_m)
    }),
    ("topk_instance_overlap", |r| r.diagnostics.topk_instance_overlap),
];

/// Mean and sample standard deviation of one metric over a method/model
/// pair's successful repeats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub name: String,
    pub n: usize,
    pub mean: Option<f64>,
    pub std: Option<f64>,
}

impl MetricSummary {
    fn of(name: &str, values: &[f64]) -> Self {
        let n = values.len();
        let (mean, std) = if n == 0 {
            (None, None)
        } else {
            let mean = values.iter().sum::<f64>() / n as f64;
            let std = if n > 1 {
                let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
                (ss / (n - 1) as f64).sqrt()
            } else {
                0.0
            };
            (Some(mean), Some(std))
        };
        Self {
            name: name.to_string(),
            n,
            mean,
            std,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub method: Method,
    pub model: ModelKind,
    pub succeeded: usize,
    pub failed: usize,
    pub metrics: Vec<MetricSummary>,
}

impl AggregateRow {
    pub fn metric(&self, name: &str) -> Option<&MetricSummary> {
        self.metrics.iter().find(|m| m.name == name)
    }
}

/// One row per configured method/model pair, in configuration order.
pub fn aggregate(results: &ExperimentResults) -> Vec<AggregateRow> {
    let mut rows = Vec::new();
    for &method in &results.config.methods {
        for &model in &results.config.models {
            let cells: Vec<&CellReport> = results
                .cells
                .iter()
                .map(|c| &c.report)
                .filter(|r| r.method == method && r.model == model)
                .collect();
            let ok: Vec<&CellReport> = cells.iter().copied().filter(|r| r.is_ok()).collect();
            let metrics = AGGREGATE_METRICS
                .iter()
                .map(|(name, f)| {
                    let values: Vec<f64> = ok.iter().filter_map(|r| f(r)).collect();
                    MetricSummary::of(name, &values)
                })
                .collect();
            rows.push(AggregateRow {
                method,
                model,
                succeeded: ok.len(),
                failed: cells.len() - ok.len(),
                metrics,
            });
        }
    }
    rows
}

#[derive(Serialize)]
struct ExperimentHeader<'a> {
    config: &'a ExperimentConfig,
    dataset: &'a DatasetSummary,
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Writes every report under `out_dir` and returns the paths written, in
/// write order. Contents depend only on the results, so reruns with the same
/// configuration produce identical bytes.
///
/// Layout: `experiment.json`, `aggregate.csv`, `cells/<stem>.json`,
/// `magnitudes/<stem>.csv` for cells with per-class top-K magnitudes, and
/// `models/<stem>.json` when model saving is enabled.
pub fn emit_reports(results: &ExperimentResults, out_dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    if results.cells.is_empty() {
        return Err(Error::InvalidArgument("no results to write".into()));
    }
    let out = out_dir.as_ref();
    let mut written = Vec::new();
    create_dir(out)?;
    for sub in ["cells", "magnitudes"] {
        create_dir(&out.join(sub))?;
    }

    let header = ExperimentHeader {
        config: &results.config,
        dataset: &results.dataset,
    };
    let path = out.join("experiment.json");
    write_file(&path, serde_json::to_string_pretty(&header)?.as_bytes())?;
    written.push(path);

    let path = out.join("aggregate.csv");
    write_aggregate(&aggregate(results), &path)?;
    written.push(path);

    for cell in &results.cells {
        let stem = cell.report.file_stem();
        let path = out.join("cells").join(format!("{stem}.json"));
        write_file(&path, serde_json::to_string_pretty(&cell.report)?.as_bytes())?;
        written.push(path);

        if let Some(topk) = &cell.report.diagnostics.topk {
            if topk.mode == TopKMode::PerClassAggregate {
                let path = out.join("magnitudes").join(format!("{stem}.csv"));
                write_magnitudes(&topk.magnitudes, &path)?;
                written.push(path);
            }
        }
    }

    if results.config.save_models {
        create_dir(&out.join("models"))?;
        for cell in &results.cells {
            if let Some(snapshot) = &cell.snapshot {
                let path = out
                    .join("models")
                    .join(format!("{}.json", cell.report.file_stem()));
                snapshot.save(&path)?;
                written.push(path);
            }
        }
    }
    Ok(written)
}

fn write_aggregate(rows: &[AggregateRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["method".to_string(), "model".into(), "succeeded".into(), "failed".into()];
    for (name, _) in AGGREGATE_METRICS {
        header.push(format!("{name}_mean"));
        header.push(format!("{name}_std"));
    }
    w.write_record(&header)?;
    for row in rows {
        let mut rec = vec![
            row.method.to_string(),
            row.model.to_string(),
            row.succeeded.to_string(),
            row.failed.to_string(),
        ];
        for m in &row.metrics {
            rec.push(opt_cell(m.mean));
            rec.push(opt_cell(m.std));
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_magnitudes(per_class: &[Vec<f64>], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["feature".to_string()];
    header.extend((0..per_class.len()).map(|c| format!("class_{c}")));
    w.write_record(&header)?;
    let d = per_class.first().map_or(0, Vec::len);
    for j in 0..d {
        let mut rec = vec![j.to_string()];
        rec.extend(per_class.iter().map(|m| m[j].to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_cell_report(path: impl AsRef<Path>) -> Result<CellReport> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}
