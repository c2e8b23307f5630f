//! Reshapes trace CSVs into one long table for plotting.

use std::path::{Path, PathBuf};

use thiserror::Error;

/// Output metric name and the trace column it comes from.
pub const METRICS: [(&str, &str); 4] = [("objective", "L"), ("H", "H"), ("E_k", "Ek"), ("delta", "delta")];

#[derive(Debug, Error)]
pub enum SeriesError {
    #[error("{path}: missing column {column:?}")]
    MissingColumn { path: PathBuf, column: String },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

/// `trace_tibpalm_seed3.csv` → `tibpalm`.
pub fn label_from_path(path: &Path) -> String {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("trace");
    let stem = stem.strip_prefix("trace_").unwrap_or(stem);
    match stem.rfind("_seed") {
        Some(i) if stem[i + 5..].chars().all(|c| c.is_ascii_digit()) && i + 5 < stem.len() => stem[..i].to_string(),
        _ => stem.to_string(),
    }
}

/// Writes `algorithm,k,metric,value` rows for every trace; returns the row count.
pub fn emit_figure_series(traces: &[(String, PathBuf)], out: &Path) -> Result<usize, SeriesError> {
    let mut w = csv::Writer::from_path(out).map_err(|source| SeriesError::Csv { path: out.into(), source })?;
    let werr = |source| SeriesError::Csv { path: out.into(), source };
    w.write_record(["algorithm", "k", "metric", "value"]).map_err(werr)?;
    let mut rows = 0;
    for (label, path) in traces {
        let rerr = |source| SeriesError::Csv { path: path.clone(), source };
        let mut r = csv::Reader::from_path(path).map_err(rerr)?;
        let headers = r.headers().map_err(rerr)?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| SeriesError::MissingColumn { path: path.clone(), column: name.into() })
        };
        let k = col("k")?;
        let cols: Vec<(&str, usize)> =
            METRICS.iter().map(|(m, c)| col(c).map(|i| (*m, i))).collect::<Result<_, _>>()?;
        for rec in r.records() {
            let rec = rec.map_err(rerr)?;
            for &(metric, i) in &cols {
                w.write_record([label.as_str(), &rec[k], metric, &rec[i]]).map_err(werr)?;
                rows += 1;
            }
        }
    }
    w.flush().map_err(|e| werr(e.into()))?;
    Ok(rows)
}
