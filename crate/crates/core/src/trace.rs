//! Per-iteration run records shared by eBO and the baseline optimizers.

use std::fmt::Write as _;
use std::path::Path;

use crate::manifolds::ManifoldPoint;

/// CSV header shared by every optimizer trace.
pub const CSV_HEADER: &str = "iter,f_next,f_best,err_to_oracle,wall_ms";

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    /// 1-based iteration (or evaluation) counter.
    pub iter: usize,
    /// Point evaluated at this iteration.
    pub point: ManifoldPoint,
    pub f_next: f64,
    /// Incumbent value after this iteration.
    pub f_best: f64,
    pub best_point: ManifoldPoint,
    /// Extrinsic distance from the incumbent to the known optimum, if any.
    pub err_to_oracle: Option<f64>,
    /// Milliseconds since the run started.
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunTrace {
    records: Vec<TraceRecord>,
}

/// Fixed-width scientific notation with 17 significant digits.
pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{v:.16e}")
    }
}

impl RunTrace {
    pub fn new() -> Self {
        RunTrace::default()
    }

    pub fn push(&mut self, record: TraceRecord) {
        self.records.push(record);
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    pub fn incumbent_values(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.f_best).collect()
    }

    /// First iteration whose incumbent value is at or below `threshold`.
    pub fn first_iter_reaching(&self, threshold: f64) -> Option<usize> {
        self.records
            .iter()
            .find(|r| r.f_best <= threshold)
            .map(|r| r.iter)
    }

    /// Renders the trace as CSV. `err_to_oracle` is written as log10 of the
    /// distance; `wall_ms` is left empty unless `with_wall_time` is set, so
    /// that untimed traces are byte-reproducible.
    pub fn to_csv(&self, with_wall_time: bool) -> String {
        let mut out = String::new();
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            let err = r
                .err_to_oracle
                .map(|d| format_float(d.log10()))
                .unwrap_or_default();
            let wall = if with_wall_time {
                format!("{:.3}", r.wall_ms)
            } else {
                String::new()
            };
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.iter,
                format_float(r.f_next),
                format_float(r.f_best),
                err,
                wall
            );
        }
        out
    }

    pub fn write_csv(&self, path: &Path, with_wall_time: bool) -> std::io::Result<()> {
        std::fs::write(path, self.to_csv(with_wall_time))
    }
}
