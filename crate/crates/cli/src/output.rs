use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use regionsim::cost::COST_CSV_COLUMNS;
use regionsim::metrics::{MetricsReport, CSV_COLUMNS, NUMERIC_COLUMNS};
use regionsim::SimulationResult;
use serde::Serialize;

pub const ROW_PREFIX: [&str; 8] =
    ["technique", "threshold", "max_region_size", "netplus_depth", "lei_buffer_capacity", "skip", "limit", "items"];

pub const COMPARE_PREFIX: [&str; 6] =
    ["technique", "baseline", "threshold", "max_region_size", "netplus_depth", "lei_buffer_capacity"];

pub fn open_output(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

pub fn report_header() -> Vec<&'static str> {
    ROW_PREFIX.iter().chain(&CSV_COLUMNS).chain(&COST_CSV_COLUMNS).copied().collect()
}

pub fn report_row(r: &SimulationResult) -> Vec<String> {
    let c = &r.metadata.config;
    let mut row = vec![
        c.rft.technique.to_string(),
        c.rft.threshold.to_string(),
        c.rft.max_region_size.to_string(),
        c.rft.netplus_depth.to_string(),
        c.rft.lei_buffer_capacity.to_string(),
        c.window.skip.to_string(),
        c.window.limit.map_or_else(|| "NA".to_string(), |l| l.to_string()),
        r.metadata.items.to_string(),
    ];
    row.extend(r.report.csv_values());
    match &r.cost {
        Some(cost) => row.extend(cost.csv_values()),
        None => row.extend(COST_CSV_COLUMNS.iter().map(|_| "NA".to_string())),
    }
    row
}

pub fn write_csv<W: Write>(out: W, header: &[&str], rows: &[Vec<String>]) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()
}

pub fn write_json<W: Write, T: Serialize + ?Sized>(mut out: W, value: &T) -> io::Result<()> {
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()
}

/// `value / baseline` per numeric column; `None` when either side is
/// missing or the baseline is zero.
pub fn normalize(row: &MetricsReport, baseline: &MetricsReport) -> Vec<Option<f64>> {
    NUMERIC_COLUMNS
        .iter()
        .map(|c| match (row.numeric(c), baseline.numeric(c)) {
            (Some(v), Some(b)) if b != 0.0 => Some(v / b),
            _ => None,
        })
        .collect()
}

#[derive(Serialize)]
pub struct CompareRow {
    pub technique: String,
    pub baseline: String,
    pub threshold: u32,
    pub max_region_size: usize,
    pub netplus_depth: u32,
    pub lei_buffer_capacity: usize,
    pub normalized: serde_json::Map<String, serde_json::Value>,
}

impl CompareRow {
    pub fn new(r: &SimulationResult, baseline: &SimulationResult) -> Self {
        let rft = &r.metadata.config.rft;
        let normalized = NUMERIC_COLUMNS
            .iter()
            .zip(normalize(&r.report, &baseline.report))
            .map(|(c, v)| (c.to_string(), v.map_or(serde_json::Value::Null, serde_json::Value::from)))
            .collect();
        Self {
            technique: rft.technique.to_string(),
            baseline: baseline.metadata.config.rft.technique.to_string(),
            threshold: rft.threshold,
            max_region_size: rft.max_region_size,
            netplus_depth: rft.netplus_depth,
            lei_buffer_capacity: rft.lei_buffer_capacity,
            normalized,
        }
    }

    pub fn csv_values(&self) -> Vec<String> {
        let mut row = vec![
            self.technique.clone(),
            self.baseline.clone(),
            self.threshold.to_string(),
            self.max_region_size.to_string(),
            self.netplus_depth.to_string(),
            self.lei_buffer_capacity.to_string(),
        ];
        row.extend(NUMERIC_COLUMNS.iter().map(|c| match &self.normalized[*c] {
            serde_json::Value::Null => "NA".to_string(),
            v => v.to_string(),
        }));
        row
    }
}

pub fn compare_header() -> Vec<&'static str> {
    COMPARE_PREFIX.iter().chain(&NUMERIC_COLUMNS).copied().collect()
}
