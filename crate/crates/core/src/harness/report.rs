//! Aggregation of campaign records into gain tables and report files.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{median, CampaignResult, CsiMode, HardwareMode, UpdateModel};
use crate::beamform::Scheme;
use crate::{Error, Result};

/// One cell of the result table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub scenario: String,
    pub mobility: String,
    pub hardware: HardwareMode,
    pub csi: Option<CsiMode>,
    pub update: Option<UpdateModel>,
    pub scheme: Scheme,
    pub drops: usize,
    pub mean: f64,
    pub median: f64,
    /// Half-width of the normal-approximation 95 % interval of the mean.
    pub ci95: f64,
    pub mean_shannon: f64,
    pub overhead: f64,
    pub adjusted_mean: f64,
    /// `adjusted_mean / best reference mean − 1`; absent without references.
    pub gain: Option<f64>,
    /// Same with medians.
    pub gain_median: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

pub const CSV_HEADER: [&str; 16] = [
    "scenario",
    "mobility",
    "hardware",
    "csi",
    "update",
    "scheme",
    "drops",
    "mean",
    "median",
    "ci95",
    "mean_shannon",
    "overhead",
    "adjusted_mean",
    "gain",
    "gain_median",
    "version",
];

type CellKey = (String, String, HardwareMode, Option<CsiMode>, Option<UpdateModel>, Scheme);

/// Throughput statistics per cell and gains over the best reference scheme
/// in the same (scenario, mobility, hardware) group. References carry no
/// feedback overhead.
pub fn gain_table(result: &CampaignResult) -> Result<ResultTable> {
    let cfg = &result.config;
    let mut cells: BTreeMap<CellKey, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for r in &result.records {
        let key = (r.scenario.clone(), r.mobility.clone(), r.hardware, r.csi, r.update, r.scheme);
        let e = cells.entry(key).or_default();
        e.0.push(r.mean_rate());
        e.1.push(r.mean_shannon());
    }
    // best reference per (scenario, mobility, hardware), by mean and by median
    let mut best: BTreeMap<(String, String, HardwareMode), (f64, f64)> = BTreeMap::new();
    for ((sc, mo, hw, _, _, scheme), (v, _)) in &cells {
        if scheme.is_reference() {
            let e = best.entry((sc.clone(), mo.clone(), *hw)).or_insert((f64::NEG_INFINITY, f64::NEG_INFINITY));
            e.0 = e.0.max(mean(v));
            e.1 = e.1.max(median(v));
        }
    }
    let mut rows = Vec::with_capacity(cells.len());
    for ((sc, mo, hw, csi, update, scheme), (v, sh)) in cells {
        let overhead = match update {
            Some(u) if !scheme.is_reference() => cfg.overhead(u)?,
            _ => 0.0,
        };
        let m = mean(&v);
        let med = median(&v);
        let refs = best.get(&(sc.clone(), mo.clone(), hw));
        let ratio = |x: f64, r: f64| if r > 0.0 { Some(x * (1.0 - overhead) / r - 1.0) } else { None };
        rows.push(ResultRow {
            drops: v.len(),
            mean: m,
            median: med,
            ci95: ci95(&v),
            mean_shannon: mean(&sh),
            overhead,
            adjusted_mean: m * (1.0 - overhead),
            gain: refs.and_then(|r| ratio(m, r.0)),
            gain_median: refs.and_then(|r| ratio(med, r.1)),
            scenario: sc,
            mobility: mo,
            hardware: hw,
            csi,
            update,
            scheme,
        });
    }
    Ok(ResultTable { rows })
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn ci95(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
    1.96 * (var / v.len() as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

fn opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Writes the table in long format: one row per cell, header first. An
/// empty table produces the header alone (CSV) or an empty row list (JSON).
pub fn emit_report<W: Write>(table: &ResultTable, format: ReportFormat, sink: W) -> Result<()> {
    match format {
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(sink);
            w.write_record(CSV_HEADER)?;
            for r in &table.rows {
                w.write_record([
                    r.scenario.clone(),
                    r.mobility.clone(),
                    r.hardware.to_string(),
                    opt(r.csi),
                    opt(r.update),
                    r.scheme.to_string(),
                    r.drops.to_string(),
                    r.mean.to_string(),
                    r.median.to_string(),
                    r.ci95.to_string(),
                    r.mean_shannon.to_string(),
                    r.overhead.to_string(),
                    r.adjusted_mean.to_string(),
                    opt(r.gain),
                    opt(r.gain_median),
                    super::CAMPAIGN_VERSION.to_string(),
                ])?;
            }
            w.flush()?;
            Ok(())
        }
        ReportFormat::Json => {
            #[derive(Serialize)]
            struct Doc<'a> {
                version: u32,
                rows: &'a [ResultRow],
            }
            let doc = Doc { version: super::CAMPAIGN_VERSION, rows: &table.rows };
            serde_json::to_writer_pretty(sink, &doc).map_err(Error::from_json)
        }
    }
}

fn kebab<T: serde::de::DeserializeOwned>(s: &str) -> Option<T> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).ok()
}

/// Empty cell → `Some(None)`; unparseable → `None`.
fn opt_kebab<T: serde::de::DeserializeOwned>(s: &str) -> Option<Option<T>> {
    if s.is_empty() {
        Some(None)
    } else {
        kebab(s).map(Some)
    }
}

/// Parses a CSV report produced by [`emit_report`].
pub fn parse_csv_report(text: &str) -> Result<ResultTable> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    if rdr.headers()?.iter().ne(CSV_HEADER) {
        return Err(Error::Parse { line: 1, column: 1, message: "unexpected report header".into() });
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let bad = |j: usize| Error::Parse {
            line: i + 2,
            column: j + 1,
            message: format!("bad {} `{}`", CSV_HEADER[j], &rec[j]),
        };
        let num = |j: usize| rec[j].parse::<f64>().map_err(|_| bad(j));
        let opt_num = |j: usize| if rec[j].is_empty() { Ok(None) } else { num(j).map(Some) };
        rows.push(ResultRow {
            scenario: rec[0].to_string(),
            mobility: rec[1].to_string(),
            hardware: kebab(&rec[2]).ok_or_else(|| bad(2))?,
            csi: opt_kebab(&rec[3]).ok_or_else(|| bad(3))?,
            update: opt_kebab(&rec[4]).ok_or_else(|| bad(4))?,
            scheme: rec[5].parse().map_err(|_| bad(5))?,
            drops: rec[6].parse().map_err(|_| bad(6))?,
            mean: num(7)?,
            median: num(8)?,
            ci95: num(9)?,
            mean_shannon: num(10)?,
            overhead: num(11)?,
            adjusted_mean: num(12)?,
            gain: opt_num(13)?,
            gain_median: opt_num(14)?,
        });
    }
    Ok(ResultTable { rows })
}
