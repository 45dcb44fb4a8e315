//! Result tables and their CSV, JSON and plot-ready emitters.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Column order of the CSV output.
pub const CSV_COLUMNS: [&str; 7] = ["sweep_value", "metric", "estimate", "ci_lo", "ci_hi", "n", "seed"];

/// One estimate. `metric` reads `name/mode/scenario`, e.g. `outage_probability/st/indoor`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub sweep_value: f64,
    pub metric: String,
    pub estimate: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub n: u64,
    pub seed: u64,
}

impl ResultRow {
    /// `(name, mode, scenario)` parts of the metric.
    pub fn parts(&self) -> (&str, &str, &str) {
        let mut it = self.metric.splitn(3, '/');
        (it.next().unwrap_or(""), it.next().unwrap_or(""), it.next().unwrap_or(""))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
    Plotdata,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
            OutputFormat::Plotdata => "dat",
        }
    }
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            "plotdata" => Ok(OutputFormat::Plotdata),
            _ => Err(Error::Config(format!("unknown output format {s:?}"))),
        }
    }
}

impl ResultTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Rows of one metric (full `name/mode/scenario` key), in sweep order.
    pub fn series(&self, metric: &str) -> Vec<&ResultRow> {
        self.rows.iter().filter(|r| r.metric == metric).collect()
    }

    pub fn get(&self, metric: &str, sweep_value: f64) -> Option<&ResultRow> {
        self.rows
            .iter()
            .find(|r| r.metric == metric && (r.sweep_value == sweep_value || (r.sweep_value - sweep_value).abs() < 1e-9))
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r).map_err(|e| Error::Parse(e.to_string()))?;
        }
        if self.rows.is_empty() {
            w.write_record(CSV_COLUMNS).map_err(|e| Error::Parse(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let header: Vec<String> = r
            .headers()
            .map_err(|e| Error::Parse(e.to_string()))?
            .iter()
            .map(str::to_owned)
            .collect();
        if header != CSV_COLUMNS {
            return Err(Error::Parse(format!("unexpected CSV header {header:?}")));
        }
        let rows = r
            .deserialize()
            .collect::<std::result::Result<Vec<ResultRow>, _>>()
            .map_err(|e| Error::Parse(e.to_string()))?;
        Ok(ResultTable { rows })
    }

    /// JSON array mirroring the CSV rows. Non-finite numbers become `null`.
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(&self.rows).map_err(|e| Error::Parse(e.to_string()))
    }

    /// One whitespace-delimited block per (mode, scenario): the sweep value
    /// followed by the estimate of every metric. Blocks are separated by two
    /// blank lines.
    pub fn to_plotdata(&self) -> String {
        let mut series: BTreeMap<(String, String), (Vec<String>, BTreeMap<u64, (f64, BTreeMap<String, f64>)>)> =
            BTreeMap::new();
        for (i, r) in self.rows.iter().enumerate() {
            let (name, mode, scenario) = r.parts();
            let entry = series.entry((mode.to_owned(), scenario.to_owned())).or_default();
            if !entry.0.iter().any(|n| n == name) {
                entry.0.push(name.to_owned());
            }
            // keyed by first appearance so that sweep order is kept
            let key = entry
                .1
                .iter()
                .find(|(_, (x, _))| *x == r.sweep_value || (x.is_nan() && r.sweep_value.is_nan()))
                .map(|(k, _)| *k)
                .unwrap_or(i as u64);
            entry.1.entry(key).or_insert_with(|| (r.sweep_value, BTreeMap::new())).1.insert(name.to_owned(), r.estimate);
        }
        let mut out = String::new();
        for (idx, ((mode, scenario), (names, points))) in series.iter().enumerate() {
            if idx > 0 {
                out.push_str("\n\n");
            }
            let _ = writeln!(out, "# mode={mode} scenario={scenario}");
            let _ = writeln!(out, "# sweep_value {}", names.join(" "));
            for (x, values) in points.values() {
                let _ = write!(out, "{x}");
                for n in names {
                    let _ = write!(out, " {}", values.get(n).copied().unwrap_or(f64::NAN));
                }
                out.push('\n');
            }
        }
        out
    }

    pub fn render(&self, format: OutputFormat) -> Result<String> {
        match format {
            OutputFormat::Csv => self.to_csv(),
            OutputFormat::Json => self.to_json(),
            OutputFormat::Plotdata => Ok(self.to_plotdata()),
        }
    }
}

/// Writes `table` to `path` in `format`.
pub fn emit_results(table: &ResultTable, format: OutputFormat, path: &Path) -> Result<()> {
    if table.is_empty() {
        return Err(Error::Contract("refusing to emit an empty result table".into()));
    }
    let text = table.render(format)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
