//! Machine-readable sweep reports. Numbers are serialized with twelve
//! significant digits in both formats, so emit-then-parse reproduces
//! values exactly at that precision.

use crate::sweeps::SweepResult;
use std::io::Write;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(format!("unknown format: {other} (expected csv or json)")),
        }
    }
}

pub const CSV_HEADER: &str =
    "sweep_param,mp_utility,manip_utility,gap,waste,middle_mass,effort_mp,effort_manip";

/// Twelve significant digits, scientific notation.
pub fn format_sig12(v: f64) -> String {
    format!("{v:.11e}")
}

fn opt_field(v: Option<f64>) -> String {
    v.map(format_sig12).unwrap_or_default()
}

pub fn to_csv(rows: &[SweepResult]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            format_sig12(r.parameter),
            opt_field(r.mp_utility),
            opt_field(r.manip_utility),
            opt_field(r.gap),
            format_sig12(r.expected_waste),
            format_sig12(r.middle_mass),
            opt_field(r.effort_mp),
            opt_field(r.effort_manip),
        ));
    }
    out
}

fn json_field(v: Option<f64>) -> String {
    v.map(format_sig12).unwrap_or_else(|| "null".into())
}

pub fn to_json(rows: &[SweepResult]) -> String {
    let mut out = String::from("[\n");
    for (i, r) in rows.iter().enumerate() {
        out.push_str(&format!(
            "  {{\"sweep_param\": {}, \"mp_utility\": {}, \"manip_utility\": {}, \"gap\": {}, \"waste\": {}, \"middle_mass\": {}, \"effort_mp\": {}, \"effort_manip\": {}}}{}\n",
            format_sig12(r.parameter),
            json_field(r.mp_utility),
            json_field(r.manip_utility),
            json_field(r.gap),
            format_sig12(r.expected_waste),
            format_sig12(r.middle_mass),
            json_field(r.effort_mp),
            json_field(r.effort_manip),
            if i + 1 < rows.len() { "," } else { "" },
        ));
    }
    out.push_str("]\n");
    out
}

/// Writes the rows to `path` in the requested format.
pub fn emit_report(
    rows: &[SweepResult],
    path: &Path,
    format: ReportFormat,
) -> Result<(), ReportError> {
    let body = match format {
        ReportFormat::Csv => to_csv(rows),
        ReportFormat::Json => to_json(rows),
    };
    let mut file = std::fs::File::create(path).map_err(|source| ReportError::Io {
        path: path.display().to_string(),
        source,
    })?;
    file.write_all(body.as_bytes())
        .map_err(|source| ReportError::Io {
            path: path.display().to_string(),
            source,
        })
}
