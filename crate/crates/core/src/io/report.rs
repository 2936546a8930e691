use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{display, from_json, read_all, to_json_pretty, write_bytes};
use crate::error::{Error, Result};
use crate::eval::{render_table, EvalReport, TableRow};

pub const REPORT_FORMAT: &str = "reidtrack-report";
pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DetectorErrors {
    pub false_negatives: u64,
    pub false_positives: u64,
}

/// One tracker (optionally with a re-identifier) scored on the input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub tracker: String,
    pub reider: Option<String>,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub format: String,
    pub version: u32,
    /// Detector name shown in the table.
    pub dt: String,
    pub detector: DetectorErrors,
    /// Settings that reproduce the run, in config-file key form.
    pub config: BTreeMap<String, String>,
    pub entries: Vec<ReportEntry>,
}

impl ReportDocument {
    pub fn new(dt: impl Into<String>, detector: DetectorErrors, config: BTreeMap<String, String>) -> Self {
        Self {
            format: REPORT_FORMAT.into(),
            version: REPORT_VERSION,
            dt: dt.into(),
            detector,
            config,
            entries: Vec::new(),
        }
    }

    pub fn rows(&self) -> Vec<TableRow> {
        self.entries
            .iter()
            .map(|e| TableRow::from_report(&e.tracker, e.reider.as_deref(), &e.report))
            .collect()
    }

    pub fn table(&self) -> String {
        render_table(
            &self.dt,
            self.detector.false_negatives,
            self.detector.false_positives,
            &self.rows(),
        )
    }

    pub fn to_json(&self) -> String {
        to_json_pretty(self)
    }
}

pub fn write_report(doc: &ReportDocument, path: &Path) -> Result<()> {
    write_bytes(path, doc.to_json().as_bytes())
}

pub fn read_report(path: &Path) -> Result<ReportDocument> {
    let doc: ReportDocument = from_json(path, &read_all(path)?)?;
    if doc.format != REPORT_FORMAT {
        return Err(Error::parse(
            display(path),
            0,
            format!("unexpected format `{}`", doc.format),
        ));
    }
    if doc.version != REPORT_VERSION {
        return Err(Error::VersionMismatch {
            path: display(path),
            found: doc.version,
            expected: REPORT_VERSION,
        });
    }
    Ok(doc)
}
