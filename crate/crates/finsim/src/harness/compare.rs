//! Check experiment summaries against a document of reference values.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::table::{num, read_table, Table};

/// One reference quantity. Either `value` with a tolerance, or bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceEntry {
    pub quantity: String,
    #[serde(default)]
    pub value: Option<f64>,
    #[serde(default)]
    pub relative_tolerance: Option<f64>,
    #[serde(default)]
    pub absolute_tolerance: Option<f64>,
    #[serde(default)]
    pub minimum: Option<f64>,
    #[serde(default)]
    pub maximum: Option<f64>,
    /// Shown in the table but never fails the comparison.
    #[serde(default)]
    pub report_only: bool,
    #[serde(default)]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceDocument {
    #[serde(rename = "quantity")]
    pub entries: Vec<ReferenceEntry>,
}

impl ReferenceEntry {
    fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let q = &self.quantity;
        let tolerances = self.relative_tolerance.is_some() as u8 + self.absolute_tolerance.is_some() as u8;
        match self.value {
            Some(x) => {
                if !x.is_finite() {
                    v.push(format!("{q}: value must be finite"));
                }
                if tolerances != 1 {
                    v.push(format!("{q}: give exactly one of relative_tolerance, absolute_tolerance"));
                }
                if self.relative_tolerance.is_some() && x == 0.0 {
                    v.push(format!("{q}: relative tolerance needs a non-zero value"));
                }
            }
            None => {
                if tolerances != 0 {
                    v.push(format!("{q}: tolerance given without a value"));
                }
                if self.minimum.is_none() && self.maximum.is_none() {
                    v.push(format!("{q}: needs a value or a minimum/maximum"));
                }
            }
        }
        for t in [self.relative_tolerance, self.absolute_tolerance].into_iter().flatten() {
            if !(t.is_finite() && t >= 0.0) {
                v.push(format!("{q}: tolerance must be non-negative"));
            }
        }
        if let (Some(lo), Some(hi)) = (self.minimum, self.maximum) {
            if lo > hi {
                v.push(format!("{q}: minimum exceeds maximum"));
            }
        }
        v
    }

    fn check(&self, simulated: f64) -> (bool, Option<f64>) {
        let relative = self.value.filter(|&x| x != 0.0).map(|x| (simulated - x) / x);
        let mut pass = simulated.is_finite();
        if let Some(x) = self.value {
            pass &= match (self.relative_tolerance, self.absolute_tolerance) {
                (Some(t), _) => relative.is_some_and(|r| r.abs() <= t),
                (_, Some(t)) => (simulated - x).abs() <= t,
                _ => false,
            };
        }
        pass &= self.minimum.is_none_or(|lo| simulated >= lo);
        pass &= self.maximum.is_none_or(|hi| simulated <= hi);
        (pass, relative)
    }
}

pub fn load_reference(text: &str) -> Result<ReferenceDocument> {
    let value = crate::model::parse_document(text)?;
    let doc: ReferenceDocument = crate::model::from_value(value)?;
    let v: Vec<String> = doc.entries.iter().flat_map(|e| e.violations()).collect();
    if v.is_empty() {
        Ok(doc)
    } else {
        Err(Error::Validation(v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Fail,
    NotProduced,
    Report,
}

impl Status {
    pub fn label(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::NotProduced => "not produced",
            Status::Report => "report",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub quantity: String,
    pub reference: Option<f64>,
    pub simulated: Option<f64>,
    pub relative_error: Option<f64>,
    pub status: Status,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonReport {
    /// True when no gating quantity failed or went missing.
    pub fn passed(&self) -> bool {
        self.rows
            .iter()
            .all(|r| matches!(r.status, Status::Pass | Status::Report))
    }

    pub fn to_csv(&self) -> String {
        let mut t = Table::new(&["quantity", "reference", "simulated", "relative_error", "status"]);
        let opt = |v: Option<f64>| v.map(num).unwrap_or_default();
        for r in &self.rows {
            t.row(&[
                r.quantity.clone(),
                opt(r.reference),
                opt(r.simulated),
                opt(r.relative_error),
                r.status.label().to_string(),
            ]);
        }
        t.render()
    }
}

/// Compare `summary` against every reference entry.
pub fn compare_report(summary: &BTreeMap<String, f64>, reference: &ReferenceDocument) -> ComparisonReport {
    let rows = reference
        .entries
        .iter()
        .map(|e| {
            let simulated = summary.get(&e.quantity).copied();
            let (status, relative_error) = match simulated {
                None if e.report_only => (Status::Report, None),
                None => (Status::NotProduced, None),
                Some(s) => {
                    let (pass, rel) = e.check(s);
                    let status = match (e.report_only, pass) {
                        (true, _) => Status::Report,
                        (false, true) => Status::Pass,
                        (false, false) => Status::Fail,
                    };
                    (status, rel)
                }
            };
            ComparisonRow {
                quantity: e.quantity.clone(),
                reference: e.value,
                simulated,
                relative_error,
                status,
            }
        })
        .collect();
    ComparisonReport { rows }
}

/// Parse a `quantity,value` summary table.
pub fn read_summary(text: &str) -> Result<BTreeMap<String, f64>> {
    let table = read_table(text)?;
    let q = table
        .column("quantity")
        .ok_or_else(|| Error::parse("summary has no 'quantity' column"))?;
    let values = table.numbers("value")?;
    Ok(table.rows.iter().map(|r| r[q].clone()).zip(values).collect())
}

/// Merge the summaries found at `paths`: each is a `summary.csv` or a
/// directory holding one. Later paths win on duplicate quantities.
pub fn collect_summaries(paths: &[&Path]) -> Result<BTreeMap<String, f64>> {
    let mut all = BTreeMap::new();
    for p in paths {
        let file = if p.is_dir() { p.join("summary.csv") } else { p.to_path_buf() };
        let text = std::fs::read_to_string(&file).map_err(|e| Error::io(&file, e))?;
        all.extend(read_summary(&text)?);
    }
    Ok(all)
}
