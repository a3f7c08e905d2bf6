//! File formats and atomic writes.

use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use besovlab::report::{format_f64, to_json_string};
use besovlab::verify::CheckReport;
use serde::{Deserialize, Serialize};

/// Write through a temporary file in the target directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp =
        tempfile::NamedTempFile::new_in(dir).with_context(|| format!("creating a file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn write_json<S: Serialize + ?Sized>(path: &Path, value: &S) -> Result<()> {
    write_atomic(path, to_json_string(value)?.as_bytes())
}

/// CSV with 17-digit floats.
pub fn write_table(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|v| format_f64(*v)))?;
    }
    write_atomic(path, &w.into_inner()?)
}

#[derive(Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportDoc {
    pub checks: Vec<CheckReport>,
}

impl ReportDoc {
    pub fn exact_failures(&self) -> usize {
        self.checks.iter().filter(|c| c.tier == besovlab::verify::Tier::Exact && !c.passed).count()
    }
}

/// One CSV row per check; maps are embedded as JSON text.
#[derive(Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub name: String,
    pub tier: String,
    pub passed: bool,
    pub vacuous: bool,
    pub tolerance: String,
    pub worst_case: String,
    pub fitted_constants: String,
    pub flags: String,
    pub module: String,
    pub operation: String,
    pub grid: String,
}

impl ReportRow {
    pub fn from_report(r: &CheckReport) -> Result<Self> {
        let tier = serde_json::to_value(r.tier)?.as_str().unwrap_or_default().to_string();
        Ok(ReportRow {
            name: r.name.clone(),
            tier,
            passed: r.passed,
            vacuous: r.vacuous,
            tolerance: format_f64(r.tolerance),
            worst_case: r.worst_case.clone(),
            fitted_constants: to_json_string(&r.fitted_constants)?.trim().to_string(),
            flags: serde_json::to_string(&r.flags)?,
            module: r.provenance.module.clone(),
            operation: r.provenance.operation.clone(),
            grid: r.provenance.grid.clone(),
        })
    }
}

pub fn reports_to_csv(reports: &[CheckReport]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if reports.is_empty() {
        w.write_record([
            "name",
            "tier",
            "passed",
            "vacuous",
            "tolerance",
            "worst_case",
            "fitted_constants",
            "flags",
            "module",
            "operation",
            "grid",
        ])?;
    }
    for r in reports {
        w.serialize(ReportRow::from_report(r)?)?;
    }
    Ok(w.into_inner()?)
}

pub fn read_report_doc(path: &Path) -> Result<ReportDoc> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing report {}", path.display()))
}

/// `point_id,value` rows, any order, every point exactly once.
pub fn read_field(path: &Path, n: usize) -> Result<Vec<f64>> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("reading field {}", path.display()))?;
    let mut out = vec![f64::NAN; n];
    for rec in rdr.deserialize::<(usize, f64)>() {
        let (id, v) = rec?;
        if id >= n {
            bail!("point id {id} out of range for {n} points");
        }
        if !out[id].is_nan() {
            bail!("point id {id} listed twice");
        }
        out[id] = v;
    }
    if let Some(id) = out.iter().position(|v| v.is_nan()) {
        bail!("field has no value for point {id}");
    }
    Ok(out)
}

/// Member ids, one per line; a header line is optional.
pub fn read_set(path: &Path) -> Result<Vec<usize>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading set {}", path.display()))?;
    let mut ids = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let tok = line.split(',').next().unwrap_or("").trim();
        if tok.is_empty() {
            continue;
        }
        match tok.parse::<usize>() {
            Ok(v) => ids.push(v),
            Err(_) if i == 0 => continue,
            Err(_) => bail!("line {}: {tok:?} is not a point id", i + 1),
        }
    }
    Ok(ids)
}
