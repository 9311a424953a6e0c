//! CSV ingestion of study records, JSON result records and the meta-analysis
//! report layout.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::adaptive::AdaptiveConfig;
use crate::error::{Error, Result};
use crate::global_tests::{CombinedResult, GlobalMethod, TestOptions};
use crate::qualint::{gail_simon_lrt, ibga, pool_groups, qualitative_interaction_test, StudyRecord, TauMode};

/// Study records read from one CSV source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub source: String,
    pub records: Vec<StudyRecord>,
}

impl Dataset {
    /// Reads `id,group,estimate,std_err` rows. The `group` column may be
    /// missing or left empty.
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Dataset::from_csv_str(&text, &path.display().to_string())
    }

    pub fn from_csv_str(text: &str, source: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let header = rdr.headers().map_err(|e| Error::Parse(format!("line 1: {e}")))?.clone();
        let col = |name: &str| header.iter().position(|h| h.eq_ignore_ascii_case(name));
        let missing: Vec<&str> = ["id", "estimate", "std_err"].into_iter().filter(|c| col(c).is_none()).collect();
        if !missing.is_empty() {
            return Err(Error::Parse(format!("line 1: missing column(s) {}", missing.join(", "))));
        }
        let (id, est, se, group) = (col("id").unwrap(), col("estimate").unwrap(), col("std_err").unwrap(), col("group"));

        let mut records = Vec::new();
        for row in rdr.records() {
            let row = row.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line());
                Error::Parse(format!("line {line}: {e}"))
            })?;
            let line = row.position().map_or(0, |p| p.line());
            let field = |k: usize| row.get(k).unwrap_or("");
            let number = |k: usize, name: &str| -> Result<f64> {
                field(k)
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("line {line}: {name} is not a number ('{}')", field(k))))
            };
            let estimate = number(est, "estimate")?;
            let std_err = number(se, "std_err")?;
            if !estimate.is_finite() {
                return Err(Error::Parse(format!("line {line}: estimate must be finite")));
            }
            if !(std_err > 0.0 && std_err.is_finite()) {
                return Err(Error::Parse(format!("line {line}: std_err must be positive")));
            }
            let group = group.map(field).filter(|g| !g.is_empty()).map(str::to_string);
            records.push(StudyRecord {
                id: field(id).to_string(),
                group,
                estimate,
                std_err,
            });
        }
        if records.is_empty() {
            return Err(Error::Parse(format!("{source}: no data rows")));
        }
        Ok(Dataset {
            source: source.to_string(),
            records,
        })
    }

    pub fn to_csv(&self) -> String {
        write_csv(&self.records)
    }

    /// One record per group, pooled by inverse-variance weighting.
    pub fn pooled(&self) -> Result<Dataset> {
        Ok(Dataset {
            source: self.source.clone(),
            records: pool_groups(&self.records)?,
        })
    }
}

pub fn parse_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    Dataset::from_path(path)
}

/// Emits records in the format [`Dataset::from_csv_str`] reads. Floats use
/// the shortest representation that parses back to the same value.
pub fn write_csv(records: &[StudyRecord]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["id", "group", "estimate", "std_err"]).expect("in-memory write");
    for r in records {
        let est = r.estimate.to_string();
        let se = r.std_err.to_string();
        w.write_record([r.id.as_str(), r.group.as_deref().unwrap_or(""), &est, &se])
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

/// Parses p-values separated by commas, whitespace or newlines. Lines
/// starting with `#` are skipped.
pub fn parse_pvalues(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        for tok in line.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()) {
            let p: f64 = tok
                .parse()
                .map_err(|_| Error::Parse(format!("line {}: '{tok}' is not a number", k + 1)))?;
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Parse(format!("line {}: p-value {p} is outside [0, 1]", k + 1)));
            }
            out.push(p);
        }
    }
    if out.is_empty() {
        return Err(Error::Parse("no p-values found".into()));
    }
    Ok(out)
}

/// Machine-readable result of one combination test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultJson {
    pub method: GlobalMethod,
    pub tau: f64,
    pub n_used: usize,
    pub p_combined: f64,
    /// `null` when the statistic is not finite (e.g. HC over an empty range).
    pub statistic: Option<f64>,
    pub seed: u64,
}

impl ResultJson {
    pub fn new(r: &CombinedResult, seed: u64) -> Self {
        ResultJson {
            method: r.method,
            tau: r.tau,
            n_used: r.n_used,
            p_combined: r.p_combined,
            statistic: r.statistic.is_finite().then_some(r.statistic),
            seed,
        }
    }
}

/// Combined p-values for one dataset in the layout of the meta-analysis
/// table: Bonferroni and Fisher under τ ∈ {1, 0.5, 0.8, adaptive}, then
/// IBGA and the likelihood ratio test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaReport {
    pub dataset: String,
    pub n: usize,
    pub rows: Vec<MetaRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaRow {
    pub method: String,
    /// Unconditional, τ = 0.5, τ = 0.8, adaptive. IBGA and LRT fill only the first.
    pub p_values: [Option<f64>; 4],
}

pub const META_COLUMNS: [&str; 4] = ["Unc.", "tau = 0.5", "tau = 0.8", "tau adaptive"];

pub fn meta_report(label: &str, records: &[StudyRecord], opts: &TestOptions) -> Result<MetaReport> {
    let modes = [
        TauMode::Unconditional,
        TauMode::Fixed(0.5),
        TauMode::Fixed(0.8),
        TauMode::Adaptive(AdaptiveConfig::default()),
    ];
    let mut rows = Vec::new();
    for (method, name) in [(GlobalMethod::Bonferroni, "Bonferroni"), (GlobalMethod::Fisher, "Fisher")] {
        let mut p_values = [None; 4];
        for (slot, mode) in p_values.iter_mut().zip(&modes) {
            *slot = Some(qualitative_interaction_test(records, method, mode, opts)?.p_final);
        }
        rows.push(MetaRow {
            method: name.into(),
            p_values,
        });
    }
    rows.push(MetaRow {
        method: "IBGA".into(),
        p_values: [Some(ibga(records)?.p_final), None, None, None],
    });
    rows.push(MetaRow {
        method: "LRT".into(),
        p_values: [Some(gail_simon_lrt(records)?.p_value), None, None, None],
    });
    Ok(MetaReport {
        dataset: label.to_string(),
        n: records.len(),
        rows,
    })
}

/// p-values to three decimals, with "<0.001" below that.
pub fn format_p(p: f64) -> String {
    if p < 0.0005 {
        "<0.001".into()
    } else if p >= 0.9995 {
        "1".into()
    } else {
        format!("{p:.3}")
    }
}

pub fn render_meta_reports(reports: &[MetaReport]) -> String {
    let mut out = String::new();
    let _ = write!(out, "{:<32} {:<12}", "Dataset", "Method");
    for c in META_COLUMNS {
        let _ = write!(out, " {c:>13}");
    }
    out.push('\n');
    for r in reports {
        for (k, row) in r.rows.iter().enumerate() {
            let name = if k == 0 { format!("{} (n={})", r.dataset, r.n) } else { String::new() };
            let _ = write!(out, "{name:<32} {:<12}", row.method);
            for p in &row.p_values {
                let _ = write!(out, " {:>13}", p.map(format_p).unwrap_or_default());
            }
            out.push('\n');
        }
    }
    out
}
