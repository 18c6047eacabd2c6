//! Run results and their on-disk form: `summary.json`, `series_*.csv`,
//! `field_*.csv`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::Context;
use catforge::analysis::Field;
use serde::Serialize;

use crate::config::{Check, ExperimentConfig, SCHEMA_VERSION};

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        Self { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FieldOut {
    pub name: String,
    pub labels: BTreeMap<String, f64>,
    pub field: Field,
}

/// What an experiment produces before checks are applied.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Outcome {
    pub scalars: BTreeMap<String, f64>,
    pub tables: Vec<Table>,
    pub fields: Vec<FieldOut>,
    pub warnings: Vec<String>,
}

impl Outcome {
    pub fn scalar(&mut self, name: impl Into<String>, value: f64) {
        self.scalars.insert(name.into(), value);
    }
}

/// `metric@axis=value,...`, with values in shortest round-trip form.
pub fn point_name(metric: &str, axes: &[(&str, f64)]) -> String {
    let coords: Vec<String> = axes.iter().map(|(k, v)| format!("{k}={v}")).collect();
    format!("{metric}@{}", coords.join(","))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    #[serde(flatten)]
    pub check: Check,
    pub value: Option<f64>,
    pub pass: bool,
}

pub fn evaluate(checks: &[Check], scalars: &BTreeMap<String, f64>) -> Vec<CheckResult> {
    checks
        .iter()
        .map(|c| {
            let value = scalars.get(&c.scalar).copied();
            let pass = value.is_some_and(|v| c.min.is_none_or(|m| v >= m) && c.max.is_none_or(|m| v <= m));
            CheckResult { check: c.clone(), value, pass }
        })
        .collect()
}

#[derive(Debug, Serialize)]
struct TableMeta<'a> {
    name: &'a str,
    file: String,
    columns: &'a [String],
    rows: usize,
}

#[derive(Debug, Serialize)]
struct FieldMeta<'a> {
    name: &'a str,
    file: String,
    labels: &'a BTreeMap<String, f64>,
    re_range: (f64, f64),
    im_range: (f64, f64),
    n_re: usize,
    n_im: usize,
}

#[derive(Debug, Serialize)]
struct Summary<'a> {
    schema_version: u32,
    catforge_version: &'static str,
    experiment: &'static str,
    name: &'a str,
    source: &'a str,
    config: &'a ExperimentConfig,
    dims_bump: usize,
    workers: usize,
    wall_time_s: f64,
    pass: bool,
    checks: &'a [CheckResult],
    scalars: &'a BTreeMap<String, f64>,
    warnings: &'a [String],
    tables: Vec<TableMeta<'a>>,
    fields: Vec<FieldMeta<'a>>,
}

/// Everything about one run that goes into the summary besides the outcome.
pub struct RunInfo<'a> {
    pub config: &'a ExperimentConfig,
    pub source: &'a str,
    pub dims_bump: usize,
    pub workers: usize,
    pub wall_time_s: f64,
}

fn file_stem(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || "._-".contains(c) { c } else { '_' }).collect()
}

// Debug formatting is the shortest string that parses back to the same f64.
fn num(v: f64) -> String {
    format!("{v:?}")
}

pub fn write(dir: &Path, info: &RunInfo, outcome: &Outcome, checks: &[CheckResult]) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tables = Vec::new();
    for t in &outcome.tables {
        let file = format!("series_{}.csv", file_stem(&t.name));
        let mut w = csv::Writer::from_path(dir.join(&file))?;
        w.write_record(&t.columns)?;
        for row in &t.rows {
            w.write_record(row.iter().map(|&v| num(v)))?;
        }
        w.flush()?;
        tables.push(TableMeta { name: &t.name, file, columns: &t.columns, rows: t.rows.len() });
    }
    let mut fields = Vec::new();
    for f in &outcome.fields {
        let file = format!("field_{}.csv", file_stem(&f.name));
        let mut w = csv::Writer::from_path(dir.join(&file))?;
        w.write_record(["re_alpha", "im_alpha", "value"])?;
        for (z, v) in f.field.cells() {
            w.write_record([num(z.re), num(z.im), num(v)])?;
        }
        w.flush()?;
        let g = &f.field.grid;
        fields.push(FieldMeta {
            name: &f.name,
            file,
            labels: &f.labels,
            re_range: g.re_range,
            im_range: g.im_range,
            n_re: g.n_re,
            n_im: g.n_im,
        });
    }
    let summary = Summary {
        schema_version: SCHEMA_VERSION,
        catforge_version: env!("CARGO_PKG_VERSION"),
        experiment: info.config.experiment.kind(),
        name: &info.config.name,
        source: info.source,
        config: info.config,
        dims_bump: info.dims_bump,
        workers: info.workers,
        wall_time_s: info.wall_time_s,
        pass: checks.iter().all(|c| c.pass),
        checks,
        scalars: &outcome.scalars,
        warnings: &outcome.warnings,
        tables,
        fields,
    };
    let text = serde_json::to_string_pretty(&summary)? + "\n";
    fs::write(dir.join("summary.json"), text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_names_are_stable() {
        assert_eq!(point_name("fidelity", &[("alpha_f", 1.5), ("k12_tau", 20.0)]), "fidelity@alpha_f=1.5,k12_tau=20");
        assert_eq!(file_stem("wigner@alpha1=1.04,t=25"), "wigner_alpha1_1.04_t_25");
    }

    #[test]
    fn missing_scalars_fail_their_check() {
        let scalars = BTreeMap::from([("a".to_string(), 0.5)]);
        let checks = [
            Check { scalar: "a".into(), min: Some(0.4), max: None },
            Check { scalar: "a".into(), min: None, max: Some(0.4) },
            Check { scalar: "b".into(), min: Some(0.0), max: None },
        ];
        let r = evaluate(&checks, &scalars);
        assert_eq!(r.iter().map(|c| c.pass).collect::<Vec<_>>(), [true, false, false]);
        assert_eq!(r[2].value, None);
    }

    #[test]
    fn nan_never_passes() {
        let scalars = BTreeMap::from([("a".to_string(), f64::NAN)]);
        let r = evaluate(&[Check { scalar: "a".into(), min: Some(0.0), max: None }], &scalars);
        assert!(!r[0].pass);
    }
}
