//! CSV and JSON readers / writers for populations, samples and results.

use std::io::{Read, Write};

use crate::design::Sample;
use crate::estimators::EstimatorResult;
use crate::population::Population;

/// Fixed 17-significant-digit rendering, so equal numbers give equal bytes.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_population_csv<W: Write>(pop: &Population, out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["unit_id".to_string(), "y".to_string()];
    header.extend((1..=pop.p).map(|j| format!("z_{j}")));
    header.push("cell_id".into());
    w.write_record(&header)?;
    for i in 0..pop.len() {
        let mut rec = vec![i.to_string(), fmt_num(pop.y[i])];
        rec.extend(pop.z_row(i).iter().map(|v| fmt_num(*v)));
        rec.push(pop.cell_id[i].to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sample_csv<W: Write>(s: &Sample, out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["unit_id".to_string(), "y".to_string()];
    header.extend((1..=s.p).map(|j| format!("z_{j}")));
    header.push("cell_id".into());
    header.push("w".into());
    w.write_record(&header)?;
    for i in 0..s.len() {
        let mut rec = vec![s.unit_ids[i].to_string(), fmt_num(s.y[i])];
        rec.extend(s.z_row(i).iter().map(|v| fmt_num(*v)));
        rec.push(s.cell_id[i].to_string());
        rec.push(fmt_num(s.w[i]));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// A sample CSV as read from disk, plus the optional columns used by some estimators.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleTable {
    pub sample: Sample,
    pub domain: Option<Vec<bool>>,
    /// Index of the column named `x` within `z`, when present.
    pub x_col: Option<usize>,
    pub has_weights: bool,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TableError {
    #[error("missing required column {0:?}")]
    MissingColumn(String),
    #[error("row {row}, column {column:?}: cannot parse {value:?}")]
    BadValue { row: usize, column: String, value: String },
    #[error("csv: {0}")]
    Csv(String),
    #[error("{0}")]
    Invalid(String),
}

fn parse_f64(row: usize, column: &str, value: &str) -> Result<f64, TableError> {
    value.trim().parse::<f64>().map_err(|_| TableError::BadValue {
        row,
        column: column.to_string(),
        value: value.to_string(),
    })
}

/// Reads a sample CSV with columns `y`, optional `w`, `z_*`, optional
/// `cell_id`, `domain` and `x`. A missing `w` column means unit weights and
/// is reported through `has_weights`. The `x` column, when present, is
/// appended to `z` as its last column.
pub fn read_sample_csv<R: Read>(input: R) -> Result<SampleTable, TableError> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers().map_err(|e| TableError::Csv(e.to_string()))?.clone();
    let find = |name: &str| headers.iter().position(|h| h.trim() == name);

    let y_idx = find("y").ok_or_else(|| TableError::MissingColumn("y".into()))?;
    let w_idx = find("w");
    let cell_idx = find("cell_id");
    let domain_idx = find("domain");
    let x_idx = find("x");
    let mut z_cols: Vec<(usize, usize)> = headers
        .iter()
        .enumerate()
        .filter_map(|(i, h)| h.trim().strip_prefix("z_").and_then(|k| k.parse::<usize>().ok()).map(|k| (k, i)))
        .collect();
    z_cols.sort();
    let mut z_idx: Vec<usize> = z_cols.into_iter().map(|(_, i)| i).collect();
    let x_col = x_idx.map(|i| {
        z_idx.push(i);
        z_idx.len() - 1
    });
    let p = z_idx.len();

    let (mut y, mut z, mut w, mut cell, mut domain) = (Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| TableError::Csv(e.to_string()))?;
        let line = row + 2;
        let get = |i: usize| rec.get(i).unwrap_or("");
        y.push(parse_f64(line, "y", get(y_idx))?);
        for &i in &z_idx {
            z.push(parse_f64(line, &headers[i], get(i))?);
        }
        w.push(match w_idx {
            Some(i) => parse_f64(line, "w", get(i))?,
            None => 1.0,
        });
        cell.push(match cell_idx {
            Some(i) => get(i).trim().parse::<usize>().map_err(|_| TableError::BadValue {
                row: line,
                column: "cell_id".into(),
                value: get(i).to_string(),
            })?,
            None => 0,
        });
        if let Some(i) = domain_idx {
            domain.push(parse_f64(line, "domain", get(i))? != 0.0);
        }
    }
    let sample = Sample::from_columns(y, z, p, w, cell).map_err(|e| TableError::Invalid(e.to_string()))?;
    Ok(SampleTable {
        sample,
        domain: domain_idx.map(|_| domain),
        x_col,
        has_weights: w_idx.is_some(),
    })
}

/// Writes estimator results, one row per component, with row-level error codes.
pub fn write_results_csv<W: Write>(
    rows: &[(String, Result<EstimatorResult, crate::Error>)],
    out: W,
) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["estimator", "component", "value", "n_used", "weight_cv", "error"])?;
    for (name, res) in rows {
        match res {
            Ok(r) => {
                for (k, v) in r.value.iter().enumerate() {
                    w.write_record([
                        name.clone(),
                        k.to_string(),
                        fmt_num(*v),
                        r.n_used.to_string(),
                        r.diagnostics.get("weight_cv").map(|c| fmt_num(*c)).unwrap_or_default(),
                        String::new(),
                    ])?;
                }
                if let Some(c) = r.diagnostics.get("contrast") {
                    w.write_record([
                        name.clone(),
                        "contrast".into(),
                        fmt_num(*c),
                        r.n_used.to_string(),
                        String::new(),
                        String::new(),
                    ])?;
                }
            }
            Err(e) => {
                w.write_record([name.clone(), String::new(), String::new(), String::new(), String::new(), e.code().into()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
