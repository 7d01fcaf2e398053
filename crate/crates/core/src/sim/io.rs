//! CSV plumbing: data files with header `y,x1,...,xq`, long-form replication
//! records and aggregate tables. Numbers are written with Rust's shortest
//! round-trip formatting, so write-then-read reproduces values exactly.

use super::runner::{AggregateRow, RepRecord};
use super::Dataset;
use crate::error::{Error, Result};
use std::path::Path;

/// Read a data CSV (`y,x1,...,xq` header, comma separators, decimal points).
pub fn read_data_csv(path: &Path) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let headers = rdr.headers()?.clone();
    if headers.is_empty() || headers.get(0) != Some("y") {
        return Err(Error::Parse {
            line: 1,
            msg: format!(
                "expected header starting with 'y,x1,...', got '{}'",
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    let q = headers.len() - 1;
    for (j, name) in headers.iter().skip(1).enumerate() {
        let expect = format!("x{}", j + 1);
        if name != expect {
            return Err(Error::Parse {
                line: 1,
                msg: format!("expected column '{expect}', got '{name}'"),
            });
        }
    }
    if q == 0 {
        return Err(Error::Parse {
            line: 1,
            msg: "no covariate columns".into(),
        });
    }
    let mut y = Vec::new();
    let mut x = Vec::new();
    for (k, record) in rdr.records().enumerate() {
        let line = k + 2;
        let record = record?;
        if record.len() != q + 1 {
            return Err(Error::Parse {
                line,
                msg: format!("expected {} fields, got {}", q + 1, record.len()),
            });
        }
        let parse = |s: &str, what: &str| -> Result<f64> {
            let v: f64 = s.parse().map_err(|_| Error::Parse {
                line,
                msg: format!("cannot parse {what} value '{s}'"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    msg: format!("non-finite {what} value '{s}'"),
                });
            }
            Ok(v)
        };
        y.push(parse(&record[0], "response")?);
        for j in 0..q {
            x.push(parse(&record[j + 1], "covariate")?);
        }
    }
    Dataset::new(y, x, q)
}

pub fn write_data_csv(path: &Path, data: &Dataset) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path)?;
    let mut header = vec!["y".to_string()];
    for j in 1..=data.q {
        header.push(format!("x{j}"));
    }
    wtr.write_record(&header)?;
    for i in 0..data.n() {
        let mut row = vec![data.y[i].to_string()];
        for v in data.x_row(i) {
            row.push(v.to_string());
        }
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Long-form per-replication records (one row per replication × estimator).
pub fn write_rep_records(path: &Path, records: &[RepRecord]) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path)?;
    let q = records
        .iter()
        .find(|r| r.ok)
        .map_or(0, |r| r.beta_hat.len());
    let mut header = vec![
        "scheme".to_string(),
        "estimator".to_string(),
        "rep".to_string(),
        "seed".to_string(),
        "ok".to_string(),
    ];
    for j in 1..=q {
        header.push(format!("beta{j}"));
    }
    // wall time stays in the in-memory record only: output bytes are fully
    // determined by (config, seed)
    header.extend(
        [
            "h1",
            "h2",
            "gamma_hat",
            "alpha_hat",
            "sq_err_beta",
            "mean_sq_eta",
            "med_sq_eta",
            "error",
        ]
        .map(String::from),
    );
    wtr.write_record(&header)?;
    for r in records {
        let mut row = vec![
            r.scheme.name().to_string(),
            r.estimator.name().to_string(),
            r.rep.to_string(),
            r.seed.to_string(),
            r.ok.to_string(),
        ];
        for j in 0..q {
            row.push(r.beta_hat.get(j).map_or(String::new(), |v| v.to_string()));
        }
        row.push(r.h1.to_string());
        row.push(r.h2.to_string());
        row.push(r.gamma_hat.map_or(String::new(), |v| v.to_string()));
        row.push(r.alpha_hat.to_string());
        row.push(r.sq_err_beta.to_string());
        row.push(r.mean_sq_eta.to_string());
        row.push(r.med_sq_eta.to_string());
        row.push(r.error.clone().unwrap_or_default());
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Aggregate table: one row per scheme × estimator.
pub fn write_aggregates(path: &Path, rows: &[AggregateRow]) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path)?;
    wtr.write_record([
        "scheme",
        "estimator",
        "mse_beta",
        "mse_eta",
        "medse_eta",
        "median_h1",
        "median_h2",
        "n_reps",
        "n_failed",
    ])?;
    for r in rows {
        wtr.write_record(&[
            r.scheme.name().to_string(),
            r.estimator.name().to_string(),
            r.mse_beta.to_string(),
            r.mse_eta.to_string(),
            r.medse_eta.to_string(),
            r.median_h1.to_string(),
            r.median_h2.to_string(),
            r.n_reps.to_string(),
            r.n_failed.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
