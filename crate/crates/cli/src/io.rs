//! Observation CSV files and parameter lists.
//!
//! Observation files carry a header `x0,xt,t` followed by `z1,...,zd` for covariates.

use std::io::Write;
use std::path::Path;

use bdp_core::process::Observation;

use crate::error::CliError;

/// Parses an observation CSV. A file with only a header (or nothing at all) yields no rows.
pub fn parse_observations(input: &[u8]) -> Result<Vec<Observation>, CliError> {
    let text = std::str::from_utf8(input)
        .map_err(|e| CliError::Data(format!("data is not UTF-8: {e}")))?;
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| CliError::Data(format!("header: {e}")))?
        .clone();
    let names: Vec<&str> = headers.iter().collect();
    if names.len() < 3 || names[..3] != ["x0", "xt", "t"] {
        return Err(CliError::Data(format!(
            "header must start with `x0,xt,t`, found `{}`",
            names.join(",")
        )));
    }
    for (j, name) in names[3..].iter().enumerate() {
        if *name != format!("z{}", j + 1) {
            return Err(CliError::Data(format!(
                "covariate column {} must be named `z{}`, found `{name}`",
                j + 4,
                j + 1
            )));
        }
    }
    let dim = names.len() - 3;

    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| CliError::Data(format!("row {row}: {e}")))?;
        if record.len() != dim + 3 {
            return Err(CliError::Data(format!(
                "row {row}: expected {} fields, found {}",
                dim + 3,
                record.len()
            )));
        }
        let state = |j: usize| -> Result<usize, CliError> {
            record[j].parse::<usize>().map_err(|_| {
                CliError::Data(format!(
                    "row {row}: `{}` must be a nonnegative integer, found `{}`",
                    names[j], &record[j]
                ))
            })
        };
        let real = |j: usize| -> Result<f64, CliError> {
            match record[j].parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(CliError::Data(format!(
                    "row {row}: `{}` must be a finite number, found `{}`",
                    names[j], &record[j]
                ))),
            }
        };
        let a = state(0)?;
        let b = state(1)?;
        let t = real(2)?;
        if t < 0.0 {
            return Err(CliError::Data(format!(
                "row {row}: `t` must be nonnegative, found {t}"
            )));
        }
        let z = (3..dim + 3).map(real).collect::<Result<Vec<_>, _>>()?;
        out.push(Observation::with_covariates(a, b, t, z));
    }
    Ok(out)
}

pub fn read_observations(path: &Path) -> Result<Vec<Observation>, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    parse_observations(&bytes).map_err(|e| match e {
        CliError::Data(msg) => CliError::Data(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Writes observations with the header implied by the covariate count of the first row.
pub fn write_observations<W: Write>(mut w: W, data: &[Observation]) -> std::io::Result<()> {
    let dim = data.first().map_or(0, |o| o.z.len());
    let mut header = String::from("x0,xt,t");
    for j in 1..=dim {
        header.push_str(&format!(",z{j}"));
    }
    writeln!(w, "{header}")?;
    for obs in data {
        write!(w, "{},{},{}", obs.a, obs.b, obs.t)?;
        for z in &obs.z {
            write!(w, ",{z}")?;
        }
        writeln!(w)?;
    }
    w.flush()
}

/// Parses a comma-separated list of finite numbers such as `0.5,0.3`.
pub fn parse_params(input: &str) -> Result<Vec<f64>, CliError> {
    if input.trim().is_empty() {
        return Err(CliError::Usage("parameter list is empty".into()));
    }
    input
        .split(',')
        .enumerate()
        .map(|(i, item)| match item.trim().parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(CliError::Usage(format!(
                "parameter {}: expected a finite number, found `{}`",
                i + 1,
                item.trim()
            ))),
        })
        .collect()
}
