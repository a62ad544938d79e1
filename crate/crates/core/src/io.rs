//! CSV export and import of branches, profiles and fields.

use std::io::{Read, Write};

use thiserror::Error;

use crate::branch::{BranchCurve, SolitonProfile};
use crate::extended::ExtReal;
use crate::variational::FieldState;

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("expected columns {expected:?}, found {found:?}")]
    Header { expected: Vec<&'static str>, found: Vec<String> },
    #[error("row {row}: {msg}")]
    Row { row: usize, msg: String },
    #[error("{0}")]
    Grid(String),
}

/// 17 significant digits; infinities as `inf` and `-inf`.
pub fn fmt_real(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v:.16e}")
    }
}

fn parse_real(s: &str, row: usize) -> Result<f64, IoError> {
    let s = s.trim();
    match s {
        "inf" | "+inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        _ => s.parse().map_err(|_| IoError::Row { row, msg: format!("not a number: {s:?}") }),
    }
}

fn write_table<W: Write>(out: W, header: &[&str], rows: impl Iterator<Item = Vec<f64>>) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.into_iter().map(fmt_real))?;
    }
    w.flush()?;
    Ok(())
}

fn read_table<R: Read>(input: R, header: &[&'static str]) -> Result<Vec<Vec<f64>>, IoError> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let found: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if found.len() < header.len() || found.iter().zip(header).any(|(a, b)| a != b) {
        return Err(IoError::Header { expected: header.to_vec(), found });
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = (0..header.len())
            .map(|j| parse_real(rec.get(j).unwrap_or(""), i + 1))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Ok(rows)
}

pub const BRANCH_HEADER: [&str; 4] = ["lambda", "m_lambda", "rho_lambda", "quad_error"];
pub const PROFILE_HEADER: [&str; 3] = ["x", "u", "du_dx"];
pub const FIELD_HEADER: [&str; 2] = ["x", "u"];

pub fn write_branch_csv<W: Write>(out: W, curve: &BranchCurve) -> Result<(), IoError> {
    let rows = curve.points.iter().map(|p| vec![p.lambda, p.m_lambda, p.rho_lambda, p.quad_error]);
    write_table(out, &BRANCH_HEADER, rows)
}

pub fn write_profile_csv<W: Write>(out: W, profile: &SolitonProfile) -> Result<(), IoError> {
    let rows = (0..profile.x.len()).map(|i| vec![profile.x[i], profile.u[i], profile.du_dx[i]]);
    write_table(out, &PROFILE_HEADER, rows)
}

pub fn write_field_csv<W: Write>(out: W, field: &FieldState) -> Result<(), IoError> {
    let rows = field.grid().into_iter().zip(&field.values).map(|(x, u)| vec![x, *u]);
    write_table(out, &FIELD_HEADER, rows)
}

/// Reads `x, u, du_dx` columns back into a profile for the given `lambda`.
/// The half-support is not stored and comes back as `+inf`.
pub fn read_profile_csv<R: Read>(input: R, lambda: f64) -> Result<SolitonProfile, IoError> {
    let rows = read_table(input, &PROFILE_HEADER)?;
    if rows.len() < 3 {
        return Err(IoError::Grid("a profile needs at least 3 rows".into()));
    }
    let x: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    check_uniform(&x)?;
    let u: Vec<f64> = rows.iter().map(|r| r[1]).collect();
    let du_dx = rows.iter().map(|r| r[2]).collect();
    let peak = u.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(SolitonProfile { x, u, du_dx, lambda, peak, half_support: ExtReal::INFINITY })
}

/// Reads `x, u` columns on the periodic grid `x_j = -L + j dx`.
pub fn read_field_csv<R: Read>(input: R, m: u32) -> Result<FieldState, IoError> {
    let rows = read_table(input, &FIELD_HEADER)?;
    if rows.len() < 2 {
        return Err(IoError::Grid("a field needs at least 2 rows".into()));
    }
    let x: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    check_uniform(&x)?;
    let half_length = -x[0];
    let dx = x[1] - x[0];
    if ((2.0 * half_length) / rows.len() as f64 - dx).abs() > 1e-9 * dx {
        return Err(IoError::Grid("grid does not start at -L with spacing 2L/n".into()));
    }
    let values = rows.iter().map(|r| r[1]).collect();
    FieldState::new(half_length, values, m).map_err(|e| IoError::Grid(e.to_string()))
}

fn check_uniform(x: &[f64]) -> Result<(), IoError> {
    let dx = x[1] - x[0];
    if !(dx > 0.0) {
        return Err(IoError::Grid("x must be increasing".into()));
    }
    for (i, w) in x.windows(2).enumerate() {
        if ((w[1] - w[0]) - dx).abs() > 1e-8 * dx {
            return Err(IoError::Grid(format!("non-uniform spacing at row {}", i + 2)));
        }
    }
    Ok(())
}
