//! CSV and JSON tables.
//!
//! Errors, step sizes and timings are printed in scientific notation with
//! four significant digits and a two-digit exponent (`6.713e-03`); orders
//! carry two decimals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::runner::ResultRow;

/// `6.713e-03`
pub fn sci(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    let s = format!("{x:.3e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

pub fn kappa_cell(k: Option<f64>) -> String {
    match k {
        None => String::new(),
        Some(x) if x.is_nan() => "undefined".into(),
        Some(x) => format!("{x:.2}"),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TableKind {
    Space,
    Time,
    Solve,
}

impl TableKind {
    pub fn header(&self) -> &'static [&'static str] {
        match self {
            TableKind::Space => &["N", "err", "wall_seconds", "iters"],
            TableKind::Time => &["tau", "err", "kappa", "wall_seconds", "iters"],
            TableKind::Solve => &["N", "tau", "M", "err", "wall_seconds", "iters"],
        }
    }
}

fn cells(kind: TableKind, r: &ResultRow) -> Vec<String> {
    match kind {
        TableKind::Space => vec![
            r.n_modes.to_string(),
            sci(r.err),
            sci(r.wall_seconds),
            r.iters.to_string(),
        ],
        TableKind::Time => vec![
            sci(r.tau),
            sci(r.err),
            kappa_cell(r.kappa),
            sci(r.wall_seconds),
            r.iters.to_string(),
        ],
        TableKind::Solve => vec![
            r.n_modes.to_string(),
            sci(r.tau),
            r.steps.to_string(),
            sci(r.err),
            sci(r.wall_seconds),
            r.iters.to_string(),
        ],
    }
}

pub fn to_csv(kind: TableKind, rows: &[ResultRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Config(format!("csv: {e}"));
    w.write_record(kind.header()).map_err(io)?;
    for r in rows {
        w.write_record(cells(kind, r)).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is ASCII"))
}

/// A row as read back from a table. Columns a table does not carry are
/// `None`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParsedRow {
    #[serde(rename = "N", default)]
    pub n_modes: Option<usize>,
    #[serde(default)]
    pub tau: Option<f64>,
    #[serde(rename = "M", default)]
    pub steps: Option<usize>,
    pub err: f64,
    #[serde(default, deserialize_with = "parse_kappa")]
    pub kappa: Option<f64>,
    pub wall_seconds: f64,
    pub iters: usize,
}

fn parse_kappa<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Option<f64>, D::Error> {
    let s = String::deserialize(d)?;
    match s.as_str() {
        "" => Ok(None),
        "undefined" => Ok(Some(f64::NAN)),
        other => other.parse().map(Some).map_err(serde::de::Error::custom),
    }
}

pub fn parse_csv(text: &str) -> Result<Vec<ParsedRow>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    r.deserialize()
        .map(|row| row.map_err(|e| Error::Config(format!("csv: {e}"))))
        .collect()
}

impl ParsedRow {
    /// Back to a full row; missing columns become zero.
    pub fn into_row(self) -> ResultRow {
        ResultRow {
            n_modes: self.n_modes.unwrap_or(0),
            tau: self.tau.unwrap_or(0.0),
            steps: self.steps.unwrap_or(0),
            err: self.err,
            kappa: self.kappa,
            wall_seconds: self.wall_seconds,
            iters: self.iters,
        }
    }
}

pub fn to_json(rows: &[ResultRow]) -> Result<String> {
    serde_json::to_string_pretty(rows).map_err(|e| Error::Config(format!("json: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(n: usize, tau: f64, err: f64, kappa: Option<f64>) -> ResultRow {
        ResultRow {
            n_modes: n,
            tau,
            steps: 100,
            err,
            kappa,
            wall_seconds: 0.012345,
            iters: 7,
        }
    }

    #[test]
    fn scientific_format() {
        assert_eq!(sci(6.713e-3), "6.713e-03");
        assert_eq!(sci(3.742e-13), "3.742e-13");
        assert_eq!(sci(1.0), "1.000e+00");
        assert_eq!(sci(123456.0), "1.235e+05");
        assert_eq!(sci(0.0), "0.000e+00");
        assert_eq!(kappa_cell(Some(1.996)), "2.00");
        assert_eq!(kappa_cell(None), "");
        assert_eq!(kappa_cell(Some(f64::NAN)), "undefined");
    }

    #[test]
    fn headers() {
        let rows = vec![row(4, 1e-7, 6.713e-3, None)];
        assert!(to_csv(TableKind::Space, &rows)
            .unwrap()
            .starts_with("N,err,wall_seconds,iters\n4,6.713e-03,1.235e-02,7\n"));
        assert!(to_csv(TableKind::Time, &rows)
            .unwrap()
            .starts_with("tau,err,kappa,wall_seconds,iters\n1.000e-07,6.713e-03,,"));
    }

    #[test]
    fn csv_round_trip() {
        let rows = vec![
            row(32, 1e-5, 3.8824e-9, None),
            row(32, 5e-6, 9.7051e-10, Some(2.0001)),
            row(32, 2.5e-6, 0.0, Some(f64::NAN)),
        ];
        for kind in [TableKind::Space, TableKind::Time, TableKind::Solve] {
            let text = to_csv(kind, &rows).unwrap();
            let parsed: Vec<ResultRow> = parse_csv(&text).unwrap().into_iter().map(ParsedRow::into_row).collect();
            assert_eq!(parsed.len(), 3);
            assert_eq!(to_csv(kind, &parsed).unwrap(), text);
        }
        let parsed = parse_csv(&to_csv(TableKind::Time, &rows).unwrap()).unwrap();
        assert_eq!(parsed[0].kappa, None);
        assert_eq!(parsed[1].kappa, Some(2.0));
        assert!(parsed[2].kappa.unwrap().is_nan());
        assert_eq!(parsed[1].err, 9.705e-10);
        assert_eq!(parsed[0].n_modes, None);
    }

    #[test]
    fn json_rows() {
        let text = to_json(&[row(8, 1e-6, 1e-4, None), row(8, 5e-7, 2.5e-5, Some(f64::NAN))]).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v[0]["N"], 8);
        assert!(v[0]["kappa"].is_null());
        assert_eq!(v[1]["kappa"], "undefined");
    }
}
