//! Sweep tables as CSV.
//!
//! One header line, then one row per `(scenario, omega0c, k)`. Numbers are
//! plain decimals with nine significant digits, missing quantities are
//! empty fields, and annotation tokens are joined with `;`. The column set
//! is versioned by [`SCHEMA_VERSION`].

use std::io;

use raman_twa::stats::Estimate;
use raman_twa::sweep::SweepRow;

pub const SCHEMA_VERSION: u32 = 1;

pub const COLUMNS: [&str; 20] = [
    "scenario",
    "omega0c",
    "k",
    "dV_E",
    "dV_E_err",
    "dV_Q",
    "dV_Q_err",
    "V_E_g",
    "V_E_0",
    "V_Q_g",
    "V_Q_0",
    "dV_E_th",
    "dV_Q_th",
    "dVp_Q_th",
    "mean_Q_re",
    "mean_Q_err",
    "theta_min",
    "V_min",
    "V_max",
    "annotation",
];

/// Numeric columns between `k` and `annotation`.
const VALUES: usize = 16;

/// Nine significant digits, positional notation, no exponent.
pub fn format_number(x: f64) -> String {
    let x = if x == 0.0 { 0.0 } else { x };
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("exponent digits");
    let (sign, mantissa) = match mantissa.strip_prefix('-') {
        Some(m) => ("-", m),
        None => ("", mantissa),
    };
    let digits: String = mantissa.chars().filter(|c| *c != '.').collect();
    let body = if exp < 0 {
        format!("0.{}{digits}", "0".repeat((-exp - 1) as usize))
    } else if (exp as usize) < digits.len() - 1 {
        let (int, frac) = digits.split_at(exp as usize + 1);
        format!("{int}.{frac}")
    } else {
        format!("{digits}{}", "0".repeat(exp as usize + 1 - digits.len()))
    };
    format!("{sign}{body}")
}

fn opt(x: Option<f64>) -> String {
    match x {
        Some(v) if v.is_finite() => format_number(v),
        _ => String::new(),
    }
}

/// One CSV row, typed.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub scenario: String,
    pub omega0c: f64,
    pub k: i64,
    /// `dV_E` through `V_max`, in column order.
    pub values: [Option<f64>; VALUES],
    pub annotation: Vec<String>,
}

impl CsvRow {
    pub fn from_sweep(row: &SweepRow) -> Self {
        let v = |e: Option<Estimate>| e.map(|e| e.value);
        let err = |e: Option<Estimate>| e.map(|e| e.err);
        let sq = row.squeezing.as_ref();
        Self {
            scenario: row.scenario.name().to_owned(),
            omega0c: row.omega0c,
            k: row.k,
            values: [
                v(row.dv_e),
                err(row.dv_e),
                v(row.dv_q),
                err(row.dv_q),
                v(row.v_e_g),
                v(row.v_e_0),
                v(row.v_q_g),
                v(row.v_q_0),
                v(row.dv_e_th),
                v(row.dv_q_th),
                v(row.dvp_q_th),
                v(row.mean_q),
                err(row.mean_q),
                sq.map(|s| s.theta_min),
                sq.map(|s| s.v_min),
                sq.map(|s| s.v_max),
            ],
            annotation: row.annotations.clone(),
        }
    }

    /// Value of a numeric column by header name.
    pub fn get(&self, column: &str) -> Option<f64> {
        let i = COLUMNS.iter().position(|c| *c == column)?;
        match i {
            1 => Some(self.omega0c),
            2 => Some(self.k as f64),
            3..=18 => self.values[i - 3],
            _ => None,
        }
    }

    fn record(&self) -> Vec<String> {
        let mut r = Vec::with_capacity(COLUMNS.len());
        r.push(self.scenario.clone());
        r.push(format_number(self.omega0c));
        r.push(self.k.to_string());
        r.extend(self.values.iter().map(|x| opt(*x)));
        r.push(self.annotation.join(";"));
        r
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CsvError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("header mismatch: expected {expected}, found {found}")]
    Header { expected: String, found: String },
    #[error("line {line}, column {column}: cannot parse '{value}'")]
    Value {
        line: u64,
        column: &'static str,
        value: String,
    },
}

pub fn write_rows<W: io::Write>(out: W, rows: &[CsvRow]) -> Result<(), CsvError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(COLUMNS)?;
    for row in rows {
        w.write_record(row.record())?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn to_bytes(rows: &[CsvRow]) -> Vec<u8> {
    let mut buf = Vec::new();
    write_rows(&mut buf, rows).expect("writing to memory");
    buf
}

pub fn read_rows<R: io::Read>(input: R) -> Result<Vec<CsvRow>, CsvError> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_reader(input);
    let mut records = r.records();
    let header = records.next().transpose()?.unwrap_or_default();
    if header.iter().ne(COLUMNS.iter().copied()) {
        return Err(CsvError::Header {
            expected: COLUMNS.join(","),
            found: header.iter().collect::<Vec<_>>().join(","),
        });
    }
    let mut rows = Vec::new();
    for rec in records {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |column: &'static str, value: &str| CsvError::Value {
            line,
            column,
            value: value.to_owned(),
        };
        let num = |i: usize| -> Result<Option<f64>, CsvError> {
            let s = rec.get(i).unwrap_or("");
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| bad(COLUMNS[i], s))
            }
        };
        let mut values = [None; VALUES];
        for (j, v) in values.iter_mut().enumerate() {
            *v = num(j + 3)?;
        }
        let k_raw = rec.get(2).unwrap_or("");
        let annotation = rec.get(19).unwrap_or("");
        rows.push(CsvRow {
            scenario: rec.get(0).unwrap_or("").to_owned(),
            omega0c: num(1)?.ok_or_else(|| bad("omega0c", ""))?,
            k: k_raw.parse().map_err(|_| bad("k", k_raw))?,
            values,
            annotation: if annotation.is_empty() {
                Vec::new()
            } else {
                annotation.split(';').map(str::to_owned).collect()
            },
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_have_nine_significant_digits() {
        assert_eq!(format_number(0.5), "0.500000000");
        assert_eq!(format_number(0.0), "0.00000000");
        assert_eq!(format_number(-0.0), "0.00000000");
        assert_eq!(format_number(1.0), "1.00000000");
        assert_eq!(format_number(-0.0123456789123), "-0.0123456789");
        assert_eq!(format_number(123456.789), "123456.789");
        assert_eq!(format_number(1234567891234.0), "1234567890000");
        assert_eq!(format_number(3.0e-7), "0.000000300000000");
        assert_eq!(format_number(999999999.6), "1000000000");
    }

    #[test]
    fn formatted_numbers_are_fixed_points() {
        let mut x = 1.234567e-6;
        while x < 1e9 {
            for v in [x, -x, x * 0.987654321] {
                let s = format_number(v);
                assert_eq!(format_number(s.parse().unwrap()), s, "{v}");
            }
            x *= 3.7;
        }
    }

    fn sample() -> Vec<CsvRow> {
        let mut values = [None; VALUES];
        values[0] = Some(0.25);
        values[1] = Some(0.0123);
        values[13] = Some(2.71);
        vec![
            CsvRow {
                scenario: "flatflat".into(),
                omega0c: 0.52,
                k: 0,
                values,
                annotation: vec!["line=0.5".into()],
            },
            CsvRow {
                scenario: "flatflat".into(),
                omega0c: 0.52,
                k: 1,
                values: [Some(-1.5); VALUES],
                annotation: vec!["error=a, b".into(), "nonresonant".into()],
            },
        ]
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let bytes = to_bytes(&sample());
        let rows = read_rows(bytes.as_slice()).unwrap();
        assert_eq!(to_bytes(&rows), bytes);
        assert_eq!(rows[0].get("dV_E"), Some(0.25));
        assert_eq!(rows[0].get("dV_Q"), None);
        assert_eq!(rows[0].get("theta_min"), Some(2.71));
        assert_eq!(rows[1].annotation.len(), 2);
    }

    #[test]
    fn header_is_the_schema() {
        let bytes = to_bytes(&[]);
        assert_eq!(String::from_utf8(bytes).unwrap(), format!("{}\n", COLUMNS.join(",")));
        let e = read_rows("scenario,omega0c\nx,1\n".as_bytes()).unwrap_err();
        assert!(matches!(e, CsvError::Header { .. }));
    }

    #[test]
    fn bad_numbers_name_the_column() {
        let mut text = String::from_utf8(to_bytes(&sample())).unwrap();
        text = text.replacen("0.250000000", "zero", 1);
        match read_rows(text.as_bytes()) {
            Err(CsvError::Value { column, .. }) => assert_eq!(column, "dV_E"),
            other => panic!("{other:?}"),
        }
    }
}
