use std::io::Write;
use std::path::Path;

use super::ExperimentError;

pub const SCHEMA_LINE: &str = "# zzb-mimo-doa v1";

pub const COLUMNS: [&str; 13] = [
    "sweep_value",
    "snr_db",
    "zzb",
    "expected_crb",
    "apb",
    "mse",
    "mse_stderr",
    "h_tilde",
    "u_tilde",
    "gamma_term",
    "p_large",
    "crb_rejection_rate",
    "zzb_exact",
];

/// One (sweep value, SNR) evaluation. Bound values are in radians².
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub sweep_value: String,
    pub snr_db: f64,
    pub zzb: f64,
    pub expected_crb: f64,
    pub apb: f64,
    pub mse: Option<f64>,
    pub mse_stderr: Option<f64>,
    pub h_tilde: f64,
    pub u_tilde: f64,
    pub gamma_term: f64,
    pub p_large: f64,
    pub crb_rejection_rate: f64,
    pub zzb_exact: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    /// Rows with the given `sweep_value`, in SNR order.
    pub fn group(&self, sweep_value: &str) -> Vec<&ResultRow> {
        self.rows
            .iter()
            .filter(|r| r.sweep_value == sweep_value)
            .collect()
    }

    /// Distinct sweep values in first-seen order.
    pub fn sweep_values(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.sweep_value.as_str()) {
                out.push(&r.sweep_value);
            }
        }
        out
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("CSV is ASCII")
    }

    fn write_to(&self, out: &mut impl Write) -> Result<(), ExperimentError> {
        writeln!(out, "{SCHEMA_LINE}").map_err(|e| ExperimentError::Csv(e.to_string()))?;
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        let csv_err = |e: csv::Error| ExperimentError::Csv(e.to_string());
        w.write_record(COLUMNS).map_err(csv_err)?;
        for r in &self.rows {
            let opt = |x: Option<f64>| x.map(num).unwrap_or_default();
            w.write_record([
                r.sweep_value.clone(),
                num(r.snr_db),
                num(r.zzb),
                num(r.expected_crb),
                num(r.apb),
                opt(r.mse),
                opt(r.mse_stderr),
                num(r.h_tilde),
                num(r.u_tilde),
                num(r.gamma_term),
                num(r.p_large),
                num(r.crb_rejection_rate),
                opt(r.zzb_exact),
            ])
            .map_err(csv_err)?;
        }
        w.flush().map_err(|e| ExperimentError::Csv(e.to_string()))
    }
}

/// 12 significant digits in scientific notation.
fn num(x: f64) -> String {
    format!("{x:.11e}")
}

pub fn write_csv(table: &ResultTable, path: &Path) -> Result<(), ExperimentError> {
    let io = |e| ExperimentError::Io {
        path: path.to_path_buf(),
        source: e,
    };
    let mut file = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    table.write_to(&mut file)?;
    file.flush().map_err(io)
}

pub fn read_csv(path: &Path) -> Result<ResultTable, ExperimentError> {
    let text = std::fs::read_to_string(path).map_err(|e| ExperimentError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    parse_csv(&text)
}

fn parse_csv(text: &str) -> Result<ResultTable, ExperimentError> {
    let body = text
        .strip_prefix(SCHEMA_LINE)
        .and_then(|t| t.strip_prefix('\n'))
        .ok_or_else(|| ExperimentError::Csv(format!("missing {SCHEMA_LINE:?} line")))?;
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let header = r.headers().map_err(|e| ExperimentError::Csv(e.to_string()))?;
    if header.iter().ne(COLUMNS) {
        return Err(ExperimentError::Csv(format!("unexpected header {header:?}")));
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| ExperimentError::Csv(e.to_string()))?;
        let field = |c: usize| -> Result<Option<f64>, ExperimentError> {
            let s = &rec[c];
            if s.is_empty() {
                return Ok(None);
            }
            s.parse().map(Some).map_err(|_| {
                ExperimentError::Csv(format!("row {}: column {} = {s:?}", i + 1, COLUMNS[c]))
            })
        };
        let req = |c: usize| {
            field(c)?.ok_or_else(|| {
                ExperimentError::Csv(format!("row {}: column {} is empty", i + 1, COLUMNS[c]))
            })
        };
        rows.push(ResultRow {
            sweep_value: rec[0].to_string(),
            snr_db: req(1)?,
            zzb: req(2)?,
            expected_crb: req(3)?,
            apb: req(4)?,
            mse: field(5)?,
            mse_stderr: field(6)?,
            h_tilde: req(7)?,
            u_tilde: req(8)?,
            gamma_term: req(9)?,
            p_large: req(10)?,
            crb_rejection_rate: req(11)?,
            zzb_exact: field(12)?,
        });
    }
    Ok(ResultTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(v: f64) -> ResultRow {
        ResultRow {
            sweep_value: "-60:60;2".into(),
            snr_db: -3.5,
            zzb: v,
            expected_crb: 2.0 * v,
            apb: 0.1,
            mse: Some(v * 3.0),
            mse_stderr: None,
            h_tilde: 0.25,
            u_tilde: 1e-300,
            gamma_term: 1.0,
            p_large: 0.5,
            crb_rejection_rate: 0.0,
            zzb_exact: None,
        }
    }

    #[test]
    fn empty_table_is_header_only() {
        let s = ResultTable::default().to_csv_string();
        assert_eq!(s, format!("{SCHEMA_LINE}\n{}\n", COLUMNS.join(",")));
        assert_eq!(parse_csv(&s).unwrap(), ResultTable::default());
    }

    #[test]
    fn disabled_columns_are_empty_and_format_is_fixed() {
        let t = ResultTable { rows: vec![row(1.0 / 3.0)] };
        let s = t.to_csv_string();
        let line = s.lines().nth(2).unwrap();
        assert_eq!(
            line,
            "-60:60;2,-3.50000000000e0,3.33333333333e-1,6.66666666667e-1,1.00000000000e-1,\
             1.00000000000e0,,2.50000000000e-1,1.00000000000e-300,1.00000000000e0,\
             5.00000000000e-1,0.00000000000e0,"
        );
        assert!(s.ends_with('\n'));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let t = ResultTable { rows: vec![row(0.125), row(7.0)] };
        write_csv(&t, &path).unwrap();
        assert_eq!(read_csv(&path).unwrap(), t);
        assert_eq!(std::fs::read_to_string(&path).unwrap(), t.to_csv_string());
    }

    #[test]
    fn rejects_foreign_files() {
        assert!(parse_csv("a,b\n1,2\n").is_err());
        assert!(parse_csv(&format!("{SCHEMA_LINE}\na,b\n")).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_keeps_twelve_digits(v in 1e-200f64..1e200) {
            let t = ResultTable { rows: vec![row(v)] };
            let back = parse_csv(&t.to_csv_string()).unwrap();
            let z = back.rows[0].zzb;
            prop_assert!(((z - v) / v).abs() <= 5e-12);
            prop_assert_eq!(back.to_csv_string(), t.to_csv_string());
        }
    }
}
