//! Simulation trace record and its CSV form.
//!
//! The CSV has a fixed header `t,u_i,u_o,mag_cmd,x_b,x_a,target,load_force,disturbance`,
//! one row per record instant, values with 9 significant digits, LF line endings.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::sysid::{interpolate_gaps, MAX_INTERPOLATED_GAP};

pub const COLUMNS: [&str; 9] = [
    "t",
    "u_i",
    "u_o",
    "mag_cmd",
    "x_b",
    "x_a",
    "target",
    "load_force",
    "disturbance",
];

/// Column positions in a [`TraceRow`].
pub mod col {
    pub const T: usize = 0;
    pub const U_I: usize = 1;
    pub const U_O: usize = 2;
    pub const MAG_CMD: usize = 3;
    pub const X_B: usize = 4;
    pub const X_A: usize = 5;
    pub const TARGET: usize = 6;
    pub const LOAD_FORCE: usize = 7;
    pub const DISTURBANCE: usize = 8;
}

pub type TraceRow = [f64; 9];

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimTrace {
    pub dt_record: f64,
    pub rows: Vec<TraceRow>,
}

impl SimTrace {
    pub fn new(dt_record: f64) -> Self {
        Self {
            dt_record,
            rows: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, index: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[index]).collect()
    }

    pub fn column_by_name(&self, name: &str) -> Result<Vec<f64>> {
        let index = column_index(name)?;
        Ok(self.column(index))
    }

    /// Index of the first row at or after time `t`.
    pub fn index_at(&self, t: f64) -> usize {
        self.rows
            .partition_point(|r| r[col::T] < t - 1e-9 * self.dt_record)
    }

    pub fn all_finite(&self) -> bool {
        self.rows.iter().all(|r| r.iter().all(|v| v.is_finite()))
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let mut buf = String::with_capacity(16 + self.rows.len() * 9 * 16);
        buf.push_str(&COLUMNS.join(","));
        buf.push('\n');
        for row in &self.rows {
            for (i, v) in row.iter().enumerate() {
                if i > 0 {
                    buf.push(',');
                }
                buf.push_str(&format_value(*v));
            }
            buf.push('\n');
        }
        out.write_all(buf.as_bytes())?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = Vec::new();
        self.write_csv(&mut out).expect("writing to memory cannot fail");
        String::from_utf8(out).expect("CSV is ASCII")
    }

    /// Parses a trace CSV. Empty fields are filled by linear interpolation when
    /// a column has at most three consecutive gaps; longer gaps are rejected.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
        let header = reader
            .headers()
            .map_err(|e| Error::Data(format!("trace header: {e}")))?
            .clone();
        let names: Vec<&str> = header.iter().map(str::trim).collect();
        if names != COLUMNS {
            return Err(Error::Data(format!(
                "trace header must be `{}`, got `{}`",
                COLUMNS.join(","),
                names.join(",")
            )));
        }
        let mut columns: Vec<Vec<Option<f64>>> = vec![Vec::new(); COLUMNS.len()];
        for (line, record) in reader.records().enumerate() {
            let record = record.map_err(|e| Error::Data(format!("trace row {}: {e}", line + 1)))?;
            if record.len() != COLUMNS.len() {
                return Err(Error::Data(format!(
                    "trace row {} has {} fields, expected {}",
                    line + 1,
                    record.len(),
                    COLUMNS.len()
                )));
            }
            for (c, field) in record.iter().enumerate() {
                let field = field.trim();
                let value = if field.is_empty() {
                    None
                } else {
                    Some(field.parse::<f64>().map_err(|e| {
                        Error::Data(format!("trace row {} column {}: {e}", line + 1, COLUMNS[c]))
                    })?)
                };
                columns[c].push(value);
            }
        }
        let rows_len = columns[0].len();
        if rows_len < 2 {
            return Err(Error::Data("trace needs at least two rows".into()));
        }
        let filled: Vec<Vec<f64>> = columns
            .iter()
            .enumerate()
            .map(|(c, values)| {
                interpolate_gaps(values, MAX_INTERPOLATED_GAP)
                    .map_err(|e| Error::Data(format!("column {}: {e}", COLUMNS[c])))
            })
            .collect::<Result<_>>()?;
        let rows: Vec<TraceRow> = (0..rows_len)
            .map(|i| std::array::from_fn(|c| filled[c][i]))
            .collect();
        let dt_record = rows[1][col::T] - rows[0][col::T];
        if !(dt_record > 0.0) {
            return Err(Error::Data("trace time column is not increasing".into()));
        }
        Ok(Self { dt_record, rows })
    }
}

pub fn column_index(name: &str) -> Result<usize> {
    COLUMNS
        .iter()
        .position(|c| *c == name)
        .ok_or_else(|| Error::Data(format!("unknown trace column `{name}`")))
}

/// Nine significant digits in scientific notation.
pub fn format_value(v: f64) -> String {
    format!("{v:.8e}")
}
