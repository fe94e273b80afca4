//! Numeric CSV tables. Floats are written with 17 significant digits, which
//! round-trips every `f64` exactly; `iter` is written as an integer.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{io_err, HarnessError, Result};

const INTEGER_COLUMNS: &[&str] = &["iter"];

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: Vec<String>) -> Self {
        Self { columns, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn write_to<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(&self.columns)?;
        let ints: Vec<bool> = self.columns.iter().map(|c| INTEGER_COLUMNS.contains(&c.as_str())).collect();
        for row in &self.rows {
            out.write_record(row.iter().zip(&ints).map(|(&x, &int)| {
                if int && x.is_sign_positive() && x.fract() == 0.0 && x < 2f64.powi(53) {
                    format!("{}", x as i64)
                } else {
                    fmt_f64(x)
                }
            }))?;
        }
        out.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(io_err(path))?;
        self.write_to(std::io::BufWriter::new(file))
    }

    pub fn read_from<R: Read>(r: R, path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let columns: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let mut table = Self::new(columns);
        for (k, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|field| {
                    field.trim().parse::<f64>().map_err(|e| HarnessError::Parse {
                        path: path.to_path_buf(),
                        line: k + 2,
                        msg: format!("`{field}`: {e}"),
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            table.push(row);
        }
        Ok(table)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(io_err(path))?;
        Self::read_from(std::io::BufReader::new(file), path)
    }

    pub fn index_of(&self, name: &str, path: &Path) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| HarnessError::MissingColumn { path: path.to_path_buf(), column: name.to_string() })
    }

    pub fn column(&self, name: &str, path: &Path) -> Result<Vec<f64>> {
        let i = self.index_of(name, path)?;
        Ok(self.rows.iter().map(|r| r[i]).collect())
    }
}
