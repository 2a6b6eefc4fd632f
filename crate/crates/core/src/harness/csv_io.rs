//! Numeric CSV ingestion and result tables.

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use serde::Serialize;
use std::io::{Read, Write};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsvOptions {
    /// Skip the first row.
    pub header: bool,
    pub delimiter: u8,
    /// Replace every value by `ln(1 + x)`.
    pub log1p: bool,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions {
            header: false,
            delimiter: b',',
            log1p: false,
        }
    }
}

/// Parse a numeric matrix; every row must have the same width and every
/// value must be finite (after the optional transform).
pub fn read_matrix<R: Read>(input: R, opts: &CsvOptions) -> Result<DataMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(opts.header)
        .delimiter(opts.delimiter)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (r, rec) in reader.records().enumerate() {
        let rec = rec?;
        let mut row = Vec::with_capacity(rec.len());
        for (c, field) in rec.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                Error::InvalidData(format!("row {r}, column {c}: `{field}` is not a number"))
            })?;
            let v = if opts.log1p { v.ln_1p() } else { v };
            if !v.is_finite() {
                return Err(Error::InvalidData(format!("row {r}, column {c}: non-finite value {v}")));
            }
            row.push(v);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::InvalidData("no data rows".into()));
    }
    DataMatrix::from_rows(&rows)
}

pub fn read_matrix_path(path: &Path, opts: &CsvOptions) -> Result<DataMatrix> {
    read_matrix(std::fs::File::open(path)?, opts)
}

/// Values written with shortest round-trip formatting.
pub fn write_matrix<W: Write>(out: W, x: &DataMatrix) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    for i in 0..x.rows() {
        w.write_record(x.row(i).iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Serialize records with a header row taken from the field names.
pub fn write_records<W: Write, T: Serialize>(out: W, records: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_records_path<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    write_records(std::fs::File::create(path)?, records)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literal_matrix() {
        let x = read_matrix("1,2\n3,4.5\n".as_bytes(), &CsvOptions::default()).unwrap();
        assert_eq!(x, DataMatrix::new(2, 2, vec![1.0, 2.0, 3.0, 4.5]).unwrap());
    }

    #[test]
    fn header_delimiter_and_log1p() {
        let opts = CsvOptions {
            header: true,
            delimiter: b';',
            log1p: true,
        };
        let x = read_matrix("a;b\n0;1\n3;0\n".as_bytes(), &opts).unwrap();
        assert_eq!(x.as_vec(), &[0.0, 2f64.ln(), 4f64.ln(), 0.0]);
    }

    #[test]
    fn rejects_bad_values() {
        let o = CsvOptions::default();
        assert!(read_matrix("0,0\n1,2\n".as_bytes(), &o).is_ok());
        assert!(read_matrix("0,0\n1,NaN\n".as_bytes(), &o).is_err());
        assert!(read_matrix("0,0\n1,inf\n".as_bytes(), &o).is_err());
        assert!(read_matrix("0,0\n1,x\n".as_bytes(), &o).is_err());
        assert!(read_matrix("1,2\n3\n".as_bytes(), &o).is_err());
        assert!(read_matrix("".as_bytes(), &o).is_err());
        let lg = CsvOptions { log1p: true, ..o };
        assert!(read_matrix("0\n-1\n".as_bytes(), &lg).is_err());
    }

    #[test]
    fn round_trip() {
        let vals = vec![0.1, -2.5e-17, 3.0, 1.0 / 3.0, 1e300, -7.25];
        let x = DataMatrix::new(3, 2, vals).unwrap();
        let mut buf = Vec::new();
        write_matrix(&mut buf, &x).unwrap();
        assert_eq!(read_matrix(buf.as_slice(), &CsvOptions::default()).unwrap(), x);
    }
}
