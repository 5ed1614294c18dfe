use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{ColumnKind, DataMatrix};
use crate::error::{Error, Result};

fn is_missing(cell: &str) -> bool {
    cell.is_empty() || cell == "NA"
}

/// Load an RFC-4180 CSV with a header row. Empty cells and `NA` are missing.
/// `schema` overrides the inferred kind of named columns.
pub fn load_csv(path: impl AsRef<Path>, schema: Option<&HashMap<String, ColumnKind>>) -> Result<DataMatrix> {
    let path = path.as_ref();
    let f = File::open(path)
        .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
    read_csv(f, schema)
}

pub fn read_csv<R: Read>(reader: R, schema: Option<&HashMap<String, ColumnKind>>) -> Result<DataMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| csv_error(e, 1))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let p = headers.len();
    let mut columns: Vec<Vec<Option<f64>>> = vec![Vec::new(); p];
    for (i, rec) in rdr.records().enumerate() {
        // line 1 is the header
        let line = i + 2;
        let rec = rec.map_err(|e| csv_error(e, line))?;
        for (j, cell) in rec.iter().enumerate() {
            let cell = cell.trim();
            if is_missing(cell) {
                columns[j].push(None);
                continue;
            }
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => columns[j].push(Some(v)),
                _ => {
                    return Err(Error::NonNumeric {
                        row: line,
                        column: headers[j].clone(),
                        value: cell.to_string(),
                    })
                }
            }
        }
    }
    if columns.first().map_or(true, |c| c.is_empty()) {
        return Err(Error::Parse {
            row: 2,
            column: 1,
            message: "no data rows".into(),
        });
    }
    let mut data = DataMatrix::from_columns(headers, columns)?;
    if let Some(schema) = schema {
        for (name, kind) in schema {
            let c = data.column_index(name)?;
            data.set_kind(c, *kind);
        }
    }
    Ok(data)
}

fn csv_error(e: csv::Error, line: usize) -> Error {
    let (row, column) = match e.kind() {
        csv::ErrorKind::UnequalLengths { pos, len, .. } => (
            pos.as_ref().map_or(line, |p| p.line() as usize),
            *len as usize + 1,
        ),
        _ => (
            e.position().map_or(line, |p| p.line() as usize),
            0,
        ),
    };
    Error::Parse {
        row,
        column,
        message: e.to_string(),
    }
}

pub fn write_csv(data: &DataMatrix, path: impl AsRef<Path>) -> Result<()> {
    let f = File::create(path.as_ref())?;
    write_csv_to(data, f)
}

/// Values are written with shortest round-trip formatting, so a write/read
/// cycle reproduces every observed value bit-exactly.
pub fn write_csv_to<W: Write>(data: &DataMatrix, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(data.names()).map_err(io_err)?;
    let mut row = Vec::with_capacity(data.n_cols());
    for i in 0..data.n_rows() {
        row.clear();
        for j in 0..data.n_cols() {
            row.push(data.get(i, j).map(|v| v.to_string()).unwrap_or_default());
        }
        wtr.write_record(&row).map_err(io_err)?;
    }
    wtr.flush()?;
    Ok(())
}

fn io_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_empty_cell_gives_rate_one_sixth() {
        let d = read_csv("a,b\n1,2\n3,\n5,6\n".as_bytes(), None).unwrap();
        assert_eq!((d.n_rows(), d.n_cols()), (3, 2));
        assert_eq!(d.missing_count(), 1);
        assert_eq!(d.get(1, 1), None);
    }

    #[test]
    fn na_is_missing() {
        let d = read_csv("a\n1\nNA\n".as_bytes(), None).unwrap();
        assert_eq!(d.get(1, 0), None);
    }

    #[test]
    fn non_numeric_reports_location() {
        let e = read_csv("a,b\n1,2\n3,x\n".as_bytes(), None).unwrap_err();
        match e {
            Error::NonNumeric { row, column, value } => {
                assert_eq!(row, 3);
                assert_eq!(column, "b");
                assert_eq!(value, "x");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ragged_row_is_parse_error() {
        let e = read_csv("a,b\n1,2\n3\n".as_bytes(), None).unwrap_err();
        assert!(matches!(e, Error::Parse { row: 3, .. }), "{e:?}");
    }

    #[test]
    fn duplicate_header_rejected() {
        let e = read_csv("a,a\n1,2\n".as_bytes(), None).unwrap_err();
        assert!(matches!(e, Error::DuplicateHeader(_)));
    }

    #[test]
    fn schema_overrides_kind() {
        let mut schema = HashMap::new();
        schema.insert("a".to_string(), ColumnKind::Continuous);
        let d = read_csv("a\n0\n1\n".as_bytes(), Some(&schema)).unwrap();
        assert_eq!(d.kind(0), ColumnKind::Continuous);
    }

    #[test]
    fn write_read_roundtrip_is_bit_exact() {
        let d = DataMatrix::from_columns(
            vec!["x".into(), "y".into()],
            vec![
                vec![Some(0.1 + 0.2), None, Some(-1e-300)],
                vec![Some(1.0 / 3.0), Some(2.0), None],
            ],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_csv_to(&d, &mut buf).unwrap();
        let back = read_csv(buf.as_slice(), None).unwrap();
        for j in 0..2 {
            for i in 0..3 {
                assert_eq!(d.get(i, j).map(f64::to_bits), back.get(i, j).map(f64::to_bits));
            }
        }
    }
}
