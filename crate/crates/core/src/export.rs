//! CSV and JSON table writers. Numbers are written in shortest round-trip
//! form so identical inputs give byte-identical files.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InvalidInput(format!("csv: {other:?}")),
    }
}

/// Row-major matrix with a header line `{prefix}0,{prefix}1,…`.
pub fn write_matrix_csv<W: Write>(out: W, m: &DMatrix<f64>, prefix: &str) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record((0..m.ncols()).map(|j| format!("{prefix}{j}")))
        .map_err(csv_err)?;
    let mut buf = ryu::Buffer::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols())
            .map(|j| fmt_f64(&mut buf, m[(i, j)]))
            .collect();
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Index and value columns.
pub fn write_vector_csv<W: Write>(
    out: W,
    index: &str,
    value: &str,
    v: &DVector<f64>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([index, value]).map_err(csv_err)?;
    let mut buf = ryu::Buffer::new();
    for (i, x) in v.iter().enumerate() {
        w.write_record([i.to_string(), fmt_f64(&mut buf, *x)])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// One record per row; field names become the header.
pub fn write_rows_csv<W: Write, T: Serialize>(out: W, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Explicit header and pre-formatted numeric rows, for tables whose width
/// is only known at run time.
pub fn write_table_csv<W: Write>(out: W, header: &[String], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header).map_err(csv_err)?;
    let mut buf = ryu::Buffer::new();
    for r in rows {
        let cells: Vec<String> = r.iter().map(|x| fmt_f64(&mut buf, *x)).collect();
        w.write_record(&cells).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<W: Write, T: Serialize + ?Sized>(mut out: W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, value)
        .map_err(|e| Error::InvalidInput(format!("json: {e}")))?;
    out.write_all(b"\n")?;
    Ok(())
}

fn fmt_f64(buf: &mut ryu::Buffer, x: f64) -> String {
    if x.is_finite() {
        buf.format_finite(x).to_owned()
    } else if x.is_nan() {
        "NaN".to_owned()
    } else if x > 0.0 {
        "inf".to_owned()
    } else {
        "-inf".to_owned()
    }
}

/// Dimensions, trace and extremal entries of a matrix.
#[derive(Debug, Clone, Serialize)]
pub struct MatrixSummary {
    pub rows: usize,
    pub cols: usize,
    pub trace: Option<f64>,
    pub frobenius: f64,
    pub min: f64,
    pub max: f64,
    pub argmin: (usize, usize),
    pub argmax: (usize, usize),
}

pub fn summarize(m: &DMatrix<f64>) -> MatrixSummary {
    let mut min = (f64::INFINITY, (0, 0));
    let mut max = (f64::NEG_INFINITY, (0, 0));
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let v = m[(i, j)];
            if v < min.0 || (v == min.0 && (i, j) < min.1) {
                min = (v, (i, j));
            }
            if v > max.0 || (v == max.0 && (i, j) < max.1) {
                max = (v, (i, j));
            }
        }
    }
    MatrixSummary {
        rows: m.nrows(),
        cols: m.ncols(),
        trace: (m.nrows() == m.ncols()).then(|| m.trace()),
        frobenius: m.norm(),
        min: min.0,
        max: max.0,
        argmin: min.1,
        argmax: max.1,
    }
}
