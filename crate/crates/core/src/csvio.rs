//! Fixed-header numeric CSV helpers shared by the file formats.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub(crate) fn write_numeric<W: Write>(
    out: W,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<f64>>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|v| format_f64(*v)))?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn write_numeric_file(
    path: &Path,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<f64>>,
) -> Result<()> {
    let file = File::create(path)?;
    write_numeric(std::io::BufWriter::new(file), header, rows)
}

/// Reads rows of floats, rejecting any header that is not exactly `header`.
pub(crate) fn read_numeric<R: Read>(input: R, header: &[&str], origin: &Path) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let found = r.headers()?.clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(Error::format(
            origin,
            format!("expected header `{}`, found `{}`", header.join(","), found.iter().collect::<Vec<_>>().join(",")),
        ));
    }
    let mut rows = Vec::new();
    for (i, record) in r.records().enumerate() {
        let record = record?;
        let row = record
            .iter()
            .map(|field| parse_f64(field).map_err(|msg| Error::format(origin, format!("row {}: {msg}", i + 1))))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

pub(crate) fn read_numeric_file(path: &Path, header: &[&str]) -> Result<Vec<Vec<f64>>> {
    let file = File::open(path)?;
    read_numeric(BufReader::new(file), header, path)
}

pub(crate) fn parse_f64(field: &str) -> std::result::Result<f64, String> {
    let v: f64 = field.trim().parse().map_err(|_| format!("`{field}` is not a number"))?;
    if !v.is_finite() {
        return Err(format!("`{field}` is not finite"));
    }
    Ok(v)
}

/// Shortest representation that parses back to the same bits.
pub(crate) fn format_f64(v: f64) -> String {
    format!("{v}")
}

/// Splits off a leading `#` line, returning it and the remaining text.
pub(crate) fn split_comment_line<R: Read>(input: R) -> Result<(String, Vec<u8>)> {
    let mut reader = BufReader::new(input);
    let mut first = String::new();
    reader.read_line(&mut first)?;
    let mut rest = Vec::new();
    reader.read_to_end(&mut rest)?;
    Ok((first.trim_end().to_string(), rest))
}
