//! Shared strict-header CSV reading with line-numbered errors.

use std::io::Read;

use serde::de::DeserializeOwned;

use crate::error::{Error, Result};

fn csv_line(err: &csv::Error) -> u64 {
    err.position().map(|p| p.line()).unwrap_or(0)
}

/// Read every data row of a CSV with the exact `header`, converting each via `convert`.
pub(crate) fn read_rows<R, Row, T>(
    source: R,
    header: &[&str],
    mut convert: impl FnMut(Row, u64) -> Result<T>,
) -> Result<Vec<T>>
where
    R: Read,
    Row: DeserializeOwned,
{
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let headers = reader.headers().map_err(|e| Error::parse(csv_line(&e), e.to_string()))?.clone();
    if headers.is_empty() {
        return Ok(Vec::new());
    }
    if headers.iter().ne(header.iter().copied()) {
        return Err(Error::parse(
            1,
            format!("expected header `{}`, found `{}`", header.join(","), headers.iter().collect::<Vec<_>>().join(",")),
        ));
    }
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::parse(csv_line(&e), e.to_string()))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let row: Row = record.deserialize(Some(&headers)).map_err(|e| Error::parse(line, e.to_string()))?;
        out.push(convert(row, line)?);
    }
    Ok(out)
}
