use std::fs::File;
use std::path::Path;

use csv::{Reader, ReaderBuilder, StringRecord};

use crate::error::{Error, Result};

/// Thin wrapper over a CSV reader that remembers the file name and the line
/// of the current record for diagnostics.
pub(crate) struct CsvRows {
    reader: Reader<File>,
    file: String,
    header: Vec<String>,
    line: usize,
}

pub(crate) fn open_csv(path: &Path) -> Result<CsvRows> {
    let file = path
        .file_name()
        .map(|f| f.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    if !path.exists() {
        return Err(Error::MissingInput(path.to_path_buf()));
    }
    let mut reader = ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(&file, e))?;
    let header = reader
        .headers()
        .map_err(|e| csv_error(&file, e))?
        .iter()
        .map(|h| h.trim_start_matches('\u{feff}').to_string())
        .collect();
    Ok(CsvRows {
        reader,
        file,
        header,
        line: 1,
    })
}

fn csv_error(file: &str, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::MalformedRow {
            file: file.to_string(),
            line,
            message: format!("{other:?}"),
        },
    }
}

impl CsvRows {
    pub fn file(&self) -> &str {
        &self.file
    }

    pub fn header(&self) -> &[String] {
        &self.header
    }

    /// Line number of the most recently read record (header is line 1).
    pub fn line(&self) -> usize {
        self.line
    }

    pub fn expect_header(&self, leading: &[&str]) -> Result<()> {
        let ok = self.header.len() >= leading.len()
            && self
                .header
                .iter()
                .zip(leading)
                .all(|(h, want)| h.eq_ignore_ascii_case(want));
        if ok {
            Ok(())
        } else {
            Err(Error::MalformedRow {
                file: self.file.clone(),
                line: 1,
                message: format!(
                    "header must start with `{}`, found `{}`",
                    leading.join(","),
                    self.header.join(",")
                ),
            })
        }
    }

    pub fn next_record(&mut self) -> Result<Option<StringRecord>> {
        let mut rec = StringRecord::new();
        match self.reader.read_record(&mut rec) {
            Ok(false) => Ok(None),
            Ok(true) => {
                self.line = rec.position().map(|p| p.line() as usize).unwrap_or(self.line + 1);
                Ok(Some(rec))
            }
            Err(e) => Err(csv_error(&self.file, e)),
        }
    }

    pub fn malformed(&self, message: &str) -> Error {
        Error::MalformedRow {
            file: self.file.clone(),
            line: self.line,
            message: message.to_string(),
        }
    }
}

/// `Ok(None)` for an empty cell, `Err(())` when the text is not a number.
pub(crate) fn parse_number(cell: &str) -> std::result::Result<Option<f64>, ()> {
    let cell = cell.trim();
    if cell.is_empty() {
        return Ok(None);
    }
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        _ => Err(()),
    }
}
