use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::config::Format;
use crate::CliError;

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn io_err(e: impl std::fmt::Display) -> CliError {
    CliError::Io(e.to_string())
}

/// A table whose rows can be written either as CSV under `header` or as one
/// JSON object per line.
pub struct Table<'a, T: Serialize> {
    pub header: &'a [&'a str],
    pub rows: Vec<(Vec<String>, T)>,
}

impl<T: Serialize> Table<'_, T> {
    pub fn write(&self, format: Format, path: Option<&Path>) -> Result<(), CliError> {
        let mut out = sink(path)?;
        match format {
            Format::Csv => {
                let mut w = csv::Writer::from_writer(&mut out);
                w.write_record(self.header).map_err(io_err)?;
                for (rec, _) in &self.rows {
                    w.write_record(rec).map_err(io_err)?;
                }
                w.flush().map_err(io_err)?;
            }
            Format::Json => {
                for (_, row) in &self.rows {
                    serde_json::to_writer(&mut out, row).map_err(io_err)?;
                    out.write_all(b"\n").map_err(io_err)?;
                }
            }
        }
        out.flush().map_err(io_err)
    }
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), CliError> {
    let mut out = sink(Some(path))?;
    serde_json::to_writer_pretty(&mut out, value).map_err(io_err)?;
    out.write_all(b"\n").map_err(io_err)?;
    out.flush().map_err(io_err)
}
