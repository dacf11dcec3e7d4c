use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::Failure;

pub mod calibrate;
pub mod hurst;
pub mod price;
pub mod selftest;
pub mod simulate;

pub enum Outcome {
    Done,
    /// Ran to completion but some check failed (selftest).
    Failed,
}

/// Buffered file writer, or standard output when no path is given.
pub fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| Failure::Runtime(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}
