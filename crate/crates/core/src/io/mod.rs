//! Persistence: LIBSVM datasets, instance files, traces and run configs.

pub mod config;
pub mod libsvm;
pub mod trace_io;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

pub use config::{resolve_data_path, OutputSpec, ProblemSpec, RunConfig, DATA_DIR_ENV};
pub use libsvm::{parse_libsvm, parse_libsvm_reader, write_libsvm, write_libsvm_to, LibsvmData};
pub use trace_io::{read_rows_from, read_trace, trace_rows, write_rows_to, write_trace, TraceFormat, TraceRow, TRACE_COLUMNS};

use crate::error::{Error, Result};
use crate::problems::InstanceData;

/// Writes an instance as JSON. Reals round-trip exactly.
pub fn save_instance(data: &InstanceData, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer(&mut w, data)
        .map_err(std::io::Error::from)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn load_instance(path: impl AsRef<Path>) -> Result<InstanceData> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::Parse {
        line: e.line(),
        message: e.to_string(),
    })
}
