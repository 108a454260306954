//! Artifact writers. CSV numbers carry 17 significant digits so every `f64`
//! round-trips exactly.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

/// CSV schema version, bumped whenever a column changes.
pub const CSV_SCHEMA: &str = "1";

pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

pub struct CsvOut {
    writer: csv::Writer<BufWriter<File>>,
}

impl CsvOut {
    pub fn create(path: &Path, header: &[String]) -> std::io::Result<Self> {
        let mut writer = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
        writer.write_record(header)?;
        Ok(Self { writer })
    }

    pub fn row(&mut self, values: impl IntoIterator<Item = f64>) -> std::io::Result<()> {
        let fields: Vec<String> = values.into_iter().map(fmt17).collect();
        self.writer.write_record(&fields)?;
        Ok(())
    }

    pub fn finish(mut self) -> std::io::Result<()> {
        self.writer.flush()
    }
}

pub fn indexed(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |i| format!("{prefix}_{i}"))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> std::io::Result<()> {
    let mut file = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut file, value)?;
    file.write_all(b"\n")?;
    file.flush()
}
