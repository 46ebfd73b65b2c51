//! File emission. Floats are written in shortest round-trip form so that
//! repeated runs produce byte-identical files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{resolve_output_dir, OutputFormat, OutputSpec};
use crate::error::{CliError, CliResult};

pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// Where a command writes, and what it wrote.
pub struct Sink {
    dir: PathBuf,
    spec: OutputSpec,
    pub written: Vec<PathBuf>,
}

impl Sink {
    pub fn new(spec: &OutputSpec) -> Self {
        Sink { dir: resolve_output_dir(&spec.directory), spec: spec.clone(), written: Vec::new() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn wants(&self, f: OutputFormat) -> bool {
        self.spec.wants(f)
    }

    fn prepare(&mut self, name: &str) -> CliResult<PathBuf> {
        fs::create_dir_all(&self.dir).map_err(|e| CliError::io(&self.dir, e))?;
        let path = self.dir.join(name);
        self.written.push(path.clone());
        Ok(path)
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
        if !self.wants(OutputFormat::Csv) {
            return Ok(());
        }
        let path = self.prepare(name)?;
        let to_io = |e: csv::Error| CliError::io(&path, e.into());
        let mut w = csv::Writer::from_path(&path).map_err(to_io)?;
        w.write_record(header).map_err(to_io)?;
        for row in rows {
            w.write_record(row).map_err(to_io)?;
        }
        w.flush().map_err(|e| CliError::io(&path, e))
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        if !self.wants(OutputFormat::Json) {
            return Ok(());
        }
        let path = self.prepare(name)?;
        let mut text = serde_json::to_string_pretty(value).expect("report types serialize");
        text.push('\n');
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))
    }

    /// Two-column `tau value` file for plotting.
    pub fn dat(&mut self, name: &str, series: impl IntoIterator<Item = (f64, f64)>) -> CliResult<()> {
        if !self.wants(OutputFormat::GnuplotData) {
            return Ok(());
        }
        let path = self.prepare(name)?;
        let mut text = String::from("# tau value\n");
        for (t, v) in series {
            text.push_str(&format!("{} {}\n", fmt_f64(t), fmt_f64(v)));
        }
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))
    }
}
