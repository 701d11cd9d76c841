use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use super::CliError;
use crate::linalg::Mat;

pub(crate) fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{}: {e}", path.display()))
}

/// Output directory plus the list of files written into it.
pub(crate) struct OutDir {
    pub root: PathBuf,
    pub files: Vec<String>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| io_err(root, e))?;
        Ok(Self {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.root.join(name)
    }

    /// Writes a CSV table. Floats use the shortest round-trip form so
    /// identical runs give identical bytes.
    pub fn csv(
        &mut self,
        name: &str,
        header: &[&str],
        rows: impl IntoIterator<Item = Vec<String>>,
    ) -> Result<(), CliError> {
        let path = self.path(name);
        let mut w = csv::Writer::from_path(&path).map_err(|e| io_err(&path, e))?;
        w.write_record(header).map_err(|e| io_err(&path, e))?;
        for row in rows {
            w.write_record(&row).map_err(|e| io_err(&path, e))?;
        }
        w.flush().map_err(|e| io_err(&path, e))
    }

    pub fn with_writer(
        &mut self,
        name: &str,
        f: impl FnOnce(BufWriter<File>) -> Result<(), String>,
    ) -> Result<(), CliError> {
        let path = self.path(name);
        let file = File::create(&path).map_err(|e| io_err(&path, e))?;
        f(BufWriter::new(file)).map_err(|e| io_err(&path, e))
    }

    pub fn json(&mut self, name: &str, value: &impl Serialize) -> Result<(), CliError> {
        self.with_writer(name, |w| write_json(w, value))
    }
}

fn write_json(mut w: impl std::io::Write, value: &impl Serialize) -> Result<(), String> {
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| e.to_string())?;
    writeln!(w).map_err(|e| e.to_string())
}

pub(crate) fn num(x: f64) -> String {
    crate::simulate::csv_number(x)
}

/// Row-major nested arrays.
pub(crate) fn rows(m: &Mat) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// `i, j, value` records of a matrix, zero-based.
pub(crate) fn entries(m: &Mat) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
    (0..m.nrows()).flat_map(move |i| (0..m.ncols()).map(move |j| (i, j, m[(i, j)])))
}

/// Run record written next to every set of outputs.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_path: PathBuf,
    pub arguments: Value,
    pub spec: Value,
    pub threads: usize,
    pub platform: String,
    pub outputs: Vec<String>,
    /// Wall-clock milliseconds per stage.
    pub timings_ms: BTreeMap<String, f64>,
}

pub fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<(), CliError> {
    let path = dir.join("manifest.json");
    let file = File::create(&path).map_err(|e| io_err(&path, e))?;
    write_json(BufWriter::new(file), manifest).map_err(|e| io_err(&path, e))
}

/// Parses `start:stop:step` (inclusive) or a comma-separated list.
pub fn parse_axis(s: &str) -> Result<Vec<f64>, CliError> {
    let bad = || {
        CliError::Config(format!(
            "cannot parse axis {s:?}: expected start:stop:step or a comma list"
        ))
    };
    let parse = |t: &str| t.trim().parse::<f64>().map_err(|_| bad());
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [one] => one.split(',').map(parse).collect(),
        [a, b, c] => {
            let (start, stop, step) = (parse(a)?, parse(b)?, parse(c)?);
            if !(step > 0.0) || stop < start {
                return Err(bad());
            }
            let n = ((stop - start) / step + 1e-9).floor() as usize;
            Ok((0..=n).map(|k| start + k as f64 * step).collect())
        }
        _ => Err(bad()),
    }
}
