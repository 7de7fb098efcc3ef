use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    fn ext(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// Everything needed to rerun a command and check its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub model: Option<String>,
    /// Arguments after the program name, without `--out`.
    pub args: Vec<String>,
    pub seed: u64,
    pub shots: u64,
    pub version: String,
    pub outputs: Vec<String>,
}

pub const MANIFEST: &str = "manifest.json";

/// Where tables go: files under `--out`, or stdout.
pub struct Sink {
    pub dir: Option<PathBuf>,
    pub format: Format,
    pub written: Vec<String>,
    pub plot: bool,
}

impl Sink {
    pub fn new(dir: Option<PathBuf>, format: Format, plot: bool) -> Result<Self, CliError> {
        if let Some(d) = &dir {
            fs::create_dir_all(d).map_err(|e| CliError::Io(format!("{}: {e}", d.display())))?;
        }
        Ok(Sink {
            dir,
            format,
            written: Vec::new(),
            plot,
        })
    }

    fn emit(&mut self, stem: &str, ext: &str, bytes: &[u8]) -> Result<(), CliError> {
        match &self.dir {
            Some(d) => {
                let name = format!("{stem}.{ext}");
                write_file(&d.join(&name), bytes)?;
                self.written.push(name);
            }
            None => {
                let mut out = std::io::stdout().lock();
                writeln!(out, "# {stem}").and_then(|_| out.write_all(bytes)).map_err(|e| CliError::Io(e.to_string()))?;
            }
        }
        Ok(())
    }

    /// Rows as CSV (header from field names) or a JSON array.
    pub fn table<T: Serialize>(&mut self, stem: &str, rows: &[T]) -> Result<(), CliError> {
        let bytes = match self.format {
            Format::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                for r in rows {
                    w.serialize(r).map_err(|e| CliError::Io(e.to_string()))?;
                }
                w.into_inner().map_err(|e| CliError::Io(e.to_string()))?
            }
            Format::Json => {
                let mut v = serde_json::to_vec_pretty(rows).expect("rows serialize");
                v.push(b'\n');
                v
            }
        };
        self.emit(stem, self.format.ext(), &bytes)
    }

    /// A histogram: `outcome,count,probability` in CSV mode.
    pub fn histogram(&mut self, stem: &str, h: &qrisk_core::sim::Histogram) -> Result<(), CliError> {
        let bytes = match self.format {
            Format::Csv => {
                let mut buf = Vec::new();
                h.write_csv(&mut buf).map_err(|e| CliError::Io(e.to_string()))?;
                buf
            }
            Format::Json => {
                let mut v = serde_json::to_vec_pretty(h).expect("histogram serializes");
                v.push(b'\n');
                v
            }
        };
        self.emit(stem, self.format.ext(), &bytes)
    }

    pub fn text(&mut self, name: &str, ext: &str, body: &str) -> Result<(), CliError> {
        self.emit(name, ext, body.as_bytes())
    }

    /// gnuplot script over a CSV written by this sink. Only with `--plot`.
    pub fn plot(&mut self, stem: &str, data: &str, xcol: usize, ycols: &[(usize, &str)], logscale: bool) -> Result<(), CliError> {
        if !self.plot || self.format != Format::Csv {
            return Ok(());
        }
        let mut s = String::new();
        s.push_str("set datafile separator ','\nset key autotitle columnhead\n");
        s.push_str(&format!("set terminal pngcairo size 900,600\nset output '{stem}.png'\n"));
        if logscale {
            s.push_str("set logscale y\n");
        }
        let parts: Vec<String> = ycols
            .iter()
            .map(|(c, title)| format!("'{data}.csv' using {xcol}:{c} with linespoints title '{title}'"))
            .collect();
        s.push_str(&format!("plot {}\n", parts.join(", ")));
        self.emit(stem, "gp", s.as_bytes())
    }

    pub fn finish(self, mut manifest: RunManifest) -> Result<(), CliError> {
        if let Some(d) = &self.dir {
            manifest.outputs = self.written;
            let mut v = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
            v.push(b'\n');
            write_file(&d.join(MANIFEST), &v)?;
        }
        Ok(())
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn read_manifest(path: &Path) -> Result<RunManifest, CliError> {
    let path = if path.is_dir() { path.join(MANIFEST) } else { path.to_path_buf() };
    let text = fs::read_to_string(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}
