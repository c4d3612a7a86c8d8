//! CSV emission: header row, `%g`-style floats, LF line endings and
//! `#`-prefixed footer comments.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{CliError, CliResult};

/// Formats like C's `%.{digits}g`.
pub fn fmt_g(x: f64, digits: usize) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// A table to be written as CSV.
#[derive(Debug, Clone)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub leading: Vec<String>,
    pub footer: Vec<String>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Table {
            name: name.into(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
            leading: Vec::new(),
            footer: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn render(&self) -> CliResult<Vec<u8>> {
        let mut out = Vec::new();
        for c in &self.leading {
            writeln!(out, "# {c}").expect("write to memory");
        }
        {
            let mut w = csv::WriterBuilder::new()
                .terminator(csv::Terminator::Any(b'\n'))
                .from_writer(&mut out);
            let csv_err = |e: csv::Error| CliError::config(format!("CSV encoding failed: {e}"));
            w.write_record(&self.header).map_err(csv_err)?;
            for r in &self.rows {
                w.write_record(r).map_err(csv_err)?;
            }
            w.flush().map_err(|e| CliError::Io {
                path: PathBuf::from(&self.name),
                source: e,
            })?;
        }
        for c in &self.footer {
            writeln!(out, "# {c}").expect("write to memory");
        }
        Ok(out)
    }
}

/// Where outputs go: files under a directory, or stdout.
#[derive(Debug, Clone)]
pub struct Sink {
    pub dir: Option<PathBuf>,
    pub quiet: bool,
}

impl Sink {
    pub fn emit(&self, table: &Table) -> CliResult<()> {
        self.emit_bytes(&format!("{}.csv", table.name), &table.render()?)
    }

    pub fn emit_text(&self, name: &str, text: &str) -> CliResult<()> {
        self.emit_bytes(name, text.as_bytes())
    }

    fn emit_bytes(&self, file: &str, bytes: &[u8]) -> CliResult<()> {
        match &self.dir {
            Some(dir) => {
                fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
                let path = dir.join(file);
                fs::write(&path, bytes).map_err(|e| io_err(&path, e))?;
                self.note(&format!("wrote {}", path.display()));
                Ok(())
            }
            None => {
                let mut out = std::io::stdout().lock();
                out.write_all(bytes)
                    .map_err(|e| io_err(Path::new("<stdout>"), e))
            }
        }
    }

    /// Diagnostic on stderr, suppressed by `--quiet`.
    pub fn note(&self, msg: &str) {
        if !self.quiet {
            eprintln!("{msg}");
        }
    }
}

pub fn io_err(path: &Path, source: std::io::Error) -> CliError {
    CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}
