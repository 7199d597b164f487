use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::CliError;

/// Shortest round-trip representation, in exponent form outside `[1e-4, 1e15)`.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-4..1e15).contains(&a) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// Files written by one command, relative to the output directory.
pub struct Output {
    dir: PathBuf,
    pub files: Vec<String>,
}

impl Output {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir)?;
        Ok(Output { dir: dir.to_path_buf(), files: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn csv<I, R>(&mut self, name: &str, header: &[&str], rows: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator<Item = String>,
    {
        let mut w = csv::Writer::from_path(self.dir.join(name))?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(row)?;
        }
        w.flush()?;
        self.files.push(name.to_string());
        Ok(())
    }

    /// Rows of plain numbers.
    pub fn numeric_csv(&mut self, name: &str, header: &[&str], rows: &[Vec<f64>]) -> Result<(), CliError> {
        self.csv(name, header, rows.iter().map(|r| r.iter().map(|x| num(*x)).collect::<Vec<_>>()))
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        write_json(&self.dir.join(name), value)?;
        self.files.push(name.to_string());
        Ok(())
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub config: serde_json::Value,
    pub config_sha256: String,
    pub seed: u64,
    pub threads: usize,
    pub versions: Versions,
    pub files: Vec<String>,
    pub summary: serde_json::Value,
    pub started_unix: f64,
    pub wall_time_seconds: f64,
}

#[derive(Debug, Serialize)]
pub struct Versions {
    pub kwr_cli: &'static str,
    pub kwr_core: &'static str,
}

impl Versions {
    pub fn current() -> Self {
        Versions { kwr_cli: env!("CARGO_PKG_VERSION"), kwr_core: kwr_core::VERSION }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [0.0, 1.5, -2.25e-7, 3e20, 0.1 + 0.2, f64::MIN_POSITIVE] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(num(0.5), "0.5");
        assert_eq!(num(1e-9), "1e-9");
    }

    #[test]
    fn csv_has_header_and_rows() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = Output::create(dir.path()).unwrap();
        out.numeric_csv("a.csv", &["x", "y"], &[vec![1.0, 2.0], vec![3.0, 0.25]]).unwrap();
        let s = fs::read_to_string(dir.path().join("a.csv")).unwrap();
        assert_eq!(s, "x,y\n1,2\n3,0.25\n");
        assert_eq!(out.files, vec!["a.csv"]);
    }
}
