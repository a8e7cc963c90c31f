//! Deterministic CSV text and run manifests.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::ConfigFile;
use crate::error::CliError;

/// `%.12g`: 12 significant digits, trailing zeros removed, exponent form
/// outside `[1e-4, 1e12)`.
pub fn fmt_g(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.11e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs())
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".to_string(), fmt_g)
}

/// Comma-separated table with a fixed header; every row must match its width.
pub struct Csv {
    width: usize,
    text: String,
}

impl Csv {
    pub fn new(header: &[String]) -> Self {
        Csv {
            width: header.len(),
            text: header.join(",") + "\n",
        }
    }

    pub fn row(&mut self, cells: Vec<String>) {
        assert_eq!(cells.len(), self.width, "csv row width");
        let _ = writeln!(self.text, "{}", cells.join(","));
    }

    pub fn into_string(self) -> String {
        self.text
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub command: String,
    pub config: ConfigFile,
    pub seed: Option<u64>,
    pub version: String,
    pub timestamp: String,
    pub outputs: Vec<String>,
}

pub struct OutDir {
    dir: PathBuf,
    written: Vec<String>,
}

impl OutDir {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
        Ok(OutDir {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
        log::info!("wrote {}", path.display());
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::Numeric(format!("cannot serialize {name}: {e}")))?;
        self.write(name, &(text + "\n"))
    }

    /// Writes `<command>.manifest.json` listing everything written so far.
    pub fn finish(mut self, command: &str, config: ConfigFile) -> Result<(), CliError> {
        let manifest = RunManifest {
            command: command.to_string(),
            seed: config.params.seed,
            config,
            version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: chrono::Utc::now().to_rfc3339(),
            outputs: self.written.clone(),
        };
        self.write_json(&format!("{command}.manifest.json"), &manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn general_format() {
        assert_eq!(fmt_g(0.0), "0");
        assert_eq!(fmt_g(0.1), "0.1");
        assert_eq!(fmt_g(1.0), "1");
        assert_eq!(fmt_g(-2.5), "-2.5");
        assert_eq!(fmt_g(0.223143551314), "0.223143551314");
        assert_eq!(fmt_g(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_g(123456.789), "123456.789");
        assert_eq!(fmt_g(1e-5), "1e-05");
        assert_eq!(fmt_g(0.0001), "0.0001");
        assert_eq!(fmt_g(1.5e12), "1.5e+12");
        assert_eq!(fmt_g(999999999999.0), "999999999999");
        assert_eq!(fmt_g(f64::INFINITY), "inf");
        assert_eq!(fmt_opt(None), "NA");
    }
}
