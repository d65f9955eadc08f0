//! Flat key=value config files and shared argument parsing helpers.
//!
//! Every flag can also appear in a config file passed with `--config`;
//! explicit flags win over file entries.

use anyhow::{anyhow, bail, Context, Result};
use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

/// key=value pairs loaded from a config file (empty when none was given).
#[derive(Debug, Default, Clone)]
pub struct ConfigMap {
    entries: HashMap<String, String>,
}

impl ConfigMap {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let mut entries = HashMap::new();
        if let Some(path) = path {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading config file {}", path.display()))?;
            for (lineno, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (key, value) = line.split_once('=').ok_or_else(|| {
                    anyhow!(
                        "{}:{}: expected key=value, got `{line}`",
                        path.display(),
                        lineno + 1
                    )
                })?;
                entries.insert(key.trim().to_string(), value.trim().to_string());
            }
        }
        Ok(ConfigMap { entries })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    /// Flag value if present, else the config entry parsed, else the default.
    pub fn resolve<T: std::str::FromStr>(
        &self,
        flag: Option<T>,
        key: &str,
        default: T,
    ) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.resolve_opt(flag, key)?.unwrap_or(default))
    }

    /// Flag value if present, else the config entry parsed.
    pub fn resolve_opt<T: std::str::FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.get(key) {
            Some(raw) => raw
                .parse::<T>()
                .map(Some)
                .map_err(|e| anyhow!("config key `{key}`: {e}")),
            None => Ok(None),
        }
    }

    /// Flag value, config entry, or error if neither was given.
    pub fn require<T: std::str::FromStr>(&self, flag: Option<T>, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.resolve_opt(flag, key)?
            .ok_or_else(|| anyhow!("missing required parameter `{key}` (flag or config entry)"))
    }
}

/// Parses `16x16`, `16,16` or `8` into grid axis lengths.
pub fn parse_grid(text: &str) -> Result<Vec<usize>> {
    let parts: Vec<&str> = text
        .split(|c| c == 'x' || c == 'X' || c == ',')
        .filter(|p| !p.is_empty())
        .collect();
    if parts.is_empty() {
        bail!("empty grid specification");
    }
    parts
        .iter()
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .map_err(|e| anyhow!("grid axis `{p}`: {e}"))
        })
        .collect()
}

/// Wrapper so clap can parse grids directly.
#[derive(Debug, Clone)]
pub struct GridSpec(pub Vec<usize>);

impl std::str::FromStr for GridSpec {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(GridSpec(parse_grid(s)?))
    }
}

/// Parses an omega specification: a single value, a comma list, or an
/// inclusive range `start:end:step`.
pub fn parse_omegas(text: &str) -> Result<Vec<f64>> {
    let text = text.trim();
    if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            bail!("omega range must be start:end:step, got `{text}`");
        }
        let start: f64 = parts[0].parse()?;
        let end: f64 = parts[1].parse()?;
        let step: f64 = parts[2].parse()?;
        if step <= 0.0 || end < start {
            bail!("omega range must have positive step and end >= start");
        }
        let count = ((end - start) / step).round() as usize;
        let omegas = (0..=count)
            .map(|k| start + step * k as f64)
            .filter(|&w| w <= end + 1e-12)
            .collect();
        return Ok(omegas);
    }
    text.split(',')
        .map(|p| p.trim().parse::<f64>().map_err(Into::into))
        .collect()
}

/// Omega list wrapper for clap.
#[derive(Debug, Clone)]
pub struct OmegaSpec(pub Vec<f64>);

impl std::str::FromStr for OmegaSpec {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(OmegaSpec(parse_omegas(s)?))
    }
}

/// Writes a file atomically: the content lands in `<path>.tmp` and is renamed
/// into place only on success, so failed runs leave no partial outputs.
pub fn write_atomic(
    path: &Path,
    write: impl FnOnce(&mut Vec<u8>) -> anyhow::Result<()>,
) -> Result<()> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    let tmp = PathBuf::from(format!("{}.tmp", path.display()));
    fs::write(&tmp, &buf).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| {
        let _ = fs::remove_file(&tmp);
        format!("renaming {} into place", path.display())
    })?;
    Ok(())
}

/// Inserts a suffix before the extension: `err.csv` + `_w1.5` -> `err_w1.5.csv`.
pub fn path_with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let ext = path
        .extension()
        .map(|e| format!(".{}", e.to_string_lossy()))
        .unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}{ext}"))
}
