//! Resolution of settings from flags, a `key=value` file and defaults.
//!
//! Keys are flag names without the leading dashes; `_` and `-` are
//! interchangeable. Every resolved value is recorded so the effective
//! configuration can be written next to a run's outputs.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};

#[derive(Default)]
pub struct Settings {
    file: BTreeMap<String, (String, usize)>,
    source: Option<PathBuf>,
    used: Vec<String>,
    effective: Vec<(String, String)>,
}

fn normalize(key: &str) -> String {
    key.trim().replace('_', "-")
}

impl Settings {
    pub fn load(path: Option<&Path>) -> Result<Settings> {
        let mut s = Settings::default();
        let Some(path) = path else {
            return Ok(s);
        };
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("{}:{}: expected key=value", path.display(), n + 1))?;
            s.file.insert(normalize(k), (v.trim().to_owned(), n + 1));
        }
        s.source = Some(path.to_owned());
        Ok(s)
    }

    fn file_value<T: FromStr>(&mut self, key: &str) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        let Some((raw, line)) = self.file.get(key) else {
            return Ok(None);
        };
        self.used.push(key.to_owned());
        let path = self.source.as_deref().unwrap_or(Path::new("?"));
        raw.parse()
            .map(Some)
            .map_err(|e| anyhow!("{}:{}: bad value for {key}: {e}", path.display(), line))
    }

    fn record(&mut self, key: &str, value: String) {
        // a flag overriding a file entry still counts as a known key
        if self.file.contains_key(key) && !self.used.iter().any(|k| k == key) {
            self.used.push(key.to_owned());
        }
        self.effective.push((key.to_owned(), value));
    }

    /// Flag, else config file, else `default`.
    pub fn get<T>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let v = match flag {
            Some(v) => v,
            None => self.file_value(key)?.unwrap_or(default),
        };
        self.record(key, v.to_string());
        Ok(v)
    }

    pub fn optional<T>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let v = match flag {
            Some(v) => Some(v),
            None => self.file_value(key)?,
        };
        if let Some(v) = &v {
            self.record(key, v.to_string());
        }
        Ok(v)
    }

    pub fn require<T>(&mut self, key: &str, flag: Option<T>) -> Result<T>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        self.optional(key, flag)?
            .ok_or_else(|| anyhow!("missing required setting --{key}"))
    }

    pub fn path(&mut self, key: &str, flag: Option<PathBuf>) -> Result<PathBuf> {
        self.optional_path(key, flag)?
            .ok_or_else(|| anyhow!("missing required setting --{key}"))
    }

    pub fn optional_path(&mut self, key: &str, flag: Option<PathBuf>) -> Result<Option<PathBuf>> {
        let v = match flag {
            Some(p) => Some(p),
            None => self.file_value::<String>(key)?.map(PathBuf::from),
        };
        if let Some(p) = &v {
            self.record(key, p.display().to_string());
        }
        Ok(v)
    }

    /// Fails on config-file keys that no setting asked for.
    pub fn finish(&self) -> Result<()> {
        let unknown: Vec<&str> = self
            .file
            .keys()
            .filter(|k| !self.used.contains(k))
            .map(String::as_str)
            .collect();
        if !unknown.is_empty() {
            bail!("unknown key(s) in config file: {}", unknown.join(", "));
        }
        Ok(())
    }

    pub fn render(&self) -> String {
        self.effective
            .iter()
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }

    /// Writes the effective configuration to `dir/config.txt`.
    pub fn echo(&self, dir: &Path) -> Result<()> {
        let path = dir.join("config.txt");
        fs::write(&path, self.render()).with_context(|| format!("cannot write {}", path.display()))
    }
}

/// Comma-separated list, e.g. `0.01,0.1,1,10`.
#[derive(Clone, Debug, PartialEq)]
pub struct List<T>(pub Vec<T>);

impl<T: FromStr> FromStr for List<T>
where
    T::Err: Display,
{
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        s.split(',')
            .map(|p| p.trim().parse::<T>().map_err(|e| format!("{p:?}: {e}")))
            .collect::<std::result::Result<_, _>>()
            .map(List)
    }
}

impl<T: Display> Display for List<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|v| v.to_string()).collect();
        f.write_str(&parts.join(","))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_flag_file_default() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.conf");
        fs::write(&p, "# comment\ndim = 8\nlearning_rate=0.5\n").unwrap();
        let mut s = Settings::load(Some(&p)).unwrap();
        assert_eq!(s.get("dim", Some(3usize), 40).unwrap(), 3);
        assert_eq!(s.get("learning-rate", None, 0.01).unwrap(), 0.5);
        assert_eq!(s.get("patience", None, 5usize).unwrap(), 5);
        s.finish().unwrap();
        assert_eq!(s.render(), "dim=3\nlearning-rate=0.5\npatience=5\n");
    }

    #[test]
    fn unknown_and_malformed_keys() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.conf");
        fs::write(&p, "dimm=8\n").unwrap();
        let s = Settings::load(Some(&p)).unwrap();
        assert!(s.finish().unwrap_err().to_string().contains("dimm"));
        fs::write(&p, "dim 8\n").unwrap();
        assert!(Settings::load(Some(&p)).is_err());
        fs::write(&p, "dim=eight\n").unwrap();
        let mut s = Settings::load(Some(&p)).unwrap();
        assert!(s.get("dim", None, 1usize).is_err());
    }

    #[test]
    fn list_round_trip() {
        let l: List<f64> = "0.01, 0.1,1,10".parse().unwrap();
        assert_eq!(l.0, vec![0.01, 0.1, 1.0, 10.0]);
        assert_eq!(l.to_string(), "0.01,0.1,1,10");
        assert!("1,x".parse::<List<f64>>().is_err());
    }
}
