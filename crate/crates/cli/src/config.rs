//! Flat-key configuration: a TOML file flattened to dotted key paths,
//! overridden by command-line flags. Every resolved value, default or not,
//! is echoed into the run record.

use anyhow::{anyhow, bail, Context, Result};
use serde_json::Value as Json;
use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

#[derive(Debug, Default)]
pub struct ConfigFile {
    path: Option<PathBuf>,
    values: BTreeMap<String, toml::Value>,
    lines: BTreeMap<String, usize>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text, Some(path))
    }

    pub fn parse(text: &str, path: Option<&Path>) -> Result<Self> {
        let name = path.map_or_else(|| "config".to_string(), |p| p.display().to_string());
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| anyhow!("{name}: {e}"))?;
        let mut values = BTreeMap::new();
        flatten("", &toml::Value::Table(table), &mut values);
        Ok(ConfigFile { path: path.map(Path::to_path_buf), values, lines: key_lines(text) })
    }

    fn locate(&self, key: &str) -> String {
        let file = self.path.as_ref().map_or_else(|| "config".to_string(), |p| p.display().to_string());
        match self.lines.get(key) {
            Some(l) => format!("{file}:{l}"),
            None => file,
        }
    }
}

fn flatten(prefix: &str, v: &toml::Value, out: &mut BTreeMap<String, toml::Value>) {
    match v {
        toml::Value::Table(t) => {
            for (k, v) in t {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, out);
            }
        }
        _ => {
            out.insert(prefix.to_string(), v.clone());
        }
    }
}

/// Line numbers of `key = value` assignments, under `[table]` headers.
fn key_lines(text: &str) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    let mut table = String::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if let Some(h) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            table = h.trim().to_string();
            continue;
        }
        if let Some((k, _)) = line.split_once('=') {
            let k: String = k.trim().split('.').map(|p| p.trim().trim_matches('"')).collect::<Vec<_>>().join(".");
            if k.is_empty() || k.starts_with('#') {
                continue;
            }
            let full = if table.is_empty() { k } else { format!("{table}.{k}") };
            out.entry(full).or_insert(i + 1);
        }
    }
    out
}

/// Resolved settings for one command.
pub struct Settings {
    file: ConfigFile,
    overrides: BTreeMap<String, toml::Value>,
    used: RefCell<BTreeSet<String>>,
    echo: RefCell<BTreeMap<String, Json>>,
}

impl Settings {
    pub fn new(file: ConfigFile, overrides: BTreeMap<String, toml::Value>) -> Self {
        Settings { file, overrides, used: RefCell::default(), echo: RefCell::default() }
    }

    fn raw(&self, key: &str) -> Option<(toml::Value, String)> {
        self.used.borrow_mut().insert(key.to_string());
        if let Some(v) = self.overrides.get(key) {
            return Some((v.clone(), format!("flag for `{key}`")));
        }
        self.file.values.get(key).map(|v| (v.clone(), format!("{}: key `{key}`", self.file.locate(key))))
    }

    fn record(&self, key: &str, v: Json) {
        self.echo.borrow_mut().insert(key.to_string(), v);
    }

    pub fn opt_f64(&self, key: &str) -> Result<Option<f64>> {
        let Some((v, at)) = self.raw(key) else { return Ok(None) };
        let x = as_f64(&v).ok_or_else(|| anyhow!("{at}: expected a number, found {}", v.type_str()))?;
        self.record(key, Json::from(x));
        Ok(Some(x))
    }

    pub fn f64(&self, key: &str, default: f64) -> Result<f64> {
        let x = self.opt_f64(key)?.unwrap_or(default);
        self.record(key, Json::from(x));
        Ok(x)
    }

    pub fn opt_u64(&self, key: &str) -> Result<Option<u64>> {
        let Some((v, at)) = self.raw(key) else { return Ok(None) };
        let x = v
            .as_integer()
            .and_then(|i| u64::try_from(i).ok())
            .ok_or_else(|| anyhow!("{at}: expected a non-negative integer, found {v}"))?;
        self.record(key, Json::from(x));
        Ok(Some(x))
    }

    pub fn u64(&self, key: &str, default: u64) -> Result<u64> {
        let x = self.opt_u64(key)?.unwrap_or(default);
        self.record(key, Json::from(x));
        Ok(x)
    }

    pub fn usize(&self, key: &str, default: usize) -> Result<usize> {
        Ok(self.u64(key, default as u64)? as usize)
    }

    /// Seeds are mandatory for anything that samples.
    pub fn seed(&self) -> Result<u64> {
        self.opt_u64("seed")?
            .ok_or_else(|| anyhow!("missing required key `seed` (flag --seed or config key `seed`)"))
    }

    pub fn string(&self, key: &str, default: &str) -> Result<String> {
        let s = match self.raw(key) {
            Some((v, at)) => v
                .as_str()
                .map(str::to_string)
                .ok_or_else(|| anyhow!("{at}: expected a string, found {}", v.type_str()))?,
            None => default.to_string(),
        };
        self.record(key, Json::from(s.clone()));
        Ok(s)
    }

    pub fn bool(&self, key: &str, default: bool) -> Result<bool> {
        let b = match self.raw(key) {
            Some((v, at)) => v.as_bool().ok_or_else(|| anyhow!("{at}: expected a boolean, found {}", v.type_str()))?,
            None => default,
        };
        self.record(key, Json::from(b));
        Ok(b)
    }

    /// A number or an array of numbers.
    pub fn f64_list(&self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        let list = match self.raw(key) {
            Some((toml::Value::Array(a), at)) => a
                .iter()
                .map(|v| as_f64(v).ok_or_else(|| anyhow!("{at}: expected numbers, found {v}")))
                .collect::<Result<Vec<_>>>()?,
            Some((v, at)) => vec![as_f64(&v).ok_or_else(|| anyhow!("{at}: expected a number or list, found {v}"))?],
            None => default.to_vec(),
        };
        self.record(key, Json::from(list.clone()));
        Ok(list)
    }

    pub fn u64_list(&self, key: &str, default: &[u64]) -> Result<Vec<u64>> {
        let conv = |v: &toml::Value, at: &str| {
            v.as_integer()
                .and_then(|i| u64::try_from(i).ok())
                .ok_or_else(|| anyhow!("{at}: expected non-negative integers, found {v}"))
        };
        let list = match self.raw(key) {
            Some((toml::Value::Array(a), at)) => a.iter().map(|v| conv(v, &at)).collect::<Result<Vec<_>>>()?,
            Some((v, at)) => vec![conv(&v, &at)?],
            None => default.to_vec(),
        };
        self.record(key, Json::from(list.clone()));
        Ok(list)
    }

    /// Echo of every resolved key; fails on config keys nobody read.
    pub fn finish(&self) -> Result<BTreeMap<String, Json>> {
        let used = self.used.borrow();
        if let Some(k) = self.file.values.keys().find(|k| !used.contains(*k)) {
            bail!("{}: unknown key `{k}` for this command", self.file.locate(k));
        }
        Ok(self.echo.borrow().clone())
    }
}

fn as_f64(v: &toml::Value) -> Option<f64> {
    v.as_float().or_else(|| v.as_integer().map(|i| i as f64))
}
