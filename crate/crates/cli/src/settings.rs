//! Config loading: JSON file → `--set` overrides on dotted paths → typed
//! [`EngineConfig`]. Unknown keys are rejected at every level.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use pcr_core::EngineConfig;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone)]
pub struct Settings {
    pub cfg: EngineConfig,
    /// Directory relative paths in the config resolve against.
    pub base_dir: PathBuf,
    pub path: Option<PathBuf>,
}

impl Settings {
    pub fn resolve(&self, p: &str) -> PathBuf {
        let p = Path::new(p);
        if p.is_relative() {
            self.base_dir.join(p)
        } else {
            p.to_path_buf()
        }
    }

    /// SHA-256 of the effective config's canonical JSON.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(&self.cfg).expect("config serializes");
        Sha256::digest(&bytes).iter().fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }
}

pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Settings> {
    let (file_value, base_dir) = match path {
        Some(p) => {
            if !p.is_file() {
                bail!("config not found: {}", p.display());
            }
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let v: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?;
            let dir = p.parent().map(Path::to_path_buf).unwrap_or_default();
            (v, if dir.as_os_str().is_empty() { PathBuf::from(".") } else { dir })
        }
        None => (Value::Object(Map::new()), PathBuf::from(".")),
    };
    let cfg: EngineConfig = serde_json::from_value(file_value).map_err(|e| anyhow!("invalid config: {e}"))?;

    // Overrides apply to the fully populated config so every known key exists.
    let mut value = serde_json::to_value(&cfg).expect("config serializes");
    for o in overrides {
        apply_override(&mut value, o)?;
    }
    let cfg: EngineConfig = serde_json::from_value(value).map_err(|e| anyhow!("invalid override: {e}"))?;
    Ok(Settings { cfg, base_dir, path: path.map(Path::to_path_buf) })
}

/// Applies `a.b.c=value`. The value is parsed as JSON when possible and taken
/// as a bare string otherwise.
pub fn apply_override(root: &mut Value, spec: &str) -> Result<()> {
    let (key, raw) = spec.split_once('=').ok_or_else(|| anyhow!("override `{spec}` is not KEY=VALUE"))?;
    let segments: Vec<&str> = key.split('.').collect();
    if segments.iter().any(|s| s.is_empty()) {
        bail!("override key `{key}` has an empty segment");
    }
    let new = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));

    let mut cur = root;
    for (i, seg) in segments.iter().enumerate() {
        let last = i + 1 == segments.len();
        if cur.is_null() {
            *cur = Value::Object(Map::new());
        }
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| anyhow!("unknown config key `{key}`: `{}` is not an object", segments[..i].join(".")))?;
        // Only keys that exist may be set, except inside optional sections
        // that serialize as absent (e.g. `agents.teacher`); those are checked
        // when the result is deserialized.
        if !obj.contains_key(*seg) && i == 0 {
            bail!("unknown config key `{key}`");
        }
        if last {
            obj.insert(seg.to_string(), new);
            return Ok(());
        }
        cur = obj.entry(seg.to_string()).or_insert(Value::Null);
    }
    unreachable!("at least one segment")
}
