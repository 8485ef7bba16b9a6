//! Per-storage-root settings files.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use anyhow::Context;
use lapse_core::registry::{load_category_map, CategoryMap, MapWarning};
use lapse_core::CaptureConfig;

pub const CONFIG_FILE: &str = "config.json";
/// Optional override for the built-in category map.
pub const CATEGORY_FILE: &str = "categories.tsv";
pub const STORAGE_ENV: &str = "LAPSE_STORAGE_ROOT";

pub fn default_storage_root() -> PathBuf {
    std::env::var_os("HOME")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."))
        .join(".lapse")
}

/// Saved configuration, or the defaults when none was saved. The storage
/// root always reflects where the file was found.
pub fn load_config(root: &Path) -> anyhow::Result<CaptureConfig> {
    let path = root.join(CONFIG_FILE);
    match fs::read(&path) {
        Ok(bytes) => {
            let mut cfg: CaptureConfig =
                serde_json::from_slice(&bytes).with_context(|| format!("parsing {}", path.display()))?;
            cfg.storage_root = root.to_path_buf();
            Ok(cfg)
        }
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(CaptureConfig::new(root)),
        Err(e) => Err(e).with_context(|| format!("reading {}", path.display())),
    }
}

pub fn save_config(cfg: &CaptureConfig) -> anyhow::Result<()> {
    let path = cfg.storage_root.join(CONFIG_FILE);
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, serde_json::to_vec_pretty(cfg)?).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, &path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// The category map override in `root`, or the built-in map.
pub fn load_categories(root: &Path) -> anyhow::Result<(CategoryMap, Vec<MapWarning>)> {
    let path = root.join(CATEGORY_FILE);
    match fs::read_to_string(&path) {
        Ok(text) => {
            let loaded = load_category_map(&text).with_context(|| format!("loading {}", path.display()))?;
            Ok((loaded.map, loaded.warnings))
        }
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok((CategoryMap::builtin(), Vec::new())),
        Err(e) => Err(e).with_context(|| format!("reading {}", path.display())),
    }
}
