//! JSON dataset manifests.
//!
//! ```json
//! {
//!   "version": 1,
//!   "metadata": {"split": "val"},
//!   "entries": [
//!     {"id": "img0", "logits_path": "logits/img0.npy", "mask_path": "masks/img0.npy", "label": 1}
//!   ]
//! }
//! ```
//!
//! Relative paths resolve against the manifest's directory. `image_path` and
//! `recon_path` are optional and only used by reconstruction scoring.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub id: String,
    pub logits_path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recon_path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub version: u32,
    #[serde(default)]
    pub metadata: BTreeMap<String, serde_json::Value>,
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.id.as_str())
    }
}

/// Loads, validates and resolves a manifest. Entry order is preserved.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut manifest: DatasetManifest = serde_json::from_str(&text)
        .map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))?;
    if manifest.version != MANIFEST_VERSION {
        return Err(Error::Manifest(format!(
            "unsupported manifest version {} (expected {MANIFEST_VERSION})",
            manifest.version
        )));
    }

    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut seen = HashSet::new();
    for entry in &mut manifest.entries {
        if !seen.insert(entry.id.clone()) {
            return Err(Error::Manifest(format!("duplicate id `{}`", entry.id)));
        }
        if let Some(l) = entry.label {
            if l > 1 {
                return Err(Error::Manifest(format!(
                    "label for `{}` must be 0 or 1, got {l}",
                    entry.id
                )));
            }
        }
        entry.logits_path = resolve(base, &entry.logits_path)?;
        for p in [&mut entry.mask_path, &mut entry.image_path, &mut entry.recon_path]
            .into_iter()
            .flatten()
        {
            *p = resolve(base, p)?;
        }
    }
    Ok(manifest)
}

fn resolve(base: &Path, p: &Path) -> Result<PathBuf> {
    let full = if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
    if !full.is_file() {
        return Err(Error::MissingFile(full));
    }
    Ok(full)
}
