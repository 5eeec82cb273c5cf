//! Loading visual sets from disk and writing them back.
//!
//! A set directory holds images whose file stems become labels, plus an
//! optional `manifest.json` giving per-entry anchor and scale.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use comicweave_core::assets::{
    normalize_label, AssetPool, ManifestEntry, SetManifest, VisualEntry,
};
use thiserror::Error;

use crate::codec::{self, CodecError};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum AssetIoError {
    #[error("path not found: {0}")]
    PathNotFound(PathBuf),
    #[error("unsupported image format: {0}")]
    UnsupportedFormat(PathBuf),
    #[error("bad manifest {path}: {reason}")]
    Manifest { path: PathBuf, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> AssetIoError + '_ {
    move |source| AssetIoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Outcome of an import.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ImportReport {
    pub added: usize,
    /// Labels that replaced an existing entry.
    pub overwritten: Vec<String>,
}

fn read_entry(path: &Path) -> Result<VisualEntry, AssetIoError> {
    let image = codec::load_image(path).map_err(|e| match e {
        CodecError::Io(source) => AssetIoError::Io {
            path: path.to_path_buf(),
            source,
        },
        _ => AssetIoError::UnsupportedFormat(path.to_path_buf()),
    })?;
    let mut entry = VisualEntry::new(image);
    entry.source = Some(path.display().to_string());
    Ok(entry)
}

fn stem_label(path: &Path) -> String {
    normalize_label(
        &path
            .file_stem()
            .map(|s| s.to_string_lossy())
            .unwrap_or_default(),
    )
}

fn read_manifest(path: &Path) -> Result<SetManifest, AssetIoError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| AssetIoError::Manifest {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

/// Adds one image, or every image in a directory, to `set_name`.
///
/// Directory entries without an image extension are ignored; a single file
/// must decode. When the directory carries a manifest its anchors and
/// scales are applied to the matching labels.
pub fn add_visuals(
    pool: &mut AssetPool,
    set_name: &str,
    path: &Path,
) -> Result<ImportReport, AssetIoError> {
    if !path.exists() {
        return Err(AssetIoError::PathNotFound(path.to_path_buf()));
    }
    let mut report = ImportReport::default();
    let mut staged: Vec<(String, VisualEntry)> = Vec::new();
    if path.is_dir() {
        let manifest_path = path.join(MANIFEST_FILE);
        let manifest = manifest_path
            .exists()
            .then(|| read_manifest(&manifest_path))
            .transpose()?;
        let mut files: Vec<PathBuf> = fs::read_dir(path)
            .map_err(io_err(path))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file() && codec::has_image_extension(p))
            .collect();
        files.sort();
        let mut by_file: BTreeMap<String, (String, &ManifestEntry)> = BTreeMap::new();
        if let Some(m) = &manifest {
            for (label, entry) in &m.entries {
                by_file.insert(entry.file.clone(), (label.clone(), entry));
            }
        }
        for file in files {
            let mut entry = read_entry(&file)?;
            let name = file
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            let label = match by_file.get(&name) {
                Some((label, meta)) => {
                    entry.anchor = meta.anchor;
                    entry.scale = meta.scale;
                    label.clone()
                }
                None => stem_label(&file),
            };
            staged.push((label, entry));
        }
    } else {
        staged.push((stem_label(path), read_entry(path)?));
    }
    for (label, entry) in staged {
        if pool.insert(set_name, &label, entry) {
            tracing::warn!(
                set = set_name,
                label = label.as_str(),
                "overwrote existing visual"
            );
            report.overwritten.push(label);
        }
        report.added += 1;
    }
    pool.ensure_set(set_name);
    Ok(report)
}

/// Imports every subdirectory of `root` as a set named after it.
pub fn load_asset_root(pool: &mut AssetPool, root: &Path) -> Result<usize, AssetIoError> {
    if !root.is_dir() {
        return Err(AssetIoError::PathNotFound(root.to_path_buf()));
    }
    let mut dirs: Vec<PathBuf> = fs::read_dir(root)
        .map_err(io_err(root))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    let mut total = 0;
    for dir in dirs {
        let name = stem_label(&dir);
        total += add_visuals(pool, &name, &dir)?.added;
    }
    Ok(total)
}

/// Writes a set as PNG files plus a manifest. Returns the manifest.
pub fn export_set(
    pool: &AssetPool,
    set_name: &str,
    dir: &Path,
) -> Result<SetManifest, AssetIoError> {
    let set = pool
        .set(set_name)
        .ok_or_else(|| AssetIoError::PathNotFound(PathBuf::from(set_name)))?;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut manifest = SetManifest {
        name: set_name.to_string(),
        entries: BTreeMap::new(),
    };
    for (label, entry) in &set.entries {
        let file = format!("{label}.png");
        let path = dir.join(&file);
        let bytes = codec::encode_png(&entry.image).map_err(|e| AssetIoError::Manifest {
            path: path.clone(),
            reason: e.to_string(),
        })?;
        fs::write(&path, bytes).map_err(io_err(&path))?;
        manifest.entries.insert(
            label.clone(),
            ManifestEntry {
                file,
                anchor: entry.anchor,
                scale: entry.scale,
            },
        );
    }
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, text + "\n").map_err(io_err(&path))?;
    Ok(manifest)
}
