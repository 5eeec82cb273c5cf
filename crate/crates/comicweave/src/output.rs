//! Writing render results to disk.
//!
//! Layout of one render directory: `panel_{k}.png` for k = 0..n,
//! `strip.png` when n > 0, and `document.json`.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use comicweave_core::render::RenderOutput;

use crate::codec;

pub const STRIP_FILE: &str = "strip.png";
pub const DOCUMENT_FILE: &str = "document.json";

pub fn panel_file(k: usize) -> String {
    format!("panel_{k}.png")
}

/// Paths of the files written for one render.
#[derive(Debug, Clone, PartialEq)]
pub struct WrittenRender {
    pub strip: Option<PathBuf>,
    pub panels: Vec<PathBuf>,
    pub document: PathBuf,
}

fn to_io(e: codec::CodecError) -> io::Error {
    match e {
        codec::CodecError::Io(e) => e,
        other => io::Error::other(other.to_string()),
    }
}

/// Writes every artifact of `out` into `dir`, creating it if needed.
pub fn write_render(out: &RenderOutput, dir: &Path) -> io::Result<WrittenRender> {
    fs::create_dir_all(dir)?;
    let mut panels = Vec::with_capacity(out.panels.len());
    for (k, (_, raster)) in out.panels.iter().enumerate() {
        let path = dir.join(panel_file(k));
        fs::write(&path, codec::encode_png(raster).map_err(to_io)?)?;
        panels.push(path);
    }
    let strip = match &out.strip {
        Some(raster) => {
            let path = dir.join(STRIP_FILE);
            fs::write(&path, codec::encode_png(raster).map_err(to_io)?)?;
            Some(path)
        }
        None => None,
    };
    let document = dir.join(DOCUMENT_FILE);
    fs::write(&document, out.document.to_json() + "\n")?;
    Ok(WrittenRender {
        strip,
        panels,
        document,
    })
}

/// Renders into a hidden sibling of `dir` and renames it into place, so a
/// reader never sees a half-written directory. `dir` must not exist yet.
pub fn write_render_atomic(out: &RenderOutput, dir: &Path) -> io::Result<WrittenRender> {
    let parent = dir
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(parent)?;
    let staging = tempfile::Builder::new()
        .prefix(".render-")
        .tempdir_in(parent)?;
    write_render(out, staging.path())?;
    fs::rename(staging.path(), dir)?;
    // Already moved; nothing left for the guard to delete.
    let _ = staging.keep();
    Ok(WrittenRender {
        strip: out.strip.as_ref().map(|_| dir.join(STRIP_FILE)),
        panels: (0..out.panels.len())
            .map(|k| dir.join(panel_file(k)))
            .collect(),
        document: dir.join(DOCUMENT_FILE),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use comicweave_core::assets::AssetPool;
    use comicweave_core::render::{render_sequence, StripLayout};
    use comicweave_core::SequenceModel;

    #[test]
    fn file_layout() {
        let layout = StripLayout {
            panel_size: 32,
            gutter: 2,
            ..StripLayout::default()
        };
        let out = render_sequence(&SequenceModel::new(3, 1), &AssetPool::empty(), &layout);
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("a/b");
        let written = write_render_atomic(&out, &dir).unwrap();
        assert_eq!(written.panels.len(), 3);
        assert!(written.panels.iter().all(|p| p.exists()));
        assert!(written.strip.unwrap().exists());
        let strip = codec::load_image(&dir.join(STRIP_FILE)).unwrap();
        assert_eq!(strip.width(), 3 * 32 + 2 * 2);
        assert!(write_render_atomic(&out, &dir).is_err());
        let leftovers: Vec<_> = fs::read_dir(tmp.path().join("a")).unwrap().collect();
        assert_eq!(leftovers.len(), 1);
    }

    #[test]
    fn empty_sequence_writes_only_the_document() {
        let out = render_sequence(
            &SequenceModel::new(0, 1),
            &AssetPool::empty(),
            &StripLayout::default(),
        );
        let tmp = tempfile::tempdir().unwrap();
        let written = write_render(&out, tmp.path()).unwrap();
        assert!(written.strip.is_none());
        let names: Vec<_> = fs::read_dir(tmp.path())
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        assert_eq!(names, [DOCUMENT_FILE]);
    }
}
