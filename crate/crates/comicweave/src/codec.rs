//! Raster ⇄ PNG/JPEG conversion.

use std::io::Cursor;
use std::path::Path;

use comicweave_core::raster::Raster;
use image::{ImageFormat, RgbaImage};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("unsupported or corrupt image data")]
    UnsupportedFormat,
    #[error("image encoding failed: {0}")]
    Encode(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// File extensions accepted by directory imports.
pub const IMAGE_EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

pub fn has_image_extension(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

/// Encodes as 8-bit RGBA PNG. Same raster, same bytes.
pub fn encode_png(raster: &Raster) -> Result<Vec<u8>, CodecError> {
    let img = RgbaImage::from_raw(raster.width(), raster.height(), raster.as_rgba().to_vec())
        .ok_or_else(|| CodecError::Encode("buffer size mismatch".into()))?;
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png)
        .map_err(|e| CodecError::Encode(e.to_string()))?;
    Ok(out.into_inner())
}

/// Decodes PNG or JPEG bytes, sniffing the format from the content.
pub fn decode_image(bytes: &[u8]) -> Result<Raster, CodecError> {
    let format = image::guess_format(bytes).map_err(|_| CodecError::UnsupportedFormat)?;
    if !matches!(format, ImageFormat::Png | ImageFormat::Jpeg) {
        return Err(CodecError::UnsupportedFormat);
    }
    let img = image::load_from_memory_with_format(bytes, format)
        .map_err(|_| CodecError::UnsupportedFormat)?;
    let rgba = img.to_rgba8();
    let (w, h) = rgba.dimensions();
    Raster::from_rgba(w, h, rgba.into_raw()).ok_or(CodecError::UnsupportedFormat)
}

pub fn load_image(path: &Path) -> Result<Raster, CodecError> {
    decode_image(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_roundtrip() {
        let mut r = Raster::new(5, 3, [10, 20, 30, 255]);
        r.put(1, 1, [0, 0, 0, 0]);
        let bytes = encode_png(&r).unwrap();
        assert_eq!(decode_image(&bytes).unwrap(), r);
        assert_eq!(encode_png(&r).unwrap(), bytes);
    }

    #[test]
    fn rejects_text() {
        assert!(matches!(
            decode_image(b"hello world"),
            Err(CodecError::UnsupportedFormat)
        ));
        let mut png = encode_png(&Raster::new(2, 2, [0; 4])).unwrap();
        png.truncate(20);
        assert!(matches!(
            decode_image(&png),
            Err(CodecError::UnsupportedFormat)
        ));
    }
}
