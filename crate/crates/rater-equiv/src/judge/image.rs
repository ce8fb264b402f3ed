//! Sketch-image loading for inline provider payloads.
//!
//! Images ride inside the request as base64 data URLs. To bound payload
//! size, anything whose long edge exceeds a configurable cap is downscaled
//! (preserving aspect ratio) and re-encoded as PNG; images already under
//! the cap keep their original bytes untouched, so their digests are
//! stable across machines and encoder versions.

use std::path::Path;

use base64::Engine;
use image::imageops::FilterType;
use image::ImageFormat;
use sha2::{Digest, Sha256};

/// Default long-edge cap in pixels.
pub const DEFAULT_MAX_LONG_EDGE: u32 = 1024;

/// Raw encoded image bytes plus their MIME type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImagePayload {
    pub media_type: String,
    pub bytes: Vec<u8>,
}

fn format_for(path: &Path) -> Result<(ImageFormat, &'static str), String> {
    match path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .as_deref()
    {
        Some("png") => Ok((ImageFormat::Png, "image/png")),
        Some("jpg") | Some("jpeg") => Ok((ImageFormat::Jpeg, "image/jpeg")),
        other => Err(format!(
            "unsupported image extension {:?} for {} (png/jpg/jpeg)",
            other.unwrap_or("<none>"),
            path.display()
        )),
    }
}

impl ImagePayload {
    /// Load an image, downscaling to `max_long_edge` when needed.
    pub fn load(path: &Path, max_long_edge: u32) -> Result<Self, String> {
        if max_long_edge == 0 {
            return Err("max long edge must be positive".to_string());
        }
        let (format, media_type) = format_for(path)?;
        let bytes =
            std::fs::read(path).map_err(|e| format!("reading {}: {e}", path.display()))?;
        let decoded = image::load_from_memory_with_format(&bytes, format)
            .map_err(|e| format!("decoding {}: {e}", path.display()))?;
        let long_edge = decoded.width().max(decoded.height());
        if long_edge <= max_long_edge {
            return Ok(ImagePayload {
                media_type: media_type.to_string(),
                bytes,
            });
        }
        let resized = decoded.resize(max_long_edge, max_long_edge, FilterType::Triangle);
        let mut out = std::io::Cursor::new(Vec::new());
        resized
            .write_to(&mut out, ImageFormat::Png)
            .map_err(|e| format!("re-encoding {}: {e}", path.display()))?;
        Ok(ImagePayload {
            media_type: "image/png".to_string(),
            bytes: out.into_inner(),
        })
    }

    /// Inline data URL for a chat-completion image part.
    pub fn data_url(&self) -> String {
        format!(
            "data:{};base64,{}",
            self.media_type,
            base64::engine::general_purpose::STANDARD.encode(&self.bytes)
        )
    }

    /// Hex SHA-256 of the payload bytes, the image's contribution to a
    /// prompt content hash.
    pub fn digest_hex(&self) -> String {
        hex::encode(Sha256::digest(&self.bytes))
    }
}
