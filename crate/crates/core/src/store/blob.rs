//! Content-addressed JPEG blobs under `blobs/<hh>/<hash>.jpg`.

use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use image::codecs::jpeg::JpegEncoder;
use image::ExtendedColorType;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::StoreError;

pub(crate) const BLOB_DIR: &str = "blobs";
const BLOB_EXT: &str = "jpg";

/// SHA-256 of a scaled raw pixel buffer, as 64 lowercase hex chars.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct BlobHash(String);

impl BlobHash {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    fn fan_out(&self) -> &str {
        &self.0[..2]
    }
}

impl fmt::Display for BlobHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for BlobHash {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.len() == 64 && s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f')) {
            Ok(Self(s.to_owned()))
        } else {
            Err(format!("not a blob hash: {s:?}"))
        }
    }
}

impl TryFrom<String> for BlobHash {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<BlobHash> for String {
    fn from(h: BlobHash) -> String {
        h.0
    }
}

/// A stored blob and its on-disk (compressed) size.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlobRef {
    pub hash: BlobHash,
    pub byte_size: u64,
}

pub fn pixel_digest(pixels: &[u8]) -> BlobHash {
    BlobHash(hex::encode(Sha256::digest(pixels)))
}

pub(crate) fn blob_path(root: &Path, hash: &BlobHash) -> PathBuf {
    root.join(BLOB_DIR)
        .join(hash.fan_out())
        .join(format!("{hash}.{BLOB_EXT}"))
}

pub(crate) fn encode_jpeg(pixels: &[u8], width: u32, height: u32, quality: u8) -> Result<Vec<u8>, StoreError> {
    let expected = width as usize * height as usize * 3;
    if pixels.len() != expected {
        return Err(StoreError::Encode(format!(
            "buffer is {} bytes, expected {expected}",
            pixels.len()
        )));
    }
    let mut out = Vec::new();
    JpegEncoder::new_with_quality(&mut out, quality)
        .encode(pixels, width, height, ExtendedColorType::Rgb8)
        .map_err(|e| StoreError::Encode(e.to_string()))?;
    Ok(out)
}

/// Writes `bytes` to `path` through a temp file and rename, so the blob is
/// either fully present or absent.
pub(crate) fn write_atomically(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = path.parent().expect("blob path has a parent");
    fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(
        ".{}.{}.tmp",
        path.file_name().unwrap_or_default().to_string_lossy(),
        std::process::id()
    ));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

/// Every stored blob with its size, in hash order.
pub(crate) fn list_blobs(root: &Path) -> io::Result<Vec<(BlobHash, PathBuf, u64)>> {
    let dir = root.join(BLOB_DIR);
    let mut out = Vec::new();
    let fans = match fs::read_dir(&dir) {
        Ok(rd) => rd,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(out),
        Err(e) => return Err(e),
    };
    for fan in fans {
        let fan = fan?;
        if !fan.file_type()?.is_dir() {
            continue;
        }
        for entry in fs::read_dir(fan.path())? {
            let entry = entry?;
            let path = entry.path();
            if path.extension().and_then(|e| e.to_str()) != Some(BLOB_EXT) {
                continue;
            }
            let Some(hash) = path
                .file_stem()
                .and_then(|s| s.to_str())
                .and_then(|s| s.parse::<BlobHash>().ok())
            else {
                continue;
            };
            out.push((hash, path, entry.metadata()?.len()));
        }
    }
    out.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_is_sha256_hex() {
        // sha256("abc")
        assert_eq!(
            pixel_digest(b"abc").as_str(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn hash_parsing_rejects_junk() {
        assert!("ABCD".parse::<BlobHash>().is_err());
        assert!("g".repeat(64).parse::<BlobHash>().is_err());
        assert!("A".repeat(64).parse::<BlobHash>().is_err());
        assert!("0".repeat(64).parse::<BlobHash>().is_ok());
        let json = serde_json::to_string(&pixel_digest(b"")).unwrap();
        let back: BlobHash = serde_json::from_str(&json).unwrap();
        assert_eq!(back, pixel_digest(b""));
        assert!(serde_json::from_str::<BlobHash>("\"nope\"").is_err());
    }

    #[test]
    fn blob_layout_fans_out_by_prefix() {
        let h = pixel_digest(b"abc");
        assert_eq!(
            blob_path(Path::new("/s"), &h),
            PathBuf::from(format!("/s/blobs/ba/{h}.jpg"))
        );
    }

    #[test]
    fn jpeg_roundtrip_dimensions() {
        let px = vec![128u8; 16 * 8 * 3];
        let jpg = encode_jpeg(&px, 16, 8, 80).unwrap();
        assert_eq!(&jpg[..2], &[0xFF, 0xD8]);
        let decoded = image::load_from_memory(&jpg).unwrap();
        assert_eq!((decoded.width(), decoded.height()), (16, 8));
    }

    #[test]
    fn encode_rejects_bad_buffer() {
        assert!(matches!(
            encode_jpeg(&[0u8; 5], 16, 8, 80),
            Err(StoreError::Encode(_))
        ));
    }
}
