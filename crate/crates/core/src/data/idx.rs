//! IDX image and label files (raw or gzip-compressed).

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use byteorder::{BigEndian, ByteOrder};
use flate2::read::GzDecoder;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

/// Grayscale images with their original (0-9) labels.
#[derive(Clone, Debug, PartialEq)]
pub struct RawDataset {
    pub rows: usize,
    pub cols: usize,
    pixels: Vec<u8>,
    pub labels: Vec<u8>,
    pub split: Split,
}

impl RawDataset {
    pub fn new(rows: usize, cols: usize, pixels: Vec<u8>, labels: Vec<u8>, split: Split) -> Result<Self> {
        let images = pixels.len() / (rows * cols).max(1);
        if pixels.len() != images * rows * cols || images != labels.len() {
            return Err(Error::CountMismatch { images, labels: labels.len() });
        }
        Ok(Self { rows, cols, pixels, labels, split })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn image(&self, i: usize) -> &[u8] {
        let n = self.rows * self.cols;
        &self.pixels[i * n..(i + 1) * n]
    }

    pub fn images(&self) -> impl Iterator<Item = &[u8]> {
        self.pixels.chunks_exact(self.rows * self.cols)
    }
}

fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(&bytes[..]).read_to_end(&mut out).map_err(|e| Error::io(path, e))?;
        Ok(out)
    } else {
        Ok(bytes)
    }
}

fn header(path: &Path, bytes: &[u8], magic: u32, words: usize) -> Result<Vec<usize>> {
    if bytes.len() < 4 {
        return Err(Error::Truncated { path: path.into(), needed: 4, have: bytes.len() });
    }
    let found = BigEndian::read_u32(&bytes[0..4]);
    if found != magic {
        return Err(Error::BadMagic { path: path.into(), expected: magic, found });
    }
    let needed = 4 * (words + 1);
    if bytes.len() < needed {
        return Err(Error::Truncated { path: path.into(), needed, have: bytes.len() });
    }
    Ok((0..words).map(|w| BigEndian::read_u32(&bytes[4 + 4 * w..8 + 4 * w]) as usize).collect())
}

/// Reads an IDX3 image file; returns `(rows, cols, pixels)`.
pub fn read_images(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    let bytes = read_maybe_gz(path)?;
    let dims = header(path, &bytes, IMAGE_MAGIC, 3)?;
    let (count, rows, cols) = (dims[0], dims[1], dims[2]);
    let needed = 16 + count * rows * cols;
    if bytes.len() < needed {
        return Err(Error::Truncated { path: path.into(), needed, have: bytes.len() });
    }
    Ok((rows, cols, bytes[16..needed].to_vec()))
}

pub fn read_labels(path: &Path) -> Result<Vec<u8>> {
    let bytes = read_maybe_gz(path)?;
    let count = header(path, &bytes, LABEL_MAGIC, 1)?[0];
    let needed = 8 + count;
    if bytes.len() < needed {
        return Err(Error::Truncated { path: path.into(), needed, have: bytes.len() });
    }
    Ok(bytes[8..needed].to_vec())
}

/// Loads a paired image/label file set.
pub fn load_idx(images: &Path, labels: &Path, split: Split) -> Result<RawDataset> {
    let (rows, cols, pixels) = read_images(images)?;
    let labels = read_labels(labels)?;
    let count = pixels.len() / (rows * cols).max(1);
    if count != labels.len() {
        return Err(Error::CountMismatch { images: count, labels: labels.len() });
    }
    RawDataset::new(rows, cols, pixels, labels, split)
}

/// Locates `<stem>-images-idx3-ubyte` style files, with or without `.gz`.
pub fn find_idx_file(dir: &Path, stem: &str) -> Option<PathBuf> {
    let candidates = [stem.to_string(), format!("{stem}.gz")];
    candidates.iter().map(|c| dir.join(c)).find(|p| p.is_file())
}

#[cfg(test)]
pub(crate) fn write_idx_images(path: &Path, rows: usize, cols: usize, pixels: &[u8]) {
    let count = pixels.len() / (rows * cols);
    let mut out = Vec::new();
    for w in [IMAGE_MAGIC, count as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&w.to_be_bytes());
    }
    out.extend_from_slice(pixels);
    fs::write(path, out).unwrap();
}

#[cfg(test)]
pub(crate) fn write_idx_labels(path: &Path, labels: &[u8]) {
    let mut out = Vec::new();
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    fs::write(path, out).unwrap();
}

#[cfg(test)]
mod tests {
    use super::*;
    use flate2::write::GzEncoder;
    use flate2::Compression;
    use std::io::Write;

    #[test]
    fn roundtrip_raw_and_gz() {
        let dir = tempfile::tempdir().unwrap();
        let pixels: Vec<u8> = (0..3 * 4 * 5).map(|i| i as u8).collect();
        let img = dir.path().join("imgs");
        let lab = dir.path().join("labs");
        write_idx_images(&img, 4, 5, &pixels);
        write_idx_labels(&lab, &[3, 1, 4]);
        let ds = load_idx(&img, &lab, Split::Train).unwrap();
        assert_eq!((ds.len(), ds.rows, ds.cols), (3, 4, 5));
        assert_eq!(ds.image(1), &pixels[20..40]);
        assert_eq!(ds.labels, vec![3, 1, 4]);

        let gz = dir.path().join("imgs.gz");
        let mut enc = GzEncoder::new(Vec::new(), Compression::default());
        enc.write_all(&fs::read(&img).unwrap()).unwrap();
        fs::write(&gz, enc.finish().unwrap()).unwrap();
        assert_eq!(load_idx(&gz, &lab, Split::Train).unwrap(), ds);
    }

    #[test]
    fn truncated_file() {
        let dir = tempfile::tempdir().unwrap();
        let img = dir.path().join("imgs");
        write_idx_images(&img, 2, 2, &[0; 8]);
        let mut bytes = fs::read(&img).unwrap();
        bytes.truncate(bytes.len() - 1);
        fs::write(&img, &bytes).unwrap();
        assert!(matches!(read_images(&img), Err(Error::Truncated { .. })));
        fs::write(&img, [0u8, 0, 8, 3, 0]).unwrap();
        assert!(matches!(read_images(&img), Err(Error::Truncated { .. })));
    }

    #[test]
    fn bad_magic() {
        let dir = tempfile::tempdir().unwrap();
        let lab = dir.path().join("labs");
        write_idx_labels(&lab, &[1, 2]);
        assert!(matches!(read_images(&lab), Err(Error::BadMagic { found: LABEL_MAGIC, .. })));
    }

    #[test]
    fn count_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let img = dir.path().join("imgs");
        let lab = dir.path().join("labs");
        write_idx_images(&img, 2, 2, &[0; 8]);
        write_idx_labels(&lab, &[1, 2, 3]);
        assert!(matches!(load_idx(&img, &lab, Split::Test), Err(Error::CountMismatch { images: 2, labels: 3 })));
    }
}
