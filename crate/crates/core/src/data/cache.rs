//! Flat binary cache of an encoded split.
//!
//! Layout (little-endian): magic `DTNML1` (6 bytes), `m: u32`,
//! `count: u32`, then `count * m` float64 features row-major, then `count`
//! uint8 labels.

use std::fs;
use std::path::Path;

use byteorder::{ByteOrder, LittleEndian};

use super::EncodedSample;
use crate::{Error, Result};

pub const CACHE_MAGIC: &[u8; 6] = b"DTNML1";

pub fn write_cache(path: &Path, m: usize, samples: &[EncodedSample]) -> Result<()> {
    let mut out = Vec::with_capacity(14 + samples.len() * (8 * m + 1));
    out.extend_from_slice(CACHE_MAGIC);
    out.extend_from_slice(&(m as u32).to_le_bytes());
    out.extend_from_slice(&(samples.len() as u32).to_le_bytes());
    for s in samples {
        if s.features.len() != m {
            return Err(Error::FeatureCount { expected: m, found: s.features.len() });
        }
        for x in &s.features {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out.extend(samples.iter().map(|s| s.label));
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_cache(path: &Path) -> Result<(usize, Vec<EncodedSample>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 14 || &bytes[..6] != CACHE_MAGIC {
        return Err(Error::Format(format!("{}: not a DTNML1 cache", path.display())));
    }
    let m = LittleEndian::read_u32(&bytes[6..10]) as usize;
    let count = LittleEndian::read_u32(&bytes[10..14]) as usize;
    let needed = 14 + count * (8 * m + 1);
    if bytes.len() != needed {
        return Err(Error::Truncated { path: path.into(), needed, have: bytes.len() });
    }
    let feat = &bytes[14..14 + count * 8 * m];
    let labels = &bytes[14 + count * 8 * m..];
    let samples = (0..count)
        .map(|i| {
            let features = (0..m).map(|j| LittleEndian::read_f64(&feat[(i * m + j) * 8..])).collect();
            EncodedSample::new(features, labels[i])
        })
        .collect::<Result<_>>()?;
    Ok((m, samples))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_and_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.bin");
        let samples = vec![
            EncodedSample::new(vec![0.0, 0.25, 1.0], 1).unwrap(),
            EncodedSample::new(vec![0.5, 0.75, 0.125], 0).unwrap(),
        ];
        write_cache(&path, 3, &samples).unwrap();
        assert_eq!(read_cache(&path).unwrap(), (3, samples));
        let bytes = fs::read(&path).unwrap();
        assert_eq!(&bytes[..6], b"DTNML1");
        fs::write(&path, &bytes[..bytes.len() - 1]).unwrap();
        assert!(matches!(read_cache(&path), Err(Error::Truncated { .. })));
    }
}
