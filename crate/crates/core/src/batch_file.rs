//! `USTV` vector batch files: magic, version `u32`, dim `u64`, count `u64`,
//! then `count * dim` little-endian `f64` values row-major.

use std::fs::{self, File};
use std::io::{self, BufReader, Read};
use std::path::Path;

use crate::codec::{put_f64s, put_u32, put_u64, ByteReader};
use crate::error::{Result, UstError};
use crate::model::VectorBatch;

const MAGIC: &[u8; 4] = b"USTV";
const VERSION: u32 = 1;
const HEADER_LEN: usize = 24;

pub fn encode_batch(batch: &VectorBatch) -> Vec<u8> {
    let mut out = Vec::with_capacity(24 + 8 * batch.as_slice().len());
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, VERSION);
    put_u64(&mut out, batch.dim() as u64);
    put_u64(&mut out, batch.count() as u64);
    put_f64s(&mut out, batch.as_slice());
    out
}

/// Parses the header, returning `(dim, count, payload_bytes)`.
fn decode_header(r: &mut ByteReader<'_>) -> Result<(usize, usize, usize)> {
    r.expect_magic(MAGIC)?;
    r.expect_version(VERSION)?;
    let dim = r.len()?;
    let count = r.len()?;
    if dim == 0 || count == 0 {
        return Err(UstError::Format(format!(
            "USTV batch: dim {dim} and count {count} must both be positive"
        )));
    }
    let payload = dim
        .checked_mul(count)
        .and_then(|c| c.checked_mul(8))
        .ok_or_else(|| r.overflow())?;
    Ok((dim, count, payload))
}

pub fn decode_batch(buf: &[u8]) -> Result<VectorBatch> {
    let mut r = ByteReader::new(buf, "USTV batch");
    let (dim, count, _) = decode_header(&mut r)?;
    let data = r.f64_vec(dim * count)?;
    r.finish()?;
    VectorBatch::from_rows(dim, data)
}

pub fn write_batch(batch: &VectorBatch, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_batch(batch))?;
    Ok(())
}

pub fn read_batch(path: impl AsRef<Path>) -> Result<VectorBatch> {
    decode_batch(&fs::read(path)?)
}

/// Incremental `USTV` reader: yields the payload a few rows at a time so a
/// file never has to fit in memory at once.
pub struct BatchReader<R> {
    inner: R,
    dim: usize,
    count: usize,
    remaining: usize,
}

impl BatchReader<BufReader<File>> {
    /// Opens a file and checks up front that its length matches the header.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let file = File::open(path)?;
        let actual = file.metadata()?.len();
        let reader = BatchReader::new(BufReader::new(file))?;
        let expected = (HEADER_LEN + reader.dim * reader.count * 8) as u64;
        if actual != expected {
            return Err(UstError::Format(format!(
                "USTV batch: header declares {} x {} values ({expected} bytes) but file has {actual} bytes",
                reader.count, reader.dim
            )));
        }
        Ok(reader)
    }
}

impl<R: Read> BatchReader<R> {
    pub fn new(mut inner: R) -> Result<Self> {
        let mut header = [0u8; HEADER_LEN];
        inner.read_exact(&mut header).map_err(truncated)?;
        let mut r = ByteReader::new(&header, "USTV batch");
        let (dim, count, _) = decode_header(&mut r)?;
        Ok(BatchReader {
            inner,
            dim,
            count,
            remaining: count,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Up to `max_rows` further rows, or `None` once the payload is consumed.
    pub fn next_chunk(&mut self, max_rows: usize) -> Result<Option<VectorBatch>> {
        if self.remaining == 0 {
            let mut probe = [0u8; 1];
            if self.inner.read(&mut probe)? != 0 {
                return Err(UstError::Format(
                    "USTV batch: trailing bytes after payload".into(),
                ));
            }
            return Ok(None);
        }
        let rows = max_rows.max(1).min(self.remaining);
        let mut raw = vec![0u8; rows * self.dim * 8];
        self.inner.read_exact(&mut raw).map_err(truncated)?;
        self.remaining -= rows;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        VectorBatch::from_rows(self.dim, data).map(Some)
    }
}

fn truncated(e: io::Error) -> UstError {
    if e.kind() == io::ErrorKind::UnexpectedEof {
        UstError::Format("USTV batch: truncated payload".into())
    } else {
        UstError::Io(e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let b =
            VectorBatch::from_rows(3, vec![1.0, -0.0, f64::MIN_POSITIVE, 4.0, 5.5, 6.0]).unwrap();
        let back = decode_batch(&encode_batch(&b)).unwrap();
        assert_eq!(back, b);
        assert_eq!(back.as_slice()[1].to_bits(), (-0.0f64).to_bits());
    }

    #[test]
    fn header_layout() {
        let b = VectorBatch::from_rows(2, vec![1.0, 2.0]).unwrap();
        let bytes = encode_batch(&b);
        assert_eq!(&bytes[..4], b"USTV");
        assert_eq!(&bytes[4..8], &1u32.to_le_bytes());
        assert_eq!(&bytes[8..16], &2u64.to_le_bytes());
        assert_eq!(&bytes[16..24], &1u64.to_le_bytes());
        assert_eq!(bytes.len(), 24 + 16);
    }

    #[test]
    fn payload_length_must_match() {
        let b = VectorBatch::from_rows(2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let bytes = encode_batch(&b);
        assert!(matches!(
            decode_batch(&bytes[..bytes.len() - 8]),
            Err(UstError::Format(_))
        ));
        let mut extra = bytes.clone();
        extra.extend_from_slice(&0f64.to_le_bytes());
        assert!(matches!(decode_batch(&extra), Err(UstError::Format(_))));

        let mut huge = bytes[..8].to_vec();
        huge.extend_from_slice(&u64::MAX.to_le_bytes());
        huge.extend_from_slice(&u64::MAX.to_le_bytes());
        assert!(matches!(decode_batch(&huge), Err(UstError::Format(_))));
    }

    #[test]
    fn incremental_reader_matches_whole_decode() {
        let data: Vec<f64> = (0..35).map(|i| i as f64 * 0.5).collect();
        let b = VectorBatch::from_rows(5, data).unwrap();
        let bytes = encode_batch(&b);
        let mut reader = BatchReader::new(&bytes[..]).unwrap();
        assert_eq!((reader.dim(), reader.count()), (5, 7));
        let mut rows = Vec::new();
        let mut sizes = Vec::new();
        while let Some(chunk) = reader.next_chunk(3).unwrap() {
            sizes.push(chunk.count());
            rows.extend_from_slice(chunk.as_slice());
        }
        assert_eq!(sizes, [3, 3, 1]);
        assert_eq!(rows, b.as_slice());

        let mut short = BatchReader::new(&bytes[..bytes.len() - 1]).unwrap();
        assert!(short.next_chunk(3).is_ok());
        assert!(short.next_chunk(3).is_ok());
        assert!(matches!(short.next_chunk(3), Err(UstError::Format(_))));

        let mut long = bytes.clone();
        long.push(0);
        let mut extra = BatchReader::new(&long[..]).unwrap();
        assert!(extra.next_chunk(100).unwrap().is_some());
        assert!(matches!(extra.next_chunk(100), Err(UstError::Format(_))));
    }
}
