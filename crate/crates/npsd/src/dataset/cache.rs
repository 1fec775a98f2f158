//! Binary sequence-cache container.
//!
//! Layout (little-endian): magic `NSEQ`, u32 version, then one record per
//! sequence: `k: u16, T: u16, μ: f32, input: T×3 f32, target: T f32`.
//! Window positions (`l_end`) are not part of the format.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::TrainingSequence;
use crate::error::{Error, Result};

pub const SEQUENCE_CACHE_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"NSEQ";

pub fn write_sequences(path: &Path, sequences: &[TrainingSequence]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_u32::<LittleEndian>(SEQUENCE_CACHE_VERSION)?;
    for seq in sequences {
        let t = seq.target.len();
        if seq.input.len() != 3 * t || t > u16::MAX as usize {
            return Err(Error::ShapeMismatch(format!(
                "sequence with input {} / target {} cannot be cached",
                seq.input.len(),
                t
            )));
        }
        w.write_u16::<LittleEndian>(seq.k)?;
        w.write_u16::<LittleEndian>(t as u16)?;
        w.write_f32::<LittleEndian>(seq.mu)?;
        for &v in &seq.input {
            w.write_f32::<LittleEndian>(v)?;
        }
        for &v in &seq.target {
            w.write_f32::<LittleEndian>(v)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Read the first record field, distinguishing clean end-of-file from a
/// truncated record.
fn read_k_or_eof(r: &mut impl Read) -> Result<Option<u16>> {
    let mut buf = [0u8; 2];
    let mut filled = 0;
    while filled < 2 {
        let n = r.read(&mut buf[filled..])?;
        if n == 0 {
            if filled == 0 {
                return Ok(None);
            }
            return Err(Error::Format("sequence cache truncated mid-record".into()));
        }
        filled += n;
    }
    Ok(Some(u16::from_le_bytes(buf)))
}

pub fn read_sequences(path: &Path) -> Result<Vec<TrainingSequence>> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| Error::Format("sequence cache shorter than its header".into()))?;
    if &magic != MAGIC {
        return Err(Error::Format(format!(
            "bad sequence cache magic {magic:?}, expected {MAGIC:?}"
        )));
    }
    let version = r
        .read_u32::<LittleEndian>()
        .map_err(|_| Error::Format("sequence cache truncated in header".into()))?;
    if version != SEQUENCE_CACHE_VERSION {
        return Err(Error::UnsupportedVersion {
            found: version,
            expected: SEQUENCE_CACHE_VERSION,
        });
    }

    let mut out = Vec::new();
    while let Some(k) = read_k_or_eof(&mut r)? {
        let t = r
            .read_u16::<LittleEndian>()
            .map_err(|_| Error::Format("sequence cache truncated mid-record".into()))?
            as usize;
        if t == 0 {
            return Err(Error::Format("sequence cache record with T = 0".into()));
        }
        let mu = r
            .read_f32::<LittleEndian>()
            .map_err(|_| Error::Format("sequence cache truncated mid-record".into()))?;
        let mut input = vec![0.0f32; 3 * t];
        for v in input.iter_mut() {
            *v = r
                .read_f32::<LittleEndian>()
                .map_err(|_| Error::Format("sequence cache truncated mid-record".into()))?;
        }
        let mut target = vec![0.0f32; t];
        for v in target.iter_mut() {
            *v = r
                .read_f32::<LittleEndian>()
                .map_err(|_| Error::Format("sequence cache truncated mid-record".into()))?;
        }
        if !mu.is_finite()
            || input.iter().any(|v| !v.is_finite())
            || target.iter().any(|v| !v.is_finite())
        {
            return Err(Error::Format(
                "sequence cache contains non-finite values".into(),
            ));
        }
        out.push(TrainingSequence {
            k,
            l_end: 0,
            mu,
            input,
            target,
        });
    }
    Ok(out)
}
