//! Checkpoint file IO.
//!
//! Layout (all little-endian): magic `NPSD`, u32 version, u32 dims
//! (input, hidden1, hidden2, output = 1), then the parameter groups
//! `W1, U1, b1, W2, U2, b2, w_d, b_d` as row-major f32 with gate order
//! (i, f, g, o), then a u64 trained-step counter and the u64 training seed.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::{NetworkDims, NetworkParams};
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"NPSD";

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub params: NetworkParams<f32>,
    pub steps: u64,
    pub seed: u64,
}

pub fn save_checkpoint(path: &Path, checkpoint: &Checkpoint) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_u32::<LittleEndian>(CHECKPOINT_VERSION)?;
    let dims = checkpoint.params.dims();
    w.write_u32::<LittleEndian>(dims.input as u32)?;
    w.write_u32::<LittleEndian>(dims.hidden1 as u32)?;
    w.write_u32::<LittleEndian>(dims.hidden2 as u32)?;
    w.write_u32::<LittleEndian>(1)?;
    for &v in checkpoint.params.data() {
        w.write_f32::<LittleEndian>(v)?;
    }
    w.write_u64::<LittleEndian>(checkpoint.steps)?;
    w.write_u64::<LittleEndian>(checkpoint.seed)?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| Error::Format("checkpoint shorter than its header".into()))?;
    if &magic != MAGIC {
        return Err(Error::Format(format!(
            "bad checkpoint magic {magic:?}, expected {MAGIC:?}"
        )));
    }
    let version = r
        .read_u32::<LittleEndian>()
        .map_err(|_| Error::Format("checkpoint truncated in header".into()))?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::UnsupportedVersion {
            found: version,
            expected: CHECKPOINT_VERSION,
        });
    }
    let mut dims_raw = [0u32; 4];
    for d in dims_raw.iter_mut() {
        *d = r
            .read_u32::<LittleEndian>()
            .map_err(|_| Error::Format("checkpoint truncated in dims".into()))?;
    }
    if dims_raw[3] != 1 {
        return Err(Error::Format(format!(
            "unsupported output dimension {}",
            dims_raw[3]
        )));
    }
    let dims = NetworkDims::new(dims_raw[0] as usize, dims_raw[1] as usize, dims_raw[2] as usize);
    let count = super::count_parameters(dims);
    let mut data = vec![0.0f32; count];
    for v in data.iter_mut() {
        *v = r
            .read_f32::<LittleEndian>()
            .map_err(|_| Error::Format("checkpoint truncated in parameter data".into()))?;
    }
    let steps = r
        .read_u64::<LittleEndian>()
        .map_err(|_| Error::Format("checkpoint truncated before step counter".into()))?;
    let seed = r
        .read_u64::<LittleEndian>()
        .map_err(|_| Error::Format("checkpoint truncated before seed".into()))?;
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(Error::Format("trailing bytes after checkpoint".into()));
    }
    let params = NetworkParams::from_data(dims, data)?;
    Ok(Checkpoint {
        params,
        steps,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn make_checkpoint() -> Checkpoint {
        Checkpoint {
            params: NetworkParams::<f32>::init(NetworkDims::new(3, 6, 4), 77).unwrap(),
            steps: 1234,
            seed: 77,
        }
    }

    #[test]
    fn roundtrip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.npsd");
        let ck = make_checkpoint();
        save_checkpoint(&path, &ck).unwrap();
        let back = load_checkpoint(&path).unwrap();
        assert_eq!(back.steps, ck.steps);
        assert_eq!(back.seed, ck.seed);
        assert_eq!(back.params.dims(), ck.params.dims());
        let bits_a: Vec<u32> = ck.params.data().iter().map(|v| v.to_bits()).collect();
        let bits_b: Vec<u32> = back.params.data().iter().map(|v| v.to_bits()).collect();
        assert_eq!(bits_a, bits_b);

        // Saving the loaded checkpoint reproduces the file byte-for-byte.
        let path2 = dir.path().join("net2.npsd");
        save_checkpoint(&path2, &back).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
    }

    #[test]
    fn truncated_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.npsd");
        save_checkpoint(&path, &make_checkpoint()).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        for cut in [3, 7, 20, bytes.len() / 2, bytes.len() - 1] {
            let short = dir.path().join(format!("cut{cut}.npsd"));
            std::fs::write(&short, &bytes[..cut]).unwrap();
            assert!(
                matches!(load_checkpoint(&short), Err(Error::Format(_))),
                "cut at {cut} not detected"
            );
        }
    }

    #[test]
    fn version_mismatch_is_explicit() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.npsd");
        save_checkpoint(&path, &make_checkpoint()).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[4] = 9;
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            load_checkpoint(&path),
            Err(Error::UnsupportedVersion {
                found: 9,
                expected: 1
            })
        ));
    }

    #[test]
    fn bad_magic_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.npsd");
        std::fs::write(&path, b"WAVExxxxyyyy").unwrap();
        assert!(matches!(load_checkpoint(&path), Err(Error::Format(_))));
    }
}
