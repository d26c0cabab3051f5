//! Versioned binary checkpoint.
//!
//! ```text
//! "B3SM" | version u32 | count u32 |
//!   count × { name_len u16 | name | rank u8 | dims u32×rank | f32 data }
//! | config hash [u8; 32]
//! ```
//! All integers and floats are little-endian. Optimizer state is not stored.

use std::collections::HashSet;
use std::path::Path;

use log::warn;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::grad::{ParamStore, Tensor};

pub const MAGIC: &[u8; 4] = b"B3SM";
pub const VERSION: u32 = 1;
pub const HASH_LEN: usize = 32;

pub type ConfigHash = [u8; HASH_LEN];

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("not a checkpoint (bad magic {0:?})")]
    BadMagic([u8; 4]),
    #[error("unsupported checkpoint version {0} (this build reads version {VERSION})")]
    UnsupportedVersion(u32),
    #[error("checkpoint truncated while reading {0}")]
    Truncated(&'static str),
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error("tensor {0:?} is not part of the model")]
    UnknownTensor(String),
    #[error("model tensor {0:?} missing from checkpoint")]
    MissingTensor(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn sha256(bytes: &[u8]) -> ConfigHash {
    Sha256::digest(bytes).into()
}

pub fn hex(hash: &[u8]) -> String {
    hash.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn encode_checkpoint(store: &ParamStore, config_hash: &ConfigHash) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(store.len() as u32).to_le_bytes());
    for (_, p) in store.iter() {
        let name = p.name.as_bytes();
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name);
        let dims = p.value.dims();
        out.push(dims.len() as u8);
        for &d in dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in p.value.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out.extend_from_slice(config_hash);
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], CheckpointError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or(CheckpointError::Truncated(what))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &'static str) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<(ParamStore, ConfigHash), CheckpointError> {
    let mut r = Reader { bytes, pos: 0 };
    let magic: [u8; 4] = r.take(4, "magic")?.try_into().expect("4 bytes");
    if &magic != MAGIC {
        return Err(CheckpointError::BadMagic(magic));
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(CheckpointError::UnsupportedVersion(version));
    }
    let count = r.u32("tensor count")?;
    let mut store = ParamStore::new();
    for _ in 0..count {
        let len = u16::from_le_bytes(r.take(2, "name length")?.try_into().expect("2 bytes")) as usize;
        let name = std::str::from_utf8(r.take(len, "tensor name")?)
            .map_err(|_| CheckpointError::Corrupt("tensor name is not UTF-8".into()))?
            .to_string();
        let rank = r.take(1, "rank")?[0] as usize;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(r.u32("dims")? as usize);
        }
        let n = dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d));
        let n = n.filter(|&n| n.checked_mul(4).is_some()).ok_or_else(|| CheckpointError::Corrupt(format!("{name}: dims overflow")))?;
        let raw = r.take(n * 4, "tensor data")?;
        let data = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
        let tensor = Tensor::new(dims, data).map_err(|e| CheckpointError::Corrupt(format!("{name}: {e}")))?;
        store.add(name.clone(), tensor).map_err(|_| CheckpointError::Corrupt(format!("duplicate tensor {name:?}")))?;
    }
    let hash: ConfigHash = r.take(HASH_LEN, "config hash")?.try_into().expect("32 bytes");
    if r.pos != bytes.len() {
        return Err(CheckpointError::Corrupt(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok((store, hash))
}

pub fn save_checkpoint(path: impl AsRef<Path>, store: &ParamStore, config_hash: &ConfigHash) -> Result<(), CheckpointError> {
    std::fs::write(path, encode_checkpoint(store, config_hash))?;
    Ok(())
}

#[derive(Clone, Debug)]
pub struct LoadedCheckpoint {
    pub store: ParamStore,
    pub config_hash: ConfigHash,
    /// SHA-256 of the file bytes, used as the checkpoint's identity.
    pub digest: ConfigHash,
}

/// Reads a checkpoint. When `expected` is given and differs from the stored
/// config hash, a warning is logged; the load still succeeds.
pub fn load_checkpoint(path: impl AsRef<Path>, expected: Option<&ConfigHash>) -> Result<LoadedCheckpoint, CheckpointError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path)?;
    let (store, config_hash) = decode_checkpoint(&bytes)?;
    if let Some(e) = expected {
        if e != &config_hash {
            warn!(
                "{}: saved under config {} but loading under {}",
                path.display(),
                &hex(&config_hash)[..12],
                &hex(e)[..12]
            );
        }
    }
    Ok(LoadedCheckpoint { store, config_hash, digest: sha256(&bytes) })
}

/// Requires `loaded` to hold exactly the tensor names of `model`.
pub fn check_names(loaded: &ParamStore, model: &ParamStore) -> Result<(), CheckpointError> {
    let known: HashSet<&str> = model.iter().map(|(_, p)| p.name.as_str()).collect();
    if let Some((_, p)) = loaded.iter().find(|(_, p)| !known.contains(p.name.as_str())) {
        return Err(CheckpointError::UnknownTensor(p.name.clone()));
    }
    let have: HashSet<&str> = loaded.iter().map(|(_, p)| p.name.as_str()).collect();
    if let Some((_, p)) = model.iter().find(|(_, p)| !have.contains(p.name.as_str())) {
        return Err(CheckpointError::MissingTensor(p.name.clone()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store() -> ParamStore {
        let mut s = ParamStore::new();
        s.add("a.w", Tensor::new(vec![2, 3], vec![1.0, -0.0, f32::MIN_POSITIVE, 3.5, -7.25, 1e-30]).unwrap()).unwrap();
        s.add("b", Tensor::new(vec![1], vec![0.1]).unwrap()).unwrap();
        s
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let h = sha256(b"cfg");
        let bytes = encode_checkpoint(&store(), &h);
        let (back, hash) = decode_checkpoint(&bytes).unwrap();
        assert_eq!(hash, h);
        for ((_, a), (_, b)) in store().iter().zip(back.iter()) {
            assert_eq!(a.name, b.name);
            assert_eq!(a.value.dims(), b.value.dims());
            let bits = |t: &Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&a.value), bits(&b.value));
        }
        assert_eq!(encode_checkpoint(&back, &hash), bytes);
    }

    #[test]
    fn layout_matches_documented_format() {
        let mut s = ParamStore::new();
        s.add("x", Tensor::new(vec![1], vec![2.0]).unwrap()).unwrap();
        let bytes = encode_checkpoint(&s, &[7; 32]);
        let mut want = b"B3SM".to_vec();
        want.extend([1, 0, 0, 0, 1, 0, 0, 0, 1, 0, b'x', 1, 1, 0, 0, 0]);
        want.extend(2.0f32.to_le_bytes());
        want.extend([7; 32]);
        assert_eq!(bytes, want);
    }

    #[test]
    fn bad_magic_version_and_truncation() {
        let mut bytes = encode_checkpoint(&store(), &[0; 32]);
        assert!(matches!(decode_checkpoint(&bytes[..bytes.len() - 1]), Err(CheckpointError::Truncated(_))));
        assert!(matches!(decode_checkpoint(&bytes[..10]), Err(CheckpointError::Truncated(_))));
        bytes[4] = 9;
        assert!(matches!(decode_checkpoint(&bytes), Err(CheckpointError::UnsupportedVersion(9))));
        bytes[0] = b'X';
        let err = decode_checkpoint(&bytes).unwrap_err();
        assert!(matches!(err, CheckpointError::BadMagic(_)));
        assert!(err.to_string().contains("bad magic"));
    }

    #[test]
    fn trailing_bytes_rejected() {
        let mut bytes = encode_checkpoint(&store(), &[0; 32]);
        bytes.push(0);
        assert!(matches!(decode_checkpoint(&bytes), Err(CheckpointError::Corrupt(_))));
    }

    #[test]
    fn file_round_trip_and_digest() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.b3sm");
        save_checkpoint(&p, &store(), &[1; 32]).unwrap();
        let a = load_checkpoint(&p, Some(&[2; 32])).unwrap();
        let b = load_checkpoint(&p, None).unwrap();
        assert_eq!(a.digest, b.digest);
        assert_eq!(a.store, store());
    }

    #[test]
    fn name_checks() {
        let mut extra = store();
        extra.add("zzz", Tensor::new(vec![1], vec![0.0]).unwrap()).unwrap();
        assert!(matches!(check_names(&extra, &store()), Err(CheckpointError::UnknownTensor(n)) if n == "zzz"));
        assert!(matches!(check_names(&store(), &extra), Err(CheckpointError::MissingTensor(_))));
        assert!(check_names(&store(), &store()).is_ok());
    }
}
