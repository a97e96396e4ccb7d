//! Binary shadow files: a 22-byte little-endian header (`SHDW`, version,
//! `n`, `T`, seed) followed by `n * T` symbol bytes in snapshot-major order.

use std::path::Path;

use super::ClassicalShadow;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"SHDW";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 4 + 2 + 4 + 4 + 8;

pub fn serialize(shadow: &ClassicalShadow) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + shadow.symbols().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(shadow.n() as u32).to_le_bytes());
    out.extend_from_slice(&(shadow.num_snapshots() as u32).to_le_bytes());
    out.extend_from_slice(&shadow.seed().to_le_bytes());
    out.extend_from_slice(shadow.symbols());
    out
}

pub fn deserialize(bytes: &[u8]) -> Result<ClassicalShadow> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::MalformedHeader(format!(
            "{} bytes, header needs {HEADER_LEN}",
            bytes.len()
        )));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::MalformedHeader("bad magic".into()));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(Error::MalformedHeader(format!("unsupported version {version}")));
    }
    let n = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
    let t = u32::from_le_bytes(bytes[10..14].try_into().unwrap()) as usize;
    let seed = u64::from_le_bytes(bytes[14..22].try_into().unwrap());
    if n == 0 {
        return Err(Error::MalformedHeader("zero qubits".into()));
    }
    let expected = n
        .checked_mul(t)
        .ok_or_else(|| Error::MalformedHeader("n * T overflows".into()))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() < expected {
        return Err(Error::TruncatedPayload {
            expected,
            found: payload.len(),
        });
    }
    if payload.len() > expected {
        return Err(Error::MalformedHeader(format!(
            "header declares {expected} payload bytes but {} follow",
            payload.len()
        )));
    }
    ClassicalShadow::new(n, payload.to_vec(), seed)
}

/// Writes the shadow file and, when `provenance` is given, a JSON sidecar at
/// `<path>.json`.
pub fn write_shadow(path: &Path, shadow: &ClassicalShadow, provenance: Option<&serde_json::Value>) -> Result<()> {
    std::fs::write(path, serialize(shadow)).map_err(|e| Error::io(path, e))?;
    if let Some(p) = provenance {
        let side = sidecar_path(path);
        let doc = serde_json::json!({
            "n": shadow.n(),
            "T": shadow.num_snapshots(),
            "seed": shadow.seed(),
            "format_version": VERSION,
            "provenance": p,
        });
        std::fs::write(&side, serde_json::to_string_pretty(&doc)?).map_err(|e| Error::io(&side, e))?;
    }
    Ok(())
}

pub fn read_shadow(path: &Path) -> Result<ClassicalShadow> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    deserialize(&bytes)
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    s.into()
}
