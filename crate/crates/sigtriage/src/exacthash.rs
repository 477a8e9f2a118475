//! SHA-256 digests for exact-match detection.
//!
//! A digest identifies one exact byte sequence: flip a single bit and the
//! digest is unrelated. Lowercase hex is the canonical rendering everywhere;
//! comparisons fold case on import because signature feeds vary.

use std::fmt;
use std::fs::File;
use std::io::{self, Read};
use std::path::Path;

use sha2::{Digest as _, Sha256};
use thiserror::Error;

/// Digest algorithm identifier used in records and reports.
pub const ALGORITHM: &str = "sha256";

/// A SHA-256 digest value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Digest([u8; 32]);

impl Digest {
    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    /// Canonical 64-char lowercase hex rendering.
    pub fn hex(&self) -> String {
        hex::encode(self.0)
    }

    /// Parses a 64-char hex string, accepting either case.
    pub fn from_hex(s: &str) -> Result<Digest, HashError> {
        if s.len() != 64 {
            return Err(HashError::BadHex {
                input: s.to_string(),
                reason: "expected 64 hex chars",
            });
        }
        let bytes = hex::decode(s).map_err(|_| HashError::BadHex {
            input: s.to_string(),
            reason: "invalid hex digit",
        })?;
        let mut out = [0u8; 32];
        out.copy_from_slice(&bytes);
        Ok(Digest(out))
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.hex())
    }
}

#[derive(Debug, Error)]
pub enum HashError {
    #[error("invalid digest {input:?}: {reason}")]
    BadHex { input: String, reason: &'static str },
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: io::Error },
}

/// SHA-256 of a byte slice per FIPS 180-4.
pub fn digest_bytes(data: &[u8]) -> Digest {
    let mut h = Sha256::new();
    h.update(data);
    Digest(h.finalize().into())
}

/// SHA-256 of a stream, reading at most `chunk_size` bytes at a time. The
/// result is identical to [`digest_bytes`] over the concatenated stream for
/// every `chunk_size >= 1`.
pub fn digest_stream<R: Read>(mut source: R, chunk_size: usize) -> io::Result<Digest> {
    assert!(chunk_size >= 1, "chunk_size must be >= 1");
    let mut h = Sha256::new();
    let mut buf = vec![0u8; chunk_size];
    loop {
        let n = source.read(&mut buf)?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(Digest(h.finalize().into()))
}

/// SHA-256 of a file's contents; errors name the offending path.
pub fn digest_file(path: &Path) -> Result<Digest, HashError> {
    let file = File::open(path).map_err(|e| HashError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    digest_stream(io::BufReader::new(file), 64 * 1024).map_err(|e| HashError::Io {
        path: path.display().to_string(),
        source: e,
    })
}
