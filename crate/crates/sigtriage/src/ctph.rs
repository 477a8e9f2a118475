//! Context-triggered piecewise (fuzzy) hashing.
//!
//! A rolling hash over a 7-byte window finds content-defined block
//! boundaries; each block is hashed to a single base64-alphabet character and
//! the characters concatenate into a short signature. Signatures of similar
//! inputs share most characters, so a normalized edit distance between them
//! yields a 0–100 similarity score.
//!
//! Every signature carries two piecewise strings: `sig1` computed at the
//! signature's blocksize and `sig2` at double that blocksize, which keeps
//! signatures comparable across a factor-of-two blocksize boundary. The
//! canonical rendering is `blocksize:sig1:sig2`.

use std::fmt;

use thiserror::Error;

use crate::editdist::similarity_pct;

/// One character per block, drawn from the 64-char alphabet.
const ALPHABET: &[u8; 64] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

const MIN_BLOCKSIZE: u64 = 3;
const SIG1_LEN: usize = 64;
const SIG2_LEN: usize = 32;
const ROLLING_WINDOW: usize = 7;

/// Piecewise hash state: FNV-1 over the current block.
const PIECE_INIT: u32 = 0x2802_1967;
const PIECE_PRIME: u32 = 16_777_619;

/// Runs longer than this collapse before comparison.
const MAX_RUN: usize = 3;
/// Two collapsed strings must share a substring at least this long to score
/// above zero.
const COMMON_SUBSTRING_LEN: usize = 7;
/// Below this blocksize, scores are capped to damp tiny-file coincidences.
const CAP_BLOCKSIZE: u64 = 99 * MIN_BLOCKSIZE;

/// A fuzzy signature: blocksize plus the two piecewise hash strings.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FuzzySignature {
    blocksize: u64,
    sig1: String,
    sig2: String,
}

impl FuzzySignature {
    pub fn blocksize(&self) -> u64 {
        self.blocksize
    }

    pub fn sig1(&self) -> &str {
        &self.sig1
    }

    pub fn sig2(&self) -> &str {
        &self.sig2
    }
}

impl fmt::Display for FuzzySignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.blocksize, self.sig1, self.sig2)
    }
}

impl serde::Serialize for FuzzySignature {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> serde::Deserialize<'de> for FuzzySignature {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        parse_signature(&text).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CtphError {
    #[error("cannot fuzzy-hash empty input")]
    EmptyInput,
    #[error("signature {input:?}: expected 3 colon-separated fields, found {found}")]
    FieldCount { input: String, found: usize },
    #[error("signature blocksize {field:?} is not a number")]
    BadBlocksizeNumber { field: String },
    #[error("signature blocksize {value} is not 3*2^i")]
    BadBlocksizeValue { value: u64 },
    #[error("signature field {field:?} contains a character outside the signature alphabet")]
    BadAlphabet { field: String },
    #[error("signature field {field:?} is longer than {max} chars")]
    FieldTooLong { field: String, max: usize },
}

/// Rolling hash over the last 7 bytes; the trigger for block boundaries.
#[derive(Debug, Clone, Default)]
struct RollingState {
    window: [u8; ROLLING_WINDOW],
    pos: usize,
    h1: u32,
    h2: u32,
    h3: u32,
}

impl RollingState {
    fn update(&mut self, byte: u8) {
        let oldest = self.window[self.pos];
        self.h2 = self
            .h2
            .wrapping_sub(self.h1)
            .wrapping_add(ROLLING_WINDOW as u32 * byte as u32);
        self.h1 = self
            .h1
            .wrapping_add(byte as u32)
            .wrapping_sub(oldest as u32);
        self.window[self.pos] = byte;
        self.pos = (self.pos + 1) % ROLLING_WINDOW;
        self.h3 = (self.h3 << 5) ^ byte as u32;
    }

    fn sum(&self) -> u32 {
        self.h1.wrapping_add(self.h2).wrapping_add(self.h3)
    }
}

/// One signature level: piecewise hash accumulation at a fixed blocksize.
struct Level {
    blocksize: u64,
    piece: u32,
    in_progress: bool,
    buf: Vec<u8>,
    cap: usize,
}

impl Level {
    fn new(blocksize: u64, cap: usize) -> Self {
        Level {
            blocksize,
            piece: PIECE_INIT,
            in_progress: false,
            buf: Vec::with_capacity(cap),
            cap,
        }
    }

    fn consume(&mut self, byte: u8) {
        self.piece = self.piece.wrapping_mul(PIECE_PRIME) ^ byte as u32;
        self.in_progress = true;
    }

    fn triggered(&self, rolling: u32) -> bool {
        rolling as u64 % self.blocksize == self.blocksize - 1
    }

    /// Emits the current block's character; once the signature is full,
    /// further characters overwrite the last slot instead of extending.
    fn emit(&mut self) {
        let ch = ALPHABET[(self.piece % 64) as usize];
        if self.buf.len() < self.cap {
            self.buf.push(ch);
        } else {
            *self.buf.last_mut().expect("cap >= 1") = ch;
        }
        self.piece = PIECE_INIT;
        self.in_progress = false;
    }

    fn finish(mut self) -> String {
        if self.in_progress {
            self.emit();
        }
        String::from_utf8(self.buf).expect("alphabet is ASCII")
    }
}

/// Smallest blocksize of form 3*2^i with blocksize * 64 >= len.
fn initial_blocksize(len: u64) -> u64 {
    let mut b = MIN_BLOCKSIZE;
    while b * (SIG1_LEN as u64) < len {
        b *= 2;
    }
    b
}

/// Single pass over `data` computing both signature levels at blocksize `b`
/// and `2b`. `on_trigger` observes every level-1 block boundary (the byte
/// index ending a block), which lets tests re-check trigger placement.
fn hash_pass(data: &[u8], blocksize: u64, mut on_trigger: impl FnMut(usize)) -> (String, String) {
    let mut rolling = RollingState::default();
    let mut level1 = Level::new(blocksize, SIG1_LEN);
    let mut level2 = Level::new(blocksize * 2, SIG2_LEN);

    for (i, &byte) in data.iter().enumerate() {
        rolling.update(byte);
        level1.consume(byte);
        level2.consume(byte);
        let sum = rolling.sum();
        if level1.triggered(sum) {
            on_trigger(i);
            level1.emit();
            if level2.triggered(sum) {
                level2.emit();
            }
        }
    }
    (level1.finish(), level2.finish())
}

/// Fuzzy-hashes a byte sequence. Deterministic; errors only on empty input.
///
/// The blocksize starts at the smallest `3*2^i` with `blocksize * 64 >=
/// data.len()` and halves (not below 3) until `sig1` reaches at least half
/// its full length, keeping signatures of short inputs near their target
/// size.
pub fn fuzzy_hash(data: &[u8]) -> Result<FuzzySignature, CtphError> {
    if data.is_empty() {
        return Err(CtphError::EmptyInput);
    }
    let mut blocksize = initial_blocksize(data.len() as u64);
    loop {
        let (sig1, sig2) = hash_pass(data, blocksize, |_| {});
        if sig1.len() < SIG1_LEN / 2 && blocksize > MIN_BLOCKSIZE {
            blocksize /= 2;
            continue;
        }
        return Ok(FuzzySignature {
            blocksize,
            sig1,
            sig2,
        });
    }
}

/// Parses the canonical `blocksize:sig1:sig2` rendering.
pub fn parse_signature(text: &str) -> Result<FuzzySignature, CtphError> {
    let fields: Vec<&str> = text.split(':').collect();
    if fields.len() != 3 {
        return Err(CtphError::FieldCount {
            input: text.to_string(),
            found: fields.len(),
        });
    }
    let blocksize: u64 = fields[0]
        .parse()
        .map_err(|_| CtphError::BadBlocksizeNumber {
            field: fields[0].to_string(),
        })?;
    if !is_valid_blocksize(blocksize) {
        return Err(CtphError::BadBlocksizeValue { value: blocksize });
    }
    for (field, max) in [(fields[1], SIG1_LEN), (fields[2], SIG2_LEN)] {
        if !field.bytes().all(|b| ALPHABET.contains(&b)) {
            return Err(CtphError::BadAlphabet {
                field: field.to_string(),
            });
        }
        if field.len() > max {
            return Err(CtphError::FieldTooLong {
                field: field.to_string(),
                max,
            });
        }
    }
    Ok(FuzzySignature {
        blocksize,
        sig1: fields[1].to_string(),
        sig2: fields[2].to_string(),
    })
}

fn is_valid_blocksize(b: u64) -> bool {
    b >= MIN_BLOCKSIZE && b.is_multiple_of(MIN_BLOCKSIZE) && (b / MIN_BLOCKSIZE).is_power_of_two()
}

/// Compares two signatures, returning a similarity in `[0, 100]`.
///
/// Signatures are comparable only at equal blocksizes (both levels compared,
/// max taken) or blocksizes off by a factor of two (the overlapping level
/// only); anything else scores 0. Identical renderings score 100.
pub fn fuzzy_compare(a: &FuzzySignature, b: &FuzzySignature) -> u32 {
    if a == b {
        return 100;
    }
    let mut best = 0;
    if a.blocksize == b.blocksize {
        best = score_strings(&a.sig1, &b.sig1, a.blocksize).max(score_strings(
            &a.sig2,
            &b.sig2,
            a.blocksize * 2,
        ));
    } else if a.blocksize == b.blocksize * 2 {
        best = score_strings(&a.sig1, &b.sig2, a.blocksize);
    } else if b.blocksize == a.blocksize * 2 {
        best = score_strings(&a.sig2, &b.sig1, b.blocksize);
    }
    best
}

/// Scores one pair of piecewise strings computed at `blocksize`.
fn score_strings(a: &str, b: &str, blocksize: u64) -> u32 {
    let a = collapse_runs(a.as_bytes());
    let b = collapse_runs(b.as_bytes());
    if !has_common_substring(&a, &b) {
        return 0;
    }
    let mut score = similarity_pct(&a, &b);
    if blocksize < CAP_BLOCKSIZE {
        let cap = (blocksize / MIN_BLOCKSIZE) * a.len().min(b.len()) as u64;
        score = score.min(cap.min(u32::MAX as u64) as u32);
    }
    score
}

/// Collapses runs of more than three identical characters down to three,
/// suppressing coincidental matches on low-entropy signatures.
fn collapse_runs(s: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(s.len());
    let mut run = 0usize;
    let mut prev = None;
    for &c in s {
        if Some(c) == prev {
            run += 1;
        } else {
            run = 1;
            prev = Some(c);
        }
        if run <= MAX_RUN {
            out.push(c);
        }
    }
    out
}

fn has_common_substring(a: &[u8], b: &[u8]) -> bool {
    if a.len() < COMMON_SUBSTRING_LEN || b.len() < COMMON_SUBSTRING_LEN {
        return false;
    }
    a.windows(COMMON_SUBSTRING_LEN)
        .any(|w| b.windows(COMMON_SUBSTRING_LEN).any(|v| v == w))
}
