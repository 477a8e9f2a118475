//! Store of known-malware signatures: exact digests and fuzzy signatures
//! with family labels.
//!
//! Persistence is the CSV files themselves — reloaded on start, diffable,
//! and trivially producible from public feed exports. Schema:
//!
//! ```csv
//! value,family,source,first_seen
//! ```
//!
//! `#`-prefixed lines are comments. After loading, the store is read-only
//! and safe to share across concurrent queries.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ctph::{fuzzy_compare, parse_signature, FuzzySignature};
use crate::exacthash::Digest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignatureKind {
    Exact,
    Fuzzy,
}

/// One known-malware signature with its family label and provenance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignatureRecord {
    pub kind: SignatureKind,
    /// Lowercase digest hex for exact records, `blocksize:sig1:sig2` for
    /// fuzzy records.
    pub value: String,
    pub family: String,
    pub source: String,
    pub first_seen: String,
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {rejected} of {total} rows malformed; import rejected")]
    TooManyBadRows {
        path: String,
        rejected: usize,
        total: usize,
    },
}

/// Outcome of one import: rows accepted plus per-line warnings for rows that
/// were skipped or replaced.
#[derive(Debug, Default)]
pub struct ImportSummary {
    pub accepted: usize,
    pub warnings: Vec<String>,
}

/// In-memory signature store. Exact records index by digest hex; fuzzy
/// records bucket by blocksize so queries only score comparable candidates.
#[derive(Debug, Default)]
pub struct SignatureStore {
    exact: HashMap<String, SignatureRecord>,
    fuzzy: Vec<(FuzzySignature, SignatureRecord)>,
    fuzzy_by_blocksize: HashMap<u64, Vec<usize>>,
    fuzzy_seen: HashMap<String, ()>,
}

impl SignatureStore {
    pub fn new() -> SignatureStore {
        SignatureStore::default()
    }

    /// Total records currently stored.
    pub fn len(&self) -> usize {
        self.exact.len() + self.fuzzy.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn exact_len(&self) -> usize {
        self.exact.len()
    }

    pub fn fuzzy_len(&self) -> usize {
        self.fuzzy.len()
    }

    /// Imports a CSV signature file. Malformed rows are skipped with a
    /// warning each; when more than half the data rows are malformed the
    /// whole import is rejected.
    pub fn import_signatures(
        &mut self,
        path: &Path,
        kind: SignatureKind,
    ) -> Result<ImportSummary, StoreError> {
        let display = path.display().to_string();
        let file = std::fs::File::open(path).map_err(|e| StoreError::Io {
            path: display.clone(),
            source: e,
        })?;
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .comment(Some(b'#'))
            .from_reader(file);

        // Parse all rows before touching the store so a rejected import
        // leaves it untouched.
        let mut parsed: Vec<(String, String, String, String)> = Vec::new();
        let mut summary = ImportSummary::default();
        let mut rejected = 0usize;
        let mut total = 0usize;
        for (i, row) in reader.records().enumerate() {
            let line = i + 2; // header is line 1
            total += 1;
            let row = match row {
                Ok(r) => r,
                Err(e) => {
                    rejected += 1;
                    summary
                        .warnings
                        .push(format!("{display}:{line}: unreadable row: {e}"));
                    continue;
                }
            };
            if row.len() != 4 {
                rejected += 1;
                summary.warnings.push(format!(
                    "{display}:{line}: expected 4 fields, found {}",
                    row.len()
                ));
                continue;
            }
            let value = row[0].trim().to_string();
            let family = row[1].trim().to_string();
            let source = row[2].trim().to_string();
            let first_seen = row[3].trim().to_string();
            if family.is_empty() {
                rejected += 1;
                summary
                    .warnings
                    .push(format!("{display}:{line}: empty family"));
                continue;
            }
            let normalized = match kind {
                SignatureKind::Exact => match Digest::from_hex(&value) {
                    Ok(d) => d.hex(),
                    Err(e) => {
                        rejected += 1;
                        summary.warnings.push(format!("{display}:{line}: {e}"));
                        continue;
                    }
                },
                SignatureKind::Fuzzy => match parse_signature(&value) {
                    Ok(sig) => sig.to_string(),
                    Err(e) => {
                        rejected += 1;
                        summary.warnings.push(format!("{display}:{line}: {e}"));
                        continue;
                    }
                },
            };
            parsed.push((normalized, family, source, first_seen));
        }

        if total > 0 && rejected * 2 > total {
            return Err(StoreError::TooManyBadRows {
                path: display,
                rejected,
                total,
            });
        }

        for (value, family, source, first_seen) in parsed {
            let record = SignatureRecord {
                kind,
                value,
                family,
                source,
                first_seen,
            };
            match kind {
                SignatureKind::Exact => {
                    if let Some(old) = self.exact.insert(record.value.clone(), record.clone()) {
                        if old != record {
                            summary.warnings.push(format!(
                                "{display}: duplicate digest {}: replacing record for family '{}'",
                                record.value, old.family
                            ));
                        }
                    }
                }
                SignatureKind::Fuzzy => {
                    let dedup_key = format!(
                        "{}\x1f{}\x1f{}\x1f{}",
                        record.value, record.family, record.source, record.first_seen
                    );
                    if self.fuzzy_seen.insert(dedup_key, ()).is_none() {
                        let sig = parse_signature(&record.value).expect("validated above");
                        self.fuzzy_by_blocksize
                            .entry(sig.blocksize())
                            .or_default()
                            .push(self.fuzzy.len());
                        self.fuzzy.push((sig, record));
                    }
                }
            }
            summary.accepted += 1;
        }
        Ok(summary)
    }

    /// Exact hex-equality lookup; `None` means unknown.
    pub fn lookup_exact(&self, digest: &Digest) -> Option<&SignatureRecord> {
        self.exact.get(&digest.hex())
    }

    /// Finds stored fuzzy signatures scoring at least `threshold` against
    /// `sig`. Candidates are restricted to the comparable blocksize buckets
    /// `{b/2, b, 2b}` — by the factor-of-two comparison rule no other bucket
    /// can score above zero. A zero score means "no similarity" and is never
    /// returned. Results sort by score descending, then family, then value;
    /// at most `limit` entries.
    pub fn query_fuzzy(
        &self,
        sig: &FuzzySignature,
        threshold: u32,
        limit: usize,
    ) -> Vec<(u32, &SignatureRecord)> {
        let b = sig.blocksize();
        let mut buckets = vec![b, b * 2];
        if b.is_multiple_of(2) {
            buckets.push(b / 2);
        }
        let mut hits: Vec<(u32, &SignatureRecord)> = Vec::new();
        for bucket in buckets {
            let Some(indices) = self.fuzzy_by_blocksize.get(&bucket) else {
                continue;
            };
            for &i in indices {
                let (candidate, record) = &self.fuzzy[i];
                let score = fuzzy_compare(sig, candidate);
                if score >= threshold && score > 0 {
                    hits.push((score, record));
                }
            }
        }
        hits.sort_by(|(sa, ra), (sb, rb)| {
            sb.cmp(sa)
                .then_with(|| ra.family.cmp(&rb.family))
                .then_with(|| ra.value.cmp(&rb.value))
        });
        hits.truncate(limit);
        hits
    }

    /// All fuzzy records, for exhaustive comparisons in tests and the
    /// pruning-soundness check.
    pub fn fuzzy_records(&self) -> impl Iterator<Item = &(FuzzySignature, SignatureRecord)> {
        self.fuzzy.iter()
    }
}
