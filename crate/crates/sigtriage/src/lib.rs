//! Signature-based malware triage.
//!
//! Three detection approaches over raw bytes, plus the glue to run them
//! together:
//!
//! - [`exacthash`] — SHA-256 digests for exact-match detection.
//! - [`ctph`] — context-triggered piecewise (fuzzy) hashing with 0–100
//!   similarity scoring built on [`editdist`].
//! - [`rulelang`] / [`engine`] — a YARA-subset rule language compiled to a
//!   multi-pattern scanner, including a `fuzzy_sim(..)` condition that embeds
//!   fuzzy-hash similarity directly in rules.
//! - [`sigstore`] — CSV-backed store of known-malware signatures.
//! - [`triage`] — merges all three approaches into a per-file verdict.
//! - [`harness`] — synthetic corpora, mutations, and detection tables.
//! - [`cli`] — the `sigtriage` command-line tool.
//!
//! The crate `examples/` directory holds a runnable walkthrough of each
//! capability.

pub mod cli;
pub mod ctph;
pub mod editdist;
pub mod engine;
pub mod exacthash;
pub mod harness;
pub mod rulelang;
pub mod sigstore;
pub mod triage;

pub use ctph::{fuzzy_compare, fuzzy_hash, parse_signature, FuzzySignature};
pub use editdist::{dl_distance, similarity_pct, EditCosts};
pub use engine::{compile, eval_condition, scan, CompiledRuleSet, MatchContext, MatchResult};
pub use exacthash::{digest_bytes, digest_file, digest_stream, Digest};
pub use rulelang::{parse_rules, render_rules, RuleSet};
pub use sigstore::{SignatureKind, SignatureRecord, SignatureStore};
pub use triage::{render_report, triage_bytes, triage_file, TriageConfig, TriageReport, Verdict};
