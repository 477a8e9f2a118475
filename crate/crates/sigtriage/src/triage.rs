//! Per-file triage: run all three detection approaches and merge the
//! evidence into one verdict.
//!
//! The verdict decision table, in priority order:
//!
//! 1. exact digest hit                       → known-malicious
//! 2. fuzzy match at or above the threshold  → likely-malicious
//! 3. matched rule with severity "malicious" → likely-malicious
//! 4. any matched rule at all                → suspicious
//! 5. otherwise                              → unknown
//!
//! Lower rows never override higher ones, but their evidence is always
//! reported, and capabilities list every matched rule regardless of verdict.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ctph;
use crate::engine::{scan, CompiledRuleSet};
use crate::exacthash::digest_bytes;
use crate::rulelang::Severity;
use crate::sigstore::SignatureStore;

pub const DEFAULT_FUZZY_THRESHOLD: u32 = 50;
pub const DEFAULT_MAX_FUZZY_MATCHES: usize = 10;
pub const DEFAULT_MAX_FILE_SIZE: u64 = 256 * 1024 * 1024;

#[derive(Debug, Clone)]
pub struct TriageConfig {
    /// Minimum fuzzy similarity counted as a detection.
    pub fuzzy_threshold: u32,
    /// Fuzzy matches reported as evidence, at most.
    pub max_fuzzy_matches: usize,
    /// Files larger than this are refused rather than partially read.
    pub max_file_size: u64,
}

impl Default for TriageConfig {
    fn default() -> Self {
        TriageConfig {
            fuzzy_threshold: DEFAULT_FUZZY_THRESHOLD,
            max_fuzzy_matches: DEFAULT_MAX_FUZZY_MATCHES,
            max_file_size: DEFAULT_MAX_FILE_SIZE,
        }
    }
}

/// Verdicts ordered by severity: `Unknown < Suspicious < LikelyMalicious <
/// KnownMalicious`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "unknown")]
    Unknown,
    #[serde(rename = "suspicious")]
    Suspicious,
    #[serde(rename = "likely-malicious")]
    LikelyMalicious,
    #[serde(rename = "known-malicious")]
    KnownMalicious,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Unknown => "unknown",
            Verdict::Suspicious => "suspicious",
            Verdict::LikelyMalicious => "likely-malicious",
            Verdict::KnownMalicious => "known-malicious",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvidenceSource {
    Exact,
    Fuzzy,
    Rule,
}

/// A family label with the approach that produced it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub family: String,
    pub source: EvidenceSource,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExactEvidence {
    pub family: String,
    pub source: String,
    pub first_seen: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FuzzyEvidence {
    pub score: u32,
    pub signature: String,
    pub family: String,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleEvidence {
    pub name: String,
    pub tags: Vec<String>,
    pub severity: Severity,
    pub family: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Evidence {
    pub exact: Option<ExactEvidence>,
    /// Fuzzy matches with any similarity at all (score >= 1), strongest
    /// first; detection additionally requires the configured threshold.
    pub fuzzy: Vec<FuzzyEvidence>,
    pub rules: Vec<RuleEvidence>,
}

/// The merged result for one file. JSON rendering is schema-stable: fixed
/// key names, deterministic array order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriageReport {
    pub file: String,
    pub sha256: String,
    pub ssdeep: String,
    pub verdict: Verdict,
    pub classification: Vec<Classification>,
    pub capabilities: Vec<String>,
    pub evidence: Evidence,
}

#[derive(Debug, Error)]
pub enum TriageError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {size} bytes exceeds the {cap}-byte size cap; refusing partial read")]
    TooLarge { path: String, size: u64, cap: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Text,
}

/// Triages one file from disk.
pub fn triage_file(
    path: &Path,
    store: &SignatureStore,
    rules: &CompiledRuleSet,
    cfg: &TriageConfig,
) -> Result<TriageReport, TriageError> {
    let display = path.display().to_string();
    let meta = std::fs::metadata(path).map_err(|e| TriageError::Io {
        path: display.clone(),
        source: e,
    })?;
    if meta.len() > cfg.max_file_size {
        return Err(TriageError::TooLarge {
            path: display,
            size: meta.len(),
            cap: cfg.max_file_size,
        });
    }
    let data = std::fs::read(path).map_err(|e| TriageError::Io {
        path: display.clone(),
        source: e,
    })?;
    Ok(triage_bytes(&display, &data, store, rules, cfg))
}

/// Triages an in-memory byte sequence; `label` appears as the report's file
/// name.
pub fn triage_bytes(
    label: &str,
    data: &[u8],
    store: &SignatureStore,
    rules: &CompiledRuleSet,
    cfg: &TriageConfig,
) -> TriageReport {
    let digest = digest_bytes(data);
    let fuzzy_sig = ctph::fuzzy_hash(data).ok();

    let exact_hit = store.lookup_exact(&digest);

    // Evidence keeps every match with >= 1% similarity (the paper's Table II
    // "matches" bar); the detection decision applies the configured
    // threshold on top.
    let fuzzy_hits = match &fuzzy_sig {
        Some(sig) => store.query_fuzzy(sig, 1, cfg.max_fuzzy_matches),
        None => Vec::new(),
    };

    let scan_result = scan(rules, data);
    let matched_rules: Vec<RuleEvidence> = scan_result
        .matched_rules()
        .map(|r| RuleEvidence {
            name: r.name.clone(),
            tags: r.tags.clone(),
            severity: r.severity,
            family: r.family.clone(),
        })
        .collect();

    // Decision table, top row wins.
    let top_fuzzy_detected = fuzzy_hits
        .first()
        .is_some_and(|(s, _)| *s >= cfg.fuzzy_threshold);
    let malicious_rule = matched_rules
        .iter()
        .any(|r| r.severity == Severity::Malicious);
    let verdict = if exact_hit.is_some() {
        Verdict::KnownMalicious
    } else if top_fuzzy_detected || malicious_rule {
        // rows 2 and 3: fuzzy match over threshold, or a malicious rule
        Verdict::LikelyMalicious
    } else if !matched_rules.is_empty() {
        Verdict::Suspicious
    } else {
        Verdict::Unknown
    };

    // Classification, ordered by evidence strength: exact, then fuzzy
    // matches at or above the threshold (already strongest-first), then rule
    // family metadata. First occurrence of a family wins.
    let mut classification: Vec<Classification> = Vec::new();
    let push_family = |family: &str, source: EvidenceSource, list: &mut Vec<Classification>| {
        if !list.iter().any(|c| c.family == family) {
            list.push(Classification {
                family: family.to_string(),
                source,
            });
        }
    };
    if let Some(record) = exact_hit {
        push_family(&record.family, EvidenceSource::Exact, &mut classification);
    }
    for (score, record) in &fuzzy_hits {
        if *score >= cfg.fuzzy_threshold {
            push_family(&record.family, EvidenceSource::Fuzzy, &mut classification);
        }
    }
    for rule in &matched_rules {
        if let Some(family) = &rule.family {
            push_family(family, EvidenceSource::Rule, &mut classification);
        }
    }

    // Capabilities: every matched rule name, then every tag, in match order.
    let mut capabilities: Vec<String> = Vec::new();
    for rule in &matched_rules {
        if !capabilities.contains(&rule.name) {
            capabilities.push(rule.name.clone());
        }
    }
    for rule in &matched_rules {
        for tag in &rule.tags {
            if !capabilities.contains(tag) {
                capabilities.push(tag.clone());
            }
        }
    }

    TriageReport {
        file: label.to_string(),
        sha256: digest.hex(),
        ssdeep: fuzzy_sig.map(|s| s.to_string()).unwrap_or_default(),
        verdict,
        classification,
        capabilities,
        evidence: Evidence {
            exact: exact_hit.map(|r| ExactEvidence {
                family: r.family.clone(),
                source: r.source.clone(),
                first_seen: r.first_seen.clone(),
            }),
            fuzzy: fuzzy_hits
                .into_iter()
                .map(|(score, r)| FuzzyEvidence {
                    score,
                    signature: r.value.clone(),
                    family: r.family.clone(),
                    source: r.source.clone(),
                })
                .collect(),
            rules: matched_rules,
        },
    }
}

/// Renders a report as stable JSON or as terminal text (one matched rule
/// name per line under the file header).
pub fn render_report(report: &TriageReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => serde_json::to_string(report).expect("report serializes"),
        ReportFormat::Text => {
            let mut out = String::new();
            out.push_str(&format!("-{}:\n", report.file));
            out.push_str(&format!("  verdict: {}\n", report.verdict.as_str()));
            out.push_str(&format!("  sha256: {}\n", report.sha256));
            out.push_str(&format!("  ssdeep: {}\n", report.ssdeep));
            if !report.classification.is_empty() {
                let rendered: Vec<String> = report
                    .classification
                    .iter()
                    .map(|c| {
                        let source = match c.source {
                            EvidenceSource::Exact => "exact",
                            EvidenceSource::Fuzzy => "fuzzy",
                            EvidenceSource::Rule => "rule",
                        };
                        format!("{} ({source})", c.family)
                    })
                    .collect();
                out.push_str(&format!("  classification: {}\n", rendered.join(", ")));
            }
            if let Some(exact) = &report.evidence.exact {
                out.push_str(&format!(
                    "  exact match: family {} via {} (first seen {})\n",
                    exact.family, exact.source, exact.first_seen
                ));
            }
            for hit in &report.evidence.fuzzy {
                out.push_str(&format!(
                    "  fuzzy match: {}% to family {} ({})\n",
                    hit.score, hit.family, hit.signature
                ));
            }
            if report.evidence.rules.is_empty() {
                out.push_str("  (no rule matches)\n");
            } else {
                out.push_str("  rule matches:\n");
                for rule in &report.evidence.rules {
                    out.push_str(&format!("    {}\n", rule.name));
                }
            }
            out
        }
    }
}
