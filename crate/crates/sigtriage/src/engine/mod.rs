//! Rule compilation and scanning.
//!
//! [`compile`] turns a [`RuleSet`] into an immutable [`CompiledRuleSet`]: one
//! Aho-Corasick automaton over all extracted atoms, a verifier per pattern,
//! and the per-rule conditions. [`scan`] makes a single automaton pass over
//! the data, verifies every atom hit against its full pattern, falls back to
//! a linear-time NFA pass for regexes, and evaluates each rule's condition
//! over the complete offset sets.

mod automaton;
mod eval;
mod nfa;
mod verify;

use serde::{Deserialize, Serialize};

use crate::ctph::{self, FuzzySignature};
use crate::rulelang::{ConditionExpr, RuleSet, Severity};

use automaton::AhoCorasick;
pub use eval::{eval_condition, MatchContext};
pub use verify::CompileError;
use verify::{AtomKind, Matcher};

/// Offsets recorded per pattern are capped here; excess sets a truncation
/// flag and the lowest million are kept.
pub const MAX_OFFSETS_PER_PATTERN: usize = 1_000_000;

/// Verified candidates collected before dedup; bounded disorder from atom
/// windows means the lowest offsets always arrive within this budget.
const RAW_CANDIDATE_CAP: usize = 2 * MAX_OFFSETS_PER_PATTERN;

/// A rule set compiled for scanning. Immutable and shareable across threads.
pub struct CompiledRuleSet {
    rules: Vec<CompiledRule>,
    patterns: Vec<verify::CompiledPattern>,
    automaton: AhoCorasick,
    atoms: Vec<AtomEntry>,
    fuzzy_needed: bool,
}

struct CompiledRule {
    name: String,
    tags: Vec<String>,
    severity: Severity,
    family: Option<String>,
    condition: ConditionExpr,
    /// Contiguous range into `patterns`.
    pattern_range: std::ops::Range<usize>,
}

/// One unique atom byte string with every (pattern, recipe) interested in it.
struct AtomEntry {
    len: usize,
    consumers: Vec<(usize, AtomKind)>,
}

impl CompiledRuleSet {
    pub fn rule_count(&self) -> usize {
        self.rules.len()
    }

    pub fn fuzzy_needed(&self) -> bool {
        self.fuzzy_needed
    }

    #[cfg(test)]
    pub(crate) fn atom_count(&self) -> usize {
        self.atoms.len()
    }
}

/// Result of scanning one byte sequence against a compiled rule set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub filesize: u64,
    /// Fuzzy signature of the scanned data, computed once iff some condition
    /// needs it and the data is non-empty.
    pub fuzzy: Option<FuzzySignature>,
    pub rules: Vec<RuleMatch>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleMatch {
    pub name: String,
    pub tags: Vec<String>,
    pub severity: Severity,
    pub family: Option<String>,
    pub matched: bool,
    pub patterns: Vec<PatternMatches>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternMatches {
    pub id: String,
    /// Match offsets, sorted ascending, overlaps included.
    pub offsets: Vec<usize>,
    pub truncated: bool,
}

impl MatchResult {
    pub fn matched_rules(&self) -> impl Iterator<Item = &RuleMatch> {
        self.rules.iter().filter(|r| r.matched)
    }
}

fn condition_uses_fuzzy(expr: &ConditionExpr) -> bool {
    match expr {
        ConditionExpr::FuzzySim { .. } => true,
        ConditionExpr::And(a, b) | ConditionExpr::Or(a, b) => {
            condition_uses_fuzzy(a) || condition_uses_fuzzy(b)
        }
        ConditionExpr::Not(inner) => condition_uses_fuzzy(inner),
        _ => false,
    }
}

/// Compiles a rule set: extracts atoms (the longest literal run available
/// per pattern), builds the automaton, and retains per-rule conditions.
pub fn compile(rs: &RuleSet) -> Result<CompiledRuleSet, CompileError> {
    let mut rules = Vec::with_capacity(rs.rules.len());
    let mut patterns = Vec::new();
    let mut raw_atoms = Vec::new();
    let mut fuzzy_needed = false;

    for rule in &rs.rules {
        let start = patterns.len();
        for def in &rule.patterns {
            let pattern_idx = patterns.len();
            let compiled = verify::compile_pattern(
                &rule.name,
                pattern_idx,
                &def.id,
                &def.body,
                &mut raw_atoms,
            )?;
            patterns.push(compiled);
        }
        fuzzy_needed |= condition_uses_fuzzy(&rule.condition);
        rules.push(CompiledRule {
            name: rule.name.clone(),
            tags: rule.tags.clone(),
            severity: rule.severity(),
            family: rule.family().map(str::to_string),
            condition: rule.condition.clone(),
            pattern_range: start..patterns.len(),
        });
    }

    // Dedup atom byte strings; all consumers of an atom share one automaton
    // entry.
    let mut index: std::collections::HashMap<Vec<u8>, usize> = std::collections::HashMap::new();
    let mut unique: Vec<Vec<u8>> = Vec::new();
    let mut atoms: Vec<AtomEntry> = Vec::new();
    for atom in raw_atoms {
        let entry = match index.get(&atom.bytes) {
            Some(&i) => i,
            None => {
                let i = unique.len();
                index.insert(atom.bytes.clone(), i);
                atoms.push(AtomEntry {
                    len: atom.bytes.len(),
                    consumers: Vec::new(),
                });
                unique.push(atom.bytes);
                i
            }
        };
        atoms[entry].consumers.push((atom.pattern_idx, atom.kind));
    }
    let automaton = AhoCorasick::build(&unique);

    Ok(CompiledRuleSet {
        rules,
        patterns,
        automaton,
        atoms,
        fuzzy_needed,
    })
}

/// Scans `data` and evaluates every rule. Deterministic: identical inputs
/// produce identical results.
pub fn scan(c: &CompiledRuleSet, data: &[u8]) -> MatchResult {
    let n_patterns = c.patterns.len();
    let mut raw: Vec<Vec<usize>> = vec![Vec::new(); n_patterns];
    let mut truncated = vec![false; n_patterns];
    let mut gated = vec![false; n_patterns];

    c.automaton.scan(data, |atom_id, end| {
        let entry = &c.atoms[atom_id as usize];
        let q = end + 1 - entry.len;
        for &(pattern_idx, ref kind) in &entry.consumers {
            match *kind {
                AtomKind::Anchored {
                    min_delta,
                    max_delta,
                } => {
                    if q < min_delta {
                        continue;
                    }
                    let hi = q - min_delta;
                    let lo = q.saturating_sub(max_delta);
                    let sink = &mut raw[pattern_idx];
                    for p in lo..=hi {
                        if sink.len() >= RAW_CANDIDATE_CAP {
                            truncated[pattern_idx] = true;
                            break;
                        }
                        if pattern_match_at(&c.patterns[pattern_idx].matcher, data, p) {
                            sink.push(p);
                        }
                    }
                }
                AtomKind::Gate => gated[pattern_idx] = true,
            }
        }
    });

    // Regex offsets come from a single reverse NFA pass: patterns without an
    // atom always run, gated ones only after their atom was seen.
    for (idx, pattern) in c.patterns.iter().enumerate() {
        if let Matcher::Regex(m) = &pattern.matcher {
            if pattern.full_scan || gated[idx] {
                let (offsets, trunc) = m
                    .rev_nfa
                    .match_starts_reversed(data, MAX_OFFSETS_PER_PATTERN);
                raw[idx] = offsets;
                truncated[idx] = trunc;
            }
        }
    }

    let mut per_pattern: Vec<PatternMatches> = Vec::with_capacity(n_patterns);
    for (idx, mut offsets) in raw.into_iter().enumerate() {
        offsets.sort_unstable();
        offsets.dedup();
        if offsets.len() > MAX_OFFSETS_PER_PATTERN {
            offsets.truncate(MAX_OFFSETS_PER_PATTERN);
            truncated[idx] = true;
        }
        per_pattern.push(PatternMatches {
            id: c.patterns[idx].id.clone(),
            offsets,
            truncated: truncated[idx],
        });
    }

    let fuzzy = if c.fuzzy_needed && !data.is_empty() {
        ctph::fuzzy_hash(data).ok()
    } else {
        None
    };

    let mut rules = Vec::with_capacity(c.rules.len());
    for rule in &c.rules {
        let ctx = MatchContext {
            data,
            patterns: rule
                .pattern_range
                .clone()
                .map(|i| {
                    (
                        per_pattern[i].id.as_str(),
                        per_pattern[i].offsets.as_slice(),
                    )
                })
                .collect(),
            fuzzy: fuzzy.as_ref(),
        };
        let matched = eval_condition(&rule.condition, &ctx);
        rules.push(RuleMatch {
            name: rule.name.clone(),
            tags: rule.tags.clone(),
            severity: rule.severity,
            family: rule.family.clone(),
            matched,
            patterns: rule
                .pattern_range
                .clone()
                .map(|i| per_pattern[i].clone())
                .collect(),
        });
    }

    MatchResult {
        filesize: data.len() as u64,
        fuzzy,
        rules,
    }
}

fn pattern_match_at(matcher: &Matcher, data: &[u8], p: usize) -> bool {
    match matcher {
        Matcher::Text(variants) => variants.iter().any(|v| v.match_at(data, p)),
        Matcher::Hex(m) => m.match_at(data, p),
        Matcher::Regex(_) => false,
    }
}
