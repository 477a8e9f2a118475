//! Per-pattern matchers and atom extraction.
//!
//! The automaton only finds *atoms* — literal byte runs pulled out of each
//! pattern. Every atom hit is verified against the full pattern before an
//! offset is recorded: mask checks and bounded jump windows for hex patterns,
//! case folding and word boundaries for text.

use crate::rulelang::regex::RegexExpr;
use crate::rulelang::{HexToken, PatternBody, TextModifiers};

use super::nfa::{fold_case, Nfa};

/// Longest atom registered in the automaton; longer literals verify the rest.
const ATOM_MAX_LEN: usize = 64;
/// Window used for case-insensitive atoms; every case combination of the
/// window is registered, so it stays short.
const NOCASE_ATOM_LEN: usize = 4;

/// Scan-ready form of one pattern.
pub(super) struct CompiledPattern {
    pub id: String,
    pub matcher: Matcher,
    /// Regex with no mandatory literal: scan unconditionally.
    pub full_scan: bool,
}

pub(super) enum Matcher {
    Text(Vec<TextVariant>),
    Hex(HexMatcher),
    Regex(RegexMatcher),
}

/// An atom plus the recipe linking a hit back to candidate pattern starts.
pub(super) struct Atom {
    pub bytes: Vec<u8>,
    pub pattern_idx: usize,
    pub kind: AtomKind,
}

pub(super) enum AtomKind {
    /// Pattern may start `min_delta..=max_delta` bytes before the atom.
    Anchored { min_delta: usize, max_delta: usize },
    /// Hit only arms the pattern for a full scan (regex gating).
    Gate,
}

// ---- text ----

/// One concrete byte form of a text pattern (`ascii` and/or `wide`).
pub(super) struct TextVariant {
    pub bytes: Vec<u8>,
    pub nocase: bool,
    pub fullword: bool,
}

impl TextVariant {
    pub fn match_at(&self, data: &[u8], p: usize) -> bool {
        let end = p + self.bytes.len();
        if end > data.len() {
            return false;
        }
        let window = &data[p..end];
        let matches = if self.nocase {
            window
                .iter()
                .zip(&self.bytes)
                .all(|(d, b)| d.eq_ignore_ascii_case(b))
        } else {
            window == self.bytes.as_slice()
        };
        if !matches {
            return false;
        }
        if self.fullword {
            if p > 0 && data[p - 1].is_ascii_alphanumeric() {
                return false;
            }
            if end < data.len() && data[end].is_ascii_alphanumeric() {
                return false;
            }
        }
        true
    }
}

fn widen(bytes: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(bytes.len() * 2);
    for &b in bytes {
        out.push(b);
        out.push(0);
    }
    out
}

/// All case combinations of up to `NOCASE_ATOM_LEN` leading bytes.
fn case_variants(prefix: &[u8]) -> Vec<Vec<u8>> {
    let mut variants = vec![Vec::new()];
    for &b in prefix {
        let mut next = Vec::new();
        for v in &variants {
            let mut lower = v.clone();
            lower.push(b.to_ascii_lowercase());
            next.push(lower);
            if b.is_ascii_alphabetic() {
                let mut upper = v.clone();
                upper.push(b.to_ascii_uppercase());
                next.push(upper);
            }
        }
        variants = next;
    }
    variants
}

// ---- hex ----

/// Hex pattern split at jumps into fixed-width segments of (value, mask)
/// pairs; `jumps[i]` sits between `segments[i]` and `segments[i + 1]`.
pub(super) struct HexMatcher {
    pub segments: Vec<Vec<(u8, u8)>>,
    pub jumps: Vec<(u32, u32)>,
}

impl HexMatcher {
    fn from_tokens(tokens: &[HexToken]) -> HexMatcher {
        let mut segments = vec![Vec::new()];
        let mut jumps = Vec::new();
        for token in tokens {
            match token {
                HexToken::Byte { value, mask } => {
                    segments.last_mut().expect("nonempty").push((*value, *mask));
                }
                HexToken::Jump { min, max } => {
                    jumps.push((*min, *max));
                    segments.push(Vec::new());
                }
            }
        }
        HexMatcher { segments, jumps }
    }

    fn segment_matches(segment: &[(u8, u8)], data: &[u8], p: usize) -> bool {
        if p + segment.len() > data.len() {
            return false;
        }
        segment
            .iter()
            .zip(&data[p..p + segment.len()])
            .all(|(&(value, mask), &b)| b & mask == value)
    }

    /// Does the full pattern match starting exactly at `p`? Jump windows are
    /// explored breadth-first over position sets, so cost stays bounded by
    /// the jump ranges rather than exploding combinatorially.
    pub fn match_at(&self, data: &[u8], p: usize) -> bool {
        let mut positions = vec![p];
        for (i, segment) in self.segments.iter().enumerate() {
            if i > 0 {
                let (min, max) = self.jumps[i - 1];
                let mut expanded = Vec::new();
                for &q in &positions {
                    for gap in min..=max {
                        let candidate = q + gap as usize;
                        if candidate <= data.len() {
                            expanded.push(candidate);
                        }
                    }
                }
                expanded.sort_unstable();
                expanded.dedup();
                positions = expanded;
            }
            positions.retain(|&q| Self::segment_matches(segment, data, q));
            if positions.is_empty() {
                return false;
            }
            for q in positions.iter_mut() {
                *q += segment.len();
            }
        }
        true
    }
}

// ---- regex ----

pub(super) struct RegexMatcher {
    /// NFA of the reversed expression; start offsets come from one reverse
    /// pass over the data.
    pub rev_nfa: Nfa,
}

/// Longest literal byte run that every match of the expression must contain.
fn mandatory_literal(expr: &RegexExpr) -> Option<Vec<u8>> {
    fn walk(expr: &RegexExpr, runs: &mut Vec<Vec<u8>>, current: &mut Vec<u8>) {
        fn close(runs: &mut Vec<Vec<u8>>, current: &mut Vec<u8>) {
            if !current.is_empty() {
                runs.push(std::mem::take(current));
            }
        }
        match expr {
            RegexExpr::Char(b) => current.push(*b),
            RegexExpr::Class {
                negated: false,
                ranges,
            } if ranges.len() == 1 && ranges[0].0 == ranges[0].1 => {
                current.push(ranges[0].0);
            }
            RegexExpr::AnyByte | RegexExpr::Class { .. } => close(runs, current),
            RegexExpr::Concat(parts) => {
                for part in parts {
                    walk(part, runs, current);
                }
            }
            RegexExpr::Alt(_) => close(runs, current),
            RegexExpr::Repeat { inner, min, .. } => {
                close(runs, current);
                if *min >= 1 {
                    walk(inner, runs, current);
                    close(runs, current);
                }
            }
        }
    }
    let mut runs = Vec::new();
    let mut current = Vec::new();
    walk(expr, &mut runs, &mut current);
    if !current.is_empty() {
        runs.push(current);
    }
    // Longest run; ties break toward the earliest, like hex atom choice.
    runs.into_iter()
        .fold(None, |best: Option<Vec<u8>>, run| match best {
            Some(b) if b.len() >= run.len() => Some(b),
            _ => Some(run),
        })
}

/// Compile failure: a pattern offers no literal to anchor scanning on and no
/// fallback path.
#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum CompileError {
    #[error("rule '{rule}': pattern '${pattern}' has no extractable literal atom")]
    NoAtom { rule: String, pattern: String },
}

/// Builds the matcher and atoms for one pattern.
pub(super) fn compile_pattern(
    rule_name: &str,
    pattern_idx: usize,
    id: &str,
    body: &PatternBody,
    atoms: &mut Vec<Atom>,
) -> Result<CompiledPattern, CompileError> {
    let no_atom = || CompileError::NoAtom {
        rule: rule_name.to_string(),
        pattern: id.to_string(),
    };
    let mut full_scan = false;
    let matcher = match body {
        PatternBody::Text { value, modifiers } => {
            if value.is_empty() {
                return Err(no_atom());
            }
            let variants = text_variants(value, modifiers);
            for variant in &variants {
                if variant.nocase {
                    let window = &variant.bytes[..variant.bytes.len().min(NOCASE_ATOM_LEN)];
                    for case_form in case_variants(window) {
                        atoms.push(Atom {
                            bytes: case_form,
                            pattern_idx,
                            kind: AtomKind::Anchored {
                                min_delta: 0,
                                max_delta: 0,
                            },
                        });
                    }
                } else {
                    atoms.push(Atom {
                        bytes: variant.bytes[..variant.bytes.len().min(ATOM_MAX_LEN)].to_vec(),
                        pattern_idx,
                        kind: AtomKind::Anchored {
                            min_delta: 0,
                            max_delta: 0,
                        },
                    });
                }
            }
            Matcher::Text(variants)
        }
        PatternBody::Hex { tokens } => {
            let matcher = HexMatcher::from_tokens(tokens);
            let (bytes, min_delta, max_delta) = best_hex_atom(&matcher).ok_or_else(no_atom)?;
            atoms.push(Atom {
                bytes,
                pattern_idx,
                kind: AtomKind::Anchored {
                    min_delta,
                    max_delta,
                },
            });
            Matcher::Hex(matcher)
        }
        PatternBody::Regex { expr, nocase } => {
            let effective = if *nocase {
                fold_case(expr)
            } else {
                expr.clone()
            };
            // Case-folded literals are no longer mandatory byte runs, so
            // nocase regexes always take the full-scan path.
            let literal = if *nocase {
                None
            } else {
                mandatory_literal(&effective)
            };
            match literal {
                Some(lit) => {
                    let capped = lit[..lit.len().min(ATOM_MAX_LEN)].to_vec();
                    atoms.push(Atom {
                        bytes: capped,
                        pattern_idx,
                        kind: AtomKind::Gate,
                    });
                }
                None => full_scan = true,
            }
            Matcher::Regex(RegexMatcher {
                rev_nfa: Nfa::compile(&effective.reversed()),
            })
        }
    };
    Ok(CompiledPattern {
        id: id.to_string(),
        matcher,
        full_scan,
    })
}

fn text_variants(value: &[u8], modifiers: &TextModifiers) -> Vec<TextVariant> {
    let mut variants = Vec::new();
    let ascii = modifiers.ascii || !modifiers.wide;
    if ascii {
        variants.push(TextVariant {
            bytes: value.to_vec(),
            nocase: modifiers.nocase,
            fullword: modifiers.fullword,
        });
    }
    if modifiers.wide {
        variants.push(TextVariant {
            bytes: widen(value),
            nocase: modifiers.nocase,
            fullword: modifiers.fullword,
        });
    }
    variants
}

/// Longest run of fully literal bytes; ties break toward the lowest offset.
/// Returns the run plus the min/max distance from pattern start to the run.
fn best_hex_atom(matcher: &HexMatcher) -> Option<(Vec<u8>, usize, usize)> {
    let mut best: Option<(Vec<u8>, usize, usize)> = None;
    let mut min_prefix = 0usize;
    let mut max_prefix = 0usize;
    for (seg_idx, segment) in matcher.segments.iter().enumerate() {
        if seg_idx > 0 {
            let (jmin, jmax) = matcher.jumps[seg_idx - 1];
            let prev_len = matcher.segments[seg_idx - 1].len();
            min_prefix += prev_len + jmin as usize;
            max_prefix += prev_len + jmax as usize;
        }
        let mut run_start = 0usize;
        let mut run: Vec<u8> = Vec::new();
        for (off, &(value, mask)) in segment.iter().enumerate() {
            if mask == 0xff {
                if run.is_empty() {
                    run_start = off;
                }
                run.push(value);
            } else if !run.is_empty() {
                consider(
                    &mut best,
                    &run,
                    min_prefix + run_start,
                    max_prefix + run_start,
                );
                run.clear();
            }
        }
        if !run.is_empty() {
            consider(
                &mut best,
                &run,
                min_prefix + run_start,
                max_prefix + run_start,
            );
        }
    }
    best
}

fn consider(best: &mut Option<(Vec<u8>, usize, usize)>, run: &[u8], min_d: usize, max_d: usize) {
    let run = &run[..run.len().min(ATOM_MAX_LEN)];
    let better = match best {
        Some((existing, _, _)) => run.len() > existing.len(),
        None => true,
    };
    if better {
        *best = Some((run.to_vec(), min_d, max_d));
    }
}
