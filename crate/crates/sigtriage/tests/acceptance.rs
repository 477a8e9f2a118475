//! Acceptance suite. Runs every criterion sequentially and prints one
//! PASS/FAIL line each:
//!
//! ```bash
//! cargo test -p sigtriage --test acceptance -- --nocapture
//! ```
//!
//! Oracles here are deliberately independent re-implementations: a recursive
//! edit-distance, a try-every-offset scanner, and a facts-table condition
//! interpreter. They never call into the code paths they check.

use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sigtriage::ctph::{fuzzy_compare, fuzzy_hash, parse_signature, FuzzySignature};
use sigtriage::editdist::{dl_distance, EditCosts};
use sigtriage::engine::{compile, eval_condition, scan, MatchContext};
use sigtriage::exacthash::{digest_bytes, digest_stream};
use sigtriage::harness::{run_full_experiment, Approach, CorpusManifest, SampleSet};
use sigtriage::rulelang::regex::RegexExpr;
use sigtriage::rulelang::{
    parse_rules, render_rules, Comparator, ConditionExpr, HexToken, MetaValue, PatternBody,
    PatternDef, PatternSet, Quantifier, Rule, RuleSet, TextModifiers, UintWidth,
};
use sigtriage::triage::TriageConfig;

type Criterion = (u32, &'static str, fn() -> Result<(), String>);

#[test]
fn acceptance_suite() {
    let criteria: Vec<Criterion> = vec![
        (
            1,
            "edit-distance DP equals exhaustive oracle",
            c01_editdist_oracle,
        ),
        (
            2,
            "digest vectors and chunking invariance",
            c02_digest_vectors,
        ),
        (3, "fuzzy self-similarity", c03_fuzzy_self_similarity),
        (4, "fuzzy locality at the 50% threshold", c04_fuzzy_locality),
        (5, "fuzzy discrimination", c05_fuzzy_discrimination),
        (6, "matcher equals naive scan", c06_matcher_oracle),
        (
            7,
            "condition evaluator truth-table equivalence",
            c07_condition_equivalence,
        ),
        (
            8,
            "parser round-trip and fuzz totality",
            c08_parser_round_trip_and_fuzz,
        ),
        (
            9,
            "experiment shape on the default seed",
            c09_experiment_shape,
        ),
        (10, "throughput and linear-time regex", c10_throughput),
        (11, "fuzzy-hash-in-rules extension", c11_fuzzy_in_rules),
    ];

    let mut failures = Vec::new();
    for (number, name, body) in criteria {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(body);
        let elapsed = start.elapsed().as_secs_f64();
        match outcome {
            Ok(Ok(())) => println!("acceptance {number:02} {name}: PASS ({elapsed:.1}s)"),
            Ok(Err(message)) => {
                println!("acceptance {number:02} {name}: FAIL — {message}");
                failures.push(format!("{number:02} {name}: {message}"));
            }
            Err(panic) => {
                let message = panic_text(panic);
                println!("acceptance {number:02} {name}: FAIL — panicked: {message}");
                failures.push(format!("{number:02} {name}: panicked: {message}"));
            }
        }
    }
    assert!(
        failures.is_empty(),
        "failed criteria:\n{}",
        failures.join("\n")
    );
}

fn panic_text(panic: Box<dyn std::any::Any + Send>) -> String {
    panic
        .downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| panic.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "opaque panic payload".to_string())
}

fn fail(message: impl Into<String>) -> Result<(), String> {
    Err(message.into())
}

fn check(condition: bool, message: impl Into<String>) -> Result<(), String> {
    if condition {
        Ok(())
    } else {
        fail(message)
    }
}

// ---------------------------------------------------------------- criterion 1

/// Exhaustive recursive restricted-DL oracle, independent of the DP code.
fn oracle_distance(a: &[u8], b: &[u8]) -> u64 {
    if a.is_empty() {
        return b.len() as u64;
    }
    if b.is_empty() {
        return a.len() as u64;
    }
    let (m, n) = (a.len(), b.len());
    let mut best = oracle_distance(&a[..m - 1], b) + 1;
    best = best.min(oracle_distance(a, &b[..n - 1]) + 1);
    let sub = u64::from(a[m - 1] != b[n - 1]);
    best = best.min(oracle_distance(&a[..m - 1], &b[..n - 1]) + sub);
    if m >= 2 && n >= 2 && a[m - 1] == b[n - 2] && a[m - 2] == b[n - 1] {
        best = best.min(oracle_distance(&a[..m - 2], &b[..n - 2]) + 1);
    }
    best
}

fn c01_editdist_oracle() -> Result<(), String> {
    let start = Instant::now();
    let mut strings: Vec<Vec<u8>> = vec![Vec::new()];
    let mut frontier = vec![Vec::new()];
    for _ in 0..5 {
        let mut next = Vec::new();
        for s in &frontier {
            for c in *b"abc" {
                let mut t = s.clone();
                t.push(c);
                next.push(t);
            }
        }
        strings.extend(next.iter().cloned());
        frontier = next;
    }
    check(
        strings.len() == 364,
        format!("expected 364 strings, got {}", strings.len()),
    )?;

    let unit = EditCosts::default();
    let mut checked = 0u64;
    for a in &strings {
        for b in &strings {
            let dp = dl_distance(a, b, &unit);
            let oracle = oracle_distance(a, b);
            if dp != oracle {
                return fail(format!(
                    "mismatch on {:?} vs {:?}: dp {dp}, oracle {oracle}",
                    String::from_utf8_lossy(a),
                    String::from_utf8_lossy(b)
                ));
            }
            checked += 1;
        }
    }
    check(checked == 364 * 364, "pair count")?;
    check(
        start.elapsed() < Duration::from_secs(60),
        "exceeded the 60 s budget",
    )
}

// ---------------------------------------------------------------- criterion 2

struct Parts {
    parts: Vec<Vec<u8>>,
    index: usize,
}

impl std::io::Read for Parts {
    fn read(&mut self, buf: &mut [u8]) -> std::io::Result<usize> {
        while self.index < self.parts.len() && self.parts[self.index].is_empty() {
            self.index += 1;
        }
        if self.index >= self.parts.len() {
            return Ok(0);
        }
        let part = &mut self.parts[self.index];
        let n = part.len().min(buf.len());
        buf[..n].copy_from_slice(&part[..n]);
        part.drain(..n);
        Ok(n)
    }
}

fn c02_digest_vectors() -> Result<(), String> {
    check(
        digest_bytes(b"").hex()
            == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855",
        "FIPS empty-string vector",
    )?;
    check(
        digest_bytes(b"abc").hex()
            == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad",
        "FIPS abc vector",
    )?;

    let mut rng = ChaCha8Rng::seed_from_u64(0x0202);
    for trial in 0..200 {
        let len = rng.gen_range(0..8192);
        let mut data = vec![0u8; len];
        rng.fill(&mut data[..]);
        let expected = digest_bytes(&data);

        let mut cuts: Vec<usize> = (0..rng.gen_range(0..10))
            .map(|_| rng.gen_range(0..=len))
            .collect();
        cuts.push(0);
        cuts.push(len);
        cuts.sort_unstable();
        let parts: Vec<Vec<u8>> = cuts.windows(2).map(|w| data[w[0]..w[1]].to_vec()).collect();
        let chunk = rng.gen_range(1..1024);
        let got = digest_stream(Parts { parts, index: 0 }, chunk)
            .map_err(|e| format!("stream error: {e}"))?;
        if got != expected {
            return fail(format!("partition {trial} changed the digest"));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------- criterion 3

fn c03_fuzzy_self_similarity() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0303);
    for trial in 0..100 {
        let len = rng.gen_range(1024..=1024 * 1024);
        let mut data = vec![0u8; len];
        rng.fill(&mut data[..]);
        let sig = fuzzy_hash(&data).map_err(|e| e.to_string())?;
        let again = fuzzy_hash(&data).map_err(|e| e.to_string())?;
        let score = fuzzy_compare(&sig, &again);
        if score != 100 {
            return fail(format!(
                "trial {trial}: self-similarity {score} at {len} bytes"
            ));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------- criterion 4

fn c04_fuzzy_locality() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0404);
    let mut append_hits = 0;
    let mut flip_hits = 0;
    for _ in 0..100 {
        let mut base = vec![0u8; 64 * 1024];
        rng.fill(&mut base[..]);
        let base_sig = fuzzy_hash(&base).map_err(|e| e.to_string())?;

        let mut appended = base.clone();
        let mut extra = vec![0u8; base.len() / 100];
        rng.fill(&mut extra[..]);
        appended.extend_from_slice(&extra);
        let appended_sig = fuzzy_hash(&appended).map_err(|e| e.to_string())?;
        if fuzzy_compare(&base_sig, &appended_sig) >= 50 {
            append_hits += 1;
        }

        let mut flipped = base;
        let pos = rng.gen_range(0..flipped.len());
        flipped[pos] ^= rng.gen_range(1..=255u8);
        let flipped_sig = fuzzy_hash(&flipped).map_err(|e| e.to_string())?;
        if fuzzy_compare(&base_sig, &flipped_sig) >= 90 {
            flip_hits += 1;
        }
    }
    check(
        append_hits >= 90,
        format!("append >= 50 in only {append_hits}/100 trials"),
    )?;
    check(
        flip_hits >= 90,
        format!("flip >= 90 in only {flip_hits}/100 trials"),
    )
}

// ---------------------------------------------------------------- criterion 5

fn c05_fuzzy_discrimination() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0505);
    let mut zeros = 0;
    for _ in 0..100 {
        let mut a = vec![0u8; 64 * 1024];
        let mut b = vec![0u8; 64 * 1024];
        rng.fill(&mut a[..]);
        rng.fill(&mut b[..]);
        let sa = fuzzy_hash(&a).map_err(|e| e.to_string())?;
        let sb = fuzzy_hash(&b).map_err(|e| e.to_string())?;
        if fuzzy_compare(&sa, &sb) == 0 {
            zeros += 1;
        }
    }
    check(
        zeros >= 99,
        format!("unrelated pairs scored 0 in only {zeros}/100 trials"),
    )
}

// ------------------------------------------------- independent interpreter

/// Facts-table interpreter used as the oracle for criteria 6 and 7. It
/// precomputes everything a condition can observe and evaluates from those
/// tables, not from the engine's context type.
struct Facts<'a> {
    data: &'a [u8],
    ids: Vec<&'a str>,
    counts: std::collections::BTreeMap<&'a str, usize>,
    offset_sets: std::collections::BTreeMap<&'a str, std::collections::BTreeSet<usize>>,
    fuzzy: Option<&'a FuzzySignature>,
}

impl<'a> Facts<'a> {
    fn new(
        data: &'a [u8],
        patterns: &'a [(String, Vec<usize>)],
        fuzzy: Option<&'a FuzzySignature>,
    ) -> Facts<'a> {
        let mut counts = std::collections::BTreeMap::new();
        let mut offset_sets = std::collections::BTreeMap::new();
        let mut ids = Vec::new();
        for (id, offsets) in patterns {
            ids.push(id.as_str());
            counts.insert(id.as_str(), offsets.len());
            offset_sets.insert(id.as_str(), offsets.iter().copied().collect());
        }
        Facts {
            data,
            ids,
            counts,
            offset_sets,
            fuzzy,
        }
    }
}

fn apply_cmp(cmp: Comparator, lhs: u64, rhs: u64) -> bool {
    match cmp {
        Comparator::Eq => lhs == rhs,
        Comparator::Ne => lhs != rhs,
        Comparator::Lt => lhs < rhs,
        Comparator::Le => lhs <= rhs,
        Comparator::Gt => lhs > rhs,
        Comparator::Ge => lhs >= rhs,
    }
}

fn truth(expr: &ConditionExpr, facts: &Facts) -> bool {
    match expr {
        ConditionExpr::And(a, b) => truth(a, facts) && truth(b, facts),
        ConditionExpr::Or(a, b) => truth(a, facts) || truth(b, facts),
        ConditionExpr::Not(inner) => !truth(inner, facts),
        ConditionExpr::BoolLit(b) => *b,
        ConditionExpr::IntLit(v) => *v != 0,
        ConditionExpr::StringRef(id) => facts.counts.get(id.as_str()).copied().unwrap_or(0) > 0,
        ConditionExpr::CountCmp { id, cmp, value } => apply_cmp(
            *cmp,
            facts.counts.get(id.as_str()).copied().unwrap_or(0) as u64,
            *value,
        ),
        ConditionExpr::At { id, offset } => facts
            .offset_sets
            .get(id.as_str())
            .is_some_and(|set| usize::try_from(*offset).is_ok_and(|o| set.contains(&o))),
        ConditionExpr::Of { quantifier, set } => {
            let selected: Vec<&str> = facts
                .ids
                .iter()
                .copied()
                .filter(|id| match set {
                    PatternSet::Them => true,
                    PatternSet::Glob(prefix) => id.starts_with(prefix.as_str()),
                })
                .collect();
            let matched = selected
                .iter()
                .filter(|id| facts.counts.get(**id).copied().unwrap_or(0) > 0)
                .count();
            match quantifier {
                Quantifier::Any => matched >= 1,
                Quantifier::All => matched == selected.len(),
                Quantifier::Count(n) => matched as u64 >= *n,
            }
        }
        ConditionExpr::Filesize { cmp, value } => apply_cmp(*cmp, facts.data.len() as u64, *value),
        ConditionExpr::UintRead {
            width,
            offset,
            cmp,
            value,
        } => {
            let Ok(offset) = usize::try_from(*offset) else {
                return false;
            };
            let width = width.bytes();
            if offset + width > facts.data.len() {
                return false;
            }
            let mut bytes = [0u8; 8];
            bytes[..width].copy_from_slice(&facts.data[offset..offset + width]);
            apply_cmp(*cmp, u64::from_le_bytes(bytes), *value)
        }
        ConditionExpr::FuzzySim {
            signature,
            cmp,
            value,
        } => match facts.fuzzy {
            Some(sig) => apply_cmp(*cmp, fuzzy_compare(sig, signature) as u64, *value as u64),
            None => false,
        },
    }
}

// ---------------------------------------------------------------- criterion 6

fn gen_literal_condition(rng: &mut ChaCha8Rng, ids: &[String], depth: u32) -> ConditionExpr {
    let leaf = depth == 0 || rng.gen_bool(0.4);
    if leaf {
        match rng.gen_range(0..5) {
            0 => ConditionExpr::StringRef(ids.choose(rng).unwrap().clone()),
            1 => ConditionExpr::CountCmp {
                id: ids.choose(rng).unwrap().clone(),
                cmp: random_cmp(rng),
                value: rng.gen_range(0..5),
            },
            2 => ConditionExpr::At {
                id: ids.choose(rng).unwrap().clone(),
                offset: rng.gen_range(0..300),
            },
            3 => ConditionExpr::Of {
                quantifier: match rng.gen_range(0..3) {
                    0 => Quantifier::Any,
                    1 => Quantifier::All,
                    _ => Quantifier::Count(rng.gen_range(0..4)),
                },
                set: if rng.gen_bool(0.5) {
                    PatternSet::Them
                } else {
                    PatternSet::Glob("p".to_string())
                },
            },
            _ => ConditionExpr::BoolLit(rng.gen_bool(0.5)),
        }
    } else {
        match rng.gen_range(0..3) {
            0 => ConditionExpr::And(
                Box::new(gen_literal_condition(rng, ids, depth - 1)),
                Box::new(gen_literal_condition(rng, ids, depth - 1)),
            ),
            1 => ConditionExpr::Or(
                Box::new(gen_literal_condition(rng, ids, depth - 1)),
                Box::new(gen_literal_condition(rng, ids, depth - 1)),
            ),
            _ => ConditionExpr::Not(Box::new(gen_literal_condition(rng, ids, depth - 1))),
        }
    }
}

fn random_cmp(rng: &mut ChaCha8Rng) -> Comparator {
    match rng.gen_range(0..6) {
        0 => Comparator::Eq,
        1 => Comparator::Ne,
        2 => Comparator::Lt,
        3 => Comparator::Le,
        4 => Comparator::Gt,
        _ => Comparator::Ge,
    }
}

fn c06_matcher_oracle() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0606);
    for case in 0..1000 {
        let n_patterns = rng.gen_range(1..=4);
        let mut defs = Vec::new();
        let mut ids = Vec::new();
        let mut literals = Vec::new();
        for i in 0..n_patterns {
            let len = rng.gen_range(1..=4);
            let lit: Vec<u8> = (0..len)
                .map(|_| if rng.gen_bool(0.5) { b'a' } else { b'b' })
                .collect();
            let id = format!("p{i}");
            defs.push(PatternDef {
                id: id.clone(),
                body: PatternBody::Text {
                    value: lit.clone(),
                    modifiers: TextModifiers::default(),
                },
            });
            ids.push(id);
            literals.push(lit);
        }
        let condition = gen_literal_condition(&mut rng, &ids, 3);
        let rs = RuleSet {
            rules: vec![Rule {
                name: "r".into(),
                tags: vec![],
                meta: vec![],
                patterns: defs,
                condition: condition.clone(),
            }],
        };
        let data: Vec<u8> = (0..rng.gen_range(0..=256))
            .map(|_| if rng.gen_bool(0.5) { b'a' } else { b'b' })
            .collect();

        let compiled = compile(&rs).map_err(|e| e.to_string())?;
        let result = scan(&compiled, &data);

        // Oracle side: try every offset for every literal.
        let naive: Vec<(String, Vec<usize>)> = ids
            .iter()
            .zip(&literals)
            .map(|(id, lit)| {
                let offsets: Vec<usize> = if lit.len() > data.len() {
                    Vec::new()
                } else {
                    (0..=data.len() - lit.len())
                        .filter(|&p| &data[p..p + lit.len()] == lit.as_slice())
                        .collect()
                };
                (id.clone(), offsets)
            })
            .collect();

        for (id, expected) in &naive {
            let got = result.rules[0]
                .patterns
                .iter()
                .find(|p| &p.id == id)
                .map(|p| p.offsets.clone())
                .unwrap_or_default();
            if &got != expected {
                return fail(format!(
                    "case {case}: offsets for {id} differ: engine {got:?}, naive {expected:?}"
                ));
            }
        }

        let facts = Facts::new(&data, &naive, None);
        let expected_verdict = truth(&condition, &facts);
        if result.rules[0].matched != expected_verdict {
            return fail(format!(
                "case {case}: verdict differs: engine {}, naive {expected_verdict}",
                result.rules[0].matched
            ));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------- criterion 7

fn gen_condition_full(
    rng: &mut ChaCha8Rng,
    ids: &[String],
    sig_pool: &[FuzzySignature],
    depth: u32,
) -> ConditionExpr {
    let leaf = depth == 0 || rng.gen_bool(0.35);
    if leaf {
        match rng.gen_range(0..9) {
            0 if !ids.is_empty() => ConditionExpr::StringRef(ids.choose(rng).unwrap().clone()),
            1 if !ids.is_empty() => ConditionExpr::CountCmp {
                id: ids.choose(rng).unwrap().clone(),
                cmp: random_cmp(rng),
                value: rng.gen_range(0..6),
            },
            2 if !ids.is_empty() => ConditionExpr::At {
                id: ids.choose(rng).unwrap().clone(),
                offset: rng.gen_range(0..80),
            },
            3 if !ids.is_empty() => ConditionExpr::Of {
                quantifier: match rng.gen_range(0..3) {
                    0 => Quantifier::Any,
                    1 => Quantifier::All,
                    _ => Quantifier::Count(rng.gen_range(0..4)),
                },
                set: if rng.gen_bool(0.5) {
                    PatternSet::Them
                } else {
                    PatternSet::Glob("p".to_string())
                },
            },
            4 => ConditionExpr::Filesize {
                cmp: random_cmp(rng),
                value: rng.gen_range(0..100),
            },
            5 => ConditionExpr::UintRead {
                width: match rng.gen_range(0..3) {
                    0 => UintWidth::U8,
                    1 => UintWidth::U16,
                    _ => UintWidth::U32,
                },
                offset: rng.gen_range(0..70),
                cmp: random_cmp(rng),
                value: rng.gen_range(0..=u32::MAX as u64),
            },
            6 => ConditionExpr::FuzzySim {
                signature: sig_pool.choose(rng).unwrap().clone(),
                cmp: random_cmp(rng),
                value: rng.gen_range(0..=100),
            },
            7 => ConditionExpr::IntLit(rng.gen_range(0..3)),
            _ => ConditionExpr::BoolLit(rng.gen_bool(0.5)),
        }
    } else {
        match rng.gen_range(0..3) {
            0 => ConditionExpr::And(
                Box::new(gen_condition_full(rng, ids, sig_pool, depth - 1)),
                Box::new(gen_condition_full(rng, ids, sig_pool, depth - 1)),
            ),
            1 => ConditionExpr::Or(
                Box::new(gen_condition_full(rng, ids, sig_pool, depth - 1)),
                Box::new(gen_condition_full(rng, ids, sig_pool, depth - 1)),
            ),
            _ => ConditionExpr::Not(Box::new(gen_condition_full(rng, ids, sig_pool, depth - 1))),
        }
    }
}

fn c07_condition_equivalence() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0707);

    // Small pool of real signatures for FuzzySim literals and contexts.
    let sig_pool: Vec<FuzzySignature> = (0..4)
        .map(|i| {
            let mut data = vec![0u8; 4096 + i * 997];
            rng.fill(&mut data[..]);
            fuzzy_hash(&data).expect("non-empty")
        })
        .collect();

    for case in 0..1000 {
        let data: Vec<u8> = (0..rng.gen_range(0..=64)).map(|_| rng.gen()).collect();
        let n_patterns = rng.gen_range(0..=4);
        let patterns: Vec<(String, Vec<usize>)> = (0..n_patterns)
            .map(|i| {
                let mut offsets: Vec<usize> = if data.is_empty() {
                    Vec::new()
                } else {
                    (0..rng.gen_range(0..6))
                        .map(|_| rng.gen_range(0..data.len()))
                        .collect()
                };
                offsets.sort_unstable();
                offsets.dedup();
                (format!("p{i}"), offsets)
            })
            .collect();
        let ids: Vec<String> = patterns.iter().map(|(id, _)| id.clone()).collect();
        let ctx_fuzzy = if rng.gen_bool(0.5) {
            sig_pool.choose(&mut rng).cloned()
        } else {
            None
        };

        let expr = gen_condition_full(&mut rng, &ids, &sig_pool, 4);

        let ctx = MatchContext {
            data: &data,
            patterns: patterns
                .iter()
                .map(|(id, o)| (id.as_str(), o.as_slice()))
                .collect(),
            fuzzy: ctx_fuzzy.as_ref(),
        };
        let engine_truth = eval_condition(&expr, &ctx);

        let facts = Facts::new(&data, &patterns, ctx_fuzzy.as_ref());
        let oracle_truth = truth(&expr, &facts);

        if engine_truth != oracle_truth {
            return fail(format!(
                "case {case}: engine {engine_truth}, oracle {oracle_truth} for {expr:?}"
            ));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------- criterion 8

fn random_ident(rng: &mut ChaCha8Rng, prefix: &str, i: usize) -> String {
    let tail: String = (0..rng.gen_range(0..6))
        .map(|_| {
            *b"abcdefghijklmnopqrstuvwxyz0123456789_"
                .choose(rng)
                .unwrap() as char
        })
        .collect();
    format!("{prefix}{i}{tail}")
}

fn random_meta_string(rng: &mut ChaCha8Rng) -> String {
    let len = rng.gen_range(0..20);
    (0..len)
        .map(|_| {
            if rng.gen_bool(0.9) {
                rng.gen_range(0x20u8..0x7f) as char
            } else {
                ['"', '\\', '\n', '\t', 'é', '中'][rng.gen_range(0..6)]
            }
        })
        .collect()
}

fn gen_regex(rng: &mut ChaCha8Rng, depth: u32) -> RegexExpr {
    let printable = |rng: &mut ChaCha8Rng| rng.gen_range(0x20u8..0x7f);
    if depth == 0 || rng.gen_bool(0.4) {
        match rng.gen_range(0..3) {
            0 => RegexExpr::Char(printable(rng)),
            1 => RegexExpr::AnyByte,
            _ => {
                let n = rng.gen_range(1..4);
                let ranges = (0..n)
                    .map(|_| {
                        let lo = printable(rng);
                        let hi = lo.saturating_add(rng.gen_range(0..5)).min(0x7e);
                        (lo, hi)
                    })
                    .collect();
                RegexExpr::Class {
                    negated: rng.gen_bool(0.3),
                    ranges,
                }
            }
        }
    } else {
        match rng.gen_range(0..3) {
            0 => {
                // Concat factors are never Concat themselves.
                let parts: Vec<RegexExpr> = (0..rng.gen_range(2..4))
                    .map(|_| loop {
                        let e = gen_regex(rng, depth - 1);
                        if !matches!(e, RegexExpr::Concat(_)) {
                            break e;
                        }
                    })
                    .collect();
                RegexExpr::Concat(parts)
            }
            1 => {
                let branches: Vec<RegexExpr> = (0..rng.gen_range(2..4))
                    .map(|_| loop {
                        let e = gen_regex(rng, depth - 1);
                        if !matches!(e, RegexExpr::Alt(_)) {
                            break e;
                        }
                    })
                    .collect();
                RegexExpr::Alt(branches)
            }
            _ => {
                let (min, max) = match rng.gen_range(0..4) {
                    0 => (0, None),
                    1 => (1, None),
                    2 => (0, Some(1)),
                    _ => {
                        let m = rng.gen_range(0..5u32);
                        (m, Some(m + rng.gen_range(0..5u32)))
                    }
                };
                RegexExpr::Repeat {
                    inner: Box::new(gen_regex(rng, depth - 1)),
                    min,
                    max,
                }
            }
        }
    }
}

fn gen_hex_tokens(rng: &mut ChaCha8Rng) -> Vec<HexToken> {
    let mut tokens = Vec::new();
    // First token is always a full literal, which also satisfies the
    // at-least-one-literal invariant.
    tokens.push(HexToken::Byte {
        value: rng.gen(),
        mask: 0xff,
    });
    let extra = rng.gen_range(0..8);
    for _ in 0..extra {
        if rng.gen_bool(0.25) && !matches!(tokens.last(), Some(HexToken::Jump { .. })) {
            let min = rng.gen_range(0..64);
            let max = min + rng.gen_range(0..64);
            tokens.push(HexToken::Jump { min, max });
        } else {
            let mask = *[0xffu8, 0xf0, 0x0f, 0x00].choose(rng).unwrap();
            let value = rng.gen::<u8>() & mask;
            tokens.push(HexToken::Byte { value, mask });
        }
    }
    if matches!(tokens.last(), Some(HexToken::Jump { .. })) {
        tokens.push(HexToken::Byte {
            value: rng.gen(),
            mask: 0xff,
        });
    }
    tokens
}

fn gen_ruleset(rng: &mut ChaCha8Rng, sig_pool: &[FuzzySignature]) -> RuleSet {
    let n_rules = rng.gen_range(1..=3);
    let mut rules = Vec::new();
    for r in 0..n_rules {
        let name = random_ident(rng, "rule_", r);
        let tags: Vec<String> = (0..rng.gen_range(0..3))
            .map(|t| random_ident(rng, "tag", t))
            .collect();

        let mut meta = Vec::new();
        if rng.gen_bool(0.5) {
            let severity = ["malicious", "suspicious", "info"][rng.gen_range(0..3)];
            meta.push(("severity".to_string(), MetaValue::Str(severity.to_string())));
        }
        if rng.gen_bool(0.5) {
            meta.push((
                "family".to_string(),
                MetaValue::Str(random_ident(rng, "fam", r)),
            ));
        }
        if rng.gen_bool(0.5) {
            meta.push((
                "description".to_string(),
                MetaValue::Str(random_meta_string(rng)),
            ));
        }
        if rng.gen_bool(0.3) {
            meta.push((
                "score".to_string(),
                MetaValue::Int(rng.gen_range(-1000..1000)),
            ));
        }
        if rng.gen_bool(0.3) {
            meta.push(("active".to_string(), MetaValue::Bool(rng.gen_bool(0.5))));
        }

        let n_patterns = rng.gen_range(0..=4);
        let mut patterns = Vec::new();
        for p in 0..n_patterns {
            let body = match rng.gen_range(0..3) {
                0 => {
                    let len = rng.gen_range(1..12);
                    let value: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
                    PatternBody::Text {
                        value,
                        modifiers: TextModifiers {
                            nocase: rng.gen_bool(0.3),
                            ascii: rng.gen_bool(0.3),
                            wide: rng.gen_bool(0.3),
                            fullword: rng.gen_bool(0.3),
                        },
                    }
                }
                1 => PatternBody::Hex {
                    tokens: gen_hex_tokens(rng),
                },
                _ => PatternBody::Regex {
                    expr: gen_regex(rng, 3),
                    nocase: rng.gen_bool(0.3),
                },
            };
            patterns.push(PatternDef {
                id: format!("p{p}"),
                body,
            });
        }

        let ids: Vec<String> = patterns.iter().map(|d| d.id.clone()).collect();
        let condition = gen_condition_full(rng, &ids, sig_pool, 3);
        rules.push(Rule {
            name,
            tags,
            meta,
            patterns,
            condition,
        });
    }
    RuleSet { rules }
}

fn c08_parser_round_trip_and_fuzz() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0808);
    let sig_pool: Vec<FuzzySignature> = (0..3)
        .map(|i| {
            let mut data = vec![0u8; 2048 + i * 311];
            rng.fill(&mut data[..]);
            fuzzy_hash(&data).expect("non-empty")
        })
        .collect();

    // Round trip: AST -> canonical text -> AST.
    for case in 0..500 {
        let rs = gen_ruleset(&mut rng, &sig_pool);
        let text = render_rules(&rs);
        match parse_rules(&text) {
            Ok(back) => {
                if back != rs {
                    return fail(format!("case {case}: round trip diverged; text:\n{text}"));
                }
            }
            Err(e) => return fail(format!("case {case}: canonical text rejected: {e}\n{text}")),
        }
    }

    // Fuzz totality: random junk, random printable, and mutated valid rules.
    let seed_texts: Vec<String> = (0..20)
        .map(|_| render_rules(&gen_ruleset(&mut rng, &sig_pool)))
        .collect();
    let mut slowest = Duration::ZERO;
    for case in 0..10_000 {
        let input: String = match case % 3 {
            0 => {
                let bytes: Vec<u8> = (0..rng.gen_range(0..400)).map(|_| rng.gen()).collect();
                String::from_utf8_lossy(&bytes).into_owned()
            }
            1 => (0..rng.gen_range(0..400))
                .map(|_| rng.gen_range(0x20u8..0x7f) as char)
                .collect(),
            _ => {
                let mut text = seed_texts.choose(&mut rng).unwrap().clone().into_bytes();
                for _ in 0..rng.gen_range(1..20) {
                    if text.is_empty() {
                        break;
                    }
                    match rng.gen_range(0..3) {
                        0 => {
                            let i = rng.gen_range(0..text.len());
                            text[i] = rng.gen_range(0x20u8..0x7f);
                        }
                        1 => {
                            text.truncate(rng.gen_range(0..=text.len()));
                        }
                        _ => {
                            let i = rng.gen_range(0..=text.len());
                            text.insert(i, *b"{}()[]$#\"/\\*:=".choose(&mut rng).unwrap());
                        }
                    }
                }
                String::from_utf8_lossy(&text).into_owned()
            }
        };
        let started = Instant::now();
        let outcome = std::panic::catch_unwind(|| {
            let _ = parse_rules(&input);
        });
        let elapsed = started.elapsed();
        slowest = slowest.max(elapsed);
        if outcome.is_err() {
            return fail(format!("case {case}: parser panicked on {input:?}"));
        }
        if elapsed > Duration::from_secs(5) {
            return fail(format!(
                "case {case}: parse took {elapsed:?} (input {input:?})"
            ));
        }
    }
    check(
        slowest < Duration::from_secs(5),
        format!("slowest parse {slowest:?}"),
    )
}

// ---------------------------------------------------------------- criterion 9

fn c09_experiment_shape() -> Result<(), String> {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let manifest = CorpusManifest::default();
    let output = run_full_experiment(&manifest, dir.path(), &TriageConfig::default())
        .map_err(|e| e.to_string())?;
    let table = &output.table;
    table.validate()?;

    let exact_known = table.cell(Approach::Exact, SampleSet::Known);
    check(
        exact_known.detected == 15 && exact_known.classified == 15,
        format!(
            "exact/known detected {} classified {}",
            exact_known.detected, exact_known.classified
        ),
    )?;
    let exact_variant = table.cell(Approach::Exact, SampleSet::Variant);
    check(
        exact_variant.detected == 0,
        format!("exact/variant detected {}", exact_variant.detected),
    )?;

    let fuzzy_variant = table.cell(Approach::Fuzzy, SampleSet::Variant);
    check(
        fuzzy_variant.detected >= 10,
        format!("fuzzy/variant detected only {}", fuzzy_variant.detected),
    )?;
    // Strict superset of exact's (empty) variant detections.
    check(
        fuzzy_variant.detected > exact_variant.detected,
        "fuzzy must beat exact on variants",
    )?;

    let rules_variant = table.cell(Approach::Rules, SampleSet::Variant);
    check(
        rules_variant.matched >= fuzzy_variant.matched,
        format!(
            "rules/variant matched {} < fuzzy/variant matched {}",
            rules_variant.matched, fuzzy_variant.matched
        ),
    )?;

    for cell in &table.cells {
        check(
            cell.detected <= cell.matched && cell.matched <= cell.total,
            format!("cell invariant broken: {cell:?}"),
        )?;
    }
    check(
        output.table_csv.exists() && output.table_txt.exists(),
        "table files missing",
    )?;
    check(
        start.elapsed() < Duration::from_secs(120),
        "exceeded the 2 min budget",
    )
}

// --------------------------------------------------------------- criterion 10

fn build_throughput_rules(rng: &mut ChaCha8Rng) -> (RuleSet, Vec<Vec<u8>>) {
    let mut rules = Vec::new();
    let mut plantable = Vec::new();

    // 150 text rules.
    for i in 0..150 {
        let len = rng.gen_range(12..20);
        let value: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
        if i % 10 == 0 {
            plantable.push(value.clone());
        }
        rules.push(Rule {
            name: format!("text_{i}"),
            tags: vec![],
            meta: vec![],
            patterns: vec![PatternDef {
                id: "a".into(),
                body: PatternBody::Text {
                    value,
                    modifiers: TextModifiers::default(),
                },
            }],
            condition: ConditionExpr::StringRef("a".into()),
        });
    }
    // 40 hex rules with masks and a jump.
    for i in 0..40 {
        let lead: Vec<u8> = (0..6).map(|_| rng.gen()).collect();
        let tail: Vec<u8> = (0..4).map(|_| rng.gen()).collect();
        if i % 10 == 0 {
            // Plant a matching byte run: lead, one gap byte, tail.
            let mut bytes = lead.clone();
            bytes.push(rng.gen());
            bytes.extend_from_slice(&tail);
            plantable.push(bytes);
        }
        let mut tokens: Vec<HexToken> = lead
            .iter()
            .map(|&b| HexToken::Byte {
                value: b,
                mask: 0xff,
            })
            .collect();
        tokens.push(HexToken::Jump { min: 0, max: 4 });
        tokens.extend(tail.iter().map(|&b| HexToken::Byte {
            value: b,
            mask: 0xff,
        }));
        rules.push(Rule {
            name: format!("hex_{i}"),
            tags: vec![],
            meta: vec![],
            patterns: vec![PatternDef {
                id: "h".into(),
                body: PatternBody::Hex { tokens },
            }],
            condition: ConditionExpr::StringRef("h".into()),
        });
    }
    // 10 regex rules with mandatory literals long enough to stay dormant on
    // random data.
    for i in 0..10 {
        let lit: Vec<u8> = (0..8).map(|_| rng.gen_range(b'a'..=b'z')).collect();
        let expr = RegexExpr::Concat(vec![
            RegexExpr::Concat(lit.iter().map(|&b| RegexExpr::Char(b)).collect::<Vec<_>>())
                .simplified(),
            RegexExpr::Repeat {
                inner: Box::new(RegexExpr::Class {
                    negated: false,
                    ranges: vec![(b'0', b'9')],
                }),
                min: 1,
                max: Some(4),
            },
        ]);
        rules.push(Rule {
            name: format!("re_{i}"),
            tags: vec![],
            meta: vec![],
            patterns: vec![PatternDef {
                id: "r".into(),
                body: PatternBody::Regex {
                    expr,
                    nocase: false,
                },
            }],
            condition: ConditionExpr::StringRef("r".into()),
        });
    }
    (RuleSet { rules }, plantable)
}

trait Simplify {
    fn simplified(self) -> RegexExpr;
}

impl Simplify for RegexExpr {
    fn simplified(self) -> RegexExpr {
        match self {
            RegexExpr::Concat(mut parts) if parts.len() == 1 => parts.pop().unwrap(),
            other => other,
        }
    }
}

fn c10_throughput() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x1010);

    let (ruleset, plantable) = build_throughput_rules(&mut rng);
    check(ruleset.rules.len() == 200, "expected 200 rules")?;
    let compiled = compile(&ruleset).map_err(|e| e.to_string())?;

    // 100 MiB of synthetic data with ~1000 planted pattern occurrences so
    // the verification path runs.
    let size = 100 * 1024 * 1024;
    let mut data = vec![0u8; size];
    rng.fill(&mut data[..]);
    for _ in 0..1000 {
        let planted = plantable[rng.gen_range(0..plantable.len())].clone();
        let at = rng.gen_range(0..size - planted.len());
        data[at..at + planted.len()].copy_from_slice(&planted);
    }

    let started = Instant::now();
    let result = scan(&compiled, &data);
    let elapsed = started.elapsed();
    let hits: usize = result.rules.iter().filter(|r| r.matched).count();
    check(hits > 0, "planted occurrences should match some rules")?;
    check(
        elapsed < Duration::from_secs(10),
        format!("100 MiB x 200 rules took {elapsed:.2?} (>= 10 s)"),
    )?;
    drop(data);

    // Pathological regex: time must grow at most linearly across doublings
    // (factor-of-2 tolerance on each ratio).
    let path_rules = parse_rules("rule p { strings: $r = /(a+)+b/ condition: $r }")
        .map_err(|e| e.to_string())?;
    let path_compiled = compile(&path_rules).map_err(|e| e.to_string())?;
    let sizes = [1usize << 20, 1 << 21, 1 << 22, 1 << 23];
    let mut timings = Vec::new();
    for &n in &sizes {
        let mut buf = vec![b'a'; n];
        for i in (0..n).step_by(101) {
            buf[i] = b'b';
        }
        let mut best = Duration::MAX;
        for _ in 0..3 {
            let t = Instant::now();
            let r = scan(&path_compiled, &buf);
            best = best.min(t.elapsed());
            assert!(r.rules[0].matched);
        }
        timings.push(best);
    }
    for pair in timings.windows(2) {
        let ratio = pair[1].as_secs_f64() / pair[0].as_secs_f64().max(1e-9);
        check(
            ratio <= 4.0,
            format!(
                "superlinear growth: {:?} -> {:?} (ratio {ratio:.2})",
                pair[0], pair[1]
            ),
        )?;
    }
    Ok(())
}

// --------------------------------------------------------------- criterion 11

fn c11_fuzzy_in_rules() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x1111);
    let mut hits = 0;
    for _ in 0..100 {
        let mut known = vec![0u8; 64 * 1024];
        rng.fill(&mut known[..]);
        let sig = fuzzy_hash(&known).map_err(|e| e.to_string())?;
        parse_signature(&sig.to_string()).map_err(|e| e.to_string())?;

        let rules = format!("rule near_known {{ condition: fuzzy_sim(\"{sig}\") >= 50 }}");
        let compiled =
            compile(&parse_rules(&rules).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;

        let mut variant = known;
        let mut extra = vec![0u8; variant.len() / 100];
        rng.fill(&mut extra[..]);
        variant.extend_from_slice(&extra);

        if scan(&compiled, &variant).rules[0].matched {
            hits += 1;
        }
    }
    check(
        hits >= 90,
        format!("fuzzy_sim rule matched the variant in only {hits}/100 trials"),
    )
}
