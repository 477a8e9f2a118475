//! Fuzzy hashing inside rule conditions: a `fuzzy_sim("...") >= N` predicate
//! lets one rule catch every near-variant of a known sample, no exact
//! signature required.
//!
//! ```bash
//! cargo run -p sigtriage --example fuzzy_in_rules
//! ```

use rand::{Rng, SeedableRng};
use sigtriage::{compile, fuzzy_hash, parse_rules, scan};

fn main() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let mut known = vec![0u8; 64 * 1024];
    rng.fill(&mut known[..]);
    let known_sig = fuzzy_hash(&known).unwrap();

    // One rule, keyed on the known sample's fuzzy signature.
    let rules = format!(
        r#"
rule near_known_sample : variant_hunt {{
    meta:
        severity = "malicious"
        family = "alphaworm"
    condition:
        fuzzy_sim("{known_sig}") >= 50
}}
"#
    );
    let compiled = compile(&parse_rules(&rules).unwrap()).unwrap();

    // A lightly mutated variant still trips the rule...
    let mut variant = known.clone();
    variant.extend_from_slice(&vec![0xCC; known.len() / 100]);
    let hit = scan(&compiled, &variant);
    println!(
        "variant:   matched={} (signature {})",
        hit.rules[0].matched,
        hit.fuzzy.as_ref().unwrap()
    );

    // ...while an unrelated file does not.
    let mut unrelated = vec![0u8; known.len()];
    rng.fill(&mut unrelated[..]);
    let miss = scan(&compiled, &unrelated);
    println!("unrelated: matched={}", miss.rules[0].matched);
}
