//! The full triage pipeline: signature store + compiled rules -> verdict.
//!
//! Walks one file through each verdict tier: an exact digest hit, a fuzzy
//! near-match, a malicious rule match, an info rule match, and no evidence
//! at all.
//!
//! ```bash
//! cargo run -p sigtriage --example triage_pipeline
//! ```

use std::io::Write as _;

use rand::{Rng, SeedableRng};
use sigtriage::triage::ReportFormat;
use sigtriage::{
    compile, digest_bytes, fuzzy_hash, parse_rules, render_report, triage_bytes, SignatureKind,
    SignatureStore, TriageConfig,
};

fn main() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
    let mut known = vec![0u8; 48 * 1024];
    rng.fill(&mut known[..]);
    known[1000..1012].copy_from_slice(b"evil-marker!");

    // Signature DBs are plain CSV; write one of each and import.
    let dir = std::env::temp_dir().join("sigtriage-example-dbs");
    std::fs::create_dir_all(&dir).unwrap();
    let exact_csv = dir.join("exact.csv");
    let fuzzy_csv = dir.join("fuzzy.csv");
    let mut f = std::fs::File::create(&exact_csv).unwrap();
    writeln!(f, "value,family,source,first_seen").unwrap();
    writeln!(
        f,
        "{},alphaworm,demo-feed,2021-11-01",
        digest_bytes(&known).hex()
    )
    .unwrap();
    let mut f = std::fs::File::create(&fuzzy_csv).unwrap();
    writeln!(f, "value,family,source,first_seen").unwrap();
    writeln!(
        f,
        "{},alphaworm,demo-feed,2021-11-01",
        fuzzy_hash(&known).unwrap()
    )
    .unwrap();

    let mut store = SignatureStore::new();
    store
        .import_signatures(&exact_csv, SignatureKind::Exact)
        .unwrap();
    store
        .import_signatures(&fuzzy_csv, SignatureKind::Fuzzy)
        .unwrap();

    let rules = compile(
        &parse_rules(
            r#"
rule evil_marker : dropper {
    meta:
        severity = "malicious"
        family = "alphaworm"
    strings:
        $m = "evil-marker!"
    condition:
        $m
}

rule big_and_binary {
    meta:
        severity = "info"
    condition:
        filesize > 10KB
}
"#,
        )
        .unwrap(),
    )
    .unwrap();
    let cfg = TriageConfig::default();

    // Exact hit: known-malicious.
    show(
        "known sample",
        &triage_bytes("known.bin", &known, &store, &rules, &cfg),
    );

    // Mutated copy: digest no longer matches, fuzzy similarity still does.
    let mut variant = known.clone();
    for _ in 0..8 {
        let pos = rng.gen_range(0..variant.len());
        variant[pos] ^= 0xff;
    }
    show(
        "mutated variant",
        &triage_bytes("variant.bin", &variant, &store, &rules, &cfg),
    );

    // Unknown file that only trips the info rule: suspicious.
    let mut bystander = vec![0u8; 32 * 1024];
    rng.fill(&mut bystander[..]);
    show(
        "info-rule only",
        &triage_bytes("bystander.bin", &bystander, &store, &rules, &cfg),
    );

    // Nothing matches: unknown.
    show(
        "tiny benign",
        &triage_bytes("note.txt", b"hello", &store, &rules, &cfg),
    );
}

fn show(label: &str, report: &sigtriage::TriageReport) {
    println!("== {label} ==");
    print!("{}", render_report(report, ReportFormat::Text));
    println!();
}
