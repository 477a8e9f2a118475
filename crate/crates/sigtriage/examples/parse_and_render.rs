//! Rule-language round trip: parse text into an AST, inspect it, render it
//! back canonically, and see what diagnostics look like.
//!
//! ```bash
//! cargo run -p sigtriage --example parse_and_render
//! ```

use sigtriage::{parse_rules, render_rules};

const RULES: &str = r#"
// Flag double-extension lures and packed droppers.
rule double_extension : lure {
    meta:
        severity = "suspicious"
        description = "document name ending in .pdf.exe"
    strings:
        $name = /\.pdf\.exe/ nocase
    condition:
        $name
}

rule dropper_beta : dropper win32 {
    meta:
        severity = "malicious"
        family = "betaloader"
    strings:
        $magic = { 4D 5A 90 00 [0-64] 50 45 }   // MZ ... PE
        $mark  = "beta-stage2" fullword
    condition:
        $magic and ($mark or filesize < 16KB)
}
"#;

fn main() {
    let ruleset = parse_rules(RULES).unwrap();
    for rule in &ruleset.rules {
        println!(
            "parsed rule {:<18} severity={:<10} tags={:?} patterns={}",
            rule.name,
            rule.severity().as_str(),
            rule.tags,
            rule.patterns.len(),
        );
    }

    // Canonical rendering re-parses to a structurally equal rule set.
    let rendered = render_rules(&ruleset);
    assert_eq!(parse_rules(&rendered).unwrap(), ruleset);
    println!("\ncanonical form:\n{rendered}");

    // Diagnostics carry line and column.
    let broken = "rule broken {\n    condition: $nope\n}";
    let err = parse_rules(broken).unwrap_err();
    println!("diagnostic: {err}");
}
