//! Compile a rule set and scan bytes: text, hex (with wildcards and jumps),
//! and regex patterns, plus offset and count conditions.
//!
//! ```bash
//! cargo run -p sigtriage --example scan_rules
//! ```

use sigtriage::{compile, parse_rules, scan};

const RULES: &str = r#"
rule pe_header {
    condition:
        uint16(0) == 0x5A4D
}

rule keylog_imports : keylogger {
    meta:
        severity = "malicious"
        family = "keilhos"
    strings:
        $a = "GetAsyncKeyState" nocase
        $b = "SetWindowsHookEx" nocase
    condition:
        any of them
}

rule stage_marker {
    strings:
        $hex = { DE AD [2-8] BE EF }
        $re  = /stage[0-9]{1,2}/
    condition:
        $hex and #re >= 2
}
"#;

fn main() {
    let compiled = compile(&parse_rules(RULES).unwrap()).unwrap();

    let mut data = Vec::new();
    data.extend_from_slice(b"MZ\x90\x00........");
    data.extend_from_slice(b"call getasynckeystate please ");
    data.extend_from_slice(b"\xde\xad\x01\x02\x03\xbe\xef ");
    data.extend_from_slice(b"stage1 then stage27 done");

    let result = scan(&compiled, &data);
    println!("scanned {} bytes\n", result.filesize);
    for rule in &result.rules {
        println!("rule {:<16} matched={}", rule.name, rule.matched);
        for pattern in &rule.patterns {
            if !pattern.offsets.is_empty() {
                println!("    ${:<4} at offsets {:?}", pattern.id, pattern.offsets);
            }
        }
    }
}
