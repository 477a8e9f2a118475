//! Lexer/parser for the YARA-subset rule language.
//!
//! Rules live in UTF-8 `.yar` files, several rules per file. [`parse_rules`]
//! turns text into a validated [`RuleSet`]; [`render_rules`] is its canonical
//! inverse. [`load_rule_files`] aggregates multiple files in lexicographic
//! filename order.

mod ast;
mod parser;
pub mod regex;
mod render;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use ast::*;
pub use parser::ParseError;

/// Parses rule text into a validated rule set.
///
/// All invariants are enforced here: unique rule names, unique pattern ids
/// per rule, conditions referencing only declared patterns, jump bounds
/// within `0..=256`, and at least one fully literal byte per hex pattern.
pub fn parse_rules(text: &str) -> Result<RuleSet, ParseError> {
    parser::Parser::new(text).parse_ruleset()
}

/// Renders a rule set in canonical form; re-parsing yields a structurally
/// equal rule set.
pub fn render_rules(rs: &RuleSet) -> String {
    render::render_ruleset(rs)
}

#[derive(Debug, Error)]
pub enum RuleLoadError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse { path: String, source: ParseError },
    #[error("{path}: rule '{name}' already defined in an earlier file")]
    DuplicateName { path: String, name: String },
}

/// Loads and merges rule files. Each path may be a `.yar` file or a
/// directory, which contributes its `.yar` files recursively; all files are
/// processed in lexicographic path order so aggregation is reproducible.
pub fn load_rule_files(paths: &[PathBuf]) -> Result<RuleSet, RuleLoadError> {
    let mut files = Vec::new();
    for path in paths {
        collect_rule_files(path, &mut files)?;
    }
    files.sort();
    files.dedup();

    let mut merged = RuleSet::default();
    let mut seen = std::collections::HashSet::new();
    for path in files {
        let display = path.display().to_string();
        let text = std::fs::read_to_string(&path).map_err(|e| RuleLoadError::Io {
            path: display.clone(),
            source: e,
        })?;
        let rs = parse_rules(&text).map_err(|e| RuleLoadError::Parse {
            path: display.clone(),
            source: e,
        })?;
        for rule in rs.rules {
            if !seen.insert(rule.name.clone()) {
                return Err(RuleLoadError::DuplicateName {
                    path: display,
                    name: rule.name,
                });
            }
            merged.rules.push(rule);
        }
    }
    Ok(merged)
}

fn collect_rule_files(path: &Path, out: &mut Vec<PathBuf>) -> Result<(), RuleLoadError> {
    let meta = std::fs::metadata(path).map_err(|e| RuleLoadError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    if meta.is_dir() {
        let entries = std::fs::read_dir(path).map_err(|e| RuleLoadError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        for entry in entries {
            let entry = entry.map_err(|e| RuleLoadError::Io {
                path: path.display().to_string(),
                source: e,
            })?;
            let child = entry.path();
            if child.is_dir() {
                collect_rule_files(&child, out)?;
            } else if child.extension().is_some_and(|e| e == "yar") {
                out.push(child);
            }
        }
    } else {
        out.push(path.to_path_buf());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::regex::RegexExpr;
    use super::*;

    #[test]
    fn minimal_rule() {
        let rs = parse_rules(r#"rule r { strings: $a = "MZ" condition: $a }"#).unwrap();
        assert_eq!(rs.rules.len(), 1);
        let rule = &rs.rules[0];
        assert_eq!(rule.name, "r");
        assert_eq!(rule.patterns.len(), 1);
        assert_eq!(
            rule.patterns[0].body,
            PatternBody::Text {
                value: b"MZ".to_vec(),
                modifiers: TextModifiers::default()
            }
        );
        assert_eq!(rule.condition, ConditionExpr::StringRef("a".into()));
    }

    #[test]
    fn duplicate_rule_name_rejected() {
        let err =
            parse_rules("rule r { condition: true }\nrule r { condition: false }").unwrap_err();
        assert!(err.message.contains("duplicate rule name"), "{err}");
        assert_eq!(err.line, 2);
    }

    #[test]
    fn hex_pattern_tokens() {
        let rs =
            parse_rules("rule r { strings: $a = { 4D ?? 5A [2-4] 90 } condition: $a }").unwrap();
        let PatternBody::Hex { tokens } = &rs.rules[0].patterns[0].body else {
            panic!("expected hex pattern");
        };
        assert_eq!(
            tokens,
            &vec![
                HexToken::Byte {
                    value: 0x4d,
                    mask: 0xff
                },
                HexToken::Byte { value: 0, mask: 0 },
                HexToken::Byte {
                    value: 0x5a,
                    mask: 0xff
                },
                HexToken::Jump { min: 2, max: 4 },
                HexToken::Byte {
                    value: 0x90,
                    mask: 0xff
                },
            ]
        );
    }

    #[test]
    fn masked_nibbles() {
        let rs = parse_rules("rule r { strings: $a = { 4? ?A FF } condition: $a }").unwrap();
        let PatternBody::Hex { tokens } = &rs.rules[0].patterns[0].body else {
            panic!("expected hex pattern");
        };
        assert_eq!(
            tokens[0],
            HexToken::Byte {
                value: 0x40,
                mask: 0xf0
            }
        );
        assert_eq!(
            tokens[1],
            HexToken::Byte {
                value: 0x0a,
                mask: 0x0f
            }
        );
        assert_eq!(
            tokens[2],
            HexToken::Byte {
                value: 0xff,
                mask: 0xff
            }
        );
    }

    #[test]
    fn hex_invariants_enforced() {
        // Jump bounds out of range.
        let err =
            parse_rules("rule r { strings: $a = { 4D [2-400] 5A } condition: $a }").unwrap_err();
        assert!(err.message.contains("jump bounds"), "{err}");
        // Jump at the edges.
        assert!(parse_rules("rule r { strings: $a = { [2-4] 90 } condition: $a }").is_err());
        assert!(parse_rules("rule r { strings: $a = { 90 [2-4] } condition: $a }").is_err());
        // No fully literal byte.
        let err = parse_rules("rule r { strings: $a = { ?? 4? } condition: $a }").unwrap_err();
        assert!(err.message.contains("literal byte"), "{err}");
    }

    #[test]
    fn undefined_reference_rejected_with_position() {
        let err = parse_rules("rule r { strings: $a = \"x\" condition: $b }").unwrap_err();
        assert!(err.message.contains("undefined pattern"), "{err}");
        assert_eq!((err.line, err.col), (1, 39));
    }

    #[test]
    fn meta_and_modifiers() {
        let text = r#"
rule spotter : keylogger win32 {
    meta:
        severity = "malicious"
        family = "keilhos"
        score = -2
        active = true
    strings:
        $a = "GetAsyncKeyState" nocase wide fullword
        $b = /Key[0-9]{1,3}/ nocase
    condition:
        $a and #b > 2
}
"#;
        let rs = parse_rules(text).unwrap();
        let rule = &rs.rules[0];
        assert_eq!(
            rule.tags,
            vec!["keylogger".to_string(), "win32".to_string()]
        );
        assert_eq!(rule.severity(), Severity::Malicious);
        assert_eq!(rule.family(), Some("keilhos"));
        assert_eq!(rule.meta_value("score"), Some(&MetaValue::Int(-2)));
        assert_eq!(rule.meta_value("active"), Some(&MetaValue::Bool(true)));
        let PatternBody::Text { modifiers, .. } = &rule.patterns[0].body else {
            panic!("expected text");
        };
        assert!(modifiers.nocase && modifiers.wide && modifiers.fullword && !modifiers.ascii);
        let PatternBody::Regex { expr, nocase } = &rule.patterns[1].body else {
            panic!("expected regex");
        };
        assert!(nocase);
        assert!(matches!(expr, RegexExpr::Concat(_)));
    }

    #[test]
    fn severity_values_validated() {
        let err = parse_rules(r#"rule r { meta: severity = "bad" condition: true }"#).unwrap_err();
        assert!(err.message.contains("severity"), "{err}");
        assert_eq!(err.line, 1);
    }

    #[test]
    fn condition_forms() {
        let text = r#"
rule c {
    strings:
        $a = "one"
        $ab = "two"
        $b = "three"
    condition:
        ($a or not $b) and #a >= 2 and $a at 0x40 and 2 of ($a*) and any of them
        and filesize < 10KB and uint16(0) == 0x5A4D and fuzzy_sim("3:ABCDEFG:HI") >= 50
        and true and not false and 1
}
"#;
        let rs = parse_rules(text).unwrap();
        assert_eq!(rs.rules.len(), 1);
    }

    #[test]
    fn kb_mb_suffixes() {
        let rs = parse_rules("rule r { condition: filesize < 2MB or filesize == 10KB }").unwrap();
        let ConditionExpr::Or(lhs, rhs) = &rs.rules[0].condition else {
            panic!()
        };
        assert_eq!(
            **lhs,
            ConditionExpr::Filesize {
                cmp: Comparator::Lt,
                value: 2 * 1024 * 1024
            }
        );
        assert_eq!(
            **rhs,
            ConditionExpr::Filesize {
                cmp: Comparator::Eq,
                value: 10 * 1024
            }
        );
    }

    #[test]
    fn fuzzy_sim_literal_validated() {
        let err = parse_rules(r#"rule r { condition: fuzzy_sim("7:AB:C") >= 50 }"#).unwrap_err();
        assert!(err.message.contains("fuzzy_sim"), "{err}");
        let err = parse_rules(r#"rule r { condition: fuzzy_sim("3:AB:C") >= 500 }"#).unwrap_err();
        assert!(err.message.contains("[0, 100]"), "{err}");
    }

    #[test]
    fn glob_must_match_something() {
        let err =
            parse_rules("rule r { strings: $a = \"x\" condition: any of ($z*) }").unwrap_err();
        assert!(err.message.contains("no declared pattern"), "{err}");
    }

    #[test]
    fn empty_input_is_empty_ruleset() {
        assert_eq!(parse_rules("").unwrap().rules.len(), 0);
        assert_eq!(parse_rules("  // just a comment\n").unwrap().rules.len(), 0);
    }

    #[test]
    fn diagnostics_point_inside_tokens() {
        let err = parse_rules("rule r {\n  condition: $missing\n}").unwrap_err();
        assert_eq!((err.line, err.col), (2, 14));
        let err = parse_rules("rule 1bad { condition: true }").unwrap_err();
        assert_eq!((err.line, err.col), (1, 6));
    }

    #[test]
    fn render_round_trip_minimal() {
        let rs = parse_rules(r#"rule r { strings: $a = "MZ" condition: $a }"#).unwrap();
        let text = render_rules(&rs);
        assert_eq!(parse_rules(&text).unwrap(), rs);
    }

    #[test]
    fn render_preserves_meta() {
        let rs =
            parse_rules(r#"rule r { meta: severity = "malicious" family = "x" condition: true }"#)
                .unwrap();
        let text = render_rules(&rs);
        let back = parse_rules(&text).unwrap();
        assert_eq!(back, rs);
        assert!(text.contains("severity = \"malicious\""));
    }

    #[test]
    fn render_round_trip_rich() {
        let text = r#"
rule alpha : t1 t2 {
    meta:
        severity = "suspicious"
        description = "quotes \" and \\ and \x01"
        weight = -40
    strings:
        $a = "bin\x00ary" nocase fullword
        $h = { 4D 5A ?? 4? ?F [0-16] 90 [3] AA }
        $r = /a(b|cd)+[^x-z]{2,7}\./
    condition:
        (not $a or #h <= 3) and ($r at 12 or 2 of them) and not (true and false)
}

rule beta {
    condition:
        filesize > 1024 or uint32(16) != 0xDEADBEEF or fuzzy_sim("96:ABC:DE") < 10
}
"#;
        let rs = parse_rules(text).unwrap();
        let rendered = render_rules(&rs);
        let back = parse_rules(&rendered).unwrap_or_else(|e| panic!("{e}\n{rendered}"));
        assert_eq!(back, rs, "\n{rendered}");
        // Canonical text is a fixed point.
        assert_eq!(render_rules(&back), rendered);
    }

    #[test]
    fn parser_is_total_on_junk() {
        for text in [
            "rule",
            "rule r",
            "rule r {",
            "rule r { condition:",
            "rule r { strings: $",
            "{}",
            "@@@",
            "rule r : { condition: true }",
            "rule r { strings: $a = ",
            "rule r { strings: $a = \"",
            "rule r { strings: $a = {",
            "rule r { strings: $a = /",
            "rule r { strings: $a = /a(/ condition: $a }",
            "rule r { condition: ((((((true }",
            "rule r { condition: 99999999999999999999999 }",
            "rule r { meta: x = }",
        ] {
            let _ = parse_rules(text);
        }
    }

    #[test]
    fn load_rule_files_lexicographic_and_duplicates() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("b.yar"), "rule from_b { condition: true }").unwrap();
        std::fs::write(dir.path().join("a.yar"), "rule from_a { condition: true }").unwrap();
        std::fs::write(dir.path().join("ignored.txt"), "not rules").unwrap();
        let rs = load_rule_files(&[dir.path().to_path_buf()]).unwrap();
        let names: Vec<&str> = rs.rules.iter().map(|r| r.name.as_str()).collect();
        assert_eq!(names, vec!["from_a", "from_b"]);

        std::fs::write(dir.path().join("c.yar"), "rule from_a { condition: true }").unwrap();
        let err = load_rule_files(&[dir.path().to_path_buf()]).unwrap_err();
        assert!(matches!(err, RuleLoadError::DuplicateName { .. }));
    }
}
