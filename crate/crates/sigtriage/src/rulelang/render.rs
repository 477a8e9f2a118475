//! Canonical rule rendering. `parse_rules(render_rules(rs))` is structurally
//! equal to `rs` for every valid rule set.

use std::fmt::Write as _;

use super::ast::*;
use super::regex::render_regex;

pub(super) fn render_ruleset(rs: &RuleSet) -> String {
    let mut out = String::new();
    for (i, rule) in rs.rules.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        render_rule(rule, &mut out);
    }
    out
}

fn render_rule(rule: &Rule, out: &mut String) {
    out.push_str("rule ");
    out.push_str(&rule.name);
    if !rule.tags.is_empty() {
        out.push_str(" : ");
        out.push_str(&rule.tags.join(" "));
    }
    out.push_str(" {\n");
    if !rule.meta.is_empty() {
        out.push_str("    meta:\n");
        for (key, value) in &rule.meta {
            let _ = write!(out, "        {key} = ");
            match value {
                MetaValue::Str(s) => render_quoted(s.as_bytes(), out),
                MetaValue::Int(i) => {
                    let _ = write!(out, "{i}");
                }
                MetaValue::Bool(b) => {
                    let _ = write!(out, "{b}");
                }
            }
            out.push('\n');
        }
    }
    if !rule.patterns.is_empty() {
        out.push_str("    strings:\n");
        for def in &rule.patterns {
            let _ = write!(out, "        ${} = ", def.id);
            render_pattern_body(&def.body, out);
            out.push('\n');
        }
    }
    out.push_str("    condition:\n        ");
    render_expr(&rule.condition, 0, out);
    out.push_str("\n}\n");
}

fn render_pattern_body(body: &PatternBody, out: &mut String) {
    match body {
        PatternBody::Text { value, modifiers } => {
            render_quoted(value, out);
            if modifiers.nocase {
                out.push_str(" nocase");
            }
            if modifiers.ascii {
                out.push_str(" ascii");
            }
            if modifiers.wide {
                out.push_str(" wide");
            }
            if modifiers.fullword {
                out.push_str(" fullword");
            }
        }
        PatternBody::Hex { tokens } => {
            out.push_str("{ ");
            for token in tokens {
                match token {
                    HexToken::Byte { value, mask } => {
                        match mask {
                            0xff => {
                                let _ = write!(out, "{value:02X}");
                            }
                            0xf0 => {
                                let _ = write!(out, "{:X}?", value >> 4);
                            }
                            0x0f => {
                                let _ = write!(out, "?{:X}", value & 0x0f);
                            }
                            _ => out.push_str("??"),
                        }
                        out.push(' ');
                    }
                    HexToken::Jump { min, max } => {
                        if min == max {
                            let _ = write!(out, "[{min}] ");
                        } else {
                            let _ = write!(out, "[{min}-{max}] ");
                        }
                    }
                }
            }
            out.push('}');
        }
        PatternBody::Regex { expr, nocase } => {
            out.push('/');
            out.push_str(&render_regex(expr));
            out.push('/');
            if *nocase {
                out.push_str(" nocase");
            }
        }
    }
}

fn render_quoted(bytes: &[u8], out: &mut String) {
    out.push('"');
    for &b in bytes {
        match b {
            b'"' => out.push_str("\\\""),
            b'\\' => out.push_str("\\\\"),
            b'\n' => out.push_str("\\n"),
            b'\r' => out.push_str("\\r"),
            b'\t' => out.push_str("\\t"),
            0x20..=0x7e => out.push(b as char),
            _ => {
                let _ = write!(out, "\\x{b:02x}");
            }
        }
    }
    out.push('"');
}

/// Precedence: Or = 1, And = 2, Not = 3, atoms = 4. Parentheses are emitted
/// exactly where needed to reproduce the tree shape.
fn prec(expr: &ConditionExpr) -> u8 {
    match expr {
        ConditionExpr::Or(..) => 1,
        ConditionExpr::And(..) => 2,
        ConditionExpr::Not(..) => 3,
        _ => 4,
    }
}

fn render_child(expr: &ConditionExpr, min_prec: u8, out: &mut String) {
    if prec(expr) < min_prec {
        out.push('(');
        render_expr(expr, 0, out);
        out.push(')');
    } else {
        render_expr(expr, 0, out);
    }
}

fn render_expr(expr: &ConditionExpr, _depth: u8, out: &mut String) {
    match expr {
        ConditionExpr::Or(lhs, rhs) => {
            render_child(lhs, 1, out);
            out.push_str(" or ");
            render_child(rhs, 2, out);
        }
        ConditionExpr::And(lhs, rhs) => {
            render_child(lhs, 2, out);
            out.push_str(" and ");
            render_child(rhs, 3, out);
        }
        ConditionExpr::Not(inner) => {
            out.push_str("not ");
            render_child(inner, 3, out);
        }
        ConditionExpr::StringRef(id) => {
            let _ = write!(out, "${id}");
        }
        ConditionExpr::CountCmp { id, cmp, value } => {
            let _ = write!(out, "#{id} {} {value}", cmp.as_str());
        }
        ConditionExpr::At { id, offset } => {
            let _ = write!(out, "${id} at {offset}");
        }
        ConditionExpr::Of { quantifier, set } => {
            match quantifier {
                Quantifier::Any => out.push_str("any"),
                Quantifier::All => out.push_str("all"),
                Quantifier::Count(n) => {
                    let _ = write!(out, "{n}");
                }
            }
            out.push_str(" of ");
            match set {
                PatternSet::Them => out.push_str("them"),
                PatternSet::Glob(prefix) => {
                    let _ = write!(out, "(${prefix}*)");
                }
            }
        }
        ConditionExpr::Filesize { cmp, value } => {
            let _ = write!(out, "filesize {} {value}", cmp.as_str());
        }
        ConditionExpr::UintRead {
            width,
            offset,
            cmp,
            value,
        } => {
            let _ = write!(out, "{}({offset}) {} {value}", width.as_str(), cmp.as_str());
        }
        ConditionExpr::FuzzySim {
            signature,
            cmp,
            value,
        } => {
            let _ = write!(out, "fuzzy_sim(\"{signature}\") {} {value}", cmp.as_str());
        }
        ConditionExpr::IntLit(v) => {
            let _ = write!(out, "{v}");
        }
        ConditionExpr::BoolLit(b) => {
            let _ = write!(out, "{b}");
        }
    }
}
