//! Rule AST: the validated, immutable result of parsing rule text.

use crate::ctph::FuzzySignature;

use super::regex::RegexExpr;

/// A parsed collection of rules. Rule names are unique within a set.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RuleSet {
    pub rules: Vec<Rule>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub name: String,
    pub tags: Vec<String>,
    /// Metadata entries in source order. Recognized keys: `severity`
    /// (malicious | suspicious | info), `family`, `description`.
    pub meta: Vec<(String, MetaValue)>,
    pub patterns: Vec<PatternDef>,
    pub condition: ConditionExpr,
}

impl Rule {
    pub fn meta_value(&self, key: &str) -> Option<&MetaValue> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    /// The rule's severity; `info` when absent.
    pub fn severity(&self) -> Severity {
        match self.meta_value("severity") {
            Some(MetaValue::Str(s)) if s == "malicious" => Severity::Malicious,
            Some(MetaValue::Str(s)) if s == "suspicious" => Severity::Suspicious,
            _ => Severity::Info,
        }
    }

    pub fn family(&self) -> Option<&str> {
        match self.meta_value("family") {
            Some(MetaValue::Str(s)) => Some(s.as_str()),
            _ => None,
        }
    }
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, serde::Serialize, serde::Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Info,
    Suspicious,
    Malicious,
}

impl Severity {
    pub fn as_str(&self) -> &'static str {
        match self {
            Severity::Info => "info",
            Severity::Suspicious => "suspicious",
            Severity::Malicious => "malicious",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MetaValue {
    Str(String),
    Int(i64),
    Bool(bool),
}

/// A named pattern declaration (`$id = ...`). The stored id omits the `$`.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternDef {
    pub id: String,
    pub body: PatternBody,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PatternBody {
    Text {
        value: Vec<u8>,
        modifiers: TextModifiers,
    },
    Hex {
        tokens: Vec<HexToken>,
    },
    Regex {
        expr: RegexExpr,
        nocase: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TextModifiers {
    pub nocase: bool,
    pub ascii: bool,
    pub wide: bool,
    pub fullword: bool,
}

/// One element of a hex pattern.
///
/// `Byte` carries a nibble mask: `0xFF` for a literal byte, `0xF0` for `X?`,
/// `0x0F` for `?X`, `0x00` for `??`. The invariant `value & !mask == 0`
/// always holds. `Jump` is a variable gap of `min..=max` bytes and never
/// appears at either end of a pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HexToken {
    Byte { value: u8, mask: u8 },
    Jump { min: u32, max: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Comparator {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl Comparator {
    pub fn as_str(&self) -> &'static str {
        match self {
            Comparator::Eq => "==",
            Comparator::Ne => "!=",
            Comparator::Lt => "<",
            Comparator::Le => "<=",
            Comparator::Gt => ">",
            Comparator::Ge => ">=",
        }
    }

    pub fn eval_u64(&self, lhs: u64, rhs: u64) -> bool {
        match self {
            Comparator::Eq => lhs == rhs,
            Comparator::Ne => lhs != rhs,
            Comparator::Lt => lhs < rhs,
            Comparator::Le => lhs <= rhs,
            Comparator::Gt => lhs > rhs,
            Comparator::Ge => lhs >= rhs,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantifier {
    Any,
    All,
    Count(u64),
}

/// The pattern set an `of` expression ranges over.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PatternSet {
    Them,
    /// `($prefix*)` — all patterns whose id starts with the prefix.
    Glob(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UintWidth {
    U8,
    U16,
    U32,
}

impl UintWidth {
    pub fn bytes(&self) -> usize {
        match self {
            UintWidth::U8 => 1,
            UintWidth::U16 => 2,
            UintWidth::U32 => 4,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            UintWidth::U8 => "uint8",
            UintWidth::U16 => "uint16",
            UintWidth::U32 => "uint32",
        }
    }
}

/// A rule condition. Pattern ids are stored without the `$`/`#` sigils.
#[derive(Debug, Clone, PartialEq)]
pub enum ConditionExpr {
    And(Box<ConditionExpr>, Box<ConditionExpr>),
    Or(Box<ConditionExpr>, Box<ConditionExpr>),
    Not(Box<ConditionExpr>),
    /// `$id` — true iff the pattern matched at least once.
    StringRef(String),
    /// `#id CMP n` — compares the number of matches.
    CountCmp {
        id: String,
        cmp: Comparator,
        value: u64,
    },
    /// `$id at n` — true iff n is one of the pattern's match offsets.
    At {
        id: String,
        offset: u64,
    },
    Of {
        quantifier: Quantifier,
        set: PatternSet,
    },
    Filesize {
        cmp: Comparator,
        value: u64,
    },
    /// Little-endian integer read; false when the read runs past the data.
    UintRead {
        width: UintWidth,
        offset: u64,
        cmp: Comparator,
        value: u64,
    },
    /// `fuzzy_sim("b:s1:s2") CMP n` — compares the scanned data's fuzzy
    /// signature against the literal.
    FuzzySim {
        signature: FuzzySignature,
        cmp: Comparator,
        value: u32,
    },
    IntLit(u64),
    BoolLit(bool),
}
