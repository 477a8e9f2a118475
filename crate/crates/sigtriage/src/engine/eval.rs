//! Condition evaluation over a match context.
//!
//! Exposed separately from scanning so conditions can be truth-table tested
//! against an independent interpreter.

use crate::ctph::{fuzzy_compare, FuzzySignature};
use crate::rulelang::{ConditionExpr, PatternSet, Quantifier};

/// Everything a condition can observe: the scanned bytes, per-pattern match
/// offsets (sorted ascending), and the data's fuzzy signature when one was
/// computed.
pub struct MatchContext<'a> {
    pub data: &'a [u8],
    pub patterns: Vec<(&'a str, &'a [usize])>,
    pub fuzzy: Option<&'a FuzzySignature>,
}

impl<'a> MatchContext<'a> {
    fn offsets(&self, id: &str) -> &[usize] {
        self.patterns
            .iter()
            .find(|(pid, _)| *pid == id)
            .map(|(_, offsets)| *offsets)
            .unwrap_or(&[])
    }

    fn set_ids(&self, set: &PatternSet) -> impl Iterator<Item = &(&'a str, &'a [usize])> {
        let prefix = match set {
            PatternSet::Them => None,
            PatternSet::Glob(p) => Some(p.clone()),
        };
        self.patterns
            .iter()
            .filter(move |(id, _)| prefix.as_deref().is_none_or(|p| id.starts_with(p)))
    }
}

/// Standard boolean semantics; see the operation contracts on each arm.
pub fn eval_condition(expr: &ConditionExpr, ctx: &MatchContext) -> bool {
    match expr {
        ConditionExpr::And(lhs, rhs) => eval_condition(lhs, ctx) && eval_condition(rhs, ctx),
        ConditionExpr::Or(lhs, rhs) => eval_condition(lhs, ctx) || eval_condition(rhs, ctx),
        ConditionExpr::Not(inner) => !eval_condition(inner, ctx),
        ConditionExpr::StringRef(id) => !ctx.offsets(id).is_empty(),
        ConditionExpr::CountCmp { id, cmp, value } => {
            cmp.eval_u64(ctx.offsets(id).len() as u64, *value)
        }
        ConditionExpr::At { id, offset } => {
            usize::try_from(*offset).is_ok_and(|off| ctx.offsets(id).binary_search(&off).is_ok())
        }
        ConditionExpr::Of { quantifier, set } => {
            let total = ctx.set_ids(set).count() as u64;
            let matched = ctx
                .set_ids(set)
                .filter(|(_, offsets)| !offsets.is_empty())
                .count() as u64;
            match quantifier {
                Quantifier::Any => matched >= 1,
                Quantifier::All => matched == total,
                Quantifier::Count(n) => matched >= *n,
            }
        }
        ConditionExpr::Filesize { cmp, value } => cmp.eval_u64(ctx.data.len() as u64, *value),
        ConditionExpr::UintRead {
            width,
            offset,
            cmp,
            value,
        } => {
            let Ok(off) = usize::try_from(*offset) else {
                return false;
            };
            let Some(end) = off.checked_add(width.bytes()) else {
                return false;
            };
            if end > ctx.data.len() {
                return false;
            }
            let mut read: u64 = 0;
            for (i, &b) in ctx.data[off..end].iter().enumerate() {
                read |= (b as u64) << (8 * i);
            }
            cmp.eval_u64(read, *value)
        }
        ConditionExpr::FuzzySim {
            signature,
            cmp,
            value,
        } => match ctx.fuzzy {
            Some(sig) => cmp.eval_u64(fuzzy_compare(sig, signature) as u64, *value as u64),
            None => false,
        },
        ConditionExpr::IntLit(v) => *v != 0,
        ConditionExpr::BoolLit(b) => *b,
    }
}
