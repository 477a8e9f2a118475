//! Damerau-Levenshtein edit distance and normalized string similarity.
//!
//! This is the scoring core of fuzzy-signature comparison: two piecewise hash
//! strings are similar when few insertions, deletions, substitutions, or
//! adjacent transpositions separate them. The restricted (optimal string
//! alignment) variant is used, where each substring is edited at most once.
//! Inputs are treated as 8-bit code units, never as text.

/// Per-operation edit costs. All costs must be >= 1 when used for scoring;
/// the default is unit cost for every operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EditCosts {
    pub insert: u32,
    pub delete: u32,
    pub substitute: u32,
    pub transpose: u32,
}

impl Default for EditCosts {
    fn default() -> Self {
        EditCosts {
            insert: 1,
            delete: 1,
            substitute: 1,
            transpose: 1,
        }
    }
}

/// Minimum total cost to transform `a` into `b` using insertions, deletions,
/// substitutions, and adjacent transpositions (each substring edited at most
/// once). Symmetric under unit costs; zero iff `a == b`.
pub fn dl_distance(a: &[u8], b: &[u8], costs: &EditCosts) -> u64 {
    debug_assert!(
        costs.insert >= 1 && costs.delete >= 1 && costs.substitute >= 1 && costs.transpose >= 1,
        "edit costs must be >= 1"
    );
    let (m, n) = (a.len(), b.len());
    if m == 0 {
        return n as u64 * costs.insert as u64;
    }
    if n == 0 {
        return m as u64 * costs.delete as u64;
    }

    let ins = costs.insert as u64;
    let del = costs.delete as u64;
    let sub = costs.substitute as u64;
    let tra = costs.transpose as u64;

    // Three rolling rows: the transposition case reaches back two rows.
    let mut prev2: Vec<u64> = vec![0; n + 1];
    let mut prev: Vec<u64> = (0..=n as u64).map(|j| j * ins).collect();
    let mut cur: Vec<u64> = vec![0; n + 1];

    for i in 1..=m {
        cur[0] = i as u64 * del;
        for j in 1..=n {
            let same = a[i - 1] == b[j - 1];
            let mut best = prev[j - 1] + if same { 0 } else { sub };
            best = best.min(prev[j] + del);
            best = best.min(cur[j - 1] + ins);
            if i >= 2 && j >= 2 && a[i - 1] == b[j - 2] && a[i - 2] == b[j - 1] {
                best = best.min(prev2[j - 2] + tra);
            }
            cur[j] = best;
        }
        std::mem::swap(&mut prev2, &mut prev);
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[n]
}

/// Normalized similarity in `[0, 100]` under unit costs:
/// `floor(100 * (1 - D / max(|a|, |b|)))`. Two empty inputs are identical by
/// definition and score 100.
pub fn similarity_pct(a: &[u8], b: &[u8]) -> u32 {
    let max_len = a.len().max(b.len()) as u64;
    if max_len == 0 {
        return 100;
    }
    let d = dl_distance(a, b, &EditCosts::default());
    // Unit-cost distance never exceeds max(|a|, |b|).
    ((max_len.saturating_sub(d)) * 100 / max_len) as u32
}
