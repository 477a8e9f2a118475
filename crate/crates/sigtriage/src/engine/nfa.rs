//! Thompson NFA construction and simulation for the regex subset.
//!
//! Matching is a breadth-first simulation with no backtracking, so a scan of
//! n bytes costs O(n * states) regardless of the pattern. Match *start*
//! offsets are recovered by running the structurally reversed expression over
//! the reversed input: a match of the reversed pattern ending at reversed
//! position e is a match of the original starting at `len - e`.

use crate::rulelang::regex::RegexExpr;

const DANGLING: u32 = u32::MAX;

#[derive(Debug, Clone)]
enum State {
    /// Consume one byte inside any of the sorted, disjoint ranges.
    Byte {
        ranges: Vec<(u8, u8)>,
        next: u32,
    },
    Split {
        a: u32,
        b: u32,
    },
    /// Epsilon edge; used as a patchable exit while building.
    Goto {
        next: u32,
    },
    Accept,
}

#[derive(Debug, Clone)]
pub struct Nfa {
    states: Vec<State>,
    start: u32,
}

struct Builder {
    states: Vec<State>,
}

impl Builder {
    fn push(&mut self, s: State) -> u32 {
        self.states.push(s);
        (self.states.len() - 1) as u32
    }

    fn patch(&mut self, exit: u32, target: u32) {
        match &mut self.states[exit as usize] {
            State::Goto { next } => *next = target,
            _ => unreachable!("exit states are always Goto"),
        }
    }

    /// Compiles `expr` into a fragment with one entry and one dangling
    /// `Goto` exit.
    fn fragment(&mut self, expr: &RegexExpr) -> (u32, u32) {
        match expr {
            RegexExpr::Char(b) => {
                let exit = self.push(State::Goto { next: DANGLING });
                let entry = self.push(State::Byte {
                    ranges: vec![(*b, *b)],
                    next: exit,
                });
                (entry, exit)
            }
            RegexExpr::AnyByte => {
                let exit = self.push(State::Goto { next: DANGLING });
                let entry = self.push(State::Byte {
                    ranges: vec![(0, 0xff)],
                    next: exit,
                });
                (entry, exit)
            }
            RegexExpr::Class { negated, ranges } => {
                let normalized = normalize_ranges(ranges, *negated);
                let exit = self.push(State::Goto { next: DANGLING });
                let entry = self.push(State::Byte {
                    ranges: normalized,
                    next: exit,
                });
                (entry, exit)
            }
            RegexExpr::Concat(parts) => {
                let mut entry = None;
                let mut prev_exit: Option<u32> = None;
                for part in parts {
                    let (e, x) = self.fragment(part);
                    if let Some(px) = prev_exit {
                        self.patch(px, e);
                    } else {
                        entry = Some(e);
                    }
                    prev_exit = Some(x);
                }
                (
                    entry.expect("concat is never empty"),
                    prev_exit.expect("concat is never empty"),
                )
            }
            RegexExpr::Alt(branches) => {
                let exit = self.push(State::Goto { next: DANGLING });
                let mut entry = DANGLING;
                for branch in branches.iter().rev() {
                    let (e, x) = self.fragment(branch);
                    self.patch(x, exit);
                    entry = if entry == DANGLING {
                        e
                    } else {
                        self.push(State::Split { a: e, b: entry })
                    };
                }
                (entry, exit)
            }
            RegexExpr::Repeat { inner, min, max } => self.repeat(inner, *min, *max),
        }
    }

    fn repeat(&mut self, inner: &RegexExpr, min: u32, max: Option<u32>) -> (u32, u32) {
        let exit = self.push(State::Goto { next: DANGLING });
        let mut entry = DANGLING;
        let mut tail: Option<u32> = None;

        // Mandatory copies.
        for _ in 0..min {
            let (e, x) = self.fragment(inner);
            if let Some(t) = tail {
                self.patch(t, e);
            } else {
                entry = e;
            }
            tail = Some(x);
        }

        match max {
            None => {
                // Trailing X*: loop split.
                let (e, x) = self.fragment(inner);
                let split = self.push(State::Split { a: e, b: exit });
                self.patch(x, split);
                if let Some(t) = tail {
                    self.patch(t, split);
                } else {
                    entry = split;
                }
            }
            Some(max) => {
                // (max - min) optional copies, each skippable to the exit.
                for _ in min..max {
                    let (e, x) = self.fragment(inner);
                    let split = self.push(State::Split { a: e, b: exit });
                    if let Some(t) = tail {
                        self.patch(t, split);
                    } else {
                        entry = split;
                    }
                    tail = Some(x);
                }
                if let Some(t) = tail {
                    self.patch(t, exit);
                } else {
                    // {0,0}: matches only the empty string.
                    entry = exit;
                }
            }
        }
        (entry, exit)
    }
}

/// Resolves a class to sorted, disjoint, inclusive byte ranges.
fn normalize_ranges(ranges: &[(u8, u8)], negated: bool) -> Vec<(u8, u8)> {
    let mut set = [false; 256];
    for &(lo, hi) in ranges {
        for b in lo..=hi {
            set[b as usize] = true;
            if b == 0xff {
                break;
            }
        }
    }
    if negated {
        for flag in set.iter_mut() {
            *flag = !*flag;
        }
    }
    let mut out = Vec::new();
    let mut run: Option<(u8, u8)> = None;
    for (b, &present) in set.iter().enumerate() {
        if present {
            run = match run {
                Some((lo, _)) => Some((lo, b as u8)),
                None => Some((b as u8, b as u8)),
            };
        } else if let Some(r) = run.take() {
            out.push(r);
        }
    }
    if let Some(r) = run {
        out.push(r);
    }
    out
}

/// ASCII case folding applied to the expression: every letter matches both
/// cases. Used for `nocase` regex patterns.
pub fn fold_case(expr: &RegexExpr) -> RegexExpr {
    match expr {
        RegexExpr::Char(b) if b.is_ascii_alphabetic() => RegexExpr::Class {
            negated: false,
            ranges: vec![
                (b.to_ascii_lowercase(), b.to_ascii_lowercase()),
                (b.to_ascii_uppercase(), b.to_ascii_uppercase()),
            ],
        },
        RegexExpr::Char(_) | RegexExpr::AnyByte => expr.clone(),
        RegexExpr::Class { negated, ranges } => {
            let mut set = [false; 256];
            for &(lo, hi) in ranges {
                for b in lo..=hi {
                    set[b as usize] = true;
                    if b == 0xff {
                        break;
                    }
                }
            }
            if *negated {
                for flag in set.iter_mut() {
                    *flag = !*flag;
                }
            }
            for b in 0..=255u8 {
                if set[b as usize] && b.is_ascii_alphabetic() {
                    set[b.to_ascii_lowercase() as usize] = true;
                    set[b.to_ascii_uppercase() as usize] = true;
                }
            }
            let ranges: Vec<(u8, u8)> = (0..256usize)
                .filter(|&b| set[b])
                .map(|b| (b as u8, b as u8))
                .collect();
            RegexExpr::Class {
                negated: false,
                ranges,
            }
        }
        RegexExpr::Concat(parts) => RegexExpr::Concat(parts.iter().map(fold_case).collect()),
        RegexExpr::Alt(branches) => RegexExpr::Alt(branches.iter().map(fold_case).collect()),
        RegexExpr::Repeat { inner, min, max } => RegexExpr::Repeat {
            inner: Box::new(fold_case(inner)),
            min: *min,
            max: *max,
        },
    }
}

impl Nfa {
    pub fn compile(expr: &RegexExpr) -> Nfa {
        let mut b = Builder { states: Vec::new() };
        let accept = b.push(State::Accept);
        let (entry, exit) = b.fragment(expr);
        b.patch(exit, accept);
        Nfa {
            states: b.states,
            start: entry,
        }
    }

    /// Reports every position `e` (0..=len) where some match ends, feeding
    /// bytes from `input`. Unanchored: a fresh thread starts at every
    /// position. One pass, O(len * states).
    pub fn match_ends<I>(&self, input: I, len: usize, mut on_end: impl FnMut(usize))
    where
        I: IntoIterator<Item = u8>,
    {
        let n_states = self.states.len();
        let mut stamps = vec![u32::MAX; n_states];
        let mut epoch = 0u32;
        let mut current: Vec<u32> = Vec::with_capacity(n_states);
        let mut next: Vec<u32> = Vec::with_capacity(n_states);
        let mut stack: Vec<u32> = Vec::new();
        let mut accept_live;

        let mut iter = input.into_iter();
        for i in 0..=len {
            // Inject a potential match start at this position.
            accept_live = Self::add(
                &self.states,
                self.start,
                &mut current,
                &mut stamps,
                epoch,
                &mut stack,
            );
            if !accept_live {
                accept_live = current
                    .iter()
                    .any(|&s| matches!(self.states[s as usize], State::Accept));
            }
            if accept_live {
                on_end(i);
            }
            if i == len {
                break;
            }
            let byte = iter.next().expect("input shorter than declared len");
            epoch = epoch.wrapping_add(1);
            next.clear();
            for &s in &current {
                if let State::Byte { ranges, next: tgt } = &self.states[s as usize] {
                    if ranges.iter().any(|&(lo, hi)| lo <= byte && byte <= hi) {
                        Self::add(
                            &self.states,
                            *tgt,
                            &mut next,
                            &mut stamps,
                            epoch,
                            &mut stack,
                        );
                    }
                }
            }
            std::mem::swap(&mut current, &mut next);
        }
    }

    /// Epsilon-closure insertion; returns true when the closure reaches the
    /// accept state.
    fn add(
        states: &[State],
        id: u32,
        list: &mut Vec<u32>,
        stamps: &mut [u32],
        epoch: u32,
        stack: &mut Vec<u32>,
    ) -> bool {
        let mut accept = false;
        stack.push(id);
        while let Some(s) = stack.pop() {
            if stamps[s as usize] == epoch {
                continue;
            }
            stamps[s as usize] = epoch;
            match &states[s as usize] {
                State::Split { a, b } => {
                    stack.push(*a);
                    stack.push(*b);
                }
                State::Goto { next } => stack.push(*next),
                State::Byte { .. } => list.push(s),
                State::Accept => {
                    accept = true;
                    list.push(s);
                }
            }
        }
        accept
    }

    /// All offsets where a match of the *forward* pattern starts, given this
    /// NFA compiled from the *reversed* expression. Offsets are returned
    /// ascending; at most `cap` lowest offsets are kept. Returns
    /// `(offsets, truncated)`.
    pub fn match_starts_reversed(&self, data: &[u8], cap: usize) -> (Vec<usize>, bool) {
        let n = data.len();
        // Ends over the reversed input arrive in increasing order, so starts
        // n - e arrive in decreasing order: a ring of the last `cap` pushes
        // retains exactly the lowest offsets.
        let mut ring: Vec<usize> = Vec::with_capacity(cap.min(4096));
        let mut count = 0usize;
        self.match_ends(data.iter().rev().copied(), n, |e| {
            let start = n - e;
            if start >= n {
                // An empty match at end-of-data has no valid offset.
                return;
            }
            if ring.len() < cap {
                ring.push(start);
            } else {
                ring[count % cap] = start;
            }
            count += 1;
        });
        let truncated = count > cap;
        if truncated {
            let split = count % cap;
            ring.rotate_left(split);
        }
        ring.reverse();
        (ring, truncated)
    }
}
