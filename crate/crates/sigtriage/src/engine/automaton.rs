//! Aho-Corasick automaton over extracted atoms.
//!
//! Built once per compiled rule set: a byte trie with failure links folded
//! into a dense transition table, so scanning is one table load per input
//! byte no matter how many atoms are registered. Outputs are merged through
//! the failure chain at build time; every occurrence of every atom is
//! reported, overlaps included.

use std::collections::VecDeque;

pub struct AhoCorasick {
    transitions: Vec<[u32; 256]>,
    outputs: Vec<Vec<u32>>,
}

impl AhoCorasick {
    /// Builds the automaton; every atom must be non-empty.
    #[allow(clippy::needless_range_loop)] // rows of two states are walked in lockstep
    pub fn build<A: AsRef<[u8]>>(atoms: &[A]) -> AhoCorasick {
        let mut transitions: Vec<[u32; 256]> = vec![[u32::MAX; 256]];
        let mut outputs: Vec<Vec<u32>> = vec![Vec::new()];

        for (id, atom) in atoms.iter().enumerate() {
            let bytes = atom.as_ref();
            debug_assert!(!bytes.is_empty(), "atoms must be non-empty");
            let mut state = 0usize;
            for &b in bytes {
                let next = transitions[state][b as usize];
                state = if next == u32::MAX {
                    transitions.push([u32::MAX; 256]);
                    outputs.push(Vec::new());
                    let new = (transitions.len() - 1) as u32;
                    transitions[state][b as usize] = new;
                    new as usize
                } else {
                    next as usize
                };
            }
            outputs[state].push(id as u32);
        }

        // BFS: resolve failure links and flatten them into the table.
        let mut fail = vec![0u32; transitions.len()];
        let mut queue = VecDeque::new();
        for b in 0..256 {
            match transitions[0][b] {
                u32::MAX => transitions[0][b] = 0,
                child => queue.push_back(child),
            }
        }
        while let Some(state) = queue.pop_front() {
            let f = fail[state as usize] as usize;
            let inherited = outputs[f].clone();
            outputs[state as usize].extend(inherited);
            for b in 0..256 {
                let child = transitions[state as usize][b];
                if child == u32::MAX {
                    transitions[state as usize][b] = transitions[f][b];
                } else {
                    fail[child as usize] = transitions[f][b];
                    queue.push_back(child);
                }
            }
        }

        AhoCorasick {
            transitions,
            outputs,
        }
    }

    /// Runs over `data`, invoking `on_hit(atom_id, end_index)` for every atom
    /// occurrence; `end_index` is the index of the occurrence's last byte.
    pub fn scan(&self, data: &[u8], mut on_hit: impl FnMut(u32, usize)) {
        let mut state = 0u32;
        for (i, &b) in data.iter().enumerate() {
            state = self.transitions[state as usize][b as usize];
            let outs = &self.outputs[state as usize];
            if !outs.is_empty() {
                for &id in outs {
                    on_hit(id, i);
                }
            }
        }
    }
}
