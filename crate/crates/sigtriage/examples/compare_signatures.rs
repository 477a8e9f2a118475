//! Fuzzy-hash similarity under mutation: how the 0-100 score reacts to
//! appends, flips, and wholesale changes.
//!
//! ```bash
//! cargo run -p sigtriage --example compare_signatures
//! ```

use rand::{Rng, SeedableRng};
use sigtriage::{fuzzy_compare, fuzzy_hash};

fn main() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2021);
    let mut base = vec![0u8; 64 * 1024];
    rng.fill(&mut base[..]);
    let base_sig = fuzzy_hash(&base).unwrap();
    println!("base               {base_sig}");

    // Identical data: 100.
    println!(
        "self               {:>3}",
        fuzzy_compare(&base_sig, &base_sig)
    );

    // Append 1%: high similarity, typically >= 90.
    let mut appended = base.clone();
    let mut extra = vec![0u8; base.len() / 100];
    rng.fill(&mut extra[..]);
    appended.extend_from_slice(&extra);
    let appended_sig = fuzzy_hash(&appended).unwrap();
    println!(
        "append 1%          {:>3}",
        fuzzy_compare(&base_sig, &appended_sig)
    );

    // Flip a single byte.
    let mut flipped = base.clone();
    flipped[base.len() / 2] ^= 0x55;
    let flipped_sig = fuzzy_hash(&flipped).unwrap();
    println!(
        "single byte flip   {:>3}",
        fuzzy_compare(&base_sig, &flipped_sig)
    );

    // An unrelated file of the same size: 0.
    let mut other = vec![0u8; base.len()];
    rng.fill(&mut other[..]);
    let other_sig = fuzzy_hash(&other).unwrap();
    println!(
        "unrelated file     {:>3}",
        fuzzy_compare(&base_sig, &other_sig)
    );
}
