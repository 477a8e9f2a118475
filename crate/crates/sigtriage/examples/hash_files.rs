//! Exact and fuzzy hashing side by side.
//!
//! ```bash
//! cargo run -p sigtriage --example hash_files
//! ```

use sigtriage::{digest_bytes, digest_stream, fuzzy_hash};

fn main() {
    let sample = b"MZ\x90\x00 pretend this is a program".repeat(1024);

    // SHA-256 identifies exactly this byte sequence.
    let digest = digest_bytes(&sample);
    println!("sha256  {}", digest.hex());

    // Streaming produces the same digest no matter how the input is chunked.
    let streamed = digest_stream(&sample[..], 4096).unwrap();
    assert_eq!(streamed, digest);

    // The fuzzy signature tolerates small changes; its rendering is
    // blocksize:sig1:sig2.
    let sig = fuzzy_hash(&sample).unwrap();
    println!("ssdeep  {sig}");

    // Flip one byte: the digest becomes unrelated, the fuzzy signature
    // barely moves.
    let mut tweaked = sample.clone();
    tweaked[100] ^= 0xff;
    println!();
    println!("sha256' {}", digest_bytes(&tweaked).hex());
    println!("ssdeep' {}", fuzzy_hash(&tweaked).unwrap());
}
