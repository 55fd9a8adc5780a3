//! Watermarking and black-box verification for function-level code datasets.
//!
//! The toolkit selects low-complexity carrier snippets via a principal-
//! component suitability score, embeds variable-name-concatenation watermarks
//! through offset-safe renaming, and verifies suspicious code-completion
//! models with Fisher's exact test over comparative validation prompts.

pub mod embedding;
pub mod error;
pub mod fisher;
pub mod metrics;
pub mod selection;
pub mod syntax;

pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const GRAMMAR_VERSIONS: &str = "python 0.25, java 0.23";

/// FNV-1a over arbitrary bytes; used to fan a single run seed out to stages
/// and to key per-query simulator draws. Stable across platforms.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// Derive a stage-specific seed from the run seed and a stage name.
pub fn stage_seed(seed: u64, stage: &str) -> u64 {
    let mut bytes = seed.to_le_bytes().to_vec();
    bytes.extend_from_slice(stage.as_bytes());
    fnv1a(&bytes)
}
