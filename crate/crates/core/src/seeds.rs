//! Counter-mode sub-seed derivation.
//!
//! Every run, phase, and sampling call in the workbench owns an independent
//! seed derived from a single base seed. Derivation is a SplitMix64 walk:
//! the base seed, a domain tag hash, and two counters are absorbed one
//! `mix` round each, so (domain, a, b) streams never collide in practice
//! and the mapping is reproducible across platforms.

/// One SplitMix64 output step.
fn mix(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a over the domain tag bytes.
fn tag_hash(tag: &str) -> u64 {
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for b in tag.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

/// Derive the sub-seed for counter pair `(a, b)` within `domain`.
pub fn derive_seed(base: u64, domain: &str, a: u64, b: u64) -> u64 {
    let mut state = base ^ tag_hash(domain);
    let mut out = mix(&mut state);
    state ^= a;
    out ^= mix(&mut state);
    state ^= b;
    out ^ mix(&mut state)
}
