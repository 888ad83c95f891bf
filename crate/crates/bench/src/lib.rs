//! Seeded input generators shared by the benchmark targets.

use rand::prelude::*;

use v6lens_core::addr::{Ip6, Prefix};
use v6lens_core::prefix_map::{PrefixTable, TableBuilder};

/// Addresses clustered under 2001:db8::/32 so prefix lookups mostly hit.
pub fn clustered_addresses(n: usize, seed: u64) -> Vec<Ip6> {
    let mut rng = StdRng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            Ip6::from_bits(
                0x2001_0db8_0000_0000_0000_0000_0000_0000u128
                    | (u128::from(rng.random::<u32>() & 0xFFF) << 80)
                    | u128::from(rng.random::<u64>()),
            )
        })
        .collect()
}

/// A frozen LPM table over `n` mixed-length prefixes in the same cluster.
pub fn clustered_table(n: usize, seed: u64) -> PrefixTable<u32> {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut builder = TableBuilder::new();
    for value in 0..n as u32 {
        let bits = 0x2001_0db8_0000_0000_0000_0000_0000_0000u128
            | (u128::from(rng.random::<u32>() & 0xFFF) << 80)
            | u128::from(rng.random::<u64>());
        let len = rng.random_range(16..=64u8);
        builder.insert(Prefix::new(Ip6::from_bits(bits), len).unwrap(), value);
    }
    builder.freeze()
}

/// An observation log with roughly `dup_pool` distinct addresses.
pub fn observation_log(lines: usize, dup_pool: u64, seed: u64) -> String {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut out = String::with_capacity(lines * 48);
    for i in 0..lines {
        let idx = rng.random_range(0..dup_pool);
        let addr = Ip6::from_bits(
            0x2001_0db8_0000_0000_0000_0000_0000_0000u128 | u128::from(idx).wrapping_mul(0x9E37),
        );
        out.push_str(&format!("{i},{addr},vp-0\n"));
    }
    out
}
