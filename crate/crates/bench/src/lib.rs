//! Shared fixtures for the criterion benchmarks.

use sentinel_core::crypto::{ExpandedKey, SecretKey, DEFAULT_ROUNDS};
use sentinel_core::presets::preset;
use sentinel_core::scenario::Scenario;

pub fn bench_key() -> ExpandedKey {
    ExpandedKey::new(&SecretKey([0x3C; 16]), DEFAULT_ROUNDS.into())
        .expect("default rounds are valid")
}

/// Blackhole preset cut down to 100 epochs with the attack at epoch 20.
pub fn short_blackhole() -> Scenario {
    let mut s = preset("blackhole").expect("built-in preset");
    s.run_ticks = 1_000_000;
    s.compromise[0].at = 200_000;
    s.metrics.rule_log = Some(false);
    s
}
