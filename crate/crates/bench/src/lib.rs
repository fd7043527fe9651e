//! Shared fixtures for the criterion benches.

use coat_core::{generate, GenParams, Instance};

/// Deterministic maze instances of side `size`.
pub fn mazes(size: usize, count: u64) -> Vec<Instance> {
    (0..count)
        .map(|seed| generate(&GenParams::maze(size, size, 1), seed).expect("maze generation"))
        .collect()
}
