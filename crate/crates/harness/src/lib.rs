//! Experiment harness for the subspace-clustering library: sweep a parameter
//! grid, run generate -> solve -> verify -> cluster trials, and persist
//! plot-ready CSV/JSON tables whose bytes are reproducible from (config, seed).

pub mod config;
pub mod io;
pub mod sweep;
pub mod trial;

/// FNV-1a, 64-bit. Used for cell ids so identical parameters hash identically
/// across runs and platforms.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// splitmix64 finalizer; mixes seed material into independent stream keys.
pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Per-trial seed: decouples (run seed, cell, trial index).
pub fn trial_seed(run_seed: u64, cell_id: u64, trial: usize) -> u64 {
    mix(mix(run_seed ^ cell_id) ^ (trial as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15))
}
