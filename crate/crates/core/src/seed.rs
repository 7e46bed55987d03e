use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const DOMAIN_TAG: [u8; 16] = *b"esln/trajectory\0";

/// Stream seed for one trajectory. The master seed and index occupy disjoint
/// byte ranges, so the mapping is injective and needs no shared state.
pub fn derive_seed(master_seed: u64, trajectory_index: u64) -> [u8; 32] {
    let mut seed = [0u8; 32];
    seed[..8].copy_from_slice(&master_seed.to_le_bytes());
    seed[8..16].copy_from_slice(&trajectory_index.to_le_bytes());
    seed[16..].copy_from_slice(&DOMAIN_TAG);
    seed
}

pub fn trajectory_rng(master_seed: u64, trajectory_index: u64) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(derive_seed(master_seed, trajectory_index))
}
