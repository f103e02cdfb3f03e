//! Per-realization random streams. Each (master seed, realization, module)
//! triple maps to its own ChaCha stream, so draws do not depend on the
//! order realizations are scheduled in.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Module {
    ClimateSensitivity = 1,
    Pattern = 2,
}

pub fn stream(master_seed: u64, realization: u64, module: Module) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream((realization << 8) | module as u64);
    rng
}
