//! Seeded random streams. Each pipeline stage draws from its own ChaCha
//! stream so that adding or skipping a stage never shifts another stage's
//! randomness.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StageRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stage {
    Init = 1,
    StepOne = 2,
    StepTwo = 3,
    Finetune = 4,
    Probe = 5,
    Split = 6,
    Synthetic = 7,
    ProbeInit = 8,
}

pub fn stage_rng(seed: u64, stage: Stage) -> StageRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stage as u64);
    rng
}
