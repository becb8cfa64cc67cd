//! Derivation of independent per-job seeds from one master seed.
//!
//! A job seed is a splitmix64 fold of `(master, stream, k_index, level,
//! trial)`. Each job depends only on its own coordinates, so adding k-points
//! or trials leaves the streams of existing jobs untouched.

/// Purpose of a random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    BetaMax = 1,
    BetaMin = 2,
    TrialInit = 3,
    TrialEval = 4,
    Calibration = 5,
    Qpe = 6,
}

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

pub fn fold(master: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(splitmix64(master), |h, p| splitmix64(h ^ splitmix64(*p)))
}

pub fn job_seed(master: u64, stream: Stream, k_index: usize, level: usize, trial: usize) -> u64 {
    fold(master, &[stream as u64, k_index as u64, level as u64, trial as u64])
}
