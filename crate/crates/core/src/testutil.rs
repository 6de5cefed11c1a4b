//! Random instances shared by unit tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::channel::ChannelSet;
use crate::{CMatrix, CVector, C64};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_c64(rng: &mut ChaCha8Rng) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn random_cvec(rng: &mut ChaCha8Rng, len: usize) -> CVector {
    CVector::from_fn(len, |_, _| random_c64(rng))
}

pub fn random_channels(rng: &mut ChaCha8Rng, n: usize, m: usize, k: usize) -> ChannelSet {
    let h = random_cvec(rng, n * m);
    ChannelSet {
        ris_to_ap: CMatrix::from_iterator(n, m, h.iter().copied()),
        user_to_ris: (0..k).map(|_| random_cvec(rng, m)).collect(),
        user_to_ap: (0..k).map(|_| random_cvec(rng, n)).collect(),
    }
}
