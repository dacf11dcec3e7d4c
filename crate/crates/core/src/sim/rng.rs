//! Seed derivation and per-path random streams.
//!
//! Every path owns a ChaCha8 stream selected by its index, so the draws for
//! path `j` never depend on how paths are scheduled across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::real::Real;

pub(crate) const TAG_VARIANCE: u64 = 0x7661_7269_616e_6365;
pub(crate) const TAG_SPOT: u64 = 0x0073_706f_7400_0001;
pub(crate) const TAG_FINE: u64 = 0x0066_696e_6500_0002;
pub(crate) const TAG_COARSE: u64 = 0x636f_6172_7365_0003;

/// Mixes a master seed with a tag into an independent 64-bit seed.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn path_rng(seed: u64, tag: u64, path: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, tag));
    rng.set_stream(path as u64);
    rng
}

fn fill_normals<T: Real>(rng: &mut ChaCha8Rng, out: &mut [T]) {
    for x in out {
        let z: f64 = rng.sample(StandardNormal);
        *x = T::lit(z);
    }
}

/// Two normals per step driving the variance process of `path`.
pub(crate) fn variance_normals<T: Real>(seed: u64, path: usize, out: &mut [T]) {
    fill_normals(&mut path_rng(seed, TAG_VARIANCE, path), out);
}

/// One normal per step for the spot's independent Brownian component.
pub(crate) fn spot_normals<T: Real>(seed: u64, path: usize, out: &mut [T]) {
    fill_normals(&mut path_rng(seed, TAG_SPOT, path), out);
}
