//! Counter-based random number generation. Every draw is a pure function of
//! (seed, path, step, component), so path generation is reproducible
//! bit-for-bit regardless of evaluation order or thread count.

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;
const MIX_PATH: u64 = 0xd134_2543_de82_ef95;
const MIX_STEP: u64 = 0x2545_f491_4f6c_dd1d;
const MIX_COMP: u64 = 0x9e6c_63d0_876a_68ef;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[inline]
fn key(seed: u64, path: u64, step: u64, comp: u64) -> u64 {
    let mut h = mix64(seed ^ GOLDEN);
    h = mix64(h ^ path.wrapping_mul(MIX_PATH));
    h = mix64(h ^ step.wrapping_mul(MIX_STEP));
    mix64(h ^ comp.wrapping_mul(MIX_COMP))
}

/// Maps a u64 to the open interval (0, 1).
#[inline]
fn to_unit(x: u64) -> f64 {
    ((x >> 11) as f64 + 0.5) * (1.0 / 9007199254740992.0) // 2^-53
}

/// Standard normal draw for the given counter coordinates, via Box-Muller on
/// two decorrelated sub-streams of the same key.
#[inline]
pub fn standard_normal(seed: u64, path: u64, step: u64, comp: u64) -> f64 {
    let h = key(seed, path, step, comp);
    let u1 = to_unit(mix64(h ^ 0x5851_f42d_4c95_7f2d));
    let u2 = to_unit(mix64(h ^ 0x1405_7b7e_f767_814f));
    (-2.0 * u1.ln()).sqrt() * (2.0 * core::f64::consts::PI * u2).cos()
}
