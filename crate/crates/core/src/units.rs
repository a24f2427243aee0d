//! dB / linear unit conversions used throughout the crate.

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

/// Splitmix64-based seed derivation so that independent RNG streams
/// (topology, per-slot fading, per-flow traffic) never overlap.
pub fn derive_seed(seed: u64, purpose: u64, index: u64) -> u64 {
    let mut x = seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(purpose)
        .wrapping_mul(0xBF58_476D_1CE4_E5B9)
        .wrapping_add(index);
    x ^= x >> 30;
    x = x.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x ^= x >> 27;
    x = x.wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dbm_round_trip() {
        for dbm in [-99.0, 0.0, 23.0, 46.0] {
            assert!((watts_to_dbm(dbm_to_watts(dbm)) - dbm).abs() < 1e-9);
        }
    }

    #[test]
    fn derived_seeds_differ_by_purpose_and_index() {
        assert_ne!(derive_seed(7, 0, 0), derive_seed(7, 1, 0));
        assert_ne!(derive_seed(7, 0, 0), derive_seed(7, 0, 1));
        assert_ne!(derive_seed(7, 0, 0), derive_seed(8, 0, 0));
    }
}
