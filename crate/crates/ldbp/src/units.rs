//! Unit conversions, centralized so every module agrees on them.
//!
//! Internal convention: time in seconds, rates in Hz, distance in km,
//! power in watts (samples carry sqrt-watt amplitudes). Fiber loss is
//! stored in dB/km and converted to nepers once, here.

/// Planck constant in J.s (value used for the amplifier noise model).
pub const PLANCK_J_S: f64 = 6.626e-34;

/// dB/km to nepers/km (power attenuation exponent).
pub fn db_per_km_to_neper(alpha_db_per_km: f64) -> f64 {
    alpha_db_per_km * std::f64::consts::LN_10 / 10.0
}

/// dBm to watts: P_W = 10^((P_dBm - 30)/10).
pub fn dbm_to_watts(power_dbm: f64) -> f64 {
    10f64.powf((power_dbm - 30.0) / 10.0)
}

/// Linear power ratio to dB.
pub fn to_db(ratio: f64) -> f64 {
    10.0 * ratio.log10()
}

/// dB to linear power ratio.
pub fn from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// ps^2/km to s^2/km.
pub fn ps2_to_s2(beta2_ps2: f64) -> f64 {
    beta2_ps2 * 1e-24
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dbm_round_numbers() {
        assert!((dbm_to_watts(0.0) - 1e-3).abs() < 1e-18);
        assert!((dbm_to_watts(30.0) - 1.0).abs() < 1e-12);
        assert!((dbm_to_watts(3.0) - 1.9952623e-3).abs() < 1e-9);
    }

    #[test]
    fn neper_conversion() {
        // 0.2 dB/km over 80 km is 16 dB, i.e. a power factor of 10^1.6.
        let a = db_per_km_to_neper(0.2);
        assert!(((a * 80.0).exp() - 10f64.powf(1.6)).abs() < 1e-9);
    }
}
