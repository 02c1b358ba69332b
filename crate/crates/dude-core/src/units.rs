//! Unit conversions at the configuration boundary.
//!
//! Inside the library every power is linear watts, every length is meters
//! and every intensity is points per m². dBm and per-km² values exist only
//! in config files and report output.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum UnitsError {
    #[error("power must be finite, got {0}")]
    NonFinitePower(f64),
    #[error("power must be positive to express in dBm, got {0} W")]
    NonPositivePower(f64),
}

/// Square meters per square kilometer.
pub const M2_PER_KM2: f64 = 1.0e6;

/// dBm → linear watts: 10^((p − 30)/10).
pub fn dbm_to_watts(p_dbm: f64) -> Result<f64, UnitsError> {
    if !p_dbm.is_finite() {
        return Err(UnitsError::NonFinitePower(p_dbm));
    }
    Ok(10f64.powf((p_dbm - 30.0) / 10.0))
}

/// Linear watts → dBm. Inverse of [`dbm_to_watts`].
pub fn watts_to_dbm(p_w: f64) -> Result<f64, UnitsError> {
    if !p_w.is_finite() {
        return Err(UnitsError::NonFinitePower(p_w));
    }
    if p_w <= 0.0 {
        return Err(UnitsError::NonPositivePower(p_w));
    }
    Ok(10.0 * p_w.log10() + 30.0)
}

pub fn per_km2_to_per_m2(v: f64) -> f64 {
    v / M2_PER_KM2
}

pub fn per_m2_to_per_km2(v: f64) -> f64 {
    v * M2_PER_KM2
}

/// Thermal noise floor over a bandwidth: −174 dBm/Hz + 10·log10(B).
pub fn thermal_noise_watts(bandwidth_hz: f64) -> f64 {
    dbm_to_watts(-174.0 + 10.0 * bandwidth_hz.log10()).expect("finite bandwidth")
}
