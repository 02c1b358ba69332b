//! Link-budget sampling: power-law path loss, lognormal shadowing,
//! Rayleigh fading, and uplink SINR assembly.

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

/// Links shorter than this are clamped before applying d^(−α); a probe
/// device may land arbitrarily close to a base station and the pure
/// power-law gain is singular at zero.
pub const MIN_LINK_DISTANCE_M: f64 = 0.1;

/// One sampled link: distance plus multiplicative fading and shadowing.
#[derive(Debug, Clone, Copy)]
pub struct LinkSample {
    /// Meters, already clamped to [`MIN_LINK_DISTANCE_M`].
    pub distance_m: f64,
    /// Unit-mean exponential power fading h.
    pub fading: f64,
    /// Lognormal shadowing multiplier χ.
    pub shadow: f64,
}

impl LinkSample {
    pub fn new(distance_m: f64, fading: f64, shadow: f64) -> Self {
        Self {
            distance_m: distance_m.max(MIN_LINK_DISTANCE_M),
            fading,
            shadow,
        }
    }

    /// Deterministic link with unit fading and shadowing.
    pub fn bare(distance_m: f64) -> Self {
        Self::new(distance_m, 1.0, 1.0)
    }
}

/// Instantaneous received power P·h·χ·d^(−α).
pub fn received_power(tx_power_w: f64, link: &LinkSample, alpha: f64) -> f64 {
    tx_power_w * link.fading * link.shadow * link.distance_m.powf(-alpha)
}

/// Fading-averaged received power P·χ·d^(−α) — the association metric.
pub fn mean_received_power(tx_power_w: f64, distance_m: f64, shadow: f64, alpha: f64) -> f64 {
    tx_power_w * shadow * distance_m.max(MIN_LINK_DISTANCE_M).powf(-alpha)
}

/// Uplink SINR at the serving base station: every transmitter (the device
/// and the interferers) sends with the same device power.
pub fn ul_sinr(
    serving: &LinkSample,
    device_power_w: f64,
    interferers: &[LinkSample],
    noise_w: f64,
    alpha: f64,
) -> f64 {
    let signal = received_power(device_power_w, serving, alpha);
    let interference: f64 = interferers
        .iter()
        .map(|l| received_power(device_power_w, l, alpha))
        .sum();
    signal / (interference + noise_w)
}

/// Unit-mean exponential fading draw.
pub fn sample_fading<R: Rng>(rng: &mut R) -> f64 {
    Exp1.sample(rng)
}

/// Lognormal shadowing multiplier 10^(X/10), X ~ N(μ_db, σ_db²).
pub fn sample_shadow<R: Rng>(mean_db: f64, std_db: f64, rng: &mut R) -> f64 {
    let x: f64 = StandardNormal.sample(rng);
    10f64.powf((mean_db + std_db * x) / 10.0)
}
