//! Domain types describing a two-tier uplink/downlink experiment.
//!
//! A [`Scenario`] is an immutable value object: once validated it can be
//! shared freely between worker threads. Powers are linear watts,
//! intensities are per m², lengths are meters (see [`crate::units`]).

use serde::Serialize;
use thiserror::Error;

use crate::units::{self, UnitsError};

/// Base-station tier identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Tier {
    Macro,
    Small,
}

impl std::fmt::Display for Tier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Tier::Macro => write!(f, "macro"),
            Tier::Small => write!(f, "small"),
        }
    }
}

/// Per-tier transmit power, spatial intensity and lognormal shadowing moments.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TierParams {
    /// Transmit power in linear watts.
    pub tx_power_w: f64,
    /// Base stations per m².
    pub intensity_per_m2: f64,
    /// Mean of the shadowing normal in dB (μ_v).
    pub shadow_mean_db: f64,
    /// Standard deviation of the shadowing normal in dB (σ_v).
    pub shadow_std_db: f64,
}

impl TierParams {
    /// Build from configuration units (dBm, per km²). Shadowing defaults to none.
    pub fn from_config(
        tx_power_dbm: f64,
        intensity_per_km2: f64,
        shadow_mean_db: f64,
        shadow_std_db: f64,
    ) -> Result<Self, UnitsError> {
        Ok(Self {
            tx_power_w: units::dbm_to_watts(tx_power_dbm)?,
            intensity_per_m2: units::per_km2_to_per_m2(intensity_per_km2),
            shadow_mean_db,
            shadow_std_db,
        })
    }

    pub fn has_shadowing(&self) -> bool {
        self.shadow_mean_db != 0.0 || self.shadow_std_db > 0.0
    }
}

/// Device transmit power and spatial intensity.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DeviceParams {
    pub tx_power_w: f64,
    pub intensity_per_m2: f64,
}

impl DeviceParams {
    pub fn from_config(tx_power_dbm: f64, intensity_per_km2: f64) -> Result<Self, UnitsError> {
        Ok(Self {
            tx_power_w: units::dbm_to_watts(tx_power_dbm)?,
            intensity_per_m2: units::per_km2_to_per_m2(intensity_per_km2),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum WindowShape {
    Disk,
    Square,
}

/// How the finite simulation window controls edge bias.
///
/// `GuardRegion` evaluates probe devices only in the inner half-extent while
/// base stations and interferers fill the whole window; `Torus` wraps
/// distances around a square window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EdgePolicy {
    GuardRegion,
    Torus,
}

/// Finite sampling window for Monte Carlo deployments.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SimWindow {
    pub shape: WindowShape,
    /// Disk radius or square half-side, meters.
    pub half_extent_m: f64,
    pub edge_policy: EdgePolicy,
}

impl SimWindow {
    pub fn disk(radius_m: f64) -> Self {
        Self {
            shape: WindowShape::Disk,
            half_extent_m: radius_m,
            edge_policy: EdgePolicy::GuardRegion,
        }
    }

    pub fn square(half_side_m: f64) -> Self {
        Self {
            shape: WindowShape::Square,
            half_extent_m: half_side_m,
            edge_policy: EdgePolicy::GuardRegion,
        }
    }

    pub fn area_m2(&self) -> f64 {
        match self.shape {
            WindowShape::Disk => std::f64::consts::PI * self.half_extent_m * self.half_extent_m,
            WindowShape::Square => 4.0 * self.half_extent_m * self.half_extent_m,
        }
    }

    /// Extent of the region probe devices are drawn from.
    pub fn probe_half_extent_m(&self) -> f64 {
        match self.edge_policy {
            EdgePolicy::GuardRegion => 0.5 * self.half_extent_m,
            EdgePolicy::Torus => self.half_extent_m,
        }
    }
}

/// Joint downlink/uplink association outcome for one device,
/// ordered as (DL tier, UL tier).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AssociationCase {
    /// Case 1: DL macro, UL macro.
    MacroMacro,
    /// Case 2: DL macro, UL small — decoupled access.
    MacroSmall,
    /// Case 3: DL small, UL macro — zero probability under symmetric links.
    SmallMacro,
    /// Case 4: DL small, UL small.
    SmallSmall,
}

impl AssociationCase {
    pub const ALL: [AssociationCase; 4] = [
        AssociationCase::MacroMacro,
        AssociationCase::MacroSmall,
        AssociationCase::SmallMacro,
        AssociationCase::SmallSmall,
    ];

    pub fn from_tiers(dl: Tier, ul: Tier) -> Self {
        match (dl, ul) {
            (Tier::Macro, Tier::Macro) => AssociationCase::MacroMacro,
            (Tier::Macro, Tier::Small) => AssociationCase::MacroSmall,
            (Tier::Small, Tier::Macro) => AssociationCase::SmallMacro,
            (Tier::Small, Tier::Small) => AssociationCase::SmallSmall,
        }
    }

    /// 0-based position used for counting arrays.
    pub fn index(&self) -> usize {
        match self {
            AssociationCase::MacroMacro => 0,
            AssociationCase::MacroSmall => 1,
            AssociationCase::SmallMacro => 2,
            AssociationCase::SmallSmall => 3,
        }
    }

    /// Column label used in CSV output.
    pub fn label(&self) -> &'static str {
        match self {
            AssociationCase::MacroMacro => "case1_mm",
            AssociationCase::MacroSmall => "case2_ms",
            AssociationCase::SmallMacro => "case3_sm",
            AssociationCase::SmallSmall => "case4_ss",
        }
    }
}

/// Closed-form probabilities of the four association cases.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CaseProbabilities {
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub p4: f64,
}

impl CaseProbabilities {
    pub fn as_array(&self) -> [f64; 4] {
        [self.p1, self.p2, self.p3, self.p4]
    }

    pub fn get(&self, case: AssociationCase) -> f64 {
        self.as_array()[case.index()]
    }

    pub fn sum(&self) -> f64 {
        self.p1 + self.p2 + self.p3 + self.p4
    }
}

/// A Monte Carlo point estimate with a 95% normal-approximation interval.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub ci_halfwidth_95: f64,
    pub n_samples: u64,
}

/// Full experiment description.
#[derive(Debug, Clone, Serialize)]
pub struct Scenario {
    pub macro_tier: TierParams,
    pub small_tier: TierParams,
    pub device: DeviceParams,
    /// Path-loss exponent α, must exceed 2.
    pub path_loss_exponent: f64,
    /// Receiver noise power σ² in watts.
    pub noise_power_w: f64,
    /// System bandwidth B in Hz.
    pub bandwidth_hz: f64,
    pub window: SimWindow,
    pub master_seed: u64,
}

impl Scenario {
    /// P_M / P_S.
    pub fn power_ratio(&self) -> f64 {
        self.macro_tier.tx_power_w / self.small_tier.tx_power_w
    }

    /// (P_M / P_S)^(2/α) — the factor weighting macro intensity in the
    /// downlink association region.
    pub fn power_ratio_pow_2_alpha(&self) -> f64 {
        self.power_ratio().powf(2.0 / self.path_loss_exponent)
    }

    /// Shadowing-equivalent macro intensity per m².
    pub fn lambda_m_eff(&self) -> f64 {
        crate::geometry::effective_intensity(&self.macro_tier, self.path_loss_exponent)
    }

    /// Shadowing-equivalent small-cell intensity per m².
    pub fn lambda_s_eff(&self) -> f64 {
        crate::geometry::effective_intensity(&self.small_tier, self.path_loss_exponent)
    }

    /// Device intensity per m² (no shadowing moments are configured for
    /// devices, so the equivalent intensity is the raw one).
    pub fn lambda_d_eff(&self) -> f64 {
        self.device.intensity_per_m2
    }

    /// Intensity of the thinned uplink interferer process: one active
    /// device per base station, λ̃_M + λ̃_S.
    pub fn interferer_intensity(&self) -> f64 {
        self.lambda_m_eff() + self.lambda_s_eff()
    }

    /// Check every invariant, reporting all violations together.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let mut issues = Vec::new();
        if !(self.path_loss_exponent > 2.0) {
            issues.push(ValidationIssue::AlphaOutOfRange {
                alpha: self.path_loss_exponent,
            });
        }
        for (field, power) in [
            ("macro.tx_power", self.macro_tier.tx_power_w),
            ("small.tx_power", self.small_tier.tx_power_w),
            ("device.tx_power", self.device.tx_power_w),
        ] {
            if !(power > 0.0 && power.is_finite()) {
                issues.push(ValidationIssue::NonPositivePower {
                    field,
                    watts: power,
                });
            }
        }
        for (field, lam) in [
            ("macro.intensity", self.macro_tier.intensity_per_m2),
            ("small.intensity", self.small_tier.intensity_per_m2),
        ] {
            if !(lam >= 0.0 && lam.is_finite()) {
                issues.push(ValidationIssue::NegativeIntensity { field, value: lam });
            }
        }
        if !(self.device.intensity_per_m2 > 0.0 && self.device.intensity_per_m2.is_finite()) {
            issues.push(ValidationIssue::NonPositiveDeviceIntensity {
                value: self.device.intensity_per_m2,
            });
        }
        for (field, sigma) in [
            ("macro.shadow_std_db", self.macro_tier.shadow_std_db),
            ("small.shadow_std_db", self.small_tier.shadow_std_db),
        ] {
            if !(sigma >= 0.0 && sigma.is_finite()) {
                issues.push(ValidationIssue::NegativeShadowStd {
                    field,
                    value: sigma,
                });
            }
        }
        if !(self.noise_power_w >= 0.0 && self.noise_power_w.is_finite()) {
            issues.push(ValidationIssue::NegativeNoise {
                watts: self.noise_power_w,
            });
        }
        if !(self.bandwidth_hz > 0.0 && self.bandwidth_hz.is_finite()) {
            issues.push(ValidationIssue::NonPositiveBandwidth {
                hz: self.bandwidth_hz,
            });
        }
        if !(self.window.half_extent_m > 0.0 && self.window.half_extent_m.is_finite()) {
            issues.push(ValidationIssue::EmptyWindow {
                half_extent_m: self.window.half_extent_m,
            });
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(ScenarioError { issues })
        }
    }
}

/// One invariant violation found by [`Scenario::validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum ValidationIssue {
    AlphaOutOfRange { alpha: f64 },
    NonPositivePower { field: &'static str, watts: f64 },
    EmptyWindow { half_extent_m: f64 },
    NegativeIntensity { field: &'static str, value: f64 },
    NonPositiveDeviceIntensity { value: f64 },
    NegativeShadowStd { field: &'static str, value: f64 },
    NegativeNoise { watts: f64 },
    NonPositiveBandwidth { hz: f64 },
}

impl std::fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ValidationIssue::AlphaOutOfRange { alpha } => {
                write!(f, "path_loss_exponent must exceed 2, got {alpha}")
            }
            ValidationIssue::NonPositivePower { field, watts } => {
                write!(f, "{field} must be positive, got {watts} W")
            }
            ValidationIssue::EmptyWindow { half_extent_m } => {
                write!(f, "window half extent must be positive, got {half_extent_m} m")
            }
            ValidationIssue::NegativeIntensity { field, value } => {
                write!(f, "{field} must be ≥ 0 per m², got {value}")
            }
            ValidationIssue::NonPositiveDeviceIntensity { value } => {
                write!(f, "device.intensity must be > 0 per m², got {value}")
            }
            ValidationIssue::NegativeShadowStd { field, value } => {
                write!(f, "{field} must be ≥ 0 dB, got {value}")
            }
            ValidationIssue::NegativeNoise { watts } => {
                write!(f, "noise power must be ≥ 0 W, got {watts}")
            }
            ValidationIssue::NonPositiveBandwidth { hz } => {
                write!(f, "bandwidth must be positive, got {hz} Hz")
            }
        }
    }
}

/// All invariant violations of a scenario, reported together.
#[derive(Debug, Clone, Error)]
#[error("invalid scenario: {}", .issues.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("; "))]
pub struct ScenarioError {
    pub issues: Vec<ValidationIssue>,
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::units::thermal_noise_watts;

    pub(crate) fn base_scenario() -> Scenario {
        Scenario {
            macro_tier: TierParams::from_config(46.0, 1.0, 0.0, 0.0).unwrap(),
            small_tier: TierParams::from_config(20.0, 5.0, 0.0, 0.0).unwrap(),
            device: DeviceParams::from_config(20.0, 1.0e4).unwrap(),
            path_loss_exponent: 3.0,
            noise_power_w: thermal_noise_watts(20.0e6),
            bandwidth_hz: 20.0e6,
            window: SimWindow::disk(5000.0),
            master_seed: 42,
        }
    }

    #[test]
    fn valid_scenario_accepted() {
        base_scenario().validate().unwrap();
    }

    #[test]
    fn alpha_boundary_rejected() {
        let mut s = base_scenario();
        s.path_loss_exponent = 2.0;
        let err = s.validate().unwrap_err();
        assert!(matches!(
            err.issues[0],
            ValidationIssue::AlphaOutOfRange { alpha } if alpha == 2.0
        ));
    }

    #[test]
    fn zero_small_intensity_accepted() {
        // Degenerates to a single-tier network; still a valid scenario.
        let mut s = base_scenario();
        s.small_tier.intensity_per_m2 = 0.0;
        s.validate().unwrap();
    }

    #[test]
    fn all_violations_reported_together() {
        let mut s = base_scenario();
        s.path_loss_exponent = 1.5;
        s.macro_tier.tx_power_w = 0.0;
        s.window.half_extent_m = -1.0;
        let err = s.validate().unwrap_err();
        assert_eq!(err.issues.len(), 3, "{err}");
    }

    #[test]
    fn case_labels_cover_all() {
        let labels: Vec<_> = AssociationCase::ALL.iter().map(|c| c.label()).collect();
        assert_eq!(labels, ["case1_mm", "case2_ms", "case3_sm", "case4_ss"]);
        for (i, c) in AssociationCase::ALL.iter().enumerate() {
            assert_eq!(c.index(), i);
        }
    }

    #[test]
    fn window_probe_region() {
        let mut w = SimWindow::disk(4000.0);
        assert_eq!(w.probe_half_extent_m(), 2000.0);
        w.edge_policy = EdgePolicy::Torus;
        assert_eq!(w.probe_half_extent_m(), 4000.0);
        assert!((SimWindow::square(10.0).area_m2() - 400.0).abs() < 1e-12);
    }
}
