//! Scenario ingestion from TOML.
//!
//! Config files speak operator units — dBm and per-km² — and are converted
//! to the library's internal units on load. Unknown keys are hard errors so
//! typos cannot silently fall back to defaults.
//!
//! ```toml
//! master_seed = 42
//! path_loss_exponent = 3.0
//! bandwidth_hz = 20.0e6
//! # noise_dbm = -101.0        # default: thermal floor at the bandwidth
//!
//! [macro]
//! tx_power_dbm = 46.0
//! intensity_per_km2 = 1.0
//! # shadow_mean_db = 0.0
//! # shadow_std_db = 0.0
//!
//! [small]
//! tx_power_dbm = 20.0
//! intensity_per_km2 = 5.0
//!
//! [device]
//! tx_power_dbm = 20.0
//! intensity_per_km2 = 10000.0
//!
//! [window]                    # optional; sized automatically when absent
//! shape = "disk"              # "disk" | "square"
//! # half_extent_m = 5000.0    # radius or half-side; omit for auto
//! edge_policy = "guard_region"  # "guard_region" | "torus"
//! ```

use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::geometry::auto_window_radius_m;
use crate::scenario::{
    DeviceParams, EdgePolicy, Scenario, ScenarioError, SimWindow, TierParams, WindowShape,
};
use crate::units::{dbm_to_watts, thermal_noise_watts, UnitsError};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error(transparent)]
    Units(#[from] UnitsError),
    #[error(transparent)]
    Invalid(#[from] ScenarioError),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    #[serde(default)]
    master_seed: u64,
    path_loss_exponent: f64,
    bandwidth_hz: f64,
    /// Receiver noise; defaults to the thermal floor at `bandwidth_hz`.
    noise_dbm: Option<f64>,
    #[serde(rename = "macro")]
    macro_tier: TierSection,
    small: TierSection,
    device: DeviceSection,
    window: Option<WindowSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TierSection {
    tx_power_dbm: f64,
    intensity_per_km2: f64,
    #[serde(default)]
    shadow_mean_db: f64,
    #[serde(default)]
    shadow_std_db: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DeviceSection {
    tx_power_dbm: f64,
    intensity_per_km2: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct WindowSection {
    #[serde(default)]
    shape: ShapeField,
    /// Omit for automatic sizing from the sparsest tier.
    half_extent_m: Option<f64>,
    #[serde(default)]
    edge_policy: EdgeField,
}

#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
enum ShapeField {
    #[default]
    Disk,
    Square,
}

#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
enum EdgeField {
    #[default]
    GuardRegion,
    Torus,
}

impl ScenarioFile {
    fn into_scenario(self) -> Result<Scenario, ConfigError> {
        let macro_tier = TierParams::from_config(
            self.macro_tier.tx_power_dbm,
            self.macro_tier.intensity_per_km2,
            self.macro_tier.shadow_mean_db,
            self.macro_tier.shadow_std_db,
        )?;
        let small_tier = TierParams::from_config(
            self.small.tx_power_dbm,
            self.small.intensity_per_km2,
            self.small.shadow_mean_db,
            self.small.shadow_std_db,
        )?;
        let device =
            DeviceParams::from_config(self.device.tx_power_dbm, self.device.intensity_per_km2)?;
        let noise_power_w = match self.noise_dbm {
            Some(dbm) => dbm_to_watts(dbm)?,
            None => thermal_noise_watts(self.bandwidth_hz),
        };

        let alpha = self.path_loss_exponent;
        let auto_radius = || {
            let lam_m = crate::geometry::effective_intensity(&macro_tier, alpha);
            let lam_s = crate::geometry::effective_intensity(&small_tier, alpha);
            let lam_min = match (lam_m > 0.0, lam_s > 0.0) {
                (true, true) => lam_m.min(lam_s),
                (true, false) => lam_m,
                (false, true) => lam_s,
                (false, false) => 0.0,
            };
            auto_window_radius_m(lam_min)
        };
        let window = match self.window {
            None => SimWindow::disk(auto_radius()),
            Some(w) => SimWindow {
                shape: match w.shape {
                    ShapeField::Disk => WindowShape::Disk,
                    ShapeField::Square => WindowShape::Square,
                },
                half_extent_m: w.half_extent_m.unwrap_or_else(auto_radius),
                edge_policy: match w.edge_policy {
                    EdgeField::GuardRegion => EdgePolicy::GuardRegion,
                    EdgeField::Torus => EdgePolicy::Torus,
                },
            },
        };

        let scenario = Scenario {
            macro_tier,
            small_tier,
            device,
            path_loss_exponent: alpha,
            noise_power_w,
            bandwidth_hz: self.bandwidth_hz,
            window,
            master_seed: self.master_seed,
        };
        scenario.validate()?;
        Ok(scenario)
    }
}

/// Parse and validate a scenario from TOML text.
pub fn scenario_from_toml_str(text: &str) -> Result<Scenario, ConfigError> {
    let file: ScenarioFile = toml::from_str(text)?;
    file.into_scenario()
}

/// Parse and validate a scenario from a file path.
pub fn scenario_from_path<P: AsRef<Path>>(path: P) -> Result<Scenario, ConfigError> {
    let text = std::fs::read_to_string(&path).map_err(|source| ConfigError::Io {
        path: path.as_ref().display().to_string(),
        source,
    })?;
    scenario_from_toml_str(&text)
}
