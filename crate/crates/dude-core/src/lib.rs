//! Two-tier cellular uplink/downlink decoupling: closed-form association
//! probabilities, conditional serving-distance laws and uplink spectral
//! efficiency, each verified by an independent Monte Carlo engine over
//! Poisson and regular-grid deployments.
//!
//! Module map:
//! - [`scenario`] / [`config`] / [`units`] — experiment description and ingest
//! - [`geometry`] — point processes, displacement intensities, distance laws
//! - [`channel`] — path loss, fading, shadowing, SINR assembly
//! - [`association`] — DUDe/DRP decision rules and case probabilities
//! - [`quadrature`] — adaptive Gauss–Kronrod integration
//! - [`analytic`] — distance laws, Laplace functional, spectral efficiency
//! - [`montecarlo`] — deterministic parallel estimators

pub mod analytic;
pub mod association;
pub mod channel;
pub mod config;
pub mod geometry;
pub mod montecarlo;
pub mod quadrature;
pub mod scenario;
pub mod units;

pub use analytic::{
    case2_ccdf_dude, case2_pdf, laplace_functional_exponent, spectral_efficiency_case2,
    ul_throughput_case2, AnalyticError, Case2DistanceLaw, SeValue, Throughput, ThroughputContext,
};
pub use association::{
    associate_drp, associate_dude, case2_peak_density_ratio, case_probabilities, AssociationError,
    AssociationOutcome, AssociationPolicy, ShadowTable,
};
pub use config::{scenario_from_path, scenario_from_toml_str, ConfigError};
pub use geometry::{
    effective_intensity, nearest_distance, nearest_distance_cdf, nearest_distance_pdf, sample_grid,
    sample_ppp, thinning_probability, Deployment, GeometryError, GridSpec, Point,
};
pub use montecarlo::{
    estimate_case_probs_grid, estimate_case_probs_ppp, estimate_spectral_efficiency_case2,
    grid_equivalent_scenario, sample_case2_distances, CaseProbEstimates, EmpiricalDistribution,
    EstimatorMode, McConfig, McError, SeEstimate,
};
pub use quadrature::{integrate, interference_constant, QuadError, QuadResult, QuadSpec};
pub use scenario::{
    AssociationCase, CaseProbabilities, DeviceParams, EdgePolicy, Estimate, Scenario,
    ScenarioError, SimWindow, Tier, TierParams, WindowShape,
};
pub use units::{dbm_to_watts, thermal_noise_watts, watts_to_dbm};
