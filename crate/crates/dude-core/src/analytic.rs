//! Closed-form uplink performance of decoupled-access (Case-2) devices:
//! conditional serving-distance laws, the interference Laplace functional,
//! spectral efficiency, and throughput under both association policies.

use std::cell::RefCell;
use std::f64::consts::PI;

use thiserror::Error;

use crate::association::{case_probabilities, AssociationError, AssociationPolicy};
use crate::quadrature::{integrate, interference_constant, QuadError, QuadSpec, Transform};
use crate::scenario::Scenario;

const LOG2_E: f64 = std::f64::consts::LOG2_E;

#[derive(Debug, Clone, Error)]
pub enum AnalyticError {
    #[error("conditioning on decoupled access is impossible: Pr(Case 2) = 0")]
    Case2ProbabilityZero,
    #[error("no interference and no noise: spectral efficiency diverges")]
    InfiniteCapacity,
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error(transparent)]
    Association(#[from] AssociationError),
}

/// Conditional law of the uplink serving distance for Case-2 devices.
///
/// Under DUDe the serving base station is the nearest small cell; under DRP
/// it is the downlink-winning macro cell. Both laws condition on the
/// decoupled-access event, so each pdf integrates to 1.
#[derive(Debug, Clone, Copy)]
pub struct Case2DistanceLaw {
    pub policy: AssociationPolicy,
    lambda_m: f64,
    lambda_s: f64,
    /// (P_M/P_S)^(2/α).
    k: f64,
    p2: f64,
}

impl Case2DistanceLaw {
    pub fn new(policy: AssociationPolicy, s: &Scenario) -> Result<Self, AnalyticError> {
        let probs = case_probabilities(s)?;
        if probs.p2 <= 0.0 {
            return Err(AnalyticError::Case2ProbabilityZero);
        }
        Ok(Self {
            policy,
            lambda_m: s.lambda_m_eff(),
            lambda_s: s.lambda_s_eff(),
            k: s.power_ratio_pow_2_alpha(),
            p2: probs.p2,
        })
    }

    pub fn case2_probability(&self) -> f64 {
        self.p2
    }

    /// Conditional pdf of the serving distance at `x` meters.
    pub fn pdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        let x2 = x * x;
        let v = match self.policy {
            AssociationPolicy::Dude => {
                let bracket = (-PI * self.lambda_m * x2).exp()
                    - (-PI * self.lambda_m * self.k * x2).exp();
                bracket * 2.0 * PI * self.lambda_s * x * (-PI * self.lambda_s * x2).exp()
            }
            AssociationPolicy::Drp => {
                let bracket = (-PI * self.lambda_s / self.k * x2).exp()
                    - (-PI * self.lambda_s * x2).exp();
                bracket * 2.0 * PI * self.lambda_m * x * (-PI * self.lambda_m * x2).exp()
            }
        };
        v / self.p2
    }

    /// Conditional ccdf Pr(D > x | Case 2); the tail integral of the pdf has
    /// an elementary antiderivative, evaluated here exactly.
    pub fn ccdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 1.0;
        }
        let x2 = x * x;
        let (a_rate, b_rate, a_coef, b_coef) = self.tail_terms();
        (a_coef * (-PI * a_rate * x2).exp() - b_coef * (-PI * b_rate * x2).exp()) / self.p2
    }

    pub fn cdf(&self, x: f64) -> f64 {
        1.0 - self.ccdf(x)
    }

    /// First moment, from the exact tail integral: E[D] = ∫₀^∞ ccdf.
    pub fn mean(&self) -> f64 {
        let (a_rate, b_rate, a_coef, b_coef) = self.tail_terms();
        (a_coef / (2.0 * a_rate.sqrt()) - b_coef / (2.0 * b_rate.sqrt())) / self.p2
    }

    /// Rates and coefficients of the two Gaussian tail terms:
    /// ccdf(x)·p2 = a_coef·exp(−π·a_rate·x²) − b_coef·exp(−π·b_rate·x²).
    fn tail_terms(&self) -> (f64, f64, f64, f64) {
        match self.policy {
            AssociationPolicy::Dude => {
                let a_rate = self.lambda_s + self.lambda_m;
                let b_rate = self.lambda_s + self.k * self.lambda_m;
                (a_rate, b_rate, self.lambda_s / a_rate, self.lambda_s / b_rate)
            }
            AssociationPolicy::Drp => {
                let a_rate = self.lambda_m + self.lambda_s / self.k;
                let b_rate = self.lambda_m + self.lambda_s;
                (a_rate, b_rate, self.lambda_m / a_rate, self.lambda_m / b_rate)
            }
        }
    }

    /// Weight of the spectral-efficiency outer integrand: pdf(x)·p2, kept
    /// unnormalized to match the double-integral form.
    fn weight(&self, x: f64) -> f64 {
        self.pdf(x) * self.p2
    }

    /// Exponential decay rate (in x²) of the slowest tail term.
    fn tail_rate(&self) -> f64 {
        PI * self.tail_terms().0
    }

    /// Linear coefficient bounding the weight: weight(x) ≤ coef·x·exp(−rate·x²).
    fn envelope_coef(&self) -> f64 {
        match self.policy {
            AssociationPolicy::Dude => 2.0 * PI * self.lambda_s,
            AssociationPolicy::Drp => 2.0 * PI * self.lambda_m,
        }
    }
}

/// ccdf of the serving distance for DUDe, conditioned on decoupled access.
pub fn case2_ccdf_dude(x: f64, s: &Scenario) -> Result<f64, AnalyticError> {
    Ok(Case2DistanceLaw::new(AssociationPolicy::Dude, s)?.ccdf(x))
}

/// Conditional serving-distance pdf for either policy.
pub fn case2_pdf(policy: AssociationPolicy, x: f64, s: &Scenario) -> Result<f64, AnalyticError> {
    Ok(Case2DistanceLaw::new(policy, s)?.pdf(x))
}

/// Exponent of the interference Laplace functional in reduced form:
/// ln L(s) = −π·λ̃_I·s^(2/α)·K(α).
pub fn laplace_exponent_reduced(
    s_arg: f64,
    interferer_intensity: f64,
    alpha: f64,
) -> Result<f64, QuadError> {
    let k = interference_constant(alpha)?;
    if s_arg == 0.0 {
        return Ok(0.0);
    }
    Ok(-PI * interferer_intensity * s_arg.powf(2.0 / alpha) * k)
}

/// Same exponent evaluated by direct quadrature of
/// −2π·λ̃_I·∫₀^∞ (1 − 1/(1 + s·v^(−α)))·v dv.
pub fn laplace_exponent_quadrature(
    s_arg: f64,
    interferer_intensity: f64,
    alpha: f64,
    spec: &QuadSpec,
) -> Result<f64, QuadError> {
    if !(alpha > 2.0) {
        return Err(QuadError::AlphaOutOfRange { alpha });
    }
    if s_arg == 0.0 {
        return Ok(0.0);
    }
    let r = integrate(
        |v| {
            let va = v.powf(alpha);
            v * (s_arg / (s_arg + va))
        },
        0.0,
        f64::INFINITY,
        spec,
    )?;
    Ok(-2.0 * PI * interferer_intensity * r.value)
}

/// Exponent of the interference Laplace functional for a scenario's thinned
/// interferer field (reduced form).
pub fn laplace_functional_exponent(s_arg: f64, s: &Scenario) -> Result<f64, QuadError> {
    laplace_exponent_reduced(s_arg, s.interferer_intensity(), s.path_loss_exponent)
}

/// The scenario-independent inputs of the spectral-efficiency integrals.
#[derive(Debug, Clone, Copy)]
pub struct SeParams {
    pub lambda_m: f64,
    pub lambda_s: f64,
    /// (P_M/P_S)^(2/α).
    pub power_ratio_2_alpha: f64,
    /// Intensity of the uplink interferer field, λ̃_M + λ̃_S by thinning.
    pub interferer_intensity: f64,
    pub alpha: f64,
    /// σ²/P_d, the noise exponent scale.
    pub noise_over_device_power: f64,
}

impl SeParams {
    pub fn from_scenario(s: &Scenario) -> Self {
        Self {
            lambda_m: s.lambda_m_eff(),
            lambda_s: s.lambda_s_eff(),
            power_ratio_2_alpha: s.power_ratio_pow_2_alpha(),
            interferer_intensity: s.interferer_intensity(),
            alpha: s.path_loss_exponent,
            noise_over_device_power: s.noise_power_w / s.device.tx_power_w,
        }
    }

    fn law(&self, policy: AssociationPolicy) -> Result<Case2DistanceLaw, AnalyticError> {
        let lam_m = self.lambda_m;
        let lam_s = self.lambda_s;
        if lam_m + lam_s <= 0.0 {
            return Err(AnalyticError::Association(AssociationError::EmptyTier));
        }
        let k = self.power_ratio_2_alpha;
        let p4 = if lam_s > 0.0 { lam_s / (lam_s + k * lam_m) } else { 0.0 };
        let p2 = lam_s / (lam_s + lam_m) - p4;
        if p2 <= 0.0 {
            return Err(AnalyticError::Case2ProbabilityZero);
        }
        Ok(Case2DistanceLaw {
            policy,
            lambda_m: lam_m,
            lambda_s: lam_s,
            k,
            p2,
        })
    }
}

/// Spectral efficiency value with the quadrature error estimate.
#[derive(Debug, Clone, Copy)]
pub struct SeValue {
    /// E[log₂(1+SINR)] over Case-2 devices, bits/s/Hz.
    pub spectral_efficiency: f64,
    /// Estimated absolute numerical error, including the reported outer
    /// truncation bound.
    pub quad_error: f64,
}

/// Case-2 uplink spectral efficiency by nested quadrature of the
/// coverage-probability double integral.
pub fn spectral_efficiency_case2(
    policy: AssociationPolicy,
    s: &Scenario,
) -> Result<SeValue, AnalyticError> {
    spectral_efficiency_case2_with(policy, s, &se_default_spec())
}

pub fn spectral_efficiency_case2_with(
    policy: AssociationPolicy,
    s: &Scenario,
    outer_spec: &QuadSpec,
) -> Result<SeValue, AnalyticError> {
    spectral_efficiency_from_params(policy, &SeParams::from_scenario(s), outer_spec)
}

/// Default tolerances for the double integral; the MC cross-check dominates
/// the error budget, so the quadrature target is modest.
pub fn se_default_spec() -> QuadSpec {
    QuadSpec {
        rel_tol: 1e-8,
        abs_tol: 1e-12,
        max_depth: 4000,
        transform: Transform::None,
    }
}

/// Core evaluation: outer integral over the serving distance y, inner
/// integral over the rate threshold t, with the inner tolerance 10× tighter.
///
/// C = log₂(e)/p2 · ∫₀^∞ inner(y)·weight(y) dy, where
/// inner(y) = ∫₀^∞ exp(−πλ̃_I·K(α)·(eᵗ−1)^(2/α)·y²) · exp(−(eᵗ−1)·y^α·σ²/P_d) dt
/// and weight is the unnormalized conditional distance density.
pub fn spectral_efficiency_from_params(
    policy: AssociationPolicy,
    p: &SeParams,
    outer_spec: &QuadSpec,
) -> Result<SeValue, AnalyticError> {
    let law = p.law(policy)?;
    let noise = p.noise_over_device_power;
    if p.interferer_intensity <= 0.0 && noise <= 0.0 {
        return Err(AnalyticError::InfiniteCapacity);
    }
    let ka = interference_constant(p.alpha)?;

    // Truncate the outer integral where the weight envelope has fallen
    // twelve decades below its peak.
    let rate = law.tail_rate();
    let coef = law.envelope_coef();
    let envelope = |y: f64| coef * y * (-rate * y * y).exp();
    let y_peak = (2.0 * rate).recip().sqrt();
    let mut y_max = y_peak;
    while envelope(y_max) > 1e-12 * envelope(y_peak) {
        y_max *= 1.25;
    }
    // ∫_{y_max}^∞ envelope(y)·inner(y) dy ≤ inner(y_max)·coef·e^(−rate·y²)/(2·rate)
    let inner_spec = QuadSpec {
        rel_tol: outer_spec.rel_tol / 10.0,
        abs_tol: outer_spec.abs_tol / 10.0,
        max_depth: outer_spec.max_depth,
        transform: Transform::None,
    };
    let inner_fail: RefCell<Option<QuadError>> = RefCell::new(None);
    let inner = |y: f64| -> f64 {
        let a = PI * p.interferer_intensity * ka * y * y;
        let b = noise * y.powf(p.alpha);
        if a <= 0.0 && b <= 0.0 {
            return 0.0; // y = 0 contributes nothing through the weight
        }
        // Truncate where the integrand drops below the inner tolerance.
        let big = (1.0 / inner_spec.abs_tol.max(1e-300)).ln().max(1.0);
        let mut theta_max = f64::INFINITY;
        if a > 0.0 {
            theta_max = theta_max.min((big / a).powf(p.alpha / 2.0));
        }
        if b > 0.0 {
            theta_max = theta_max.min(big / b);
        }
        let t_max = theta_max.ln_1p();
        let g = |t: f64| {
            let theta = t.exp_m1();
            (-a * theta.powf(2.0 / p.alpha) - b * theta).exp()
        };
        match integrate(g, 0.0, t_max, &inner_spec) {
            Ok(r) => r.value,
            Err(QuadError::MaxDepthExceeded { value, .. }) => {
                if inner_fail.borrow().is_none() {
                    *inner_fail.borrow_mut() = Some(QuadError::MaxDepthExceeded {
                        value,
                        error_estimate: f64::NAN,
                    });
                }
                value
            }
            Err(e) => {
                if inner_fail.borrow().is_none() {
                    *inner_fail.borrow_mut() = Some(e);
                }
                0.0
            }
        }
    };

    let outer = integrate(|y| inner(y) * law.weight(y), 0.0, y_max, outer_spec)?;
    let tail_bound = inner(y_max) * coef * (-rate * y_max * y_max).exp() / (2.0 * rate);
    if let Some(e) = inner_fail.into_inner() {
        return Err(e.into());
    }
    let scale = LOG2_E / law.p2;
    let value = scale * outer.value;
    Ok(SeValue {
        spectral_efficiency: value,
        quad_error: scale * (outer.error_estimate + tail_bound)
            + value.abs() * inner_spec.rel_tol,
    })
}

/// Average service-sharing context: device and base-station counts over a
/// reference km², and devices per serving base station for the policy.
#[derive(Debug, Clone, Copy)]
pub struct ThroughputContext {
    pub n_devices_avg: f64,
    pub n_bs_avg: f64,
    pub devices_per_server: f64,
}

impl ThroughputContext {
    pub fn for_policy(policy: AssociationPolicy, s: &Scenario) -> Result<Self, AnalyticError> {
        const REF_AREA_M2: f64 = 1.0e6;
        let n_d = s.lambda_d_eff() * REF_AREA_M2;
        let n_m = s.lambda_m_eff() * REF_AREA_M2;
        let n_ms = s.interferer_intensity() * REF_AREA_M2;
        let devices_per_server = match policy {
            AssociationPolicy::Dude => n_d / n_ms,
            AssociationPolicy::Drp => {
                let probs = case_probabilities(s)?;
                n_d * (probs.p1 + probs.p2) / n_m
            }
        };
        if !(devices_per_server > 0.0 && devices_per_server.is_finite()) {
            return Err(AnalyticError::Case2ProbabilityZero);
        }
        Ok(Self {
            n_devices_avg: n_d,
            n_bs_avg: n_ms,
            devices_per_server,
        })
    }
}

/// Case-2 uplink throughput for a policy.
#[derive(Debug, Clone, Copy)]
pub struct Throughput {
    pub bits_per_sec: f64,
    pub se: SeValue,
    pub context: ThroughputContext,
}

/// Throughput = spectral efficiency × B/N_a, where N_a is the average number
/// of devices sharing the serving base station under the policy.
pub fn ul_throughput_case2(
    policy: AssociationPolicy,
    s: &Scenario,
) -> Result<Throughput, AnalyticError> {
    ul_throughput_case2_with(policy, s, &se_default_spec())
}

pub fn ul_throughput_case2_with(
    policy: AssociationPolicy,
    s: &Scenario,
    spec: &QuadSpec,
) -> Result<Throughput, AnalyticError> {
    let se = spectral_efficiency_case2_with(policy, s, spec)?;
    let context = ThroughputContext::for_policy(policy, s)?;
    Ok(Throughput {
        bits_per_sec: se.spectral_efficiency * s.bandwidth_hz / context.devices_per_server,
        se,
        context,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{DeviceParams, SimWindow, TierParams};
    use crate::units::{per_km2_to_per_m2, thermal_noise_watts};
    use approx::assert_relative_eq;

    fn scenario(p_s_dbm: f64, ratio: f64, alpha: f64) -> Scenario {
        Scenario {
            macro_tier: TierParams::from_config(46.0, 1.0, 0.0, 0.0).unwrap(),
            small_tier: TierParams::from_config(p_s_dbm, ratio, 0.0, 0.0).unwrap(),
            device: DeviceParams::from_config(20.0, 1.0e4).unwrap(),
            path_loss_exponent: alpha,
            noise_power_w: thermal_noise_watts(20.0e6),
            bandwidth_hz: 20.0e6,
            window: SimWindow::disk(5000.0),
            master_seed: 9,
        }
    }

    fn parameter_grid() -> Vec<Scenario> {
        let mut grid = Vec::new();
        for alpha in [3.0, 4.0] {
            for ratio in [1.0, 5.0, 15.0] {
                for p_s in [20.0, 30.0] {
                    grid.push(scenario(p_s, ratio, alpha));
                }
            }
        }
        grid
    }

    #[test]
    fn pdfs_normalize_over_parameter_grid() {
        for s in parameter_grid() {
            for policy in [AssociationPolicy::Dude, AssociationPolicy::Drp] {
                let law = Case2DistanceLaw::new(policy, &s).unwrap();
                let total = integrate(
                    |x| law.pdf(x),
                    0.0,
                    f64::INFINITY,
                    &QuadSpec::default(),
                )
                .unwrap();
                assert!(
                    (total.value - 1.0).abs() < 1e-6,
                    "{} pdf mass {} in {s:?}",
                    policy.label(),
                    total.value
                );
            }
        }
    }

    #[test]
    fn ccdf_boundary_and_monotonicity() {
        let s = scenario(20.0, 5.0, 4.0);
        let law = Case2DistanceLaw::new(AssociationPolicy::Dude, &s).unwrap();
        assert_eq!(law.ccdf(0.0), 1.0);
        let mut prev = 1.0;
        for i in 1..200 {
            let x = i as f64 * 10.0;
            let c = law.ccdf(x);
            assert!(c <= prev + 1e-15, "ccdf increasing at {x}");
            assert!(c >= 0.0);
            prev = c;
        }
        assert!(law.ccdf(5000.0) < 1e-9);
    }

    #[test]
    fn ccdf_matches_pdf_tail_integral() {
        let s = scenario(20.0, 5.0, 4.0);
        for policy in [AssociationPolicy::Dude, AssociationPolicy::Drp] {
            let law = Case2DistanceLaw::new(policy, &s).unwrap();
            for x in [0.0, 50.0, 150.0, 400.0, 900.0] {
                let tail = integrate(|u| law.pdf(u), x, f64::INFINITY, &QuadSpec::default())
                    .unwrap()
                    .value;
                assert!(
                    (tail - law.ccdf(x)).abs() < 1e-6,
                    "{} at x={x}: ∫pdf {} vs ccdf {}",
                    policy.label(),
                    tail,
                    law.ccdf(x)
                );
            }
        }
    }

    #[test]
    fn mean_closed_form_matches_quadrature() {
        for s in [scenario(20.0, 5.0, 4.0), scenario(30.0, 15.0, 3.0)] {
            for policy in [AssociationPolicy::Dude, AssociationPolicy::Drp] {
                let law = Case2DistanceLaw::new(policy, &s).unwrap();
                let m = integrate(|x| x * law.pdf(x), 0.0, f64::INFINITY, &QuadSpec::default())
                    .unwrap()
                    .value;
                assert_relative_eq!(law.mean(), m, max_relative = 1e-8);
            }
        }
    }

    #[test]
    fn dude_law_sits_left_of_drp_law() {
        for s in parameter_grid() {
            let dude = Case2DistanceLaw::new(AssociationPolicy::Dude, &s).unwrap();
            let drp = Case2DistanceLaw::new(AssociationPolicy::Drp, &s).unwrap();
            assert!(
                dude.mean() < drp.mean(),
                "mean ordering violated for {s:?}"
            );
        }
    }

    #[test]
    fn low_power_small_cells_pull_the_dude_law_left() {
        let fcell = Case2DistanceLaw::new(AssociationPolicy::Dude, &scenario(20.0, 5.0, 4.0)).unwrap();
        let pcell = Case2DistanceLaw::new(AssociationPolicy::Dude, &scenario(30.0, 5.0, 4.0)).unwrap();
        assert!(fcell.mean() < pcell.mean());
        // The whole distribution shifts, not only the mean.
        for q in [0.25, 0.5, 0.75] {
            let x_at = |law: &Case2DistanceLaw| {
                let mut lo = 0.0;
                let mut hi = 5000.0;
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if law.cdf(mid) < q {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            };
            assert!(x_at(&fcell) < x_at(&pcell), "quantile {q} ordering");
        }
    }

    #[test]
    fn equal_powers_have_no_case2_law() {
        let mut s = scenario(46.0, 5.0, 4.0);
        s.small_tier.tx_power_w = s.macro_tier.tx_power_w;
        assert!(matches!(
            Case2DistanceLaw::new(AssociationPolicy::Dude, &s),
            Err(AnalyticError::Case2ProbabilityZero)
        ));
        assert!(matches!(
            spectral_efficiency_case2(AssociationPolicy::Dude, &s),
            Err(AnalyticError::Case2ProbabilityZero)
        ));
    }

    #[test]
    fn laplace_exponent_reduced_values() {
        assert_eq!(laplace_exponent_reduced(0.0, 1e-5, 3.0).unwrap(), 0.0);
        // α = 4: exponent = −πλ·√s·(π/2).
        let lam = per_km2_to_per_m2(16.0);
        for s_arg in [0.5, 2.0, 100.0] {
            assert_relative_eq!(
                laplace_exponent_reduced(s_arg, lam, 4.0).unwrap(),
                -PI * lam * s_arg.sqrt() * (PI / 2.0),
                max_relative = 1e-12
            );
        }
        // Linear in the interferer intensity.
        assert_relative_eq!(
            laplace_exponent_reduced(3.0, 2.0 * lam, 3.0).unwrap(),
            2.0 * laplace_exponent_reduced(3.0, lam, 3.0).unwrap(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn laplace_raw_quadrature_agrees_with_reduced_form() {
        let lam = per_km2_to_per_m2(16.0);
        let spec = QuadSpec {
            rel_tol: 1e-12,
            abs_tol: 1e-300,
            max_depth: 20_000,
            transform: Transform::SemiInfiniteMap,
        };
        for alpha in [3.0, 3.5, 4.0, 5.0] {
            for exp10 in (-6..=6).step_by(2) {
                let s_arg = 10f64.powi(exp10);
                let raw = laplace_exponent_quadrature(s_arg, lam, alpha, &spec).unwrap();
                let red = laplace_exponent_reduced(s_arg, lam, alpha).unwrap();
                assert!(
                    ((raw - red) / red).abs() < 1e-8,
                    "α={alpha} s={s_arg}: raw {raw} vs reduced {red}"
                );
            }
        }
    }

    #[test]
    fn se_rejects_fully_degenerate_channel() {
        let s = scenario(20.0, 5.0, 4.0);
        let mut p = SeParams::from_scenario(&s);
        p.interferer_intensity = 0.0;
        p.noise_over_device_power = 0.0;
        assert!(matches!(
            spectral_efficiency_from_params(AssociationPolicy::Dude, &p, &se_default_spec()),
            Err(AnalyticError::InfiniteCapacity)
        ));
    }

    #[test]
    fn se_reference_value() {
        // Independent QUADPACK evaluation of the same double integral
        // (α = 4, ratio 5, 46/20 dBm, thermal noise, P_d = 0.1 W).
        let s = scenario(20.0, 5.0, 4.0);
        let se = spectral_efficiency_case2(AssociationPolicy::Dude, &s).unwrap();
        assert_relative_eq!(se.spectral_efficiency, 0.9545113451, max_relative = 1e-6);
        let se = spectral_efficiency_case2(AssociationPolicy::Drp, &s).unwrap();
        assert_relative_eq!(se.spectral_efficiency, 0.1771041108, max_relative = 1e-6);
    }

    #[test]
    fn dude_beats_drp_spectral_efficiency() {
        for ratio in [1.0, 5.0, 10.0, 15.0] {
            for p_s in [20.0, 30.0] {
                let s = scenario(p_s, ratio, 4.0);
                let dude = spectral_efficiency_case2(AssociationPolicy::Dude, &s).unwrap();
                let drp = spectral_efficiency_case2(AssociationPolicy::Drp, &s).unwrap();
                assert!(
                    dude.spectral_efficiency > drp.spectral_efficiency,
                    "ratio {ratio}, P_S {p_s}: {} vs {}",
                    dude.spectral_efficiency,
                    drp.spectral_efficiency
                );
            }
        }
    }

    #[test]
    fn se_monotone_in_interference_and_noise() {
        let s = scenario(20.0, 5.0, 4.0);
        let base = SeParams::from_scenario(&s);
        let spec = se_default_spec();
        let mut prev = f64::INFINITY;
        for mult in [0.0, 0.5, 1.0, 2.0, 4.0] {
            let mut p = base;
            p.interferer_intensity = base.interferer_intensity * mult;
            let v = spectral_efficiency_from_params(AssociationPolicy::Dude, &p, &spec)
                .unwrap()
                .spectral_efficiency;
            assert!(v <= prev + 1e-9, "not nonincreasing in λ_I at ×{mult}");
            prev = v;
        }
        let mut prev = f64::INFINITY;
        for mult in [1.0, 1e3, 1e6, 1e9] {
            let mut p = base;
            p.noise_over_device_power = base.noise_over_device_power * mult;
            let v = spectral_efficiency_from_params(AssociationPolicy::Dude, &p, &spec)
                .unwrap()
                .spectral_efficiency;
            assert!(v <= prev + 1e-9, "not nonincreasing in σ² at ×{mult}");
            prev = v;
        }
    }

    #[test]
    fn throughput_linear_in_bandwidth() {
        let s = scenario(20.0, 15.0, 4.0);
        let t1 = ul_throughput_case2(AssociationPolicy::Dude, &s).unwrap();
        let mut s2 = s.clone();
        s2.bandwidth_hz *= 2.0;
        let t2 = ul_throughput_case2(AssociationPolicy::Dude, &s2).unwrap();
        assert_relative_eq!(t2.bits_per_sec, 2.0 * t1.bits_per_sec, max_relative = 1e-9);
    }

    #[test]
    fn throughput_context_shares() {
        let s = scenario(20.0, 15.0, 4.0);
        let dude = ThroughputContext::for_policy(AssociationPolicy::Dude, &s).unwrap();
        // 10⁴ devices, 16 base stations per km².
        assert_relative_eq!(dude.n_devices_avg, 1.0e4, max_relative = 1e-9);
        assert_relative_eq!(dude.n_bs_avg, 16.0, max_relative = 1e-9);
        assert_relative_eq!(dude.devices_per_server, 625.0, max_relative = 1e-9);
        let drp = ThroughputContext::for_policy(AssociationPolicy::Drp, &s).unwrap();
        let probs = case_probabilities(&s).unwrap();
        assert_relative_eq!(
            drp.devices_per_server,
            1.0e4 * (probs.p1 + probs.p2) / 1.0,
            max_relative = 1e-9
        );
    }
}
