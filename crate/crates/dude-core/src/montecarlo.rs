//! Brute-force verification engine: empirical association probabilities
//! over PPP and grid deployments, empirical Case-2 serving-distance laws,
//! and empirical Case-2 uplink spectral efficiency under both policies.
//!
//! Every estimator derives one RNG stream per trial from
//! (master seed, estimator tag, trial index), so results are bit-identical
//! for a fixed seed no matter how trials are scheduled across threads.
//! Trial partials are merged in trial order.

use std::io::Write;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::association::{tier_best, AssociationError, AssociationPolicy, BestLink, ShadowTable};
use crate::channel::{sample_fading, MIN_LINK_DISTANCE_M};
use crate::geometry::{
    sample_grid, sample_nearest_distance, sample_ppp, uniform_in_region, Deployment, GeometryError,
    GridSpec, Point,
};
use crate::scenario::{
    AssociationCase, EdgePolicy, Estimate, Scenario, SimWindow, Tier, WindowShape,
};

/// 95% two-sided normal quantile used for confidence halfwidths.
const Z_95: f64 = 1.96;

/// Give-up threshold for resampling deployments with an empty tier.
const MAX_DEPLOYMENT_ATTEMPTS: u64 = 10_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum McError {
    #[error("could not realize a deployment with both tiers occupied after {attempts} attempts")]
    EmptyTier { attempts: u64 },
    #[error("only {collected} Case-2 samples collected; at least {required} required")]
    InsufficientCase2Samples { collected: u64, required: u64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Association(#[from] AssociationError),
}

/// How conditional estimators realize the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorMode {
    /// One coherent windowed realization per trial: base stations,
    /// probe devices and interferers share the deployment.
    FullDeployment,
    /// Exploit stationarity: per-tier nearest distances are drawn from
    /// their exact laws and the interferer field is generated around the
    /// serving base station at the origin.
    TranslatedOrigin,
}

/// Monte Carlo run shape.
#[derive(Debug, Clone, Copy)]
pub struct McConfig {
    pub n_trials: u64,
    pub probes_per_trial: u32,
    pub estimator_mode: EstimatorMode,
    pub master_seed: u64,
}

impl McConfig {
    pub fn new(n_trials: u64, probes_per_trial: u32, master_seed: u64) -> Self {
        Self {
            n_trials,
            probes_per_trial,
            estimator_mode: EstimatorMode::FullDeployment,
            master_seed,
        }
    }

    pub fn with_mode(mut self, mode: EstimatorMode) -> Self {
        self.estimator_mode = mode;
        self
    }

    pub fn total_probes(&self) -> u64 {
        self.n_trials * self.probes_per_trial as u64
    }
}

/// Stream tags keep estimators on disjoint ChaCha streams.
#[derive(Debug, Clone, Copy)]
enum StreamTag {
    AssocPpp = 1,
    AssocGrid = 2,
    Distance = 3,
    Sinr = 4,
}

fn trial_rng(master_seed: u64, tag: StreamTag, trial: u64) -> ChaCha8Rng {
    debug_assert!(trial < (1 << 48));
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(((tag as u64) << 48) | trial);
    rng
}

/// Empirical case frequencies with confidence intervals; frequencies sum
/// to 1 exactly because the classification is total.
#[derive(Debug, Clone)]
pub struct CaseProbEstimates {
    pub per_case: [Estimate; 4],
    pub rejected_trials: u64,
}

impl CaseProbEstimates {
    pub fn get(&self, case: AssociationCase) -> &Estimate {
        &self.per_case[case.index()]
    }

    pub fn means(&self) -> [f64; 4] {
        [
            self.per_case[0].mean,
            self.per_case[1].mean,
            self.per_case[2].mean,
            self.per_case[3].mean,
        ]
    }
}

/// Conditional serving-distance samples (shadow-adjusted meters).
#[derive(Debug, Clone)]
pub struct Case2DistanceSamples {
    pub distances_m: Vec<f64>,
    pub probes_evaluated: u64,
    pub rejected_trials: u64,
}

/// Spectral-efficiency estimate over Case-2 probes.
#[derive(Debug, Clone)]
pub struct SeEstimate {
    pub estimate: Estimate,
    pub rejected_trials: u64,
}

/// Ratio estimator over independent trials: mean = ΣS/ΣC with the cluster
/// variance of the per-trial residuals.
#[derive(Debug, Clone, Copy, Default)]
struct ClusterAcc {
    trials: u64,
    sum_s: f64,
    sum_c: f64,
    sum_ss: f64,
    sum_sc: f64,
    sum_cc: f64,
}

impl ClusterAcc {
    fn push(&mut self, trial_sum: f64, trial_count: f64) {
        self.trials += 1;
        self.sum_s += trial_sum;
        self.sum_c += trial_count;
        self.sum_ss += trial_sum * trial_sum;
        self.sum_sc += trial_sum * trial_count;
        self.sum_cc += trial_count * trial_count;
    }

    fn estimate(&self) -> Estimate {
        let n = self.sum_c;
        if n <= 0.0 {
            return Estimate {
                mean: f64::NAN,
                ci_halfwidth_95: f64::NAN,
                n_samples: 0,
            };
        }
        let mean = self.sum_s / n;
        let t = self.trials as f64;
        let ci = if self.trials >= 2 {
            let sum_e2 =
                (self.sum_ss - 2.0 * mean * self.sum_sc + mean * mean * self.sum_cc).max(0.0);
            Z_95 * (t / (t - 1.0) * sum_e2).sqrt() / n
        } else {
            f64::INFINITY
        };
        Estimate {
            mean,
            ci_halfwidth_95: ci,
            n_samples: n as u64,
        }
    }
}

/// Kolmogorov–Smirnov distance between sorted samples and a cdf.
pub fn ks_statistic<F: Fn(f64) -> f64>(sorted_samples: &[f64], cdf: F) -> f64 {
    let n = sorted_samples.len() as f64;
    let mut ks: f64 = 0.0;
    for (i, x) in sorted_samples.iter().enumerate() {
        let f = cdf(*x);
        ks = ks
            .max((f - i as f64 / n).abs())
            .max((f - (i + 1) as f64 / n).abs());
    }
    ks
}

/// Histogram of nonnegative samples over uniform bins.
#[derive(Debug, Clone)]
pub struct EmpiricalDistribution {
    /// `counts.len() + 1` strictly increasing edges, meters.
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub total: u64,
}

impl EmpiricalDistribution {
    pub fn from_samples(samples: &[f64], n_bins: usize) -> Self {
        let n_bins = n_bins.max(1);
        let max = samples.iter().copied().fold(0.0f64, f64::max);
        let hi = if max > 0.0 { max * (1.0 + 1e-12) } else { 1.0 };
        let width = hi / n_bins as f64;
        let bin_edges: Vec<f64> = (0..=n_bins).map(|i| i as f64 * width).collect();
        let mut counts = vec![0u64; n_bins];
        for &x in samples {
            let idx = ((x / width) as usize).min(n_bins - 1);
            counts[idx] += 1;
        }
        Self {
            bin_edges,
            counts,
            total: samples.len() as u64,
        }
    }

    /// Bin count for ~√n bins within sane bounds.
    pub fn auto_bins(n_samples: usize) -> usize {
        ((n_samples as f64).sqrt().ceil() as usize).clamp(8, 256)
    }

    /// Normalized density of bin `i` (per meter).
    pub fn density(&self, i: usize) -> f64 {
        let width = self.bin_edges[i + 1] - self.bin_edges[i];
        self.counts[i] as f64 / (self.total as f64 * width)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# bin_lo [m], bin_hi [m], count [-], density [1/m]")?;
        writeln!(w, "bin_lo_m,bin_hi_m,count,density_per_m")?;
        for i in 0..self.counts.len() {
            writeln!(
                w,
                "{},{},{},{}",
                self.bin_edges[i],
                self.bin_edges[i + 1],
                self.counts[i],
                self.density(i)
            )?;
        }
        Ok(())
    }
}

/// Realize both base-station tiers, resampling realizations that leave a
/// configured-positive tier empty. Device positions are not materialized;
/// probes and interferers are generated separately.
fn sample_two_tier_deployment<R: Rng>(
    s: &Scenario,
    rng: &mut R,
) -> Result<(Deployment, u64), McError> {
    let mut rejections = 0;
    loop {
        let macro_points = sample_ppp(s.macro_tier.intensity_per_m2, &s.window, rng);
        let small_points = sample_ppp(s.small_tier.intensity_per_m2, &s.window, rng);
        let macro_bad = macro_points.is_empty() && s.macro_tier.intensity_per_m2 > 0.0;
        let small_bad = small_points.is_empty() && s.small_tier.intensity_per_m2 > 0.0;
        if !(macro_bad || small_bad) {
            return Ok((
                Deployment {
                    macro_points,
                    small_points,
                    device_points: Vec::new(),
                    window: s.window,
                },
                rejections,
            ));
        }
        rejections += 1;
        if rejections >= MAX_DEPLOYMENT_ATTEMPTS {
            return Err(McError::EmptyTier {
                attempts: rejections,
            });
        }
    }
}

fn torus_half(window: &SimWindow) -> Option<f64> {
    match (window.edge_policy, window.shape) {
        (EdgePolicy::Torus, WindowShape::Square) => Some(window.half_extent_m),
        _ => None,
    }
}

/// DL/UL tier decision for one probe over an arbitrary deployment. A tier
/// that is structurally absent (intensity zero) simply never wins.
fn classify_probe(
    probe: Point,
    dep: &Deployment,
    s: &Scenario,
    shadows: &ShadowTable,
) -> (AssociationCase, Option<BestLink>, Option<BestLink>) {
    let torus = torus_half(&dep.window);
    let alpha = s.path_loss_exponent;
    let best_m = tier_best(&dep.macro_points, probe, alpha, &shadows.macro_shadows, torus);
    let best_s = tier_best(&dep.small_points, probe, alpha, &shadows.small_shadows, torus);
    let case = match (&best_m, &best_s) {
        (Some(m), Some(sm)) => {
            let dl = if s.small_tier.tx_power_w * sm.metric > s.macro_tier.tx_power_w * m.metric {
                Tier::Small
            } else {
                Tier::Macro
            };
            let ul = if sm.metric > m.metric {
                Tier::Small
            } else {
                Tier::Macro
            };
            AssociationCase::from_tiers(dl, ul)
        }
        (Some(_), None) => AssociationCase::MacroMacro,
        (None, Some(_)) => AssociationCase::SmallSmall,
        (None, None) => unreachable!("deployment sampling guarantees an occupied tier"),
    };
    (case, best_m, best_s)
}

fn probe_point<R: Rng>(window: &SimWindow, rng: &mut R) -> Point {
    uniform_in_region(window.shape, window.probe_half_extent_m(), rng)
}

fn shadow_table<R: Rng>(dep: &Deployment, s: &Scenario, rng: &mut R) -> ShadowTable {
    if s.macro_tier.has_shadowing() || s.small_tier.has_shadowing() {
        ShadowTable::sample(dep, s, rng)
    } else {
        ShadowTable::unit()
    }
}

struct CaseTrial {
    counts: [u64; 4],
    probes: u64,
    rejections: u64,
}

fn merge_case_trials(trials: Vec<CaseTrial>) -> CaseProbEstimates {
    let mut accs = [ClusterAcc::default(); 4];
    let mut rejected = 0;
    for t in &trials {
        rejected += t.rejections;
        for (i, acc) in accs.iter_mut().enumerate() {
            acc.push(t.counts[i] as f64, t.probes as f64);
        }
    }
    CaseProbEstimates {
        per_case: [
            accs[0].estimate(),
            accs[1].estimate(),
            accs[2].estimate(),
            accs[3].estimate(),
        ],
        rejected_trials: rejected,
    }
}

/// Empirical association-case frequencies over PPP deployments.
pub fn estimate_case_probs_ppp(
    s: &Scenario,
    mc: &McConfig,
) -> Result<CaseProbEstimates, McError> {
    let trials: Vec<CaseTrial> = match mc.estimator_mode {
        EstimatorMode::FullDeployment => (0..mc.n_trials)
            .into_par_iter()
            .map(|t| {
                let mut rng = trial_rng(mc.master_seed, StreamTag::AssocPpp, t);
                let (dep, rejections) = sample_two_tier_deployment(s, &mut rng)?;
                let mut counts = [0u64; 4];
                for _ in 0..mc.probes_per_trial {
                    let probe = probe_point(&s.window, &mut rng);
                    let shadows = shadow_table(&dep, s, &mut rng);
                    let (case, _, _) = classify_probe(probe, &dep, s, &shadows);
                    counts[case.index()] += 1;
                }
                Ok(CaseTrial {
                    counts,
                    probes: mc.probes_per_trial as u64,
                    rejections,
                })
            })
            .collect::<Result<_, McError>>()?,
        EstimatorMode::TranslatedOrigin => (0..mc.n_trials)
            .into_par_iter()
            .map(|t| {
                let mut rng = trial_rng(mc.master_seed, StreamTag::AssocPpp, t);
                let mut counts = [0u64; 4];
                for _ in 0..mc.probes_per_trial {
                    let (case, _, _) = draw_exact_case(s, &mut rng);
                    counts[case.index()] += 1;
                }
                Ok(CaseTrial {
                    counts,
                    probes: mc.probes_per_trial as u64,
                    rejections: 0,
                })
            })
            .collect::<Result<_, McError>>()?,
    };
    Ok(merge_case_trials(trials))
}

/// One exact draw of (case, D_M, D_S) from the per-tier nearest-distance
/// laws of the displaced processes.
fn draw_exact_case<R: Rng>(s: &Scenario, rng: &mut R) -> (AssociationCase, f64, f64) {
    let lam_m = s.lambda_m_eff();
    let lam_s = s.lambda_s_eff();
    if lam_s <= 0.0 {
        return (AssociationCase::MacroMacro, 0.0, f64::INFINITY);
    }
    if lam_m <= 0.0 {
        return (AssociationCase::SmallSmall, f64::INFINITY, 0.0);
    }
    let d_m = sample_nearest_distance(lam_m, rng);
    let d_s = sample_nearest_distance(lam_s, rng);
    let alpha = s.path_loss_exponent;
    let metric_m = d_m.powf(-alpha);
    let metric_s = d_s.powf(-alpha);
    let dl = if s.small_tier.tx_power_w * metric_s > s.macro_tier.tx_power_w * metric_m {
        Tier::Small
    } else {
        Tier::Macro
    };
    let ul = if metric_s > metric_m {
        Tier::Small
    } else {
        Tier::Macro
    };
    (AssociationCase::from_tiers(dl, ul), d_m, d_s)
}

/// Empirical association-case frequencies over randomized grid labelings.
/// Powers, path loss and shadowing come from the scenario; geometry comes
/// from the grid spec.
pub fn estimate_case_probs_grid(
    g: &GridSpec,
    s: &Scenario,
    mc: &McConfig,
) -> Result<CaseProbEstimates, McError> {
    let trials: Vec<CaseTrial> = (0..mc.n_trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(mc.master_seed, StreamTag::AssocGrid, t);
            let mut rejections = 0u64;
            let dep = loop {
                let dep = sample_grid(g, &mut rng);
                let macro_bad = dep.macro_points.is_empty() && g.prob_macro > 0.0;
                let small_bad = dep.small_points.is_empty() && g.prob_macro < 1.0;
                if !(macro_bad || small_bad) {
                    break dep;
                }
                rejections += 1;
                if rejections >= MAX_DEPLOYMENT_ATTEMPTS {
                    return Err(McError::EmptyTier {
                        attempts: rejections,
                    });
                }
            };
            let mut counts = [0u64; 4];
            for _ in 0..mc.probes_per_trial {
                let probe = probe_point(&dep.window, &mut rng);
                let shadows = shadow_table(&dep, s, &mut rng);
                let (case, _, _) = classify_probe(probe, &dep, s, &shadows);
                counts[case.index()] += 1;
            }
            Ok(CaseTrial {
                counts,
                probes: mc.probes_per_trial as u64,
                rejections,
            })
        })
        .collect::<Result<_, McError>>()?;
    Ok(merge_case_trials(trials))
}

/// Scenario whose tier intensities match the grid's average densities;
/// the closed forms evaluated on it are the analytic comparison target.
pub fn grid_equivalent_scenario(g: &GridSpec, s: &Scenario) -> Scenario {
    let total_per_m2 = g.n_bs_total as f64 / (g.area_km2 * 1.0e6);
    let mut eq = s.clone();
    eq.macro_tier.intensity_per_m2 = g.prob_macro * total_per_m2;
    eq.small_tier.intensity_per_m2 = (1.0 - g.prob_macro) * total_per_m2;
    eq
}

/// The serving base station of a Case-2 probe under a policy: the nearest
/// small cell for DUDe, the downlink-winning macro cell for DRP.
fn case2_server(
    policy: AssociationPolicy,
    best_m: &Option<BestLink>,
    best_s: &Option<BestLink>,
) -> BestLink {
    match policy {
        AssociationPolicy::Dude => best_s.expect("Case 2 implies an occupied small tier"),
        AssociationPolicy::Drp => best_m.expect("Case 2 implies an occupied macro tier"),
    }
}

/// Raw conditional serving distances for Case-2 probes.
pub fn collect_case2_distances(
    policy: AssociationPolicy,
    s: &Scenario,
    mc: &McConfig,
) -> Result<Case2DistanceSamples, McError> {
    struct DistTrial {
        distances: Vec<f64>,
        rejections: u64,
    }
    let trials: Vec<DistTrial> = (0..mc.n_trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(mc.master_seed, StreamTag::Distance, t);
            match mc.estimator_mode {
                EstimatorMode::FullDeployment => {
                    let (dep, rejections) = sample_two_tier_deployment(s, &mut rng)?;
                    let mut distances = Vec::new();
                    for _ in 0..mc.probes_per_trial {
                        let probe = probe_point(&s.window, &mut rng);
                        let shadows = shadow_table(&dep, s, &mut rng);
                        let (case, best_m, best_s) = classify_probe(probe, &dep, s, &shadows);
                        if case == AssociationCase::MacroSmall {
                            distances
                                .push(case2_server(policy, &best_m, &best_s).displaced_distance_m);
                        }
                    }
                    Ok(DistTrial {
                        distances,
                        rejections,
                    })
                }
                EstimatorMode::TranslatedOrigin => {
                    let mut distances = Vec::new();
                    for _ in 0..mc.probes_per_trial {
                        let (case, d_m, d_s) = draw_exact_case(s, &mut rng);
                        if case == AssociationCase::MacroSmall {
                            distances.push(match policy {
                                AssociationPolicy::Dude => d_s,
                                AssociationPolicy::Drp => d_m,
                            });
                        }
                    }
                    Ok(DistTrial {
                        distances,
                        rejections: 0,
                    })
                }
            }
        })
        .collect::<Result<_, McError>>()?;

    let mut distances_m = Vec::new();
    let mut rejected_trials = 0;
    for t in trials {
        distances_m.extend(t.distances);
        rejected_trials += t.rejections;
    }
    const REQUIRED: u64 = 1000;
    if (distances_m.len() as u64) < REQUIRED {
        return Err(McError::InsufficientCase2Samples {
            collected: distances_m.len() as u64,
            required: REQUIRED,
        });
    }
    Ok(Case2DistanceSamples {
        distances_m,
        probes_evaluated: mc.total_probes(),
        rejected_trials,
    })
}

/// Histogram of the conditional serving distance under a policy.
pub fn sample_case2_distances(
    policy: AssociationPolicy,
    s: &Scenario,
    mc: &McConfig,
) -> Result<EmpiricalDistribution, McError> {
    let samples = collect_case2_distances(policy, s, mc)?;
    let bins = EmpiricalDistribution::auto_bins(samples.distances_m.len());
    Ok(EmpiricalDistribution::from_samples(
        &samples.distances_m,
        bins,
    ))
}

/// log₂(1 + SINR) for one Case-2 uplink: fresh fading everywhere, the
/// interferer field measured from the serving base station.
fn sinr_sample<R: Rng>(
    serving_displaced_m: f64,
    serving_pos: Point,
    interferers: &[Point],
    noise_over_pd: f64,
    alpha: f64,
    rng: &mut R,
) -> f64 {
    let y0 = serving_displaced_m.max(MIN_LINK_DISTANCE_M);
    let signal = sample_fading(rng) * y0.powf(-alpha);
    let mut interference = 0.0;
    for p in interferers {
        let d = p.distance(serving_pos).max(MIN_LINK_DISTANCE_M);
        interference += sample_fading(rng) * d.powf(-alpha);
    }
    let sinr = signal / (interference + noise_over_pd);
    (1.0 + sinr).log2()
}

/// Mean of log₂(1+SINR) over Case-2 probes under a policy.
///
/// The interferer field is the thinned device process: an independent PPP
/// of intensity λ̃_M + λ̃_S with no exclusion around the serving station.
pub fn estimate_spectral_efficiency_case2(
    policy: AssociationPolicy,
    s: &Scenario,
    mc: &McConfig,
) -> Result<SeEstimate, McError> {
    let noise_over_pd = s.noise_power_w / s.device.tx_power_w;
    let lambda_i = s.interferer_intensity();
    let alpha = s.path_loss_exponent;

    struct SeTrial {
        sum: f64,
        count: u64,
        rejections: u64,
    }
    let trials: Vec<SeTrial> = (0..mc.n_trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(mc.master_seed, StreamTag::Sinr, t);
            let mut sum = 0.0;
            let mut count = 0u64;
            match mc.estimator_mode {
                EstimatorMode::FullDeployment => {
                    let (dep, rejections) = sample_two_tier_deployment(s, &mut rng)?;
                    let interferers = sample_ppp(lambda_i, &s.window, &mut rng);
                    for _ in 0..mc.probes_per_trial {
                        let probe = probe_point(&s.window, &mut rng);
                        let shadows = shadow_table(&dep, s, &mut rng);
                        let (case, best_m, best_s) = classify_probe(probe, &dep, s, &shadows);
                        if case != AssociationCase::MacroSmall {
                            continue;
                        }
                        let server = case2_server(policy, &best_m, &best_s);
                        let server_pos = match policy {
                            AssociationPolicy::Dude => dep.small_points[server.index],
                            AssociationPolicy::Drp => dep.macro_points[server.index],
                        };
                        sum += sinr_sample(
                            server.displaced_distance_m,
                            server_pos,
                            &interferers,
                            noise_over_pd,
                            alpha,
                            &mut rng,
                        );
                        count += 1;
                    }
                    Ok(SeTrial {
                        sum,
                        count,
                        rejections,
                    })
                }
                EstimatorMode::TranslatedOrigin => {
                    for _ in 0..mc.probes_per_trial {
                        // Rejection-sample the Case-2 event from the exact
                        // per-tier laws, then build a fresh interferer field
                        // around the serving station.
                        let mut serving = None;
                        for _ in 0..100_000 {
                            let (case, d_m, d_s) = draw_exact_case(s, &mut rng);
                            if case == AssociationCase::MacroSmall {
                                serving = Some(match policy {
                                    AssociationPolicy::Dude => d_s,
                                    AssociationPolicy::Drp => d_m,
                                });
                                break;
                            }
                        }
                        let Some(y0) = serving else { continue };
                        let interferers = sample_ppp(lambda_i, &s.window, &mut rng);
                        sum += sinr_sample(
                            y0,
                            Point::ORIGIN,
                            &interferers,
                            noise_over_pd,
                            alpha,
                            &mut rng,
                        );
                        count += 1;
                    }
                    Ok(SeTrial {
                        sum,
                        count,
                        rejections: 0,
                    })
                }
            }
        })
        .collect::<Result<_, McError>>()?;

    let mut acc = ClusterAcc::default();
    let mut rejected_trials = 0;
    for t in &trials {
        acc.push(t.sum, t.count as f64);
        rejected_trials += t.rejections;
    }
    let estimate = acc.estimate();
    const REQUIRED: u64 = 1000;
    if estimate.n_samples < REQUIRED {
        return Err(McError::InsufficientCase2Samples {
            collected: estimate.n_samples,
            required: REQUIRED,
        });
    }
    Ok(SeEstimate {
        estimate,
        rejected_trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::Case2DistanceLaw;
    use crate::association::case_probabilities;
    use crate::geometry::auto_window_radius_m;
    use crate::scenario::{DeviceParams, TierParams};
    use crate::units::{per_km2_to_per_m2, thermal_noise_watts};

    pub(crate) fn scenario(p_s_dbm: f64, ratio: f64, alpha: f64) -> Scenario {
        let macro_tier = TierParams::from_config(46.0, 1.0, 0.0, 0.0).unwrap();
        let small_tier = TierParams::from_config(p_s_dbm, ratio, 0.0, 0.0).unwrap();
        let lam_min = macro_tier
            .intensity_per_m2
            .min(small_tier.intensity_per_m2.max(1e-300));
        Scenario {
            macro_tier,
            small_tier,
            device: DeviceParams::from_config(20.0, 1.0e4).unwrap(),
            path_loss_exponent: alpha,
            noise_power_w: thermal_noise_watts(20.0e6),
            bandwidth_hz: 20.0e6,
            window: SimWindow::disk(auto_window_radius_m(lam_min)),
            master_seed: 77,
        }
    }

    #[test]
    fn symmetric_tiers_split_evenly() {
        let s = scenario(46.0, 1.0, 3.0);
        let mc = McConfig::new(400, 25, 5);
        let est = estimate_case_probs_ppp(&s, &mc).unwrap();
        let m = est.means();
        assert!((m[0] - 0.5).abs() < 0.03, "p1 {}", m[0]);
        assert_eq!(m[1], 0.0, "equal powers cannot decouple");
        assert_eq!(m[2], 0.0);
        assert!((m[3] - 0.5).abs() < 0.03);
        let total: f64 = m.iter().sum();
        assert_eq!(total, 1.0, "classification must be total");
    }

    #[test]
    fn ppp_frequencies_match_closed_forms() {
        // Reduced-size version of the headline check.
        let s = scenario(20.0, 5.0, 3.0);
        let mc = McConfig::new(600, 25, 11);
        let est = estimate_case_probs_ppp(&s, &mc).unwrap();
        let p = case_probabilities(&s).unwrap();
        for (m, (e, p)) in est.means().iter().zip(p.as_array()).enumerate() {
            assert!(
                (e - p).abs() < 0.025,
                "case {m}: mc {e} vs analytic {p}"
            );
        }
    }

    #[test]
    fn translated_origin_matches_full_deployment() {
        let s = scenario(20.0, 5.0, 3.0);
        let full = estimate_case_probs_ppp(&s, &McConfig::new(400, 25, 3)).unwrap();
        let translated = estimate_case_probs_ppp(
            &s,
            &McConfig::new(100, 100, 3).with_mode(EstimatorMode::TranslatedOrigin),
        )
        .unwrap();
        for i in 0..4 {
            let d = (full.per_case[i].mean - translated.per_case[i].mean).abs();
            let bound = 3.0
                * (full.per_case[i].ci_halfwidth_95 + translated.per_case[i].ci_halfwidth_95)
                + 1e-9;
            assert!(d < bound, "case {i}: |Δ| = {d} ≥ {bound}");
        }
    }

    #[test]
    fn ci_shrinks_with_sample_size() {
        let s = scenario(20.0, 5.0, 3.0);
        let small = estimate_case_probs_ppp(&s, &McConfig::new(100, 20, 8)).unwrap();
        let large = estimate_case_probs_ppp(&s, &McConfig::new(400, 20, 8)).unwrap();
        let ratio = small.per_case[1].ci_halfwidth_95 / large.per_case[1].ci_halfwidth_95;
        assert!(
            (ratio - 2.0).abs() < 0.4,
            "quadrupling trials should roughly halve the CI, got ×{ratio}"
        );
    }

    #[test]
    fn estimators_are_deterministic_across_thread_counts() {
        let s = scenario(20.0, 5.0, 3.5);
        let mc = McConfig::new(64, 16, 42);
        let pool1 = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let pool4 = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap();
        let a = pool1.install(|| estimate_case_probs_ppp(&s, &mc).unwrap());
        let b = pool4.install(|| estimate_case_probs_ppp(&s, &mc).unwrap());
        for i in 0..4 {
            assert_eq!(a.per_case[i].mean.to_bits(), b.per_case[i].mean.to_bits());
            assert_eq!(
                a.per_case[i].ci_halfwidth_95.to_bits(),
                b.per_case[i].ci_halfwidth_95.to_bits()
            );
        }
        let da = pool1.install(|| {
            collect_case2_distances(AssociationPolicy::Dude, &s, &McConfig::new(300, 20, 9))
                .unwrap()
        });
        let db = pool4.install(|| {
            collect_case2_distances(AssociationPolicy::Dude, &s, &McConfig::new(300, 20, 9))
                .unwrap()
        });
        assert_eq!(da.distances_m, db.distances_m);
        let ea = pool1.install(|| {
            estimate_spectral_efficiency_case2(
                AssociationPolicy::Dude,
                &s,
                &McConfig::new(150, 20, 9),
            )
            .unwrap()
        });
        let eb = pool4.install(|| {
            estimate_spectral_efficiency_case2(
                AssociationPolicy::Dude,
                &s,
                &McConfig::new(150, 20, 9),
            )
            .unwrap()
        });
        assert_eq!(
            ea.estimate.mean.to_bits(),
            eb.estimate.mean.to_bits()
        );
    }

    #[test]
    fn grid_single_tier_when_q_is_one() {
        let s = scenario(20.0, 5.0, 3.0);
        let g = GridSpec {
            n_bs_total: 100,
            area_km2: 100.0,
            prob_macro: 1.0,
        };
        let est = estimate_case_probs_grid(&g, &s, &McConfig::new(50, 20, 2)).unwrap();
        assert_eq!(est.means()[0], 1.0);
    }

    #[test]
    fn grid_frequencies_track_ppp_closed_forms() {
        let s = scenario(20.0, 5.0, 3.0);
        // Q = 1/6 matches a 1:5 macro:small density split.
        let g = GridSpec {
            n_bs_total: 400,
            area_km2: 400.0 / 6.0,
            prob_macro: 1.0 / 6.0,
        };
        let est = estimate_case_probs_grid(&g, &s, &McConfig::new(500, 25, 4)).unwrap();
        let p = case_probabilities(&grid_equivalent_scenario(&g, &s)).unwrap();
        for (i, (e, p)) in est.means().iter().zip(p.as_array()).enumerate() {
            assert!((e - p).abs() < 0.04, "case {i}: grid {e} vs analytic {p}");
        }
    }

    #[test]
    fn distance_samples_follow_conditional_law() {
        let s = scenario(20.0, 5.0, 4.0);
        let mc = McConfig::new(800, 25, 6);
        for policy in [AssociationPolicy::Dude, AssociationPolicy::Drp] {
            let mut samples = collect_case2_distances(policy, &s, &mc).unwrap();
            assert!(samples.distances_m.len() >= 4000);
            samples.distances_m.sort_by(f64::total_cmp);
            let law = Case2DistanceLaw::new(policy, &s).unwrap();
            let ks = ks_statistic(&samples.distances_m, |x| law.cdf(x));
            assert!(ks < 0.03, "{}: KS {ks}", policy.label());
        }
    }

    #[test]
    fn distance_modes_agree() {
        let s = scenario(20.0, 5.0, 4.0);
        let full = collect_case2_distances(
            AssociationPolicy::Dude,
            &s,
            &McConfig::new(600, 20, 13),
        )
        .unwrap();
        let translated = collect_case2_distances(
            AssociationPolicy::Dude,
            &s,
            &McConfig::new(200, 60, 13).with_mode(EstimatorMode::TranslatedOrigin),
        )
        .unwrap();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let m1 = mean(&full.distances_m);
        let m2 = mean(&translated.distances_m);
        assert!(
            (m1 - m2).abs() / m2 < 0.05,
            "mode means differ: {m1} vs {m2}"
        );
    }

    #[test]
    fn insufficient_case2_samples_detected() {
        let s = scenario(20.0, 5.0, 4.0);
        let err =
            collect_case2_distances(AssociationPolicy::Dude, &s, &McConfig::new(4, 4, 1))
                .unwrap_err();
        assert!(matches!(err, McError::InsufficientCase2Samples { .. }));
    }

    #[test]
    fn histogram_invariants() {
        let samples = [1.0, 2.0, 2.5, 7.0, 3.3];
        let h = EmpiricalDistribution::from_samples(&samples, 4);
        assert_eq!(h.counts.iter().sum::<u64>(), h.total);
        assert_eq!(h.total, 5);
        assert!(h.bin_edges.windows(2).all(|w| w[1] > w[0]));
        let mass: f64 = (0..h.counts.len())
            .map(|i| h.density(i) * (h.bin_edges[i + 1] - h.bin_edges[i]))
            .sum();
        assert!((mass - 1.0).abs() < 1e-12);
        let mut buf = Vec::new();
        h.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("# bin_lo [m]"));
    }

    #[test]
    fn noise_limited_se_matches_quadrature() {
        // λ̃_I = 0 with σ² > 0: the analytic path reduces to a 1-D integral
        // over the serving-distance law; check the estimator against it.
        let mut s = scenario(20.0, 5.0, 4.0);
        // Make noise matter at typical serving distances.
        s.noise_power_w = s.device.tx_power_w * 1e-10;
        let mut p = crate::analytic::SeParams::from_scenario(&s);
        p.interferer_intensity = 0.0;
        let analytic = crate::analytic::spectral_efficiency_from_params(
            AssociationPolicy::Dude,
            &p,
            &crate::analytic::se_default_spec(),
        )
        .unwrap();

        // Noise-limited sampler: conditional serving distances from the
        // model, signal fading, no interference field.
        let mc = McConfig::new(2000, 20, 19).with_mode(EstimatorMode::TranslatedOrigin);
        let samples = collect_case2_distances(AssociationPolicy::Dude, &s, &mc).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(555);
        let noise_over_pd = s.noise_power_w / s.device.tx_power_w;
        let mean: f64 = samples
            .distances_m
            .iter()
            .map(|&y| {
                let snr = sample_fading(&mut rng) * y.max(MIN_LINK_DISTANCE_M).powf(-4.0)
                    / noise_over_pd;
                (1.0 + snr).log2()
            })
            .sum::<f64>()
            / samples.distances_m.len() as f64;
        let rel = (mean - analytic.spectral_efficiency).abs() / analytic.spectral_efficiency;
        assert!(
            rel < 0.05,
            "noise-limited MC {mean} vs quadrature {}",
            analytic.spectral_efficiency
        );
    }

    #[test]
    fn se_modes_agree_within_combined_error() {
        let s = scenario(20.0, 5.0, 4.0);
        let full = estimate_spectral_efficiency_case2(
            AssociationPolicy::Dude,
            &s,
            &McConfig::new(400, 20, 23),
        )
        .unwrap();
        let translated = estimate_spectral_efficiency_case2(
            AssociationPolicy::Dude,
            &s,
            &McConfig::new(400, 20, 23).with_mode(EstimatorMode::TranslatedOrigin),
        )
        .unwrap();
        let d = (full.estimate.mean - translated.estimate.mean).abs();
        let bound = 3.0 * (full.estimate.ci_halfwidth_95 + translated.estimate.ci_halfwidth_95);
        assert!(
            d < bound,
            "modes disagree: {} vs {} (bound {bound})",
            full.estimate.mean,
            translated.estimate.mean
        );
    }

    #[test]
    fn empty_scenario_propagates_error() {
        let mut s = scenario(20.0, 5.0, 3.0);
        s.macro_tier.intensity_per_m2 = per_km2_to_per_m2(1e-9);
        s.window = SimWindow::disk(100.0);
        let err = estimate_case_probs_ppp(&s, &McConfig::new(4, 4, 1)).unwrap_err();
        assert!(matches!(err, McError::EmptyTier { .. }));
    }
}
