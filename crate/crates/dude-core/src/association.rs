//! Association decisions per device under decoupled (DUDe) and coupled
//! (DRP) policies, case classification, and the closed-form case
//! probabilities.
//!
//! The downlink picks the tier maximizing fading-averaged received power
//! P_v·χ·d^(−α); the uplink picks the tier with the smallest shadow-adjusted
//! path loss, i.e. maximizing χ·d^(−α). DRP uses the downlink winner for
//! both directions.

use std::io::Write;

use rand::Rng;
use thiserror::Error;

use crate::channel::{self, MIN_LINK_DISTANCE_M};
use crate::geometry::{Deployment, Point};
use crate::scenario::{AssociationCase, CaseProbabilities, EdgePolicy, Scenario, Tier, WindowShape};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AssociationError {
    #[error("association requires at least one base station per non-degenerate tier")]
    EmptyTier,
    #[error("macro power must not be below small-cell power (P_M = {p_m} W < P_S = {p_s} W)")]
    PowerOrdering { p_m: f64, p_s: f64 },
}

/// Uplink association policy under comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssociationPolicy {
    /// Decoupled: UL server chosen by path loss, DL by received power.
    Dude,
    /// Coupled: the DL received-power winner serves both directions.
    Drp,
}

impl AssociationPolicy {
    pub fn label(&self) -> &'static str {
        match self {
            AssociationPolicy::Dude => "dude",
            AssociationPolicy::Drp => "drp",
        }
    }
}

/// The serving base station of one link direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServerRef {
    pub tier: Tier,
    pub index: usize,
    /// Shadow-adjusted (displaced) distance in meters; equals the physical
    /// distance when the link has no shadowing.
    pub distance_m: f64,
}

/// Joint DL/UL association decision for one device.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssociationOutcome {
    pub case: AssociationCase,
    pub dl: ServerRef,
    pub ul: ServerRef,
}

/// Per-link shadowing multipliers for one probe device, indexed like the
/// deployment's point lists. Empty vectors mean "no shadowing" (χ ≡ 1).
/// The same χ is used for the DL and UL metric of a link, which is what
/// makes the small-DL/macro-UL case impossible.
#[derive(Debug, Clone, Default)]
pub struct ShadowTable {
    pub macro_shadows: Vec<f64>,
    pub small_shadows: Vec<f64>,
}

impl ShadowTable {
    /// No shadowing on any link.
    pub fn unit() -> Self {
        Self::default()
    }

    /// Draw i.i.d. per-link multipliers for one probe device, honoring each
    /// tier's configured moments. Tiers without shadowing get an empty
    /// (implicitly unit) column.
    pub fn sample<R: Rng>(dep: &Deployment, s: &Scenario, rng: &mut R) -> Self {
        let draw = |n: usize, mean_db: f64, std_db: f64, rng: &mut R| -> Vec<f64> {
            (0..n)
                .map(|_| channel::sample_shadow(mean_db, std_db, rng))
                .collect()
        };
        let macro_shadows = if s.macro_tier.has_shadowing() {
            draw(
                dep.macro_points.len(),
                s.macro_tier.shadow_mean_db,
                s.macro_tier.shadow_std_db,
                rng,
            )
        } else {
            Vec::new()
        };
        let small_shadows = if s.small_tier.has_shadowing() {
            draw(
                dep.small_points.len(),
                s.small_tier.shadow_mean_db,
                s.small_tier.shadow_std_db,
                rng,
            )
        } else {
            Vec::new()
        };
        Self {
            macro_shadows,
            small_shadows,
        }
    }
}

/// Best link of one tier for one probe.
#[derive(Debug, Clone, Copy)]
pub(crate) struct BestLink {
    pub index: usize,
    /// χ·d^(−α), the tier-internal association metric without the power factor.
    pub metric: f64,
    /// metric^(−1/α) = χ^(−1/α)·d, the displaced distance.
    pub displaced_distance_m: f64,
}

/// Scan a tier for the link maximizing χ·d^(−α). Ties keep the lowest
/// index. `torus_half` enables wraparound distances on a square window.
pub(crate) fn tier_best(
    points: &[Point],
    probe: Point,
    alpha: f64,
    shadows: &[f64],
    torus_half: Option<f64>,
) -> Option<BestLink> {
    if points.is_empty() {
        return None;
    }
    let dist = |p: &Point| -> f64 {
        let d = match torus_half {
            Some(h) => p.distance_torus(probe, h),
            None => p.distance(probe),
        };
        d.max(MIN_LINK_DISTANCE_M)
    };
    if shadows.is_empty() {
        // Without shadowing the metric order is the reverse distance order.
        let (index, d) = points
            .iter()
            .map(dist)
            .enumerate()
            .reduce(|best, cand| if cand.1 < best.1 { cand } else { best })?;
        Some(BestLink {
            index,
            metric: d.powf(-alpha),
            displaced_distance_m: d,
        })
    } else {
        debug_assert_eq!(points.len(), shadows.len());
        let (index, metric) = points
            .iter()
            .zip(shadows)
            .map(|(p, chi)| chi * dist(p).powf(-alpha))
            .enumerate()
            .reduce(|best, cand| if cand.1 > best.1 { cand } else { best })?;
        Some(BestLink {
            index,
            metric,
            displaced_distance_m: metric.powf(-1.0 / alpha),
        })
    }
}

fn torus_half(dep: &Deployment) -> Option<f64> {
    match (dep.window.edge_policy, dep.window.shape) {
        (EdgePolicy::Torus, WindowShape::Square) => Some(dep.window.half_extent_m),
        _ => None,
    }
}

/// Tier pair chosen by the decoupled rules for one probe.
fn decide(
    device: Point,
    dep: &Deployment,
    s: &Scenario,
    shadows: &ShadowTable,
) -> Result<(BestLink, BestLink, Tier, Tier), AssociationError> {
    let torus = torus_half(dep);
    let alpha = s.path_loss_exponent;
    let best_m = tier_best(&dep.macro_points, device, alpha, &shadows.macro_shadows, torus)
        .ok_or(AssociationError::EmptyTier)?;
    let best_s = tier_best(&dep.small_points, device, alpha, &shadows.small_shadows, torus)
        .ok_or(AssociationError::EmptyTier)?;

    // Ties go to the macro tier so replays are deterministic.
    let dl_tier = if s.small_tier.tx_power_w * best_s.metric > s.macro_tier.tx_power_w * best_m.metric
    {
        Tier::Small
    } else {
        Tier::Macro
    };
    let ul_tier = if best_s.metric > best_m.metric {
        Tier::Small
    } else {
        Tier::Macro
    };
    Ok((best_m, best_s, dl_tier, ul_tier))
}

fn server_ref(tier: Tier, best_m: &BestLink, best_s: &BestLink) -> ServerRef {
    let b = match tier {
        Tier::Macro => best_m,
        Tier::Small => best_s,
    };
    ServerRef {
        tier,
        index: b.index,
        distance_m: b.displaced_distance_m,
    }
}

/// Decoupled association: DL by received power, UL by path loss.
pub fn associate_dude(
    device: Point,
    dep: &Deployment,
    s: &Scenario,
    shadows: &ShadowTable,
) -> Result<AssociationOutcome, AssociationError> {
    let (best_m, best_s, dl_tier, ul_tier) = decide(device, dep, s, shadows)?;
    Ok(AssociationOutcome {
        case: AssociationCase::from_tiers(dl_tier, ul_tier),
        dl: server_ref(dl_tier, &best_m, &best_s),
        ul: server_ref(ul_tier, &best_m, &best_s),
    })
}

/// Coupled association: the DL received-power winner serves both directions.
pub fn associate_drp(
    device: Point,
    dep: &Deployment,
    s: &Scenario,
    shadows: &ShadowTable,
) -> Result<AssociationOutcome, AssociationError> {
    let (best_m, best_s, dl_tier, _) = decide(device, dep, s, shadows)?;
    let server = server_ref(dl_tier, &best_m, &best_s);
    Ok(AssociationOutcome {
        case: AssociationCase::from_tiers(dl_tier, dl_tier),
        dl: server,
        ul: server,
    })
}

/// Closed-form probabilities of the four association cases in terms of the
/// shadowing-equivalent intensities:
///
/// p1 = λ̃_M/(λ̃_M+λ̃_S),
/// p2 = λ̃_S/(λ̃_S+λ̃_M) − λ̃_S/(λ̃_S + (P_M/P_S)^(2/α)·λ̃_M),
/// p3 = 0,
/// p4 = λ̃_S/(λ̃_S + (P_M/P_S)^(2/α)·λ̃_M).
pub fn case_probabilities(s: &Scenario) -> Result<CaseProbabilities, AssociationError> {
    let lam_m = s.lambda_m_eff();
    let lam_s = s.lambda_s_eff();
    if lam_m + lam_s <= 0.0 {
        return Err(AssociationError::EmptyTier);
    }
    if s.macro_tier.tx_power_w < s.small_tier.tx_power_w {
        return Err(AssociationError::PowerOrdering {
            p_m: s.macro_tier.tx_power_w,
            p_s: s.small_tier.tx_power_w,
        });
    }
    let k = s.power_ratio_pow_2_alpha();
    let p1 = lam_m / (lam_m + lam_s);
    let p4 = if lam_s > 0.0 {
        lam_s / (lam_s + k * lam_m)
    } else {
        0.0
    };
    let p2 = lam_s / (lam_s + lam_m) - p4;
    Ok(CaseProbabilities {
        p1,
        p2,
        p3: 0.0,
        p4,
    })
}

/// The small-to-macro density ratio maximizing the decoupled-access
/// probability: (P_M/P_S)^(1/α).
pub fn case2_peak_density_ratio(s: &Scenario) -> Result<f64, AssociationError> {
    if s.macro_tier.tx_power_w < s.small_tier.tx_power_w {
        return Err(AssociationError::PowerOrdering {
            p_m: s.macro_tier.tx_power_w,
            p_s: s.small_tier.tx_power_w,
        });
    }
    Ok(s.power_ratio().powf(1.0 / s.path_loss_exponent))
}

/// Dump per-device outcomes as CSV `(device, case, dl_distance, ul_distance)`.
pub fn write_outcomes_csv<W: Write>(
    mut w: W,
    outcomes: &[AssociationOutcome],
) -> std::io::Result<()> {
    writeln!(w, "# device [-], case [-], dl_distance [m], ul_distance [m]")?;
    writeln!(w, "device,case,dl_distance_m,ul_distance_m")?;
    for (i, o) in outcomes.iter().enumerate() {
        writeln!(
            w,
            "{i},{},{},{}",
            o.case.label(),
            o.dl.distance_m,
            o.ul.distance_m
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{DeviceParams, SimWindow, TierParams};
    use crate::units::thermal_noise_watts;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scenario(p_m_dbm: f64, p_s_dbm: f64, ratio: f64, alpha: f64) -> Scenario {
        Scenario {
            macro_tier: TierParams::from_config(p_m_dbm, 1.0, 0.0, 0.0).unwrap(),
            small_tier: TierParams::from_config(p_s_dbm, ratio, 0.0, 0.0).unwrap(),
            device: DeviceParams::from_config(20.0, 1.0e4).unwrap(),
            path_loss_exponent: alpha,
            noise_power_w: thermal_noise_watts(20.0e6),
            bandwidth_hz: 20.0e6,
            window: SimWindow::disk(5000.0),
            master_seed: 1,
        }
    }

    fn two_bs_deployment(d_macro: f64, d_small: f64) -> Deployment {
        Deployment {
            macro_points: vec![Point::new(d_macro, 0.0)],
            small_points: vec![Point::new(0.0, d_small)],
            device_points: vec![],
            window: SimWindow::disk(10_000.0),
        }
    }

    #[test]
    fn rule_examples() {
        let s = scenario(46.0, 20.0, 5.0, 3.0);
        // Mcell at 100 m beats Scell at 120 m in both directions.
        let dep = two_bs_deployment(100.0, 120.0);
        let out = associate_dude(Point::ORIGIN, &dep, &s, &ShadowTable::unit()).unwrap();
        assert_eq!(out.case, AssociationCase::MacroMacro);
        assert_eq!(out.dl.tier, Tier::Macro);
        assert_relative_eq!(out.ul.distance_m, 100.0);

        // Scell at 80 m wins the uplink only.
        let dep = two_bs_deployment(100.0, 80.0);
        let out = associate_dude(Point::ORIGIN, &dep, &s, &ShadowTable::unit()).unwrap();
        assert_eq!(out.case, AssociationCase::MacroSmall);
        assert_eq!(out.dl.tier, Tier::Macro);
        assert_eq!(out.ul.tier, Tier::Small);
        assert_relative_eq!(out.ul.distance_m, 80.0);
    }

    #[test]
    fn equal_powers_never_decouple() {
        let s = scenario(30.0, 30.0, 3.0, 3.5);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..200 {
            let dep = Deployment {
                macro_points: crate::geometry::sample_ppp(2e-6, &s.window, &mut rng),
                small_points: crate::geometry::sample_ppp(6e-6, &s.window, &mut rng),
                device_points: vec![],
                window: s.window,
            };
            if dep.macro_points.is_empty() || dep.small_points.is_empty() {
                continue;
            }
            let probe = crate::geometry::uniform_in_region(
                WindowShape::Disk,
                s.window.probe_half_extent_m(),
                &mut rng,
            );
            let out = associate_dude(probe, &dep, &s, &ShadowTable::unit()).unwrap();
            assert_eq!(out.dl.tier, out.ul.tier, "decoupling with equal powers");
        }
    }

    #[test]
    fn drp_always_couples_and_matches_dude_on_cases_1_and_4() {
        let s = scenario(46.0, 20.0, 5.0, 4.0);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..300 {
            let dep = Deployment {
                macro_points: crate::geometry::sample_ppp(1e-6, &s.window, &mut rng),
                small_points: crate::geometry::sample_ppp(5e-6, &s.window, &mut rng),
                device_points: vec![],
                window: s.window,
            };
            if dep.macro_points.is_empty() || dep.small_points.is_empty() {
                continue;
            }
            let probe = crate::geometry::uniform_in_region(
                WindowShape::Disk,
                s.window.probe_half_extent_m(),
                &mut rng,
            );
            let table = ShadowTable::unit();
            let drp = associate_drp(probe, &dep, &s, &table).unwrap();
            assert_eq!(drp.dl, drp.ul);
            assert!(matches!(
                drp.case,
                AssociationCase::MacroMacro | AssociationCase::SmallSmall
            ));
            let dude = associate_dude(probe, &dep, &s, &table).unwrap();
            if matches!(
                dude.case,
                AssociationCase::MacroMacro | AssociationCase::SmallSmall
            ) {
                assert_eq!(dude, drp);
            }
            // DL side always agrees between the two policies.
            assert_eq!(dude.dl, drp.dl);
        }
    }

    #[test]
    fn case3_impossible_with_symmetric_shadowing() {
        let mut s = scenario(46.0, 20.0, 5.0, 4.0);
        s.macro_tier.shadow_std_db = 6.0;
        s.small_tier.shadow_std_db = 6.0;
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..300 {
            let dep = Deployment {
                macro_points: crate::geometry::sample_ppp(2e-6, &s.window, &mut rng),
                small_points: crate::geometry::sample_ppp(6e-6, &s.window, &mut rng),
                device_points: vec![],
                window: s.window,
            };
            if dep.macro_points.is_empty() || dep.small_points.is_empty() {
                continue;
            }
            let probe = crate::geometry::uniform_in_region(
                WindowShape::Disk,
                s.window.probe_half_extent_m(),
                &mut rng,
            );
            let table = ShadowTable::sample(&dep, &s, &mut rng);
            let out = associate_dude(probe, &dep, &s, &table).unwrap();
            assert_ne!(out.case, AssociationCase::SmallMacro);
        }
    }

    #[test]
    fn empty_tier_rejected() {
        let s = scenario(46.0, 20.0, 5.0, 3.0);
        let dep = Deployment {
            macro_points: vec![],
            small_points: vec![Point::new(1.0, 1.0)],
            device_points: vec![],
            window: s.window,
        };
        assert_eq!(
            associate_dude(Point::ORIGIN, &dep, &s, &ShadowTable::unit()),
            Err(AssociationError::EmptyTier)
        );
    }

    #[test]
    fn case_probabilities_symmetric() {
        let s = scenario(30.0, 30.0, 1.0, 3.0);
        let p = case_probabilities(&s).unwrap();
        assert_relative_eq!(p.p1, 0.5, max_relative = 1e-12);
        assert_eq!(p.p2, 0.0);
        assert_eq!(p.p3, 0.0);
        assert_relative_eq!(p.p4, 0.5, max_relative = 1e-12);
    }

    #[test]
    fn case_probabilities_sum_to_one_in_range() {
        for alpha in [2.5, 3.0, 4.0, 5.5] {
            for ratio in [0.2, 1.0, 5.0, 15.0, 40.0] {
                for p_s in [10.0, 20.0, 30.0, 46.0] {
                    let s = scenario(46.0, p_s, ratio, alpha);
                    let p = case_probabilities(&s).unwrap();
                    assert!(
                        (p.sum() - 1.0).abs() < 1e-12,
                        "sum {} at α={alpha} r={ratio} P_S={p_s}",
                        p.sum()
                    );
                    assert_eq!(p.p3, 0.0);
                    for v in p.as_array() {
                        assert!((0.0..=1.0).contains(&v));
                    }
                }
            }
        }
    }

    #[test]
    fn case2_at_the_paper_peaks() {
        // Low-power small cells: peak decoupling probability near 0.76 at
        // density ratio (P_M/P_S)^(1/α) ≈ 7.36.
        let s = scenario(46.0, 20.0, 7.356422544596414, 3.0);
        assert_relative_eq!(
            case2_peak_density_ratio(&s).unwrap(),
            7.356422544596414,
            max_relative = 1e-12
        );
        let p = case_probabilities(&s).unwrap();
        assert_relative_eq!(p.p2, 0.7606631319411586, max_relative = 1e-9);

        // Higher-power small cells: peak near 0.55 at ratio ≈ 3.41.
        let s = scenario(46.0, 30.0, 3.4145488738336017, 3.0);
        assert_relative_eq!(
            case2_peak_density_ratio(&s).unwrap(),
            3.4145488738336017,
            max_relative = 1e-12
        );
        let p = case_probabilities(&s).unwrap();
        assert_relative_eq!(p.p2, 0.5469525749608031, max_relative = 1e-9);
    }

    #[test]
    fn peak_ratio_is_argmax_by_grid_search() {
        let peak = case2_peak_density_ratio(&scenario(46.0, 20.0, 1.0, 3.0)).unwrap();
        let p2_at = |ratio: f64| {
            case_probabilities(&scenario(46.0, 20.0, ratio, 3.0))
                .unwrap()
                .p2
        };
        let best_grid = (1..4000)
            .map(|i| i as f64 * 0.01)
            .max_by(|a, b| p2_at(*a).total_cmp(&p2_at(*b)))
            .unwrap();
        assert!((best_grid - peak).abs() <= 0.01, "grid {best_grid} vs {peak}");
        assert!(p2_at(peak) >= p2_at(peak * 1.01));
        assert!(p2_at(peak) >= p2_at(peak * 0.99));
    }

    #[test]
    fn peak_ratio_degenerate_and_misordered() {
        let s = scenario(30.0, 30.0, 1.0, 3.0);
        assert_relative_eq!(case2_peak_density_ratio(&s).unwrap(), 1.0);
        assert_eq!(case_probabilities(&s).unwrap().p2, 0.0);
        let s = scenario(20.0, 30.0, 1.0, 3.0);
        assert!(matches!(
            case2_peak_density_ratio(&s),
            Err(AssociationError::PowerOrdering { .. })
        ));
        assert!(matches!(
            case_probabilities(&s),
            Err(AssociationError::PowerOrdering { .. })
        ));
    }

    #[test]
    fn p2_increasing_in_power_ratio() {
        let mut prev = -1.0;
        for p_m in [22.0, 26.0, 30.0, 38.0, 46.0, 54.0] {
            let p2 = case_probabilities(&scenario(p_m, 20.0, 5.0, 3.0))
                .unwrap()
                .p2;
            assert!(p2 > prev, "p2 not increasing at P_M = {p_m} dBm");
            prev = p2;
        }
    }

    #[test]
    fn case_probabilities_scale_invariant() {
        let a = case_probabilities(&scenario(46.0, 20.0, 5.0, 3.0)).unwrap();
        let mut s = scenario(46.0, 20.0, 5.0, 3.0);
        s.macro_tier.intensity_per_m2 *= 37.5;
        s.small_tier.intensity_per_m2 *= 37.5;
        let b = case_probabilities(&s).unwrap();
        for (x, y) in a.as_array().iter().zip(b.as_array()) {
            assert_relative_eq!(*x, y, max_relative = 1e-12);
        }
    }

    #[test]
    fn single_tier_limit() {
        let mut s = scenario(46.0, 20.0, 5.0, 3.0);
        s.small_tier.intensity_per_m2 = 0.0;
        let p = case_probabilities(&s).unwrap();
        assert_eq!(p.p1, 1.0);
        assert_eq!(p.sum(), 1.0);
    }

    #[test]
    fn outcome_csv_shape() {
        let s = scenario(46.0, 20.0, 5.0, 3.0);
        let dep = two_bs_deployment(100.0, 80.0);
        let out = associate_dude(Point::ORIGIN, &dep, &s, &ShadowTable::unit()).unwrap();
        let mut buf = Vec::new();
        write_outcomes_csv(&mut buf, &[out]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("device,case,dl_distance_m,ul_distance_m"));
        assert!(text.contains("0,case2_ms,100,80"));
    }
}
