//! Point-process machinery: PPP and grid deployment sampling, the
//! displacement-theorem intensity transform, and nearest-distance laws.

use std::f64::consts::PI;
use std::io::Write;

use rand::Rng;
use rand_distr::{Bernoulli, Distribution, Poisson};
use serde::Serialize;
use thiserror::Error;

use crate::scenario::{SimWindow, TierParams, WindowShape};

/// ln(10)/5, the exponent scale that turns dB moments into natural-log
/// moments of χ^(2/α).
const LN10_OVER_5: f64 = std::f64::consts::LN_10 / 5.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("tier has no base stations")]
    EmptyTier,
    #[error("thinning probability {p} exceeds 1: more base stations than devices")]
    MoreBSsThanDevices { p: f64 },
    #[error("device intensity must be positive")]
    NoDevices,
}

/// A planar location in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub fn distance(&self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Distance on the torus obtained by identifying opposite edges of the
    /// square window [−h, h]².
    pub fn distance_torus(&self, other: Point, half_extent_m: f64) -> f64 {
        let side = 2.0 * half_extent_m;
        let mut dx = (self.x - other.x).abs();
        let mut dy = (self.y - other.y).abs();
        if dx > half_extent_m {
            dx = side - dx;
        }
        if dy > half_extent_m {
            dy = side - dy;
        }
        dx.hypot(dy)
    }
}

/// One realized set of base-station and device locations inside a window.
#[derive(Debug, Clone)]
pub struct Deployment {
    pub macro_points: Vec<Point>,
    pub small_points: Vec<Point>,
    pub device_points: Vec<Point>,
    pub window: SimWindow,
}

impl Deployment {
    /// Dump as CSV rows `(tier, x_m, y_m)` for external plotting.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# tier [-], x [m], y [m]")?;
        writeln!(w, "tier,x_m,y_m")?;
        for (tier, points) in [
            ("macro", &self.macro_points),
            ("small", &self.small_points),
            ("device", &self.device_points),
        ] {
            for p in points {
                writeln!(w, "{tier},{},{}", p.x, p.y)?;
            }
        }
        Ok(())
    }
}

/// Regular-lattice deployment description: `n_bs_total` nodes covering
/// `area_km2`, each labeled macro with probability `prob_macro`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GridSpec {
    pub n_bs_total: usize,
    pub area_km2: f64,
    pub prob_macro: f64,
}

impl GridSpec {
    /// Lattice pitch in meters, √(A/N).
    pub fn pitch_m(&self) -> f64 {
        (self.area_km2 * 1.0e6 / self.n_bs_total as f64).sqrt()
    }
}

/// Shadowing-equivalent intensity of a displaced PPP:
/// λ̃ = E[χ^(2/α)]·λ = exp((ln10/5)·μ/α + ½·((ln10/5)·σ/α)²)·λ.
pub fn effective_intensity(tier: &TierParams, alpha: f64) -> f64 {
    effective_intensity_raw(
        tier.intensity_per_m2,
        tier.shadow_mean_db,
        tier.shadow_std_db,
        alpha,
    )
}

/// [`effective_intensity`] on raw values instead of a tier struct.
pub fn effective_intensity_raw(intensity: f64, mean_db: f64, std_db: f64, alpha: f64) -> f64 {
    let a = LN10_OVER_5 / alpha;
    (a * mean_db + 0.5 * (a * std_db).powi(2)).exp() * intensity
}

/// Sample a homogeneous PPP restricted to the window: a Poisson number of
/// points, each uniform over the window.
pub fn sample_ppp<R: Rng>(intensity_per_m2: f64, window: &SimWindow, rng: &mut R) -> Vec<Point> {
    let mean = intensity_per_m2 * window.area_m2();
    if mean <= 0.0 {
        return Vec::new();
    }
    let n = Poisson::new(mean).expect("positive mean").sample(rng) as usize;
    (0..n).map(|_| uniform_in_window(window, rng)).collect()
}

/// A point uniform over the window.
pub fn uniform_in_window<R: Rng>(window: &SimWindow, rng: &mut R) -> Point {
    uniform_in_region(window.shape, window.half_extent_m, rng)
}

/// A point uniform over a disk of the given radius or square of the given
/// half-side, centered at the origin.
pub fn uniform_in_region<R: Rng>(shape: WindowShape, half_extent_m: f64, rng: &mut R) -> Point {
    match shape {
        WindowShape::Disk => {
            let r = half_extent_m * rng.gen::<f64>().sqrt();
            let theta = 2.0 * PI * rng.gen::<f64>();
            Point::new(r * theta.cos(), r * theta.sin())
        }
        WindowShape::Square => Point::new(
            half_extent_m * (2.0 * rng.gen::<f64>() - 1.0),
            half_extent_m * (2.0 * rng.gen::<f64>() - 1.0),
        ),
    }
}

/// Sample a grid deployment: `n_bs_total` nodes on a near-square lattice
/// (⌈√N⌉ columns, filled row-major), each independently labeled macro with
/// probability Q.
pub fn sample_grid<R: Rng>(spec: &GridSpec, rng: &mut R) -> Deployment {
    let n = spec.n_bs_total;
    let cols = (n as f64).sqrt().ceil() as usize;
    let rows = n.div_ceil(cols);
    let pitch = spec.pitch_m();
    let label = Bernoulli::new(spec.prob_macro.clamp(0.0, 1.0)).expect("valid probability");

    let mut macro_points = Vec::new();
    let mut small_points = Vec::new();
    for i in 0..n {
        let col = i % cols;
        let row = i / cols;
        let p = Point::new(
            (col as f64 - (cols as f64 - 1.0) / 2.0) * pitch,
            (row as f64 - (rows as f64 - 1.0) / 2.0) * pitch,
        );
        if label.sample(rng) {
            macro_points.push(p);
        } else {
            small_points.push(p);
        }
    }

    let half_extent = 0.5 * pitch * cols.max(rows) as f64;
    Deployment {
        macro_points,
        small_points,
        device_points: Vec::new(),
        window: SimWindow::square(half_extent),
    }
}

/// Euclidean distance to the closest point of a tier.
pub fn nearest_distance(points: &[Point], origin: Point) -> Result<f64, GeometryError> {
    points
        .iter()
        .map(|p| p.distance(origin))
        .min_by(f64::total_cmp)
        .ok_or(GeometryError::EmptyTier)
}

/// Nearest-point distance density of a PPP: f(x) = 2πλ̃·x·exp(−πλ̃x²).
pub fn nearest_distance_pdf(x: f64, intensity_per_m2: f64) -> f64 {
    if x < 0.0 {
        return 0.0;
    }
    2.0 * PI * intensity_per_m2 * x * (-PI * intensity_per_m2 * x * x).exp()
}

/// Nearest-point distance cdf of a PPP: F(x) = 1 − exp(−πλ̃x²).
pub fn nearest_distance_cdf(x: f64, intensity_per_m2: f64) -> f64 {
    if x < 0.0 {
        return 0.0;
    }
    -(-PI * intensity_per_m2 * x * x).exp_m1()
}

/// Draw from the nearest-point distance law by cdf inversion.
pub fn sample_nearest_distance<R: Rng>(intensity_per_m2: f64, rng: &mut R) -> f64 {
    // x = sqrt(−ln(1−U)/(πλ̃)); 1−U is uniform too, so use the open side.
    let u: f64 = rng.gen::<f64>();
    (-(1.0 - u).ln() / (PI * intensity_per_m2)).sqrt()
}

/// Fraction of the (shadowing-equivalent) device process that is an active
/// uplink interferer: p = (λ̃_M + λ̃_S)/λ̃_d.
pub fn thinning_probability(s: &crate::scenario::Scenario) -> Result<f64, GeometryError> {
    if s.lambda_d_eff() <= 0.0 {
        return Err(GeometryError::NoDevices);
    }
    let p = s.interferer_intensity() / s.lambda_d_eff();
    if p > 1.0 {
        return Err(GeometryError::MoreBSsThanDevices { p });
    }
    Ok(p)
}

/// Window radius large enough that (i) the probability of an empty tier is
/// below 1e−6 for the sparsest tier and (ii) the guard-region probe area
/// spans many independent cells of that tier.
pub fn auto_window_radius_m(min_bs_intensity_per_m2: f64) -> f64 {
    const PROBE_CELLS_TARGET: f64 = 20.0;
    if min_bs_intensity_per_m2 <= 0.0 {
        return 1000.0;
    }
    let r_empty = (1.0e6_f64.ln() / (PI * min_bs_intensity_per_m2)).sqrt();
    let r_probe = 2.0 * (PROBE_CELLS_TARGET / (PI * min_bs_intensity_per_m2)).sqrt();
    r_empty.max(r_probe)
}
