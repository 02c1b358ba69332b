//! Deterministic adaptive 1-D quadrature over finite and semi-infinite
//! intervals.
//!
//! A 15-point Kronrod rule with its embedded 7-point Gauss rule gives the
//! per-segment error estimate; the segment with the largest estimate is
//! bisected until the total estimate meets tolerance. Semi-infinite domains
//! are mapped onto (0, 1] with x = lo + (1−u)/u.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

/// Kronrod nodes on [−1, 1] (positive half; the rule is symmetric).
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];

/// Kronrod weights matching `XGK`.
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];

/// 7-point Gauss weights; the Gauss nodes are the odd-indexed `XGK` entries.
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// Handling of an infinite upper integration bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Transform {
    /// Reject infinite bounds.
    None,
    /// Map [lo, ∞) onto (0, 1] via x = lo + (1−u)/u, so the far tail lands
    /// near u = 0 where floating-point spacing is fine enough to resolve
    /// slowly decaying integrands.
    #[default]
    SemiInfiniteMap,
}

/// Tolerances and subdivision budget for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct QuadSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Maximum number of segment bisections.
    pub max_depth: u32,
    pub transform: Transform,
}

impl Default for QuadSpec {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_depth: 4000,
            transform: Transform::SemiInfiniteMap,
        }
    }
}

impl QuadSpec {
    pub fn with_rel_tol(rel_tol: f64) -> Self {
        Self {
            rel_tol,
            ..Self::default()
        }
    }

    /// Target for the total error estimate given the current value.
    fn tolerance(&self, value: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * value.abs())
    }
}

#[derive(Debug, Clone)]
pub struct QuadResult {
    pub value: f64,
    /// Estimated absolute error of `value`.
    pub error_estimate: f64,
    /// Number of bisections performed.
    pub subdivisions: u32,
}

#[derive(Debug, Clone, Error)]
pub enum QuadError {
    #[error("subdivision budget exhausted: value ≈ {value} ± {error_estimate}")]
    MaxDepthExceeded { value: f64, error_estimate: f64 },
    #[error("invalid integration interval [{lo}, {hi}]")]
    InvalidInterval { lo: f64, hi: f64 },
    #[error("integrand evaluated to a non-finite value near {at}")]
    NonFiniteEvaluation { at: f64 },
    #[error("path-loss exponent must exceed 2, got {alpha}")]
    AlphaOutOfRange { alpha: f64 },
}

struct Segment {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
    id: u64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error && self.id == other.id
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        // Largest error first; ids break ties deterministically.
        self.error
            .total_cmp(&other.error)
            .then_with(|| self.id.cmp(&other.id))
    }
}

/// One 15-point Kronrod evaluation over [lo, hi].
fn qk15<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> Result<(f64, f64), QuadError> {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);

    let fc = f(center);
    let mut fv1 = [0.0; 8];
    let mut fv2 = [0.0; 8];
    fv1[7] = fc;

    let mut res_kronrod = fc * WGK[7];
    let mut res_gauss = fc * WG[3];
    let mut res_abs = res_kronrod.abs();

    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        let sum = f1 + f2;
        res_kronrod += WGK[j] * sum;
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_gauss += WG[j / 2] * sum;
        }
    }

    let mean = 0.5 * res_kronrod;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }

    let value = res_kronrod * half;
    if !value.is_finite() {
        return Err(QuadError::NonFiniteEvaluation { at: center });
    }

    let res_abs = res_abs * half.abs();
    let res_asc = res_asc * half.abs();
    let mut err = ((res_kronrod - res_gauss) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        let scale = (200.0 * err / res_asc).powf(1.5);
        err = if scale < 1.0 { res_asc * scale } else { res_asc };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    Ok((value, err))
}

/// Adaptive integral of `f` over [lo, hi]; `hi` may be `f64::INFINITY` when
/// the spec enables the semi-infinite map.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    spec: &QuadSpec,
) -> Result<QuadResult, QuadError> {
    if lo.is_nan() || hi.is_nan() || lo.is_infinite() || lo > hi {
        return Err(QuadError::InvalidInterval { lo, hi });
    }
    if lo == hi {
        return Ok(QuadResult {
            value: 0.0,
            error_estimate: 0.0,
            subdivisions: 0,
        });
    }
    if hi.is_infinite() {
        return match spec.transform {
            Transform::None => Err(QuadError::InvalidInterval { lo, hi }),
            Transform::SemiInfiniteMap => {
                let g = move |u: f64| {
                    let fx = f(lo + (1.0 - u) / u);
                    if fx == 0.0 {
                        0.0
                    } else {
                        fx / (u * u)
                    }
                };
                adaptive(&g, 0.0, 1.0, spec)
            }
        };
    }
    adaptive(&f, lo, hi, spec)
}

fn adaptive<F: Fn(f64) -> f64>(
    f: &F,
    lo: f64,
    hi: f64,
    spec: &QuadSpec,
) -> Result<QuadResult, QuadError> {
    let (value, error) = qk15(f, lo, hi)?;
    let mut heap = BinaryHeap::new();
    let mut next_id: u64 = 0;
    heap.push(Segment {
        lo,
        hi,
        value,
        error,
        id: next_id,
    });

    // Segments too narrow to bisect further are parked here.
    let mut frozen_value = 0.0;
    let mut frozen_error = 0.0;
    let mut total_value = value;
    let mut total_error = error;
    let mut splits: u32 = 0;

    while total_error > spec.tolerance(total_value) {
        let Some(worst) = heap.pop() else {
            break;
        };
        let mid = 0.5 * (worst.lo + worst.hi);
        if mid <= worst.lo || mid >= worst.hi {
            // Too narrow to bisect; keep its contribution and move on.
            frozen_value += worst.value;
            frozen_error += worst.error;
            continue;
        }
        if splits >= spec.max_depth {
            return Err(QuadError::MaxDepthExceeded {
                value: total_value,
                error_estimate: total_error,
            });
        }
        splits += 1;
        let (lv, le) = qk15(f, worst.lo, mid)?;
        let (rv, re) = qk15(f, mid, worst.hi)?;
        total_value += lv + rv - worst.value;
        total_error += le + re - worst.error;
        next_id += 1;
        heap.push(Segment {
            lo: worst.lo,
            hi: mid,
            value: lv,
            error: le,
            id: next_id,
        });
        next_id += 1;
        heap.push(Segment {
            lo: mid,
            hi: worst.hi,
            value: rv,
            error: re,
            id: next_id,
        });
    }

    // Re-sum in position order so the result does not depend on heap layout.
    let mut segments: Vec<Segment> = heap.into_vec();
    segments.sort_by(|a, b| a.lo.total_cmp(&b.lo).then(a.hi.total_cmp(&b.hi)));
    let mut value = frozen_value;
    let mut error = frozen_error;
    for s in &segments {
        value += s.value;
        error += s.error;
    }
    Ok(QuadResult {
        value,
        error_estimate: error,
        subdivisions: splits,
    })
}

/// The dimensionless interference constant K(α) = ∫₀^∞ dv/(1+v^(α/2))
/// in closed form: (2π/α)/sin(2π/α).
pub fn interference_constant(alpha: f64) -> Result<f64, QuadError> {
    if !(alpha > 2.0) || !alpha.is_finite() {
        return Err(QuadError::AlphaOutOfRange { alpha });
    }
    let x = 2.0 * std::f64::consts::PI / alpha;
    Ok(x / x.sin())
}
