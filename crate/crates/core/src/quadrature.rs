//! Globally adaptive Gauss–Kronrod (7, 15) quadrature.
//!
//! The interval with the largest error estimate is bisected until the summed
//! estimate drops below the absolute target or the interval cap is reached.
//! The target is floored at `50·ε·∫|f|`, below which the Kronrod/Gauss
//! difference is rounding noise.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the odd Kronrod nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

const ROUNDING_FLOOR: f64 = 50.0 * f64::EPSILON;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-12,
            max_intervals: 2000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error_estimate: f64,
    pub intervals: usize,
}

/// Kronrod estimate and |Kronrod − Gauss| on `[a, b]`.
pub fn gauss_kronrod15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for i in 0..7 {
        let dx = half * XGK[i];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[i] * pair;
        if i % 2 == 1 {
            gauss += WG[i / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
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
        self.error.total_cmp(&other.error)
    }
}

/// Integrates `f` over `[a, b]`.
pub fn integrate<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64, opts: &QuadOptions) -> Result<QuadResult> {
    integrate_points(f, &[a, b], opts)
}

/// Integrates `f` from the first to the last of `points`, seeding the
/// subdivision with every listed breakpoint. Useful when the integrand has
/// structure on a scale much smaller than the interval, which a single
/// initial rule can miss entirely.
pub fn integrate_points<F: FnMut(f64) -> f64>(mut f: F, points: &[f64], opts: &QuadOptions) -> Result<QuadResult> {
    if points.len() < 2 {
        return Err(Error::Argument("need at least two integration points".into()));
    }
    if let Some(p) = points.iter().find(|p| !p.is_finite()) {
        return Err(Error::Argument(format!("integration point {p} must be finite")));
    }
    let (a, b) = (points[0], points[points.len() - 1]);
    if a == b {
        return Ok(QuadResult { value: 0.0, error_estimate: 0.0, intervals: 1 });
    }
    if b < a {
        let rev: Vec<f64> = points.iter().rev().cloned().collect();
        return integrate_points(f, &rev, opts).map(|r| QuadResult { value: -r.value, ..r });
    }
    if points.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Argument("integration points must be monotone".into()));
    }
    let mut heap = BinaryHeap::new();
    for w in points.windows(2).filter(|w| w[1] > w[0]) {
        let (value, error) = gauss_kronrod15(&mut f, w[0], w[1]);
        heap.push(Segment { a: w[0], b: w[1], value, error });
    }
    let mut total_err: f64 = heap.iter().map(|s| s.error).sum();
    let mut magnitude: f64 = heap.iter().map(|s| s.value.abs()).sum();
    let target = |m: f64| opts.abs_tol.max(ROUNDING_FLOOR * m);
    while total_err > target(magnitude) && heap.len() < opts.max_intervals {
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval can no longer be split in floating point.
            heap.push(worst);
            break;
        }
        let (v1, e1) = gauss_kronrod15(&mut f, worst.a, mid);
        let (v2, e2) = gauss_kronrod15(&mut f, mid, worst.b);
        total_err += e1 + e2 - worst.error;
        magnitude += v1.abs() + v2.abs() - worst.value.abs();
        heap.push(Segment { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Segment { a: mid, b: worst.b, value: v2, error: e2 });
        if heap.len() % 64 == 0 {
            // Refresh the running sums to keep cancellation from accumulating.
            total_err = heap.iter().map(|s| s.error).sum();
            magnitude = heap.iter().map(|s| s.value.abs()).sum();
        }
    }
    let magnitude: f64 = heap.iter().map(|s| s.value.abs()).sum();
    let value: f64 = heap.iter().map(|s| s.value).sum();
    let error_estimate: f64 = heap.iter().map(|s| s.error).sum();
    if !value.is_finite() {
        return Err(Error::Accuracy {
            estimate: value,
            error_estimate,
            target: opts.abs_tol,
        });
    }
    if error_estimate > target(magnitude) {
        return Err(Error::Accuracy {
            estimate: value,
            error_estimate,
            target: target(magnitude),
        });
    }
    Ok(QuadResult {
        value,
        error_estimate,
        intervals: heap.len(),
    })
}
