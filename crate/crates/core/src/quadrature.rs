//! One-dimensional numerical integration.
//!
//! Two integrators live here:
//!
//! * [`integrate`], a globally adaptive Gauss–Kronrod (7/15 point) scheme in the
//!   QUADPACK style. The interval with the largest error estimate is bisected
//!   until the summed estimate meets the tolerance. Used for the smooth
//!   integrands that define the operator coefficients.
//! * [`integrate_tanh_sinh`], a double-exponential rule with level doubling that
//!   hands the integrand its exact distance to each endpoint, so algebraic
//!   endpoint singularities such as `(t - s)^(-alpha)` are resolved without
//!   cancellation.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];

// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Tolerances for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct QuadratureOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-13,
            abs_tol: 1e-15,
            max_subdivisions: 1 << 20,
        }
    }
}

/// Value of an integral together with its error estimate.
#[derive(Debug, Clone, Copy)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub subdivisions: usize,
}

struct Segment {
    lower: f64,
    upper: f64,
    value: f64,
    error: f64,
    roundoff: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
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

fn kronrod15<F: Fn(f64) -> f64>(f: &F, lower: f64, upper: f64) -> Segment {
    let center = 0.5 * (lower + upper);
    let half = 0.5 * (upper - lower);

    let fc = f(center);
    let mut result_k = fc * WGK[7];
    let mut result_g = fc * WG[3];
    let mut result_abs = result_k.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];

    for (i, (&x, &w)) in XGK[..7].iter().zip(WGK[..7].iter()).enumerate() {
        let dx = half * x;
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[i] = f1;
        fv2[i] = f2;
        result_k += w * (f1 + f2);
        result_abs += w * (f1.abs() + f2.abs());
        if i % 2 == 1 {
            result_g += WG[i / 2] * (f1 + f2);
        }
    }

    let mean = 0.5 * result_k;
    let mut result_asc = WGK[7] * (fc - mean).abs();
    for i in 0..7 {
        result_asc += WGK[i] * ((fv1[i] - mean).abs() + (fv2[i] - mean).abs());
    }

    let value = result_k * half;
    let result_abs = result_abs * half.abs();
    let result_asc = result_asc * half.abs();
    let mut error = ((result_k - result_g) * half).abs();
    if result_asc != 0.0 && error != 0.0 {
        error = result_asc * (200.0 * error / result_asc).powf(1.5).min(1.0);
    }

    Segment {
        lower,
        upper,
        value,
        error,
        roundoff: 50.0 * f64::EPSILON * result_abs,
    }
}

/// Globally adaptive Gauss–Kronrod integration of `f` over `[lower, upper]`.
///
/// Converges when the summed error estimate falls below
/// `max(abs_tol, rel_tol * |I|)`, or below the accumulated roundoff floor
/// `50 eps * integral of |f|`, whichever is larger.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    lower: f64,
    upper: f64,
    options: &QuadratureOptions,
) -> Result<Integral> {
    if !(lower.is_finite() && upper.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "integration bounds must be finite, got [{lower}, {upper}]"
        )));
    }
    if lower == upper {
        return Ok(Integral {
            value: 0.0,
            error: 0.0,
            subdivisions: 0,
        });
    }

    let first = kronrod15(&f, lower, upper);
    let mut value = first.value;
    let mut error = first.error;
    let mut roundoff = first.roundoff;
    let mut heap = BinaryHeap::new();
    heap.push(first);
    let mut subdivisions = 0;

    loop {
        if !value.is_finite() || !error.is_finite() {
            return Err(Error::QuadratureNonconvergence {
                lower,
                upper,
                subdivisions,
                error,
            });
        }
        let tolerance = options.abs_tol.max(options.rel_tol * value.abs());
        if error <= tolerance || error <= roundoff {
            return Ok(Integral {
                value,
                error,
                subdivisions,
            });
        }
        if subdivisions >= options.max_subdivisions {
            return Err(Error::QuadratureNonconvergence {
                lower,
                upper,
                subdivisions,
                error,
            });
        }

        let worst = heap.pop().expect("segment heap is never empty");
        let mid = 0.5 * (worst.lower + worst.upper);
        if mid <= worst.lower || mid >= worst.upper {
            // Interval exhausted at machine resolution; nothing left to refine.
            return Err(Error::QuadratureNonconvergence {
                lower,
                upper,
                subdivisions,
                error,
            });
        }
        let left = kronrod15(&f, worst.lower, mid);
        let right = kronrod15(&f, mid, worst.upper);
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        roundoff += left.roundoff + right.roundoff - worst.roundoff;
        heap.push(left);
        heap.push(right);
        subdivisions += 1;

        // The running sums drift; resum every so often.
        if subdivisions % 256 == 0 {
            value = heap.iter().map(|s| s.value).sum();
            error = heap.iter().map(|s| s.error).sum();
            roundoff = heap.iter().map(|s| s.roundoff).sum();
        }
    }
}

/// Double-exponential (tanh-sinh) integration over `[lower, upper]`.
///
/// The integrand is called as `f(x, x - lower, upper - x)` where both
/// distances are computed without subtracting nearby abscissae, so it may be
/// singular (integrably) at either endpoint. Levels are doubled until two
/// successive estimates agree to `rel_tol`.
pub fn integrate_tanh_sinh<F: Fn(f64, f64, f64) -> f64>(
    f: F,
    lower: f64,
    upper: f64,
    rel_tol: f64,
) -> Result<Integral> {
    const T_MAX: f64 = 6.0;
    const MAX_LEVEL: usize = 12;
    const HALF_PI: f64 = std::f64::consts::FRAC_PI_2;

    if lower == upper {
        return Ok(Integral {
            value: 0.0,
            error: 0.0,
            subdivisions: 0,
        });
    }
    let half = 0.5 * (upper - lower);

    // Contribution of the abscissa at parameter t (and its mirror -t).
    let sample = |t: f64| -> f64 {
        let u = HALF_PI * t.sinh();
        let e = (-2.0 * u.abs()).exp();
        // 1 - tanh|u| and 1 + tanh|u|, both without cancellation.
        let near = 2.0 * e / (1.0 + e);
        let far = 2.0 / (1.0 + e);
        let cosh_u = 0.5 * (u.abs().exp() + (-u.abs()).exp());
        let weight = half * HALF_PI * t.cosh() / (cosh_u * cosh_u);
        if weight == 0.0 || near == 0.0 {
            return 0.0;
        }
        let (d_lower, d_upper) = if t >= 0.0 {
            (half * far, half * near)
        } else {
            (half * near, half * far)
        };
        let x = if t >= 0.0 {
            upper - d_upper
        } else {
            lower + d_lower
        };
        weight * f(x, d_lower, d_upper)
    };

    let mut step = 1.0;
    let mut n = (T_MAX / step) as i64;
    let mut sum: f64 = (-n..=n).map(|i| sample(i as f64 * step)).sum();
    let mut estimate = sum * step;
    let mut previous_change = f64::INFINITY;

    for level in 1..=MAX_LEVEL {
        step *= 0.5;
        n = (T_MAX / step) as i64;
        // Only the odd multiples are new at this level.
        let fresh: f64 = (-n..=n)
            .filter(|i| i.rem_euclid(2) == 1)
            .map(|i| sample(i as f64 * step))
            .sum();
        sum += fresh;
        let next = sum * step;
        if !next.is_finite() {
            break;
        }
        let change = (next - estimate).abs();
        estimate = next;
        if level >= 3 && (change <= rel_tol * estimate.abs() || change == 0.0) {
            return Ok(Integral {
                value: estimate,
                error: change.max(previous_change * previous_change),
                subdivisions: level,
            });
        }
        previous_change = change;
    }

    Err(Error::QuadratureNonconvergence {
        lower,
        upper,
        subdivisions: MAX_LEVEL,
        error: previous_change,
    })
}
