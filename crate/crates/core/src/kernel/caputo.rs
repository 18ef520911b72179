use crate::error::Result;
use crate::quadrature::integrate_tanh_sinh;

use super::FractionalOrder;

/// Caputo derivative `1/Γ(1-α) * int_0^t u'(s) (t - s)^{-α} ds`, given `u'`.
///
/// The interval is split at `t/2` so that each half carries one endpoint
/// singularity (the kernel at `t`, a possibly singular `u'` at `0`); each half
/// is integrated by the double-exponential rule, which supplies the exact
/// distance `t - s` near the upper end.
pub fn caputo_reference<F: Fn(f64) -> f64>(
    derivative: F,
    t: f64,
    order: &FractionalOrder,
) -> Result<f64> {
    const REL_TOL: f64 = 1e-13;
    let alpha = order.alpha;
    let mid = 0.5 * t;
    let left = integrate_tanh_sinh(
        |s, _, _| derivative(s) * (t - s).powf(-alpha),
        0.0,
        mid,
        REL_TOL,
    )?;
    let right = integrate_tanh_sinh(
        |_, from_mid, to_t| derivative(mid + from_mid) * to_t.powf(-alpha),
        mid,
        t,
        REL_TOL,
    )?;
    Ok((left.value + right.value) / order.gamma_1ma)
}
