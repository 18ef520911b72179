//! The interpolation coefficients `a_j^k`, `b_j^k`, `c_j^k`.
//!
//! All three are integrals over `[t_{j-1}, t_j]` of a quadratic-interpolant
//! derivative against the weakly singular kernel `(t_k^* - s)^{-alpha}`.
//! Writing `D = t_k^* - t_j`, `h = tau_j`, `g = tau_{j+1}` and `x = h / D`,
//! every integrand factors as `D^{-alpha}` times a function of `x` on `[0, 1]`;
//! the routines below work in that normalized form so that the magnitude of
//! `t_k^*` never enters the cancellation.

use crate::error::Result;
use crate::mesh::TimeMesh;
use crate::quadrature::{integrate, QuadratureOptions};

use super::FractionalOrder;

/// Quantities that fix the coefficients for one pair `(k, j)`.
#[derive(Debug, Clone, Copy)]
pub struct Geometry {
    /// `t_k^* - t_j`
    pub near: f64,
    /// `t_k^* - t_{j-1}`
    pub far: f64,
    /// `tau_j`
    pub h: f64,
    /// `tau_{j+1}`
    pub g: f64,
}

impl Geometry {
    /// Requires `1 <= j <= k - 1` and `k <= K`.
    pub fn new(mesh: &TimeMesh, order: &FractionalOrder, k: usize, j: usize) -> Self {
        debug_assert!(j >= 1 && j < k && k <= mesh.num_steps());
        let near = (mesh.node(k - 1) - mesh.node(j)) + order.sigma * mesh.step(k);
        let h = mesh.step(j);
        Self {
            near,
            far: near + h,
            h,
            g: mesh.step(j + 1),
        }
    }

    #[inline]
    pub fn x(&self) -> f64 {
        self.h / self.near
    }
}

/// `t_k^* = t_{k-1} + sigma tau_k`.
pub fn offset_node(mesh: &TimeMesh, order: &FractionalOrder, k: usize) -> f64 {
    mesh.node(k - 1) + order.sigma * mesh.step(k)
}

/// Coefficients by adaptive Gauss–Kronrod quadrature of their defining
/// integrals. `c` is integrated in its by-parts form
/// `alpha h^3 / (g (h + g)) * int_0^1 s (1 - s) (D + s h)^{-alpha-1} ds`,
/// whose integrand is positive.
pub fn coeff_quadrature(
    mesh: &TimeMesh,
    order: &FractionalOrder,
    k: usize,
    j: usize,
    options: &QuadratureOptions,
) -> Result<(f64, f64, f64)> {
    let geo = Geometry::new(mesh, order, k, j);
    coeff_quadrature_geometry(&geo, order, options)
}

pub(crate) fn coeff_quadrature_geometry(
    geo: &Geometry,
    order: &FractionalOrder,
    options: &QuadratureOptions,
) -> Result<(f64, f64, f64)> {
    let alpha = order.alpha;
    let Geometry { near, h, g, .. } = *geo;
    let x = geo.x();
    let scale = near.powf(-alpha);

    // phi = 1 - theta measures the distance from t_j back towards t_{j-1}.
    let a = integrate(
        |phi| (2.0 * h * phi + g) / (h + g) * (1.0 + x * phi).powf(-alpha),
        0.0,
        1.0,
        options,
    )?;
    let b = integrate(
        |phi| (g - h + 2.0 * h * phi) / g * (1.0 + x * phi).powf(-alpha),
        0.0,
        1.0,
        options,
    )?;
    let c = integrate(
        |s| s * (1.0 - s) * (1.0 + x * s).powf(-alpha - 1.0),
        0.0,
        1.0,
        options,
    )?;
    let c_factor = alpha * x * h * h / (g * (h + g));
    Ok((-scale * a.value, scale * b.value, scale * c_factor * c.value))
}

/// `int_0^1 (1 + x p)^{-alpha} dp`
pub(crate) fn moment0(x: f64, alpha: f64) -> f64 {
    let beta = 1.0 - alpha;
    (beta * x.ln_1p()).exp_m1() / (beta * x)
}

const SERIES_LIMIT: f64 = 0.5;

/// Binomial-series coefficients `binom(-alpha, n) x^n`, until negligible.
fn series_terms(x: f64, alpha: f64) -> impl Iterator<Item = (usize, f64)> {
    let mut term = 1.0;
    (0..120).map(move |n| {
        let current = term;
        term *= (-alpha - n as f64) / (n as f64 + 1.0) * x;
        (n, current)
    })
    .take_while(move |&(n, t)| n < 2 || t.abs() > 1e-19 * alpha * x)
}

/// `int_0^1 p (1 + x p)^{-alpha} dp`
fn moment1(x: f64, alpha: f64) -> f64 {
    if x < SERIES_LIMIT {
        series_terms(x, alpha)
            .map(|(n, t)| t / (n as f64 + 2.0))
            .sum()
    } else {
        let beta = 1.0 - alpha;
        let l = x.ln_1p();
        let p2 = ((beta + 1.0) * l).exp_m1() / (beta + 1.0);
        let p1 = (beta * l).exp_m1() / beta;
        (p2 - p1) / (x * x)
    }
}

/// `int_0^1 (1 - 2p) (1 + x p)^{-alpha} dp`
fn moment_odd(x: f64, alpha: f64) -> f64 {
    if x < SERIES_LIMIT {
        series_terms(x, alpha)
            .skip(1)
            .map(|(n, t)| {
                let n = n as f64;
                -t * n / ((n + 1.0) * (n + 2.0))
            })
            .sum()
    } else {
        moment0(x, alpha) - 2.0 * moment1(x, alpha)
    }
}

/// Closed-form `(a, c)`, evaluated through power differences
/// `(1 + x)^p - 1` and, for small `x`, their binomial series, so the result
/// stays accurate even when `tau_j` is tiny compared with `t_k^* - t_j`.
pub fn coeff_closed_form(mesh: &TimeMesh, order: &FractionalOrder, k: usize, j: usize) -> (f64, f64) {
    let geo = Geometry::new(mesh, order, k, j);
    coeff_closed_form_geometry(&geo, order)
}

pub(crate) fn coeff_closed_form_geometry(geo: &Geometry, order: &FractionalOrder) -> (f64, f64) {
    let alpha = order.alpha;
    let Geometry { near, h, g, .. } = *geo;
    let x = geo.x();
    let scale = near.powf(-alpha);
    let i0 = moment0(x, alpha);
    let i1 = moment1(x, alpha);
    let a = -scale * (2.0 * h * i1 + g * i0) / (h + g);
    let c = scale * h * h / (g * (h + g)) * moment_odd(x, alpha);
    (a, c)
}

/// The closed forms exactly as the power expressions read, term by term.
/// Loses accuracy through cancellation once `(t_k^* - t_j) / tau_j` is large;
/// kept for comparison only.
pub fn coeff_closed_form_literal(
    mesh: &TimeMesh,
    order: &FractionalOrder,
    k: usize,
    j: usize,
) -> (f64, f64) {
    let alpha = order.alpha;
    let Geometry { near, far, h, g } = Geometry::new(mesh, order, k, j);
    let p1 = 1.0 - alpha;
    let p2 = 2.0 - alpha;
    let a = g / (p1 * h * (h + g)) * near.powf(p1) - (2.0 * h + g) / (p1 * h * (h + g)) * far.powf(p1)
        + 2.0 / (p2 * p1 * h * (h + g)) * (far.powf(p2) - near.powf(p2));
    let c = 1.0 / (p1 * g * (h + g))
        * (-h * (far.powf(p1) + near.powf(p1)) + 2.0 / p2 * (far.powf(p2) - near.powf(p2)));
    (a, c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::make_graded_mesh;

    #[test]
    fn moments_match_quadrature_across_the_series_switch() {
        let opts = QuadratureOptions::default();
        for &alpha in &[0.01, 0.3, 0.7, 0.99] {
            for &x in &[1e-12, 1e-3, 0.3, 0.499, 0.501, 2.0, 50.0] {
                let q0 = integrate(|p| (1.0 + x * p).powf(-alpha), 0.0, 1.0, &opts).unwrap().value;
                let q1 = integrate(|p| p * (1.0 + x * p).powf(-alpha), 0.0, 1.0, &opts).unwrap().value;
                let qo = integrate(
                    |p| p * (1.0 - p) * (1.0 + x * p).powf(-alpha - 1.0),
                    0.0,
                    1.0,
                    &opts,
                )
                .unwrap()
                .value
                    * alpha
                    * x;
                assert!((moment0(x, alpha) - q0).abs() < 1e-13 * q0, "m0 {alpha} {x}");
                assert!((moment1(x, alpha) - q1).abs() < 1e-13 * q1, "m1 {alpha} {x}");
                assert!(
                    (moment_odd(x, alpha) - qo).abs() < 1e-11 * qo,
                    "odd {alpha} {x}: {} vs {}",
                    moment_odd(x, alpha),
                    qo
                );
            }
        }
    }

    #[test]
    fn literal_and_stable_agree_on_a_mild_mesh() {
        let mesh = make_graded_mesh(1.0, 12, 1.5).unwrap();
        let order = FractionalOrder::new(0.4).unwrap();
        for k in 2..=12 {
            for j in 1..k {
                let (a, c) = coeff_closed_form(&mesh, &order, k, j);
                let (al, cl) = coeff_closed_form_literal(&mesh, &order, k, j);
                assert!((a - al).abs() < 1e-10 * a.abs());
                assert!((c - cl).abs() < 1e-7 * c.abs(), "{k} {j} {c} {cl}");
            }
        }
    }
}
