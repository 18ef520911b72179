use crate::error::{Error, Result};
use crate::kernel::FractionalOrder;

/// `(Δ_h v, |Δ_h| |v|)` with zero boundary values, where `|Δ_h| |v|` is the
/// stencil applied to absolute values.
pub(super) fn laplacian(v: &[f64], h: f64) -> (Vec<f64>, Vec<f64>) {
    let n = v.len();
    let inv = 1.0 / (h * h);
    let at = |i: isize| if i < 0 || i as usize >= n { 0.0 } else { v[i as usize] };
    let mut lap = Vec::with_capacity(n);
    let mut mag = Vec::with_capacity(n);
    for i in 0..n as isize {
        let (l, c, r) = (at(i - 1), at(i), at(i + 1));
        lap.push((l - 2.0 * c + r) * inv);
        mag.push((l.abs() + 2.0 * c.abs() + r.abs()) * inv);
    }
    (lap, mag)
}

/// Solves `(diag - σ Δ_h) u = (α/2) Δ_h u_prev + rhs` and returns `u` with
/// the Laplacians of `u` and `u_prev`.
#[allow(clippy::type_complexity)]
pub(super) fn solve_level(
    diag: f64,
    order: &FractionalOrder,
    h: f64,
    previous: &[f64],
    rhs: &[f64],
) -> Result<(Vec<f64>, (Vec<f64>, Vec<f64>), (Vec<f64>, Vec<f64>))> {
    let lap_old = laplacian(previous, h);
    let half = order.alpha / 2.0;
    let b: Vec<f64> = rhs.iter().zip(&lap_old.0).map(|(r, l)| r + half * l).collect();
    let off = -order.sigma / (h * h);
    let main = diag + 2.0 * order.sigma / (h * h);
    let u = thomas(main, off, &b)?;
    let lap_new = laplacian(&u, h);
    Ok((u, lap_new, lap_old))
}

/// Thomas algorithm for the symmetric Toeplitz tridiagonal system with
/// diagonal `main` and off-diagonals `off`.
pub(super) fn thomas(main: f64, off: f64, b: &[f64]) -> Result<Vec<f64>> {
    let n = b.len();
    let mut c_prime = vec![0.0; n];
    let mut x = vec![0.0; n];
    let mut denom = main;
    if !(denom.abs() > 0.0) || !denom.is_finite() {
        return Err(Error::LinearSolveFailure(format!("zero pivot {denom:e}")));
    }
    c_prime[0] = off / denom;
    x[0] = b[0] / denom;
    for i in 1..n {
        denom = main - off * c_prime[i - 1];
        if !(denom.abs() > 0.0) || !denom.is_finite() {
            return Err(Error::LinearSolveFailure(format!("zero pivot {denom:e} at row {i}")));
        }
        c_prime[i] = off / denom;
        x[i] = (b[i] - off * x[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        x[i] -= c_prime[i] * x[i + 1];
    }
    Ok(x)
}
