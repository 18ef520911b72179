//! Structural diagnostics of the discrete operator: positive semidefiniteness
//! of `M + M^T`, the coefficient property suites, and the complementary kernel.

mod complementary;
mod properties;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::{CoefficientBackend, FractionalOrder, KernelTable};
use crate::mesh::{certify_mesh, TimeMesh};

pub use complementary::{build_complementary_kernel, ComplementaryKernel};
pub use properties::{
    check_properties_p, check_properties_p_table, check_properties_q, check_properties_q_table,
    Violation, STRICTNESS_TOLERANCE,
};

/// Relative tolerance on the smallest eigenvalue of `M + M^T`.
pub const PSD_TOLERANCE: f64 = 1e-10;

/// Outcome of [`check_psd`].
#[derive(Debug, Clone, Serialize)]
pub struct PsdReport {
    pub n: usize,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    /// `g_k(alpha)` for `k = 1..=n`.
    pub g: Vec<f64>,
    /// `[B]_{kk}` computed from `M` and the splitting weights `beta_k`.
    pub diagonal_b: Vec<f64>,
    /// Certified lower bounds `g_k / (2 (1 - alpha))` for `[B]_{kk}`.
    pub diagonal_b_lower: Vec<f64>,
    /// Whether the first `n` steps satisfy the admissibility conditions.
    pub admissible: bool,
    pub passed: bool,
}

/// Assembles `M` for the first `n` levels of `mesh` and certifies it.
pub fn check_psd(mesh: &TimeMesh, order: &FractionalOrder, n: usize) -> Result<PsdReport> {
    let table = KernelTable::build(mesh, order, n, CoefficientBackend::Quadrature)?;
    check_psd_table(mesh, &table)
}

/// As [`check_psd`], reusing an existing kernel table (all its levels).
pub fn check_psd_table(mesh: &TimeMesh, table: &KernelTable) -> Result<PsdReport> {
    let n = table.levels();
    if n == 0 {
        return Err(Error::InvalidParameter("at least one level is required".into()));
    }
    let order = &table.order;
    let m = DMatrix::from_fn(n, n, |i, j| table.m(i + 1, j + 1));
    let sym = &m + m.transpose();
    let eig = sym.symmetric_eigenvalues();
    let min_eigenvalue = eig.min();
    let max_eigenvalue = eig.max();

    let g: Vec<f64> = (1..=n).map(|k| g_value(mesh, table, k)).collect();
    let diagonal_b: Vec<f64> = (1..=n).map(|k| table.m(k, k) - beta(table, k)).collect();
    let diagonal_b_lower = g.iter().map(|gk| gk / (2.0 * (1.0 - order.alpha))).collect();
    let admissible = certify_mesh(&mesh.truncated(n)?).satisfied;

    let passed =
        min_eigenvalue >= -PSD_TOLERANCE * max_eigenvalue.abs() && g.iter().all(|&gk| gk > 0.0);
    Ok(PsdReport {
        n,
        min_eigenvalue,
        max_eigenvalue,
        g,
        diagonal_b,
        diagonal_b_lower,
        admissible,
        passed,
    })
}

/// Diagonal of the `A` part in the splitting `M = A + B`:
/// `2 beta_k = [M]_{k+1,k} + [M]_{k,k-1} - [M]_{k+1,k-1}` for `k < n` and
/// `2 beta_n = [M]_{n,n-1}`, with entries of column 0 read as zero.
pub fn beta(table: &KernelTable, k: usize) -> f64 {
    let n = table.levels();
    let m = |row: usize, col: usize| if col == 0 { 0.0 } else { table.m(row, col) };
    if k < n {
        0.5 * (m(k + 1, k) + m(k, k - 1) - m(k + 1, k - 1))
    } else {
        0.5 * m(k, k - 1)
    }
}

/// `int_0^1 s (rho + s) / (sigma rho + s) ds`.
pub fn g_integral(rho: f64, sigma: f64) -> f64 {
    let sr = sigma * rho;
    0.5 + (1.0 - sigma) * rho * (1.0 - sr * (1.0 / sr).ln_1p())
}

/// `g_k(alpha)` for level `k` of an `n`-level form, where `n = table.levels()`.
///
/// With `n = 1` there is no off-diagonal part and the bound is the diagonal
/// itself, `2 sigma (sigma tau_1)^{-alpha}`; for `k = n = 2` the last-level
/// formula applies.
pub fn g_value(mesh: &TimeMesh, table: &KernelTable, k: usize) -> f64 {
    let n = table.levels();
    let FractionalOrder { alpha, sigma, .. } = table.order;
    let scaled = (sigma * mesh.step(k)).powf(-alpha);
    if n == 1 {
        return 2.0 * sigma * scaled;
    }
    if k == 1 {
        return scaled * (2.0 * sigma - (1.0 - alpha) / mesh.ratio(2).powf(alpha));
    }
    let c = table.row(k).c[k - 2];
    if k == n {
        return (1.0 - alpha) * c + scaled;
    }
    let rho = mesh.ratio(k + 1);
    (1.0 - alpha) * c
        + scaled
            * (1.0
                - alpha * (1.0 - alpha) / ((1.0 + rho) * rho.powf(alpha)) * g_integral(rho, sigma))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::make_graded_mesh;
    use crate::quadrature::{integrate, QuadratureOptions};

    #[test]
    fn single_level_is_a_positive_scalar() {
        let mesh = TimeMesh::uniform(1.0, 3).unwrap();
        let order = FractionalOrder::new(0.5).unwrap();
        let r = check_psd(&mesh, &order, 1).unwrap();
        let m11 = order.current_weight(mesh.step(1));
        assert!((r.min_eigenvalue - 2.0 * m11).abs() < 1e-14);
        assert!(r.passed);
        assert!((r.diagonal_b[0] - m11).abs() < 1e-15);
        assert!((r.diagonal_b_lower[0] - m11).abs() < 1e-14);
    }

    #[test]
    fn uniform_eight_levels() {
        let mesh = TimeMesh::uniform(8.0, 8).unwrap();
        let order = FractionalOrder::new(0.5).unwrap();
        let r = check_psd(&mesh, &order, 8).unwrap();
        assert!(r.min_eigenvalue >= -1e-12 * r.max_eigenvalue);
        assert!(r.g.iter().all(|&g| g > 0.0));
        assert!(r.passed && r.admissible);
    }

    #[test]
    fn g1_on_a_uniform_mesh() {
        let mesh = TimeMesh::uniform(4.0, 4).unwrap();
        let order = FractionalOrder::new(0.3).unwrap();
        let table = KernelTable::build(&mesh, &order, 4, CoefficientBackend::Quadrature).unwrap();
        let expected = order.sigma.powf(-0.3);
        assert!((g_value(&mesh, &table, 1) - expected).abs() < 1e-14);
    }

    #[test]
    fn g_integral_matches_quadrature() {
        for &rho in &[0.36, 0.5, 1.0, 3.0, 50.0] {
            for &alpha in &[0.1, 0.5, 0.9] {
                let sigma = 1.0 - alpha / 2.0;
                let q = integrate(
                    |s| s * (rho + s) / (sigma * rho + s),
                    0.0,
                    1.0,
                    &QuadratureOptions::default(),
                )
                .unwrap()
                .value;
                assert!((g_integral(rho, sigma) - q).abs() < 1e-13 * q);
            }
        }
    }

    #[test]
    fn diagonal_bounds_hold_on_graded_meshes() {
        for &alpha in &[0.3, 0.7] {
            let mesh = make_graded_mesh(1.0, 24, 2.0 / alpha).unwrap();
            let order = FractionalOrder::new(alpha).unwrap();
            for n in [2, 3, 24] {
                let r = check_psd(&mesh, &order, n).unwrap();
                for (k, (lo, b)) in r.diagonal_b_lower.iter().zip(&r.diagonal_b).enumerate() {
                    assert!(lo <= b, "alpha={alpha} n={n} k={}: {lo} > {b}", k + 1);
                }
            }
        }
    }

    #[test]
    fn off_diagonal_part_is_positive_semidefinite() {
        let mesh = make_graded_mesh(1.0, 16, 2.5).unwrap();
        let order = FractionalOrder::new(0.4).unwrap();
        let table = KernelTable::build(&mesh, &order, 16, CoefficientBackend::Quadrature).unwrap();
        let a = DMatrix::from_fn(16, 16, |i, j| {
            if i == j {
                beta(&table, i + 1)
            } else {
                table.m(i + 1, j + 1)
            }
        });
        let eig = (&a + a.transpose()).symmetric_eigenvalues();
        assert!(eig.min() >= -1e-10 * eig.max(), "{}", eig.min());
        assert!((2.0 * beta(&table, 1) - table.m(2, 1)).abs() < 1e-15);
        assert!((2.0 * beta(&table, 16) - table.m(16, 15)).abs() < 1e-15);
    }
}
