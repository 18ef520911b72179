//! The coefficient property suites.
//!
//! P1–P8 are sign and monotonicity facts about `a_j^k`, `c_j^k`, `d_j^k` that
//! hold on every mesh; P9–P10 need the ratio condition
//! `1/rho_{j+1} >= 1/(rho_j^2 (1 + rho_j)) - 3`. Q1–Q3 bound the entries of
//! `M` from below on admissible meshes. Every quantifier is checked over the
//! index ranges that the available `n` levels support; statements comparing
//! levels `k` and `k + 1` stop at `k = n - 1`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::kernel::coefficients::moment0;
use crate::kernel::{CoefficientBackend, FractionalOrder, Geometry, KernelTable};
use crate::mesh::{thresholds, TimeMesh};
use crate::quadrature::{integrate, QuadratureOptions};

/// Relative slack granted to every inequality.
pub const STRICTNESS_TOLERANCE: f64 = 1e-12;

/// One failed instance of a property.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub property: &'static str,
    pub j: usize,
    pub k: usize,
    /// `lhs - rhs` for a `lhs > rhs` statement; negative here.
    pub value: f64,
}

/// `lhs > rhs` (or `>=`), failing only below `-tol * max(|lhs|, |rhs|, scale)`.
/// `scale` is the largest coefficient that enters either side, so that a
/// difference of nearly equal coefficients is judged against their size.
fn holds(lhs: f64, rhs: f64, scale: f64) -> bool {
    lhs - rhs > -STRICTNESS_TOLERANCE * lhs.abs().max(rhs.abs()).max(scale)
}

fn max_abs(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |m, v| m.max(v.abs()))
}

struct Collector(Vec<Violation>);

impl Collector {
    fn greater(
        &mut self,
        property: &'static str,
        (j, k): (usize, usize),
        lhs: f64,
        rhs: f64,
        scale: f64,
    ) {
        if !holds(lhs, rhs, scale) {
            self.0.push(Violation {
                property,
                j,
                k,
                value: lhs - rhs,
            });
        }
    }
}

/// Runs P1–P10 over `n` levels (quadrature coefficients).
pub fn check_properties_p(
    mesh: &TimeMesh,
    order: &FractionalOrder,
    n: usize,
) -> Result<Vec<Violation>> {
    let table = KernelTable::build(mesh, order, n, CoefficientBackend::Quadrature)?;
    Ok(check_properties_p_table(&table))
}

/// Runs P1–P10 on every level of `table`.
pub fn check_properties_p_table(table: &KernelTable) -> Vec<Violation> {
    let n = table.levels();
    let a = |k: usize, j: usize| table.row(k).a[j - 1];
    let c = |k: usize, j: usize| table.row(k).c[j - 1];
    let d = |k: usize, j: usize| table.row(k).d_at(j);
    let mut out = Collector(Vec::new());

    for k in 2..=n {
        for j in 1..k {
            out.greater("P1", (j, k), 0.0, a(k, j), 0.0);
            out.greater("P5", (j, k), c(k, j), 0.0, 0.0);
            if k < n {
                out.greater("P2", (j, k), a(k + 1, j), a(k, j), 0.0);
                out.greater("P6", (j, k), c(k, j), c(k + 1, j), 0.0);
            }
        }
        for j in 1..k.saturating_sub(1) {
            out.greater("P3", (j, k), a(k, j), a(k, j + 1), 0.0);
            if k < n {
                let terms = [a(k + 1, j + 1), a(k + 1, j), a(k, j + 1), a(k, j)];
                out.greater(
                    "P4",
                    (j, k),
                    terms[0] - terms[1],
                    terms[2] - terms[3],
                    max_abs(&terms),
                );
            }
        }
        for j in 2..k {
            out.greater("P7", (j, k), d(k, j), 0.0, 0.0);
            if k < n {
                out.greater("P8", (j, k), d(k, j), d(k + 1, j), 0.0);
            }
        }
        for j in 2..k.saturating_sub(1) {
            out.greater("P9", (j, k), d(k, j + 1), d(k, j), 0.0);
            if k < n {
                let terms = [d(k, j + 1), d(k, j), d(k + 1, j + 1), d(k + 1, j)];
                out.greater(
                    "P10",
                    (j, k),
                    terms[0] - terms[1],
                    terms[2] - terms[3],
                    max_abs(&terms),
                );
            }
        }
    }
    out.0
}

/// Runs Q1–Q3 over `n` levels (quadrature coefficients).
pub fn check_properties_q(
    mesh: &TimeMesh,
    order: &FractionalOrder,
    n: usize,
) -> Result<Vec<Violation>> {
    let table = KernelTable::build(mesh, order, n, CoefficientBackend::Quadrature)?;
    check_properties_q_table(mesh, &table)
}

/// Runs Q1–Q3 on every level of `table`.
pub fn check_properties_q_table(mesh: &TimeMesh, table: &KernelTable) -> Result<Vec<Violation>> {
    let n = table.levels();
    let order = table.order;
    let rows: Vec<Vec<Violation>> = (1..=n)
        .into_par_iter()
        .map(|k| q_for_level(mesh, table, &order, k))
        .collect::<Result<_>>()?;
    Ok(rows.into_iter().flatten().collect())
}

fn q_for_level(
    mesh: &TimeMesh,
    table: &KernelTable,
    order: &FractionalOrder,
    k: usize,
) -> Result<Vec<Violation>> {
    let FractionalOrder { alpha, sigma, .. } = *order;
    let rho_star = thresholds().rho_star;
    let weight = rho_star / (1.0 + rho_star);
    let m = |j: usize| table.m(k, j);
    let mut out = Collector(Vec::new());
    let options = QuadratureOptions::default();

    // Q1: (1/tau_j) int_{t_{j-1}}^{min(t_j, t_k^*)} (t_k^* - s)^{-alpha} ds.
    for j in 1..k {
        let geo = Geometry::new(mesh, order, k, j);
        let mean = geo.near.powf(-alpha) * moment0(geo.x(), alpha);
        out.greater("Q1", (j, k), m(j), weight * mean, 0.0);
    }
    out.greater("Q1", (k, k), m(k), weight * order.current_weight(mesh.step(k)), 0.0);

    // Q2, off-diagonal increments.
    for j in 2..k {
        let geo = Geometry::new(mesh, order, k, j);
        let (h, g, far) = (geo.h, geo.g, geo.far);
        let integral = integrate(
            |s| (h + g - s * h) * (1.0 - s) * (far - s * h).powf(-alpha - 1.0),
            0.0,
            1.0,
            &options,
        )?;
        let bound = alpha * h / (h + g) * integral.value;
        out.greater("Q2", (j, k), m(j) - m(j - 1), bound, m(j));
    }
    if k >= 2 {
        let bound = alpha / (2.0 * (1.0 - alpha) * (sigma * mesh.step(k)).powf(alpha));
        out.greater("Q2", (k, k), m(k) - m(k - 1), bound, m(k));
        out.greater("Q3", (k, k), (1.0 - alpha) / sigma * m(k), m(k - 1), 0.0);
    }
    Ok(out.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{make_graded_mesh, satisfies_ratio_condition};

    fn names(v: &[Violation]) -> Vec<&'static str> {
        let mut n: Vec<_> = v.iter().map(|x| x.property).collect();
        n.dedup();
        n
    }

    #[test]
    fn graded_mesh_has_no_p_violations() {
        let mesh = make_graded_mesh(1.0, 12, 2.0).unwrap();
        let order = FractionalOrder::new(0.3).unwrap();
        let v = check_properties_p(&mesh, &order, 12).unwrap();
        assert!(v.is_empty(), "{v:?}");
    }

    #[test]
    fn p2_spot_value_on_uniform_mesh() {
        let mesh = TimeMesh::uniform(4.0, 4).unwrap();
        let order = FractionalOrder::new(0.5).unwrap();
        let t = KernelTable::build(&mesh, &order, 3, CoefficientBackend::Quadrature).unwrap();
        assert!(t.row(3).a[0] - t.row(2).a[0] > 0.0);
    }

    #[test]
    fn ratio_condition_breach_leaves_p1_to_p8_intact() {
        // rho_2 = 0.3, rho_3 = 1 breaks the ratio condition at j = 2.
        let taus = [1.0, 0.3, 0.3, 0.3, 0.3, 0.3];
        let mut nodes = vec![0.0];
        for t in taus {
            nodes.push(nodes.last().unwrap() + t);
        }
        let mesh = TimeMesh::from_nodes(nodes).unwrap();
        assert!(!satisfies_ratio_condition(&mesh));
        let order = FractionalOrder::new(0.5).unwrap();
        let v = check_properties_p(&mesh, &order, 6).unwrap();
        assert!(
            v.iter().all(|x| x.property == "P9" || x.property == "P10"),
            "{:?}",
            names(&v)
        );
    }

    #[test]
    fn graded_q_suite_is_empty() {
        let mesh = make_graded_mesh(1.0, 16, 2.0 / 0.7).unwrap();
        let order = FractionalOrder::new(0.7).unwrap();
        let v = check_properties_q(&mesh, &order, 16).unwrap();
        assert!(v.is_empty(), "{v:?}");
    }

    #[test]
    fn q2_diagonal_on_uniform_mesh() {
        let mesh = TimeMesh::uniform(2.0, 2).unwrap();
        let order = FractionalOrder::new(0.5).unwrap();
        let t = KernelTable::build(&mesh, &order, 2, CoefficientBackend::Quadrature).unwrap();
        let bound = 0.5 / 0.75f64.sqrt();
        assert!((bound - 0.577_35).abs() < 1e-5);
        assert!(t.m(2, 2) - t.m(2, 1) >= bound);
        assert!(check_properties_q_table(&mesh, &t).unwrap().is_empty());
    }

    #[test]
    fn violation_records_the_offending_pair() {
        let mut c = Collector(Vec::new());
        c.greater("P1", (3, 7), 0.0, 1.0, 0.0);
        c.greater("P1", (3, 7), 1.0, 1.0 + 1e-14, 0.0);
        c.greater("P4", (3, 7), 0.0, 1e-20, 1e-6);
        assert_eq!(c.0.len(), 1);
        assert_eq!((c.0[0].j, c.0[0].k, c.0[0].value), (3, 7, -1.0));
    }
}
