//! The L2-1σ discrete fractional derivative.
//!
//! For a time level `k` the operator is
//!
//! ```text
//! L_k u = 1/Γ(1-α) * sum_j [M]_{k,j} (u^j - u^{j-1})
//! ```
//!
//! where the lower-triangular weights `[M]_{k,j}` are assembled from the
//! quadratic-interpolation coefficients `a_j^k`, `b_j^k`, `c_j^k` on the history
//! intervals and the linear-interpolation weight on the current interval.
//! [`KernelRow`] stores everything for one level; [`KernelTable`] caches all
//! rows of a mesh.

mod caputo;
pub mod coefficients;

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mesh::TimeMesh;
use crate::quadrature::QuadratureOptions;

pub use caputo::caputo_reference;
pub use coefficients::{
    coeff_closed_form, coeff_closed_form_literal, coeff_quadrature, offset_node, Geometry,
};

/// A fractional order `alpha` in `(0, 1)` with its derived constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FractionalOrder {
    pub alpha: f64,
    /// `sigma = 1 - alpha / 2`
    pub sigma: f64,
    /// `Γ(1 - alpha)`
    pub gamma_1ma: f64,
    /// `Γ(2 - alpha)`
    pub gamma_2ma: f64,
}

impl FractionalOrder {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidParameter(format!("alpha must lie in (0,1), got {alpha}")));
        }
        Ok(Self {
            alpha,
            sigma: 1.0 - alpha / 2.0,
            gamma_1ma: gamma(1.0 - alpha),
            gamma_2ma: gamma(2.0 - alpha),
        })
    }

    /// Weight of the current interval, `sigma^{1-alpha} / ((1-alpha) tau^alpha)`.
    #[inline]
    pub fn current_weight(&self, tau: f64) -> f64 {
        self.sigma.powf(1.0 - self.alpha) / ((1.0 - self.alpha) * tau.powf(self.alpha))
    }
}

/// Gamma function (Lanczos approximation from `statrs`).
pub fn gamma(x: f64) -> f64 {
    statrs::function::gamma::gamma(x)
}

/// Which route computes the coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum CoefficientBackend {
    /// Adaptive Gauss–Kronrod quadrature of the defining integrals.
    #[default]
    Quadrature,
    /// Closed-form antiderivatives; `b` is recovered as `-a - c`.
    ClosedForm,
}

/// Coefficients and matrix row for one time level `k`.
///
/// Vectors are zero-based: `a[j - 1]` holds `a_j^k` for `1 <= j <= k-1`,
/// `d[j - 2]` holds `d_j^k` for `2 <= j <= k-1`, and `m_row[j - 1]` holds
/// `[M]_{k,j}` for `1 <= j <= k`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelRow {
    pub k: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub d: Vec<f64>,
    pub m_row: Vec<f64>,
    /// `t_k^* = t_{k-1} + sigma tau_k`
    pub t_star: f64,
    /// `tau_k`
    pub tau: f64,
}

impl KernelRow {
    /// `[M]_{k,j}`, one-based.
    #[inline]
    pub fn m(&self, j: usize) -> f64 {
        self.m_row[j - 1]
    }

    #[inline]
    pub fn diagonal(&self) -> f64 {
        self.m_row[self.k - 1]
    }

    /// `a_j^k`, with `a_1^1 = 0`.
    pub fn a_at(&self, j: usize) -> f64 {
        if self.k == 1 {
            0.0
        } else {
            self.a[j - 1]
        }
    }

    /// `c_j^k`, with `c_0^k = 0`.
    pub fn c_at(&self, j: usize) -> f64 {
        if j == 0 {
            0.0
        } else {
            self.c[j - 1]
        }
    }

    /// `d_j^k = c_{j-1}^k - a_j^k`, `2 <= j <= k-1`.
    pub fn d_at(&self, j: usize) -> f64 {
        self.d[j - 2]
    }

    /// Weights `w_0..w_{k-1}` of the history form
    /// `Γ(1-α) L_k u = [M]_{k,k} u^k - sum_i w_i u^i`, with `w_0 = [M]_{k,1}`
    /// and `w_{j-1} = [M]_{k,j} - [M]_{k,j-1}`.
    pub fn history_weights(&self) -> Vec<f64> {
        let mut w = Vec::with_capacity(self.k);
        w.push(self.m_row[0]);
        w.extend(self.m_row.windows(2).map(|p| p[1] - p[0]));
        w
    }
}

/// Builds the row for level `k`, `1 <= k <= K`.
pub fn build_kernel_row(
    mesh: &TimeMesh,
    order: &FractionalOrder,
    k: usize,
    backend: CoefficientBackend,
) -> Result<KernelRow> {
    build_kernel_row_with(mesh, order, k, backend, &QuadratureOptions::default())
}

pub fn build_kernel_row_with(
    mesh: &TimeMesh,
    order: &FractionalOrder,
    k: usize,
    backend: CoefficientBackend,
    options: &QuadratureOptions,
) -> Result<KernelRow> {
    if k < 1 || k > mesh.num_steps() {
        return Err(Error::InvalidParameter(format!(
            "level {k} outside 1..={}",
            mesh.num_steps()
        )));
    }
    let mut a = Vec::with_capacity(k - 1);
    let mut b = Vec::with_capacity(k - 1);
    let mut c = Vec::with_capacity(k - 1);
    for j in 1..k {
        let geo = Geometry::new(mesh, order, k, j);
        let (aj, bj, cj) = match backend {
            CoefficientBackend::Quadrature => {
                coefficients::coeff_quadrature_geometry(&geo, order, options)?
            }
            CoefficientBackend::ClosedForm => {
                let (aj, cj) = coefficients::coeff_closed_form_geometry(&geo, order);
                (aj, -aj - cj, cj)
            }
        };
        a.push(aj);
        b.push(bj);
        c.push(cj);
    }

    let d: Vec<f64> = (2..k).map(|j| c[j - 2] - a[j - 1]).collect();
    let tau = mesh.step(k);
    let current = order.current_weight(tau);
    let mut m_row = Vec::with_capacity(k);
    if k == 1 {
        m_row.push(current);
    } else {
        m_row.push(-a[0]);
        m_row.extend_from_slice(&d);
        m_row.push(c[k - 2] + current);
    }

    Ok(KernelRow {
        k,
        a,
        b,
        c,
        d,
        m_row,
        t_star: offset_node(mesh, order, k),
        tau,
    })
}

/// All kernel rows `1..=n` of a mesh, built once (in parallel) and then read-only.
#[derive(Debug, Clone, Serialize)]
pub struct KernelTable {
    pub order: FractionalOrder,
    pub backend: CoefficientBackend,
    rows: Vec<KernelRow>,
}

impl KernelTable {
    pub fn build(
        mesh: &TimeMesh,
        order: &FractionalOrder,
        n: usize,
        backend: CoefficientBackend,
    ) -> Result<Self> {
        if n > mesh.num_steps() {
            return Err(Error::InvalidParameter(format!(
                "requested {n} levels from a {}-step mesh",
                mesh.num_steps()
            )));
        }
        let rows = (1..=n)
            .into_par_iter()
            .map(|k| build_kernel_row(mesh, order, k, backend))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            order: *order,
            backend,
            rows,
        })
    }

    pub fn levels(&self) -> usize {
        self.rows.len()
    }

    /// Row `k`, one-based.
    pub fn row(&self, k: usize) -> &KernelRow {
        &self.rows[k - 1]
    }

    pub fn rows(&self) -> &[KernelRow] {
        &self.rows
    }

    /// `[M]_{k,j}`, zero when `j > k`.
    pub fn m(&self, k: usize, j: usize) -> f64 {
        if j > k {
            0.0
        } else {
            self.rows[k - 1].m(j)
        }
    }

    /// Dense lower-triangular `M` of size `n x n` (row-major).
    pub fn dense_matrix(&self, n: usize) -> Vec<Vec<f64>> {
        (1..=n)
            .map(|k| (1..=n).map(|j| self.m(k, j)).collect())
            .collect()
    }

    /// Writes `k,j,a,b,c,d,M` for every `1 <= j <= k`. Entries that do not
    /// exist for a given pair are left empty.
    pub fn write_csv<W: Write>(&self, mut out: W, header: &[String]) -> Result<()> {
        for line in header {
            writeln!(out, "# {line}")?;
        }
        writeln!(out, "k,j,a,b,c,d,M")?;
        let fmt = |v: Option<f64>| v.map(|x| format!("{x:.16e}")).unwrap_or_default();
        for row in &self.rows {
            let k = row.k;
            for j in 1..=k {
                let (a, b, c) = if j < k {
                    (Some(row.a[j - 1]), Some(row.b[j - 1]), Some(row.c[j - 1]))
                } else {
                    (None, None, None)
                };
                let d = (j >= 2 && j < k).then(|| row.d_at(j));
                writeln!(
                    out,
                    "{k},{j},{},{},{},{},{}",
                    fmt(a),
                    fmt(b),
                    fmt(c),
                    fmt(d),
                    fmt(Some(row.m(j)))
                )?;
            }
        }
        Ok(())
    }
}

fn check_history<V: AsRef<[f64]>>(row: &KernelRow, history: &[V]) -> Result<usize> {
    if history.len() != row.k + 1 {
        return Err(Error::DimensionMismatch {
            expected: row.k + 1,
            found: history.len(),
        });
    }
    let dim = history[0].as_ref().len();
    for v in history {
        if v.as_ref().len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: v.as_ref().len(),
            });
        }
    }
    Ok(dim)
}

/// `L_k u` in history form, from `[M]_{k,·}` and `u^0..u^k`.
pub fn apply_operator<V: AsRef<[f64]>>(
    row: &KernelRow,
    order: &FractionalOrder,
    history: &[V],
) -> Result<Vec<f64>> {
    let dim = check_history(row, history)?;
    let weights = row.history_weights();
    let diag = row.diagonal();
    let mut out: Vec<f64> = history[row.k].as_ref().iter().map(|v| diag * v).collect();
    for (w, u) in weights.iter().zip(history) {
        for (o, v) in out.iter_mut().zip(u.as_ref()) {
            *o -= w * v;
        }
    }
    debug_assert_eq!(out.len(), dim);
    out.iter_mut().for_each(|o| *o /= order.gamma_1ma);
    Ok(out)
}

/// `L_k u` in increment form:
/// `(c_{k-1}^k δ_k u - a_1^k δ_1 u + sum_{j=2}^{k-1} d_j^k δ_j u) / Γ(1-α)
///  + sigma^{1-α} δ_k u / (Γ(2-α) tau_k^α)`.
pub fn apply_operator_delta<V: AsRef<[f64]>>(
    row: &KernelRow,
    order: &FractionalOrder,
    history: &[V],
) -> Result<Vec<f64>> {
    let dim = check_history(row, history)?;
    let k = row.k;
    let delta = |j: usize, i: usize| history[j].as_ref()[i] - history[j - 1].as_ref()[i];
    let current = order.sigma.powf(1.0 - order.alpha) / (order.gamma_2ma * row.tau.powf(order.alpha));
    Ok((0..dim)
        .map(|i| {
            let mut s = row.c_at(k - 1) * delta(k, i) - row.a_at(1) * delta(1, i);
            for j in 2..k {
                s += row.d_at(j) * delta(j, i);
            }
            s / order.gamma_1ma + current * delta(k, i)
        })
        .collect())
}

/// `L_k u` from the three-point interpolation coefficients:
/// `sum_{j=1}^{k-1} (a_j u^{j-1} + b_j u^j + c_j u^{j+1}) / Γ(1-α)` plus the
/// current-interval term.
pub fn apply_operator_interpolation<V: AsRef<[f64]>>(
    row: &KernelRow,
    order: &FractionalOrder,
    history: &[V],
) -> Result<Vec<f64>> {
    let dim = check_history(row, history)?;
    let k = row.k;
    let current = order.sigma.powf(1.0 - order.alpha) / (order.gamma_2ma * row.tau.powf(order.alpha));
    Ok((0..dim)
        .map(|i| {
            let u = |j: usize| history[j].as_ref()[i];
            let mut s = 0.0;
            for j in 1..k {
                s += row.a[j - 1] * u(j - 1) + row.b[j - 1] * u(j) + row.c[j - 1] * u(j + 1);
            }
            s / order.gamma_1ma + current * (u(k) - u(k - 1))
        })
        .collect())
}
