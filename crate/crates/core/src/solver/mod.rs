//! Time marching of the L2-1σ scheme
//!
//! ```text
//! L_k u = (1 - α/2) Δ_h u^k + (α/2) Δ_h u^{k-1} + f(t_k^*, ·)
//! ```
//!
//! with either a 1D homogeneous-Dirichlet central-difference Laplacian or a
//! 2D periodic Fourier-spectral one. Every accepted step is checked by
//! substituting the new level back into the scheme through
//! [`apply_operator`](crate::kernel::apply_operator).

mod dirichlet;
mod norms;
mod periodic;

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::{
    apply_operator, gamma, offset_node, CoefficientBackend, FractionalOrder, KernelRow,
    KernelTable,
};
use crate::mesh::TimeMesh;

pub use norms::{discrete_norms, h1_seminorm, l2_norm, DiscreteNorms};

/// A scalar field `(t, point) -> value`; `point` is `[x]` or `[x, y]`.
pub type FieldFn = Arc<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>;

/// Spatial discretization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Space {
    /// `[0, length]` split into `intervals` cells; unknowns at the interior nodes.
    Dirichlet1d { length: f64, intervals: usize },
    /// `[0, length)^2` with `modes x modes` equispaced points.
    Periodic2d { length: f64, modes: usize },
}

impl Space {
    fn validate(&self) -> Result<()> {
        let (length, n) = match *self {
            Space::Dirichlet1d { length, intervals } => (length, intervals),
            Space::Periodic2d { length, modes } => (length, modes),
        };
        if n < 3 {
            return Err(Error::InvalidParameter(format!("grid size must be at least 3, got {n}")));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::InvalidParameter(format!("domain length must be positive, got {length}")));
        }
        Ok(())
    }

    /// Number of unknowns.
    pub fn len(&self) -> usize {
        match *self {
            Space::Dirichlet1d { intervals, .. } => intervals - 1,
            Space::Periodic2d { modes, .. } => modes * modes,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Grid spacing.
    pub fn spacing(&self) -> f64 {
        match *self {
            Space::Dirichlet1d { length, intervals } => length / intervals as f64,
            Space::Periodic2d { length, modes } => length / modes as f64,
        }
    }

    /// Coordinates of unknown `i`.
    pub fn point(&self, i: usize) -> Vec<f64> {
        let h = self.spacing();
        match *self {
            Space::Dirichlet1d { .. } => vec![(i + 1) as f64 * h],
            Space::Periodic2d { modes, .. } => vec![(i / modes) as f64 * h, (i % modes) as f64 * h],
        }
    }

    /// Samples `field(t, ·)` at every unknown.
    pub fn sample(&self, field: &(dyn Fn(f64, &[f64]) -> f64 + Send + Sync), t: f64) -> Vec<f64> {
        (0..self.len())
            .into_par_iter()
            .map(|i| field(t, &self.point(i)))
            .collect()
    }
}

/// A subdiffusion problem on a fixed spatial grid.
#[derive(Clone)]
pub struct Problem {
    pub order: FractionalOrder,
    pub space: Space,
    pub source: FieldFn,
    /// `u^0` at the unknowns.
    pub initial: Vec<f64>,
    pub exact: Option<FieldFn>,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("order", &self.order)
            .field("space", &self.space)
            .field("has_exact", &self.exact.is_some())
            .finish_non_exhaustive()
    }
}

impl Problem {
    /// Samples `initial(0, ·)` on the grid. In 1D the initial data must vanish
    /// at both ends of the interval.
    pub fn new(
        order: FractionalOrder,
        space: Space,
        source: FieldFn,
        initial: FieldFn,
        exact: Option<FieldFn>,
    ) -> Result<Self> {
        space.validate()?;
        if let Space::Dirichlet1d { length, .. } = space {
            let ends = [initial(0.0, &[0.0]), initial(0.0, &[length])];
            if ends.iter().any(|v| v.abs() > 1e-12) {
                return Err(Error::InvalidInput(format!(
                    "initial data must vanish on the boundary, got {ends:?}"
                )));
            }
        }
        let initial = space.sample(initial.as_ref(), 0.0);
        Ok(Self {
            order,
            space,
            source,
            initial,
            exact,
        })
    }

    /// `u = t^α sin x` on `[0, 2π]` with Dirichlet ends,
    /// `f = (Γ(1+α) + t^α) sin x`, `u^0 = 0`.
    pub fn sine_1d(order: FractionalOrder, intervals: usize) -> Result<Self> {
        let alpha = order.alpha;
        let g = gamma(1.0 + alpha);
        Self::new(
            order,
            Space::Dirichlet1d {
                length: 2.0 * std::f64::consts::PI,
                intervals,
            },
            Arc::new(move |t, p| (g + t.powf(alpha)) * p[0].sin()),
            Arc::new(|_, _| 0.0),
            Some(Arc::new(move |t, p| t.powf(alpha) * p[0].sin())),
        )
    }

    /// `u = t^α sin x sin y` on the periodic square `[0, 2π)^2`,
    /// `f = (Γ(1+α) + 2 t^α) sin x sin y`, `u^0 = 0`.
    pub fn sine_2d(order: FractionalOrder, modes: usize) -> Result<Self> {
        let alpha = order.alpha;
        let g = gamma(1.0 + alpha);
        Self::new(
            order,
            Space::Periodic2d {
                length: 2.0 * std::f64::consts::PI,
                modes,
            },
            Arc::new(move |t, p| (g + 2.0 * t.powf(alpha)) * p[0].sin() * p[1].sin()),
            Arc::new(|_, _| 0.0),
            Some(Arc::new(move |t, p| t.powf(alpha) * p[0].sin() * p[1].sin())),
        )
    }
}

/// Per-level record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepDiagnostics {
    pub k: usize,
    pub t: f64,
    /// `|u^k|_{H^1}` (discrete seminorm).
    pub h1_seminorm: f64,
    /// Max-norm scheme residual relative to the size of its terms.
    pub residual: f64,
    /// `||u(t_k) - u^k||_{L^2}` when the exact solution is known.
    pub l2_error: Option<f64>,
}

/// Tolerances of the time loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverOptions {
    /// Largest accepted relative residual of the scheme equation.
    pub residual_tolerance: f64,
    pub backend: CoefficientBackend,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            residual_tolerance: 1e-10,
            backend: CoefficientBackend::Quadrature,
        }
    }
}

/// History `u^0..u^k` and diagnostics of a run.
#[derive(Clone)]
pub struct SolverState {
    pub mesh: TimeMesh,
    pub history: Vec<Vec<f64>>,
    pub k: usize,
    pub diagnostics: Vec<StepDiagnostics>,
    residual_tolerance: f64,
    spectral: Option<periodic::Spectral>,
}

impl fmt::Debug for SolverState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SolverState")
            .field("k", &self.k)
            .field("steps", &self.mesh.num_steps())
            .field("unknowns", &self.history.first().map_or(0, Vec::len))
            .finish_non_exhaustive()
    }
}

impl SolverState {
    /// State at level 0 holding `u^0`.
    pub fn new(problem: &Problem, mesh: TimeMesh, options: &SolverOptions) -> Result<Self> {
        if problem.initial.len() != problem.space.len() {
            return Err(Error::DimensionMismatch {
                expected: problem.space.len(),
                found: problem.initial.len(),
            });
        }
        let spectral = match problem.space {
            Space::Periodic2d { length, modes } => Some(periodic::Spectral::new(modes, length)),
            Space::Dirichlet1d { .. } => None,
        };
        let u0 = problem.initial.clone();
        let first = StepDiagnostics {
            k: 0,
            t: 0.0,
            h1_seminorm: h1_seminorm(&problem.space, &u0),
            residual: 0.0,
            l2_error: level_error(problem, 0.0, &u0),
        };
        Ok(Self {
            mesh,
            history: vec![u0],
            k: 0,
            diagnostics: vec![first],
            residual_tolerance: options.residual_tolerance,
            spectral,
        })
    }

    pub fn current(&self) -> &[f64] {
        &self.history[self.k]
    }

    /// `max_k ||u(t_k) - u^k||_{L^2}`, when the exact solution is known.
    pub fn max_error(&self) -> Option<f64> {
        self.diagnostics
            .iter()
            .map(|d| d.l2_error)
            .try_fold(0.0f64, |m, e| e.map(|e| m.max(e)))
    }

    /// Writes `k,t,error,h1,residual` per level.
    pub fn write_diagnostics_csv<W: Write>(&self, mut out: W, header: &[String]) -> Result<()> {
        for line in header {
            writeln!(out, "# {line}")?;
        }
        writeln!(out, "k,t,error,h1,residual")?;
        for d in &self.diagnostics {
            let err = d.l2_error.map(|e| format!("{e:.16e}")).unwrap_or_default();
            writeln!(
                out,
                "{},{:.16e},{},{:.16e},{:.3e}",
                d.k, d.t, err, d.h1_seminorm, d.residual
            )?;
        }
        Ok(())
    }
}

fn level_error(problem: &Problem, t: f64, u: &[f64]) -> Option<f64> {
    problem.exact.as_ref().map(|exact| {
        let reference = problem.space.sample(exact.as_ref(), t);
        let diff: Vec<f64> = reference.iter().zip(u).map(|(a, b)| a - b).collect();
        l2_norm(&problem.space, &diff)
    })
}

/// Writes a snapshot: `x,u` in 1D (boundary nodes included), `x,y,u` in 2D.
pub fn write_snapshot_csv<W: Write>(
    space: &Space,
    values: &[f64],
    mut out: W,
    header: &[String],
) -> Result<()> {
    if values.len() != space.len() {
        return Err(Error::DimensionMismatch {
            expected: space.len(),
            found: values.len(),
        });
    }
    for line in header {
        writeln!(out, "# {line}")?;
    }
    match *space {
        Space::Dirichlet1d { length, .. } => {
            writeln!(out, "x,u")?;
            writeln!(out, "{:.16e},{:.16e}", 0.0, 0.0)?;
            for (i, v) in values.iter().enumerate() {
                writeln!(out, "{:.16e},{v:.16e}", space.point(i)[0])?;
            }
            writeln!(out, "{length:.16e},{:.16e}", 0.0)?;
        }
        Space::Periodic2d { .. } => {
            writeln!(out, "x,y,u")?;
            for (i, v) in values.iter().enumerate() {
                let p = space.point(i);
                writeln!(out, "{:.16e},{:.16e},{v:.16e}", p[0], p[1])?;
            }
        }
    }
    Ok(())
}

/// `sum_i w_i u^i` over the stored history, in parallel over grid chunks.
fn history_sum(weights: &[f64], history: &[Vec<f64>]) -> Vec<f64> {
    let n = history[0].len();
    let mut acc = vec![0.0; n];
    acc.par_chunks_mut(2048).enumerate().for_each(|(c, chunk)| {
        let start = c * 2048;
        let end = start + chunk.len();
        for (w, u) in weights.iter().zip(history) {
            for (a, v) in chunk.iter_mut().zip(&u[start..end]) {
                *a += w * v;
            }
        }
    });
    acc
}

/// Advances `state` by one level using `row`, which must be row `state.k + 1`
/// of the kernel built on `state.mesh`.
pub fn step(mut state: SolverState, row: &KernelRow, problem: &Problem) -> Result<SolverState> {
    let k = state.k + 1;
    if row.k != k {
        return Err(Error::InvalidParameter(format!(
            "kernel row for level {} applied at level {k}",
            row.k
        )));
    }
    if k > state.mesh.num_steps() {
        return Err(Error::InvalidParameter(format!(
            "mesh has only {} steps",
            state.mesh.num_steps()
        )));
    }
    let order = &problem.order;
    let t_star = offset_node(&state.mesh, order, k);
    if (row.t_star - t_star).abs() > 1e-14 * t_star.max(1.0) || row.tau != state.mesh.step(k) {
        return Err(Error::InvalidParameter(format!(
            "kernel row for level {k} was built on a different mesh"
        )));
    }

    // Right-hand side: f^k + (1/Γ(1-α)) sum_i w_i u^i; the (α/2) Δ u^{k-1}
    // term is added by the space-specific solver.
    let weights = row.history_weights();
    let mut rhs = history_sum(&weights, &state.history);
    let source = problem.space.sample(problem.source.as_ref(), t_star);
    for (r, f) in rhs.iter_mut().zip(&source) {
        *r = *r / order.gamma_1ma + f;
    }
    let diag = row.diagonal() / order.gamma_1ma;
    let previous = &state.history[k - 1];

    let (u, lap_new, lap_old) = match problem.space {
        Space::Dirichlet1d { .. } => {
            let h = problem.space.spacing();
            dirichlet::solve_level(diag, order, h, previous, &rhs)?
        }
        Space::Periodic2d { .. } => {
            let spectral = state.spectral.as_ref().expect("periodic state carries its transforms");
            spectral.solve_level(diag, order, previous, &rhs)
        }
    };

    state.history.push(u);
    let residual = scheme_residual(&state, row, problem, &source, &lap_new, &lap_old)?;
    if !(residual <= state.residual_tolerance) {
        return Err(Error::LinearSolveFailure(format!(
            "scheme residual {residual:e} at level {k} exceeds {:e}",
            state.residual_tolerance
        )));
    }
    let u = &state.history[k];
    state.diagnostics.push(StepDiagnostics {
        k,
        t: state.mesh.node(k),
        h1_seminorm: h1_seminorm(&problem.space, u),
        residual,
        l2_error: level_error(problem, state.mesh.node(k), u),
    });
    state.k = k;
    Ok(state)
}

/// `max_i |L_k u - σ Δu^k - (α/2) Δu^{k-1} - f^k| / max_i (sum of term magnitudes)`,
/// where `L_k u` comes from the operator module. `lap_*` hold `(Δ_h v, |Δ_h| |v|)`.
fn scheme_residual(
    state: &SolverState,
    row: &KernelRow,
    problem: &Problem,
    source: &[f64],
    lap_new: &(Vec<f64>, Vec<f64>),
    lap_old: &(Vec<f64>, Vec<f64>),
) -> Result<f64> {
    let order = &problem.order;
    let operator = apply_operator(row, order, &state.history)?;
    let diag = row.diagonal() / order.gamma_1ma;
    let u = &state.history[row.k];
    let half = order.alpha / 2.0;
    let sigma = order.sigma;
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for i in 0..u.len() {
        let r = operator[i] - sigma * lap_new.0[i] - half * lap_old.0[i] - source[i];
        let s = diag * u[i].abs()
            + operator[i].abs()
            + sigma * lap_new.1[i]
            + half * lap_old.1[i]
            + source[i].abs();
        worst = worst.max(r.abs());
        scale = scale.max(s);
    }
    Ok(if scale > 0.0 { worst / scale } else { worst })
}

/// Marches `problem` over all steps of `mesh` with default options.
pub fn solve(problem: &Problem, mesh: &TimeMesh) -> Result<SolverState> {
    solve_with(problem, mesh, &SolverOptions::default())
}

pub fn solve_with(problem: &Problem, mesh: &TimeMesh, options: &SolverOptions) -> Result<SolverState> {
    let table = KernelTable::build(mesh, &problem.order, mesh.num_steps(), options.backend)?;
    solve_with_table(problem, mesh, &table, options)
}

/// Marches with a prebuilt kernel table (which must cover every step of `mesh`).
pub fn solve_with_table(
    problem: &Problem,
    mesh: &TimeMesh,
    table: &KernelTable,
    options: &SolverOptions,
) -> Result<SolverState> {
    if table.levels() < mesh.num_steps() {
        return Err(Error::DimensionMismatch {
            expected: mesh.num_steps(),
            found: table.levels(),
        });
    }
    let mut state = SolverState::new(problem, mesh.clone(), options)?;
    for k in 1..=mesh.num_steps() {
        state = step(state, table.row(k), problem)?;
    }
    Ok(state)
}

/// 1D Dirichlet solve over the whole mesh.
pub fn solve_1d_dirichlet(problem: &Problem, mesh: &TimeMesh) -> Result<SolverState> {
    if !matches!(problem.space, Space::Dirichlet1d { .. }) {
        return Err(Error::InvalidInput("problem is not posed on a 1D Dirichlet grid".into()));
    }
    solve(problem, mesh)
}

/// 2D periodic spectral solve over the whole mesh.
pub fn solve_2d_periodic(problem: &Problem, mesh: &TimeMesh) -> Result<SolverState> {
    if !matches!(problem.space, Space::Periodic2d { .. }) {
        return Err(Error::InvalidInput("problem is not posed on a 2D periodic grid".into()));
    }
    solve(problem, mesh)
}

/// Fourier coefficients of a 2D periodic grid function (unnormalized DFT).
pub fn spectrum_2d(space: &Space, values: &[f64]) -> Result<Vec<f64>> {
    match *space {
        Space::Periodic2d { length, modes } => {
            Ok(periodic::Spectral::new(modes, length).magnitudes(values))
        }
        Space::Dirichlet1d { .. } => Err(Error::InvalidInput("spectrum needs a periodic grid".into())),
    }
}

#[cfg(test)]
mod tests;
