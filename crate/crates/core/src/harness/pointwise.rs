use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use super::{write_header, MeshFamily, SpaceConfig};
use crate::error::{Error, Result};
use crate::kernel::FractionalOrder;
use crate::solver::solve;

/// Error at one level of one family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PointwiseRow {
    pub k: usize,
    pub t: f64,
    pub tau: f64,
    pub error: f64,
}

/// Levels `1..=K` of one family.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointwiseCurve {
    pub mesh: String,
    pub rows: Vec<PointwiseRow>,
    pub max_error: f64,
}

/// Solves the manufactured problem on each family with `K` steps and records
/// `(t_k, τ_k, ||u(t_k) - u^k||)` per level. Families run in parallel.
pub fn run_pointwise_comparison(
    alpha: f64,
    k: usize,
    families: &[MeshFamily],
    space: SpaceConfig,
    horizon: f64,
) -> Result<Vec<PointwiseCurve>> {
    let order = FractionalOrder::new(alpha)?;
    families
        .par_iter()
        .map(|family| {
            let mesh = family.build(horizon, k, alpha)?;
            let problem = space.problem(order)?;
            let state = solve(&problem, &mesh)?;
            let rows: Vec<PointwiseRow> = (1..=mesh.num_steps())
                .map(|j| {
                    let error = state.diagnostics[j]
                        .l2_error
                        .ok_or_else(|| Error::InvalidInput("no exact solution".into()))?;
                    Ok(PointwiseRow {
                        k: j,
                        t: mesh.node(j),
                        tau: mesh.step(j),
                        error,
                    })
                })
                .collect::<Result<_>>()?;
            let max_error = rows.iter().map(|r| r.error).fold(0.0, f64::max);
            Ok(PointwiseCurve {
                mesh: family.to_string(),
                rows,
                max_error,
            })
        })
        .collect()
}

/// Long format: `mesh,k,t,tau,error`.
pub fn write_pointwise_csv<W: Write>(
    curves: &[PointwiseCurve],
    mut out: W,
    header: &[String],
) -> Result<()> {
    write_header(&mut out, header)?;
    writeln!(out, "mesh,k,t,tau,error")?;
    for c in curves {
        for r in &c.rows {
            writeln!(
                out,
                "{},{},{:.16e},{:.16e},{:.16e}",
                c.mesh, r.k, r.t, r.tau, r.error
            )?;
        }
    }
    Ok(())
}
