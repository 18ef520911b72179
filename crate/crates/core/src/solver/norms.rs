use rayon::prelude::*;
use serde::Serialize;

use super::{periodic::Spectral, Problem, SolverState, Space};

/// Grid-sum `L^2` norm: `sqrt(h sum v_i^2)` in 1D, `sqrt(h^2 sum v_ij^2)` in 2D.
pub fn l2_norm(space: &Space, v: &[f64]) -> f64 {
    let h = space.spacing();
    let cell = match space {
        Space::Dirichlet1d { .. } => h,
        Space::Periodic2d { .. } => h * h,
    };
    (cell * v.iter().map(|x| x * x).sum::<f64>()).sqrt()
}

/// Discrete `H^1` seminorm: `sqrt(sum (v_{i+1} - v_i)^2 / h)` in 1D with zero
/// boundary values, `sqrt(h^2 / n^2 sum λ |v̂|^2)` in 2D.
pub fn h1_seminorm(space: &Space, v: &[f64]) -> f64 {
    match *space {
        Space::Dirichlet1d { .. } => {
            let h = space.spacing();
            let first = v.first().copied().unwrap_or(0.0);
            let last = v.last().copied().unwrap_or(0.0);
            let inner: f64 = v.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
            ((inner + first * first + last * last) / h).sqrt()
        }
        Space::Periodic2d { length, modes } => {
            let s = Spectral::new(modes, length);
            let hat = s.forward(v);
            let weighted: f64 = hat
                .iter()
                .zip(s.lambda())
                .map(|(c, l)| l * c.norm_sqr())
                .sum();
            let n2 = (modes * modes) as f64;
            let h = space.spacing();
            (h * h * weighted / n2).sqrt()
        }
    }
}

/// Per-level norms of a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteNorms {
    /// `||u(t_k) - u^k||_{L^2}` for `k = 0..=K`, when the exact solution is known.
    pub l2_error: Option<Vec<f64>>,
    /// `|u^k|_{H^1}` for `k = 0..=K`.
    pub h1_seminorm: Vec<f64>,
}

/// Recomputes both norms for every stored level.
pub fn discrete_norms(state: &SolverState, problem: &Problem) -> DiscreteNorms {
    let space = &problem.space;
    let h1_seminorm = state
        .history
        .par_iter()
        .map(|u| self::h1_seminorm(space, u))
        .collect();
    let l2_error = problem.exact.as_ref().map(|exact| {
        state
            .history
            .par_iter()
            .enumerate()
            .map(|(k, u)| {
                let reference = space.sample(exact.as_ref(), state.mesh.node(k));
                let diff: Vec<f64> = reference.iter().zip(u).map(|(a, b)| a - b).collect();
                l2_norm(space, &diff)
            })
            .collect()
    });
    DiscreteNorms {
        l2_error,
        h1_seminorm,
    }
}
