use std::io::Write;
use std::sync::Arc;

use serde::Serialize;

use super::write_header;
use crate::error::{Error, Result};
use crate::kernel::FractionalOrder;
use crate::mesh::{certify_mesh, make_graded_uniform_mesh, AdmissibilityReport, TimeMesh};
use crate::solver::{solve, FieldFn, Problem, Space};

/// Second-half maximum may exceed the first-half maximum by at most this factor.
pub const PLATEAU_FACTOR: f64 = 1.01;

/// Forcing of a soak run on `[0, 2π]` with Dirichlet ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SoakForcing {
    /// `f = sin x · min(t, 1)`, `u^0 = 0`. Judged by the plateau test.
    RampedSine,
    /// `f = 0`, `u^0 = sin x`. Judged by monotone decay.
    FreeDecay,
}

#[derive(Debug, Clone)]
pub struct SoakConfig {
    pub alpha: f64,
    pub mesh: TimeMesh,
    pub intervals: usize,
    pub forcing: SoakForcing,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SoakVerdict {
    pub forcing: SoakForcing,
    /// `max_{1 <= k <= K/2} |u^k|_{H^1}`.
    pub first_window_max: f64,
    /// `max_{K/2 <= k <= K} |u^k|_{H^1}`.
    pub second_window_max: f64,
    pub nonincreasing: bool,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SoakReport {
    pub alpha: f64,
    pub times: Vec<f64>,
    /// `|u^k|_{H^1}` for `k = 0..=K`.
    pub h1: Vec<f64>,
    pub admissibility: AdmissibilityReport,
    pub warning: Option<String>,
    pub verdict: SoakVerdict,
}

impl SoakReport {
    /// `k,t,h1` per level.
    pub fn write_csv<W: Write>(&self, mut out: W, header: &[String]) -> Result<()> {
        write_header(&mut out, header)?;
        writeln!(out, "k,t,h1")?;
        for (k, (t, h)) in self.times.iter().zip(&self.h1).enumerate() {
            writeln!(out, "{k},{t:.16e},{h:.16e}")?;
        }
        Ok(())
    }
}

/// Graded on `[0, 1]` with `K/5` steps and `r = 2/α`, uniform up to `T`.
pub fn default_soak_mesh(alpha: f64, horizon: f64, k: usize) -> Result<TimeMesh> {
    make_graded_uniform_mesh(1.0, (k / 5).max(2), 2.0 / alpha, horizon, k)
}

/// `(max over [1, K/2], max over [K/2, K], passed)` for the trajectory
/// `h1[0..=K]`.
pub fn plateau_verdict(h1: &[f64]) -> Result<(f64, f64, bool)> {
    if h1.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "plateau test needs K >= 2, got {} levels",
            h1.len()
        )));
    }
    let k = h1.len() - 1;
    let half = k / 2;
    let first = h1[1..=half].iter().copied().fold(0.0, f64::max);
    let second = h1[half..=k].iter().copied().fold(0.0, f64::max);
    Ok((first, second, second <= PLATEAU_FACTOR * first))
}

pub fn is_nonincreasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] <= w[0])
}

/// Runs a soak, collecting the admissibility warning in the report.
pub fn run_stability_soak(config: &SoakConfig) -> Result<SoakReport> {
    run_stability_soak_with(config, |_| {})
}

/// Runs a soak; `warn` receives the admissibility warning before the time
/// loop starts.
pub fn run_stability_soak_with(
    config: &SoakConfig,
    mut warn: impl FnMut(&str),
) -> Result<SoakReport> {
    let order = FractionalOrder::new(config.alpha)?;
    let admissibility = certify_mesh(&config.mesh);
    let warning = (!admissibility.satisfied).then(|| {
        format!(
            "mesh fails the step-ratio admissibility test at k = {}; stability is not guaranteed",
            admissibility.first_violation.unwrap_or(0)
        )
    });
    if let Some(w) = &warning {
        warn(w);
    }

    let (source, initial): (FieldFn, FieldFn) = match config.forcing {
        SoakForcing::RampedSine => (
            Arc::new(|t, p| p[0].sin() * t.min(1.0)),
            Arc::new(|_, _| 0.0),
        ),
        SoakForcing::FreeDecay => (Arc::new(|_, _| 0.0), Arc::new(|_, p| p[0].sin())),
    };
    let problem = Problem::new(
        order,
        Space::Dirichlet1d {
            length: 2.0 * std::f64::consts::PI,
            intervals: config.intervals,
        },
        source,
        initial,
        None,
    )?;
    let state = solve(&problem, &config.mesh)?;
    let h1: Vec<f64> = state.diagnostics.iter().map(|d| d.h1_seminorm).collect();
    let (first_window_max, second_window_max, plateau) = plateau_verdict(&h1)?;
    let nonincreasing = is_nonincreasing(&h1);
    let passed = match config.forcing {
        SoakForcing::RampedSine => plateau,
        SoakForcing::FreeDecay => nonincreasing,
    };

    Ok(SoakReport {
        alpha: config.alpha,
        times: config.mesh.nodes().to_vec(),
        h1,
        admissibility,
        warning,
        verdict: SoakVerdict {
            forcing: config.forcing,
            first_window_max,
            second_window_max,
            nonincreasing,
            passed,
        },
    })
}
