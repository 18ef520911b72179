//! Convergence studies, observed orders, pointwise comparisons across mesh
//! families and long-time stability soaks.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::FractionalOrder;
use crate::mesh::{make_graded_mesh, make_graded_uniform_mesh, make_r_variable_mesh, TimeMesh};
use crate::solver::{solve_with, Problem, SolverOptions, Space};

mod pointwise;
pub mod reference;
mod soak;

pub use pointwise::{run_pointwise_comparison, write_pointwise_csv, PointwiseCurve, PointwiseRow};
pub use soak::{
    default_soak_mesh, is_nonincreasing, plateau_verdict, run_stability_soak,
    run_stability_soak_with, SoakConfig, SoakForcing, SoakReport, SoakVerdict, PLATEAU_FACTOR,
};

/// Grading exponent, either fixed or `multiple / α`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exponent {
    Fixed(f64),
    OverAlpha(f64),
}

impl Exponent {
    pub fn resolve(&self, alpha: f64) -> f64 {
        match *self {
            Exponent::Fixed(r) => r,
            Exponent::OverAlpha(m) => m / alpha,
        }
    }

    /// Row label in the published tables: `1`, `2`, `2/α`.
    pub fn label(&self) -> String {
        match *self {
            Exponent::Fixed(r) => format!("{r}"),
            Exponent::OverAlpha(m) => format!("{m}/α"),
        }
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Exponent::Fixed(r) => write!(f, "{r}"),
            Exponent::OverAlpha(m) => write!(f, "{m}/alpha"),
        }
    }
}

impl FromStr for Exponent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("bad grading exponent {s:?}"));
        let s = s.trim();
        let value = |t: &str| t.trim().parse::<f64>().map_err(|_| bad());
        let e = match s.split_once('/') {
            Some((m, "alpha" | "α")) => Exponent::OverAlpha(value(m)?),
            Some(_) => return Err(bad()),
            None => Exponent::Fixed(value(s)?),
        };
        let raw = match e {
            Exponent::Fixed(r) | Exponent::OverAlpha(r) => r,
        };
        if !(raw > 0.0 && raw.is_finite()) {
            return Err(bad());
        }
        Ok(e)
    }
}

/// Time mesh family, written as a `family:params` descriptor:
/// `uniform`, `graded:r=2`, `graded:r=2/alpha`, `r-variable`,
/// `graded-uniform:r=4,t=1,k=100` or `file:path/to/mesh.txt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum MeshFamily {
    Graded(Exponent),
    RVariable,
    /// Graded on `[0, t_graded]` with `k_graded` steps, uniform afterwards.
    GradedUniform {
        exponent: Exponent,
        t_graded: f64,
        k_graded: usize,
    },
    File(PathBuf),
}

impl MeshFamily {
    /// Builds the mesh for `(T, K, α)`. File meshes ignore all three.
    pub fn build(&self, horizon: f64, k: usize, alpha: f64) -> Result<TimeMesh> {
        match self {
            MeshFamily::Graded(e) => make_graded_mesh(horizon, k, e.resolve(alpha)),
            MeshFamily::RVariable => make_r_variable_mesh(horizon, k, alpha),
            MeshFamily::GradedUniform {
                exponent,
                t_graded,
                k_graded,
            } => make_graded_uniform_mesh(*t_graded, *k_graded, exponent.resolve(alpha), horizon, k),
            MeshFamily::File(path) => TimeMesh::load(path),
        }
    }

    /// Grading exponent at `alpha` for plain graded meshes.
    pub fn graded_exponent(&self, alpha: f64) -> Option<f64> {
        match self {
            MeshFamily::Graded(e) => Some(e.resolve(alpha)),
            _ => None,
        }
    }

    /// Short label used in table rows.
    pub fn label(&self) -> String {
        match self {
            MeshFamily::Graded(e) => format!("r={}", e.label()),
            other => other.to_string(),
        }
    }

    fn is_file(&self) -> bool {
        matches!(self, MeshFamily::File(_))
    }
}

impl fmt::Display for MeshFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeshFamily::Graded(e) => write!(f, "graded:r={e}"),
            MeshFamily::RVariable => write!(f, "r-variable"),
            MeshFamily::GradedUniform {
                exponent,
                t_graded,
                k_graded,
            } => write!(f, "graded-uniform:r={exponent},t={t_graded},k={k_graded}"),
            MeshFamily::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

fn parse_params(desc: &str, params: &str) -> Result<Vec<(String, String)>> {
    params
        .split(',')
        .map(|kv| {
            kv.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| Error::Parse(format!("bad parameter {kv:?} in {desc:?}")))
        })
        .collect()
}

impl FromStr for MeshFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (family, params) = match s.split_once(':') {
            Some((f, p)) => (f, Some(p)),
            None => (s, None),
        };
        let unknown = |key: &str| Error::Parse(format!("unknown parameter {key:?} in {s:?}"));
        match (family, params) {
            ("uniform", None) => Ok(MeshFamily::Graded(Exponent::Fixed(1.0))),
            ("r-variable", None) => Ok(MeshFamily::RVariable),
            ("file", Some(path)) if !path.is_empty() => Ok(MeshFamily::File(PathBuf::from(path))),
            ("graded", Some(p)) => {
                let mut exponent = None;
                for (k, v) in parse_params(s, p)? {
                    match k.as_str() {
                        "r" => exponent = Some(v.parse()?),
                        _ => return Err(unknown(&k)),
                    }
                }
                exponent
                    .map(MeshFamily::Graded)
                    .ok_or_else(|| Error::Parse(format!("missing r in {s:?}")))
            }
            ("graded-uniform", Some(p)) => {
                let (mut exponent, mut t_graded, mut k_graded) = (None, None, None);
                let num = |v: &str| Error::Parse(format!("bad number {v:?} in {s:?}"));
                for (k, v) in parse_params(s, p)? {
                    match k.as_str() {
                        "r" => exponent = Some(v.parse()?),
                        "t" => t_graded = Some(v.parse::<f64>().map_err(|_| num(&v))?),
                        "k" => k_graded = Some(v.parse::<usize>().map_err(|_| num(&v))?),
                        _ => return Err(unknown(&k)),
                    }
                }
                match (exponent, t_graded, k_graded) {
                    (Some(exponent), Some(t_graded), Some(k_graded)) => Ok(MeshFamily::GradedUniform {
                        exponent,
                        t_graded,
                        k_graded,
                    }),
                    _ => Err(Error::Parse(format!("graded-uniform needs r, t and k in {s:?}"))),
                }
            }
            _ => Err(Error::Parse(format!("unknown mesh descriptor {s:?}"))),
        }
    }
}

impl TryFrom<String> for MeshFamily {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<MeshFamily> for String {
    fn from(m: MeshFamily) -> String {
        m.to_string()
    }
}

/// Spatial grid of the benchmark problems: `d1:N` is the 1D Dirichlet problem
/// on `[0, 2π]` with `N` intervals, `p2:N` the 2D periodic problem with
/// `N x N` modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SpaceConfig {
    D1(usize),
    P2(usize),
}

/// Desk-scale 1D grid.
pub const DESK_INTERVALS: usize = 4096;
/// Grid of the published tables.
pub const PAPER_INTERVALS: usize = 10000;

impl Default for SpaceConfig {
    fn default() -> Self {
        SpaceConfig::D1(DESK_INTERVALS)
    }
}

impl SpaceConfig {
    pub fn space(&self) -> Space {
        let length = 2.0 * std::f64::consts::PI;
        match *self {
            SpaceConfig::D1(intervals) => Space::Dirichlet1d { length, intervals },
            SpaceConfig::P2(modes) => Space::Periodic2d { length, modes },
        }
    }

    /// The manufactured problem `u = t^α sin x` or `u = t^α sin x sin y`.
    pub fn problem(&self, order: FractionalOrder) -> Result<Problem> {
        match *self {
            SpaceConfig::D1(n) => Problem::sine_1d(order, n),
            SpaceConfig::P2(n) => Problem::sine_2d(order, n),
        }
    }
}

impl fmt::Display for SpaceConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpaceConfig::D1(n) => write!(f, "d1:{n}"),
            SpaceConfig::P2(n) => write!(f, "p2:{n}"),
        }
    }
}

impl FromStr for SpaceConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("bad space descriptor {s:?}, expected d1:N or p2:N"));
        let (kind, n) = s.trim().split_once(':').ok_or_else(bad)?;
        let n: usize = n.trim().parse().map_err(|_| bad())?;
        if n < 3 {
            return Err(Error::InvalidParameter(format!("grid size must be at least 3, got {n}")));
        }
        match kind {
            "d1" => Ok(SpaceConfig::D1(n)),
            "p2" => Ok(SpaceConfig::P2(n)),
            _ => Err(bad()),
        }
    }
}

impl TryFrom<String> for SpaceConfig {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<SpaceConfig> for String {
    fn from(s: SpaceConfig) -> String {
        s.to_string()
    }
}

/// Relative tolerance ladder against the published cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToleranceProfile {
    /// Whether cells with a published value are checked at all.
    pub enabled: bool,
    /// Cells at or above `cutoff` use `large`, smaller ones `small`.
    pub cutoff: f64,
    pub large: f64,
    pub small: f64,
}

impl Default for ToleranceProfile {
    fn default() -> Self {
        Self {
            enabled: false,
            cutoff: 1e-5,
            large: 0.01,
            small: 0.05,
        }
    }
}

impl ToleranceProfile {
    pub fn ladder() -> Self {
        Self {
            enabled: true,
            ..Self::default()
        }
    }

    pub fn tolerance_for(&self, reference: f64) -> f64 {
        if reference >= self.cutoff {
            self.large
        } else {
            self.small
        }
    }

    pub fn accepts(&self, value: f64, reference: f64) -> bool {
        ((value - reference) / reference).abs() <= self.tolerance_for(reference)
    }
}

/// A convergence study: every `(α, mesh family, K)` combination is one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub alphas: Vec<f64>,
    pub meshes: Vec<MeshFamily>,
    /// Step counts, strictly increasing. Unused by file meshes.
    pub ks: Vec<usize>,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default)]
    pub space: SpaceConfig,
    #[serde(default)]
    pub tolerance: ToleranceProfile,
    /// Directory receiving the CSV tables and the JSON summary.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn default_horizon() -> f64 {
    1.0
}

/// The four graded families of the published tables: `r = 1, 2, 2/α, 3/α`.
pub fn table_families() -> Vec<MeshFamily> {
    vec![
        MeshFamily::Graded(Exponent::Fixed(1.0)),
        MeshFamily::Graded(Exponent::Fixed(2.0)),
        MeshFamily::Graded(Exponent::OverAlpha(2.0)),
        MeshFamily::Graded(Exponent::OverAlpha(3.0)),
    ]
}

impl ExperimentSpec {
    /// Table layout for `alphas`: desk scale (`h = 2π/4096`, `K <= 320`, no
    /// reference check) or the published setting (`h = 2π/10000`,
    /// `K <= 640`, tolerance ladder).
    pub fn tables(alphas: Vec<f64>, paper_exact: bool) -> Self {
        let (ks, space, tolerance) = if paper_exact {
            (
                reference::REFERENCE_KS.to_vec(),
                SpaceConfig::D1(PAPER_INTERVALS),
                ToleranceProfile::ladder(),
            )
        } else {
            (
                vec![40, 80, 160, 320],
                SpaceConfig::D1(DESK_INTERVALS),
                ToleranceProfile::default(),
            )
        };
        Self {
            alphas,
            meshes: table_families(),
            ks,
            horizon: 1.0,
            space,
            tolerance,
            output_dir: None,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.alphas.is_empty() {
            return Err(Error::InvalidParameter("alpha list is empty".into()));
        }
        for &a in &self.alphas {
            FractionalOrder::new(a)?;
        }
        if self.meshes.is_empty() {
            return Err(Error::InvalidParameter("mesh family list is empty".into()));
        }
        if self.meshes.iter().any(|m| !m.is_file()) {
            if self.ks.is_empty() {
                return Err(Error::InvalidParameter("K list is empty".into()));
            }
            if self.ks[0] == 0 || self.ks.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::InvalidParameter(format!(
                    "K list must be positive and strictly increasing, got {:?}",
                    self.ks
                )));
            }
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        Ok(())
    }

    /// `(alpha, family, K)` cells in report order. File meshes contribute one
    /// cell per `alpha`, with `K = None`.
    fn cells(&self) -> Vec<(f64, &MeshFamily, Option<usize>)> {
        let mut cells = Vec::new();
        for &alpha in &self.alphas {
            for family in &self.meshes {
                if family.is_file() {
                    cells.push((alpha, family, None));
                } else {
                    cells.extend(self.ks.iter().map(|&k| (alpha, family, Some(k))));
                }
            }
        }
        cells
    }
}

/// `order_i = ln(e_{i-1}/e_i) / ln(K_i/K_{i-1})` for consecutive pairs.
pub fn compute_orders(errors: &[f64], ks: &[usize]) -> Result<Vec<f64>> {
    if errors.len() != ks.len() {
        return Err(Error::InvalidInput(format!(
            "{} errors for {} step counts",
            errors.len(),
            ks.len()
        )));
    }
    if errors.len() < 2 {
        return Err(Error::InvalidInput("need at least two errors".into()));
    }
    if let Some(e) = errors.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
        return Err(Error::InvalidInput(format!("errors must be positive, got {e}")));
    }
    if ks.windows(2).any(|w| w[1] <= w[0]) || ks[0] == 0 {
        return Err(Error::InvalidInput(format!(
            "step counts must be positive and strictly increasing, got {ks:?}"
        )));
    }
    Ok(errors
        .windows(2)
        .zip(ks.windows(2))
        .map(|(e, k)| (e[0] / e[1]).ln() / (k[1] as f64 / k[0] as f64).ln())
        .collect())
}

/// Graded-mesh convergence order `min(rα, 2)`.
pub fn theoretical_order(alpha: f64, r: f64) -> f64 {
    (r * alpha).min(2.0)
}

/// One solved cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellResult {
    pub alpha: f64,
    pub mesh: String,
    pub k: usize,
    /// `max_k ||u(t_k) - u^k||_{L^2}`.
    pub max_error: f64,
    /// `||u(t_k) - u^k||_{L^2}` for `k = 0..=K`.
    pub errors: Vec<f64>,
    pub times: Vec<f64>,
    pub runtime_seconds: f64,
    pub reference: Option<f64>,
    pub relative_deviation: Option<f64>,
    /// `None` when no check applies.
    pub within_tolerance: Option<bool>,
}

/// A cell that could not be solved.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellFailure {
    pub alpha: f64,
    pub mesh: String,
    pub k: Option<usize>,
    pub validation: bool,
    pub message: String,
}

/// One table row: a mesh family at one `alpha` across all `K`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub alpha: f64,
    pub mesh: String,
    pub label: String,
    pub ks: Vec<usize>,
    pub errors: Vec<Option<f64>>,
    /// Order between columns `i` and `i+1`, when both errors are positive.
    pub orders: Vec<Option<f64>>,
    /// `min(rα, 2)` for graded families.
    pub theoretical_order: Option<f64>,
}

impl ConvergenceRow {
    /// Order at the largest `K` pair.
    pub fn final_order(&self) -> Option<f64> {
        self.orders.last().copied().flatten()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorReport {
    pub spec: ExperimentSpec,
    pub cells: Vec<CellResult>,
    pub rows: Vec<ConvergenceRow>,
    pub failures: Vec<CellFailure>,
    pub runtime_seconds: f64,
}

impl ErrorReport {
    /// Cells whose published value lies outside the tolerance ladder.
    pub fn tolerance_failures(&self) -> Vec<&CellResult> {
        self.cells
            .iter()
            .filter(|c| c.within_tolerance == Some(false))
            .collect()
    }

    pub fn cell(&self, alpha: f64, mesh: &MeshFamily, k: usize) -> Option<&CellResult> {
        let name = mesh.to_string();
        self.cells
            .iter()
            .find(|c| c.alpha == alpha && c.mesh == name && c.k == k)
    }

    /// Table layout: per `alpha`, one `error` and one `order` line per
    /// family, one column per `K`.
    pub fn write_tables_csv<W: Write>(&self, mut out: W, header: &[String]) -> Result<()> {
        write_header(&mut out, header)?;
        let ks = &self.spec.ks;
        write!(out, "alpha,mesh,quantity")?;
        for k in ks {
            write!(out, ",K={k}")?;
        }
        writeln!(out)?;
        for row in self.rows.iter().filter(|r| r.ks == *ks) {
            write!(out, "{},{},error", row.alpha, row.label)?;
            for e in &row.errors {
                write!(out, ",{}", e.map(|e| format!("{e:.4e}")).unwrap_or_default())?;
            }
            writeln!(out)?;
            write!(out, "{},{},order,", row.alpha, row.label)?;
            for o in &row.orders {
                write!(out, ",{}", o.map(|o| format!("{o:.4}")).unwrap_or_default())?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    /// One line per cell, full precision, with the reference comparison.
    pub fn write_cells_csv<W: Write>(&self, mut out: W, header: &[String]) -> Result<()> {
        write_header(&mut out, header)?;
        writeln!(out, "alpha,mesh,K,max_error,reference,relative_deviation,within_tolerance")?;
        for c in &self.cells {
            writeln!(
                out,
                "{},{},{},{:.16e},{},{},{}",
                c.alpha,
                c.mesh,
                c.k,
                c.max_error,
                c.reference.map(|r| format!("{r:e}")).unwrap_or_default(),
                c.relative_deviation.map(|d| format!("{d:.6e}")).unwrap_or_default(),
                c.within_tolerance.map(|b| b.to_string()).unwrap_or_default(),
            )?;
        }
        Ok(())
    }

    /// Per-level errors of every cell.
    pub fn write_levels_csv<W: Write>(&self, mut out: W, header: &[String]) -> Result<()> {
        write_header(&mut out, header)?;
        writeln!(out, "alpha,mesh,K,k,t,error")?;
        for c in &self.cells {
            for (level, (t, e)) in c.times.iter().zip(&c.errors).enumerate() {
                writeln!(out, "{},{},{},{},{:.16e},{:.16e}", c.alpha, c.mesh, c.k, level, t, e)?;
            }
        }
        Ok(())
    }

    /// JSON summary without per-level data.
    pub fn summary_json(&self, header: &[String]) -> serde_json::Value {
        let cells: Vec<_> = self
            .cells
            .iter()
            .map(|c| {
                serde_json::json!({
                    "alpha": c.alpha,
                    "mesh": c.mesh,
                    "K": c.k,
                    "max_error": c.max_error,
                    "reference": c.reference,
                    "relative_deviation": c.relative_deviation,
                    "within_tolerance": c.within_tolerance,
                    "runtime_seconds": c.runtime_seconds,
                })
            })
            .collect();
        serde_json::json!({
            "header": header,
            "spec": self.spec,
            "cells": cells,
            "rows": self.rows,
            "failures": self.failures,
            "tolerance_failures": self.tolerance_failures().len(),
            "runtime_seconds": self.runtime_seconds,
        })
    }

    /// Writes `tables.csv`, `cells.csv`, `levels.csv` and `summary.json`
    /// into `dir` and returns their paths.
    pub fn write_outputs(&self, dir: &Path, header: &[String]) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut paths = Vec::new();
        let mut file = |name: &str| -> Result<fs::File> {
            let p = dir.join(name);
            let f = fs::File::create(&p)?;
            paths.push(p);
            Ok(f)
        };
        self.write_tables_csv(std::io::BufWriter::new(file("tables.csv")?), header)?;
        self.write_cells_csv(std::io::BufWriter::new(file("cells.csv")?), header)?;
        self.write_levels_csv(std::io::BufWriter::new(file("levels.csv")?), header)?;
        let summary = serde_json::to_string_pretty(&self.summary_json(header))
            .map_err(|e| Error::Parse(e.to_string()))?;
        let mut f = file("summary.json")?;
        writeln!(f, "{summary}")?;
        Ok(paths)
    }
}

fn write_header<W: Write>(out: &mut W, header: &[String]) -> Result<()> {
    for line in header {
        writeln!(out, "# {line}")?;
    }
    Ok(())
}

/// Reproducibility header: package version, parameters and tolerances, one
/// `key: value` line each.
pub fn run_header(command: &str, parameters: &[(&str, String)]) -> Vec<String> {
    let mut lines = vec![
        format!("subdiff {} {command}", env!("CARGO_PKG_VERSION")),
    ];
    lines.extend(parameters.iter().map(|(k, v)| format!("{k}: {v}")));
    lines
}

/// Published error of the cell, defined only for the 1D benchmark on the
/// published grid with `T = 1` and a plain graded mesh.
pub fn published_error(
    space: SpaceConfig,
    horizon: f64,
    family: &MeshFamily,
    alpha: f64,
    k: usize,
) -> Option<f64> {
    if space != SpaceConfig::D1(PAPER_INTERVALS) || horizon != 1.0 {
        return None;
    }
    reference::reference_error(alpha, family.graded_exponent(alpha)?, k)
}

/// Builds the problem of a cell from its order and grid.
pub type ProblemFactory = dyn Fn(FractionalOrder, &SpaceConfig) -> Result<Problem> + Sync;

/// Runs every cell of `spec` on the manufactured sine problem.
pub fn run_convergence(spec: &ExperimentSpec) -> Result<ErrorReport> {
    run_convergence_with(spec, &|order, space| space.problem(order))
}

/// Runs every cell of `spec` in parallel on the problems built by `factory`.
/// Failed cells are recorded in the report, not propagated.
pub fn run_convergence_with(spec: &ExperimentSpec, factory: &ProblemFactory) -> Result<ErrorReport> {
    spec.validate()?;
    let start = Instant::now();
    let outcomes: Vec<std::result::Result<CellResult, CellFailure>> = spec
        .cells()
        .into_par_iter()
        .map(|(alpha, family, k)| {
            run_cell(spec, factory, alpha, family, k).map_err(|e| CellFailure {
                alpha,
                mesh: family.to_string(),
                k,
                validation: e.is_validation(),
                message: e.to_string(),
            })
        })
        .collect();

    let mut cells = Vec::new();
    let mut failures = Vec::new();
    for o in outcomes {
        match o {
            Ok(c) => cells.push(c),
            Err(f) => failures.push(f),
        }
    }

    let mut rows = Vec::new();
    for &alpha in &spec.alphas {
        for family in spec.meshes.iter().filter(|m| !m.is_file()) {
            let name = family.to_string();
            let errors: Vec<Option<f64>> = spec
                .ks
                .iter()
                .map(|&k| {
                    cells
                        .iter()
                        .find(|c| c.alpha == alpha && c.mesh == name && c.k == k)
                        .map(|c| c.max_error)
                })
                .collect();
            let orders = errors
                .windows(2)
                .zip(spec.ks.windows(2))
                .map(|(e, k)| match (e[0], e[1]) {
                    (Some(a), Some(b)) => compute_orders(&[a, b], k).ok().map(|o| o[0]),
                    _ => None,
                })
                .collect();
            rows.push(ConvergenceRow {
                alpha,
                mesh: name,
                label: family.label(),
                ks: spec.ks.clone(),
                errors,
                orders,
                theoretical_order: family
                    .graded_exponent(alpha)
                    .map(|r| theoretical_order(alpha, r)),
            });
        }
    }

    Ok(ErrorReport {
        spec: spec.clone(),
        cells,
        rows,
        failures,
        runtime_seconds: start.elapsed().as_secs_f64(),
    })
}

fn run_cell(
    spec: &ExperimentSpec,
    factory: &ProblemFactory,
    alpha: f64,
    family: &MeshFamily,
    k: Option<usize>,
) -> Result<CellResult> {
    let start = Instant::now();
    let order = FractionalOrder::new(alpha)?;
    let mesh = family.build(spec.horizon, k.unwrap_or(0), alpha)?;
    let problem = factory(order, &spec.space)?;
    if problem.exact.is_none() {
        return Err(Error::InvalidInput("convergence cells need an exact solution".into()));
    }
    let state = solve_with(&problem, &mesh, &SolverOptions::default())?;
    let errors: Vec<f64> = state
        .diagnostics
        .iter()
        .map(|d| d.l2_error.unwrap_or(f64::NAN))
        .collect();
    let max_error = errors.iter().copied().fold(0.0, f64::max);

    let reference = published_error(spec.space, spec.horizon, family, alpha, mesh.num_steps());
    let relative_deviation = reference.map(|r| (max_error - r) / r);
    let within_tolerance = match reference {
        Some(r) if spec.tolerance.enabled => Some(spec.tolerance.accepts(max_error, r)),
        _ => None,
    };

    Ok(CellResult {
        alpha,
        mesh: family.to_string(),
        k: mesh.num_steps(),
        max_error,
        times: mesh.nodes().to_vec(),
        errors,
        runtime_seconds: start.elapsed().as_secs_f64(),
        reference,
        relative_deviation,
        within_tolerance,
    })
}
