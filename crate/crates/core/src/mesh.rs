//! Nonuniform time meshes and the step-ratio admissibility test.
//!
//! Indices follow the usual convention: nodes `t_0 = 0 < t_1 < ... < t_K`,
//! steps `tau_j = t_j - t_{j-1}` for `1 <= j <= K` and ratios
//! `rho_j = tau_j / tau_{j-1}` for `2 <= j <= K`. The accessors take these
//! one-based indices directly.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::OnceLock;

use serde::Serialize;

use crate::error::{Error, Result};

/// An immutable time mesh.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeMesh {
    nodes: Vec<f64>,
    steps: Vec<f64>,
    ratios: Vec<f64>,
}

impl TimeMesh {
    /// Builds a mesh from explicit nodes. The first node must be zero and the
    /// nodes strictly increasing; at least one step is required.
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "a mesh needs at least two nodes, got {}",
                nodes.len()
            )));
        }
        if nodes[0] != 0.0 {
            return Err(Error::InvalidParameter(format!(
                "first node must be 0, got {}",
                nodes[0]
            )));
        }
        if let Some(bad) = nodes.iter().position(|t| !t.is_finite()) {
            return Err(Error::InvalidParameter(format!("node {bad} is not finite")));
        }
        let steps: Vec<f64> = nodes.windows(2).map(|w| w[1] - w[0]).collect();
        if let Some(i) = steps.iter().position(|&s| s <= 0.0) {
            return Err(Error::NonMonotoneMesh {
                index: i + 1,
                step: steps[i],
            });
        }
        let ratios = steps.windows(2).map(|w| w[1] / w[0]).collect();
        Ok(Self {
            nodes,
            steps,
            ratios,
        })
    }

    /// Uniform mesh with `k` steps on `[0, horizon]`.
    pub fn uniform(horizon: f64, k: usize) -> Result<Self> {
        if k < 1 || !(horizon > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "uniform mesh needs K >= 1 and T > 0 (K={k}, T={horizon})"
            )));
        }
        let nodes = (0..=k)
            .map(|j| (j as f64 / k as f64) * horizon)
            .collect();
        Self::from_nodes(nodes)
    }

    /// Number of steps `K`.
    pub fn num_steps(&self) -> usize {
        self.steps.len()
    }

    pub fn horizon(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn steps(&self) -> &[f64] {
        &self.steps
    }

    /// Ratios `rho_2 .. rho_K`.
    pub fn ratios(&self) -> &[f64] {
        &self.ratios
    }

    /// `t_j` for `0 <= j <= K`.
    #[inline]
    pub fn node(&self, j: usize) -> f64 {
        self.nodes[j]
    }

    /// `tau_j` for `1 <= j <= K`.
    #[inline]
    pub fn step(&self, j: usize) -> f64 {
        self.steps[j - 1]
    }

    /// `rho_j` for `2 <= j <= K`.
    #[inline]
    pub fn ratio(&self, j: usize) -> f64 {
        self.ratios[j - 2]
    }

    /// Mesh truncated to its first `k` steps.
    pub fn truncated(&self, k: usize) -> Result<Self> {
        if k < 1 || k > self.num_steps() {
            return Err(Error::InvalidParameter(format!(
                "cannot truncate a {}-step mesh to {k} steps",
                self.num_steps()
            )));
        }
        Self::from_nodes(self.nodes[..=k].to_vec())
    }

    /// Writes one node per line with 17 significant digits. Lines of `header`
    /// are emitted first, each prefixed with `# `.
    pub fn write_to<W: Write>(&self, mut out: W, header: &[String]) -> Result<()> {
        for line in header {
            writeln!(out, "# {line}")?;
        }
        for t in &self.nodes {
            writeln!(out, "{t:.16e}")?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for t in &self.nodes {
            let _ = writeln!(s, "{t:.16e}");
        }
        s
    }

    /// Parses the format written by [`TimeMesh::write_to`]. Blank lines and
    /// lines starting with `#` are ignored.
    pub fn read_from<R: BufRead>(input: R) -> Result<Self> {
        let mut nodes = Vec::new();
        for (lineno, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let t: f64 = line.parse().map_err(|_| {
                Error::Parse(format!("line {}: not a number: {line:?}", lineno + 1))
            })?;
            nodes.push(t);
        }
        Self::from_nodes(nodes)
    }

    pub fn save(&self, path: &Path, header: &[String]) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_to(std::io::BufWriter::new(file), header)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(file))
    }
}

/// Graded mesh `t_j = (j/K)^r T`.
pub fn make_graded_mesh(horizon: f64, k: usize, r: f64) -> Result<TimeMesh> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("graded mesh needs K >= 2, got {k}")));
    }
    if !(r >= 1.0) || !r.is_finite() {
        return Err(Error::InvalidParameter(format!("grading exponent must be >= 1, got {r}")));
    }
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidParameter(format!("horizon must be > 0, got {horizon}")));
    }
    let nodes = (0..=k)
        .map(|j| (j as f64 / k as f64).powf(r) * horizon)
        .collect();
    TimeMesh::from_nodes(nodes)
}

/// Graded mesh whose exponent decreases linearly from `2/alpha + 1.5` at
/// `j = 1` to `2/alpha - 1.5` at `j = K`: `t_j = (j/K)^{r_j} T`.
///
/// Monotonicity of the resulting nodes is checked, not assumed.
pub fn make_r_variable_mesh(horizon: f64, k: usize, alpha: f64) -> Result<TimeMesh> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!(
            "r-variable mesh needs K >= 2, got {k}"
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha must lie in (0,1), got {alpha}")));
    }
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidParameter(format!("horizon must be > 0, got {horizon}")));
    }
    let nodes = std::iter::once(0.0)
        .chain((1..=k).map(|j| {
            let r = r_variable_exponent(j, k, alpha);
            (j as f64 / k as f64).powf(r) * horizon
        }))
        .collect();
    TimeMesh::from_nodes(nodes)
}

/// Exponent `r_j` of the r-variable mesh.
pub fn r_variable_exponent(j: usize, k: usize, alpha: f64) -> f64 {
    2.0 / alpha + 1.5 - 3.0 * (j as f64 - 1.0) / (k as f64 - 1.0)
}

/// Graded mesh on `[0, t_graded]` with `k_graded` steps followed by a uniform
/// tail up to `horizon`, `k_total` steps overall.
pub fn make_graded_uniform_mesh(
    t_graded: f64,
    k_graded: usize,
    r: f64,
    horizon: f64,
    k_total: usize,
) -> Result<TimeMesh> {
    if !(horizon > t_graded) || k_total <= k_graded {
        return Err(Error::InvalidParameter(format!(
            "need horizon > t_graded and k_total > k_graded (T={horizon}, t_graded={t_graded}, K={k_total}, K0={k_graded})"
        )));
    }
    let head = make_graded_mesh(t_graded, k_graded, r)?;
    let tail = k_total - k_graded;
    let mut nodes = head.nodes;
    nodes.extend(
        (1..=tail).map(|i| t_graded + (horizon - t_graded) * (i as f64 / tail as f64)),
    );
    TimeMesh::from_nodes(nodes)
}

/// The two ratio thresholds of the admissibility test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Thresholds {
    /// Positive root of `rho (1 + rho) = 1 - 3 rho^2 (1 + rho)`.
    pub rho_star: f64,
    /// Positive root of `1 - 3 rho^2 (1 + rho) = 0`.
    pub eta: f64,
}

fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    let mut f_lo = f(lo);
    debug_assert!(f_lo * f(hi) < 0.0);
    while hi - lo > 1e-15 {
        let mid = 0.5 * (lo + hi);
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return mid;
        }
        if (f_mid < 0.0) == (f_lo < 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Computes `rho_*` and `eta` by bisection on `[0.1, 0.9]`.
pub fn compute_thresholds() -> Thresholds {
    let rho_star = bisect(
        |r| r * (1.0 + r) - (1.0 - 3.0 * r * r * (1.0 + r)),
        0.1,
        0.9,
    );
    let eta = bisect(|r| 1.0 - 3.0 * r * r * (1.0 + r), 0.1, 0.9);
    Thresholds { rho_star, eta }
}

/// Cached thresholds.
pub fn thresholds() -> Thresholds {
    static CELL: OnceLock<Thresholds> = OnceLock::new();
    *CELL.get_or_init(compute_thresholds)
}

/// Upper bound on `rho_{k+1}` when `rho_* < rho_k < eta`.
pub fn ratio_upper_bound(rho: f64) -> f64 {
    let q = rho * rho * (1.0 + rho);
    q / (1.0 - 3.0 * q)
}

/// Verdict of [`certify_mesh`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdmissibilityReport {
    pub satisfied: bool,
    /// Smallest `k` whose condition fails.
    pub first_violation: Option<usize>,
    pub rho_star: f64,
    pub eta: f64,
    /// Slack of the binding inequality for `k = 2..=K`; entry `i` belongs to
    /// `k = i + 2`. Negative entries mark violations.
    pub per_step_margin: Vec<f64>,
}

/// Checks every consecutive ratio pair `(rho_k, rho_{k+1})`, `2 <= k <= K-1`,
/// against the feasible region, and `rho_k > rho_*` for every `k >= 2`.
pub fn certify_mesh(mesh: &TimeMesh) -> AdmissibilityReport {
    let Thresholds { rho_star, eta } = thresholds();
    let k_max = mesh.num_steps();
    let mut margins = Vec::with_capacity(k_max.saturating_sub(1));
    let mut first_violation = None;

    for k in 2..=k_max {
        let rho = mesh.ratio(k);
        let (ok, margin) = if rho <= rho_star {
            (false, rho - rho_star)
        } else if k == k_max {
            (true, rho - rho_star)
        } else {
            let next = mesh.ratio(k + 1);
            let lower = next - rho_star;
            if rho >= eta {
                (lower > 0.0, lower)
            } else {
                let upper = ratio_upper_bound(rho) - next;
                (lower > 0.0 && upper >= 0.0, lower.min(upper))
            }
        };
        if !ok && first_violation.is_none() {
            first_violation = Some(k);
        }
        margins.push(margin);
    }

    AdmissibilityReport {
        satisfied: first_violation.is_none(),
        first_violation,
        rho_star,
        eta,
        per_step_margin: margins,
    }
}

/// Whether `1/rho_{j+1} >= 1/(rho_j^2 (1 + rho_j)) - 3` holds for every
/// `2 <= j <= K-1`.
pub fn satisfies_ratio_condition(mesh: &TimeMesh) -> bool {
    (2..mesh.num_steps()).all(|j| ratio_condition_holds(mesh.ratio(j), mesh.ratio(j + 1)))
}

pub fn ratio_condition_holds(rho: f64, rho_next: f64) -> bool {
    1.0 / rho_next >= 1.0 / (rho * rho * (1.0 + rho)) - 3.0
}

/// Whether every ratio `rho_k`, `k >= 2`, is at least `eta`.
pub fn ratios_at_least_eta(mesh: &TimeMesh) -> bool {
    let eta = thresholds().eta;
    mesh.ratios().iter().all(|&r| r >= eta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graded_nodes() {
        let m = make_graded_mesh(1.0, 4, 1.0).unwrap();
        assert_eq!(m.nodes(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        let m = make_graded_mesh(1.0, 2, 2.0).unwrap();
        assert_eq!(m.nodes(), &[0.0, 0.25, 1.0]);
    }

    #[test]
    fn graded_rejects_bad_parameters() {
        assert!(make_graded_mesh(1.0, 1, 2.0).is_err());
        assert!(make_graded_mesh(1.0, 4, 0.5).is_err());
        assert!(make_graded_mesh(0.0, 4, 2.0).is_err());
        assert!(make_graded_mesh(-1.0, 4, 2.0).is_err());
    }

    #[test]
    fn graded_r1_is_uniform() {
        for k in [3, 7, 40, 640] {
            let g = make_graded_mesh(2.5, k, 1.0).unwrap();
            let u = TimeMesh::uniform(2.5, k).unwrap();
            assert_eq!(g, u);
        }
    }

    #[test]
    fn r_variable_two_steps() {
        let m = make_r_variable_mesh(1.0, 2, 0.7).unwrap();
        let r1: f64 = 2.0 / 0.7 + 1.5;
        assert!((r_variable_exponent(1, 2, 0.7) - r1).abs() < 1e-15);
        assert!((r_variable_exponent(2, 2, 0.7) - (2.0 / 0.7 - 1.5)).abs() < 1e-15);
        assert!((r1 - 4.357_142_857).abs() < 1e-9);
        assert_eq!(m.node(1), 0.5f64.powf(r1));
        assert_eq!(m.node(2), 1.0);
    }

    #[test]
    fn r_variable_ends_at_horizon() {
        for alpha in [0.1, 0.3, 0.5, 0.7, 0.9] {
            for k in [2, 3, 10, 640] {
                let m = make_r_variable_mesh(3.0, k, alpha).unwrap();
                assert_eq!(m.horizon(), 3.0);
            }
        }
    }

    #[test]
    fn r_variable_rejects_bad_alpha() {
        assert!(make_r_variable_mesh(1.0, 10, 0.0).is_err());
        assert!(make_r_variable_mesh(1.0, 10, 1.0).is_err());
        assert!(make_r_variable_mesh(1.0, 1, 0.5).is_err());
    }

    #[test]
    fn from_nodes_detects_non_monotone() {
        let err = TimeMesh::from_nodes(vec![0.0, 0.5, 0.4, 1.0]).unwrap_err();
        assert!(matches!(err, Error::NonMonotoneMesh { index: 2, .. }));
        assert!(TimeMesh::from_nodes(vec![0.1, 0.5]).is_err());
        assert!(TimeMesh::from_nodes(vec![0.0]).is_err());
    }

    #[test]
    fn ratios_recompute_from_steps() {
        let m = make_graded_mesh(1.0, 9, 2.3).unwrap();
        assert_eq!(m.ratios().len(), m.num_steps() - 1);
        for j in 2..=m.num_steps() {
            assert_eq!(m.ratio(j), m.step(j) / m.step(j - 1));
        }
    }

    #[test]
    fn threshold_values() {
        let th = compute_thresholds();
        assert!((th.rho_star - 0.356341).abs() < 1e-6);
        assert!((th.eta - 0.475329).abs() < 1e-6);
        let r = th.rho_star;
        assert!((r * (1.0 + r) - (1.0 - 3.0 * r * r * (1.0 + r))).abs() <= 1e-10);
        let e = th.eta;
        assert!((1.0 - 3.0 * e * e * (1.0 + e)).abs() <= 1e-10);
    }

    #[test]
    fn uniform_mesh_is_admissible() {
        let rep = certify_mesh(&TimeMesh::uniform(1.0, 10).unwrap());
        assert!(rep.satisfied);
        assert_eq!(rep.first_violation, None);
        assert_eq!(rep.per_step_margin.len(), 9);
    }

    #[test]
    fn small_ratio_is_flagged() {
        let mesh = TimeMesh::from_nodes(vec![0.0, 1.0, 1.3, 2.3]).unwrap();
        assert!((mesh.ratio(2) - 0.3).abs() < 1e-12);
        let rep = certify_mesh(&mesh);
        assert!(!rep.satisfied);
        assert_eq!(rep.first_violation, Some(2));
        assert!(rep.per_step_margin[0] < 0.0);
    }

    #[test]
    fn conditional_branch_upper_bound() {
        // rho_2 = 0.4 lies in (rho_*, eta); the bound on rho_3 is finite.
        let bound = ratio_upper_bound(0.4);
        let ok = TimeMesh::from_nodes(vec![0.0, 1.0, 1.4, 1.4 + 0.4 * bound * 0.99]).unwrap();
        assert!(certify_mesh(&ok).satisfied);
        let bad = TimeMesh::from_nodes(vec![0.0, 1.0, 1.4, 1.4 + 0.4 * bound * 1.01]).unwrap();
        let rep = certify_mesh(&bad);
        assert_eq!(rep.first_violation, Some(2));
    }

    #[test]
    fn text_round_trip_is_bit_exact() {
        let m = make_r_variable_mesh(1.0, 57, 0.3).unwrap();
        let text = format!("# header\n{}", m.to_text());
        let back = TimeMesh::read_from(text.as_bytes()).unwrap();
        assert_eq!(back, m);
    }
}
