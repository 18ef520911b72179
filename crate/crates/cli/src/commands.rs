use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use serde_json::json;
use subdiff::analysis::{
    build_complementary_kernel, check_properties_p_table, check_properties_q_table, check_psd_table,
    PSD_TOLERANCE, STRICTNESS_TOLERANCE,
};
use subdiff::harness::{
    default_soak_mesh, published_error, run_convergence, run_header, run_pointwise_comparison,
    run_stability_soak_with, write_pointwise_csv, Exponent, ExperimentSpec, MeshFamily, SoakConfig,
    SoakForcing, SpaceConfig, ToleranceProfile, PAPER_INTERVALS, PLATEAU_FACTOR,
};
use subdiff::mesh::certify_mesh;
use subdiff::solver::{solve_with, write_snapshot_csv, SolverOptions};
use subdiff::{CoefficientBackend, FractionalOrder, KernelTable, TimeMesh};

use crate::args::{
    AnalyzeArgs, Backend, CertifyArgs, Cli, Command, Forcing, GenerateArgs, MeshArgs, SoakArgs,
    SolveArgs, TablesArgs,
};
use crate::Failure;

struct Context<'a> {
    out: &'a Path,
    invocation: &'a str,
}

impl Context<'_> {
    fn header(&self, command: &str, tolerances: String) -> Vec<String> {
        run_header(
            command,
            &[
                ("arguments", self.invocation.to_string()),
                ("tolerances", tolerances),
            ],
        )
    }

    fn create(&self, name: &str) -> Result<BufWriter<fs::File>, Failure> {
        Ok(BufWriter::new(fs::File::create(self.out.join(name))?))
    }

    /// Writes `value` to `name` and echoes it on standard output.
    fn emit_json(&self, name: &str, value: &serde_json::Value) -> Result<(), Failure> {
        let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Numerical(e.to_string()))?;
        let mut f = self.create(name)?;
        writeln!(f, "{text}")?;
        to_stdout(|out| writeln!(out, "{text}"))
    }
}

/// Writes to standard output; a closed reader ends the output quietly.
fn to_stdout(write: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<(), Failure> {
    let mut out = std::io::stdout().lock();
    match write(&mut out).and_then(|()| out.flush()) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other?),
    }
}

pub fn run(cli: Cli, invocation: &str) -> Result<(), Failure> {
    fs::create_dir_all(&cli.out)?;
    let ctx = Context {
        out: &cli.out,
        invocation,
    };
    match cli.command {
        Command::MeshGenerate(a) => mesh_generate(&ctx, a),
        Command::MeshCertify(a) => mesh_certify(&ctx, a),
        Command::Analyze(a) => analyze(&ctx, a),
        Command::Solve(a) => solve(&ctx, a),
        Command::ReproduceTables(a) => reproduce_tables(&ctx, a),
        Command::Soak(a) => soak(&ctx, a),
    }
}

fn needs_alpha(family: &MeshFamily) -> bool {
    match family {
        MeshFamily::Graded(e) | MeshFamily::GradedUniform { exponent: e, .. } => {
            matches!(e, Exponent::OverAlpha(_))
        }
        MeshFamily::RVariable => true,
        MeshFamily::File(_) => false,
    }
}

fn build_mesh(args: &MeshArgs, alpha: Option<f64>) -> Result<TimeMesh, Failure> {
    if let MeshFamily::File(path) = &args.mesh {
        return Ok(TimeMesh::load(path)?);
    }
    let k = args
        .k
        .ok_or_else(|| Failure::Validation(format!("--K is required for mesh {}", args.mesh)))?;
    let alpha = match alpha {
        Some(a) => a,
        None if needs_alpha(&args.mesh) => {
            return Err(Failure::Validation(format!("--alpha is required for mesh {}", args.mesh)))
        }
        None => 0.5,
    };
    Ok(args.mesh.build(args.horizon, k, alpha)?)
}

fn backend(b: Backend) -> CoefficientBackend {
    match b {
        Backend::Quadrature => CoefficientBackend::Quadrature,
        Backend::ClosedForm => CoefficientBackend::ClosedForm,
    }
}

fn mesh_generate(ctx: &Context, a: GenerateArgs) -> Result<(), Failure> {
    if a.name.contains(['/', '\\']) {
        return Err(Failure::Validation(format!("--name must be a plain file name, got {:?}", a.name)));
    }
    let mesh = build_mesh(&a.mesh, a.alpha)?;
    let header = ctx.header("mesh-generate", "none".into());
    let path = ctx.out.join(&a.name);
    mesh.save(&path, &header)?;
    let steps = mesh.steps();
    ctx.emit_json(
        "mesh-generate.json",
        &json!({
            "header": header,
            "path": path,
            "steps": mesh.num_steps(),
            "horizon": mesh.horizon(),
            "min_step": steps.iter().copied().fold(f64::INFINITY, f64::min),
            "max_step": steps.iter().copied().fold(0.0, f64::max),
            "admissible": certify_mesh(&mesh).satisfied,
        }),
    )
}

fn mesh_certify(ctx: &Context, a: CertifyArgs) -> Result<(), Failure> {
    let mesh = match &a.file {
        Some(path) => TimeMesh::load(path)?,
        None => build_mesh(&a.mesh, a.alpha)?,
    };
    let report = certify_mesh(&mesh);
    let header = ctx.header("mesh-certify", "exact comparisons".into());
    ctx.emit_json(
        "certify.json",
        &json!({ "header": header, "steps": mesh.num_steps(), "report": report }),
    )
}

fn analyze(ctx: &Context, a: AnalyzeArgs) -> Result<(), Failure> {
    let order = FractionalOrder::new(a.alpha)?;
    let mesh = build_mesh(&a.mesh, Some(a.alpha))?;
    let n = a.levels.unwrap_or(mesh.num_steps());
    let table = KernelTable::build(&mesh, &order, n, backend(a.backend))?;
    let psd = check_psd_table(&mesh, &table)?;
    let p = check_properties_p_table(&table);
    let q = check_properties_q_table(&mesh, &table)?;
    let complementary = build_complementary_kernel(&table)?;
    let header = ctx.header(
        "analyze",
        format!("psd {PSD_TOLERANCE:e} relative; strict inequalities {STRICTNESS_TOLERANCE:e} relative"),
    );
    if a.dump_kernel {
        let mut f = ctx.create("kernel.csv")?;
        table.write_csv(&mut f, &header)?;
        f.flush()?;
    }
    ctx.emit_json(
        "analyze.json",
        &json!({
            "header": header,
            "psd": psd,
            "p_violations": p,
            "q_violations": q,
            "complementary_kernel": {
                "residual": complementary.residual,
                "min_entry": complementary.min_entry,
            },
        }),
    )
}

fn solve(ctx: &Context, a: SolveArgs) -> Result<(), Failure> {
    let order = FractionalOrder::new(a.alpha)?;
    let mesh = build_mesh(&a.mesh, Some(a.alpha))?;
    let space = match (a.space, a.paper_exact) {
        (Some(SpaceConfig::P2(_)), true) => SpaceConfig::P2(256),
        (Some(s), _) => s,
        (None, true) => SpaceConfig::D1(PAPER_INTERVALS),
        (None, false) => SpaceConfig::default(),
    };
    let problem = space.problem(order)?;
    let options = SolverOptions {
        backend: backend(a.backend),
        ..SolverOptions::default()
    };
    let start = Instant::now();
    let state = solve_with(&problem, &mesh, &options)?;
    let runtime = start.elapsed().as_secs_f64();
    let header = ctx.header(
        "solve",
        format!("scheme residual {:e} relative", options.residual_tolerance),
    );
    let mut f = ctx.create("diagnostics.csv")?;
    state.write_diagnostics_csv(&mut f, &header)?;
    f.flush()?;
    let mut f = ctx.create("solution.csv")?;
    write_snapshot_csv(&problem.space, state.current(), &mut f, &header)?;
    f.flush()?;

    let reference = published_error(space, mesh.horizon(), &a.mesh.mesh, a.alpha, mesh.num_steps());
    ctx.emit_json(
        "solve.json",
        &json!({
            "header": header,
            "alpha": a.alpha,
            "mesh": a.mesh.mesh.to_string(),
            "space": space.to_string(),
            "steps": mesh.num_steps(),
            "max_error": state.max_error(),
            "final_h1": state.diagnostics.last().map(|d| d.h1_seminorm),
            "max_residual": state.diagnostics.iter().map(|d| d.residual).fold(0.0, f64::max),
            "reference": reference,
            "runtime_seconds": runtime,
        }),
    )
}

fn ladder_text(t: &ToleranceProfile) -> String {
    if t.enabled {
        format!(
            "{} relative for published cells >= {:e}, {} below",
            t.large, t.cutoff, t.small
        )
    } else {
        "none (desk-scale grid)".into()
    }
}

fn reproduce_tables(ctx: &Context, a: TablesArgs) -> Result<(), Failure> {
    let spec = match &a.spec {
        Some(path) => ExperimentSpec::load(path)?,
        None => {
            let mut spec = ExperimentSpec::tables(a.alpha.clone(), a.paper_exact);
            if let Some(ks) = a.ks.clone() {
                spec.ks = ks;
            }
            if let Some(space) = a.space {
                spec.space = space;
            }
            spec.validate()?;
            spec
        }
    };
    let dir = match &spec.output_dir {
        Some(d) => ctx.out.join(d),
        None => ctx.out.to_path_buf(),
    };
    let header = ctx.header("reproduce-tables", ladder_text(&spec.tolerance));
    let report = run_convergence(&spec)?;
    report.write_outputs(&dir, &header)?;
    to_stdout(|out| {
        report.write_tables_csv(out, &[]).map_err(|e| match e {
            subdiff::Error::Io(e) => e,
            other => std::io::Error::other(other),
        })
    })?;

    if a.pointwise {
        let k = *spec
            .ks
            .last()
            .ok_or_else(|| Failure::Validation("pointwise comparison needs a K list".into()))?;
        for &alpha in &spec.alphas {
            let families = [
                MeshFamily::Graded(Exponent::OverAlpha(2.0)),
                MeshFamily::Graded(Exponent::OverAlpha(3.0)),
                MeshFamily::RVariable,
            ];
            let curves = run_pointwise_comparison(alpha, k, &families, spec.space, spec.horizon)?;
            let mut f = BufWriter::new(fs::File::create(dir.join(format!("pointwise_alpha{alpha}.csv")))?);
            write_pointwise_csv(&curves, &mut f, &header)?;
            f.flush()?;
            let maxima: Vec<String> = curves
                .iter()
                .map(|c| format!("{} {:.4e}", c.mesh, c.max_error))
                .collect();
            eprintln!("pointwise alpha={alpha} K={k}: {}", maxima.join(", "));
        }
    }

    if let Some(f) = report.failures.iter().find(|f| f.validation) {
        return Err(Failure::Validation(format!("{} alpha={} K={:?}: {}", f.mesh, f.alpha, f.k, f.message)));
    }
    if let Some(f) = report.failures.first() {
        return Err(Failure::Numerical(format!("{} alpha={} K={:?}: {}", f.mesh, f.alpha, f.k, f.message)));
    }
    let bad = report.tolerance_failures();
    if !bad.is_empty() {
        let cells: Vec<String> = bad
            .iter()
            .map(|c| {
                format!(
                    "alpha={} {} K={}: {:.4e} vs {:.4e}",
                    c.alpha,
                    c.mesh,
                    c.k,
                    c.max_error,
                    c.reference.unwrap_or(f64::NAN)
                )
            })
            .collect();
        return Err(Failure::Tolerance(format!(
            "{} cell(s) outside the tolerance ladder: {}",
            bad.len(),
            cells.join("; ")
        )));
    }
    Ok(())
}

fn soak(ctx: &Context, a: SoakArgs) -> Result<(), Failure> {
    let mesh = match &a.mesh {
        Some(family) => family.build(a.horizon, a.k, a.alpha)?,
        None => default_soak_mesh(a.alpha, a.horizon, a.k)?,
    };
    let config = SoakConfig {
        alpha: a.alpha,
        mesh,
        intervals: a.intervals,
        forcing: match a.forcing {
            Forcing::RampedSine => SoakForcing::RampedSine,
            Forcing::FreeDecay => SoakForcing::FreeDecay,
        },
    };
    let report = run_stability_soak_with(&config, |w| eprintln!("warning: {w}"))?;
    let header = ctx.header(
        "soak",
        format!("plateau factor {PLATEAU_FACTOR}; free decay nonincreasing"),
    );
    let mut f = ctx.create("soak.csv")?;
    report.write_csv(&mut f, &header)?;
    f.flush()?;
    ctx.emit_json(
        "soak.json",
        &json!({
            "header": header,
            "alpha": report.alpha,
            "steps": config.mesh.num_steps(),
            "admissible": report.admissibility.satisfied,
            "warning": report.warning,
            "verdict": report.verdict,
        }),
    )?;
    if report.verdict.passed {
        Ok(())
    } else {
        let v = report.verdict;
        Err(Failure::Tolerance(match v.forcing {
            SoakForcing::RampedSine => format!(
                "plateau test failed: max over [K/2,K] = {:.6e} > {PLATEAU_FACTOR} x {:.6e}",
                v.second_window_max, v.first_window_max
            ),
            SoakForcing::FreeDecay => "H1 seminorm increased during free decay".into(),
        }))
    }
}
