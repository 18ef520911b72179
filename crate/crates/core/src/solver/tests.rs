use std::f64::consts::PI;

use super::*;
use crate::mesh::make_graded_mesh;

fn zero_field() -> FieldFn {
    Arc::new(|_, _| 0.0)
}

#[test]
fn zero_data_stays_zero() {
    let order = FractionalOrder::new(0.4).unwrap();
    let mesh = make_graded_mesh(1.0, 12, 2.0).unwrap();
    for space in [
        Space::Dirichlet1d {
            length: 1.0,
            intervals: 50,
        },
        Space::Periodic2d {
            length: 1.0,
            modes: 16,
        },
    ] {
        let p = Problem::new(order, space, zero_field(), zero_field(), Some(zero_field())).unwrap();
        let s = solve(&p, &mesh).unwrap();
        assert!(s.history.iter().flatten().all(|&v| v == 0.0));
        assert_eq!(s.max_error(), Some(0.0));
    }
}

/// Independent scalar recursion for the amplitude of a single mode with
/// discrete Laplacian eigenvalue `lambda`, forced by `Γ(1+α) + weight t^α`.
fn scalar_amplitudes(order: &FractionalOrder, mesh: &TimeMesh, lambda: f64, weight: f64) -> Vec<f64> {
    let table = KernelTable::build(mesh, order, mesh.num_steps(), CoefficientBackend::Quadrature)
        .unwrap();
    let g1 = gamma(1.0 + order.alpha);
    let mut y = vec![0.0];
    for k in 1..=mesh.num_steps() {
        let row = table.row(k);
        // Γ(1-α) L_k y = M_kk y_k - M_k1 y_0 - sum_{j=2}^k (M_kj - M_k,j-1) y_{j-1}
        let mut hist = row.m(1) * y[0];
        for j in 2..=k {
            hist += (row.m(j) - row.m(j - 1)) * y[j - 1];
        }
        let f = g1 + weight * row.t_star.powf(order.alpha);
        let lhs = row.m(k) / order.gamma_1ma + order.sigma * lambda;
        let rhs = hist / order.gamma_1ma - order.alpha / 2.0 * lambda * y[k - 1] + f;
        y.push(rhs / lhs);
    }
    y
}

#[test]
fn one_dimensional_run_follows_the_scalar_mode() {
    let order = FractionalOrder::new(0.5).unwrap();
    let n = 400;
    let problem = Problem::sine_1d(order, n).unwrap();
    let mesh = make_graded_mesh(1.0, 30, 4.0).unwrap();
    let state = solve_1d_dirichlet(&problem, &mesh).unwrap();
    let h = problem.space.spacing();
    let lambda = 2.0 * (1.0 - h.cos()) / (h * h);
    let y = scalar_amplitudes(&order, &mesh, lambda, 1.0);
    for (k, u) in state.history.iter().enumerate() {
        for (i, v) in u.iter().enumerate() {
            let expected = y[k] * problem.space.point(i)[0].sin();
            assert!((v - expected).abs() < 1e-10, "k={k} i={i}: {v} vs {expected}");
        }
    }
    for d in &state.diagnostics {
        assert!(d.residual <= 1e-10);
    }
}

#[test]
fn first_table_cell() {
    // α = 0.3, uniform mesh, K = 40, h = 2π/10000.
    let order = FractionalOrder::new(0.3).unwrap();
    let problem = Problem::sine_1d(order, 10000).unwrap();
    let mesh = make_graded_mesh(1.0, 40, 1.0).unwrap();
    let err = solve(&problem, &mesh).unwrap().max_error().unwrap();
    assert!((err / 2.3600e-2 - 1.0).abs() < 0.01, "{err:e}");
}

#[test]
fn two_dimensional_run_excites_one_mode_family() {
    let order = FractionalOrder::new(0.7).unwrap();
    let problem = Problem::sine_2d(order, 32).unwrap();
    let mesh = make_graded_mesh(1.0, 20, 2.0 / 0.7).unwrap();
    let state = solve_2d_periodic(&problem, &mesh).unwrap();
    let spectrum = spectrum_2d(&problem.space, state.current()).unwrap();
    let n = 32;
    let active = [(1, 1), (1, n - 1), (n - 1, 1), (n - 1, n - 1)];
    let peak = active.iter().map(|&(i, j)| spectrum[i * n + j]).fold(0.0, f64::max);
    assert!(peak > 0.0);
    for (idx, &m) in spectrum.iter().enumerate() {
        if !active.contains(&(idx / n, idx % n)) {
            assert!(m <= 1e-12 * peak, "mode {idx}: {m:e}");
        }
    }
    // The spectral Laplacian is exact on sin x sin y: the error is temporal only.
    let lambda = 2.0;
    let y = scalar_amplitudes(&order, &mesh, lambda, 2.0);
    let k = mesh.num_steps();
    let amplitude_error = (y[k] - mesh.horizon().powf(0.7)).abs();
    let l2_error = state.diagnostics[k].l2_error.unwrap();
    assert!((l2_error - PI * amplitude_error).abs() < 1e-10 * PI, "{l2_error} {amplitude_error}");
}

#[test]
fn free_decay_is_monotone() {
    let order = FractionalOrder::new(0.6).unwrap();
    let problem = Problem::new(
        order,
        Space::Dirichlet1d {
            length: PI,
            intervals: 200,
        },
        zero_field(),
        Arc::new(|_, p| p[0].sin()),
        None,
    )
    .unwrap();
    let mesh = make_graded_mesh(5.0, 60, 2.0).unwrap();
    let state = solve(&problem, &mesh).unwrap();
    let norms: Vec<f64> = state
        .history
        .iter()
        .map(|u| l2_norm(&problem.space, u))
        .collect();
    for w in norms.windows(2) {
        assert!(w[1] <= w[0], "{w:?}");
    }
    assert!(state.max_error().is_none());
}

#[test]
fn single_step_mesh() {
    let order = FractionalOrder::new(0.5).unwrap();
    let problem = Problem::sine_1d(order, 64).unwrap();
    let mesh = TimeMesh::uniform(1.0, 1).unwrap();
    let state = solve(&problem, &mesh).unwrap();
    assert_eq!(state.k, 1);
    assert_eq!(state.history.len(), 2);
}

#[test]
fn mismatched_rows_are_rejected() {
    let order = FractionalOrder::new(0.5).unwrap();
    let problem = Problem::sine_1d(order, 16).unwrap();
    let mesh = TimeMesh::uniform(1.0, 4).unwrap();
    let other = make_graded_mesh(1.0, 4, 2.0).unwrap();
    let table = KernelTable::build(&mesh, &order, 4, CoefficientBackend::Quadrature).unwrap();
    let foreign = KernelTable::build(&other, &order, 4, CoefficientBackend::Quadrature).unwrap();
    let state = SolverState::new(&problem, mesh.clone(), &SolverOptions::default()).unwrap();
    assert!(step(state.clone(), table.row(2), &problem).is_err());
    assert!(step(state.clone(), foreign.row(1), &problem).is_err());
    assert!(step(state, table.row(1), &problem).is_ok());
}

#[test]
fn problem_validation() {
    let order = FractionalOrder::new(0.5).unwrap();
    let bad_grid = Problem::new(
        order,
        Space::Dirichlet1d {
            length: 1.0,
            intervals: 2,
        },
        zero_field(),
        zero_field(),
        None,
    );
    assert!(matches!(bad_grid, Err(Error::InvalidParameter(_))));
    let bad_boundary = Problem::new(
        order,
        Space::Dirichlet1d {
            length: 1.0,
            intervals: 8,
        },
        zero_field(),
        Arc::new(|_, _| 1.0),
        None,
    );
    assert!(matches!(bad_boundary, Err(Error::InvalidInput(_))));
    let p = Problem::sine_2d(order, 8).unwrap();
    assert!(solve_1d_dirichlet(&p, &TimeMesh::uniform(1.0, 2).unwrap()).is_err());
}

#[test]
fn norms_agree_with_diagnostics() {
    let order = FractionalOrder::new(0.3).unwrap();
    let problem = Problem::sine_1d(order, 128).unwrap();
    let mesh = make_graded_mesh(1.0, 10, 3.0).unwrap();
    let state = solve(&problem, &mesh).unwrap();
    let norms = discrete_norms(&state, &problem);
    let errors = norms.l2_error.unwrap();
    assert_eq!(errors.len(), 11);
    for (d, (e, h)) in state.diagnostics.iter().zip(errors.iter().zip(&norms.h1_seminorm)) {
        assert_eq!(d.l2_error, Some(*e));
        assert_eq!(d.h1_seminorm, *h);
    }
}

#[test]
fn csv_exports() {
    let order = FractionalOrder::new(0.3).unwrap();
    let problem = Problem::sine_1d(order, 16).unwrap();
    let mesh = TimeMesh::uniform(1.0, 3).unwrap();
    let state = solve(&problem, &mesh).unwrap();

    let mut snap = Vec::new();
    write_snapshot_csv(&problem.space, state.current(), &mut snap, &["run".into()]).unwrap();
    let text = String::from_utf8(snap).unwrap();
    assert_eq!(text.lines().count(), 2 + 17);
    assert!(text.starts_with("# run\nx,u\n"));

    let mut diag = Vec::new();
    state.write_diagnostics_csv(&mut diag, &[]).unwrap();
    let text = String::from_utf8(diag).unwrap();
    assert_eq!(text.lines().count(), 1 + 4);

    let p2 = Problem::sine_2d(order, 4).unwrap();
    let mut snap = Vec::new();
    write_snapshot_csv(&p2.space, &p2.initial, &mut snap, &[]).unwrap();
    assert_eq!(String::from_utf8(snap).unwrap().lines().count(), 1 + 16);
}
