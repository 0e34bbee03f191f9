use mpopf::ipm::iterate::{is_strictly_interior, scalar_fraction_to_boundary};
use mpopf::ipm::kkt::{assemble_condensed, recover_step, Factorized};
use mpopf::ipm::{
    compute_residuals, fraction_to_boundary, full_kkt_oracle, initialize, lift_inequalities, solve, solve_observed, CondensedStructure,
    Direction, IterateState, NlpProblem, SolveStatus, SolverConfig,
};
use mpopf::linalg::numeric_factorize;
use mpopf::model::{Expr, InstanceData, Model, ModelBuilder};
use proptest::prelude::*;

const INF: f64 = f64::INFINITY;

fn x(i: usize) -> Expr {
    Expr::var(i)
}

/// min x₁x₄(x₁ + x₂ + x₃) + x₃  s.t.  x₁x₂x₃x₄ ≥ 25,  Σ xᵢ² = 40,  1 ≤ x ≤ 5.
fn hs071() -> Model {
    let mut b = ModelBuilder::new();
    b.add_variable_block("x", &[4], &[1.0], &[5.0], &[1.0, 5.0, 5.0, 1.0]).unwrap();
    let mut d = InstanceData::new(4, 0);
    d.push(&[0, 1, 2, 3], &[]);
    b.add_objective(&(x(0) * x(3) * (x(0) + x(1) + x(2)) + x(2)), d.clone()).unwrap();
    let mut r = InstanceData::new(4, 0);
    r.push_row(0, &[0, 1, 2, 3], &[]);
    b.add_constraint(1, &[0.0], &[25.0], &[INF], vec![(x(0) * x(1) * x(2) * x(3), r)]).unwrap();
    let mut r = InstanceData::new(1, 0);
    for i in 0..4 {
        r.push_row(0, &[i], &[]);
    }
    b.add_constraint(1, &[40.0], &[0.0], &[0.0], vec![(x(0).powi(2), r)]).unwrap();
    b.freeze()
}

/// Unconstrained `Σ c xᵢ²` over `n` free variables starting at 0.5.
fn separable_quadratic(n: usize, c: f64) -> Model {
    let mut b = ModelBuilder::new();
    b.add_variable_block("x", &[n], &[-INF], &[INF], &[0.5]).unwrap();
    let mut d = InstanceData::new(1, 1);
    for i in 0..n {
        d.push(&[i], &[c]);
    }
    b.add_objective(&(Expr::param(0) * x(0).powi(2)), d).unwrap();
    b.freeze()
}

/// min (x − a)² s.t. x = 1 with `x` free.
fn pinned_scalar(a: f64) -> Model {
    let mut b = ModelBuilder::new();
    b.add_variable_block("x", &[1], &[-INF], &[INF], &[0.0]).unwrap();
    let mut d = InstanceData::new(1, 1);
    d.push(&[0], &[a]);
    b.add_objective(&(x(0) - Expr::param(0)).powi(2), d).unwrap();
    let mut r = InstanceData::new(1, 0);
    r.push_row(0, &[0], &[]);
    b.add_constraint(1, &[1.0], &[0.0], &[0.0], vec![(x(0), r)]).unwrap();
    b.freeze()
}

/// Gaussian elimination with partial pivoting.
fn gauss(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs())).unwrap();
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= f * a[k][j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| a[k][j] * x[j]).sum();
        x[k] = (b[k] - s) / a[k][k];
    }
    x
}

#[test]
fn hs071_reaches_the_known_optimum() {
    let m = hs071();
    let out = solve(&m, &SolverConfig::default().with_tol(1e-8)).unwrap();
    assert_eq!(out.report.status, SolveStatus::Solved);
    assert!((out.report.objective - 17.014_017_3).abs() < 1e-5, "{}", out.report.objective);
    let expect = [1.0, 4.742_999_6, 3.821_149_9, 1.379_408_3];
    for (a, b) in out.x.iter().zip(expect) {
        assert!((a - b).abs() < 1e-4, "{:?}", out.x);
    }
    assert!(out.report.all_steps_positive_definite());
}

#[test]
fn log_has_one_row_per_iterate_and_mu_never_increases() {
    let out = solve(&hs071(), &SolverConfig::default().with_tol(1e-8)).unwrap();
    let log = &out.report.log;
    assert_eq!(log.len(), out.report.iterations + 1);
    assert!(log.windows(2).all(|w| w[1].mu <= w[0].mu));
    assert_eq!(log[0].alpha_primal, 0.0);
}

#[test]
fn identical_solves_produce_identical_logs() {
    let cfg = SolverConfig::default().with_tol(1e-8);
    let (a, b) = (solve(&hs071(), &cfg).unwrap(), solve(&hs071(), &cfg).unwrap());
    assert_eq!(a.report.log_csv(), b.report.log_csv());
    assert_eq!(a.report.objective.to_bits(), b.report.objective.to_bits());
}

#[test]
fn every_accepted_iterate_is_strictly_interior() {
    let mut interior = true;
    let mut steps = 0;
    solve_observed(&hs071(), &SolverConfig::default().with_tol(1e-8), &mut |v| {
        interior &= is_strictly_interior(v.lifted, v.iterate);
        steps += 1;
    })
    .unwrap();
    assert!(steps > 3);
    assert!(interior);
}

#[test]
fn condensed_steps_match_the_full_system_on_hs071() {
    let mut worst = 0.0f64;
    let mut seen = 0;
    solve_observed(&hs071(), &SolverConfig::default(), &mut |v| {
        if v.iter < 6 {
            let (dir, _) = full_kkt_oracle(v.lifted, v.iterate, v.residuals, v.hessian, v.jacobian, v.kkt.delta_w, v.kkt.delta_c).unwrap();
            worst = worst.max(v.direction.relative_difference(&dir));
            seen += 1;
        }
    })
    .unwrap();
    assert_eq!(seen, 6);
    assert!(worst <= 1e-9, "{worst:e}");
}

#[test]
fn both_paths_shift_identically_under_regularization() {
    let m = hs071();
    let cfg = SolverConfig::default();
    let lifted = lift_inequalities(&m, 1e-4, true).unwrap();
    let it = initialize(&lifted, &cfg).unwrap();
    let grad = lifted.gradient(&it.x).unwrap();
    let g = lifted.constraints(&it.x).unwrap();
    let jac = lifted.jacobian(&it.x).unwrap();
    let y: Vec<f64> = vec![0.3, -0.2];
    let it = IterateState { y, ..it };
    let hess = lifted.lagrangian_hessian(&it.x, &it.y).unwrap();
    let r = compute_residuals(&lifted, &it, &grad, &g, &jac);
    let structure = CondensedStructure::new(&lifted);
    let mut dirs = Vec::new();
    for (dw, dc) in [(0.0, 0.0), (1e-3, 1e-8), (2.0, 1e-8)] {
        let kkt = assemble_condensed(&structure, &lifted, &it, &r, &hess, &jac, dw, dc);
        let f = numeric_factorize(&structure.symbolic, &kkt.matrix.values, 0.0).unwrap();
        assert!(f.inertia.is_positive_definite());
        let cond = recover_step(&structure, &lifted, &it, &r, &kkt, &Factorized::Sparse(f), 2);
        let (full, _) = full_kkt_oracle(&lifted, &it, &r, &hess, &jac, dw, dc).unwrap();
        assert!(cond.relative_difference(&full) <= 1e-10, "δ = ({dw}, {dc}): {:e}", cond.relative_difference(&full));
        dirs.push(cond);
    }
    assert!(dirs[0].relative_difference(&dirs[2]) > 1e-6);
}

#[test]
fn negative_curvature_needs_the_first_schedule_value_above_one() {
    let m = separable_quadratic(2, -0.5);
    let cfg = SolverConfig { max_iter: 1, ..SolverConfig::default() };
    let mut seen = Vec::new();
    solve_observed(&m, &cfg, &mut |v| seen.push((v.kkt.delta_w, v.kkt.delta_c))).unwrap();
    let expect = 1e-4 * 8f64.powi(5);
    assert!((seen[0].0 - expect).abs() < 1e-12, "{:?}", seen);
    assert!(expect > 1.0 && expect / 8.0 < 1.0);
}

#[test]
fn positive_definite_hessian_needs_no_correction() {
    let m = separable_quadratic(3, 2.0);
    let mut seen = Vec::new();
    let out = solve_observed(&m, &SolverConfig::default().with_tol(1e-8), &mut |v| seen.push(v.kkt.delta_w)).unwrap();
    assert_eq!(out.report.status, SolveStatus::Solved);
    assert_eq!(seen[0], 0.0);
    assert_eq!(out.report.log[1].retries, 0);
    assert!(out.x.iter().all(|v| v.abs() < 1e-6));
}

#[test]
fn slack_boxes_follow_row_type() {
    let mut b = ModelBuilder::new();
    b.add_variable_block("x", &[2], &[-INF], &[INF], &[0.0]).unwrap();
    let mut r = InstanceData::new(1, 0);
    r.push_row(0, &[0], &[]);
    r.push_row(1, &[1], &[]);
    r.push_row(2, &[0], &[]);
    b.add_constraint(3, &[0.0, 0.0, 50.0], &[0.0, 0.0, 0.0], &[0.0, 5.0, 0.0], vec![(x(0), r)]).unwrap();
    let m = b.freeze();
    let rel = lift_inequalities(&m, 1e-4, true).unwrap();
    assert_eq!((rel.s_lower[0], rel.s_upper[0]), (-1e-4, 1e-4));
    assert_eq!((rel.s_lower[1], rel.s_upper[1]), (0.0, 5.0));
    assert!((rel.s_upper[2] - 5e-3).abs() < 1e-15 && (rel.s_lower[2] + 5e-3).abs() < 1e-15);
    let abs = lift_inequalities(&m, 1e-4, false).unwrap();
    assert_eq!((abs.s_lower[2], abs.s_upper[2]), (-1e-4, 1e-4));
}

#[test]
fn inverted_row_bounds_are_rejected() {
    let mut b = ModelBuilder::new();
    b.add_variable_block("x", &[1], &[0.0], &[1.0], &[0.5]).unwrap();
    let m = b.freeze();
    assert!(lift_inequalities(&m, 1e-4, true).is_ok());
    assert!(SolverConfig { tol: 0.0, ..SolverConfig::default() }.validate().is_err());
    assert!(solve(&m, &SolverConfig { tol: -1.0, ..SolverConfig::default() }).is_err());
}

#[test]
fn start_point_is_pushed_inside_the_box() {
    let mut b = ModelBuilder::new();
    b.add_variable_block("x", &[2], &[0.0, -INF], &[10.0, INF], &[0.0, 3.0]).unwrap();
    let mut r = InstanceData::new(1, 0);
    r.push_row(0, &[0], &[]);
    b.add_constraint(1, &[0.0], &[-1.0], &[1.0], vec![(x(0), r)]).unwrap();
    let m = b.freeze();
    let lifted = lift_inequalities(&m, 1e-4, true).unwrap();
    let it = initialize(&lifted, &SolverConfig::default()).unwrap();
    assert!((it.x[0] - 0.1).abs() < 1e-15);
    assert_eq!(it.x[1], 3.0);
    assert_eq!(it.s[0], it.x[0]);
    assert_eq!(it.y, vec![0.0]);
    assert_eq!((it.zl_x[0], it.zu_x[0], it.zl_x[1], it.zu_x[1]), (1.0, 1.0, 0.0, 0.0));
}

#[test]
fn residuals_of_a_lifted_scalar_problem() {
    // min x² s.t. x − 1 = 0, slack box ±1e-4.
    let m = pinned_scalar(0.0);
    let lifted = lift_inequalities(&m, 1e-4, true).unwrap();
    let it = IterateState { x: vec![0.5], s: vec![5e-5], y: vec![2.0], zl_x: vec![0.0], zu_x: vec![0.0], zl_s: vec![3.0], zu_s: vec![4.0], mu: 0.1 };
    let grad = lifted.gradient(&it.x).unwrap();
    let g = lifted.constraints(&it.x).unwrap();
    let jac = lifted.jacobian(&it.x).unwrap();
    let r = compute_residuals(&lifted, &it, &grad, &g, &jac);
    let close = |a: f64, b: f64| (a - b).abs() < 1e-14;
    assert!(close(r.px[0], 2.0 * 0.5 - 2.0));
    assert!(close(r.ps[0], -3.0 + 4.0 + 2.0));
    assert!(close(r.py[0], (0.5 - 1.0) - 5e-5));
    assert!(close(r.pzl_s[0], 3.0 * (5e-5 + 1e-4) - 0.1));
    assert!(close(r.pzu_s[0], 4.0 * (1e-4 - 5e-5) - 0.1));
    assert_eq!((r.pzl_x[0], r.pzu_x[0]), (0.0, 0.0));
}

#[test]
fn tight_tolerance_bounds_the_equality_violation() {
    let m = pinned_scalar(2.0);
    let out = solve(&m, &SolverConfig::default().with_tol(1e-8)).unwrap();
    assert_eq!(out.report.status, SolveStatus::Solved);
    assert!((out.x[0] - 1.0).abs() <= 1e-8, "{}", out.x[0]);
}

#[test]
fn equality_qp_matches_the_saddle_point_solution() {
    let q = [[4.0, 1.0, 0.0, 0.5], [1.0, 3.0, 0.2, 0.0], [0.0, 0.2, 2.0, 0.3], [0.5, 0.0, 0.3, 5.0]];
    let c = [1.0, -2.0, 0.5, 3.0];
    let a = [[1.0, 1.0, 1.0, 1.0], [1.0, -1.0, 2.0, 0.0]];
    let rhs = [2.0, 0.5];

    let mut b = ModelBuilder::new();
    b.add_variable_block("x", &[4], &[-INF], &[INF], &[0.0]).unwrap();
    let mut diag = InstanceData::new(1, 2);
    let mut off = InstanceData::new(2, 1);
    for i in 0..4 {
        diag.push(&[i], &[0.5 * q[i][i], c[i]]);
        for j in 0..i {
            if q[i][j] != 0.0 {
                off.push(&[i, j], &[q[i][j]]);
            }
        }
    }
    b.add_objective(&(Expr::param(0) * x(0).powi(2) + Expr::param(1) * x(0)), diag).unwrap();
    b.add_objective(&(Expr::param(0) * x(0) * x(1)), off).unwrap();
    let mut rows = InstanceData::new(1, 1);
    for (i, row) in a.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if v != 0.0 {
                rows.push_row(i, &[j], &[v]);
            }
        }
    }
    b.add_constraint(2, &rhs, &[0.0], &[0.0], vec![(Expr::param(0) * x(0), rows)]).unwrap();
    let m = b.freeze();
    let out = solve(&m, &SolverConfig::default().with_tol(1e-8)).unwrap();
    assert_eq!(out.report.status, SolveStatus::Solved);

    let mut kkt = vec![vec![0.0; 6]; 6];
    let mut b = vec![0.0; 6];
    for i in 0..4 {
        for j in 0..4 {
            kkt[i][j] = q[i][j];
        }
        b[i] = -c[i];
    }
    for (k, row) in a.iter().enumerate() {
        for j in 0..4 {
            kkt[4 + k][j] = row[j];
            kkt[j][4 + k] = row[j];
        }
        b[4 + k] = rhs[k];
    }
    let sol = gauss(kkt, b);
    for j in 0..4 {
        assert!((out.x[j] - sol[j]).abs() < 1e-6, "{:?} vs {:?}", out.x, &sol[..4]);
    }
    // Multipliers: the solver's Lagrangian is f − yᵀc.
    for k in 0..2 {
        assert!((out.y[k] + sol[4 + k]).abs() < 1e-5, "{:?} vs {:?}", out.y, &sol[4..]);
    }
}

#[test]
fn infeasible_problem_reports_failure_status() {
    let mut b = ModelBuilder::new();
    b.add_variable_block("x", &[1], &[-INF], &[INF], &[0.3]).unwrap();
    let mut r = InstanceData::new(1, 0);
    r.push_row(0, &[0], &[]);
    b.add_constraint(1, &[-1.0], &[0.0], &[0.0], vec![(x(0).powi(2), r)]).unwrap();
    let mut d = InstanceData::new(1, 0);
    d.push(&[0], &[]);
    b.add_objective(&x(0), d).unwrap();
    let m = b.freeze();
    let out = solve(&m, &SolverConfig { max_iter: 200, ..SolverConfig::default() }).unwrap();
    assert_ne!(out.report.status, SolveStatus::Solved);
    assert_eq!(out.report.log.len(), out.report.iterations + 1);
}

#[test]
fn closed_form_fraction_to_boundary() {
    assert!((scalar_fraction_to_boundary(1.0, -2.0, 0.0, INF, 0.99) - 0.495).abs() < 1e-15);
    assert_eq!(scalar_fraction_to_boundary(1.0, 2.0, 0.0, INF, 0.99), 1.0);
}

fn boxed_model(n: usize) -> Model {
    let mut b = ModelBuilder::new();
    b.add_variable_block("x", &[n], &[-1.0], &[2.0], &[0.0]).unwrap();
    let mut r = InstanceData::new(1, 0);
    for i in 0..n {
        r.push_row(i, &[i], &[]);
    }
    b.add_constraint(n, &[0.0], &[-3.0], &[3.0], vec![(x(0), r)]).unwrap();
    b.freeze()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn fraction_to_boundary_keeps_interiority(
        t in prop::collection::vec(0.01..0.99f64, 4),
        ts in prop::collection::vec(0.01..0.99f64, 4),
        z in prop::collection::vec(1e-3..10.0f64, 16),
        d in prop::collection::vec(-50.0..50.0f64, 28),
        tau in 0.9..0.999f64,
    ) {
        let m = boxed_model(4);
        let lifted = lift_inequalities(&m, 1e-4, true).unwrap();
        let it = IterateState {
            x: t.iter().map(|v| -1.0 + 3.0 * v).collect(),
            s: ts.iter().map(|v| -3.0 + 6.0 * v).collect(),
            y: vec![0.0; 4],
            zl_x: z[0..4].to_vec(),
            zu_x: z[4..8].to_vec(),
            zl_s: z[8..12].to_vec(),
            zu_s: z[12..16].to_vec(),
            mu: 0.1,
        };
        let dir = Direction {
            dx: d[0..4].to_vec(),
            ds: d[4..8].to_vec(),
            dy: d[8..12].to_vec(),
            dzl_x: d[12..16].to_vec(),
            dzu_x: d[16..20].to_vec(),
            dzl_s: d[20..24].to_vec(),
            dzu_s: d[24..28].to_vec(),
        };
        let (ap, ad) = fraction_to_boundary(&lifted, &it, &dir, tau);
        prop_assert!(ap > 0.0 && ap <= 1.0 && ad > 0.0 && ad <= 1.0);
        let next = IterateState {
            x: it.x.iter().zip(&dir.dx).map(|(v, d)| v - ap * d).collect(),
            s: it.s.iter().zip(&dir.ds).map(|(v, d)| v - ap * d).collect(),
            y: it.y.clone(),
            zl_x: it.zl_x.iter().zip(&dir.dzl_x).map(|(v, d)| v - ad * d).collect(),
            zu_x: it.zu_x.iter().zip(&dir.dzu_x).map(|(v, d)| v - ad * d).collect(),
            zl_s: it.zl_s.iter().zip(&dir.dzl_s).map(|(v, d)| v - ad * d).collect(),
            zu_s: it.zu_s.iter().zip(&dir.dzu_s).map(|(v, d)| v - ad * d).collect(),
            mu: 0.1,
        };
        prop_assert!(is_strictly_interior(&lifted, &next));
        for i in 0..4 {
            prop_assert!(next.x[i] - lifted.x_lower[i] >= (1.0 - tau) * (it.x[i] - lifted.x_lower[i]) - 1e-12);
            prop_assert!(lifted.x_upper[i] - next.x[i] >= (1.0 - tau) * (lifted.x_upper[i] - it.x[i]) - 1e-12);
        }
    }

    #[test]
    fn condensed_and_full_paths_agree_at_random_interior_points(
        t in prop::collection::vec(0.05..0.95f64, 3),
        ts in prop::collection::vec(0.05..0.95f64, 3),
        z in prop::collection::vec(1e-2..5.0f64, 12),
        y in prop::collection::vec(-2.0..2.0f64, 3),
        mu in 1e-3..1.0f64,
    ) {
        let m = boxed_model(3);
        let lifted = lift_inequalities(&m, 1e-4, true).unwrap();
        let it = IterateState {
            x: t.iter().map(|v| -1.0 + 3.0 * v).collect(),
            s: ts.iter().map(|v| -3.0 + 6.0 * v).collect(),
            y,
            zl_x: z[0..3].to_vec(),
            zu_x: z[3..6].to_vec(),
            zl_s: z[6..9].to_vec(),
            zu_s: z[9..12].to_vec(),
            mu,
        };
        let grad = lifted.gradient(&it.x).unwrap();
        let g = lifted.constraints(&it.x).unwrap();
        let jac = lifted.jacobian(&it.x).unwrap();
        let hess = lifted.lagrangian_hessian(&it.x, &it.y).unwrap();
        let r = compute_residuals(&lifted, &it, &grad, &g, &jac);
        let structure = CondensedStructure::new(&lifted);
        let kkt = assemble_condensed(&structure, &lifted, &it, &r, &hess, &jac, 0.0, 0.0);
        prop_assert!(kkt.sigma_x.iter().chain(&kkt.sigma_s).all(|v| *v > 0.0));
        prop_assert!(kkt.c.iter().all(|v| *v > 0.0) && kkt.d.iter().all(|v| *v >= 0.0));
        let f = numeric_factorize(&structure.symbolic, &kkt.matrix.values, 0.0).unwrap();
        let cond = recover_step(&structure, &lifted, &it, &r, &kkt, &Factorized::Sparse(f), 1);
        let (full, _) = full_kkt_oracle(&lifted, &it, &r, &hess, &jac, 0.0, 0.0).unwrap();
        prop_assert!(cond.relative_difference(&full) <= 1e-10, "{:e}", cond.relative_difference(&full));
    }
}

#[test]
fn single_bounded_variable_barrier_weight() {
    let mut b = ModelBuilder::new();
    b.add_variable_block("x", &[1], &[0.0], &[INF], &[2.0]).unwrap();
    let m = b.freeze();
    let lifted = lift_inequalities(&m, 1e-4, true).unwrap();
    let it = IterateState { x: vec![2.0], s: vec![], y: vec![], zl_x: vec![3.0], zu_x: vec![0.0], zl_s: vec![], zu_s: vec![], mu: 0.1 };
    let grad = lifted.gradient(&it.x).unwrap();
    let r = compute_residuals(&lifted, &it, &grad, &[], &[]);
    let structure = CondensedStructure::new(&lifted);
    let kkt = assemble_condensed(&structure, &lifted, &it, &r, &[], &[], 0.0, 0.0);
    assert_eq!(kkt.sigma_x, vec![1.5]);
    assert_eq!(m.num_constraints(), 0);
    assert_eq!(NlpProblem::num_variables(&m), 1);
}
