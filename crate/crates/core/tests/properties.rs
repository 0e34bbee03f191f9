//! Property tests for the modeling layer and the sparse factorization.

use mpopf::linalg::{
    compress_symmetric_lower, compress_to_csc, dense_ldl_oracle, fill_reducing_ordering, numeric_factorize, symbolic_factorize, CooMatrix,
    CscMatrix, DenseMatrix, SparseLdl,
};
use mpopf::model::{Expr, InstanceData, Model, ModelBuilder};
use proptest::prelude::*;

fn record_expr() -> Expr {
    // p0·x0² + sin(x0·x1) + p1·exp(x1 / 4)
    Expr::param(0) * Expr::var(0).powi(2) + (Expr::var(0) * Expr::var(1)).sin() + Expr::param(1) * (Expr::var(1) / 4.0).exp()
}

fn model_with(records: &[(usize, usize, f64, f64)], n: usize) -> Model {
    let mut b = ModelBuilder::new();
    b.add_variable_block("x", &[n], &[-5.0], &[5.0], &[0.0]).unwrap();
    let mut data = InstanceData::new(2, 2);
    for &(i, j, p0, p1) in records {
        data.push(&[i, j], &[p0, p1]);
    }
    b.add_objective(&record_expr(), data).unwrap();
    let mut rows = InstanceData::new(2, 2);
    for (r, &(i, j, p0, p1)) in records.iter().enumerate() {
        rows.push_row(r % 3, &[i, j], &[p0, p1]);
    }
    b.add_constraint(3, &[0.5], &[0.0], &[0.0], vec![(record_expr(), rows)]).unwrap();
    b.freeze()
}

fn records(n: usize) -> impl Strategy<Value = Vec<(usize, usize, f64, f64)>> {
    prop::collection::vec((0..n, 0..n, -2.0..2.0f64, -2.0..2.0f64), 1..12)
        .prop_map(|v| v.into_iter().filter(|r| r.0 != r.1).collect::<Vec<_>>())
        .prop_filter("at least one record", |v| !v.is_empty())
}

/// Lower-triangle COO to a dense symmetric matrix.
fn dense_symmetric(n: usize, rows: &[usize], cols: &[usize], vals: &[f64]) -> Vec<Vec<f64>> {
    let mut h = vec![vec![0.0; n]; n];
    for k in 0..vals.len() {
        h[rows[k]][cols[k]] += vals[k];
        if rows[k] != cols[k] {
            h[cols[k]][rows[k]] += vals[k];
        }
    }
    h
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pattern_replication_is_exact(recs in records(6), x in prop::collection::vec(-2.0..2.0f64, 6)) {
        let whole = model_with(&recs, 6);
        let mut sum = 0.0;
        for r in &recs {
            sum += model_with(std::slice::from_ref(r), 6).objective(&x).unwrap();
        }
        prop_assert_eq!(whole.objective(&x).unwrap(), sum);
    }

    #[test]
    fn constraint_rows_sum_their_instances(recs in records(6), x in prop::collection::vec(-2.0..2.0f64, 6)) {
        let m = model_with(&recs, 6);
        let mut c = vec![0.0; 3];
        m.constraints(&x, &mut c).unwrap();
        let mut expect = vec![0.0; 3];
        for (r, &(i, j, p0, p1)) in recs.iter().enumerate() {
            expect[r % 3] += p0 * x[i] * x[i] + (x[i] * x[j]).sin() + p1 * (x[j] / 4.0).exp();
        }
        for k in 0..3 {
            prop_assert!((c[k] - (expect[k] - 0.5)).abs() <= 1e-12);
        }
    }

    #[test]
    fn parallel_and_serial_evaluation_agree_bitwise(recs in records(6), x in prop::collection::vec(-2.0..2.0f64, 6), y in prop::collection::vec(-1.0..1.0f64, 3)) {
        let par = model_with(&recs, 6).with_parallel(true);
        let ser = model_with(&recs, 6).with_parallel(false);
        let (mut jp, mut js) = (vec![0.0; par.sparsity().jac_nnz()], vec![0.0; ser.sparsity().jac_nnz()]);
        par.jacobian_values(&x, &mut jp).unwrap();
        ser.jacobian_values(&x, &mut js).unwrap();
        prop_assert_eq!(jp, js);
        let (mut hp, mut hs) = (vec![0.0; par.sparsity().hess_nnz()], vec![0.0; ser.sparsity().hess_nnz()]);
        par.hessian_values(&x, &y, 0.7, &mut hp).unwrap();
        ser.hessian_values(&x, &y, 0.7, &mut hs).unwrap();
        prop_assert_eq!(hp, hs);
    }

    #[test]
    fn derivatives_match_central_differences(recs in records(5), x in prop::collection::vec(-1.5..1.5f64, 5), y in prop::collection::vec(-1.0..1.0f64, 3)) {
        let m = model_with(&recs, 5);
        let n = 5;
        let h = 1e-6;
        let mut g = vec![0.0; n];
        m.gradient(&x, &mut g).unwrap();
        let jac = m.jacobian_coo(&x).unwrap().to_dense();
        let (hr, hc) = m.hessian_structure();
        let mut hv = vec![0.0; hr.len()];
        m.hessian_values(&x, &y, 1.0, &mut hv).unwrap();
        let hess = dense_symmetric(n, hr, hc, &hv);
        let lag_grad = |x: &[f64]| -> Vec<f64> {
            let mut g = vec![0.0; n];
            m.gradient(x, &mut g).unwrap();
            let j = m.jacobian_coo(x).unwrap().to_dense();
            for (i, row) in j.iter().enumerate() {
                for k in 0..n {
                    g[k] += y[i] * row[k];
                }
            }
            g
        };
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-6 * (1.0 + a.abs());
        for k in 0..n {
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[k] += h;
            xm[k] -= h;
            let fd = (m.objective(&xp).unwrap() - m.objective(&xm).unwrap()) / (2.0 * h);
            prop_assert!(close(g[k], fd), "gradient {}: {} vs {}", k, g[k], fd);
            let (mut cp, mut cm) = (vec![0.0; 3], vec![0.0; 3]);
            m.constraints(&xp, &mut cp).unwrap();
            m.constraints(&xm, &mut cm).unwrap();
            for i in 0..3 {
                let fd = (cp[i] - cm[i]) / (2.0 * h);
                prop_assert!(close(jac[i][k], fd), "jacobian ({}, {}): {} vs {}", i, k, jac[i][k], fd);
            }
            let (lp, lm) = (lag_grad(&xp), lag_grad(&xm));
            for i in 0..n {
                let fd = (lp[i] - lm[i]) / (2.0 * h);
                prop_assert!(close(hess[i][k], fd), "hessian ({}, {}): {} vs {}", i, k, hess[i][k], fd);
            }
        }
    }

    #[test]
    fn hessian_structure_is_lower_triangular(recs in records(6)) {
        let m = model_with(&recs, 6);
        let (r, c) = m.hessian_structure();
        prop_assert!(r.iter().zip(c).all(|(i, j)| i >= j));
    }

    #[test]
    fn objective_weight_enters_linearly(recs in records(6), x in prop::collection::vec(-2.0..2.0f64, 6), y in prop::collection::vec(-1.0..1.0f64, 3), w in -3.0..3.0f64) {
        let m = model_with(&recs, 6);
        let nnz = m.sparsity().hess_nnz();
        let (mut h0, mut h1, mut hw) = (vec![0.0; nnz], vec![0.0; nnz], vec![0.0; nnz]);
        m.hessian_values(&x, &y, 0.0, &mut h0).unwrap();
        m.hessian_values(&x, &vec![0.0; 3], 1.0, &mut h1).unwrap();
        m.hessian_values(&x, &y, w, &mut hw).unwrap();
        for k in 0..nnz {
            prop_assert!((hw[k] - (h0[k] + w * h1[k])).abs() <= 1e-12 * (1.0 + hw[k].abs()));
        }
    }

    #[test]
    fn csc_compression_matches_dense_accumulation(n in 1usize..30, entries in prop::collection::vec((0usize..30, 0usize..30, -5.0..5.0f64), 0..200)) {
        let trip: Vec<(usize, usize, f64)> = entries.into_iter().map(|(i, j, v)| (i % n, j % n, v)).collect();
        let coo = CooMatrix::from_triplets(n, n, &trip);
        let (csc, map) = compress_to_csc(&coo);
        prop_assert!(csc.is_well_formed());
        prop_assert!(csc.colptr.windows(2).all(|w| w[0] <= w[1]));
        let mut dense = vec![vec![0.0; n]; n];
        for &(i, j, v) in &trip {
            dense[i][j] += v;
        }
        let got = csc.to_dense();
        for i in 0..n {
            for j in 0..n {
                prop_assert!((got[i][j] - dense[i][j]).abs() <= 1e-12);
            }
        }
        let mut again = csc.clone();
        again.values.iter_mut().for_each(|v| *v = 0.0);
        again.scatter(&map, &coo.values);
        prop_assert_eq!(again.values, csc.values);
    }

    #[test]
    fn ordering_is_a_permutation(n in 1usize..40, edges in prop::collection::vec((0usize..40, 0usize..40), 0..120)) {
        let mut trip: Vec<(usize, usize, f64)> = (0..n).map(|i| (i, i, 1.0)).collect();
        trip.extend(edges.into_iter().map(|(i, j)| ((i % n).max(j % n), (i % n).min(j % n), 1.0)));
        let (a, _) = compress_symmetric_lower(&CooMatrix::from_triplets(n, n, &trip));
        let mut p = fill_reducing_ordering(&a);
        p.sort_unstable();
        prop_assert_eq!(p, (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn inertia_matches_dense_oracle(n in 1usize..25, seed in prop::collection::vec(-1.0..1.0f64, 625), shift in -1.5..1.5f64) {
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..=i {
                let v = if i == j { seed[i * 25 + j] + shift } else if (i + 2 * j) % 3 == 0 { 0.3 * seed[i * 25 + j] } else { 0.0 };
                a[i][j] = v;
                a[j][i] = v;
            }
        }
        let csc = CscMatrix::from_dense_lower(&a);
        let perm = fill_reducing_ordering(&csc);
        let sym = symbolic_factorize(&csc, &perm);
        let f = numeric_factorize(&sym, &csc.values, 0.0).unwrap();
        let oracle = dense_ldl_oracle(&DenseMatrix::from_rows(&a)).unwrap();
        prop_assert_eq!(f.inertia.positive + f.inertia.negative + f.inertia.zero, n);
        if oracle.inertia.zero == 0 && f.inertia.zero == 0 && f.floored == 0 {
            prop_assert_eq!(f.inertia, oracle.inertia);
        }
    }

    #[test]
    fn spd_solve_is_independent_of_ordering(n in 2usize..30, seed in prop::collection::vec(-1.0..1.0f64, 900), b in prop::collection::vec(-1.0..1.0f64, 30)) {
        // AᵀA + I with a sparse A.
        let sparse_a: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if (i * 7 + j * 3) % 5 == 0 { seed[i * 30 + j] } else { 0.0 }).collect()).collect();
        let m: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| (0..n).map(|k| sparse_a[k][i] * sparse_a[k][j]).sum::<f64>() + if i == j { 1.0 } else { 0.0 }).collect()).collect();
        let csc = CscMatrix::from_dense_lower(&m);
        let rhs = &b[..n];
        let with_amd = SparseLdl::factorize(&csc).unwrap().solve(rhs);
        let natural: Vec<usize> = (0..n).collect();
        let sym = symbolic_factorize(&csc, &natural);
        let f = numeric_factorize(&sym, &csc.values, 0.0).unwrap();
        prop_assert!(f.inertia.is_positive_definite());
        let mut x = rhs.to_vec();
        mpopf::linalg::solve_in_place(&sym, &f, &mut x);
        let scale = with_amd.iter().fold(1.0f64, |s, v| s.max(v.abs()));
        for k in 0..n {
            prop_assert!((with_amd[k] - x[k]).abs() <= 1e-9 * scale);
        }
        let r = csc.mul_vec(&with_amd);
        for k in 0..n {
            prop_assert!((r[k] - rhs[k]).abs() <= 1e-9);
        }
    }
}
