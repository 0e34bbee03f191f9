//! Order, factor and solve a sparse symmetric system, then read its inertia.

use mpopf::linalg::{analyze, compress_symmetric_lower, iterative_refinement, numeric_factorize, CooMatrix};

fn main() {
    // 5-point Laplacian on a k×k grid, shifted by -σ to make it indefinite.
    let k = 30;
    let n = k * k;
    let idx = |i: usize, j: usize| i * k + j;
    for sigma in [0.0, 0.5] {
        let mut coo = CooMatrix::new(n, n);
        for i in 0..k {
            for j in 0..k {
                coo.push(idx(i, j), idx(i, j), 4.0 - sigma);
                if i + 1 < k {
                    coo.push(idx(i + 1, j), idx(i, j), -1.0);
                }
                if j + 1 < k {
                    coo.push(idx(i, j + 1), idx(i, j), -1.0);
                }
            }
        }
        let (a, _) = compress_symmetric_lower(&coo);
        let symbolic = analyze(&a);
        let factor = numeric_factorize(&symbolic, &a.values, 0.0).unwrap();
        let b: Vec<f64> = (0..n).map(|i| (i % 7) as f64 - 3.0).collect();
        let refined = iterative_refinement(&a, &symbolic, &factor, &b, 3, 1e-14);
        println!(
            "σ = {sigma}: n {n}, nnz(A) {}, nnz(L) {}, inertia {:?}, residual {:.2e} after {} passes",
            a.nnz(),
            symbolic.l_nnz(),
            factor.inertia,
            refined.residual,
            refined.passes
        );
    }
}
