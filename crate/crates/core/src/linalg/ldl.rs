//! Simplicial sparse LDLᵀ with a fixed (static) pivot order.
//!
//! The factorization is up-looking: row `k` of `L` is obtained from a sparse
//! triangular solve whose pattern is the reach of row `k` in the elimination
//! tree. Small pivots are floored instead of exchanged, and the signs of the
//! unfloored pivots give the inertia.

use serde::Serialize;

use super::csc::CscMatrix;
use super::ordering::{fill_reducing_ordering, invert};
use super::LinalgError;

/// (positive, negative, zero) pivot counts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Inertia {
    pub positive: usize,
    pub negative: usize,
    pub zero: usize,
}

impl Inertia {
    pub fn new(positive: usize, negative: usize, zero: usize) -> Self {
        Inertia { positive, negative, zero }
    }

    pub fn is_positive_definite(&self) -> bool {
        self.negative == 0 && self.zero == 0
    }
}

/// Ordering, elimination tree and the pattern of `L`. Reusable for every
/// matrix with the same pattern.
#[derive(Clone, Debug)]
pub struct SymbolicFactorization {
    pub n: usize,
    /// `perm[k]` is the original index of pivot `k`.
    pub perm: Vec<usize>,
    pub pinv: Vec<usize>,
    /// Elimination tree of the permuted matrix (`None` for roots).
    pub parent: Vec<Option<usize>>,
    /// Strictly-lower nonzeros per column of `L`.
    pub col_counts: Vec<usize>,
    pub l_colptr: Vec<usize>,
    pub l_rowidx: Vec<usize>,
    // Permuted upper triangle: column k lists rows i <= k.
    upper_colptr: Vec<usize>,
    upper_rowidx: Vec<usize>,
    // upper position of every value of the source (lower) matrix.
    value_map: Vec<usize>,
    source_nnz: usize,
}

impl SymbolicFactorization {
    pub fn l_nnz(&self) -> usize {
        self.l_rowidx.len()
    }
}

/// Fill-reducing ordering followed by symbolic analysis.
pub fn analyze(a: &CscMatrix) -> SymbolicFactorization {
    let perm = fill_reducing_ordering(a);
    symbolic_factorize(a, &perm)
}

/// Symbolic analysis of a lower-stored symmetric matrix under `perm`.
pub fn symbolic_factorize(a: &CscMatrix, perm: &[usize]) -> SymbolicFactorization {
    assert!(a.lower && a.nrows == a.ncols, "symbolic analysis needs lower symmetric storage");
    let n = a.ncols;
    let pinv = invert(perm);

    // Permuted upper triangle with a map back to the source values.
    let mut count = vec![0usize; n + 1];
    for j in 0..n {
        for &i in a.column(j).0 {
            let (pi, pj) = (pinv[i], pinv[j]);
            count[pi.max(pj) + 1] += 1;
        }
    }
    for k in 0..n {
        count[k + 1] += count[k];
    }
    let upper_colptr = count.clone();
    let mut next = count;
    let mut entries: Vec<(usize, usize)> = vec![(0, 0); a.nnz()];
    for j in 0..n {
        for k in a.colptr[j]..a.colptr[j + 1] {
            let (pi, pj) = (pinv[a.rowidx[k]], pinv[j]);
            let col = pi.max(pj);
            entries[next[col]] = (pi.min(pj), k);
            next[col] += 1;
        }
    }
    for k in 0..n {
        entries[upper_colptr[k]..upper_colptr[k + 1]].sort_unstable();
    }
    let upper_rowidx: Vec<usize> = entries.iter().map(|e| e.0).collect();
    let mut value_map = vec![0usize; a.nnz()];
    for (pos, e) in entries.iter().enumerate() {
        value_map[e.1] = pos;
    }

    // Elimination tree and column counts.
    let mut parent = vec![None; n];
    let mut flag = vec![usize::MAX; n];
    let mut col_counts = vec![0usize; n];
    for k in 0..n {
        flag[k] = k;
        for &row in &upper_rowidx[upper_colptr[k]..upper_colptr[k + 1]] {
            let mut i = row;
            if i >= k {
                continue;
            }
            while flag[i] != k {
                if parent[i].is_none() {
                    parent[i] = Some(k);
                }
                col_counts[i] += 1;
                flag[i] = k;
                i = parent[i].expect("set above");
            }
        }
    }
    let mut l_colptr = vec![0usize; n + 1];
    for k in 0..n {
        l_colptr[k + 1] = l_colptr[k] + col_counts[k];
    }

    // Pattern of L, rows appended in increasing order.
    let mut l_rowidx = vec![0usize; l_colptr[n]];
    let mut fill = l_colptr.clone();
    flag.iter_mut().for_each(|f| *f = usize::MAX);
    for k in 0..n {
        flag[k] = k;
        for &row in &upper_rowidx[upper_colptr[k]..upper_colptr[k + 1]] {
            let mut i = row;
            if i >= k {
                continue;
            }
            while flag[i] != k {
                l_rowidx[fill[i]] = k;
                fill[i] += 1;
                flag[i] = k;
                i = parent[i].expect("tree built above");
            }
        }
    }

    SymbolicFactorization {
        n,
        perm: perm.to_vec(),
        pinv,
        parent,
        col_counts,
        l_colptr,
        l_rowidx,
        upper_colptr,
        upper_rowidx,
        value_map,
        source_nnz: a.nnz(),
    }
}

/// Numeric LDLᵀ factor.
#[derive(Clone, Debug)]
pub struct NumericFactorization {
    pub l_values: Vec<f64>,
    /// Pivots after flooring.
    pub d: Vec<f64>,
    /// Inertia from the pivot signs before flooring.
    pub inertia: Inertia,
    pub pivot_floor: f64,
    /// Pivots whose magnitude was raised to `pivot_floor`.
    pub floored: usize,
}

/// Default static-pivot floor: `1e-12 * max|diag|` (1e-12 for an empty or zero diagonal).
pub fn default_pivot_floor(a: &CscMatrix) -> f64 {
    let m = a.max_abs_diagonal();
    if m > 0.0 {
        1e-12 * m
    } else {
        1e-12
    }
}

/// Factor a matrix with the pattern analyzed in `symbolic`.
pub fn numeric_factorize(symbolic: &SymbolicFactorization, values: &[f64], pivot_floor: f64) -> Result<NumericFactorization, LinalgError> {
    if values.len() != symbolic.source_nnz {
        return Err(LinalgError::DimensionMismatch { expected: symbolic.source_nnz, found: values.len() });
    }
    if let Some(k) = values.iter().position(|v| !v.is_finite()) {
        return Err(LinalgError::NonFinite { index: k });
    }
    let n = symbolic.n;
    let mut upper = vec![0.0; values.len()];
    for (src, &dst) in symbolic.value_map.iter().enumerate() {
        upper[dst] += values[src];
    }

    let lp = &symbolic.l_colptr;
    let li = &symbolic.l_rowidx;
    let mut lx = vec![0.0; li.len()];
    let mut d = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut filled = vec![0usize; n];
    let mut flag = vec![usize::MAX; n];
    let mut pattern = vec![0usize; n];
    let mut stack = vec![0usize; n];
    let mut inertia = Inertia::default();
    let mut floored = 0;

    for k in 0..n {
        let mut top = n;
        flag[k] = k;
        for p in symbolic.upper_colptr[k]..symbolic.upper_colptr[k + 1] {
            let mut i = symbolic.upper_rowidx[p];
            y[i] += upper[p];
            let mut len = 0;
            while i < k && flag[i] != k {
                stack[len] = i;
                len += 1;
                flag[i] = k;
                i = symbolic.parent[i].expect("row reach follows the tree");
            }
            while len > 0 {
                len -= 1;
                top -= 1;
                pattern[top] = stack[len];
            }
        }
        let mut dk = y[k];
        y[k] = 0.0;
        for &i in &pattern[top..n] {
            let yi = y[i];
            y[i] = 0.0;
            let start = lp[i];
            let end = start + filled[i];
            for p in start..end {
                y[li[p]] -= lx[p] * yi;
            }
            let lki = yi / d[i];
            dk -= lki * yi;
            debug_assert_eq!(li[end], k);
            lx[end] = lki;
            filled[i] += 1;
        }
        if dk > 0.0 {
            inertia.positive += 1;
        } else if dk < 0.0 {
            inertia.negative += 1;
        } else {
            inertia.zero += 1;
        }
        if dk.abs() < pivot_floor {
            dk = if dk < 0.0 { -pivot_floor } else { pivot_floor };
            floored += 1;
        }
        d[k] = dk;
    }

    Ok(NumericFactorization { l_values: lx, d, inertia, pivot_floor, floored })
}

/// Solve `A x = b` with a computed factorization; `rhs` is overwritten by `x`.
pub fn solve_in_place(symbolic: &SymbolicFactorization, factor: &NumericFactorization, rhs: &mut [f64]) {
    let n = symbolic.n;
    assert_eq!(rhs.len(), n);
    let lp = &symbolic.l_colptr;
    let li = &symbolic.l_rowidx;
    let lx = &factor.l_values;
    let mut x: Vec<f64> = symbolic.perm.iter().map(|&i| rhs[i]).collect();
    for j in 0..n {
        let xj = x[j];
        if xj != 0.0 {
            for p in lp[j]..lp[j + 1] {
                x[li[p]] -= lx[p] * xj;
            }
        }
    }
    for j in 0..n {
        x[j] /= factor.d[j];
    }
    for j in (0..n).rev() {
        let mut s = x[j];
        for p in lp[j]..lp[j + 1] {
            s -= lx[p] * x[li[p]];
        }
        x[j] = s;
    }
    for (k, &i) in symbolic.perm.iter().enumerate() {
        rhs[i] = x[k];
    }
}

/// Outcome of [`iterative_refinement`].
#[derive(Clone, Debug)]
pub struct Refined {
    pub solution: Vec<f64>,
    /// `‖b − A x‖∞ / max(‖b‖∞, tiny)` of the returned solution.
    pub residual: f64,
    /// Correction passes performed after the initial solve.
    pub passes: usize,
    pub converged: bool,
    /// Relative residual after the initial solve and after every pass.
    pub trace: Vec<f64>,
}

fn relative_residual(a: &CscMatrix, x: &[f64], b: &[f64], bnorm: f64) -> (Vec<f64>, f64) {
    let ax = a.mul_vec(x);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let rn = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    (r, rn / bnorm)
}

/// Solve and refine `A x = b` until the relative residual is at most `tol` or
/// `max_passes` corrections have been applied. Returns the best iterate seen.
pub fn iterative_refinement(
    a: &CscMatrix,
    symbolic: &SymbolicFactorization,
    factor: &NumericFactorization,
    rhs: &[f64],
    max_passes: usize,
    tol: f64,
) -> Refined {
    let bnorm = rhs.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let mut x = rhs.to_vec();
    solve_in_place(symbolic, factor, &mut x);
    let (mut r, mut res) = relative_residual(a, &x, rhs, bnorm);
    let mut trace = vec![res];
    let mut best = (x.clone(), res);
    let mut passes = 0;
    while res > tol && passes < max_passes {
        solve_in_place(symbolic, factor, &mut r);
        for (xi, di) in x.iter_mut().zip(&r) {
            *xi += di;
        }
        passes += 1;
        let (nr, nres) = relative_residual(a, &x, rhs, bnorm);
        r = nr;
        res = nres;
        trace.push(res);
        if res < best.1 {
            best = (x.clone(), res);
        } else if !res.is_finite() || res > 10.0 * best.1 {
            break;
        }
    }
    Refined { converged: best.1 <= tol, solution: best.0, residual: best.1, passes, trace }
}

/// Analyze, factor and keep everything needed for repeated solves.
#[derive(Clone, Debug)]
pub struct SparseLdl {
    pub symbolic: SymbolicFactorization,
    pub numeric: NumericFactorization,
}

impl SparseLdl {
    pub fn factorize(a: &CscMatrix) -> Result<Self, LinalgError> {
        let symbolic = analyze(a);
        let numeric = numeric_factorize(&symbolic, &a.values, default_pivot_floor(a))?;
        Ok(SparseLdl { symbolic, numeric })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        solve_in_place(&self.symbolic, &self.numeric, &mut x);
        x
    }
}
