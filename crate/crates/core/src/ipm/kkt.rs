//! Condensed KKT system: assembly, inertia-corrected factorization, step
//! recovery, and the dense full-system oracle.
//!
//! ```text
//! M_cond = W + δ_w I + Σ_x + Aᵀ D A
//! M_cond Δx = q_x + Aᵀ(C q_s + D q_y)
//! C = (δ_c Σ_s + (1 + δ_c δ_w) I)⁻¹,   D = (Σ_s + δ_w I) C
//! Δs = C(δ_c q_s − q_y + A Δx),        Δy = (Σ_s + δ_w I) Δs − q_s
//! ```

use super::iterate::{Direction, IterateState, Residuals};
use super::lifted::LiftedNlp;
use super::{IpmError, LinearSolverKind, SolverConfig};
use crate::linalg::csc::{compress_pattern, CscMatrix};
use crate::linalg::dense::{dense_ldl_oracle, DenseLdl, DenseMatrix};
use crate::linalg::ldl::{
    default_pivot_floor, iterative_refinement, numeric_factorize, symbolic_factorize, Inertia,
    NumericFactorization, SymbolicFactorization,
};
use crate::linalg::ordering::fill_reducing_ordering;
use crate::linalg::LinalgError;

/// Pattern of `M_cond` and the maps needed to assemble it without symbolic work.
pub struct CondensedStructure {
    pub n: usize,
    pub m: usize,
    pattern: CscMatrix,
    hess_dst: Vec<usize>,
    diag_dst: Vec<usize>,
    /// Compressed `A` by rows: `a_ptr[i]..a_ptr[i+1]` index `a_col`.
    a_ptr: Vec<usize>,
    a_col: Vec<usize>,
    /// Jacobian COO slot → compressed `A` entry.
    a_map: Vec<usize>,
    /// For row `i`, pairs `pair_ptr[i]..pair_ptr[i+1]` of compressed entries
    /// `(a, b)` whose product lands at `pair_dst`.
    pair_ptr: Vec<usize>,
    pair_a: Vec<u32>,
    pair_b: Vec<u32>,
    pair_dst: Vec<u32>,
    pub symbolic: SymbolicFactorization,
}

impl CondensedStructure {
    pub fn new(lifted: &LiftedNlp) -> Self {
        let (n, m) = (lifted.n, lifted.m);
        // CSC of Aᵀ is the CSR of A.
        let (at, a_map) = compress_pattern(n, m, &lifted.jac_cols, &lifted.jac_rows, None, false);
        let (a_ptr, a_col) = (at.colptr, at.rowidx);

        let mut rows: Vec<usize> = lifted.hess_rows.clone();
        let mut cols: Vec<usize> = lifted.hess_cols.clone();
        rows.extend(0..n);
        cols.extend(0..n);
        let mut pair_ptr = vec![0usize; m + 1];
        let mut pair_a = Vec::new();
        let mut pair_b = Vec::new();
        for i in 0..m {
            for a in a_ptr[i]..a_ptr[i + 1] {
                for b in a_ptr[i]..=a {
                    rows.push(a_col[a]);
                    cols.push(a_col[b]);
                    pair_a.push(a as u32);
                    pair_b.push(b as u32);
                }
            }
            pair_ptr[i + 1] = pair_a.len();
        }
        let (pattern, map) = compress_pattern(n, n, &rows, &cols, None, true);
        let nh = lifted.hess_rows.len();
        let hess_dst = map[..nh].to_vec();
        let diag_dst = map[nh..nh + n].to_vec();
        let pair_dst = map[nh + n..].iter().map(|&k| k as u32).collect();
        let perm = fill_reducing_ordering(&pattern);
        let symbolic = symbolic_factorize(&pattern, &perm);
        CondensedStructure { n, m, pattern, hess_dst, diag_dst, a_ptr, a_col, a_map, pair_ptr, pair_a, pair_b, pair_dst, symbolic }
    }

    pub fn pattern(&self) -> &CscMatrix {
        &self.pattern
    }

    /// Compressed-row `A` values from Jacobian COO values.
    fn compress_a(&self, jac: &[f64]) -> Vec<f64> {
        let mut v = vec![0.0; self.a_col.len()];
        for (k, &dst) in self.a_map.iter().enumerate() {
            v[dst] += jac[k];
        }
        v
    }

    fn a_mul(&self, a: &[f64], x: &[f64]) -> Vec<f64> {
        (0..self.m).map(|i| (self.a_ptr[i]..self.a_ptr[i + 1]).map(|k| a[k] * x[self.a_col[k]]).sum()).collect()
    }

    fn a_t_mul(&self, a: &[f64], w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for i in 0..self.m {
            for k in self.a_ptr[i]..self.a_ptr[i + 1] {
                out[self.a_col[k]] += a[k] * w[i];
            }
        }
        out
    }
}

/// Diagonal blocks, right-hand sides and the assembled `M_cond`.
#[derive(Clone, Debug)]
pub struct CondensedKkt {
    pub sigma_x: Vec<f64>,
    pub sigma_s: Vec<f64>,
    pub c: Vec<f64>,
    pub d: Vec<f64>,
    pub qx: Vec<f64>,
    pub qs: Vec<f64>,
    pub qy: Vec<f64>,
    pub rhs: Vec<f64>,
    pub matrix: CscMatrix,
    pub delta_w: f64,
    pub delta_c: f64,
    a: Vec<f64>,
}

fn sigma(v: &[f64], l: &[f64], u: &[f64], zl: &[f64], zu: &[f64]) -> Vec<f64> {
    (0..v.len())
        .map(|i| {
            let mut s = 0.0;
            if l[i].is_finite() {
                s += zl[i] / (v[i] - l[i]);
            }
            if u[i].is_finite() {
                s += zu[i] / (u[i] - v[i]);
            }
            s
        })
        .collect()
}

fn q(p: &[f64], v: &[f64], l: &[f64], u: &[f64], pl: &[f64], pu: &[f64]) -> Vec<f64> {
    (0..v.len())
        .map(|i| {
            let mut r = p[i];
            if l[i].is_finite() {
                r += pl[i] / (v[i] - l[i]);
            }
            if u[i].is_finite() {
                r -= pu[i] / (u[i] - v[i]);
            }
            r
        })
        .collect()
}

/// Assemble the condensed system at `it` with regularizations `(δ_w, δ_c)`.
/// `hess` and `jac` are Lagrangian-Hessian and Jacobian values at `it.x`.
pub fn assemble_condensed(
    structure: &CondensedStructure,
    lifted: &LiftedNlp,
    it: &IterateState,
    r: &Residuals,
    hess: &[f64],
    jac: &[f64],
    delta_w: f64,
    delta_c: f64,
) -> CondensedKkt {
    let sigma_x = sigma(&it.x, &lifted.x_lower, &lifted.x_upper, &it.zl_x, &it.zu_x);
    let sigma_s = sigma(&it.s, &lifted.s_lower, &lifted.s_upper, &it.zl_s, &it.zu_s);
    let c: Vec<f64> = sigma_s.iter().map(|&ss| 1.0 / (delta_c * ss + 1.0 + delta_c * delta_w)).collect();
    let d: Vec<f64> = sigma_s.iter().zip(&c).map(|(&ss, &ci)| (ss + delta_w) * ci).collect();
    let qx = q(&r.px, &it.x, &lifted.x_lower, &lifted.x_upper, &r.pzl_x, &r.pzu_x);
    let qs = q(&r.ps, &it.s, &lifted.s_lower, &lifted.s_upper, &r.pzl_s, &r.pzu_s);
    let qy = r.py.clone();

    let a = structure.compress_a(jac);
    let mut matrix = structure.pattern.clone();
    let vals = &mut matrix.values;
    for (k, &dst) in structure.hess_dst.iter().enumerate() {
        vals[dst] += hess[k];
    }
    for (i, &dst) in structure.diag_dst.iter().enumerate() {
        vals[dst] += delta_w + sigma_x[i];
    }
    for i in 0..structure.m {
        let di = d[i];
        for k in structure.pair_ptr[i]..structure.pair_ptr[i + 1] {
            let (pa, pb) = (structure.pair_a[k] as usize, structure.pair_b[k] as usize);
            vals[structure.pair_dst[k] as usize] += di * a[pa] * a[pb];
        }
    }
    let w: Vec<f64> = (0..structure.m).map(|i| c[i] * qs[i] + d[i] * qy[i]).collect();
    let atw = structure.a_t_mul(&a, &w);
    let rhs = qx.iter().zip(&atw).map(|(u, v)| u + v).collect();
    CondensedKkt { sigma_x, sigma_s, c, d, qx, qs, qy, rhs, matrix, delta_w, delta_c, a }
}

/// A factorization of `M_cond` by either backend.
pub enum Factorized {
    Sparse(NumericFactorization),
    Dense(DenseLdl),
}

impl Factorized {
    pub fn inertia(&self) -> Inertia {
        match self {
            Factorized::Sparse(f) => f.inertia,
            Factorized::Dense(f) => f.inertia,
        }
    }

    /// Whether the factor certifies `M_cond ≻ 0` with no floored pivots.
    pub fn is_acceptable(&self, n: usize) -> bool {
        match self {
            Factorized::Sparse(f) => f.inertia == Inertia::new(n, 0, 0) && f.floored == 0,
            Factorized::Dense(f) => f.inertia == Inertia::new(n, 0, 0),
        }
    }

    fn has_zero_pivots(&self) -> bool {
        match self {
            Factorized::Sparse(f) => f.inertia.zero > 0 || f.floored > 0,
            Factorized::Dense(f) => f.inertia.zero > 0,
        }
    }

    /// Solve `M x = b`, followed by up to `passes` refinement steps.
    pub fn solve(&self, structure: &CondensedStructure, matrix: &CscMatrix, b: &[f64], passes: usize) -> Vec<f64> {
        match self {
            Factorized::Sparse(f) => iterative_refinement(matrix, &structure.symbolic, f, b, passes, 1e-14).solution,
            Factorized::Dense(f) => {
                let mut x = f.solve(b).unwrap_or_else(|_| vec![0.0; b.len()]);
                for _ in 0..passes {
                    let ax = matrix.mul_vec(&x);
                    let r: Vec<f64> = b.iter().zip(&ax).map(|(u, v)| u - v).collect();
                    if let Ok(dx) = f.solve(&r) {
                        x.iter_mut().zip(&dx).for_each(|(xi, di)| *xi += di);
                    }
                }
                x
            }
        }
    }
}

fn factor(structure: &CondensedStructure, matrix: &CscMatrix, kind: LinearSolverKind) -> Result<Factorized, LinalgError> {
    match kind {
        LinearSolverKind::Sparse => {
            numeric_factorize(&structure.symbolic, &matrix.values, default_pivot_floor(matrix)).map(Factorized::Sparse)
        }
        LinearSolverKind::Dense => {
            if let Some(k) = matrix.values.iter().position(|v| !v.is_finite()) {
                return Err(LinalgError::NonFinite { index: k });
            }
            let dense = DenseMatrix::from_rows(&matrix.to_dense());
            dense_ldl_oracle(&dense).map(Factorized::Dense)
        }
    }
}

/// Result of [`inertia_corrected_factorize`].
pub struct CorrectedFactor {
    pub kkt: CondensedKkt,
    pub factor: Factorized,
    pub retries: usize,
    /// Inertia of the first attempt (before any correction).
    pub first_inertia: Inertia,
}

/// Factor `M_cond`, increasing `δ_w` until the factor reports inertia
/// `(n, 0, 0)` with no floored pivots. The first attempt uses `δ_w = 0`; the
/// first correction is `max(δ_w_init, last·shrink)` where `last` is the value
/// that succeeded at the previous iteration, then `δ_w` grows by `grow` up to
/// `δ_w_max`. Zero pivots additionally switch on `δ_c = δ_c_factor·μ^{1/4}`.
#[allow(clippy::too_many_arguments)]
pub fn inertia_corrected_factorize(
    structure: &CondensedStructure,
    lifted: &LiftedNlp,
    it: &IterateState,
    r: &Residuals,
    hess: &[f64],
    jac: &[f64],
    last_delta_w: f64,
    config: &SolverConfig,
) -> Result<CorrectedFactor, IpmError> {
    let n = structure.n;
    let mut delta_w = 0.0;
    let mut delta_c = 0.0;
    let mut retries = 0;
    let mut first_inertia = None;
    loop {
        let kkt = assemble_condensed(structure, lifted, it, r, hess, jac, delta_w, delta_c);
        let f = factor(structure, &kkt.matrix, config.linear_solver);
        let zero_pivots = match f {
            Ok(f) => {
                let first = *first_inertia.get_or_insert(f.inertia());
                if f.is_acceptable(n) {
                    return Ok(CorrectedFactor { kkt, factor: f, retries, first_inertia: first });
                }
                f.has_zero_pivots()
            }
            Err(LinalgError::Singular) => true,
            Err(e) => return Err(e.into()),
        };
        if zero_pivots && delta_c == 0.0 {
            delta_c = config.delta_c_factor * it.mu.powf(0.25);
        }
        delta_w = if delta_w == 0.0 {
            if last_delta_w == 0.0 {
                config.delta_w_init
            } else {
                (last_delta_w * config.delta_w_shrink).max(config.delta_w_min).max(config.delta_w_init)
            }
        } else {
            delta_w * config.delta_w_grow
        };
        retries += 1;
        if delta_w > config.delta_w_max {
            return Err(IpmError::InertiaCorrectionFailed { max: config.delta_w_max });
        }
    }
}

/// Solve the condensed system and recover all seven step components.
pub fn recover_step(
    structure: &CondensedStructure,
    lifted: &LiftedNlp,
    it: &IterateState,
    r: &Residuals,
    kkt: &CondensedKkt,
    factor: &Factorized,
    passes: usize,
) -> Direction {
    let dx = factor.solve(structure, &kkt.matrix, &kkt.rhs, passes);
    recover_from_dx(structure, lifted, it, r, kkt, dx)
}

fn recover_from_dx(
    structure: &CondensedStructure,
    lifted: &LiftedNlp,
    it: &IterateState,
    r: &Residuals,
    kkt: &CondensedKkt,
    dx: Vec<f64>,
) -> Direction {
    let adx = structure.a_mul(&kkt.a, &dx);
    let ds: Vec<f64> = (0..structure.m).map(|i| kkt.c[i] * (kkt.delta_c * kkt.qs[i] - kkt.qy[i] + adx[i])).collect();
    let dy: Vec<f64> = (0..structure.m).map(|i| (kkt.sigma_s[i] + kkt.delta_w) * ds[i] - kkt.qs[i]).collect();
    let dzl = |v: &[f64], dv: &[f64], l: &[f64], z: &[f64], p: &[f64]| -> Vec<f64> {
        (0..v.len()).map(|i| if l[i].is_finite() { (p[i] - z[i] * dv[i]) / (v[i] - l[i]) } else { 0.0 }).collect()
    };
    let dzu = |v: &[f64], dv: &[f64], u: &[f64], z: &[f64], p: &[f64]| -> Vec<f64> {
        (0..v.len()).map(|i| if u[i].is_finite() { (p[i] + z[i] * dv[i]) / (u[i] - v[i]) } else { 0.0 }).collect()
    };
    Direction {
        dzl_x: dzl(&it.x, &dx, &lifted.x_lower, &it.zl_x, &r.pzl_x),
        dzu_x: dzu(&it.x, &dx, &lifted.x_upper, &it.zu_x, &r.pzu_x),
        dzl_s: dzl(&it.s, &ds, &lifted.s_lower, &it.zl_s, &r.pzl_s),
        dzu_s: dzu(&it.s, &ds, &lifted.s_upper, &it.zu_s, &r.pzu_s),
        dx,
        ds,
        dy,
    }
}

/// Assemble the seven-block lifted system densely and solve it by Gaussian
/// elimination. Only multipliers of finite bounds are unknowns. Also returns
/// the inertia of the system symmetrized by scaling each bound-multiplier row
/// by `−Z⁻¹`, when that matrix factors.
pub fn full_kkt_oracle(
    lifted: &LiftedNlp,
    it: &IterateState,
    r: &Residuals,
    hess: &[f64],
    jac: &[f64],
    delta_w: f64,
    delta_c: f64,
) -> Result<(Direction, Option<Inertia>), LinalgError> {
    let (n, m) = (lifted.n, lifted.m);
    // Column offsets: x, s, y, then one unknown per finite bound.
    struct Family<'b> {
        v: &'b [f64],
        b: &'b [f64],
        z: &'b [f64],
        p: &'b [f64],
        lower: bool,
        on_x: bool,
    }
    let fams = [
        Family { v: &it.x, b: &lifted.x_lower, z: &it.zl_x, p: &r.pzl_x, lower: true, on_x: true },
        Family { v: &it.x, b: &lifted.x_upper, z: &it.zu_x, p: &r.pzu_x, lower: false, on_x: true },
        Family { v: &it.s, b: &lifted.s_lower, z: &it.zl_s, p: &r.pzl_s, lower: true, on_x: false },
        Family { v: &it.s, b: &lifted.s_upper, z: &it.zu_s, p: &r.pzu_s, lower: false, on_x: false },
    ];
    let mut index: Vec<Vec<Option<usize>>> = Vec::new();
    let mut dim = n + 2 * m;
    for f in &fams {
        index.push(
            f.b.iter()
                .map(|b| {
                    b.is_finite().then(|| {
                        dim += 1;
                        dim - 1
                    })
                })
                .collect(),
        );
    }
    let (xs, ss, ys) = (0, n, n + m);
    let mut mat = DenseMatrix::zeros(dim, dim);
    let mut rhs = vec![0.0; dim];
    for k in 0..hess.len() {
        let (i, j) = (lifted.hess_rows[k], lifted.hess_cols[k]);
        mat.add(xs + i, xs + j, hess[k]);
        if i != j {
            mat.add(xs + j, xs + i, hess[k]);
        }
    }
    for i in 0..n {
        mat.add(xs + i, xs + i, delta_w);
        rhs[xs + i] = r.px[i];
    }
    for i in 0..m {
        mat.add(ss + i, ss + i, delta_w);
        mat.add(ss + i, ys + i, -1.0);
        mat.add(ys + i, ss + i, -1.0);
        mat.add(ys + i, ys + i, -delta_c);
        rhs[ss + i] = r.ps[i];
        rhs[ys + i] = r.py[i];
    }
    for k in 0..jac.len() {
        let (i, j) = (lifted.jac_rows[k], lifted.jac_cols[k]);
        mat.add(ys + i, xs + j, jac[k]);
        mat.add(xs + j, ys + i, jac[k]);
    }
    for (f, idx) in fams.iter().zip(&index) {
        let base = if f.on_x { xs } else { ss };
        let sign = if f.lower { -1.0 } else { 1.0 };
        for i in 0..f.v.len() {
            if let Some(col) = idx[i] {
                let gap = if f.lower { f.v[i] - f.b[i] } else { f.b[i] - f.v[i] };
                mat.add(base + i, col, sign);
                mat.add(col, base + i, sign);
                mat.add(col, col, -gap / f.z[i]);
                rhs[col] = -f.p[i] / f.z[i];
            }
        }
    }
    // Undo the symmetrizing row scaling for the solve: rows `Z Δv ± gap Δz = p`.
    let mut newton = mat.clone();
    let mut newton_rhs = rhs.clone();
    for (f, idx) in fams.iter().zip(&index) {
        let base = if f.on_x { xs } else { ss };
        let sign = if f.lower { -1.0 } else { 1.0 };
        for i in 0..f.v.len() {
            if let Some(row) = idx[i] {
                let gap = if f.lower { f.v[i] - f.b[i] } else { f.b[i] - f.v[i] };
                (0..dim).for_each(|c| newton.set(row, c, 0.0));
                newton.set(row, base + i, -sign * f.z[i]);
                newton.set(row, row, gap);
                newton_rhs[row] = f.p[i];
            }
        }
    }
    // Row then column equilibration.
    let mut col_scale = vec![1.0; dim];
    for r in 0..dim {
        let big = (0..dim).fold(0.0f64, |m, c| m.max(newton.get(r, c).abs()));
        if big > 0.0 {
            (0..dim).for_each(|c| newton.set(r, c, newton.get(r, c) / big));
            newton_rhs[r] /= big;
        }
    }
    for (c, cs) in col_scale.iter_mut().enumerate() {
        let big = (0..dim).fold(0.0f64, |m, r| m.max(newton.get(r, c).abs()));
        if big > 0.0 {
            (0..dim).for_each(|r| newton.set(r, c, newton.get(r, c) / big));
            *cs = 1.0 / big;
        }
    }
    let inertia = dense_ldl_oracle(&mat).ok().map(|f| f.inertia);
    let sol: Vec<f64> = newton.lu_solve(&newton_rhs)?.iter().zip(&col_scale).map(|(v, c)| v * c).collect();
    let pick = |idx: &[Option<usize>]| idx.iter().map(|c| c.map_or(0.0, |c| sol[c])).collect::<Vec<f64>>();
    let dir = Direction {
        dx: sol[xs..xs + n].to_vec(),
        ds: sol[ss..ss + m].to_vec(),
        dy: sol[ys..ys + m].to_vec(),
        dzl_x: pick(&index[0]),
        dzu_x: pick(&index[1]),
        dzl_s: pick(&index[2]),
        dzu_s: pick(&index[3]),
    };
    Ok((dir, inertia))
}
