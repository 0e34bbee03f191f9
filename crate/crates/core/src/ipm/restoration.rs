//! Feasibility restoration on an elastic reformulation.
//!
//! ```text
//! min  ρ Σ (p + n) + ζ/2 ‖D_r (x − x_r)‖²
//! s.t. s♭ ≤ c(x) − p + n ≤ s♯,   p, n ≥ 0,   x♭ ≤ x ≤ x♯
//! ```
//!
//! solved by the same interior-point method with restoration disabled.

use super::iterate::IterateState;
use super::lifted::LiftedNlp;
use super::solver::{solve, SolveStatus};
use super::{NlpProblem, SolverConfig};
use crate::model::ModelError;

const RHO: f64 = 1000.0;

struct Elastic<'a> {
    inner: &'a dyn NlpProblem,
    n: usize,
    m: usize,
    x_ref: Vec<f64>,
    weight: Vec<f64>,
    zeta: f64,
    lower: Vec<f64>,
    upper: Vec<f64>,
    start: Vec<f64>,
    row_lower: Vec<f64>,
    row_upper: Vec<f64>,
    rhs: Vec<f64>,
    jac_rows: Vec<usize>,
    jac_cols: Vec<usize>,
    hess_rows: Vec<usize>,
    hess_cols: Vec<usize>,
}

impl NlpProblem for Elastic<'_> {
    fn num_variables(&self) -> usize {
        self.n + 2 * self.m
    }
    fn num_constraints(&self) -> usize {
        self.m
    }
    fn variable_lower(&self) -> &[f64] {
        &self.lower
    }
    fn variable_upper(&self) -> &[f64] {
        &self.upper
    }
    fn start(&self) -> &[f64] {
        &self.start
    }
    fn row_lower(&self) -> &[f64] {
        &self.row_lower
    }
    fn row_upper(&self) -> &[f64] {
        &self.row_upper
    }
    fn rhs(&self) -> &[f64] {
        &self.rhs
    }
    fn objective(&self, v: &[f64]) -> Result<f64, ModelError> {
        let (n, m) = (self.n, self.m);
        let mut f = RHO * v[n..n + 2 * m].iter().sum::<f64>();
        for j in 0..n {
            let d = self.weight[j] * (v[j] - self.x_ref[j]);
            f += 0.5 * self.zeta * d * d;
        }
        Ok(f)
    }
    fn gradient(&self, v: &[f64], out: &mut [f64]) -> Result<(), ModelError> {
        let n = self.n;
        for j in 0..n {
            out[j] = self.zeta * self.weight[j] * self.weight[j] * (v[j] - self.x_ref[j]);
        }
        out[n..].iter_mut().for_each(|g| *g = RHO);
        Ok(())
    }
    fn constraints(&self, v: &[f64], out: &mut [f64]) -> Result<(), ModelError> {
        let (n, m) = (self.n, self.m);
        self.inner.constraints(&v[..n], out)?;
        for i in 0..m {
            out[i] += -v[n + i] + v[n + m + i];
        }
        Ok(())
    }
    fn jacobian_structure(&self) -> (&[usize], &[usize]) {
        (&self.jac_rows, &self.jac_cols)
    }
    fn jacobian_values(&self, v: &[f64], out: &mut [f64]) -> Result<(), ModelError> {
        let k = self.inner.jacobian_structure().0.len();
        self.inner.jacobian_values(&v[..self.n], &mut out[..k])?;
        out[k..k + self.m].iter_mut().for_each(|x| *x = -1.0);
        out[k + self.m..].iter_mut().for_each(|x| *x = 1.0);
        Ok(())
    }
    fn hessian_structure(&self) -> (&[usize], &[usize]) {
        (&self.hess_rows, &self.hess_cols)
    }
    fn hessian_values(&self, v: &[f64], y: &[f64], obj_weight: f64, out: &mut [f64]) -> Result<(), ModelError> {
        let k = self.inner.hessian_structure().0.len();
        self.inner.hessian_values(&v[..self.n], y, 0.0, &mut out[..k])?;
        for j in 0..self.n {
            out[k + j] = obj_weight * self.zeta * self.weight[j] * self.weight[j];
        }
        Ok(())
    }
}

/// Run the restoration phase from `it`. Returns the new primal point
/// (reduced space) when the elastic problem was solved.
pub(crate) fn restore(lifted: &LiftedNlp, it: &IterateState, config: &SolverConfig) -> Option<Vec<f64>> {
    let inner = lifted.nlp;
    let (n, m) = (inner.num_variables(), inner.num_constraints());
    let x_ref = lifted.full_x(&it.x);
    let mut c = vec![0.0; m];
    inner.constraints(&x_ref, &mut c).ok()?;
    let mu = it.mu;
    let mut start = x_ref.clone();
    let mut pn = (Vec::with_capacity(m), Vec::with_capacity(m));
    for i in 0..m {
        let r = c[i] - c[i].clamp(lifted.s_lower[i], lifted.s_upper[i]);
        let a = (mu - RHO * r) / (2.0 * RHO);
        let nv = a + (a * a + mu * r / (2.0 * RHO)).sqrt();
        pn.0.push(r + nv);
        pn.1.push(nv);
    }
    start.extend(&pn.0);
    start.extend(&pn.1);

    let (jr, jc) = inner.jacobian_structure();
    let (hr, hc) = inner.hessian_structure();
    let mut lower = inner.variable_lower().to_vec();
    let mut upper = inner.variable_upper().to_vec();
    lower.extend(std::iter::repeat(0.0).take(2 * m));
    upper.extend(std::iter::repeat(f64::INFINITY).take(2 * m));
    let elastic = Elastic {
        inner,
        n,
        m,
        weight: x_ref.iter().map(|v| 1.0f64.min(1.0 / v.abs())).collect(),
        x_ref,
        zeta: mu.sqrt(),
        lower,
        upper,
        start,
        row_lower: lifted.s_lower.clone(),
        row_upper: lifted.s_upper.clone(),
        rhs: inner.rhs().to_vec(),
        jac_rows: jr.iter().copied().chain(0..m).chain(0..m).collect(),
        jac_cols: jc.iter().copied().chain(n..n + m).chain(n + m..n + 2 * m).collect(),
        hess_rows: hr.iter().copied().chain(0..n).collect(),
        hess_cols: hc.iter().copied().chain(0..n).collect(),
    };
    let sub = SolverConfig {
        mu_init: mu,
        max_iter: config.restoration_max_iter,
        restoration: false,
        objective_scale: Some(1.0),
        ..config.clone()
    };
    let out = solve(&elastic, &sub).ok()?;
    matches!(out.report.status, SolveStatus::Solved | SolveStatus::MaxIter).then(|| lifted.reduce_x(&out.x[..n]))
}
