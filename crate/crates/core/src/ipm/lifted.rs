//! Slack lifting and fixed-variable elimination.

use super::{IpmError, NlpProblem};
use crate::model::ModelError;

/// The NLP in lifted form `g(x) − s = 0`, `s♭ ≤ s ≤ s♯`, `x♭ ≤ x ≤ x♯`,
/// expressed over the free variables only (those with `x♭ < x♯`).
pub struct LiftedNlp<'a> {
    pub nlp: &'a dyn NlpProblem,
    pub n: usize,
    pub m: usize,
    /// Reduced index → full index.
    pub free: Vec<usize>,
    fixed_template: Vec<f64>,
    pub x_lower: Vec<f64>,
    pub x_upper: Vec<f64>,
    pub s_lower: Vec<f64>,
    pub s_upper: Vec<f64>,
    /// Original row bounds, for violation measurement.
    pub row_lower: Vec<f64>,
    pub row_upper: Vec<f64>,
    pub equality: Vec<bool>,
    pub row_scale: Vec<f64>,
    pub obj_scale: f64,
    jac_keep: Vec<usize>,
    pub jac_rows: Vec<usize>,
    pub jac_cols: Vec<usize>,
    hess_keep: Vec<usize>,
    pub hess_rows: Vec<usize>,
    pub hess_cols: Vec<usize>,
}

/// Relax every row to an equality with a bounded slack. Equality rows get the
/// box `±tol·max(1, |rhs|)` (or `±tol` when `relative` is false); inequality
/// rows keep their native bounds.
pub fn lift_inequalities<'a>(nlp: &'a dyn NlpProblem, tol: f64, relative: bool) -> Result<LiftedNlp<'a>, IpmError> {
    lift_scaled(nlp, tol, relative, 1.0)
}

pub(crate) fn lift_scaled<'a>(nlp: &'a dyn NlpProblem, tol: f64, relative: bool, obj_scale: f64) -> Result<LiftedNlp<'a>, IpmError> {
    let (xl, xu) = (nlp.variable_lower(), nlp.variable_upper());
    if let Some(i) = (0..xl.len()).find(|&i| !(xl[i] <= xu[i])) {
        return Err(IpmError::InvalidBounds { index: i, lower: xl[i], upper: xu[i] });
    }
    let (rl, ru, rhs) = (nlp.row_lower(), nlp.row_upper(), nlp.rhs());
    if let Some(i) = (0..rl.len()).find(|&i| !(rl[i] <= ru[i])) {
        return Err(IpmError::InvalidRowBounds { row: i, lower: rl[i], upper: ru[i] });
    }
    let free: Vec<usize> = (0..xl.len()).filter(|&i| xl[i] < xu[i]).collect();
    let mut reduced = vec![usize::MAX; xl.len()];
    for (k, &i) in free.iter().enumerate() {
        reduced[i] = k;
    }
    let fixed_template: Vec<f64> = (0..xl.len()).map(|i| if xl[i] == xu[i] { xl[i] } else { 0.0 }).collect();

    let m = rl.len();
    let row_scale: Vec<f64> = (0..m).map(|i| if relative { rhs[i].abs().max(1.0) } else { 1.0 }).collect();
    let equality: Vec<bool> = (0..m).map(|i| rl[i] == ru[i]).collect();
    let s_lower = (0..m).map(|i| if equality[i] { rl[i] - tol * row_scale[i] } else { rl[i] }).collect();
    let s_upper = (0..m).map(|i| if equality[i] { ru[i] + tol * row_scale[i] } else { ru[i] }).collect();

    let (jr, jc) = nlp.jacobian_structure();
    let jac_keep: Vec<usize> = (0..jr.len()).filter(|&k| reduced[jc[k]] != usize::MAX).collect();
    let (hr, hc) = nlp.hessian_structure();
    let hess_keep: Vec<usize> = (0..hr.len()).filter(|&k| reduced[hr[k]] != usize::MAX && reduced[hc[k]] != usize::MAX).collect();

    Ok(LiftedNlp {
        nlp,
        n: free.len(),
        m,
        x_lower: free.iter().map(|&i| xl[i]).collect(),
        x_upper: free.iter().map(|&i| xu[i]).collect(),
        s_lower,
        s_upper,
        row_lower: rl.to_vec(),
        row_upper: ru.to_vec(),
        equality,
        row_scale,
        obj_scale,
        jac_rows: jac_keep.iter().map(|&k| jr[k]).collect(),
        jac_cols: jac_keep.iter().map(|&k| reduced[jc[k]]).collect(),
        hess_rows: hess_keep.iter().map(|&k| reduced[hr[k]]).collect(),
        hess_cols: hess_keep.iter().map(|&k| reduced[hc[k]]).collect(),
        jac_keep,
        hess_keep,
        free,
        fixed_template,
    })
}

impl LiftedNlp<'_> {
    /// Full decision vector with fixed variables at their bound.
    pub fn full_x(&self, x: &[f64]) -> Vec<f64> {
        let mut full = self.fixed_template.clone();
        for (k, &i) in self.free.iter().enumerate() {
            full[i] = x[k];
        }
        full
    }

    pub fn reduce_x(&self, full: &[f64]) -> Vec<f64> {
        self.free.iter().map(|&i| full[i]).collect()
    }

    pub fn start(&self) -> Vec<f64> {
        self.reduce_x(self.nlp.start())
    }

    pub fn objective(&self, x: &[f64]) -> Result<f64, ModelError> {
        Ok(self.obj_scale * self.nlp.objective(&self.full_x(x))?)
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>, ModelError> {
        let mut g = vec![0.0; self.nlp.num_variables()];
        self.nlp.gradient(&self.full_x(x), &mut g)?;
        Ok(self.free.iter().map(|&i| self.obj_scale * g[i]).collect())
    }

    pub fn constraints(&self, x: &[f64]) -> Result<Vec<f64>, ModelError> {
        let mut c = vec![0.0; self.m];
        self.nlp.constraints(&self.full_x(x), &mut c)?;
        Ok(c)
    }

    /// Jacobian values aligned with `jac_rows`/`jac_cols`.
    pub fn jacobian(&self, x: &[f64]) -> Result<Vec<f64>, ModelError> {
        let mut v = vec![0.0; self.nlp.jacobian_structure().0.len()];
        self.nlp.jacobian_values(&self.full_x(x), &mut v)?;
        Ok(self.jac_keep.iter().map(|&k| v[k]).collect())
    }

    /// Lower-triangle values of `obj_scale·∇²f − Σ y_i ∇²g_i`, aligned with
    /// `hess_rows`/`hess_cols`.
    pub fn lagrangian_hessian(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>, ModelError> {
        let neg: Vec<f64> = y.iter().map(|v| -v).collect();
        let mut v = vec![0.0; self.nlp.hessian_structure().0.len()];
        self.nlp.hessian_values(&self.full_x(x), &neg, self.obj_scale, &mut v)?;
        Ok(self.hess_keep.iter().map(|&k| v[k]).collect())
    }

    /// `A v` for the reduced Jacobian.
    pub fn jac_mul(&self, jac: &[f64], v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.m];
        for k in 0..jac.len() {
            out[self.jac_rows[k]] += jac[k] * v[self.jac_cols[k]];
        }
        out
    }

    /// `Aᵀ w` for the reduced Jacobian.
    pub fn jac_t_mul(&self, jac: &[f64], w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for k in 0..jac.len() {
            out[self.jac_cols[k]] += jac[k] * w[self.jac_rows[k]];
        }
        out
    }

    /// Scaled distance of `c` from the original row bounds, maximized over rows.
    pub fn row_violation(&self, c: &[f64]) -> f64 {
        (0..self.m)
            .map(|i| {
                let d = (self.row_lower[i] - c[i]).max(c[i] - self.row_upper[i]).max(0.0);
                d / self.row_scale[i]
            })
            .fold(0.0, f64::max)
    }
}
