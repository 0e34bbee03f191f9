//! Main interior-point loop and its report.

use serde::Serialize;

use super::filter::{Acceptance, Filter};
use super::iterate::{
    barrier_directional_derivative, barrier_objective, clip_multipliers, compute_residuals_at, fraction_to_boundary,
    initialize, kkt_error, push_to_interior, update_barrier, Direction, IterateState, KktError, Residuals,
};
use super::kkt::{inertia_corrected_factorize, recover_step, CondensedKkt, CondensedStructure};
use super::lifted::{lift_scaled, LiftedNlp};
use super::restoration::restore;
use super::{IpmError, NlpProblem, SolverConfig};
use crate::model::ModelError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Solved,
    MaxIter,
    RestorationFailed,
    LineSearchFailed,
    FactorizationFailed,
    EvaluationFailed,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Solved => "solved",
            SolveStatus::MaxIter => "max-iter",
            SolveStatus::RestorationFailed => "restoration-failed",
            SolveStatus::LineSearchFailed => "line-search-failed",
            SolveStatus::FactorizationFailed => "factorization-failed",
            SolveStatus::EvaluationFailed => "evaluation-failed",
        }
    }
}

/// One row of the iteration log. Row `k` describes iterate `k` and the step
/// that produced it (all step fields are zero for the initial point).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub objective: f64,
    pub inf_pr: f64,
    pub violation: f64,
    pub stationarity: f64,
    pub feasibility: f64,
    pub complementarity: f64,
    pub mu: f64,
    pub alpha_primal: f64,
    pub alpha_dual: f64,
    pub delta_w: f64,
    pub delta_c: f64,
    pub retries: usize,
    pub trials: usize,
    pub inertia_pos: Option<usize>,
    pub inertia_neg: Option<usize>,
    pub inertia_zero: Option<usize>,
    pub restoration: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub iterations: usize,
    pub objective: f64,
    pub kkt: KktError,
    /// Largest scaled distance of `c(x)` from the original row bounds.
    pub constraint_violation: f64,
    pub restorations: usize,
    /// Free variables seen by the solver (fixed ones are eliminated).
    pub n_free: usize,
    pub n_rows: usize,
    pub message: Option<String>,
    #[serde(skip)]
    pub log: Vec<IterationRecord>,
}

impl SolveReport {
    /// Iteration log as CSV.
    pub fn log_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.log {
            w.serialize(r).expect("records serialize");
        }
        String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8 csv")
    }

    /// Whether every factorization backing an accepted step had inertia `(n, 0, 0)`.
    pub fn all_steps_positive_definite(&self) -> bool {
        self.log.iter().skip(1).all(|r| r.inertia_neg == Some(0) && r.inertia_zero == Some(0) && r.inertia_pos == Some(self.n_free))
    }
}

/// Solution in the original variable space plus the report.
#[derive(Clone, Debug)]
pub struct SolveOutcome {
    /// Full primal vector (fixed variables included).
    pub x: Vec<f64>,
    pub s: Vec<f64>,
    pub y: Vec<f64>,
    pub report: SolveReport,
}

struct Point {
    f: f64,
    grad: Vec<f64>,
    g: Vec<f64>,
    jac: Vec<f64>,
}

fn evaluate(lifted: &LiftedNlp, x: &[f64]) -> Result<Point, ModelError> {
    Ok(Point { f: lifted.objective(x)?, grad: lifted.gradient(x)?, g: lifted.constraints(x)?, jac: lifted.jacobian(x)? })
}

pub(crate) fn theta(g: &[f64], s: &[f64]) -> f64 {
    g.iter().zip(s).map(|(a, b)| (a - b).abs()).sum()
}

/// Solve `nlp` with the condensed-space interior-point method. Setup errors
/// (inconsistent bounds, invalid config) are returned as `Err`; every failure
/// inside the iteration is reported through [`SolveStatus`].
pub fn solve(nlp: &dyn NlpProblem, config: &SolverConfig) -> Result<SolveOutcome, IpmError> {
    solve_observed(nlp, config, &mut |_| {})
}

/// Data behind one computed step, handed to the observer of [`solve_observed`].
pub struct StepView<'v, 'a> {
    pub iter: usize,
    pub lifted: &'v LiftedNlp<'a>,
    pub iterate: &'v IterateState,
    pub residuals: &'v Residuals,
    pub hessian: &'v [f64],
    pub jacobian: &'v [f64],
    pub kkt: &'v CondensedKkt,
    pub direction: &'v Direction,
}

/// [`solve`], calling `observer` with every step before the line search.
pub fn solve_observed(nlp: &dyn NlpProblem, config: &SolverConfig, observer: &mut dyn FnMut(&StepView)) -> Result<SolveOutcome, IpmError> {
    config.validate().map_err(IpmError::InvalidConfig)?;
    let scale = match config.objective_scale {
        Some(s) => s,
        None => gradient_scaling(nlp)?,
    };
    let lifted = lift_scaled(nlp, config.tol, config.relative_slack_bounds, scale)?;
    Ok(run(&lifted, config, observer))
}

/// `min(1, 100 / ‖∇f(x₀)‖∞)`.
fn gradient_scaling(nlp: &dyn NlpProblem) -> Result<f64, IpmError> {
    let mut g = vec![0.0; nlp.num_variables()];
    nlp.gradient(nlp.start(), &mut g)?;
    let gmax = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(if gmax.is_finite() && gmax > 100.0 { 100.0 / gmax } else { 1.0 })
}

fn finish(lifted: &LiftedNlp, it: &IterateState, report: SolveReport) -> SolveOutcome {
    SolveOutcome { x: lifted.full_x(&it.x), s: it.s.clone(), y: it.y.clone(), report }
}

struct Step {
    alpha_primal: f64,
    alpha_dual: f64,
    delta_w: f64,
    delta_c: f64,
    retries: usize,
    trials: usize,
    inertia: Option<(usize, usize, usize)>,
    restoration: bool,
}

impl Step {
    fn none() -> Self {
        Step { alpha_primal: 0.0, alpha_dual: 0.0, delta_w: 0.0, delta_c: 0.0, retries: 0, trials: 0, inertia: None, restoration: false }
    }
}

fn run(lifted: &LiftedNlp, config: &SolverConfig, observer: &mut dyn FnMut(&StepView)) -> SolveOutcome {
    let mut report = SolveReport {
        status: SolveStatus::MaxIter,
        iterations: 0,
        objective: f64::NAN,
        kkt: KktError::default(),
        constraint_violation: f64::NAN,
        restorations: 0,
        n_free: lifted.n,
        n_rows: lifted.m,
        message: None,
        log: Vec::new(),
    };
    let fail = |mut report: SolveReport, it: &IterateState, status: SolveStatus, msg: String| {
        report.status = status;
        report.message = Some(msg);
        finish(lifted, it, report)
    };

    let mut it = match initialize(lifted, config) {
        Ok(it) => it,
        Err(e) => {
            let x = lifted.start();
            let m = lifted.m;
            let dummy = IterateState { x, s: vec![0.0; m], y: vec![0.0; m], zl_x: vec![], zu_x: vec![], zl_s: vec![], zu_s: vec![], mu: config.mu_init };
            return fail(report, &dummy, SolveStatus::EvaluationFailed, e.to_string());
        }
    };
    let mut pt = match evaluate(lifted, &it.x) {
        Ok(p) => p,
        Err(e) => return fail(report, &it, SolveStatus::EvaluationFailed, e.to_string()),
    };
    let structure = CondensedStructure::new(lifted);
    let mut filter = Filter::new(theta(&pt.g, &it.s));
    let mut last_delta_w = 0.0;
    let mut step = Step::none();
    let fc = &config.filter;

    for iter in 0.. {
        let r0 = compute_residuals_at(lifted, &it, 0.0, &pt.grad, &pt.g, &pt.jac);
        let e0 = kkt_error(lifted, &it, &r0);
        let violation = lifted.row_violation(&pt.g);
        report.log.push(IterationRecord {
            iter,
            objective: pt.f / lifted.obj_scale,
            inf_pr: r0.py.iter().fold(0.0f64, |m, v| m.max(v.abs())),
            violation,
            stationarity: e0.stationarity,
            feasibility: e0.feasibility,
            complementarity: e0.complementarity,
            mu: it.mu,
            alpha_primal: step.alpha_primal,
            alpha_dual: step.alpha_dual,
            delta_w: step.delta_w,
            delta_c: step.delta_c,
            retries: step.retries,
            trials: step.trials,
            inertia_pos: step.inertia.map(|i| i.0),
            inertia_neg: step.inertia.map(|i| i.1),
            inertia_zero: step.inertia.map(|i| i.2),
            restoration: step.restoration,
        });
        report.iterations = iter;
        report.objective = pt.f / lifted.obj_scale;
        report.kkt = e0;
        report.constraint_violation = violation;
        if e0.max() <= config.tol && violation <= config.tol {
            report.status = SolveStatus::Solved;
            return finish(lifted, &it, report);
        }
        if iter >= config.max_iter {
            report.status = SolveStatus::MaxIter;
            return finish(lifted, &it, report);
        }

        let mut r = compute_residuals_at(lifted, &it, it.mu, &pt.grad, &pt.g, &pt.jac);
        loop {
            let e = kkt_error(lifted, &it, &r).max();
            let mu = update_barrier(it.mu, e, config);
            if mu == it.mu {
                break;
            }
            it.mu = mu;
            filter.reset();
            r = compute_residuals_at(lifted, &it, it.mu, &pt.grad, &pt.g, &pt.jac);
        }

        let hess = match lifted.lagrangian_hessian(&it.x, &it.y) {
            Ok(h) => h,
            Err(e) => return fail(report, &it, SolveStatus::EvaluationFailed, e.to_string()),
        };
        let cf = match inertia_corrected_factorize(&structure, lifted, &it, &r, &hess, &pt.jac, last_delta_w, config) {
            Ok(cf) => cf,
            Err(e) => return fail(report, &it, SolveStatus::FactorizationFailed, e.to_string()),
        };
        if cf.kkt.delta_w > 0.0 {
            last_delta_w = cf.kkt.delta_w;
        }
        let inertia = cf.factor.inertia();
        let dir = recover_step(&structure, lifted, &it, &r, &cf.kkt, &cf.factor, config.refinement_passes);
        if dir.components().iter().any(|c| c.iter().any(|v| !v.is_finite())) {
            return fail(report, &it, SolveStatus::FactorizationFailed, "non-finite step".into());
        }
        observer(&StepView { iter, lifted, iterate: &it, residuals: &r, hessian: &hess, jacobian: &pt.jac, kkt: &cf.kkt, direction: &dir });

        let tau = config.tau_min.max(1.0 - it.mu);
        let (alpha_max, alpha_dual) = fraction_to_boundary(lifted, &it, &dir, tau);
        let theta0 = theta(&pt.g, &it.s);
        let phi0 = barrier_objective(lifted, &it.x, &it.s, pt.f, it.mu);
        let dphi = barrier_directional_derivative(lifted, &it, &pt.grad, &dir);

        let mut alpha = alpha_max;
        let mut trials = 0;
        let mut accepted = None;
        while alpha >= fc.alpha_min {
            trials += 1;
            let xt: Vec<f64> = it.x.iter().zip(&dir.dx).map(|(v, d)| v - alpha * d).collect();
            let st: Vec<f64> = it.s.iter().zip(&dir.ds).map(|(v, d)| v - alpha * d).collect();
            if let (Ok(ft), Ok(gt)) = (lifted.objective(&xt), lifted.constraints(&xt)) {
                let theta_t = theta(&gt, &st);
                let phi_t = barrier_objective(lifted, &xt, &st, ft, it.mu);
                match filter.check(theta0, phi0, dphi, alpha, theta_t, phi_t, fc) {
                    Acceptance::Rejected => {}
                    Acceptance::ObjectiveStep => {
                        accepted = Some((xt, st));
                        break;
                    }
                    Acceptance::FilterStep => {
                        filter.augment(theta0, phi0, fc);
                        accepted = Some((xt, st));
                        break;
                    }
                }
            }
            alpha *= 0.5;
        }

        step = Step {
            alpha_primal: alpha,
            alpha_dual,
            delta_w: cf.kkt.delta_w,
            delta_c: cf.kkt.delta_c,
            retries: cf.retries,
            trials,
            inertia: Some((inertia.positive, inertia.negative, inertia.zero)),
            restoration: false,
        };
        match accepted {
            Some((xt, st)) => {
                apply_step(&mut it, &dir, xt, st, alpha, alpha_dual);
                clip_multipliers(lifted, &mut it, config.kappa_sigma);
            }
            None => {
                if !config.restoration {
                    return fail(report, &it, SolveStatus::LineSearchFailed, format!("step size below {}", fc.alpha_min));
                }
                filter.augment(theta0, phi0, fc);
                report.restorations += 1;
                match restore(lifted, &it, config) {
                    Some(x) => {
                        let g = match lifted.constraints(&x) {
                            Ok(g) => g,
                            Err(e) => return fail(report, &it, SolveStatus::EvaluationFailed, e.to_string()),
                        };
                        let s: Vec<f64> = (0..lifted.m)
                            .map(|i| push_to_interior(g[i], lifted.s_lower[i], lifted.s_upper[i], config.push_kappa))
                            .collect();
                        if theta(&g, &s) > 0.9 * theta0 {
                            return fail(report, &it, SolveStatus::RestorationFailed, "restoration did not reduce infeasibility".into());
                        }
                        reset_after_restoration(lifted, &mut it, x, s);
                        step.restoration = true;
                        step.alpha_primal = 0.0;
                        step.alpha_dual = 0.0;
                    }
                    None => return fail(report, &it, SolveStatus::RestorationFailed, "restoration phase failed".into()),
                }
            }
        }
        pt = match evaluate(lifted, &it.x) {
            Ok(p) => p,
            Err(e) => return fail(report, &it, SolveStatus::EvaluationFailed, e.to_string()),
        };
    }
    unreachable!("the iteration loop only exits by returning")
}

fn apply_step(it: &mut IterateState, dir: &Direction, x: Vec<f64>, s: Vec<f64>, alpha: f64, alpha_dual: f64) {
    it.x = x;
    it.s = s;
    it.y.iter_mut().zip(&dir.dy).for_each(|(v, d)| *v += alpha * d);
    for (z, dz) in [(&mut it.zl_x, &dir.dzl_x), (&mut it.zu_x, &dir.dzu_x), (&mut it.zl_s, &dir.dzl_s), (&mut it.zu_s, &dir.dzu_s)] {
        z.iter_mut().zip(dz.iter()).for_each(|(v, d)| *v -= alpha_dual * d);
    }
}

fn reset_after_restoration(lifted: &LiftedNlp, it: &mut IterateState, x: Vec<f64>, s: Vec<f64>) {
    let mu = it.mu;
    let central = |v: &[f64], b: &[f64], lower: bool| -> Vec<f64> {
        (0..v.len())
            .map(|i| {
                if !b[i].is_finite() {
                    0.0
                } else if lower {
                    mu / (v[i] - b[i])
                } else {
                    mu / (b[i] - v[i])
                }
            })
            .collect()
    };
    it.zl_x = central(&x, &lifted.x_lower, true);
    it.zu_x = central(&x, &lifted.x_upper, false);
    it.zl_s = central(&s, &lifted.s_lower, true);
    it.zu_s = central(&s, &lifted.s_upper, false);
    it.y.iter_mut().for_each(|v| *v = 0.0);
    it.x = x;
    it.s = s;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Expr, InstanceData, ModelBuilder};

    #[test]
    fn unconstrained_quadratic() {
        let mut b = ModelBuilder::new();
        let x = b.add_variable_block("x", &[1], &[f64::NEG_INFINITY], &[f64::INFINITY], &[5.0]).unwrap();
        let mut d = InstanceData::new(1, 0);
        d.push(&[x.at(0)], &[]);
        b.add_objective(&(Expr::var(0) - 1.0).powi(2), d).unwrap();
        let m = b.freeze();
        let out = solve(&m, &SolverConfig::default()).unwrap();
        assert_eq!(out.report.status, SolveStatus::Solved);
        assert!((out.x[0] - 1.0).abs() <= 1e-8);
        assert_eq!(out.report.log.len(), out.report.iterations + 1);
    }

    #[test]
    fn circle_with_bounds() {
        let mut b = ModelBuilder::new();
        let x = b.add_variable_block("x", &[2], &[-2.0], &[f64::INFINITY], &[0.5]).unwrap();
        let mut obj = InstanceData::new(1, 0);
        obj.push(&[x.at(0)], &[]);
        obj.push(&[x.at(1)], &[]);
        b.add_objective(&Expr::var(0), obj).unwrap();
        let mut circle = InstanceData::new(1, 0);
        circle.push_row(0, &[x.at(0)], &[]);
        circle.push_row(0, &[x.at(1)], &[]);
        b.add_constraint(1, &[1.0], &[0.0], &[0.0], vec![(Expr::var(0).powi(2), circle)]).unwrap();
        let m = b.freeze();
        let cfg = SolverConfig::default().with_tol(1e-8);
        let out = solve(&m, &cfg).unwrap();
        assert_eq!(out.report.status, SolveStatus::Solved, "{:?}", out.report.message);
        let h = -(0.5f64).sqrt();
        assert!((out.x[0] - h).abs() < 1e-6 && (out.x[1] - h).abs() < 1e-6, "{:?}", out.x);
        assert!(out.report.all_steps_positive_definite());
    }
}
