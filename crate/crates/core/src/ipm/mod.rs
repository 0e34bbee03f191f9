//! Condensed-space interior-point method on the lifted KKT system.
//!
//! Every constraint row is relaxed to `g(x) − s = 0` with `s` confined to a
//! box: the native row bounds for inequalities and a tolerance-sized box for
//! equalities. The primal-dual Newton system is then condensed to a symmetric
//! positive definite system in `Δx` alone, factored with the in-repo sparse
//! LDLᵀ, and the remaining step components are recovered by diagonal
//! operations. Globalization is a filter line search with a feasibility
//! restoration phase.

mod filter;
pub mod iterate;
pub mod kkt;
pub mod lifted;
mod restoration;
pub mod solver;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::LinalgError;
use crate::model::{Model, ModelError};

pub use iterate::{
    compute_residuals, compute_residuals_at, fraction_to_boundary, kkt_error, initialize, update_barrier, Direction, IterateState, KktError, Residuals,
};
pub use kkt::{full_kkt_oracle, CondensedKkt, CondensedStructure, Factorized};
pub use lifted::{lift_inequalities, LiftedNlp};
pub use solver::{solve, solve_observed, IterationRecord, StepView, SolveOutcome, SolveReport, SolveStatus};

/// Smooth NLP `min f(x)` s.t. `row_lower ≤ c(x) ≤ row_upper`, `lower ≤ x ≤ upper`.
///
/// Infinite bounds mean "absent". `rhs` is used only for relative scaling of
/// equality slack boxes and violation measures.
pub trait NlpProblem: Sync {
    fn num_variables(&self) -> usize;
    fn num_constraints(&self) -> usize;
    fn variable_lower(&self) -> &[f64];
    fn variable_upper(&self) -> &[f64];
    fn start(&self) -> &[f64];
    fn row_lower(&self) -> &[f64];
    fn row_upper(&self) -> &[f64];
    fn rhs(&self) -> &[f64];
    fn objective(&self, x: &[f64]) -> Result<f64, ModelError>;
    fn gradient(&self, x: &[f64], out: &mut [f64]) -> Result<(), ModelError>;
    fn constraints(&self, x: &[f64], out: &mut [f64]) -> Result<(), ModelError>;
    fn jacobian_structure(&self) -> (&[usize], &[usize]);
    fn jacobian_values(&self, x: &[f64], out: &mut [f64]) -> Result<(), ModelError>;
    /// Lower triangle of `obj_weight ∇²f + Σ y_i ∇²c_i`.
    fn hessian_structure(&self) -> (&[usize], &[usize]);
    fn hessian_values(&self, x: &[f64], y: &[f64], obj_weight: f64, out: &mut [f64]) -> Result<(), ModelError>;
}

impl NlpProblem for Model {
    fn num_variables(&self) -> usize {
        Model::num_variables(self)
    }
    fn num_constraints(&self) -> usize {
        Model::num_constraints(self)
    }
    fn variable_lower(&self) -> &[f64] {
        Model::variable_lower(self)
    }
    fn variable_upper(&self) -> &[f64] {
        Model::variable_upper(self)
    }
    fn start(&self) -> &[f64] {
        Model::start(self)
    }
    fn row_lower(&self) -> &[f64] {
        Model::row_lower(self)
    }
    fn row_upper(&self) -> &[f64] {
        Model::row_upper(self)
    }
    fn rhs(&self) -> &[f64] {
        Model::rhs(self)
    }
    fn objective(&self, x: &[f64]) -> Result<f64, ModelError> {
        Model::objective(self, x)
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) -> Result<(), ModelError> {
        Model::gradient(self, x, out)
    }
    fn constraints(&self, x: &[f64], out: &mut [f64]) -> Result<(), ModelError> {
        Model::constraints(self, x, out)
    }
    fn jacobian_structure(&self) -> (&[usize], &[usize]) {
        Model::jacobian_structure(self)
    }
    fn jacobian_values(&self, x: &[f64], out: &mut [f64]) -> Result<(), ModelError> {
        Model::jacobian_values(self, x, out)
    }
    fn hessian_structure(&self) -> (&[usize], &[usize]) {
        Model::hessian_structure(self)
    }
    fn hessian_values(&self, x: &[f64], y: &[f64], obj_weight: f64, out: &mut [f64]) -> Result<(), ModelError> {
        Model::hessian_values(self, x, y, obj_weight, out)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IpmError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("row {row}: lower bound {lower} exceeds upper bound {upper}")]
    InvalidRowBounds { row: usize, lower: f64, upper: f64 },
    #[error("variable {index}: lower bound {lower} exceeds upper bound {upper}")]
    InvalidBounds { index: usize, lower: f64, upper: f64 },
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("inertia correction failed: δ_w would exceed {max}")]
    InertiaCorrectionFailed { max: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LinearSolverKind {
    #[default]
    Sparse,
    Dense,
}

/// Filter line-search constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub gamma_theta: f64,
    pub gamma_phi: f64,
    pub s_phi: f64,
    pub s_theta: f64,
    pub delta: f64,
    pub eta_phi: f64,
    pub alpha_min: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig { gamma_theta: 1e-5, gamma_phi: 1e-8, s_phi: 2.3, s_theta: 1.1, delta: 1.0, eta_phi: 1e-4, alpha_min: 1e-12 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub tol: f64,
    pub mu_init: f64,
    pub kappa_mu: f64,
    pub theta_mu: f64,
    pub kappa_eps: f64,
    pub max_iter: usize,
    pub tau_min: f64,
    pub delta_w_init: f64,
    pub delta_w_min: f64,
    pub delta_w_max: f64,
    pub delta_w_grow: f64,
    pub delta_w_shrink: f64,
    pub delta_c_factor: f64,
    pub kappa_sigma: f64,
    pub push_kappa: f64,
    pub refinement_passes: usize,
    /// Equality slack boxes `±tol·max(1, |rhs|)`; absolute `±tol` otherwise.
    pub relative_slack_bounds: bool,
    /// Multiplies the objective before solving. `None` selects
    /// `min(1, 100/‖∇f(x₀)‖∞)`.
    pub objective_scale: Option<f64>,
    pub linear_solver: LinearSolverKind,
    pub restoration: bool,
    pub restoration_max_iter: usize,
    pub filter: FilterConfig,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: 1e-4,
            mu_init: 1e-1,
            kappa_mu: 0.2,
            theta_mu: 1.5,
            kappa_eps: 10.0,
            max_iter: 3000,
            tau_min: 0.99,
            delta_w_init: 1e-4,
            delta_w_min: 1e-20,
            delta_w_max: 1e40,
            delta_w_grow: 8.0,
            delta_w_shrink: 1.0 / 3.0,
            delta_c_factor: 1e-8,
            kappa_sigma: 1e10,
            push_kappa: 1e-2,
            refinement_passes: 1,
            relative_slack_bounds: true,
            objective_scale: None,
            linear_solver: LinearSolverKind::Sparse,
            restoration: true,
            restoration_max_iter: 500,
            filter: FilterConfig::default(),
        }
    }
}

impl SolverConfig {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        let checks = [
            (self.tol > 0.0, "tol must be positive"),
            (self.mu_init > 0.0, "mu_init must be positive"),
            (self.kappa_mu > 0.0 && self.kappa_mu < 1.0, "kappa_mu must lie in (0, 1)"),
            (self.theta_mu > 1.0 && self.theta_mu < 2.0, "theta_mu must lie in (1, 2)"),
            (self.kappa_eps > 0.0, "kappa_eps must be positive"),
            (self.tau_min > 0.0 && self.tau_min < 1.0, "tau_min must lie in (0, 1)"),
            (self.delta_w_grow > 1.0, "delta_w_grow must exceed 1"),
            (self.delta_w_shrink > 0.0 && self.delta_w_shrink < 1.0, "delta_w_shrink must lie in (0, 1)"),
            (self.kappa_sigma >= 1.0, "kappa_sigma must be at least 1"),
            (self.push_kappa > 0.0 && self.push_kappa < 0.5, "push_kappa must lie in (0, 0.5)"),
            (self.refinement_passes <= 5, "refinement_passes must be at most 5"),
            (self.objective_scale.map_or(true, |s| s > 0.0 && s.is_finite()), "objective_scale must be positive"),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(msg.to_string()),
            None => Ok(()),
        }
    }
}
