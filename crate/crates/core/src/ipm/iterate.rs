//! Primal-dual iterate, residuals of the lifted KKT system and step control.

use serde::Serialize;

use super::lifted::LiftedNlp;
use super::{IpmError, SolverConfig};

/// Primal-dual point. Bound multipliers of absent (infinite) bounds are 0.
#[derive(Clone, Debug, PartialEq)]
pub struct IterateState {
    pub x: Vec<f64>,
    pub s: Vec<f64>,
    pub y: Vec<f64>,
    pub zl_x: Vec<f64>,
    pub zu_x: Vec<f64>,
    pub zl_s: Vec<f64>,
    pub zu_s: Vec<f64>,
    pub mu: f64,
}

/// Right-hand side of the lifted Newton system.
#[derive(Clone, Debug, PartialEq)]
pub struct Residuals {
    pub px: Vec<f64>,
    pub ps: Vec<f64>,
    pub py: Vec<f64>,
    pub pzl_x: Vec<f64>,
    pub pzu_x: Vec<f64>,
    pub pzl_s: Vec<f64>,
    pub pzu_s: Vec<f64>,
}

/// Step components in the sign convention of the lifted system: the update
/// is `x − αΔx`, `s − αΔs`, `y + αΔy`, `z − α_z Δz`.
#[derive(Clone, Debug, PartialEq)]
pub struct Direction {
    pub dx: Vec<f64>,
    pub ds: Vec<f64>,
    pub dy: Vec<f64>,
    pub dzl_x: Vec<f64>,
    pub dzu_x: Vec<f64>,
    pub dzl_s: Vec<f64>,
    pub dzu_s: Vec<f64>,
}

impl Direction {
    pub fn components(&self) -> [&[f64]; 7] {
        [&self.dx, &self.ds, &self.dy, &self.dzl_x, &self.dzu_x, &self.dzl_s, &self.dzu_s]
    }

    pub fn zeros(n: usize, m: usize) -> Self {
        Direction {
            dx: vec![0.0; n],
            ds: vec![0.0; m],
            dy: vec![0.0; m],
            dzl_x: vec![0.0; n],
            dzu_x: vec![0.0; n],
            dzl_s: vec![0.0; m],
            dzu_s: vec![0.0; m],
        }
    }

    /// Largest component-block relative difference
    /// `‖a − b‖∞ / max(1, ‖b‖∞)` over the seven blocks.
    pub fn relative_difference(&self, other: &Direction) -> f64 {
        self.components()
            .iter()
            .zip(other.components().iter())
            .map(|(a, b)| {
                let scale = b.iter().fold(1.0f64, |m, v| m.max(v.abs()));
                a.iter().zip(b.iter()).fold(0.0f64, |m, (u, v)| m.max((u - v).abs())) / scale
            })
            .fold(0.0, f64::max)
    }
}

/// Scaled KKT measures.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct KktError {
    pub stationarity: f64,
    pub feasibility: f64,
    pub complementarity: f64,
}

impl KktError {
    pub fn max(&self) -> f64 {
        self.stationarity.max(self.feasibility).max(self.complementarity)
    }
}

/// Push `v` into the interior of `[l, u]`. Two-sided boxes push by
/// `max(κ·max(1,|b|), κ·width)` capped at half the width; one-sided bounds by
/// `κ·max(1,|b|)`.
pub fn push_to_interior(v: f64, l: f64, u: f64, kappa: f64) -> f64 {
    let (hl, hu) = (l.is_finite(), u.is_finite());
    match (hl, hu) {
        (true, true) => {
            let w = u - l;
            let pl = (kappa * l.abs().max(1.0)).max(kappa * w).min(0.5 * w);
            let pu = (kappa * u.abs().max(1.0)).max(kappa * w).min(0.5 * w);
            v.max(l + pl).min(u - pu)
        }
        (true, false) => v.max(l + kappa * l.abs().max(1.0)),
        (false, true) => v.min(u - kappa * u.abs().max(1.0)),
        (false, false) => v,
    }
}

fn bound_multiplier(bound: f64) -> f64 {
    if bound.is_finite() {
        1.0
    } else {
        0.0
    }
}

/// Starting point: pushed primal start, slacks at the projection of `g(x₀)`,
/// `y = 0`, bound multipliers 1, `μ = μ_init`.
pub fn initialize(lifted: &LiftedNlp, config: &SolverConfig) -> Result<IterateState, IpmError> {
    let start = lifted.start();
    let x: Vec<f64> = (0..lifted.n)
        .map(|i| push_to_interior(start[i], lifted.x_lower[i], lifted.x_upper[i], config.push_kappa))
        .collect();
    let g = lifted.constraints(&x)?;
    let s: Vec<f64> = (0..lifted.m)
        .map(|i| push_to_interior(g[i], lifted.s_lower[i], lifted.s_upper[i], config.push_kappa))
        .collect();
    Ok(IterateState {
        zl_x: lifted.x_lower.iter().map(|&b| bound_multiplier(b)).collect(),
        zu_x: lifted.x_upper.iter().map(|&b| bound_multiplier(b)).collect(),
        zl_s: lifted.s_lower.iter().map(|&b| bound_multiplier(b)).collect(),
        zu_s: lifted.s_upper.iter().map(|&b| bound_multiplier(b)).collect(),
        y: vec![0.0; lifted.m],
        x,
        s,
        mu: config.mu_init,
    })
}

fn gap_lower(v: f64, l: f64) -> f64 {
    v - l
}

fn gap_upper(v: f64, u: f64) -> f64 {
    u - v
}

/// Residuals at `it` (barrier `it.mu`) given `∇f`, `g` and Jacobian values at `it.x`.
pub fn compute_residuals(lifted: &LiftedNlp, it: &IterateState, grad: &[f64], g: &[f64], jac: &[f64]) -> Residuals {
    compute_residuals_at(lifted, it, it.mu, grad, g, jac)
}

/// Residuals with the complementarity target `mu` in place of `it.mu`.
pub fn compute_residuals_at(lifted: &LiftedNlp, it: &IterateState, mu: f64, grad: &[f64], g: &[f64], jac: &[f64]) -> Residuals {
    let aty = lifted.jac_t_mul(jac, &it.y);
    let comp = |z: &[f64], v: &[f64], b: &[f64], lower: bool| -> Vec<f64> {
        (0..v.len())
            .map(|i| {
                if !b[i].is_finite() {
                    0.0
                } else if lower {
                    z[i] * gap_lower(v[i], b[i]) - mu
                } else {
                    z[i] * gap_upper(v[i], b[i]) - mu
                }
            })
            .collect()
    };
    Residuals {
        px: (0..lifted.n).map(|i| grad[i] - aty[i] - it.zl_x[i] + it.zu_x[i]).collect(),
        ps: (0..lifted.m).map(|i| -it.zl_s[i] + it.zu_s[i] + it.y[i]).collect(),
        py: (0..lifted.m).map(|i| g[i] - it.s[i]).collect(),
        pzl_x: comp(&it.zl_x, &it.x, &lifted.x_lower, true),
        pzu_x: comp(&it.zu_x, &it.x, &lifted.x_upper, false),
        pzl_s: comp(&it.zl_s, &it.s, &lifted.s_lower, true),
        pzu_s: comp(&it.zu_s, &it.s, &lifted.s_upper, false),
    }
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn l1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

/// Scaled KKT error of residuals computed at barrier `μ` (use `μ = 0` for the
/// termination test). Stationarity is divided by
/// `s_d = max(100, avg |multiplier|)/100` and complementarity by the same
/// quantity over bound multipliers only.
pub fn kkt_error(lifted: &LiftedNlp, it: &IterateState, r: &Residuals) -> KktError {
    let nz = [&lifted.x_lower, &lifted.x_upper, &lifted.s_lower, &lifted.s_upper]
        .iter()
        .map(|b| b.iter().filter(|v| v.is_finite()).count())
        .sum::<usize>();
    let zsum = l1(&it.zl_x) + l1(&it.zu_x) + l1(&it.zl_s) + l1(&it.zu_s);
    let count = lifted.m + nz;
    let s_d = if count > 0 { ((l1(&it.y) + zsum) / count as f64).max(100.0) / 100.0 } else { 1.0 };
    let s_c = if nz > 0 { (zsum / nz as f64).max(100.0) / 100.0 } else { 1.0 };
    KktError {
        stationarity: sup(&r.px).max(sup(&r.ps)) / s_d,
        feasibility: sup(&r.py),
        complementarity: sup(&r.pzl_x).max(sup(&r.pzu_x)).max(sup(&r.pzl_s)).max(sup(&r.pzu_s)) / s_c,
    }
}

/// Monotone barrier update: when the subproblem error is at most `κ_ε μ`,
/// `μ' = max(tol/10, min(κ_μ μ, μ^θ_μ))`; otherwise `μ` is kept.
pub fn update_barrier(mu: f64, subproblem_error: f64, config: &SolverConfig) -> f64 {
    let floor = config.tol / 10.0;
    if subproblem_error <= config.kappa_eps * mu && mu > floor {
        floor.max((config.kappa_mu * mu).min(mu.powf(config.theta_mu)))
    } else {
        mu
    }
}

fn max_step(v: &[f64], dv: &[f64], lower: &[f64], upper: &[f64], tau: f64) -> f64 {
    let mut alpha = 1.0f64;
    for i in 0..v.len() {
        // The update is v − α dv.
        let d = -dv[i];
        if lower[i].is_finite() && d < 0.0 {
            alpha = alpha.min(-tau * (v[i] - lower[i]) / d);
        }
        if upper[i].is_finite() && d > 0.0 {
            alpha = alpha.min(tau * (upper[i] - v[i]) / d);
        }
    }
    alpha
}

fn max_dual_step(z: &[f64], dz: &[f64], tau: f64) -> f64 {
    let mut alpha = 1.0f64;
    for i in 0..z.len() {
        let d = -dz[i];
        if z[i] > 0.0 && d < 0.0 {
            alpha = alpha.min(-tau * z[i] / d);
        }
    }
    alpha
}

/// Largest primal and dual steps in `(0, 1]` keeping every bound gap and every
/// multiplier at least a fraction `1 − τ` of its current value.
pub fn fraction_to_boundary(lifted: &LiftedNlp, it: &IterateState, dir: &Direction, tau: f64) -> (f64, f64) {
    let ap = max_step(&it.x, &dir.dx, &lifted.x_lower, &lifted.x_upper, tau)
        .min(max_step(&it.s, &dir.ds, &lifted.s_lower, &lifted.s_upper, tau));
    let ad = [(&it.zl_x, &dir.dzl_x), (&it.zu_x, &dir.dzu_x), (&it.zl_s, &dir.dzl_s), (&it.zu_s, &dir.dzu_s)]
        .iter()
        .map(|(z, dz)| max_dual_step(z, dz, tau))
        .fold(1.0, f64::min);
    (ap, ad)
}

/// Fraction-to-boundary for a single box-bounded scalar under the update
/// `v + α d`.
pub fn scalar_fraction_to_boundary(v: f64, d: f64, lower: f64, upper: f64, tau: f64) -> f64 {
    max_step(&[v], &[-d], &[lower], &[upper], tau)
}

/// Clip bound multipliers into `[μ/(κ_Σ·gap), κ_Σ·μ/gap]`.
pub fn clip_multipliers(lifted: &LiftedNlp, it: &mut IterateState, kappa_sigma: f64) {
    let mu = it.mu;
    let clip = |z: &mut [f64], v: &[f64], b: &[f64], lower: bool| {
        for i in 0..z.len() {
            if b[i].is_finite() {
                let gap = if lower { v[i] - b[i] } else { b[i] - v[i] };
                z[i] = z[i].max(mu / (kappa_sigma * gap)).min(kappa_sigma * mu / gap);
            }
        }
    };
    clip(&mut it.zl_x, &it.x, &lifted.x_lower, true);
    clip(&mut it.zu_x, &it.x, &lifted.x_upper, false);
    clip(&mut it.zl_s, &it.s, &lifted.s_lower, true);
    clip(&mut it.zu_s, &it.s, &lifted.s_upper, false);
}

/// Whether every finite bound gap and every bound multiplier is positive.
pub fn is_strictly_interior(lifted: &LiftedNlp, it: &IterateState) -> bool {
    let ok = |v: &[f64], l: &[f64], u: &[f64], zl: &[f64], zu: &[f64]| {
        (0..v.len()).all(|i| {
            (!l[i].is_finite() || (v[i] > l[i] && zl[i] > 0.0)) && (!u[i].is_finite() || (v[i] < u[i] && zu[i] > 0.0))
        })
    };
    ok(&it.x, &lifted.x_lower, &lifted.x_upper, &it.zl_x, &it.zu_x)
        && ok(&it.s, &lifted.s_lower, &lifted.s_upper, &it.zl_s, &it.zu_s)
}

/// Log-barrier objective `f − μ Σ log(gaps)` over x and s bounds.
pub fn barrier_objective(lifted: &LiftedNlp, x: &[f64], s: &[f64], f: f64, mu: f64) -> f64 {
    let mut b = 0.0;
    let mut add = |v: &[f64], l: &[f64], u: &[f64]| {
        for i in 0..v.len() {
            if l[i].is_finite() {
                b += (v[i] - l[i]).ln();
            }
            if u[i].is_finite() {
                b += (u[i] - v[i]).ln();
            }
        }
    };
    add(x, &lifted.x_lower, &lifted.x_upper);
    add(s, &lifted.s_lower, &lifted.s_upper);
    f - mu * b
}

/// Directional derivative of the barrier objective along the primal update
/// `(−Δx, −Δs)`.
pub fn barrier_directional_derivative(lifted: &LiftedNlp, it: &IterateState, grad: &[f64], dir: &Direction) -> f64 {
    let mut d = 0.0;
    let mut add = |v: &[f64], dv: &[f64], g: Option<&[f64]>, l: &[f64], u: &[f64]| {
        for i in 0..v.len() {
            let mut gi = g.map_or(0.0, |g| g[i]);
            if l[i].is_finite() {
                gi -= it.mu / (v[i] - l[i]);
            }
            if u[i].is_finite() {
                gi += it.mu / (u[i] - v[i]);
            }
            d -= gi * dv[i];
        }
    };
    add(&it.x, &dir.dx, Some(grad), &lifted.x_lower, &lifted.x_upper);
    add(&it.s, &dir.ds, None, &lifted.s_lower, &lifted.s_upper);
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn push_rule() {
        assert_eq!(push_to_interior(0.0, 0.0, 10.0, 1e-2), 0.1);
        assert_eq!(push_to_interior(3.0, f64::NEG_INFINITY, f64::INFINITY, 1e-2), 3.0);
        assert_eq!(push_to_interior(0.0, 0.0, f64::INFINITY, 1e-2), 0.01);
        assert_eq!(push_to_interior(0.0, -1e-4, 1e-4, 1e-2), 0.0);
        assert_eq!(push_to_interior(5.0, -1e-4, 1e-4, 1e-2), 0.0);
    }

    #[test]
    fn scalar_fraction_to_boundary_closed_form() {
        assert_eq!(scalar_fraction_to_boundary(1.0, -2.0, 0.0, f64::INFINITY, 0.99), 0.495);
        assert_eq!(scalar_fraction_to_boundary(1.0, 2.0, 0.0, f64::INFINITY, 0.99), 1.0);
    }

    #[test]
    fn barrier_update_formula() {
        let c = SolverConfig::default();
        assert!((update_barrier(0.1, 0.0, &c) - 0.02).abs() < 1e-15);
        assert_eq!(update_barrier(1e-5, 0.0, &c), 1e-5);
        assert_eq!(update_barrier(0.1, 10.0, &c), 0.1);
    }
}
